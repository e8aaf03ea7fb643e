//! Spatially correlated multipath channels.
//!
//! A [`PathSet`] is one draw of the scattering environment: `M` plane waves,
//! each leaving the source array at an angle of departure and reaching the
//! tag/reader area at an angle of arrival. Evaluating it at a local point
//! gives the `K` small-scale coefficients between the array and that point:
//!
//! ```text
//! h_k(z) = Σ_m α_m · exp(j·(φ_m − κ·θ_{k,m}))
//! θ_{k,m} = Δx_k·cos(AoD_m) + Δy_k·sin(AoD_m) + x·cos(AoA_m) + y·sin(AoA_m)
//! ```
//!
//! with `κ = 2πf/c` and `(Δx_k, Δy_k)` the offset of antenna `k` from
//! antenna 1. Points sharing a path set see correlated channels; independent
//! path sets give independent channels.

use std::fmt::Write as _;

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::precoding::Precoder;
use crate::scalar::{bilinear, norm_sqr, Real};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default carrier, Hz.
pub const DEFAULT_CARRIER_HZ: f64 = 2.4e9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConfig<T> {
    carrier_frequency: T,
    wavelength: T,
}

impl<T: Real> PhysicalConfig<T> {
    pub fn new(carrier_frequency: T) -> Result<Self> {
        if !(carrier_frequency > T::zero()) || !carrier_frequency.is_finite() {
            return Err(Error::invalid(
                "carrier_frequency",
                format!("must be positive and finite, got {carrier_frequency}"),
            ));
        }
        Ok(Self {
            carrier_frequency,
            wavelength: T::of(SPEED_OF_LIGHT) / carrier_frequency,
        })
    }

    pub fn carrier_frequency(&self) -> T {
        self.carrier_frequency
    }

    pub fn light_speed(&self) -> T {
        T::of(SPEED_OF_LIGHT)
    }

    pub fn wavelength(&self) -> T {
        self.wavelength
    }

    /// `2π/λ`, rad/m.
    pub fn wavenumber(&self) -> T {
        T::two_pi() / self.wavelength
    }

    /// Smallest tag-to-reader distance the free-space model accepts.
    pub fn far_field_bound(&self) -> T {
        self.wavelength / T::of(2.0)
    }
}

impl<T: Real> Default for PhysicalConfig<T> {
    fn default() -> Self {
        Self::new(T::of(DEFAULT_CARRIER_HZ)).expect("default carrier is valid")
    }
}

/// Uniform planar array on a `lines × columns` lattice.
///
/// Element `k = line·columns + column` sits at `(line·d, column·d)`; element 0
/// is the array origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarArray<T> {
    lines: usize,
    columns: usize,
    spacing: T,
    positions: Vec<[T; 2]>,
}

impl<T: Real> PlanarArray<T> {
    pub fn new(lines: usize, columns: usize, spacing: T) -> Result<Self> {
        if lines == 0 || columns == 0 {
            return Err(Error::invalid(
                "array",
                format!("lines and columns must be >= 1, got {lines}x{columns}"),
            ));
        }
        if !(spacing > T::zero()) || !spacing.is_finite() {
            return Err(Error::invalid(
                "element_spacing",
                format!("must be positive, got {spacing}"),
            ));
        }
        let positions = (0..lines)
            .flat_map(|l| {
                (0..columns).map(move |c| [T::of(l as f64) * spacing, T::of(c as f64) * spacing])
            })
            .collect();
        Ok(Self {
            lines,
            columns,
            spacing,
            positions,
        })
    }

    /// Array with λ/2 element spacing.
    pub fn half_wavelength(lines: usize, columns: usize, phys: &PhysicalConfig<T>) -> Result<Self> {
        Self::new(lines, columns, phys.wavelength() / T::of(2.0))
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn lines(&self) -> usize {
        self.lines
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn positions(&self) -> &[[T; 2]] {
        &self.positions
    }
}

/// One scattering path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path<T> {
    pub gain: Complex<T>,
    pub aod: T,
    pub aoa: T,
    pub phase: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet<T> {
    paths: Vec<Path<T>>,
}

impl<T: Real> PathSet<T> {
    /// Draws `m` paths: gains `(a + jb)/√(2m)` with `a, b ~ N(0, 1)`, angles
    /// and phases uniform on `[0, 2π)`.
    ///
    /// Per path the stream is consumed as `a, b, AoD, AoA, φ`.
    pub fn sample<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("paths", "at least one path is required"));
        }
        let scale = (2.0 * m as f64).sqrt().recip();
        let tau = std::f64::consts::TAU;
        let paths = (0..m)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                let aod = rng.random::<f64>() * tau;
                let aoa = rng.random::<f64>() * tau;
                let phase = rng.random::<f64>() * tau;
                Path {
                    gain: Complex::new(T::of(re * scale), T::of(im * scale)),
                    aod: T::of(aod),
                    aoa: T::of(aoa),
                    phase: T::of(phase),
                }
            })
            .collect();
        Ok(Self { paths })
    }

    pub fn from_paths(paths: Vec<Path<T>>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::invalid("paths", "at least one path is required"));
        }
        let finite = paths.iter().all(|p| {
            p.gain.re.is_finite()
                && p.gain.im.is_finite()
                && p.aod.is_finite()
                && p.aoa.is_finite()
                && p.phase.is_finite()
        });
        if !finite {
            return Err(Error::invalid(
                "paths",
                "all gains and angles must be finite",
            ));
        }
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[Path<T>] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// `Σ_m |α_m|²`.
    pub fn total_power(&self) -> T {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }

    /// Text fixture: one line per path with 1-based index, `Re α`, `Im α`,
    /// AoD, AoA and φ (radians), each to 17 significant digits.
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        out.push_str("# index re_gain im_gain aod aoa phase\n");
        for (i, p) in self.paths.iter().enumerate() {
            let _ = writeln!(
                out,
                "{} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
                i + 1,
                p.gain.re.as_f64(),
                p.gain.im.as_f64(),
                p.aod.as_f64(),
                p.aoa.as_f64(),
                p.phase.as_f64()
            );
        }
        out
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut paths = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: String| Error::Record {
                line: n + 1,
                reason,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(bad(format!("expected 6 fields, found {}", fields.len())));
            }
            let index: usize = fields[0]
                .parse()
                .map_err(|_| bad(format!("bad index `{}`", fields[0])))?;
            if index != paths.len() + 1 {
                return Err(bad(format!(
                    "expected index {}, found {index}",
                    paths.len() + 1
                )));
            }
            let mut v = [0.0f64; 5];
            for (slot, f) in v.iter_mut().zip(&fields[1..]) {
                *slot = f.parse().map_err(|_| bad(format!("bad number `{f}`")))?;
            }
            paths.push(Path {
                gain: Complex::new(T::of(v[0]), T::of(v[1])),
                aod: T::of(v[2]),
                aoa: T::of(v[3]),
                phase: T::of(v[4]),
            });
        }
        Self::from_paths(paths)
    }
}

/// Local coordinates in the tag/reader area, m.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldPoint<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> FieldPoint<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Point at `distance` from `self` in direction `angle`.
    pub fn towards(&self, angle: T, distance: T) -> Self {
        Self {
            x: self.x + distance * angle.cos(),
            y: self.y + distance * angle.sin(),
        }
    }
}

/// Small-scale coefficients between the `K` source antennas and one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector<T>(Vec<Complex<T>>);

impl<T: Real> ChannelVector<T> {
    pub fn new(coefficients: Vec<Complex<T>>) -> Self {
        Self(coefficients)
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![Complex::new(T::zero(), T::zero()); k])
    }

    pub fn coefficients(&self) -> &[Complex<T>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sqr(&self) -> T {
        norm_sqr(&self.0)
    }

    /// `h·p`. A precoder shorter than the channel drives the leading
    /// antennas only (the single-antenna reference uses antenna 1).
    ///
    /// # Panics
    /// If the precoder has more weights than the channel has antennas.
    pub fn project(&self, p: &Precoder<T>) -> Complex<T> {
        let w = p.weights();
        assert!(
            w.len() <= self.0.len(),
            "precoder has {} weights for a {}-antenna channel",
            w.len(),
            self.0.len()
        );
        bilinear(&self.0[..w.len()], w)
    }

    pub fn scale(&self, factor: Complex<T>) -> Self {
        Self(self.0.iter().map(|c| c * factor).collect())
    }
}

/// Direct, path-by-path evaluation of the channel at `z`.
pub fn evaluate_channel<T: Real>(
    ps: &PathSet<T>,
    array: &PlanarArray<T>,
    z: FieldPoint<T>,
    phys: &PhysicalConfig<T>,
) -> ChannelVector<T> {
    let kappa = phys.wavenumber();
    let origin = array.positions()[0];
    let coefficients = array
        .positions()
        .iter()
        .map(|pos| {
            let dx = pos[0] - origin[0];
            let dy = pos[1] - origin[1];
            ps.paths()
                .iter()
                .map(|path| {
                    let theta = dx * path.aod.cos()
                        + dy * path.aod.sin()
                        + z.x * path.aoa.cos()
                        + z.y * path.aoa.sin();
                    path.gain * Complex::from_polar(T::one(), path.phase - kappa * theta)
                })
                .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
        })
        .collect();
    ChannelVector(coefficients)
}

/// A path set bound to an array and carrier, with the departure-side phase
/// terms precomputed so repeated evaluations cost one `K×M` product.
#[derive(Debug, Clone)]
pub struct ChannelField<T> {
    phys: PhysicalConfig<T>,
    antennas: usize,
    paths: usize,
    /// Row-major `K×M`: `α_m·exp(j(φ_m − κ(Δx_k cos AoD_m + Δy_k sin AoD_m)))`.
    departure: Vec<Complex<T>>,
    /// `κ·(cos AoA_m, sin AoA_m)`.
    arrival: Vec<[T; 2]>,
}

impl<T: Real> ChannelField<T> {
    pub fn new(ps: &PathSet<T>, array: &PlanarArray<T>, phys: &PhysicalConfig<T>) -> Self {
        let kappa = phys.wavenumber();
        let origin = array.positions()[0];
        let mut departure = Vec::with_capacity(array.len() * ps.len());
        for pos in array.positions() {
            let dx = pos[0] - origin[0];
            let dy = pos[1] - origin[1];
            for path in ps.paths() {
                let theta = dx * path.aod.cos() + dy * path.aod.sin();
                departure
                    .push(path.gain * Complex::from_polar(T::one(), path.phase - kappa * theta));
            }
        }
        let arrival = ps
            .paths()
            .iter()
            .map(|p| [kappa * p.aoa.cos(), kappa * p.aoa.sin()])
            .collect();
        Self {
            phys: *phys,
            antennas: array.len(),
            paths: ps.len(),
            departure,
            arrival,
        }
    }

    pub fn phys(&self) -> &PhysicalConfig<T> {
        &self.phys
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    fn arrival_phasors(&self, z: FieldPoint<T>) -> Vec<Complex<T>> {
        self.arrival
            .iter()
            .map(|[cx, cy]| Complex::from_polar(T::one(), -(z.x * *cx + z.y * *cy)))
            .collect()
    }

    pub fn at(&self, z: FieldPoint<T>) -> ChannelVector<T> {
        let e = self.arrival_phasors(z);
        ChannelVector(
            self.departure
                .chunks_exact(self.paths)
                .map(|row| bilinear(row, &e))
                .collect(),
        )
    }

    /// First `n` coefficients only.
    pub fn leading_at(&self, z: FieldPoint<T>, n: usize) -> ChannelVector<T> {
        let e = self.arrival_phasors(z);
        ChannelVector(
            self.departure
                .chunks_exact(self.paths)
                .take(n)
                .map(|row| bilinear(row, &e))
                .collect(),
        )
    }
}

/// Free-space tag-to-reader coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarChannel<T>(pub Complex<T>);

impl<T: Real> ScalarChannel<T> {
    pub fn value(&self) -> Complex<T> {
        self.0
    }

    pub fn magnitude(&self) -> T {
        self.0.norm()
    }
}

/// `h = λ/(4πd) · exp(−j2πd/λ)`, valid for `d ≥ λ/2`.
pub fn friis_channel<T: Real>(d_tr: T, phys: &PhysicalConfig<T>) -> Result<ScalarChannel<T>> {
    let lambda = phys.wavelength();
    let bound = phys.far_field_bound();
    if !(d_tr >= bound) || !d_tr.is_finite() {
        return Err(Error::OutOfModelRange {
            distance: d_tr.as_f64(),
            bound: bound.as_f64(),
        });
    }
    let magnitude = lambda / (T::of(4.0) * T::PI() * d_tr);
    Ok(ScalarChannel(Complex::from_polar(
        magnitude,
        -(T::two_pi() * d_tr / lambda),
    )))
}

/// Tag reflection coefficient in its two states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationFactor<T> {
    gamma_on: T,
    gamma_off: T,
}

impl<T: Real> ModulationFactor<T> {
    pub fn new(gamma_on: T, gamma_off: T) -> Result<Self> {
        let unit = |g: T| g >= T::zero() && g <= T::one();
        if !unit(gamma_on) {
            return Err(Error::invalid(
                "gamma_on",
                format!("must lie in [0, 1], got {gamma_on}"),
            ));
        }
        if !unit(gamma_off) {
            return Err(Error::invalid(
                "gamma_off",
                format!("must lie in [0, 1], got {gamma_off}"),
            ));
        }
        Ok(Self {
            gamma_on,
            gamma_off,
        })
    }

    pub fn gamma_on(&self) -> T {
        self.gamma_on
    }

    pub fn gamma_off(&self) -> T {
        self.gamma_off
    }

    pub fn is_on_off(&self) -> bool {
        self.gamma_on == T::one() && self.gamma_off == T::zero()
    }
}

impl<T: Real> Default for ModulationFactor<T> {
    fn default() -> Self {
        Self {
            gamma_on: T::one(),
            gamma_off: T::zero(),
        }
    }
}

/// `γ·h_TR·h_ST + h_SR`. The long-term gain is carried by the illumination SNR.
pub fn equivalent_channel<T: Real>(
    gamma: T,
    h_tr: ScalarChannel<T>,
    h_st: &ChannelVector<T>,
    h_sr: &ChannelVector<T>,
) -> Result<ChannelVector<T>> {
    if h_st.len() != h_sr.len() {
        return Err(Error::invalid(
            "channels",
            format!("length mismatch: {} vs {}", h_st.len(), h_sr.len()),
        ));
    }
    let g = h_tr.value() * gamma;
    Ok(ChannelVector(
        h_st.0
            .iter()
            .zip(&h_sr.0)
            .map(|(st, sr)| g * st + sr)
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use approx::assert_relative_eq;

    fn phys() -> PhysicalConfig<f64> {
        PhysicalConfig::default()
    }

    #[test]
    fn wavelength_at_default_carrier() {
        assert_relative_eq!(
            phys().wavelength(),
            0.124_913_524_166_666_67,
            max_relative = 1e-15
        );
        assert!(PhysicalConfig::<f64>::new(0.0).is_err());
        assert!(PhysicalConfig::<f64>::new(-1.0).is_err());
    }

    #[test]
    fn array_layout() {
        let a = PlanarArray::new(2, 3, 0.5f64).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a.positions()[0], [0.0, 0.0]);
        assert_eq!(a.positions()[1], [0.0, 0.5]);
        assert_eq!(a.positions()[3], [0.5, 0.0]);
        assert_eq!(a.positions()[5], [0.5, 1.0]);
        assert!(PlanarArray::new(0, 3, 0.5f64).is_err());
        assert!(PlanarArray::new(2, 3, 0.0f64).is_err());
    }

    #[test]
    fn zero_paths_rejected() {
        let mut rng = stream(1, Purpose::Scratch, 0);
        assert!(matches!(
            PathSet::<f64>::sample(0, &mut rng),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn sample_ranges_and_determinism() {
        let ps = PathSet::<f64>::sample(100, &mut stream(5, Purpose::Scratch, 0)).unwrap();
        assert_eq!(ps.len(), 100);
        for p in ps.paths() {
            for a in [p.aod, p.aoa, p.phase] {
                assert!((0.0..std::f64::consts::TAU).contains(&a));
            }
        }
        let again = PathSet::<f64>::sample(100, &mut stream(5, Purpose::Scratch, 0)).unwrap();
        assert_eq!(ps, again);
    }

    #[test]
    fn single_path_has_flat_magnitude() {
        let p = phys();
        let ps = PathSet::<f64>::sample(1, &mut stream(2, Purpose::Scratch, 0)).unwrap();
        let array = PlanarArray::half_wavelength(8, 8, &p).unwrap();
        let h = evaluate_channel(&ps, &array, FieldPoint::new(0.3, -0.7), &p);
        let m0 = h.coefficients()[0].norm();
        for c in h.coefficients() {
            assert_relative_eq!(c.norm(), m0, max_relative = 1e-12);
        }
    }

    #[test]
    fn single_antenna_at_origin_sums_gains() {
        let p = phys();
        let ps = PathSet::<f64>::sample(20, &mut stream(3, Purpose::Scratch, 0)).unwrap();
        let array = PlanarArray::new(1, 1, 0.1).unwrap();
        let h = evaluate_channel(&ps, &array, FieldPoint::default(), &p);
        let expected: Complex<f64> = ps
            .paths()
            .iter()
            .map(|m| m.gain * Complex::from_polar(1.0, m.phase))
            .sum();
        assert_relative_eq!(h.coefficients()[0].re, expected.re, epsilon = 1e-15);
        assert_relative_eq!(h.coefficients()[0].im, expected.im, epsilon = 1e-15);
    }

    #[test]
    fn translation_rotates_each_path() {
        let p = phys();
        let ps = PathSet::<f64>::sample(1, &mut stream(4, Purpose::Scratch, 0)).unwrap();
        let array = PlanarArray::half_wavelength(2, 2, &p).unwrap();
        let delta = 0.037;
        let h0 = evaluate_channel(&ps, &array, FieldPoint::new(0.2, 0.1), &p);
        let h1 = evaluate_channel(&ps, &array, FieldPoint::new(0.2 + delta, 0.1), &p);
        let rot = Complex::from_polar(1.0, -p.wavenumber() * delta * ps.paths()[0].aoa.cos());
        for (a, b) in h0.coefficients().iter().zip(h1.coefficients()) {
            let r = a * rot;
            assert_relative_eq!(r.re, b.re, epsilon = 1e-13);
            assert_relative_eq!(r.im, b.im, epsilon = 1e-13);
        }
    }

    #[test]
    fn field_matches_direct_evaluation() {
        let p = phys();
        let ps = PathSet::<f64>::sample(100, &mut stream(9, Purpose::Scratch, 0)).unwrap();
        let array = PlanarArray::half_wavelength(8, 8, &p).unwrap();
        let field = ChannelField::new(&ps, &array, &p);
        for z in [
            FieldPoint::new(0.0, 0.0),
            FieldPoint::new(57.3, 12.9),
            FieldPoint::new(-0.4, 0.9),
        ] {
            let a = evaluate_channel(&ps, &array, z, &p);
            let b = field.at(z);
            let scale = a.norm_sqr().sqrt();
            for (x, y) in a.coefficients().iter().zip(b.coefficients()) {
                assert!((x - y).norm() < 1e-11 * scale.max(1.0));
            }
            let lead = field.leading_at(z, 3);
            assert_eq!(lead.coefficients(), &b.coefficients()[..3]);
        }
    }

    #[test]
    fn record_round_trip_is_exact() {
        let ps = PathSet::<f64>::sample(7, &mut stream(11, Purpose::Scratch, 0)).unwrap();
        let text = ps.to_record();
        assert_eq!(PathSet::<f64>::from_record(&text).unwrap(), ps);
    }

    #[test]
    fn malformed_record_reports_line() {
        let err = PathSet::<f64>::from_record("# hdr\n1 0 0 0 0 0\n3 0 0 0 0 0\n").unwrap_err();
        assert!(matches!(err, Error::Record { line: 3, .. }));
        assert!(PathSet::<f64>::from_record("# empty\n").is_err());
        assert!(PathSet::<f64>::from_record("1 0 0 x 0 0").is_err());
    }

    #[test]
    fn friis_values() {
        let p = phys();
        let lambda = p.wavelength();
        let h = friis_channel(lambda, &p).unwrap();
        assert_relative_eq!(
            h.magnitude(),
            1.0 / (4.0 * std::f64::consts::PI),
            max_relative = 1e-14
        );
        assert_relative_eq!(h.value().re, h.magnitude(), max_relative = 1e-12);
        assert!(h.value().im.abs() < 1e-15);

        let one = friis_channel(1.0, &p).unwrap();
        let oracle = (SPEED_OF_LIGHT / 2.4e9) / (4.0 * std::f64::consts::PI);
        assert_relative_eq!(one.magnitude(), oracle, max_relative = 1e-15);
        assert!((one.magnitude() - 0.009_940_4).abs() < 2e-7);
        assert_relative_eq!(20.0 * one.magnitude().log10(), -40.05, epsilon = 0.005);

        let two = friis_channel(2.0, &p).unwrap();
        assert_relative_eq!(two.magnitude() * 2.0, one.magnitude(), max_relative = 1e-14);

        assert!(friis_channel(p.far_field_bound(), &p).is_ok());
        assert!(matches!(
            friis_channel(0.9 * p.far_field_bound(), &p),
            Err(Error::OutOfModelRange { .. })
        ));
    }

    #[test]
    fn modulation_factor_bounds() {
        assert!(ModulationFactor::new(1.0f64, 0.0).unwrap().is_on_off());
        assert!(ModulationFactor::new(1.1f64, 0.0).is_err());
        assert!(ModulationFactor::new(0.5f64, -0.1).is_err());
    }

    #[test]
    fn equivalent_channel_cases() {
        let p = phys();
        let ps = PathSet::<f64>::sample(30, &mut stream(12, Purpose::Scratch, 0)).unwrap();
        let array = PlanarArray::half_wavelength(2, 4, &p).unwrap();
        let field = ChannelField::new(&ps, &array, &p);
        let h_st = field.at(FieldPoint::new(0.0, 0.0));
        let h_sr = field.at(FieldPoint::new(0.3, 0.0));
        let h_tr = friis_channel(0.3, &p).unwrap();

        assert_eq!(equivalent_channel(0.0, h_tr, &h_st, &h_sr).unwrap(), h_sr);
        let zero = ChannelVector::zeros(h_st.len());
        let only_tag = equivalent_channel(1.0, h_tr, &h_st, &zero).unwrap();
        for (a, b) in only_tag.coefficients().iter().zip(h_st.coefficients()) {
            assert_eq!(*a, h_tr.value() * b);
        }
        let g = 0.7;
        let eq = equivalent_channel(g, h_tr, &h_st, &h_sr).unwrap();
        for k in 0..h_st.len() {
            let oracle = h_tr.value() * h_st.coefficients()[k] * g + h_sr.coefficients()[k];
            assert!((eq.coefficients()[k] - oracle).norm() < 1e-15);
        }
        let short = ChannelVector::zeros(3);
        assert!(equivalent_channel(1.0, h_tr, &h_st, &short).is_err());
    }
}
