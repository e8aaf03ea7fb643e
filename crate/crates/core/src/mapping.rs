//! Spatial maps over a rectangular lattice of points.
//!
//! Fixed-precoder maps (`SNR_OFF`, `SNR_TR`, `ΔSNR`) hold the scenario's
//! precoder constant while the evaluation point moves. The detection
//! probability map `F_O` instead moves the reader and rebuilds ZF/CC for
//! every pixel and draw. Pixels are independent and evaluated in parallel;
//! the result does not depend on scheduling.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::channel::{
    friis_channel, ChannelField, FieldPoint, ModulationFactor, PathSet, PhysicalConfig, PlanarArray,
};
use crate::error::{Error, Result};
use crate::link::{adaptive_unit_delta, reader_antennas, TagSide};
use crate::metrics::{
    delta_from_terms_wide, linear_to_db, project_wide, qos_met, DeltaSnr, IlluminationSnr,
    QosTarget,
};
use crate::precoding::{CcGrid, Precoder, PrecoderKind};
use crate::rng::{stream, Purpose};
use crate::scalar::Real;

/// `nx × ny` points at `(x_min + i·step, y_min + j·step)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapGrid<T> {
    x_min: T,
    y_min: T,
    step: T,
    nx: usize,
    ny: usize,
}

impl<T: Real> MapGrid<T> {
    /// Lattice covering `[x_min, x_max] × [y_min, y_max]`; the upper bounds are
    /// included when they fall on the lattice.
    pub fn new(x_min: T, x_max: T, y_min: T, y_max: T, step: T) -> Result<Self> {
        if !(step > T::zero()) || !step.is_finite() {
            return Err(Error::invalid(
                "map.step",
                format!("must be positive, got {step}"),
            ));
        }
        if !(x_max >= x_min) || !(y_max >= y_min) {
            return Err(Error::invalid(
                "map bounds",
                "require x_min <= x_max and y_min <= y_max",
            ));
        }
        let count = |lo: T, hi: T| ((hi - lo) / step + T::of(1e-9)).floor().as_f64() as usize + 1;
        Ok(Self {
            x_min,
            y_min,
            step,
            nx: count(x_min, x_max),
            ny: count(y_min, y_max),
        })
    }

    pub fn centered(center: FieldPoint<T>, width: T, height: T, step: T) -> Result<Self> {
        let (hw, hh) = (width / T::of(2.0), height / T::of(2.0));
        Self::new(
            center.x - hw,
            center.x + hw,
            center.y - hh,
            center.y + hh,
            step,
        )
    }

    /// 4λ × 4λ window centred between tag and reader, step λ/16.
    pub fn default_window(
        tag: FieldPoint<T>,
        reader: FieldPoint<T>,
        phys: &PhysicalConfig<T>,
    ) -> Self {
        let lambda = phys.wavelength();
        let mid = FieldPoint::new(
            (tag.x + reader.x) / T::of(2.0),
            (tag.y + reader.y) / T::of(2.0),
        );
        Self::centered(
            mid,
            T::of(4.0) * lambda,
            T::of(4.0) * lambda,
            lambda / T::of(16.0),
        )
        .expect("positive wavelength")
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn x_min(&self) -> T {
        self.x_min
    }

    pub fn y_min(&self) -> T {
        self.y_min
    }

    pub fn x_max(&self) -> T {
        self.x(self.nx - 1)
    }

    pub fn y_max(&self) -> T {
        self.y(self.ny - 1)
    }

    pub fn x(&self, ix: usize) -> T {
        self.x_min + T::of(ix as f64) * self.step
    }

    pub fn y(&self, iy: usize) -> T {
        self.y_min + T::of(iy as f64) * self.step
    }

    /// Point of flat index `i` (rows of constant y, x fastest).
    pub fn point(&self, i: usize) -> FieldPoint<T> {
        FieldPoint::new(self.x(i % self.nx), self.y(i / self.nx))
    }

    /// Flat index of the lattice point closest to `z`, if inside the window.
    pub fn nearest(&self, z: FieldPoint<T>) -> Option<usize> {
        let ix = ((z.x - self.x_min) / self.step).round();
        let iy = ((z.y - self.y_min) / self.step).round();
        if ix < T::zero() || iy < T::zero() {
            return None;
        }
        let (ix, iy) = (ix.as_f64() as usize, iy.as_f64() as usize);
        (ix < self.nx && iy < self.ny).then_some(iy * self.nx + ix)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapQuantity {
    SnrOff,
    SnrTr,
    DeltaSnr,
    FO,
}

impl MapQuantity {
    pub fn name(self) -> &'static str {
        match self {
            Self::SnrOff => "snr_off",
            Self::SnrTr => "snr_tr",
            Self::DeltaSnr => "delta_snr",
            Self::FO => "f_o",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Self::FO => "percent",
            _ => "dB",
        }
    }
}

/// One value per lattice point; `None` marks pixels outside the model
/// (closer than λ/2 to the tag). SNR values are stored linear, `F_O` in
/// percent.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap<T> {
    pub grid: MapGrid<T>,
    pub quantity: MapQuantity,
    pub values: Vec<Option<T>>,
}

/// Provenance lines written above the data.
#[derive(Debug, Clone, Default)]
pub struct MapHeader {
    pub seed: u64,
    pub precoder: Option<PrecoderKind>,
    pub extra: Vec<(String, String)>,
}

impl<T: Real> ScalarMap<T> {
    pub fn get(&self, ix: usize, iy: usize) -> Option<T> {
        self.values[iy * self.grid.nx + ix]
    }

    /// Value in output units: dB for SNR maps, percent for `F_O`.
    pub fn emitted(&self, v: T) -> f64 {
        match self.quantity {
            MapQuantity::FO => v.as_f64(),
            _ => linear_to_db(v.as_f64()),
        }
    }

    fn header_lines(&self, header: &MapHeader, out: &mut String) {
        let g = &self.grid;
        let _ = writeln!(out, "# quantity = {}", self.quantity.name());
        let _ = writeln!(out, "# units = {}", self.quantity.unit());
        let _ = writeln!(out, "# x_min = {}", fmt9(g.x_min().as_f64()));
        let _ = writeln!(out, "# x_max = {}", fmt9(g.x_max().as_f64()));
        let _ = writeln!(out, "# y_min = {}", fmt9(g.y_min().as_f64()));
        let _ = writeln!(out, "# y_max = {}", fmt9(g.y_max().as_f64()));
        let _ = writeln!(out, "# step = {}", fmt9(g.step().as_f64()));
        let _ = writeln!(out, "# nx = {}", g.nx());
        let _ = writeln!(out, "# ny = {}", g.ny());
        let _ = writeln!(out, "# seed = {}", header.seed);
        if let Some(k) = header.precoder {
            let _ = writeln!(out, "# precoder = {k}");
        }
        for (k, v) in &header.extra {
            let _ = writeln!(out, "# {k} = {v}");
        }
    }

    fn cell(&self, v: Option<T>) -> String {
        v.map_or_else(|| "nan".to_string(), |v| fmt9(self.emitted(v)))
    }

    /// One row per lattice y (ascending), comma-separated columns per x.
    pub fn to_grid_text(&self, header: &MapHeader) -> String {
        let mut out = String::new();
        self.header_lines(header, &mut out);
        for row in self.values.chunks(self.grid.nx) {
            let cells: Vec<String> = row.iter().map(|v| self.cell(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// `x,y,value` rows.
    pub fn to_long_text(&self, header: &MapHeader) -> String {
        let mut out = String::new();
        self.header_lines(header, &mut out);
        out.push_str("x,y,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let z = self.grid.point(i);
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt9(z.x.as_f64()),
                fmt9(z.y.as_f64()),
                self.cell(*v)
            );
        }
        out
    }
}

/// Nine significant digits, scientific notation.
pub fn fmt9(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8e}")
    } else {
        format!("{v}")
    }
}

fn par_map<T: Real, F>(grid: &MapGrid<T>, quantity: MapQuantity, f: F) -> ScalarMap<T>
where
    F: Fn(FieldPoint<T>) -> Option<T> + Sync,
{
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| f(grid.point(i)))
        .collect();
    ScalarMap {
        grid: *grid,
        quantity,
        values,
    }
}

/// `|h(z)·p|²·SNR_illum` with the tag transparent.
pub fn map_snr_off<T: Real>(
    field: &ChannelField<T>,
    p: &Precoder<T>,
    snr_illum: IlluminationSnr<T>,
    grid: &MapGrid<T>,
) -> ScalarMap<T> {
    par_map(grid, MapQuantity::SnrOff, |z| {
        Some(field.leading_at(z, p.len()).project(p).norm_sqr() * snr_illum.linear())
    })
}

/// Backscattered power `|h_TR(z)·h_ST·p|²·SNR_illum` with the Friis channel
/// from the tag to each point.
pub fn map_snr_tr<T: Real>(
    field: &ChannelField<T>,
    p: &Precoder<T>,
    snr_illum: IlluminationSnr<T>,
    tag: FieldPoint<T>,
    grid: &MapGrid<T>,
) -> ScalarMap<T> {
    let illumination = field.leading_at(tag, p.len()).project(p);
    par_map(grid, MapQuantity::SnrTr, |z| {
        let h_tr = friis_channel(tag.distance(&z), field.phys()).ok()?;
        Some((h_tr.value() * illumination).norm_sqr() * snr_illum.linear())
    })
}

/// ΔSNR with the reader at each point and the precoder held fixed.
pub fn map_delta_snr<T: Real>(
    field: &ChannelField<T>,
    p: &Precoder<T>,
    snr_illum: IlluminationSnr<T>,
    tag: FieldPoint<T>,
    gamma: &ModulationFactor<T>,
    grid: &MapGrid<T>,
) -> ScalarMap<T> {
    let illumination = project_wide(&field.leading_at(tag, p.len()), p);
    par_map(grid, MapQuantity::DeltaSnr, |z| {
        let h_tr = friis_channel(tag.distance(&z), field.phys()).ok()?;
        let h_sz = field.leading_at(z, p.len());
        Some(delta_from_terms_wide(gamma, h_tr, illumination, &h_sz, p) * snr_illum.linear())
    })
}

/// Fixed part of an `F_O` map: tag position, precoder family and link budget.
#[derive(Debug, Clone)]
pub struct FoScenario<T> {
    pub kind: PrecoderKind,
    pub tag: FieldPoint<T>,
    pub snr_illum: IlluminationSnr<T>,
    pub gamma: ModulationFactor<T>,
    pub target: QosTarget<T>,
    pub cc_grid: CcGrid<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoMap<T> {
    pub map: ScalarMap<T>,
    pub draws: usize,
    /// `(draw, pixel)` pairs where ZF/CC could not be formed; each counts as
    /// QoS not met.
    pub ill_conditioned: usize,
}

/// Draws `n` independent environments from the map-ensemble streams.
pub fn sample_ensemble<T: Real>(
    n: usize,
    paths: usize,
    master_seed: u64,
    array: &PlanarArray<T>,
    phys: &PhysicalConfig<T>,
) -> Result<Vec<ChannelField<T>>> {
    (0..n as u64)
        .map(|i| {
            let ps = PathSet::sample(paths, &mut stream(master_seed, Purpose::MapEnsemble, i))?;
            Ok(ChannelField::new(&ps, array, phys))
        })
        .collect()
}

/// Percentage of draws meeting the QoS target with the reader at each pixel.
pub fn map_f_o<T: Real>(
    ensemble: &[ChannelField<T>],
    scenario: &FoScenario<T>,
    grid: &MapGrid<T>,
) -> Result<FoMap<T>> {
    let Some(first) = ensemble.first() else {
        return Err(Error::invalid("ensemble", "at least one draw is required"));
    };
    let tags = ensemble
        .iter()
        .map(|f| TagSide::new(f.at(scenario.tag)))
        .collect::<Result<Vec<_>>>()?;
    let n_rx = reader_antennas(scenario.kind, first.antennas());
    let pixels: Vec<(Option<T>, usize)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let z = grid.point(i);
            let Ok(h_tr) = friis_channel(scenario.tag.distance(&z), first.phys()) else {
                return (None, 0);
            };
            let mut met = 0usize;
            let mut ill = 0usize;
            for (field, tag) in ensemble.iter().zip(&tags) {
                let h_sr = field.leading_at(z, n_rx);
                match adaptive_unit_delta(
                    scenario.kind,
                    tag,
                    &h_sr,
                    h_tr,
                    &scenario.gamma,
                    &scenario.cc_grid,
                ) {
                    Ok(unit) => {
                        if qos_met(
                            DeltaSnr::new(unit * scenario.snr_illum.linear()),
                            &scenario.target,
                        ) {
                            met += 1;
                        }
                    }
                    Err(Error::IllConditioned { .. }) => ill += 1,
                    Err(e) => panic!("unexpected failure evaluating map pixel: {e}"),
                }
            }
            let pct = T::of(100.0 * met as f64 / ensemble.len() as f64);
            (Some(pct), ill)
        })
        .collect();
    let ill_conditioned = pixels.iter().map(|p| p.1).sum();
    Ok(FoMap {
        map: ScalarMap {
            grid: *grid,
            quantity: MapQuantity::FO,
            values: pixels.into_iter().map(|p| p.0).collect(),
        },
        draws: ensemble.len(),
        ill_conditioned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precoding::ref_precoder;

    #[test]
    fn grid_geometry() {
        let g = MapGrid::new(0.0f64, 1.0, -0.5, 0.5, 0.25).unwrap();
        assert_eq!((g.nx(), g.ny()), (5, 5));
        assert_eq!(g.point(0), FieldPoint::new(0.0, -0.5));
        assert_eq!(g.point(6), FieldPoint::new(0.25, -0.25));
        assert_eq!(g.nearest(FieldPoint::new(0.26, -0.24)), Some(6));
        assert_eq!(g.nearest(FieldPoint::new(3.0, 0.0)), None);
        assert!(MapGrid::new(0.0f64, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(MapGrid::new(1.0f64, 0.0, 0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn default_window_size() {
        let phys = PhysicalConfig::<f64>::default();
        let lambda = phys.wavelength();
        let g = MapGrid::default_window(
            FieldPoint::new(0.0, 0.0),
            FieldPoint::new(2.0 * lambda, 0.0),
            &phys,
        );
        assert_eq!((g.nx(), g.ny()), (65, 65));
        assert!((g.x_min() + lambda).abs() < 1e-15);
    }

    #[test]
    fn text_outputs() {
        let g = MapGrid::new(0.0f64, 0.2, 0.0, 0.1, 0.1).unwrap();
        let m = ScalarMap {
            grid: g,
            quantity: MapQuantity::SnrOff,
            values: vec![
                Some(1.0),
                Some(10.0),
                None,
                Some(100.0),
                Some(0.5),
                Some(2.0),
            ],
        };
        let h = MapHeader {
            seed: 3,
            precoder: Some(PrecoderKind::Zf),
            extra: vec![],
        };
        let grid = m.to_grid_text(&h);
        let rows: Vec<&str> = grid.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], "0.00000000e0,1.00000000e1,nan");
        assert!(grid.contains("# precoder = ZF"));
        let long = m.to_long_text(&h);
        assert!(long.contains("x,y,value\n0.00000000e0,0.00000000e0,0.00000000e0\n"));
        assert_eq!(long.lines().filter(|l| !l.starts_with('#')).count(), 7);
    }

    #[test]
    fn empty_ensemble_rejected() {
        let s = FoScenario {
            kind: PrecoderKind::Ref,
            tag: FieldPoint::new(0.0f64, 0.0),
            snr_illum: IlluminationSnr::from_db(24.0).unwrap(),
            gamma: ModulationFactor::default(),
            target: QosTarget::default(),
            cc_grid: CcGrid::zf_only(),
        };
        let g = MapGrid::new(0.0, 0.1, 0.0, 0.1, 0.05).unwrap();
        assert!(map_f_o(&[], &s, &g).is_err());
        let _ = ref_precoder::<f64>();
    }
}
