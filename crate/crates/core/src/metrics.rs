//! Reader SNR, the on/off SNR difference that drives the energy detector,
//! its bit error rate, the QoS test, and the legacy-device SNR.
//!
//! All ratios are linear internally. dB only appears through the
//! conversion helpers.

use num_complex::Complex;

use crate::channel::{equivalent_channel, ChannelVector, ModulationFactor, ScalarChannel};
use crate::error::{Error, Result};
use crate::precoding::Precoder;
use crate::scalar::{Real, Wide, WideComplex};

pub fn db_to_linear<T: Real>(db: T) -> T {
    T::of(10.0).powf(db / T::of(10.0))
}

pub fn linear_to_db<T: Real>(linear: T) -> T {
    T::of(10.0) * linear.log10()
}

/// Complementary error function.
///
/// Delegates to the `libm` port of the FreeBSD msun implementation
/// (rational approximations per interval, error below 1 ulp in `f64`).
pub fn erfc<T: Real>(x: T) -> T {
    T::of(libm::erfc(x.as_f64()))
}

/// Inverse of [`erfc`] on `(0, 2)` by bisection to `1e-10` absolute.
pub fn erfc_inv<T: Real>(y: T) -> Result<T> {
    let y = y.as_f64();
    if !(y > 0.0 && y < 2.0) {
        return Err(Error::invalid(
            "erfc_inv",
            format!("argument must lie in (0, 2), got {y}"),
        ));
    }
    if y > 1.0 {
        return erfc_inv(T::of(2.0 - y)).map(|x| -x);
    }
    // erfc(27) underflows to a subnormal; every y in (0, 1] is bracketed.
    let (mut lo, mut hi) = (0.0f64, 27.0f64);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if libm::erfc(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(T::of(0.5 * (lo + hi)))
}

/// `G·P_u/P_noise`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct IlluminationSnr<T>(T);

impl<T: Real> IlluminationSnr<T> {
    pub fn from_linear(linear: T) -> Result<Self> {
        if linear > T::zero() && linear.is_finite() {
            Ok(Self(linear))
        } else {
            Err(Error::invalid(
                "snr_illum",
                format!("must be positive, got {linear}"),
            ))
        }
    }

    pub fn from_db(db: T) -> Result<Self> {
        Self::from_linear(db_to_linear(db))
    }

    pub fn linear(&self) -> T {
        self.0
    }

    pub fn db(&self) -> T {
        linear_to_db(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DeltaSnr<T>(T);

impl<T: Real> DeltaSnr<T> {
    pub(crate) fn new(linear: T) -> Self {
        debug_assert!(!(linear < T::zero()));
        Self(linear)
    }

    pub fn from_linear(linear: T) -> Result<Self> {
        if linear >= T::zero() {
            Ok(Self(linear))
        } else {
            Err(Error::invalid(
                "delta_snr",
                format!("must be nonnegative, got {linear}"),
            ))
        }
    }

    pub fn from_db(db: T) -> Self {
        Self(db_to_linear(db))
    }

    pub fn linear(&self) -> T {
        self.0
    }

    pub fn db(&self) -> T {
        linear_to_db(self.0)
    }
}

/// Target BER and the ΔSNR the detector needs to reach it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosTarget<T> {
    ber_target: T,
    delta_snr_target: T,
}

impl<T: Real> QosTarget<T> {
    /// `ΔSNR_target = erfc⁻¹(2·BER)`.
    pub fn from_ber(ber_target: T) -> Result<Self> {
        if !(ber_target > T::zero() && ber_target < T::of(0.5)) {
            return Err(Error::invalid(
                "ber_target",
                format!("must lie in (0, 0.5), got {ber_target}"),
            ));
        }
        Ok(Self {
            ber_target,
            delta_snr_target: erfc_inv(T::of(2.0) * ber_target)?,
        })
    }

    /// Explicit threshold; the BER is kept for reporting only.
    pub fn with_threshold_db(ber_target: T, delta_snr_target_db: T) -> Result<Self> {
        let mut q = Self::from_ber(ber_target)?;
        if !delta_snr_target_db.is_finite() {
            return Err(Error::invalid("delta_snr_target_db", "must be finite"));
        }
        q.delta_snr_target = db_to_linear(delta_snr_target_db);
        Ok(q)
    }

    pub fn ber_target(&self) -> T {
        self.ber_target
    }

    pub fn delta_snr_target(&self) -> T {
        self.delta_snr_target
    }

    pub fn delta_snr_target_db(&self) -> T {
        linear_to_db(self.delta_snr_target)
    }
}

impl<T: Real> Default for QosTarget<T> {
    fn default() -> Self {
        Self::from_ber(T::of(1e-3)).expect("default BER is valid")
    }
}

/// Channels and link budget for one tag/reader placement.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSample<T> {
    pub h_st: ChannelVector<T>,
    pub h_sr: ChannelVector<T>,
    pub h_tr: ScalarChannel<T>,
    pub snr_illum: IlluminationSnr<T>,
    pub gamma: ModulationFactor<T>,
}

impl<T: Real> LinkSample<T> {
    pub fn new(
        h_st: ChannelVector<T>,
        h_sr: ChannelVector<T>,
        h_tr: ScalarChannel<T>,
        snr_illum: IlluminationSnr<T>,
        gamma: ModulationFactor<T>,
    ) -> Result<Self> {
        if h_st.len() != h_sr.len() || h_st.is_empty() {
            return Err(Error::invalid(
                "link_sample",
                format!(
                    "channel lengths {} and {} must match and be nonzero",
                    h_st.len(),
                    h_sr.len()
                ),
            ));
        }
        Ok(Self {
            h_st,
            h_sr,
            h_tr,
            snr_illum,
            gamma,
        })
    }
}

/// `|(γ·h_TR·h_ST + h_SR)·p|² · SNR_illum`.
pub fn received_snr<T: Real>(sample: &LinkSample<T>, gamma: T, p: &Precoder<T>) -> T {
    let heq = equivalent_channel(gamma, sample.h_tr, &sample.h_st, &sample.h_sr)
        .expect("LinkSample channels have equal length");
    heq.project(p).norm_sqr() * sample.snr_illum.linear()
}

/// ΔSNR per unit illumination from the backscattered term `u = h_TR·h_ST·p`
/// and the direct term `v = h_SR·p`:
/// `|(γ_on² − γ_off²)·|u|² + 2(γ_on − γ_off)·Re(u·v*)|`.
pub fn delta_from_terms<T: Real>(gamma: &ModulationFactor<T>, u: Complex<T>, v: Complex<T>) -> T {
    let quad = gamma.gamma_on() * gamma.gamma_on() - gamma.gamma_off() * gamma.gamma_off();
    let lin = gamma.gamma_on() - gamma.gamma_off();
    (quad * u.norm_sqr() + T::of(2.0) * lin * (u * v.conj()).re).abs()
}

/// [`delta_from_terms`] with `u = h_TR·(h_ST·p)` and `v = h_SR·p` formed and
/// combined in double-length arithmetic; `illumination` is `h_ST·p`.
pub(crate) fn delta_from_terms_wide<T: Real>(
    gamma: &ModulationFactor<T>,
    h_tr: ScalarChannel<T>,
    illumination: WideComplex<T>,
    h_sr: &ChannelVector<T>,
    p: &Precoder<T>,
) -> T {
    let u = WideComplex::exact(h_tr.value()).mul(illumination);
    let v = project_wide(h_sr, p);
    let (on, off) = (
        Wide::exact(gamma.gamma_on()),
        Wide::exact(gamma.gamma_off()),
    );
    let quad = on.mul(on).sub(off.mul(off));
    let lin = on.sub(off);
    let cross = u.re.mul(v.re).add(u.im.mul(v.im));
    let two_lin = lin.add(lin);
    quad.mul(u.norm_sqr()).add(two_lin.mul(cross)).value().abs()
}

/// `h·p` in double-length arithmetic, over the precoder's antennas.
pub(crate) fn project_wide<T: Real>(h: &ChannelVector<T>, p: &Precoder<T>) -> WideComplex<T> {
    h.coefficients()
        .iter()
        .zip(p.weights())
        .fold(WideComplex::zero(), |acc, (a, w)| {
            acc.add(WideComplex::exact(*a).mul(WideComplex::exact(*w)))
        })
}

/// On/off closed form `||h_TR h_ST p|² + 2Re(h_TR h_ST p (h_SR p)*)| · SNR_illum`.
///
/// Requires `γ_on = 1`, `γ_off = 0`; use [`delta_snr_general`] otherwise.
pub fn delta_snr<T: Real>(sample: &LinkSample<T>, p: &Precoder<T>) -> Result<DeltaSnr<T>> {
    if !sample.gamma.is_on_off() {
        return Err(Error::Unsupported(
            "closed-form delta SNR assumes gamma_on = 1 and gamma_off = 0",
        ));
    }
    let u = sample.h_tr.value() * sample.h_st.project(p);
    let v = sample.h_sr.project(p);
    let unit = (u.norm_sqr() + T::of(2.0) * (u * v.conj()).re).abs();
    Ok(DeltaSnr(unit * sample.snr_illum.linear()))
}

/// `|SNR_on − SNR_off|` from two receive-SNR evaluations.
///
/// The two SNRs are nearly equal wherever the direct signal dominates, so
/// both are carried in double-length arithmetic up to the subtraction; the
/// result is accurate to working precision even close to `ΔSNR = 0`.
pub fn delta_snr_general<T: Real>(sample: &LinkSample<T>, p: &Precoder<T>) -> DeltaSnr<T> {
    let on = wide_received(sample, sample.gamma.gamma_on(), p);
    let off = wide_received(sample, sample.gamma.gamma_off(), p);
    let snr = Wide::exact(sample.snr_illum.linear());
    DeltaSnr(on.sub(off).mul(snr).value().abs())
}

/// `|(γ·h_TR·h_ST + h_SR)·p|²` in double-length arithmetic.
fn wide_received<T: Real>(sample: &LinkSample<T>, gamma: T, p: &Precoder<T>) -> Wide<T> {
    let g = WideComplex::exact(sample.h_tr.value()).scale(Wide::exact(gamma));
    let x = sample
        .h_st
        .coefficients()
        .iter()
        .zip(sample.h_sr.coefficients())
        .zip(p.weights())
        .fold(WideComplex::zero(), |acc, ((st, sr), w)| {
            let heq = g.mul(WideComplex::exact(*st)).add(WideComplex::exact(*sr));
            acc.add(heq.mul(WideComplex::exact(*w)))
        });
    x.norm_sqr()
}

/// Energy-detector BER `½·erfc(ΔSNR)`, linear argument.
pub fn ber_from_delta<T: Real>(d: DeltaSnr<T>) -> T {
    T::of(0.5) * erfc(d.linear())
}

/// Strict `ΔSNR > ΔSNR_target`.
pub fn qos_met<T: Real>(d: DeltaSnr<T>, target: &QosTarget<T>) -> bool {
    d.linear() > target.delta_snr_target
}

/// `|h_D·p|² · SNR_illum`.
pub fn legacy_snr<T: Real>(
    h_d: &ChannelVector<T>,
    p: &Precoder<T>,
    snr_illum: IlluminationSnr<T>,
) -> Result<T> {
    if p.len() > h_d.len() {
        return Err(Error::invalid(
            "legacy_channel",
            format!(
                "{} weights for a {}-antenna device channel",
                p.len(),
                h_d.len()
            ),
        ));
    }
    Ok(h_d.project(p).norm_sqr() * snr_illum.linear())
}

/// Per-scheme ΔSNR expressions in terms of the normalizers, per unit
/// illumination and for on/off tag states.
pub mod closed_form {
    use super::*;

    /// `|α‖h_ST‖²h_TR|² + 2Re(α²‖h_ST‖²h_TR·(h_SR h_ST†)*)|` with
    /// `α = 1/‖h_ST‖`.
    pub fn mrt<T: Real>(
        h_st: &ChannelVector<T>,
        h_sr: &ChannelVector<T>,
        h_tr: ScalarChannel<T>,
    ) -> T {
        let n2 = h_st.norm_sqr();
        let alpha = n2.sqrt().recip();
        let proj = crate::scalar::inner(h_st.coefficients(), h_sr.coefficients());
        let useful = (h_tr.value() * (alpha * n2)).norm_sqr();
        let cross = (h_tr.value() * (alpha * alpha * n2) * proj.conj()).re;
        (useful + T::of(2.0) * cross).abs()
    }

    /// `|α_ZF·h_TR|²`.
    pub fn zf<T: Real>(alpha_zf: T, h_tr: ScalarChannel<T>) -> T {
        (h_tr.value() * alpha_zf).norm_sqr()
    }

    /// `|α·δ·h_TR|² + 2Re(α²δ·h_TR·(√(1−δ²)e^{jφ})*)|`.
    pub fn cc<T: Real>(alpha_cc: T, phi: T, delta: T, h_tr: ScalarChannel<T>) -> T {
        let s = (T::one() - delta * delta).sqrt();
        let useful = (h_tr.value() * (alpha_cc * delta)).norm_sqr();
        let cross =
            (h_tr.value() * (alpha_cc * alpha_cc * delta) * Complex::from_polar(s, phi).conj()).re;
        (useful + T::of(2.0) * cross).abs()
    }
}
