//! Transmit precoders built from the known source-to-tag and source-to-reader
//! channels. The tag-to-reader channel is never used to build weights; the
//! coherent-combining search only scores candidate beams with it, the way a
//! reader scores pilot beams and feeds back the best index.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use crate::channel::{ChannelVector, ModulationFactor, ScalarChannel};
use crate::error::{Error, Result};
use crate::metrics::DeltaSnr;
use crate::scalar::{inner, norm_sqr, Real};

/// Condition number of `HH†` above which zero forcing is refused.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrecoderKind {
    Ref,
    Mrt,
    Zf,
    Cc,
}

impl PrecoderKind {
    pub const ALL: [PrecoderKind; 4] = [Self::Ref, Self::Mrt, Self::Zf, Self::Cc];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ref => "REF",
            Self::Mrt => "MRT",
            Self::Zf => "ZF",
            Self::Cc => "CC",
        }
    }

    /// Whether the weights depend on the reader position.
    pub fn tracks_reader(self) -> bool {
        matches!(self, Self::Zf | Self::Cc)
    }
}

impl fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "REF" => Ok(Self::Ref),
            "MRT" => Ok(Self::Mrt),
            "ZF" => Ok(Self::Zf),
            "CC" => Ok(Self::Cc),
            _ => Err(Error::invalid(
                "precoder",
                format!("unknown kind `{s}` (expected REF, MRT, ZF or CC)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcParams<T> {
    pub phi: T,
    pub delta: T,
}

/// Unit-norm transmit weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder<T> {
    weights: Vec<Complex<T>>,
    kind: PrecoderKind,
    cc: Option<CcParams<T>>,
}

impl<T: Real> Precoder<T> {
    fn normalized(
        kind: PrecoderKind,
        mut weights: Vec<Complex<T>>,
        cc: Option<CcParams<T>>,
    ) -> Result<Self> {
        let n = norm_sqr(&weights).sqrt();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::DegenerateChannel("precoder direction has zero norm"));
        }
        let inv = n.recip();
        for w in &mut weights {
            *w *= inv;
        }
        Ok(Self { weights, kind, cc })
    }

    pub fn weights(&self) -> &[Complex<T>] {
        &self.weights
    }

    pub fn kind(&self) -> PrecoderKind {
        self.kind
    }

    pub fn cc_params(&self) -> Option<CcParams<T>> {
        self.cc
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn norm_sqr(&self) -> T {
        norm_sqr(&self.weights)
    }
}

/// Single antenna, unit weight.
pub fn ref_precoder<T: Real>() -> Precoder<T> {
    Precoder {
        weights: vec![Complex::new(T::one(), T::zero())],
        kind: PrecoderKind::Ref,
        cc: None,
    }
}

/// Conjugate match on the tag channel.
pub fn mrt_precoder<T: Real>(h_st: &ChannelVector<T>) -> Result<Precoder<T>> {
    if h_st.norm_sqr() == T::zero() {
        return Err(Error::DegenerateChannel("source-to-tag channel is zero"));
    }
    let w = h_st.coefficients().iter().map(|c| c.conj()).collect();
    Precoder::normalized(PrecoderKind::Mrt, w, None)
}

/// Entries of `(HH†)⁻¹ = Q†Q` for `H = [h_ST; h_SR]`.
///
/// `q1_norm_sqr = ‖q₁‖²`, `q2_norm_sqr = ‖q₂‖²` and `cross = q₁†q₂` are all a
/// closed-form beam response needs; the columns themselves live in
/// [`ZfBasis`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZfGram<T> {
    pub q1_norm_sqr: T,
    pub q2_norm_sqr: T,
    pub cross: Complex<T>,
    pub condition: T,
    inv21: Complex<T>,
}

pub fn zf_gram<T: Real>(h_st: &ChannelVector<T>, h_sr: &ChannelVector<T>) -> Result<ZfGram<T>> {
    if h_st.len() != h_sr.len() {
        return Err(Error::invalid(
            "channels",
            format!("length mismatch: {} vs {}", h_st.len(), h_sr.len()),
        ));
    }
    if h_st.len() < 2 {
        return Err(Error::invalid("antennas", "zero forcing needs K >= 2"));
    }
    let g11 = h_st.norm_sqr();
    let g22 = h_sr.norm_sqr();
    // (HH†)₁₂ = h_ST · h_SR†
    let g12 = inner(h_sr.coefficients(), h_st.coefficients());
    let det = g11 * g22 - g12.norm_sqr();
    let tr = g11 + g22;
    let spread = ((g11 - g22).powi(2) + T::of(4.0) * g12.norm_sqr()).sqrt();
    let lmax = (tr + spread) / T::of(2.0);
    let condition = if det > T::zero() {
        lmax * lmax / det
    } else {
        T::infinity()
    };
    if !(condition <= T::of(MAX_GRAM_CONDITION)) {
        return Err(Error::IllConditioned {
            condition: condition.as_f64(),
            limit: MAX_GRAM_CONDITION,
        });
    }
    let inv_det = det.recip();
    Ok(ZfGram {
        q1_norm_sqr: g22 * inv_det,
        q2_norm_sqr: g11 * inv_det,
        cross: -g12 * inv_det,
        condition,
        inv21: -g12.conj() * inv_det,
    })
}

/// Columns of the right pseudo-inverse `Q = H†(HH†)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfBasis<T> {
    q1: Vec<Complex<T>>,
    q2: Vec<Complex<T>>,
    gram: ZfGram<T>,
}

impl<T: Real> ZfBasis<T> {
    pub fn q1(&self) -> &[Complex<T>] {
        &self.q1
    }

    pub fn q2(&self) -> &[Complex<T>] {
        &self.q2
    }

    pub fn gram(&self) -> &ZfGram<T> {
        &self.gram
    }
}

pub fn zf_basis<T: Real>(h_st: &ChannelVector<T>, h_sr: &ChannelVector<T>) -> Result<ZfBasis<T>> {
    let gram = zf_gram(h_st, h_sr)?;
    let (i11, i12, i21, i22) = (
        Complex::new(gram.q1_norm_sqr, T::zero()),
        gram.cross,
        gram.inv21,
        Complex::new(gram.q2_norm_sqr, T::zero()),
    );
    let (q1, q2) = h_st
        .coefficients()
        .iter()
        .zip(h_sr.coefficients())
        .map(|(st, sr)| {
            let (a, b) = (st.conj(), sr.conj());
            (a * i11 + b * i21, a * i12 + b * i22)
        })
        .unzip();
    Ok(ZfBasis { q1, q2, gram })
}

/// Tag beam with a null on the reader.
pub fn zf_precoder<T: Real>(basis: &ZfBasis<T>) -> Precoder<T> {
    Precoder::normalized(PrecoderKind::Zf, basis.q1.clone(), None)
        .expect("zero-forcing column of a well-conditioned basis is nonzero")
}

/// `α·Q·T(φ)·D(δ)·[1 1]ᵀ = α·(δ·q₁ + √(1−δ²)·e^{jφ}·q₂)`.
pub fn cc_precoder<T: Real>(basis: &ZfBasis<T>, phi: T, delta: T) -> Result<Precoder<T>> {
    check_delta(delta)?;
    let s = (T::one() - delta * delta).sqrt();
    let rot = Complex::from_polar(s, phi);
    let w = basis
        .q1
        .iter()
        .zip(&basis.q2)
        .map(|(a, b)| a * delta + b * rot)
        .collect();
    Precoder::normalized(PrecoderKind::Cc, w, Some(CcParams { phi, delta }))
}

fn check_delta<T: Real>(delta: T) -> Result<()> {
    if delta >= T::zero() && delta <= T::one() {
        Ok(())
    } else {
        Err(Error::invalid(
            "delta",
            format!("must lie in [0, 1], got {delta}"),
        ))
    }
}

/// Normalizer and beam responses of a coherent-combining precoder, from the
/// Gram entries alone: `h_ST·p = α·δ`, `h_SR·p = α·√(1−δ²)·e^{jφ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamResponse<T> {
    pub alpha: T,
    pub tag: Complex<T>,
    pub reader: Complex<T>,
}

pub fn cc_response<T: Real>(gram: &ZfGram<T>, phi: T, delta: T) -> BeamResponse<T> {
    let s = (T::one() - delta * delta).sqrt();
    let (sin, cos) = phi.sin_cos();
    let alpha = cc_alpha_sqr(gram, cos, sin, delta, s).sqrt();
    BeamResponse {
        alpha,
        tag: Complex::new(alpha * delta, T::zero()),
        reader: Complex::from_polar(alpha * s, phi),
    }
}

#[inline]
fn cc_alpha_sqr<T: Real>(gram: &ZfGram<T>, cos: T, sin: T, delta: T, s: T) -> T {
    let re_cross = gram.cross.re * cos - gram.cross.im * sin;
    let norm = delta * delta * gram.q1_norm_sqr
        + s * s * gram.q2_norm_sqr
        + T::of(2.0) * delta * s * re_cross;
    norm.recip()
}

/// ΔSNR per unit illumination of the coherent-combining beam `(φ, δ)`:
/// `α²·|(γ_on² − γ_off²)·δ²·|h_TR|² + 2(γ_on − γ_off)·δ·s·Re(h_TR·e^{−jφ})|`.
#[inline]
fn cc_unit_delta<T: Real>(
    gram: &ZfGram<T>,
    h_tr: Complex<T>,
    gamma: &ModulationFactor<T>,
    (cos, sin): (T, T),
    delta: T,
    s: T,
) -> T {
    let quad = gamma.gamma_on() * gamma.gamma_on() - gamma.gamma_off() * gamma.gamma_off();
    let lin = gamma.gamma_on() - gamma.gamma_off();
    let re_rot = h_tr.re * cos + h_tr.im * sin;
    let a2 = cc_alpha_sqr(gram, cos, sin, delta, s);
    a2 * (quad * delta * delta * h_tr.norm_sqr() + T::of(2.0) * lin * delta * s * re_rot).abs()
}

/// ZF ΔSNR per unit illumination. Evaluated through the same expression as
/// the `δ = 1` coherent-combining beams, so the two agree bit for bit.
pub fn zf_unit_delta<T: Real>(
    gram: &ZfGram<T>,
    h_tr: ScalarChannel<T>,
    gamma: &ModulationFactor<T>,
) -> T {
    cc_unit_delta(
        gram,
        h_tr.value(),
        gamma,
        (T::one(), T::zero()),
        T::one(),
        T::zero(),
    )
}

/// Candidate `(φ, δ)` beams. Must contain `δ = 1` so that the zero-forcing
/// beam is always a candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CcGrid<T> {
    phis: Vec<T>,
    deltas: Vec<T>,
    trig: Vec<(T, T)>,
    sides: Vec<T>,
}

impl<T: Real> CcGrid<T> {
    pub fn new(phis: Vec<T>, deltas: Vec<T>) -> Result<Self> {
        if phis.is_empty() || deltas.is_empty() {
            return Err(Error::invalid(
                "cc_grid",
                "phase and allocation sets must be nonempty",
            ));
        }
        if let Some(bad) = deltas
            .iter()
            .find(|d| !(**d >= T::zero() && **d <= T::one()))
        {
            return Err(Error::invalid(
                "cc_grid",
                format!("allocation {bad} outside [0, 1]"),
            ));
        }
        if !deltas.iter().any(|d| *d == T::one()) {
            return Err(Error::invalid(
                "cc_grid",
                "allocation set must contain delta = 1",
            ));
        }
        if phis.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("cc_grid", "phases must be finite"));
        }
        let trig = phis.iter().map(|p| (p.cos(), p.sin())).collect();
        let sides = deltas.iter().map(|d| (T::one() - *d * *d).sqrt()).collect();
        Ok(Self {
            phis,
            deltas,
            trig,
            sides,
        })
    }

    /// `φ = 2πn/n_phases`, `δ = n/n_deltas` for `n = 1..=n_deltas`.
    pub fn uniform(n_phases: usize, n_deltas: usize) -> Result<Self> {
        let phis = (0..n_phases)
            .map(|n| T::of(std::f64::consts::TAU * n as f64 / n_phases as f64))
            .collect();
        let deltas = (1..=n_deltas)
            .map(|n| T::of(n as f64 / n_deltas as f64))
            .collect();
        Self::new(phis, deltas)
    }

    /// 360 phases × {0.1, …, 1.0}.
    pub fn paper() -> Self {
        Self::uniform(360, 10).expect("default grid is valid")
    }

    /// The single zero-forcing point `(φ = 0, δ = 1)`.
    pub fn zf_only() -> Self {
        Self::new(vec![T::zero()], vec![T::one()]).expect("valid")
    }

    pub fn phis(&self) -> &[T] {
        &self.phis
    }

    pub fn deltas(&self) -> &[T] {
        &self.deltas
    }

    pub fn len(&self) -> usize {
        self.phis.len() * self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcChoice<T> {
    pub delta_index: usize,
    pub phi_index: usize,
    pub params: CcParams<T>,
    /// ΔSNR per unit illumination.
    pub unit_delta: T,
}

/// Exhaustive grid search on Gram entries. Ties keep the smallest
/// `(δ index, φ index)`.
pub fn cc_search<T: Real>(
    gram: &ZfGram<T>,
    h_tr: ScalarChannel<T>,
    gamma: &ModulationFactor<T>,
    grid: &CcGrid<T>,
) -> CcChoice<T> {
    let h = h_tr.value();
    let mut best = CcChoice {
        delta_index: 0,
        phi_index: 0,
        params: CcParams {
            phi: grid.phis[0],
            delta: grid.deltas[0],
        },
        unit_delta: T::neg_infinity(),
    };
    for (di, (&delta, &s)) in grid.deltas.iter().zip(&grid.sides).enumerate() {
        for (pi, &cs) in grid.trig.iter().enumerate() {
            let v = cc_unit_delta(gram, h, gamma, cs, delta, s);
            if v > best.unit_delta {
                best = CcChoice {
                    delta_index: di,
                    phi_index: pi,
                    params: CcParams {
                        phi: grid.phis[pi],
                        delta,
                    },
                    unit_delta: v,
                };
            }
        }
    }
    best
}

/// Picks the grid beam maximizing ΔSNR for on/off tag states and returns
/// it with its ΔSNR.
pub fn cc_optimize<T: Real>(
    basis: &ZfBasis<T>,
    h_tr: ScalarChannel<T>,
    snr_illum: T,
    grid: &CcGrid<T>,
) -> (Precoder<T>, DeltaSnr<T>) {
    let choice = cc_search(basis.gram(), h_tr, &ModulationFactor::default(), grid);
    let p = cc_precoder(basis, choice.params.phi, choice.params.delta)
        .expect("grid allocations are validated");
    (p, DeltaSnr::new(choice.unit_delta * snr_illum))
}

/// Builds the `kind` precoder for a tag/reader pair. Coherent combining
/// scores candidates with the given tag-to-reader channel and tag states.
pub fn build_precoder<T: Real>(
    kind: PrecoderKind,
    h_st: &ChannelVector<T>,
    h_sr: &ChannelVector<T>,
    h_tr: ScalarChannel<T>,
    gamma: &ModulationFactor<T>,
    grid: &CcGrid<T>,
) -> Result<Precoder<T>> {
    match kind {
        PrecoderKind::Ref => Ok(ref_precoder()),
        PrecoderKind::Mrt => mrt_precoder(h_st),
        PrecoderKind::Zf => Ok(zf_precoder(&zf_basis(h_st, h_sr)?)),
        PrecoderKind::Cc => {
            let basis = zf_basis(h_st, h_sr)?;
            let c = cc_search(basis.gram(), h_tr, gamma, grid);
            cc_precoder(&basis, c.params.phi, c.params.delta)
        }
    }
}
