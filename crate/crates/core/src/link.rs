//! ΔSNR at a candidate reader position with the precoder adapted to it.
//!
//! REF and MRT weights depend on the tag only and are fixed per tag; ZF and
//! CC are rebuilt from the reader's channel at every position. ZF and CC are
//! evaluated from the Gram entries of `HH†`, which gives the same numbers as
//! building the weight vectors (see the precoding tests) at a fraction of
//! the cost.

use num_complex::Complex;

use crate::channel::{ChannelVector, ModulationFactor, ScalarChannel};
use crate::error::Result;
use crate::metrics::delta_from_terms;
use crate::precoding::{
    cc_search, mrt_precoder, zf_gram, zf_unit_delta, CcGrid, Precoder, PrecoderKind,
};
use crate::scalar::Real;

/// Tag-side quantities shared by every reader position.
#[derive(Debug, Clone)]
pub struct TagSide<T> {
    h_st: ChannelVector<T>,
    mrt: Precoder<T>,
    mrt_gain: Complex<T>,
}

impl<T: Real> TagSide<T> {
    pub fn new(h_st: ChannelVector<T>) -> Result<Self> {
        let mrt = mrt_precoder(&h_st)?;
        let mrt_gain = h_st.project(&mrt);
        Ok(Self {
            h_st,
            mrt,
            mrt_gain,
        })
    }

    pub fn h_st(&self) -> &ChannelVector<T> {
        &self.h_st
    }

    pub fn mrt(&self) -> &Precoder<T> {
        &self.mrt
    }
}

/// Antennas of the reader channel that `kind` needs.
pub fn reader_antennas(kind: PrecoderKind, k: usize) -> usize {
    match kind {
        PrecoderKind::Ref => 1,
        _ => k,
    }
}

/// ΔSNR per unit illumination for `kind` with the reader channel `h_sr`.
///
/// Fails only when ZF/CC cannot be formed (ill-conditioned `HH†`).
pub fn adaptive_unit_delta<T: Real>(
    kind: PrecoderKind,
    tag: &TagSide<T>,
    h_sr: &ChannelVector<T>,
    h_tr: ScalarChannel<T>,
    gamma: &ModulationFactor<T>,
    grid: &CcGrid<T>,
) -> Result<T> {
    match kind {
        PrecoderKind::Ref => {
            let u = h_tr.value() * tag.h_st.coefficients()[0];
            Ok(delta_from_terms(gamma, u, h_sr.coefficients()[0]))
        }
        PrecoderKind::Mrt => {
            let u = h_tr.value() * tag.mrt_gain;
            Ok(delta_from_terms(gamma, u, h_sr.project(&tag.mrt)))
        }
        PrecoderKind::Zf => Ok(zf_unit_delta(&zf_gram(&tag.h_st, h_sr)?, h_tr, gamma)),
        PrecoderKind::Cc => Ok(cc_search(&zf_gram(&tag.h_st, h_sr)?, h_tr, gamma, grid).unit_delta),
    }
}
