//! Link-level simulation of ambient backscatter under massive-MIMO
//! beamforming.
//!
//! A base station with a planar array illuminates a battery-free tag and a
//! nearby energy-detecting reader through a multipath field. Four transmit
//! schemes are compared: a single-antenna reference, maximum-ratio
//! transmission toward the tag, zero forcing (tag beam with a null on the
//! reader) and coherent combining (tag beam plus a phase-aligned reader
//! beam). The crate covers
//!
//! * [`channel`]: scattering environments and channel evaluation,
//! * [`precoding`]: the four precoders and the coherent-combining search,
//! * [`metrics`]: receive SNR, on/off ΔSNR, BER and QoS,
//! * [`mapping`]: spatial maps over a lattice of points,
//! * [`campaign`]: Monte Carlo detection-range and legacy-device sweeps.
//!
//! The numerical modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for common use. The campaign layer works in
//! `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod channel;
pub mod error;
pub mod link;
pub mod mapping;
pub mod metrics;
pub mod precoding;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use precoding::PrecoderKind;
pub use scalar::Real;

pub type PhysicalConfig64 = channel::PhysicalConfig<f64>;
pub type PlanarArray64 = channel::PlanarArray<f64>;
pub type PathSet64 = channel::PathSet<f64>;
pub type FieldPoint64 = channel::FieldPoint<f64>;
pub type ChannelVector64 = channel::ChannelVector<f64>;
pub type ChannelField64 = channel::ChannelField<f64>;
pub type Precoder64 = precoding::Precoder<f64>;
pub type ZfBasis64 = precoding::ZfBasis<f64>;
pub type CcGrid64 = precoding::CcGrid<f64>;
pub type LinkSample64 = metrics::LinkSample<f64>;
pub type QosTarget64 = metrics::QosTarget<f64>;
pub type MapGrid64 = mapping::MapGrid<f64>;
pub type ScalarMap64 = mapping::ScalarMap<f64>;

pub type ScalarMap32 = mapping::ScalarMap<f32>;
pub type PathSet32 = channel::PathSet<f32>;
pub type ChannelVector32 = channel::ChannelVector<f32>;
pub type ChannelField32 = channel::ChannelField<f32>;
pub type Precoder32 = precoding::Precoder<f32>;
