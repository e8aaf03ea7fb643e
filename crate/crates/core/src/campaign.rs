//! Monte Carlo detection-range campaign and the legacy-device sweep.
//!
//! A *ray* is one (draw, tag, angle) triple: a scattering environment, a tag
//! position and a direction along which the reader is moved away from the
//! tag. Along each ray the per-sample threshold is the largest distance up to
//! which the QoS target holds at every tested point: a coarse scan with step
//! `coarse_factor · d_precision` finds the first failure, then bisection
//! narrows the crossing to `d_precision`. The same environments and tags are
//! reused for every SNR (common random numbers), so one scan per ray and
//! precoder serves the whole SNR list.
//!
//! The campaign layer works in `f64`.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::{
    evaluate_channel, friis_channel, ChannelField, ChannelVector, FieldPoint, ModulationFactor,
    PathSet, PhysicalConfig, PlanarArray,
};
use crate::error::{Error, Result};
use crate::link::{adaptive_unit_delta, reader_antennas, TagSide};
use crate::metrics::{db_to_linear, linear_to_db, qos_met, DeltaSnr, QosTarget};
use crate::precoding::{build_precoder, CcGrid, Precoder, PrecoderKind};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldPoint<f64> {
        let x = self.x_min + (self.x_max - self.x_min) * rng.random::<f64>();
        let y = self.y_min + (self.y_max - self.y_min) * rng.random::<f64>();
        FieldPoint::new(x, y)
    }
}

/// How per-ray outcomes become a detection distance `D^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdRule {
    /// Percentile of per-sample prefix-maximal thresholds.
    Prefix,
    /// Largest coarse distance up to which the pooled pass rate stays at or
    /// above `p` percent.
    Pooled,
}

impl ThresholdRule {
    pub fn name(self) -> &'static str {
        match self {
            Self::Prefix => "prefix",
            Self::Pooled => "pooled",
        }
    }
}

impl std::str::FromStr for ThresholdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prefix" => Ok(Self::Prefix),
            "pooled" => Ok(Self::Pooled),
            _ => Err(Error::invalid(
                "campaign.rule",
                format!("expected prefix or pooled, got {s:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegacyChannel {
    /// Independent CN(0, 1) coefficient per antenna.
    Iid,
    /// An independent scattering environment evaluated at a random point.
    Multipath,
}

impl LegacyChannel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Iid => "iid",
            Self::Multipath => "multipath",
        }
    }
}

impl std::str::FromStr for LegacyChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iid" => Ok(Self::Iid),
            "multipath" => Ok(Self::Multipath),
            _ => Err(Error::invalid(
                "legacy.channel",
                format!("expected iid or multipath, got {s:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegacyConfig {
    /// Device draws per precoder; zero skips the sweep in [`run_campaign`].
    pub draws: usize,
    /// Reader placed uniformly in `[λ/2, reader_distance_max]` from the tag.
    pub reader_distance_max: f64,
    pub channel: LegacyChannel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub phys: PhysicalConfig<f64>,
    pub array_lines: usize,
    pub array_columns: usize,
    pub n_paths: usize,
    pub gamma: ModulationFactor<f64>,
    pub qos: QosTarget<f64>,
    pub n_draws: usize,
    pub n_tags: usize,
    pub tag_region: Region,
    /// Reader angles `2πn / n_angles`.
    pub n_angles: usize,
    pub snr_illum_db: Vec<f64>,
    pub d_max: f64,
    pub d_precision: f64,
    pub coarse_factor: usize,
    pub percentiles: Vec<f64>,
    pub cc_phases: usize,
    pub cc_allocations: usize,
    pub kinds: Vec<PrecoderKind>,
    pub rule: ThresholdRule,
    pub legacy: LegacyConfig,
    pub master_seed: u64,
}

impl CampaignConfig {
    /// 20 draws × 10 tags × 20 angles over `[0, 100]²`, SNR 20 to 30 dB.
    pub fn paper() -> Self {
        Self {
            phys: PhysicalConfig::default(),
            array_lines: 8,
            array_columns: 8,
            n_paths: 100,
            gamma: ModulationFactor::default(),
            qos: QosTarget::default(),
            n_draws: 20,
            n_tags: 10,
            tag_region: Region {
                x_min: 0.0,
                x_max: 100.0,
                y_min: 0.0,
                y_max: 100.0,
            },
            n_angles: 20,
            snr_illum_db: vec![20.0, 22.0, 24.0, 26.0, 28.0, 30.0],
            d_max: 200.0,
            d_precision: 1e-3,
            coarse_factor: 10,
            percentiles: vec![99.0, 90.0],
            cc_phases: 360,
            cc_allocations: 10,
            kinds: PrecoderKind::ALL.to_vec(),
            rule: ThresholdRule::Prefix,
            legacy: LegacyConfig {
                draws: 10_000,
                reader_distance_max: 10.0,
                channel: LegacyChannel::Iid,
            },
            master_seed: 1,
        }
    }

    /// 5 draws × 5 tags × 8 angles; everything else as [`paper`](Self::paper).
    pub fn desk() -> Self {
        Self {
            n_draws: 5,
            n_tags: 5,
            n_angles: 8,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("campaign.n_draws", self.n_draws),
            ("campaign.n_tags", self.n_tags),
            ("campaign.n_angles", self.n_angles),
            ("campaign.coarse_factor", self.coarse_factor),
            ("campaign.cc_phases", self.cc_phases),
            ("campaign.cc_allocations", self.cc_allocations),
            ("scenario.paths", self.n_paths),
            ("array.lines", self.array_lines),
            ("array.columns", self.array_columns),
        ];
        for (name, n) in counts {
            if n == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        if self.array_lines * self.array_columns < 2 {
            return Err(Error::invalid("array", "need at least 2 antennas"));
        }
        if !(self.d_precision > 0.0) || !self.d_precision.is_finite() {
            return Err(Error::invalid("campaign.d_precision", "must be positive"));
        }
        if !(self.d_max > self.d_min()) || !self.d_max.is_finite() {
            return Err(Error::invalid(
                "campaign.d_max",
                format!("must exceed the far-field bound {}", self.d_min()),
            ));
        }
        if self.snr_illum_db.is_empty() || self.snr_illum_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid(
                "campaign.snr_illum_db",
                "need at least one finite value",
            ));
        }
        if self.percentiles.is_empty() || self.percentiles.iter().any(|p| !(*p > 0.0 && *p < 100.0))
        {
            return Err(Error::invalid(
                "campaign.percentiles",
                "values must lie in (0, 100)",
            ));
        }
        if self.kinds.is_empty() {
            return Err(Error::invalid(
                "campaign.kinds",
                "need at least one precoder",
            ));
        }
        let r = &self.tag_region;
        if !(r.x_max >= r.x_min && r.y_max >= r.y_min) {
            return Err(Error::invalid(
                "campaign.tag_region",
                "bounds must be ordered",
            ));
        }
        if !(self.legacy.reader_distance_max >= self.d_min()) {
            return Err(Error::invalid(
                "legacy.reader_distance_max",
                format!("must be at least {}", self.d_min()),
            ));
        }
        self.cc_grid()?;
        Ok(())
    }

    pub fn d_min(&self) -> f64 {
        self.phys.far_field_bound()
    }

    pub fn coarse_step(&self) -> f64 {
        self.d_precision * self.coarse_factor as f64
    }

    /// Index of the last coarse distance (which is `d_max`).
    pub fn coarse_last(&self) -> usize {
        ((self.d_max - self.d_min()) / self.coarse_step()).ceil() as usize
    }

    pub fn coarse_distance(&self, i: usize) -> f64 {
        if i >= self.coarse_last() {
            self.d_max
        } else {
            self.d_min() + i as f64 * self.coarse_step()
        }
    }

    pub fn array(&self) -> Result<PlanarArray<f64>> {
        PlanarArray::half_wavelength(self.array_lines, self.array_columns, &self.phys)
    }

    pub fn cc_grid(&self) -> Result<CcGrid<f64>> {
        CcGrid::uniform(self.cc_phases, self.cc_allocations)
    }

    pub fn angle(&self, n: usize) -> f64 {
        std::f64::consts::TAU * n as f64 / self.n_angles as f64
    }

    pub fn samples_per_point(&self) -> usize {
        self.n_draws * self.n_tags * self.n_angles
    }

    pub fn draw_paths(&self, draw: usize) -> Result<PathSet<f64>> {
        PathSet::sample(
            self.n_paths,
            &mut stream(self.master_seed, Purpose::CampaignPaths, draw as u64),
        )
    }

    pub fn tag_position(&self, draw: usize, tag: usize) -> FieldPoint<f64> {
        let index = (draw * self.n_tags + tag) as u64;
        self.tag_region
            .sample(&mut stream(self.master_seed, Purpose::TagPositions, index))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFlag {
    Detected,
    /// QoS fails already at `λ/2`; the distance is reported as `λ/2`.
    NotDetected,
    /// QoS holds all the way to `d_max`; the distance is reported as `d_max`.
    Saturated,
}

impl SampleFlag {
    pub fn name(self) -> &'static str {
        match self {
            Self::Detected => "detected",
            Self::NotDetected => "not_detected",
            Self::Saturated => "saturated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub distance: f64,
    pub flag: SampleFlag,
}

/// One environment, one tag, one direction.
pub struct Ray<'a> {
    field: &'a ChannelField<f64>,
    tag_pos: FieldPoint<f64>,
    tag: TagSide<f64>,
    angle: f64,
}

impl<'a> Ray<'a> {
    pub fn new(field: &'a ChannelField<f64>, tag_pos: FieldPoint<f64>, angle: f64) -> Result<Self> {
        Ok(Self {
            field,
            tag_pos,
            tag: TagSide::new(field.at(tag_pos))?,
            angle,
        })
    }

    /// Unit-SNR ΔSNR with the reader at distance `d`; `None` when ZF/CC
    /// cannot be formed there.
    pub fn unit_delta(
        &self,
        kind: PrecoderKind,
        d: f64,
        gamma: &ModulationFactor<f64>,
        grid: &CcGrid<f64>,
    ) -> Option<f64> {
        let z = self.tag_pos.towards(self.angle, d);
        let h_sr = self
            .field
            .leading_at(z, reader_antennas(kind, self.field.antennas()));
        let h_tr = friis_channel(d, self.field.phys())
            .expect("probe distances respect the far-field bound");
        match adaptive_unit_delta(kind, &self.tag, &h_sr, h_tr, gamma, grid) {
            Ok(v) => Some(v),
            Err(Error::IllConditioned { .. }) => None,
            Err(e) => panic!("unexpected failure on a campaign ray: {e}"),
        }
    }
}

struct Probe<'c> {
    cfg: &'c CampaignConfig,
    grid: CcGrid<f64>,
    snr: Vec<f64>,
    top: usize,
}

/// Scan state of one ray for one precoder.
#[derive(Debug, Clone)]
struct Scan {
    first_fail: Vec<Option<usize>>,
    next: usize,
    ill_conditioned: usize,
}

impl<'c> Probe<'c> {
    fn new(cfg: &'c CampaignConfig, snr_db: &[f64]) -> Result<Self> {
        let snr: Vec<f64> = snr_db.iter().map(|s| db_to_linear(*s)).collect();
        let top = (0..snr.len())
            .max_by(|a, b| snr[*a].total_cmp(&snr[*b]))
            .expect("nonempty SNR list");
        Ok(Self {
            cfg,
            grid: cfg.cc_grid()?,
            snr,
            top,
        })
    }

    fn start(&self) -> Scan {
        Scan {
            first_fail: vec![None; self.snr.len()],
            next: 0,
            ill_conditioned: 0,
        }
    }

    fn passes(&self, unit: Option<f64>, s: usize) -> bool {
        unit.is_some_and(|u| qos_met(DeltaSnr::new(u * self.snr[s]), &self.cfg.qos))
    }

    fn eval(&self, ray: &Ray<'_>, kind: PrecoderKind, d: f64, scan: &mut Scan) -> Option<f64> {
        let v = ray.unit_delta(kind, d, &self.cfg.gamma, &self.grid);
        if v.is_none() {
            scan.ill_conditioned += 1;
        }
        v
    }

    /// The prefix threshold is known for every SNR once the top SNR failed.
    fn located(&self, scan: &Scan) -> bool {
        scan.first_fail[self.top].is_some() || scan.next > self.cfg.coarse_last()
    }

    /// Evaluates coarse indices from `scan.next` up to `end` (exclusive).
    /// With `counts` every index is evaluated and passes are tallied into
    /// `counts[s][i - offset]`; without, the scan stops once located.
    fn advance(
        &self,
        ray: &Ray<'_>,
        kind: PrecoderKind,
        scan: &mut Scan,
        end: usize,
        mut counts: Option<(&mut [Vec<u64>], usize)>,
    ) {
        let end = end.min(self.cfg.coarse_last() + 1);
        while scan.next < end {
            if counts.is_none() && self.located(scan) {
                return;
            }
            let i = scan.next;
            let unit = self.eval(ray, kind, self.cfg.coarse_distance(i), scan);
            for s in 0..self.snr.len() {
                let ok = self.passes(unit, s);
                if !ok && scan.first_fail[s].is_none() {
                    scan.first_fail[s] = Some(i);
                }
                if let Some((c, offset)) = counts.as_mut() {
                    c[s][i - *offset] += u64::from(ok);
                }
            }
            scan.next += 1;
        }
    }

    /// Bisects every SNR's crossing interval down to `d_precision`.
    fn finish(&self, ray: &Ray<'_>, kind: PrecoderKind, scan: &mut Scan) -> Vec<Threshold> {
        let cfg = self.cfg;
        (0..self.snr.len())
            .map(|s| match scan.first_fail[s] {
                None => Threshold {
                    distance: cfg.d_max,
                    flag: SampleFlag::Saturated,
                },
                Some(0) => Threshold {
                    distance: cfg.d_min(),
                    flag: SampleFlag::NotDetected,
                },
                Some(i) => {
                    let (mut lo, mut hi) = (cfg.coarse_distance(i - 1), cfg.coarse_distance(i));
                    while hi - lo > cfg.d_precision {
                        let mid = 0.5 * (lo + hi);
                        let unit = self.eval(ray, kind, mid, scan);
                        if self.passes(unit, s) {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    Threshold {
                        distance: lo,
                        flag: SampleFlag::Detected,
                    }
                }
            })
            .collect()
    }

    fn thresholds(&self, ray: &Ray<'_>, kind: PrecoderKind) -> (Vec<Threshold>, usize) {
        let mut scan = self.start();
        self.advance(ray, kind, &mut scan, usize::MAX, None);
        let t = self.finish(ray, kind, &mut scan);
        (t, scan.ill_conditioned)
    }
}

/// Threshold distance of one ray for one precoder and SNR.
pub fn sample_threshold_distance(
    cfg: &CampaignConfig,
    ray: &Ray<'_>,
    kind: PrecoderKind,
    snr_illum_db: f64,
) -> Result<Threshold> {
    let probe = Probe::new(cfg, &[snr_illum_db])?;
    Ok(probe.thresholds(ray, kind).0[0])
}

/// Thresholds of one ray for every SNR of `snr_illum_db`, sharing the scan.
pub fn ray_thresholds(
    cfg: &CampaignConfig,
    ray: &Ray<'_>,
    kind: PrecoderKind,
    snr_illum_db: &[f64],
) -> Result<Vec<Threshold>> {
    if snr_illum_db.is_empty() {
        return Err(Error::invalid("snr_illum_db", "need at least one value"));
    }
    let probe = Probe::new(cfg, snr_illum_db)?;
    Ok(probe.thresholds(ray, kind).0)
}

/// `D^p`: the value exceeded by `p` percent of `sorted` (lower order
/// statistic at rank `⌊(100 − p)/100 · (n − 1)⌋`).
pub fn percentile_exceeded(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let rank = ((100.0 - p) / 100.0 * (sorted.len() - 1) as f64).floor() as usize;
    sorted[rank]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSample {
    pub kind: PrecoderKind,
    pub snr_illum_db: f64,
    pub draw: usize,
    pub tag: usize,
    pub angle: usize,
    pub threshold: Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub kind: PrecoderKind,
    pub snr_illum_db: f64,
    pub percentile: f64,
    pub distance: f64,
    pub not_detected: usize,
    pub saturated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegacyStats {
    pub kind: PrecoderKind,
    pub snr_illum_db: f64,
    pub draws: usize,
    pub mean: f64,
    pub mean_db: f64,
    pub variance: f64,
    /// 95% normal-approximation interval on the mean, linear.
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignMetadata {
    pub master_seed: u64,
    pub rule: ThresholdRule,
    pub n_draws: usize,
    pub n_tags: usize,
    pub n_angles: usize,
    pub samples_per_point: usize,
    /// SNR values share environments, tags and angles.
    pub common_random_numbers: bool,
    /// Probe evaluations where ZF/CC could not be formed, per kind.
    pub ill_conditioned: Vec<(PrecoderKind, usize)>,
    pub legacy_draws: usize,
    pub legacy_redraws: usize,
    pub legacy_channel: LegacyChannel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub curves: Vec<CurvePoint>,
    pub samples: Vec<ThresholdSample>,
    pub legacy: Vec<LegacyStats>,
    pub metadata: CampaignMetadata,
}

impl CampaignResult {
    pub fn distance(&self, kind: PrecoderKind, snr_illum_db: f64, percentile: f64) -> Option<f64> {
        self.curves
            .iter()
            .find(|c| {
                c.kind == kind && c.snr_illum_db == snr_illum_db && c.percentile == percentile
            })
            .map(|c| c.distance)
    }

    pub fn samples_for(
        &self,
        kind: PrecoderKind,
        snr_illum_db: f64,
    ) -> impl Iterator<Item = &ThresholdSample> {
        self.samples
            .iter()
            .filter(move |s| s.kind == kind && s.snr_illum_db == snr_illum_db)
    }
}

/// Coarse indices evaluated per synchronisation step of the pooled rule.
const POOLED_BLOCK: usize = 64;

struct RaySweep {
    /// `thresholds[ray][kind][snr]`.
    thresholds: Vec<Vec<Vec<Threshold>>>,
    ill_conditioned: Vec<usize>,
    /// `pooled[kind][snr][coarse index]`, pass counts over rays.
    pooled: Option<Vec<Vec<Vec<u64>>>>,
}

fn ray_index(cfg: &CampaignConfig, r: usize) -> (usize, usize, usize) {
    (
        r / (cfg.n_angles * cfg.n_tags),
        (r / cfg.n_angles) % cfg.n_tags,
        r % cfg.n_angles,
    )
}

fn make_ray<'f>(
    cfg: &CampaignConfig,
    fields: &'f [ChannelField<f64>],
    r: usize,
) -> Result<Ray<'f>> {
    let (draw, tag, angle) = ray_index(cfg, r);
    Ray::new(&fields[draw], cfg.tag_position(draw, tag), cfg.angle(angle))
}

fn sweep_prefix(
    cfg: &CampaignConfig,
    probe: &Probe<'_>,
    fields: &[ChannelField<f64>],
) -> Result<RaySweep> {
    let per_ray = (0..cfg.samples_per_point())
        .into_par_iter()
        .map(|r| {
            let ray = make_ray(cfg, fields, r)?;
            Ok(cfg
                .kinds
                .iter()
                .map(|k| probe.thresholds(&ray, *k))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ill = vec![0; cfg.kinds.len()];
    let thresholds = per_ray
        .into_iter()
        .map(|kinds| {
            kinds
                .into_iter()
                .enumerate()
                .map(|(k, (t, n))| {
                    ill[k] += n;
                    t
                })
                .collect()
        })
        .collect();
    Ok(RaySweep {
        thresholds,
        ill_conditioned: ill,
        pooled: None,
    })
}

/// Advances all rays together in blocks of coarse indices. A kind keeps
/// being tallied while any SNR's pooled pass rate is still at or above the
/// smallest requested percentile at every index so far; rays keep scanning
/// until their own prefix threshold is located.
fn sweep_pooled(
    cfg: &CampaignConfig,
    probe: &Probe<'_>,
    fields: &[ChannelField<f64>],
) -> Result<RaySweep> {
    let n = cfg.samples_per_point();
    let (nk, ns) = (cfg.kinds.len(), probe.snr.len());
    let points = cfg.coarse_last() + 1;
    let rays = (0..n)
        .map(|r| make_ray(cfg, fields, r))
        .collect::<Result<Vec<_>>>()?;
    let mut scans: Vec<Vec<Scan>> = (0..n)
        .map(|_| (0..nk).map(|_| probe.start()).collect())
        .collect();
    let mut pooled = vec![vec![vec![0u64; points]; ns]; nk];
    let need = cfg
        .percentiles
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        / 100.0
        * n as f64;
    let mut active = vec![true; nk];
    let mut start = 0;
    while start < points {
        let end = (start + POOLED_BLOCK).min(points);
        let width = end - start;
        let zero = || vec![vec![vec![0u64; width]; ns]; nk];
        let active_now = active.clone();
        let block = rays
            .par_iter()
            .zip(scans.par_iter_mut())
            .map(|(ray, row)| {
                let mut local = zero();
                for (k, kind) in cfg.kinds.iter().enumerate() {
                    if active_now[k] {
                        probe.advance(ray, *kind, &mut row[k], end, Some((&mut local[k], start)));
                    } else {
                        probe.advance(ray, *kind, &mut row[k], end, None);
                    }
                }
                local
            })
            .reduce(zero, |mut a, b| {
                for (ak, bk) in a.iter_mut().zip(b) {
                    for (as_, bs) in ak.iter_mut().zip(bk) {
                        for (x, y) in as_.iter_mut().zip(bs) {
                            *x += y;
                        }
                    }
                }
                a
            });
        for k in 0..nk {
            for s in 0..ns {
                pooled[k][s][start..end].copy_from_slice(&block[k][s]);
            }
            active[k] =
                active[k] && (0..ns).any(|s| pooled[k][s][..end].iter().all(|c| *c as f64 >= need));
        }
        let pending = scans.iter().flatten().any(|s| !probe.located(s));
        if !active.iter().any(|a| *a) && !pending {
            break;
        }
        start = end;
    }
    let mut ill = vec![0; nk];
    let thresholds = rays
        .par_iter()
        .zip(scans.par_iter_mut())
        .map(|(ray, row)| {
            cfg.kinds
                .iter()
                .zip(row.iter_mut())
                .map(|(kind, scan)| probe.finish(ray, *kind, scan))
                .collect::<Vec<_>>()
        })
        .collect();
    for row in &scans {
        for (k, s) in row.iter().enumerate() {
            ill[k] += s.ill_conditioned;
        }
    }
    Ok(RaySweep {
        thresholds,
        ill_conditioned: ill,
        pooled: Some(pooled),
    })
}

/// Runs the range sweep over all rays, kinds and SNRs, then the legacy
/// sweep when `cfg.legacy.draws > 0`.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let array = cfg.array()?;
    let fields = (0..cfg.n_draws)
        .map(|d| Ok(ChannelField::new(&cfg.draw_paths(d)?, &array, &cfg.phys)))
        .collect::<Result<Vec<_>>>()?;
    let probe = Probe::new(cfg, &cfg.snr_illum_db)?;
    let sweep = match cfg.rule {
        ThresholdRule::Prefix => sweep_prefix(cfg, &probe, &fields)?,
        ThresholdRule::Pooled => sweep_pooled(cfg, &probe, &fields)?,
    };

    let n = cfg.samples_per_point();
    let ns = cfg.snr_illum_db.len();
    let mut samples = Vec::with_capacity(cfg.kinds.len() * ns * n);
    for (k, kind) in cfg.kinds.iter().enumerate() {
        for (s, snr_db) in cfg.snr_illum_db.iter().enumerate() {
            for (r, per_kind) in sweep.thresholds.iter().enumerate() {
                let (draw, tag, angle) = ray_index(cfg, r);
                samples.push(ThresholdSample {
                    kind: *kind,
                    snr_illum_db: *snr_db,
                    draw,
                    tag,
                    angle,
                    threshold: per_kind[k][s],
                });
            }
        }
    }

    let mut curves = Vec::new();
    for (k, kind) in cfg.kinds.iter().enumerate() {
        for (s, snr_db) in cfg.snr_illum_db.iter().enumerate() {
            let chunk = &samples[(k * ns + s) * n..(k * ns + s + 1) * n];
            let mut sorted: Vec<f64> = chunk.iter().map(|x| x.threshold.distance).collect();
            sorted.sort_by(f64::total_cmp);
            let not_detected = chunk
                .iter()
                .filter(|x| x.threshold.flag == SampleFlag::NotDetected)
                .count();
            let saturated = chunk
                .iter()
                .filter(|x| x.threshold.flag == SampleFlag::Saturated)
                .count();
            for p in &cfg.percentiles {
                let distance = match &sweep.pooled {
                    None => percentile_exceeded(&sorted, *p),
                    Some(counts) => pooled_distance(cfg, &counts[k][s], n, *p),
                };
                curves.push(CurvePoint {
                    kind: *kind,
                    snr_illum_db: *snr_db,
                    percentile: *p,
                    distance,
                    not_detected,
                    saturated,
                });
            }
        }
    }

    let (legacy, legacy_redraws) = if cfg.legacy.draws > 0 {
        let gains = legacy_gains(cfg, cfg.legacy.draws)?;
        (legacy_stats(cfg, &gains), gains.redraws)
    } else {
        (Vec::new(), 0)
    };

    Ok(CampaignResult {
        curves,
        samples,
        legacy,
        metadata: CampaignMetadata {
            master_seed: cfg.master_seed,
            rule: cfg.rule,
            n_draws: cfg.n_draws,
            n_tags: cfg.n_tags,
            n_angles: cfg.n_angles,
            samples_per_point: n,
            common_random_numbers: true,
            ill_conditioned: cfg
                .kinds
                .iter()
                .copied()
                .zip(sweep.ill_conditioned)
                .collect(),
            legacy_draws: cfg.legacy.draws,
            legacy_redraws,
            legacy_channel: cfg.legacy.channel,
        },
    })
}

/// Largest coarse distance whose pooled pass rate, and that of every nearer
/// coarse distance, is at least `p` percent. Falls back to `λ/2` when even
/// the first point misses.
fn pooled_distance(cfg: &CampaignConfig, counts: &[u64], n: usize, p: f64) -> f64 {
    let need = p / 100.0 * n as f64;
    let run = counts.iter().take_while(|c| **c as f64 >= need).count();
    if run == 0 {
        cfg.d_min()
    } else {
        cfg.coarse_distance(run - 1)
    }
}

/// `|h_D · p|²` per device draw and precoder, at unit illumination.
#[derive(Debug, Clone, PartialEq)]
pub struct LegacyGains {
    pub kinds: Vec<PrecoderKind>,
    pub gains: Vec<Vec<f64>>,
    /// Scene redraws caused by ill-conditioned ZF/CC.
    pub redraws: usize,
}

impl LegacyGains {
    pub fn of(&self, kind: PrecoderKind) -> Option<&[f64]> {
        self.kinds
            .iter()
            .position(|k| *k == kind)
            .map(|i| self.gains[i].as_slice())
    }
}

const MAX_LEGACY_REDRAWS: usize = 1000;

fn legacy_precoders(
    cfg: &CampaignConfig,
    array: &PlanarArray<f64>,
    grid: &CcGrid<f64>,
    trial: usize,
) -> Result<(Vec<Precoder<f64>>, usize)> {
    let mut rng = stream(cfg.master_seed, Purpose::LegacyScene, trial as u64);
    let field = ChannelField::new(&PathSet::sample(cfg.n_paths, &mut rng)?, array, &cfg.phys);
    for redraws in 0..MAX_LEGACY_REDRAWS {
        let tag = cfg.tag_region.sample(&mut rng);
        let angle = cfg.angle(rng.random_range(0..cfg.n_angles));
        let d = cfg.d_min() + (cfg.legacy.reader_distance_max - cfg.d_min()) * rng.random::<f64>();
        let reader = tag.towards(angle, d);
        let (h_st, h_sr) = (field.at(tag), field.at(reader));
        let h_tr = friis_channel(d, &cfg.phys)?;
        let built = cfg
            .kinds
            .iter()
            .map(|k| build_precoder(*k, &h_st, &h_sr, h_tr, &cfg.gamma, grid))
            .collect::<Result<Vec<_>>>();
        match built {
            Ok(ps) => return Ok((ps, redraws)),
            Err(Error::IllConditioned { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::DegenerateChannel(
        "legacy scene stayed ill-conditioned after repeated redraws",
    ))
}

fn legacy_device(
    cfg: &CampaignConfig,
    array: &PlanarArray<f64>,
    trial: usize,
) -> Result<ChannelVector<f64>> {
    let mut rng = stream(cfg.master_seed, Purpose::LegacyDevice, trial as u64);
    match cfg.legacy.channel {
        LegacyChannel::Iid => {
            let scale = std::f64::consts::FRAC_1_SQRT_2;
            Ok(ChannelVector::new(
                (0..array.len())
                    .map(|_| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex::new(re * scale, im * scale)
                    })
                    .collect(),
            ))
        }
        LegacyChannel::Multipath => {
            let ps = PathSet::sample(cfg.n_paths, &mut rng)?;
            let z = cfg.tag_region.sample(&mut rng);
            Ok(evaluate_channel(&ps, array, z, &cfg.phys))
        }
    }
}

/// Device gains for `n_device_draws` independent trials. Each trial draws a
/// scene (environment, tag, reader) for the precoders and an independent
/// device channel.
pub fn legacy_gains(cfg: &CampaignConfig, n_device_draws: usize) -> Result<LegacyGains> {
    cfg.validate()?;
    let array = cfg.array()?;
    let grid = cfg.cc_grid()?;
    let per_trial = (0..n_device_draws)
        .into_par_iter()
        .map(|i| {
            let (ps, redraws) = legacy_precoders(cfg, &array, &grid, i)?;
            let h_d = legacy_device(cfg, &array, i)?;
            let g: Vec<f64> = ps.iter().map(|p| h_d.project(p).norm_sqr()).collect();
            Ok((g, redraws))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut gains = vec![Vec::with_capacity(n_device_draws); cfg.kinds.len()];
    for (g, _) in &per_trial {
        for (col, v) in gains.iter_mut().zip(g) {
            col.push(*v);
        }
    }
    Ok(LegacyGains {
        kinds: cfg.kinds.clone(),
        gains,
        redraws: per_trial.iter().map(|t| t.1).sum(),
    })
}

fn legacy_stats(cfg: &CampaignConfig, g: &LegacyGains) -> Vec<LegacyStats> {
    let mut out = Vec::new();
    for (kind, gains) in g.kinds.iter().zip(&g.gains) {
        let n = gains.len() as f64;
        let mean_g = gains.iter().sum::<f64>() / n;
        let var_g = if gains.len() > 1 {
            gains.iter().map(|x| (x - mean_g).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        for snr_db in &cfg.snr_illum_db {
            let snr = db_to_linear(*snr_db);
            let mean = mean_g * snr;
            let variance = var_g * snr * snr;
            let half = 1.959_963_984_540_054 * (variance / n).sqrt();
            out.push(LegacyStats {
                kind: *kind,
                snr_illum_db: *snr_db,
                draws: gains.len(),
                mean,
                mean_db: linear_to_db(mean),
                variance,
                ci_low: mean - half,
                ci_high: mean + half,
            });
        }
    }
    out
}

/// Mean and spread of the legacy-device SNR per precoder and SNR.
pub fn legacy_sweep(
    cfg: &CampaignConfig,
    n_device_draws: usize,
) -> Result<(Vec<LegacyStats>, usize)> {
    if n_device_draws == 0 {
        return Err(Error::invalid("legacy.draws", "must be at least 1"));
    }
    let g = legacy_gains(cfg, n_device_draws)?;
    Ok((legacy_stats(cfg, &g), g.redraws))
}
