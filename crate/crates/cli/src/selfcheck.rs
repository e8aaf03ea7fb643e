//! Embedded invariant checks run by `--mode selfcheck`.

use backscatter_core::channel::{friis_channel, ChannelField, PathSet, ScalarChannel};
use backscatter_core::metrics::{
    closed_form, delta_snr, delta_snr_general, IlluminationSnr, LinkSample, QosTarget,
};
use backscatter_core::precoding::{
    cc_precoder, cc_response, cc_search, mrt_precoder, ref_precoder, zf_basis, zf_precoder,
    zf_unit_delta, CcGrid,
};
use backscatter_core::rng::{stream, Purpose};
use backscatter_core::{ChannelVector64, Result};
use rand::Rng;

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

struct Draw {
    h_st: ChannelVector64,
    h_sr: ChannelVector64,
    h_tr: ScalarChannel<f64>,
    phi: f64,
    delta: f64,
}

fn draws(cfg: &RunConfig) -> Result<Vec<Draw>> {
    let array = cfg.campaign.array()?;
    let region = cfg.campaign.tag_region;
    (0..cfg.selfcheck_draws as u64)
        .map(|i| {
            let mut rng = stream(cfg.master_seed, Purpose::SelfCheck, i);
            let field =
                ChannelField::new(&PathSet::sample(cfg.paths, &mut rng)?, &array, &cfg.phys);
            let tag = region.sample(&mut rng);
            let d = cfg.phys.far_field_bound() + 10.0 * rng.random::<f64>();
            let reader = tag.towards(std::f64::consts::TAU * rng.random::<f64>(), d);
            Ok(Draw {
                h_st: field.at(tag),
                h_sr: field.at(reader),
                h_tr: friis_channel(d, &cfg.phys)?,
                phi: std::f64::consts::TAU * rng.random::<f64>(),
                delta: rng.random::<f64>(),
            })
        })
        .collect()
}

fn worst<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn run(cfg: &RunConfig) -> Result<Vec<Check>> {
    let ds = draws(cfg)?;
    let unit = IlluminationSnr::from_linear(1.0)?;
    let mut out = Vec::new();

    let mut null = Vec::new();
    let mut norm = Vec::new();
    let mut eq = Vec::new();
    let mut table = Vec::new();
    let mut gain = (0.0, 0.0);
    for d in &ds {
        let basis = zf_basis(&d.h_st, &d.h_sr)?;
        let zf = zf_precoder(&basis);
        let mrt = mrt_precoder(&d.h_st)?;
        let cc = cc_precoder(&basis, d.phi, d.delta)?;
        null.push(d.h_sr.project(&zf).norm_sqr() / d.h_sr.norm_sqr());
        norm.extend(
            [&ref_precoder(), &mrt, &zf, &cc]
                .iter()
                .map(|p| (p.norm_sqr() - 1.0).abs()),
        );
        let sample = LinkSample::new(
            d.h_st.clone(),
            d.h_sr.clone(),
            d.h_tr,
            unit,
            Default::default(),
        )?;
        for p in [&ref_precoder(), &mrt, &zf, &cc] {
            let a = delta_snr(&sample, p)?.linear();
            eq.push(rel(a, delta_snr_general(&sample, p).linear()));
        }
        let general = |p| delta_snr_general(&sample, p).linear();
        let alpha_zf = basis.gram().q1_norm_sqr.recip().sqrt();
        let alpha_cc = cc_response(basis.gram(), d.phi, d.delta).alpha;
        table.push(rel(
            closed_form::mrt(&d.h_st, &d.h_sr, d.h_tr),
            general(&mrt),
        ));
        table.push(rel(closed_form::zf(alpha_zf, d.h_tr), general(&zf)));
        table.push(rel(
            closed_form::cc(alpha_cc, d.phi, d.delta, d.h_tr),
            general(&cc),
        ));
        gain.0 += d.h_st.project(&mrt).norm_sqr();
        gain.1 += d.h_st.coefficients()[0].norm_sqr();
    }
    let n = ds.len();
    let k = (cfg.array_lines * cfg.array_columns) as f64;

    let w = worst(null);
    out.push(Check {
        name: "zf_null",
        passed: w < 1e-20,
        detail: format!("max |h_SR p_ZF|^2/|h_SR|^2 = {w:.3e} over {n} draws (limit 1e-20)"),
    });
    let w = worst(norm);
    out.push(Check {
        name: "unit_norm",
        passed: w <= 1e-12,
        detail: format!("max | |p|^2 - 1 | = {w:.3e} (limit 1e-12)"),
    });
    let w = worst(eq);
    out.push(Check {
        name: "difference_equals_expansion",
        passed: w <= 1e-12,
        detail: format!("max relative gap = {w:.3e} (limit 1e-12)"),
    });
    let w = worst(table);
    out.push(Check {
        name: "closed_forms",
        passed: w <= 1e-9,
        detail: format!("max relative gap = {w:.3e} (limit 1e-9)"),
    });
    let t = QosTarget::<f64>::from_ber(1e-3)?.delta_snr_target_db();
    out.push(Check {
        name: "qos_threshold",
        passed: (t - 3.40).abs() <= 0.01,
        detail: format!("target for BER 1e-3 = {t:.4} dB (expected 3.40 +- 0.01)"),
    });
    let ratio = gain.0 / gain.1;
    out.push(Check {
        name: "mrt_gain",
        passed: (ratio / k - 1.0).abs() <= 0.1,
        detail: format!(
            "mean MRT gain / mean single-antenna gain = {ratio:.2} (expected {k} +- 10%)"
        ),
    });
    let grid = CcGrid::<f64>::uniform(cfg.cc_phases, cfg.cc_allocations)?;
    let dominated = ds.iter().all(|d| {
        let basis = zf_basis(&d.h_st, &d.h_sr).expect("checked above");
        let g = Default::default();
        cc_search(basis.gram(), d.h_tr, &g, &grid).unit_delta
            >= zf_unit_delta(basis.gram(), d.h_tr, &g)
    });
    out.push(Check {
        name: "cc_dominates_zf",
        passed: dominated,
        detail: format!("grid search never below the zero-forcing beam over {n} draws"),
    });
    Ok(out)
}

pub fn report(checks: &[Check]) -> String {
    let mut s = String::new();
    for c in checks {
        s.push_str(&format!(
            "{} {} {}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    s
}
