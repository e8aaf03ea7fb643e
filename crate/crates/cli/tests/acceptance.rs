//! Acceptance criteria, one PASS/FAIL line each.
//!
//! `cargo test -p backscatter-cli --release --test acceptance` runs the
//! default set. Criterion 9 runs the full `paper` preset and takes minutes; enable it
//! with `-- --include-ignored` or `ACCEPTANCE_SLOW=1`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use backscatter_core::campaign::{
    legacy_sweep, run_campaign, CampaignConfig, CampaignResult, ThresholdRule,
};
use backscatter_core::channel::{
    friis_channel, ChannelField, FieldPoint, ModulationFactor, PathSet, PhysicalConfig,
    PlanarArray, ScalarChannel,
};
use backscatter_core::mapping::{map_delta_snr, MapGrid};
use backscatter_core::metrics::{
    closed_form, delta_snr, delta_snr_general, IlluminationSnr, LinkSample, QosTarget,
};
use backscatter_core::precoding::{
    build_precoder, cc_precoder, cc_response, mrt_precoder, ref_precoder, zf_basis, zf_precoder,
    CcGrid,
};
use backscatter_core::rng::{stream, Purpose};
use backscatter_core::{ChannelVector64, PrecoderKind};
use rand::Rng;

const DRAWS: u64 = 1000;
const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

struct Draw {
    h_st: ChannelVector64,
    h_sr: ChannelVector64,
    h_tr: ScalarChannel<f64>,
}

/// K = 64, M = 100; tag in a 2 m square, reader 0.5 to 10 m away.
fn draws(purpose_offset: u64) -> Vec<Draw> {
    let phys = PhysicalConfig::<f64>::default();
    let array = PlanarArray::half_wavelength(8, 8, &phys).unwrap();
    (0..DRAWS)
        .map(|i| {
            let mut rng = stream(SEED + purpose_offset, Purpose::Scratch, i);
            let field = ChannelField::new(&PathSet::sample(100, &mut rng).unwrap(), &array, &phys);
            let tag = FieldPoint::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let d = rng.random_range(0.5..10.0);
            let reader = tag.towards(TAU * rng.random::<f64>(), d);
            Draw {
                h_st: field.at(tag),
                h_sr: field.at(reader),
                h_tr: friis_channel(d, &phys).unwrap(),
            }
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1_zf_null() -> Outcome {
    let mut worst = 0.0f64;
    for d in draws(1) {
        let p = zf_precoder(&zf_basis(&d.h_st, &d.h_sr).unwrap());
        worst = worst.max(d.h_sr.project(&p).norm_sqr() / d.h_sr.norm_sqr());
    }
    outcome(
        worst < 1e-20,
        format!("max |h_SR p|^2/|h_SR|^2 = {worst:.3e} over {DRAWS} draws, limit 1e-20"),
    )
}

fn c2_unit_norm() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (i, d) in draws(2).iter().enumerate() {
        let mut rng = stream(SEED, Purpose::Scratch, 10_000 + i as u64);
        let basis = zf_basis(&d.h_st, &d.h_sr).unwrap();
        let mut ps = vec![
            ref_precoder(),
            mrt_precoder(&d.h_st).unwrap(),
            zf_precoder(&basis),
        ];
        ps.push(cc_precoder(&basis, TAU * rng.random::<f64>(), rng.random::<f64>()).unwrap());
        let grid = CcGrid::paper();
        let k = rng.random_range(0..grid.phis().len());
        let j = rng.random_range(0..grid.deltas().len());
        ps.push(cc_precoder(&basis, grid.phis()[k], grid.deltas()[j]).unwrap());
        let gamma = ModulationFactor::default();
        ps.push(build_precoder(PrecoderKind::Cc, &d.h_st, &d.h_sr, d.h_tr, &gamma, &grid).unwrap());
        for p in &ps {
            worst = worst.max((p.norm_sqr() - 1.0).abs());
            count += 1;
        }
    }
    outcome(
        worst <= 1e-12,
        format!("max ||p|^2 - 1| = {worst:.3e} over {count} precoders, limit 1e-12"),
    )
}

fn precoders(d: &Draw, i: usize) -> Vec<backscatter_core::Precoder64> {
    let mut rng = stream(SEED, Purpose::Scratch, 20_000 + i as u64);
    let basis = zf_basis(&d.h_st, &d.h_sr).unwrap();
    vec![
        ref_precoder(),
        mrt_precoder(&d.h_st).unwrap(),
        zf_precoder(&basis),
        cc_precoder(&basis, TAU * rng.random::<f64>(), rng.random::<f64>()).unwrap(),
    ]
}

fn c3_difference_form() -> Outcome {
    let unit = IlluminationSnr::from_db(25.0).unwrap();
    let gamma = ModulationFactor::new(1.0, 0.0).unwrap();
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for (i, d) in draws(3).iter().enumerate() {
        let s = LinkSample::new(d.h_st.clone(), d.h_sr.clone(), d.h_tr, unit, gamma).unwrap();
        for p in precoders(d, i) {
            let a = delta_snr(&s, &p).unwrap().linear();
            worst = worst.max(rel(a, delta_snr_general(&s, &p).linear()));
            pairs += 1;
        }
    }
    outcome(
        worst <= 1e-12,
        format!("max relative gap = {worst:.3e} over {pairs} pairs, limit 1e-12"),
    )
}

fn c4_closed_forms() -> Outcome {
    let unit = IlluminationSnr::from_linear(1.0).unwrap();
    let mut worst = [0.0f64; 3];
    for (i, d) in draws(4).iter().enumerate() {
        let s = LinkSample::new(
            d.h_st.clone(),
            d.h_sr.clone(),
            d.h_tr,
            unit,
            Default::default(),
        )
        .unwrap();
        let basis = zf_basis(&d.h_st, &d.h_sr).unwrap();
        let mut rng = stream(SEED, Purpose::Scratch, 30_000 + i as u64);
        let (phi, delta) = (TAU * rng.random::<f64>(), rng.random::<f64>());
        let general = |p| delta_snr_general(&s, p).linear();
        let alpha_zf = basis.gram().q1_norm_sqr.recip().sqrt();
        let alpha_cc = cc_response(basis.gram(), phi, delta).alpha;
        let gaps = [
            rel(
                closed_form::mrt(&d.h_st, &d.h_sr, d.h_tr),
                general(&mrt_precoder(&d.h_st).unwrap()),
            ),
            rel(
                closed_form::zf(alpha_zf, d.h_tr),
                general(&zf_precoder(&basis)),
            ),
            rel(
                closed_form::cc(alpha_cc, phi, delta, d.h_tr),
                general(&cc_precoder(&basis, phi, delta).unwrap()),
            ),
        ];
        for (w, g) in worst.iter_mut().zip(gaps) {
            *w = w.max(g);
        }
    }
    let passed = worst.iter().all(|w| *w <= 1e-9);
    outcome(
        passed,
        format!(
            "max relative gap MRT {:.3e} ZF {:.3e} CC {:.3e}, limit 1e-9",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn c5_threshold() -> Outcome {
    let t = QosTarget::<f64>::from_ber(1e-3)
        .unwrap()
        .delta_snr_target_db();
    outcome(
        (t - 3.40).abs() <= 0.01,
        format!("target for BER 1e-3 = {t:.4} dB, expected 3.40 +- 0.01"),
    )
}

fn c6_mrt_gain() -> Outcome {
    let (mut num, mut den) = (0.0, 0.0);
    for d in draws(6) {
        num += d.h_st.project(&mrt_precoder(&d.h_st).unwrap()).norm_sqr();
        den += d.h_st.coefficients()[0].norm_sqr();
    }
    let ratio = num / den;
    outcome(
        (ratio / 64.0 - 1.0).abs() <= 0.1,
        format!("gain ratio = {ratio:.2} over {DRAWS} draws, expected 64 +- 10%"),
    )
}

fn desk_campaign() -> (CampaignResult, f64) {
    let mut cfg = CampaignConfig::desk();
    cfg.snr_illum_db = vec![20.0, 24.0, 28.0];
    cfg.legacy.draws = 0;
    let t = Instant::now();
    let r = run_campaign(&cfg).unwrap();
    (r, t.elapsed().as_secs_f64())
}

fn c7_cc_dominance(r: &CampaignResult) -> Outcome {
    let mut checked = 0;
    let mut violations = 0;
    for snr in [20.0, 24.0, 28.0] {
        let cc: Vec<_> = r.samples_for(PrecoderKind::Cc, snr).collect();
        let zf: Vec<_> = r.samples_for(PrecoderKind::Zf, snr).collect();
        assert_eq!(cc.len(), zf.len());
        for (c, z) in cc.iter().zip(&zf) {
            assert_eq!((c.draw, c.tag, c.angle), (z.draw, z.tag, z.angle));
            checked += 1;
            if c.threshold.distance < z.threshold.distance {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("{violations} of {checked} samples with D(CC) < D(ZF)"),
    )
}

fn c8_ordering(r: &CampaignResult) -> Outcome {
    let snrs = [20.0, 24.0, 28.0];
    let order = [
        PrecoderKind::Cc,
        PrecoderKind::Zf,
        PrecoderKind::Mrt,
        PrecoderKind::Ref,
    ];
    let d = |k, s| r.distance(k, s, 99.0).unwrap();
    let ordered = snrs
        .iter()
        .all(|&s| order.windows(2).all(|w| d(w[0], s) >= d(w[1], s)));
    let monotone = order
        .iter()
        .all(|&k| snrs.windows(2).all(|w| d(k, w[1]) >= d(k, w[0])));
    let table: Vec<String> = order
        .iter()
        .map(|&k| {
            format!(
                "{} [{}]",
                k,
                snrs.iter()
                    .map(|&s| format!("{:.3}", d(k, s)))
                    .collect::<Vec<_>>()
                    .join(" ")
            )
        })
        .collect();
    outcome(
        ordered && monotone,
        format!(
            "ordered {ordered} monotone {monotone}; D99 m at 20/24/28 dB: {}",
            table.join(", ")
        ),
    )
}

fn crossover(rule: ThresholdRule) -> (bool, String) {
    let mut cfg = CampaignConfig::paper();
    cfg.kinds = vec![PrecoderKind::Mrt, PrecoderKind::Zf];
    cfg.legacy.draws = 0;
    cfg.rule = rule;
    let r = run_campaign(&cfg).unwrap();
    let mut ok = true;
    let mut cols = Vec::new();
    for &s in &cfg.snr_illum_db {
        let mrt = r.distance(PrecoderKind::Mrt, s, 90.0).unwrap();
        let zf = r.distance(PrecoderKind::Zf, s, 90.0).unwrap();
        ok &= mrt >= zf;
        cols.push(format!("{s}dB {mrt:.3}/{zf:.3}"));
    }
    (
        ok,
        format!("{} rule, D90 MRT/ZF m: {}", rule.name(), cols.join(", ")),
    )
}

fn c9_crossover() -> Outcome {
    let (ok, detail) = crossover(ThresholdRule::Prefix);
    outcome(ok, detail)
}

fn c10_legacy() -> Outcome {
    let mut cfg = CampaignConfig::desk();
    cfg.snr_illum_db = vec![20.0, 25.0, 30.0];
    let (stats, _) = legacy_sweep(&cfg, 10_000).unwrap();
    let mut spread = 0.0f64;
    let mut offset = 0.0f64;
    for &s in &cfg.snr_illum_db {
        let at: Vec<f64> = stats
            .iter()
            .filter(|l| l.snr_illum_db == s)
            .map(|l| l.mean_db)
            .collect();
        assert_eq!(at.len(), 4);
        let hi = at.iter().copied().fold(f64::MIN, f64::max);
        let lo = at.iter().copied().fold(f64::MAX, f64::min);
        spread = spread.max(hi - lo);
        offset = offset.max(at.iter().map(|m| (m - s).abs()).fold(0.0, f64::max));
    }
    outcome(
        spread <= 0.2 && offset <= 0.3,
        format!("max pairwise spread {spread:.3} dB (limit 0.2), max offset from SNR_illum {offset:.3} dB (limit 0.3), 10^4 draws"),
    )
}

fn c11_map_consistency() -> Outcome {
    let phys = PhysicalConfig::<f64>::default();
    let l = phys.wavelength();
    let array = PlanarArray::half_wavelength(8, 8, &phys).unwrap();
    let field = ChannelField::new(
        &PathSet::sample(100, &mut stream(SEED, Purpose::MapEnsemble, 0)).unwrap(),
        &array,
        &phys,
    );
    let tag = FieldPoint::new(0.0, 0.0);
    let reader = FieldPoint::new(2.0 * l, 0.0);
    let grid = MapGrid::centered(FieldPoint::new(l, 0.0), 4.0 * l, 4.0 * l, l / 32.0).unwrap();
    let snr = IlluminationSnr::from_db(24.0).unwrap();
    let gamma = ModulationFactor::default();
    let h_tr = friis_channel(2.0 * l, &phys).unwrap();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for kind in PrecoderKind::ALL {
        let p = build_precoder(
            kind,
            &field.at(tag),
            &field.at(reader),
            h_tr,
            &gamma,
            &CcGrid::paper(),
        )
        .unwrap();
        let map = map_delta_snr(&field, &p, snr, tag, &gamma, &grid);
        for (i, v) in map.values.iter().enumerate() {
            let Some(v) = v else { continue };
            let z = grid.point(i);
            let link = friis_channel(tag.distance(&z), &phys).unwrap();
            let s = LinkSample::new(field.at(tag), field.at(z), link, snr, gamma).unwrap();
            worst = worst.max(rel(*v, delta_snr_general(&s, &p).linear()));
            checked += 1;
        }
    }
    outcome(
        worst <= 1e-12,
        format!("max relative gap {worst:.3e} over {checked} pixels ({} per map, 4 precoders), limit 1e-12", grid.len()),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn c12_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_backscatter-sim");
    let tmp = tempfile::tempdir().unwrap();
    let small = [
        "campaign.n_draws=2",
        "campaign.n_tags=2",
        "campaign.n_angles=2",
        "campaign.d_max=20",
        "legacy.draws=200",
        "map.ensemble=4",
    ];
    let mut bad = Vec::new();
    let mut files = 0;
    for mode in ["maps", "f_o_maps", "campaign", "legacy", "selfcheck"] {
        let run = |tag: &str| {
            let out = tmp.path().join(format!("{mode}_{tag}"));
            let mut cmd = Command::new(bin);
            cmd.args(["--mode", mode, "--preset", "desk", "--seed", "77", "--out"])
                .arg(&out);
            for s in small {
                cmd.args(["--set", s]);
            }
            let status = cmd.output().unwrap().status;
            assert!(status.success(), "{mode} exited with {status}");
            snapshot(&out)
        };
        let (a, b) = (run("a"), run("b"));
        files += a.len();
        if a != b {
            bad.push(mode);
        }
    }
    outcome(
        bad.is_empty(),
        format!("5 modes run twice, {files} files compared, differing modes: {bad:?}"),
    )
}

fn main() -> ExitCode {
    let slow = std::env::args().any(|a| a == "--include-ignored" || a == "--ignored")
        || std::env::var_os("ACCEPTANCE_SLOW").is_some_and(|v| v != "0");
    let mut failed = 0;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "{status} criterion {id:>2} {name}: {} [{:.1}s]",
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.passed {
            failed += 1;
        }
    };
    report(1, "zf_null_depth", &mut c1_zf_null);
    report(2, "unit_norm", &mut c2_unit_norm);
    report(3, "difference_equals_expansion", &mut c3_difference_form);
    report(4, "closed_form_oracle", &mut c4_closed_forms);
    report(5, "threshold_calibration", &mut c5_threshold);
    report(6, "mrt_hot_spot_gain", &mut c6_mrt_gain);
    let (desk, secs) = desk_campaign();
    println!("     desk campaign 5x5x8 at 20/24/28 dB took {secs:.1}s");
    report(7, "cc_dominance", &mut || c7_cc_dominance(&desk));
    report(8, "desk_ordering", &mut || c8_ordering(&desk));
    if slow {
        report(9, "relaxed_target_crossover", &mut c9_crossover);
        let (ok, detail) = crossover(ThresholdRule::Pooled);
        println!(
            "INFO criterion  9 under the pooled rule would {}: {detail}",
            if ok { "pass" } else { "fail" }
        );
    } else {
        println!("SKIP criterion  9 relaxed_target_crossover: full `paper` preset, run with -- --include-ignored");
    }
    report(10, "legacy_invariance", &mut c10_legacy);
    report(11, "delta_snr_map_consistency", &mut c11_map_consistency);
    report(12, "determinism", &mut c12_determinism);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
