//! One function per run mode; each writes its artifacts and nothing else.

use std::fmt::Write as _;

use backscatter_core::campaign::{legacy_sweep, run_campaign, CampaignResult, LegacyStats};
use backscatter_core::channel::{friis_channel, ChannelField, PathSet};
use backscatter_core::mapping::{
    fmt9, map_delta_snr, map_f_o, map_snr_off, map_snr_tr, sample_ensemble, FoScenario, MapHeader,
    ScalarMap,
};
use backscatter_core::metrics::IlluminationSnr;
use backscatter_core::precoding::{build_precoder, CcGrid};
use backscatter_core::rng::{stream, Purpose};
use backscatter_core::PrecoderKind;
use serde_json::{json, Value};

use crate::artifacts::Artifacts;
use crate::config::RunConfig;
use crate::{selfcheck, CliError};

fn header(cfg: &RunConfig, kind: PrecoderKind, extra: Vec<(String, String)>) -> MapHeader {
    let mut all = vec![
        ("snr_illum_db".to_string(), cfg.snr_illum_db.to_string()),
        (
            "tag".to_string(),
            format!("{} {}", fmt9(cfg.tag.x), fmt9(cfg.tag.y)),
        ),
        (
            "reader".to_string(),
            format!("{} {}", fmt9(cfg.reader.x), fmt9(cfg.reader.y)),
        ),
    ];
    all.extend(extra);
    MapHeader {
        seed: cfg.master_seed,
        precoder: Some(kind),
        extra: all,
    }
}

fn emit_map(
    out: &mut Artifacts,
    stem: &str,
    map: &ScalarMap<f64>,
    h: &MapHeader,
) -> Result<(), CliError> {
    out.write(&format!("{stem}.grid.csv"), &map.to_grid_text(h))?;
    out.write(&format!("{stem}.long.csv"), &map.to_long_text(h))
}

/// Fixed-precoder maps of one environment (ensemble draw 0).
pub fn maps(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let array = cfg.campaign.array()?;
    let ps = PathSet::sample(
        cfg.paths,
        &mut stream(cfg.master_seed, Purpose::MapEnsemble, 0),
    )?;
    out.write("scene_paths.txt", &ps.to_record())?;
    let field = ChannelField::new(&ps, &array, &cfg.phys);
    let snr = IlluminationSnr::from_db(cfg.snr_illum_db)?;
    let h_st = field.at(cfg.tag);
    let h_sr = field.at(cfg.reader);
    let h_tr = friis_channel(cfg.tag.distance(&cfg.reader), &cfg.phys)?;
    let grid = CcGrid::uniform(cfg.cc_phases, cfg.cc_allocations)?;
    for kind in &cfg.map_precoders {
        let p = build_precoder(*kind, &h_st, &h_sr, h_tr, &cfg.gamma, &grid)?;
        let mut extra = Vec::new();
        if let Some(cc) = p.cc_params() {
            extra.push(("cc_phi".to_string(), fmt9(cc.phi)));
            extra.push(("cc_delta".to_string(), fmt9(cc.delta)));
        }
        let h = header(cfg, *kind, extra);
        let name = kind.name().to_ascii_lowercase();
        emit_map(
            out,
            &format!("{name}_snr_off"),
            &map_snr_off(&field, &p, snr, &cfg.map_grid),
            &h,
        )?;
        emit_map(
            out,
            &format!("{name}_snr_tr"),
            &map_snr_tr(&field, &p, snr, cfg.tag, &cfg.map_grid),
            &h,
        )?;
        let delta = map_delta_snr(&field, &p, snr, cfg.tag, &cfg.gamma, &cfg.map_grid);
        emit_map(out, &format!("{name}_delta_snr"), &delta, &h)?;
    }
    Ok(())
}

/// Detection-probability maps with adaptive precoders.
pub fn f_o_maps(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let array = cfg.campaign.array()?;
    let ensemble = sample_ensemble(
        cfg.map_ensemble,
        cfg.paths,
        cfg.master_seed,
        &array,
        &cfg.phys,
    )?;
    let mut summary = Vec::new();
    for kind in &cfg.map_precoders {
        let scenario = FoScenario {
            kind: *kind,
            tag: cfg.tag,
            snr_illum: IlluminationSnr::from_db(cfg.snr_illum_db)?,
            gamma: cfg.gamma,
            target: cfg.qos,
            cc_grid: CcGrid::uniform(cfg.cc_phases, cfg.cc_allocations)?,
        };
        let m = map_f_o(&ensemble, &scenario, &cfg.map_grid)?;
        let extra = vec![
            ("draws".to_string(), m.draws.to_string()),
            ("ill_conditioned".to_string(), m.ill_conditioned.to_string()),
        ];
        let name = kind.name().to_ascii_lowercase();
        emit_map(
            out,
            &format!("{name}_f_o"),
            &m.map,
            &header(cfg, *kind, extra),
        )?;
        let covered: Vec<f64> = m.map.values.iter().flatten().copied().collect();
        summary.push(json!({
            "precoder": kind.name(),
            "draws": m.draws,
            "ill_conditioned": m.ill_conditioned,
            "pixels": m.map.values.len(),
            "masked_pixels": m.map.values.len() - covered.len(),
            "mean_f_o_percent": covered.iter().sum::<f64>() / covered.len().max(1) as f64,
        }));
    }
    out.write(
        "f_o_summary.json",
        &pretty(&json!({ "seed": cfg.master_seed, "maps": summary })),
    )
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn legacy_csv(stats: &[LegacyStats]) -> String {
    let mut s =
        String::from("kind,snr_illum_db,draws,mean_linear,mean_db,variance,ci95_low,ci95_high\n");
    for l in stats {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            l.kind,
            l.snr_illum_db,
            l.draws,
            fmt9(l.mean),
            fmt9(l.mean_db),
            fmt9(l.variance),
            fmt9(l.ci_low),
            fmt9(l.ci_high)
        );
    }
    s
}

fn legacy_json(stats: &[LegacyStats]) -> Value {
    Value::Array(
        stats
            .iter()
            .map(|l| {
                json!({
                    "precoder": l.kind.name(),
                    "snr_illum_db": l.snr_illum_db,
                    "draws": l.draws,
                    "mean_linear": l.mean,
                    "mean_db": l.mean_db,
                    "variance": l.variance,
                    "ci95": [l.ci_low, l.ci_high],
                })
            })
            .collect(),
    )
}

fn campaign_files(
    cfg: &RunConfig,
    r: &CampaignResult,
    out: &mut Artifacts,
) -> Result<(), CliError> {
    let n = r.metadata.samples_per_point;
    let mut curves =
        String::from("kind,snr_illum_db,percentile,distance_m,not_detected,saturated,samples\n");
    for c in &r.curves {
        let _ = writeln!(
            curves,
            "{},{},{},{},{},{},{}",
            c.kind,
            c.snr_illum_db,
            c.percentile,
            fmt9(c.distance),
            c.not_detected,
            c.saturated,
            n
        );
    }
    out.write("campaign_curves.csv", &curves)?;

    let c = &cfg.campaign;
    let mut samples = String::from(
        "kind,snr_illum_db,draw,tag,angle_index,angle_rad,tag_x,tag_y,distance_m,flag\n",
    );
    for s in &r.samples {
        let t = c.tag_position(s.draw, s.tag);
        let _ = writeln!(
            samples,
            "{},{},{},{},{},{},{},{},{},{}",
            s.kind,
            s.snr_illum_db,
            s.draw,
            s.tag,
            s.angle,
            fmt9(c.angle(s.angle)),
            fmt9(t.x),
            fmt9(t.y),
            fmt9(s.threshold.distance),
            s.threshold.flag.name()
        );
    }
    out.write("campaign_samples.csv", &samples)?;
    out.write("legacy_stats.csv", &legacy_csv(&r.legacy))?;

    let m = &r.metadata;
    let summary = json!({
        "metadata": {
            "seed": m.master_seed,
            "rule": m.rule.name(),
            "n_draws": m.n_draws,
            "n_tags": m.n_tags,
            "n_angles": m.n_angles,
            "samples_per_point": m.samples_per_point,
            "common_random_numbers": m.common_random_numbers,
            "d_min_m": c.d_min(),
            "d_max_m": c.d_max,
            "d_precision_m": c.d_precision,
            "coarse_step_m": c.coarse_step(),
            "delta_snr_target_db": c.qos.delta_snr_target_db(),
            "ill_conditioned": m.ill_conditioned.iter().map(|(k, n)| (k.name().to_string(), json!(n))).collect::<serde_json::Map<_, _>>(),
            "legacy_draws": m.legacy_draws,
            "legacy_redraws": m.legacy_redraws,
            "legacy_channel": m.legacy_channel.name(),
        },
        "curves": r.curves.iter().map(|c| json!({
            "precoder": c.kind.name(),
            "snr_illum_db": c.snr_illum_db,
            "percentile": c.percentile,
            "distance_m": c.distance,
            "not_detected": c.not_detected,
            "saturated": c.saturated,
        })).collect::<Vec<_>>(),
        "samples": r.samples.iter().map(|s| json!({
            "precoder": s.kind.name(),
            "snr_illum_db": s.snr_illum_db,
            "draw": s.draw,
            "tag": s.tag,
            "angle": s.angle,
            "distance_m": s.threshold.distance,
            "flag": s.threshold.flag.name(),
        })).collect::<Vec<_>>(),
        "legacy": legacy_json(&r.legacy),
    });
    out.write("campaign_summary.json", &pretty(&summary))
}

pub fn campaign(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let r = run_campaign(&cfg.campaign)?;
    campaign_files(cfg, &r, out)
}

pub fn legacy(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let (stats, redraws) = legacy_sweep(&cfg.campaign, cfg.campaign.legacy.draws)?;
    out.write("legacy_stats.csv", &legacy_csv(&stats))?;
    let summary = json!({
        "seed": cfg.master_seed,
        "draws": cfg.campaign.legacy.draws,
        "redraws": redraws,
        "channel": cfg.campaign.legacy.channel.name(),
        "stats": legacy_json(&stats),
    });
    out.write("legacy_summary.json", &pretty(&summary))
}

/// Returns whether every check passed.
pub fn selfcheck(cfg: &RunConfig, out: &mut Artifacts) -> Result<bool, CliError> {
    let checks = selfcheck::run(cfg)?;
    let report = selfcheck::report(&checks);
    print!("{report}");
    out.write("selfcheck.txt", &report)?;
    Ok(checks.iter().all(|c| c.passed))
}
