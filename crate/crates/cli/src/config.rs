//! Run configuration: flat `section.key = value` text (TOML dotted keys),
//! preset defaults, and the resolved echo written next to the artifacts.
//!
//! Precedence: preset defaults, then the config file, then command-line
//! overrides. Keys whose defaults depend on other keys (the reader position,
//! the map window, the ΔSNR target) are resolved last, so the echo always
//! carries explicit numbers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use backscatter_core::campaign::{
    CampaignConfig, LegacyChannel, LegacyConfig, Region, ThresholdRule,
};
use backscatter_core::channel::{FieldPoint, ModulationFactor, PhysicalConfig};
use backscatter_core::mapping::MapGrid;
use backscatter_core::metrics::QosTarget;
use backscatter_core::PrecoderKind;
use toml::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Maps,
    FoMaps,
    Campaign,
    Legacy,
    Selfcheck,
}

impl Mode {
    pub const NAMES: [&'static str; 5] = ["maps", "f_o_maps", "campaign", "legacy", "selfcheck"];

    pub fn name(self) -> &'static str {
        match self {
            Self::Maps => "maps",
            Self::FoMaps => "f_o_maps",
            Self::Campaign => "campaign",
            Self::Legacy => "legacy",
            Self::Selfcheck => "selfcheck",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "maps" => Ok(Self::Maps),
            "f_o_maps" => Ok(Self::FoMaps),
            "campaign" => Ok(Self::Campaign),
            "legacy" => Ok(Self::Legacy),
            "selfcheck" => Ok(Self::Selfcheck),
            _ => Err(format!("expected one of {}", Mode::NAMES.join(", "))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Paper,
    Desk,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Self::Paper => "paper",
            Self::Desk => "desk",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper" => Ok(Self::Paper),
            "desk" => Ok(Self::Desk),
            _ => Err("expected paper or desk".into()),
        }
    }
}

/// Every accepted key. Keys marked `auto` have no preset value and are
/// derived during resolution when absent.
pub const KEYS: &[&str] = &[
    "mode",
    "preset",
    "seed",
    "physical.carrier_hz",
    "array.lines",
    "array.columns",
    "array.antennas",
    "scenario.paths",
    "scenario.gamma_on",
    "scenario.gamma_off",
    "scenario.tag_x",
    "scenario.tag_y",
    "scenario.reader_x",
    "scenario.reader_y",
    "scenario.snr_illum_db",
    "qos.ber_target",
    "qos.delta_snr_target_db",
    "cc.phases",
    "cc.allocations",
    "map.x_min",
    "map.x_max",
    "map.y_min",
    "map.y_max",
    "map.step",
    "map.ensemble",
    "map.precoders",
    "campaign.n_draws",
    "campaign.n_tags",
    "campaign.n_angles",
    "campaign.tag_x_min",
    "campaign.tag_x_max",
    "campaign.tag_y_min",
    "campaign.tag_y_max",
    "campaign.snr_illum_db",
    "campaign.d_max",
    "campaign.d_precision",
    "campaign.coarse_factor",
    "campaign.percentiles",
    "campaign.precoders",
    "campaign.rule",
    "legacy.draws",
    "legacy.reader_distance_max",
    "legacy.channel",
    "selfcheck.draws",
];

type Table = BTreeMap<String, Value>;

fn preset_table(preset: Preset) -> Table {
    let base = CampaignConfig::paper();
    let c = match preset {
        Preset::Paper => CampaignConfig::paper(),
        Preset::Desk => CampaignConfig::desk(),
    };
    let kinds = || {
        Value::Array(
            PrecoderKind::ALL
                .iter()
                .map(|k| Value::String(k.name().into()))
                .collect(),
        )
    };
    let floats = |v: &[f64]| Value::Array(v.iter().map(|x| Value::Float(*x)).collect());
    let int = |n: usize| Value::Integer(n as i64);
    let mut t = Table::new();
    let mut put = |k: &str, v: Value| {
        t.insert(k.to_string(), v);
    };
    put("preset", Value::String(preset.name().into()));
    put("seed", Value::Integer(1));
    put(
        "physical.carrier_hz",
        Value::Float(base.phys.carrier_frequency()),
    );
    put("array.lines", int(base.array_lines));
    put("array.columns", int(base.array_columns));
    put("scenario.paths", int(base.n_paths));
    put("scenario.gamma_on", Value::Float(1.0));
    put("scenario.gamma_off", Value::Float(0.0));
    put("scenario.tag_x", Value::Float(0.0));
    put("scenario.tag_y", Value::Float(0.0));
    put("scenario.reader_y", Value::Float(0.0));
    put("scenario.snr_illum_db", Value::Float(24.0));
    put("qos.ber_target", Value::Float(1e-3));
    put("cc.phases", int(base.cc_phases));
    put("cc.allocations", int(base.cc_allocations));
    put(
        "map.ensemble",
        int(match preset {
            Preset::Paper => 100,
            Preset::Desk => 20,
        }),
    );
    put("map.precoders", kinds());
    put("campaign.n_draws", int(c.n_draws));
    put("campaign.n_tags", int(c.n_tags));
    put("campaign.n_angles", int(c.n_angles));
    put("campaign.tag_x_min", Value::Float(c.tag_region.x_min));
    put("campaign.tag_x_max", Value::Float(c.tag_region.x_max));
    put("campaign.tag_y_min", Value::Float(c.tag_region.y_min));
    put("campaign.tag_y_max", Value::Float(c.tag_region.y_max));
    put("campaign.snr_illum_db", floats(&c.snr_illum_db));
    put("campaign.d_max", Value::Float(c.d_max));
    put("campaign.d_precision", Value::Float(c.d_precision));
    put("campaign.coarse_factor", int(c.coarse_factor));
    put("campaign.percentiles", floats(&c.percentiles));
    put("campaign.precoders", kinds());
    put("campaign.rule", Value::String(c.rule.name().into()));
    put("legacy.draws", int(c.legacy.draws));
    put(
        "legacy.reader_distance_max",
        Value::Float(c.legacy.reader_distance_max),
    );
    put(
        "legacy.channel",
        Value::String(c.legacy.channel.name().into()),
    );
    put("selfcheck.draws", int(200));
    t
}

/// Flattens nested tables into dotted keys.
fn flatten(prefix: &str, table: &toml::Table, out: &mut Table) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(inner) => flatten(&key, inner, out),
            _ => {
                out.insert(key, v.clone());
            }
        }
    }
}

/// Parses config text into dotted keys, rejecting unknown ones.
pub fn parse_text(text: &str) -> Result<Table, CliError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(format!("config: {e}")))?;
    let mut out = Table::new();
    flatten("", &table, &mut out);
    for k in out.keys() {
        check_key(k)?;
    }
    Ok(out)
}

fn check_key(k: &str) -> Result<(), CliError> {
    if KEYS.contains(&k) {
        Ok(())
    } else {
        Err(CliError::Config(format!("{k}: unknown key")))
    }
}

/// Parses one `key=value` override; bare words are taken as strings.
pub fn parse_override(item: &str) -> Result<(String, Value), CliError> {
    let Some((k, v)) = item.split_once('=') else {
        return Err(CliError::Config(format!(
            "--set {item:?}: expected key=value"
        )));
    };
    let k = k.trim().to_string();
    check_key(&k)?;
    let v = v.trim();
    let snippet = format!("x = {v}");
    let value = match snippet.parse::<toml::Table>() {
        Ok(t) => t["x"].clone(),
        Err(_) => Value::String(v.to_string()),
    };
    Ok((k, value))
}

/// Everything a run needs, fully resolved. The output directory is not
/// part of the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub preset: Preset,
    pub master_seed: u64,
    pub phys: PhysicalConfig<f64>,
    pub array_lines: usize,
    pub array_columns: usize,
    pub paths: usize,
    pub gamma: ModulationFactor<f64>,
    pub tag: FieldPoint<f64>,
    pub reader: FieldPoint<f64>,
    pub snr_illum_db: f64,
    pub qos: QosTarget<f64>,
    pub cc_phases: usize,
    pub cc_allocations: usize,
    pub map_grid: MapGrid<f64>,
    pub map_ensemble: usize,
    pub map_precoders: Vec<PrecoderKind>,
    pub campaign: CampaignConfig,
    pub selfcheck_draws: usize,
    resolved: Table,
}

struct Reader<'a>(&'a Table);

impl Reader<'_> {
    fn get(&self, k: &str) -> Result<&Value, CliError> {
        self.0
            .get(k)
            .ok_or_else(|| CliError::Config(format!("{k}: missing")))
    }

    fn float(&self, k: &str) -> Result<f64, CliError> {
        as_float(k, self.get(k)?)
    }

    fn float_in(&self, k: &str, lo: f64, hi: f64, range: &str) -> Result<f64, CliError> {
        let v = self.float(k)?;
        if v >= lo && v <= hi && v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::Config(format!(
                "{k} = {v}: valid range is {range}"
            )))
        }
    }

    fn count(&self, k: &str, min: usize) -> Result<usize, CliError> {
        match self.get(k)? {
            Value::Integer(n) if *n >= min as i64 => Ok(*n as usize),
            v => Err(CliError::Config(format!(
                "{k} = {v}: expected an integer >= {min}"
            ))),
        }
    }

    fn text(&self, k: &str) -> Result<&str, CliError> {
        match self.get(k)? {
            Value::String(s) => Ok(s),
            v => Err(CliError::Config(format!("{k} = {v}: expected a string"))),
        }
    }

    fn parsed<T: FromStr>(&self, k: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.text(k)?;
        s.parse()
            .map_err(|e| CliError::Config(format!("{k} = {s:?}: {e}")))
    }

    fn floats(&self, k: &str) -> Result<Vec<f64>, CliError> {
        match self.get(k)? {
            Value::Array(items) if !items.is_empty() => {
                items.iter().map(|v| as_float(k, v)).collect()
            }
            v => Err(CliError::Config(format!(
                "{k} = {v}: expected a nonempty list of numbers"
            ))),
        }
    }

    fn kinds(&self, k: &str) -> Result<Vec<PrecoderKind>, CliError> {
        let bad = |v: &Value| {
            CliError::Config(format!(
                "{k} = {v}: expected a nonempty list drawn from REF, MRT, ZF, CC"
            ))
        };
        let v = self.get(k)?;
        let Value::Array(items) = v else {
            return Err(bad(v));
        };
        if items.is_empty() {
            return Err(bad(v));
        }
        let mut out = Vec::new();
        for item in items {
            let kind = item
                .as_str()
                .and_then(|s| s.parse::<PrecoderKind>().ok())
                .ok_or_else(|| bad(v))?;
            if out.contains(&kind) {
                return Err(CliError::Config(format!("{k}: {kind} listed twice")));
            }
            out.push(kind);
        }
        Ok(out)
    }

    fn seed(&self) -> Result<u64, CliError> {
        match self.get("seed")? {
            Value::Integer(n) if *n >= 0 => Ok(*n as u64),
            Value::String(s) => s.parse().map_err(|_| {
                CliError::Config(format!("seed = {s:?}: expected an unsigned 64-bit integer"))
            }),
            v => Err(CliError::Config(format!(
                "seed = {v}: expected an unsigned 64-bit integer"
            ))),
        }
    }
}

fn as_float(k: &str, v: &Value) -> Result<f64, CliError> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(n) => Ok(*n as f64),
        _ => Err(CliError::Config(format!("{k} = {v}: expected a number"))),
    }
}

fn core_err(e: backscatter_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    /// Merges layers over the preset selected by the last layer that names
    /// one (default `paper`) and resolves derived keys.
    pub fn resolve(layers: &[Table]) -> Result<Self, CliError> {
        let preset = layers
            .iter()
            .rev()
            .find_map(|l| l.get("preset"))
            .map(|v| match v {
                Value::String(s) => s
                    .parse::<Preset>()
                    .map_err(|e| CliError::Config(format!("preset = {s:?}: {e}"))),
                _ => Err(CliError::Config(format!(
                    "preset = {v}: expected paper or desk"
                ))),
            })
            .transpose()?
            .unwrap_or(Preset::Paper);
        let mut t = preset_table(preset);
        for layer in layers {
            for (k, v) in layer {
                check_key(k)?;
                t.insert(k.clone(), v.clone());
            }
        }
        Self::from_table(t)
    }

    fn from_table(mut t: Table) -> Result<Self, CliError> {
        if !t.contains_key("mode") {
            return Err(CliError::Config(format!(
                "mode: missing; expected one of {}",
                Mode::NAMES.join(", ")
            )));
        }
        let carrier = Reader(&t).float_in(
            "physical.carrier_hz",
            f64::MIN_POSITIVE,
            f64::MAX,
            "(0, inf) Hz",
        )?;
        let phys = PhysicalConfig::new(carrier).map_err(core_err)?;
        let lambda = phys.wavelength();

        let (lines, columns) = {
            let r = Reader(&t);
            (r.count("array.lines", 1)?, r.count("array.columns", 1)?)
        };
        match t.get("array.antennas") {
            None => {
                t.insert(
                    "array.antennas".into(),
                    Value::Integer((lines * columns) as i64),
                );
            }
            Some(v) => {
                let k = Reader(&t).count("array.antennas", 2)?;
                if k != lines * columns {
                    return Err(CliError::Config(format!(
                        "array.antennas = {v}: K must equal array.lines x array.columns = {lines} x {columns} = {}",
                        lines * columns
                    )));
                }
            }
        }
        if lines * columns < 2 {
            return Err(CliError::Config(
                "array: at least 2 antennas are required".into(),
            ));
        }

        t.entry("scenario.reader_x".into())
            .or_insert(Value::Float(2.0 * lambda));
        let ber = Reader(&t).float_in(
            "qos.ber_target",
            f64::MIN_POSITIVE,
            0.5 - f64::EPSILON,
            "(0, 0.5)",
        )?;
        if !t.contains_key("qos.delta_snr_target_db") {
            let q = QosTarget::from_ber(ber).map_err(core_err)?;
            t.insert(
                "qos.delta_snr_target_db".into(),
                Value::Float(q.delta_snr_target_db()),
            );
        }

        let (tag, reader) = {
            let r = Reader(&t);
            (
                FieldPoint::new(r.float("scenario.tag_x")?, r.float("scenario.tag_y")?),
                FieldPoint::new(r.float("scenario.reader_x")?, r.float("scenario.reader_y")?),
            )
        };
        if tag.distance(&reader) < phys.far_field_bound() {
            return Err(CliError::Config(format!(
                "scenario.reader_x: tag-to-reader distance {} m is below the far-field bound {} m",
                tag.distance(&reader),
                phys.far_field_bound()
            )));
        }
        let mid = FieldPoint::new(0.5 * (tag.x + reader.x), 0.5 * (tag.y + reader.y));
        for (k, v) in [
            ("map.x_min", mid.x - 2.0 * lambda),
            ("map.x_max", mid.x + 2.0 * lambda),
            ("map.y_min", mid.y - 2.0 * lambda),
            ("map.y_max", mid.y + 2.0 * lambda),
            ("map.step", lambda / 16.0),
        ] {
            t.entry(k.into()).or_insert(Value::Float(v));
        }

        let r = Reader(&t);
        let mode: Mode = r.parsed("mode")?;
        let preset: Preset = r.parsed("preset")?;
        let master_seed = r.seed()?;
        let paths = r.count("scenario.paths", 1)?;
        let gamma = ModulationFactor::new(
            r.float_in("scenario.gamma_on", 0.0, 1.0, "[0, 1]")?,
            r.float_in("scenario.gamma_off", 0.0, 1.0, "[0, 1]")?,
        )
        .map_err(core_err)?;
        let snr_illum_db = r.float_in("scenario.snr_illum_db", -200.0, 200.0, "[-200, 200] dB")?;
        let target_db = r.float_in("qos.delta_snr_target_db", -200.0, 200.0, "[-200, 200] dB")?;
        let qos = QosTarget::with_threshold_db(ber, target_db).map_err(core_err)?;
        let cc_phases = r.count("cc.phases", 1)?;
        let cc_allocations = r.count("cc.allocations", 1)?;
        let step = r.float("map.step")?;
        let map_grid = MapGrid::new(
            r.float("map.x_min")?,
            r.float("map.x_max")?,
            r.float("map.y_min")?,
            r.float("map.y_max")?,
            step,
        )
        .map_err(core_err)?;
        let map_ensemble = r.count("map.ensemble", 1)?;
        let map_precoders = r.kinds("map.precoders")?;

        let campaign = CampaignConfig {
            phys,
            array_lines: lines,
            array_columns: columns,
            n_paths: paths,
            gamma,
            qos,
            n_draws: r.count("campaign.n_draws", 1)?,
            n_tags: r.count("campaign.n_tags", 1)?,
            tag_region: Region {
                x_min: r.float("campaign.tag_x_min")?,
                x_max: r.float("campaign.tag_x_max")?,
                y_min: r.float("campaign.tag_y_min")?,
                y_max: r.float("campaign.tag_y_max")?,
            },
            n_angles: r.count("campaign.n_angles", 1)?,
            snr_illum_db: r.floats("campaign.snr_illum_db")?,
            d_max: r.float("campaign.d_max")?,
            d_precision: r.float("campaign.d_precision")?,
            coarse_factor: r.count("campaign.coarse_factor", 1)?,
            percentiles: r.floats("campaign.percentiles")?,
            cc_phases,
            cc_allocations,
            kinds: r.kinds("campaign.precoders")?,
            rule: r.parsed::<ThresholdRule>("campaign.rule")?,
            legacy: LegacyConfig {
                draws: r.count("legacy.draws", 1)?,
                reader_distance_max: r.float("legacy.reader_distance_max")?,
                channel: r.parsed::<LegacyChannel>("legacy.channel")?,
            },
            master_seed,
        };
        campaign.validate().map_err(core_err)?;
        let selfcheck_draws = r.count("selfcheck.draws", 1)?;

        Ok(Self {
            mode,
            preset,
            master_seed,
            phys,
            array_lines: lines,
            array_columns: columns,
            paths,
            gamma,
            tag,
            reader,
            snr_illum_db,
            qos,
            cc_phases,
            cc_allocations,
            map_grid,
            map_ensemble,
            map_precoders,
            campaign,
            selfcheck_draws,
            resolved: t,
        })
    }

    /// Resolved keys, one `key = value` line each, sorted.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.resolved {
            let v = match (k.as_str(), v) {
                ("seed", Value::String(s)) => match s.parse::<i64>() {
                    Ok(n) => Value::Integer(n),
                    Err(_) => v.clone(),
                },
                _ => v.clone(),
            };
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
