//! Trial-level data ingestion, derived responses, run configuration and
//! self-describing output files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::angle::wrap_pi;
use crate::bands::BandSettings;
use crate::error::{Error, Result};
use crate::estimator::Method;
use crate::sample::MixedSample;
use crate::select::{Selector, DEFAULT_BOOTSTRAP_REPLICATES, DEFAULT_H_COUNT, DEFAULT_LAMBDA_COUNT};

/// Presentation order used when every observed condition label is in it.
pub const DEFAULT_CONDITION_ORDER: [&str; 5] =
    ["Control", "Preview", "Forward Facing", "Auditory", "Deprivation"];

/// Prefix of the first line of every CSV artifact.
pub const CONFIG_LINE_PREFIX: &str = "# config: ";

/// Cell values treated as missing.
const MISSING: [&str; 5] = ["", "NA", "N/A", "NaN", "nan"];

/// Signed angular error `wrap(reported - true)` in (−π, π]; positive when
/// the report lies counterclockwise of the truth.
pub fn derive_response(true_dir: f64, reported_dir: f64) -> f64 {
    wrap_pi(reported_dir - true_dir)
}

/// `reported - true`; negative values are underestimates.
pub fn derive_distance_error(true_d: f64, reported_d: f64) -> f64 {
    reported_d - true_d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    Degrees,
    Radians,
}

impl AngleUnit {
    pub fn to_radians(self, v: f64) -> f64 {
        match self {
            AngleUnit::Degrees => v.to_radians(),
            AngleUnit::Radians => v,
        }
    }
}

/// Maps dataset columns to the quantities the analysis needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSchema {
    pub true_direction: String,
    pub reported_direction: String,
    pub condition: String,
    pub target_distance: String,
    pub reported_distance: String,
    #[serde(default)]
    pub participant_id: Option<String>,
    pub angle_unit: AngleUnit,
    #[serde(default)]
    pub distance_unit: String,
    /// Explicit level order for the condition factor.
    #[serde(default)]
    pub condition_order: Option<Vec<String>>,
}

impl TrialSchema {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Schema(format!("invalid schema file: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    TargetDistance,
    DistanceError,
}

impl std::str::FromStr for Predictor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "target_distance" | "distance" => Ok(Predictor::TargetDistance),
            "distance_error" => Ok(Predictor::DistanceError),
            other => Err(Error::invalid(format!(
                "unknown predictor '{other}' (expected target_distance or distance_error)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCount {
    pub level: String,
    pub n: usize,
}

/// What was read, what was kept, and how it was transformed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub rows_read: usize,
    pub rows_used: usize,
    /// Dropped rows per column that was missing (a row counts once, under
    /// its first missing column).
    pub dropped: BTreeMap<String, usize>,
    pub levels: Vec<LevelCount>,
    pub level_order: String,
    pub angle_unit: AngleUnit,
    pub distance_unit: String,
    pub predictors: Vec<Predictor>,
    pub preprocessing: String,
    pub participants: Option<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedTrials {
    pub sample: MixedSample,
    pub provenance: Provenance,
    pub participant_ids: Option<Vec<String>>,
}

pub fn load_trials(path: &Path, schema: &TrialSchema, predictors: &[Predictor]) -> Result<LoadedTrials> {
    let file = File::open(path)?;
    load_trials_from_reader(file, &path.display().to_string(), schema, predictors)
}

struct Row {
    theta: f64,
    x: Vec<f64>,
    condition: String,
    participant: Option<String>,
}

pub fn load_trials_from_reader<R: Read>(
    reader: R,
    source: &str,
    schema: &TrialSchema,
    predictors: &[Predictor],
) -> Result<LoadedTrials> {
    if predictors.is_empty() {
        return Err(Error::invalid("at least one predictor is required"));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found in {source}")))
    };
    let i_true = column(&schema.true_direction)?;
    let i_rep = column(&schema.reported_direction)?;
    let i_cond = column(&schema.condition)?;
    let i_td = column(&schema.target_distance)?;
    let i_rd = column(&schema.reported_distance)?;
    let i_pid = schema.participant_id.as_deref().map(column).transpose()?;
    let needs_reported = predictors.contains(&Predictor::DistanceError);

    let mut rows = Vec::new();
    let mut dropped: BTreeMap<String, usize> = BTreeMap::new();
    let mut rows_read = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        rows_read += 1;
        let line = r + 2;
        let mut required = vec![
            (i_true, &schema.true_direction),
            (i_rep, &schema.reported_direction),
            (i_cond, &schema.condition),
            (i_td, &schema.target_distance),
        ];
        if needs_reported {
            required.push((i_rd, &schema.reported_distance));
        }
        if let Some((_, name)) = required
            .iter()
            .find(|(i, _)| MISSING.contains(&record.get(*i).unwrap_or("")))
        {
            *dropped.entry((*name).clone()).or_default() += 1;
            continue;
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                Error::Schema(format!("line {line}: column '{name}' is not a number: '{raw}'"))
            })
        };
        let true_dir = schema.angle_unit.to_radians(num(i_true, &schema.true_direction)?);
        let rep_dir = schema
            .angle_unit
            .to_radians(num(i_rep, &schema.reported_direction)?);
        let td = num(i_td, &schema.target_distance)?;
        let x = predictors
            .iter()
            .map(|p| match p {
                Predictor::TargetDistance => Ok(td),
                Predictor::DistanceError => {
                    Ok(derive_distance_error(td, num(i_rd, &schema.reported_distance)?))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(Row {
            theta: derive_response(true_dir, rep_dir),
            x,
            condition: record.get(i_cond).unwrap_or("").to_string(),
            participant: i_pid.map(|i| record.get(i).unwrap_or("").to_string()),
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{source}: no usable rows out of {rows_read}"
        )));
    }

    let (levels, level_order) = order_levels(&rows, schema.condition_order.as_deref())?;
    let index: BTreeMap<&str, u32> = levels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i as u32))
        .collect();
    let mut warnings = Vec::new();
    if rows.len() < 2 {
        let msg = format!(
            "only {} usable row; too small for bandwidth selection",
            rows.len()
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let dropped_total: usize = dropped.values().sum();
    if dropped_total > 0 {
        let msg = format!("dropped {dropped_total} rows with missing fields");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let level_counts: Vec<LevelCount> = levels
        .iter()
        .map(|l| LevelCount {
            level: l.clone(),
            n: rows.iter().filter(|r| &r.condition == l).count(),
        })
        .collect();
    let participant_ids: Option<Vec<String>> = i_pid.map(|_| {
        rows.iter()
            .map(|r| r.participant.clone().unwrap_or_default())
            .collect()
    });
    let participants = participant_ids.as_ref().map(|ids| {
        let mut u = ids.clone();
        u.sort();
        u.dedup();
        u.len()
    });
    let sample = MixedSample::new(
        rows.iter().map(|r| r.x.clone()).collect(),
        rows.iter().map(|r| vec![index[r.condition.as_str()]]).collect(),
        vec![levels.len()],
        rows.iter().map(|r| r.theta).collect(),
    )?
    .with_level_names(vec![levels])?;
    Ok(LoadedTrials {
        provenance: Provenance {
            source: source.to_string(),
            rows_read,
            rows_used: rows.len(),
            dropped,
            levels: level_counts,
            level_order,
            angle_unit: schema.angle_unit,
            distance_unit: schema.distance_unit.clone(),
            predictors: predictors.to_vec(),
            preprocessing: "response = wrap(reported - true direction) in radians; \
                            distance error = reported - true distance; predictors unscaled"
                .to_string(),
            participants,
            warnings,
        },
        sample,
        participant_ids,
    })
}

fn order_levels(rows: &[Row], explicit: Option<&[String]>) -> Result<(Vec<String>, String)> {
    let mut observed: Vec<String> = rows.iter().map(|r| r.condition.clone()).collect();
    observed.sort();
    observed.dedup();
    if let Some(order) = explicit {
        if let Some(missing) = observed.iter().find(|l| !order.contains(l)) {
            return Err(Error::Schema(format!(
                "condition '{missing}' is not listed in condition_order"
            )));
        }
        let levels = order.iter().filter(|l| observed.contains(l)).cloned().collect();
        return Ok((levels, "configured".into()));
    }
    if observed
        .iter()
        .all(|l| DEFAULT_CONDITION_ORDER.contains(&l.as_str()))
    {
        let levels = DEFAULT_CONDITION_ORDER
            .iter()
            .filter(|l| observed.iter().any(|o| o == *l))
            .map(|l| l.to_string())
            .collect();
        return Ok((levels, "presentation".into()));
    }
    Ok((observed, "lexicographic".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandConfig {
    pub grid_size: usize,
    pub replicates: usize,
    pub alpha: f64,
    pub delta: f64,
    pub max_iter: usize,
}

impl Default for BandConfig {
    fn default() -> Self {
        let s = BandSettings::default();
        Self {
            grid_size: 20,
            replicates: s.replicates,
            alpha: s.alpha,
            delta: s.delta_tol,
            max_iter: s.max_iter,
        }
    }
}

/// Resolved settings for one CLI run. Every field has a default so partial
/// config files are accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub predictors: Vec<Predictor>,
    pub method: Method,
    pub selector: Selector,
    /// Fixed bandwidths, bypassing selection: h values then λ values.
    pub bandwidths: Option<Vec<f64>>,
    pub h_count: usize,
    pub lambda_count: usize,
    pub bootstrap_replicates: usize,
    pub refine: bool,
    pub bands: BandConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            schema: None,
            predictors: vec![Predictor::TargetDistance],
            method: Method::Nw,
            selector: Selector::Boot,
            bandwidths: None,
            h_count: DEFAULT_H_COUNT,
            lambda_count: DEFAULT_LAMBDA_COUNT,
            bootstrap_replicates: DEFAULT_BOOTSTRAP_REPLICATES,
            refine: false,
            bands: BandConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Schema(format!("invalid config file: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.predictors.is_empty() {
            return Err(Error::invalid("at least one predictor is required"));
        }
        if self.bands.grid_size < 2 {
            return Err(Error::invalid("band grid needs at least two points"));
        }
        if !(self.bands.alpha > 0.0 && self.bands.alpha < 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1)"));
        }
        if self.bootstrap_replicates == 0 || self.bands.replicates == 0 {
            return Err(Error::invalid("bootstrap replicate counts must be positive"));
        }
        Ok(())
    }

    pub fn band_settings(&self) -> BandSettings {
        BandSettings {
            replicates: self.bands.replicates,
            alpha: self.bands.alpha,
            delta_tol: self.bands.delta,
            max_iter: self.bands.max_iter,
            seed: self.seed,
            ..BandSettings::default()
        }
    }
}

/// `v` with 12 significant digits, without trailing zeros.
pub fn format_number(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.11e}")
    }
}

/// Writes a CSV whose first line is `# config: <json>`.
pub fn write_csv<S: Serialize>(
    path: &Path,
    config: &S,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut file = File::create(path)?;
    writeln!(file, "{CONFIG_LINE_PREFIX}{}", serde_json::to_string(config)?)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// The configuration embedded in an artifact's first line.
pub fn read_embedded_config(path: &Path) -> Result<serde_json::Value> {
    let mut first = String::new();
    BufReader::new(File::open(path)?).read_line(&mut first)?;
    let json = first
        .trim_end()
        .strip_prefix(CONFIG_LINE_PREFIX)
        .ok_or_else(|| Error::Schema(format!("{} has no embedded configuration", path.display())))?;
    Ok(serde_json::from_str(json)?)
}

/// Reads an artifact CSV written by [`write_csv`]: header and string rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header = rdr.headers()?.iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| Ok(r?.iter().map(String::from).collect()))
        .collect::<Result<_>>()?;
    Ok((header, rows))
}
