use std::fs::{self, File};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Value};

use circreg::bands::simultaneous_band;
use circreg::dataio::{
    format_number, load_trials, write_csv, LoadedTrials, Predictor, RunConfig, TrialSchema,
};
use circreg::diagnostics::{circ_summary_by_level, gof_report, uniformity_tests, vm_kde};
use circreg::estimator::{Estimator, Method};
use circreg::kernels::{Bandwidths, KernelSpec};
use circreg::sample::MixedSample;
use circreg::select::{
    linear_grid, select_bootstrap, select_cv, select_rot, RotConstants, SearchSpec, Selector,
};
use circreg::sim::{self, HarnessConfig, HarnessReport, Regression, VarianceDivisor};
use circreg::wrap_pi;

use crate::args::{BandArgs, Cli, DataArgs, DiagnoseArgs, Preset, Scale, SimulateArgs};
use crate::error::{CliError, CliResult};

/// Evaluation points for von Mises density output.
const KDE_GRID: usize = 360;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn base_config(cli: &Cli) -> CliResult<RunConfig> {
    match &cli.config {
        Some(path) => RunConfig::from_path(path).map_err(|e| usage(format!("{}: {e}", path.display()))),
        None => Ok(RunConfig::default()),
    }
}

pub fn resolve_config(cli: &Cli, args: &DataArgs) -> CliResult<RunConfig> {
    let mut cfg = base_config(cli)?;
    if let Some(v) = &args.input {
        cfg.input = Some(v.clone());
    }
    if let Some(v) = &args.schema {
        cfg.schema = Some(v.clone());
    }
    if let Some(v) = &args.predictors {
        cfg.predictors = v
            .iter()
            .map(|p| p.parse::<Predictor>())
            .collect::<Result<_, _>>()
            .map_err(|e| usage(e.to_string()))?;
    }
    if let Some(v) = args.method {
        cfg.method = v;
    }
    if let Some(v) = args.selector {
        cfg.selector = v;
    }
    if let Some(v) = &args.bandwidths {
        cfg.bandwidths = Some(v.clone());
    }
    if let Some(v) = args.boot_replicates {
        cfg.bootstrap_replicates = v;
    }
    if args.refine {
        cfg.refine = true;
    }
    if let Some(v) = args.grid_size {
        cfg.bands.grid_size = v;
    }
    if let Some(v) = &args.out {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn load(cfg: &RunConfig) -> CliResult<LoadedTrials> {
    let input = cfg.input.as_ref().ok_or_else(|| usage("--input is required"))?;
    let schema_path = cfg.schema.as_ref().ok_or_else(|| usage("--schema is required"))?;
    let schema = TrialSchema::from_path(schema_path)?;
    let trials = load_trials(input, &schema, &cfg.predictors)?;
    info!(
        "loaded {} of {} rows from {}",
        trials.provenance.rows_used,
        trials.provenance.rows_read,
        input.display()
    );
    Ok(trials)
}

fn estimator(cfg: &RunConfig) -> Estimator {
    match cfg.method {
        Method::Nw => Estimator::nw(KernelSpec::gaussian()),
        Method::Ll => Estimator::ll(KernelSpec::gaussian(), true),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Chosen {
    pub bandwidths: Bandwidths,
    /// `None` when the bandwidths were given.
    pub selector: Option<Selector>,
    pub criterion: Option<f64>,
    pub boundary_hits: Vec<String>,
    pub pilot: Option<Bandwidths>,
}

pub fn choose_bandwidths(sample: &MixedSample, cfg: &RunConfig, est: &Estimator) -> CliResult<Chosen> {
    if let Some(v) = &cfg.bandwidths {
        let k = sample.k();
        if v.len() != k + sample.p() {
            return Err(usage(format!(
                "--bandwidths needs {} values ({} h then {} lambda)",
                k + sample.p(),
                k,
                sample.p()
            )));
        }
        let bw = Bandwidths::new(v[..k].to_vec(), v[k..].to_vec()).map_err(|e| usage(e.to_string()))?;
        bw.validate_for(sample).map_err(|e| usage(e.to_string()))?;
        return Ok(Chosen {
            bandwidths: bw,
            selector: None,
            criterion: None,
            boundary_hits: Vec::new(),
            pilot: None,
        });
    }
    let search = || -> CliResult<SearchSpec> {
        Ok(SearchSpec::with_counts(sample, cfg.h_count, cfg.lambda_count)?
            .with_refine(cfg.refine)
            .with_seed(cfg.seed))
    };
    Ok(match cfg.selector {
        Selector::Cv => {
            let s = select_cv(sample, &search()?, est)?;
            Chosen {
                bandwidths: s.bandwidths,
                selector: Some(Selector::Cv),
                criterion: Some(s.criterion),
                boundary_hits: s.boundary_hits,
                pilot: None,
            }
        }
        Selector::Boot => {
            let s = select_bootstrap(sample, cfg.bootstrap_replicates, &search()?, est)?;
            Chosen {
                bandwidths: s.selection.bandwidths,
                selector: Some(Selector::Boot),
                criterion: Some(s.selection.criterion),
                boundary_hits: s.selection.boundary_hits,
                pilot: Some(s.pilot.bandwidths),
            }
        }
        Selector::Rot => {
            let s = select_rot(sample, &RotConstants::default())?;
            Chosen {
                bandwidths: s.bandwidths,
                selector: Some(Selector::Rot),
                criterion: None,
                boundary_hits: s.clamped.iter().map(|l| format!("lambda[{l}] clamped")).collect(),
                pilot: None,
            }
        }
    })
}

fn out_dir(path: &Path) -> CliResult<PathBuf> {
    fs::create_dir_all(path)?;
    Ok(path.to_path_buf())
}

fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    serde_json::to_writer_pretty(File::create(path)?, value)?;
    Ok(())
}

fn embedded(command: &str, cfg: &impl Serialize) -> Value {
    json!({ "command": command, "config": cfg })
}

fn predictor_names(cfg: &RunConfig) -> Vec<String> {
    cfg.predictors
        .iter()
        .map(|p| {
            serde_json::to_value(p)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default()
        })
        .collect()
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn x_range(sample: &MixedSample, rows: &[usize]) -> (f64, f64) {
    rows.iter()
        .map(|&i| sample.x_row(i)[0])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

pub fn fit(cli: &Cli, args: &DataArgs) -> CliResult<Value> {
    let cfg = resolve_config(cli, args)?;
    let trials = load(&cfg)?;
    let sample = &trials.sample;
    let est = estimator(&cfg);
    let chosen = choose_bandwidths(sample, &cfg, &est)?;
    let dir = out_dir(&cfg.output_dir)?;
    let names = predictor_names(&cfg);
    let mut header: Vec<&str> = if sample.k() == 1 {
        vec!["x"]
    } else {
        names.iter().map(String::as_str).collect()
    };
    header.extend(["z", "m_hat", "m1", "m2"]);
    let rows: Vec<Vec<String>>;
    let fallbacks;
    if sample.k() == 1 {
        let all: Vec<usize> = (0..sample.n()).collect();
        let (lo, hi) = x_range(sample, &all);
        let grid: Vec<Vec<f64>> = linear_grid(lo, hi, cfg.bands.grid_size)
            .into_iter()
            .map(|x| vec![x])
            .collect();
        let levels: Vec<Vec<u32>> = (0..sample.level_counts()[0] as u32).map(|v| vec![v]).collect();
        let res = est.predict_grid(sample, &chosen.bandwidths, &grid, &levels)?;
        fallbacks = res.fallback_count();
        rows = (0..res.len())
            .map(|i| {
                let p = &res.points[i];
                vec![
                    format_number(p.x[0]),
                    sample.level_name(0, p.z[0]),
                    format_number(wrap_pi(res.m_hat[i])),
                    format_number(res.m1_hat[i]),
                    format_number(res.m2_hat[i]),
                ]
            })
            .collect();
    } else {
        let fits = est.fitted_at_design(sample, &chosen.bandwidths)?;
        fallbacks = fits.iter().filter(|f| f.method != est.method).count();
        rows = fits
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let mut r: Vec<String> = sample.x_row(i).iter().map(|&v| format_number(v)).collect();
                r.push(sample.level_name(0, sample.z_row(i)[0]));
                r.extend([f.angle, f.m1, f.m2].map(format_number));
                r
            })
            .collect();
    }
    let cfg_json = embedded("fit", &cfg);
    write_csv(&dir.join("fit.csv"), &cfg_json, &header, rows)?;
    let summary = json!({
        "command": "fit",
        "config": cfg,
        "provenance": trials.provenance,
        "selection": chosen,
        "ll_fallbacks": fallbacks,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn bandwidth(cli: &Cli, args: &DataArgs) -> CliResult<Value> {
    let cfg = resolve_config(cli, args)?;
    let trials = load(&cfg)?;
    let chosen = choose_bandwidths(&trials.sample, &cfg, &estimator(&cfg))?;
    let dir = out_dir(&cfg.output_dir)?;
    let summary = json!({
        "command": "bandwidth",
        "config": cfg,
        "provenance": trials.provenance,
        "selection": chosen,
    });
    write_json(&dir.join("bandwidth.json"), &summary)?;
    Ok(summary)
}

pub fn bands(cli: &Cli, args: &BandArgs) -> CliResult<Value> {
    let mut cfg = resolve_config(cli, &args.data)?;
    if let Some(v) = args.band_replicates {
        cfg.bands.replicates = v;
    }
    if let Some(v) = args.alpha {
        cfg.bands.alpha = v;
    }
    if let Some(v) = args.delta {
        cfg.bands.delta = v;
    }
    if let Some(v) = args.max_iter {
        cfg.bands.max_iter = v;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let trials = load(&cfg)?;
    let sample = &trials.sample;
    if sample.k() != 1 {
        return Err(usage("bands are computed for a single continuous predictor"));
    }
    let est = estimator(&cfg);
    let chosen = choose_bandwidths(sample, &cfg, &est)?;
    let dir = out_dir(&cfg.output_dir)?;
    let settings = cfg.band_settings();
    let cfg_json = embedded("bands", &cfg);
    let mut levels = Vec::new();
    for v in 0..sample.level_counts()[0] as u32 {
        let name = sample.level_name(0, v);
        let rows = sample.rows_at_level(0, v);
        if rows.len() < 2 {
            warn!("skipping band for level {name}: {} rows", rows.len());
            continue;
        }
        let (lo, hi) = x_range(sample, &rows);
        let grid = linear_grid(lo, hi, cfg.bands.grid_size);
        let band = simultaneous_band(sample, &chosen.bandwidths, &est, &[v], &grid, &settings)?;
        let file = format!("bands_{}.csv", file_safe(&name));
        let out_rows = (0..grid.len()).map(|j| {
            vec![
                format_number(band.grid[j]),
                format_number(wrap_pi(band.center[j])),
                format_number(band.lower[j]),
                format_number(band.upper[j]),
                format_number(band.alpha_final),
            ]
        });
        write_csv(
            &dir.join(&file),
            &cfg_json,
            &["x", "center", "lower", "upper", "alpha_final"],
            out_rows,
        )?;
        levels.push(json!({
            "level": name,
            "file": file,
            "alpha_final": band.alpha_final,
            "p_in_achieved": band.p_in_achieved,
            "calibration_status": band.calibration_status,
            "iterations": band.iterations,
            "replicates_used": band.replicates_used,
            "replicates_dropped": band.replicates_dropped,
        }));
    }
    let summary = json!({
        "command": "bands",
        "config": cfg,
        "provenance": trials.provenance,
        "selection": chosen,
        "bands": levels,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn diagnose(cli: &Cli, args: &DiagnoseArgs) -> CliResult<Value> {
    let cfg = resolve_config(cli, &args.data)?;
    let trials = load(&cfg)?;
    let sample = &trials.sample;
    let est = estimator(&cfg);
    let chosen = choose_bandwidths(sample, &cfg, &est)?;
    let fitted: Vec<f64> = est
        .fitted_at_design(sample, &chosen.bandwidths)?
        .iter()
        .map(|f| f.angle)
        .collect();
    let residuals: Vec<f64> = sample
        .theta()
        .iter()
        .zip(&fitted)
        .map(|(t, f)| wrap_pi(t - f))
        .collect();
    let gof = gof_report(sample, &fitted, 0)?;
    let pooled = uniformity_tests(&residuals)?;
    let mut by_level = Vec::new();
    for v in 0..sample.level_counts()[0] as u32 {
        let r: Vec<f64> = sample
            .rows_at_level(0, v)
            .into_iter()
            .map(|i| residuals[i])
            .collect();
        let tests = if r.len() >= 2 {
            Some(uniformity_tests(&r)?)
        } else {
            None
        };
        by_level.push(json!({ "level": sample.level_name(0, v), "n": r.len(), "tests": tests }));
    }
    let summaries = circ_summary_by_level(sample, &residuals, 0)?;
    let dir = out_dir(&cfg.output_dir)?;
    if let Some(kappa) = args.kde_kappa {
        let grid = linear_grid(-std::f64::consts::PI, std::f64::consts::PI, KDE_GRID + 1);
        let grid = &grid[..KDE_GRID];
        let mut columns = Vec::new();
        let mut header = vec!["theta".to_string()];
        for v in 0..sample.level_counts()[0] as u32 {
            let r: Vec<f64> = sample
                .rows_at_level(0, v)
                .into_iter()
                .map(|i| residuals[i])
                .collect();
            if r.is_empty() {
                continue;
            }
            header.push(sample.level_name(0, v));
            columns.push(vm_kde(&r, kappa, grid).map_err(|e| usage(e.to_string()))?);
        }
        let rows = grid.iter().enumerate().map(|(j, &t)| {
            std::iter::once(format_number(t))
                .chain(columns.iter().map(|c| format_number(c[j])))
                .collect()
        });
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(&dir.join("kde.csv"), &embedded("diagnose", &cfg), &header, rows)?;
    }
    let report = json!({
        "command": "diagnose",
        "config": cfg,
        "provenance": trials.provenance,
        "selection": chosen,
        "gof": gof,
        "uniformity": { "pooled": pooled, "by_level": by_level },
        "residual_summaries": summaries,
    });
    write_json(&dir.join("gof.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
struct SimulationPlan {
    runs: Vec<HarnessConfig>,
    output_dir: PathBuf,
}

fn plan(cli: &Cli, args: &SimulateArgs) -> CliResult<SimulationPlan> {
    let (mut regression, mut kappas, mut ns, mut scale) = (Regression::R1, vec![3.0], vec![100], Scale::Desk);
    if let Some(p) = args.preset {
        regression = match p {
            Preset::Table1Desk | Preset::Table1Full => Regression::R1,
            Preset::Table2Desk | Preset::Table2Full => Regression::R2,
        };
        scale = match p {
            Preset::Table1Desk | Preset::Table2Desk => Scale::Desk,
            Preset::Table1Full | Preset::Table2Full => Scale::Full,
        };
        kappas = vec![3.0, 10.0];
        ns = vec![100, 200, 500];
    }
    if let Some(r) = args.regression {
        regression = r;
    }
    if let Some(k) = &args.kappa {
        kappas = k.clone();
    }
    if let Some(n) = &args.n {
        ns = n.clone();
    }
    if let Some(s) = args.scale {
        scale = s;
    }
    let seed = match (cli.seed, &cli.config) {
        (Some(s), _) => s,
        (None, Some(_)) => base_config(cli)?.seed,
        (None, None) => 0,
    };
    let mut runs = Vec::new();
    for &kappa in &kappas {
        for &n in &ns {
            let dgp = sim::DgpSpec::new(regression, kappa, n).map_err(|e| usage(e.to_string()))?;
            let mut c = match scale {
                Scale::Desk => HarnessConfig::desk(dgp, seed),
                Scale::Full => HarnessConfig::full(dgp, seed),
            };
            if let Some(v) = args.n1 {
                c.n1 = v;
            }
            if let Some(v) = args.n2 {
                c.n2 = v;
            }
            if let Some(v) = args.boot_replicates {
                c.bootstrap_replicates = v;
            }
            if args.unbiased_variance {
                c.variance_divisor = VarianceDivisor::NMinusOne;
            }
            if c.n1 == 0 || c.n2 == 0 || c.bootstrap_replicates == 0 {
                return Err(usage("sample and replicate counts must be positive"));
            }
            runs.push(c);
        }
    }
    Ok(SimulationPlan {
        runs,
        output_dir: args.out.clone().unwrap_or_else(|| PathBuf::from(".")),
    })
}

pub fn simulate(cli: &Cli, args: &SimulateArgs) -> CliResult<Value> {
    let plan = plan(cli, args)?;
    let dir = out_dir(&plan.output_dir)?;
    let mut reports: Vec<HarnessReport> = Vec::new();
    for c in &plan.runs {
        info!(
            "simulating {} kappa={} n={}",
            c.dgp.regression.as_str(),
            c.dgp.kappa,
            c.dgp.n
        );
        reports.push(sim::run(c)?);
    }
    let cfg_json = embedded("simulate", &plan);
    let table_file = match plan.runs.first().map(|c| c.dgp.regression) {
        Some(Regression::R2) => "table2.csv",
        _ => "table1.csv",
    };
    let table_rows = reports.iter().flat_map(|r| r.table_rows()).map(|row| {
        vec![
            format_number(row.kappa),
            row.n.to_string(),
            row.method,
            format_number(row.mean),
            format_number(row.variance),
        ]
    });
    write_csv(
        &dir.join(table_file),
        &cfg_json,
        &["kappa", "n", "method", "mean", "variance"],
        table_rows,
    )?;
    let ratio_rows = reports.iter().flat_map(|r| {
        let (kappa, n) = (r.config.dgp.kappa, r.config.dgp.n);
        r.scores.iter().flat_map(move |s| {
            s.norm_ratios.iter().enumerate().map(move |(j, &ratio)| {
                vec![
                    format_number(kappa),
                    n.to_string(),
                    s.method.clone(),
                    j.to_string(),
                    format_number(ratio),
                    s.snapped_index[j].to_string(),
                ]
            })
        })
    });
    write_csv(
        &dir.join("ratios.csv"),
        &cfg_json,
        &["kappa", "n", "method", "replicate", "ratio", "snapped_index"],
        ratio_rows,
    )?;
    let runs: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "regression": r.config.dgp.regression,
                "kappa": r.config.dgp.kappa,
                "n": r.config.dgp.n,
                "oracle": r.surface.oracle(),
                "oracle_value": r.surface.oracle_value(),
                "surface_failed_rows": r.surface.failed_rows,
                "dominance_violations": r.dominance_violations(),
                "table": r.table_rows(),
            })
        })
        .collect();
    let summary = json!({ "command": "simulate", "config": plan, "runs": runs });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}
