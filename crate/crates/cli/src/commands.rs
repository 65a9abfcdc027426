use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use kltail::experiments::{
    k_sensitivity_study, null_histogram_study, size_power_study, write_null_csv, write_power_csv,
    ExperimentPlan, Grid, Manifest, NullStudyPlan,
};
use kltail::inference::{run_test, KnownMargins, MarginMode};
use kltail::ingest::{build_pairs, compare_seasons, load_csv, CsvSchema, Season};
use kltail::margins::{MarginState, MarginalCdf, StandardMargin};
use kltail::numerics::RngStream;
use kltail::{Sample, TestConfig};
use serde::Serialize;
use serde_json::json;

use crate::args::{
    model, Cli, Command, NullsArgs, PowerArgs, RainfallArgs, SimulateArgs, StandardizeArgs, TestArgs,
};

/// Invalid combination of flags detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Standardize(a) => standardize(cli, a),
        Command::Test(a) => test(a),
        Command::Nulls(a) => nulls(cli, a),
        Command::Power(a) => power(cli, a),
        Command::Simulate(a) => simulate(cli, a),
        Command::Rainfall(a) => rainfall(cli, a),
    }
}

fn print_json<S: Serialize>(value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // a closed pipe (e.g. `| head`) is not an error
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn argv() -> Vec<String> {
    std::env::args().collect()
}

fn out_path(cli: &Cli, explicit: &Option<PathBuf>, default: &str) -> Result<PathBuf> {
    let path = match explicit {
        Some(p) => p.clone(),
        None => cli.out_dir.join(default),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(path)
}

fn manifest_path(artifact: &Path) -> PathBuf {
    let stem = artifact.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    artifact.with_file_name(format!("{stem}.manifest.json"))
}

fn write_manifest(command: &str, seed: u64, params: serde_json::Value, artifacts: &[&Path]) -> Result<PathBuf> {
    let primary = artifacts[0];
    let path = manifest_path(primary);
    let mut params = params;
    params["argv"] = json!(argv());
    let names = artifacts.iter().map(|p| p.display().to_string()).collect();
    Manifest::new(command, seed, params, names).write(&path)?;
    Ok(path)
}

fn margins_of(m: StandardMargin, d: usize) -> Vec<StandardMargin> {
    vec![m; d]
}

fn standardize(cli: &Cli, a: &StandardizeArgs) -> Result<u8> {
    let raw = Sample::read_csv(&a.input, MarginState::Raw)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let marginal: StandardMargin = a.marginal.into();
    let margins = margins_of(marginal, raw.d());
    let cdfs: Vec<&dyn MarginalCdf<f64>> = margins.iter().map(|m| m as &dyn MarginalCdf<f64>).collect();
    let mode: MarginMode = a.margins.into();
    let out = kltail::inference::standardize(&raw, mode, Some(&cdfs))?;
    let path = out_path(cli, &a.output, "standardized.csv")?;
    out.write_csv(&path)?;
    let params = json!({ "input": a.input, "margins": mode, "marginal": marginal });
    let manifest = write_manifest("standardize", 0, params, &[&path])?;
    print_json(&json!({
        "command": "standardize",
        "output": path,
        "manifest": manifest,
        "n": out.n(),
        "d": out.d(),
        "state": out.state(),
        "rank_ties": kltail::margins::count_rank_ties(&raw),
    }))?;
    Ok(0)
}

fn test(a: &TestArgs) -> Result<u8> {
    let x = Sample::read_csv(&a.x, MarginState::Raw).with_context(|| format!("reading {}", a.x.display()))?;
    let y = Sample::read_csv(&a.y, MarginState::Raw).with_context(|| format!("reading {}", a.y.display()))?;
    let config = a.test.config(a.k_exceedances);
    let margins = margins_of(a.marginal.into(), x.d().max(y.d()));
    let cdfs: Vec<&dyn MarginalCdf<f64>> = margins.iter().map(|m| m as &dyn MarginalCdf<f64>).collect();
    let known = KnownMargins::shared(cdfs);
    let report = run_test(&x, &y, &config, Some(&known))?;
    print_json(&report)?;
    Ok(if report.rejected() { 3 } else { 0 })
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<u8> {
    let m = model(a.model.family, a.model.theta, a.model.psi.as_deref())?;
    let sample: Sample = m.sample(a.n, RngStream::new(a.seed, a.stream))?;
    let path = out_path(cli, &a.output, "sample.csv")?;
    sample.write_csv(&path)?;
    let params = json!({ "model": m, "n": a.n, "stream": a.stream });
    let manifest = write_manifest("simulate", a.seed, params, &[&path])?;
    print_json(&json!({
        "command": "simulate",
        "output": path,
        "manifest": manifest,
        "n": a.n,
        "model": m,
        "chi": m.theoretical_chi(),
    }))?;
    Ok(0)
}

fn nulls(cli: &Cli, a: &NullsArgs) -> Result<u8> {
    let plan = NullStudyPlan {
        model: model(a.model.family, a.model.theta, a.model.psi.as_deref())?,
        n: a.n,
        k_n: a.k_exceedances,
        sets: a.sets as usize,
        risk: a.risk.into(),
        margins: a.margins.into(),
        replicates: a.replicates,
        seed: a.seed,
    };
    let study = null_histogram_study(&plan)?;
    let path = out_path(cli, &None, "nulls.csv")?;
    write_null_csv(&study, &path)?;
    let manifest = write_manifest("nulls", a.seed, json!({ "plan": plan }), &[&path])?;
    print_json(&json!({
        "command": "nulls",
        "output": path,
        "manifest": manifest,
        "replicates": a.replicates,
        "k_n": study.k_n,
        "sets": study.sets,
        "margins": study.margins,
        "ks_bootstrap_fresh": study.ks_bootstrap_fresh,
        "ks_fresh_chisq": study.ks_fresh_chisq,
        "ks_bootstrap_chisq": study.ks_bootstrap_chisq,
    }))?;
    Ok(0)
}

fn power(cli: &Cli, a: &PowerArgs) -> Result<u8> {
    let mut base = TestConfig::new(a.k_exceedances);
    base.risk = a.test.risk.into();
    base.sets = a.test.sets.map(|k| k as usize);
    base.margins = a.margins.into();
    base.bootstrap = a.test.bootstrap;
    base.level = a.test.level;
    base.seed = a.test.seed;
    let grid = match (&a.k_grid, &a.sets_grid) {
        (Some(k), None) => Grid::Exceedances(k.clone()),
        (None, Some(s)) => Grid::Sets(s.clone()),
        (None, None) => Grid::Exceedances(vec![50, 100, 200, 400]),
        (Some(_), Some(_)) => unreachable!("clap rejects both grids"),
    };
    let sets_grid = matches!(grid, Grid::Sets(_));
    let plan = ExperimentPlan {
        model_x: model(a.family_x, a.theta_x, a.psi_x.as_deref())?,
        model_y: model(a.family_y, a.theta_y, a.psi_y.as_deref())?,
        n: a.n,
        repetitions: a.reps,
        grid,
        base,
    };
    let curve = if sets_grid { k_sensitivity_study(&plan)? } else { size_power_study(&plan)? };
    let path = out_path(cli, &None, "power.csv")?;
    write_power_csv(&curve, &path)?;
    write_manifest("power", a.test.seed, json!({ "plan": plan }), &[&path])?;
    print_json(&curve)?;
    Ok(0)
}

fn rainfall(cli: &Cli, a: &RainfallArgs) -> Result<u8> {
    let schema = CsvSchema {
        timestamp: a.timestamp_col.clone(),
        depth: a.depth_col.clone(),
        missing: a.missing.clone(),
    };
    let series = load_csv(&a.input, &schema).with_context(|| format!("reading {}", a.input.display()))?;
    for d in &series.diagnostics {
        eprintln!("warning: malformed row: {d}");
    }
    let mut artifacts = Vec::new();
    let mut seasons = Vec::new();
    for s in Season::ALL {
        let pairs = build_pairs(&series, s);
        if let Ok(p) = &pairs {
            let path = out_path(cli, &None, &format!("pairs_{s}.csv"))?;
            p.write_csv(&path)?;
            artifacts.push(path);
        }
        seasons.push((s, pairs.map_err(|e| e.to_string())));
    }
    let config = a.test.config(a.k_exceedances);
    let comparisons = compare_seasons(&seasons, &config);
    for c in &comparisons {
        if let Some(w) = &c.warning {
            eprintln!("warning: {}-{}: {w}", c.first, c.second);
        }
    }
    let results = out_path(cli, &None, "seasonal_tests.json")?;
    std::fs::write(&results, serde_json::to_string_pretty(&comparisons)?)?;
    let mut all: Vec<&Path> = vec![&results];
    all.extend(artifacts.iter().map(PathBuf::as_path));
    let summary = json!({
        "station": series.station,
        "records": series.len(),
        "masked": series.masked,
        "malformed": series.malformed,
    });
    let manifest = write_manifest("rainfall", a.test.seed, json!({ "config": config, "series": summary }), &all)?;
    print_json(&json!({
        "command": "rainfall",
        "series": summary,
        "output": results,
        "manifest": manifest,
        "comparisons": comparisons,
    }))?;
    Ok(0)
}
