//! Command-line driver for the coupled bulk-surface cut finite element
//! solver: refinement sweeps, interface-robustness sweeps, CSV/VTK output.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cutfem::analysis::fit_order;
use cutfem::study::{
    run_convergence_study, run_robustness_sweep, CondSetting, RunConfig,
};
use nalgebra::{Point3, Vector3};
use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cutfem",
    about = "Cut finite element solver for a coupled bulk-surface elliptic problem",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mesh refinement sweep of the manufactured problem.
    Converge(CommonArgs),
    /// Run seeded sphere-center offsets at fixed h and record errors and
    /// condition numbers per interface position.
    Robustness(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Key=value configuration file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Coarsest requested mesh parameter.
    #[arg(long)]
    h0: Option<f64>,
    /// Number of refinement levels (halving h each level).
    #[arg(long)]
    levels: Option<usize>,
    /// Bulk ghost-penalty parameter.
    #[arg(long = "tau-b")]
    tau_b: Option<f64>,
    /// Surface ghost-penalty parameter.
    #[arg(long = "tau-s")]
    tau_s: Option<f64>,
    /// Bulk conductivity.
    #[arg(long)]
    kb: Option<f64>,
    /// Surface conductivity.
    #[arg(long)]
    ks: Option<f64>,
    /// Bulk coupling constant.
    #[arg(long)]
    bb: Option<f64>,
    /// Surface coupling constant.
    #[arg(long)]
    bs: Option<f64>,
    /// Sphere center as "x,y,z".
    #[arg(long, value_parser = parse_point)]
    center: Option<Point3<f64>>,
    /// Sphere radius (the manufactured problem needs 1).
    #[arg(long)]
    radius: Option<f64>,
    /// Background box origin as "x,y,z".
    #[arg(long = "box-origin", value_parser = parse_point)]
    box_origin: Option<Point3<f64>>,
    /// Background box extents as "ex,ey,ez".
    #[arg(long = "box-extents", value_parser = parse_point)]
    box_extents: Option<Point3<f64>>,
    /// Seed of the robustness sweep offsets.
    #[arg(long = "jitter-seed")]
    jitter_seed: Option<u64>,
    /// Amplitude of the center offsets (must stay below h0/2).
    #[arg(long = "jitter-amp")]
    jitter_amp: Option<f64>,
    /// Number of robustness trials.
    #[arg(long = "jitter-trials")]
    jitter_trials: Option<usize>,
    /// CSV output path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Prefix for VTK output (mesh and surface files per level).
    #[arg(long)]
    vtk: Option<String>,
    /// Prefix for Matrix Market export of the assembled operators.
    #[arg(long)]
    matrix: Option<String>,
    /// Condition number computation: dense, iterative or off.
    #[arg(long, value_parser = parse_cond)]
    cond: Option<CondSetting>,
    /// Verify acceptance-style bounds on the results; nonzero exit on failure.
    #[arg(long, default_value_t = false)]
    check: bool,
}

fn parse_point(s: &str) -> Result<Point3<f64>, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated values, got '{s}'"));
    }
    let mut v = [0.0; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| format!("bad coordinate '{part}': {e}"))?;
    }
    Ok(Point3::new(v[0], v[1], v[2]))
}

fn parse_cond(s: &str) -> Result<CondSetting, String> {
    match s.to_ascii_lowercase().as_str() {
        "dense" => Ok(CondSetting::Dense),
        "iterative" => Ok(CondSetting::Iterative),
        "off" => Ok(CondSetting::Off),
        other => Err(format!("expected dense|iterative|off, got '{other}'")),
    }
}

/// Applies a key=value config file, then the command-line flags on top.
fn build_config(args: &CommonArgs) -> Result<(RunConfig, bool)> {
    let mut config = RunConfig::default();
    let mut check = false;

    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let map = parse_key_values(&text)?;
        apply_file_config(&mut config, &mut check, &map)?;
    }

    let c = &mut config.coeffs;
    if let Some(v) = args.h0 {
        config.h0 = v;
    }
    if let Some(v) = args.levels {
        config.levels = v;
    }
    if let Some(v) = args.tau_b {
        c.tau_bulk = v;
    }
    if let Some(v) = args.tau_s {
        c.tau_surf = v;
    }
    if let Some(v) = args.kb {
        c.k_bulk = v;
    }
    if let Some(v) = args.ks {
        c.k_surf = v;
    }
    if let Some(v) = args.bb {
        c.b_bulk = v;
    }
    if let Some(v) = args.bs {
        c.b_surf = v;
    }
    if let Some(v) = args.center {
        config.center = v;
    }
    if let Some(v) = args.radius {
        config.radius = v;
    }
    if let Some(v) = args.box_origin {
        config.box_origin = v;
    }
    if let Some(v) = args.box_extents {
        config.box_extents = Vector3::new(v.x, v.y, v.z);
    }
    if let Some(v) = args.jitter_seed {
        config.jitter_seed = v;
    }
    if let Some(v) = args.jitter_amp {
        config.jitter_amplitude = v;
    }
    if let Some(v) = args.jitter_trials {
        config.jitter_trials = v;
    }
    if let Some(v) = &args.csv {
        config.csv_path = Some(v.clone());
    }
    if let Some(v) = &args.vtk {
        config.vtk_prefix = Some(v.clone());
    }
    if let Some(v) = &args.matrix {
        config.matrix_prefix = Some(v.clone());
    }
    if let Some(v) = args.cond {
        config.cond = v;
    }
    if args.check {
        check = true;
    }
    Ok((config, check))
}

fn parse_key_values(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {} is not key=value: '{line}'", lineno + 1);
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn apply_file_config(
    config: &mut RunConfig,
    check: &mut bool,
    map: &HashMap<String, String>,
) -> Result<()> {
    let parse_f64 = |key: &str, value: &str| -> Result<f64> {
        value
            .parse()
            .with_context(|| format!("config key '{key}' expects a number, got '{value}'"))
    };
    for (key, value) in map {
        match key.as_str() {
            "h0" => config.h0 = parse_f64(key, value)?,
            "levels" => config.levels = value.parse().context("levels")?,
            "tau_b" => config.coeffs.tau_bulk = parse_f64(key, value)?,
            "tau_s" => config.coeffs.tau_surf = parse_f64(key, value)?,
            "kb" => config.coeffs.k_bulk = parse_f64(key, value)?,
            "ks" => config.coeffs.k_surf = parse_f64(key, value)?,
            "bb" => config.coeffs.b_bulk = parse_f64(key, value)?,
            "bs" => config.coeffs.b_surf = parse_f64(key, value)?,
            "center" => config.center = parse_point(value).map_err(anyhow::Error::msg)?,
            "radius" => config.radius = parse_f64(key, value)?,
            "box_origin" => {
                config.box_origin = parse_point(value).map_err(anyhow::Error::msg)?
            }
            "box_extents" => {
                let p = parse_point(value).map_err(anyhow::Error::msg)?;
                config.box_extents = Vector3::new(p.x, p.y, p.z);
            }
            "jitter_seed" => config.jitter_seed = value.parse().context("jitter_seed")?,
            "jitter_amp" => config.jitter_amplitude = parse_f64(key, value)?,
            "jitter_trials" => {
                config.jitter_trials = value.parse().context("jitter_trials")?
            }
            "csv" => config.csv_path = Some(PathBuf::from(value)),
            "vtk" => config.vtk_prefix = Some(value.clone()),
            "matrix" => config.matrix_prefix = Some(value.clone()),
            "cond" => config.cond = parse_cond(value).map_err(anyhow::Error::msg)?,
            "check" => *check = value.parse().context("check")?,
            other => bail!("unknown config key '{other}'"),
        }
    }
    Ok(())
}

fn within(value: f64, lo: f64, hi: f64) -> bool {
    value >= lo && value <= hi
}

fn run_converge(args: &CommonArgs) -> Result<bool> {
    let (config, check) = build_config(args)?;
    let records = run_convergence_study(&config)?;
    if !check {
        return Ok(true);
    }

    let mut ok = true;
    let last = records.last().expect("at least one level");
    if records.len() >= 2 {
        for (name, eoc, lo, hi) in [
            ("eocL2_B", last.eoc_l2_bulk, 1.7, 2.3),
            ("eocL2_S", last.eoc_l2_surf, 1.7, 2.3),
            ("eocH1_B", last.eoc_h1_bulk, 0.8, 1.2),
            ("eocH1_S", last.eoc_h1_surf, 0.8, 1.2),
        ] {
            let value = eoc.expect("EOC present past the first level");
            let pass = within(value, lo, hi);
            ok &= pass;
            println!(
                "check {name} = {value:.3} in [{lo}, {hi}]: {}",
                if pass { "PASS" } else { "FAIL" }
            );
        }
    } else {
        println!("check EOC: skipped (needs at least two levels)");
    }

    let kappas: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.kappa.map(|k| (r.h, k)))
        .collect();
    if kappas.len() >= 3 {
        let hs: Vec<f64> = kappas.iter().map(|(h, _)| *h).collect();
        let ks: Vec<f64> = kappas.iter().map(|(_, k)| *k).collect();
        let slope = fit_order(&hs, &ks);
        let pass = within(slope, -2.4, -1.6);
        ok &= pass;
        println!(
            "check kappa slope = {slope:.3} in [-2.4, -1.6]: {}",
            if pass { "PASS" } else { "FAIL" }
        );
    } else if config.cond != CondSetting::Off {
        println!("check kappa slope: skipped (needs at least three levels)");
    }
    Ok(ok)
}

fn run_robustness(args: &CommonArgs) -> Result<bool> {
    let (config, check) = build_config(args)?;
    let report = run_robustness_sweep(&config)?;
    println!(
        "trial      cx        cy        cz      errL2_B     errL2_S     kappa"
    );
    for r in &report.records {
        println!(
            "{:5} {:9.5} {:9.5} {:9.5} {:.5e} {:.5e} {}",
            r.trial,
            r.cx,
            r.cy,
            r.cz,
            r.err_l2_bulk,
            r.err_l2_surf,
            r.kappa.map_or("-".into(), |k| format!("{k:.4e}")),
        );
    }
    if let Some(ratio) = report.kappa_ratio {
        println!("kappa max/min ratio: {ratio:.3}");
    }
    println!(
        "errL2 max/min ratios: bulk {:.3}, surface {:.3}",
        report.err_l2_spread.0, report.err_l2_spread.1
    );
    if !check {
        return Ok(true);
    }

    let mut ok = true;
    if let Some(ratio) = report.kappa_ratio {
        let pass = ratio <= 10.0;
        ok &= pass;
        println!(
            "check kappa ratio {ratio:.3} <= 10: {}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    for (name, ratio) in [
        ("bulk", report.err_l2_spread.0),
        ("surface", report.err_l2_spread.1),
    ] {
        let pass = ratio <= 3.0;
        ok &= pass;
        println!(
            "check {name} L2 spread {ratio:.3} <= 3: {}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Converge(args) => run_converge(args),
        Command::Robustness(args) => run_robustness(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
