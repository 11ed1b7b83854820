use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use mbo_core::diagnostics::{self, check_dissipation, DissipationReport, Observables};
use mbo_core::geometry::seed_partition;
use mbo_core::verify::{self, Suite};
use mbo_core::{io, mbo, ExecMode, HeatKernelOperator, PhaseField, ShapeSpec, C0};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::failure::Failure;

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub h: f64,
    pub n_steps: usize,
    pub backend: &'static str,
    pub n_vertices: usize,
    pub random_seed: u64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub final_energy_per_phase: Vec<f64>,
    /// `E_{h,i}/c₀` of the initial and final fields.
    pub perimeter_proxy_initial: Vec<f64>,
    pub perimeter_proxy_final: Vec<f64>,
    pub final_observables: Observables,
    pub max_volume_deviation: f64,
    pub dissipation: DissipationReport,
    pub dissipation_passed: bool,
    pub multiplier_statistic: f64,
    pub oracle: OracleDeviations,
}

/// Deviations from closed-form answers, where the seed admits one.
#[derive(Debug, Clone, Default, Serialize)]
pub struct OracleDeviations {
    /// `|E_{h,i}(χ⁰)/c₀ − P_i| / P_i` against the exact perimeter of disk seeds.
    pub perimeter_proxy_error: Vec<Option<f64>>,
    /// Single disk seed: worst relative deviation of the equivalent radius from
    /// `√(r₀² − 2t)` (unconstrained) or from `r₀` (constrained), while `r ≥ 3Δx`.
    pub radius_error: Option<f64>,
}

/// One sweep level in `sweep_summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepLevel {
    pub h: f64,
    pub directory: PathBuf,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub final_time: f64,
    pub levels: Vec<SweepLevel>,
    /// Perimeter-proxy error of the initial field decreases along decreasing `h`.
    pub perimeter_proxy_error_decreasing: Option<bool>,
}

/// Exact perimeter per phase when every shape is a disk; phase 0 is the complement.
fn disk_perimeters(config: &ExperimentConfig) -> Vec<Option<f64>> {
    let p = config.seed.phases;
    let disks: Option<Vec<(f64, usize)>> = config
        .seed
        .shapes
        .iter()
        .map(|s| match s {
            ShapeSpec::Disk { radius, phase, .. } => Some((*radius, *phase)),
            _ => None,
        })
        .collect();
    let Some(disks) = disks.filter(|d| !d.is_empty()) else {
        return vec![None; p];
    };
    let one = |r: f64| if config.image_shape().1 > 1 { 2.0 * std::f64::consts::PI * r } else { 2.0 };
    let mut per = vec![0.0; p];
    for &(r, phase) in &disks {
        per[phase] += one(r);
        if phase != 0 {
            per[0] += one(r);
        }
    }
    per.into_iter().map(|v| (v > 0.0).then_some(v)).collect()
}

fn snapshot(dir: &Path, ell: usize, field: &PhaseField, config: &ExperimentConfig) -> mbo_core::Result<()> {
    let (w, h) = config.image_shape();
    for format in &config.output.formats {
        match format {
            Format::Pgm => io::write_label_snapshot(&dir.join(format!("step_{ell:06}.pgm")), field, w, h)?,
            Format::Mbof => io::write_fractional(&dir.join(format!("step_{ell:06}.mbof")), field)?,
        }
    }
    Ok(())
}

/// Runs one experiment into `out`, streaming the ledger and snapshots.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<RunSummary, Failure> {
    config.validate()?;
    let geom = Arc::new(config.build_geometry()?);
    let dx = config.spacing();
    if config.scheme.h < (2.0 * dx).powi(2) {
        warn!("h = {:e} is below (2Δx)² = {:e}; thresholding may freeze", config.scheme.h, (2.0 * dx).powi(2));
    }
    let initial = seed_partition(&geom, &config.seed.shapes, config.seed.phases)?;
    let measure = geom.measure();
    let volumes = initial.volumes(measure);
    if config.scheme.constrained {
        if let Some((phase, v)) = volumes.iter().enumerate().find(|(_, v)| **v < geom.min_measure()) {
            return Err(Failure::Validation(format!(
                "phase {phase} has target volume {v:e}, below one vertex mass {:e}",
                geom.min_measure()
            )));
        }
    }
    let op = HeatKernelOperator::build(geom.clone(), config.kernel.backend, config.kernel.tolerance)?;

    let snapshots = out.join("snapshots");
    fs::create_dir_all(&snapshots)?;
    snapshot(&snapshots, 0, &initial, config)?;
    let h = config.scheme.h;
    let (_, initial_per_phase) = diagnostics::energy(&initial, h, &op)?;

    let mut ledger_file = BufWriter::new(File::create(out.join("ledger.ndjson"))?);
    let n_steps = config.scheme.n_steps;
    let every = config.output.snapshot_every;
    let result = mbo::run_with(&op, initial.clone(), &config.scheme, |state, row| {
        serde_json::to_writer(&mut ledger_file, row)?;
        ledger_file.write_all(b"\n")?;
        if every.is_some_and(|k| state.ell % k == 0) || state.ell == n_steps {
            snapshot(&snapshots, state.ell, &state.field, config)?;
        }
        Ok(())
    });
    ledger_file.flush()?;
    let output = result?;

    let ledger = &output.ledger;
    let dissipation = check_dissipation(ledger);
    let final_state = &output.final_state;
    let max_volume_deviation = ledger
        .rows
        .iter()
        .flat_map(|r| r.volumes.iter().zip(&ledger.initial_volumes).map(|(v, t)| (v - t).abs()))
        .fold(0.0, f64::max);
    let perimeter_proxy_initial: Vec<f64> = initial_per_phase.iter().map(|e| e / C0).collect();
    let oracle = OracleDeviations {
        perimeter_proxy_error: disk_perimeters(config)
            .iter()
            .zip(&perimeter_proxy_initial)
            .map(|(exact, proxy)| exact.map(|p| (proxy - p).abs() / p))
            .collect(),
        radius_error: radius_error(config, ledger, dx),
    };
    let summary = RunSummary {
        h,
        n_steps,
        backend: config.kernel.backend.name(),
        n_vertices: geom.n_vertices(),
        random_seed: config.random_seed,
        initial_energy: ledger.initial_energy,
        final_energy: final_state.energy(),
        final_energy_per_phase: final_state.energy_per_phase.clone(),
        perimeter_proxy_initial,
        perimeter_proxy_final: final_state.energy_per_phase.iter().map(|e| e / C0).collect(),
        final_observables: diagnostics::observables(&final_state.field, &geom),
        max_volume_deviation,
        dissipation_passed: dissipation.passed(),
        dissipation,
        multiplier_statistic: diagnostics::multiplier_statistic(ledger),
        oracle,
    };
    write_json(&out.join("summary.json"), &summary)?;
    info!("{}: {} steps, final energy {:.6}", out.display(), n_steps, summary.final_energy);
    Ok(summary)
}

fn radius_error(config: &ExperimentConfig, ledger: &diagnostics::DissipationLedger, dx: f64) -> Option<f64> {
    let [ShapeSpec::Disk { radius: r0, phase, .. }] = config.seed.shapes.as_slice() else {
        return None;
    };
    if config.image_shape().1 == 1 || *phase == 0 {
        return None;
    }
    let worst = ledger
        .rows
        .iter()
        .filter_map(|row| {
            let r = row.radii[*phase]?;
            if r < 3.0 * dx {
                return None;
            }
            let exact = if config.scheme.constrained {
                *r0
            } else {
                let sq = r0 * r0 - 2.0 * row.t;
                if sq <= 0.0 {
                    return None;
                }
                sq.sqrt()
            };
            Some((r / exact - 1.0).abs())
        })
        .fold(0.0, f64::max);
    Some(worst)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn cmd_run(config_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<RunSummary, Failure> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(s) = seed {
        config.random_seed = s;
    }
    let dir = out.map_or_else(|| config.output.directory.clone(), Path::to_path_buf);
    fs::create_dir_all(&dir)?;
    run_experiment(&config, &dir)
}

/// Runs one level per `h` to the config's final time `n_steps·h`, levels in parallel.
pub fn cmd_sweep(
    config_path: &Path,
    h_list: &[f64],
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<SweepSummary, Failure> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(s) = seed {
        config.random_seed = s;
    }
    if h_list.is_empty() {
        return Err(Failure::Validation("--h needs at least one value".into()));
    }
    let floor = (2.0 * config.spacing()).powi(2);
    if let Some(bad) = h_list.iter().find(|h| !(h.is_finite() && **h >= floor)) {
        return Err(Failure::Validation(format!("h = {bad:e} is below (2Δx)² = {floor:e}")));
    }
    let final_time = config.scheme.h * config.scheme.n_steps as f64;
    let root = out.map_or_else(|| config.output.directory.clone(), Path::to_path_buf);
    fs::create_dir_all(&root)?;
    let levels: Vec<Result<SweepLevel, Failure>> = h_list
        .par_iter()
        .enumerate()
        .map(|(k, &h)| {
            let mut level = config.clone();
            level.scheme.h = h;
            level.scheme.n_steps = (final_time / h).round() as usize;
            let dir = root.join(format!("level_{k}_h_{h:.3e}"));
            fs::create_dir_all(&dir)?;
            let summary = run_experiment(&level, &dir)?;
            Ok(SweepLevel { h, directory: dir, summary })
        })
        .collect();
    let levels = levels.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[b].h.total_cmp(&levels[a].h));
    let errors: Option<Vec<f64>> = order
        .iter()
        .map(|&k| {
            let e = &levels[k].summary.oracle.perimeter_proxy_error;
            e.iter().flatten().copied().reduce(f64::max)
        })
        .collect();
    let summary = SweepSummary {
        final_time,
        perimeter_proxy_error_decreasing: errors.map(|e| e.windows(2).all(|w| w[1] < w[0])),
        levels,
    };
    write_json(&root.join("sweep_summary.json"), &summary)?;
    Ok(summary)
}

/// Runs a verification suite; `Ok(false)` when an asserted check fails.
pub fn cmd_verify(suite: &str, out: Option<&Path>, seed: Option<u64>) -> Result<bool, Failure> {
    let suite: Suite = suite.parse().map_err(|e: mbo_core::Error| Failure::Validation(e.to_string()))?;
    let reports = verify::run_suite(suite, seed.unwrap_or(0), ExecMode::Parallel)?;
    let dir = out.map_or_else(|| PathBuf::from("out"), Path::to_path_buf);
    fs::create_dir_all(&dir)?;
    verify::write_reports(&dir.join("verify.ndjson"), &reports)?;
    for r in &reports {
        println!(
            "{} {:<30} {:.3e}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.worst_slack_or_ratio
        );
    }
    Ok(reports.iter().all(|r| r.pass))
}
