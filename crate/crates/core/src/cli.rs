//! Command implementations behind the `lidar-vsr` binary.
//!
//! Every command reads a scenario (or a run record, which embeds its
//! scenario), writes its artifacts into an output directory and returns a
//! summary. Result files carry no timestamps or durations so that a repeated
//! run with the same scenario and seed is byte-identical; wall-clock time
//! goes to `timing.json` instead.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::abc::{substream, IterationStats};
use crate::cost::{Evaluation, SubspaceMetrics};
use crate::geometry::{PoseConfig, VoxelGrid};
use crate::odr::{spearman, OdrReport};
use crate::placement::PlacementProblem;
use crate::scenario::{SchemaError, Scenario};

/// Error class, also the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Usage = 2,
    Schema = 3,
    Io = 4,
    Runtime = 5,
}

impl ErrorKind {
    pub fn tag(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Schema => "schema",
            ErrorKind::Io => "io",
            ErrorKind::Runtime => "runtime",
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("error[{}]: {message}", kind.tag())]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, message)
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> Self {
        CliError::new(ErrorKind::Schema, e.to_string())
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::new(ErrorKind::Runtime, e.to_string())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::new(ErrorKind::Io, format!("{}: {e}", path.display()))
}

type CliResult<T> = Result<T, CliError>;

pub fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Scenario::from_json(&text).map_err(|e| CliError::new(ErrorKind::Schema, format!("{}: {e}", path.display())))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacedLidar {
    pub model: String,
    pub pose: PoseConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub best_cost: f64,
    pub mean_cost: f64,
}

/// Everything `optimize` produces, as written to `results.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario_digest: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub lidars: Vec<PlacedLidar>,
    pub objective: f64,
    pub evaluations: usize,
    pub subspaces: Vec<MetricsRow>,
    pub history: Vec<HistoryRow>,
    /// Not serialized: results must be reproducible byte for byte.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

/// Serialized form of [`SubspaceMetrics`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub component_id: usize,
    pub code: String,
    pub voxel_count: usize,
    pub volume: f64,
    pub surface_area: f64,
    pub vsr: f64,
    pub inscribed_radius_estimate: f64,
}

impl From<&SubspaceMetrics> for MetricsRow {
    fn from(m: &SubspaceMetrics) -> Self {
        MetricsRow {
            component_id: m.component_id,
            code: m.code.to_string(),
            voxel_count: m.voxel_count,
            volume: m.volume,
            surface_area: m.surface_area,
            vsr: m.vsr,
            inscribed_radius_estimate: m.inscribed_radius_estimate,
        }
    }
}

pub fn convergence_csv(history: &[IterationStats]) -> String {
    let mut out = String::from("iter,best,mean\n");
    for (i, h) in history.iter().enumerate() {
        writeln!(out, "{i},{},{}", h.best_cost, h.mean_cost).unwrap();
    }
    out
}

pub fn subspaces_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("component,code,voxels,volume,surface_area,vsr,inscribed_radius\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.component_id, r.code, r.voxel_count, r.volume, r.surface_area, r.vsr, r.inscribed_radius_estimate
        )
        .unwrap();
    }
    out
}

/// One row per active voxel: centre, code and component.
pub fn voxel_csv(eval: &Evaluation, grid: &VoxelGrid) -> String {
    let mut out = String::from("x,y,z,code,component\n");
    for s in &eval.segmentation.subspaces {
        let code = s.code.to_string();
        for &idx in &s.voxels {
            let c = grid.center(grid.linear(idx));
            writeln!(out, "{},{},{},{code},{}", c.x, c.y, c.z, s.component_id).unwrap();
        }
    }
    out
}

fn component_color(id: usize) -> [u8; 3] {
    let mut h = (id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    h ^= h >> 29;
    [(h >> 8) as u8, (h >> 24) as u8, (h >> 40) as u8]
}

/// ASCII PLY point cloud, one coloured vertex per active voxel, in the same
/// order as [`voxel_csv`].
pub fn voxel_ply(eval: &Evaluation, grid: &VoxelGrid) -> String {
    let count: usize = eval.segmentation.subspaces.iter().map(|s| s.len()).sum();
    let mut out = format!(
        "ply\nformat ascii 1.0\ncomment colour keyed by subspace component\nelement vertex {count}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n"
    );
    for s in &eval.segmentation.subspaces {
        let [r, g, b] = component_color(s.component_id);
        for &idx in &s.voxels {
            let c = grid.center(grid.linear(idx));
            writeln!(out, "{} {} {} {r} {g} {b}", c.x, c.y, c.z).unwrap();
        }
    }
    out
}

fn write_voxels(out: &Path, eval: &Evaluation, grid: &VoxelGrid) -> CliResult<()> {
    write_file(out, "voxels.csv", &voxel_csv(eval, grid))?;
    write_file(out, "voxels.ply", &voxel_ply(eval, grid))?;
    Ok(())
}

fn placed(scenario: &Scenario, poses: &[PoseConfig]) -> Vec<PlacedLidar> {
    scenario
        .lidar_list()
        .into_iter()
        .zip(poses)
        .map(|((model, _), pose)| PlacedLidar { model, pose: *pose })
        .collect()
}

pub fn pose_table(lidars: &[PlacedLidar]) -> String {
    let mut out = format!(
        "{:>3}  {:<10} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "#", "model", "x", "y", "z", "yaw", "pitch", "roll"
    );
    for (i, l) in lidars.iter().enumerate() {
        let p = &l.pose;
        writeln!(
            out,
            "{:>3}  {:<10} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            i, l.model, p.position.x, p.position.y, p.position.z, p.yaw, p.pitch, p.roll
        )
        .unwrap();
    }
    out
}

/// Runs the optimizer for a scenario. `seed` overrides the scenario's.
pub fn run_optimize(scenario: &Scenario, seed: Option<u64>) -> CliResult<RunRecord> {
    let started = Instant::now();
    let mut params = scenario.abc.clone();
    if let Some(seed) = seed {
        params.seed = seed;
    }
    let problem = scenario.problem()?;
    let result = problem.solve(&params)?;
    let poses = problem.decode(&result.best_solution);
    let eval = problem.evaluate(&poses)?;
    Ok(RunRecord {
        scenario_digest: scenario.digest(),
        scenario: scenario.clone(),
        seed: params.seed,
        lidars: placed(scenario, &poses),
        objective: eval.objective,
        evaluations: result.evaluations,
        subspaces: eval.metrics.iter().map(MetricsRow::from).collect(),
        history: result
            .history
            .iter()
            .enumerate()
            .map(|(iteration, h)| HistoryRow {
                iteration,
                best_cost: h.best_cost,
                mean_cost: h.mean_cost,
            })
            .collect(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

/// `optimize`: writes `results.json`, `convergence.csv`, `subspaces.csv`,
/// `voxels.csv`, `voxels.ply` and `timing.json`.
pub fn cmd_optimize(scenario_path: &Path, out: &Path, seed: Option<u64>) -> CliResult<RunRecord> {
    let scenario = load_scenario(scenario_path)?;
    let record = run_optimize(&scenario, seed)?;

    let problem = scenario.problem()?;
    let poses: Vec<PoseConfig> = record.lidars.iter().map(|l| l.pose).collect();
    let eval = problem.evaluate(&poses)?;

    write_file(out, "results.json", &to_json(&record))?;
    let history: Vec<IterationStats> = record
        .history
        .iter()
        .map(|h| IterationStats {
            best_cost: h.best_cost,
            mean_cost: h.mean_cost,
        })
        .collect();
    write_file(out, "convergence.csv", &convergence_csv(&history))?;
    write_file(out, "subspaces.csv", &subspaces_csv(&record.subspaces))?;
    write_voxels(out, &eval, problem.grid())?;
    write_file(
        out,
        "timing.json",
        &to_json(&serde_json::json!({ "wall_clock_seconds": record.wall_clock_seconds })),
    )?;
    Ok(record)
}

/// Reads poses from either a JSON array of poses or a run record.
pub fn load_poses(path: &Path) -> CliResult<Vec<PoseConfig>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::new(ErrorKind::Schema, format!("{}: {e}", path.display())))?;
    let poses = if value.get("lidars").is_some() {
        let record: RunRecord = serde_json::from_value(value)
            .map_err(|e| CliError::new(ErrorKind::Schema, format!("{}: {e}", path.display())))?;
        record.lidars.into_iter().map(|l| l.pose).collect()
    } else {
        serde_json::from_value::<Vec<PoseConfig>>(value)
            .map_err(|e| CliError::new(ErrorKind::Schema, format!("{}: {e}", path.display())))?
    };
    if poses.iter().any(|p| !p.is_finite()) {
        return Err(CliError::new(ErrorKind::Schema, format!("{}: non-finite pose", path.display())));
    }
    Ok(poses)
}

fn check_pose_count(problem: &PlacementProblem, poses: &[PoseConfig]) -> CliResult<()> {
    if poses.len() != problem.lidar_count() {
        return Err(CliError::usage(format!(
            "scenario places {} lidars but {} poses were given",
            problem.lidar_count(),
            poses.len()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct EvaluationReport {
    pub scenario_digest: String,
    pub lidars: Vec<PlacedLidar>,
    pub out_of_bounds: Vec<usize>,
    pub objective: f64,
    pub subspaces: Vec<MetricsRow>,
}

/// `evaluate`: scores user-supplied poses without optimizing. Poses outside
/// the bounds are reported but still evaluated.
pub fn cmd_evaluate(scenario_path: &Path, poses_path: &Path, out: Option<&Path>) -> CliResult<EvaluationReport> {
    let scenario = load_scenario(scenario_path)?;
    let poses = load_poses(poses_path)?;
    let problem = scenario.problem()?;
    check_pose_count(&problem, &poses)?;
    let out_of_bounds: Vec<usize> = (0..poses.len())
        .filter(|&i| !problem.bounds().contains(&poses[i]))
        .collect();
    let eval = problem.evaluate(&poses)?;
    let report = EvaluationReport {
        scenario_digest: scenario.digest(),
        lidars: placed(&scenario, &poses),
        out_of_bounds,
        objective: eval.objective,
        subspaces: eval.metrics.iter().map(MetricsRow::from).collect(),
    };
    if let Some(out) = out {
        write_file(out, "evaluation.json", &to_json(&report))?;
        write_file(out, "subspaces.csv", &subspaces_csv(&report.subspaces))?;
        write_voxels(out, &eval, problem.grid())?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub model: String,
    pub count: usize,
    /// Median over repeats; `None` when every repeat failed.
    pub best_max_vsr: Option<f64>,
    pub runs: Vec<(u64, f64)>,
    pub error: Option<String>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Optimizes every `(model, count)` cell `repeats` times with seeds
/// `seed, seed + 1, ...`. A failing cell is recorded and the sweep goes on.
pub fn run_sweep(scenario: &Scenario, counts: &[usize], models: &[String], repeats: usize, seed: u64) -> CliResult<Vec<SweepCell>> {
    if counts.is_empty() {
        return Err(CliError::usage("--counts must list at least one lidar count"));
    }
    if models.is_empty() {
        return Err(CliError::usage("no lidar models to sweep"));
    }
    if repeats == 0 {
        return Err(CliError::usage("--repeats must be at least 1"));
    }
    let mut cells = Vec::new();
    for model in models {
        for &count in counts {
            let mut cell = SweepCell {
                model: model.clone(),
                count,
                best_max_vsr: None,
                runs: Vec::new(),
                error: None,
            };
            match scenario.with_lidars(model, count) {
                Err(e) => cell.error = Some(e.to_string()),
                Ok(s) => {
                    for r in 0..repeats as u64 {
                        match run_optimize(&s, Some(seed.wrapping_add(r))) {
                            Ok(rec) => cell.runs.push((seed.wrapping_add(r), rec.objective)),
                            Err(e) => cell.error = Some(e.message),
                        }
                    }
                }
            }
            if !cell.runs.is_empty() {
                let values: Vec<f64> = cell.runs.iter().map(|r| r.1).collect();
                cell.best_max_vsr = Some(median(&values));
            }
            cells.push(cell);
        }
    }
    Ok(cells)
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("model,count,best_max_vsr\n");
    for c in cells {
        let v = c.best_max_vsr.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{v}", c.model, c.count).unwrap();
    }
    out
}

/// Cells where the best value rises with the lidar count for the same model.
pub fn sweep_violations(cells: &[SweepCell]) -> Vec<(String, usize, usize)> {
    let mut bad = Vec::new();
    for pair in cells.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.model == b.model && b.count > a.count {
            if let (Some(x), Some(y)) = (a.best_max_vsr, b.best_max_vsr) {
                if y > x {
                    bad.push((a.model.clone(), a.count, b.count));
                }
            }
        }
    }
    bad
}

/// `sweep`: writes `sweep.csv` (`model,count,best_max_vsr`), per-seed
/// `sweep_runs.csv` and `sweep.json`.
pub fn cmd_sweep(
    scenario_path: &Path,
    counts: &[usize],
    models: &[String],
    repeats: usize,
    seed: Option<u64>,
    out: &Path,
) -> CliResult<Vec<SweepCell>> {
    let scenario = load_scenario(scenario_path)?;
    let models: Vec<String> = if models.is_empty() {
        scenario.lidar_models.iter().map(|m| m.name.clone()).collect()
    } else {
        models.to_vec()
    };
    let cells = run_sweep(&scenario, counts, &models, repeats, seed.unwrap_or(scenario.abc.seed))?;
    write_file(out, "sweep.csv", &sweep_csv(&cells))?;
    let mut runs = String::from("model,count,seed,best_max_vsr\n");
    for c in &cells {
        for (s, v) in &c.runs {
            writeln!(runs, "{},{},{s},{v}", c.model, c.count).unwrap();
        }
    }
    write_file(out, "sweep_runs.csv", &runs)?;
    write_file(
        out,
        "sweep.json",
        &to_json(&serde_json::json!({
            "scenario_digest": scenario.digest(),
            "cells": cells,
            "non_monotone": sweep_violations(&cells),
        })),
    )?;
    Ok(cells)
}

#[derive(Clone, Debug, Serialize)]
pub struct OdrSample {
    pub lidars: Vec<PlacedLidar>,
    pub max_vsr: f64,
    pub report: OdrReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct OdrSummary {
    pub scenario_digest: String,
    pub samples: Vec<OdrSample>,
    /// Spearman correlation of max VSR against ODR, when there are at least
    /// three samples.
    pub rank_correlation: Option<f64>,
}

const CONFIG_STREAM: u64 = 0xc0f1;

/// Uniform random in-bounds poses (yaw held at zero), one set per index.
pub fn random_configs(problem: &PlacementProblem, count: usize, seed: u64) -> Vec<Vec<PoseConfig>> {
    let search = problem.search_box();
    (0..count)
        .map(|i| problem.decode(&search.sample(&mut substream(seed, CONFIG_STREAM, i as u64, 0))))
        .collect()
}

/// ODR for explicit poses and/or `random` sampled configurations.
pub fn run_odr(
    scenario: &Scenario,
    poses: Option<Vec<PoseConfig>>,
    random: usize,
    seed: u64,
    trials: Option<usize>,
    threshold: Option<usize>,
) -> CliResult<OdrSummary> {
    if poses.is_none() && random == 0 {
        return Err(CliError::usage("odr needs --poses or --random-configs"));
    }
    let problem = scenario.problem()?;
    let trials = trials.unwrap_or(scenario.odr.trials);
    if trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    let threshold = threshold.unwrap_or(scenario.odr.threshold);
    let mut configs = Vec::new();
    if let Some(p) = poses {
        check_pose_count(&problem, &p)?;
        configs.push(p);
    }
    configs.extend(random_configs(&problem, random, seed));

    let samples = configs
        .into_iter()
        .map(|p| {
            let eval = problem.evaluate(&p)?;
            let report = crate::odr::estimate_odr(
                &eval.segmentation,
                problem.grid(),
                &scenario.odr.object,
                trials,
                threshold,
                seed,
            )?;
            Ok(OdrSample {
                lidars: placed(scenario, &p),
                max_vsr: eval.objective,
                report,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let rank_correlation = (samples.len() >= 3).then(|| {
        let v: Vec<f64> = samples.iter().map(|s| s.max_vsr).collect();
        let o: Vec<f64> = samples.iter().map(|s| s.report.odr).collect();
        spearman(&v, &o)
    });
    Ok(OdrSummary {
        scenario_digest: scenario.digest(),
        samples,
        rank_correlation,
    })
}

/// `odr`: writes `odr.json` and the scatter file `odr_scatter.csv`
/// (`max_vsr,odr`).
#[allow(clippy::too_many_arguments)]
pub fn cmd_odr(
    scenario_path: &Path,
    poses_path: Option<&Path>,
    random: usize,
    seed: Option<u64>,
    trials: Option<usize>,
    threshold: Option<usize>,
    out: &Path,
) -> CliResult<OdrSummary> {
    let scenario = load_scenario(scenario_path)?;
    let poses = poses_path.map(load_poses).transpose()?;
    let summary = run_odr(&scenario, poses, random, seed.unwrap_or(scenario.abc.seed), trials, threshold)?;
    write_file(out, "odr.json", &to_json(&summary))?;
    let mut csv = String::from("max_vsr,odr\n");
    for s in &summary.samples {
        writeln!(csv, "{},{}", s.max_vsr, s.report.odr).unwrap();
    }
    write_file(out, "odr_scatter.csv", &csv)?;
    Ok(summary)
}

/// `export-voxels`: re-segments a run record's best configuration and writes
/// `voxels.csv` and `voxels.ply`. Returns the number of points written.
pub fn cmd_export_voxels(record_path: &Path, out: &Path) -> CliResult<usize> {
    if !record_path.exists() {
        return Err(CliError::usage(format!("run record {} does not exist", record_path.display())));
    }
    let text = fs::read_to_string(record_path).map_err(|e| io_err(record_path, e))?;
    let record: RunRecord = serde_json::from_str(&text)
        .map_err(|e| CliError::new(ErrorKind::Schema, format!("{}: {e}", record_path.display())))?;
    record.scenario.validate()?;
    let problem = record.scenario.problem()?;
    let poses: Vec<PoseConfig> = record.lidars.iter().map(|l| l.pose).collect();
    check_pose_count(&problem, &poses)?;
    let eval = problem.evaluate(&poses)?;
    write_voxels(out, &eval, problem.grid())?;
    Ok(problem.grid().active_count())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn violations_flag_increases_only() {
        let cell = |count, v| SweepCell {
            model: "m".into(),
            count,
            best_max_vsr: Some(v),
            runs: vec![],
            error: None,
        };
        assert!(sweep_violations(&[cell(1, 3.0), cell(2, 2.0), cell(3, 2.0)]).is_empty());
        assert_eq!(sweep_violations(&[cell(1, 3.0), cell(2, 3.5)]), vec![("m".into(), 1, 2)]);
    }

    #[test]
    fn error_codes_are_distinct() {
        let codes = [ErrorKind::Usage, ErrorKind::Schema, ErrorKind::Io, ErrorKind::Runtime].map(|k| k as i32);
        assert_eq!(codes, [2, 3, 4, 5]);
        assert_eq!(CliError::usage("x").to_string(), "error[usage]: x");
    }
}
