//! The five subcommands. Parallel sections produce per-run results indexed
//! by run number; merges walk that index in order, so output bytes do not
//! depend on the worker count.

use std::path::Path;
use std::sync::Arc;

use continuized::analysis::{build_lyapunov, empirical_rate_fit, Lyapunov, MIN_FIT_POINTS};
use continuized::baselines::{iterations_to_gap, run_baseline, BaselineMethod, BaselineParams};
use continuized::model::ConstantKind;
use continuized::process::{
    cna_step, run_rng, run_trajectory, run_trajectory_with_rng, ProcessError, ProcessState,
    TrajectoryRecord, DIVERGENCE_FACTOR,
};
use rayon::prelude::*;

use crate::config::{
    parse_config, CompareConfig, Experiment, ExperimentConfig, OverrideSet, SweepConfig,
};
use crate::output::{
    cell_file_name, open_output, write_aggregate_csv, write_baseline_csv, write_compare_csv,
    write_gap_csv, write_trajectory_csv,
};
use crate::probes::{probe_by_name, ProbeOutcome};
use crate::CliError;

/// Number of steps to drop before fitting a rate; the first arrivals are
/// dominated by the transient, not the certified exponent.
const FIT_BURN_IN: u64 = 20;

/// Runs used for the mean-gap curve behind `slope_fitted`.
const SLOPE_RUNS: u64 = 50;

fn certified_energy(exp: &Experiment) -> Result<Option<Arc<dyn Lyapunov>>, CliError> {
    match &exp.derivation {
        Some(d) => match d.lyapunov {
            Some(kind) => Ok(Some(build_lyapunov(kind, &exp.model, &exp.params, d.epsilon)?)),
            None => Ok(None),
        },
        None => Ok(None),
    }
}

pub fn cmd_run(exp: &Experiment, out: Option<&Path>) -> Result<(), CliError> {
    let lyap = certified_energy(exp)?;
    let observe = lyap.map(|l| move |s: &ProcessState| l.value(s));
    let records = run_trajectory(
        exp.model.as_ref(),
        &exp.params,
        &exp.x0,
        exp.n_steps,
        exp.seed,
        observe
            .as_ref()
            .map(|f| f as &(dyn Fn(&ProcessState) -> f64 + Sync)),
    )?;
    let mut w = open_output(out)?;
    write_trajectory_csv(w.as_mut(), &records)
}

/// One aggregated step of a Monte Carlo batch.
pub struct AggregateRow {
    pub k: u64,
    pub mean_t: f64,
    pub mean_gap: f64,
    pub se_gap: f64,
    pub mean_weighted_gap: f64,
    pub se_weighted_gap: f64,
    /// Certified constant bounding the weighted gap's expectation; absent
    /// for explicit schemes.
    pub bound: Option<f64>,
}

#[derive(Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn se(&self) -> f64 {
        if self.n >= 2 {
            (self.m2 / (self.n as f64 * (self.n - 1) as f64)).sqrt()
        } else {
            0.0
        }
    }
}

pub fn aggregate(exp: &Experiment) -> Result<Vec<AggregateRow>, CliError> {
    // The weight is the certified exponent; without one the weighted gap
    // degenerates to the plain gap.
    let beta = exp.params.rate.unwrap_or(0.0);
    let runs: Vec<Vec<TrajectoryRecord>> = (0..exp.n_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = run_rng(exp.seed, run);
            run_trajectory_with_rng(
                exp.model.as_ref(),
                &exp.params,
                &exp.x0,
                exp.n_steps,
                &mut rng,
                None,
            )
        })
        .collect::<Result<_, ProcessError>>()?;

    let bound = exp.derivation.as_ref().map(|d| {
        let gap0 = exp.model.f_gap(&exp.x0);
        let dist0_sq = exp.model.optimum().minimizer.distance_sq(&exp.x0);
        d.guaranteed_bound(gap0, dist0_sq).bound
    });

    let n_rows = exp.n_steps as usize;
    let mut rows = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let mut t = Welford::default();
        let mut gap = Welford::default();
        let mut weighted = Welford::default();
        for run in &runs {
            let r = &run[i];
            t.push(r.t);
            gap.push(r.f_gap);
            weighted.push((beta * r.t).exp() * r.f_gap);
        }
        rows.push(AggregateRow {
            k: i as u64 + 1,
            mean_t: t.mean,
            mean_gap: gap.mean,
            se_gap: gap.se(),
            mean_weighted_gap: weighted.mean,
            se_weighted_gap: weighted.se(),
            bound,
        });
    }
    Ok(rows)
}

pub fn cmd_mc(exp: &Experiment, out: Option<&Path>) -> Result<(), CliError> {
    let rows = aggregate(exp)?;
    let mut w = open_output(out)?;
    write_aggregate_csv(w.as_mut(), &rows)
}

pub fn cmd_check(names: &[String], seed: u64, out: Option<&Path>) -> Result<bool, CliError> {
    if names.is_empty() {
        return Err(CliError::Usage(
            "check needs at least one probe (--probe NAME or a probes list in the config); \
             available: oracle-equivalence, chernoff, projection, descent-lemma, \
             supermartingale, figure1-smoothing"
                .into(),
        ));
    }
    let mut outcomes: Vec<ProbeOutcome> = Vec::with_capacity(names.len());
    for name in names {
        let probe = probe_by_name(name)?;
        outcomes.push(probe.run(seed)?);
    }
    let all_hold = outcomes.iter().all(|o| o.holds);
    let report = serde_json::json!({
        "seed": seed,
        "probes": outcomes,
        "all_hold": all_hold,
    });
    let mut w = open_output(out)?;
    serde_json::to_writer_pretty(&mut w, &report)
        .map_err(|e| CliError::Config(format!("report serialization: {e}")))?;
    writeln!(w)?;
    w.flush()?;
    Ok(all_hold)
}

use std::io::Write as _;

pub struct CompareRow {
    pub method: String,
    pub beta_theoretical: Option<f64>,
    pub slope_fitted: Option<f64>,
    /// Iterations to reach the target gap; empty when not reached within
    /// the step budget.
    pub iters: Option<u64>,
}

fn fit_slope(ks: &[u64], gaps: &[f64]) -> Option<f64> {
    let kept: Vec<(u64, f64)> = ks
        .iter()
        .zip(gaps)
        .filter(|(k, _)| **k >= FIT_BURN_IN)
        .map(|(k, g)| (*k, *g))
        .collect();
    if kept.len() < MIN_FIT_POINTS {
        return None;
    }
    let (ks, gaps): (Vec<u64>, Vec<f64>) = kept.into_iter().unzip();
    empirical_rate_fit(&ks, &gaps).ok().map(|f| f.slope)
}

/// Iterations until the gap falls below `target`, one stochastic run.
fn continuized_iters(
    exp: &Experiment,
    params: &continuized::process::ContinuizedParams,
    target: f64,
    max_steps: u64,
    run: u64,
) -> Result<Option<u64>, CliError> {
    let mut rng = run_rng(exp.seed, run);
    let mut state = ProcessState::coupled(exp.x0.clone());
    let gap0 = exp.model.f_gap(&exp.x0);
    let guard = if gap0 > 0.0 {
        DIVERGENCE_FACTOR * gap0
    } else {
        f64::INFINITY
    };
    if gap0 <= target {
        return Ok(Some(0));
    }
    for k in 1..=max_steps {
        cna_step(&mut state, exp.model.as_ref(), params, &mut rng)?;
        let gap = exp.model.f_gap(&state.x);
        if !gap.is_finite() || gap > guard {
            return Err(CliError::Divergence(format!(
                "trajectory diverged at step {k} (gap {gap:.3e})"
            )));
        }
        if gap <= target {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

fn baseline_row(
    exp: &Experiment,
    method: BaselineMethod,
    step: f64,
    target: f64,
    cfg: &CompareConfig,
    traj_dir: Option<&Path>,
) -> Result<CompareRow, CliError> {
    let name = method.name();
    let bp = BaselineParams { method, step };
    let iters = iterations_to_gap(exp.model.as_ref(), &bp, &exp.x0, target, cfg.max_steps)?;
    let records = run_baseline(exp.model.as_ref(), &bp, &exp.x0, exp.n_steps)?;
    let ks: Vec<u64> = records.iter().map(|r| r.k).collect();
    let gaps: Vec<f64> = records.iter().map(|r| r.f_gap).collect();
    if let Some(dir) = traj_dir {
        std::fs::create_dir_all(dir)?;
        let mut w = open_output(Some(&dir.join(format!("{name}.csv"))))?;
        write_baseline_csv(w.as_mut(), &records)?;
    }
    Ok(CompareRow {
        method: name.into(),
        beta_theoretical: None,
        slope_fitted: fit_slope(&ks, &gaps),
        iters,
    })
}

fn preset_row(
    exp: &Experiment,
    name: &str,
    target: f64,
    cfg: &CompareConfig,
    traj_dir: Option<&Path>,
) -> Result<CompareRow, CliError> {
    let preset = continuized::presets::preset_by_name(name)?;
    let d = preset.derive(
        exp.model.constants(),
        &continuized::presets::PresetInputs::default(),
    )?;

    // Median over independent runs; a run that exhausts the budget is
    // counted at the budget, which can only push the median up.
    let mut counts: Vec<u64> = (0..cfg.fit_runs)
        .into_par_iter()
        .map(|run| {
            continuized_iters(exp, &d.params, target, cfg.max_steps, run)
                .map(|it| it.unwrap_or(cfg.max_steps))
        })
        .collect::<Result<_, CliError>>()?;
    counts.sort_unstable();
    let median = counts.get(counts.len() / 2).copied();

    // Rate fit on the mean gap curve of a smaller dedicated batch.
    let slope_seed = exp.seed.wrapping_add(1);
    let batch: Vec<Vec<TrajectoryRecord>> = (0..SLOPE_RUNS.min(cfg.fit_runs.max(1)))
        .into_par_iter()
        .map(|run| {
            let mut rng = run_rng(slope_seed, run);
            run_trajectory_with_rng(
                exp.model.as_ref(),
                &d.params,
                &exp.x0,
                exp.n_steps,
                &mut rng,
                None,
            )
        })
        .collect::<Result<_, ProcessError>>()?;
    let n_batch = batch.len() as f64;
    let ks: Vec<u64> = (1..=exp.n_steps).collect();
    let mean_gaps: Vec<f64> = (0..exp.n_steps as usize)
        .map(|i| batch.iter().map(|run| run[i].f_gap).sum::<f64>() / n_batch)
        .collect();

    if let Some(dir) = traj_dir {
        std::fs::create_dir_all(dir)?;
        let mut rng = run_rng(exp.seed, 0);
        let records = run_trajectory_with_rng(
            exp.model.as_ref(),
            &d.params,
            &exp.x0,
            exp.n_steps,
            &mut rng,
            None,
        )?;
        let mut w = open_output(Some(&dir.join(format!("{name}.csv"))))?;
        write_gap_csv(w.as_mut(), &records)?;
    }

    Ok(CompareRow {
        method: name.into(),
        beta_theoretical: d.params.rate,
        slope_fitted: fit_slope(&ks, &mean_gaps),
        iters: median,
    })
}

pub fn compare_rows(
    exp: &Experiment,
    cfg: &CompareConfig,
    traj_dir: Option<&Path>,
) -> Result<Vec<CompareRow>, CliError> {
    let gap0 = exp.model.f_gap(&exp.x0);
    if !(gap0 > 0.0 && gap0.is_finite()) {
        return Err(CliError::Config(format!(
            "compare needs a positive initial gap, got {gap0:.3e} at x0"
        )));
    }
    if cfg.fit_runs < 1 {
        return Err(CliError::Config("compare.fit_runs must be at least 1".into()));
    }
    let target = cfg.target_rel_gap * gap0;

    let mut rows = Vec::with_capacity(cfg.methods.len());
    for method in &cfg.methods {
        let row = match method.as_str() {
            "gd" => {
                let step = match cfg.gd_step {
                    Some(s) => s,
                    None => 1.0 / exp.model.constants().require(ConstantKind::Lipschitz)?,
                };
                baseline_row(
                    exp,
                    BaselineMethod::GradientDescent,
                    step,
                    target,
                    cfg,
                    traj_dir,
                )?
            }
            "nesterov" => {
                let nc = cfg.nesterov.ok_or_else(|| {
                    CliError::Usage(
                        "the nesterov method needs compare.nesterov = {alpha, beta, eta, step} \
                         in the config"
                            .into(),
                    )
                })?;
                baseline_row(
                    exp,
                    BaselineMethod::nesterov_const(nc.alpha, nc.beta, nc.eta),
                    nc.step,
                    target,
                    cfg,
                    traj_dir,
                )?
            }
            preset => preset_row(exp, preset, target, cfg, traj_dir)?,
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn cmd_compare(
    exp: &Experiment,
    cfg: &CompareConfig,
    traj_dir: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let rows = compare_rows(exp, cfg, traj_dir)?;
    let mut w = open_output(out)?;
    write_compare_csv(w.as_mut(), &rows)
}

/// Set a dotted-path field in a JSON document, creating intermediate
/// objects as needed. Paths address objects only; arrays are replaced
/// whole by targeting their key.
fn set_path(
    doc: &mut serde_json::Value,
    path: &str,
    value: &serde_json::Value,
) -> Result<(), CliError> {
    let mut node = doc;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        if seg.is_empty() {
            return Err(CliError::Config(format!(
                "sweep path '{path}' has an empty segment"
            )));
        }
        let obj = node.as_object_mut().ok_or_else(|| {
            CliError::Config(format!(
                "sweep path '{path}' descends into a non-object at '{seg}'"
            ))
        })?;
        if i + 1 == segments.len() {
            obj.insert((*seg).into(), value.clone());
            return Ok(());
        }
        node = obj
            .entry((*seg).to_string())
            .or_insert_with(|| serde_json::json!({}));
    }
    unreachable!("the loop returns on the last segment");
}

pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    raw: &serde_json::Value,
    overrides: &OverrideSet,
    out_dir: Option<&Path>,
) -> Result<(), CliError> {
    let sweep: &SweepConfig = cfg.sweep.as_ref().ok_or_else(|| {
        CliError::Usage("sweep needs a sweep section in the config".into())
    })?;
    if sweep.grid.is_empty() {
        return Err(CliError::Usage("sweep.grid lists no fields".into()));
    }
    for (key, values) in &sweep.grid {
        if values.is_empty() {
            return Err(CliError::Config(format!(
                "sweep.grid['{key}'] lists no values"
            )));
        }
    }
    if !matches!(sweep.command.as_str(), "run" | "mc") {
        return Err(CliError::Config(format!(
            "sweep.command must be 'run' or 'mc', got '{}'",
            sweep.command
        )));
    }
    let dir = out_dir.unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;

    // File names carry their own output paths; per-cell output/sweep fields
    // from the base document would fight that.
    let mut per_cell_overrides = overrides.clone();
    per_cell_overrides.out = None;

    let keys: Vec<&String> = sweep.grid.keys().collect();
    let value_lists: Vec<&Vec<serde_json::Value>> = sweep.grid.values().collect();
    let mut index = vec![0usize; keys.len()];
    loop {
        let pairs: Vec<(String, serde_json::Value)> = keys
            .iter()
            .zip(&index)
            .zip(&value_lists)
            .map(|((k, &i), vs)| ((*k).clone(), vs[i].clone()))
            .collect();

        let mut doc = raw.clone();
        if let Some(obj) = doc.as_object_mut() {
            obj.remove("sweep");
            obj.remove("output");
        }
        for (key, value) in &pairs {
            set_path(&mut doc, key, value)?;
        }
        let mut cell_cfg = parse_config(&doc)
            .map_err(|e| CliError::Config(format!("sweep cell {:?}: {e}", cell_file_name(&pairs))))?;
        crate::config::apply_overrides(&mut cell_cfg, &per_cell_overrides)?;
        let exp = cell_cfg.resolve()?;
        for w in &exp.warnings {
            eprintln!("note: {w}");
        }
        let path = dir.join(cell_file_name(&pairs));
        match sweep.command.as_str() {
            "run" => cmd_run(&exp, Some(&path))?,
            _ => cmd_mc(&exp, Some(&path))?,
        }

        // Odometer increment over the grid indices.
        let mut carry = true;
        for i in (0..index.len()).rev() {
            if !carry {
                break;
            }
            index[i] += 1;
            if index[i] < value_lists[i].len() {
                carry = false;
            } else {
                index[i] = 0;
            }
        }
        if carry {
            return Ok(());
        }
    }
}
