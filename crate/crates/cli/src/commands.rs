//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use combtomo_core::cis::{delta_ptm, ptm_differences, ptm_of_branch};
use combtomo_core::simulator::{generate_dataset, synthetic_model, Dataset};
use combtomo_core::tomography::{
    benchmark_iteration, iqct_baseline, loss, mean_times, reconstruct, InitStrategy, OptimizerConfig,
    ReconstructionResult, Termination,
};
use combtomo_core::Cis;
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{spec_for, ConfigDocument};
use crate::error;
use crate::formats::{float, perturbation_json, read_dataset, write_csv, write_dataset, write_text, Model, RunManifest};
use crate::svg;

/// Settings shared by every subcommand.
pub struct Context {
    pub config: ConfigDocument,
    pub config_text: String,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Full,
    Iqct,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitSpec {
    Random,
    Prior,
    TruthPerturbed(f64),
}

impl std::str::FromStr for InitSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(InitSpec::Random),
            "prior" => Ok(InitSpec::Prior),
            _ => {
                let angle = s
                    .strip_prefix("truth-perturbed:")
                    .ok_or_else(|| format!("expected random, prior or truth-perturbed:<angle>, got {s:?}"))?;
                let angle: f64 = angle.parse().map_err(|_| format!("bad angle in {s:?}"))?;
                if !(angle.is_finite() && angle >= 0.0) {
                    return Err(format!("angle must be finite and non-negative, got {angle}"));
                }
                Ok(InitSpec::TruthPerturbed(angle))
            }
        }
    }
}

impl std::fmt::Display for InitSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitSpec::Random => f.write_str("random"),
            InitSpec::Prior => f.write_str("prior"),
            InitSpec::TruthPerturbed(a) => write!(f, "truth-perturbed:{a}"),
        }
    }
}

fn nominal_of(model: &Model) -> Result<&Cis> {
    model.nominal.as_ref().ok_or_else(|| error::validation("model file has no nominal set"))
}

pub fn generate(ctx: &Context) -> Result<()> {
    let manifest = RunManifest::start("generate", &ctx.config_text, vec![ctx.seed]);
    let spec = ctx.config.experiment_spec(ctx.seed)?;
    let pert = ctx.config.perturbation()?;
    let m = synthetic_model::<f64>(&spec, &pert)?;
    let model = Model {
        profile: m.truth.profile().clone(),
        model: m.truth,
        nominal: Some(m.nominal),
        perturbation: Some(perturbation_json(&pert)?),
    };
    let path = ctx.out.join("model.json");
    model.write(&path)?;
    info!("wrote {}", path.display());
    manifest.finish(&ctx.out, &[path])
}

pub fn simulate(ctx: &Context, model_path: &Path) -> Result<()> {
    let mut manifest = RunManifest::start("simulate", &ctx.config_text, vec![ctx.seed]);
    manifest.input(model_path)?;
    let model = Model::read(model_path)?;
    let data = generate_dataset(&model.model, &ctx.config.scheme()?, ctx.config.shots(), ctx.seed)?;
    let path = ctx.out.join("dataset.jsonl");
    write_dataset(&path, &data)?;
    info!("wrote {} records to {}", data.len(), path.display());
    manifest.finish(&ctx.out, &[path])
}

#[derive(Serialize)]
struct RunSummary {
    mode: Mode,
    init: String,
    seed: u64,
    iterations: usize,
    termination: String,
    final_loss: f64,
    final_grad_norm: f64,
}

fn termination_label(t: &Termination) -> String {
    match t {
        Termination::Converged => "converged".into(),
        Termination::MaxIterations => "max_iterations".into(),
        Termination::NumericFailure(_) => "numeric_failure".into(),
    }
}

fn run_reconstruction(
    model: &Model,
    data: &Dataset,
    mode: Mode,
    init: &InitSpec,
    cfg: &OptimizerConfig,
    seed: u64,
) -> Result<ReconstructionResult<f64>> {
    let profile = &model.profile;
    Ok(match mode {
        Mode::Iqct => {
            if *init != InitSpec::Prior {
                return Err(error::config("iqct mode always starts from the nominal set; use --init prior"));
            }
            iqct_baseline(data, profile, nominal_of(model)?, cfg)?
        }
        Mode::Full => {
            let strategy = match init {
                InitSpec::Random => InitStrategy::Random { seed },
                InitSpec::Prior => InitStrategy::FromPrior(nominal_of(model)?.clone()),
                InitSpec::TruthPerturbed(angle) => {
                    InitStrategy::TruthPerturbed { truth: model.model.clone(), angle: *angle, seed }
                }
            };
            reconstruct(data, profile, &strategy, cfg)?
        }
    })
}

/// Writes `model_out.json`, `trace.csv`, `timing.csv` and `result.json`
/// into `dir`, returning the written paths.
fn write_run(dir: &Path, model: &Model, r: &ReconstructionResult<f64>, summary: &RunSummary) -> Result<Vec<PathBuf>> {
    let out_model = Model { profile: model.profile.clone(), model: r.cis.clone(), nominal: None, perturbation: None };
    let paths = vec![dir.join("model_out.json"), dir.join("trace.csv"), dir.join("timing.csv"), dir.join("result.json")];
    out_model.write(&paths[0])?;
    let rows: Vec<Vec<String>> = r
        .loss_trace
        .iter()
        .zip(&r.grad_norm_trace)
        .enumerate()
        .map(|(k, (l, g))| vec![k.to_string(), float(*l), float(*g)])
        .collect();
    write_csv(&paths[1], &["iter", "loss", "grad_norm"], &rows)?;
    let timing: Vec<Vec<String>> =
        r.wall_ms.iter().enumerate().map(|(k, ms)| vec![k.to_string(), format!("{ms:.3}")]).collect();
    write_csv(&paths[2], &["iter", "wall_ms"], &timing)?;
    write_text(&paths[3], &(serde_json::to_string_pretty(summary)? + "\n"))?;
    Ok(paths)
}

pub fn reconstruct_cmd(ctx: &Context, model_path: &Path, data_path: &Path, mode: Mode, init: &InitSpec) -> Result<()> {
    let mut manifest = RunManifest::start("reconstruct", &ctx.config_text, vec![ctx.seed]);
    manifest.input(model_path)?;
    manifest.input(data_path)?;
    let model = Model::read(model_path)?;
    let data = read_dataset(data_path)?;
    data.validate(&model.profile).context("dataset does not fit the model profile")?;
    let cfg = ctx.config.optimizer_config(ctx.seed);
    let r = run_reconstruction(&model, &data, mode, init, &cfg, ctx.seed)?;
    let summary = RunSummary {
        mode,
        init: init.to_string(),
        seed: ctx.seed,
        iterations: r.iterations,
        termination: termination_label(&r.termination),
        final_loss: r.final_loss(),
        final_grad_norm: r.final_grad_norm(),
    };
    info!(
        "{:?} after {} steps: loss {:.3e}, grad {:.3e}",
        r.termination,
        r.iterations,
        summary.final_loss,
        summary.final_grad_norm
    );
    let paths = write_run(&ctx.out, &model, &r, &summary)?;
    manifest.finish(&ctx.out, &paths)?;
    if let Termination::NumericFailure(msg) = &r.termination {
        return Err(error::numeric(format!("reconstruction aborted after {} steps: {msg}", r.iterations)));
    }
    Ok(())
}

/// Mean PTM distance per instrument, keyed by `(slot, index)`.
fn instrument_distances(a: &Cis, b: &Cis) -> Result<Vec<((usize, usize), f64)>> {
    let mut out: Vec<((usize, usize), f64, usize)> = Vec::new();
    for d in ptm_differences(a.instruments(), b.instruments())? {
        let key = (d.slot, d.instrument);
        match out.last_mut() {
            Some((k, sum, n)) if *k == key => {
                *sum += d.fro_diff;
                *n += 1;
            }
            _ => out.push((key, d.fro_diff, 1)),
        }
    }
    Ok(out.into_iter().map(|(k, s, n)| (k, s / n as f64)).collect())
}

#[derive(Serialize)]
struct PerturbedRecovery {
    slot: usize,
    instrument: usize,
    distance_to_truth: f64,
    distance_to_nominal: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct Evaluation {
    delta_ptm: f64,
    loss_reconstructed: Option<f64>,
    loss_truth: Option<f64>,
    perturbed: Vec<PerturbedRecovery>,
    max_ratio: Option<f64>,
}

fn ptm_panels(truth: &Cis, recon: &Cis, slot: usize, index: usize) -> Result<Vec<svg::Panel>> {
    let (ti, ri) = (truth.instrument(slot, index)?, recon.instrument(slot, index)?);
    let real = |m: &combtomo_core::CMatrix| -> Vec<Vec<f64>> {
        (0..m.rows()).map(|r| m.row(r).iter().map(|c| c.re).collect()).collect()
    };
    let mut panels = Vec::new();
    for x in 0..ti.branch_count() {
        let a = real(&ptm_of_branch(&ti.branch(x), ti.output_dim())?);
        let b = real(&ptm_of_branch(&ri.branch(x), ri.output_dim())?);
        let diff: Vec<Vec<f64>> =
            a.iter().zip(&b).map(|(ra, rb)| ra.iter().zip(rb).map(|(p, q)| q - p).collect()).collect();
        panels.push(svg::Panel { title: format!("truth x={x}"), matrix: a });
        panels.push(svg::Panel { title: format!("reconstructed x={x}"), matrix: b });
        panels.push(svg::Panel { title: format!("difference x={x}"), matrix: diff });
    }
    Ok(panels)
}

pub fn evaluate(ctx: &Context, truth_path: &Path, recon_path: &Path, data_path: Option<&Path>) -> Result<()> {
    let mut manifest = RunManifest::start("evaluate", &ctx.config_text, vec![ctx.seed]);
    manifest.input(truth_path)?;
    manifest.input(recon_path)?;
    let truth = Model::read(truth_path)?;
    let recon = Model::read(recon_path)?;
    if truth.profile != recon.profile {
        return Err(error::validation("truth and reconstruction have different dimension profiles"));
    }
    let diffs = ptm_differences(recon.model.instruments(), truth.model.instruments())?;
    let delta = delta_ptm(recon.model.instruments(), truth.model.instruments())?;
    let mut rows: Vec<Vec<String>> = diffs
        .iter()
        .map(|d| vec![d.slot.to_string(), d.instrument.to_string(), d.branch.to_string(), float(d.fro_diff)])
        .collect();
    rows.push(vec!["mean".into(), String::new(), String::new(), float(delta)]);
    let mut outputs = vec![ctx.out.join("report.csv")];
    write_csv(&outputs[0], &["slot", "instrument", "branch", "fro_diff"], &rows)?;

    let (loss_reconstructed, loss_truth) = match data_path {
        Some(p) => {
            manifest.input(p)?;
            let data = read_dataset(p)?;
            (Some(loss(&recon.model, &data)?.total), Some(loss(&truth.model, &data)?.total))
        }
        None => (None, None),
    };
    let mut perturbed = Vec::new();
    if let Some(nominal) = &truth.nominal {
        let to_truth = instrument_distances(&recon.model, &truth.model)?;
        let to_nominal = instrument_distances(&recon.model, nominal)?;
        let shift = instrument_distances(&truth.model, nominal)?;
        for ((key, dt), ((_, dn), (_, s))) in to_truth.into_iter().zip(to_nominal.into_iter().zip(shift)) {
            if s > 1e-12 {
                perturbed.push(PerturbedRecovery {
                    slot: key.0,
                    instrument: key.1,
                    distance_to_truth: dt,
                    distance_to_nominal: dn,
                    ratio: dt / dn,
                });
            }
        }
    }
    let max_ratio = perturbed.iter().map(|p| p.ratio).reduce(f64::max);
    let evaluation = Evaluation { delta_ptm: delta, loss_reconstructed, loss_truth, perturbed, max_ratio };
    outputs.push(ctx.out.join("evaluation.json"));
    write_text(&outputs[1], &(serde_json::to_string_pretty(&evaluation)? + "\n"))?;

    let picks: Vec<(usize, usize)> = (0..truth.profile.slots())
        .flat_map(|t| (0..truth.profile.n_instruments(t)).map(move |v| (t, v)))
        .take(ctx.config.evaluate.figures)
        .collect();
    for (slot, index) in picks {
        let panels = ptm_panels(&truth.model, &recon.model, slot, index)?;
        let path = ctx.out.join("figures").join(format!("ptm_slot{slot}_instrument{index}.svg"));
        write_text(&path, &svg::heatmap_grid(&format!("PTM, slot {slot}, instrument {index}"), &panels, 3))?;
        outputs.push(path);
    }
    info!("delta_ptm = {delta:.4e}");
    manifest.finish(&ctx.out, &outputs)
}

struct Cell {
    ancillas: String,
    slots: usize,
    angle: f64,
    seed: u64,
}

impl Cell {
    fn label(&self) -> String {
        format!("anc{}_N{}_angle{}_seed{}", self.ancillas, self.slots, self.angle, self.seed)
    }
}

struct CellRun {
    method: Mode,
    final_loss: f64,
    final_grad_norm: f64,
    iterations: usize,
    termination: String,
    delta_ptm: f64,
}

fn run_cell(ctx: &Context, cell: &Cell, dir: &Path) -> Result<(Vec<CellRun>, Vec<PathBuf>)> {
    let spec = spec_for(&ctx.config.profile, &cell.ancillas, cell.slots, cell.seed)?;
    let pert = ctx.config.perturbation_at(cell.angle)?;
    let m = synthetic_model::<f64>(&spec, &pert)?;
    let model = Model {
        profile: m.truth.profile().clone(),
        model: m.truth,
        nominal: Some(m.nominal),
        perturbation: Some(perturbation_json(&pert)?),
    };
    let data = generate_dataset(&model.model, &ctx.config.scheme()?, ctx.config.shots(), cell.seed)?;
    let mut paths = vec![dir.join("model.json"), dir.join("dataset.jsonl")];
    model.write(&paths[0])?;
    write_dataset(&paths[1], &data)?;
    let cfg = ctx.config.optimizer_config(cell.seed);
    let mut runs = Vec::new();
    for method in [Mode::Full, Mode::Iqct] {
        let r = run_reconstruction(&model, &data, method, &InitSpec::Prior, &cfg, cell.seed)?;
        let summary = RunSummary {
            mode: method,
            init: InitSpec::Prior.to_string(),
            seed: cell.seed,
            iterations: r.iterations,
            termination: termination_label(&r.termination),
            final_loss: r.final_loss(),
            final_grad_norm: r.final_grad_norm(),
        };
        let sub = dir.join(match method {
            Mode::Full => "full",
            Mode::Iqct => "iqct",
        });
        paths.extend(write_run(&sub, &model, &r, &summary)?);
        runs.push(CellRun {
            method,
            final_loss: summary.final_loss,
            final_grad_norm: summary.final_grad_norm,
            iterations: r.iterations,
            termination: summary.termination,
            delta_ptm: delta_ptm(r.cis.instruments(), model.model.instruments())?,
        });
    }
    Ok((runs, paths))
}

pub fn suite(ctx: &Context) -> Result<()> {
    let s = &ctx.config.suite;
    let seeds: Vec<u64> = s.seeds.clone();
    let manifest = RunManifest::start("suite", &ctx.config_text, seeds);
    let mut cells = Vec::new();
    for ancillas in &s.ancillas {
        for &slots in &s.slots {
            for &angle in &s.angles {
                for &seed in &s.seeds {
                    cells.push(Cell { ancillas: ancillas.clone(), slots, angle, seed });
                }
            }
        }
    }
    let workers = if s.workers == 0 { rayon::current_num_threads() } else { s.workers };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    info!("running {} cells on {workers} workers", cells.len());
    let results: Vec<Result<(Vec<CellRun>, Vec<PathBuf>)>> = pool.install(|| {
        cells.par_iter().map(|c| run_cell(ctx, c, &ctx.out.join("cells").join(c.label()))).collect()
    });

    let mut rows = Vec::new();
    let mut outputs = Vec::new();
    let mut means: Vec<(String, [f64; 2], [usize; 2])> = Vec::new();
    for (cell, result) in cells.iter().zip(results) {
        let prefix = vec![cell.ancillas.clone(), cell.slots.to_string(), cell.angle.to_string(), cell.seed.to_string()];
        match result {
            Ok((runs, paths)) => {
                outputs.extend(paths);
                let group = format!("{} N={} angle={}", cell.ancillas, cell.slots, cell.angle);
                let pos = match means.iter().position(|(g, _, _)| *g == group) {
                    Some(p) => p,
                    None => {
                        means.push((group, [0.0; 2], [0; 2]));
                        means.len() - 1
                    }
                };
                for run in runs {
                    let k = run.method as usize;
                    means[pos].1[k] += run.final_loss;
                    means[pos].2[k] += 1;
                    let mut row = prefix.clone();
                    row.extend([
                        format!("{:?}", run.method).to_lowercase(),
                        float(run.final_loss),
                        float(run.final_grad_norm),
                        run.iterations.to_string(),
                        run.termination,
                        float(run.delta_ptm),
                        String::new(),
                    ]);
                    rows.push(row);
                }
            }
            Err(e) => {
                warn!("cell {} failed: {e:#}", cell.label());
                let mut row = prefix.clone();
                row.extend(["-".into(), "".into(), "".into(), "".into(), "failed".into(), "".into()]);
                row.push(format!("{e:#}").replace([',', '\n'], ";"));
                rows.push(row);
            }
        }
    }
    let summary = ctx.out.join("summary.csv");
    write_csv(
        &summary,
        &[
            "ancillas", "slots", "angle", "seed", "method", "final_loss", "grad_norm", "iterations", "termination",
            "delta_ptm", "error",
        ],
        &rows,
    )?;
    let mean_rows: Vec<Vec<String>> = means
        .iter()
        .flat_map(|(g, sums, counts)| {
            [(Mode::Full, 0), (Mode::Iqct, 1)].map(|(m, k)| {
                let mean = if counts[k] > 0 { sums[k] / counts[k] as f64 } else { f64::NAN };
                vec![g.clone(), format!("{m:?}").to_lowercase(), float(mean), counts[k].to_string()]
            })
        })
        .collect();
    let mean_path = ctx.out.join("summary_mean.csv");
    write_csv(&mean_path, &["cell", "method", "mean_final_loss", "runs"], &mean_rows)?;
    let bars: Vec<(String, Vec<f64>)> = means
        .iter()
        .map(|(g, sums, counts)| (g.clone(), (0..2).map(|k| sums[k] / counts[k].max(1) as f64).collect()))
        .collect();
    let figure = ctx.out.join("loss_bars.svg");
    write_text(&figure, &svg::log_bar_chart("Mean final loss", &bars, &["full", "iqct"]))?;
    outputs.extend([summary, mean_path, figure]);
    manifest.finish(&ctx.out, &outputs)
}

pub fn benchmark(ctx: &Context) -> Result<()> {
    let manifest = RunManifest::start("benchmark", &ctx.config_text, vec![ctx.seed]);
    let profiles = ctx
        .config
        .benchmark
        .ancillas
        .iter()
        .map(|a| Ok(spec_for(&ctx.config.profile, a, ctx.config.profile.slots, ctx.seed)?.profile()?))
        .collect::<Result<Vec<_>>>()?;
    let rows = benchmark_iteration(&profiles, &ctx.config.scheme()?, ctx.config.benchmark.repetitions, ctx.seed)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.label.clone(), r.repetition.to_string(), r.records.to_string(), format!("{:.3}", r.wall_ms)])
        .collect();
    let raw = ctx.out.join("benchmark.csv");
    write_csv(&raw, &["profile", "repetition", "records", "wall_ms"], &table)?;
    let means: Vec<Vec<String>> =
        mean_times(&rows).into_iter().map(|(label, ms)| vec![label, format!("{ms:.3}")]).collect();
    let mean_path = ctx.out.join("benchmark_mean.csv");
    write_csv(&mean_path, &["profile", "mean_wall_ms"], &means)?;
    manifest.finish(&ctx.out, &[raw, mean_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_specs_parse() {
        assert_eq!("random".parse::<InitSpec>().unwrap(), InitSpec::Random);
        assert_eq!("prior".parse::<InitSpec>().unwrap(), InitSpec::Prior);
        assert_eq!("truth-perturbed:0.05".parse::<InitSpec>().unwrap(), InitSpec::TruthPerturbed(0.05));
        for bad in ["truth-perturbed", "truth-perturbed:x", "truth-perturbed:-1", "zero"] {
            assert!(bad.parse::<InitSpec>().is_err(), "{bad}");
        }
        assert_eq!(InitSpec::TruthPerturbed(0.5).to_string(), "truth-perturbed:0.5");
    }
}
