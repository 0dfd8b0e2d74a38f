//! Subcommand implementations. Each seed gets its own directory `seed-<n>/`
//! under the output directory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use pdoa::adapt::{adapt_distribution_traced, Adaptation, TraceRow};
use pdoa::baseline::{bc_train, TabularStochasticPolicy};
use pdoa::domain::jsonl::{read_dataset, write_dataset};
use pdoa::domain::{augment_dataset, fit_preference_prior, OfflineDataset, PreferenceVector, Target};
use pdoa::env::{env_from_id, generate_dataset, CmoMdpSpec};
use pdoa::eval::{
    evaluate_targets, target_demos, write_rows_csv, EvalConfig, EvalContext, EvaluationSummary,
    Method, TargetSet,
};
use pdoa::learner::{train_regularized, train_return_conditioned, PolicyBundle};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{LearnerKind, RunConfig};

pub const DATASET: &str = "dataset.jsonl";
pub const MANIFEST: &str = "manifest.json";
pub const BUNDLE: &str = "bundle.json";
pub const BASELINE: &str = "baseline.json";
pub const ADAPTED: &str = "adapted.json";
pub const TRACE: &str = "trace.csv";
pub const ROWS: &str = "rows.csv";
pub const SUMMARY: &str = "summary.json";
pub const REPORT: &str = "report.csv";

pub struct Run {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub seeds: Vec<u64>,
}

impl Run {
    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.out.join(format!("seed-{seed}"))
    }

    fn dataset_path(&self, seed: u64) -> PathBuf {
        self.cfg.dataset.clone().unwrap_or_else(|| self.seed_dir(seed).join(DATASET))
    }
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub env_id: String,
    pub seed: u64,
    pub epsilon: f64,
    pub constrained: bool,
    pub episodes_per_preference: usize,
    pub behavior_policies: usize,
    pub requested_trajectories: usize,
    pub trajectories: usize,
    pub transitions: usize,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptedRecord {
    pub target_index: usize,
    pub target: Target,
    pub alpha: f64,
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
    pub preference: PreferenceVector,
}

/// What `eval` writes next to the CSV rows; `report` reads it back.
#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub targets: TargetSet,
    #[serde(flatten)]
    pub summary: EvaluationSummary,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("writing {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("reading {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn csv_records(path: &Path) -> Result<usize> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let mut n = 0;
    for rec in r.records() {
        rec.with_context(|| format!("parsing {}", path.display()))?;
        n += 1;
    }
    Ok(n)
}

fn load_dataset(path: &Path) -> Result<OfflineDataset> {
    read_dataset(open(path)?).with_context(|| format!("parsing dataset {}", path.display()))
}

fn load_bundle(path: &Path) -> Result<PolicyBundle> {
    PolicyBundle::read_json(open(path)?).with_context(|| format!("parsing bundle {}", path.display()))
}

/// The dataset the learners see: cost-augmented for constrained runs, costs
/// dropped otherwise.
fn learning_set(cfg: &RunConfig, raw: &OfflineDataset) -> Result<OfflineDataset> {
    Ok(if raw.augmented || raw.n_constrained == 0 {
        raw.clone()
    } else if cfg.data.constrained {
        augment_dataset(raw)?
    } else {
        raw.without_constraints()?
    })
}

/// Everything the adapt and eval commands share for one seed.
struct Prepared {
    mdp: CmoMdpSpec,
    raw: OfflineDataset,
    learn: OfflineDataset,
    bundle: PolicyBundle,
    targets: TargetSet,
}

impl Prepared {
    fn load(run: &Run, seed: u64) -> Result<Self> {
        let raw = load_dataset(&run.dataset_path(seed))?;
        if raw.env_id != run.cfg.env_id {
            bail!("dataset was generated on {:?}, config names {:?}", raw.env_id, run.cfg.env_id);
        }
        let mdp = env_from_id(&run.cfg.env_id)?;
        let learn = learning_set(&run.cfg, &raw)?;
        let bundle = load_bundle(&run.seed_dir(seed).join(BUNDLE))?;
        ensure!(
            bundle.dim() == learn.label_dim(),
            "bundle has {} preference weights, dataset labels have {}",
            bundle.dim(),
            learn.label_dim()
        );
        let targets = if run.cfg.data.constrained {
            TargetSet::constrained_grid(&raw, run.cfg.targets.preferences, run.cfg.targets.thresholds)?
        } else {
            TargetSet::preference_grid(&learn, run.cfg.targets.preferences)?
        };
        Ok(Prepared {
            mdp,
            raw,
            learn,
            bundle,
            targets,
        })
    }

    /// Demonstrations keep their costs on constrained runs.
    fn demo_source(&self) -> &OfflineDataset {
        if self.bundle.dim() > self.learn.n_reward_objectives() {
            &self.raw
        } else {
            &self.learn
        }
    }

    fn cost_dims(&self) -> (usize, usize) {
        let n = self.learn.n_reward_objectives();
        (n, self.bundle.dim() - n)
    }
}

pub fn gen_data(run: &Run) -> Result<()> {
    let mdp = env_from_id(&run.cfg.env_id)?;
    let behaviors = run.cfg.data.behaviors()?;
    for &seed in &run.seeds {
        let episodes = run.cfg.data.episodes_per_preference;
        let ds = generate_dataset(&run.cfg.env_id, &mdp, &behaviors, episodes, seed)?;
        let path = run.seed_dir(seed).join(DATASET);
        let mut w = create(&path)?;
        write_dataset(&ds, &mut w)?;
        w.flush()?;
        let groups = behaviors.preferences.len() * behaviors.lambda_grid.len().max(1);
        let manifest = Manifest {
            env_id: run.cfg.env_id.clone(),
            seed,
            epsilon: behaviors.epsilon,
            constrained: run.cfg.data.constrained,
            episodes_per_preference: episodes,
            behavior_policies: groups,
            requested_trajectories: groups * episodes,
            trajectories: ds.trajectories.len(),
            transitions: ds.n_transitions(),
        };
        let mpath = run.seed_dir(seed).join(MANIFEST);
        write_json(&mpath, &manifest)?;
        let back = load_dataset(&path)?;
        ensure!(back == ds, "dataset {} did not read back identically", path.display());
        ensure!(read_json::<Manifest>(&mpath)? == manifest, "manifest did not read back");
        println!("seed {seed}: {} trajectories -> {}", ds.trajectories.len(), path.display());
    }
    Ok(())
}

pub fn train(run: &Run) -> Result<()> {
    let mdp = env_from_id(&run.cfg.env_id)?;
    for &seed in &run.seeds {
        let raw = load_dataset(&run.dataset_path(seed))?;
        let learn = learning_set(&run.cfg, &raw)?;
        let (ns, na) = (mdp.n_states, mdp.n_actions);
        let bundle = match run.cfg.learner.kind {
            LearnerKind::Regularized => {
                PolicyBundle::Regularized(train_regularized(&learn, ns, na, &run.cfg.learner.regularized)?)
            }
            LearnerKind::ReturnConditioned => PolicyBundle::ReturnConditioned(train_return_conditioned(
                &learn,
                ns,
                na,
                &run.cfg.learner.return_conditioned,
            )?),
        };
        let dir = run.seed_dir(seed);
        let mut w = create(&dir.join(BUNDLE))?;
        bundle.write_json(&mut w)?;
        w.flush()?;
        ensure!(load_bundle(&dir.join(BUNDLE))? == bundle, "bundle did not read back identically");
        let bc = bc_train(&raw, ns, na)?;
        let mut w = create(&dir.join(BASELINE))?;
        bc.write_json(&mut w)?;
        w.flush()?;
        TabularStochasticPolicy::read_json(open(&dir.join(BASELINE))?)?;
        println!("seed {seed}: {} bundle -> {}", bundle.kind(), dir.join(BUNDLE).display());
    }
    Ok(())
}

pub fn adapt(run: &Run, trace: bool) -> Result<()> {
    for &seed in &run.seeds {
        let p = Prepared::load(run, seed)?;
        let prior = fit_preference_prior(&p.learn)?;
        let (n, k) = p.cost_dims();
        let engine = run.cfg.adapt.engine(n, k);
        let per_target: Vec<(Adaptation, Vec<AdaptedRecord>)> = p
            .targets
            .targets()
            .par_iter()
            .enumerate()
            .map(|(i, target)| -> Result<_> {
                let td = target_demos(p.demo_source(), target, i, run.cfg.adapt.m, run.cfg.adapt.k, seed)?;
                let (distribution, trace) = adapt_distribution_traced(&p.bundle, &td.demos, &prior, &engine, td.adapt_seed)?;
                let adaptation = Adaptation { distribution, trace };
                let records = run
                    .cfg
                    .alphas()
                    .into_iter()
                    .map(|alpha| {
                        Ok(AdaptedRecord {
                            target_index: i,
                            target: target.clone(),
                            alpha,
                            mean: adaptation.distribution.mean.clone(),
                            stddev: adaptation.distribution.stddev.clone(),
                            preference: adaptation.preference(alpha, n, k)?,
                        })
                    })
                    .collect::<pdoa::Result<_>>()?;
                Ok((adaptation, records))
            })
            .collect::<Result<_>>()?;
        let dir = run.seed_dir(seed);
        let records: Vec<&AdaptedRecord> = per_target.iter().flat_map(|(_, r)| r).collect();
        write_json(&dir.join(ADAPTED), &records)?;
        let back: Vec<AdaptedRecord> = read_json(&dir.join(ADAPTED))?;
        ensure!(back.len() == records.len(), "adapted preferences did not read back");
        if trace {
            let rows: Vec<(usize, &TraceRow)> = per_target
                .iter()
                .enumerate()
                .flat_map(|(i, (a, _))| a.trace.iter().map(move |r| (i, r)))
                .collect();
            write_trace(&dir.join(TRACE), &rows, engine.dim())?;
            ensure!(csv_records(&dir.join(TRACE))? == rows.len(), "trace did not read back");
        }
        println!("seed {seed}: {} targets adapted -> {}", p.targets.len(), dir.join(ADAPTED).display());
    }
    Ok(())
}

fn write_trace(path: &Path, rows: &[(usize, &TraceRow)], dim: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["target_index".to_string(), "step".into(), "objective".into()];
    header.extend((0..dim).map(|i| format!("mean_{i}")));
    header.extend((0..dim).map(|i| format!("stddev_{i}")));
    w.write_record(&header)?;
    for (i, r) in rows {
        let mut rec = vec![i.to_string(), r.step.to_string(), r.objective.to_string()];
        rec.extend(r.mean.iter().map(|x| x.to_string()));
        rec.extend(r.stddev.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn eval(run: &Run, oracle: bool) -> Result<()> {
    for &seed in &run.seeds {
        let p = Prepared::load(run, seed)?;
        let dir = run.seed_dir(seed);
        let prior = fit_preference_prior(&p.learn)?;
        let baseline = if run.cfg.eval.baseline {
            Some(TabularStochasticPolicy::read_json(open(&dir.join(BASELINE))?)?)
        } else {
            None
        };
        let mut methods = vec![Method::Pdoa];
        if baseline.is_some() {
            methods.push(Method::BcFinetune);
        }
        if oracle {
            methods.push(Method::Oracle);
        }
        let e = &run.cfg.eval;
        let cfg = EvalConfig {
            episodes: e.episodes,
            demo_size: run.cfg.adapt.m,
            demo_trajectories: run.cfg.adapt.k,
            alphas: run.cfg.alphas(),
            methods,
            oracle_divisions: e.oracle_divisions,
            finetune_lr: e.finetune_lr,
            finetune_steps: e.finetune_steps,
            reference: e.reference.clone(),
        };
        let ctx = EvalContext {
            bundle: &p.bundle,
            mdp: &p.mdp,
            dataset: p.demo_source(),
            prior: &prior,
            baseline: baseline.as_ref(),
        };
        let (n, k) = p.cost_dims();
        let ev = evaluate_targets(&ctx, &p.targets, &run.cfg.adapt.engine(n, k), &cfg, seed)?;
        let mut w = create(&dir.join(ROWS))?;
        write_rows_csv(&ev.rows, &mut w)?;
        w.flush()?;
        let summary = RunSummary {
            seed,
            targets: p.targets,
            summary: ev.summary,
        };
        let mut w = create(&dir.join(SUMMARY))?;
        serde_json::to_writer_pretty(&mut w, &summary)?;
        w.write_all(b"\n")?;
        w.flush()?;
        ensure!(csv_records(&dir.join(ROWS))? == ev.rows.len(), "rows did not read back");
        ensure!(read_json::<RunSummary>(&dir.join(SUMMARY))? == summary, "summary did not read back");
        for m in &summary.summary.methods {
            println!(
                "seed {seed}: {:<12} alpha {:<4} utility {:.4} hypervolume {:.4} violating groups {}/{}",
                m.method.name(),
                m.alpha.map_or("-".into(), |a| a.to_string()),
                m.average_utility,
                m.hypervolume,
                m.violating_groups,
                m.groups
            );
        }
    }
    Ok(())
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub algorithm: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
}

/// One row per (algorithm, metric) with mean and 1-sigma across the runs.
pub fn aggregate(runs: &[RunSummary]) -> Result<Vec<ReportRow>> {
    let Some(first) = runs.first() else {
        bail!("no summaries to report");
    };
    for r in runs {
        ensure!(r.targets == first.targets, "seed {} was evaluated on a different target grid", r.seed);
    }
    let mut out = Vec::new();
    for m in &first.summary.methods {
        let algorithm = match m.alpha {
            Some(a) => format!("{}@{a}", m.method.name()),
            None => m.method.name().to_string(),
        };
        let same: Vec<_> = runs
            .iter()
            .map(|r| {
                r.summary
                    .methods
                    .iter()
                    .find(|x| x.method == m.method && x.alpha == m.alpha)
                    .with_context(|| format!("seed {} lacks {algorithm}", r.seed))
            })
            .collect::<Result<_>>()?;
        let mut metrics: Vec<(&str, Vec<f64>)> = vec![
            ("average_utility", same.iter().map(|x| x.average_utility).collect()),
            ("hypervolume", same.iter().map(|x| x.hypervolume).collect()),
            ("violating_groups", same.iter().map(|x| x.violating_groups as f64).collect()),
        ];
        if let Some(errs) = same.iter().map(|x| x.preference_error).collect::<Option<Vec<f64>>>() {
            metrics.push(("preference_error", errs));
        }
        for (metric, xs) in metrics {
            let (mean, std) = mean_std(&xs);
            out.push(ReportRow {
                algorithm: algorithm.clone(),
                metric: metric.into(),
                mean,
                std,
                seeds: xs.len(),
            });
        }
    }
    Ok(out)
}

pub fn report(run: &Run, paths: &[PathBuf]) -> Result<()> {
    let paths: Vec<PathBuf> = if paths.is_empty() {
        run.seeds.iter().map(|&s| run.seed_dir(s).join(SUMMARY)).collect()
    } else {
        paths.to_vec()
    };
    let runs: Vec<RunSummary> = paths.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    let rows = aggregate(&runs)?;
    let path = run.out.join(REPORT);
    let mut w = csv::Writer::from_writer(create(&path)?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    drop(w);
    ensure!(csv_records(&path)? == rows.len(), "report did not read back");
    for r in &rows {
        println!("{:<16} {:<18} {:>12.4} ± {:.4}", r.algorithm, r.metric, r.mean, r.std);
    }
    Ok(())
}
