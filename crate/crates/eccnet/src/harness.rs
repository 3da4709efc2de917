//! Runs all trials of an experiment and summarises reaction times.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context};
use eccnet_core::analysis::{asymmetry_index, fit_slope};
use eccnet_core::attention::BlendScheme;
use eccnet_core::search::{run_trial_observed, SearchOptions, Searcher, TargetFeatures, TrialResult};
use eccnet_core::stimuli::{generate, Condition, Experiment, PlannedTrial};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dump::dump_attention;
use crate::weights::LoadedWeights;
use crate::WORKERS_ENV;

/// Bottom-up saliency setting for a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Saliency {
    Off,
    Fixed(BlendScheme),
    /// Each condition uses the scheme of its task group.
    Grouped,
}

/// Scheme of the task group a condition belongs to.
pub fn grouped_scheme(condition: Condition) -> BlendScheme {
    use Condition::*;
    match condition {
        LineAmongCurves | CurveAmongLines | CrossAmongNonCross | NonCrossAmongCross => BlendScheme::NoSaliency,
        LAmongT | TAmongL | HeteroT20 => BlendScheme::Equal,
        _ => BlendScheme::StrongSaliency,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// Empty means both conditions.
    pub conditions: Vec<Condition>,
    pub searcher: Searcher,
    pub options: SearchOptions,
    pub saliency: Saliency,
    /// Overrides the experiment's trial count.
    pub trials_per_condition: Option<usize>,
    pub master_seed: u64,
}

impl RunConfig {
    pub fn new(experiment: Experiment, searcher: Searcher) -> Self {
        RunConfig {
            experiment,
            conditions: Vec::new(),
            searcher,
            options: SearchOptions::default(),
            saliency: Saliency::Off,
            trials_per_condition: None,
            master_seed: 1,
        }
    }

    fn conditions(&self) -> Vec<Condition> {
        if self.conditions.is_empty() {
            self.experiment.conditions().to_vec()
        } else {
            self.conditions.clone()
        }
    }

    fn options_for(&self, condition: Condition) -> SearchOptions {
        let mut o = self.options;
        match self.saliency {
            Saliency::Off => o.use_saliency = false,
            Saliency::Fixed(s) => {
                o.use_saliency = true;
                o.scheme = s;
            }
            Saliency::Grouped => {
                o.use_saliency = true;
                o.scheme = grouped_scheme(condition);
            }
        }
        o
    }
}

/// Attention maps to dump while running.
#[derive(Clone, Debug)]
pub struct AttentionDump {
    pub dir: PathBuf,
    /// Dump trials whose index is below this.
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: String,
    pub experiment: u8,
    pub condition: Condition,
    pub letter: char,
    pub hard: bool,
    pub set_size: usize,
    pub index: usize,
    pub seed: u64,
    pub found: bool,
    pub capped: bool,
    pub n_fixations: usize,
    pub rt_ms: Option<f64>,
    pub scanpath: Vec<(usize, usize)>,
}

pub fn trial_id(t: &PlannedTrial) -> String {
    format!(
        "e{}{}-{:04}",
        t.condition.experiment().number(),
        t.condition.letter(),
        t.index
    )
}

impl TrialRecord {
    fn new(t: &PlannedTrial, r: TrialResult) -> Self {
        TrialRecord {
            trial_id: trial_id(t),
            experiment: t.condition.experiment().number(),
            condition: t.condition,
            letter: t.condition.letter(),
            hard: t.condition.is_hard(),
            set_size: t.set_size,
            index: t.index,
            seed: t.seed,
            found: r.found,
            capped: r.capped,
            n_fixations: r.n_fixations,
            rt_ms: r.rt_ms,
            scanpath: r.scanpath,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSizeStats {
    pub set_size: usize,
    pub n_trials: usize,
    pub n_capped: usize,
    pub mean_rt_ms: Option<f64>,
    /// Standard error of the mean over found trials.
    pub se_rt_ms: Option<f64>,
    pub mean_fixations: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub letter: char,
    pub hard: bool,
    pub set_sizes: Vec<SetSizeStats>,
    pub slope_ms_per_item: Option<f64>,
    pub intercept_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub master_seed: u64,
    pub searcher: Searcher,
    pub options: SearchOptions,
    pub saliency: Saliency,
    pub trials_per_condition: usize,
    pub weights_sha256: Option<String>,
    pub weights_note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: u8,
    pub metadata: RunMetadata,
    pub conditions: Vec<ConditionSummary>,
    /// `(hard - easy) / (hard + easy)` over the two slopes.
    pub asymmetry_index: Option<f64>,
    /// Sorted by trial id.
    pub trials: Vec<TrialRecord>,
}

/// Worker count from the environment, if set.
pub fn worker_count() -> anyhow::Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v.parse().with_context(|| format!("{WORKERS_ENV}={v:?}"))?;
            if n == 0 {
                bail!("{WORKERS_ENV} must be positive");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

pub fn run_experiment(
    cfg: &RunConfig,
    weights: Option<&LoadedWeights>,
    workers: Option<usize>,
    dump: Option<&AttentionDump>,
) -> anyhow::Result<ExperimentReport> {
    let plan = match cfg.trials_per_condition {
        Some(n) => cfg.experiment.plan().with_trials(n),
        None => cfg.experiment.plan(),
    };
    let conditions = cfg.conditions();
    for c in &conditions {
        if c.experiment() != cfg.experiment {
            bail!("condition {c} is not part of experiment {}", cfg.experiment);
        }
    }
    let backbone = weights.map(|w| &w.backbone);
    if cfg.searcher == Searcher::EccNet && backbone.is_none() {
        bail!("the eccnet searcher needs weights");
    }

    // Target images are the same for every trial of a condition.
    let mut targets = BTreeMap::new();
    if let Some(bb) = backbone.filter(|_| cfg.searcher == Searcher::EccNet) {
        for &c in &conditions {
            let image = generate(c, plan.set_sizes[0], 0)?.target_image;
            let features = TargetFeatures::extract(bb, &image)?;
            targets.insert(c, (image, features));
        }
    }

    let planned: Vec<PlannedTrial> = conditions
        .iter()
        .flat_map(|&c| plan.trials(c, cfg.master_seed))
        .collect();
    let run_one = |t: &PlannedTrial| -> anyhow::Result<TrialRecord> {
        let id = trial_id(t);
        let spec = generate(t.condition, t.set_size, t.seed)?;
        let cached = targets
            .get(&t.condition)
            .filter(|(image, _)| *image == spec.target_image)
            .map(|(_, f)| f);
        let opts = cfg.options_for(t.condition);
        let mut dump_err = None;
        let result = run_trial_observed(cfg.searcher, backbone, &spec, &opts, cached, &mut |e| {
            if let Some(d) = dump.filter(|d| t.index < d.trials) {
                if let Err(err) = dump_attention(&d.dir, &id, e) {
                    dump_err.get_or_insert(err);
                }
            }
        })
        .with_context(|| format!("trial {id}"))?;
        if let Some(err) = dump_err {
            return Err(err.context(format!("trial {id}")));
        }
        Ok(TrialRecord::new(t, result))
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let mut trials = pool.install(|| planned.par_iter().map(run_one).collect::<anyhow::Result<Vec<_>>>())?;
    trials.sort_by(|a, b| a.trial_id.cmp(&b.trial_id));

    let metadata = RunMetadata {
        master_seed: cfg.master_seed,
        searcher: cfg.searcher,
        options: cfg.options,
        saliency: cfg.saliency,
        trials_per_condition: plan.trials_per_condition,
        weights_sha256: weights.map(|w| w.blob_sha256.clone()),
        weights_note: weights.map(|w| w.manifest.source_note.clone()),
    };
    Ok(summarize(cfg.experiment, &conditions, metadata, trials))
}

fn mean_and_se(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

/// Per-condition statistics and the asymmetry index. Capped trials count
/// towards `n_capped` only.
pub fn summarize(
    experiment: Experiment,
    conditions: &[Condition],
    metadata: RunMetadata,
    trials: Vec<TrialRecord>,
) -> ExperimentReport {
    let set_sizes = experiment.plan().set_sizes;
    let summaries: Vec<ConditionSummary> = conditions
        .iter()
        .map(|&c| {
            let stats: Vec<SetSizeStats> = set_sizes
                .iter()
                .map(|&s| {
                    let all: Vec<&TrialRecord> =
                        trials.iter().filter(|t| t.condition == c && t.set_size == s).collect();
                    let rts: Vec<f64> = all.iter().filter_map(|t| t.rt_ms).collect();
                    let fix: Vec<f64> = all.iter().filter(|t| t.found).map(|t| t.n_fixations as f64).collect();
                    let (mean_rt_ms, se_rt_ms) = mean_and_se(&rts);
                    SetSizeStats {
                        set_size: s,
                        n_trials: all.len(),
                        n_capped: all.iter().filter(|t| t.capped).count(),
                        mean_rt_ms,
                        se_rt_ms,
                        mean_fixations: mean_and_se(&fix).0,
                    }
                })
                .filter(|s| s.n_trials > 0)
                .collect();
            let points: Vec<(f64, f64)> = stats
                .iter()
                .filter_map(|s| s.mean_rt_ms.map(|m| (s.set_size as f64, m)))
                .collect();
            let fit = fit_slope(&points).ok();
            ConditionSummary {
                condition: c,
                letter: c.letter(),
                hard: c.is_hard(),
                set_sizes: stats,
                slope_ms_per_item: fit.map(|f| f.0),
                intercept_ms: fit.map(|f| f.1),
            }
        })
        .collect();
    let slope = |hard: bool| {
        summaries
            .iter()
            .find(|s| s.hard == hard)
            .and_then(|s| s.slope_ms_per_item)
    };
    let asymmetry_index = match (slope(true), slope(false)) {
        (Some(h), Some(e)) => asymmetry_index(h, e),
        _ => None,
    };
    ExperimentReport {
        experiment: experiment.number(),
        metadata,
        conditions: summaries,
        asymmetry_index,
        trials,
    }
}
