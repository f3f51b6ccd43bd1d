use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{evaluate_exact, EvaluationReport};
use crate::data::Split;
use crate::error::{Error, Result};
use crate::nn::{Real, SeededRng, Stream};
use crate::resilinet::{assign_hyperconnection_weights, train, FailoutConfig, HyperWeightScheme, Scheme, TrainConfig};
use crate::topology::{build_model, node_label, FailureSetting, PartitionPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    FailoutRate,
    WeightScheme,
    SkipConfig,
}

impl std::str::FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "failout_rate" | "failout" => Ok(Self::FailoutRate),
            "weight_scheme" | "weights" => Ok(Self::WeightScheme),
            "skip_config" | "skips" => Ok(Self::SkipConfig),
            other => Err(Error::config(format!("unknown ablation axis '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevelValue {
    /// `None` drops each node at its own failure probability.
    FailoutRate {
        rate: Option<f64>,
    },
    Weights {
        scheme: HyperWeightScheme,
    },
    /// Which plan skips are kept, indexed like `PartitionPlan::skips`.
    Skips {
        keep: Vec<bool>,
    },
}

impl LevelValue {
    /// True when training depends on the evaluation setting.
    fn per_setting(&self) -> bool {
        match self {
            LevelValue::FailoutRate { rate } => rate.is_none(),
            LevelValue::Weights { scheme } => matches!(
                scheme,
                HyperWeightScheme::Reliability | HyperWeightScheme::RelativeReliability
            ),
            LevelValue::Skips { .. } => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridLevel {
    pub label: String,
    pub detail: String,
    pub value: LevelValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub level: String,
    pub repeat: usize,
    pub seed: u64,
    pub setting: String,
    pub report: EvaluationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationGrid {
    pub axis: AblationAxis,
    pub levels: Vec<GridLevel>,
    pub repeats: usize,
    pub cells: Vec<GridCell>,
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub plan: PartitionPlan,
    pub scheme: Scheme,
    pub train: TrainConfig,
    pub weights: HyperWeightScheme,
    pub settings: Vec<FailureSetting>,
    pub repeats: usize,
    pub seed: u64,
    pub workers: usize,
}

pub const FAILOUT_RATES: [f64; 4] = [0.05, 0.10, 0.30, 0.50];

pub fn failout_levels() -> Vec<GridLevel> {
    let mut out = vec![GridLevel {
        label: "Failure".into(),
        detail: "per-node failure probability".into(),
        value: LevelValue::FailoutRate { rate: None },
    }];
    out.extend(FAILOUT_RATES.iter().map(|&r| GridLevel {
        label: format!("{}%", (r * 100.0).round()),
        detail: format!("fixed {r}"),
        value: LevelValue::FailoutRate { rate: Some(r) },
    }));
    out
}

pub fn weight_levels() -> Vec<GridLevel> {
    [
        HyperWeightScheme::One,
        HyperWeightScheme::Reliability,
        HyperWeightScheme::RelativeReliability,
        HyperWeightScheme::UniformRandom { lo: 0.0, hi: 1.0 },
    ]
    .into_iter()
    .map(|scheme| GridLevel {
        label: scheme.label(),
        detail: scheme.label(),
        value: LevelValue::Weights { scheme },
    })
    .collect()
}

fn source_label(src: i64) -> String {
    if src < 0 {
        "i".into()
    } else {
        node_label(src as usize)
    }
}

/// Every subset of the plan's skips, labelled `C1..C(2^k)`: by subset size,
/// then lexicographically over skips ordered deepest source first.
pub fn skip_levels(plan: &PartitionPlan) -> Vec<GridLevel> {
    let k = plan.skips.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&s| std::cmp::Reverse(plan.skips[s][0]));
    let unique_sources = {
        let mut srcs: Vec<i64> = plan.skips.iter().map(|s| s[0]).collect();
        srcs.sort();
        srcs.dedup();
        srcs.len() == k
    };
    let name = |s: usize| {
        let src = source_label(plan.skips[s][0]);
        if unique_sources {
            src
        } else {
            format!("{src}>{}", node_label(plan.skips[s][1] as usize))
        }
    };

    let mut subsets: Vec<Vec<usize>> = Vec::new();
    for size in 0..=k {
        combinations(&order, size, &mut Vec::new(), 0, &mut subsets);
    }
    subsets
        .into_iter()
        .enumerate()
        .map(|(i, subset)| {
            let mut keep = vec![false; k];
            for &s in &subset {
                keep[s] = true;
            }
            let detail = if subset.is_empty() {
                "None".to_string()
            } else if subset.len() == k {
                "All".to_string()
            } else {
                // shallow nodes first, input last
                let mut shown = subset.clone();
                shown.sort_by_key(|&s| {
                    let src = plan.skips[s][0];
                    (src < 0, src, plan.skips[s][1])
                });
                shown.iter().map(|&s| name(s)).collect::<Vec<_>>().join(",")
            };
            GridLevel {
                label: format!("C{}", i + 1),
                detail,
                value: LevelValue::Skips { keep },
            }
        })
        .collect()
}

fn combinations(items: &[usize], size: usize, cur: &mut Vec<usize>, start: usize, out: &mut Vec<Vec<usize>>) {
    if cur.len() == size {
        out.push(cur.clone());
        return;
    }
    for i in start..items.len() {
        cur.push(items[i]);
        combinations(items, size, cur, i + 1, out);
        cur.pop();
    }
}

pub fn axis_levels(axis: AblationAxis, plan: &PartitionPlan) -> Vec<GridLevel> {
    match axis {
        AblationAxis::FailoutRate => failout_levels(),
        AblationAxis::WeightScheme => weight_levels(),
        AblationAxis::SkipConfig => skip_levels(plan),
    }
}

struct Job {
    level: usize,
    repeat: usize,
    /// `None` trains once and evaluates under every setting.
    setting: Option<usize>,
}

fn run_job<T: Real>(spec: &SweepSpec, level: &GridLevel, job: &Job, split: &Split) -> Result<Vec<GridCell>> {
    let seed = spec.seed.wrapping_add(job.repeat as u64);
    let train_setting = &spec.settings[job.setting.unwrap_or(0)];
    let mut plan = spec.plan.clone();
    let mut cfg = spec.train.clone();
    let mut weights = spec.weights;
    match &level.value {
        LevelValue::FailoutRate { rate: Some(r) } => cfg.failout = FailoutConfig::Fixed { rate: *r },
        LevelValue::FailoutRate { rate: None } => {
            cfg.failout = FailoutConfig::MatchFailure {
                setting: train_setting.clone(),
            }
        }
        LevelValue::Weights { scheme } => weights = *scheme,
        LevelValue::Skips { keep } => plan = plan.with_skip_subset(keep),
    }
    let mut model = build_model::<T, _>(&plan, &mut SeededRng::new(seed, Stream::Init))?;
    assign_hyperconnection_weights(
        &mut model,
        weights,
        train_setting,
        &mut SeededRng::new(seed, Stream::Weights),
    )?;
    train(&mut model, &split.train, spec.scheme, &cfg, seed)?;

    let settings: Vec<usize> = match job.setting {
        Some(s) => vec![s],
        None => (0..spec.settings.len()).collect(),
    };
    settings
        .into_iter()
        .map(|s| {
            let mut report = evaluate_exact(&model, &spec.settings[s], spec.scheme, &split.test, 1)?;
            report.seed = Some(seed);
            Ok(GridCell {
                level: level.label.clone(),
                repeat: job.repeat,
                seed,
                setting: spec.settings[s].name.clone(),
                report,
            })
        })
        .collect()
}

/// Trains and evaluates every `(level, repeat)` cell. Repeat `r` uses seed
/// `seed + r` at every level so levels are compared on paired seeds. Levels
/// whose training depends on the setting train once per setting.
pub fn sweep<T: Real>(
    axis: AblationAxis,
    levels: Vec<GridLevel>,
    spec: &SweepSpec,
    split: &Split,
) -> Result<AblationGrid> {
    if spec.settings.is_empty() {
        return Err(Error::config("sweep needs at least one failure setting"));
    }
    if spec.repeats == 0 {
        return Err(Error::config("repeats must be >= 1"));
    }
    let mut jobs = Vec::new();
    for (li, level) in levels.iter().enumerate() {
        for repeat in 0..spec.repeats {
            if level.value.per_setting() {
                jobs.extend((0..spec.settings.len()).map(|s| Job {
                    level: li,
                    repeat,
                    setting: Some(s),
                }));
            } else {
                jobs.push(Job {
                    level: li,
                    repeat,
                    setting: None,
                });
            }
        }
    }
    let exec = |job: &Job| run_job::<T>(spec, &levels[job.level], job, split);
    let results: Vec<Vec<GridCell>> = if spec.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::Usage(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(exec).collect::<Result<Vec<_>>>())?
    } else {
        jobs.iter().map(exec).collect::<Result<Vec<_>>>()?
    };

    let setting_pos = |name: &str| spec.settings.iter().position(|s| s.name == name).unwrap_or(usize::MAX);
    let level_pos = |label: &str| levels.iter().position(|l| l.label == label).unwrap_or(usize::MAX);
    let mut cells: Vec<GridCell> = results.into_iter().flatten().collect();
    cells.sort_by_key(|c| (level_pos(&c.level), c.repeat, setting_pos(&c.setting)));
    Ok(AblationGrid {
        axis,
        levels,
        repeats: spec.repeats,
        cells,
    })
}

impl AblationGrid {
    /// Mean expected accuracy of one level under one setting, over repeats.
    pub fn mean_expected(&self, level: &str, setting: &str) -> Option<f64> {
        let v: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.level == level && c.setting == setting)
            .map(|c| c.report.expected_accuracy)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Population standard deviation of the per-level means under `setting`.
    pub fn std_across_levels(&self, setting: &str) -> Option<f64> {
        let means: Vec<f64> = self
            .levels
            .iter()
            .filter_map(|l| self.mean_expected(&l.label, setting))
            .collect();
        if means.is_empty() {
            return None;
        }
        let m = means.iter().sum::<f64>() / means.len() as f64;
        Some((means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / means.len() as f64).sqrt())
    }
}
