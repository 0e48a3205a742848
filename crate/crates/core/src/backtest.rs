//! Rolling-window model grid, per-group DEA rankings and best-model selection.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cov_shrinkage::{applicable_kinds, CovEstimate, CovKind, SampleMoments};
use crate::dea::{build_instance, rank_all, super_efficiency, EfficiencyScore, Group, ScoreStatus};
use crate::market_data::{ReturnsMatrix, WindowPlan};
use crate::mean_shrinkage::{estimate_mean, BopEpsilon, MeanEstimate, MeanKind};
use crate::metrics::{compute_metrics, MetricVector, OosSeries};
use crate::portfolio_opt::{
    gmv_weights, mv_weights, solve_cvar, solve_gmv, solve_minimax, solve_mv, solve_smad,
    ModelParams, ModelSpec,
};
use crate::{Error, Result};

pub const DEFAULT_TOP_K: usize = 10;

/// Which estimators and models a grid run covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub mean_kinds: Vec<MeanKind>,
    pub cov_kinds: Vec<CovKind>,
    pub params: ModelParams,
    pub bop_epsilon: BopEpsilon,
    /// Also run the five benchmark models.
    pub benchmarks: bool,
}

impl GridSpec {
    /// All mean kinds and every covariance kind applicable at `c = p/n`.
    pub fn full(concentration: f64, params: ModelParams, bop_epsilon: BopEpsilon) -> Self {
        Self {
            mean_kinds: MeanKind::ALL.to_vec(),
            cov_kinds: applicable_kinds(concentration),
            params,
            bop_epsilon,
            benchmarks: true,
        }
    }

    /// MV models for every (cov, mean) pair, then GMV for every cov kind.
    pub fn grid_models(&self) -> Vec<ModelSpec> {
        let mv = self.cov_kinds.iter().flat_map(|&cov| {
            self.mean_kinds
                .iter()
                .map(move |&mean| ModelSpec::Mv { cov, mean })
        });
        let gmv = self.cov_kinds.iter().map(|&cov| ModelSpec::Gmv { cov });
        mv.chain(gmv).collect()
    }

    pub fn models(&self) -> Vec<ModelSpec> {
        let mut models = self.grid_models();
        if self.benchmarks {
            models.extend(ModelSpec::BENCHMARKS);
        }
        models
    }
}

/// Concatenated out-of-sample record of every model under one window plan.
#[derive(Debug, Clone)]
pub struct SettingResult {
    pub plan: WindowPlan,
    pub series: BTreeMap<String, OosSeries>,
    /// Models that failed on some window, with the first reason.
    pub failures: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub dataset: String,
    pub n_assets: usize,
    pub n_obs: usize,
    pub spec: GridSpec,
    pub settings: Vec<SettingResult>,
}

impl GridResult {
    pub fn grid_tags(&self) -> Vec<String> {
        self.spec.grid_models().iter().map(ModelSpec::tag).collect()
    }
}

/// Runs every model of `spec` on every window of every plan.
pub fn run_grid(
    dataset: &str,
    returns: &ReturnsMatrix,
    plans: &[WindowPlan],
    spec: &GridSpec,
) -> Result<GridResult> {
    if plans.is_empty() {
        return Err(Error::InvalidParameter("no out-of-sample settings".into()));
    }
    let models = spec.models();
    if models.is_empty() {
        return Err(Error::InvalidParameter("empty model grid".into()));
    }
    spec.params.validate()?;
    let n_obs = returns.n_obs();
    for plan in plans {
        if let Some(w) = plan.windows.iter().find(|w| w.outsample.end > n_obs) {
            return Err(Error::InsufficientData {
                required: w.outsample.end,
                actual: n_obs,
            });
        }
    }

    let settings = plans
        .iter()
        .map(|plan| {
            let per_window: Vec<Vec<std::result::Result<DVector<f64>, String>>> = plan
                .windows
                .par_iter()
                .map(|w| solve_window(&returns.slice(&w.insample), &models, spec))
                .collect();
            let mut series = BTreeMap::new();
            let mut failures = BTreeMap::new();
            for (m, model) in models.iter().enumerate() {
                let tag = model.tag();
                let mut oos = OosSeries::default();
                let mut failed = None;
                for (k, w) in plan.windows.iter().enumerate() {
                    match &per_window[k][m] {
                        Ok(weights) => oos.push_window(weights, &returns.slice(&w.outsample))?,
                        Err(reason) => {
                            failed = Some(format!("window {k}: {reason}"));
                            break;
                        }
                    }
                }
                match failed {
                    Some(reason) => {
                        log::warn!(
                            "{dataset}: {tag} excluded at oos={}: {reason}",
                            plan.outsample_len
                        );
                        failures.insert(tag, reason);
                    }
                    None => {
                        series.insert(tag, oos);
                    }
                }
            }
            Ok(SettingResult {
                plan: plan.clone(),
                series,
                failures,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(GridResult {
        dataset: dataset.to_string(),
        n_assets: returns.n_assets(),
        n_obs,
        spec: spec.clone(),
        settings,
    })
}

/// Estimates once per window, then solves every model. Failures are
/// reported per model so one bad estimator does not sink the window.
fn solve_window(
    insample: &DMatrix<f64>,
    models: &[ModelSpec],
    spec: &GridSpec,
) -> Vec<std::result::Result<DVector<f64>, String>> {
    let moments = match SampleMoments::new(insample) {
        Ok(m) => m,
        Err(e) => return vec![Err(e.to_string()); models.len()],
    };
    let needs_mean = models.iter().any(|m| matches!(m, ModelSpec::Mv { .. }));
    let means: BTreeMap<MeanKind, Result<MeanEstimate>> = if needs_mean {
        spec.mean_kinds
            .iter()
            .map(|&k| (k, estimate_mean(k, &moments, spec.bop_epsilon)))
            .collect()
    } else {
        BTreeMap::new()
    };
    let covs: BTreeMap<CovKind, Result<CovEstimate>> = spec
        .cov_kinds
        .iter()
        .map(|&k| (k, moments.estimate(k)))
        .collect();

    let lookup = |kind: CovKind| -> std::result::Result<&CovEstimate, String> {
        match covs.get(&kind) {
            Some(Ok(c)) => Ok(c),
            Some(Err(e)) => Err(format!("{kind}: {e}")),
            None => Err(format!("{kind} not in grid")),
        }
    };
    let gamma = spec.params.gamma;
    models
        .iter()
        .map(|model| {
            let solved = match *model {
                ModelSpec::Mv { cov, mean } => {
                    let sigma = lookup(cov)?;
                    let mu = match means.get(&mean) {
                        Some(Ok(m)) => m,
                        Some(Err(e)) => return Err(format!("{mean}: {e}")),
                        None => return Err(format!("{mean} not in grid")),
                    };
                    solve_mv(mu, sigma, gamma)
                }
                ModelSpec::Gmv { cov } => solve_gmv(lookup(cov)?),
                ModelSpec::ClassicalMv => {
                    mv_weights(&moments.means, &moments.cov, gamma, model.tag())
                }
                ModelSpec::ClassicalGmv => gmv_weights(&moments.cov, model.tag()),
                ModelSpec::Smad => solve_smad(insample),
                ModelSpec::Cvar => solve_cvar(insample, spec.params.alpha_cvar),
                ModelSpec::Minimax => solve_minimax(insample),
            };
            solved.map(|p| p.weights).map_err(|e| e.to_string())
        })
        .collect()
}

/// Metrics for every surviving model of one setting.
pub fn setting_metrics(setting: &SettingResult) -> Result<BTreeMap<String, MetricVector>> {
    setting
        .series
        .iter()
        .map(|(tag, s)| compute_metrics(s).map(|m| (tag.clone(), m)))
        .collect()
}

/// Super-efficiency ranking of the given models under one group.
pub fn rank_models(
    metrics: &BTreeMap<String, MetricVector>,
    tags: &[String],
    group: Group,
) -> Result<Vec<EfficiencyScore>> {
    let rows: Vec<(String, MetricVector)> = tags
        .iter()
        .filter_map(|t| metrics.get(t).map(|m| (t.clone(), *m)))
        .collect();
    rank_all(&build_instance(&rows, group)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketBest {
    pub tag: String,
    /// Geometric mean of the tag's scores across the settings.
    pub gm: f64,
    /// No model made every top-k list; picked by GM over all models.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalBest {
    pub tag: String,
    /// Number of datasets where the tag was market best.
    pub markets: usize,
    pub mean_gm: f64,
}

/// Geometric mean over the finite scores; `None` if there are none.
pub fn geometric_mean(scores: &[f64]) -> Option<f64> {
    let finite: Vec<f64> = scores
        .iter()
        .copied()
        .filter(|s| s.is_finite() && *s > 0.0)
        .collect();
    if finite.len() < scores.len() {
        log::warn!("non-finite efficiency score excluded from geometric mean");
    }
    if finite.is_empty() {
        return None;
    }
    Some((finite.iter().map(|s| s.ln()).sum::<f64>() / finite.len() as f64).exp())
}

/// Per-tag GM across settings; only tags scored in every setting are kept.
pub fn gm_scores(rankings: &[Vec<EfficiencyScore>]) -> BTreeMap<String, f64> {
    let mut by_tag: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for ranking in rankings {
        for s in ranking {
            by_tag.entry(&s.dmu_tag).or_default().push(s.score);
        }
    }
    by_tag
        .into_iter()
        .filter(|(_, v)| v.len() == rankings.len())
        .filter_map(|(t, v)| geometric_mean(&v).map(|g| (t.to_string(), g)))
        .collect()
}

pub fn top_k(ranking: &[EfficiencyScore], k: usize) -> Vec<String> {
    ranking.iter().take(k).map(|s| s.dmu_tag.clone()).collect()
}

/// Highest-GM model among those in every setting's top-k list, falling back
/// to the highest GM overall. Ties go to the smaller tag.
pub fn select_market_best(
    rankings: &[Vec<EfficiencyScore>],
    gm: &BTreeMap<String, f64>,
    k: usize,
) -> Option<MarketBest> {
    let lists: Vec<BTreeSet<String>> = rankings
        .iter()
        .map(|r| top_k(r, k).into_iter().collect())
        .collect();
    let in_all = |t: &str| lists.iter().all(|l| l.contains(t));
    let best_of = |pred: &dyn Fn(&str) -> bool| {
        gm.iter().filter(|(t, _)| pred(t)).fold(
            None::<(&String, f64)>,
            |best, (t, &g)| match best {
                Some((_, bg)) if bg >= g => best,
                _ => Some((t, g)),
            },
        )
    };
    if let Some((tag, g)) = best_of(&|t| in_all(t)) {
        return Some(MarketBest {
            tag: tag.clone(),
            gm: g,
            fallback: false,
        });
    }
    best_of(&|_| true).map(|(tag, g)| {
        log::warn!("no model in every top-{k} list; falling back to highest GM ({tag})");
        MarketBest {
            tag: tag.clone(),
            gm: g,
            fallback: true,
        }
    })
}

/// Modal market-best tag; ties by higher mean GM, then smaller tag.
pub fn select_universal_best(market_bests: &[MarketBest]) -> Option<UniversalBest> {
    let mut tally: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for mb in market_bests {
        let e = tally.entry(&mb.tag).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += mb.gm;
    }
    tally
        .into_iter()
        .map(|(t, (count, sum))| UniversalBest {
            tag: t.to_string(),
            markets: count,
            mean_gm: sum / count as f64,
        })
        .fold(None, |best: Option<UniversalBest>, cand| match best {
            Some(b)
                if b.markets > cand.markets
                    || (b.markets == cand.markets && b.mean_gm >= cand.mean_gm) =>
            {
                Some(b)
            }
            _ => Some(cand),
        })
}

/// Column order of the benchmark comparison table.
pub const BENCHMARK_COLUMNS: [&str; 5] = ["MV", "CVaR", "SMAD", "MM", "GMV"];

/// Selected portfolios for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupChoice {
    pub group: Group,
    pub market: String,
    pub universal: String,
}

/// One row per scored group; columns are the benchmarks followed by
/// `"{group} Market"` / `"{group} Universal"` for every choice.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub columns: Vec<String>,
    pub rows: Vec<(Group, Vec<f64>)>,
    pub pool: Vec<String>,
}

/// Scores the 5 benchmarks together with the distinct selected portfolios.
pub fn compare_benchmarks(
    metrics: &BTreeMap<String, MetricVector>,
    choices: &[GroupChoice],
    groups: &[Group],
) -> Result<ComparisonTable> {
    let mut pool: Vec<String> = BENCHMARK_COLUMNS.iter().map(|s| s.to_string()).collect();
    for c in choices {
        for tag in [&c.market, &c.universal] {
            if !pool.contains(tag) {
                pool.push(tag.clone());
            }
        }
    }
    let rows: Vec<(String, MetricVector)> = pool
        .iter()
        .map(|t| {
            metrics
                .get(t)
                .map(|m| (t.clone(), *m))
                .ok_or_else(|| Error::InvalidParameter(format!("no metrics for '{t}'")))
        })
        .collect::<Result<_>>()?;

    let mut columns: Vec<(String, String)> = BENCHMARK_COLUMNS
        .iter()
        .map(|s| (s.to_string(), s.to_string()))
        .collect();
    for c in choices {
        columns.push((format!("{} Market", c.group), c.market.clone()));
        columns.push((format!("{} Universal", c.group), c.universal.clone()));
    }

    let mut table_rows = Vec::new();
    for &group in groups {
        let instance = build_instance(&rows, group)?;
        let scores: BTreeMap<String, f64> = (0..instance.len())
            .into_par_iter()
            .map(|i| super_efficiency(&instance, i).map(|s| (s.dmu_tag, s.score)))
            .collect::<Result<_>>()?;
        table_rows.push((group, columns.iter().map(|(_, tag)| scores[tag]).collect()));
    }
    Ok(ComparisonTable {
        columns: columns.into_iter().map(|(name, _)| name).collect(),
        rows: table_rows,
        pool,
    })
}

/// Rankings and top lists of one dataset, keyed by group then setting index.
#[derive(Debug, Clone)]
pub struct DatasetRanking {
    pub dataset: String,
    pub outsample_lens: Vec<usize>,
    pub rankings: BTreeMap<Group, Vec<Vec<EfficiencyScore>>>,
    pub market_best: BTreeMap<Group, MarketBest>,
    pub gm: BTreeMap<Group, BTreeMap<String, f64>>,
}

/// Metrics of one dataset for every setting, plus the grid's model tags.
#[derive(Debug, Clone)]
pub struct DatasetMetrics {
    pub dataset: String,
    pub outsample_lens: Vec<usize>,
    pub grid_tags: Vec<String>,
    pub metrics: Vec<BTreeMap<String, MetricVector>>,
}

impl DatasetMetrics {
    pub fn from_grid(grid: &GridResult) -> Result<Self> {
        Ok(Self {
            dataset: grid.dataset.clone(),
            outsample_lens: grid.settings.iter().map(|s| s.plan.outsample_len).collect(),
            grid_tags: grid.grid_tags(),
            metrics: grid
                .settings
                .iter()
                .map(setting_metrics)
                .collect::<Result<_>>()?,
        })
    }
}

pub fn rank_dataset(data: &DatasetMetrics, groups: &[Group], k: usize) -> Result<DatasetRanking> {
    let mut rankings = BTreeMap::new();
    let mut market_best = BTreeMap::new();
    let mut gms = BTreeMap::new();
    for &group in groups {
        let per_setting = data
            .metrics
            .iter()
            .map(|m| rank_models(m, &data.grid_tags, group))
            .collect::<Result<Vec<_>>>()?;
        for (ranking, oos) in per_setting.iter().zip(&data.outsample_lens) {
            if let Some(s) = ranking.iter().find(|s| s.status == ScoreStatus::Unbounded) {
                log::warn!(
                    "{}: unbounded score for {} (group {group}, oos {oos})",
                    data.dataset,
                    s.dmu_tag
                );
            }
        }
        let gm = gm_scores(&per_setting);
        if let Some(best) = select_market_best(&per_setting, &gm, k) {
            market_best.insert(group, best);
        }
        gms.insert(group, gm);
        rankings.insert(group, per_setting);
    }
    Ok(DatasetRanking {
        dataset: data.dataset.clone(),
        outsample_lens: data.outsample_lens.clone(),
        rankings,
        market_best,
        gm: gms,
    })
}

/// Everything downstream of the metrics: rankings, selections and the
/// benchmark comparison for every dataset and setting.
#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub groups: Vec<Group>,
    pub datasets: Vec<DatasetRanking>,
    pub universal: BTreeMap<Group, UniversalBest>,
    /// `(dataset, outsample_len)` → comparison table.
    pub comparisons: BTreeMap<(String, usize), ComparisonTable>,
}

pub fn select_and_compare(
    data: &[DatasetMetrics],
    groups: &[Group],
    k: usize,
) -> Result<SelectionReport> {
    if data.is_empty() {
        return Err(Error::InvalidParameter("no datasets".into()));
    }
    let datasets = data
        .iter()
        .map(|d| rank_dataset(d, groups, k))
        .collect::<Result<Vec<_>>>()?;
    let mut universal = BTreeMap::new();
    for &group in groups {
        let bests: Vec<MarketBest> = datasets
            .iter()
            .filter_map(|d| d.market_best.get(&group).cloned())
            .collect();
        if let Some(u) = select_universal_best(&bests) {
            universal.insert(group, u);
        }
    }
    let mut comparisons = BTreeMap::new();
    for (d, ranking) in data.iter().zip(&datasets) {
        let choices: Vec<GroupChoice> = groups
            .iter()
            .filter_map(|g| {
                Some(GroupChoice {
                    group: *g,
                    market: ranking.market_best.get(g)?.tag.clone(),
                    universal: universal.get(g)?.tag.clone(),
                })
            })
            .collect();
        for (metrics, &oos) in d.metrics.iter().zip(&d.outsample_lens) {
            let table = compare_benchmarks(metrics, &choices, groups)?;
            comparisons.insert((d.dataset.clone(), oos), table);
        }
    }
    Ok(SelectionReport {
        groups: groups.to_vec(),
        datasets,
        universal,
        comparisons,
    })
}
