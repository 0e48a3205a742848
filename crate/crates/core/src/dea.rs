//! Output-oriented CCR super-efficiency over model performance profiles.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::MetricVector;
use crate::numerics::{solve_lp, LpProblem, LpStatus, Sense};
use crate::{Error, Result};

/// Every DEA cell is raised to at least this value.
pub const POSITIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    /// Risk inputs against return and ratio outputs.
    A,
    /// Unit input against return and ratio outputs.
    B,
    /// Risk inputs against a unit output.
    C,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::A, Group::B, Group::C];

    pub fn name(self) -> &'static str {
        match self {
            Group::A => "A",
            Group::B => "B",
            Group::C => "C",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Group::A),
            "B" | "b" => Ok(Group::B),
            "C" | "c" => Ok(Group::C),
            other => Err(Error::InvalidParameter(format!(
                "unknown DEA group '{other}'"
            ))),
        }
    }
}

/// `d` decision-making units with an `d×m` input and `d×s` output matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DeaInstance {
    pub inputs: DMatrix<f64>,
    pub outputs: DMatrix<f64>,
    pub dmu_tags: Vec<String>,
    pub group: Group,
}

impl DeaInstance {
    pub fn new(
        dmu_tags: Vec<String>,
        inputs: DMatrix<f64>,
        outputs: DMatrix<f64>,
        group: Group,
    ) -> Result<Self> {
        let d = dmu_tags.len();
        for m in [&inputs, &outputs] {
            if m.nrows() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: m.nrows(),
                });
            }
            if m.ncols() == 0 {
                return Err(Error::InvalidParameter(
                    "DEA needs at least one input and one output".into(),
                ));
            }
            if let Some(bad) = m.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidParameter(format!(
                    "DEA data must be positive and finite, found {bad}"
                )));
            }
        }
        Ok(Self {
            inputs,
            outputs,
            dmu_tags,
            group,
        })
    }

    pub fn len(&self) -> usize {
        self.dmu_tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dmu_tags.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreStatus {
    Optimal,
    /// No other unit bounds this one; the score is `+∞`.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyScore {
    pub dmu_tag: String,
    pub score: f64,
    pub status: ScoreStatus,
}

fn floored(v: f64) -> f64 {
    if v.is_finite() {
        v.max(POSITIVE_FLOOR)
    } else {
        POSITIVE_FLOOR
    }
}

/// Assembles the group's input/output matrices, flooring every cell.
pub fn build_instance(metrics: &[(String, MetricVector)], group: Group) -> Result<DeaInstance> {
    let d = metrics.len();
    if d < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            actual: d,
        });
    }
    let risks = |m: &MetricVector| [m.sd, m.var_05, m.cvar_05, m.dd, m.turnover];
    let rewards = |m: &MetricVector| {
        // ratio outputs require a positive mean
        let gate = |x: f64| if m.mean_return > 0.0 { x } else { f64::NAN };
        [
            m.mean_return,
            gate(m.mean_cvar_ratio),
            gate(m.sharpe),
            gate(m.sortino),
            gate(m.mean_var_ratio),
        ]
    };
    let (inputs, outputs) = match group {
        Group::A => (
            DMatrix::from_fn(d, 5, |j, k| floored(risks(&metrics[j].1)[k])),
            DMatrix::from_fn(d, 5, |j, r| floored(rewards(&metrics[j].1)[r])),
        ),
        Group::B => (
            DMatrix::from_element(d, 1, 1.0),
            DMatrix::from_fn(d, 5, |j, r| floored(rewards(&metrics[j].1)[r])),
        ),
        Group::C => (
            DMatrix::from_fn(d, 5, |j, k| floored(risks(&metrics[j].1)[k])),
            DMatrix::from_element(d, 1, 1.0),
        ),
    };
    let tags = metrics.iter().map(|(t, _)| t.clone()).collect();
    DeaInstance::new(tags, inputs, outputs, group)
}

/// Super-efficiency of unit `i` (unit `i` removed from the reference set).
pub fn super_efficiency(instance: &DeaInstance, i: usize) -> Result<EfficiencyScore> {
    efficiency_lp(instance, i, true)
}

/// Standard CCR efficiency of unit `i` (unit `i` kept in the reference set).
pub fn ccr_efficiency(instance: &DeaInstance, i: usize) -> Result<EfficiencyScore> {
    efficiency_lp(instance, i, false)
}

/// Variables `[u (s), v (m)]`: `max uᵀy_i` s.t. `uᵀy_j − vᵀw_j ≤ 0`, `vᵀw_i = 1`.
fn efficiency_lp(instance: &DeaInstance, i: usize, exclude_self: bool) -> Result<EfficiencyScore> {
    let d = instance.len();
    if i >= d {
        return Err(Error::InvalidParameter(format!(
            "DMU index {i} out of range for {d} units"
        )));
    }
    let s = instance.outputs.ncols();
    let m = instance.inputs.ncols();
    let objective: Vec<f64> = instance
        .outputs
        .row(i)
        .iter()
        .copied()
        .chain(std::iter::repeat_n(0.0, m))
        .collect();
    let mut lp = LpProblem::new(Sense::Maximize, objective);
    for j in (0..d).filter(|&j| !(exclude_self && j == i)) {
        let row = instance
            .outputs
            .row(j)
            .iter()
            .copied()
            .chain(instance.inputs.row(j).iter().map(|w| -w))
            .collect();
        lp.add_le(row, 0.0);
    }
    let norm = std::iter::repeat_n(0.0, s)
        .chain(instance.inputs.row(i).iter().copied())
        .collect();
    lp.add_eq(norm, 1.0);

    let sol = solve_lp(&lp)?;
    let tag = instance.dmu_tags[i].clone();
    match sol.status {
        LpStatus::Optimal => Ok(EfficiencyScore {
            dmu_tag: tag,
            score: sol.value,
            status: ScoreStatus::Optimal,
        }),
        LpStatus::Unbounded => {
            log::warn!("super-efficiency of {tag} is unbounded");
            Ok(EfficiencyScore {
                dmu_tag: tag,
                score: f64::INFINITY,
                status: ScoreStatus::Unbounded,
            })
        }
        LpStatus::Infeasible => Err(Error::Solver(format!("DEA LP for {tag} is infeasible"))),
    }
}

/// Scores every unit and sorts descending, ties by tag.
pub fn rank_all(instance: &DeaInstance) -> Result<Vec<EfficiencyScore>> {
    let mut scores = (0..instance.len())
        .into_par_iter()
        .map(|i| super_efficiency(instance, i))
        .collect::<Result<Vec<_>>>()?;
    sort_scores(&mut scores);
    Ok(scores)
}

pub fn sort_scores(scores: &mut [EfficiencyScore]) {
    scores.sort_by(|a, b| match b.score.total_cmp(&a.score) {
        Ordering::Equal => a.dmu_tag.cmp(&b.dmu_tag),
        other => other,
    });
}
