use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::eval::{paired_t_test, EvalReport, Side};
use crate::{Error, Result};

/// Significance level for the `*` marker.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub individual: f64,
    pub joint: f64,
    /// `joint − individual`.
    pub delta: f64,
    /// Paired t statistic of joint over individual; absent with one unit.
    pub t: Option<f64>,
    pub p: Option<f64>,
    /// `p < 0.05` and the joint model is better.
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub side: Side,
    pub units: usize,
    pub metrics: Vec<MetricComparison>,
}

/// Pair two reports unit by unit and test every metric.
pub fn compare(joint: &EvalReport, individual: &EvalReport) -> Result<Comparison> {
    if joint.side != individual.side || joint.metrics != individual.metrics {
        return Err(Error::Parameter(format!(
            "cannot compare a {} report with a {} report",
            joint.side.name(),
            individual.side.name()
        )));
    }
    let a: BTreeSet<&str> = joint.units.iter().map(|u| u.unit.as_str()).collect();
    let b: BTreeSet<&str> = individual.units.iter().map(|u| u.unit.as_str()).collect();
    let diff: Vec<String> = a.symmetric_difference(&b).map(|s| s.to_string()).collect();
    if !diff.is_empty() || a.len() != joint.units.len() || b.len() != individual.units.len() {
        return Err(Error::Comparison(diff));
    }
    let other: HashMap<&str, &[f64]> = individual
        .units
        .iter()
        .map(|u| (u.unit.as_str(), u.values.as_slice()))
        .collect();
    let metrics = joint
        .metrics
        .iter()
        .enumerate()
        .map(|(k, metric)| {
            let ja: Vec<f64> = joint.units.iter().map(|u| u.values[k]).collect();
            let ia: Vec<f64> = joint.units.iter().map(|u| other[u.unit.as_str()][k]).collect();
            let (t, p) = if ja.len() >= 2 {
                let r = paired_t_test(&ja, &ia)?;
                (Some(r.t), Some(r.p))
            } else {
                (None, None)
            };
            let delta = joint.aggregates[k] - individual.aggregates[k];
            Ok(MetricComparison {
                metric: metric.clone(),
                individual: individual.aggregates[k],
                joint: joint.aggregates[k],
                delta,
                t,
                p,
                significant: delta > 0.0 && p.is_some_and(|p| p < SIGNIFICANCE_LEVEL),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Comparison {
        side: joint.side,
        units: joint.units.len(),
        metrics,
    })
}

const CELL: usize = 10;
const LABEL: usize = 21;

/// Two-row table, one column group per dataset, joint values marked `*`
/// when significant.
pub fn comparison_table(groups: &[(&str, &Comparison)]) -> String {
    let mut head = format!("{:<LABEL$}", "Method");
    let mut sub = " ".repeat(LABEL);
    let mut indiv = format!("{:<LABEL$}", "Individual Training");
    let mut joint = format!("{:<LABEL$}", "Joint Training");
    for (name, cmp) in groups {
        let width = CELL * cmp.metrics.len();
        let _ = write!(head, "{:<width$}", name);
        for m in &cmp.metrics {
            let _ = write!(sub, "{:<CELL$}", m.metric);
            let _ = write!(indiv, "{:<CELL$}", format!("{:.3}", m.individual));
            let mark = if m.significant { "*" } else { "" };
            let _ = write!(joint, "{:<CELL$}", format!("{:.3}{mark}", m.joint));
        }
    }
    [head, sub, indiv, joint]
        .iter()
        .map(|l| l.trim_end().to_string() + "\n")
        .collect()
}
