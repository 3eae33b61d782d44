//! Per-trial records and the RMSE / capture-rate table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::eval::suite::TrialSpec;
use crate::pipeline::Method;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub id: String,
    pub condition: String,
    pub method: Method,
    pub target_deg: f64,
    pub interferer_deg: Option<f64>,
    pub estimate_deg: Option<f64>,
    /// `|estimate − target|`.
    pub error_deg: Option<f64>,
    pub captured: bool,
    pub failure: Option<String>,
}

/// Closer to the interferer than to the target; an exact tie is not a
/// capture.
pub fn is_captured(estimate: f64, target: f64, interferer: Option<f64>) -> bool {
    interferer.is_some_and(|i| (estimate - i).abs() < (estimate - target).abs())
}

impl TrialRecord {
    pub fn new(
        trial: &TrialSpec,
        interferer: Option<f64>,
        estimate: Option<f64>,
        failure: Option<String>,
    ) -> Self {
        Self::from_parts(
            &trial.id,
            &trial.condition,
            trial.method,
            trial.target_angle,
            interferer,
            estimate,
            failure,
        )
    }

    pub fn from_parts(
        id: &str,
        condition: &str,
        method: Method,
        target: f64,
        interferer: Option<f64>,
        estimate: Option<f64>,
        failure: Option<String>,
    ) -> Self {
        TrialRecord {
            id: id.to_string(),
            condition: condition.to_string(),
            method,
            target_deg: target,
            interferer_deg: interferer,
            estimate_deg: estimate,
            error_deg: estimate.map(|e| (e - target).abs()),
            captured: estimate.is_some_and(|e| is_captured(e, target, interferer)),
            failure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMetrics {
    pub condition: String,
    pub method: Method,
    pub trials: usize,
    pub failures: usize,
    pub captured: usize,
    /// Percentage of completed trials captured by the interferer.
    pub p_s: f64,
    /// RMSE over completed trials that were not captured; `None` when
    /// there are none.
    pub rmse: Option<f64>,
}

/// `sqrt(mean(e²))`; `None` for an empty slice.
pub fn rmse(errors: &[f64]) -> Option<f64> {
    if errors.is_empty() {
        None
    } else {
        Some((errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub conditions: Vec<ConditionMetrics>,
    pub records: Vec<TrialRecord>,
}

impl MetricsTable {
    /// Aggregates per (condition, method). Records are sorted by condition,
    /// id and method so the table does not depend on execution order.
    pub fn from_records(mut records: Vec<TrialRecord>) -> Self {
        records.sort_by(|a, b| {
            (&a.condition, &a.id, a.method).cmp(&(&b.condition, &b.id, b.method))
        });
        let mut groups: BTreeMap<(String, Method), Vec<&TrialRecord>> = BTreeMap::new();
        for r in &records {
            groups.entry((r.condition.clone(), r.method)).or_default().push(r);
        }
        let conditions = groups
            .into_iter()
            .map(|((condition, method), rs)| {
                let done: Vec<&&TrialRecord> = rs.iter().filter(|r| r.estimate_deg.is_some()).collect();
                let captured = done.iter().filter(|r| r.captured).count();
                let errors: Vec<f64> = done
                    .iter()
                    .filter(|r| !r.captured)
                    .filter_map(|r| r.error_deg)
                    .collect();
                ConditionMetrics {
                    condition,
                    method,
                    trials: rs.len(),
                    failures: rs.len() - done.len(),
                    captured,
                    p_s: if done.is_empty() {
                        0.0
                    } else {
                        100.0 * captured as f64 / done.len() as f64
                    },
                    rmse: rmse(&errors),
                }
            })
            .collect();
        MetricsTable {
            conditions,
            records,
        }
    }

    pub fn get(&self, condition: &str, method: Method) -> Option<&ConditionMetrics> {
        self.conditions
            .iter()
            .find(|c| c.condition == condition && c.method == method)
    }
}
