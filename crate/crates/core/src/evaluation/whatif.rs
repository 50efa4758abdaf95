//! What-if runs: a child run repeats a base run with extra exclusions, and
//! the comparison reports metric and importance deltas (child minus base).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Exclusions, MetricReport, REPORT_SCHEMA_VERSION};
use crate::metafile::Metafile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfSpec {
    pub base_run: String,
    #[serde(default)]
    pub exclusions: Exclusions,
}

/// The parts of a finished run that a comparison needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: Option<String>,
    pub model_digest: String,
    pub metafile: Metafile,
    pub metrics: MetricReport,
    /// score kind -> feature -> aggregate score.
    pub importance: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub target: String,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema_version: u32,
    pub base: Option<String>,
    pub child: Option<String>,
    pub exclusions: Exclusions,
    pub metric_deltas: Vec<MetricDelta>,
    pub mean_rmse_delta: Option<f64>,
    /// score kind -> feature -> delta; features excluded in the child are absent.
    pub importance_deltas: BTreeMap<String, BTreeMap<String, f64>>,
    pub digests_match: bool,
}

fn sub(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

pub fn compare(base: &RunSummary, child: &RunSummary, exclusions: &Exclusions) -> Comparison {
    let metric_deltas = child
        .metrics
        .targets
        .iter()
        .filter_map(|c| {
            let b = base.metrics.target(&c.name)?;
            Some(MetricDelta {
                target: c.name.clone(),
                rmse: sub(c.rmse, b.rmse),
                mae: sub(c.mae, b.mae),
            })
        })
        .collect();
    let importance_deltas = child
        .importance
        .iter()
        .filter_map(|(kind, scores)| {
            let b = base.importance.get(kind)?;
            let d = scores
                .iter()
                .filter_map(|(f, v)| Some((f.clone(), v - b.get(f)?)))
                .collect();
            Some((kind.clone(), d))
        })
        .collect();
    Comparison {
        schema_version: REPORT_SCHEMA_VERSION,
        base: base.run_id.clone(),
        child: child.run_id.clone(),
        exclusions: exclusions.clone(),
        metric_deltas,
        mean_rmse_delta: sub(child.metrics.mean_rmse, base.metrics.mean_rmse),
        importance_deltas,
        digests_match: base.model_digest == child.model_digest,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::TargetMetrics;
    use crate::metafile::Stage;

    fn summary(id: &str, rmse: f64, imp: &[(&str, f64)]) -> RunSummary {
        RunSummary {
            run_id: Some(id.into()),
            model_digest: id.into(),
            metafile: Metafile::new(Stage::Run, "d"),
            metrics: MetricReport {
                schema_version: REPORT_SCHEMA_VERSION,
                targets: vec![TargetMetrics {
                    name: "t".into(),
                    count: 3,
                    rmse: Some(rmse),
                    mae: Some(rmse / 2.0),
                }],
                mean_rmse: Some(rmse),
                mean_mae: Some(rmse / 2.0),
            },
            importance: BTreeMap::from([(
                "permutation".to_string(),
                imp.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            )]),
        }
    }

    #[test]
    fn deltas_are_child_minus_base() {
        let b = summary("1", 1.0, &[("a", 0.5), ("b", 0.25)]);
        let c = summary("2", 1.5, &[("b", 0.75)]);
        let cmp = compare(&b, &c, &Exclusions::default());
        assert_eq!(cmp.metric_deltas[0].rmse, Some(0.5));
        assert_eq!(cmp.mean_rmse_delta, Some(0.5));
        assert_eq!(cmp.importance_deltas["permutation"], BTreeMap::from([("b".to_string(), 0.5)]));
        assert!(!cmp.digests_match);
        assert_eq!(cmp.base.as_deref(), Some("1"));
    }
}
