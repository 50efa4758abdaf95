use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Score sums per category, per target and over the aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRollup {
    pub per_target: BTreeMap<String, BTreeMap<String, f64>>,
    pub aggregate: BTreeMap<String, f64>,
}

impl CategoryRollup {
    /// One chart per target plus the aggregate.
    pub fn chart_count(&self) -> usize {
        self.per_target.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    pub category: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub k: usize,
    pub per_target: BTreeMap<String, Vec<RankedFeature>>,
    pub aggregate: Vec<RankedFeature>,
}

fn rollup(scores: &BTreeMap<String, f64>, categories: &BTreeMap<String, String>) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (f, s) in scores {
        *out.entry(categories[f].clone()).or_insert(0.0) += s;
    }
    out
}

fn top(scores: &BTreeMap<String, f64>, categories: &BTreeMap<String, String>, k: usize) -> Vec<RankedFeature> {
    let mut v: Vec<RankedFeature> = scores
        .iter()
        .map(|(f, s)| RankedFeature {
            name: f.clone(),
            category: categories[f].clone(),
            score: *s,
        })
        .collect();
    v.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.name.cmp(&b.name)));
    v.truncate(k);
    v
}

/// Category rollups and top-k lists (descending, ties by feature name).
pub fn summarize(
    per_target: &BTreeMap<String, BTreeMap<String, f64>>,
    aggregate: &BTreeMap<String, f64>,
    categories: &BTreeMap<String, String>,
    k: usize,
) -> Result<(CategoryRollup, Summary)> {
    if let Some(f) = aggregate.keys().find(|f| !categories.contains_key(*f)) {
        return Err(Error::invalid(format!("feature `{f}` has no category")));
    }
    let roll = CategoryRollup {
        per_target: per_target
            .iter()
            .map(|(t, s)| (t.clone(), rollup(s, categories)))
            .collect(),
        aggregate: rollup(aggregate, categories),
    };
    let summary = Summary {
        k,
        per_target: per_target
            .iter()
            .map(|(t, s)| (t.clone(), top(s, categories, k)))
            .collect(),
        aggregate: top(aggregate, categories, k),
    };
    Ok((roll, summary))
}
