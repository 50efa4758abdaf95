//! Feature ranking scores: permutation (any model), GENIE3 and Symbolic
//! (tree ensembles), optionally restricted to a time-interval subset of the
//! examples, with category rollups and top-k lists.
//!
//! Sign convention: permutation scores are relative error increases and can
//! be slightly negative by chance; the tree scores are non-negative.

pub mod permutation;
pub mod summary;
pub mod trees;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use permutation::permutation_scores;
pub use summary::{summarize, CategoryRollup, RankedFeature, Summary};
pub use trees::{genie3_scores, symbolic_scores};

use crate::dataset::{Dataset, Interval};
use crate::error::{Error, Result};
use crate::learners::TrainedModel;
use crate::scalar::Scalar;

pub const IMPORTANCE_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TOP_K: usize = 10;
pub const DEFAULT_REPEATS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Permutation,
    Genie3,
    Symbolic,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 3] = [ScoreKind::Permutation, ScoreKind::Genie3, ScoreKind::Symbolic];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Permutation => "permutation",
            ScoreKind::Genie3 => "genie3",
            ScoreKind::Symbolic => "symbolic",
        }
    }

    pub fn requires_trees(self) -> bool {
        !matches!(self, ScoreKind::Permutation)
    }
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScoreKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown score kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceConfig {
    /// Scores to compute; tree-only scores are skipped for other learners.
    pub kinds: Vec<ScoreKind>,
    pub repeats: usize,
    pub top_k: usize,
    /// Permutation seed; the model seed when absent.
    pub seed: Option<u64>,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        ImportanceConfig {
            kinds: ScoreKind::ALL.to_vec(),
            repeats: DEFAULT_REPEATS,
            top_k: DEFAULT_TOP_K,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub schema_version: u32,
    pub score_kind: ScoreKind,
    /// Row filter; `None` means every row.
    pub subset: Option<Interval>,
    pub n_rows: usize,
    pub per_target: BTreeMap<String, BTreeMap<String, f64>>,
    /// Mean over targets.
    pub aggregate: BTreeMap<String, f64>,
    pub categories: CategoryRollup,
    pub top_k: Summary,
}

impl ImportanceReport {
    pub fn aggregate_score(&self, feature: &str) -> f64 {
        self.aggregate.get(feature).copied().unwrap_or(0.0)
    }

    /// Features ordered by descending aggregate score, ties by name.
    pub fn ranking(&self) -> Vec<String> {
        let mut v: Vec<(&String, f64)> = self.aggregate.iter().map(|(k, v)| (k, *v)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v.into_iter().map(|(k, _)| k.clone()).collect()
    }
}

/// Assembles a report from raw per-target scores (`scores[target][feature]`).
pub fn assemble(
    kind: ScoreKind,
    subset: Option<Interval>,
    n_rows: usize,
    features: &[String],
    targets: &[String],
    categories: &BTreeMap<String, String>,
    scores: &[Vec<f64>],
    top_k: usize,
) -> Result<ImportanceReport> {
    let per_target: BTreeMap<String, BTreeMap<String, f64>> = targets
        .iter()
        .zip(scores)
        .map(|(t, s)| (t.clone(), features.iter().cloned().zip(s.iter().copied()).collect()))
        .collect();
    let tn = targets.len() as f64;
    let aggregate: BTreeMap<String, f64> = features
        .iter()
        .enumerate()
        .map(|(j, f)| (f.clone(), scores.iter().map(|s| s[j]).sum::<f64>() / tn))
        .collect();
    if let Some((f, _)) = aggregate.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite importance for `{f}`")));
    }
    let (rollup, top) = summarize(&per_target, &aggregate, categories, top_k)?;
    Ok(ImportanceReport {
        schema_version: IMPORTANCE_SCHEMA_VERSION,
        score_kind: kind,
        subset,
        n_rows,
        per_target,
        aggregate,
        categories: rollup,
        top_k: top,
    })
}

/// Computes one score over the rows of `ds` inside `subset`.
pub fn compute<T: Scalar>(
    model: &TrainedModel<T>,
    ds: &Dataset<T>,
    kind: ScoreKind,
    subset: Option<Interval>,
    cfg: &ImportanceConfig,
) -> Result<ImportanceReport> {
    if kind.requires_trees() && !model.spec.learner.is_tree_ensemble() {
        return Err(Error::RequiresTreeEnsemble);
    }
    if ds.targets != model.target_names {
        return Err(Error::invalid("dataset targets do not match the model"));
    }
    let rows = ds.rows_within(subset);
    if rows.is_empty() {
        return Err(Error::Empty("importance subset selects no rows".into()));
    }
    let sub = ds.select_rows(&rows);
    let scores = match kind {
        ScoreKind::Permutation => {
            permutation_scores(model, &sub, cfg.repeats, cfg.seed.unwrap_or(model.spec.seed))?
        }
        ScoreKind::Genie3 => genie3_scores(model, &sub)?,
        ScoreKind::Symbolic => symbolic_scores(model, &sub)?,
    };
    let cats: BTreeMap<String, String> = ds
        .features
        .iter()
        .map(|f| (f.name.clone(), f.category.clone()))
        .collect();
    assemble(
        kind,
        subset,
        rows.len(),
        &model.feature_names,
        &model.target_names,
        &cats,
        &scores,
        cfg.top_k,
    )
}
