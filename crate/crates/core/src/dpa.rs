//! Partition aggregation: hash-partitioned training, majority-vote
//! prediction, and the pointwise robustness certificate.
//!
//! Inserting or removing one training sample changes exactly one partition,
//! hence at most one vote. The certificate converts the vote margin into the
//! largest attack size that provably cannot change the prediction:
//!
//!   bound = (k/2) * (share(y0) - max_{y != y0} (share(y) + [y < y0]/k))
//!
//! with k partitions and vote shares counted over deterministic base
//! classifiers. Abstain votes belong to no class and only shrink the margin.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::data::{Dataset, InputPoint, Label, LabeledSample};
use crate::learner::{Classifier, Learner, Prediction};
use crate::rng::fnv1a_64;

#[derive(Debug, Error, PartialEq)]
pub enum DpaError {
    #[error("number of partitions must be at least 1, got {0}")]
    NoPartitions(usize),
    #[error("profile needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("votes plus abstains ({0}) must equal the partition count ({1})")]
    VoteConservation(usize, usize),
    #[error("prediction {prediction} does not match the profile's winner {winner}")]
    PredictionMismatch { prediction: Label, winner: Label },
}

/// FNV-1a over the sample's canonical bytes, reduced mod the partition
/// count. Bit-exact across platforms.
pub fn fnv_partition_hash(bytes: &[u8], k_part: usize) -> usize {
    assert!(k_part >= 1, "fnv_partition_hash: k_part must be at least 1");
    (fnv1a_64(bytes) % k_part as u64) as usize
}

/// Deterministic assignment of samples to partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionPlan {
    k_part: usize,
}

impl PartitionPlan {
    pub fn new(k_part: usize) -> Result<Self, DpaError> {
        if k_part < 1 {
            return Err(DpaError::NoPartitions(k_part));
        }
        Ok(PartitionPlan { k_part })
    }

    pub fn k_part(&self) -> usize {
        self.k_part
    }

    pub fn index_of(&self, sample: &LabeledSample) -> usize {
        fnv_partition_hash(&sample.canonical_bytes(), self.k_part)
    }
}

/// Splits the dataset into k_part disjoint multisets whose union is the
/// input; identical samples always share a partition.
pub fn partition(data: &Dataset, plan: &PartitionPlan) -> Vec<Dataset> {
    let mut parts = vec![Dataset::new(); plan.k_part];
    for (sample, count) in data.entries() {
        parts[plan.index_of(sample)].insert_n(sample.clone(), count);
    }
    parts
}

/// Per-class vote counts from one aggregate prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoteProfile {
    pub k_part: usize,
    pub num_classes: usize,
    /// Raw vote counts; classes with zero votes are omitted.
    pub votes: BTreeMap<Label, usize>,
    pub abstains: usize,
}

impl VoteProfile {
    pub fn from_counts(
        k_part: usize,
        num_classes: usize,
        votes: &[(usize, usize)],
        abstains: usize,
    ) -> Result<Self, DpaError> {
        if num_classes < 2 {
            return Err(DpaError::TooFewClasses(num_classes));
        }
        let votes: BTreeMap<Label, usize> = votes
            .iter()
            .filter(|&&(_, c)| c > 0)
            .map(|&(y, c)| (Label(y), c))
            .collect();
        let total = votes.values().sum::<usize>() + abstains;
        if total != k_part {
            return Err(DpaError::VoteConservation(total, k_part));
        }
        Ok(VoteProfile {
            k_part,
            num_classes,
            votes,
            abstains,
        })
    }

    pub fn count(&self, y: Label) -> usize {
        self.votes.get(&y).copied().unwrap_or(0)
    }

    /// Normalized vote share for a class.
    pub fn share(&self, y: Label) -> f64 {
        self.count(y) as f64 / self.k_part as f64
    }

    /// The aggregate's prediction: highest count, ties to the smaller label
    /// index; label 0 when every partition abstained.
    pub fn winner(&self) -> Label {
        let mut best = (Label(0), 0usize);
        for (&y, &c) in &self.votes {
            if c > best.1 {
                best = (y, c);
            }
        }
        best.0
    }
}

/// Tallies one prediction per partition into the winner and its profile.
fn aggregate_votes(
    predictions: impl IntoIterator<Item = Prediction>,
    num_classes: usize,
) -> (Label, VoteProfile) {
    let mut votes: BTreeMap<Label, usize> = BTreeMap::new();
    let mut abstains = 0usize;
    let mut k_part = 0usize;
    for p in predictions {
        k_part += 1;
        match p {
            Prediction::Class(y) => *votes.entry(y).or_insert(0) += 1,
            Prediction::Abstain => abstains += 1,
        }
    }
    let profile = VoteProfile {
        k_part,
        num_classes,
        votes,
        abstains,
    };
    (profile.winner(), profile)
}

/// A fitted ensemble of per-partition base classifiers, reusable across
/// queries.
#[derive(Debug, Clone)]
pub struct DpaModel {
    plan: PartitionPlan,
    num_classes: usize,
    classifiers: Vec<Classifier>,
}

impl DpaModel {
    /// Trains one base classifier per partition, empty partitions included.
    pub fn fit(data: &Dataset, plan: &PartitionPlan, base: &Learner) -> DpaModel {
        let classifiers = partition(data, plan)
            .iter()
            .map(|p| base.train(p))
            .collect();
        DpaModel {
            plan: *plan,
            num_classes: base.label_count(),
            classifiers,
        }
    }

    pub fn plan(&self) -> &PartitionPlan {
        &self.plan
    }

    /// Majority vote over derandomized base predictions. The aggregate never
    /// abstains: abstain votes are excluded from every class count, and when
    /// all partitions abstain the prediction is label 0.
    pub fn predict(&self, x0: &InputPoint) -> (Label, VoteProfile) {
        aggregate_votes(
            self.classifiers.iter().map(|c| c.classify_det(x0)),
            self.num_classes,
        )
    }
}

/// One-shot partition-train-vote prediction.
pub fn dpa_predict(
    data: &Dataset,
    plan: &PartitionPlan,
    base: &Learner,
    x0: &InputPoint,
) -> (Label, VoteProfile) {
    DpaModel::fit(data, plan, base).predict(x0)
}

/// A pointwise robustness guarantee: any attack of at most `certified_size`
/// insertions plus removals leaves the prediction unchanged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub prediction: Label,
    pub certified_size: usize,
    pub raw_bound: f64,
}

impl Certificate {
    /// The external JSON form, including the profile it was computed from.
    pub fn to_json(&self, profile: &VoteProfile) -> serde_json::Value {
        let votes: serde_json::Map<String, serde_json::Value> = profile
            .votes
            .iter()
            .map(|(y, &c)| (y.to_string(), serde_json::Value::from(c)))
            .collect();
        serde_json::json!({
            "prediction": self.prediction.0,
            "certified_size": self.certified_size,
            "raw_bound": self.raw_bound,
            "k_part": profile.k_part,
            "votes": votes,
            "abstains": profile.abstains,
        })
    }
}

/// Computes the certificate for a completed prediction. The margin
/// arithmetic is exact: with integer counts the bound is always a multiple
/// of 1/2, and the certified size is the largest integer at or below it
/// (the guarantee's inequality is non-strict).
pub fn dpa_certify(profile: &VoteProfile, prediction: Label) -> Result<Certificate, DpaError> {
    if profile.num_classes < 2 {
        return Err(DpaError::TooFewClasses(profile.num_classes));
    }
    let winner = profile.winner();
    if winner != prediction {
        return Err(DpaError::PredictionMismatch { prediction, winner });
    }
    let c0 = profile.count(prediction);
    // Every class in the label space competes, voteless ones included: a
    // smaller-indexed class wins ties, which costs it one extra unit here.
    let best_rival = (0..profile.num_classes)
        .filter(|&y| y != prediction.0)
        .map(|y| profile.count(Label(y)) + usize::from(y < prediction.0))
        .max()
        .expect("at least one rival class");
    let margin = c0 - best_rival.min(c0);
    debug_assert!(
        c0 >= best_rival,
        "winner must dominate every adjusted rival"
    );
    Ok(Certificate {
        prediction,
        certified_size: margin / 2,
        raw_bound: margin as f64 / 2.0,
    })
}
