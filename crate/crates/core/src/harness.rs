//! Measurement harness: clean sample complexity, lethal-dose measurement,
//! the inverse-proportionality scaling check, certified-accuracy curves, and
//! an exhaustive certificate soundness oracle.
//!
//! Every estimator takes an [`RngKey`] and derives one stream per trial, so
//! results are bit-identical across thread counts and run orders.

use rayon::prelude::*;
use serde::Serialize;

use thiserror::Error;

use crate::attack::{Attack, AttackError, AttackReport};
use crate::coupling::CouplingError;
use crate::data::{Dataset, InputPoint, Label, LabeledSample};
use crate::dpa::{dpa_certify, dpa_predict, DpaError, DpaModel, PartitionPlan};
use crate::learner::{Learner, Prediction};
use crate::rng::RngKey;
use crate::stats::{mean_sd, wilson_interval};
use crate::task::{BijectionTask, MemorizationTask, Task, TaskError};

const BRUTE_FORCE_MAX_UNIVERSE: usize = 12;
const BRUTE_FORCE_MAX_DATASET: usize = 10;
const BRUTE_FORCE_MAX_T: usize = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("at least 30 trials required, got {0}")]
    TooFewTrials(usize),
    #[error("tau must lie in ({low}, {high}), got {tau}")]
    TauOutOfRange { tau: f64, low: f64, high: f64 },
    #[error(
        "sample-complexity search exceeded the cap of {cap}: accuracy {best_p:.4} at n = {best_n} never reached tau = {tau}"
    )]
    SearchCapExceeded {
        cap: usize,
        tau: f64,
        best_n: usize,
        best_p: f64,
    },
    #[error("query input is invalid for the task: {0}")]
    BadQuery(#[from] TaskError),
    #[error("sample universe of {0} exceeds the enumeration limit of {1}")]
    UniverseTooLarge(usize, usize),
    #[error("dataset of {0} exceeds the enumeration limit of {1}")]
    DatasetTooLarge(usize, usize),
    #[error("t_max of {0} exceeds the enumeration limit of {1}")]
    TMaxTooLarge(usize, usize),
    #[error("empty parameter grid")]
    EmptyGrid,
    #[error("grid point {param}: {source}")]
    GridPoint {
        param: usize,
        source: Box<HarnessError>,
    },
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Dpa(#[from] DpaError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
}

/// A Monte Carlo accuracy estimate with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AccuracyEstimate {
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: usize,
    pub successes: usize,
}

impl AccuracyEstimate {
    fn from_counts(successes: usize, trials: usize) -> Self {
        let (ci_low, ci_high) = wilson_interval(successes, trials);
        AccuracyEstimate {
            p_hat: successes as f64 / trials as f64,
            ci_low,
            ci_high,
            trials,
            successes,
        }
    }
}

/// Pr[classifier trained on n clean samples predicts the ML label at x0],
/// estimated over independent sample-train-classify rounds.
pub fn estimate_accuracy(
    learner: &Learner,
    task: &Task,
    x0: &InputPoint,
    n: usize,
    trials: usize,
    key: RngKey,
) -> Result<AccuracyEstimate, HarnessError> {
    if trials < 30 {
        return Err(HarnessError::TooFewTrials(trials));
    }
    let y0 = task.ml_label(x0)?;
    let successes = (0..trials as u64)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = key.child(t).stream();
            let data = task.sample(n, &mut rng);
            let classifier = learner.train(&data);
            classifier.classify(x0, &mut rng) == Prediction::Class(y0)
        })
        .count();
    Ok(AccuracyEstimate::from_counts(successes, trials))
}

/// Task family selector for the closed-form sample-complexity lower bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundKind {
    Bijection { k: usize },
    Memorization { m: usize, k: usize },
}

/// Closed-form lower bound on the clean sample complexity n(tau):
///
///   bijection:     n >= ln(2 - 2 tau) / ln(1 - 2/k),     tau in (1/2, 1)
///   memorization:  n >= (ln(1 - tau) + ln(1 + 1/(k-1))) / ln(1 - 1/m),
///                                                        tau in (1/k, 1)
pub fn min_n_bound(kind: BoundKind, tau: f64) -> Result<f64, HarnessError> {
    match kind {
        BoundKind::Bijection { k } => {
            if !(tau > 0.5 && tau < 1.0) {
                return Err(HarnessError::TauOutOfRange {
                    tau,
                    low: 0.5,
                    high: 1.0,
                });
            }
            if k == 2 {
                // (1 - 2/k) = 0: a single sample already pins the bijection.
                return Ok(0.0);
            }
            Ok((2.0 - 2.0 * tau).ln() / (1.0 - 2.0 / k as f64).ln())
        }
        BoundKind::Memorization { m, k } => {
            let low = 1.0 / k as f64;
            if !(tau > low && tau < 1.0) {
                return Err(HarnessError::TauOutOfRange {
                    tau,
                    low,
                    high: 1.0,
                });
            }
            if m == 1 {
                return Ok(0.0);
            }
            Ok(((1.0 - tau).ln() + (1.0 + 1.0 / (k as f64 - 1.0)).ln())
                / (1.0 - 1.0 / m as f64).ln())
        }
    }
}

/// Outcome of the minimal-n search, with the probe trace for audit.
#[derive(Debug, Clone, Serialize)]
pub struct SampleComplexityResult {
    pub n_hat: usize,
    pub tau: f64,
    /// Matching closed-form lower bound, when the task family has one.
    pub bound_closed_form: Option<f64>,
    pub estimates: Vec<(usize, AccuracyEstimate)>,
}

/// Smallest n at which the estimated accuracy reaches tau, by exponential
/// then binary search on the point estimate. The decision rule is the point
/// estimate alone; its bias is O(CI width) around the threshold, which the
/// published acceptance windows absorb.
pub fn find_min_n(
    learner: &Learner,
    task: &Task,
    x0: &InputPoint,
    tau: f64,
    trials_per_n: usize,
    cap: usize,
    key: RngKey,
) -> Result<SampleComplexityResult, HarnessError> {
    let k = task.label_count() as f64;
    if !(tau > 1.0 / k && tau < 1.0) {
        return Err(HarnessError::TauOutOfRange {
            tau,
            low: 1.0 / k,
            high: 1.0,
        });
    }
    let mut trace: Vec<(usize, AccuracyEstimate)> = Vec::new();
    let probe = |n: usize, trace: &mut Vec<(usize, AccuracyEstimate)>| {
        let est = estimate_accuracy(learner, task, x0, n, trials_per_n, key.child(n as u64))?;
        trace.push((n, est));
        Ok::<f64, HarnessError>(est.p_hat)
    };

    let mut lo = 0usize; // largest n known (by point estimate) to miss tau
    let mut hi = 1usize;
    loop {
        if hi > cap {
            let (best_n, best) = trace
                .iter()
                .max_by(|a, b| a.1.p_hat.total_cmp(&b.1.p_hat))
                .map(|(n, e)| (*n, e.p_hat))
                .unwrap_or((0, 0.0));
            return Err(HarnessError::SearchCapExceeded {
                cap,
                tau,
                best_n,
                best_p: best,
            });
        }
        if probe(hi, &mut trace)? >= tau {
            break;
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if probe(mid, &mut trace)? >= tau {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let bound_closed_form = match task {
        Task::Bijection(t) => min_n_bound(BoundKind::Bijection { k: t.k() }, tau).ok(),
        Task::Memorization(t) => {
            min_n_bound(BoundKind::Memorization { m: t.m(), k: t.k() }, tau).ok()
        }
        Task::Gaussian(_) => None,
    };
    Ok(SampleComplexityResult {
        n_hat: hi,
        tau,
        bound_closed_form,
        estimates: trace,
    })
}

/// A defended prediction pipeline: the bare learner or partition aggregation
/// around a base learner.
#[derive(Debug, Clone)]
pub enum Defense {
    Plain(Learner),
    Dpa { base: Learner, plan: PartitionPlan },
}

impl Defense {
    pub fn name(&self) -> String {
        match self {
            Defense::Plain(l) => format!("plain:{}", l.name()),
            Defense::Dpa { base, plan } => format!("dpa(k={}):{}", plan.k_part(), base.name()),
        }
    }

    pub fn classify(
        &self,
        data: &Dataset,
        x0: &InputPoint,
        rng: &mut crate::rng::StreamRng,
    ) -> Prediction {
        match self {
            Defense::Plain(learner) => learner.train(data).classify(x0, rng),
            Defense::Dpa { base, plan } => Prediction::Class(dpa_predict(data, plan, base, x0).0),
        }
    }
}

/// Runs sample -> attack -> train -> classify rounds and reports realized
/// attack sizes plus post-attack accuracy at the query.
pub fn measure_lethal_dose(
    defense: &Defense,
    task: &Task,
    x0: &InputPoint,
    attack: &Attack,
    n_total: usize,
    trials: usize,
    key: RngKey,
) -> Result<AttackReport, HarnessError> {
    if trials < 1 {
        return Err(HarnessError::TooFewTrials(trials));
    }
    let y0 = task.ml_label(x0)?;
    let expected = attack.expected_size(n_total, task)?;
    let rounds: Vec<(f64, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = key.child(t).stream();
            let clean = task.sample(n_total, &mut rng);
            let poisoned = attack.apply(&clean, &mut rng)?;
            let realized = clean.symmetric_distance(&poisoned);
            let hit = defense.classify(&poisoned, x0, &mut rng) == Prediction::Class(y0);
            Ok((realized as f64, hit))
        })
        .collect::<Result<_, AttackError>>()?;

    let sizes: Vec<f64> = rounds.iter().map(|r| r.0).collect();
    let successes = rounds.iter().filter(|r| r.1).count();
    let (realized_mean, realized_sd) = mean_sd(&sizes);
    let (ci_low, ci_high) = wilson_interval(successes, trials);
    Ok(AttackReport {
        attack: attack.name().to_string(),
        trials,
        expected_size: expected.symmetric,
        expected_touched: expected.touched,
        realized_mean,
        realized_sd,
        post_attack_accuracy: successes as f64 / trials as f64,
        ci_low,
        ci_high,
    })
}

/// The attack each task pairs with. The swap attack's second label is the
/// one the canonical learner is least likely to predict at x0, estimated by
/// a short probe; when the probe cannot separate the candidates it falls
/// back to (y0 + 1) mod k.
pub fn matched_attack(
    task: &Task,
    x0: &InputPoint,
    n_total: usize,
    epsilon: f64,
    probe_trials: usize,
    key: RngKey,
) -> Result<Attack, HarnessError> {
    let y0 = task.ml_label(x0)?;
    match task {
        Task::Bijection(t) => {
            let k = t.k();
            let fallback = Label((y0.0 + 1) % k);
            let y1 = if probe_trials == 0 {
                fallback
            } else {
                let learner = Learner::canonical_for(task);
                let mut counts = vec![0usize; k];
                for t_idx in 0..probe_trials as u64 {
                    let mut rng = key.child(t_idx).stream();
                    let data = task.sample(n_total, &mut rng);
                    if let Prediction::Class(y) = learner.train(&data).classify(x0, &mut rng) {
                        counts[y.0] += 1;
                    }
                }
                let rivals: Vec<usize> = (0..k).filter(|&y| y != y0.0).collect();
                let min = rivals.iter().map(|&y| counts[y]).min().unwrap();
                let max = rivals.iter().map(|&y| counts[y]).max().unwrap();
                if min == max {
                    fallback
                } else {
                    Label(*rivals.iter().find(|&&y| counts[y] == min).unwrap())
                }
            };
            Ok(Attack::label_swap(y0, y1)?)
        }
        Task::Memorization(_) => Ok(Attack::removal(x0.clone(), y0)),
        Task::Gaussian(t) => Ok(Attack::gaussian_shift(t, x0, epsilon)?),
    }
}

/// One grid point of the scaling sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub family: &'static str,
    pub param: usize,
    pub tau: f64,
    pub n_hat: usize,
    /// Closed-form expected symmetric attack size of the matched attack.
    pub lethal_expected: f64,
    pub n_total: usize,
    /// n_hat * lethal_expected / N; constant across the grid iff sample
    /// complexity and lethal dose are inversely proportional.
    pub product: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<ScalingRow>,
    /// max/min of the product column; the scaling check passes when this
    /// stays below a small constant.
    pub product_ratio: f64,
}

/// The task family a sweep ranges over: bijection tasks by k, or
/// memorization tasks by m at fixed k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepFamily {
    Bijection,
    Memorization { k: usize },
}

pub fn scaling_sweep(
    family: SweepFamily,
    grid: &[usize],
    tau: f64,
    n_total: usize,
    trials_per_n: usize,
    cap: usize,
    key: RngKey,
) -> Result<SweepResult, HarnessError> {
    if grid.is_empty() {
        return Err(HarnessError::EmptyGrid);
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &param in grid {
        let row = scaling_point(family, param, tau, n_total, trials_per_n, cap, key).map_err(
            |source| HarnessError::GridPoint {
                param,
                source: Box::new(source),
            },
        )?;
        rows.push(row);
    }
    let products: Vec<f64> = rows.iter().map(|r| r.product).collect();
    let max = products.iter().cloned().fold(f64::MIN, f64::max);
    let min = products.iter().cloned().fold(f64::MAX, f64::min);
    Ok(SweepResult {
        rows,
        product_ratio: max / min,
    })
}

fn scaling_point(
    family: SweepFamily,
    param: usize,
    tau: f64,
    n_total: usize,
    trials_per_n: usize,
    cap: usize,
    key: RngKey,
) -> Result<ScalingRow, HarnessError> {
    let (name, task) = match family {
        SweepFamily::Bijection => (
            "bijection",
            Task::Bijection(BijectionTask::identity(param)?),
        ),
        SweepFamily::Memorization { k } => (
            "memorization",
            Task::Memorization(MemorizationTask::cyclic(param, k)?),
        ),
    };
    let x0 = InputPoint::Discrete(0);
    let learner = Learner::canonical_for(&task);
    let search = find_min_n(
        &learner,
        &task,
        &x0,
        tau,
        trials_per_n,
        cap,
        key.child_label(name).child(param as u64),
    )?;
    // The swap target is irrelevant to the closed form, so no probe here.
    let attack = matched_attack(&task, &x0, n_total, 0.01, 0, key)?;
    let lethal_expected = attack.expected_size(n_total, &task)?.symmetric;
    let product = search.n_hat as f64 * lethal_expected / n_total as f64;
    Ok(ScalingRow {
        family: name,
        param,
        tau,
        n_hat: search.n_hat,
        lethal_expected,
        n_total,
        product,
    })
}

/// One row of the certified-accuracy table: the fraction of queries whose
/// prediction is correct and certified at size >= t.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvePoint {
    pub t: usize,
    pub certified_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveResult {
    pub points: Vec<CurvePoint>,
    /// Equals the t = 0 column.
    pub clean_accuracy: f64,
    /// Median certified size over correctly predicted queries (midpoint on
    /// even counts).
    pub median_certified: f64,
    /// Mean vote share of the true label across queries; the per-partition
    /// base accuracy.
    pub mean_true_vote_share: f64,
    pub queries: usize,
}

/// Fits one aggregation model on a fresh size-N training set, then evaluates
/// certificates on fresh queries from the input marginal.
pub fn dpa_certified_curve(
    task: &Task,
    base: &Learner,
    k_part: usize,
    n_total: usize,
    queries: usize,
    key: RngKey,
) -> Result<CurveResult, HarnessError> {
    let plan = PartitionPlan::new(k_part)?;
    let data = task.sample(n_total, &mut key.child_label("train").stream());
    let model = DpaModel::fit(&data, &plan, base);

    let mut correct_certs: Vec<usize> = Vec::new();
    let mut share_sum = 0.0;
    let mut correct = 0usize;
    for q in 0..queries as u64 {
        let mut rng = key.child_label("query").child(q).stream();
        let x = task.sample_input(&mut rng);
        let y_true = task.ml_label(&x)?;
        let (pred, profile) = model.predict(&x);
        let cert = dpa_certify(&profile, pred)?;
        share_sum += profile.share(y_true);
        if pred == y_true {
            correct += 1;
            correct_certs.push(cert.certified_size);
        }
    }

    let clean_accuracy = correct as f64 / queries.max(1) as f64;
    let max_t = correct_certs.iter().copied().max().unwrap_or(0);
    let points = (0..=max_t)
        .map(|t| CurvePoint {
            t,
            certified_fraction: correct_certs.iter().filter(|&&c| c >= t).count() as f64
                / queries.max(1) as f64,
        })
        .collect();

    correct_certs.sort_unstable();
    let median_certified = match correct_certs.len() {
        0 => 0.0,
        len if len % 2 == 1 => correct_certs[len / 2] as f64,
        len => (correct_certs[len / 2 - 1] + correct_certs[len / 2]) as f64 / 2.0,
    };
    Ok(CurveResult {
        points,
        clean_accuracy,
        median_certified,
        mean_true_vote_share: share_sum / queries.max(1) as f64,
        queries,
    })
}

/// Result of the exhaustive certificate check.
#[derive(Debug, Clone)]
pub enum CheckOutcome {
    /// Every reachable poisoned set within the claimed size kept the
    /// prediction.
    Verified {
        datasets_checked: usize,
        certified_size: usize,
        claimed_size: usize,
    },
    /// A poisoned set within the claimed size changed the prediction.
    Violation {
        distance: usize,
        want: Label,
        got: Label,
        poisoned: Dataset,
    },
}

impl CheckOutcome {
    pub fn is_verified(&self) -> bool {
        matches!(self, CheckOutcome::Verified { .. })
    }
}

/// Enumerates every dataset reachable by at most t_max insertions (from the
/// universe, with repetition) and removals (from D), and asserts the
/// aggregate prediction is unchanged whenever the realized symmetric
/// distance is within the certificate. `claimed_size` overrides the computed
/// certificate to probe deliberately corrupted claims.
pub fn brute_force_certificate_check(
    universe: &[LabeledSample],
    data: &Dataset,
    plan: &PartitionPlan,
    base: &Learner,
    x0: &InputPoint,
    t_max: usize,
    claimed_size: Option<usize>,
) -> Result<CheckOutcome, HarnessError> {
    if universe.len() > BRUTE_FORCE_MAX_UNIVERSE {
        return Err(HarnessError::UniverseTooLarge(
            universe.len(),
            BRUTE_FORCE_MAX_UNIVERSE,
        ));
    }
    if data.len() > BRUTE_FORCE_MAX_DATASET {
        return Err(HarnessError::DatasetTooLarge(
            data.len(),
            BRUTE_FORCE_MAX_DATASET,
        ));
    }
    if t_max > BRUTE_FORCE_MAX_T {
        return Err(HarnessError::TMaxTooLarge(t_max, BRUTE_FORCE_MAX_T));
    }

    let (want, profile) = dpa_predict(data, plan, base, x0);
    let certificate = dpa_certify(&profile, want)?;
    let claimed = claimed_size.unwrap_or(certificate.certified_size);

    let mut checked = 0usize;
    for removal in removal_multisets(data, t_max) {
        let budget_left = t_max - removal.iter().map(|(_, c)| c).sum::<usize>();
        for insertion in insertion_multisets(universe, budget_left) {
            let mut poisoned = data.clone();
            for (sample, count) in &removal {
                poisoned.remove_n(sample, *count);
            }
            for idx in &insertion {
                poisoned.insert(universe[*idx].clone());
            }
            let distance = data.symmetric_distance(&poisoned);
            if distance == 0 || distance > claimed {
                continue;
            }
            checked += 1;
            let (got, _) = dpa_predict(&poisoned, plan, base, x0);
            if got != want {
                return Ok(CheckOutcome::Violation {
                    distance,
                    want,
                    got,
                    poisoned,
                });
            }
        }
    }
    Ok(CheckOutcome::Verified {
        datasets_checked: checked,
        certified_size: certificate.certified_size,
        claimed_size: claimed,
    })
}

/// All sub-multisets of the dataset with total size <= max, as
/// (sample, count) bundles.
fn removal_multisets(data: &Dataset, max: usize) -> Vec<Vec<(LabeledSample, usize)>> {
    let entries: Vec<(LabeledSample, usize)> =
        data.entries().map(|(s, c)| (s.clone(), c)).collect();
    let mut out = Vec::new();
    let mut current: Vec<(LabeledSample, usize)> = Vec::new();
    fn recurse(
        entries: &[(LabeledSample, usize)],
        idx: usize,
        budget: usize,
        current: &mut Vec<(LabeledSample, usize)>,
        out: &mut Vec<Vec<(LabeledSample, usize)>>,
    ) {
        if idx == entries.len() {
            out.push(current.clone());
            return;
        }
        let (sample, available) = &entries[idx];
        for take in 0..=budget.min(*available) {
            if take > 0 {
                current.push((sample.clone(), take));
            }
            recurse(entries, idx + 1, budget - take, current, out);
            if take > 0 {
                current.pop();
            }
        }
    }
    recurse(&entries, 0, max, &mut current, &mut out);
    out
}

/// All multisets of universe indices with size <= max (combinations with
/// repetition), including the empty one.
fn insertion_multisets(universe: &[LabeledSample], max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max {
        let mut next = Vec::new();
        for combo in &frontier {
            let start = combo.last().copied().unwrap_or(0);
            for idx in start..universe.len() {
                let mut grown = combo.clone();
                grown.push(idx);
                next.push(grown);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
