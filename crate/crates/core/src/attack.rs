//! Poisoning transforms with exact size accounting.
//!
//! Attack size is the symmetric multiset distance between the clean and the
//! poisoned training set, so a replaced sample counts twice (one removal plus
//! one insertion) while a pure deletion counts once. Each transform also
//! reports the expected number of samples it touches; the symmetric-distance
//! expectation is the headline figure.

use serde::Serialize;
use thiserror::Error;

use crate::coupling::{couple_given, Distribution, GaussianDistribution, SampleValue};
use crate::data::{Dataset, InputPoint, Label, LabeledSample};
use crate::rng::StreamRng;
use crate::task::{GaussianTask, Task};

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error("swap labels must differ, both are {0}")]
    IdenticalSwapLabels(Label),
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("the two closest centers are equidistant from the query; no unique target")]
    DegenerateGeometry,
    #[error("attack expectation undefined for this task (needs {0})")]
    TaskMismatch(&'static str),
    #[error(transparent)]
    Task(#[from] crate::task::TaskError),
    #[error(transparent)]
    Coupling(#[from] crate::coupling::CouplingError),
}

/// Expected attack size in both accounting conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedSize {
    /// Expected number of samples the transform modifies or deletes.
    pub touched: f64,
    /// Expected symmetric multiset distance (replacements count twice).
    pub symmetric: f64,
}

/// A poisoning transform. `apply` never mutates its input.
#[derive(Debug, Clone, PartialEq)]
pub enum Attack {
    /// No-op; the trivial transform for baselines.
    Identity,
    /// Swaps labels y0 and y1 on every sample.
    LabelSwap { y0: Label, y1: Label },
    /// Deletes every copy of one exact sample.
    Removal { target: LabeledSample },
    /// Swaps labels y0 and y1 only on samples with input x0.
    PerInputSwap {
        x0: InputPoint,
        y0: Label,
        y1: Label,
    },
    /// Re-draws the inputs of the second-closest class through the maximal
    /// coupling onto a center pulled just inside the closest one.
    GaussianShift(GaussianShift),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianShift {
    class2: Label,
    mu2: Vec<f64>,
    mu2_prime: Vec<f64>,
    epsilon: f64,
    delta: f64,
}

impl GaussianShift {
    /// The poisoned center of the targeted class.
    pub fn shifted_center(&self) -> &[f64] {
        &self.mu2_prime
    }

    /// The label whose samples are re-drawn.
    pub fn target_class(&self) -> Label {
        self.class2
    }

    /// TV distance between the clean and poisoned class distributions; the
    /// per-sample change probability.
    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl Attack {
    pub fn label_swap(y0: Label, y1: Label) -> Result<Attack, AttackError> {
        if y0 == y1 {
            return Err(AttackError::IdenticalSwapLabels(y0));
        }
        Ok(Attack::LabelSwap { y0, y1 })
    }

    pub fn removal(x0: InputPoint, y0: Label) -> Attack {
        Attack::Removal {
            target: LabeledSample::new(x0, y0),
        }
    }

    pub fn per_input_swap(x0: InputPoint, y0: Label, y1: Label) -> Result<Attack, AttackError> {
        if y0 == y1 {
            return Err(AttackError::IdenticalSwapLabels(y0));
        }
        Ok(Attack::PerInputSwap { x0, y0, y1 })
    }

    /// Builds the shift attack against a query point: the second-closest
    /// class center mu2 moves to
    ///
    ///   mu2' = mu2 - ((d2 - d1)/d2) * (1 + epsilon) * (mu2 - x0)
    ///
    /// which lands strictly inside the closest center's distance, flipping
    /// the maximum-likelihood label at x0.
    pub fn gaussian_shift(
        task: &GaussianTask,
        x0: &InputPoint,
        epsilon: f64,
    ) -> Result<Attack, AttackError> {
        if epsilon <= 0.0 || epsilon.is_nan() {
            return Err(AttackError::NonPositiveEpsilon(epsilon));
        }
        let ((d1, _), (d2, class2)) = task.nearest_two(x0)?;
        if d1 == d2 {
            return Err(AttackError::DegenerateGeometry);
        }
        let InputPoint::Vector(x) = x0 else {
            return Err(crate::task::TaskError::WrongInputKind("vector").into());
        };
        let mu2 = task.center(class2).to_vec();
        let scale = (d2 - d1) / d2 * (1.0 + epsilon);
        let mu2_prime: Vec<f64> = mu2
            .iter()
            .zip(x)
            .map(|(m, q)| m - scale * (m - q))
            .collect();
        let delta = crate::coupling::tv_gaussian_same_cov(&mu2, &mu2_prime);
        Ok(Attack::GaussianShift(GaussianShift {
            class2,
            mu2,
            mu2_prime,
            epsilon,
            delta,
        }))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Attack::Identity => "identity",
            Attack::LabelSwap { .. } => "label_swap",
            Attack::Removal { .. } => "removal",
            Attack::PerInputSwap { .. } => "per_input_swap",
            Attack::GaussianShift(_) => "gaussian_shift",
        }
    }

    /// Applies the transform to a copy of the dataset.
    pub fn apply(&self, data: &Dataset, rng: &mut StreamRng) -> Result<Dataset, AttackError> {
        match self {
            Attack::Identity => Ok(data.clone()),
            Attack::LabelSwap { y0, y1 } => Ok(relabel(data, |s| {
                if s.label == *y0 {
                    Some(*y1)
                } else if s.label == *y1 {
                    Some(*y0)
                } else {
                    None
                }
            })),
            Attack::Removal { target } => {
                let mut out = data.clone();
                out.remove_n(target, usize::MAX);
                Ok(out)
            }
            Attack::PerInputSwap { x0, y0, y1 } => Ok(relabel(data, |s| {
                if s.input != *x0 {
                    None
                } else if s.label == *y0 {
                    Some(*y1)
                } else if s.label == *y1 {
                    Some(*y0)
                } else {
                    None
                }
            })),
            Attack::GaussianShift(shift) => {
                let from = Distribution::Gaussian(GaussianDistribution::new(shift.mu2.clone()));
                let to = Distribution::Gaussian(GaussianDistribution::new(shift.mu2_prime.clone()));
                let mut out = Dataset::new();
                for (sample, count) in data.entries() {
                    if sample.label != shift.class2 {
                        out.insert_n(sample.clone(), count);
                        continue;
                    }
                    let InputPoint::Vector(v) = &sample.input else {
                        out.insert_n(sample.clone(), count);
                        continue;
                    };
                    // Each copy is coupled independently.
                    for _ in 0..count {
                        let u = SampleValue::Point(v.clone());
                        let (moved, _) = couple_given(&from, &to, &u, rng)?;
                        let SampleValue::Point(w) = moved else {
                            unreachable!()
                        };
                        out.insert(LabeledSample::new(InputPoint::Vector(w), shift.class2));
                    }
                }
                Ok(out)
            }
        }
    }

    /// Closed-form expected sizes on a clean size-N training set from the
    /// given task.
    pub fn expected_size(&self, n_total: usize, task: &Task) -> Result<ExpectedSize, AttackError> {
        let n = n_total as f64;
        match self {
            Attack::Identity => Ok(ExpectedSize {
                touched: 0.0,
                symmetric: 0.0,
            }),
            Attack::LabelSwap { y0, y1 } => {
                let touched = n * (task.label_probability(*y0) + task.label_probability(*y1));
                Ok(ExpectedSize {
                    touched,
                    symmetric: 2.0 * touched,
                })
            }
            Attack::Removal { target } => {
                let touched = n * task.point_mass(target);
                Ok(ExpectedSize {
                    touched,
                    symmetric: touched,
                })
            }
            Attack::PerInputSwap { x0, y0, y1 } => {
                let touched = n
                    * (task.point_mass(&LabeledSample::new(x0.clone(), *y0))
                        + task.point_mass(&LabeledSample::new(x0.clone(), *y1)));
                Ok(ExpectedSize {
                    touched,
                    symmetric: 2.0 * touched,
                })
            }
            Attack::GaussianShift(shift) => {
                let Task::Gaussian(_) = task else {
                    return Err(AttackError::TaskMismatch("gaussian task"));
                };
                let touched = shift.delta * n * task.label_probability(shift.class2);
                Ok(ExpectedSize {
                    touched,
                    symmetric: 2.0 * touched,
                })
            }
        }
    }
}

fn relabel(data: &Dataset, new_label: impl Fn(&LabeledSample) -> Option<Label>) -> Dataset {
    let mut out = Dataset::new();
    for (sample, count) in data.entries() {
        let mut sample = sample.clone();
        if let Some(y) = new_label(&sample) {
            sample.label = y;
        }
        out.insert_n(sample, count);
    }
    out
}

/// Attack size between two datasets: total insertions plus removals.
pub fn symmetric_distance(a: &Dataset, b: &Dataset) -> usize {
    a.symmetric_distance(b)
}

/// Realized attack statistics with the post-attack accuracy of a defended
/// learner, produced by the measurement harness.
#[derive(Debug, Clone, Serialize)]
pub struct AttackReport {
    pub attack: String,
    pub trials: usize,
    /// Expected symmetric attack size (headline figure).
    pub expected_size: f64,
    /// Expected number of touched samples.
    pub expected_touched: f64,
    pub realized_mean: f64,
    pub realized_sd: f64,
    pub post_attack_accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}
