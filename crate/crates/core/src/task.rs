//! Synthetic classification tasks with known structure.
//!
//! Each task owns its hidden structure (the label mapping `g` or the class
//! centers) and exposes it only through the sampling and maximum-likelihood
//! oracles. Learners never see a task, only datasets drawn from it.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::tv_gaussian_separation;
use crate::data::{Dataset, InputPoint, Label, LabeledSample};
use crate::rng::StreamRng;

#[derive(Debug, Error, PartialEq)]
pub enum TaskError {
    #[error("k must be at least 2, got {0}")]
    LabelSpaceTooSmall(usize),
    #[error("m must be at least 1, got {0}")]
    InputSpaceEmpty(usize),
    #[error("d must be at least 1, got {0}")]
    DimensionZero(usize),
    #[error("g must be a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("label {0} out of range for k={1}")]
    LabelOutOfRange(usize, usize),
    #[error("expected {0} centers, got {1}")]
    CenterCountMismatch(usize, usize),
    #[error("center {index} has dimension {got}, expected {want}")]
    CenterDimensionMismatch {
        index: usize,
        got: usize,
        want: usize,
    },
    #[error("discrete input {0} out of range, |X| = {1}")]
    InputOutOfRange(u64, usize),
    #[error("input kind does not match the task (expected {0})")]
    WrongInputKind(&'static str),
}

/// k-way task over k inputs whose hidden bijection pairs each input with a
/// distinct label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBijection", into = "RawBijection")]
pub struct BijectionTask {
    k: usize,
    g: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawBijection {
    k: usize,
    g: Vec<usize>,
}

impl From<BijectionTask> for RawBijection {
    fn from(t: BijectionTask) -> Self {
        RawBijection { k: t.k, g: t.g }
    }
}

impl TryFrom<RawBijection> for BijectionTask {
    type Error = TaskError;
    fn try_from(raw: RawBijection) -> Result<Self, TaskError> {
        BijectionTask::new(raw.k, raw.g)
    }
}

impl BijectionTask {
    pub fn new(k: usize, g: Vec<usize>) -> Result<Self, TaskError> {
        if k < 2 {
            return Err(TaskError::LabelSpaceTooSmall(k));
        }
        let mut seen = vec![false; k];
        if g.len() != k
            || !g
                .iter()
                .all(|&y| y < k && !std::mem::replace(&mut seen[y], true))
        {
            return Err(TaskError::NotAPermutation(k));
        }
        Ok(BijectionTask { k, g })
    }

    /// The identity bijection; the default hidden structure for fixtures.
    pub fn identity(k: usize) -> Result<Self, TaskError> {
        BijectionTask::new(k, (0..k).collect())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mapping(&self, id: u64) -> Result<Label, TaskError> {
        self.g
            .get(usize::try_from(id).map_err(|_| TaskError::InputOutOfRange(id, self.k))?)
            .map(|&y| Label(y))
            .ok_or(TaskError::InputOutOfRange(id, self.k))
    }
}

/// k-way task over m unrelated inputs; the hidden map assigns each input an
/// independent label, so prediction is pure memorization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMemorization", into = "RawMemorization")]
pub struct MemorizationTask {
    m: usize,
    k: usize,
    g: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawMemorization {
    m: usize,
    k: usize,
    g: Vec<usize>,
}

impl From<MemorizationTask> for RawMemorization {
    fn from(t: MemorizationTask) -> Self {
        RawMemorization {
            m: t.m,
            k: t.k,
            g: t.g,
        }
    }
}

impl TryFrom<RawMemorization> for MemorizationTask {
    type Error = TaskError;
    fn try_from(raw: RawMemorization) -> Result<Self, TaskError> {
        MemorizationTask::new(raw.m, raw.k, raw.g)
    }
}

impl MemorizationTask {
    pub fn new(m: usize, k: usize, g: Vec<usize>) -> Result<Self, TaskError> {
        if k < 2 {
            return Err(TaskError::LabelSpaceTooSmall(k));
        }
        if m < 1 {
            return Err(TaskError::InputSpaceEmpty(m));
        }
        if g.len() != m {
            return Err(TaskError::InputOutOfRange(g.len() as u64, m));
        }
        if let Some(&y) = g.iter().find(|&&y| y >= k) {
            return Err(TaskError::LabelOutOfRange(y, k));
        }
        Ok(MemorizationTask { m, k, g })
    }

    /// Mapping `i -> i mod k`; the default hidden structure for fixtures.
    pub fn cyclic(m: usize, k: usize) -> Result<Self, TaskError> {
        let g = (0..m).map(|i| i % k).collect();
        MemorizationTask::new(m, k, g)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mapping(&self, id: u64) -> Result<Label, TaskError> {
        self.g
            .get(usize::try_from(id).map_err(|_| TaskError::InputOutOfRange(id, self.m))?)
            .map(|&y| Label(y))
            .ok_or(TaskError::InputOutOfRange(id, self.m))
    }
}

/// k-way task where class y draws inputs from an isotropic unit-covariance
/// Gaussian around a hidden center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGaussian", into = "RawGaussian")]
pub struct GaussianTask {
    k: usize,
    d: usize,
    centers: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawGaussian {
    k: usize,
    d: usize,
    centers: Vec<Vec<f64>>,
}

impl From<GaussianTask> for RawGaussian {
    fn from(t: GaussianTask) -> Self {
        RawGaussian {
            k: t.k,
            d: t.d,
            centers: t.centers,
        }
    }
}

impl TryFrom<RawGaussian> for GaussianTask {
    type Error = TaskError;
    fn try_from(raw: RawGaussian) -> Result<Self, TaskError> {
        GaussianTask::new(raw.k, raw.d, raw.centers)
    }
}

impl GaussianTask {
    pub fn new(k: usize, d: usize, centers: Vec<Vec<f64>>) -> Result<Self, TaskError> {
        if k < 2 {
            return Err(TaskError::LabelSpaceTooSmall(k));
        }
        if d < 1 {
            return Err(TaskError::DimensionZero(d));
        }
        if centers.len() != k {
            return Err(TaskError::CenterCountMismatch(k, centers.len()));
        }
        for (index, c) in centers.iter().enumerate() {
            if c.len() != d {
                return Err(TaskError::CenterDimensionMismatch {
                    index,
                    got: c.len(),
                    want: d,
                });
            }
        }
        Ok(GaussianTask { k, d, centers })
    }

    /// Centers at `(i * separation, 0, ..., 0)`; the default geometry for
    /// fixtures.
    pub fn spaced(k: usize, d: usize, separation: f64) -> Result<Self, TaskError> {
        let centers = (0..k)
            .map(|i| {
                let mut c = vec![0.0; d];
                c[0] = i as f64 * separation;
                c
            })
            .collect();
        GaussianTask::new(k, d, centers)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn center(&self, y: Label) -> &[f64] {
        &self.centers[y.0]
    }

    fn coords<'a>(&self, x: &'a InputPoint) -> Result<&'a [f64], TaskError> {
        match x {
            InputPoint::Vector(v) if v.len() == self.d => Ok(v),
            InputPoint::Vector(_) => Err(TaskError::WrongInputKind("vector of task dimension")),
            InputPoint::Discrete(_) => Err(TaskError::WrongInputKind("vector")),
        }
    }

    /// Distances from x to the closest and second-closest centers, with
    /// their labels. Ties order by smaller label index.
    pub fn nearest_two(&self, x: &InputPoint) -> Result<(RankedCenter, RankedCenter), TaskError> {
        let coords = self.coords(x)?;
        let mut ranked: Vec<RankedCenter> = self
            .centers
            .iter()
            .enumerate()
            .map(|(y, c)| (euclidean(coords, c), Label(y)))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok((ranked[0], ranked[1]))
    }

    /// The margin parameter of the query: the total variation distance
    /// between two unit-covariance Gaussians whose centers are `d2 - d1`
    /// apart, where d1, d2 are the distances to the two closest centers.
    pub fn gap_delta(&self, x: &InputPoint) -> Result<f64, TaskError> {
        let ((d1, _), (d2, _)) = self.nearest_two(x)?;
        Ok(tv_gaussian_separation(d2 - d1))
    }
}

/// A (distance to x, class label) pair from center ranking.
pub type RankedCenter = (f64, Label);

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// One of the three synthetic problems.
///
/// Serializes as `{"type": "bijection" | "memorization" | "gaussian", ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Task {
    Bijection(BijectionTask),
    Memorization(MemorizationTask),
    Gaussian(GaussianTask),
}

impl Task {
    /// Number of labels |Y|.
    pub fn label_count(&self) -> usize {
        match self {
            Task::Bijection(t) => t.k,
            Task::Memorization(t) => t.k,
            Task::Gaussian(t) => t.k,
        }
    }

    /// Size of a finite input space, when the task has one.
    pub fn input_space_size(&self) -> Option<usize> {
        match self {
            Task::Bijection(t) => Some(t.k),
            Task::Memorization(t) => Some(t.m),
            Task::Gaussian(_) => None,
        }
    }

    /// Draws one input from the marginal of P.
    pub fn sample_input(&self, rng: &mut StreamRng) -> InputPoint {
        match self {
            Task::Bijection(t) => InputPoint::Discrete(rng.random_range(0..t.k as u64)),
            Task::Memorization(t) => InputPoint::Discrete(rng.random_range(0..t.m as u64)),
            Task::Gaussian(t) => {
                let y = rng.random_range(0..t.k);
                InputPoint::Vector(gaussian_draw(&t.centers[y], rng))
            }
        }
    }

    /// Draws one labeled sample from P.
    pub fn sample_one(&self, rng: &mut StreamRng) -> LabeledSample {
        match self {
            Task::Bijection(t) => {
                let id = rng.random_range(0..t.k as u64);
                LabeledSample::new(InputPoint::Discrete(id), Label(t.g[id as usize]))
            }
            Task::Memorization(t) => {
                let id = rng.random_range(0..t.m as u64);
                LabeledSample::new(InputPoint::Discrete(id), Label(t.g[id as usize]))
            }
            Task::Gaussian(t) => {
                let y = rng.random_range(0..t.k);
                LabeledSample::new(
                    InputPoint::Vector(gaussian_draw(&t.centers[y], rng)),
                    Label(y),
                )
            }
        }
    }

    /// Draws n i.i.d. samples from P.
    pub fn sample(&self, n: usize, rng: &mut StreamRng) -> Dataset {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    /// The maximum-likelihood label for an input: the hidden mapping for the
    /// discrete tasks, the nearest center (ties to the smaller label index)
    /// for the Gaussian task.
    pub fn ml_label(&self, x: &InputPoint) -> Result<Label, TaskError> {
        match (self, x) {
            (Task::Bijection(t), InputPoint::Discrete(id)) => t.mapping(*id),
            (Task::Memorization(t), InputPoint::Discrete(id)) => t.mapping(*id),
            (Task::Gaussian(t), x) => Ok(t.nearest_two(x)?.0 .1),
            (Task::Bijection(_) | Task::Memorization(_), InputPoint::Vector(_)) => {
                Err(TaskError::WrongInputKind("discrete id"))
            }
        }
    }

    /// Marginal probability of a label under P.
    pub fn label_probability(&self, y: Label) -> f64 {
        match self {
            Task::Bijection(t) => {
                if y.0 < t.k {
                    1.0 / t.k as f64
                } else {
                    0.0
                }
            }
            Task::Memorization(t) => t.g.iter().filter(|&&l| l == y.0).count() as f64 / t.m as f64,
            Task::Gaussian(t) => {
                if y.0 < t.k {
                    1.0 / t.k as f64
                } else {
                    0.0
                }
            }
        }
    }

    /// Probability mass P({sample}) of one exact labeled sample; zero for the
    /// continuous task.
    pub fn point_mass(&self, sample: &LabeledSample) -> f64 {
        match (self, &sample.input) {
            (Task::Bijection(t), InputPoint::Discrete(id)) => match t.mapping(*id) {
                Ok(y) if y == sample.label => 1.0 / t.k as f64,
                _ => 0.0,
            },
            (Task::Memorization(t), InputPoint::Discrete(id)) => match t.mapping(*id) {
                Ok(y) if y == sample.label => 1.0 / t.m as f64,
                _ => 0.0,
            },
            _ => 0.0,
        }
    }
}

fn gaussian_draw(center: &[f64], rng: &mut StreamRng) -> Vec<f64> {
    center
        .iter()
        .map(|&c| c + rng.sample::<f64, _>(StandardNormal))
        .collect()
}
