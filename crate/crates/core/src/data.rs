//! Labeled samples and multiset training sets.
//!
//! A training set is a multiset over the sample space: insertion order never
//! matters, only multiplicities. Attack sizes are measured as the symmetric
//! multiset distance (total insertions plus removals), so [`Dataset`] keeps a
//! canonical multiplicity map rather than a sequence.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A class label, identified by its index in `[0, k)`.
///
/// The total order on indices is the crate-wide tie-breaking rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub usize);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An input point: a discrete id for finite input spaces, or a raw real
/// vector for the Gaussian task.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputPoint {
    Discrete(u64),
    Vector(Vec<f64>),
}

impl InputPoint {
    pub fn dim(&self) -> Option<usize> {
        match self {
            InputPoint::Discrete(_) => None,
            InputPoint::Vector(v) => Some(v.len()),
        }
    }

    /// l1 distance between inputs of the same kind. Discrete ids are treated
    /// as scalar coordinates.
    ///
    /// Panics on mixed kinds or mismatched dimensions; tasks never produce
    /// those.
    pub fn l1_distance(&self, other: &InputPoint) -> f64 {
        match (self, other) {
            (InputPoint::Discrete(a), InputPoint::Discrete(b)) => (*a as f64 - *b as f64).abs(),
            (InputPoint::Vector(a), InputPoint::Vector(b)) => {
                assert_eq!(a.len(), b.len(), "l1_distance: dimension mismatch");
                a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
            }
            _ => panic!("l1_distance: mixed input kinds"),
        }
    }
}

// Equality and ordering are bitwise on coordinates so that a sample is a
// well-defined multiset key and coupling's "matched" flag is exact.
impl PartialEq for InputPoint {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (InputPoint::Discrete(a), InputPoint::Discrete(b)) => a == b,
            (InputPoint::Vector(a), InputPoint::Vector(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => false,
        }
    }
}

impl Eq for InputPoint {}

impl PartialOrd for InputPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for InputPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (InputPoint::Discrete(a), InputPoint::Discrete(b)) => a.cmp(b),
            (InputPoint::Vector(a), InputPoint::Vector(b)) => {
                a.len().cmp(&b.len()).then_with(|| {
                    for (x, y) in a.iter().zip(b) {
                        let ord = x.total_cmp(y);
                        if ord != Ordering::Equal {
                            return ord;
                        }
                    }
                    Ordering::Equal
                })
            }
            (InputPoint::Discrete(_), InputPoint::Vector(_)) => Ordering::Less,
            (InputPoint::Vector(_), InputPoint::Discrete(_)) => Ordering::Greater,
        }
    }
}

impl std::hash::Hash for InputPoint {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        match self {
            InputPoint::Discrete(id) => {
                state.write_u8(0);
                state.write_u64(*id);
            }
            InputPoint::Vector(v) => {
                state.write_u8(1);
                for x in v {
                    state.write_u64(x.to_bits());
                }
            }
        }
    }
}

/// One (input, label) training sample.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabeledSample {
    pub input: InputPoint,
    pub label: Label,
}

impl LabeledSample {
    pub fn new(input: InputPoint, label: Label) -> Self {
        LabeledSample { input, label }
    }

    pub fn discrete(id: u64, label: usize) -> Self {
        LabeledSample::new(InputPoint::Discrete(id), Label(label))
    }

    pub fn vector(coords: Vec<f64>, label: usize) -> Self {
        LabeledSample::new(InputPoint::Vector(coords), Label(label))
    }

    /// Canonical byte encoding: label index as 8-byte little-endian, then the
    /// discrete id as 8-byte little-endian or each coordinate as 8-byte
    /// IEEE-754 little-endian. Partition hashing and multiset identity both
    /// key off these bytes, so they are bit-exact across platforms.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16);
        out.extend_from_slice(&(self.label.0 as u64).to_le_bytes());
        match &self.input {
            InputPoint::Discrete(id) => out.extend_from_slice(&id.to_le_bytes()),
            InputPoint::Vector(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }
}

/// A finite multiset of labeled samples.
///
/// Two datasets are equal iff every multiplicity matches.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    counts: BTreeMap<LabeledSample, usize>,
    len: usize,
}

impl Dataset {
    pub fn new() -> Self {
        Dataset::default()
    }

    pub fn from_samples<I: IntoIterator<Item = LabeledSample>>(samples: I) -> Self {
        let mut d = Dataset::new();
        for s in samples {
            d.insert(s);
        }
        d
    }

    /// Total size N (sum of multiplicities).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn multiplicity(&self, sample: &LabeledSample) -> usize {
        self.counts.get(sample).copied().unwrap_or(0)
    }

    pub fn insert(&mut self, sample: LabeledSample) {
        self.insert_n(sample, 1);
    }

    pub fn insert_n(&mut self, sample: LabeledSample, n: usize) {
        if n == 0 {
            return;
        }
        *self.counts.entry(sample).or_insert(0) += n;
        self.len += n;
    }

    /// Removes up to `n` copies; returns how many were actually removed.
    pub fn remove_n(&mut self, sample: &LabeledSample, n: usize) -> usize {
        match self.counts.get_mut(sample) {
            None => 0,
            Some(c) => {
                let removed = n.min(*c);
                *c -= removed;
                if *c == 0 {
                    self.counts.remove(sample);
                }
                self.len -= removed;
                removed
            }
        }
    }

    /// Distinct samples with their multiplicities, in canonical order.
    pub fn entries(&self) -> impl Iterator<Item = (&LabeledSample, usize)> {
        self.counts.iter().map(|(s, &c)| (s, c))
    }

    /// Every sample, repeated by multiplicity.
    pub fn iter(&self) -> impl Iterator<Item = &LabeledSample> {
        self.counts
            .iter()
            .flat_map(|(s, &c)| std::iter::repeat_n(s, c))
    }

    pub fn distinct_len(&self) -> usize {
        self.counts.len()
    }

    /// Symmetric multiset distance: the minimum total number of insertions
    /// and removals turning one set into the other.
    pub fn symmetric_distance(&self, other: &Dataset) -> usize {
        let mut total = 0usize;
        let mut rhs = other.counts.iter().peekable();
        for (s, &c) in &self.counts {
            // Advance through keys only present on the right.
            while let Some((rs, &rc)) = rhs.peek() {
                if *rs < s {
                    total += rc;
                    rhs.next();
                } else {
                    break;
                }
            }
            match rhs.peek() {
                Some((rs, &rc)) if *rs == s => {
                    total += c.abs_diff(rc);
                    rhs.next();
                }
                _ => total += c,
            }
        }
        total += rhs.map(|(_, &rc)| rc).sum::<usize>();
        total
    }
}

impl FromIterator<LabeledSample> for Dataset {
    fn from_iter<I: IntoIterator<Item = LabeledSample>>(iter: I) -> Self {
        Dataset::from_samples(iter)
    }
}
