//! Desk-scale laboratory for data poisoning limits: synthetic classification
//! tasks with known optimal learners, partition-aggregation certificates,
//! constructed optimal poisoning attacks, and total-variation/coupling tools,
//! wired into a reproducible Monte Carlo harness.
//!
//! The central quantities: the clean sample complexity n(tau) of a task, the
//! lethal dose (the poisoning budget that forces accuracy to chance), and
//! the certified attack size of a partition-aggregation defense. The harness
//! measures all three and checks that sample complexity and lethal dose stay
//! inversely proportional across task families.

pub mod attack;
pub mod coupling;
pub mod data;
pub mod dpa;
pub mod harness;
pub mod learner;
pub mod rng;
pub mod stats;
pub mod task;

pub use attack::{symmetric_distance, Attack, AttackReport};
pub use data::{Dataset, InputPoint, Label, LabeledSample};
pub use dpa::{
    dpa_certify, dpa_predict, partition, Certificate, DpaModel, PartitionPlan, VoteProfile,
};
pub use learner::{Classifier, Learner, Prediction};
pub use rng::RngKey;
pub use task::{BijectionTask, GaussianTask, MemorizationTask, Task};

/// Caps the global worker pool. Call once, before any parallel work; later
/// calls fail harmlessly. Results are identical for every thread count.
pub fn configure_threads(threads: Option<usize>) -> Result<(), rayon::ThreadPoolBuildError> {
    match threads {
        Some(n) if n >= 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global(),
        _ => Ok(()),
    }
}
