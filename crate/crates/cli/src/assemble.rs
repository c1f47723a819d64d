//! Builders that turn resolved flag values into domain objects, with
//! validation errors that name the offending flag.

use anyhow::{anyhow, bail, Result};
use serde_json::Value;

use ldc_core::harness::matched_attack;
use ldc_core::rng::RngKey;
use ldc_core::task::{BijectionTask, GaussianTask, MemorizationTask};
use ldc_core::{Attack, InputPoint, Label, Learner, Task};

/// Resolved task flags, after config merging.
#[derive(Debug, Clone, Default)]
pub struct TaskSpec {
    pub task: Option<String>,
    pub task_json: Option<String>,
    pub k: Option<usize>,
    pub m: Option<usize>,
    pub d: Option<usize>,
    pub sep: Option<f64>,
    pub g: Option<String>,
    pub centers: Option<String>,
}

pub fn build_task(spec: &TaskSpec) -> Result<Task> {
    if let Some(json) = &spec.task_json {
        return serde_json::from_str(json)
            .map_err(|e| anyhow!("--task-json does not parse as a task: {e}"));
    }
    let kind = spec
        .task
        .as_deref()
        .ok_or_else(|| anyhow!("--task is required (bijection, memorization or gaussian)"))?;
    match kind {
        "bijection" => {
            let k = spec
                .k
                .ok_or_else(|| anyhow!("--k is required for --task bijection"))?;
            let task = match &spec.g {
                Some(raw) => BijectionTask::new(k, parse_usize_list(raw, "--g")?),
                None => BijectionTask::identity(k),
            }
            .map_err(|e| anyhow!("invalid bijection task (--k/--g): {e}"))?;
            Ok(Task::Bijection(task))
        }
        "memorization" => {
            let m = spec
                .m
                .ok_or_else(|| anyhow!("--m is required for --task memorization"))?;
            let k = spec
                .k
                .ok_or_else(|| anyhow!("--k is required for --task memorization"))?;
            let task = match &spec.g {
                Some(raw) => MemorizationTask::new(m, k, parse_usize_list(raw, "--g")?),
                None => MemorizationTask::cyclic(m, k),
            }
            .map_err(|e| anyhow!("invalid memorization task (--m/--k/--g): {e}"))?;
            Ok(Task::Memorization(task))
        }
        "gaussian" => {
            let k = spec
                .k
                .ok_or_else(|| anyhow!("--k is required for --task gaussian"))?;
            let d = spec
                .d
                .ok_or_else(|| anyhow!("--d is required for --task gaussian"))?;
            let task = match &spec.centers {
                Some(raw) => {
                    let centers: Vec<Vec<f64>> = serde_json::from_str(raw)
                        .map_err(|e| anyhow!("--centers does not parse as [[f64,..],..]: {e}"))?;
                    GaussianTask::new(k, d, centers)
                }
                None => GaussianTask::spaced(k, d, spec.sep.unwrap_or(6.0)),
            }
            .map_err(|e| anyhow!("invalid gaussian task (--k/--d/--centers/--sep): {e}"))?;
            Ok(Task::Gaussian(task))
        }
        other => bail!("--task must be bijection, memorization or gaussian, got '{other}'"),
    }
}

fn parse_usize_list(raw: &str, flag: &str) -> Result<Vec<usize>> {
    serde_json::from_str(raw).map_err(|e| anyhow!("{flag} does not parse as [usize,..]: {e}"))
}

/// The query point: a bare integer for discrete tasks, a JSON array for the
/// Gaussian task. Defaults to input 0 / the origin.
pub fn build_x0(raw: Option<&str>, task: &Task) -> Result<InputPoint> {
    match (raw, task) {
        (None, Task::Gaussian(t)) => Ok(InputPoint::Vector(vec![0.0; t.d()])),
        (None, _) => Ok(InputPoint::Discrete(0)),
        (Some(raw), Task::Gaussian(_)) => {
            let coords: Vec<f64> = serde_json::from_str(raw)
                .map_err(|e| anyhow!("--x0 does not parse as [f64,..]: {e}"))?;
            Ok(InputPoint::Vector(coords))
        }
        (Some(raw), _) => raw
            .trim()
            .parse::<u64>()
            .map(InputPoint::Discrete)
            .map_err(|e| anyhow!("--x0 does not parse as an input id: {e}")),
    }
}

/// Learner selection; `auto` (or nothing) picks the task's canonical
/// learner. radius_nn needs --r.
pub fn build_learner(
    name: Option<&str>,
    learner_json: Option<&str>,
    r: Option<f64>,
    task: &Task,
) -> Result<Learner> {
    if let Some(json) = learner_json {
        let learner: Learner = serde_json::from_str(json)
            .map_err(|e| anyhow!("--learner-json does not parse: {e}"))?;
        learner
            .validate()
            .map_err(|e| anyhow!("--learner-json invalid: {e}"))?;
        return Ok(learner);
    }
    let learner = match name.unwrap_or("auto") {
        "auto" => Learner::canonical_for(task),
        "bijection" => {
            let Task::Bijection(t) = task else {
                bail!("--learner bijection requires --task bijection")
            };
            Learner::Bijection { k: t.k() }
        }
        "memorization" => {
            let Task::Memorization(t) = task else {
                bail!("--learner memorization requires --task memorization")
            };
            Learner::Memorization { m: t.m(), k: t.k() }
        }
        "gaussian" => {
            let Task::Gaussian(t) = task else {
                bail!("--learner gaussian requires --task gaussian")
            };
            Learner::Gaussian { k: t.k(), d: t.d() }
        }
        "radius_nn" | "radius-nn" => {
            let r = r.ok_or_else(|| anyhow!("--r is required for --learner radius_nn"))?;
            Learner::RadiusNn {
                r,
                k: task.label_count(),
            }
        }
        other => bail!(
            "--learner must be auto, bijection, memorization, gaussian or radius_nn, got '{other}'"
        ),
    };
    learner
        .validate()
        .map_err(|e| anyhow!("invalid learner parameters: {e}"))?;
    Ok(learner)
}

/// Attack selection; `auto` builds the task's matched attack (for bijection
/// tasks the swap target is probed from the learner's pre-attack behavior).
#[allow(clippy::too_many_arguments)]
pub fn build_attack(
    name: Option<&str>,
    task: &Task,
    x0: &InputPoint,
    n_total: usize,
    epsilon: f64,
    y1: Option<usize>,
    probe_trials: usize,
    key: RngKey,
) -> Result<Attack> {
    let y0 = task
        .ml_label(x0)
        .map_err(|e| anyhow!("--x0 invalid for the task: {e}"))?;
    let k = task.label_count();
    let pick_y1 = |fallback: usize| Label(y1.unwrap_or(fallback));
    match name.unwrap_or("auto") {
        "auto" => matched_attack(task, x0, n_total, epsilon, probe_trials, key)
            .map_err(|e| anyhow!("cannot build the matched attack: {e}")),
        "identity" => Ok(Attack::Identity),
        "swap" | "label-swap" | "label_swap" => {
            Attack::label_swap(y0, pick_y1((y0.0 + 1) % k))
                .map_err(|e| anyhow!("--y1 invalid: {e}"))
        }
        "removal" => Ok(Attack::removal(x0.clone(), y0)),
        "per-input-swap" | "per_input_swap" => {
            Attack::per_input_swap(x0.clone(), y0, pick_y1((y0.0 + 1) % k))
                .map_err(|e| anyhow!("--y1 invalid: {e}"))
        }
        "gaussian-shift" | "gaussian_shift" => {
            let Task::Gaussian(t) = task else {
                bail!("--attack gaussian-shift requires --task gaussian")
            };
            Attack::gaussian_shift(t, x0, epsilon)
                .map_err(|e| anyhow!("cannot build the shift attack (--epsilon/--x0): {e}"))
        }
        other => bail!(
            "--attack must be auto, identity, swap, removal, per-input-swap or gaussian-shift, got '{other}'"
        ),
    }
}

/// A JSON snapshot of the resolved task flags, for manifests.
pub fn task_value(task: &Task) -> Value {
    serde_json::to_value(task).expect("tasks serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_builders_validate_flags() {
        let spec = TaskSpec {
            task: Some("bijection".into()),
            k: Some(4),
            ..Default::default()
        };
        assert_eq!(build_task(&spec).unwrap().label_count(), 4);

        let bad = TaskSpec {
            task: Some("bijection".into()),
            ..Default::default()
        };
        assert!(build_task(&bad).unwrap_err().to_string().contains("--k"));

        let json = TaskSpec {
            task_json: Some(r#"{"type":"memorization","m":3,"k":2,"g":[0,1,0]}"#.into()),
            ..Default::default()
        };
        assert!(matches!(build_task(&json).unwrap(), Task::Memorization(_)));

        let unknown = TaskSpec {
            task: Some("mnist".into()),
            ..Default::default()
        };
        assert!(build_task(&unknown).is_err());
    }

    #[test]
    fn x0_parses_per_task_kind() {
        let disc = build_task(&TaskSpec {
            task: Some("memorization".into()),
            m: Some(5),
            k: Some(2),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(build_x0(None, &disc).unwrap(), InputPoint::Discrete(0));
        assert_eq!(build_x0(Some("3"), &disc).unwrap(), InputPoint::Discrete(3));
        assert!(build_x0(Some("x"), &disc).is_err());

        let gauss = build_task(&TaskSpec {
            task: Some("gaussian".into()),
            k: Some(2),
            d: Some(2),
            sep: Some(4.0),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(
            build_x0(None, &gauss).unwrap(),
            InputPoint::Vector(vec![0.0, 0.0])
        );
        assert_eq!(
            build_x0(Some("[1.0, 2.0]"), &gauss).unwrap(),
            InputPoint::Vector(vec![1.0, 2.0])
        );
    }

    #[test]
    fn learner_auto_is_canonical() {
        let task = build_task(&TaskSpec {
            task: Some("bijection".into()),
            k: Some(6),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(
            build_learner(None, None, None, &task).unwrap(),
            Learner::Bijection { k: 6 }
        );
        assert!(build_learner(Some("radius_nn"), None, None, &task)
            .unwrap_err()
            .to_string()
            .contains("--r"));
        assert_eq!(
            build_learner(Some("radius_nn"), None, Some(0.5), &task).unwrap(),
            Learner::RadiusNn { r: 0.5, k: 6 }
        );
    }
}
