//! Total variation distances and a constructive maximal coupling.
//!
//! The coupling construction: draw u from U, keep v = u with probability
//! min(1, q(u)/p(u)), otherwise draw v from the residual (q - min(p, q))/delta
//! by rejection from V. The pair then has marginals exactly U and V and
//! mismatches with probability exactly delta(U, V), which is what makes it
//! the optimal distribution-indistinguishability transform.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::rng::StreamRng;
use crate::stats::normal_central_mass;

const RESIDUAL_REJECTION_CAP: usize = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum CouplingError {
    #[error("finite distributions must share a support size ({0} vs {1})")]
    SupportMismatch(usize, usize),
    #[error("gaussian means must share a dimension ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("probabilities must be non-negative and sum to 1 (sum = {0})")]
    InvalidProbabilities(f64),
    #[error("unsupported distribution pair (finite with gaussian)")]
    UnsupportedPair,
    #[error("residual rejection sampling exceeded {RESIDUAL_REJECTION_CAP} iterations")]
    RejectionCapExceeded,
    #[error("sample value does not belong to the distribution's space")]
    SampleMismatch,
}

/// A probability vector over a finite support 0..len.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    probs: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, CouplingError> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Err(CouplingError::InvalidProbabilities(sum));
        }
        Ok(FiniteDistribution { probs })
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs.get(i).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample(&self, rng: &mut StreamRng) -> usize {
        let x: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last_positive = i;
                if x < acc {
                    return i;
                }
            }
        }
        // Floating-point shortfall at the top of the CDF.
        last_positive
    }
}

/// Unit-covariance Gaussian, identified by its mean.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDistribution {
    mean: Vec<f64>,
}

impl GaussianDistribution {
    pub fn new(mean: Vec<f64>) -> Self {
        GaussianDistribution { mean }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        self.mean
            .iter()
            .map(|&c| c + rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// log density up to the shared normalization constant.
    fn log_density(&self, x: &[f64]) -> f64 {
        -0.5 * self
            .mean
            .iter()
            .zip(x)
            .map(|(m, v)| (v - m).powi(2))
            .sum::<f64>()
    }
}

/// Either leg of a coupling: index into a finite support or a real vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SampleValue {
    Index(usize),
    Point(Vec<f64>),
}

impl SampleValue {
    fn bitwise_eq(&self, other: &SampleValue) -> bool {
        match (self, other) {
            (SampleValue::Index(a), SampleValue::Index(b)) => a == b,
            (SampleValue::Point(a), SampleValue::Point(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => false,
        }
    }
}

/// A distribution a coupling can be built over.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Finite(FiniteDistribution),
    Gaussian(GaussianDistribution),
}

impl Distribution {
    pub fn sample(&self, rng: &mut StreamRng) -> SampleValue {
        match self {
            Distribution::Finite(f) => SampleValue::Index(f.sample(rng)),
            Distribution::Gaussian(g) => SampleValue::Point(g.sample(rng)),
        }
    }

    /// Exact total variation distance to another distribution of the same
    /// kind.
    pub fn tv(&self, other: &Distribution) -> Result<f64, CouplingError> {
        match (self, other) {
            (Distribution::Finite(u), Distribution::Finite(v)) => tv_finite(u, v),
            (Distribution::Gaussian(u), Distribution::Gaussian(v)) => {
                if u.dim() != v.dim() {
                    return Err(CouplingError::DimensionMismatch(u.dim(), v.dim()));
                }
                Ok(tv_gaussian_same_cov(u.mean(), v.mean()))
            }
            _ => Err(CouplingError::UnsupportedPair),
        }
    }
}

/// One draw from a maximal coupling of (U, V).
#[derive(Debug, Clone)]
pub struct CoupledPair {
    pub u: SampleValue,
    pub v: SampleValue,
    pub matched: bool,
}

/// Exact TV distance between two finite distributions: half the l1 gap,
/// equivalently the largest probability difference on any event.
pub fn tv_finite(u: &FiniteDistribution, v: &FiniteDistribution) -> Result<f64, CouplingError> {
    if u.support_size() != v.support_size() {
        return Err(CouplingError::SupportMismatch(
            u.support_size(),
            v.support_size(),
        ));
    }
    Ok(u.probs()
        .iter()
        .zip(v.probs())
        .map(|(p, q)| (p - q).abs())
        .sum::<f64>()
        / 2.0)
}

/// Exact TV distance between two unit-covariance Gaussians with the given
/// means: the central normal mass P[|N(0,1)| <= r] with r = ||mu - mu'|| / 2.
pub fn tv_gaussian_same_cov(mu: &[f64], mu2: &[f64]) -> f64 {
    assert_eq!(
        mu.len(),
        mu2.len(),
        "tv_gaussian_same_cov: dimension mismatch"
    );
    let dist = mu
        .iter()
        .zip(mu2)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    tv_gaussian_separation(dist)
}

/// TV distance between unit-covariance Gaussians whose means are `dist`
/// apart.
pub fn tv_gaussian_separation(dist: f64) -> f64 {
    normal_central_mass(dist / 2.0)
}

/// Samples v from the conditional coupling law W(v | u). Returns the value
/// and whether it matched u exactly (bitwise for vectors).
pub fn couple_given(
    u_dist: &Distribution,
    v_dist: &Distribution,
    u: &SampleValue,
    rng: &mut StreamRng,
) -> Result<(SampleValue, bool), CouplingError> {
    match (u_dist, v_dist, u) {
        (Distribution::Finite(p), Distribution::Finite(q), SampleValue::Index(i)) => {
            if p.support_size() != q.support_size() {
                return Err(CouplingError::SupportMismatch(
                    p.support_size(),
                    q.support_size(),
                ));
            }
            if *i >= p.support_size() {
                return Err(CouplingError::SampleMismatch);
            }
            let (pi, qi) = (p.prob(*i), q.prob(*i));
            // p(u) = 0 is guarded as acceptance probability 1.
            let keep = pi <= 0.0 || rng.random::<f64>() * pi < qi;
            if keep {
                return Ok((SampleValue::Index(*i), true));
            }
            for _ in 0..RESIDUAL_REJECTION_CAP {
                let j = q.sample(rng);
                let accept = 1.0 - p.prob(j) / q.prob(j);
                if accept > 0.0 && rng.random::<f64>() < accept {
                    return Ok((SampleValue::Index(j), false));
                }
            }
            Err(CouplingError::RejectionCapExceeded)
        }
        (Distribution::Gaussian(p), Distribution::Gaussian(q), SampleValue::Point(x)) => {
            if p.dim() != q.dim() {
                return Err(CouplingError::DimensionMismatch(p.dim(), q.dim()));
            }
            if x.len() != p.dim() {
                return Err(CouplingError::SampleMismatch);
            }
            let diff = q.log_density(x) - p.log_density(x);
            if diff >= 0.0 || rng.random::<f64>().ln() < diff {
                return Ok((SampleValue::Point(x.clone()), true));
            }
            for _ in 0..RESIDUAL_REJECTION_CAP {
                let y = q.sample(rng);
                let accept = 1.0 - (p.log_density(&y) - q.log_density(&y)).exp();
                if accept > 0.0 && rng.random::<f64>() < accept {
                    return Ok((SampleValue::Point(y), false));
                }
            }
            Err(CouplingError::RejectionCapExceeded)
        }
        (Distribution::Finite(_), Distribution::Finite(_), _)
        | (Distribution::Gaussian(_), Distribution::Gaussian(_), _) => {
            Err(CouplingError::SampleMismatch)
        }
        _ => Err(CouplingError::UnsupportedPair),
    }
}

/// Draws (u, v) from a maximal coupling: marginals are exactly U and V and
/// Pr[u != v] equals the total variation distance.
pub fn maximal_coupling_sample(
    u_dist: &Distribution,
    v_dist: &Distribution,
    rng: &mut StreamRng,
) -> Result<CoupledPair, CouplingError> {
    let u = u_dist.sample(rng);
    let (v, matched) = couple_given(u_dist, v_dist, &u, rng)?;
    Ok(CoupledPair { u, v, matched })
}

/// Element-wise conditional coupling of a whole dataset of inputs drawn from
/// U: the output is distributed as V^N and the expected number of changed
/// elements is delta(U, V) * N. Returns the transformed inputs and the exact
/// changed count.
pub fn coupled_dataset_transform(
    u_dist: &Distribution,
    v_dist: &Distribution,
    inputs: &[SampleValue],
    rng: &mut StreamRng,
) -> Result<(Vec<SampleValue>, usize), CouplingError> {
    let mut out = Vec::with_capacity(inputs.len());
    let mut changed = 0;
    for u in inputs {
        let (v, matched) = couple_given(u_dist, v_dist, u, rng)?;
        debug_assert_eq!(matched, v.bitwise_eq(u));
        if !matched {
            changed += 1;
        }
        out.push(v);
    }
    Ok((out, changed))
}

/// Monte Carlo estimate of a detector's discrimination advantage
/// E_{U^n}[f] - E_{V^n}[f].
#[derive(Debug, Clone, Serialize)]
pub struct AdvantageEstimate {
    pub advantage: f64,
    pub se: f64,
    pub mean_u: f64,
    pub mean_v: f64,
    pub trials: usize,
}

pub fn discrimination_advantage<F>(
    detector: F,
    u_dist: &Distribution,
    v_dist: &Distribution,
    n: usize,
    trials: usize,
    rng: &mut StreamRng,
) -> AdvantageEstimate
where
    F: Fn(&[SampleValue]) -> bool,
{
    assert!(trials >= 1, "discrimination_advantage: trials must be >= 1");
    let run = |dist: &Distribution, rng: &mut StreamRng| -> f64 {
        let mut hits = 0usize;
        let mut buf = Vec::with_capacity(n);
        for _ in 0..trials {
            buf.clear();
            for _ in 0..n {
                buf.push(dist.sample(rng));
            }
            if detector(&buf) {
                hits += 1;
            }
        }
        hits as f64 / trials as f64
    };
    let mean_u = run(u_dist, rng);
    let mean_v = run(v_dist, rng);
    let se = ((mean_u * (1.0 - mean_u) + mean_v * (1.0 - mean_v)) / trials as f64).sqrt();
    AdvantageEstimate {
        advantage: mean_u - mean_v,
        se,
        mean_u,
        mean_v,
        trials,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngKey;
    use crate::stats::chi_square_gof;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fin(probs: &[f64]) -> Distribution {
        Distribution::Finite(FiniteDistribution::new(probs.to_vec()).unwrap())
    }

    fn gauss(mean: &[f64]) -> Distribution {
        Distribution::Gaussian(GaussianDistribution::new(mean.to_vec()))
    }

    #[test]
    fn tv_finite_examples() {
        let u = FiniteDistribution::new(vec![0.5, 0.5]).unwrap();
        let v = FiniteDistribution::new(vec![0.8, 0.2]).unwrap();
        assert_abs_diff_eq!(tv_finite(&u, &u).unwrap(), 0.0);
        assert_abs_diff_eq!(tv_finite(&u, &v).unwrap(), 0.3, epsilon = 1e-15);
        let a = FiniteDistribution::new(vec![1.0, 0.0]).unwrap();
        let b = FiniteDistribution::new(vec![0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(tv_finite(&a, &b).unwrap(), 1.0);
        let c = FiniteDistribution::new(vec![1.0]).unwrap();
        assert!(matches!(
            tv_finite(&a, &c),
            Err(CouplingError::SupportMismatch(2, 1))
        ));
    }

    #[test]
    fn tv_gaussian_examples() {
        assert_eq!(tv_gaussian_same_cov(&[1.5, -2.0], &[1.5, -2.0]), 0.0);
        assert_abs_diff_eq!(
            tv_gaussian_same_cov(&[0.0], &[2.0]),
            0.682_689_492_137_085_9,
            epsilon = 1e-12
        );
        assert!(tv_gaussian_separation(20.0) > 0.9999);
    }

    #[test]
    fn invalid_probability_vectors_are_rejected() {
        assert!(FiniteDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(FiniteDistribution::new(vec![1.2, -0.2]).is_err());
    }

    #[test]
    fn identical_distributions_always_match() {
        let u = fin(&[0.3, 0.7]);
        let mut rng = RngKey::root(1).stream();
        for _ in 0..200 {
            let pair = maximal_coupling_sample(&u, &u, &mut rng).unwrap();
            assert!(pair.matched);
            assert_eq!(pair.u, pair.v);
        }
    }

    #[test]
    fn mixed_distribution_kinds_are_rejected() {
        let mut rng = RngKey::root(0).stream();
        let err = maximal_coupling_sample(&fin(&[1.0]), &gauss(&[0.0]), &mut rng);
        assert!(matches!(err, Err(CouplingError::UnsupportedPair)));
    }

    #[test]
    fn finite_coupling_mismatch_rate_and_marginals() {
        let u = fin(&[0.5, 0.5]);
        let v = fin(&[0.8, 0.2]);
        let draws = 100_000;
        let mut rng = RngKey::root(42).stream();
        let mut mismatches = 0usize;
        let mut u_counts = [0u64; 2];
        let mut v_counts = [0u64; 2];
        for _ in 0..draws {
            let pair = maximal_coupling_sample(&u, &v, &mut rng).unwrap();
            if !pair.matched {
                mismatches += 1;
            }
            if let SampleValue::Index(i) = pair.u {
                u_counts[i] += 1;
            }
            if let SampleValue::Index(j) = pair.v {
                v_counts[j] += 1;
            }
        }
        let rate = mismatches as f64 / draws as f64;
        let se = (0.3f64 * 0.7 / draws as f64).sqrt();
        assert!((rate - 0.3).abs() < 4.0 * se, "rate = {rate}");
        // Marginal goodness of fit at significance 0.001.
        let (_, p_u) = chi_square_gof(&u_counts, &[0.5, 0.5]);
        let (_, p_v) = chi_square_gof(&v_counts, &[0.8, 0.2]);
        assert!(p_u > 0.001, "u marginal p = {p_u}");
        assert!(p_v > 0.001, "v marginal p = {p_v}");
    }

    #[test]
    fn gaussian_coupling_mismatch_rate_and_moments() {
        let u = gauss(&[0.0]);
        let v = gauss(&[2.0]);
        let delta = 0.682_689_492_137_085_9;
        let draws = 100_000;
        let mut rng = RngKey::root(7).stream();
        let mut mismatches = 0usize;
        let mut vs = Vec::with_capacity(draws);
        let mut us = Vec::with_capacity(draws);
        for _ in 0..draws {
            let pair = maximal_coupling_sample(&u, &v, &mut rng).unwrap();
            if !pair.matched {
                mismatches += 1;
            }
            if let (SampleValue::Point(a), SampleValue::Point(b)) = (&pair.u, &pair.v) {
                us.push(a[0]);
                vs.push(b[0]);
            }
        }
        let rate = mismatches as f64 / draws as f64;
        let se = (delta * (1.0 - delta) / draws as f64).sqrt();
        assert!((rate - delta).abs() < 4.0 * se, "rate = {rate}");

        let moment_tol = 4.0 / (draws as f64).sqrt();
        let (mu_u, sd_u) = crate::stats::mean_sd(&us);
        let (mu_v, sd_v) = crate::stats::mean_sd(&vs);
        assert!(mu_u.abs() < moment_tol, "u mean = {mu_u}");
        assert!((mu_v - 2.0).abs() < moment_tol, "v mean = {mu_v}");
        let var_tol = 4.0 * (2.0 / (draws as f64 - 1.0)).sqrt();
        assert!((sd_u * sd_u - 1.0).abs() < var_tol);
        assert!((sd_v * sd_v - 1.0).abs() < var_tol);
    }

    #[test]
    fn dataset_transform_identity_and_changed_count() {
        let u = fin(&[0.5, 0.5]);
        let v = fin(&[0.8, 0.2]);
        let mut rng = RngKey::root(3).stream();
        let inputs: Vec<SampleValue> = (0..100).map(|_| u.sample(&mut rng)).collect();

        let (same, changed) = coupled_dataset_transform(&u, &u, &inputs, &mut rng).unwrap();
        assert_eq!(same, inputs);
        assert_eq!(changed, 0);

        // Mean changed count over repeated transforms approaches delta * N.
        let trials = 1000;
        let mut total = 0usize;
        for t in 0..trials {
            let mut r = RngKey::root(100).child(t).stream();
            let fresh: Vec<SampleValue> = (0..100).map(|_| u.sample(&mut r)).collect();
            let (_, c) = coupled_dataset_transform(&u, &v, &fresh, &mut r).unwrap();
            total += c;
        }
        let mean = total as f64 / trials as f64;
        assert!((mean - 30.0).abs() < 1.5, "mean changed = {mean}");
    }

    #[test]
    fn gaussian_dataset_transform_changed_count() {
        let u = gauss(&[0.0]);
        let v = gauss(&[2.0]);
        let trials = 400;
        let mut total = 0usize;
        for t in 0..trials {
            let mut r = RngKey::root(55).child(t).stream();
            let fresh: Vec<SampleValue> = (0..50).map(|_| u.sample(&mut r)).collect();
            let (_, c) = coupled_dataset_transform(&u, &v, &fresh, &mut r).unwrap();
            total += c;
        }
        let mean = total as f64 / trials as f64;
        // delta * N = 0.6827 * 50 = 34.13
        assert!((mean - 34.13).abs() < 2.0, "mean changed = {mean}");
    }

    #[test]
    fn constant_detector_has_zero_advantage() {
        let u = fin(&[0.5, 0.5]);
        let v = fin(&[0.8, 0.2]);
        let mut rng = RngKey::root(8).stream();
        let est = discrimination_advantage(|_| true, &u, &v, 3, 2000, &mut rng);
        assert_eq!(est.advantage, 0.0);
    }

    #[test]
    fn max_ratio_detector_attains_tv_at_n1() {
        let u = fin(&[0.5, 0.5]);
        let v = fin(&[0.8, 0.2]);
        let mut rng = RngKey::root(9).stream();
        // Indicator of the outcome where U out-weighs V.
        let est = discrimination_advantage(
            |d| matches!(d[0], SampleValue::Index(1)),
            &u,
            &v,
            1,
            20_000,
            &mut rng,
        );
        assert!(
            (est.advantage - 0.3).abs() < 4.0 * est.se,
            "adv = {}",
            est.advantage
        );
    }

    #[test]
    fn advantage_matches_the_exhaustive_product_space_expectation() {
        // n = 2 likelihood-ratio detector: enumerate the four outcomes of
        // the product space to get the exact advantage, then check the
        // Monte Carlo estimate against it.
        let p = [0.5, 0.5];
        let q = [0.8, 0.2];
        let mut exact = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let detect = p[i] * p[j] > q[i] * q[j];
                if detect {
                    exact += p[i] * p[j] - q[i] * q[j];
                }
            }
        }
        assert_abs_diff_eq!(exact, 0.39, epsilon = 1e-12);

        let u = fin(&p);
        let v = fin(&q);
        let mut rng = RngKey::root(12).stream();
        let est = discrimination_advantage(
            |d| {
                let ratio: f64 = d
                    .iter()
                    .map(|s| match s {
                        SampleValue::Index(i) => 0.5 / [0.8, 0.2][*i],
                        _ => unreachable!(),
                    })
                    .product();
                ratio > 1.0
            },
            &u,
            &v,
            2,
            20_000,
            &mut rng,
        );
        assert!(
            (est.advantage - exact).abs() <= 4.0 * est.se,
            "adv = {}",
            est.advantage
        );
    }

    #[test]
    fn likelihood_ratio_detector_respects_the_linear_bound() {
        let u = fin(&[0.5, 0.5]);
        let v = fin(&[0.8, 0.2]);
        let delta = 0.3;
        for n in [1usize, 2, 4] {
            let mut rng = RngKey::root(10).child(n as u64).stream();
            let est = discrimination_advantage(
                |d| {
                    let ratio: f64 = d
                        .iter()
                        .map(|s| match s {
                            SampleValue::Index(i) => 0.5 / [0.8, 0.2][*i],
                            _ => unreachable!(),
                        })
                        .product();
                    ratio > 1.0
                },
                &u,
                &v,
                n,
                10_000,
                &mut rng,
            );
            assert!(
                est.advantage <= n as f64 * delta + 4.0 * est.se,
                "n = {n}, adv = {}",
                est.advantage
            );
        }
    }

    proptest! {
        #[test]
        fn tv_finite_is_a_bounded_metric(
            raw_a in proptest::collection::vec(0.01f64..1.0, 4),
            raw_b in proptest::collection::vec(0.01f64..1.0, 4),
            raw_c in proptest::collection::vec(0.01f64..1.0, 4),
        ) {
            let norm = |raw: Vec<f64>| {
                let s: f64 = raw.iter().sum();
                FiniteDistribution::new(raw.iter().map(|p| p / s).collect()).unwrap()
            };
            let (a, b, c) = (norm(raw_a), norm(raw_b), norm(raw_c));
            let ab = tv_finite(&a, &b).unwrap();
            let ba = tv_finite(&b, &a).unwrap();
            let ac = tv_finite(&a, &c).unwrap();
            let cb = tv_finite(&c, &b).unwrap();
            prop_assert!((ab - ba).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!(ab <= ac + cb + 1e-12);
        }

        #[test]
        fn tv_gaussian_depends_only_on_separation(
            mu in proptest::collection::vec(-3.0f64..3.0, 2),
            dir in 0.0f64..std::f64::consts::TAU,
            dist in 0.0f64..6.0,
        ) {
            let shifted = vec![mu[0] + dist * dir.cos(), mu[1] + dist * dir.sin()];
            let tv = tv_gaussian_same_cov(&mu, &shifted);
            prop_assert!((tv - tv_gaussian_separation(dist)).abs() < 1e-9);
        }
    }
}
