//! The modified Ehrenfest model: N independent two-state Markov chains with
//! flip probability p per step, empirical one-particle distribution, the
//! discrete relaxation law `f(t+1) = f(t) + p(1 - 2 f(t))`, time-reversal
//! residuals, the collision-number statistic, and the exchangeability
//! variance identity.
//!
//! Ball n's trajectory is a pure function of `(master_seed, n)`, so growing
//! N while keeping the master seed extends the same infinite path family.

use crate::curve::{Curve, CurveMeta};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::seqcore::{bernoulli_threshold, derive_stream_seed, BitString, SplitMix64};
use crate::stats::{self, DeviationEstimate};
use rayon::prelude::*;
use serde::Serialize;

/// Per-ball chain parameters: flip probability p in (0, 1/2) and initial
/// occupation probability alpha.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BallChainParams {
    p: f64,
    alpha: f64,
}

impl BallChainParams {
    pub fn new(p: f64, alpha: f64) -> Result<Self> {
        if !(p > 0.0 && p < 0.5) {
            return Err(Error::invalid("p", format!("{p} not in (0, 1/2)")));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid("alpha", format!("{alpha} not in [0, 1]")));
        }
        Ok(BallChainParams { p, alpha })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Sampled trajectories X_n(t) for n < N, t <= tau, stored per time slice.
#[derive(Clone, Debug)]
pub struct PathEnsemble {
    pub params: BallChainParams,
    pub master_seed: u64,
    states: Vec<BitString>,
}

impl PathEnsemble {
    pub fn n(&self) -> usize {
        self.states[0].len()
    }

    pub fn tau(&self) -> u32 {
        (self.states.len() - 1) as u32
    }

    pub fn state(&self, t: u32) -> &BitString {
        &self.states[t as usize]
    }

    pub fn bit(&self, ball: usize, t: u32) -> bool {
        self.states[t as usize].get(ball)
    }
}

/// Draws the full ensemble: X_n(0) ~ Bernoulli(alpha) independently and
/// X_n(t+1) = X_n(t) XOR Bernoulli(p), independently across balls and steps.
pub fn sample_ensemble(
    params: BallChainParams,
    n: usize,
    tau: u32,
    master_seed: u64,
) -> Result<PathEnsemble> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one ball"));
    }
    let t_init = bernoulli_threshold(params.alpha);
    let t_flip = bernoulli_threshold(params.p);
    let mut states = vec![BitString::zeros(n); tau as usize + 1];
    for ball in 0..n {
        let mut rng = SplitMix64::new(derive_stream_seed(master_seed, ball as u64));
        let mut x = rng.bernoulli(t_init);
        states[0].set(ball, x);
        for t in 1..=tau {
            x ^= rng.bernoulli(t_flip);
            states[t as usize].set(ball, x);
        }
    }
    Ok(PathEnsemble {
        params,
        master_seed,
        states,
    })
}

/// Empirical one-particle distribution `f_N(t) = N^{-1} sum_n X_n(t)`.
pub fn empirical_curve(ens: &PathEnsemble) -> Curve<f64> {
    let n = ens.n() as f64;
    let times = (0..=ens.tau()).map(|t| t as f64).collect();
    let values = ens.states.iter().map(|s| s.count_ones() as f64 / n).collect();
    let meta = CurveMeta::new("modified-ehrenfest-empirical")
        .with("n", ens.n() as f64)
        .with("p", ens.params.p)
        .with("alpha", ens.params.alpha)
        .seeded(ens.master_seed);
    Curve::new(times, values, meta)
}

/// Closed-form mean `1/2 + (alpha - 1/2)(1 - 2p)^t`.
pub fn mean_value<R: Real>(alpha: R, p: R, t: u32) -> R {
    let half = lit::<R>(0.5);
    half + (alpha - half) * (R::one() - lit::<R>(2.0) * p).powi(t as i32)
}

/// One step of the relaxation law `f <- f + p (1 - 2 f)`.
pub fn mean_recursion_step<R: Real>(f: R, p: R) -> R {
    f + p * (R::one() - lit::<R>(2.0) * f)
}

pub fn mean_curve(params: BallChainParams, tau: u32) -> Curve<f64> {
    let times = (0..=tau).map(|t| t as f64).collect();
    let values = (0..=tau)
        .map(|t| mean_value(params.alpha, params.p, t))
        .collect();
    let meta = CurveMeta::new("modified-ehrenfest-mean")
        .with("p", params.p)
        .with("alpha", params.alpha);
    Curve::new(times, values, meta)
}

fn trial_deviation_sup(params: BallChainParams, n: usize, tau: u32, seed: u64) -> f64 {
    let t_init = bernoulli_threshold(params.alpha);
    let t_flip = bernoulli_threshold(params.p);
    let mut counts = vec![0u64; tau as usize + 1];
    for ball in 0..n {
        let mut rng = SplitMix64::new(derive_stream_seed(seed, ball as u64));
        let mut x = rng.bernoulli(t_init);
        counts[0] += x as u64;
        for t in 1..=tau {
            x ^= rng.bernoulli(t_flip);
            counts[t as usize] += x as u64;
        }
    }
    let mut sup: f64 = 0.0;
    for t in 0..=tau {
        let f_emp = counts[t as usize] as f64 / n as f64;
        sup = sup.max((f_emp - mean_value(params.alpha, params.p, t)).abs());
    }
    sup
}

/// Monte Carlo estimate of `P(sup_{t <= tau} |f_N(t) - f(t)| > 1/m)`.
pub fn deviation_probability(
    params: BallChainParams,
    n: usize,
    tau: u32,
    m: u32,
    trials: u64,
    master_seed: u64,
) -> Result<DeviationEstimate> {
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    if m == 0 {
        return Err(Error::invalid("m", "threshold index must be positive"));
    }
    let threshold = 1.0 / m as f64;
    let hits = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_stream_seed(master_seed, trial);
            (trial_deviation_sup(params, n, tau, seed) > threshold) as u64
        })
        .sum();
    Ok(DeviationEstimate::from_hits(n as u64, threshold, trials, hits))
}

/// Per-time variant: `P(|f_N(t) - f(t)| > 1/m)` at a single time.
pub fn deviation_probability_at_time(
    params: BallChainParams,
    n: usize,
    t: u32,
    m: u32,
    trials: u64,
    master_seed: u64,
) -> Result<DeviationEstimate> {
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    if m == 0 {
        return Err(Error::invalid("m", "threshold index must be positive"));
    }
    let threshold = 1.0 / m as f64;
    let f_t = mean_value(params.alpha, params.p, t);
    let t_init = bernoulli_threshold(params.alpha);
    let t_flip = bernoulli_threshold(params.p);
    let hits = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_stream_seed(master_seed, trial);
            let mut count = 0u64;
            for ball in 0..n {
                let mut rng = SplitMix64::new(derive_stream_seed(seed, ball as u64));
                let mut x = rng.bernoulli(t_init);
                for _ in 0..t {
                    x ^= rng.bernoulli(t_flip);
                }
                count += x as u64;
            }
            ((count as f64 / n as f64 - f_t).abs() > threshold) as u64
        })
        .sum();
    Ok(DeviationEstimate::from_hits(n as u64, threshold, trials, hits))
}

/// Collision-number statistic at one time step.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StosszahlReport {
    pub t: u32,
    /// `Z_N(t) = N^{-1} sum_n X_n(t) (Y_n(t) - p)` with Y the jump indicator.
    pub statistic: f64,
    /// `sqrt(p (1-p) / N)`, the scale the statistic should live on.
    pub expected_scale: f64,
}

/// The statistic for every step `t < tau`; its magnitude measures how far
/// the occupied balls' jump rate strays from p.
pub fn stosszahl_statistic(ens: &PathEnsemble) -> Vec<StosszahlReport> {
    let n = ens.n() as f64;
    let p = ens.params.p;
    let scale = (p * (1.0 - p) / n).sqrt();
    (0..ens.tau())
        .map(|t| {
            let cur = ens.state(t);
            let next = ens.state(t + 1);
            let mut occupied = 0u64;
            let mut jumped_while_occupied = 0u64;
            for (a, b) in cur.words().iter().zip(next.words()) {
                occupied += a.count_ones() as u64;
                jumped_while_occupied += (a & (a ^ b)).count_ones() as u64;
            }
            StosszahlReport {
                t,
                statistic: (jumped_while_occupied as f64 - p * occupied as f64) / n,
                expected_scale: scale,
            }
        })
        .collect()
}

/// Residuals of a discrete curve against the forward law
/// `g(t+1) = g(t) + p(1 - 2 g(t))` and the backward law
/// `g(t) = g(t+1) + p(1 - 2 g(t+1))` (the exact inverse of the forward law).
#[derive(Clone, Debug, Serialize)]
pub struct ResidualPair {
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
}

pub fn reversal_residuals(values: &[f64], p: f64) -> ResidualPair {
    let steps = values.len().saturating_sub(1);
    let mut forward = Vec::with_capacity(steps);
    let mut backward = Vec::with_capacity(steps);
    for t in 0..steps {
        let (g0, g1) = (values[t], values[t + 1]);
        forward.push(g1 - g0 - p * (1.0 - 2.0 * g0));
        backward.push(g0 - g1 - p * (1.0 - 2.0 * g1));
    }
    ResidualPair { forward, backward }
}

/// Initial law used by the variance-identity estimator. Both are
/// exchangeable; only the i.i.d. one is pairwise independent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InitialLaw {
    /// X_n(0) i.i.d. Bernoulli(alpha).
    Iid,
    /// Ball 0 is Bernoulli(alpha); every other ball copies it.
    AllCopyFirst,
}

/// Empirical test of `Var(S_N) = sigma^2/N + (1 - 1/N) rho` across replicas.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct VarianceIdentityReport {
    pub var_s: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub rhs: f64,
    pub gap: f64,
}

pub fn exchangeable_variance(
    alpha: f64,
    n: usize,
    replicas: usize,
    master_seed: u64,
    law: InitialLaw,
) -> Result<VarianceIdentityReport> {
    if replicas < 2 {
        return Err(Error::invalid("replicas", "need at least two replicas"));
    }
    if n < 2 {
        return Err(Error::invalid("n", "need at least two balls"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", format!("{alpha} not in [0, 1]")));
    }
    let thr = bernoulli_threshold(alpha);
    let mut s_vals = Vec::with_capacity(replicas);
    let mut x0_vals = Vec::with_capacity(replicas);
    let mut x1_vals = Vec::with_capacity(replicas);
    for r in 0..replicas {
        let seed = derive_stream_seed(master_seed, r as u64);
        let (x0, x1, sum) = match law {
            InitialLaw::Iid => {
                let mut sum = 0u64;
                let mut first_two = [false; 2];
                for ball in 0..n {
                    let mut rng = SplitMix64::new(derive_stream_seed(seed, ball as u64));
                    let x = rng.bernoulli(thr);
                    if ball < 2 {
                        first_two[ball] = x;
                    }
                    sum += x as u64;
                }
                (first_two[0], first_two[1], sum)
            }
            InitialLaw::AllCopyFirst => {
                let mut rng = SplitMix64::new(derive_stream_seed(seed, 0));
                let x = rng.bernoulli(thr);
                (x, x, if x { n as u64 } else { 0 })
            }
        };
        s_vals.push(sum as f64 / n as f64);
        x0_vals.push(x0 as u64 as f64);
        x1_vals.push(x1 as u64 as f64);
    }
    let var_s = stats::sample_variance(&s_vals);
    let sigma2 = stats::sample_variance(&x0_vals);
    let rho = stats::sample_covariance(&x0_vals, &x1_vals);
    let rhs = sigma2 / n as f64 + (1.0 - 1.0 / n as f64) * rho;
    Ok(VarianceIdentityReport {
        var_s,
        sigma2,
        rho,
        rhs,
        gap: (var_s - rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, alpha: f64) -> BallChainParams {
        BallChainParams::new(p, alpha).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(BallChainParams::new(0.0, 0.5).is_err());
        assert!(BallChainParams::new(0.5, 0.5).is_err());
        assert!(BallChainParams::new(0.25, 1.5).is_err());
        assert!(BallChainParams::new(0.25, 1.0).is_ok());
    }

    #[test]
    fn ensemble_deterministic_start_and_reproducibility() {
        // alpha = 1: every ball starts occupied.
        let ens = sample_ensemble(params(0.25, 1.0), 500, 3, 11).unwrap();
        assert_eq!(ens.state(0).count_ones(), 500);

        let a = sample_ensemble(params(0.3, 0.6), 200, 5, 42).unwrap();
        let b = sample_ensemble(params(0.3, 0.6), 200, 5, 42).unwrap();
        for t in 0..=5 {
            assert_eq!(a.state(t), b.state(t));
        }
    }

    #[test]
    fn ensemble_extends_consistently_in_n() {
        // Truncation invariance: the first N balls of a larger ensemble are
        // the same trajectories.
        let small = sample_ensemble(params(0.25, 0.5), 100, 4, 7).unwrap();
        let large = sample_ensemble(params(0.25, 0.5), 1000, 4, 7).unwrap();
        for t in 0..=4 {
            for ball in 0..100 {
                assert_eq!(small.bit(ball, t), large.bit(ball, t));
            }
        }
    }

    #[test]
    fn empirical_curve_hand_counts() {
        let ens = sample_ensemble(params(0.25, 1.0), 4, 2, 3).unwrap();
        let c = empirical_curve(&ens);
        assert_eq!(c.values()[0], 1.0);
        let expect = ens.state(1).count_ones() as f64 / 4.0;
        assert_eq!(c.values()[1], expect);
    }

    #[test]
    fn mean_curve_examples() {
        assert_eq!(mean_value(1.0f64, 0.25, 1), 0.75);
        assert_eq!(mean_value(1.0f64, 0.25, 2), 0.625);
        for t in 0..5 {
            assert_eq!(mean_value(0.5f64, 0.25, t), 0.5);
        }
        // recursion agrees with the closed form
        let p = 0.3;
        let mut f = 0.9f64;
        for t in 0..=50u32 {
            assert!((f - mean_value(0.9, p, t)).abs() <= 1e-12);
            f = mean_recursion_step(f, p);
        }
    }

    #[test]
    fn mean_value_generic_scalar() {
        assert_eq!(mean_value(1.0f32, 0.25f32, 1), 0.75f32);
    }

    #[test]
    fn single_ball_transition_frequencies() {
        // Each ball follows the two-state kernel: flip rate p within 3 se.
        let p = 0.25;
        let steps = 100_000u32;
        let ens = sample_ensemble(params(p, 0.5), 1, steps, 99).unwrap();
        let mut flips = 0u64;
        for t in 0..steps {
            flips += (ens.bit(0, t) != ens.bit(0, t + 1)) as u64;
        }
        let freq = flips as f64 / steps as f64;
        let se = (p * (1.0 - p) / steps as f64).sqrt();
        assert!((freq - p).abs() <= 3.0 * se, "flip rate {freq}");
    }

    #[test]
    fn deviation_probability_trivial_threshold() {
        // m = 1: deviations cannot exceed 1.
        let est = deviation_probability(params(0.25, 0.9), 32, 3, 1, 200, 5).unwrap();
        assert_eq!(est.hits, 0);
    }

    #[test]
    fn deviation_probability_single_ball_enumeration() {
        // N=1, alpha=1, p=1/4, m=3, tau=1: f(1) = 3/4 and f_1(1) is 0 or 1.
        // |1 - 3/4| = 1/4 <= 1/3, so the sup exceeds 1/3 exactly when the
        // ball flips, i.e. with probability p = 1/4.
        let est = deviation_probability(params(0.25, 1.0), 1, 1, 3, 40_000, 123).unwrap();
        assert!(
            (est.estimate - 0.25).abs() <= 4.0 * est.std_error + 1e-12,
            "estimate {} vs 1/4",
            est.estimate
        );
    }

    #[test]
    fn deviation_probability_decays_in_n() {
        let pr = params(0.25, 0.9);
        let estimates: Vec<f64> = [64usize, 256, 1024]
            .iter()
            .map(|&n| {
                deviation_probability(pr, n, 5, 10, 4000, 2026)
                    .unwrap()
                    .estimate
            })
            .collect();
        assert!(estimates[0] > estimates[1], "{estimates:?}");
        assert!(estimates[1] > estimates[2] || estimates[2] == 0.0, "{estimates:?}");
    }

    #[test]
    fn per_time_deviation_consistent_with_sup() {
        let pr = params(0.25, 0.9);
        let sup = deviation_probability(pr, 64, 5, 10, 2000, 8).unwrap();
        let at5 = deviation_probability_at_time(pr, 64, 5, 10, 2000, 8).unwrap();
        assert!(sup.estimate >= at5.estimate);
    }

    #[test]
    fn stosszahl_trivial_cases() {
        // all X_n(t) = 0: the statistic vanishes regardless of jumps
        let ens = PathEnsemble {
            params: params(0.25, 0.0),
            master_seed: 0,
            states: vec![BitString::zeros(256); 5],
        };
        for rep in stosszahl_statistic(&ens) {
            assert_eq!(rep.statistic, 0.0);
        }
        // frozen dynamics (p below the generator's 2^-64 resolution):
        // no jumps, so Z_N(t) = -p f_N(t) = 0 up to p itself
        let ens = sample_ensemble(params(1e-30, 0.7), 256, 4, 5).unwrap();
        for t in 1..=4 {
            assert_eq!(ens.state(t), ens.state(0));
        }
        for rep in stosszahl_statistic(&ens) {
            assert!(rep.statistic.abs() <= 1e-29);
        }
        // |Z| <= 1 always
        let ens = sample_ensemble(params(0.49, 0.5), 64, 6, 6).unwrap();
        for rep in stosszahl_statistic(&ens) {
            assert!(rep.statistic.abs() <= 1.0);
        }
    }

    #[test]
    fn stosszahl_scale() {
        let n = 4096usize;
        let p = 0.25;
        let ens = sample_ensemble(params(p, 0.9), n, 10, 77).unwrap();
        let bound = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
        for rep in stosszahl_statistic(&ens) {
            assert!(rep.statistic.abs() <= bound, "t={} stat={}", rep.t, rep.statistic);
        }
    }

    #[test]
    fn reversal_residual_examples() {
        // g = 1/2 everywhere: both residuals vanish
        let r = reversal_residuals(&[0.5; 6], 0.25);
        assert!(r.forward.iter().all(|v| *v == 0.0));
        assert!(r.backward.iter().all(|v| *v == 0.0));

        // exact mean curve alpha=1, p=1/4, tau=2, reversed:
        // r_B = 0 exactly, r_F(0) = 3/16.
        let curve = mean_curve(params(0.25, 1.0), 2);
        let g: Vec<f64> = curve.reversed().values().to_vec();
        let r = reversal_residuals(&g, 0.25);
        assert!(r.backward.iter().all(|v| v.abs() <= 1e-15));
        assert!((r.forward[0] - 3.0 / 16.0).abs() <= 1e-15);

        // double reversal restores the forward residual profile
        let fwd: Vec<f64> = curve.values().to_vec();
        let r2 = reversal_residuals(&fwd, 0.25);
        assert!(r2.forward.iter().all(|v| v.abs() <= 1e-15));
        assert!(r2.backward.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn exchangeable_variance_iid() {
        // i.i.d. Bernoulli(1/2), N = 10: Var(S_N) ~ 0.025, rho ~ 0.
        let rep = exchangeable_variance(0.5, 10, 20_000, 1, InitialLaw::Iid).unwrap();
        assert!((rep.var_s - 0.025).abs() < 0.002, "var {}", rep.var_s);
        assert!(rep.rho.abs() < 0.01, "rho {}", rep.rho);
        assert!(rep.gap <= 8e-3, "gap {}", rep.gap);
    }

    #[test]
    fn exchangeable_variance_degenerate_and_coupled() {
        // deterministic start: everything vanishes
        let rep = exchangeable_variance(1.0, 10, 100, 2, InitialLaw::Iid).unwrap();
        assert_eq!(rep.var_s, 0.0);
        assert_eq!(rep.sigma2, 0.0);

        // perfectly correlated: Var(S_N) = sigma^2 = rho
        let rep = exchangeable_variance(0.5, 10, 20_000, 3, InitialLaw::AllCopyFirst).unwrap();
        assert!((rep.var_s - rep.sigma2).abs() < 1e-12);
        assert!((rep.rho - rep.sigma2).abs() < 1e-12);
        assert!(rep.gap <= 1e-12 + rep.sigma2 * 0.2);

        assert!(exchangeable_variance(0.5, 10, 1, 4, InitialLaw::Iid).is_err());
    }
}
