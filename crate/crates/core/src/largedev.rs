//! Large deviations for Bernoulli sums: the Cramér rate function, two-sided
//! Chernoff upper bounds, and an exact binomial-tail oracle.
//!
//! For a Bernoulli(q) prior the rate function is the binary relative entropy
//!
//! ```text
//! I_q(x) = x ln(x/q) + (1-x) ln((1-x)/(1-q))      (nats, 0 ln 0 = 0)
//! ```
//!
//! with `I_q(q) = 0`, `I_q >= 0`, and `I_q` convex on [0, 1]. The deviation
//! event `V_N(eps) = { |S_N - c| > eps }` obeys the two-sided bound
//!
//! ```text
//! P(V_N(eps)) <= 2 exp(-N min(I_q(c + eps), I_q(c - eps)))
//! ```
//!
//! and the exact tail, computed here with arbitrary-precision integers,
//! converges to that exponential rate as N grows.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seqcore::BernoulliPrior;
use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

/// Largest sample size accepted by the exact enumeration oracle.
pub const EXACT_TAIL_MAX_N: u64 = 10_000;

/// Cramér rate function `I_q(x)` in nats, with the convention `0 ln 0 = 0`.
/// Degenerate priors (`q in {0, 1}`) are rejected.
pub fn rate<R: Real>(q1: R, x: R) -> Result<R> {
    if q1 <= R::zero() || q1 >= R::one() {
        return Err(Error::invalid("q1", "rate function needs q1 in (0, 1)"));
    }
    if x < R::zero() || x > R::one() {
        return Err(Error::invalid("x", "rate function argument must lie in [0, 1]"));
    }
    let one = R::one();
    let mut i = R::zero();
    if x > R::zero() {
        i = i + x * (x / q1).ln();
    }
    if x < one {
        i = i + (one - x) * ((one - x) / (one - q1)).ln();
    }
    Ok(i)
}

/// The deviation event `V_N(eps) = { |S_N - center| > eps }` under a prior.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DeviationEvent {
    pub n: u64,
    pub center: f64,
    pub epsilon: f64,
    pub prior: BernoulliPrior,
}

impl DeviationEvent {
    pub fn new(n: u64, center: f64, epsilon: f64, prior: BernoulliPrior) -> Result<Self> {
        if epsilon < 0.0 {
            return Err(Error::invalid("epsilon", "threshold must be nonnegative"));
        }
        Ok(DeviationEvent {
            n,
            center,
            epsilon,
            prior,
        })
    }
}

/// Exponent of the two-sided Chernoff bound: `min(I(c + eps), I(c - eps))`,
/// with both arguments clamped to [0, 1].
pub fn min_two_sided_rate(prior: &BernoulliPrior, center: f64, epsilon: f64) -> Result<f64> {
    let hi = (center + epsilon).clamp(0.0, 1.0);
    let lo = (center - epsilon).clamp(0.0, 1.0);
    Ok(rate(prior.q1(), hi)?.min(rate(prior.q1(), lo)?))
}

/// Two-sided Chernoff bound `2 exp(-N min I(c +/- eps))`. Vacuous (=2) at N=0.
pub fn cramer_bound(ev: &DeviationEvent) -> Result<f64> {
    Ok(cramer_log_bound(ev)?.exp())
}

/// Natural log of [`cramer_bound`]; immune to underflow for large N.
pub fn cramer_log_bound(ev: &DeviationEvent) -> Result<f64> {
    let r = min_two_sided_rate(&ev.prior, ev.center, ev.epsilon)?;
    Ok((2.0f64).ln() - ev.n as f64 * r)
}

/// Exact tail probability `sum_{k: |k/N - c| > eps} C(N,k) q^k (1-q)^{N-k}`,
/// as an exact rational. The boundary comparison is done in exact rational
/// arithmetic against the binary64 values of `center` and `epsilon`.
pub fn exact_tail(ev: &DeviationEvent) -> Result<BigRational> {
    if ev.n > EXACT_TAIL_MAX_N {
        return Err(Error::EnumerationTooLarge {
            n: ev.n,
            max: EXACT_TAIL_MAX_N,
        });
    }
    let n = ev.n;
    let q = BigRational::from_float(ev.prior.q1())
        .ok_or_else(|| Error::invalid("q1", "prior probability must be finite"))?;
    let center = BigRational::from_float(ev.center)
        .ok_or_else(|| Error::invalid("center", "must be finite"))?;
    let eps = BigRational::from_float(ev.epsilon)
        .ok_or_else(|| Error::invalid("epsilon", "must be finite"))?;
    let p0 = BigRational::one() - &q;

    // q^k and (1-q)^(N-k) built incrementally across k.
    let mut pow_q = BigRational::one();
    let mut pows_q = Vec::with_capacity(n as usize + 1);
    for _ in 0..=n {
        pows_q.push(pow_q.clone());
        pow_q *= &q;
    }
    let mut pow_p0 = BigRational::one();
    let mut pows_p0 = Vec::with_capacity(n as usize + 1);
    for _ in 0..=n {
        pows_p0.push(pow_p0.clone());
        pow_p0 *= &p0;
    }

    let n_rat = BigRational::from_integer(BigInt::from(n));
    let mut total = BigRational::zero();
    let mut binom = BigUint::one();
    for k in 0..=n {
        if k > 0 {
            // C(n, k) = C(n, k-1) * (n - k + 1) / k
            binom = binom * BigUint::from(n - k + 1) / BigUint::from(k);
        }
        let freq = BigRational::from_integer(BigInt::from(k)) / &n_rat;
        if (freq - &center).abs() > eps {
            let term = BigRational::from_integer(BigInt::from_biguint(
                Sign::Plus,
                binom.clone(),
            )) * &pows_q[k as usize]
                * &pows_p0[(n - k) as usize];
            total += term;
        }
    }
    Ok(total)
}

/// Natural log of a positive big rational, accurate to ~1 ulp of f64.
pub fn ln_big_rational(r: &BigRational) -> f64 {
    assert!(r.is_positive(), "ln of non-positive rational");
    ln_biguint(r.numer().magnitude()) - ln_biguint(r.denom().magnitude())
}

fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 53 {
        (x.to_u64().unwrap() as f64).ln()
    } else {
        let shift = bits - 53;
        let top = (x >> shift).to_u64().unwrap() as f64;
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }
}

/// One row of a bound-verification table.
#[derive(Clone, Debug, Serialize)]
pub struct BoundRow {
    pub n: u64,
    /// Exact tail probability rounded to f64 (0 may indicate underflow; see `log_exact`).
    pub exact: f64,
    /// ln of the exact tail; `None` when the tail is exactly zero.
    pub log_exact: Option<f64>,
    pub bound: f64,
    pub log_bound: f64,
    /// Dominance `exact <= bound`, decided in log space.
    pub ok: bool,
}

impl BoundRow {
    /// Empirical decay rate `-ln(exact)/N`; `None` for a zero tail.
    pub fn empirical_rate(&self) -> Option<f64> {
        self.log_exact.map(|l| -l / self.n as f64)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyTable {
    pub rows: Vec<BoundRow>,
    /// Finite partial sum of the exact tails over the grid.
    pub partial_sum: f64,
    pub min_rate: f64,
}

/// Tabulates exact tails against the Chernoff bound over a grid of sample
/// sizes. Every row must satisfy `exact <= bound`; the partial sum of tails
/// is reported as the finite witness of summability.
pub fn verify_bound(
    prior: &BernoulliPrior,
    center: f64,
    epsilon: f64,
    n_grid: &[u64],
) -> Result<VerifyTable> {
    let mut rows = Vec::with_capacity(n_grid.len());
    let mut partial_sum = 0.0;
    for &n in n_grid {
        let ev = DeviationEvent::new(n, center, epsilon, *prior)?;
        let tail = exact_tail(&ev)?;
        let log_bound = cramer_log_bound(&ev)?;
        let (exact, log_exact, ok) = if tail.is_zero() {
            (0.0, None, true)
        } else {
            let le = ln_big_rational(&tail);
            (tail.to_f64().unwrap_or(0.0), Some(le), le <= log_bound)
        };
        partial_sum += exact;
        rows.push(BoundRow {
            n,
            exact,
            log_exact,
            bound: log_bound.exp(),
            log_bound,
            ok,
        });
    }
    Ok(VerifyTable {
        rows,
        partial_sum,
        min_rate: min_two_sided_rate(prior, center, epsilon)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::FromPrimitive;

    #[test]
    fn rate_examples() {
        assert_eq!(rate(0.5f64, 0.5).unwrap(), 0.0);
        assert!((rate(0.5f64, 0.7).unwrap() - 0.08228287850505184).abs() < 1e-15);
        assert!((rate(0.5f64, 1.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(rate(0.0f64, 0.5).is_err());
        assert!(rate(1.0f64, 0.5).is_err());
    }

    #[test]
    fn rate_generic_scalar() {
        let r32 = rate(0.5f32, 0.7f32).unwrap();
        assert!((r32 - 0.082_282_88f32).abs() < 1e-6);
    }

    #[test]
    fn rate_is_convex_on_grid() {
        let q = 0.37f64;
        for i in 0..=98 {
            for j in (i + 2)..=100 {
                if (j - i) % 2 != 0 {
                    continue;
                }
                let x = i as f64 / 100.0;
                let y = j as f64 / 100.0;
                let mid = (x + y) / 2.0;
                let lhs = rate(q, mid).unwrap();
                let rhs = (rate(q, x).unwrap() + rate(q, y).unwrap()) / 2.0;
                assert!(lhs <= rhs + 1e-12, "convexity fails at ({x}, {y})");
            }
        }
    }

    #[test]
    fn cramer_bound_examples() {
        let ev = DeviationEvent::new(10, 0.5, 0.2, BernoulliPrior::fair()).unwrap();
        assert!((cramer_bound(&ev).unwrap() - 0.8783750570761086).abs() < 1e-12);

        // eps >= 1/2 at center 1/2: clamped rates are ln 2, bound = 2^{1-N}
        let ev = DeviationEvent::new(20, 0.5, 0.5, BernoulliPrior::fair()).unwrap();
        assert!((cramer_bound(&ev).unwrap() - (2.0f64).powi(-19)).abs() < 1e-18);

        let ev = DeviationEvent::new(0, 0.5, 0.1, BernoulliPrior::fair()).unwrap();
        assert_eq!(cramer_bound(&ev).unwrap(), 2.0);
    }

    #[test]
    fn exact_tail_examples() {
        let ev = DeviationEvent::new(10, 0.5, 0.2, BernoulliPrior::fair()).unwrap();
        let t = exact_tail(&ev).unwrap();
        assert_eq!(t, BigRational::from_f64(112.0 / 1024.0).unwrap());

        // eps just below 1/2: only the constant strings survive, tail 2^{1-N}
        for n in [1u64, 5, 12] {
            let ev = DeviationEvent::new(n, 0.5, 0.49, BernoulliPrior::fair()).unwrap();
            let expect = BigRational::new(BigInt::from(2), BigInt::from(2u64.pow(n as u32)));
            assert_eq!(exact_tail(&ev).unwrap(), expect);
        }

        // at eps = 1/2 exactly the strict event |S_N - 1/2| > 1/2 is empty
        let ev = DeviationEvent::new(6, 0.5, 0.5, BernoulliPrior::fair()).unwrap();
        assert!(exact_tail(&ev).unwrap().is_zero());

        // eps = 0, N = 1: S_1 never equals 1/2
        let ev = DeviationEvent::new(1, 0.5, 0.0, BernoulliPrior::fair()).unwrap();
        assert_eq!(exact_tail(&ev).unwrap(), BigRational::one());

        // impossible event
        let ev = DeviationEvent::new(8, 0.5, 1.5, BernoulliPrior::fair()).unwrap();
        assert!(exact_tail(&ev).unwrap().is_zero());

        let ev = DeviationEvent::new(20_000, 0.5, 0.1, BernoulliPrior::fair()).unwrap();
        assert!(matches!(
            exact_tail(&ev),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn exact_tail_biased_prior_sums_to_hand_value() {
        // N=3, q=0.3, center 0.5, eps 0.4: k in {0, 3}
        let ev = DeviationEvent::new(3, 0.5, 0.4, BernoulliPrior::new(0.3).unwrap()).unwrap();
        let t = exact_tail(&ev).unwrap().to_f64().unwrap();
        let expect = 0.7f64.powi(3) + 0.3f64.powi(3);
        assert!((t - expect).abs() < 1e-12);
    }

    #[test]
    fn verify_bound_examples() {
        let table = verify_bound(&BernoulliPrior::fair(), 0.5, 0.2, &[10, 20, 40]).unwrap();
        assert!(table.rows.iter().all(|r| r.ok));
        assert!(table.partial_sum > 0.0);

        let table = verify_bound(&BernoulliPrior::fair(), 0.5, 0.49, &[10]).unwrap();
        assert!(table.rows[0].ok);
        assert!((table.rows[0].exact - 2.0 / 1024.0).abs() < 1e-15);

        let table = verify_bound(&BernoulliPrior::fair(), 0.5, 1.5, &[4]).unwrap();
        assert!(table.rows[0].ok);
        assert_eq!(table.rows[0].exact, 0.0);
    }

    #[test]
    fn tails_eventually_decrease_and_match_rate() {
        let prior = BernoulliPrior::fair();
        let mut prev = f64::INFINITY;
        for k in 3..=12u32 {
            let ev = DeviationEvent::new(1 << k, 0.5, 0.2, prior).unwrap();
            let t = exact_tail(&ev).unwrap().to_f64().unwrap();
            assert!(t < prev, "tail not decreasing at N = {}", 1 << k);
            prev = t;
        }
        let ev = DeviationEvent::new(4096, 0.5, 0.2, prior).unwrap();
        let le = ln_big_rational(&exact_tail(&ev).unwrap());
        let emp = -le / 4096.0;
        let target = min_two_sided_rate(&prior, 0.5, 0.2).unwrap();
        assert!((emp - target).abs() <= 0.05, "empirical rate {emp} vs {target}");
    }

    #[test]
    fn ln_big_rational_matches_f64() {
        let r = BigRational::new(BigInt::from(3), BigInt::from(7));
        assert!((ln_big_rational(&r) - (3.0f64 / 7.0).ln()).abs() < 1e-14);
        // a value far below f64 underflow still has a usable log
        let tiny = BigRational::new(BigInt::from(1), BigInt::from(2).pow(5000));
        assert!((ln_big_rational(&tiny) + 5000.0 * std::f64::consts::LN_2).abs() < 1e-9);
    }
}
