//! The original Ehrenfest urn model: microscopic and macroscopic Markov
//! chains, stationary distributions, coarse-graining, the exact average
//! evolution, the relaxation ODE with its entropy production, and detailed
//! balance / time-reversal checks.
//!
//! Micro chain: at each step one uniformly chosen ball out of N moves to the
//! other urn. Macro chain: the ball count m in urn 1 moves to m-1 with
//! probability m/N and to m+1 with probability (N-m)/N. The micro stationary
//! law is flat (2^-N), the macro one binomial.

use crate::curve::{Curve, CurveMeta};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::seqcore::{BitString, SplitMix64};
use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

/// Microstate: ball n sits in urn `occupancy[n]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MicroUrnState {
    occupancy: BitString,
}

impl MicroUrnState {
    pub fn new(occupancy: BitString) -> Result<Self> {
        if occupancy.is_empty() {
            return Err(Error::invalid("occupancy", "need at least one ball"));
        }
        Ok(MicroUrnState { occupancy })
    }

    pub fn all_in_urn0(n: usize) -> Result<Self> {
        Self::new(BitString::zeros(n))
    }

    pub fn n(&self) -> usize {
        self.occupancy.len()
    }

    pub fn occupancy(&self) -> &BitString {
        &self.occupancy
    }

    /// Moves one uniformly chosen ball to the other urn.
    pub fn step(&mut self, rng: &mut SplitMix64) {
        let ball = rng.next_below(self.n() as u64) as usize;
        let cur = self.occupancy.get(ball);
        self.occupancy.set(ball, !cur);
    }
}

/// Macrostate: m balls in urn 1 out of N.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MacroUrnState {
    pub m: u64,
    pub n: u64,
}

impl MacroUrnState {
    pub fn new(m: u64, n: u64) -> Result<Self> {
        if m > n {
            return Err(Error::invalid("m", format!("{m} exceeds ball count {n}")));
        }
        Ok(MacroUrnState { m, n })
    }
}

/// Returns a fresh microstate with one uniformly chosen ball flipped.
pub fn micro_step(state: &MicroUrnState, rng: &mut SplitMix64) -> MicroUrnState {
    let mut next = state.clone();
    next.step(rng);
    next
}

/// Ball count in urn 1 (the coarse-graining map).
pub fn coarse_grain(state: &MicroUrnState) -> MacroUrnState {
    MacroUrnState {
        m: state.occupancy.count_ones() as u64,
        n: state.n() as u64,
    }
}

/// Nonzero transition probabilities out of macrostate m.
pub fn macro_row(state: MacroUrnState) -> Vec<(u64, f64)> {
    let (m, n) = (state.m, state.n);
    let mut row = Vec::with_capacity(2);
    if m >= 1 {
        row.push((m - 1, m as f64 / n as f64));
    }
    if m < n {
        row.push((m + 1, (n - m) as f64 / n as f64));
    }
    row
}

/// A finite-state Markov chain with sparse row access.
pub trait MarkovChain {
    fn state_count(&self) -> usize;
    /// Nonzero transitions out of `from` as `(to, probability)`.
    fn successors(&self, from: usize) -> Vec<(usize, f64)>;
    fn prob(&self, from: usize, to: usize) -> f64;
}

/// Micro Ehrenfest chain on bitmask states; enumerable only for small N.
#[derive(Clone, Copy, Debug)]
pub struct MicroChain {
    pub n: u32,
}

/// Largest ball count for which micro-chain state enumeration is allowed.
pub const MICRO_ENUMERATION_MAX: u32 = 20;

impl MicroChain {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "need at least one ball"));
        }
        if n > MICRO_ENUMERATION_MAX {
            return Err(Error::invalid(
                "n",
                format!("micro chain enumeration capped at N = {MICRO_ENUMERATION_MAX}"),
            ));
        }
        Ok(MicroChain { n })
    }
}

impl MarkovChain for MicroChain {
    fn state_count(&self) -> usize {
        1usize << self.n
    }

    fn successors(&self, from: usize) -> Vec<(usize, f64)> {
        let p = 1.0 / self.n as f64;
        (0..self.n).map(|b| (from ^ (1usize << b), p)).collect()
    }

    fn prob(&self, from: usize, to: usize) -> f64 {
        if (from ^ to).count_ones() == 1 {
            1.0 / self.n as f64
        } else {
            0.0
        }
    }
}

/// Macro Ehrenfest birth-death chain on {0, ..., N}.
#[derive(Clone, Copy, Debug)]
pub struct MacroChain {
    pub n: u64,
}

impl MarkovChain for MacroChain {
    fn state_count(&self) -> usize {
        self.n as usize + 1
    }

    fn successors(&self, from: usize) -> Vec<(usize, f64)> {
        macro_row(MacroUrnState {
            m: from as u64,
            n: self.n,
        })
        .into_iter()
        .map(|(to, p)| (to as usize, p))
        .collect()
    }

    fn prob(&self, from: usize, to: usize) -> f64 {
        let (m, n) = (from as u64, self.n);
        if to as u64 + 1 == m {
            m as f64 / n as f64
        } else if to as u64 == m + 1 {
            (n - m) as f64 / n as f64
        } else {
            0.0
        }
    }
}

/// Dense row-stochastic chain, for counterexamples and ad-hoc specs.
#[derive(Clone, Debug)]
pub struct DenseChain {
    rows: Vec<Vec<f64>>,
}

impl DenseChain {
    /// Rows must each sum to 1 within 1e-12.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid("rows", format!("row {i} is not square")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::NotADistribution {
                    message: format!("row {i} sums to {sum}"),
                });
            }
        }
        Ok(DenseChain { rows })
    }
}

impl MarkovChain for DenseChain {
    fn state_count(&self) -> usize {
        self.rows.len()
    }

    fn successors(&self, from: usize) -> Vec<(usize, f64)> {
        self.rows[from]
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(to, &p)| (to, p))
            .collect()
    }

    fn prob(&self, from: usize, to: usize) -> f64 {
        self.rows[from][to]
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub enum UrnModel {
    Micro,
    Macro,
}

/// Stationary distribution: flat `2^-N` over microstates, binomial
/// `C(N, m) 2^-N` over macrostates.
pub fn stationary(model: UrnModel, n: u64) -> Result<Vec<f64>> {
    match model {
        UrnModel::Micro => {
            let chain = MicroChain::new(n as u32)?;
            let p = 0.5f64.powi(n as i32);
            Ok(vec![p; chain.state_count()])
        }
        UrnModel::Macro => {
            // multiplicative recurrence keeps every term in range for n <= ~1000
            let mut pi = Vec::with_capacity(n as usize + 1);
            let mut v = 0.5f64.powi(n as i32);
            for m in 0..=n {
                pi.push(v);
                if m < n {
                    v = v * (n - m) as f64 / (m + 1) as f64;
                }
            }
            Ok(pi)
        }
    }
}

/// Exact rational stationary laws, for the `pi P = pi` identity checks.
pub fn stationary_micro_exact(n: u32) -> Result<Vec<BigRational>> {
    let chain = MicroChain::new(n)?;
    let p = BigRational::new(BigInt::one(), BigInt::from(2u64).pow(n));
    Ok(vec![p; chain.state_count()])
}

pub fn stationary_macro_exact(n: u64) -> Vec<BigRational> {
    let denom = BigInt::from(2u64).pow(n as u32);
    (0..=n)
        .map(|m| BigRational::new(binomial(BigInt::from(n), BigInt::from(m)), denom.clone()))
        .collect()
}

/// Max-norm defect of `pi P = pi` for a float chain.
pub fn stationarity_defect(chain: &impl MarkovChain, pi: &[f64]) -> f64 {
    let mut out = vec![0.0f64; chain.state_count()];
    for x in 0..chain.state_count() {
        for (y, p) in chain.successors(x) {
            out[y] += pi[x] * p;
        }
    }
    out.iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Exact check of `pi P = pi` for the micro chain (transition weight 1/N).
pub fn micro_stationarity_is_exact(n: u32) -> Result<bool> {
    let chain = MicroChain::new(n)?;
    let pi = stationary_micro_exact(n)?;
    let w = BigRational::new(BigInt::one(), BigInt::from(n));
    let mut out = vec![BigRational::zero(); chain.state_count()];
    for x in 0..chain.state_count() {
        for (y, _) in chain.successors(x) {
            out[y] += &pi[x] * &w;
        }
    }
    Ok(out == pi)
}

/// Exact check of `pi P = pi` for the macro chain.
pub fn macro_stationarity_is_exact(n: u64) -> bool {
    let pi = stationary_macro_exact(n);
    let nn = BigInt::from(n);
    let mut out = vec![BigRational::zero(); n as usize + 1];
    for m in 0..=n {
        if m >= 1 {
            out[(m - 1) as usize] += &pi[m as usize] * BigRational::new(BigInt::from(m), nn.clone());
        }
        if m < n {
            out[(m + 1) as usize] +=
                &pi[m as usize] * BigRational::new(BigInt::from(n - m), nn.clone());
        }
    }
    out == pi
}

/// Detailed-balance audit of a chain against a candidate stationary law and
/// a state involution T.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BalanceReport {
    pub max_violation: f64,
    pub holds: bool,
}

pub const BALANCE_TOLERANCE: f64 = 1e-12;

/// Max over transitions of `|pi_{T y} P_{T y, T x} - pi_x P_{x, y}|`;
/// `holds` iff it stays within 1e-12. T must be an involution on states.
pub fn detailed_balance_check(
    chain: &impl MarkovChain,
    pi: &[f64],
    t_map: impl Fn(usize) -> usize,
) -> Result<BalanceReport> {
    if pi.len() != chain.state_count() {
        return Err(Error::NotADistribution {
            message: format!(
                "pi has {} entries for {} states",
                pi.len(),
                chain.state_count()
            ),
        });
    }
    let sum: f64 = pi.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || pi.iter().any(|p| *p < 0.0) {
        return Err(Error::NotADistribution {
            message: format!("pi sums to {sum}"),
        });
    }
    let mut max_violation = 0.0f64;
    for x in 0..chain.state_count() {
        debug_assert_eq!(t_map(t_map(x)), x, "T is not an involution");
        for (y, pxy) in chain.successors(x) {
            let lhs = pi[t_map(y)] * chain.prob(t_map(y), t_map(x));
            max_violation = max_violation.max((lhs - pi[x] * pxy).abs());
        }
    }
    Ok(BalanceReport {
        max_violation,
        holds: max_violation <= BALANCE_TOLERANCE,
    })
}

/// Closed-form scaled average: `1/2 + (f0 - 1/2)(1 - 2/N)^steps`.
pub fn average_value<R: Real>(n: u64, f0: R, steps: u64) -> R {
    let half = lit::<R>(0.5);
    let shrink = R::one() - lit::<R>(2.0) / lit::<R>(n as f64);
    half + (f0 - half) * pow_u64(shrink, steps)
}

fn pow_u64<R: Real>(base: R, mut e: u64) -> R {
    let mut acc = R::one();
    let mut b = base;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b;
        }
        b = b * b;
        e >>= 1;
    }
    acc
}

/// One step of the average recursion `f <- f + (1 - 2f)/N`.
pub fn average_recursion_step<R: Real>(n: u64, f: R) -> R {
    f + (R::one() - lit::<R>(2.0) * f) / lit::<R>(n as f64)
}

/// Scaled-time step count `floor(N t)`, guarded against grid points landing
/// a rounding error below an integer.
pub fn scaled_steps(n: u64, t: f64) -> u64 {
    (n as f64 * t + 1e-9).floor() as u64
}

/// Average curve on a grid of scaled times (multiples of 1/N, evaluated
/// through `floor(N t)`).
pub fn average_curve<R: Real>(n: u64, f0: R, t_grid: &[f64]) -> Curve<R> {
    let times = t_grid.iter().map(|&t| lit::<R>(t)).collect();
    let values = t_grid
        .iter()
        .map(|&t| average_value(n, f0, scaled_steps(n, t)))
        .collect();
    let meta = CurveMeta::new("ehrenfest-average").with("n", n as f64);
    Curve::new(times, values, meta)
}

/// Limit curve value `1/2 + (f0 - 1/2) e^{-2t}`.
pub fn ode_value<R: Real>(f0: R, t: R) -> R {
    let half = lit::<R>(0.5);
    half + (f0 - half) * (-lit::<R>(2.0) * t).exp()
}

/// Shannon entropy of the two-point law (f, 1-f), with 0 ln 0 = 0.
pub fn entropy<R: Real>(f: R) -> R {
    let mut s = R::zero();
    if f > R::zero() {
        s = s - f * f.ln();
    }
    let g = R::one() - f;
    if g > R::zero() {
        s = s - g * g.ln();
    }
    s
}

/// Entropy production along the relaxation ODE:
/// `(2f - 1) ln(f / (1 - f))`; the boundary values return +infinity.
pub fn entropy_rate<R: Real>(f: R) -> R {
    if f <= R::zero() || f >= R::one() {
        return R::infinity();
    }
    (lit::<R>(2.0) * f - R::one()) * (f / (R::one() - f)).ln()
}

/// Residuals of the time-reversed limit curve `g(t) = f(tau - t)` against
/// the forward law `dg/dt = 1 - 2g` and the backward law `dg/dt = -(1 - 2g)`
/// (the latter is what reversal actually satisfies).
#[derive(Clone, Debug, Serialize)]
pub struct OdeReversalResiduals<R: Real> {
    pub forward: Vec<R>,
    pub backward: Vec<R>,
}

pub fn ode_reversal_residuals<R: Real>(f0: R, tau: R, t_grid: &[R]) -> OdeReversalResiduals<R> {
    let half = lit::<R>(0.5);
    let two = lit::<R>(2.0);
    let mut forward = Vec::with_capacity(t_grid.len());
    let mut backward = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let g = ode_value(f0, tau - t);
        let dg = two * (f0 - half) * (-two * (tau - t)).exp();
        forward.push(dg - (R::one() - two * g));
        backward.push(dg + (R::one() - two * g));
    }
    OdeReversalResiduals { forward, backward }
}

/// Simulates one micro path from a deterministic initial ball count and
/// records the urn-1 fraction after each requested step count.
pub fn sample_micro_fraction_path(
    n: u64,
    m0: u64,
    checkpoints: &[u64],
    seed: u64,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one ball"));
    }
    if m0 > n {
        return Err(Error::invalid("m0", format!("{m0} exceeds ball count {n}")));
    }
    let mut state = MicroUrnState::new(BitString::from_fn(n as usize, |i| (i as u64) < m0))?;
    let mut m = m0 as i64;
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut step = 0u64;
    for &cp in checkpoints {
        debug_assert!(cp >= step, "checkpoints must be nondecreasing");
        while step < cp {
            let ball = rng.next_below(n) as usize;
            let cur = state.occupancy.get(ball);
            state.occupancy.set(ball, !cur);
            m += if cur { -1 } else { 1 };
            step += 1;
        }
        out.push(m as f64 / n as f64);
    }
    Ok(out)
}
