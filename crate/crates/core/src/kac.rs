//! The Kac ring and Kac chain: deterministic colour-flip dynamics where every
//! ball moves one site per step and flips colour when it leaves a marked
//! site. Marks never change, the dynamics is invertible, and the whole ring
//! recurs after 2L steps.
//!
//! States are bit-packed; one step is a rotate-and-XOR over 64-bit words and
//! arbitrary-time evolution uses the prefix-XOR of the mark pattern, so a
//! single evolution costs O(L/64) words independent of t:
//!
//! ```text
//! x_n(t) = x_{n-t} ^ y_{n-t} ^ ... ^ y_{n-1}
//! ```
//!
//! The chain variant drops the periodic boundary: a window of half-width N
//! plus a halo of depth t_max supplies exactly the dependency cone needed to
//! evaluate `x_n(t)` for `|n| <= N`, `t <= t_max`, with no boundary artifacts.

use crate::curve::{Curve, CurveMeta};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::seqcore::{derive_stream_seed, BitString, SeededBitSource};
use crate::stats::DeviationEstimate;
use rayon::prelude::*;
use serde::Serialize;

/// Bits `[start, start + count)` of `src` as a fresh string.
pub(crate) fn extract(src: &BitString, start: usize, count: usize) -> BitString {
    let mut out = BitString::with_capacity(count);
    out.extend_range(src, start, count);
    out
}

/// Cyclic shift toward higher indices: `dst[n] = src[(n - t) mod L]`.
fn rotate_up(src: &BitString, t: usize) -> BitString {
    let l = src.len();
    let k = (l - t % l) % l;
    let mut out = BitString::with_capacity(l);
    out.extend_range(src, k, l - k);
    out.extend_range(src, 0, k);
    out
}

/// Cyclic shift toward lower indices: `dst[n] = src[(n + t) mod L]`.
fn rotate_down(src: &BitString, t: usize) -> BitString {
    let l = src.len();
    rotate_up(src, (l - t % l) % l)
}

/// Exclusive prefix parity: bit n of the result is `y_0 ^ ... ^ y_{n-1}`.
/// Also returns the parity of the whole string.
pub(crate) fn prefix_parity_exclusive(y: &BitString) -> (BitString, bool) {
    let mut words = Vec::with_capacity(y.words().len());
    let mut carry = false;
    for &w in y.words() {
        let mut incl = w;
        incl ^= incl << 1;
        incl ^= incl << 2;
        incl ^= incl << 4;
        incl ^= incl << 8;
        incl ^= incl << 16;
        incl ^= incl << 32;
        let mut q = incl << 1;
        if carry {
            q = !q;
        }
        words.push(q);
        carry ^= w.count_ones() % 2 == 1;
    }
    let mut out = BitString::from_bits(std::iter::empty());
    // rebuild through push_chunk to keep the tail mask canonical
    let mut tmp = BitString::with_capacity(y.len());
    let mut remaining = y.len();
    for w in words {
        let take = remaining.min(64);
        tmp.push_chunk(w, take);
        remaining -= take;
    }
    std::mem::swap(&mut out, &mut tmp);
    (out, carry)
}

/// Mask with bits `[0, r)` set.
fn low_mask(l: usize, r: usize) -> BitString {
    BitString::from_fn(l, |i| i < r)
}

/// Mask with bits `[l - r, l)` set.
fn high_mask(l: usize, r: usize) -> BitString {
    BitString::from_fn(l, |i| i >= l - r)
}

/// Ring microstate: colours x and marks y on L sites, L odd.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KacRingState {
    x: BitString,
    y: BitString,
}

impl KacRingState {
    pub fn new(x: BitString, y: BitString) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid(
                "state",
                format!("colour length {} != mark length {}", x.len(), y.len()),
            ));
        }
        if x.is_empty() || x.len() % 2 == 0 {
            return Err(Error::invalid(
                "l",
                format!("ring size {} must be odd and positive", x.len()),
            ));
        }
        Ok(KacRingState { x, y })
    }

    /// Independent Bernoulli colours (bias alpha) and marks (bias beta).
    pub fn sample(l: usize, alpha: f64, beta: f64, seed: u64) -> Result<Self> {
        let xs = SeededBitSource::new(derive_stream_seed(seed, 0), alpha)?;
        let ys = SeededBitSource::new(derive_stream_seed(seed, 1), beta)?;
        Self::new(xs.take(l), ys.take(l))
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self) -> &BitString {
        &self.x
    }

    pub fn y(&self) -> &BitString {
        &self.y
    }
}

/// One step: every ball moves one site up and flips colour when it left a
/// marked site; `x'_n = x_{n-1} ^ y_{n-1}`, marks unchanged.
pub fn step(s: &KacRingState) -> KacRingState {
    KacRingState {
        x: rotate_up(&s.x.xor(&s.y), 1),
        y: s.y.clone(),
    }
}

/// The exact inverse of [`step`].
pub fn inverse_step(s: &KacRingState) -> KacRingState {
    KacRingState {
        x: rotate_down(&s.x, 1).xor(&s.y),
        y: s.y.clone(),
    }
}

/// t-fold evolution through the prefix-XOR closed form, valid for any t of
/// either sign at O(L/64) cost.
pub fn evolve(s: &KacRingState, t: i64) -> KacRingState {
    let l = s.len();
    if t == 0 {
        return s.clone();
    }
    let u = t.unsigned_abs() as usize;
    let (cycles, r) = (u / l, u % l);
    let (q, total) = prefix_parity_exclusive(&s.y);
    let mut w;
    let rotated_x;
    if t > 0 {
        rotated_x = rotate_up(&s.x, r);
        w = q.xor(&rotate_up(&q, r));
        if total {
            w.xor_in_place(&low_mask(l, r));
        }
    } else {
        rotated_x = rotate_down(&s.x, r);
        w = q.xor(&rotate_down(&q, r));
        if total {
            w.xor_in_place(&high_mask(l, r));
        }
    }
    if total && cycles % 2 == 1 {
        w = w.complement();
    }
    KacRingState {
        x: rotated_x.xor(&w),
        y: s.y.clone(),
    }
}

/// t-fold evolution by literally iterating [`step`] / [`inverse_step`];
/// the independent route against the closed form.
pub fn evolve_iterated(s: &KacRingState, t: i64) -> KacRingState {
    let mut cur = s.clone();
    if t >= 0 {
        for _ in 0..t {
            cur = step(&cur);
        }
    } else {
        for _ in 0..-t {
            cur = inverse_step(&cur);
        }
    }
    cur
}

/// Instantaneous time reversal `T(x, y)(n) = (x_{-n}, y_{-n-1})`; an
/// involution satisfying `evolve(T s, t) = T (evolve(s, -t))`.
pub fn time_reverse(s: &KacRingState) -> KacRingState {
    let l = s.len();
    KacRingState {
        x: BitString::from_fn(l, |n| s.x.get((l - n) % l)),
        y: BitString::from_fn(l, |n| s.y.get(l - 1 - n)),
    }
}

/// Macroscopic observables: fraction of white balls and of marked sites.
pub fn macro_fractions(s: &KacRingState) -> (f64, f64) {
    let l = s.len() as f64;
    (
        s.x.count_ones() as f64 / l,
        s.y.count_ones() as f64 / l,
    )
}

/// Mean-field colour fraction `1/2 + (alpha - 1/2)(1 - 2 beta)^t`.
pub fn mean_value<R: Real>(alpha: R, beta: R, t: u32) -> R {
    let half = lit::<R>(0.5);
    half + (alpha - half) * (R::one() - lit::<R>(2.0) * beta).powi(t as i32)
}

/// One step of the mean-field law `f <- f + beta (1 - 2 f)`.
pub fn mean_recursion_step<R: Real>(f: R, beta: R) -> R {
    f + beta * (R::one() - lit::<R>(2.0) * f)
}

pub fn mean_curve(alpha: f64, beta: f64, t_max: u32) -> Curve<f64> {
    let times = (0..=t_max).map(|t| t as f64).collect();
    let values = (0..=t_max).map(|t| mean_value(alpha, beta, t)).collect();
    let meta = CurveMeta::new("kac-mean").with("alpha", alpha).with("beta", beta);
    Curve::new(times, values, meta)
}

/// A finite window of the Kac chain: sites `[-N - t_max, N]` hold enough of
/// the lattice to evaluate every colour at `|n| <= N` up to time t_max.
#[derive(Clone, Debug)]
pub struct KacWindow {
    half_width: i64,
    t_max: i64,
    x: BitString,
    y: BitString,
}

impl KacWindow {
    pub fn from_parts(half_width: i64, t_max: i64, x: BitString, y: BitString) -> Result<Self> {
        if half_width < 0 || t_max < 0 {
            return Err(Error::invalid("window", "sizes must be nonnegative"));
        }
        let need = (2 * half_width + t_max + 1) as usize;
        if x.len() != need || y.len() != need {
            return Err(Error::invalid(
                "window",
                format!("need {need} sites, got {} colours / {} marks", x.len(), y.len()),
            ));
        }
        Ok(KacWindow {
            half_width,
            t_max,
            x,
            y,
        })
    }

    /// Independent Bernoulli window: colour bias alpha, mark bias beta.
    pub fn sample(half_width: i64, t_max: i64, alpha: f64, beta: f64, seed: u64) -> Result<Self> {
        if half_width < 0 || t_max < 0 {
            return Err(Error::invalid("window", "sizes must be nonnegative"));
        }
        let need = (2 * half_width + t_max + 1) as usize;
        let xs = SeededBitSource::new(derive_stream_seed(seed, 0), alpha)?;
        let ys = SeededBitSource::new(derive_stream_seed(seed, 1), beta)?;
        Self::from_parts(half_width, t_max, xs.take(need), ys.take(need))
    }

    pub fn half_width(&self) -> i64 {
        self.half_width
    }

    pub fn t_max(&self) -> i64 {
        self.t_max
    }

    pub fn sites(&self) -> usize {
        (2 * self.half_width + 1) as usize
    }

    fn index(&self, site: i64) -> usize {
        debug_assert!(site >= -self.half_width - self.t_max && site <= self.half_width);
        (site + self.half_width + self.t_max) as usize
    }

    pub fn x_bit(&self, site: i64) -> bool {
        self.x.get(self.index(site))
    }

    pub fn y_bit(&self, site: i64) -> bool {
        self.y.get(self.index(site))
    }

    /// Marks over the centre sites `[-N, N]`.
    pub fn center_marks(&self) -> BitString {
        extract(&self.y, self.t_max as usize, self.sites())
    }

    pub(crate) fn raw_colours(&self) -> &BitString {
        &self.x
    }

    pub(crate) fn raw_marks(&self) -> &BitString {
        &self.y
    }
}

/// Colours `x_n(t)` for `|n| <= N`, computed exactly from the window.
pub fn window_evolve(w: &KacWindow, t: i64) -> Result<BitString> {
    if t < 0 {
        return Err(Error::invalid("t", "window evolution needs t >= 0"));
    }
    if t > w.t_max {
        return Err(Error::HaloExhausted { t, t_max: w.t_max });
    }
    let count = w.sites();
    let start = w.t_max as usize;
    let shifted_start = (w.t_max - t) as usize;
    let (q, _) = prefix_parity_exclusive(&w.y);
    let mut out = extract(&w.x, shifted_start, count);
    out.xor_in_place(&extract(&q, start, count));
    out.xor_in_place(&extract(&q, shifted_start, count));
    Ok(out)
}

/// White fraction of the window at time t.
pub fn window_fraction(w: &KacWindow, t: i64) -> Result<f64> {
    let xt = window_evolve(w, t)?;
    Ok(xt.count_ones() as f64 / w.sites() as f64)
}

/// Monte Carlo estimate of `P(|f_N(t) - f(t)| > 1/m)` over fresh windows.
pub fn deviation_probability(
    alpha: f64,
    beta: f64,
    half_width: i64,
    t: i64,
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
    let f_t = mean_value(alpha, beta, t as u32);
    let hits = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let w = KacWindow::sample(half_width, t, alpha, beta, derive_stream_seed(master_seed, trial))
                .expect("valid window parameters");
            let f = window_fraction(&w, t).expect("t within halo");
            ((f - f_t).abs() > threshold) as u64
        })
        .sum();
    Ok(DeviationEstimate::from_hits(
        half_width as u64,
        threshold,
        trials,
        hits,
    ))
}

/// Sup-over-time variant of [`deviation_probability`].
pub fn deviation_probability_sup(
    alpha: f64,
    beta: f64,
    half_width: i64,
    t_max: i64,
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
            let w = KacWindow::sample(
                half_width,
                t_max,
                alpha,
                beta,
                derive_stream_seed(master_seed, trial),
            )
            .expect("valid window parameters");
            let mut sup = 0.0f64;
            for t in 0..=t_max {
                let f = window_fraction(&w, t).expect("t within halo");
                sup = sup.max((f - mean_value(alpha, beta, t as u32)).abs());
            }
            (sup > threshold) as u64
        })
        .sum();
    Ok(DeviationEstimate::from_hits(
        half_width as u64,
        threshold,
        trials,
        hits,
    ))
}

fn cross_defect(xt: &BitString, y: &BitString, beta: f64, sampled_marks: bool) -> f64 {
    let l = xt.len() as f64;
    let mut cross = 0u64;
    let mut whites = 0u64;
    for (a, b) in xt.words().iter().zip(y.words()) {
        cross += (a & b).count_ones() as u64;
        whites += a.count_ones() as u64;
    }
    let b = if sampled_marks {
        y.count_ones() as f64 / l
    } else {
        beta
    };
    (cross as f64 - b * whites as f64) / l
}

/// Collision-number defect on the ring at time t:
/// `L^{-1} sum_n x_n(t)(y_n - beta)`. With `sampled_marks` the model
/// parameter beta is replaced by the observed mark fraction.
pub fn ring_stosszahl_defect(s: &KacRingState, t: i64, beta: f64, sampled_marks: bool) -> f64 {
    let evolved = evolve(s, t);
    cross_defect(&evolved.x, &s.y, beta, sampled_marks)
}

/// Collision-number defect over the centre sites of a window.
pub fn window_stosszahl_defect(
    w: &KacWindow,
    t: i64,
    beta: f64,
    sampled_marks: bool,
) -> Result<f64> {
    let xt = window_evolve(w, t)?;
    Ok(cross_defect(&xt, &w.center_marks(), beta, sampled_marks))
}


/// Spin form of a ring state: colours as eta in {-1, +1}, marks as
/// scatterers epsilon in {-1, +1} via `eta = 2x - 1`, `epsilon = -2y + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SpinState {
    pub eta: Vec<i8>,
    pub epsilon: Vec<i8>,
}

impl SpinState {
    pub fn from_ring(s: &KacRingState) -> Self {
        SpinState {
            eta: s.x.iter().map(|b| if b { 1 } else { -1 }).collect(),
            epsilon: s.y.iter().map(|b| if b { -1 } else { 1 }).collect(),
        }
    }

    pub fn to_ring(&self) -> Result<KacRingState> {
        if self.eta.len() != self.epsilon.len() {
            return Err(Error::invalid("spins", "component lengths differ"));
        }
        for v in self.eta.iter().chain(&self.epsilon) {
            if *v != 1 && *v != -1 {
                return Err(Error::invalid("spins", format!("entry {v} not in {{-1, 1}}")));
            }
        }
        KacRingState::new(
            BitString::from_bits(self.eta.iter().map(|&v| v == 1)),
            BitString::from_bits(self.epsilon.iter().map(|&v| v == -1)),
        )
    }
}
