//! Birkhoff and two-sided ergodic averaging: shift-map time averages over
//! cylinder events, block frequencies as a normality surrogate, and the
//! identification of Kac-chain macroscopic observables with exact
//! pushforward probabilities.
//!
//! The two-sided average of the shifted event `{x_0 = 1}` along an evolved
//! configuration is literally the white fraction `f_N(t)`, and its exact
//! pushforward probability is the mean-field value
//! `1/2 + (alpha - 1/2)(1 - 2 beta)^t`; both identities are enforced here.

use crate::error::{Error, Result};
use crate::kac::{self, KacWindow};
use crate::scalar::Real;
use crate::seqcore::BitString;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

/// Size cap (in source bits) for exact pushforward enumeration.
pub const CONE_ENUMERATION_CAP: usize = 24;

/// Which lattice component a cylinder constraint pins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum LatticeCoord {
    Colour,
    Mark,
}

/// A cylinder over Kac-chain configurations: finitely many pinned
/// coordinates, each `(site offset, component, required bit)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeCylinder {
    constraints: Vec<(i64, LatticeCoord, bool)>,
}

impl LatticeCylinder {
    pub fn new(constraints: Vec<(i64, LatticeCoord, bool)>) -> Result<Self> {
        let mut seen = BTreeMap::new();
        for &(off, coord, bit) in &constraints {
            if let Some(prev) = seen.insert((coord, off), bit) {
                if prev != bit {
                    return Err(Error::invalid(
                        "cylinder",
                        format!("contradictory constraints at offset {off}"),
                    ));
                }
            }
        }
        Ok(LatticeCylinder { constraints })
    }

    /// The event `{x_0 = 1}`.
    pub fn white_at_origin() -> Self {
        LatticeCylinder {
            constraints: vec![(0, LatticeCoord::Colour, true)],
        }
    }

    /// The event `{y_0 = 1}`.
    pub fn marked_at_origin() -> Self {
        LatticeCylinder {
            constraints: vec![(0, LatticeCoord::Mark, true)],
        }
    }

    pub fn constraints(&self) -> &[(i64, LatticeCoord, bool)] {
        &self.constraints
    }

    /// The shifted event `S^{-n} U`: every pinned offset moves by +n.
    pub fn shifted(&self, n: i64) -> Self {
        LatticeCylinder {
            constraints: self
                .constraints
                .iter()
                .map(|&(off, c, b)| (off + n, c, b))
                .collect(),
        }
    }
}

impl fmt::Display for LatticeCylinder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.constraints.is_empty() {
            return f.write_str("full");
        }
        for (i, (off, coord, bit)) in self.constraints.iter().enumerate() {
            if i > 0 {
                f.write_str("&")?;
            }
            let name = match coord {
                LatticeCoord::Colour => "x",
                LatticeCoord::Mark => "y",
            };
            write!(f, "{name}[{off}]={}", *bit as u8)?;
        }
        Ok(())
    }
}

/// Birkhoff time average of a finite union of anchored cylinders along the
/// one-sided shift: the fraction of offsets `n = 1..=horizon` at which the
/// shifted sequence enters the event.
pub fn birkhoff_average(
    bits: &BitString,
    event: &[BitString],
    horizon: usize,
) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "need at least one shift"));
    }
    let width = event.iter().map(|c| c.len()).max().unwrap_or(0);
    if horizon + width > bits.len() {
        return Err(Error::InsufficientLength {
            index: horizon as u32,
            needed: horizon + width,
            available: bits.len(),
        });
    }
    let mut count = 0u64;
    for n in 1..=horizon {
        let hit = event.iter().any(|c| {
            (0..c.len()).all(|j| bits.get(n + j) == c.get(j))
        });
        count += hit as u64;
    }
    Ok(count as f64 / horizon as f64)
}

/// Sliding block frequency of a single pattern over offsets `1..=horizon`,
/// via a rolling-window comparison. Independent route for cross-checking
/// [`birkhoff_average`].
pub fn block_frequency(bits: &BitString, pattern: &BitString, horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "need at least one shift"));
    }
    let k = pattern.len();
    if k == 0 || k > 64 {
        return Err(Error::invalid("pattern", "width must be in 1..=64"));
    }
    if horizon + k > bits.len() {
        return Err(Error::InsufficientLength {
            index: horizon as u32,
            needed: horizon + k,
            available: bits.len(),
        });
    }
    let target = pattern.read_chunk(0, k);
    let mask = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
    let mut window = bits.read_chunk(1, k);
    let mut count = (window == target) as u64;
    for n in 2..=horizon {
        window = (window >> 1) | ((bits.get(n + k - 1) as u64) << (k - 1));
        window &= mask;
        count += (window == target) as u64;
    }
    Ok(count as f64 / horizon as f64)
}

/// Standard error of a sliding block frequency for a fair i.i.d. source,
/// accounting for the pattern's self-overlap correlations.
pub fn sliding_block_std_error(pattern: &BitString, horizon: usize) -> f64 {
    let k = pattern.len();
    let p = 0.5f64.powi(k as i32);
    let mut var = p * (1.0 - p);
    for d in 1..k {
        // joint occurrence at lag d requires the overlap to be consistent
        let consistent = (0..k - d).all(|j| pattern.get(j + d) == pattern.get(j));
        let joint = if consistent {
            0.5f64.powi((k + d) as i32)
        } else {
            0.0
        };
        var += 2.0 * (joint - p * p);
    }
    (var / horizon as f64).sqrt()
}

fn window_coord_bit(
    w: &KacWindow,
    evolved: &BitString,
    t: i64,
    coord: LatticeCoord,
    site: i64,
) -> Result<bool> {
    match coord {
        LatticeCoord::Colour => {
            // evolved holds x(t) for the strip [-N - t_max + t, N]
            let lo = -w.half_width() - w.t_max() + t;
            if site < lo || site > w.half_width() {
                return Err(Error::HaloExhausted {
                    t,
                    t_max: w.t_max(),
                });
            }
            Ok(evolved.get((site - lo) as usize))
        }
        LatticeCoord::Mark => {
            let lo = -w.half_width() - w.t_max();
            if site < lo || site > w.half_width() {
                return Err(Error::HaloExhausted {
                    t,
                    t_max: w.t_max(),
                });
            }
            Ok(w.y_bit(site))
        }
    }
}

/// Colours at time t over the full evaluable strip `[-N - t_max + t, N]`.
fn evolve_strip(w: &KacWindow, t: i64) -> Result<BitString> {
    if t < 0 {
        return Err(Error::invalid("t", "strip evolution needs t >= 0"));
    }
    if t > w.t_max() {
        return Err(Error::HaloExhausted { t, t_max: w.t_max() });
    }
    let full = (2 * w.half_width() + w.t_max() + 1) as usize;
    let count = full - t as usize;
    let (q, _) = kac::prefix_parity_exclusive(window_marks(w));
    let mut out = kac::extract(window_x(w), 0, count);
    out.xor_in_place(&kac::extract(&q, t as usize, count));
    out.xor_in_place(&kac::extract(&q, 0, count));
    Ok(out)
}

fn window_marks(w: &KacWindow) -> &BitString {
    w.raw_marks()
}

fn window_x(w: &KacWindow) -> &BitString {
    w.raw_colours()
}

/// Two-sided ergodic average `(2N+1)^{-1} sum_{|n| <= N} [phi_t(x, y) in S^{-n} U]`
/// along the evolved window configuration.
pub fn kac_two_sided_average(
    w: &KacWindow,
    u: &LatticeCylinder,
    t: i64,
    n: i64,
) -> Result<f64> {
    if n < 0 || n > w.half_width() {
        return Err(Error::invalid(
            "n",
            format!("averaging range {n} outside window half-width {}", w.half_width()),
        ));
    }
    let evolved = evolve_strip(w, t)?;
    let mut count = 0u64;
    for shift in -n..=n {
        let mut hit = true;
        for &(off, coord, bit) in u.constraints() {
            if window_coord_bit(w, &evolved, t, coord, off + shift)? != bit {
                hit = false;
                break;
            }
        }
        count += hit as u64;
    }
    Ok(count as f64 / (2 * n + 1) as f64)
}

/// Exact pushforward probability `P(phi_{-t} U)` under the product law with
/// colour bias alpha and mark bias beta, by brute-force enumeration of the
/// independent source bits in U's dependency cone.
pub fn exact_pushforward_probability<R: Real>(
    u: &LatticeCylinder,
    t: i64,
    alpha: R,
    beta: R,
) -> Result<R> {
    if t < 0 {
        return Err(Error::invalid("t", "pushforward needs t >= 0"));
    }
    // slot assignment for each independent source bit in the cone
    fn intern(
        slots: &mut BTreeMap<(LatticeCoord, i64), usize>,
        slot_coord: &mut Vec<LatticeCoord>,
        key: (LatticeCoord, i64),
    ) -> usize {
        if let Some(&s) = slots.get(&key) {
            return s;
        }
        let next = slots.len();
        slots.insert(key, next);
        slot_coord.push(key.0);
        next
    }
    let mut slots: BTreeMap<(LatticeCoord, i64), usize> = BTreeMap::new();
    let mut slot_coord: Vec<LatticeCoord> = Vec::new();
    // each constraint becomes (parity mask over slots, required bit)
    let mut masks: Vec<(u64, bool)> = Vec::new();
    for &(off, coord, bit) in u.constraints() {
        let mut mask = 0u64;
        match coord {
            LatticeCoord::Colour => {
                // x_off(t) = x_{off-t} ^ y_{off-t} ^ ... ^ y_{off-1}
                let s = intern(&mut slots, &mut slot_coord, (LatticeCoord::Colour, off - t));
                mask |= 1u64 << s;
                for j in (off - t)..off {
                    let s = intern(&mut slots, &mut slot_coord, (LatticeCoord::Mark, j));
                    mask ^= 1u64 << s;
                }
            }
            LatticeCoord::Mark => {
                let s = intern(&mut slots, &mut slot_coord, (LatticeCoord::Mark, off));
                mask |= 1u64 << s;
            }
        }
        masks.push((mask, bit));
        if slots.len() > CONE_ENUMERATION_CAP {
            return Err(Error::ConeTooLarge {
                bits: slots.len(),
                cap: CONE_ENUMERATION_CAP,
            });
        }
    }
    let k = slots.len();
    let probs: Vec<(R, R)> = slot_coord
        .iter()
        .map(|c| {
            let p1 = match c {
                LatticeCoord::Colour => alpha,
                LatticeCoord::Mark => beta,
            };
            (R::one() - p1, p1)
        })
        .collect();

    // depth-first enumeration with a running product; zero products prune
    fn dfs<R: Real>(
        slot: usize,
        assign: u64,
        p: R,
        k: usize,
        probs: &[(R, R)],
        masks: &[(u64, bool)],
    ) -> R {
        if p == R::zero() {
            return R::zero();
        }
        if slot == k {
            let ok = masks
                .iter()
                .all(|&(m, bit)| ((assign & m).count_ones() % 2 == 1) == bit);
            return if ok { p } else { R::zero() };
        }
        let (p0, p1) = probs[slot];
        dfs(slot + 1, assign, p * p0, k, probs, masks)
            + dfs(slot + 1, assign | (1u64 << slot), p * p1, k, probs, masks)
    }
    Ok(dfs(0, 0, R::one(), k, &probs, &masks))
}

/// One row of the macroscopic-law table.
#[derive(Clone, Debug, Serialize)]
pub struct LawSuiteRow {
    pub cylinder: String,
    pub t: i64,
    pub n: i64,
    pub empirical: f64,
    pub exact: f64,
    pub gap: f64,
    /// i.i.d.-site standard error `sqrt(P(1-P)/(2N+1))`.
    pub std_error: f64,
}

/// Runs the two-sided average of every cylinder against its exact
/// pushforward probability.
pub fn macroscopic_law_suite(
    w: &KacWindow,
    t: i64,
    n: i64,
    cylinders: &[LatticeCylinder],
    alpha: f64,
    beta: f64,
) -> Result<Vec<LawSuiteRow>> {
    cylinders
        .iter()
        .map(|u| {
            let empirical = kac_two_sided_average(w, u, t, n)?;
            let exact: f64 = exact_pushforward_probability(u, t, alpha, beta)?;
            Ok(LawSuiteRow {
                cylinder: u.to_string(),
                t,
                n,
                empirical,
                exact,
                gap: (empirical - exact).abs(),
                std_error: (exact * (1.0 - exact) / (2 * n + 1) as f64).sqrt(),
            })
        })
        .collect()
}
