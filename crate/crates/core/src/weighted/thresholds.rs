use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Weight;

/// `eps` as an exact fraction read from its shortest decimal form, so that
/// `0.3` is `3/10` rather than the nearest binary fraction.
pub fn exact_eps(eps: f64) -> Result<BigRational> {
    if !(eps.is_finite() && eps > 0.0 && eps <= 1.0) {
        return Err(Error::Precondition(format!("eps must lie in (0, 1], got {eps}")));
    }
    let text = format!("{eps}");
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let digits: BigInt = format!("{int}{frac}").parse().expect("decimal digits");
    let den = BigInt::from(10u32).pow(frac.len() as u32);
    Ok(BigRational::new(digits, den))
}

pub fn to_big(w: Weight) -> BigRational {
    BigRational::new(BigInt::from(*w.numer()), BigInt::from(*w.denom()))
}

/// Smallest `t >= 1` with `(1 + eps^4)^t >= 1 / eps^20`.
pub fn class_period(eps: f64) -> Result<usize> {
    let e = exact_eps(eps)?;
    let (p, q) = (e.numer().to_biguint().unwrap(), e.denom().to_biguint().unwrap());
    let base = q.pow(4u32) + p.pow(4u32);
    let holds = |t: u32| base.pow(t) * p.pow(20u32) >= q.pow(4 * t + 20);
    let guess = (20.0 * (1.0 / eps).ln() / (1.0 + eps.powi(4)).ln()).ceil().max(1.0) as u32;
    let mut t = guess.max(1);
    while t > 1 && holds(t - 1) {
        t -= 1;
    }
    while !holds(t) {
        t += 1;
    }
    Ok(t as usize)
}

/// The `eps^12` grid that threshold coordinates live on.
#[derive(Clone, Debug)]
pub struct ThresholdGrid {
    pub eps: BigRational,
    /// `eps^12`.
    pub unit: BigRational,
    /// Largest coordinate sum allowed for `tau^B`, in grid units.
    pub q_max: u64,
    /// `floor(32 / eps^2)`.
    pub max_gaps: usize,
}

impl ThresholdGrid {
    pub fn new(eps: f64) -> Result<Self> {
        let e = exact_eps(eps)?;
        let unit = e.pow(12);
        let cap = (BigRational::one() + e.pow(4)) / &unit;
        let q_max = cap.floor().to_integer().to_u64().ok_or_else(|| {
            Error::Precondition(format!("eps = {eps} puts more than 2^64 steps on the threshold grid"))
        })?;
        let max_gaps = (BigRational::from_integer(32.into()) / e.pow(2)).floor().to_integer().to_usize().unwrap_or(usize::MAX);
        Ok(ThresholdGrid { eps: e, unit, q_max, max_gaps })
    }
}

/// Per-layer thresholds in units of `eps^12`: `a` has one entry per layer,
/// `b` one per gap between consecutive layers.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ThresholdSequences {
    pub a: Vec<u64>,
    pub b: Vec<u64>,
}

impl ThresholdSequences {
    pub fn layers(&self) -> usize {
        self.a.len()
    }

    pub fn satisfies(&self, grid: &ThresholdGrid) -> bool {
        let sa: u128 = self.a.iter().map(|&x| x as u128).sum();
        let sb: u128 = self.b.iter().map(|&x| x as u128).sum();
        self.a.len() == self.b.len() + 1 && !self.b.is_empty() && self.b.len() <= grid.max_gaps && sb > sa && sb <= grid.q_max as u128
    }
}

/// Checks a sequence directly on rational threshold values.
pub fn validate_thresholds(eps: &BigRational, s: &ThresholdSequences) -> bool {
    let unit = eps.pow(12);
    let tau = |q: &u64| BigRational::from_integer(BigInt::from(*q)) * &unit;
    let on_grid = |x: &BigRational| (x / &unit).is_integer();
    let ta: Vec<BigRational> = s.a.iter().map(tau).collect();
    let tb: Vec<BigRational> = s.b.iter().map(tau).collect();
    let sum_a = ta.iter().fold(BigRational::zero(), |acc, x| acc + x);
    let sum_b = tb.iter().fold(BigRational::zero(), |acc, x| acc + x);
    let cap = BigRational::from_integer(32.into()) / eps.pow(2);
    ta.iter().chain(&tb).all(on_grid)
        && s.a.len() == s.b.len() + 1
        && !tb.is_empty()
        && BigRational::from_integer(BigInt::from(tb.len())) <= cap
        && &sum_b - &sum_a >= unit
        && sum_b <= BigRational::one() + eps.pow(4)
}

fn binomial(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n.saturating_sub(k));
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(r)
}

/// Number of threshold pairs with `gaps` gaps, saturating.
fn count_with_gaps(gaps: u64, q_max: u64, limit: u128) -> u128 {
    let mut total: u128 = 0;
    for sb in 1..=q_max {
        // Compositions of sb into `gaps` parts, times those of any sum below
        // sb into `gaps + 1` parts (hockey stick).
        let c = binomial(sb + gaps - 1, gaps - 1).and_then(|x| x.checked_mul(binomial(sb + gaps, gaps + 1)?));
        match c.and_then(|c| total.checked_add(c)) {
            Some(t) if t <= limit => total = t,
            _ => return u128::MAX,
        }
    }
    total
}

fn compositions(parts: usize, max_sum: u64, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if prefix.len() == parts {
        out.push(prefix.clone());
        return;
    }
    let used: u64 = prefix.iter().sum();
    for x in 0..=max_sum - used {
        prefix.push(x);
        compositions(parts, max_sum, prefix, out);
        prefix.pop();
    }
}

/// Every threshold pair on the `eps^12` grid meeting the sum constraints,
/// with at most `max_layers` layers when given. Fails when more than `limit`
/// sequences would be produced.
pub fn enumerate_thresholds(eps: f64, max_layers: Option<usize>, limit: u128) -> Result<Vec<ThresholdSequences>> {
    let grid = ThresholdGrid::new(eps)?;
    let cap = max_layers.map_or(grid.max_gaps, |l| l.saturating_sub(1).min(grid.max_gaps));
    let mut count: u128 = 0;
    for gaps in 1..=cap as u64 {
        count = count.saturating_add(count_with_gaps(gaps, grid.q_max, limit));
        if count > limit {
            return Err(Error::EnumerationInfeasible { grid: grid.q_max, count, limit });
        }
    }
    let mut out = Vec::with_capacity(count as usize);
    for gaps in 1..=cap {
        let mut bs = vec![];
        compositions(gaps, grid.q_max, &mut vec![], &mut bs);
        for b in bs {
            let sb: u64 = b.iter().sum();
            if sb == 0 {
                continue;
            }
            let mut as_ = vec![];
            compositions(gaps + 1, sb - 1, &mut vec![], &mut as_);
            out.extend(as_.into_iter().map(|a| ThresholdSequences { a, b: b.clone() }));
        }
    }
    out.sort();
    out.dedup();
    debug_assert_eq!(out.len() as u128, count);
    Ok(out)
}

/// Draws a threshold pair whose coordinates come from the given candidate
/// values. End layers may also take `0` (free endpoints); middle layers and
/// gaps never do. Returns `None` when no draw within `attempts` is valid.
pub fn sample_thresholds<R: Rng>(
    grid: &ThresholdGrid,
    a_cands: &[u64],
    b_cands: &[u64],
    max_layers: usize,
    attempts: usize,
    rng: &mut R,
) -> Option<ThresholdSequences> {
    if b_cands.is_empty() {
        return None;
    }
    let mut shapes = vec![];
    for layers in 2..=max_layers.min(grid.max_gaps + 1) {
        for first_zero in [true, false] {
            for last_zero in [true, false] {
                let nonzero = (layers - 2) + !first_zero as usize + !last_zero as usize;
                if nonzero == 0 || !a_cands.is_empty() {
                    shapes.push((layers, first_zero, last_zero));
                }
            }
        }
    }
    if shapes.is_empty() {
        return None;
    }
    let (layers, first_zero, last_zero) = shapes[rng.gen_range(0..shapes.len())];
    for _ in 0..attempts {
        let mut pick_a = |zero: bool| if zero { 0 } else { a_cands[rng.gen_range(0..a_cands.len())] };
        let mut a = Vec::with_capacity(layers);
        a.push(pick_a(first_zero));
        for _ in 1..layers - 1 {
            a.push(pick_a(false));
        }
        a.push(pick_a(last_zero));
        let b = (0..layers - 1).map(|_| b_cands[rng.gen_range(0..b_cands.len())]).collect();
        let s = ThresholdSequences { a, b };
        if s.satisfies(grid) {
            return Some(s);
        }
    }
    None
}

/// `floor(x)` for a non-negative rational, as `u64` (saturating).
pub(crate) fn floor_u64(x: &BigRational) -> u64 {
    x.floor().to_integer().to_u64().unwrap_or(u64::MAX)
}

pub(crate) fn ceil_u64(x: &BigRational) -> u64 {
    x.ceil().to_integer().to_u64().unwrap_or(u64::MAX)
}
