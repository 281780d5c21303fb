//! Tight fractional solutions of the b-matching LP
//!
//! ```text
//! maximize   sum_e x_e
//! subject to sum_{e in E(v)} x_e <= b_v,   0 <= x_e <= r_e
//! ```
//!
//! and their conversion into integral b-matchings.

mod certificate;
mod full;
mod one_round;
mod rounding;
mod sequential;

use serde::Serialize;

pub use certificate::{dual_certificate, DualCertificate};
pub use full::{full_mpc, FullOutcome};
pub use one_round::{one_round_mpc, OneRoundOutcome};
pub use rounding::{constant_approx_bmatching, round_to_integral, ConstantApprox};
pub use sequential::{sequential, History};

use crate::fixed::Fixed;
use crate::graph::{BudgetVector, Graph};
use crate::rng;

/// A rational `num / den` in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Alpha {
    pub num: u64,
    pub den: u64,
}

impl Alpha {
    pub const FIVE_HUNDREDTHS: Alpha = Alpha { num: 1, den: 20 };
    pub const ONE_FIFTH: Alpha = Alpha { num: 1, den: 5 };

    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0 && num <= den, "alpha must lie in [0, 1]");
        Alpha { num, den }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl std::fmt::Display for Alpha {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Graph with per-vertex budgets `b` and per-edge caps `r` (`None` = all ones).
#[derive(Clone, Debug)]
pub struct LpInstance<'a> {
    pub graph: &'a Graph,
    pub b: Vec<Fixed>,
    pub r: Option<Vec<Fixed>>,
}

impl<'a> LpInstance<'a> {
    /// Integer budgets and unit caps: the relaxation of b-matching.
    pub fn unit(graph: &'a Graph, b: &BudgetVector) -> Self {
        LpInstance { graph, b: b.as_slice().iter().map(|&x| Fixed::from_int(x as u64)).collect(), r: None }
    }

    pub fn with_caps(graph: &'a Graph, b: Vec<Fixed>, r: Option<Vec<Fixed>>) -> Self {
        assert_eq!(b.len(), graph.n());
        if let Some(r) = &r {
            assert_eq!(r.len(), graph.m());
        }
        LpInstance { graph, b, r }
    }

    #[inline]
    pub fn cap(&self, e: usize) -> Fixed {
        match &self.r {
            Some(r) => r[e],
            None => Fixed::ONE,
        }
    }

    pub fn has_unit_caps(&self) -> bool {
        self.r.as_ref().is_none_or(|r| r.iter().all(|&c| c == Fixed::ONE))
    }
}

/// Per-edge values with optional per-round trace.
#[derive(Clone, Debug, Serialize)]
pub struct FractionalSolution {
    pub x: Vec<Fixed>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<History>,
}

impl FractionalSolution {
    pub fn total(&self) -> Fixed {
        self.x.iter().sum()
    }
}

pub fn vertex_sums(g: &Graph, x: &[Fixed]) -> Vec<Fixed> {
    let mut y = vec![Fixed::ZERO; g.n()];
    for (e, &xe) in x.iter().enumerate() {
        let (u, v) = g.endpoints(e);
        y[u] += xe;
        y[v] += xe;
    }
    y
}

/// `true` iff every vertex sum is within budget and every edge within its cap.
pub fn is_feasible(inst: &LpInstance, x: &[Fixed]) -> bool {
    x.len() == inst.graph.m()
        && x.iter().enumerate().all(|(e, &xe)| xe <= inst.cap(e))
        && vertex_sums(inst.graph, x).iter().zip(&inst.b).all(|(y, b)| y <= b)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TightnessReport {
    pub alpha: Alpha,
    pub v_loose: Vec<usize>,
    pub e_loose: Vec<usize>,
}

impl TightnessReport {
    pub fn is_tight(&self) -> bool {
        self.e_loose.is_empty()
    }
}

#[inline]
fn below_fraction(value: Fixed, alpha: Alpha, of: Fixed) -> bool {
    // value < (num / den) * of
    value.lt_scaled(alpha.den as u128, of, alpha.num as u128)
}

pub fn loose_vertex_mask(inst: &LpInstance, y: &[Fixed], alpha: Alpha) -> Vec<bool> {
    y.iter().zip(&inst.b).map(|(&s, &b)| below_fraction(s, alpha, b)).collect()
}

pub fn loose_sets(inst: &LpInstance, x: &[Fixed], alpha: Alpha) -> TightnessReport {
    let g = inst.graph;
    let y = vertex_sums(g, x);
    let vmask = loose_vertex_mask(inst, &y, alpha);
    let e_loose = (0..g.m())
        .filter(|&e| {
            let (u, v) = g.endpoints(e);
            vmask[u] && vmask[v] && below_fraction(x[e], alpha, inst.cap(e))
        })
        .collect();
    TightnessReport { alpha, v_loose: (0..g.n()).filter(|&v| vmask[v]).collect(), e_loose }
}

const TAG_THRESHOLD: u64 = 0x7468_7265;

/// Random thresholds `T_{v,t}` uniform on `[0.2 b_v, 0.4 b_v]`.
///
/// The schedule stores uniform 64-bit words rather than values so that two
/// processes with different budgets at the same vertex can still share it.
#[derive(Clone, Debug)]
pub enum ThresholdSchedule {
    Seeded(u64),
    /// `words[t - 1][v]`.
    Table(Vec<Vec<u64>>),
}

impl ThresholdSchedule {
    pub fn seeded(seed: u64) -> Self {
        ThresholdSchedule::Seeded(rng::derive(seed, &[TAG_THRESHOLD]))
    }

    pub fn materialize(&self, n: usize, rounds: usize) -> Self {
        ThresholdSchedule::Table((1..=rounds).map(|t| (0..n).map(|v| self.word(v, t)).collect()).collect())
    }

    #[inline]
    pub fn word(&self, v: usize, t: usize) -> u64 {
        match self {
            ThresholdSchedule::Seeded(key) => rng::mix2(*key, v as u64, t as u64),
            ThresholdSchedule::Table(words) => words[t - 1][v],
        }
    }

    /// `T_{v,t}` for budget `b`: `lo + floor((hi - lo) * word / 2^64)`, with
    /// `lo = ceil(b / 5)` and `hi = floor(2b / 5)` on the fixed-point grid.
    #[inline]
    pub fn value(&self, b: Fixed, v: usize, t: usize) -> Fixed {
        threshold_from_word(b, self.word(v, t))
    }
}

#[inline]
pub fn threshold_from_word(b: Fixed, word: u64) -> Fixed {
    let lo = Fixed::from_raw(b.raw().div_ceil(5));
    let hi = Fixed::from_raw(b.raw() * 2 / 5);
    if hi <= lo {
        return hi;
    }
    lo.lerp_grid(hi - lo, word)
}

/// Exact `ceil(sqrt(2m / n))`, at least 1.
pub fn machines_for(n: usize, m: usize) -> usize {
    if n == 0 || m == 0 {
        return 1;
    }
    let target = 2 * m as u128;
    let mut k = ((2.0 * m as f64 / n as f64).sqrt().ceil() as u128).max(1);
    while k > 1 && (k - 1) * (k - 1) * n as u128 >= target {
        k -= 1;
    }
    while k * k * (n as u128) < target {
        k += 1;
    }
    k as usize
}

/// Tunables of the tight-solution pipeline.
#[derive(Clone, Debug, Serialize)]
pub struct LpParams {
    /// `T = floor(log2(N) / divisor)` in the one-round simulation.
    pub one_round_divisor: u32,
    /// Rounds of the single-machine branch; `None` = `ceil(100 log2 n)`.
    pub sequential_rounds: Option<usize>,
    /// Iteration cap; `None` = `10 ceil(log2 log2 d) + 20`.
    pub iteration_cap: Option<usize>,
    /// Active-edge count at or below which the single-machine branch runs;
    /// `None` = local memory minus `n`.
    pub sequential_threshold: Option<usize>,
    /// Repetitions `R` of the constant-factor matching; `None` = `ceil(log2 n)`.
    pub repetitions: Option<usize>,
    pub trace: bool,
}

impl Default for LpParams {
    fn default() -> Self {
        LpParams {
            one_round_divisor: 1000,
            sequential_rounds: None,
            iteration_cap: None,
            sequential_threshold: None,
            repetitions: None,
            trace: false,
        }
    }
}

pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}
