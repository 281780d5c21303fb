//! Exact optima for small instances and independent re-checks.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::fixed::Fixed;
use crate::graph::{BMatching, BudgetVector, Graph, Weight};
use crate::lp::{Alpha, LpInstance};

pub const MAX_ORACLE_EDGES: usize = 24;
pub const MAX_LAYERED_EDGES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchOrder {
    /// Heaviest edges first.
    WeightDescending,
    /// Edge ids in reverse.
    ReverseId,
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub value: Weight,
    pub witness: BMatching,
}

pub fn exact_max_bmatching(g: &Graph, b: &BudgetVector, weighted: bool) -> Result<OracleResult> {
    exact_max_bmatching_ordered(g, b, weighted, SearchOrder::WeightDescending)
}

pub fn exact_max_bmatching_ordered(g: &Graph, b: &BudgetVector, weighted: bool, order: SearchOrder) -> Result<OracleResult> {
    b.check_for(g)?;
    if g.m() > MAX_ORACLE_EDGES {
        return Err(Error::OracleCap { m: g.m(), cap: MAX_ORACLE_EDGES });
    }
    let (value, edges) = search(g, b.as_slice(), weighted, order);
    let witness = BMatching::from_edges(g, b, edges)?;
    Ok(OracleResult { value, witness })
}

/// Maximum b'-matching size of a small bipartite layer pair; `caps` may be 0.
pub fn exact_max_matching_layered(g: &Graph, caps: &[u32]) -> Result<usize> {
    exact_max_matching_layered_ordered(g, caps, SearchOrder::WeightDescending)
}

pub fn exact_max_matching_layered_ordered(g: &Graph, caps: &[u32], order: SearchOrder) -> Result<usize> {
    if caps.len() != g.n() {
        return Err(Error::Dimension { expected: g.n(), found: caps.len() });
    }
    if g.m() > MAX_LAYERED_EDGES {
        return Err(Error::OracleCap { m: g.m(), cap: MAX_LAYERED_EDGES });
    }
    let (value, _) = search(g, caps, false, order);
    Ok(value.to_integer() as usize)
}

struct Search<'a> {
    ends: Vec<(usize, usize)>,
    w: Vec<i128>,
    /// `suffix_top[i][k]`: sum of the `k` largest weights among positions `i..`.
    suffix_top: Vec<Vec<i128>>,
    residual: Vec<u32>,
    residual_total: u64,
    ids: &'a [usize],
    chosen: Vec<bool>,
    cur: i128,
    best: i128,
    best_set: Vec<bool>,
}

impl Search<'_> {
    fn bound(&self, i: usize) -> i128 {
        let k = (self.residual_total / 2) as usize;
        let top = &self.suffix_top[i];
        self.cur + top[k.min(top.len() - 1)]
    }

    fn go(&mut self, i: usize) {
        if self.cur > self.best {
            self.best = self.cur;
            self.best_set.clone_from(&self.chosen);
        }
        if i == self.ends.len() || self.bound(i) <= self.best {
            return;
        }
        let (u, v) = self.ends[i];
        if self.residual[u] > 0 && self.residual[v] > 0 && self.w[i] > 0 {
            self.residual[u] -= 1;
            self.residual[v] -= 1;
            self.residual_total -= 2;
            self.chosen[i] = true;
            self.cur += self.w[i];
            self.go(i + 1);
            self.cur -= self.w[i];
            self.chosen[i] = false;
            self.residual[u] += 1;
            self.residual[v] += 1;
            self.residual_total += 2;
        }
        self.go(i + 1);
    }
}

fn search(g: &Graph, caps: &[u32], weighted: bool, order: SearchOrder) -> (Weight, Vec<usize>) {
    let m = g.m();
    let raw: Vec<Weight> = (0..m).map(|e| if weighted { g.weight(e) } else { Weight::from_integer(1) }).collect();
    let scale = raw.iter().fold(1i64, |acc, w| acc.lcm(w.denom()));
    let scaled: Vec<i128> = raw.iter().map(|w| (*w.numer() as i128) * (scale / *w.denom()) as i128).collect();
    let mut ids: Vec<usize> = (0..m).collect();
    match order {
        SearchOrder::WeightDescending => ids.sort_by(|&a, &c| scaled[c].cmp(&scaled[a]).then(a.cmp(&c))),
        SearchOrder::ReverseId => ids.reverse(),
    }
    let w: Vec<i128> = ids.iter().map(|&e| scaled[e]).collect();
    let mut suffix_top = vec![vec![0i128]; m + 1];
    for i in (0..m).rev() {
        let mut rest: Vec<i128> = w[i..].iter().copied().filter(|&x| x > 0).collect();
        rest.sort_unstable_by(|a, c| c.cmp(a));
        let mut acc = vec![0i128];
        for x in rest {
            acc.push(acc.last().unwrap() + x);
        }
        suffix_top[i] = acc;
    }
    let mut s = Search {
        ends: ids.iter().map(|&e| g.endpoints(e)).collect(),
        w,
        suffix_top,
        residual: caps.to_vec(),
        residual_total: caps.iter().map(|&c| c as u64).sum(),
        ids: &ids,
        chosen: vec![false; m],
        cur: 0,
        best: 0,
        best_set: vec![false; m],
    };
    s.go(0);
    let edges: Vec<usize> = (0..m).filter(|&i| s.best_set[i]).map(|i| s.ids[i]).collect();
    let value = if s.best.is_zero() { Weight::zero() } else { Weight::new(s.best as i64, scale) };
    (value, edges)
}

/// Independent implementation of the alpha-tightness test using big integers.
pub fn recheck_tightness(inst: &LpInstance, x: &[Fixed], alpha: Alpha) -> bool {
    let g = inst.graph;
    let big = |f: Fixed| BigUint::from(f.raw());
    let num = BigUint::from(alpha.num);
    let den = BigUint::from(alpha.den);
    let mut sums = vec![BigUint::zero(); g.n()];
    for e in 0..g.m() {
        let (u, v) = g.endpoints(e);
        sums[u] += big(x[e]);
        sums[v] += big(x[e]);
    }
    let loose_v: Vec<bool> = (0..g.n()).map(|v| &sums[v] * &den < big(inst.b[v]) * &num).collect();
    (0..g.m()).all(|e| {
        let (u, v) = g.endpoints(e);
        !(loose_v[u] && loose_v[v] && big(x[e]) * &den < big(inst.cap(e)) * &num)
    })
}
