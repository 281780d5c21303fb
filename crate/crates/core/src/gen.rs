//! Seeded graph and budget generators.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{BudgetVector, Graph, Weight};
use crate::rng;

const TAG_GNP: u64 = 0x676e70;
const TAG_BIP: u64 = 0x626970;
const TAG_BUDGET: u64 = 0x627564;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fixture {
    /// A single edge `a-b`.
    F1,
    /// A triangle.
    F2,
    /// The path `a-b-c-d`.
    F3,
}

impl std::str::FromStr for Fixture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim_start_matches("fixture-").to_ascii_uppercase().as_str() {
            "F1" => Ok(Fixture::F1),
            "F2" => Ok(Fixture::F2),
            "F3" => Ok(Fixture::F3),
            other => Err(Error::Graph(format!("unknown fixture `{other}`"))),
        }
    }
}

pub fn fixture(f: Fixture) -> Graph {
    match f {
        Fixture::F1 => Graph::new(2, [(0, 1)]),
        Fixture::F2 => Graph::new(3, [(0, 1), (1, 2), (0, 2)]),
        Fixture::F3 => Graph::new(4, [(0, 1), (1, 2), (2, 3)]),
    }
    .expect("fixtures are simple graphs")
}

fn draw_weight<R: Rng>(r: &mut R, wmax: Option<u32>) -> Option<Weight> {
    wmax.map(|w| Weight::from_integer(r.gen_range(1..=w.max(1)) as i64))
}

/// Gaps between successes of a Bernoulli(p) sequence.
struct GeometricSkips {
    log_q: f64,
    p: f64,
}

impl GeometricSkips {
    fn new(p: f64) -> Self {
        GeometricSkips { log_q: (1.0 - p).ln(), p }
    }

    fn next<R: Rng>(&self, r: &mut R) -> u64 {
        if self.p >= 1.0 {
            return 0;
        }
        let u: f64 = r.gen();
        let s = ((1.0 - u).ln() / self.log_q).floor();
        if s.is_finite() && s < u64::MAX as f64 / 2.0 {
            s as u64
        } else {
            u64::MAX / 2
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::Precondition(format!("edge probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Erdős–Rényi `G(n, p)`; pairs are visited in canonical order with geometric
/// skipping, so the cost is proportional to the output size.
pub fn gnp(n: usize, p: f64, wmax: Option<u32>, seed: u64) -> Result<Graph> {
    check_p(p)?;
    let mut r = rng::stream(seed, &[TAG_GNP, n as u64]);
    let mut ends = Vec::new();
    let mut weights = wmax.map(|_| Vec::new());
    if n >= 2 && p > 0.0 {
        let skips = GeometricSkips::new(p);
        let (mut u, mut v) = (0u64, 0u64);
        let n64 = n as u64;
        // (u, v) is the last visited pair; start just before (0, 1).
        loop {
            let mut step = skips.next(&mut r) + 1;
            v = v.saturating_add(step);
            while u < n64 && v >= n64 {
                step = v - n64;
                u += 1;
                v = u + 1 + step;
            }
            if u + 1 >= n64 {
                break;
            }
            ends.push((u as u32, v as u32));
            if let (Some(ws), Some(w)) = (weights.as_mut(), draw_weight(&mut r, wmax)) {
                ws.push(w);
            }
        }
    }
    Graph::from_canonical(n, ends, weights)
}

/// Random bipartite graph with sides `0..n1` and `n1..n1+n2`.
pub fn bipartite(n1: usize, n2: usize, p: f64, wmax: Option<u32>, seed: u64) -> Result<Graph> {
    check_p(p)?;
    let mut r = rng::stream(seed, &[TAG_BIP, n1 as u64, n2 as u64]);
    let mut ends = Vec::new();
    let mut weights = wmax.map(|_| Vec::new());
    if p > 0.0 && n2 > 0 {
        let skips = GeometricSkips::new(p);
        let total = n1 as u64 * n2 as u64;
        let mut pos = skips.next(&mut r);
        while pos < total {
            let u = pos / n2 as u64;
            let v = n1 as u64 + pos % n2 as u64;
            ends.push((u as u32, v as u32));
            if let (Some(ws), Some(w)) = (weights.as_mut(), draw_weight(&mut r, wmax)) {
                ws.push(w);
            }
            pos = pos.saturating_add(skips.next(&mut r) + 1);
        }
    }
    Graph::from_canonical(n1 + n2, ends, weights)
}

pub fn path(n: usize) -> Graph {
    Graph::new(n, (1..n).map(|i| (i - 1, i))).expect("path is simple")
}

/// Star with center 0.
pub fn star(leaves: usize) -> Graph {
    Graph::new(leaves + 1, (1..=leaves).map(|i| (0, i))).expect("star is simple")
}

pub fn constant_budgets(n: usize, b: u32) -> Result<BudgetVector> {
    BudgetVector::new(vec![b; n])
}

/// Independent uniform budgets in `1..=bmax`.
pub fn uniform_budgets(n: usize, bmax: u32, seed: u64) -> Result<BudgetVector> {
    if bmax == 0 {
        return Err(Error::Precondition("bmax must be at least 1".into()));
    }
    let mut r = rng::stream(seed, &[TAG_BUDGET, n as u64]);
    BudgetVector::new((0..n).map(|_| r.gen_range(1..=bmax)).collect())
}

/// `G(n, p)` with `p` chosen for the requested average degree.
pub fn gnp_avg_degree(n: usize, avg_degree: f64, wmax: Option<u32>, seed: u64) -> Result<Graph> {
    let p = if n < 2 { 0.0 } else { (avg_degree / (n as f64 - 1.0)).clamp(0.0, 1.0) };
    gnp(n, p, wmax, seed)
}

/// `G(n, p)` with between 1 and `max_edges` edges and uniform budgets in
/// `1..=bmax`. Redraws the graph with seeds `seed, seed + 1000, ...`.
pub fn small_instance(
    n: usize,
    p: f64,
    wmax: Option<u32>,
    bmax: u32,
    max_edges: usize,
    seed: u64,
) -> Result<(Graph, BudgetVector)> {
    let mut k = seed;
    for _ in 0..1_000_000 {
        let g = gnp(n, p, wmax, k)?;
        if g.m() > 0 && g.m() <= max_edges {
            return Ok((g, uniform_budgets(n, bmax, seed)?));
        }
        k = k.wrapping_add(1000);
    }
    Err(Error::Precondition(format!("no G({n}, {p}) draw with 1..={max_edges} edges")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_expected_shape() {
        assert_eq!(fixture(Fixture::F1).m(), 1);
        assert_eq!(fixture(Fixture::F2).m(), 3);
        assert_eq!(fixture(Fixture::F3).pairs(), &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!("fixture-F2".parse::<Fixture>().unwrap(), Fixture::F2);
    }

    #[test]
    fn gnp_extremes() {
        assert_eq!(gnp(10, 0.0, None, 1).unwrap().m(), 0);
        assert_eq!(gnp(10, 1.0, None, 1).unwrap().m(), 45);
        assert_eq!(gnp(1, 1.0, None, 1).unwrap().m(), 0);
        assert_eq!(bipartite(3, 4, 1.0, None, 1).unwrap().m(), 12);
    }

    #[test]
    fn gnp_is_deterministic() {
        let a = gnp(200, 0.05, Some(9), 42).unwrap();
        let b = gnp(200, 0.05, Some(9), 42).unwrap();
        assert_eq!(a.pairs(), b.pairs());
        assert_eq!((0..a.m()).map(|e| a.weight(e)).collect::<Vec<_>>(), (0..b.m()).map(|e| b.weight(e)).collect::<Vec<_>>());
        assert_ne!(a.pairs(), gnp(200, 0.05, Some(9), 43).unwrap().pairs());
    }

    #[test]
    fn gnp_edge_count_is_binomial() {
        // Binomial(n(n-1)/2, p): mean 4995, sd about 70.3.
        let g = gnp(1000, 0.01, None, 7).unwrap();
        let mean = 499_500.0 * 0.01;
        let sd = (499_500.0f64 * 0.01 * 0.99).sqrt();
        assert!((g.m() as f64 - mean).abs() <= 3.0 * sd, "m = {}", g.m());
    }

    #[test]
    fn bipartite_edges_cross_sides() {
        let g = bipartite(5, 7, 0.5, None, 3).unwrap();
        for &(u, v) in g.pairs() {
            assert!(u < 5 && v >= 5);
        }
    }
}
