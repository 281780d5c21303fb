//! (1+eps)-approximate unweighted b-matching by short augmenting walks.
//!
//! Each phase draws a random layering of the vertex copies for every walk
//! length `2k' + 1`, grows copy-disjoint walks layer by layer and applies
//! all of them at once.

mod assignment;
mod grow;
mod layered;

use std::collections::HashSet;

use serde::Serialize;

pub use assignment::{distribute_matched_edges, MatchedCopyAssignment};
pub use grow::{
    advance_paths, extend_layer, greedy_bmatching, grow_paths, grow_with, ExtendReport, GreedyExtender, GrowOutcome, GrowParams, LayerExtender,
    MpcExtender, PartialPath, PartialPathSet,
};
pub use layered::{build_layered_unweighted, MatchedArc, Side, UnmatchedArc, UnweightedLayeredGraph};

use crate::error::{Error, Result};
use crate::graph::{apply_walks, AlternatingWalk, BMatching, BudgetVector, CopyVertex, Graph, WalkStep};
use crate::lp::{ceil_log2, constant_approx_bmatching, LpParams};
use crate::mpc::MachineCluster;
use crate::rng;

const TAG_REPEAT: u64 = 0x7572_6570;
const TAG_PHASE: u64 = 0x7068_6173;

/// `k = ceil(2 / eps)`, at least 1.
pub fn k_for_eps(eps: f64) -> usize {
    assert!(eps > 0.0, "eps must be positive");
    ((2.0 / eps).ceil() as usize).max(1)
}

#[derive(Clone, Debug, Serialize)]
pub struct UnweightedParams {
    pub eps: f64,
    pub k_override: Option<usize>,
    /// Maximum number of phases; each phase tries every walk length.
    pub phase_budget: usize,
    /// Stop after this many consecutive phases without a gain.
    pub stall_limit: usize,
    /// Independent restarts; `None` = `ceil(log2 n)`.
    pub repetitions: Option<usize>,
    pub grow: GrowParams,
    /// Parameters of the starting constant-factor matching.
    pub lp: LpParams,
    /// Repetitions of the constant-factor matching inside each layer extension.
    pub extender_repetitions: usize,
    /// Stop once no augmenting walk of length at most `2k + 1` exists; the
    /// exhaustive check runs only on graphs with at most this many edges.
    pub exhaustion_check_edges: usize,
}

impl Default for UnweightedParams {
    fn default() -> Self {
        UnweightedParams {
            eps: 0.5,
            k_override: None,
            phase_budget: 256,
            stall_limit: 256,
            repetitions: None,
            grow: GrowParams::default(),
            lp: LpParams::default(),
            extender_repetitions: 4,
            exhaustion_check_edges: 2000,
        }
    }
}

impl UnweightedParams {
    pub fn k(&self) -> usize {
        self.k_override.unwrap_or_else(|| k_for_eps(self.eps))
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PhaseTrace {
    pub phase: usize,
    pub walks_per_length: Vec<usize>,
    pub invocations: usize,
    pub backtracks: usize,
    pub size_after: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct AugmentRun {
    #[serde(skip)]
    pub matching: BMatching,
    pub initial_size: usize,
    pub phases: Vec<PhaseTrace>,
    pub exhausted: bool,
}

/// Runs augmentation phases from `start` with the given extender.
pub fn augment_phases(
    g: &Graph,
    b: &BudgetVector,
    start: BMatching,
    extender: &mut dyn LayerExtender,
    cluster: &mut MachineCluster,
    params: &UnweightedParams,
    seed: u64,
    on_apply: &mut dyn FnMut(&BMatching),
) -> Result<AugmentRun> {
    let k = params.k();
    let mut m = start;
    let mut run = AugmentRun { matching: BMatching::empty(g.n()), initial_size: m.len(), phases: vec![], exhausted: false };
    let mut stall = 0;
    for phase in 0..params.phase_budget {
        if g.m() <= params.exhaustion_check_edges && approximation_certificate(g, b, &m, 2 * k).paths.is_empty() {
            run.exhausted = true;
            break;
        }
        let mut trace = PhaseTrace { phase, ..Default::default() };
        let before = m.len();
        for kp in 0..=k {
            let assignment = distribute_matched_edges(g, b, &m, cluster)?;
            let mut r = rng::stream(seed, &[TAG_PHASE, phase as u64, kp as u64]);
            let layered = build_layered_unweighted(g, b, &m, &assignment, kp, &mut r);
            let grown = grow_paths(&layered, extender, cluster, &params.grow, rng::derive(seed, &[TAG_PHASE, phase as u64, kp as u64, 1]))?;
            trace.walks_per_length.push(grown.walks.len());
            trace.invocations += grown.invocations;
            trace.backtracks += grown.backtracks;
            if grown.walks.is_empty() {
                continue;
            }
            let next = apply_walks(&m, &grown.walks, g, b)?;
            if next.len() != m.len() + grown.walks.len() || !next.is_valid_for(g, b) {
                return Err(Error::InvalidAugmentation("applied walks did not add one edge each".into()));
            }
            m = next;
            on_apply(&m);
        }
        trace.size_after = m.len();
        run.phases.push(trace);
        if m.len() == before {
            stall += 1;
            if stall >= params.stall_limit {
                break;
            }
        } else {
            stall = 0;
        }
    }
    run.matching = m;
    Ok(run)
}

#[derive(Clone, Debug, Serialize)]
pub struct UnweightedOutcome {
    #[serde(skip)]
    pub matching: BMatching,
    pub size: usize,
    pub k: usize,
    pub best_repetition: usize,
    pub repetition_sizes: Vec<usize>,
    /// Matching sizes after every applied batch in the best repetition.
    pub size_history: Vec<usize>,
    /// The starting matching and the matching after every applied batch.
    #[serde(skip)]
    pub matching_history: Vec<BMatching>,
    pub phases: Vec<PhaseTrace>,
}

/// Best of `R` independent runs of constant-factor start plus augmentation.
pub fn unweighted_one_plus_eps(
    g: &Graph,
    b: &BudgetVector,
    cluster: &mut MachineCluster,
    params: &UnweightedParams,
) -> Result<UnweightedOutcome> {
    b.check_for(g)?;
    let reps = params.repetitions.unwrap_or_else(|| ceil_log2(g.n()).max(1)).max(1);
    let mut best: Option<(usize, AugmentRun, Vec<BMatching>)> = None;
    let mut sizes = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut child = cluster.child(&[TAG_REPEAT, rep as u64], g.n(), g.words());
        let res = run_once(g, b, &mut child, params);
        cluster.absorb(child.take_log());
        let (run, history) = res?;
        sizes.push(run.matching.len());
        if best.as_ref().is_none_or(|(_, r, _)| run.matching.len() > r.matching.len()) {
            best = Some((rep, run, history));
        }
    }
    let (rep, run, matching_history) = best.expect("at least one repetition");
    Ok(UnweightedOutcome {
        size: run.matching.len(),
        matching: run.matching,
        k: params.k(),
        best_repetition: rep,
        repetition_sizes: sizes,
        size_history: matching_history.iter().map(|m| m.len()).collect(),
        matching_history,
        phases: run.phases,
    })
}

fn run_once(
    g: &Graph,
    b: &BudgetVector,
    cluster: &mut MachineCluster,
    params: &UnweightedParams,
) -> Result<(AugmentRun, Vec<BMatching>)> {
    let start = constant_approx_bmatching(g, b, cluster, &params.lp)?.matching;
    let mut history = vec![start.clone()];
    let mut ext = MpcExtender { params: LpParams { repetitions: Some(params.extender_repetitions), ..params.lp.clone() } };
    let seed = cluster.seed();
    let run = augment_phases(g, b, start, &mut ext, cluster, params, seed, &mut |m| history.push(m.clone()))?;
    Ok((run, history))
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub k: usize,
    pub paths: Vec<AlternatingWalk>,
    /// `|M| >= OPT / (1 + 2/k)` holds when `certified`.
    pub certified: bool,
    pub bound_num: usize,
    pub bound_den: usize,
}

/// Greedy inclusion-maximal set of copy-disjoint augmenting walks with at
/// most `k + 1` edges. Certifies `(1 + 2/k)` when `|Y| <= |M| / (k (k + 2))`.
pub fn approximation_certificate(g: &Graph, b: &BudgetVector, m: &BMatching, k: usize) -> CertificateReport {
    let mut matched_copy = std::collections::HashMap::new();
    let mut next = vec![0u32; g.n()];
    for e in m.iter() {
        let (u, v) = g.endpoints(e);
        next[u] += 1;
        next[v] += 1;
        matched_copy.insert((e, u), CopyVertex::new(u, next[u]));
        matched_copy.insert((e, v), CopyVertex::new(v, next[v]));
    }
    let mut s = CertSearch {
        g,
        b,
        m,
        matched_copy,
        max_edges: k + 1,
        used_copies: HashSet::new(),
        used_edges: HashSet::new(),
        cur_copies: Vec::new(),
        steps: Vec::new(),
    };
    let mut paths = Vec::new();
    if k > 0 {
        for x in 0..g.n() {
            for idx in m.degree(x) + 1..=b.get(x) {
                let start = CopyVertex::new(x, idx);
                if s.used_copies.contains(&start) {
                    continue;
                }
                s.cur_copies = vec![start];
                s.steps.clear();
                match s.from_vertex(x) {
                    Some(end) => {
                        for &c in &s.cur_copies {
                            s.used_copies.insert(c);
                        }
                        s.used_copies.insert(end);
                        for st in &s.steps {
                            s.used_edges.insert(st.edge);
                        }
                        paths.push(AlternatingWalk { steps: s.steps.clone(), start: Some(start), end: Some(end) });
                    }
                    // Every free copy of `x` behaves the same way.
                    None => break,
                }
            }
        }
    }
    let certified = k > 0 && paths.len() * k * (k + 2) <= m.len();
    CertificateReport { k, paths, certified, bound_num: k + 2, bound_den: k }
}

struct CertSearch<'a> {
    g: &'a Graph,
    b: &'a BudgetVector,
    m: &'a BMatching,
    matched_copy: std::collections::HashMap<(usize, usize), CopyVertex>,
    max_edges: usize,
    used_copies: HashSet<CopyVertex>,
    used_edges: HashSet<usize>,
    cur_copies: Vec<CopyVertex>,
    steps: Vec<WalkStep>,
}

impl CertSearch<'_> {
    fn taken(&self, c: &CopyVertex) -> bool {
        self.used_copies.contains(c) || self.cur_copies.contains(c)
    }

    fn edge_taken(&self, e: usize) -> bool {
        self.used_edges.contains(&e) || self.steps.iter().any(|s| s.edge == e)
    }

    /// At `x` holding a copy, leave through an unmatched edge.
    fn from_vertex(&mut self, x: usize) -> Option<CopyVertex> {
        if self.steps.len() + 1 > self.max_edges {
            return None;
        }
        for &e in self.g.incident(x) {
            let e = e as usize;
            if self.m.contains(e) || self.edge_taken(e) {
                continue;
            }
            let y = self.g.other(e, x);
            self.steps.push(WalkStep { edge: e, from: x, to: y, matched: false });
            if let Some(end) = self.arrive(y) {
                return Some(end);
            }
            self.steps.pop();
        }
        None
    }

    /// Entered `y` through an unmatched edge: end at a free copy or continue
    /// along a matched edge.
    fn arrive(&mut self, y: usize) -> Option<CopyVertex> {
        if let Some(c) = (self.m.degree(y) + 1..=self.b.get(y)).map(|i| CopyVertex::new(y, i)).find(|c| !self.taken(c)) {
            return Some(c);
        }
        if self.steps.len() + 2 > self.max_edges {
            return None;
        }
        for &e in self.g.incident(y) {
            let e = e as usize;
            if !self.m.contains(e) || self.edge_taken(e) {
                continue;
            }
            let z = self.g.other(e, y);
            let (cy, cz) = (self.matched_copy[&(e, y)], self.matched_copy[&(e, z)]);
            if self.taken(&cy) || self.taken(&cz) {
                continue;
            }
            self.cur_copies.push(cy);
            self.cur_copies.push(cz);
            self.steps.push(WalkStep { edge: e, from: y, to: z, matched: true });
            if let Some(end) = self.from_vertex(z) {
                return Some(end);
            }
            self.steps.pop();
            self.cur_copies.truncate(self.cur_copies.len() - 2);
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{self, fixture, Fixture};
    use crate::mpc::MpcConfig;
    use crate::oracle::exact_max_bmatching;
    use proptest::prelude::*;

    fn cluster(g: &Graph, seed: u64) -> MachineCluster {
        MachineCluster::for_graph(MpcConfig::with_seed(seed), g)
    }

    #[test]
    fn k_from_eps() {
        assert_eq!(k_for_eps(0.5), 4);
        assert_eq!(k_for_eps(2.0), 1);
        assert_eq!(k_for_eps(5.0), 1);
        assert_eq!(k_for_eps(0.3), 7);
    }

    #[test]
    fn large_eps_still_valid() {
        let g = gen::gnp(20, 0.3, None, 2).unwrap();
        let b = gen::uniform_budgets(20, 2, 2).unwrap();
        let p = UnweightedParams { eps: 2.0, ..Default::default() };
        let out = unweighted_one_plus_eps(&g, &b, &mut cluster(&g, 2), &p).unwrap();
        assert_eq!(out.k, 1);
        assert!(out.matching.is_valid_for(&g, &b));
    }

    #[test]
    fn f3_reaches_the_maximum() {
        let g = fixture(Fixture::F3);
        let b = BudgetVector::constant(4, 1);
        let hits = (0..100)
            .filter(|&s| unweighted_one_plus_eps(&g, &b, &mut cluster(&g, s), &Default::default()).unwrap().size == 2)
            .count();
        assert!(hits >= 99, "{hits}");
    }

    #[test]
    fn certificate_examples() {
        let g = fixture(Fixture::F3);
        let b = BudgetVector::constant(4, 1);
        let opt = BMatching::from_edges(&g, &b, [0, 2]).unwrap();
        for k in 1..5 {
            let c = approximation_certificate(&g, &b, &opt, k);
            assert!(c.paths.is_empty() && c.certified);
        }
        let mid = BMatching::from_edges(&g, &b, [1]).unwrap();
        let c = approximation_certificate(&g, &b, &mid, 2);
        assert_eq!(c.paths.len(), 1);
        assert_eq!(c.paths[0].len(), 3);
        assert!(!c.certified);
        assert!(approximation_certificate(&g, &b, &mid, 1).paths.is_empty());
    }

    #[test]
    fn history_is_monotone() {
        let g = gen::gnp(40, 0.15, None, 5).unwrap();
        let b = gen::uniform_budgets(40, 3, 5).unwrap();
        let out = unweighted_one_plus_eps(&g, &b, &mut cluster(&g, 5), &Default::default()).unwrap();
        assert!(out.size_history.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*out.size_history.last().unwrap(), out.size);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn certificate_never_contradicts_the_oracle(seed in any::<u64>(), n in 3usize..10, drop in 0usize..4) {
            let g = gen::gnp(n, 0.4, None, seed).unwrap();
            prop_assume!(g.m() <= 20);
            let b = gen::uniform_budgets(n, 2, seed).unwrap();
            let opt = exact_max_bmatching(&g, &b, false).unwrap();
            let kept: Vec<usize> = opt.witness.iter().skip(drop).collect();
            let m = BMatching::from_edges(&g, &b, kept).unwrap();
            for k in 1..5 {
                let c = approximation_certificate(&g, &b, &m, k);
                for w in &c.paths {
                    prop_assert!(w.len() <= k + 1 && w.len() % 2 == 1);
                    w.check_against(&g, &m).unwrap();
                }
                prop_assert!(apply_walks(&m, &c.paths, &g, &b).is_ok());
                if c.certified {
                    // OPT <= (1 + 2/k) |M|
                    let opt_size = opt.witness.len();
                    prop_assert!(opt_size * k <= (k + 2) * m.len());
                }
            }
        }
    }
}
