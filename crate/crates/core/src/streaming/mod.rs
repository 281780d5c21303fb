//! Semi-streaming version of the unweighted engine.
//!
//! Only the matching, the vertex copies and the partial walks are kept in
//! memory. Every layer extension is one pass over the stream with a greedy
//! between-layer matching; the layer label and orientation of an edge are
//! recomputed on each pass from a k-wise independent hash of its endpoints.

mod hash;
mod stream;

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use serde::Serialize;

pub use hash::{is_prime, smallest_prime_above, KWiseHash};
pub use stream::{EdgeStream, FileStream, VecStream};

use crate::error::{Error, Result};
use crate::graph::{BMatching, BudgetVector, CopyVertex, Graph};
use crate::lp::ceil_log2;
use crate::rng;
use crate::unweighted::{
    advance_paths, grow_with, k_for_eps, ExtendReport, GrowParams, MatchedArc, PhaseTrace, Side, UnmatchedArc,
    UnweightedLayeredGraph,
};

const TAG_COPY: u64 = 0x636f_7079;
const TAG_HASH: u64 = 0x6861_7368;
const TAG_SIDE: u64 = 0x7369_6465;
const TAG_GROW: u64 = 0x6772_6f77;

/// Resident-word accounting with a hard budget.
#[derive(Clone, Debug, Serialize)]
pub struct MemoryMeter {
    pub current: usize,
    pub peak: usize,
    pub budget: usize,
}

impl MemoryMeter {
    pub fn new(budget: usize) -> Self {
        MemoryMeter { current: 0, peak: 0, budget }
    }

    pub fn charge(&mut self, words: usize) -> Result<()> {
        self.current += words;
        self.peak = self.peak.max(self.current);
        if self.current > self.budget {
            return Err(Error::MemoryViolation { peak: self.peak, budget: self.budget });
        }
        Ok(())
    }

    pub fn release(&mut self, words: usize) {
        self.current = self.current.saturating_sub(words);
    }
}

/// `c * (sum_v b_v + ceil(1/eps)^4) * ceil(log2 n)`.
pub fn memory_budget(c: f64, b_total: u64, eps: f64, n: usize) -> usize {
    let poly = (1.0 / eps).ceil().powi(4);
    (c * (b_total as f64 + poly) * ceil_log2(n).max(1) as f64).ceil() as usize
}

/// `t = multiplier * (ceil(log2 n) + ceil(log2 ceil(1/eps))) * k`, at least 1.
pub fn independence_degree(multiplier: usize, n: usize, eps: f64, k: usize) -> usize {
    let inv = (1.0 / eps).ceil().max(1.0) as usize;
    (multiplier * (ceil_log2(n) + ceil_log2(inv)) * k).max(1)
}

/// Packs an edge into a single hash point.
#[inline]
pub fn edge_key(u: usize, v: usize, n: usize) -> u64 {
    let (a, c) = if u < v { (u, v) } else { (v, u) };
    a as u64 * n as u64 + c as u64
}

#[inline]
pub fn unpack_key(key: u64, n: usize) -> (usize, usize) {
    ((key / n as u64) as usize, (key % n as u64) as usize)
}

/// Per-edge layering randomness, all derived from one hash value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EdgeRandomness {
    /// Label in `0..=k` used when the edge is unmatched.
    pub label: usize,
    /// Unmatched orientation: `true` = smaller endpoint to larger.
    pub forward: bool,
    /// Layer in `1..=k` used when the edge is matched (0 when `k = 0`).
    pub layer: usize,
    /// Matched direction: `true` = enter at the smaller endpoint.
    pub tail_at_smaller: bool,
}

pub fn edge_randomness(u: usize, v: usize, n: usize, hash: &KWiseHash, k: usize) -> Result<EdgeRandomness> {
    let h = hash.eval(edge_key(u, v, n))?;
    let k1 = k as u64 + 1;
    let (layer, tail_at_smaller) = if k == 0 { (0, true) } else { (1 + (h % k as u64) as usize, (h / k as u64) & 1 == 0) };
    Ok(EdgeRandomness { label: (h % k1) as usize, forward: (h / k1) & 1 == 0, layer, tail_at_smaller })
}

/// One pass: takes each edge that `arc_of` maps to an arc iff both sides
/// still have capacity. The result is maximal with respect to the caps.
pub fn greedy_between_layer_matching(
    stream: &mut dyn EdgeStream,
    arc_of: &mut dyn FnMut(usize, usize) -> Result<Option<UnmatchedArc>>,
    left: &mut HashMap<usize, u32>,
    right: &mut HashMap<usize, u32>,
    meter: &mut MemoryMeter,
) -> Result<Vec<UnmatchedArc>> {
    let caps_words = 2 * (left.len() + right.len());
    meter.charge(caps_words)?;
    let mut out = Vec::new();
    let mut failure = None;
    stream.pass(&mut |u, v, _| {
        if failure.is_some() {
            return;
        }
        let arc = match arc_of(u, v) {
            Ok(Some(a)) => a,
            Ok(None) => return,
            Err(e) => {
                failure = Some(e);
                return;
            }
        };
        let (Some(&l), Some(&r)) = (left.get(&arc.from), right.get(&arc.to)) else { return };
        if l > 0 && r > 0 {
            if let Err(e) = meter.charge(4) {
                failure = Some(e);
                return;
            }
            *left.get_mut(&arc.from).unwrap() -= 1;
            *right.get_mut(&arc.to).unwrap() -= 1;
            out.push(arc);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    meter.release(caps_words + 4 * out.len());
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct StreamingParams {
    pub eps: f64,
    pub k_override: Option<usize>,
    pub phase_budget: usize,
    pub stall_limit: usize,
    /// Independent copies; `None` = `ceil(log2 n)`.
    pub repetitions: Option<usize>,
    /// Constant in front of the independence degree.
    pub hash_multiplier: usize,
    /// Constant `c` of the memory budget.
    pub memory_constant: f64,
    pub grow: GrowParams,
}

impl Default for StreamingParams {
    fn default() -> Self {
        StreamingParams {
            eps: 0.5,
            k_override: None,
            phase_budget: 256,
            stall_limit: 256,
            repetitions: None,
            hash_multiplier: 2,
            memory_constant: 3.0,
            grow: GrowParams::default(),
        }
    }
}

impl StreamingParams {
    pub fn k(&self) -> usize {
        self.k_override.unwrap_or_else(|| k_for_eps(self.eps))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CopyRun {
    pub edges: Vec<(usize, usize)>,
    pub passes: usize,
    pub invocations: usize,
    pub peak_words: usize,
    pub size_history: Vec<usize>,
    pub phases: Vec<PhaseTrace>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StreamingOutcome {
    pub edges: Vec<(usize, usize)>,
    pub size: usize,
    pub k: usize,
    pub t: usize,
    pub prime: u64,
    /// Passes when the copies share passes, the largest per-copy count.
    pub passes: usize,
    pub passes_per_copy: Vec<usize>,
    pub invocations_per_copy: Vec<usize>,
    pub peak_words: usize,
    pub budget: usize,
    pub best_copy: usize,
    pub copy_sizes: Vec<usize>,
    pub size_history: Vec<usize>,
}

impl StreamingOutcome {
    pub fn to_bmatching(&self, g: &Graph, b: &BudgetVector) -> Result<BMatching> {
        let ids: Option<Vec<usize>> = self.edges.iter().map(|&(u, v)| g.edge_id(u, v)).collect();
        let ids = ids.ok_or_else(|| Error::InvalidMatching("edge not in graph".into()))?;
        BMatching::from_edges(g, b, ids)
    }
}

struct Resident {
    n: usize,
    matched: BTreeSet<u64>,
    deg: Vec<u32>,
}

impl Resident {
    fn words(&self) -> usize {
        self.n + 2 * self.matched.len()
    }
}

pub fn streaming_unweighted(
    stream: &mut dyn EdgeStream,
    b: &BudgetVector,
    params: &StreamingParams,
    seed: u64,
) -> Result<StreamingOutcome> {
    let n = stream.n();
    if b.len() != n {
        return Err(Error::Dimension { expected: n, found: b.len() });
    }
    let k = params.k();
    let t = independence_degree(params.hash_multiplier, n, params.eps, k);
    let budget = memory_budget(params.memory_constant, b.total(), params.eps, n);
    let copies = params.repetitions.unwrap_or_else(|| ceil_log2(n).max(1)).max(1);
    let mut runs = Vec::with_capacity(copies);
    let mut prime = 0;
    for c in 0..copies {
        let (run, p) = run_copy(stream, b, params, k, t, budget, rng::derive(seed, &[TAG_COPY, c as u64]))?;
        prime = p;
        runs.push(run);
    }
    let best = (0..copies).fold(0, |best, c| if runs[c].edges.len() > runs[best].edges.len() { c } else { best });
    Ok(StreamingOutcome {
        size: runs[best].edges.len(),
        edges: runs[best].edges.clone(),
        k,
        t,
        prime,
        passes: runs.iter().map(|r| r.passes).max().unwrap_or(0),
        passes_per_copy: runs.iter().map(|r| r.passes).collect(),
        invocations_per_copy: runs.iter().map(|r| r.invocations).collect(),
        peak_words: runs.iter().map(|r| r.peak_words).max().unwrap_or(0),
        budget,
        best_copy: best,
        copy_sizes: runs.iter().map(|r| r.edges.len()).collect(),
        size_history: runs[best].size_history.clone(),
    })
}

/// One independent copy. Returns the run and the hash field's prime.
fn run_copy(
    stream: &mut dyn EdgeStream,
    b: &BudgetVector,
    params: &StreamingParams,
    k: usize,
    t: usize,
    budget: usize,
    seed: u64,
) -> Result<(CopyRun, u64)> {
    let n = stream.n();
    let mut meter = MemoryMeter::new(budget);
    let mut passes = 0usize;
    let mut res = Resident { n, matched: BTreeSet::new(), deg: vec![0; n] };
    meter.charge(res.words())?;

    // Greedy maximal start; also counts the edges.
    let mut m_edges = 0u64;
    let mut overflow = None;
    stream.pass(&mut |u, v, _| {
        m_edges += 1;
        if overflow.is_some() || res.deg[u] >= b.get(u) || res.deg[v] >= b.get(v) {
            return;
        }
        res.deg[u] += 1;
        res.deg[v] += 1;
        res.matched.insert(edge_key(u, v, n));
        if let Err(e) = meter.charge(2) {
            overflow = Some(e);
        }
    })?;
    passes += 1;
    if let Some(e) = overflow {
        return Err(e);
    }
    let domain = (t as u64 * m_edges).max((n as u64 * n as u64).max(1));
    let mut prime = smallest_prime_above(domain);
    let mut history = vec![res.matched.len()];
    let mut phases = Vec::new();
    let mut invocations = 0;
    let mut stall = 0;

    for phase in 0..params.phase_budget {
        let before = res.matched.len();
        let mut trace = PhaseTrace { phase, ..Default::default() };
        for kp in 0..=k {
            let hash = KWiseHash::new(t, domain, rng::derive(seed, &[TAG_HASH, phase as u64, kp as u64]));
            prime = hash.prime;
            meter.charge(hash.words())?;
            let layered = resident_layering(&res, b, kp, &hash, rng::derive(seed, &[TAG_SIDE, phase as u64, kp as u64]))?;
            let lw = layered.resident_words();
            meter.charge(lw)?;

            let mut step = |set: &mut crate::unweighted::PartialPathSet, i: usize, _s: u64| -> Result<ExtendReport> {
                let live = set.live_at(i);
                let sw = set.words();
                meter.charge(sw)?;
                let mut left: HashMap<usize, u32> = HashMap::new();
                for &p in &live {
                    *left.entry(set.paths[p].end().base as usize).or_default() += 1;
                }
                let mut right: HashMap<usize, u32> = HashMap::new();
                for w in layered.tail_bases(i + 1) {
                    let c = layered.tail_copies(i + 1, w).iter().filter(|c| !set.used.contains(c)).count() as u32;
                    if c > 0 {
                        right.insert(w, c);
                    }
                }
                let matched = &res.matched;
                let mut arc_of = |u: usize, v: usize| -> Result<Option<UnmatchedArc>> {
                    let key = edge_key(u, v, n);
                    if matched.contains(&key) {
                        return Ok(None);
                    }
                    let r = edge_randomness(u, v, n, &hash, kp)?;
                    if r.label != i {
                        return Ok(None);
                    }
                    let (lo, hi) = if u < v { (u, v) } else { (v, u) };
                    let (from, to) = if r.forward { (lo, hi) } else { (hi, lo) };
                    Ok(Some(UnmatchedArc { edge: key as usize, label: i, from, to }))
                };
                let chosen = greedy_between_layer_matching(stream, &mut arc_of, &mut left, &mut right, &mut meter)?;
                passes += 1;
                let extended = advance_paths(&layered, set, i, &chosen);
                meter.release(sw);
                Ok(ExtendReport { attempted: live.len(), extended })
            };
            let grown = grow_with(&layered, &params.grow, rng::derive(seed, &[TAG_GROW, phase as u64, kp as u64]), &mut step)?;
            invocations += grown.invocations;
            trace.invocations += grown.invocations;
            trace.backtracks += grown.backtracks;
            trace.walks_per_length.push(grown.walks.len());
            meter.release(lw + hash.words());

            if !grown.walks.is_empty() {
                for w in &grown.walks {
                    for s in &w.steps {
                        let key = s.edge as u64;
                        let (u, v) = unpack_key(key, n);
                        if s.matched {
                            res.matched.remove(&key);
                            res.deg[u] -= 1;
                            res.deg[v] -= 1;
                            meter.release(2);
                        } else {
                            res.matched.insert(key);
                            res.deg[u] += 1;
                            res.deg[v] += 1;
                            meter.charge(2)?;
                        }
                    }
                }
                if let Some(v) = (0..n).find(|&v| res.deg[v] > b.get(v)) {
                    return Err(Error::InvalidAugmentation(format!("vertex {v} exceeds its budget")));
                }
                history.push(res.matched.len());
            }
        }
        trace.size_after = res.matched.len();
        phases.push(trace);
        if res.matched.len() == before {
            stall += 1;
            if stall >= params.stall_limit {
                break;
            }
        } else {
            stall = 0;
        }
    }
    let edges = res.matched.iter().map(|&key| unpack_key(key, n)).collect();
    Ok((CopyRun { edges, passes, invocations, peak_words: meter.peak, size_history: history, phases }, prime))
}

/// Copies, matched arcs and free sides held in memory for one layering.
fn resident_layering(res: &Resident, b: &BudgetVector, k: usize, hash: &KWiseHash, side_seed: u64) -> Result<UnweightedLayeredGraph> {
    let n = res.n;
    let mut next = vec![0u32; n];
    let mut matched = Vec::new();
    for &key in &res.matched {
        let (u, v) = unpack_key(key, n);
        next[u] += 1;
        next[v] += 1;
        if k == 0 {
            continue;
        }
        let (cu, cv) = (CopyVertex::new(u, next[u]), CopyVertex::new(v, next[v]));
        let r = edge_randomness(u, v, n, hash, k)?;
        let (tail, head) = if r.tail_at_smaller { (cu, cv) } else { (cv, cu) };
        matched.push(MatchedArc { edge: key as usize, layer: r.layer, tail, head });
    }
    let mut sides = rng::stream(side_seed, &[]);
    let mut free = Vec::new();
    for v in 0..n {
        for idx in res.deg[v] + 1..=b.get(v) {
            let s = if sides.gen::<bool>() { Side::First } else { Side::Last };
            free.push((CopyVertex::new(v, idx), s));
        }
    }
    Ok(UnweightedLayeredGraph::from_parts(k, free, matched, vec![]))
}
