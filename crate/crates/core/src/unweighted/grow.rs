use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use super::layered::{UnmatchedArc, UnweightedLayeredGraph};
use crate::error::Result;
use crate::graph::{AlternatingWalk, BudgetVector, CopyVertex, Graph, WalkStep};
use crate::lp::{constant_approx_bmatching, LpParams};
use crate::mpc::MachineCluster;
use crate::rng;

const TAG_EXTEND: u64 = 0x6578_7465;

/// Computes an approximate b'-matching of a small bipartite graph; returns
/// the chosen edge ids.
pub trait LayerExtender {
    fn extend(&mut self, bip: &Graph, caps: &BudgetVector, cluster: &mut MachineCluster, seed: u64) -> Result<Vec<usize>>;
}

/// Constant-factor b'-matching from the tight-LP pipeline.
#[derive(Clone, Debug)]
pub struct MpcExtender {
    pub params: LpParams,
}

impl Default for MpcExtender {
    fn default() -> Self {
        MpcExtender { params: LpParams { repetitions: Some(4), ..Default::default() } }
    }
}

impl LayerExtender for MpcExtender {
    fn extend(&mut self, bip: &Graph, caps: &BudgetVector, cluster: &mut MachineCluster, seed: u64) -> Result<Vec<usize>> {
        let mut child = cluster.child(&[TAG_EXTEND, seed], bip.n(), bip.words());
        let res = constant_approx_bmatching(bip, caps, &mut child, &self.params);
        cluster.absorb(child.take_log());
        Ok(res?.matching.edge_ids())
    }
}

/// Maximal b'-matching taking edges in id order.
#[derive(Clone, Copy, Debug, Default)]
pub struct GreedyExtender;

impl LayerExtender for GreedyExtender {
    fn extend(&mut self, bip: &Graph, caps: &BudgetVector, _cluster: &mut MachineCluster, _seed: u64) -> Result<Vec<usize>> {
        Ok(greedy_bmatching(bip, caps.as_slice()))
    }
}

pub fn greedy_bmatching(g: &Graph, caps: &[u32]) -> Vec<usize> {
    let mut left = caps.to_vec();
    let mut out = Vec::new();
    for e in 0..g.m() {
        let (u, v) = g.endpoints(e);
        if left[u] > 0 && left[v] > 0 {
            left[u] -= 1;
            left[v] -= 1;
            out.push(e);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartialPath {
    pub id: usize,
    /// Index `i` of the layer `H_i` holding the current endpoint; `k + 1`
    /// once complete.
    pub layer: usize,
    pub start: CopyVertex,
    /// Endpoint copy after each layer, `ends[0] == start`.
    pub ends: Vec<CopyVertex>,
    pub steps: Vec<WalkStep>,
    pub alive: bool,
}

impl PartialPath {
    pub fn end(&self) -> CopyVertex {
        *self.ends.last().unwrap()
    }
}

/// Copy-disjoint partial walks and the copies they hold.
#[derive(Clone, Debug, Default, Serialize)]
pub struct PartialPathSet {
    pub paths: Vec<PartialPath>,
    /// Copies that are on a live path or were retired by backtracking.
    #[serde(skip)]
    pub used: HashSet<CopyVertex>,
}

impl PartialPathSet {
    /// One single-vertex path per copy of `H_0`.
    pub fn start(layered: &UnweightedLayeredGraph) -> Self {
        let starts = layered.starts();
        let used = starts.iter().copied().collect();
        let paths = starts
            .into_iter()
            .enumerate()
            .map(|(id, c)| PartialPath { id, layer: 0, start: c, ends: vec![c], steps: vec![], alive: true })
            .collect();
        PartialPathSet { paths, used }
    }

    pub fn live_at(&self, layer: usize) -> Vec<usize> {
        (0..self.paths.len()).filter(|&i| self.paths[i].alive && self.paths[i].layer == layer).collect()
    }

    /// Resident words: four per path plus four per step plus the used set.
    pub fn words(&self) -> usize {
        self.paths.iter().map(|p| 4 + 4 * p.steps.len() + 2 * p.ends.len()).sum::<usize>() + 2 * self.used.len()
    }

    pub fn complete(&self, k: usize) -> impl Iterator<Item = &PartialPath> {
        self.paths.iter().filter(move |p| p.alive && p.layer == k + 1)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ExtendReport {
    pub attempted: usize,
    pub extended: usize,
}

/// Tries to push every live path ending in `H_i` one layer further.
///
/// The between-layer graph joins compressed endpoints in `H_i` (multiplicity
/// = number of paths ending there) to compressed unused copies of `T_{i+1}`
/// through the unmatched arcs labelled `i`.
pub fn extend_layer(
    layered: &UnweightedLayeredGraph,
    set: &mut PartialPathSet,
    i: usize,
    extender: &mut dyn LayerExtender,
    cluster: &mut MachineCluster,
    seed: u64,
) -> Result<ExtendReport> {
    let ids = set.live_at(i);
    let mut report = ExtendReport { attempted: ids.len(), extended: 0 };
    if ids.is_empty() {
        return Ok(report);
    }
    let mut waiting: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &p in &ids {
        waiting.entry(set.paths[p].end().base as usize).or_default().push(p);
    }
    let free_tails = |y: usize, set: &PartialPathSet| -> Vec<CopyVertex> {
        layered.tail_copies(i + 1, y).iter().copied().filter(|c| !set.used.contains(c)).collect()
    };

    let mut left: BTreeMap<usize, usize> = BTreeMap::new();
    let mut right: BTreeMap<usize, usize> = BTreeMap::new();
    let mut caps: Vec<u32> = Vec::new();
    let mut pairs = Vec::new();
    let mut arcs = Vec::new();
    for arc in layered.arcs_with_label(i) {
        let Some(paths) = waiting.get(&arc.from) else { continue };
        let avail = free_tails(arc.to, set).len();
        if avail == 0 {
            continue;
        }
        let l = *left.entry(arc.from).or_insert_with(|| {
            caps.push(paths.len() as u32);
            caps.len() - 1
        });
        let r = *right.entry(arc.to).or_insert_with(|| {
            caps.push(avail as u32);
            caps.len() - 1
        });
        pairs.push((l, r));
        arcs.push(*arc);
    }
    if pairs.is_empty() {
        return Ok(report);
    }
    let bip = Graph::new(caps.len(), pairs.iter().copied())?;
    let caps = BudgetVector::new(caps)?;
    // Graph::new sorts edges; map them back to arcs through their endpoints.
    let arc_for: BTreeMap<(usize, usize), usize> =
        pairs.iter().enumerate().map(|(a, &(l, r))| ((l.min(r), l.max(r)), a)).collect();
    let chosen: Vec<UnmatchedArc> =
        extender.extend(&bip, &caps, cluster, seed)?.into_iter().map(|be| arcs[arc_for[&bip.endpoints(be)]]).collect();
    report.extended = advance_paths(layered, set, i, &chosen);
    Ok(report)
}

/// Pushes live paths ending in `H_i` along the chosen arcs. Each arc moves
/// the lowest-numbered waiting path at `arc.from` into the lowest unused
/// copy of `arc.to` in `T_{i+1}`; arcs with nothing left on either side
/// are skipped. Returns the number of paths moved.
pub fn advance_paths(layered: &UnweightedLayeredGraph, set: &mut PartialPathSet, i: usize, chosen: &[UnmatchedArc]) -> usize {
    let mut waiting: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for p in set.live_at(i) {
        waiting.entry(set.paths[p].end().base as usize).or_default().push(p);
    }
    for list in waiting.values_mut() {
        list.reverse();
    }
    let mut moved = 0;
    for arc in chosen {
        let Some(p) = waiting.get_mut(&arc.from).and_then(|v| v.pop()) else { continue };
        let Some(&tail) = layered.tail_copies(i + 1, arc.to).iter().find(|c| !set.used.contains(c)) else {
            waiting.get_mut(&arc.from).unwrap().push(p);
            continue;
        };
        set.used.insert(tail);
        let path = &mut set.paths[p];
        path.steps.push(WalkStep { edge: arc.edge, from: arc.from, to: arc.to, matched: false });
        if i + 1 == layered.k + 1 {
            path.ends.push(tail);
        } else {
            let m = layered.arc_entered_at(tail).expect("inner tail copies belong to matched arcs");
            set.used.insert(m.head);
            path.steps.push(WalkStep { edge: m.edge, from: arc.to, to: m.head.base as usize, matched: true });
            path.ends.push(m.head);
        }
        path.layer = i + 1;
        moved += 1;
    }
    moved
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowParams {
    /// Progress threshold: a layer whose extension rate falls below `delta`
    /// is backtracked.
    pub delta: f64,
    /// Invocation budget is `budget_constant * delta^(-2^k)`, saturating.
    pub budget_constant: f64,
    pub max_invocations: Option<usize>,
}

impl Default for GrowParams {
    fn default() -> Self {
        GrowParams { delta: 0.5, budget_constant: 8.0, max_invocations: None }
    }
}

impl GrowParams {
    pub fn budget(&self, k: usize) -> usize {
        if let Some(b) = self.max_invocations {
            return b;
        }
        let exp = 2f64.powi(k.min(60) as i32);
        let b = self.budget_constant * self.delta.powf(-exp);
        if b.is_finite() && b < usize::MAX as f64 {
            b.ceil() as usize
        } else {
            usize::MAX
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct GrowOutcome {
    pub walks: Vec<AlternatingWalk>,
    pub invocations: usize,
    pub backtracks: usize,
    pub budget_exhausted: bool,
    /// Largest resident size of the path set, in words.
    pub peak_path_words: usize,
}

/// Grows copy-disjoint augmenting walks from `L_0` to `L_{k+1}` with the
/// given extender.
pub fn grow_paths(
    layered: &UnweightedLayeredGraph,
    extender: &mut dyn LayerExtender,
    cluster: &mut MachineCluster,
    params: &GrowParams,
    seed: u64,
) -> Result<GrowOutcome> {
    grow_with(layered, params, seed, &mut |set, i, s| extend_layer(layered, set, i, extender, cluster, s))
}

/// The growth loop around an arbitrary layer-extension step.
///
/// Always extends the deepest layer holding live paths. When fewer than a
/// `delta` fraction of them advance, those that did not are pulled back one
/// layer and their last two copies are retired.
pub fn grow_with(
    layered: &UnweightedLayeredGraph,
    params: &GrowParams,
    seed: u64,
    step: &mut dyn FnMut(&mut PartialPathSet, usize, u64) -> Result<ExtendReport>,
) -> Result<GrowOutcome> {
    let k = layered.k;
    let budget = params.budget(k);
    let mut set = PartialPathSet::start(layered);
    let mut out = GrowOutcome::default();
    loop {
        let Some(i) = (0..=k).rev().find(|&i| !set.live_at(i).is_empty()) else { break };
        if out.invocations >= budget {
            out.budget_exhausted = true;
            break;
        }
        let before = set.live_at(i);
        let rep = step(&mut set, i, rng::derive(seed, &[out.invocations as u64]))?;
        out.invocations += 1;
        if (rep.extended as f64) < params.delta * rep.attempted as f64 {
            out.backtracks += 1;
            for p in before {
                let path = &mut set.paths[p];
                if path.layer != i {
                    continue;
                }
                if i == 0 {
                    path.alive = false;
                } else {
                    // The retired copies stay in `used`.
                    path.ends.pop();
                    path.steps.truncate(path.steps.len() - 2);
                    path.layer -= 1;
                }
            }
        }
        out.peak_path_words = out.peak_path_words.max(set.words());
    }
    for p in set.complete(k) {
        out.walks.push(AlternatingWalk { steps: p.steps.clone(), start: Some(p.start), end: Some(p.end()) });
    }
    Ok(out)
}
