use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::Serialize;

use super::assignment::MatchedCopyAssignment;
use crate::graph::{BMatching, BudgetVector, CopyVertex, Graph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    /// Layer `L_0`; the copy acts as a head.
    First,
    /// Layer `L_{k+1}`; the copy acts as a tail.
    Last,
}

/// A matched edge placed in layer `layer`, entered at `tail` and left at `head`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MatchedArc {
    pub edge: usize,
    pub layer: usize,
    pub tail: CopyVertex,
    pub head: CopyVertex,
}

/// An unmatched edge oriented `from -> to`, usable only between `H_label`
/// and `T_{label+1}`. Endpoints are base vertices: copies are bound later.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct UnmatchedArc {
    pub edge: usize,
    pub label: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct UnweightedLayeredGraph {
    pub k: usize,
    pub free: Vec<(CopyVertex, Side)>,
    pub matched: Vec<MatchedArc>,
    pub unmatched: Vec<UnmatchedArc>,
    /// `tails[j]`: base vertex to the copies in `T_j`, for `j` in `1..=k+1`.
    #[serde(skip)]
    tails: Vec<BTreeMap<usize, Vec<CopyVertex>>>,
    #[serde(skip)]
    arc_of_tail: HashMap<CopyVertex, usize>,
    #[serde(skip)]
    by_label: Vec<Vec<usize>>,
}

impl UnweightedLayeredGraph {
    pub fn from_parts(k: usize, free: Vec<(CopyVertex, Side)>, matched: Vec<MatchedArc>, unmatched: Vec<UnmatchedArc>) -> Self {
        let mut tails = vec![BTreeMap::<usize, Vec<CopyVertex>>::new(); k + 2];
        let mut arc_of_tail = HashMap::new();
        for (i, a) in matched.iter().enumerate() {
            tails[a.layer].entry(a.tail.base as usize).or_default().push(a.tail);
            arc_of_tail.insert(a.tail, i);
        }
        for &(c, s) in &free {
            if s == Side::Last {
                tails[k + 1].entry(c.base as usize).or_default().push(c);
            }
        }
        for t in &mut tails {
            for list in t.values_mut() {
                list.sort();
            }
        }
        let mut by_label = vec![Vec::new(); k + 1];
        for (i, a) in unmatched.iter().enumerate() {
            by_label[a.label].push(i);
        }
        UnweightedLayeredGraph { k, free, matched, unmatched, tails, arc_of_tail, by_label }
    }

    /// Resident words of the free copies, matched arcs and tail index.
    pub fn resident_words(&self) -> usize {
        3 * self.free.len() + 7 * self.matched.len() + 2 * self.tails.iter().map(|t| t.values().map(Vec::len).sum::<usize>()).sum::<usize>() + 4 * self.unmatched.len()
    }

    /// Copies in `H_0`, the start points of augmenting walks.
    pub fn starts(&self) -> Vec<CopyVertex> {
        self.free.iter().filter(|(_, s)| *s == Side::First).map(|(c, _)| *c).collect()
    }

    /// Copies of `w` in `T_j`, in increasing index order.
    pub fn tail_copies(&self, j: usize, w: usize) -> &[CopyVertex] {
        self.tails.get(j).and_then(|t| t.get(&w)).map_or(&[], |v| v.as_slice())
    }

    /// Base vertices with at least one copy in `T_j`.
    pub fn tail_bases(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.tails.get(j).into_iter().flat_map(|t| t.keys().copied())
    }

    /// `b'_{w, T_j}`.
    pub fn tail_multiplicity(&self, j: usize, w: usize) -> usize {
        self.tail_copies(j, w).len()
    }

    /// `b'_{w, H_j}`.
    pub fn head_multiplicity(&self, j: usize, w: usize) -> usize {
        if j == 0 {
            self.free.iter().filter(|(c, s)| *s == Side::First && c.base as usize == w).count()
        } else {
            self.matched.iter().filter(|a| a.layer == j && a.head.base as usize == w).count()
        }
    }

    /// The matched arc entered at tail copy `c`, if `c` is not a free copy.
    pub fn arc_entered_at(&self, c: CopyVertex) -> Option<&MatchedArc> {
        self.arc_of_tail.get(&c).map(|&i| &self.matched[i])
    }

    /// Unmatched arcs from `H_i` to `T_{i+1}`.
    pub fn arcs_with_label(&self, i: usize) -> impl Iterator<Item = &UnmatchedArc> {
        self.by_label.get(i).into_iter().flatten().map(move |&a| &self.unmatched[a])
    }
}

/// Random layering with `k` matched layers.
///
/// Free copies (the `b_v - deg_M(v)` unmatched copies of every vertex) pick
/// a side independently. Each matched edge picks a layer in `1..=k` and a
/// direction; each unmatched edge a label in `0..=k` and a direction.
pub fn build_layered_unweighted<R: Rng>(
    g: &Graph,
    b: &BudgetVector,
    m: &BMatching,
    assignment: &MatchedCopyAssignment,
    k: usize,
    rng: &mut R,
) -> UnweightedLayeredGraph {
    let mut free = Vec::new();
    for v in 0..g.n() {
        for idx in m.degree(v) + 1..=b.get(v) {
            let side = if rng.gen::<bool>() { Side::First } else { Side::Last };
            free.push((CopyVertex::new(v, idx), side));
        }
    }
    let mut matched = Vec::with_capacity(assignment.len());
    for (&e, &(a, c)) in &assignment.copies {
        // With k = 0 no matched layer exists; matched edges are left out.
        if k == 0 {
            continue;
        }
        let layer = rng.gen_range(1..=k);
        let (tail, head) = if rng.gen::<bool>() { (a, c) } else { (c, a) };
        matched.push(MatchedArc { edge: e, layer, tail, head });
    }
    let mut unmatched = Vec::with_capacity(g.m() - m.len());
    for e in 0..g.m() {
        if m.contains(e) {
            continue;
        }
        let (u, v) = g.endpoints(e);
        let label = rng.gen_range(0..=k);
        let (from, to) = if rng.gen::<bool>() { (u, v) } else { (v, u) };
        unmatched.push(UnmatchedArc { edge: e, label, from, to });
    }

    UnweightedLayeredGraph::from_parts(k, free, matched, unmatched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{self, fixture, Fixture};
    use crate::mpc::{MachineCluster, MpcConfig};
    use crate::rng;
    use crate::unweighted::distribute_matched_edges;

    fn setup(g: &Graph, b: &BudgetVector, m: &BMatching, k: usize, seed: u64) -> UnweightedLayeredGraph {
        let mut c = MachineCluster::for_graph(MpcConfig::default(), g);
        let a = distribute_matched_edges(g, b, m, &mut c).unwrap();
        build_layered_unweighted(g, b, m, &a, k, &mut rng::stream(seed, &[]))
    }

    /// Does a-b-c-d survive as an augmentation in either direction?
    fn f3_survives(l: &UnweightedLayeredGraph) -> bool {
        let arc = l.matched[0];
        let side = |v: usize| l.free.iter().find(|(c, _)| c.base as usize == v).unwrap().1;
        let label = |e: usize| *l.unmatched.iter().find(|a| a.edge == e).unwrap();
        let (ab, cd) = (label(0), label(2));
        let forward = side(0) == Side::First
            && side(3) == Side::Last
            && arc.tail.base == 1
            && (ab.label, ab.from) == (0, 0)
            && (cd.label, cd.from) == (1, 2);
        let backward = side(3) == Side::First
            && side(0) == Side::Last
            && arc.tail.base == 2
            && (cd.label, cd.from) == (0, 3)
            && (ab.label, ab.from) == (1, 1);
        forward || backward
    }

    #[test]
    fn degenerate_k_has_two_free_layers() {
        let g = gen::path(5);
        let b = BudgetVector::constant(5, 1);
        let l = setup(&g, &b, &BMatching::empty(5), 0, 3);
        assert!(l.matched.is_empty());
        assert_eq!(l.free.len(), 5);
        assert!(l.unmatched.iter().all(|a| a.label == 0));
    }

    #[test]
    fn layered_invariants_hold() {
        let g = gen::gnp(40, 0.2, None, 8).unwrap();
        let b = gen::uniform_budgets(40, 3, 8).unwrap();
        let c = crate::mpc::MachineCluster::for_graph(MpcConfig::default(), &g);
        let mut c2 = c.clone();
        let m = crate::lp::constant_approx_bmatching(&g, &b, &mut c2, &Default::default()).unwrap().matching;
        let l = setup(&g, &b, &m, 3, 1);
        assert_eq!(l.matched.len(), m.len());
        let free_total: usize = (0..g.n()).map(|v| (b.get(v) - m.degree(v)) as usize).sum();
        assert_eq!(l.free.len(), free_total);
        for a in &l.matched {
            assert!((1..=3).contains(&a.layer));
            assert_ne!(a.tail, a.head);
            assert_eq!(l.arc_entered_at(a.tail).unwrap().edge, a.edge);
        }
        assert!(l.unmatched.iter().all(|a| a.label <= 3 && g.edge_id(a.from, a.to) == Some(a.edge)));
        assert_eq!(l.unmatched.len(), g.m() - m.len());
    }

    #[test]
    fn same_seed_same_layering() {
        let g = fixture(Fixture::F3);
        let b = BudgetVector::constant(4, 1);
        let m = BMatching::from_edges(&g, &b, [1]).unwrap();
        let a = setup(&g, &b, &m, 1, 9);
        let c = setup(&g, &b, &m, 1, 9);
        assert_eq!(a.matched, c.matched);
        assert_eq!(a.unmatched, c.unmatched);
        assert_eq!(a.free, c.free);
    }

    #[test]
    fn f3_survival_frequency_matches_exact_value() {
        // 2 sides x 2 sides x 2 directions x 4 x 4 label/direction pairs = 128
        // equally likely outcomes, of which exactly 2 keep the walk: 1/64.
        let g = fixture(Fixture::F3);
        let b = BudgetVector::constant(4, 1);
        let m = BMatching::from_edges(&g, &b, [1]).unwrap();
        let trials = 20_000;
        let hits = (0..trials).filter(|&s| f3_survives(&setup(&g, &b, &m, 1, s))).count();
        let p = 1.0 / 64.0;
        let sd = (p * (1.0 - p) * trials as f64).sqrt();
        assert!((hits as f64 - p * trials as f64).abs() <= 3.0 * sd, "hits {hits}");
    }
}
