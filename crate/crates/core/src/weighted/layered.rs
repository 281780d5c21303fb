use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use serde::Serialize;

use super::thresholds::{ceil_u64, floor_u64, to_big, ThresholdGrid, ThresholdSequences};
use crate::graph::{BMatching, BudgetVector, CopyIndex, CopyVertex, Graph};
use crate::rng;
use crate::streaming::{edge_key, KWiseHash};
use crate::unweighted::MatchedCopyAssignment;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Part {
    H,
    T,
}

/// An H/T label for every vertex copy.
#[derive(Clone, Debug)]
pub struct CopySides {
    index: CopyIndex,
    parts: Vec<Part>,
}

impl CopySides {
    pub fn from_parts(b: &BudgetVector, parts: Vec<Part>) -> Self {
        let index = CopyIndex::new(b);
        assert_eq!(parts.len(), index.total(), "one part per copy");
        CopySides { index, parts }
    }

    pub fn part(&self, c: CopyVertex) -> Part {
        self.parts[self.index.id(c)]
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

/// Every copy lands in `H` or `T` with probability 1/2, independently.
pub fn bipartite_split<R: Rng>(b: &BudgetVector, rng: &mut R) -> CopySides {
    let total = b.total() as usize;
    let parts = (0..total).map(|_| if rng.gen::<bool>() { Part::H } else { Part::T }).collect();
    CopySides::from_parts(b, parts)
}

/// Answers which way an edge may be traversed from `H` to `T`. Answers are
/// fixed for the lifetime of the source.
pub trait OrientationSource: Sync {
    /// `(tail, head)` for edge `e` with endpoints `u` and `v`.
    fn orient(&self, e: usize, u: usize, v: usize) -> (usize, usize);
}

fn by_bit(forward: bool, u: usize, v: usize) -> (usize, usize) {
    let (a, c) = if u < v { (u, v) } else { (v, u) };
    if forward {
        (a, c)
    } else {
        (c, a)
    }
}

/// One stored bit per edge, derived from a seed and the edge id.
#[derive(Clone, Debug)]
pub struct StoredOrientation {
    forward: Vec<bool>,
}

impl StoredOrientation {
    pub fn random(g: &Graph, seed: u64) -> Self {
        StoredOrientation { forward: (0..g.m()).map(|e| rng::mix2(seed, e as u64, 0x6f72) & 1 == 0).collect() }
    }
}

impl OrientationSource for StoredOrientation {
    fn orient(&self, e: usize, u: usize, v: usize) -> (usize, usize) {
        by_bit(self.forward[e], u, v)
    }
}

/// Orientation read from a k-wise independent hash of the endpoint pair.
#[derive(Clone, Debug)]
pub struct HashOrientation {
    pub hash: KWiseHash,
    pub n: usize,
}

impl OrientationSource for HashOrientation {
    fn orient(&self, _e: usize, u: usize, v: usize) -> (usize, usize) {
        by_bit(self.hash.eval_unchecked(edge_key(u, v, self.n)) & 1 == 0, u, v)
    }
}

/// `(tail, head)` for every unmatched edge.
pub fn orient_unmatched(g: &Graph, m: &BMatching, source: &dyn OrientationSource) -> BTreeMap<usize, (usize, usize)> {
    (0..g.m())
        .filter(|&e| !m.contains(e))
        .map(|e| {
            let (u, v) = g.endpoints(e);
            (e, source.orient(e, u, v))
        })
        .collect()
}

/// `W = (1 + eps^4)^index` together with the threshold values at which
/// each edge weight is admitted.
#[derive(Clone, Debug)]
pub struct WeightClass {
    pub index: usize,
    pub weight: BigRational,
    /// `eps^12 * W`, the weight of one grid step.
    pub scale: BigRational,
    /// Per edge: the admitted grid values, as an inclusive range.
    admitted: Vec<Option<(u64, u64)>>,
}

impl WeightClass {
    /// Edge weight `w` is admitted at grid value `q` iff
    /// `eps^p * q * scale <= w <= (1 + eps^p) * q * scale`.
    pub fn new(g: &Graph, grid: &ThresholdGrid, index: usize, window_power: u32) -> Self {
        let growth = BigRational::one() + grid.eps.pow(4);
        let weight = growth.pow(index as i32);
        let scale = &grid.unit * &weight;
        let lo_factor = grid.eps.pow(window_power as i32);
        let hi_factor = BigRational::one() + &lo_factor;
        let mut cache: BTreeMap<crate::graph::Weight, Option<(u64, u64)>> = BTreeMap::new();
        let admitted = (0..g.m())
            .map(|e| {
                let w = g.weight(e);
                *cache.entry(w).or_insert_with(|| {
                    let wb = to_big(w);
                    let lo = ceil_u64(&(&wb / (&hi_factor * &scale))).max(1);
                    let hi = floor_u64(&(&wb / (&lo_factor * &scale))).min(grid.q_max);
                    (lo <= hi).then_some((lo, hi))
                })
            })
            .collect();
        WeightClass { index, weight, scale, admitted }
    }

    pub fn admits(&self, e: usize, q: u64) -> bool {
        self.admitted[e].is_some_and(|(lo, hi)| lo <= q && q <= hi)
    }

    /// The grid value nearest below `w / scale`, moved into the admitted range.
    pub fn candidate(&self, g: &Graph, e: usize) -> Option<u64> {
        let (lo, hi) = self.admitted[e]?;
        let q = floor_u64(&(to_big(g.weight(e)) / &self.scale));
        Some(q.clamp(lo, hi))
    }

    pub fn admits_some_edge(&self) -> bool {
        self.admitted.iter().any(Option::is_some)
    }
}

/// Smallest `i` with `(1 + eps^4)^i >= value`.
pub fn class_index_for(value: &BigRational, grid: &ThresholdGrid) -> usize {
    let growth = BigRational::one() + grid.eps.pow(4);
    let mut w = BigRational::one();
    let mut i = 0;
    while &w < value {
        w *= &growth;
        i += 1;
    }
    i
}

/// Classes from the lightest edge weight up to `(max_layers - 1)` times the
/// heaviest, keeping those that admit at least one edge.
pub fn weight_classes(g: &Graph, grid: &ThresholdGrid, max_layers: usize, window_power: u32) -> Vec<WeightClass> {
    if g.m() == 0 {
        return vec![];
    }
    let weights: BTreeSet<_> = (0..g.m()).map(|e| g.weight(e)).collect();
    let lo = class_index_for(&to_big(*weights.first().unwrap()), grid);
    let top = to_big(*weights.last().unwrap()) * BigRational::from_integer(BigInt::from(max_layers.saturating_sub(1).max(1)));
    let hi = class_index_for(&top, grid);
    (lo..=hi).map(|i| WeightClass::new(g, grid, i, window_power)).filter(WeightClass::admits_some_edge).collect()
}

/// A matched edge placed in `layer` between its `H` copy and its `T` copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LayeredMatched {
    pub edge: usize,
    pub layer: usize,
    pub h: CopyVertex,
    pub t: CopyVertex,
}

/// An unmatched edge usable from copies of `from` in `H_gap` to copies of
/// `to` in `T_{gap+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LayeredUnmatched {
    pub edge: usize,
    pub gap: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightedLayeredGraph {
    pub class: usize,
    pub thresholds: ThresholdSequences,
    pub matched: Vec<LayeredMatched>,
    /// Free `H` copies kept in `H_1`.
    pub free_first: Vec<CopyVertex>,
    /// Free `T` copies kept in the last `T` layer.
    pub free_last: Vec<CopyVertex>,
    pub unmatched: Vec<LayeredUnmatched>,
}

impl WeightedLayeredGraph {
    pub fn layers(&self) -> usize {
        self.thresholds.layers()
    }

    /// Copies present in `H_layer`, sorted.
    pub fn h_copies(&self, layer: usize) -> Vec<CopyVertex> {
        let mut out: Vec<CopyVertex> = self.matched.iter().filter(|a| a.layer == layer).map(|a| a.h).collect();
        if layer == 1 {
            out.extend(&self.free_first);
        }
        out.sort();
        out
    }

    /// Copies present in `T_layer`, sorted.
    pub fn t_copies(&self, layer: usize) -> Vec<CopyVertex> {
        let mut out: Vec<CopyVertex> = self.matched.iter().filter(|a| a.layer == layer).map(|a| a.t).collect();
        if layer == self.layers() {
            out.extend(&self.free_last);
        }
        out.sort();
        out
    }

    pub fn matched_at(&self, layer: usize, c: CopyVertex) -> Option<&LayeredMatched> {
        self.matched.iter().find(|a| a.layer == layer && (a.h == c || a.t == c))
    }

    pub fn is_empty(&self) -> bool {
        self.matched.is_empty() && self.free_first.is_empty() && self.free_last.is_empty()
    }

    pub fn words(&self) -> usize {
        4 * self.matched.len() + self.free_first.len() + self.free_last.len() + 4 * self.unmatched.len()
    }
}

/// Builds the layered graph for one class and threshold pair.
///
/// Matched edges sit on their assigned copies; an edge whose copies share a
/// side is dropped. Free copies survive only in `H_1` (when `tau^A_1 = 0`)
/// or in the last `T` layer (when the last `tau^A` is 0). Unmatched edges
/// follow `orientation` and need surviving copies at both ends.
#[allow(clippy::too_many_arguments)]
pub fn build_weighted_layered(
    g: &Graph,
    b: &BudgetVector,
    m: &BMatching,
    assignment: &MatchedCopyAssignment,
    sides: &CopySides,
    orientation: &BTreeMap<usize, (usize, usize)>,
    class: &WeightClass,
    thresholds: &ThresholdSequences,
) -> WeightedLayeredGraph {
    let layers = thresholds.layers();
    let mut matched = vec![];
    for (&e, &(c1, c2)) in &assignment.copies {
        let (h, t) = match (sides.part(c1), sides.part(c2)) {
            (Part::H, Part::T) => (c1, c2),
            (Part::T, Part::H) => (c2, c1),
            _ => continue,
        };
        for layer in 1..=layers {
            if class.admits(e, thresholds.a[layer - 1]) {
                matched.push(LayeredMatched { edge: e, layer, h, t });
            }
        }
    }
    matched.sort_by_key(|a| (a.layer, a.edge));

    let (mut free_first, mut free_last) = (vec![], vec![]);
    for v in 0..g.n() {
        for idx in m.degree(v) + 1..=b.get(v) {
            let c = CopyVertex::new(v, idx);
            match sides.part(c) {
                Part::H if thresholds.a[0] == 0 => free_first.push(c),
                Part::T if thresholds.a[layers - 1] == 0 => free_last.push(c),
                _ => {}
            }
        }
    }

    let mut h_bases = vec![BTreeSet::new(); layers + 1];
    let mut t_bases = vec![BTreeSet::new(); layers + 1];
    for a in &matched {
        h_bases[a.layer].insert(a.h.base as usize);
        t_bases[a.layer].insert(a.t.base as usize);
    }
    h_bases[1].extend(free_first.iter().map(|c| c.base as usize));
    t_bases[layers].extend(free_last.iter().map(|c| c.base as usize));

    let mut unmatched = vec![];
    for (&e, &(from, to)) in orientation {
        for gap in 1..layers {
            if class.admits(e, thresholds.b[gap - 1]) && h_bases[gap].contains(&from) && t_bases[gap + 1].contains(&to) {
                unmatched.push(LayeredUnmatched { edge: e, gap, from, to });
            }
        }
    }
    unmatched.sort_by_key(|a| (a.gap, a.edge));

    WeightedLayeredGraph { class: class.index, thresholds: thresholds.clone(), matched, free_first, free_last, unmatched }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::graph::Weight;
    use crate::mpc::{MachineCluster, MpcConfig};
    use crate::unweighted::distribute_matched_edges;
    use proptest::prelude::*;
    use rand::Rng;

    fn assign(g: &Graph, b: &BudgetVector, m: &BMatching) -> MatchedCopyAssignment {
        distribute_matched_edges(g, b, m, &mut MachineCluster::for_graph(MpcConfig::default(), g)).unwrap()
    }

    #[test]
    fn split_is_reproducible_and_balanced() {
        let b = BudgetVector::constant(1, 1);
        let s = bipartite_split(&b, &mut rng::stream(1, &[]));
        assert_eq!(s.len(), 1);
        let b = BudgetVector::constant(2500, 4);
        let a = bipartite_split(&b, &mut rng::stream(7, &[]));
        let c = bipartite_split(&b, &mut rng::stream(7, &[]));
        assert_eq!(a.parts, c.parts);
        let h = a.parts.iter().filter(|&&p| p == Part::H).count() as f64;
        let sd = (10_000.0f64 * 0.25).sqrt();
        assert!((h - 5000.0).abs() <= 3.0 * sd, "{h}");
    }

    #[test]
    fn orientation_is_stable_and_uniform() {
        let g = gen::gnp(200, 0.5, None, 3).unwrap();
        let all = BMatching::from_edges(&g, &BudgetVector::constant(200, 200), 0..g.m()).unwrap();
        let src = StoredOrientation::random(&g, 11);
        assert!(orient_unmatched(&g, &all, &src).is_empty());
        let none = BMatching::empty(200);
        let a = orient_unmatched(&g, &none, &src);
        assert_eq!(a, orient_unmatched(&g, &none, &src));
        let fwd = a.values().filter(|(u, v)| u < v).count() as f64;
        let total = a.len() as f64;
        assert!((fwd - total / 2.0).abs() <= 3.0 * (total / 4.0).sqrt());
        let h = HashOrientation { hash: KWiseHash::new(4, 200 * 200, 5), n: 200 };
        let x = orient_unmatched(&g, &none, &h);
        assert_eq!(x, orient_unmatched(&g, &none, &h));
        assert!(x.iter().all(|(&e, &(u, v))| g.edge_id(u, v) == Some(e)));
    }

    #[test]
    fn windows_are_exact() {
        let g = Graph::with_weights(2, [(0, 1, Weight::from_integer(1))]).unwrap();
        let grid = ThresholdGrid::new(0.5).unwrap();
        let c = WeightClass::new(&g, &grid, 0, 2);
        // W = 1, scale = 1/4096: q is admitted iff q/16384 <= 1 <= 5q/16384,
        // capped at q_max = 4352.
        assert!(c.admits(0, 3277) && !c.admits(0, 3276));
        assert!(c.admits(0, 4352) && !c.admits(0, 4353));
        assert!(!c.admits(0, 0));
        assert_eq!(c.candidate(&g, 0), Some(4096));
        // Weight 4 needs W >= 4 * 4 / 5 / (1 + eps^4).
        let heavy = Graph::with_weights(2, [(0, 1, Weight::from_integer(4))]).unwrap();
        assert!(!WeightClass::new(&heavy, &grid, 0, 2).admits_some_edge());
        assert_eq!(class_index_for(&BigRational::from_integer(2.into()), &grid), 12);
    }

    #[test]
    fn empty_matching_and_nonzero_first_threshold_is_empty() {
        let g = gen::gnp(20, 0.3, Some(8), 2).unwrap();
        let b = gen::uniform_budgets(20, 2, 2).unwrap();
        let m = BMatching::empty(20);
        let grid = ThresholdGrid::new(0.5).unwrap();
        let class = WeightClass::new(&g, &grid, 30, 2);
        let sides = bipartite_split(&b, &mut rng::stream(3, &[]));
        let orient = orient_unmatched(&g, &m, &StoredOrientation::random(&g, 3));
        let th = ThresholdSequences { a: vec![100, 0], b: vec![2000] };
        let l = build_weighted_layered(&g, &b, &m, &assign(&g, &b, &m), &sides, &orient, &class, &th);
        assert!(l.matched.is_empty() && l.free_first.is_empty());
        assert!(l.unmatched.is_empty());
    }

    #[test]
    fn figure_layering_drops_the_free_h_copy() {
        // x = 0, w = 1, u = 2, v = 3; b_w = 3, b_v = 2; M = {xw, uv}.
        let one = Weight::from_integer(1);
        let g = Graph::with_weights(4, [(0, 1, one), (2, 3, one), (1, 3, one), (1, 2, one)]).unwrap();
        let b = BudgetVector::new(vec![1, 3, 1, 2]).unwrap();
        let xw = g.edge_id(0, 1).unwrap();
        let uv = g.edge_id(2, 3).unwrap();
        let m = BMatching::from_edges(&g, &b, [xw, uv]).unwrap();
        let a = assign(&g, &b, &m);
        assert_eq!(a.copies[&xw], (CopyVertex::new(0, 1), CopyVertex::new(1, 1)));
        assert_eq!(a.copies[&uv], (CopyVertex::new(2, 1), CopyVertex::new(3, 1)));
        // H = {w1, u1, v2}, T = {w2, w3, x1, v1}; copies ordered x1 w1 w2 w3 u1 v1 v2.
        use Part::*;
        let sides = CopySides::from_parts(&b, vec![T, H, T, T, H, T, H]);
        let grid = ThresholdGrid::new(0.5).unwrap();
        let class = WeightClass::new(&g, &grid, 0, 2);
        let q = class.candidate(&g, xw).unwrap();
        let th = ThresholdSequences { a: vec![q, q], b: vec![q + 1] };
        let orient = orient_unmatched(&g, &m, &StoredOrientation::random(&g, 0));
        let l = build_weighted_layered(&g, &b, &m, &a, &sides, &orient, &class, &th);
        assert!(l.free_first.is_empty() && l.free_last.is_empty());
        assert!(!l.h_copies(1).contains(&CopyVertex::new(3, 2)));
        assert!(!l.h_copies(2).contains(&CopyVertex::new(3, 2)));
        assert_eq!(l.h_copies(1), vec![CopyVertex::new(1, 1), CopyVertex::new(2, 1)]);
        assert_eq!(l.t_copies(1), vec![CopyVertex::new(0, 1), CopyVertex::new(3, 1)]);
        // The unmatched edges wv and wu need an H copy of their tail and a
        // T copy of their head, i.e. w1 -> v1 is the only possible arc.
        for a in &l.unmatched {
            assert_eq!((a.from, a.to), (1, 3));
        }
    }

    proptest! {
        #[test]
        fn layered_invariants(seed in 0u64..200) {
            let g = gen::gnp(14, 0.35, Some(16), seed).unwrap();
            let b = gen::uniform_budgets(14, 2, seed).unwrap();
            let m = BMatching::from_edges(&g, &b, crate::unweighted::greedy_bmatching(&g, b.as_slice())).unwrap();
            let grid = ThresholdGrid::new(0.5).unwrap();
            let classes = weight_classes(&g, &grid, 3, 2);
            prop_assume!(!classes.is_empty());
            let mut r = rng::stream(seed, &[1]);
            let class = &classes[r.gen_range(0..classes.len())];
            let a: Vec<u64> = (0..g.m()).filter(|&e| m.contains(e)).filter_map(|e| class.candidate(&g, e)).collect();
            let bc: Vec<u64> = (0..g.m()).filter(|&e| !m.contains(e)).filter_map(|e| class.candidate(&g, e)).collect();
            let th = super::super::thresholds::sample_thresholds(&grid, &a, &bc, 3, 64, &mut r);
            prop_assume!(th.is_some());
            let th = th.unwrap();
            let sides = bipartite_split(&b, &mut r);
            let orient = orient_unmatched(&g, &m, &StoredOrientation::random(&g, seed));
            let l = build_weighted_layered(&g, &b, &m, &assign(&g, &b, &m), &sides, &orient, class, &th);
            let last = l.layers();
            for x in &l.matched {
                prop_assert!(sides.part(x.h) == Part::H && sides.part(x.t) == Part::T);
                prop_assert!(m.contains(x.edge) && class.admits(x.edge, th.a[x.layer - 1]));
            }
            prop_assert!(l.free_first.is_empty() || th.a[0] == 0);
            prop_assert!(l.free_last.is_empty() || th.a[last - 1] == 0);
            for c in l.free_first.iter().chain(&l.free_last) {
                prop_assert!(c.index > m.degree(c.base as usize));
            }
            for x in &l.unmatched {
                // Orientation exclusion: the arc always runs tail to head.
                prop_assert_eq!(orient[&x.edge], (x.from, x.to));
                prop_assert!(l.h_copies(x.gap).iter().any(|c| c.base as usize == x.from));
                prop_assert!(l.t_copies(x.gap + 1).iter().any(|c| c.base as usize == x.to));
                prop_assert!(class.admits(x.edge, th.b[x.gap - 1]));
            }
        }
    }
}
