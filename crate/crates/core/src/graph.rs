//! Graphs, budgets, b-matchings, vertex copies and alternating walks.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

pub type Weight = Ratio<i64>;

/// Undirected simple graph with canonical edge ids.
///
/// Edge `e` is the `e`-th pair `(u, v)`, `u < v`, in lexicographic order, so
/// ids depend only on the edge set and not on input order.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    ends: Vec<(u32, u32)>,
    weights: Option<Vec<Weight>>,
    offsets: Vec<usize>,
    incidence: Vec<u32>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let list: Vec<(usize, usize, Weight)> =
            edges.into_iter().map(|(u, v)| (u, v, Weight::one())).collect();
        let mut g = Self::build(n, list)?;
        g.weights = None;
        Ok(g)
    }

    pub fn with_weights(n: usize, edges: impl IntoIterator<Item = (usize, usize, Weight)>) -> Result<Self> {
        Self::build(n, edges.into_iter().collect())
    }

    pub fn empty(n: usize) -> Self {
        Self::from_canonical(n, Vec::new(), None).expect("empty graph")
    }

    fn build(n: usize, list: Vec<(usize, usize, Weight)>) -> Result<Self> {
        if n > u32::MAX as usize {
            return Err(Error::Graph(format!("{n} vertices exceed the u32 id space")));
        }
        let mut canon = Vec::with_capacity(list.len());
        for (u, v, w) in list {
            if u >= n || v >= n {
                return Err(Error::Graph(format!("edge ({u}, {v}) references a vertex outside 0..{n}")));
            }
            if u == v {
                return Err(Error::Graph(format!("self-loop at vertex {u}")));
            }
            if w < Weight::zero() {
                return Err(Error::Graph(format!("negative weight {w} on edge ({u}, {v})")));
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            canon.push(((a as u32, b as u32), w));
        }
        canon.sort_by_key(|x| x.0);
        for pair in canon.windows(2) {
            if pair[0].0 == pair[1].0 {
                let (a, b) = pair[0].0;
                return Err(Error::Graph(format!("duplicate edge ({a}, {b})")));
            }
        }
        let (ends, weights): (Vec<_>, Vec<_>) = canon.into_iter().unzip();
        Self::from_canonical(n, ends, Some(weights))
    }

    /// Builds from pairs already in canonical order (`u < v`, strictly increasing).
    pub fn from_canonical(n: usize, ends: Vec<(u32, u32)>, weights: Option<Vec<Weight>>) -> Result<Self> {
        for (i, &(u, v)) in ends.iter().enumerate() {
            if u >= v || v as usize >= n {
                return Err(Error::Graph(format!("pair ({u}, {v}) is not canonical for n = {n}")));
            }
            if i > 0 && ends[i - 1] >= (u, v) {
                return Err(Error::Graph(format!("pairs not strictly increasing at ({u}, {v})")));
            }
        }
        if let Some(w) = &weights {
            if w.len() != ends.len() {
                return Err(Error::Dimension { expected: ends.len(), found: w.len() });
            }
        }
        let mut offsets = vec![0usize; n + 1];
        for &(u, v) in &ends {
            offsets[u as usize + 1] += 1;
            offsets[v as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut incidence = vec![0u32; 2 * ends.len()];
        for (e, &(u, v)) in ends.iter().enumerate() {
            incidence[fill[u as usize]] = e as u32;
            fill[u as usize] += 1;
            incidence[fill[v as usize]] = e as u32;
            fill[v as usize] += 1;
        }
        Ok(Graph { n, ends, weights, offsets, incidence })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.ends.len()
    }

    #[inline]
    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        let (u, v) = self.ends[e];
        (u as usize, v as usize)
    }

    #[inline]
    pub fn other(&self, e: usize, v: usize) -> usize {
        let (a, b) = self.endpoints(e);
        if a == v {
            b
        } else {
            debug_assert_eq!(b, v);
            a
        }
    }

    #[inline]
    pub fn incident(&self, v: usize) -> &[u32] {
        &self.incidence[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    #[inline]
    pub fn weight(&self, e: usize) -> Weight {
        match &self.weights {
            Some(w) => w[e],
            None => Weight::one(),
        }
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.ends
    }

    /// `2m / n`, or 0 for the empty vertex set.
    pub fn avg_degree(&self) -> Ratio<u64> {
        if self.n == 0 {
            Ratio::from_integer(0)
        } else {
            Ratio::new(2 * self.m() as u64, self.n as u64)
        }
    }

    pub fn edge_id(&self, u: usize, v: usize) -> Option<usize> {
        let key = if u < v { (u as u32, v as u32) } else { (v as u32, u as u32) };
        self.ends.binary_search(&key).ok()
    }

    /// Same vertex set, only the listed edges; returns the map new id -> old id.
    pub fn edge_subgraph(&self, edge_ids: &[usize]) -> (Graph, Vec<usize>) {
        let mut ids = edge_ids.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let ends = ids.iter().map(|&e| self.ends[e]).collect();
        let weights = self.weights.as_ref().map(|w| ids.iter().map(|&e| w[e]).collect());
        (Graph::from_canonical(self.n, ends, weights).expect("subset of a canonical list"), ids)
    }

    /// Input size in words: one per vertex plus one per edge.
    /// Words of an edge-list representation: one per vertex, two per edge.
    pub fn words(&self) -> usize {
        self.n + 2 * self.m()
    }

    pub fn total_weight(&self, edges: impl IntoIterator<Item = usize>) -> Weight {
        edges.into_iter().fold(Weight::zero(), |acc, e| acc + self.weight(e))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BudgetVector(Vec<u32>);

impl BudgetVector {
    pub fn new(b: Vec<u32>) -> Result<Self> {
        if let Some(v) = b.iter().position(|&x| x == 0) {
            return Err(Error::Graph(format!("budget of vertex {v} must be at least 1")));
        }
        Ok(BudgetVector(b))
    }

    pub fn constant(n: usize, value: u32) -> Self {
        Self::new(vec![value; n]).expect("positive constant budget")
    }

    #[inline]
    pub fn get(&self, v: usize) -> u32 {
        self.0[v]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&x| x as u64).sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn check_for(&self, g: &Graph) -> Result<()> {
        if self.0.len() != g.n() {
            return Err(Error::Dimension { expected: g.n(), found: self.0.len() });
        }
        Ok(())
    }
}

/// Edge set plus per-vertex degree cache. Budgets are not stored here; the
/// operations that can break them take the budget vector explicitly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BMatching {
    edges: BTreeSet<usize>,
    deg: Vec<u32>,
}

impl BMatching {
    pub fn empty(n: usize) -> Self {
        BMatching { edges: BTreeSet::new(), deg: vec![0; n] }
    }

    /// Builds and validates against budgets.
    pub fn from_edges(g: &Graph, b: &BudgetVector, edges: impl IntoIterator<Item = usize>) -> Result<Self> {
        let list: Vec<usize> = edges.into_iter().collect();
        let report = validate_bmatching(g, b, &list);
        if !report.is_valid() {
            return Err(Error::InvalidMatching(report.summary()));
        }
        let mut m = BMatching::empty(g.n());
        for e in list {
            m.insert_unchecked(g, e);
        }
        Ok(m)
    }

    fn insert_unchecked(&mut self, g: &Graph, e: usize) {
        if self.edges.insert(e) {
            let (u, v) = g.endpoints(e);
            self.deg[u] += 1;
            self.deg[v] += 1;
        }
    }

    fn remove_unchecked(&mut self, g: &Graph, e: usize) {
        if self.edges.remove(&e) {
            let (u, v) = g.endpoints(e);
            self.deg[u] -= 1;
            self.deg[v] -= 1;
        }
    }

    #[inline]
    pub fn contains(&self, e: usize) -> bool {
        self.edges.contains(&e)
    }

    #[inline]
    pub fn degree(&self, v: usize) -> u32 {
        self.deg[v]
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_ids(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn weight(&self, g: &Graph) -> Weight {
        g.total_weight(self.iter())
    }

    pub fn is_valid_for(&self, g: &Graph, b: &BudgetVector) -> bool {
        validate_bmatching(g, b, &self.edge_ids()).is_valid()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CopyVertex {
    pub base: u32,
    /// 1-based copy index.
    pub index: u32,
}

impl CopyVertex {
    pub fn new(base: usize, index: u32) -> Self {
        CopyVertex { base: base as u32, index }
    }
}

/// `b_v` copies of every listed vertex, indices `1..=b_v`.
pub fn decompress(vertices: &[usize], b: &BudgetVector) -> Vec<CopyVertex> {
    vertices
        .iter()
        .flat_map(|&v| (1..=b.get(v)).map(move |i| CopyVertex::new(v, i)))
        .collect()
}

pub fn compress(copies: &[CopyVertex]) -> BTreeSet<usize> {
    copies.iter().map(|c| c.base as usize).collect()
}

/// Dense numbering of all copies: copy `(v, i)` gets `offset[v] + i - 1`.
#[derive(Clone, Debug)]
pub struct CopyIndex {
    offset: Vec<usize>,
}

impl CopyIndex {
    pub fn new(b: &BudgetVector) -> Self {
        let mut offset = Vec::with_capacity(b.len() + 1);
        let mut acc = 0usize;
        offset.push(0);
        for &x in b.as_slice() {
            acc += x as usize;
            offset.push(acc);
        }
        CopyIndex { offset }
    }

    #[inline]
    pub fn id(&self, c: CopyVertex) -> usize {
        self.offset[c.base as usize] + c.index as usize - 1
    }

    pub fn copy(&self, id: usize) -> CopyVertex {
        let base = self.offset.partition_point(|&o| o <= id) - 1;
        CopyVertex::new(base, (id - self.offset[base] + 1) as u32)
    }

    pub fn total(&self) -> usize {
        *self.offset.last().unwrap()
    }

    pub fn range(&self, v: usize) -> std::ops::Range<usize> {
        self.offset[v]..self.offset[v + 1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WalkStep {
    pub edge: usize,
    pub from: usize,
    pub to: usize,
    pub matched: bool,
}

/// A walk whose edges alternate between matched and unmatched.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AlternatingWalk {
    pub steps: Vec<WalkStep>,
    pub start: Option<CopyVertex>,
    pub end: Option<CopyVertex>,
}

impl AlternatingWalk {
    pub fn from_steps(steps: Vec<WalkStep>) -> Self {
        AlternatingWalk { steps, start: None, end: None }
    }

    /// Walk through the given base vertices; matched flags are read from `m`.
    pub fn through(g: &Graph, m: &BMatching, vertices: &[usize]) -> Result<Self> {
        let mut steps = Vec::with_capacity(vertices.len().saturating_sub(1));
        for pair in vertices.windows(2) {
            let e = g.edge_id(pair[0], pair[1]).ok_or_else(|| {
                Error::MalformedWalk(format!("no edge between {} and {}", pair[0], pair[1]))
            })?;
            steps.push(WalkStep { edge: e, from: pair[0], to: pair[1], matched: m.contains(e) });
        }
        let walk = Self::from_steps(steps);
        walk.check_shape(g)?;
        Ok(walk)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn first_vertex(&self) -> Option<usize> {
        self.steps.first().map(|s| s.from)
    }

    pub fn last_vertex(&self) -> Option<usize> {
        self.steps.last().map(|s| s.to)
    }

    pub fn is_closed(&self) -> bool {
        !self.steps.is_empty() && self.first_vertex() == self.last_vertex()
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|s| s.edge)
    }

    pub fn vertices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        if let Some(f) = self.first_vertex() {
            out.push(f);
        }
        out.extend(self.steps.iter().map(|s| s.to));
        out
    }

    /// Connectivity, endpoint consistency and flag alternation.
    pub fn check_shape(&self, g: &Graph) -> Result<()> {
        for (i, s) in self.steps.iter().enumerate() {
            if s.edge >= g.m() {
                return Err(Error::MalformedWalk(format!("edge id {} does not exist", s.edge)));
            }
            let (a, b) = g.endpoints(s.edge);
            if !((a == s.from && b == s.to) || (a == s.to && b == s.from)) {
                return Err(Error::MalformedWalk(format!("step {i} does not traverse edge {}", s.edge)));
            }
            if i > 0 {
                let prev = &self.steps[i - 1];
                if prev.to != s.from {
                    return Err(Error::MalformedWalk(format!("steps {} and {i} are not connected", i - 1)));
                }
                if prev.matched == s.matched {
                    return Err(Error::MalformedWalk(format!("flags do not alternate at step {i}")));
                }
            }
        }
        Ok(())
    }

    /// Shape check plus agreement of every flag with `m`.
    pub fn check_against(&self, g: &Graph, m: &BMatching) -> Result<()> {
        self.check_shape(g)?;
        for (i, s) in self.steps.iter().enumerate() {
            if m.contains(s.edge) != s.matched {
                return Err(Error::MalformedWalk(format!(
                    "step {i} flags edge {} as {} but the matching disagrees",
                    s.edge,
                    if s.matched { "matched" } else { "unmatched" }
                )));
            }
        }
        Ok(())
    }

    pub fn has_distinct_edges(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.steps.iter().all(|s| seen.insert(s.edge))
    }
}

/// Unmatched weight minus matched weight along `p`.
pub fn gain(p: &AlternatingWalk, m: &BMatching, g: &Graph) -> Result<Weight> {
    p.check_against(g, m)?;
    Ok(gain_unchecked(p, g))
}

pub fn gain_unchecked(p: &AlternatingWalk, g: &Graph) -> Weight {
    p.steps.iter().fold(Weight::zero(), |acc, s| {
        if s.matched {
            acc - g.weight(s.edge)
        } else {
            acc + g.weight(s.edge)
        }
    })
}

pub fn apply_walk(m: &BMatching, p: &AlternatingWalk, g: &Graph, b: &BudgetVector) -> Result<BMatching> {
    apply_walks(m, std::slice::from_ref(p), g, b)
}

/// Applies several walks at once; they must be edge-disjoint.
pub fn apply_walks(m: &BMatching, walks: &[AlternatingWalk], g: &Graph, b: &BudgetVector) -> Result<BMatching> {
    let mut touched = BTreeSet::new();
    for p in walks {
        p.check_against(g, m)?;
        for e in p.edge_ids() {
            if !touched.insert(e) {
                return Err(Error::MalformedWalk(format!("edge {e} is used twice")));
            }
        }
    }
    let mut out = m.clone();
    for p in walks {
        for s in &p.steps {
            if s.matched {
                out.remove_unchecked(g, s.edge);
            } else {
                out.insert_unchecked(g, s.edge);
            }
        }
    }
    for v in 0..g.n() {
        if out.degree(v) > b.get(v) {
            return Err(Error::InvalidAugmentation(format!(
                "vertex {v} would have degree {} above budget {}",
                out.degree(v),
                b.get(v)
            )));
        }
    }
    Ok(out)
}

pub fn free_vertices(g: &Graph, b: &BudgetVector, m: &BMatching) -> Vec<usize> {
    (0..g.n()).filter(|&v| m.degree(v) < b.get(v)).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidityReport {
    /// `(vertex, degree, budget)` for every exceeded budget.
    pub budget_violations: Vec<(usize, u32, u32)>,
    pub duplicate_edges: Vec<usize>,
    pub unknown_edges: Vec<usize>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.budget_violations.is_empty() && self.duplicate_edges.is_empty() && self.unknown_edges.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        for &(v, d, cap) in &self.budget_violations {
            parts.push(format!("vertex {v} has degree {d} > {cap}"));
        }
        for e in &self.duplicate_edges {
            parts.push(format!("edge {e} listed twice"));
        }
        for e in &self.unknown_edges {
            parts.push(format!("edge id {e} does not exist"));
        }
        parts.join("; ")
    }
}

pub fn validate_bmatching(g: &Graph, b: &BudgetVector, edges: &[usize]) -> ValidityReport {
    let mut report = ValidityReport::default();
    let mut seen = BTreeSet::new();
    let mut deg: BTreeMap<usize, u32> = BTreeMap::new();
    for &e in edges {
        if e >= g.m() {
            report.unknown_edges.push(e);
            continue;
        }
        if !seen.insert(e) {
            report.duplicate_edges.push(e);
            continue;
        }
        let (u, v) = g.endpoints(e);
        *deg.entry(u).or_default() += 1;
        *deg.entry(v).or_default() += 1;
    }
    for (v, d) in deg {
        let cap = if v < b.len() { b.get(v) } else { 0 };
        if d > cap {
            report.budget_violations.push((v, d, cap));
        }
    }
    report
}
