use std::collections::BTreeMap;

use serde::Serialize;

use super::layered::{Part, WeightedLayeredGraph};
use crate::error::{Error, Result};
use crate::graph::{BMatching, BudgetVector, CopyVertex, Graph};
use crate::mpc::MachineCluster;
use crate::unweighted::{distribute_matched_edges, unweighted_one_plus_eps, UnweightedParams};

/// A copy in one layer of a weighted layered graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LNode {
    pub copy: CopyVertex,
    pub part: Part,
    pub layer: usize,
}

impl LNode {
    pub fn new(copy: CopyVertex, part: Part, layer: usize) -> Self {
        LNode { copy, part, layer }
    }
}

/// Maximal alternating paths, one per special vertex, plus the number of
/// synchronous extension steps taken.
#[derive(Clone, Debug)]
pub struct AlternatingPaths<N, L> {
    pub paths: Vec<(Vec<N>, Vec<L>)>,
    pub rounds: usize,
}

fn partner_map<N: Copy + Ord, L: Copy>(edges: &[(N, N, L)], colour: &str) -> Result<BTreeMap<N, (N, L)>> {
    let mut map = BTreeMap::new();
    for &(a, c, l) in edges {
        if a == c {
            return Err(Error::Precondition(format!("{colour} edge is a loop")));
        }
        if map.insert(a, (c, l)).is_some() || map.insert(c, (a, l)).is_some() {
            return Err(Error::Precondition(format!("{colour} edges do not form a matching")));
        }
    }
    Ok(map)
}

/// Follows red, blue, red, ... from every special vertex until no edge of
/// the needed colour continues the path. All paths advance in lockstep.
pub fn alg_alternating<N: Copy + Ord, L: Copy>(
    blue: &[(N, N, L)],
    red: &[(N, N, L)],
    specials: &[N],
) -> Result<AlternatingPaths<N, L>> {
    let blue_of = partner_map(blue, "blue")?;
    let red_of = partner_map(red, "red")?;
    for &(a, c, _) in blue {
        if red_of.get(&a).is_some_and(|&(x, _)| x == c) {
            return Err(Error::Precondition("an edge is both red and blue".into()));
        }
    }
    if specials.iter().any(|s| blue_of.contains_key(s)) {
        return Err(Error::Precondition("a special vertex is incident to a blue edge".into()));
    }
    // Union of two matchings: a cycle shows up as an edge joining two
    // vertices that are already connected.
    let mut ids = BTreeMap::new();
    for &(a, c, _) in blue.iter().chain(red) {
        let next = ids.len();
        ids.entry(a).or_insert(next);
        let next = ids.len();
        ids.entry(c).or_insert(next);
    }
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn root(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(a, c, _) in blue.iter().chain(red) {
        let (ra, rc) = (root(&mut parent, ids[&a]), root(&mut parent, ids[&c]));
        if ra == rc {
            return Err(Error::Precondition("red and blue edges form a cycle".into()));
        }
        parent[ra] = rc;
    }

    let mut paths: Vec<(Vec<N>, Vec<L>)> = specials.iter().map(|&s| (vec![s], vec![])).collect();
    let mut live: Vec<usize> = (0..paths.len()).collect();
    let mut rounds = 0;
    while !live.is_empty() {
        let map = if rounds % 2 == 0 { &red_of } else { &blue_of };
        live.retain(|&i| {
            let (nodes, labels) = &mut paths[i];
            match map.get(nodes.last().unwrap()) {
                Some(&(next, l)) => {
                    nodes.push(next);
                    labels.push(l);
                    true
                }
                None => false,
            }
        });
        if !live.is_empty() {
            rounds += 1;
        }
    }
    Ok(AlternatingPaths { paths, rounds })
}

/// `L'` contracted to one vertex per (base vertex, part, layer).
#[derive(Clone, Debug)]
pub struct Compressed {
    pub graph: Graph,
    pub budgets: BudgetVector,
    pub keys: Vec<(usize, Part, usize)>,
    pub copies: Vec<Vec<CopyVertex>>,
    /// Compressed edge id to (layered edge id, fixed copies for matched edges).
    pub origin: Vec<(usize, Option<(CopyVertex, CopyVertex)>)>,
}

/// Drops the matched edges of the first and last layer and contracts the
/// copies of each base vertex within a part and layer.
pub fn compress_inner(layered: &WeightedLayeredGraph) -> Result<Compressed> {
    let last = layered.layers();
    let mut id: BTreeMap<(usize, Part, usize), usize> = BTreeMap::new();
    let mut groups: BTreeMap<(usize, Part, usize), Vec<CopyVertex>> = BTreeMap::new();
    for layer in 1..=last {
        for c in layered.h_copies(layer) {
            groups.entry((c.base as usize, Part::H, layer)).or_default().push(c);
        }
        for c in layered.t_copies(layer) {
            groups.entry((c.base as usize, Part::T, layer)).or_default().push(c);
        }
    }
    let mut keys = vec![];
    let mut copies = vec![];
    for (k, mut list) in groups {
        list.sort();
        list.dedup();
        id.insert(k, keys.len());
        keys.push(k);
        copies.push(list);
    }
    let mut pairs: Vec<(usize, usize, usize, Option<(CopyVertex, CopyVertex)>)> = vec![];
    for a in layered.matched.iter().filter(|a| a.layer > 1 && a.layer < last) {
        let x = id[&(a.h.base as usize, Part::H, a.layer)];
        let y = id[&(a.t.base as usize, Part::T, a.layer)];
        pairs.push((x, y, a.edge, Some((a.h, a.t))));
    }
    for a in &layered.unmatched {
        let x = id[&(a.from, Part::H, a.gap)];
        let y = id[&(a.to, Part::T, a.gap + 1)];
        pairs.push((x, y, a.edge, None));
    }
    let graph = Graph::new(keys.len(), pairs.iter().map(|p| (p.0, p.1)))?;
    let mut origin = vec![(0, None); graph.m()];
    for &(x, y, e, fixed) in &pairs {
        origin[graph.edge_id(x, y).expect("edge just inserted")] = (e, fixed);
    }
    let budgets = BudgetVector::new(copies.iter().map(|c| c.len() as u32).collect())?;
    Ok(Compressed { graph, budgets, keys, copies, origin })
}

/// An edge of `M'` on copies: `h` in `H_i`, `t` in `T_i` or `T_{i+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CopyEdge {
    pub h: LNode,
    pub t: LNode,
    pub edge: usize,
    pub matched: bool,
}

/// A near-maximum matching of `L'` on copies. The unweighted engine runs
/// on the contracted graph; matched edges keep their fixed copies and the
/// remaining edges at a contracted vertex take its unused copies in the
/// order produced by the copy assignment.
pub fn alg_layered_matching(
    layered: &WeightedLayeredGraph,
    cluster: &mut MachineCluster,
    params: &UnweightedParams,
) -> Result<Vec<CopyEdge>> {
    let c = compress_inner(layered)?;
    if c.graph.m() == 0 {
        return Ok(vec![]);
    }
    let found = unweighted_one_plus_eps(&c.graph, &c.budgets, cluster, params)?.matching;
    let ranks = distribute_matched_edges(&c.graph, &c.budgets, &found, cluster)?;

    let mut used: Vec<Vec<CopyVertex>> = vec![vec![]; c.keys.len()];
    for e in found.iter() {
        if let (_, Some((h, t))) = c.origin[e] {
            let (x, y) = c.graph.endpoints(e);
            let (hx, tx) = if c.keys[x].1 == Part::H { (x, y) } else { (y, x) };
            used[hx].push(h);
            used[tx].push(t);
        }
    }
    // Unmatched edges at each contracted vertex, by assigned rank.
    let mut queue: Vec<Vec<(u32, usize)>> = vec![vec![]; c.keys.len()];
    for (&e, &(a, b)) in &ranks.copies {
        if c.origin[e].1.is_none() {
            queue[a.base as usize].push((a.index, e));
            queue[b.base as usize].push((b.index, e));
        }
    }
    let mut given: BTreeMap<(usize, usize), CopyVertex> = BTreeMap::new();
    for x in 0..c.keys.len() {
        queue[x].sort();
        let mut spare = c.copies[x].iter().filter(|cp| !used[x].contains(cp));
        for &(_, e) in &queue[x] {
            let cp = spare.next().ok_or_else(|| Error::InvalidMatching("contracted vertex ran out of copies".into()))?;
            given.insert((x, e), *cp);
        }
    }

    let mut out = vec![];
    for e in found.iter() {
        let (x, y) = c.graph.endpoints(e);
        let (hx, tx) = if c.keys[x].1 == Part::H { (x, y) } else { (y, x) };
        let (edge, fixed) = c.origin[e];
        let (hc, tc) = match fixed {
            Some(pair) => pair,
            None => (given[&(hx, e)], given[&(tx, e)]),
        };
        out.push(CopyEdge {
            h: LNode::new(hc, Part::H, c.keys[hx].2),
            t: LNode::new(tc, Part::T, c.keys[tx].2),
            edge,
            matched: fixed.is_some(),
        });
    }
    Ok(out)
}

/// An alternating path in the layered graph: `edges[i]` joins `nodes[i]`
/// and `nodes[i + 1]` and carries its matched flag.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LayeredPath {
    pub nodes: Vec<LNode>,
    pub edges: Vec<(usize, bool)>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PathSearch {
    pub paths: Vec<LayeredPath>,
    /// Paths started, complete or not.
    pub started: usize,
    pub rounds: usize,
}

/// Runs the alternation search with the middle-layer matched edges as blue,
/// the unmatched edges of `M'` as red and `H_1` as specials, keeps paths
/// that reach the last layer and appends the first- and last-layer matched
/// edges where the end thresholds are nonzero.
pub fn complete_paths(layered: &WeightedLayeredGraph, m_prime: &[CopyEdge]) -> Result<PathSearch> {
    let last = layered.layers();
    let blue: Vec<(LNode, LNode, (usize, bool))> = layered
        .matched
        .iter()
        .filter(|a| a.layer > 1 && a.layer < last)
        .map(|a| (LNode::new(a.t, Part::T, a.layer), LNode::new(a.h, Part::H, a.layer), (a.edge, true)))
        .collect();
    let red: Vec<(LNode, LNode, (usize, bool))> = m_prime.iter().filter(|e| !e.matched).map(|e| (e.h, e.t, (e.edge, false))).collect();
    let specials: Vec<LNode> = layered.h_copies(1).into_iter().map(|c| LNode::new(c, Part::H, 1)).collect();
    let found = alg_alternating(&blue, &red, &specials)?;
    let mut out = PathSearch { started: specials.len(), rounds: found.rounds, ..Default::default() };
    for (nodes, edges) in found.paths {
        let end = *nodes.last().unwrap();
        if end.part != Part::T || end.layer != last {
            continue;
        }
        let mut p = LayeredPath { nodes, edges };
        if layered.thresholds.a[0] != 0 {
            let first = p.nodes[0];
            let a = layered.matched_at(1, first.copy).ok_or_else(|| Error::Precondition("H_1 copy without its matched edge".into()))?;
            p.nodes.insert(0, LNode::new(a.t, Part::T, 1));
            p.edges.insert(0, (a.edge, true));
        }
        if layered.thresholds.a[last - 1] != 0 {
            let a = layered.matched_at(last, end.copy).ok_or_else(|| Error::Precondition("last-layer copy without its matched edge".into()))?;
            p.nodes.push(LNode::new(a.h, Part::H, last));
            p.edges.push((a.edge, true));
        }
        out.paths.push(p);
    }
    Ok(out)
}

/// A uniformly guided random alternating path through all layers of
/// `layered`: it starts at a random `H_1` copy, takes random unmatched arcs
/// onto random copies of the head, follows matched edges and is completed
/// like [`complete_paths`]. `None` when the walk gets stuck.
pub fn random_layered_path<R: rand::Rng>(layered: &WeightedLayeredGraph, rng: &mut R) -> Option<LayeredPath> {
    let last = layered.layers();
    let starts = layered.h_copies(1);
    if starts.is_empty() {
        return None;
    }
    let mut cur = starts[rng.gen_range(0..starts.len())];
    let mut p = LayeredPath { nodes: vec![LNode::new(cur, Part::H, 1)], edges: vec![] };
    for gap in 1..last {
        let arcs: Vec<_> = layered.unmatched.iter().filter(|a| a.gap == gap && a.from == cur.base as usize).collect();
        if arcs.is_empty() {
            return None;
        }
        let arc = arcs[rng.gen_range(0..arcs.len())];
        let heads: Vec<CopyVertex> = layered.t_copies(gap + 1).into_iter().filter(|c| c.base as usize == arc.to).collect();
        let head = heads[rng.gen_range(0..heads.len())];
        p.nodes.push(LNode::new(head, Part::T, gap + 1));
        p.edges.push((arc.edge, false));
        if gap + 1 == last {
            cur = head;
            break;
        }
        let a = layered.matched_at(gap + 1, head)?;
        p.nodes.push(LNode::new(a.h, Part::H, gap + 1));
        p.edges.push((a.edge, true));
        cur = a.h;
    }
    if layered.thresholds.a[0] != 0 {
        let a = layered.matched_at(1, p.nodes[0].copy)?;
        p.nodes.insert(0, LNode::new(a.t, Part::T, 1));
        p.edges.insert(0, (a.edge, true));
    }
    if layered.thresholds.a[last - 1] != 0 {
        let a = layered.matched_at(last, cur)?;
        p.nodes.push(LNode::new(a.h, Part::H, last));
        p.edges.push((a.edge, true));
    }
    Some(p)
}

/// True when `m` covers every copy the path claims as free.
pub fn endpoints_are_free(p: &LayeredPath, m: &BMatching) -> bool {
    let free = |n: &LNode| n.copy.index > m.degree(n.copy.base as usize);
    let first_ok = p.edges.first().is_none_or(|&(_, matched)| matched || free(&p.nodes[0]));
    let last_ok = p.edges.last().is_none_or(|&(_, matched)| matched || free(p.nodes.last().unwrap()));
    first_ok && last_ok
}
