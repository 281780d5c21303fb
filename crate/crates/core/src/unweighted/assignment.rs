use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{BMatching, BudgetVector, CopyVertex, Graph};
use crate::mpc::{distributed_sort, prefix_sum, search_tree_broadcast, MachineCluster};

/// Copies chosen for the endpoints of every matched edge.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MatchedCopyAssignment {
    /// Edge id to (copy of the smaller endpoint, copy of the larger endpoint).
    pub copies: BTreeMap<usize, (CopyVertex, CopyVertex)>,
}

impl MatchedCopyAssignment {
    pub fn len(&self) -> usize {
        self.copies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.copies.is_empty()
    }

    pub fn copy_at(&self, e: usize, g: &Graph, v: usize) -> Option<CopyVertex> {
        let (a, b) = self.copies.get(&e)?;
        let (u, _) = g.endpoints(e);
        Some(if v == u { *a } else { *b })
    }

    /// Which matched edge owns each used copy.
    pub fn owners(&self) -> HashMap<CopyVertex, usize> {
        self.copies.iter().flat_map(|(&e, &(a, b))| [(a, e), (b, e)]).collect()
    }
}

/// Numbers the matched edges at every vertex `1, 2, ...` using a sort, a
/// prefix sum over per-vertex counts and a search-tree lookup of offsets.
pub fn distribute_matched_edges(
    g: &Graph,
    b: &BudgetVector,
    m: &BMatching,
    cluster: &mut MachineCluster,
) -> Result<MatchedCopyAssignment> {
    b.check_for(g)?;
    let mut records: Vec<(u32, usize)> = Vec::with_capacity(2 * m.len());
    for e in m.iter() {
        let (u, v) = g.endpoints(e);
        records.push((u as u32, e));
        records.push((v as u32, e));
    }
    let sorted = distributed_sort(cluster, records, |r| *r, |_| 2)?;

    let mut counts = vec![0u64; g.n()];
    for &(v, _) in &sorted {
        counts[v as usize] += 1;
    }
    let offsets = prefix_sum(cluster, &counts);
    let specials: Vec<(u32, u64)> = (0..g.n()).filter(|&v| counts[v] > 0).map(|v| (v as u32, offsets[v])).collect();
    let keys: Vec<u32> = sorted.iter().map(|r| r.0).collect();
    let found = search_tree_broadcast(cluster, specials, &keys);

    let mut out = MatchedCopyAssignment::default();
    for (pos, (&(v, e), off)) in sorted.iter().zip(found).enumerate() {
        let idx = pos as u64 - off.expect("every record's vertex has an offset") + 1;
        if idx > b.get(v as usize) as u64 {
            return Err(Error::InvalidMatching(format!(
                "vertex {v} has matched degree above its budget {}",
                b.get(v as usize)
            )));
        }
        let copy = CopyVertex::new(v as usize, idx as u32);
        let (lo, _) = g.endpoints(e);
        let slot = out.copies.entry(e).or_insert((copy, copy));
        if v as usize == lo {
            slot.0 = copy;
        } else {
            slot.1 = copy;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::mpc::MpcConfig;
    use std::collections::HashSet;

    fn cluster(g: &Graph) -> MachineCluster {
        MachineCluster::for_graph(MpcConfig::default(), g)
    }

    #[test]
    fn two_edges_at_a_budget_two_vertex() {
        let g = gen::star(2);
        let b = BudgetVector::new(vec![2, 1, 1]).unwrap();
        let m = BMatching::from_edges(&g, &b, [0, 1]).unwrap();
        let a = distribute_matched_edges(&g, &b, &m, &mut cluster(&g)).unwrap();
        let centre: HashSet<u32> = a.copies.values().map(|p| p.0.index).collect();
        assert_eq!(centre, HashSet::from([1, 2]));
    }

    #[test]
    fn empty_matching_gives_empty_assignment() {
        let g = gen::path(4);
        let b = BudgetVector::constant(4, 1);
        assert!(distribute_matched_edges(&g, &b, &BMatching::empty(4), &mut cluster(&g)).unwrap().is_empty());
    }

    #[test]
    fn agrees_with_a_sequential_counter() {
        let g = gen::gnp(1000, 0.01, None, 4).unwrap();
        let b = gen::uniform_budgets(1000, 3, 4).unwrap();
        let mut deg = vec![0u32; g.n()];
        let mut chosen = vec![];
        for e in 0..g.m() {
            let (u, v) = g.endpoints(e);
            if deg[u] < b.get(u) && deg[v] < b.get(v) && (e % 3 != 0) {
                deg[u] += 1;
                deg[v] += 1;
                chosen.push(e);
            }
        }
        let m = BMatching::from_edges(&g, &b, chosen.iter().copied()).unwrap();
        let a = distribute_matched_edges(&g, &b, &m, &mut cluster(&g)).unwrap();
        // Reference: count matched edges per vertex in increasing edge-id order.
        let mut next = vec![0u32; g.n()];
        let mut used = HashSet::new();
        for &e in &chosen {
            let (u, v) = g.endpoints(e);
            next[u] += 1;
            next[v] += 1;
            let (cu, cv) = a.copies[&e];
            assert_eq!((cu, cv), (CopyVertex::new(u, next[u]), CopyVertex::new(v, next[v])));
            assert!(used.insert(cu) && used.insert(cv));
            assert!(cu.index <= b.get(u) && cv.index <= b.get(v));
        }
    }
}
