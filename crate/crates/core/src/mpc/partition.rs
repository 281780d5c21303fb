//! Random vertex partitioning.

use serde::Serialize;

use super::MachineCluster;
use crate::graph::Graph;
use crate::rng;

const TAG_PARTITION: u64 = 0x7061_7274;

#[derive(Clone, Debug, Serialize)]
pub struct VertexPartition {
    pub machines: usize,
    /// Machine index `i_v` of every vertex.
    pub assignment: Vec<u32>,
    /// Edge ids of `G[V_i]` for each machine `i`, ascending.
    pub local_edges: Vec<Vec<u32>>,
    /// `|V_i|` for each machine.
    pub sizes: Vec<usize>,
}

impl VertexPartition {
    #[inline]
    pub fn machine_of(&self, v: usize) -> usize {
        self.assignment[v] as usize
    }

    #[inline]
    pub fn is_local(&self, g: &Graph, e: usize) -> bool {
        let (u, v) = g.endpoints(e);
        self.assignment[u] == self.assignment[v]
    }

    /// Words resident on machine `i`: its vertices plus its induced edges.
    pub fn resident_words(&self, i: usize) -> usize {
        self.sizes[i] + self.local_edges[i].len()
    }

    pub fn max_local_edges(&self) -> usize {
        self.local_edges.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Assigns every vertex to one of `machines` machines uniformly and
/// independently; the draw for `v` depends only on `(seed, v)`.
pub fn partition_vertices(cluster: &mut MachineCluster, g: &Graph, machines: usize, seed: u64) -> VertexPartition {
    partition_edge_list(cluster, g.n(), g.pairs(), machines, seed)
}

/// Partition over an explicit edge list; `local_edges` hold positions in `pairs`.
pub fn partition_edge_list(
    cluster: &mut MachineCluster,
    n: usize,
    pairs: &[(u32, u32)],
    machines: usize,
    seed: u64,
) -> VertexPartition {
    let machines = machines.max(1);
    let key = rng::derive(seed, &[TAG_PARTITION, machines as u64]);
    let assignment: Vec<u32> = (0..n)
        .map(|v| rng::below(rng::mix2(key, v as u64, 0), machines as u64) as u32)
        .collect();
    let mut sizes = vec![0usize; machines];
    for &i in &assignment {
        sizes[i as usize] += 1;
    }
    let mut local_edges = vec![Vec::new(); machines];
    for (e, &(u, v)) in pairs.iter().enumerate() {
        let iu = assignment[u as usize];
        if iu == assignment[v as usize] {
            local_edges[iu as usize].push(e as u32);
        }
    }
    let part = VertexPartition { machines, assignment, local_edges, sizes };
    // Shipping G[V_i] to machine i is one all-to-all exchange.
    let max_words = (0..machines).map(|i| part.resident_words(i)).max().unwrap_or(0);
    cluster.charge_rounds("partition", 1, max_words, max_words);
    for i in 0..machines {
        cluster.note_resident(i, part.resident_words(i));
    }
    part
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::mpc::MpcConfig;

    #[test]
    fn single_machine_holds_everything() {
        let g = gen::gnp(50, 0.2, None, 1).unwrap();
        let mut c = MachineCluster::for_graph(MpcConfig::default(), &g);
        let p = partition_vertices(&mut c, &g, 1, 3);
        assert!(p.assignment.iter().all(|&i| i == 0));
        assert_eq!(p.local_edges[0].len(), g.m());
    }

    #[test]
    fn partition_is_reproducible() {
        let g = gen::fixture(gen::Fixture::F2);
        let mut c = MachineCluster::for_graph(MpcConfig::default(), &g);
        let a = partition_vertices(&mut c, &g, 3, 17);
        let b = partition_vertices(&mut c, &g, 3, 17);
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn local_edges_have_both_ends_on_the_machine() {
        let g = gen::gnp(300, 0.1, None, 2).unwrap();
        let mut c = MachineCluster::for_graph(MpcConfig::default(), &g);
        let p = partition_vertices(&mut c, &g, 4, 9);
        let mut count = 0;
        for (i, edges) in p.local_edges.iter().enumerate() {
            for &e in edges {
                let (u, v) = g.endpoints(e as usize);
                assert_eq!(p.machine_of(u), i);
                assert_eq!(p.machine_of(v), i);
                count += 1;
            }
        }
        assert_eq!(count, (0..g.m()).filter(|&e| p.is_local(&g, e)).count());
    }
}
