//! Constant-round primitives: sort, prefix sum and search-tree lookup.
//!
//! Each one performs the operation directly and charges its configured round
//! cost, with the per-machine traffic of an even spread of the records.

use rayon::prelude::*;

use super::MachineCluster;
use crate::error::{Error, Result};

fn spread(cluster: &MachineCluster, words: usize) -> usize {
    words.div_ceil(cluster.machine_count().max(1))
}

/// Stable sort by key.
pub fn distributed_sort<T, K, F, W>(cluster: &mut MachineCluster, mut records: Vec<T>, key: F, words: W) -> Result<Vec<T>>
where
    T: Send,
    K: Ord,
    F: Fn(&T) -> K + Sync,
    W: Fn(&T) -> usize,
{
    let s = cluster.local_memory_words();
    let mut total = 0usize;
    for r in &records {
        let w = words(r);
        if w > s {
            return Err(Error::ModelViolation(format!("record of {w} words exceeds local memory {s}")));
        }
        total += w;
    }
    let per = spread(cluster, total);
    let cost = cluster.config().sort_round_cost;
    cluster.charge_rounds("sort", cost, per, per);
    records.par_sort_by(|a, b| key(a).cmp(&key(b)));
    Ok(records)
}

/// Exclusive prefix sums.
pub fn prefix_sum(cluster: &mut MachineCluster, values: &[u64]) -> Vec<u64> {
    let per = spread(cluster, values.len());
    let cost = cluster.config().prefix_round_cost;
    cluster.charge_rounds("prefix-sum", cost, per, per);
    let mut acc = 0u64;
    values
        .iter()
        .map(|&x| {
            let out = acc;
            acc += x;
            out
        })
        .collect()
}

/// Answers every query with the payload of the special record carrying the
/// same key, or `None`. With repeated special keys the first one wins.
pub fn search_tree_broadcast<K, V>(cluster: &mut MachineCluster, specials: Vec<(K, V)>, queries: &[K]) -> Vec<Option<V>>
where
    K: Ord + Sync,
    V: Clone + Send + Sync,
{
    let per = spread(cluster, specials.len() + queries.len());
    let cost = cluster.config().search_round_cost;
    cluster.charge_rounds("search-tree", cost, per, per);
    let mut tree = specials;
    tree.sort_by(|a, b| a.0.cmp(&b.0));
    tree.dedup_by(|later, first| later.0 == first.0);
    queries
        .par_iter()
        .map(|q| tree.binary_search_by(|(k, _)| k.cmp(q)).ok().map(|i| tree[i].1.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::MpcConfig;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use std::collections::HashMap;

    fn cluster() -> MachineCluster {
        MachineCluster::new(MpcConfig::default(), 1000, 100_000)
    }

    #[test]
    fn sort_examples() {
        let mut c = cluster();
        let out = distributed_sort(&mut c, Vec::<u32>::new(), |x| *x, |_| 1).unwrap();
        assert!(out.is_empty());
        assert_eq!(c.log().rounds_executed, 1);
        let out = distributed_sort(&mut c, vec![1, 2, 3], |x| *x, |_| 1).unwrap();
        assert_eq!(out, vec![1, 2, 3]);
        assert_eq!(c.log().rounds_executed, 2);
    }

    #[test]
    fn sort_matches_reference_and_is_stable() {
        let mut c = cluster();
        let mut r = crate::rng::stream(5, &[]);
        let mut recs: Vec<(u32, usize)> = (0..100_000).map(|i| (r.gen_range(0..1000), i)).collect();
        recs.shuffle(&mut r);
        let mut reference = recs.clone();
        reference.sort_by_key(|x| x.0);
        let out = distributed_sort(&mut c, recs, |x| x.0, |_| 2).unwrap();
        assert_eq!(out, reference);
    }

    #[test]
    fn oversized_record_is_a_violation() {
        let mut c = cluster();
        let s = c.local_memory_words();
        assert!(distributed_sort(&mut c, vec![0u8], |x| *x, |_| s + 1).is_err());
    }

    #[test]
    fn prefix_examples() {
        let mut c = cluster();
        assert_eq!(prefix_sum(&mut c, &[1, 1, 1]), vec![0, 1, 2]);
        assert!(prefix_sum(&mut c, &[]).is_empty());
        let mut r = crate::rng::stream(9, &[]);
        let xs: Vec<u64> = (0..10_000).map(|_| r.gen_range(0..1_000_000)).collect();
        let got = prefix_sum(&mut c, &xs);
        let mut acc = 0;
        for (i, x) in xs.iter().enumerate() {
            assert_eq!(got[i], acc);
            acc += x;
        }
    }

    #[test]
    fn search_examples() {
        let mut c = cluster();
        let got = search_tree_broadcast(&mut c, vec![(4u32, "S")], &[4, 4, 4]);
        assert_eq!(got, vec![Some("S"); 3]);
        let got: Vec<Option<u8>> = search_tree_broadcast(&mut c, vec![], &[1u32, 2]);
        assert_eq!(got, vec![None, None]);

        let mut r = crate::rng::stream(11, &[]);
        let specials: Vec<(u32, u64)> = (0..1000).map(|i| (i * 7, r.gen())).collect();
        let queries: Vec<u32> = (0..10_000).map(|_| r.gen_range(0..7000)).collect();
        let join: HashMap<u32, u64> = specials.iter().copied().collect();
        let got = search_tree_broadcast(&mut c, specials, &queries);
        for (q, a) in queries.iter().zip(got) {
            assert_eq!(a, join.get(q).copied());
        }
    }
}
