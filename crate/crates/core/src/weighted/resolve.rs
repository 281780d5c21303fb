use std::collections::BTreeMap;

use num_traits::Zero;
use rand::Rng;
use serde::Serialize;

use super::extract::ExtractedWalk;
use crate::graph::{CopyVertex, Weight};

/// Indices of walks that share a copy or an edge with another walk in the
/// list. Found by sorting (key, walk) records, as a sort-based MPC step would.
fn conflicting(walks: &[&ExtractedWalk]) -> Vec<bool> {
    #[derive(PartialEq, Eq, PartialOrd, Ord, Clone, Copy)]
    enum Key {
        Copy(CopyVertex),
        Edge(usize),
    }
    let mut records: Vec<(Key, usize)> = vec![];
    for (i, w) in walks.iter().enumerate() {
        records.extend(w.footprint.iter().map(|&c| (Key::Copy(c), i)));
        let mut edges: Vec<usize> = w.walk.edge_ids().collect();
        edges.sort_unstable();
        edges.dedup();
        records.extend(edges.into_iter().map(|e| (Key::Edge(e), i)));
    }
    records.sort_unstable();
    let mut hit = vec![false; walks.len()];
    for pair in records.windows(2) {
        if pair[0].0 == pair[1].0 && pair[0].1 != pair[1].1 {
            hit[pair[0].1] = true;
            hit[pair[1].1] = true;
        }
    }
    hit
}

/// One round of within-class resolution. Each candidate set (the walks
/// extracted from one layered path) survives a coin with probability
/// `keep`; a survivor contributes its largest-gain walk (first on ties),
/// and every contributed walk that meets another one is dropped.
pub fn resolve_within<R: Rng>(candidates: &[Vec<ExtractedWalk>], keep: f64, rng: &mut R) -> Vec<ExtractedWalk> {
    let mut picked: Vec<&ExtractedWalk> = vec![];
    for set in candidates {
        let coin = rng.gen_bool(keep.clamp(0.0, 1.0));
        if !coin || set.is_empty() {
            continue;
        }
        let best = set.iter().fold(&set[0], |acc, w| if w.gain > acc.gain { w } else { acc });
        picked.push(best);
    }
    let hit = conflicting(&picked);
    picked.into_iter().zip(hit).filter(|(_, h)| !h).map(|(w, _)| w.clone()).collect()
}

/// Best of `trials` independent rounds of [`resolve_within`] by total gain;
/// the earliest trial wins ties.
pub fn resolve_within_best<R: Rng>(
    candidates: &[Vec<ExtractedWalk>],
    keep: f64,
    trials: usize,
    rng: &mut R,
) -> Vec<ExtractedWalk> {
    let mut best: Option<(Weight, Vec<ExtractedWalk>)> = None;
    for _ in 0..trials.max(1) {
        let out = resolve_within(candidates, keep, rng);
        let total = total_gain(&out);
        if best.as_ref().is_none_or(|(g, _)| total > *g) {
            best = Some((total, out));
        }
    }
    best.map(|(_, w)| w).unwrap_or_default()
}

pub fn total_gain(walks: &[ExtractedWalk]) -> Weight {
    walks.iter().fold(Weight::zero(), |acc, w| acc + w.gain)
}

#[derive(Clone, Debug, Serialize)]
pub struct BetweenOutcome {
    pub t: usize,
    pub j_star: usize,
    pub walks: Vec<ExtractedWalk>,
    /// Total gain per residue class `j`.
    pub gains: Vec<Weight>,
}

/// Groups the classes by index modulo `t`. Within a group a walk of class
/// `i` is kept when it shares no copy and no edge with any walk of a
/// heavier class in the group. Returns the group with the largest kept
/// gain, smallest `j` on ties.
pub fn resolve_between(classes: &[(usize, Vec<ExtractedWalk>)], t: usize) -> BetweenOutcome {
    let t = t.max(1);
    let mut groups: BTreeMap<usize, Vec<&(usize, Vec<ExtractedWalk>)>> = BTreeMap::new();
    for c in classes {
        groups.entry(c.0 % t).or_default().push(c);
    }
    let mut gains = vec![Weight::zero(); t];
    let mut kept: BTreeMap<usize, Vec<ExtractedWalk>> = BTreeMap::new();
    for (&j, members) in &mut groups {
        members.sort_by(|a, b| b.0.cmp(&a.0));
        let mut heavier: Vec<&ExtractedWalk> = vec![];
        let mut out = vec![];
        for (_, walks) in members.iter() {
            for w in walks {
                if heavier.iter().all(|h| !w.conflicts_with(h)) {
                    out.push(w.clone());
                }
            }
            heavier.extend(walks.iter());
        }
        gains[j] = total_gain(&out);
        kept.insert(j, out);
    }
    let mut j_star = 0;
    for j in 1..t {
        if gains[j] > gains[j_star] {
            j_star = j;
        }
    }
    BetweenOutcome { t, j_star, walks: kept.remove(&j_star).unwrap_or_default(), gains }
}
