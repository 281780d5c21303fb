use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::alternating::LayeredPath;
use super::layered::Part;
use crate::error::{Error, Result};
use crate::graph::{gain_unchecked, AlternatingWalk, BMatching, CopyVertex, Graph, WalkStep, Weight};

/// A walk in the base graph together with the copies it occupies.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExtractedWalk {
    pub walk: AlternatingWalk,
    /// Sorted, deduplicated copies visited by the walk.
    pub footprint: Vec<CopyVertex>,
    pub gain: Weight,
    pub cycle: bool,
}

impl ExtractedWalk {
    fn new(g: &Graph, walk: AlternatingWalk, copies: impl IntoIterator<Item = CopyVertex>, cycle: bool) -> Self {
        let mut footprint: Vec<CopyVertex> = copies.into_iter().collect();
        footprint.sort();
        footprint.dedup();
        let gain = gain_unchecked(&walk, g);
        ExtractedWalk { walk, footprint, gain, cycle }
    }

    pub fn conflicts_with(&self, other: &ExtractedWalk) -> bool {
        let mut i = 0;
        let mut j = 0;
        while i < self.footprint.len() && j < other.footprint.len() {
            match self.footprint[i].cmp(&other.footprint[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        let mine: BTreeSet<usize> = self.walk.edge_ids().collect();
        other.walk.edge_ids().any(|e| mine.contains(&e))
    }
}

fn is_free(m: &BMatching, c: CopyVertex) -> bool {
    c.index > m.degree(c.base as usize)
}

/// Maps a layered path down to the base graph.
///
/// Every appearance of `v` on side `H` (or `T`) is identified with one copy
/// of `v`: a free copy if the path has one, else the smallest index. The
/// resulting walk is split into alternating cycles, closed as soon as a
/// vertex repeats, and one remaining path. Cycles come first.
pub fn extract_alternations(g: &Graph, m: &BMatching, path: &LayeredPath) -> Result<Vec<ExtractedWalk>> {
    if path.nodes.len() != path.edges.len() + 1 {
        return Err(Error::MalformedWalk("layered path has mismatched node and edge counts".into()));
    }
    if let (Some(&(_, first)), Some(&(_, last))) = (path.edges.first(), path.edges.last()) {
        let (s, t) = (path.nodes[0].copy, path.nodes.last().unwrap().copy);
        if (!first && !is_free(m, s)) || (!last && !is_free(m, t)) {
            return Err(Error::Precondition("an endpoint on an unmatched edge is not a free copy".into()));
        }
    }

    let mut idx: BTreeMap<(u32, Part), CopyVertex> = BTreeMap::new();
    for n in &path.nodes {
        let key = (n.copy.base, n.part);
        let better = |old: &CopyVertex| (!is_free(m, n.copy), n.copy.index) < (!is_free(m, *old), old.index);
        if idx.get(&key).is_none_or(better) {
            idx.insert(key, n.copy);
        }
    }
    let mapped: Vec<(u32, Part)> = path.nodes.iter().map(|n| (n.copy.base, n.part)).collect();

    let step = |i: usize| {
        let (e, matched) = path.edges[i];
        WalkStep { edge: e, from: mapped[i].0 as usize, to: mapped[i + 1].0 as usize, matched }
    };

    // Stack of (node position, index of the edge that entered it).
    let mut stack: Vec<(usize, Option<usize>)> = vec![(0, None)];
    let mut at: BTreeMap<(u32, Part), usize> = BTreeMap::from([(mapped[0], 0)]);
    let mut out = vec![];
    for i in 1..mapped.len() {
        if let Some(&slot) = at.get(&mapped[i]) {
            let popped: Vec<(usize, Option<usize>)> = stack.drain(slot + 1..).collect();
            let mut steps: Vec<WalkStep> = popped.iter().map(|&(_, e)| step(e.unwrap())).collect();
            steps.push(step(i - 1));
            for (p, _) in &popped {
                at.remove(&mapped[*p]);
            }
            let copies = popped.iter().map(|&(p, _)| p).chain([stack[slot].0]).map(|p| idx[&mapped[p]]);
            out.push(ExtractedWalk::new(g, AlternatingWalk::from_steps(steps), copies, true));
        } else {
            at.insert(mapped[i], stack.len());
            stack.push((i, Some(i - 1)));
        }
    }
    if stack.len() > 1 {
        let steps: Vec<WalkStep> = stack[1..].iter().map(|&(_, e)| step(e.unwrap())).collect();
        let mut walk = AlternatingWalk::from_steps(steps);
        walk.start = Some(idx[&mapped[stack[0].0]]);
        walk.end = Some(idx[&mapped[stack.last().unwrap().0]]);
        let copies: Vec<CopyVertex> = stack.iter().map(|&(p, _)| idx[&mapped[p]]).collect();
        out.push(ExtractedWalk::new(g, walk, copies, false));
    }
    Ok(out)
}

/// Asserts the three extraction properties plus agreement with `m`.
pub fn check_extraction(g: &Graph, m: &BMatching, walks: &[ExtractedWalk]) -> Result<()> {
    let open: Vec<&ExtractedWalk> = walks.iter().filter(|w| !w.cycle).collect();
    if open.len() > 1 {
        return Err(Error::MalformedWalk(format!("{} walks are not cycles", open.len())));
    }
    for w in walks {
        w.walk.check_against(g, m)?;
        if !w.walk.has_distinct_edges() {
            return Err(Error::MalformedWalk("an edge repeats inside a walk".into()));
        }
        if w.cycle {
            let steps = &w.walk.steps;
            if !w.walk.is_closed() || steps.len() % 2 != 0 || steps[0].matched == steps[steps.len() - 1].matched {
                return Err(Error::MalformedWalk("a cycle is not closed, even and alternating".into()));
            }
        }
    }
    if let Some(p) = open.first() {
        let steps = &p.walk.steps;
        let (s, t) = (p.walk.start, p.walk.end);
        let end_ok = |c: Option<CopyVertex>, v: usize, matched: bool| {
            matched || c.is_some_and(|c| c.base as usize == v && is_free(m, c))
        };
        let first = steps[0];
        let last = steps[steps.len() - 1];
        if !end_ok(s, first.from, first.matched) || !end_ok(t, last.to, last.matched) {
            return Err(Error::MalformedWalk("an endpoint is neither free nor on a matched edge".into()));
        }
        if !first.matched && !last.matched && s == t {
            return Err(Error::MalformedWalk("both free endpoints are the same copy".into()));
        }
    }
    Ok(())
}
