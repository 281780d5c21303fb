//! (1+eps)-approximate weighted b-matching.
//!
//! Every phase splits the copies into `H` and `T`, orients the unmatched
//! edges and, for each weight class `W = (1 + eps^4)^i`, draws threshold
//! sequences, builds the weighted layered graph, matches it with the
//! unweighted engine and follows alternating paths through all layers.
//! The walks extracted from those paths are made disjoint within and
//! across classes and the best residue group is applied.

mod alternating;
mod extract;
mod layered;
mod resolve;
mod thresholds;

use std::collections::BTreeSet;

use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

pub use alternating::{
    alg_alternating, alg_layered_matching, complete_paths, compress_inner, endpoints_are_free, random_layered_path,
    AlternatingPaths,
    Compressed, CopyEdge, LNode, LayeredPath, PathSearch,
};
pub use extract::{check_extraction, extract_alternations, ExtractedWalk};
pub use layered::{
    bipartite_split, build_weighted_layered, class_index_for, orient_unmatched, weight_classes, CopySides,
    HashOrientation, LayeredMatched, LayeredUnmatched, OrientationSource, Part, StoredOrientation, WeightClass,
    WeightedLayeredGraph,
};
pub use resolve::{resolve_between, resolve_within, resolve_within_best, total_gain, BetweenOutcome};
pub use thresholds::{
    class_period, enumerate_thresholds, exact_eps, sample_thresholds, to_big, validate_thresholds, ThresholdGrid,
    ThresholdSequences,
};

use crate::error::{Error, Result};
use crate::graph::{apply_walks, AlternatingWalk, BMatching, BudgetVector, Graph, Weight};
use crate::lp::ceil_log2;
use crate::mpc::MachineCluster;
use crate::rng;
use crate::unweighted::{distribute_matched_edges, UnweightedParams};

const TAG_REPEAT: u64 = 0x7772_6570;
const TAG_SIDES: u64 = 0x7369_6465;
const TAG_ORIENT: u64 = 0x6f72_6965;
const TAG_CLASS: u64 = 0x636c_6173;

#[derive(Clone, Debug, Serialize)]
pub struct WeightedParams {
    pub eps: f64,
    /// Windows are `[eps^p * q * scale, (1 + eps^p) * q * scale]`.
    pub window_power: u32,
    pub max_layers: usize,
    pub phase_budget: usize,
    /// Stop after this many consecutive phases without a gain.
    pub stall_limit: usize,
    /// Threshold draws per weight class and phase.
    pub class_repetitions: usize,
    /// Independent restarts; `None` = `ceil(log2 n)`.
    pub repetitions: Option<usize>,
    /// Probability that a layered path is considered; `None` = `eps^9 / 2`.
    pub keep_probability: Option<f64>,
    /// Independent coin draws in within-class resolution; the best is kept.
    pub resolve_trials: usize,
    pub threshold_attempts: usize,
    /// Parameters of the unweighted engine run on each layered graph.
    pub unweighted: UnweightedParams,
}

impl Default for WeightedParams {
    fn default() -> Self {
        WeightedParams {
            eps: 0.5,
            window_power: 2,
            max_layers: 3,
            phase_budget: 64,
            stall_limit: 48,
            class_repetitions: 1,
            repetitions: None,
            keep_probability: None,
            resolve_trials: 4096,
            threshold_attempts: 32,
            unweighted: UnweightedParams {
                repetitions: Some(1),
                phase_budget: 16,
                stall_limit: 4,
                ..UnweightedParams::default()
            },
        }
    }
}

impl WeightedParams {
    pub fn keep(&self) -> f64 {
        self.keep_probability.unwrap_or_else(|| self.eps.powi(9) / 2.0)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct WeightedPhaseTrace {
    pub phase: usize,
    pub classes_built: usize,
    pub paths_found: usize,
    pub complete_paths: usize,
    pub walks_retained: usize,
    pub gain_retained: Weight,
    pub j_star: usize,
    pub walks_applied: usize,
    pub weight_after: Weight,
    pub rounds: u64,
    pub peak_words: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightedOutcome {
    #[serde(skip)]
    pub matching: BMatching,
    pub weight: Weight,
    pub size: usize,
    /// Residue period of the weight classes.
    pub t: usize,
    pub classes: Vec<usize>,
    pub best_repetition: usize,
    pub repetition_weights: Vec<Weight>,
    /// Matching weight after every applied batch in the best repetition.
    pub weight_history: Vec<Weight>,
    pub phases: Vec<WeightedPhaseTrace>,
}

/// Best of `R` independent runs started from the empty matching.
pub fn weighted_one_plus_eps(
    g: &Graph,
    b: &BudgetVector,
    cluster: &mut MachineCluster,
    params: &WeightedParams,
) -> Result<WeightedOutcome> {
    b.check_for(g)?;
    let reps = params.repetitions.unwrap_or_else(|| ceil_log2(g.n()).max(1)).max(1);
    let mut best: Option<(usize, WeightedOutcome)> = None;
    let mut weights = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut child = cluster.child(&[TAG_REPEAT, rep as u64], g.n(), g.words());
        let res = weighted_augment_from(g, b, BMatching::empty(g.n()), &mut child, params);
        cluster.absorb(child.take_log());
        let out = res?;
        weights.push(out.weight);
        if best.as_ref().is_none_or(|(_, o)| out.weight > o.weight) {
            best = Some((rep, out));
        }
    }
    let (rep, mut out) = best.expect("at least one repetition");
    out.best_repetition = rep;
    out.repetition_weights = weights;
    Ok(out)
}

struct ClassResult {
    built: bool,
    paths_found: usize,
    complete: usize,
    walks: Vec<ExtractedWalk>,
    rounds: u64,
    words: usize,
    log: crate::mpc::RoundLog,
}

/// Augmentation phases from `start` until the phase budget or the stall
/// limit runs out.
pub fn weighted_augment_from(
    g: &Graph,
    b: &BudgetVector,
    start: BMatching,
    cluster: &mut MachineCluster,
    params: &WeightedParams,
) -> Result<WeightedOutcome> {
    b.check_for(g)?;
    if !start.is_valid_for(g, b) {
        return Err(Error::InvalidMatching("start is not a valid b-matching".into()));
    }
    if (0..g.m()).any(|e| g.weight(e) <= Weight::zero()) {
        return Err(Error::Precondition("edge weights must be positive".into()));
    }
    let grid = ThresholdGrid::new(params.eps)?;
    let t = class_period(params.eps)?;
    let classes = weight_classes(g, &grid, params.max_layers, params.window_power);
    let keep = params.keep();
    let seed = cluster.seed();

    let mut m = start;
    let mut out = WeightedOutcome {
        matching: BMatching::empty(g.n()),
        weight: m.weight(g),
        size: 0,
        t,
        classes: classes.iter().map(|c| c.index).collect(),
        best_repetition: 0,
        repetition_weights: vec![],
        weight_history: vec![m.weight(g)],
        phases: vec![],
    };
    let mut stall = 0;
    for phase in 0..params.phase_budget {
        let assignment = distribute_matched_edges(g, b, &m, cluster)?;
        let sides = bipartite_split(b, &mut rng::stream(seed, &[TAG_SIDES, phase as u64]));
        let orientation = orient_unmatched(g, &m, &StoredOrientation::random(g, rng::derive(seed, &[TAG_ORIENT, phase as u64])));
        let a_values: Vec<Vec<u64>> = classes.iter().map(|c| candidates(g, c, m.iter())).collect();
        let b_values: Vec<Vec<u64>> = classes.iter().map(|c| candidates(g, c, (0..g.m()).filter(|&e| !m.contains(e)))).collect();

        let results: Vec<Result<ClassResult>> = classes
            .par_iter()
            .enumerate()
            .map(|(ci, class)| {
                let mut best: Option<ClassResult> = None;
                for rep in 0..params.class_repetitions.max(1) {
                    let tag = [TAG_CLASS, phase as u64, class.index as u64, rep as u64];
                    let mut r = rng::stream(seed, &tag);
                    let Some(tau) =
                        sample_thresholds(&grid, &a_values[ci], &b_values[ci], params.max_layers, params.threshold_attempts, &mut r)
                    else {
                        continue;
                    };
                    let layered = build_weighted_layered(g, b, &m, &assignment, &sides, &orientation, class, &tau);
                    let res = run_class(g, &m, &grid, class, &layered, cluster, &tag, params, keep, &mut r)?;
                    if best.as_ref().is_none_or(|x| total_gain(&res.walks) > total_gain(&x.walks)) {
                        best = Some(res);
                    }
                }
                Ok(best.unwrap_or(ClassResult {
                    built: false,
                    paths_found: 0,
                    complete: 0,
                    walks: vec![],
                    rounds: 0,
                    words: 0,
                    log: Default::default(),
                }))
            })
            .collect();

        let mut trace = WeightedPhaseTrace { phase, ..Default::default() };
        let mut per_class = vec![];
        for (class, res) in classes.iter().zip(results) {
            let res = res?;
            trace.classes_built += res.built as usize;
            trace.paths_found += res.paths_found;
            trace.complete_paths += res.complete;
            trace.walks_retained += res.walks.len();
            trace.gain_retained += total_gain(&res.walks);
            trace.rounds = trace.rounds.max(res.rounds);
            trace.peak_words = trace.peak_words.max(res.words);
            cluster.absorb(res.log);
            if !res.walks.is_empty() {
                per_class.push((class.index, res.walks));
            }
        }
        let between = resolve_between(&per_class, t);
        let footprint_words: usize = per_class.iter().flat_map(|(_, w)| w).map(|w| w.footprint.len() + w.walk.len()).sum();
        cluster.charge_rounds("resolve-between", 2, footprint_words, footprint_words);
        trace.j_star = between.j_star;
        trace.walks_applied = between.walks.len();

        let before = m.weight(g);
        if !between.walks.is_empty() {
            let walks: Vec<AlternatingWalk> = between.walks.iter().map(|w| w.walk.clone()).collect();
            let next = apply_walks(&m, &walks, g, b)?;
            let expected = before + total_gain(&between.walks);
            if !next.is_valid_for(g, b) || next.weight(g) != expected {
                return Err(Error::InvalidAugmentation("applied weight change differs from the sum of gains".into()));
            }
            m = next;
            out.weight_history.push(m.weight(g));
        }
        trace.weight_after = m.weight(g);
        out.phases.push(trace);
        if m.weight(g) > before {
            stall = 0;
        } else {
            stall += 1;
            if stall >= params.stall_limit {
                break;
            }
        }
    }
    out.weight = m.weight(g);
    out.size = m.len();
    out.matching = m;
    Ok(out)
}

fn candidates(g: &Graph, class: &WeightClass, edges: impl Iterator<Item = usize>) -> Vec<u64> {
    let set: BTreeSet<u64> = edges.filter_map(|e| class.candidate(g, e)).collect();
    set.into_iter().collect()
}

#[allow(clippy::too_many_arguments)]
fn run_class<R: rand::Rng>(
    g: &Graph,
    m: &BMatching,
    grid: &ThresholdGrid,
    class: &WeightClass,
    layered: &WeightedLayeredGraph,
    cluster: &MachineCluster,
    tag: &[u64],
    params: &WeightedParams,
    keep: f64,
    r: &mut R,
) -> Result<ClassResult> {
    let words = layered.words();
    let mut res = ClassResult { built: true, paths_found: 0, complete: 0, walks: vec![], rounds: 0, words, log: Default::default() };
    if layered.is_empty() || layered.unmatched.is_empty() {
        return Ok(res);
    }
    let nodes = 2 * g.n() * layered.layers();
    let mut child = cluster.child(tag, nodes, words.max(1));
    let found = alg_layered_matching(layered, &mut child, &params.unweighted).and_then(|mp| complete_paths(layered, &mp));
    let search = match found {
        Ok(s) => s,
        Err(e) => {
            res.log = child.take_log();
            return Err(e);
        }
    };
    child.charge_rounds("alternating", search.rounds as u64, 2 * search.started, 2 * search.started);
    res.paths_found = search.started;
    res.complete = search.paths.len();
    res.rounds = child.log().rounds_executed;

    let floor = &grid.unit * &class.weight;
    let ceiling = &class.weight * to_big(Weight::from(2));
    let mut sets = Vec::with_capacity(search.paths.len());
    for p in &search.paths {
        let walks = extract_alternations(g, m, p)?;
        check_extraction(g, m, &walks)?;
        sets.push(walks.into_iter().filter(|w| to_big(w.gain) >= floor).collect::<Vec<_>>());
    }
    res.walks = resolve_within_best(&sets, keep, params.resolve_trials, r);
    let footprint: usize = res.walks.iter().map(|w| w.footprint.len()).sum();
    child.charge_rounds("resolve-within", 2, footprint, footprint);
    for w in &res.walks {
        if to_big(w.gain) > ceiling {
            return Err(Error::InvalidAugmentation(format!(
                "walk gain {} exceeds twice the class weight {}",
                w.gain,
                class.weight.to_f64().unwrap_or(f64::NAN)
            )));
        }
    }
    res.log = child.take_log();
    Ok(res)
}
