//! Repeated compression until the solution is 0.05-tight.

use serde::Serialize;

use super::one_round::run_one_round_view;
use super::sequential::{run_view, History};
use super::{ceil_log2, loose_vertex_mask, vertex_sums, Alpha, LpInstance, LpParams, ThresholdSchedule};
use crate::error::{Error, Result};
use crate::fixed::Fixed;
use crate::mpc::MachineCluster;
use crate::rng;

const TAG_ITERATION: u64 = 0x6974_6572;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    OneRound,
    Sequential,
}

#[derive(Clone, Debug, Serialize)]
pub struct FullOutcome {
    pub x: Vec<Fixed>,
    pub iterations: usize,
    pub branches: Vec<Branch>,
    /// Active edges at the start of each iteration, plus the final count.
    pub active_counts: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<History>>,
}

pub fn default_iteration_cap(avg_degree: f64) -> usize {
    let lg = avg_degree.max(2.0).log2().max(2.0).log2().ceil() as usize;
    10 * lg + 20
}

pub fn full_mpc(inst: &LpInstance, cluster: &mut MachineCluster, params: &LpParams) -> Result<FullOutcome> {
    let g = inst.graph;
    let n = g.n();
    let m = g.m();
    let cap = params.iteration_cap.unwrap_or_else(|| default_iteration_cap(2.0 * m as f64 / n.max(1) as f64));
    let seq_rounds = params.sequential_rounds.unwrap_or(100 * ceil_log2(n).max(1));
    let seq_threshold =
        params.sequential_threshold.unwrap_or_else(|| cluster.local_memory_words().saturating_sub(n));
    let mut x = vec![Fixed::ZERO; m];
    let mut active: Vec<u32> = (0..m as u32).collect();
    let mut out = FullOutcome {
        x: Vec::new(),
        iterations: 0,
        branches: Vec::new(),
        active_counts: Vec::new(),
        history: params.trace.then(Vec::new),
    };
    while !active.is_empty() {
        if out.iterations >= cap {
            cluster.record_iterations(out.iterations);
            return Err(Error::NonConvergence { cap, active: active.len() });
        }
        out.iterations += 1;
        out.active_counts.push(active.len());
        let y = vertex_sums(g, &x);
        let b_rem: Vec<Fixed> = inst.b.iter().zip(&y).map(|(&b, &s)| b - s).collect();
        let r_rem: Vec<Fixed> = active.iter().map(|&e| inst.cap(e as usize) - x[e as usize]).collect();
        let sched = ThresholdSchedule::seeded(rng::derive(cluster.seed(), &[TAG_ITERATION, out.iterations as u64]));
        let delta = if active.len() > seq_threshold {
            out.branches.push(Branch::OneRound);
            run_one_round_view(g, &active, &b_rem, &r_rem, cluster, &sched, params.one_round_divisor)?.x
        } else {
            out.branches.push(Branch::Sequential);
            // Gather the active graph on one machine.
            let words = active.len() + n;
            cluster.charge_rounds("gather", 1, words, words);
            cluster.note_resident(0, words);
            let run = run_view(g, &active, &b_rem, &r_rem, seq_rounds, &sched, params.trace);
            if let (Some(all), Some(h)) = (out.history.as_mut(), run.history) {
                all.push(h);
            }
            run.x
        };
        for (i, &e) in active.iter().enumerate() {
            x[e as usize] += delta[i];
        }
        let y = vertex_sums(g, &x);
        let loose = loose_vertex_mask(inst, &y, Alpha::FIVE_HUNDREDTHS);
        active.retain(|&e| {
            let e = e as usize;
            let (u, v) = g.endpoints(e);
            loose[u] && loose[v] && x[e].lt_scaled(20, inst.cap(e), 1)
        });
        cluster.charge_rounds("aggregate", cluster.config().sort_round_cost, 0, 0);
    }
    out.active_counts.push(0);
    cluster.record_iterations(out.iterations);
    out.x = x;
    Ok(out)
}
