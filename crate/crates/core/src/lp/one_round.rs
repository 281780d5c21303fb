//! Round-compressed simulation of the doubling process.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::sequential::initial_values;
use super::{machines_for, LpInstance, LpParams, ThresholdSchedule};
use crate::error::Result;
use crate::fixed::Fixed;
use crate::graph::Graph;
use crate::mpc::{partition_edge_list, run_machine_rounds, MachineCluster, MachineProgram, StepOutcome, VertexPartition};

#[derive(Clone, Debug, Serialize)]
pub struct OneRoundOutcome {
    /// Output after the feasibility filter.
    pub x: Vec<Fixed>,
    /// `x~_{e,T}` before the filter.
    pub x_unfiltered: Vec<Fixed>,
    pub machines: usize,
    pub rounds: usize,
    pub bad_vertices: usize,
}

/// One compression step on the whole graph of `inst`.
pub fn one_round_mpc(
    inst: &LpInstance,
    cluster: &mut MachineCluster,
    thresholds: &ThresholdSchedule,
    params: &LpParams,
) -> Result<OneRoundOutcome> {
    let g = inst.graph;
    let view: Vec<u32> = (0..g.m() as u32).collect();
    let caps: Vec<Fixed> = (0..g.m()).map(|e| inst.cap(e)).collect();
    run_one_round_view(g, &view, &inst.b, &caps, cluster, thresholds, params.one_round_divisor)
}

/// `T = floor(log2(N) / divisor)`.
pub fn compressed_rounds(machines: usize, divisor: u32) -> usize {
    (machines.max(1).ilog2() / divisor.max(1)) as usize
}

struct LocalSimulation<'a> {
    g: &'a Graph,
    view: &'a [u32],
    part: &'a VertexPartition,
    members: Vec<Vec<u32>>,
    x0: &'a [Fixed],
    b: &'a [Fixed],
    caps: &'a [Fixed],
    sched: &'a ThresholdSchedule,
    rounds: usize,
}

impl LocalSimulation<'_> {
    /// Last round in which each member vertex is active, by member order.
    fn simulate(&self, machine: usize) -> Vec<u32> {
        let verts = &self.members[machine];
        let local = &self.part.local_edges[machine];
        let pos = |v: usize| verts.binary_search(&(v as u32)).expect("local endpoint");
        let mut x: Vec<Fixed> = local.iter().map(|&i| self.x0[i as usize]).collect();
        let ends: Vec<(usize, usize)> = local
            .iter()
            .map(|&i| {
                let (u, v) = self.g.endpoints(self.view[i as usize] as usize);
                (pos(u), pos(v))
            })
            .collect();
        let mut y = vec![Fixed::ZERO; verts.len()];
        for (k, &(a, c)) in ends.iter().enumerate() {
            y[a] += x[k];
            y[c] += x[k];
        }
        let scale = self.part.machines as u128;
        let mut alive = vec![true; verts.len()];
        let mut last = vec![0u32; verts.len()];
        for t in 1..=self.rounds {
            for (j, &v) in verts.iter().enumerate() {
                if !alive[j] {
                    continue;
                }
                let v = v as usize;
                if y[j].mul_int(scale) <= self.sched.value(self.b[v], v, t) {
                    last[j] = t as u32;
                } else {
                    alive[j] = false;
                }
            }
            for (k, &(a, c)) in ends.iter().enumerate() {
                let cap = self.caps[local[k] as usize];
                if alive[a] && alive[c] && x[k].double() <= cap {
                    let old = x[k];
                    x[k] = old.double();
                    y[a] += old;
                    y[c] += old;
                }
            }
        }
        last
    }
}

impl MachineProgram for LocalSimulation<'_> {
    type State = ();
    type Msg = ();
    type Output = (u32, u32);

    fn machines(&self) -> usize {
        self.part.machines
    }

    fn init(&self, _machine: usize) {}

    fn resident_words(&self, _state: &()) -> usize {
        0
    }

    fn output_words(&self, _out: &(u32, u32)) -> usize {
        2
    }

    fn step(&self, machine: usize, _round: u64, _state: &mut (), _inbox: Vec<()>, _rng: &mut ChaCha8Rng) -> StepOutcome<(), (u32, u32)> {
        let last = self.simulate(machine);
        StepOutcome {
            send: Vec::new(),
            emit: self.members[machine].iter().copied().zip(last).collect(),
            halt: true,
        }
    }
}

pub(crate) fn run_one_round_view(
    g: &Graph,
    view: &[u32],
    b: &[Fixed],
    caps: &[Fixed],
    cluster: &mut MachineCluster,
    sched: &ThresholdSchedule,
    divisor: u32,
) -> Result<OneRoundOutcome> {
    let n = g.n();
    let machines = machines_for(n, view.len());
    let rounds = compressed_rounds(machines, divisor);
    let x0 = initial_values(g, view, b, caps);
    let pairs: Vec<(u32, u32)> = view.iter().map(|&e| g.pairs()[e as usize]).collect();
    let seed = crate::rng::derive(cluster.seed(), &[0x6f6e_6572, view.len() as u64]);
    let part = partition_edge_list(cluster, n, &pairs, machines, seed);
    drop(pairs);
    let mut members = vec![Vec::new(); machines];
    for v in 0..n {
        members[part.machine_of(v)].push(v as u32);
    }
    let program = LocalSimulation { g, view, part: &part, members, x0: &x0, b, caps, sched, rounds };
    let run = run_machine_rounds(cluster, &program, 4)?;
    let mut last = vec![0u32; n];
    for out in run.outputs {
        for (v, t) in out {
            last[v as usize] = t;
        }
    }
    // Each edge learns its endpoints' last active rounds by a search-tree
    // lookup, then vertex sums are aggregated by a sort.
    let per = (2 * view.len() + n).div_ceil(cluster.machine_count());
    let search_cost = cluster.config().search_round_cost;
    cluster.charge_rounds("search-tree", search_cost, per, per);
    let mut x_unfiltered = x0;
    for (i, &e) in view.iter().enumerate() {
        let (u, v) = g.endpoints(e as usize);
        let live = last[u].min(last[v]);
        let mut val = x_unfiltered[i];
        for _ in 0..live {
            if val.double() <= caps[i] {
                val = val.double();
            } else {
                break;
            }
        }
        x_unfiltered[i] = val;
    }
    let mut y = vec![Fixed::ZERO; n];
    for (i, &e) in view.iter().enumerate() {
        let (u, v) = g.endpoints(e as usize);
        y[u] += x_unfiltered[i];
        y[v] += x_unfiltered[i];
    }
    let sort_cost = cluster.config().sort_round_cost;
    cluster.charge_rounds("sort", sort_cost, per, per);
    let bad: Vec<bool> = (0..n).map(|v| y[v] > b[v]).collect();
    let x = view
        .iter()
        .zip(&x_unfiltered)
        .map(|(&e, &xe)| {
            let (u, v) = g.endpoints(e as usize);
            if bad[u] || bad[v] {
                Fixed::ZERO
            } else {
                xe
            }
        })
        .collect();
    Ok(OneRoundOutcome { x, x_unfiltered, machines, rounds, bad_vertices: bad.iter().filter(|&&x| x).count() })
}
