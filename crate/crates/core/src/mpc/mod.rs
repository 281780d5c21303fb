//! In-process simulation of the MPC model.
//!
//! A [`MachineCluster`] owns the configuration and a [`RoundLog`]. Algorithms
//! charge rounds and memory to it through the primitives in this module and
//! the BSP harness in [`harness`].

pub mod harness;
pub mod partition;
pub mod primitives;

use serde::{Deserialize, Serialize};

pub use harness::{run_machine_rounds, MachineProgram, StepOutcome};
pub use partition::{partition_edge_list, partition_vertices, VertexPartition};
pub use primitives::{distributed_sort, prefix_sum, search_tree_broadcast};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    /// Number of machines; 0 picks the smallest count whose global memory
    /// holds `working_set_factor` times the input.
    pub machines: usize,
    pub working_set_factor: usize,
    /// `S = ceil(local_mem_factor * n * log2(n)^2)` words per machine.
    pub local_mem_factor: f64,
    /// Lower bound on `S`, so that tiny inputs are not starved by the
    /// polylogarithmic formula.
    pub min_local_words: usize,
    pub seed: u64,
    pub sort_round_cost: u64,
    pub prefix_round_cost: u64,
    pub search_round_cost: u64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            machines: 0,
            working_set_factor: 2,
            local_mem_factor: 1.0,
            min_local_words: 4096,
            seed: 0,
            sort_round_cost: 1,
            prefix_round_cost: 1,
            search_round_cost: 1,
        }
    }
}

impl MpcConfig {
    pub fn with_seed(seed: u64) -> Self {
        MpcConfig { seed, ..Default::default() }
    }

    pub fn local_words_for(&self, n: usize) -> usize {
        let lg = (n.max(2) as f64).log2();
        let s = (self.local_mem_factor * n as f64 * lg * lg).ceil();
        (s as usize).max(self.min_local_words)
    }
}

pub const ROUND_DETAIL_LIMIT: usize = 256;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RoundStat {
    pub label: String,
    pub max_sent: usize,
    pub max_received: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RoundLog {
    pub rounds_executed: u64,
    /// Per-round traffic for the first [`ROUND_DETAIL_LIMIT`] rounds.
    pub rounds: Vec<RoundStat>,
    pub peak_sent: usize,
    pub peak_received: usize,
    /// Peak resident words per machine index ever used.
    pub peak_resident: Vec<usize>,
    pub violations: Vec<String>,
    /// Iterations of the outer tight-solution loop, when one ran.
    pub lp_iterations: Vec<usize>,
}

impl RoundLog {
    pub fn max_peak(&self) -> usize {
        self.peak_resident.iter().copied().max().unwrap_or(0)
    }

    pub fn max_traffic(&self) -> usize {
        self.peak_sent.max(self.peak_received)
    }
}

#[derive(Clone, Debug)]
pub struct MachineCluster {
    config: MpcConfig,
    machines: usize,
    local_words: usize,
    log: RoundLog,
}

impl MachineCluster {
    /// Cluster sized for an input with `n` vertices and `input_words` words.
    pub fn new(config: MpcConfig, n: usize, input_words: usize) -> Self {
        let local_words = config.local_words_for(n);
        let machines = if config.machines == 0 {
            input_words.saturating_mul(config.working_set_factor.max(1)).div_ceil(local_words).max(1)
        } else {
            config.machines
        };
        let mut c = MachineCluster { config, machines, local_words, log: RoundLog::default() };
        if machines.saturating_mul(local_words) < input_words {
            c.log.violations.push(format!(
                "global memory {} x {} words cannot hold the {} word input",
                machines, local_words, input_words
            ));
        }
        c
    }

    pub fn for_graph(config: MpcConfig, g: &crate::graph::Graph) -> Self {
        Self::new(config, g.n(), g.words())
    }

    pub fn config(&self) -> &MpcConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn machine_count(&self) -> usize {
        self.machines
    }

    pub fn local_memory_words(&self) -> usize {
        self.local_words
    }

    pub fn global_budget(&self) -> usize {
        self.machines * self.local_words
    }

    pub fn log(&self) -> &RoundLog {
        &self.log
    }

    pub fn take_log(&mut self) -> RoundLog {
        std::mem::take(&mut self.log)
    }

    /// Adds another cluster's accounting (used when work ran on a child cluster).
    pub fn absorb(&mut self, other: RoundLog) {
        self.log.rounds_executed += other.rounds_executed;
        let room = ROUND_DETAIL_LIMIT.saturating_sub(self.log.rounds.len());
        self.log.rounds.extend(other.rounds.into_iter().take(room));
        self.log.peak_sent = self.log.peak_sent.max(other.peak_sent);
        self.log.peak_received = self.log.peak_received.max(other.peak_received);
        for (i, p) in other.peak_resident.into_iter().enumerate() {
            self.note_resident(i, p);
        }
        self.log.violations.extend(other.violations);
        self.log.lp_iterations.extend(other.lp_iterations);
    }

    /// A fresh cluster with the same configuration and a derived seed.
    pub fn child(&self, tag: &[u64], n: usize, input_words: usize) -> MachineCluster {
        let mut cfg = self.config.clone();
        cfg.seed = crate::rng::derive(self.config.seed, tag);
        cfg.machines = 0;
        MachineCluster::new(cfg, n, input_words)
    }

    pub fn charge_rounds(&mut self, label: &str, rounds: u64, max_sent: usize, max_received: usize) {
        self.log.rounds_executed += rounds;
        for _ in 0..rounds {
            if self.log.rounds.len() >= ROUND_DETAIL_LIMIT {
                break;
            }
            self.log.rounds.push(RoundStat { label: label.to_string(), max_sent, max_received });
        }
        self.log.peak_sent = self.log.peak_sent.max(max_sent);
        self.log.peak_received = self.log.peak_received.max(max_received);
        let s = self.local_words;
        if max_sent > s || max_received > s {
            self.log.violations.push(format!(
                "{label}: traffic {} words exceeds local memory {s}",
                max_sent.max(max_received)
            ));
        }
    }

    pub fn note_resident(&mut self, machine: usize, words: usize) {
        if self.log.peak_resident.len() <= machine {
            self.log.peak_resident.resize(machine + 1, 0);
        }
        if words > self.log.peak_resident[machine] {
            self.log.peak_resident[machine] = words;
        }
        if words > self.local_words {
            self.log.violations.push(format!(
                "machine {machine} holds {words} words, above local memory {}",
                self.local_words
            ));
        }
    }

    pub fn record_iterations(&mut self, iterations: usize) {
        self.log.lp_iterations.push(iterations);
    }

    pub fn check(&self) -> Result<()> {
        match self.log.violations.first() {
            Some(v) => Err(Error::ModelViolation(v.clone())),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_machine_count_covers_input() {
        let c = MachineCluster::new(MpcConfig::default(), 1000, 1_000_000);
        assert!(c.global_budget() >= 1_000_000);
        assert!(c.log().violations.is_empty());
    }

    #[test]
    fn undersized_cluster_is_flagged() {
        let cfg = MpcConfig { machines: 1, min_local_words: 1, local_mem_factor: 0.01, ..Default::default() };
        let c = MachineCluster::new(cfg, 10, 1_000_000);
        assert!(c.check().is_err());
    }

    #[test]
    fn resident_peaks_are_tracked() {
        let mut c = MachineCluster::new(MpcConfig::default(), 10, 10);
        c.note_resident(2, 7);
        c.note_resident(2, 5);
        assert_eq!(c.log().peak_resident, vec![0, 0, 7]);
        c.note_resident(0, c.local_memory_words() + 1);
        assert!(c.check().is_err());
    }
}
