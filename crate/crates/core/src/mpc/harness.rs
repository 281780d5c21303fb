//! Bulk-synchronous execution of per-machine programs.
//!
//! Machines step in parallel within a round and only see messages sent in the
//! previous round. Each machine draws from its own stream keyed by
//! `(master seed, machine, round)`, and results are collected in machine
//! order, so outputs do not depend on the host thread count.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::MachineCluster;
use crate::error::{Error, Result};
use crate::rng;

pub struct StepOutcome<M, O> {
    /// Messages delivered at the start of the next round, as `(destination, message)`.
    pub send: Vec<(usize, M)>,
    /// Final results leaving the cluster.
    pub emit: Vec<O>,
    pub halt: bool,
}

impl<M, O> StepOutcome<M, O> {
    pub fn halt() -> Self {
        StepOutcome { send: Vec::new(), emit: Vec::new(), halt: true }
    }
}

pub trait MachineProgram: Sync {
    type State: Send;
    type Msg: Send;
    type Output: Send;

    fn machines(&self) -> usize;
    fn init(&self, machine: usize) -> Self::State;
    fn resident_words(&self, state: &Self::State) -> usize;
    fn msg_words(&self, _msg: &Self::Msg) -> usize {
        1
    }
    fn output_words(&self, _out: &Self::Output) -> usize {
        1
    }
    fn step(
        &self,
        machine: usize,
        round: u64,
        state: &mut Self::State,
        inbox: Vec<Self::Msg>,
        rng: &mut ChaCha8Rng,
    ) -> StepOutcome<Self::Msg, Self::Output>;
}

pub struct HarnessRun<S, O> {
    pub states: Vec<S>,
    /// Emitted outputs per machine, in emission order.
    pub outputs: Vec<Vec<O>>,
    pub rounds: u64,
}

/// Runs `program` until every machine halts with no messages in flight.
/// A round is charged whenever any machine sends or emits data.
pub fn run_machine_rounds<P: MachineProgram>(
    cluster: &mut MachineCluster,
    program: &P,
    max_rounds: u64,
) -> Result<HarnessRun<P::State, P::Output>> {
    let k = program.machines().max(1);
    let s = cluster.local_memory_words();
    let master = cluster.seed();
    let mut states: Vec<P::State> = (0..k).into_par_iter().map(|i| program.init(i)).collect();
    for (i, st) in states.iter().enumerate() {
        cluster.note_resident(i, program.resident_words(st));
    }
    let mut inboxes: Vec<Vec<P::Msg>> = (0..k).map(|_| Vec::new()).collect();
    let mut halted = vec![false; k];
    let mut outputs: Vec<Vec<P::Output>> = (0..k).map(|_| Vec::new()).collect();
    let mut rounds = 0u64;
    let mut step_no = 0u64;
    loop {
        if halted.iter().all(|&h| h) && inboxes.iter().all(Vec::is_empty) {
            break;
        }
        if step_no >= max_rounds.max(1) * 4 + 16 {
            return Err(Error::ModelViolation(format!("program did not halt within {max_rounds} rounds")));
        }
        let taken: Vec<Vec<P::Msg>> = inboxes.iter_mut().map(std::mem::take).collect();
        let outcomes: Vec<Option<StepOutcome<P::Msg, P::Output>>> = states
            .par_iter_mut()
            .zip(taken.into_par_iter())
            .enumerate()
            .map(|(i, (st, inbox))| {
                if halted[i] && inbox.is_empty() {
                    return None;
                }
                let mut r = rng::machine_stream(master, i, step_no);
                Some(program.step(i, step_no, st, inbox, &mut r))
            })
            .collect();
        step_no += 1;
        let mut sent = vec![0usize; k];
        let mut received = vec![0usize; k];
        for (i, out) in outcomes.iter().enumerate() {
            if let Some(o) = out {
                for (dest, m) in &o.send {
                    if *dest >= k {
                        return Err(Error::ModelViolation(format!("machine {i} addressed missing machine {dest}")));
                    }
                    let w = program.msg_words(m);
                    sent[i] += w;
                    received[*dest] += w;
                }
                sent[i] += o.emit.iter().map(|x| program.output_words(x)).sum::<usize>();
            }
        }
        let max_sent = sent.iter().copied().max().unwrap_or(0);
        let max_recv = received.iter().copied().max().unwrap_or(0);
        if max_sent > s || max_recv > s {
            return Err(Error::ModelViolation(format!(
                "round {step_no}: message volume {} words exceeds local memory {s}",
                max_sent.max(max_recv)
            )));
        }
        if max_sent > 0 {
            rounds += 1;
            if rounds > max_rounds {
                return Err(Error::ModelViolation(format!("program exceeded {max_rounds} rounds")));
            }
            cluster.charge_rounds("bsp", 1, max_sent, max_recv);
        }
        for (i, out) in outcomes.into_iter().enumerate() {
            if let Some(o) = out {
                halted[i] = o.halt;
                outputs[i].extend(o.emit);
                for (dest, m) in o.send {
                    inboxes[dest].push(m);
                }
            }
        }
        for (i, st) in states.iter().enumerate() {
            cluster.note_resident(i, program.resident_words(st) + inboxes[i].len());
        }
    }
    Ok(HarnessRun { states, outputs, rounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::MpcConfig;
    use rand::Rng;

    struct Noop;
    impl MachineProgram for Noop {
        type State = ();
        type Msg = ();
        type Output = ();
        fn machines(&self) -> usize {
            4
        }
        fn init(&self, _: usize) {}
        fn resident_words(&self, _: &()) -> usize {
            0
        }
        fn step(&self, _: usize, _: u64, _: &mut (), _: Vec<()>, _: &mut ChaCha8Rng) -> StepOutcome<(), ()> {
            StepOutcome::halt()
        }
    }

    struct Echo {
        payload: usize,
    }
    impl MachineProgram for Echo {
        type State = bool;
        type Msg = usize;
        type Output = u64;
        fn machines(&self) -> usize {
            3
        }
        fn init(&self, _: usize) -> bool {
            false
        }
        fn resident_words(&self, _: &bool) -> usize {
            1
        }
        fn msg_words(&self, m: &usize) -> usize {
            *m
        }
        fn step(&self, i: usize, _: u64, done: &mut bool, inbox: Vec<usize>, r: &mut ChaCha8Rng) -> StepOutcome<usize, u64> {
            if *done {
                return StepOutcome { send: vec![], emit: vec![inbox.len() as u64 * 1000 + r.gen_range(0..1000)], halt: true };
            }
            *done = true;
            StepOutcome { send: vec![((i + 1) % 3, self.payload)], emit: vec![], halt: false }
        }
    }

    fn cluster(seed: u64) -> MachineCluster {
        MachineCluster::new(MpcConfig::with_seed(seed), 100, 100)
    }

    #[test]
    fn noop_takes_zero_rounds() {
        let mut c = cluster(1);
        let run = run_machine_rounds(&mut c, &Noop, 10).unwrap();
        assert_eq!(run.rounds, 0);
        assert_eq!(c.log().rounds_executed, 0);
    }

    #[test]
    fn echo_within_budget_completes() {
        let mut c = cluster(1);
        let run = run_machine_rounds(&mut c, &Echo { payload: 5 }, 10).unwrap();
        assert_eq!(run.rounds, 2);
        assert!(run.outputs.iter().all(|o| o.len() == 1 && o[0] / 1000 == 1));
    }

    #[test]
    fn oversized_echo_is_a_violation() {
        let mut c = cluster(1);
        let s = c.local_memory_words();
        assert!(matches!(run_machine_rounds(&mut c, &Echo { payload: s + 1 }, 10), Err(Error::ModelViolation(_))));
    }

    #[test]
    fn outputs_do_not_depend_on_thread_count() {
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let mut c = cluster(77);
                run_machine_rounds(&mut c, &Echo { payload: 2 }, 10).unwrap().outputs
            })
        };
        assert_eq!(run_with(1), run_with(8));
    }
}
