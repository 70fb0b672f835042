//! Q-value evaluation over observations, ε-greedy selection and the greedy
//! decoding loop.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::lattice::{Pauli, PauliFrame, QubitIndex, Syndrome};
use crate::neural::{NeuralError, QNetwork, Scalar};
use crate::perspectives::{observation, Observation, Perspective};

pub const DEFAULT_MAX_STEPS: usize = 75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub gamma: f64,
    pub epsilon_initial: f64,
    pub epsilon_final: f64,
    pub max_steps: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self { gamma: 0.95, epsilon_initial: 1.0, epsilon_final: 0.1, max_steps: DEFAULT_MAX_STEPS }
    }
}

/// Q-values of one perspective, in X, Y, Z order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QEntry {
    pub qubit: QubitIndex,
    pub q: [f64; 3],
}

/// Flattens perspective grids into one network input batch.
pub fn batch_input<T: Scalar>(perspectives: &[&Perspective]) -> Vec<T> {
    let mut out = Vec::with_capacity(perspectives.iter().map(|p| p.grid.len()).sum());
    for p in perspectives {
        out.extend(p.grid.iter().map(|&b| if b == 1 { T::one() } else { T::zero() }));
    }
    out
}

/// One batched forward pass over all perspectives of `obs`.
pub fn q_values<T: Scalar>(net: &QNetwork<T>, obs: &Observation) -> Result<Vec<QEntry>, NeuralError> {
    let refs: Vec<&Perspective> = obs.perspectives.iter().collect();
    let out = net.predict(&batch_input::<T>(&refs), refs.len())?;
    Ok(obs
        .perspectives
        .iter()
        .zip(out.chunks_exact(3))
        .map(|(p, q)| QEntry { qubit: p.source_qubit, q: [q[0].as_f64(), q[1].as_f64(), q[2].as_f64()] })
        .collect())
}

/// Position and action of the largest Q-value; the first in perspective
/// order, then X < Y < Z, wins ties.
pub fn greedy_index(qvals: &[QEntry]) -> Option<(usize, Pauli)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, e) in qvals.iter().enumerate() {
        for (a, &q) in e.q.iter().enumerate() {
            if best.is_none_or(|(_, _, b)| q > b) {
                best = Some((i, a, q));
            }
        }
    }
    best.map(|(i, a, _)| (i, Pauli::ALL[a]))
}

/// ε-greedy choice returning the perspective index and action.
pub fn select_action_index<R: Rng + ?Sized>(qvals: &[QEntry], epsilon: f64, rng: &mut R) -> (usize, Pauli) {
    assert!(!qvals.is_empty(), "action selection needs at least one perspective");
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        let k = rng.gen_range(0..qvals.len() * 3);
        return (k / 3, Pauli::ALL[k % 3]);
    }
    greedy_index(qvals).expect("nonempty")
}

pub fn select_action<R: Rng + ?Sized>(qvals: &[QEntry], epsilon: f64, rng: &mut R) -> (QubitIndex, Pauli) {
    let (i, a) = select_action_index(qvals, epsilon, rng);
    (qvals[i].qubit, a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Cleared,
    StepLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Syndrome before the action.
    pub syndrome: Syndrome,
    pub qubit: QubitIndex,
    pub op: Pauli,
    pub q: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeTrace {
    pub steps: Vec<TraceStep>,
    pub final_syndrome: Syndrome,
    pub outcome: Outcome,
}

impl DecodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Plain-text step listing: syndrome grid, chosen operation and the
    /// Q-value triple of the acting perspective.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (t, step) in self.steps.iter().enumerate() {
            let _ = writeln!(
                out,
                "step {:>2}: {} on {}  Q(X,Y,Z) = ({:.2}, {:.2}, {:.2})",
                t + 1,
                step.op,
                step.qubit,
                step.q[0],
                step.q[1],
                step.q[2]
            );
            out.push_str(&step.syndrome.to_string());
        }
        let _ = writeln!(out, "final ({:?}):", self.outcome);
        out.push_str(&self.final_syndrome.to_string());
        out
    }
}

/// Greedy decoding until the syndrome is empty or `cap` steps were taken.
pub fn decode_episode<T: Scalar>(
    net: &QNetwork<T>,
    s0: &Syndrome,
    cap: usize,
) -> Result<(PauliFrame, DecodeTrace), NeuralError> {
    let mut correction = PauliFrame::identity(s0.distance());
    let mut s = s0.clone();
    let mut steps = Vec::new();
    while !s.is_empty() && steps.len() < cap {
        let obs = observation(&s).expect("nonempty syndrome");
        let qvals = q_values(net, &obs)?;
        let (i, op) = greedy_index(&qvals).expect("nonempty observation");
        let qubit = qvals[i].qubit;
        steps.push(TraceStep { syndrome: s.clone(), qubit, op, q: qvals[i].q });
        correction.apply_in_place(qubit, op);
        s.apply_in_place(qubit, op);
    }
    let outcome = if s.is_empty() { Outcome::Cleared } else { Outcome::StepLimit };
    Ok((correction, DecodeTrace { steps, final_syndrome: s, outcome }))
}
