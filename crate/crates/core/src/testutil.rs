//! Shared fixtures for unit tests.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::NetworkMatrix;
use crate::model::{AgentRoster, AgentType, Hman, OpinionVector};

/// Worked five-agent example used across the module tests: three averagers,
/// one copier, one voter on a symmetric matrix with 17 positive entries.
pub const FIVE_AGENT_ROWS: [[f64; 5]; 5] = [
    [0.4, 0.2, 0.2, 0.0, 0.2],
    [0.2, 0.4, 0.2, 0.2, 0.0],
    [0.2, 0.2, 0.4, 0.2, 0.0],
    [0.0, 0.2, 0.2, 0.6, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.8],
];

/// Initial opinions fixed for deterministic golden values.
pub const FIVE_AGENT_X0: [f64; 5] = [0.9, 0.1, 0.5, 0.7, 0.3];

pub fn five_agent_matrix() -> NetworkMatrix<f64> {
    let rows: Vec<Vec<f64>> = FIVE_AGENT_ROWS.iter().map(|r| r.to_vec()).collect();
    NetworkMatrix::validate(&rows).unwrap()
}

pub fn five_agent_roster() -> AgentRoster {
    AgentRoster::from_blocks(3, 1, 1)
}

pub fn five_agent_model() -> Hman<f64> {
    Hman::new(five_agent_matrix(), five_agent_roster()).unwrap()
}

pub fn five_agent_x0() -> OpinionVector<f64> {
    OpinionVector::new(FIVE_AGENT_X0.to_vec()).unwrap()
}

/// Random row-stochastic matrix with full support: every entry positive, so
/// the graph is ergodic with a healthy spectral gap.
pub fn random_dense_stochastic(n: usize, rng: &mut ChaCha8Rng) -> NetworkMatrix<f64> {
    let dist = Uniform::new(0.05f64, 1.0);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
            let sum: f64 = raw.iter().sum();
            raw.iter().map(|v| v / sum).collect()
        })
        .collect();
    NetworkMatrix::validate(&rows).unwrap()
}

/// Random roster of the given length, all three types possible.
pub fn random_roster(n: usize, rng: &mut ChaCha8Rng) -> AgentRoster {
    let types = (0..n)
        .map(|_| match rng.gen_range(0..3) {
            0 => AgentType::Averager,
            1 => AgentType::Copier,
            _ => AgentType::Voter,
        })
        .collect();
    AgentRoster::new(types)
}

pub fn random_x0(n: usize, rng: &mut ChaCha8Rng) -> OpinionVector<f64> {
    OpinionVector::new((0..n).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
