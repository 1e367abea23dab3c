//! Deep Q-learning for pivot selection.
//!
//! States are patterns embedded top-left in a fixed `n × n` frame; an action
//! is a nonzero of the state. A feature vector concatenates the `n²` frame
//! entries (row-major), a one-hot row, a one-hot column and optionally the
//! fill-in of the pivot. The reward of a step is minus its cost, so with
//! `γ = 1` the return is minus the remaining elimination cost.
//!
//! Training draws from one ChaCha8 generator seeded with `seed`, in this
//! order: initial weights (layer by layer, storage order), then per episode
//! the pattern (one `u64`), then per step the exploration draw (one `f64`),
//! the random action index when exploring, and the batch indices when an
//! update happens.

mod network;
mod replay;

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{BitMatrix, CostModel, Ones, Pivot};
use crate::strategy::{self, Strategy, TieBreak};

pub use network::{input_dim, Gradient, QNetwork};
pub use replay::{ReplayBuffer, Transition};

/// Feature vector of pivot `p` in state `m`, where `m` fits in the frame.
pub fn encode(m: &BitMatrix, p: Pivot, frame: usize, fill_in_feature: bool) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(input_dim(frame, fill_in_feature));
    encode_into(m, p, frame, fill_in_feature, &mut out)?;
    Ok(out)
}

fn encode_into(
    m: &BitMatrix,
    p: Pivot,
    frame: usize,
    fill_in_feature: bool,
    out: &mut Vec<f64>,
) -> Result<()> {
    if m.rows() > frame || m.cols() > frame {
        return Err(Error::SizeMismatch {
            expected: frame,
            actual: m.rows().max(m.cols()),
        });
    }
    let fill = m.fill_in(p)?;
    out.clear();
    for i in 0..frame {
        let row = if i < m.rows() { m.row_byte(i) } else { 0 };
        out.extend((0..frame).map(|j| (row >> j & 1) as f64));
    }
    out.extend((0..frame).map(|i| (i == p.row()) as u8 as f64));
    out.extend((0..frame).map(|j| (j == p.col()) as u8 as f64));
    if fill_in_feature {
        out.push(fill as f64);
    }
    Ok(())
}

/// Highest Q-value over the nonzeros of `m`, first one on ties.
fn best_action(net: &QNetwork, m: &BitMatrix) -> Result<(Pivot, f64)> {
    let mut x = Vec::with_capacity(net.input_dim());
    let mut best: Option<(Pivot, f64)> = None;
    for b in Ones(m.bits()) {
        let p = Pivot::new(b / 8, b % 8);
        encode_into(m, p, net.frame(), net.fill_in_feature(), &mut x)?;
        let q = net.forward(&x)?;
        if best.is_none_or(|(_, v)| q > v) {
            best = Some((p, q));
        }
    }
    best.ok_or(Error::ZeroMatrix)
}

/// Argmax of the network over the nonzeros of `m`.
pub fn greedy_action(net: &QNetwork, m: &BitMatrix) -> Result<Pivot> {
    best_action(net, m).map(|(p, _)| p)
}

/// With probability `epsilon` a uniformly random nonzero, otherwise greedy.
pub fn epsilon_greedy_action<R: Rng + ?Sized>(
    net: &QNetwork,
    m: &BitMatrix,
    epsilon: f64,
    rng: &mut R,
) -> Result<Pivot> {
    if m.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    if rng.gen::<f64>() < epsilon {
        let k = rng.gen_range(0..m.popcount() as usize);
        let b = Ones(m.bits()).nth(k).expect("index below popcount");
        return Ok(Pivot::new(b / 8, b % 8));
    }
    greedy_action(net, m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Frame size `n`.
    pub n: usize,
    pub episodes: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Share of the episodes over which ε falls linearly.
    pub epsilon_decay_fraction: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Optimizer steps between target network copies.
    pub target_sync_period: u64,
    pub fill_in_feature: bool,
    /// Apply free pivots without asking the agent.
    pub auto_free: bool,
    pub seed: u64,
}

impl HyperParams {
    pub fn new(n: usize, episodes: u64, seed: u64) -> Self {
        HyperParams {
            n,
            episodes,
            epsilon_start: 0.5,
            epsilon_end: 0.1,
            epsilon_decay_fraction: 0.5,
            gamma: 1.0,
            learning_rate: 0.001,
            batch_size: 50,
            replay_capacity: 10_000,
            target_sync_period: 500,
            fill_in_feature: false,
            auto_free: false,
            seed,
        }
    }

    /// Exploration rate for episode `e`.
    pub fn epsilon(&self, e: u64) -> f64 {
        let span = self.epsilon_decay_fraction * self.episodes as f64;
        let t = if span > 0.0 {
            (e as f64 / span).min(1.0)
        } else {
            1.0
        };
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }

    fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Invalid("gamma must lie in (0, 1]"));
        }
        if !unit(self.epsilon_start)
            || !unit(self.epsilon_end)
            || !unit(self.epsilon_decay_fraction)
        {
            return Err(Error::Invalid("epsilon settings must lie in [0, 1]"));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(Error::Invalid(
                "replay capacity must hold at least one batch",
            ));
        }
        if self.target_sync_period == 0 {
            return Err(Error::Invalid("target sync period must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

/// Mean episode cost over a block of training episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Episodes completed at the end of the block.
    pub episode: u64,
    pub mean_cost: f64,
    /// Exploration rate of the block's last episode.
    pub epsilon: f64,
}

pub const CURVE_BLOCK: u64 = 1000;

/// Trains a network on uniformly random patterns.
pub fn train(hp: &HyperParams, model: CostModel) -> Result<(QNetwork, Vec<CurvePoint>)> {
    hp.validate()?;
    let n = hp.n;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut online = QNetwork::random(n, hp.fill_in_feature, &mut rng)?;
    let mut target = online.clone();
    let mut buffer = ReplayBuffer::new(hp.replay_capacity);
    let mut curve = Vec::new();
    let mut updates = 0u64;
    let mut block_cost = 0u64;
    let mut block_len = 0u64;
    let mut batch: Vec<(Vec<f64>, f64)> = Vec::with_capacity(hp.batch_size);

    for e in 0..hp.episodes {
        let eps = hp.epsilon(e);
        let mut cur = strategy::sample_matrix(n, &mut rng);
        let mut cost = 0u64;
        loop {
            if hp.auto_free {
                while let Some(p) = cur.first_free_pivot() {
                    cur = cur.eliminate(p)?;
                }
            }
            if cur.is_zero() {
                break;
            }
            let a = epsilon_greedy_action(&online, &cur, eps, &mut rng)?;
            let step = cur.step_cost(a, model)?;
            cost += step as u64;
            let next = cur.eliminate(a)?;
            buffer.push(Transition {
                state: cur.embed(n, n)?,
                action: a,
                reward: -(step as i32),
                next_state: (!next.is_zero()).then(|| next.embed(n, n)).transpose()?,
            });
            cur = next;

            if buffer.len() >= hp.batch_size {
                batch.clear();
                for t in buffer.sample(hp.batch_size, &mut rng) {
                    let mut y = t.reward as f64;
                    if let Some(s) = &t.next_state {
                        y += hp.gamma * best_action(&target, s)?.1;
                    }
                    batch.push((encode(&t.state, t.action, n, hp.fill_in_feature)?, y));
                }
                let grad = online.backward(&batch)?;
                online.sgd_step(&grad, hp.learning_rate)?;
                updates += 1;
                if updates.is_multiple_of(hp.target_sync_period) {
                    target = online.clone();
                }
            }
        }
        block_cost += cost;
        block_len += 1;
        if block_len == CURVE_BLOCK || e + 1 == hp.episodes {
            curve.push(CurvePoint {
                episode: e + 1,
                mean_cost: block_cost as f64 / block_len as f64,
                epsilon: eps,
            });
            block_cost = 0;
            block_len = 0;
        }
    }
    Ok((online, curve))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentEvaluation {
    pub agent_mean: f64,
    pub markowitz_mean: f64,
    /// `100·(1 − agent/markowitz)`.
    pub improvement: f64,
}

impl AgentEvaluation {
    pub fn from_totals(agent_total: u64, markowitz_total: u64, samples: u64) -> Self {
        let agent_mean = agent_total as f64 / samples as f64;
        let markowitz_mean = markowitz_total as f64 / samples as f64;
        let improvement = if markowitz_total == 0 {
            0.0
        } else {
            100.0 * (1.0 - agent_total as f64 / markowitz_total as f64)
        };
        AgentEvaluation {
            agent_mean,
            markowitz_mean,
            improvement,
        }
    }
}

/// Greedy agent against Markowitz with random tie-breaks on the same samples.
/// Free pivots are taken first by both.
pub fn evaluate_agent(
    net: &QNetwork,
    n: usize,
    model: CostModel,
    samples: u64,
    seed: u64,
) -> Result<AgentEvaluation> {
    if n == 0 || n > net.frame() {
        return Err(Error::SizeMismatch {
            expected: net.frame(),
            actual: n,
        });
    }
    if samples == 0 {
        return Err(Error::Invalid("sample size must be positive"));
    }
    let agent = strategy::evaluate_range(&Strategy::agent(net), n, model, 0..samples, seed)?;
    let mk = Strategy::markowitz().with_tie_break(TieBreak::UniformRandom);
    let markowitz = strategy::evaluate_range(&mk, n, model, 0..samples, seed)?;
    Ok(AgentEvaluation::from_totals(agent, markowitz, samples))
}
