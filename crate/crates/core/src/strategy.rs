//! Pivot selection rules and episode simulation.
//!
//! Every strategy takes a free pivot whenever one exists; the rule itself only
//! decides among the remaining nonzeros.

use alloc::vec::Vec;
use core::ops::Range;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::atlas::{AtlasChain, Mode};
use crate::dqn::{self, QNetwork};
use crate::error::{Error, Result};
use crate::matrix::{BitMatrix, CostModel, Ones, Pivot};

/// How equally scored candidates are separated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TieBreak {
    /// Smallest row, then smallest column.
    #[default]
    Lexicographic,
    UniformRandom,
}

#[derive(Debug, Clone, Copy)]
pub enum StrategyKind<'a> {
    /// Minimal fill-in.
    Markowitz,
    /// Uniform over all nonzeros.
    Random,
    /// Atlas lookahead; needs atlases for every size that occurs.
    Optimal(&'a AtlasChain),
    /// Minimizes `(r - 1)(c - 1) + λ(c - 1)`.
    WeightedFillIn(f64),
    /// Minimizes this step's cost plus the cheapest next step. Remaining
    /// ties go to the smaller fill-in.
    TwoStepLookahead,
    /// Greedy on a trained Q-network.
    Agent(&'a QNetwork),
}

#[derive(Debug, Clone, Copy)]
pub struct Strategy<'a> {
    pub kind: StrategyKind<'a>,
    pub tie_break: TieBreak,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EpisodeResult {
    pub total_cost: u64,
    pub pivots: Vec<Pivot>,
    pub steps: usize,
}

impl<'a> Strategy<'a> {
    pub fn new(kind: StrategyKind<'a>) -> Self {
        Strategy {
            kind,
            tie_break: TieBreak::Lexicographic,
        }
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn markowitz() -> Self {
        Strategy::new(StrategyKind::Markowitz)
    }

    /// Always uniform, whatever the tie-break setting.
    pub fn random() -> Self {
        Strategy::new(StrategyKind::Random).with_tie_break(TieBreak::UniformRandom)
    }

    pub fn optimal(chain: &'a AtlasChain) -> Self {
        Strategy::new(StrategyKind::Optimal(chain))
    }

    pub fn weighted_fill_in(lambda: f64) -> Self {
        Strategy::new(StrategyKind::WeightedFillIn(lambda))
    }

    pub fn two_step_lookahead() -> Self {
        Strategy::new(StrategyKind::TwoStepLookahead)
    }

    pub fn agent(net: &'a QNetwork) -> Self {
        Strategy::new(StrategyKind::Agent(net))
    }

    /// Picks the next pivot of a nonzero matrix.
    pub fn choose<R: Rng + ?Sized>(
        &self,
        m: &BitMatrix,
        model: CostModel,
        rng: &mut R,
    ) -> Result<Pivot> {
        if m.is_zero() {
            return Err(Error::ZeroMatrix);
        }
        let free = m.free_mask();
        if free != 0 {
            return Ok(self.pick(free, rng));
        }
        let mask = match self.kind {
            StrategyKind::Markowitz => m.min_fill_in_mask(),
            StrategyKind::Random => m.bits(),
            StrategyKind::Optimal(chain) => {
                let mut key = Vec::new();
                for p in m.nonzeros() {
                    let succ = chain.lookup(&m.eliminate_unchecked(p))?;
                    let rest = succ.get(model, Mode::All).min as u32;
                    key.push((p, m.step_cost_unchecked(p, model) + rest));
                }
                argmin_mask(key)
            }
            StrategyKind::WeightedFillIn(lambda) => {
                let prof = m.profile();
                let score = |p: Pivot| {
                    let (r, c) = (prof.row(p.row()) as f64, prof.col(p.col()) as f64);
                    (r - 1.0) * (c - 1.0) + lambda * (c - 1.0)
                };
                let best = m.nonzeros().map(score).fold(f64::INFINITY, f64::min);
                m.nonzeros()
                    .filter(|&p| score(p) == best)
                    .fold(0, |acc, p| acc | bit(p))
            }
            StrategyKind::TwoStepLookahead => {
                let key = m.nonzeros().map(|p| {
                    let next = m.eliminate_unchecked(p);
                    let second = next
                        .nonzeros()
                        .map(|q| next.step_cost_unchecked(q, model))
                        .min()
                        .unwrap_or(0);
                    let fill = m.fill_in(p).expect("nonzero entry");
                    (p, (m.step_cost_unchecked(p, model) + second, fill))
                });
                argmin_mask(key)
            }
            StrategyKind::Agent(net) => return dqn::greedy_action(net, m),
        };
        Ok(self.pick(mask, rng))
    }

    /// One candidate out of a nonempty bitmask.
    fn pick<R: Rng + ?Sized>(&self, mask: u64, rng: &mut R) -> Pivot {
        let rule = match self.kind {
            StrategyKind::Random => TieBreak::UniformRandom,
            _ => self.tie_break,
        };
        let b = match rule {
            TieBreak::Lexicographic => mask.trailing_zeros() as usize,
            TieBreak::UniformRandom => {
                let k = rng.gen_range(0..mask.count_ones() as usize);
                Ones(mask).nth(k).expect("index below popcount")
            }
        };
        Pivot::new(b / 8, b % 8)
    }

    /// Eliminates until nothing nonzero is left.
    pub fn run_episode<R: Rng + ?Sized>(
        &self,
        m: &BitMatrix,
        model: CostModel,
        rng: &mut R,
    ) -> Result<EpisodeResult> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        let mut out = EpisodeResult::default();
        let mut cur = *m;
        while !cur.is_zero() {
            let p = self.choose(&cur, model, rng)?;
            out.total_cost += cur.step_cost(p, model)? as u64;
            out.pivots.push(p);
            cur = cur.eliminate(p)?;
        }
        out.steps = out.pivots.len();
        Ok(out)
    }
}

fn bit(p: Pivot) -> u64 {
    1 << (8 * p.row() + p.col())
}

fn argmin_mask<K: Ord + Copy>(scores: impl IntoIterator<Item = (Pivot, K)>) -> u64 {
    let mut best: Option<K> = None;
    let mut mask = 0;
    for (p, k) in scores {
        match best {
            Some(b) if k > b => {}
            Some(b) if k == b => mask |= bit(p),
            _ => {
                best = Some(k);
                mask = bit(p);
            }
        }
    }
    mask
}

/// Generator for sample `index` of a seeded run. Each sample owns a stream,
/// so any partition of the indices reproduces the same draws.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A uniformly random `n × n` pattern.
pub fn sample_matrix<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> BitMatrix {
    BitMatrix::square_masked(n, rng.next_u64())
}

/// Total cost over the samples with indices in `range`.
pub fn evaluate_range(
    strategy: &Strategy<'_>,
    n: usize,
    model: CostModel,
    range: Range<u64>,
    seed: u64,
) -> Result<u64> {
    let mut total = 0;
    for i in range {
        let mut rng = sample_rng(seed, i);
        let m = sample_matrix(n, &mut rng);
        total += strategy.run_episode(&m, model, &mut rng)?.total_cost;
    }
    Ok(total)
}

/// Mean episode cost over `samples` uniformly drawn `n × n` patterns.
pub fn evaluate(
    strategy: &Strategy<'_>,
    n: usize,
    model: CostModel,
    samples: u64,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Invalid("sample size must be positive"));
    }
    if n == 0 || n > crate::matrix::MAX_DIM {
        return Err(Error::Unsupported { n });
    }
    let total = evaluate_range(strategy, n, model, 0..samples, seed)?;
    Ok(total as f64 / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::Atlas;

    fn m(s: &str) -> BitMatrix {
        s.parse().unwrap()
    }

    fn staircase() -> BitMatrix {
        m("111111/111111/001111/000111/000011/000000")
    }

    #[test]
    fn zero_matrix_is_rejected_and_costs_nothing() {
        let mut rng = sample_rng(1, 0);
        let z = BitMatrix::zero(3, 3).unwrap();
        assert_eq!(
            Strategy::markowitz().choose(&z, CostModel::Field, &mut rng),
            Err(Error::ZeroMatrix)
        );
        let ep = Strategy::random()
            .run_episode(&z, CostModel::Ring, &mut rng)
            .unwrap();
        assert_eq!(ep, EpisodeResult::default());
    }

    #[test]
    fn markowitz_picks_the_last_nonzero_row() {
        let mut rng = sample_rng(3, 0);
        for tb in [TieBreak::Lexicographic, TieBreak::UniformRandom] {
            for _ in 0..20 {
                let p = Strategy::markowitz()
                    .with_tie_break(tb)
                    .choose(&staircase(), CostModel::Field, &mut rng)
                    .unwrap();
                assert_eq!(p.row(), 4);
                assert_eq!(staircase().fill_in(p).unwrap(), 4);
            }
        }
        let ep = Strategy::markowitz()
            .run_episode(&staircase(), CostModel::Ring, &mut rng)
            .unwrap();
        assert_eq!(ep.total_cost, 55);
    }

    #[test]
    fn optimal_and_lookahead_on_the_staircase() {
        let chain = Atlas::build_chain(5, false).unwrap();
        let mut rng = sample_rng(0, 0);
        let opt = Strategy::optimal(&chain);
        let p = opt
            .choose(&staircase(), CostModel::Field, &mut rng)
            .unwrap();
        assert_eq!(p.col(), 0);
        let ep = opt
            .run_episode(&staircase(), CostModel::Field, &mut rng)
            .unwrap();
        assert_eq!(ep.total_cost, 11);
        assert_eq!(
            opt.run_episode(&staircase(), CostModel::Ring, &mut rng)
                .unwrap()
                .total_cost,
            15
        );

        let p = Strategy::two_step_lookahead()
            .choose(&staircase(), CostModel::Field, &mut rng)
            .unwrap();
        assert!(p.col() < 2);
    }

    #[test]
    fn episodes_replay_to_their_cost() {
        let mut rng = sample_rng(9, 0);
        for _ in 0..200 {
            let a = sample_matrix(5, &mut rng);
            for s in [
                Strategy::random(),
                Strategy::two_step_lookahead(),
                Strategy::weighted_fill_in(0.5),
            ] {
                let ep = s.run_episode(&a, CostModel::Ring, &mut rng).unwrap();
                let mut cur = a;
                let mut total = 0;
                for &p in &ep.pivots {
                    assert!(cur.is_star(p));
                    if cur.free_mask() != 0 {
                        assert!(cur.is_free_pivot(p).unwrap());
                    }
                    total += cur.step_cost(p, CostModel::Ring).unwrap() as u64;
                    cur = cur.eliminate(p).unwrap();
                }
                assert!(cur.is_zero());
                assert_eq!(total, ep.total_cost);
                assert_eq!(ep.steps, ep.pivots.len());
            }
        }
    }

    #[test]
    fn weighted_fill_in_without_weight_is_markowitz() {
        let mut rng = sample_rng(4, 0);
        for _ in 0..300 {
            let a = sample_matrix(6, &mut rng);
            if a.is_zero() {
                continue;
            }
            let x = Strategy::weighted_fill_in(0.0)
                .choose(&a, CostModel::Field, &mut rng)
                .unwrap();
            let y = Strategy::markowitz()
                .choose(&a, CostModel::Field, &mut rng)
                .unwrap();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn optimal_reproduces_the_atlas_minimum() {
        let chain = Atlas::build_chain(5, false).unwrap();
        let mut rng = sample_rng(0, 0);
        for atlas in chain.atlases() {
            for e in atlas.entries() {
                let rep = e.key.matrix();
                for model in CostModel::ALL {
                    let ep = Strategy::optimal(&chain)
                        .run_episode(&rep, model, &mut rng)
                        .unwrap();
                    assert_eq!(
                        ep.total_cost,
                        e.record.get(model, Mode::All).min as u64,
                        "{rep}"
                    );
                }
            }
        }
    }

    #[test]
    fn random_markowitz_stays_within_the_minimum_fill_in_range() {
        let chain = Atlas::build_chain(5, false).unwrap();
        let s = Strategy::markowitz().with_tie_break(TieBreak::UniformRandom);
        let mut rng = sample_rng(17, 0);
        for _ in 0..10_000 {
            let a = sample_matrix(5, &mut rng);
            let rec = chain.lookup(&a).unwrap();
            for model in CostModel::ALL {
                let mf = rec.get(model, Mode::MinFillIn);
                for _ in 0..3 {
                    let c = s.run_episode(&a, model, &mut rng).unwrap().total_cost;
                    assert!(
                        (mf.min as u64..=mf.max as u64).contains(&c),
                        "{a} {model} {c}"
                    );
                }
            }
        }
    }

    #[test]
    fn evaluation_orders_strategies_and_is_deterministic() {
        let chain = Atlas::build_chain(4, false).unwrap();
        for model in CostModel::ALL {
            let opt = evaluate(&Strategy::optimal(&chain), 4, model, 20_000, 5).unwrap();
            let mk = evaluate(&Strategy::markowitz(), 4, model, 20_000, 5).unwrap();
            let rnd = evaluate(&Strategy::random(), 4, model, 20_000, 5).unwrap();
            assert!(opt <= mk && mk < rnd, "{model}: {opt} {mk} {rnd}");
            assert_eq!(
                rnd,
                evaluate(&Strategy::random(), 4, model, 20_000, 5).unwrap()
            );
        }
        let s = Strategy::random();
        let whole = evaluate_range(&s, 4, CostModel::Field, 0..1000, 8).unwrap();
        let split = evaluate_range(&s, 4, CostModel::Field, 0..337, 8).unwrap()
            + evaluate_range(&s, 4, CostModel::Field, 337..1000, 8).unwrap();
        assert_eq!(whole, split);
    }
}
