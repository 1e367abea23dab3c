//! Multi-threaded drivers for the core algorithms. Every result is
//! assembled in a fixed order, so it does not depend on the worker count.

use std::collections::BTreeSet;
use std::ops::Range;
use std::thread;

use pivots_core::canon::{self, RowClasses};
use pivots_core::strategy::{self, Strategy};
use pivots_core::{
    Atlas, AtlasChain, CanonicalKey, Canonizer, ClassWeight, CostModel, Error, Result,
};

/// Available hardware threads, at least one.
pub fn default_workers() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

/// Applies `f` to about `workers` contiguous chunks of `items` and returns
/// the results in chunk order.
pub fn map_chunks<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync,
{
    let workers = workers.max(1);
    if workers == 1 || items.len() < 2 {
        return vec![f(items)];
    }
    let size = items.len().div_ceil(workers);
    thread::scope(|s| {
        let handles: Vec<_> = items.chunks(size).map(|c| s.spawn(|| f(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Splits `range` into `parts` contiguous pieces.
pub fn split_range(range: Range<u64>, parts: usize) -> Vec<Range<u64>> {
    let len = range.end - range.start;
    let parts = (parts.max(1) as u64).min(len.max(1));
    (0..parts)
        .map(|k| range.start + len * k / parts..range.start + len * (k + 1) / parts)
        .collect()
}

/// Every ~ class of size `n` with its weight, sorted by key.
pub fn enumerate_classes(
    n: usize,
    allow_large: bool,
    workers: usize,
) -> Result<Vec<(CanonicalKey, ClassWeight)>> {
    canon::guard(n, allow_large)?;
    let mut parents = vec![CanonicalKey::from_canonical_bits(0, 0)?];
    for k in 1..=n {
        let canon = Canonizer::new(k);
        let parts = map_chunks(&parents, workers, |chunk| {
            canon::extend_classes(chunk, &canon)
        });
        let keys: BTreeSet<u64> = parts.into_iter().flatten().collect();
        parents = keys
            .into_iter()
            .map(|bits| CanonicalKey::from_canonical_bits(k, bits))
            .collect::<Result<_>>()?;
    }
    let canon = Canonizer::new(n);
    let bits: Vec<u64> = parents.iter().map(|k| k.bits()).collect();
    Ok(map_chunks(&bits, workers, |chunk| {
        canon::weigh_classes(n, chunk, &canon)
    })
    .into_iter()
    .flatten()
    .collect())
}

/// Number of row-sorted `n × n` matrices, counted by streaming them.
pub fn count_row_classes_by_enumeration(
    n: usize,
    allow_large: bool,
    workers: usize,
) -> Result<u64> {
    canon::guard(n, allow_large)?;
    let tops: Vec<u16> = (0..1u16 << n).collect();
    let counts = map_chunks(&tops, workers.max(1) * 4, |chunk| -> Result<u64> {
        let (lo, hi) = (chunk[0], chunk[chunk.len() - 1] + 1);
        Ok(RowClasses::with_top_range(n, lo, hi, allow_large)?.count() as u64)
    });
    counts.into_iter().sum()
}

/// The atlas for size `prev.n() + 1`.
pub fn build_atlas(prev: &Atlas, allow_large: bool, workers: usize) -> Result<Atlas> {
    let n = prev.n() + 1;
    let classes = enumerate_classes(n, allow_large, workers)?;
    let parts = map_chunks(&classes, workers, |chunk| Atlas::build_records(chunk, prev));
    let mut entries = Vec::with_capacity(classes.len());
    for p in parts {
        entries.extend(p?);
    }
    Atlas::from_entries(n, entries)
}

/// Atlases `1..=n`; `each` sees every atlas as soon as it is built.
pub fn build_chain<F>(
    n: usize,
    allow_large: bool,
    workers: usize,
    mut each: F,
) -> crate::Result<AtlasChain>
where
    F: FnMut(&Atlas) -> crate::Result<()>,
{
    let mut chain = AtlasChain::new();
    let mut prev = Atlas::terminal();
    for _ in 1..=n {
        prev = build_atlas(&prev, allow_large, workers)?;
        each(&prev)?;
        chain.push(prev.clone())?;
    }
    Ok(chain)
}

/// Total episode cost over samples `0..samples`, split across workers.
pub fn evaluate_total(
    strategy: &Strategy<'_>,
    n: usize,
    model: CostModel,
    samples: u64,
    seed: u64,
    workers: usize,
) -> Result<u64> {
    if samples == 0 {
        return Err(Error::Invalid("sample size must be positive"));
    }
    if n == 0 || n > pivots_core::matrix::MAX_DIM {
        return Err(Error::Unsupported { n });
    }
    let ranges = split_range(0..samples, workers);
    map_chunks(&ranges, workers, |chunk| -> Result<u64> {
        chunk
            .iter()
            .map(|r| strategy::evaluate_range(strategy, n, model, r.clone(), seed))
            .sum()
    })
    .into_iter()
    .sum()
}

/// Mean episode cost, as [`strategy::evaluate`] but multi-threaded.
pub fn evaluate(
    strategy: &Strategy<'_>,
    n: usize,
    model: CostModel,
    samples: u64,
    seed: u64,
    workers: usize,
) -> Result<f64> {
    Ok(evaluate_total(strategy, n, model, samples, seed, workers)? as f64 / samples as f64)
}

/// Agent against Markowitz with random tie-breaks on the same samples.
pub fn evaluate_agent(
    net: &pivots_core::dqn::QNetwork,
    n: usize,
    model: CostModel,
    samples: u64,
    seed: u64,
    workers: usize,
) -> Result<pivots_core::dqn::AgentEvaluation> {
    if n == 0 || n > net.frame() {
        return Err(Error::SizeMismatch {
            expected: net.frame(),
            actual: n,
        });
    }
    let agent = evaluate_total(&Strategy::agent(net), n, model, samples, seed, workers)?;
    let mk = Strategy::markowitz().with_tie_break(strategy::TieBreak::UniformRandom);
    let markowitz = evaluate_total(&mk, n, model, samples, seed, workers)?;
    Ok(pivots_core::dqn::AgentEvaluation::from_totals(
        agent, markowitz, samples,
    ))
}
