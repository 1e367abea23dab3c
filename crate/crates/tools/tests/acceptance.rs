//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion with
//! the measured values, then exits nonzero if any criterion failed.

use std::time::Instant;

use pivots::{atlas_file, parallel, weights};
use pivots_core::atlas::{Oracle, COMBOS};
use pivots_core::canon;
use pivots_core::dqn::{self, HyperParams, QNetwork};
use pivots_core::stats::{self, Aggregation, Baseline, Weighting};
use pivots_core::strategy::Strategy;
use pivots_core::{AtlasChain, BitMatrix, CostModel, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIGURE_TOLERANCE: f64 = 0.5;
const HISTOGRAM_REPORT_TOLERANCE: f64 = 1.5;
const GRADIENT_TOLERANCE: f64 = 1e-4;
const RL_EPISODES: u64 = 40_000;
const RL_EVAL_SAMPLES: u64 = 20_000;
const RL_EVAL_SEED: u64 = 2024;
const RL_SEEDS: [u64; 3] = [1, 2, 3];
const RL_MARKOWITZ_SLACK: f64 = 1.01;

struct Report {
    failed: Vec<u32>,
}

impl Report {
    fn line(&mut self, id: u32, title: &str, ok: bool, detail: String) {
        println!(
            "{} {id} {title}: {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            self.failed.push(id);
        }
    }
}

fn workers() -> usize {
    parallel::default_workers()
}

fn class_counts(r: &mut Report, chain: &AtlasChain) {
    const CLASSES: [usize; 6] = [2, 7, 36, 317, 5624, 251_610];
    const ROWS: [u64; 6] = [2, 10, 120, 3876, 376_992, 119_877_472];
    let t = Instant::now();
    let classes: Vec<usize> = (1..=6).map(|n| chain.get(n).unwrap().len()).collect();
    let weights_ok = (1..=6).all(|n| {
        let sum: u128 = chain
            .get(n)
            .unwrap()
            .entries()
            .iter()
            .map(|e| e.weight.0 as u128)
            .sum();
        sum == 1u128 << (n * n)
    });
    let formula: Vec<u64> = (1..=6)
        .map(|n| canon::count_row_classes(n).unwrap() as u64)
        .collect();
    let streamed: Vec<u64> = (1..=6)
        .map(|n| parallel::count_row_classes_by_enumeration(n, false, workers()).unwrap())
        .collect();
    let ok = classes == CLASSES && formula == ROWS && streamed == ROWS && weights_ok;
    r.line(
        1,
        "class counts",
        ok,
        format!(
            "classes {classes:?}, row classes {streamed:?} (formula {formula:?}), weights sum to 2^(n^2): {weights_ok}, {:.1?}",
            t.elapsed()
        ),
    );
}

fn oracle_equivalence(r: &mut Report, chain: &AtlasChain) {
    let t = Instant::now();
    let mut oracle = Oracle::new();
    let mut checked = 0u64;
    let mut mismatches = 0u64;
    for n in [3usize, 4] {
        for bits in 0..1u64 << (n * n) {
            let m = BitMatrix::square_masked(n, spread(bits, n));
            let rec = chain.lookup(&m).unwrap();
            for (model, mode) in COMBOS {
                let (lo, hi, med) = oracle.cost(&m, model, mode).unwrap();
                let s = rec.get(model, mode);
                checked += 1;
                if (s.min as u32, s.max as u32, s.med) != (lo, hi, med) {
                    mismatches += 1;
                }
            }
        }
    }
    r.line(
        2,
        "oracle equivalence",
        mismatches == 0 && checked == 4 * (512 + 65536),
        format!(
            "{checked} (matrix, model, mode) cases, {mismatches} mismatches, {:.1?}",
            t.elapsed()
        ),
    );
}

/// Places the low `n²` bits row by row into the 8-wide layout.
fn spread(bits: u64, n: usize) -> u64 {
    (0..n).fold(0, |acc, i| {
        acc | ((bits >> (n * i)) & ((1 << n) - 1)) << (8 * i)
    })
}

fn worked_example(r: &mut Report, chain: &AtlasChain) {
    let m: BitMatrix = "111111/111111/001111/000111/000011".parse().unwrap();
    let rec = chain.lookup(&m.padded_square()).unwrap();
    let got = [
        rec.get(CostModel::Field, Mode::All).min,
        rec.get(CostModel::Ring, Mode::All).min,
        rec.get(CostModel::Field, Mode::MinFillIn).min,
        rec.get(CostModel::Ring, Mode::MinFillIn).min,
    ];
    r.line(
        3,
        "worked example",
        got == [11, 15, 32, 55],
        format!(
            "best field {}, best ring {}, min-fill-in field {}, min-fill-in ring {}",
            got[0], got[1], got[2], got[3]
        ),
    );
}

type Series = &'static [(usize, f64)];

fn best_combo<F>(
    chain: &AtlasChain,
    field: Series,
    ring: Series,
    f: F,
) -> (Aggregation, Weighting, f64)
where
    F: Fn(&pivots_core::Atlas, CostModel, Aggregation, Weighting) -> f64,
{
    let mut best = None;
    for agg in Aggregation::ALL {
        for w in Weighting::ALL {
            let mut worst = 0.0f64;
            for (model, pts) in [(CostModel::Field, field), (CostModel::Ring, ring)] {
                for &(n, want) in pts {
                    worst = worst.max((f(chain.get(n).unwrap(), model, agg, w) - want).abs());
                }
            }
            if best.is_none_or(|(_, _, d)| worst < d) {
                best = Some((agg, w, worst));
            }
        }
    }
    best.unwrap()
}

fn figures(r: &mut Report, chain: &AtlasChain) {
    let s1 = best_combo(
        chain,
        &[(3, 0.9259), (4, 4.1546), (5, 10.894), (6, 21.599)],
        &[(4, 2.7843), (5, 8.4324), (6, 18.053)],
        stats::savings_markowitz_vs_median,
    );
    let s2 = best_combo(
        chain,
        &[(4, 1.2794), (5, 3.3917), (6, 5.4089)],
        &[(4, 1.6706), (5, 4.3088), (6, 7.1093)],
        stats::savings_optimal_vs_markowitz,
    );
    let field = [100.0, 100.0, 97.16, 89.14, 74.75];
    let ring = [100.0, 100.0, 96.85, 87.78, 70.23];
    let mut frac = None;
    for w in Weighting::ALL {
        let mut worst = 0.0f64;
        for (model, pts) in [(CostModel::Field, field), (CostModel::Ring, ring)] {
            for (k, want) in pts.iter().enumerate() {
                let got = stats::minfillin_optimal_fraction(chain.get(k + 2).unwrap(), model, w);
                worst = worst.max((got - want).abs());
            }
        }
        if frac.is_none_or(|(_, d)| worst < d) {
            frac = Some((w, worst));
        }
    }
    let frac = frac.unwrap();
    let ok = s1.2 <= FIGURE_TOLERANCE && s2.2 <= FIGURE_TOLERANCE && frac.1 <= FIGURE_TOLERANCE;
    r.line(
        4,
        "figure reproduction",
        ok,
        format!(
            "tolerance {FIGURE_TOLERANCE} pp; savings vs median best {}/{} max dev {:.4}; optimal vs Markowitz best {}/{} max dev {:.4}; min-fill-in optimal best {} max dev {:.4}",
            s1.0, s1.1, s1.2, s2.0, s2.1, s2.2, frac.0, frac.1
        ),
    );
}

fn histogram(r: &mut Report, chain: &AtlasChain) {
    const FIELD: [f64; 10] = [0.0, 0.0, 0.42, 3.73, 6.99, 5.82, 3.22, 1.77, 1.05, 0.28];
    const RING: [f64; 10] = [0.0, 0.0, 0.44, 3.95, 7.89, 8.18, 6.2, 4.46, 3.22, 1.72];
    let a6 = chain.get(6).unwrap();
    let (agg, w, base) = (
        Aggregation::MeanOfRatiosZeroFilled,
        Weighting::PerClass,
        Baseline::MedianMinFillIn,
    );
    let f = stats::density_histogram(a6, CostModel::Field, base, agg, w);
    let g = stats::density_histogram(a6, CostModel::Ring, base, agg, w);
    let low_zero = f[..2].iter().chain(&g[..2]).all(|&v| v == 0.0);
    let peak = (0..10).max_by(|&i, &j| f[i].total_cmp(&f[j])).unwrap();
    let ring_above = (4..10).all(|k| g[k] >= f[k]);
    let dev = (0..10)
        .map(|k| (f[k] - FIELD[k]).abs().max((g[k] - RING[k]).abs()))
        .fold(0.0, f64::max);
    let fmt = |h: &[f64; 10]| {
        h.iter()
            .map(|v| format!("{v:.2}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    r.line(
        5,
        "density histogram shape",
        low_zero && peak == 4 && ring_above,
        format!(
            "{base}/{agg}/{w}: field [{}] ring [{}]; buckets 0-20% zero: {low_zero}; field peak bucket {}0-{}0%; ring >= field from 40%: {ring_above}; max deviation from printed bars {dev:.3} (report tolerance {HISTOGRAM_REPORT_TOLERANCE}, within: {})",
            fmt(&f),
            fmt(&g),
            peak,
            peak + 1,
            dev <= HISTOGRAM_REPORT_TOLERANCE
        ),
    );
}

fn gradient_check(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0f64;
    for trial in 0..10 {
        let mut net = QNetwork::random(3 + trial % 2, trial % 3 == 0, &mut rng).unwrap();
        for p in net.params_mut() {
            *p += rng.gen_range(-0.05..0.05);
        }
        let batch: Vec<(Vec<f64>, f64)> = (0..4)
            .map(|_| {
                let x = (0..net.input_dim())
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect();
                (x, rng.gen_range(-3.0..3.0))
            })
            .collect();
        let loss = |net: &QNetwork| {
            batch
                .iter()
                .map(|(x, y)| (net.forward(x).unwrap() - y).powi(2))
                .sum::<f64>()
                / batch.len() as f64
        };
        let grad: Vec<f64> = net.backward(&batch).unwrap().flat().collect();
        let h = 1e-5;
        for (k, &g) in grad.iter().enumerate() {
            let orig = *net.params_mut().nth(k).unwrap();
            *net.params_mut().nth(k).unwrap() = orig + h;
            let up = loss(&net);
            *net.params_mut().nth(k).unwrap() = orig - h;
            let down = loss(&net);
            *net.params_mut().nth(k).unwrap() = orig;
            let num = (up - down) / (2.0 * h);
            worst = worst.max((g - num).abs() / g.abs().max(num.abs()).max(1e-6));
        }
    }
    r.line(
        6,
        "gradient check",
        worst < GRADIENT_TOLERANCE,
        format!("10 networks, max relative error {worst:.2e} (tolerance {GRADIENT_TOLERANCE:.0e}, h = 1e-5)"),
    );
}

fn rl(r: &mut Report) {
    let t = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for model in CostModel::ALL {
        let random = parallel::evaluate(
            &Strategy::random(),
            4,
            model,
            RL_EVAL_SAMPLES,
            RL_EVAL_SEED,
            workers(),
        )
        .unwrap();
        let mut best: Option<(u64, f64)> = None;
        for seed in RL_SEEDS {
            let hp = HyperParams::new(4, RL_EPISODES, seed);
            let (net, curve) = dqn::train(&hp, model).unwrap();
            assert!(curve.iter().all(|c| c.mean_cost.is_finite()));
            let ev =
                parallel::evaluate_agent(&net, 4, model, RL_EVAL_SAMPLES, RL_EVAL_SEED, workers())
                    .unwrap();
            let below_random = ev.agent_mean < random;
            let near_markowitz = ev.agent_mean <= RL_MARKOWITZ_SLACK * ev.markowitz_mean;
            ok &= below_random && near_markowitz;
            detail.push(format!(
                "{model} seed {seed}: agent {:.4} markowitz {:.4} random {random:.4} improvement {:.2}%",
                ev.agent_mean, ev.markowitz_mean, ev.improvement
            ));
            if best.is_none_or(|(_, b)| ev.improvement > b) {
                best = Some((seed, ev.improvement));
            }
        }
        let (seed, imp) = best.unwrap();
        detail.push(format!(
            "{model} best seed {seed}: {imp:.2}% below Markowitz"
        ));
    }
    r.line(
        7,
        "reinforcement learning at n = 4",
        ok,
        format!(
            "{RL_EPISODES} episodes, {RL_EVAL_SAMPLES} evaluation samples, every seed below random and within {RL_MARKOWITZ_SLACK} x Markowitz; {}; {:.0?}",
            detail.join("; "),
            t.elapsed()
        ),
    );
}

fn persistence(r: &mut Report, chain: &AtlasChain) {
    let dir = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for a in chain.atlases() {
        let n = a.n();
        let mut first = Vec::new();
        atlas_file::write_atlas(a, &mut first).unwrap();
        let loaded = atlas_file::read_atlas(&first[..]).unwrap();
        let mut second = Vec::new();
        atlas_file::write_atlas(&loaded, &mut second).unwrap();
        let quantized = a.entries().iter().zip(loaded.entries()).all(|(x, y)| {
            x.key == y.key
                && x.weight == y.weight
                && x.record
                    .summaries()
                    .iter()
                    .zip(y.record.summaries())
                    .all(|(s, t)| {
                        s.min == t.min
                            && s.max == t.max
                            && s.best == t.best
                            && s.worst == t.worst
                            && (s.med * 4.0).round() / 4.0 == t.med
                    })
        });
        let mut csv = Vec::new();
        atlas_file::write_atlas_csv(a, "# pivots test config={} hash=0", &mut csv).unwrap();
        let csv_exact = atlas_file::read_atlas_csv(&csv[..]).unwrap() == *a;
        let good = first == second && quantized && csv_exact && first.len() == 24 + 40 * a.len();
        ok &= good;
        if !good {
            notes.push(format!("n = {n} round trip differs"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let net = QNetwork::random(4, true, &mut rng).unwrap();
    let path = dir.path().join("w.bin");
    weights::save_weights(&net, &path).unwrap();
    let back = weights::load_weights(&path, Some(4)).unwrap();
    let same_bits = net
        .weights()
        .iter()
        .chain(net.biases())
        .flatten()
        .zip(back.weights().iter().chain(back.biases()).flatten())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    let rejected = weights::load_weights(&path, Some(5)).is_err();
    ok &= same_bits && back == net && rejected;

    let mut files = Vec::new();
    for w in [1, 3] {
        let mut bytes = Vec::new();
        parallel::build_chain(5, false, w, |a| {
            let mut buf = Vec::new();
            atlas_file::write_atlas(a, &mut buf)?;
            bytes.push(buf);
            Ok(())
        })
        .unwrap();
        files.push(bytes);
    }
    let reference: Vec<Vec<u8>> = chain.atlases()[..5]
        .iter()
        .map(|a| {
            let mut buf = Vec::new();
            atlas_file::write_atlas(a, &mut buf).unwrap();
            buf
        })
        .collect();
    let rebuild_same = files[0] == files[1] && files[0] == reference;
    ok &= rebuild_same;
    r.line(
        8,
        "persistence and determinism",
        ok,
        format!(
            "atlas save/load/save byte-identical with quarter-unit medians and exact CSV for n = 1..6 {}; weights bit-exact: {same_bits}, wrong frame rejected: {rejected}; n <= 5 rebuilds with 1 and 3 workers byte-identical: {rebuild_same}",
            if notes.is_empty() { "ok".to_string() } else { notes.join(", ") }
        ),
    );
}

fn main() {
    let mut r = Report { failed: Vec::new() };
    let t = Instant::now();
    let chain = parallel::build_chain(6, false, workers(), |_| Ok(())).unwrap();
    println!(
        "built atlases n = 1..6 in {:.1?} with {} workers",
        t.elapsed(),
        workers()
    );
    class_counts(&mut r, &chain);
    oracle_equivalence(&mut r, &chain);
    worked_example(&mut r, &chain);
    figures(&mut r, &chain);
    histogram(&mut r, &chain);
    gradient_check(&mut r);
    rl(&mut r);
    persistence(&mut r, &chain);
    if r.failed.is_empty() {
        println!("acceptance: all 8 criteria passed");
    } else {
        println!("acceptance: failed criteria {:?}", r.failed);
        std::process::exit(1);
    }
}
