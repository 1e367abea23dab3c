//! Aggregate statistics over a complete atlas.
//!
//! How class values are averaged is a parameter: either once per class or
//! weighted by class size, and either as a ratio of sums or as a mean of
//! per-class ratios.

use core::fmt;
use core::str::FromStr;

use crate::atlas::{Atlas, AtlasEntry, ClassRecord, Mode};
use crate::error::Error;
use crate::matrix::CostModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregation {
    RatioOfSums,
    /// Mean of per-class ratios over classes with a nonzero denominator.
    MeanOfRatios,
    /// Mean of per-class ratios over every class; a zero denominator counts
    /// as zero saving.
    MeanOfRatiosZeroFilled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Weighting {
    PerClass,
    MatrixWeighted,
}

/// Reference cost for the density histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    MedianMinFillIn,
    BestMinFillIn,
}

impl Aggregation {
    pub const ALL: [Aggregation; 3] = [
        Aggregation::RatioOfSums,
        Aggregation::MeanOfRatios,
        Aggregation::MeanOfRatiosZeroFilled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aggregation::RatioOfSums => "ratio_of_sums",
            Aggregation::MeanOfRatios => "mean_of_ratios",
            Aggregation::MeanOfRatiosZeroFilled => "mean_of_ratios_zero_filled",
        }
    }
}

impl Weighting {
    pub const ALL: [Weighting; 2] = [Weighting::PerClass, Weighting::MatrixWeighted];

    pub fn name(self) -> &'static str {
        match self {
            Weighting::PerClass => "per_class",
            Weighting::MatrixWeighted => "matrix_weighted",
        }
    }
}

impl Baseline {
    pub const ALL: [Baseline; 2] = [Baseline::MedianMinFillIn, Baseline::BestMinFillIn];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::MedianMinFillIn => "median_minfillin",
            Baseline::BestMinFillIn => "best_minfillin",
        }
    }

    fn value(self, rec: &ClassRecord, model: CostModel) -> f64 {
        let s = rec.get(model, Mode::MinFillIn);
        match self {
            Baseline::MedianMinFillIn => s.med,
            Baseline::BestMinFillIn => s.min as f64,
        }
    }
}

macro_rules! named_enum {
    ($t:ty, $msg:literal) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $t {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Error> {
                <$t>::ALL
                    .into_iter()
                    .find(|v| v.name() == s)
                    .ok_or(Error::Parse($msg))
            }
        }
    };
}

named_enum!(
    Aggregation,
    "aggregation must be ratio_of_sums, mean_of_ratios or mean_of_ratios_zero_filled"
);
named_enum!(Weighting, "weighting must be per_class or matrix_weighted");
named_enum!(
    Baseline,
    "baseline must be median_minfillin or best_minfillin"
);

/// `100·(1 − num/den)` aggregated over classes.
fn saving<F>(atlas: &Atlas, agg: Aggregation, weighting: Weighting, pick: F) -> f64
where
    F: FnMut(&ClassRecord) -> (f64, f64),
{
    saving_over(atlas.entries().iter(), agg, weighting, pick)
}

fn saving_over<'a, I, F>(entries: I, agg: Aggregation, weighting: Weighting, mut pick: F) -> f64
where
    I: Iterator<Item = &'a AtlasEntry>,
    F: FnMut(&ClassRecord) -> (f64, f64),
{
    let mut num_sum = 0.0;
    let mut den_sum = 0.0;
    let mut ratio_sum = 0.0;
    let mut weight_sum = 0.0;
    let mut total_weight = 0.0;
    for e in entries {
        let w = match weighting {
            Weighting::PerClass => 1.0,
            Weighting::MatrixWeighted => e.weight.0 as f64,
        };
        let (num, den) = pick(&e.record);
        total_weight += w;
        num_sum += w * num;
        den_sum += w * den;
        if den > 0.0 {
            ratio_sum += w * (1.0 - num / den);
            weight_sum += w;
        }
    }
    let frac = match agg {
        Aggregation::RatioOfSums if den_sum > 0.0 => 1.0 - num_sum / den_sum,
        Aggregation::MeanOfRatios if weight_sum > 0.0 => ratio_sum / weight_sum,
        Aggregation::MeanOfRatiosZeroFilled if total_weight > 0.0 => ratio_sum / total_weight,
        _ => 0.0,
    };
    100.0 * frac
}

/// Saving of the minimum-fill-in median over the unrestricted median.
pub fn savings_markowitz_vs_median(
    atlas: &Atlas,
    model: CostModel,
    agg: Aggregation,
    weighting: Weighting,
) -> f64 {
    saving(atlas, agg, weighting, |r| {
        (
            r.get(model, Mode::MinFillIn).med,
            r.get(model, Mode::All).med,
        )
    })
}

/// Saving of the optimum over the minimum-fill-in median.
pub fn savings_optimal_vs_markowitz(
    atlas: &Atlas,
    model: CostModel,
    agg: Aggregation,
    weighting: Weighting,
) -> f64 {
    saving(atlas, agg, weighting, |r| {
        (
            r.get(model, Mode::All).min as f64,
            r.get(model, Mode::MinFillIn).med,
        )
    })
}

/// Percentage of classes (or matrices) where the best minimum-fill-in
/// sequence is optimal.
pub fn minfillin_optimal_fraction(atlas: &Atlas, model: CostModel, weighting: Weighting) -> f64 {
    let mut hit = 0.0;
    let mut total = 0.0;
    for e in atlas.entries() {
        let w = match weighting {
            Weighting::PerClass => 1.0,
            Weighting::MatrixWeighted => e.weight.0 as f64,
        };
        total += w;
        if e.record.get(model, Mode::MinFillIn).min == e.record.get(model, Mode::All).min {
            hit += w;
        }
    }
    100.0 * hit / total
}

/// Density bucket `0..=9` for a matrix with `nonzeros` of `cells` entries;
/// bucket `k` is `[10k, 10k + 10)` percent, the last one closed at 100.
pub fn density_bucket(nonzeros: u32, cells: u32) -> usize {
    ((10 * nonzeros / cells) as usize).min(9)
}

/// Per density bucket, the saving `100·(1 − optimum/B)` of the optimum over
/// the baseline `B`, aggregated like the other statistics. Empty buckets
/// report 0.
pub fn density_histogram(
    atlas: &Atlas,
    model: CostModel,
    baseline: Baseline,
    agg: Aggregation,
    weighting: Weighting,
) -> [f64; 10] {
    let cells = (atlas.n() * atlas.n()) as u32;
    let bucket_of = |e: &AtlasEntry| density_bucket(e.key.bits().count_ones(), cells);
    core::array::from_fn(|k| {
        let members = atlas.entries().iter().filter(|e| bucket_of(e) == k);
        saving_over(members, agg, weighting, |r| {
            (r.get(model, Mode::All).min as f64, baseline.value(r, model))
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buckets() {
        assert_eq!(density_bucket(0, 36), 0);
        assert_eq!(density_bucket(3, 36), 0);
        assert_eq!(density_bucket(4, 36), 1);
        assert_eq!(density_bucket(18, 36), 5);
        assert_eq!(density_bucket(35, 36), 9);
        assert_eq!(density_bucket(36, 36), 9);
    }

    #[test]
    fn small_sizes_have_no_gap() {
        let chain = Atlas::build_chain(3, false).unwrap();
        let a2 = chain.get(2).unwrap();
        for model in CostModel::ALL {
            for agg in Aggregation::ALL {
                for w in Weighting::ALL {
                    assert_eq!(savings_markowitz_vs_median(a2, model, agg, w), 0.0);
                    assert_eq!(savings_optimal_vs_markowitz(a2, model, agg, w), 0.0);
                }
            }
            for n in 2..=3 {
                assert_eq!(
                    minfillin_optimal_fraction(chain.get(n).unwrap(), model, Weighting::PerClass),
                    100.0
                );
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for a in Aggregation::ALL {
            assert_eq!(a.name().parse::<Aggregation>().unwrap(), a);
        }
        for w in Weighting::ALL {
            assert_eq!(w.to_string().parse::<Weighting>().unwrap(), w);
        }
        assert!("median".parse::<Baseline>().is_err());
    }
}
