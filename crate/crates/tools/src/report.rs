//! Plot-ready CSV tables.

use std::io::Write;

use pivots_core::dqn::CurvePoint;
use pivots_core::stats::{self, Aggregation, Baseline, Weighting};
use pivots_core::{Atlas, CostModel};

use crate::error::{Result, ToolError};

pub const FIGURE_HEADER: &str = "n,model,aggregation,weighting,value";
pub const HISTOGRAM_HEADER: &str = "bucket_lo,bucket_hi,model,baseline,value";
pub const CURVE_HEADER: &str = "episode,mean_cost,epsilon";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Figure {
    /// Saving of minimum fill-in over the overall median.
    Savings1,
    /// Saving of the optimum over the minimum-fill-in median.
    Savings2,
    /// Share of classes where minimum fill-in is optimal.
    #[value(name = "optimal_fraction", alias = "optimal-fraction")]
    OptimalFraction,
    /// Optimum saving by density bucket.
    Density,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureRow {
    pub n: usize,
    pub model: CostModel,
    pub aggregation: Option<Aggregation>,
    pub weighting: Weighting,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramRow {
    pub bucket: usize,
    pub model: CostModel,
    pub baseline: Baseline,
    pub aggregation: Aggregation,
    pub weighting: Weighting,
    pub value: f64,
}

/// Values of a line figure for every atlas and option combination.
pub fn figure_rows(
    figure: Figure,
    atlases: &[&Atlas],
    aggregations: &[Aggregation],
    weightings: &[Weighting],
) -> Vec<FigureRow> {
    let mut out = Vec::new();
    for model in CostModel::ALL {
        for &a in atlases {
            for &weighting in weightings {
                if figure == Figure::OptimalFraction {
                    let value = stats::minfillin_optimal_fraction(a, model, weighting);
                    out.push(FigureRow {
                        n: a.n(),
                        model,
                        aggregation: None,
                        weighting,
                        value,
                    });
                    continue;
                }
                for &agg in aggregations {
                    let value = match figure {
                        Figure::Savings1 => {
                            stats::savings_markowitz_vs_median(a, model, agg, weighting)
                        }
                        _ => stats::savings_optimal_vs_markowitz(a, model, agg, weighting),
                    };
                    out.push(FigureRow {
                        n: a.n(),
                        model,
                        aggregation: Some(agg),
                        weighting,
                        value,
                    });
                }
            }
        }
    }
    out
}

pub fn histogram_rows(
    atlas: &Atlas,
    baselines: &[Baseline],
    aggregations: &[Aggregation],
    weightings: &[Weighting],
) -> Vec<HistogramRow> {
    let mut out = Vec::new();
    for model in CostModel::ALL {
        for &baseline in baselines {
            for &aggregation in aggregations {
                for &weighting in weightings {
                    let h =
                        stats::density_histogram(atlas, model, baseline, aggregation, weighting);
                    out.extend(h.iter().enumerate().map(|(bucket, &value)| HistogramRow {
                        bucket,
                        model,
                        baseline,
                        aggregation,
                        weighting,
                        value,
                    }));
                }
            }
        }
    }
    out
}

fn io(e: std::io::Error) -> ToolError {
    ToolError::io("<report stream>", e)
}

/// Option-free figures name the aggregation `none`.
pub fn write_figure<W: Write>(rows: &[FigureRow], meta: &str, mut w: W) -> Result<()> {
    writeln!(w, "{meta}\n{FIGURE_HEADER}").map_err(io)?;
    for r in rows {
        let agg = r.aggregation.map_or("none", |a| a.name());
        writeln!(
            w,
            "{},{},{},{},{:.4}",
            r.n, r.model, agg, r.weighting, r.value
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// The baseline column reads `<baseline>/<aggregation>/<weighting>` so the
/// five-column layout can carry every combination.
pub fn write_histogram<W: Write>(rows: &[HistogramRow], meta: &str, mut w: W) -> Result<()> {
    writeln!(w, "{meta}\n{HISTOGRAM_HEADER}").map_err(io)?;
    for r in rows {
        let lo = 10 * r.bucket;
        writeln!(
            w,
            "{},{},{},{}/{}/{},{:.4}",
            lo,
            lo + 10,
            r.model,
            r.baseline,
            r.aggregation,
            r.weighting,
            r.value
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_curve<W: Write>(curve: &[CurvePoint], meta: &str, mut w: W) -> Result<()> {
    writeln!(w, "{meta}\n{CURVE_HEADER}").map_err(io)?;
    for c in curve {
        writeln!(w, "{},{:.6},{:.6}", c.episode, c.mean_cost, c.epsilon).map_err(io)?;
    }
    w.flush().map_err(io)
}
