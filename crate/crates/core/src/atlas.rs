//! The exhaustive cost database.
//!
//! For every ~ class of `n × n` patterns the atlas stores the minimal,
//! maximal and median total elimination cost over pivot sequences, for both
//! cost models and for two pivot rules (any nonzero, or minimum fill-in only).
//! Size `n` is computed from size `n - 1` by trying every first step and
//! looking the remainder up.
//!
//! Conventions:
//! - If a free pivot exists, the lexicographically smallest one is taken and
//!   the class inherits the successor's record; any free pivot gives the same
//!   totals.
//! - Medians run over the per-pivot values actually considered; an even count
//!   takes the mean of the two middle values.
//! - In minimum-fill-in mode the successor values are the minimum-fill-in
//!   values too, at every depth.
//! - Pivots are reported in the frame of the canonical representative.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::canon::{self, CanonicalKey, Canonizer, ClassWeight};
use crate::error::{Error, Result};
use crate::matrix::{BitMatrix, CostModel, Ones, Pivot};

/// Which pivots a strategy may consider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    All,
    MinFillIn,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::All => "all",
            Mode::MinFillIn => "minfillin",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Mode::All),
            "minfillin" => Ok(Mode::MinFillIn),
            _ => Err(Error::Parse("mode must be `all` or `minfillin`")),
        }
    }
}

/// Fixed combination order used by records and files.
pub const COMBOS: [(CostModel, Mode); 4] = [
    (CostModel::Field, Mode::All),
    (CostModel::Field, Mode::MinFillIn),
    (CostModel::Ring, Mode::All),
    (CostModel::Ring, Mode::MinFillIn),
];

fn combo_index(model: CostModel, mode: Mode) -> usize {
    match (model, mode) {
        (CostModel::Field, Mode::All) => 0,
        (CostModel::Field, Mode::MinFillIn) => 1,
        (CostModel::Ring, Mode::All) => 2,
        (CostModel::Ring, Mode::MinFillIn) => 3,
    }
}

/// Aggregates for one (model, mode) combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSummary {
    pub min: u16,
    pub max: u16,
    pub med: f64,
    pub best: Option<Pivot>,
    pub worst: Option<Pivot>,
}

impl CostSummary {
    pub const ZERO: CostSummary = CostSummary {
        min: 0,
        max: 0,
        med: 0.0,
        best: None,
        worst: None,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassRecord {
    summaries: [CostSummary; 4],
}

impl ClassRecord {
    pub const ZERO: ClassRecord = ClassRecord {
        summaries: [CostSummary::ZERO; 4],
    };

    pub fn new(summaries: [CostSummary; 4]) -> Self {
        ClassRecord { summaries }
    }

    pub fn get(&self, model: CostModel, mode: Mode) -> &CostSummary {
        &self.summaries[combo_index(model, mode)]
    }

    /// Summaries in [`COMBOS`] order.
    pub fn summaries(&self) -> &[CostSummary; 4] {
        &self.summaries
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtlasEntry {
    pub key: CanonicalKey,
    pub weight: ClassWeight,
    pub record: ClassRecord,
}

/// All class records for one size `n`, sorted by key.
#[derive(Debug, Clone)]
pub struct Atlas {
    n: usize,
    entries: Vec<AtlasEntry>,
    canon: Canonizer,
}

impl PartialEq for Atlas {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.entries == other.entries
    }
}

/// Median of a non-empty list; even lengths average the middle pair.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        (values[k / 2 - 1] + values[k / 2]) / 2.0
    }
}

fn add_cost(a: u16, b: u32) -> Result<u16> {
    u16::try_from(a as u32 + b).map_err(|_| Error::CostOverflow)
}

impl Atlas {
    /// The 0×0 atlas: a single all-zero record for the empty matrix.
    pub fn terminal() -> Atlas {
        Atlas {
            n: 0,
            entries: alloc::vec![AtlasEntry {
                key: CanonicalKey::from_canonical_bits(0, 0).unwrap(),
                weight: ClassWeight(1),
                record: ClassRecord::ZERO,
            }],
            canon: Canonizer::new(0),
        }
    }

    /// The 1×1 atlas; every cost is zero.
    pub fn base() -> Atlas {
        Atlas::build(&Atlas::terminal(), false).expect("1x1 classes")
    }

    /// Enumerates the `n = prev.n() + 1` classes and computes their records.
    pub fn build(prev: &Atlas, allow_large: bool) -> Result<Atlas> {
        let n = prev.n + 1;
        let classes = canon::enumerate_canonical_classes(n, allow_large)?;
        let entries = Atlas::build_records(&classes, prev)?;
        Atlas::from_entries(n, entries)
    }

    /// Atlases for sizes `1..=n`.
    pub fn build_chain(n: usize, allow_large: bool) -> Result<AtlasChain> {
        let mut chain = AtlasChain::new();
        let mut prev = Atlas::terminal();
        for _ in 1..=n {
            prev = Atlas::build(&prev, allow_large)?;
            chain.push(prev.clone())?;
        }
        Ok(chain)
    }

    /// Records for a slice of size-`n` classes given the complete `n - 1`
    /// atlas. Independent slices can be computed separately and concatenated.
    pub fn build_records(
        classes: &[(CanonicalKey, ClassWeight)],
        prev: &Atlas,
    ) -> Result<Vec<AtlasEntry>> {
        classes
            .iter()
            .map(|&(key, weight)| {
                if key.n() != prev.n + 1 {
                    return Err(Error::SizeMismatch {
                        expected: prev.n + 1,
                        actual: key.n(),
                    });
                }
                Ok(AtlasEntry {
                    key,
                    weight,
                    record: class_record(&key.matrix(), prev)?,
                })
            })
            .collect()
    }

    /// Assembles an atlas; entries must be sorted by key without repeats.
    pub fn from_entries(n: usize, entries: Vec<AtlasEntry>) -> Result<Atlas> {
        if entries.iter().any(|e| e.key.n() != n) {
            return Err(Error::Invalid("entry of the wrong size"));
        }
        if entries.windows(2).any(|w| w[0].key >= w[1].key) {
            return Err(Error::Invalid("entries not strictly sorted by key"));
        }
        Ok(Atlas {
            n,
            entries,
            canon: Canonizer::new(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[AtlasEntry] {
        &self.entries
    }

    pub fn canonizer(&self) -> &Canonizer {
        &self.canon
    }

    pub fn entry_by_key(&self, key: &CanonicalKey) -> Result<&AtlasEntry> {
        self.entries
            .binary_search_by(|e| e.key.cmp(key))
            .map(|i| &self.entries[i])
            .map_err(|_| Error::MissingKey {
                n: key.n(),
                bits: key.bits(),
            })
    }

    /// Entry of the class containing `m`. Pivots inside the record refer to
    /// the canonical representative `entry.key.matrix()`, not to `m`.
    pub fn entry(&self, m: &BitMatrix) -> Result<&AtlasEntry> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        if m.rows() != self.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                actual: m.rows(),
            });
        }
        self.entry_by_key(&self.canon.canonical(m))
    }

    pub fn lookup(&self, m: &BitMatrix) -> Result<&ClassRecord> {
        self.entry(m).map(|e| &e.record)
    }
}

/// One record from a single elimination step plus successor lookups.
fn class_record(m: &BitMatrix, prev: &Atlas) -> Result<ClassRecord> {
    if m.is_zero() {
        return Ok(ClassRecord::ZERO);
    }
    if let Some(p) = m.first_free_pivot() {
        let succ = prev.lookup(&m.eliminate_unchecked(p))?;
        let mut out = *succ;
        for s in &mut out.summaries {
            s.best = Some(p);
            s.worst = Some(p);
        }
        return Ok(out);
    }

    struct Option_ {
        pivot: Pivot,
        min_fill: bool,
        cost: [u32; 2],
        succ: ClassRecord,
    }
    let min_fill = m.min_fill_in_mask();
    let mut options = Vec::with_capacity(m.popcount() as usize);
    for b in Ones(m.bits()) {
        let pivot = Pivot::new(b / 8, b % 8);
        let succ = *prev.lookup(&m.eliminate_unchecked(pivot))?;
        options.push(Option_ {
            pivot,
            min_fill: min_fill >> b & 1 == 1,
            cost: [
                m.step_cost_unchecked(pivot, CostModel::Field),
                m.step_cost_unchecked(pivot, CostModel::Ring),
            ],
            succ,
        });
    }

    let mut summaries = [CostSummary::ZERO; 4];
    let mut meds = Vec::with_capacity(options.len());
    for (slot, &(model, mode)) in summaries.iter_mut().zip(COMBOS.iter()) {
        let mi = model as usize;
        let mut best: Option<(u16, Pivot)> = None;
        let mut worst: Option<(u16, Pivot)> = None;
        meds.clear();
        for o in options.iter().filter(|o| mode == Mode::All || o.min_fill) {
            let s = o.succ.get(model, mode);
            let lo = add_cost(s.min, o.cost[mi])?;
            let hi = add_cost(s.max, o.cost[mi])?;
            if best.is_none_or(|(v, _)| lo < v) {
                best = Some((lo, o.pivot));
            }
            if worst.is_none_or(|(v, _)| hi > v) {
                worst = Some((hi, o.pivot));
            }
            meds.push(s.med + o.cost[mi] as f64);
        }
        let (best, worst) = (
            best.expect("nonzero matrix"),
            worst.expect("nonzero matrix"),
        );
        *slot = CostSummary {
            min: best.0,
            max: worst.0,
            med: median(&mut meds),
            best: Some(best.1),
            worst: Some(worst.1),
        };
    }
    Ok(ClassRecord { summaries })
}

/// Atlases for consecutive sizes `1..=n`.
#[derive(Debug, Clone, Default)]
pub struct AtlasChain {
    atlases: Vec<Atlas>,
}

impl AtlasChain {
    pub fn new() -> Self {
        AtlasChain::default()
    }

    /// Appends the atlas for the next size.
    pub fn push(&mut self, atlas: Atlas) -> Result<()> {
        let expected = self.atlases.len() + 1;
        if atlas.n() != expected {
            return Err(Error::SizeMismatch {
                expected,
                actual: atlas.n(),
            });
        }
        self.atlases.push(atlas);
        Ok(())
    }

    /// Largest size covered.
    pub fn max_n(&self) -> usize {
        self.atlases.len()
    }

    pub fn get(&self, n: usize) -> Option<&Atlas> {
        n.checked_sub(1).and_then(|i| self.atlases.get(i))
    }

    pub fn atlases(&self) -> &[Atlas] {
        &self.atlases
    }

    /// Record of a square matrix of any covered size; 0×0 is all-zero.
    pub fn lookup(&self, m: &BitMatrix) -> Result<ClassRecord> {
        if m.rows() == 0 && m.cols() == 0 {
            return Ok(ClassRecord::ZERO);
        }
        let atlas = self.get(m.rows()).ok_or(Error::SizeMismatch {
            expected: self.max_n(),
            actual: m.rows(),
        })?;
        atlas.lookup(m).copied()
    }
}

/// (min, max, median) total cost.
pub type CostTriple = (u32, u32, f64);

/// Independent reference for the atlas: plain recursion over raw matrices,
/// memoized on the exact pattern. Applies the same free-pivot and median
/// rules but never canonicalizes. Limited to n ≤ 4.
#[derive(Debug, Default)]
pub struct Oracle {
    memo: BTreeMap<(u8, u64, u8), CostTriple>,
}

impl Oracle {
    pub fn new() -> Self {
        Oracle::default()
    }

    pub fn cost(&mut self, m: &BitMatrix, model: CostModel, mode: Mode) -> Result<CostTriple> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        if m.rows() > 4 {
            return Err(Error::ResourceGuard { n: m.rows() });
        }
        Ok(self.recurse(m, model, mode))
    }

    fn recurse(&mut self, m: &BitMatrix, model: CostModel, mode: Mode) -> CostTriple {
        if m.is_zero() {
            return (0, 0, 0.0);
        }
        let tag = (m.rows() as u8, m.bits(), combo_index(model, mode) as u8);
        if let Some(&hit) = self.memo.get(&tag) {
            return hit;
        }
        let out = if let Some(p) = m.nonzeros().find(|&p| m.is_free_pivot(p).unwrap()) {
            self.recurse(&m.eliminate(p).unwrap(), model, mode)
        } else {
            let candidates: Vec<Pivot> = match mode {
                Mode::All => m.nonzeros().collect(),
                Mode::MinFillIn => m.min_fill_in_pivots(),
            };
            let mut lo = u32::MAX;
            let mut hi = 0;
            let mut meds = Vec::new();
            for p in candidates {
                let step = m.step_cost(p, model).unwrap();
                let (a, b, c) = self.recurse(&m.eliminate(p).unwrap(), model, mode);
                lo = lo.min(a + step);
                hi = hi.max(b + step);
                meds.push(c + step as f64);
            }
            (lo, hi, median(&mut meds))
        };
        self.memo.insert(tag, out);
        out
    }
}

/// One-shot form of [`Oracle::cost`].
pub fn oracle_cost(m: &BitMatrix, model: CostModel, mode: Mode) -> Result<CostTriple> {
    Oracle::new().cost(m, model, mode)
}
