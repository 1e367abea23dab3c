//! The {0,∗} pattern model.
//!
//! A [`BitMatrix`] stores up to 8×8 entries in one `u64`; entry `(i, j)` is
//! bit `8 * i + j`, so each row occupies one byte with column 0 in the least
//! significant bit. All arithmetic is done on the sparsity pattern only:
//! two nonzeros never cancel.

use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul};
use core::str::FromStr;

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

/// An element of the two-element semiring S = {0, ∗}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Entry {
    Zero,
    Star,
}

impl Entry {
    pub fn is_star(self) -> bool {
        self == Entry::Star
    }
}

impl From<bool> for Entry {
    fn from(b: bool) -> Self {
        if b {
            Entry::Star
        } else {
            Entry::Zero
        }
    }
}

impl Add for Entry {
    type Output = Entry;

    /// ∗ + ∗ = ∗: there are no accidental cancellations.
    fn add(self, rhs: Entry) -> Entry {
        Entry::from(self.is_star() || rhs.is_star())
    }
}

impl Mul for Entry {
    type Output = Entry;

    fn mul(self, rhs: Entry) -> Entry {
        Entry::from(self.is_star() && rhs.is_star())
    }
}

/// How the operations of one elimination step are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CostModel {
    /// Row multipliers are formed by dividing by the pivot.
    Field,
    /// Fraction-free: affected rows are multiplied by the pivot instead.
    Ring,
}

impl CostModel {
    pub const ALL: [CostModel; 2] = [CostModel::Field, CostModel::Ring];

    pub fn name(self) -> &'static str {
        match self {
            CostModel::Field => "field",
            CostModel::Ring => "ring",
        }
    }
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CostModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "field" | "Field" => Ok(CostModel::Field),
            "ring" | "Ring" => Ok(CostModel::Ring),
            _ => Err(Error::Parse("cost model must be `field` or `ring`")),
        }
    }
}

/// A pivot position, 0-based. `Display` prints it 1-based as `row:col`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pivot {
    pub row: u8,
    pub col: u8,
}

impl Pivot {
    pub const fn new(row: usize, col: usize) -> Self {
        Pivot {
            row: row as u8,
            col: col as u8,
        }
    }

    pub fn row(self) -> usize {
        self.row as usize
    }

    pub fn col(self) -> usize {
        self.col as usize
    }

    fn bit(self) -> u64 {
        1u64 << (8 * self.row() + self.col())
    }
}

impl fmt::Display for Pivot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.row + 1, self.col + 1)
    }
}

/// Parses the 1-based `row:col` form.
impl FromStr for Pivot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        const MSG: &str = "pivot must be `row:col` with 1-based indices up to 8";
        let (r, c) = s.split_once(':').ok_or(Error::Parse(MSG))?;
        let parse = |t: &str| match t.trim().parse::<usize>() {
            Ok(v @ 1..=MAX_DIM) => Ok(v - 1),
            _ => Err(Error::Parse(MSG)),
        };
        Ok(Pivot::new(parse(r)?, parse(c)?))
    }
}

/// Nonzero counts per row (`r_i`) and per column (`c_j`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Profile {
    rows: u8,
    cols: u8,
    row_counts: [u8; MAX_DIM],
    col_counts: [u8; MAX_DIM],
}

impl Profile {
    pub fn row_counts(&self) -> &[u8] {
        &self.row_counts[..self.rows as usize]
    }

    pub fn col_counts(&self) -> &[u8] {
        &self.col_counts[..self.cols as usize]
    }

    pub fn row(&self, i: usize) -> u32 {
        self.row_counts[i] as u32
    }

    pub fn col(&self, j: usize) -> u32 {
        self.col_counts[j] as u32
    }
}

/// One byte per row, low `n` bits.
#[inline]
pub(crate) const fn row_mask(cols: usize) -> u8 {
    if cols >= 8 {
        0xFF
    } else {
        ((1u16 << cols) - 1) as u8
    }
}

#[inline]
pub(crate) const fn window_mask(rows: usize, cols: usize) -> u64 {
    let mut mask = 0u64;
    let mut i = 0;
    while i < rows {
        mask |= (row_mask(cols) as u64) << (8 * i);
        i += 1;
    }
    mask
}

/// Repeats a row byte across the low `rows` bytes of a word.
#[inline]
fn broadcast(byte: u8, rows: usize) -> u64 {
    (byte as u64).wrapping_mul(0x0101_0101_0101_0101) & window_mask(rows, 8)
}

/// Deletes column `col` from every row byte of `bits`.
#[inline]
fn drop_column(bits: u64, col: usize) -> u64 {
    let low = broadcast(((1u16 << col) - 1) as u8, 8);
    let high = broadcast(!(((1u16 << (col + 1)) - 1) as u8), 8);
    (bits & low) | ((bits & high) >> 1)
}

/// Deletes row `row` from `bits`.
#[inline]
fn drop_row(bits: u64, row: usize) -> u64 {
    let below = if row == 0 {
        0
    } else {
        u64::MAX >> (64 - 8 * row)
    };
    let above = if row >= 7 {
        0
    } else {
        u64::MAX << (8 * (row + 1))
    };
    (bits & below) | ((bits & above) >> 8)
}

/// A zero/nonzero pattern of size at most 8×8.
///
/// Bits outside the `rows × cols` window are always clear, so the derived
/// equality compares dimensions and pattern. The 0×0 matrix is legal and is
/// the terminal state of every elimination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitMatrix {
    rows: u8,
    cols: u8,
    bits: u64,
}

impl BitMatrix {
    pub const EMPTY: BitMatrix = BitMatrix {
        rows: 0,
        cols: 0,
        bits: 0,
    };

    pub fn new(rows: usize, cols: usize, bits: u64) -> Result<Self> {
        if rows > MAX_DIM || cols > MAX_DIM {
            return Err(Error::TooLarge { rows, cols });
        }
        if bits & !window_mask(rows, cols) != 0 {
            return Err(Error::Padding { rows, cols });
        }
        Ok(Self::from_raw(rows, cols, bits))
    }

    /// Builds a square matrix, clearing any bits outside the window.
    pub fn square_masked(n: usize, bits: u64) -> Self {
        assert!(n <= MAX_DIM);
        Self::from_raw(n, n, bits & window_mask(n, n))
    }

    #[inline]
    pub(crate) const fn from_raw(rows: usize, cols: usize, bits: u64) -> Self {
        BitMatrix {
            rows: rows as u8,
            cols: cols as u8,
            bits,
        }
    }

    pub fn zero(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, 0)
    }

    pub fn full(rows: usize, cols: usize) -> Result<Self> {
        if rows > MAX_DIM || cols > MAX_DIM {
            return Err(Error::TooLarge { rows, cols });
        }
        Ok(Self::from_raw(rows, cols, window_mask(rows, cols)))
    }

    /// Builds a matrix from row bytes (bit `j` of byte `i` is entry `(i, j)`).
    pub fn from_row_bytes(cols: usize, rows: &[u8]) -> Result<Self> {
        if rows.len() > MAX_DIM || cols > MAX_DIM {
            return Err(Error::TooLarge {
                rows: rows.len(),
                cols,
            });
        }
        let bits = rows
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &r)| acc | (r as u64) << (8 * i));
        Self::new(rows.len(), cols, bits)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows as usize
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols as usize
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn popcount(&self) -> u32 {
        self.bits.count_ones()
    }

    #[inline]
    pub fn row_byte(&self, i: usize) -> u8 {
        (self.bits >> (8 * i)) as u8
    }

    /// Bit `i` of the result is entry `(i, j)`.
    #[inline]
    pub fn col_byte(&self, j: usize) -> u8 {
        let mut out = 0u8;
        for i in 0..self.rows() {
            out |= ((self.bits >> (8 * i + j)) as u8 & 1) << i;
        }
        out
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Entry {
        Entry::from(i < self.rows() && j < self.cols() && self.bits >> (8 * i + j) & 1 == 1)
    }

    pub fn is_star(&self, p: Pivot) -> bool {
        self.get(p.row(), p.col()).is_star()
    }

    /// Returns a copy with entry `(i, j)` set to `e`.
    pub fn with(&self, i: usize, j: usize, e: Entry) -> Result<Self> {
        let p = Pivot::new(i, j);
        if i >= self.rows() || j >= self.cols() {
            return Err(Error::OutOfBounds(p));
        }
        let bits = match e {
            Entry::Star => self.bits | p.bit(),
            Entry::Zero => self.bits & !p.bit(),
        };
        Ok(Self { bits, ..*self })
    }

    /// Nonzero positions in row-major order.
    pub fn nonzeros(&self) -> impl Iterator<Item = Pivot> + '_ {
        Ones(self.bits).map(|b| Pivot::new(b / 8, b % 8))
    }

    pub fn profile(&self) -> Profile {
        let mut p = Profile {
            rows: self.rows,
            cols: self.cols,
            row_counts: [0; MAX_DIM],
            col_counts: [0; MAX_DIM],
        };
        for i in 0..self.rows() {
            p.row_counts[i] = self.row_byte(i).count_ones() as u8;
        }
        for j in 0..self.cols() {
            p.col_counts[j] = self.col_byte(j).count_ones() as u8;
        }
        p
    }

    pub fn density(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.popcount() as f64 / (self.rows() * self.cols()) as f64
    }

    fn check_pivot(&self, p: Pivot) -> Result<()> {
        if p.row() >= self.rows() || p.col() >= self.cols() {
            return Err(Error::OutOfBounds(p));
        }
        if !self.is_star(p) {
            return Err(Error::ZeroPivot(p));
        }
        Ok(())
    }

    /// Row and column nonzero counts through the pivot.
    #[inline]
    fn counts_at(&self, p: Pivot) -> (u32, u32) {
        (
            self.row_byte(p.row()).count_ones(),
            self.col_byte(p.col()).count_ones(),
        )
    }

    /// Markowitz fill-in `(r - 1)(c - 1)`.
    pub fn fill_in(&self, p: Pivot) -> Result<u32> {
        self.check_pivot(p)?;
        let (r, c) = self.counts_at(p);
        Ok((r - 1) * (c - 1))
    }

    /// A pivot alone in its row or its column costs nothing to eliminate.
    pub fn is_free_pivot(&self, p: Pivot) -> Result<bool> {
        self.check_pivot(p)?;
        let (r, c) = self.counts_at(p);
        Ok(r == 1 || c == 1)
    }

    /// Number of counted operations for one elimination step at `p`.
    pub fn step_cost(&self, p: Pivot, model: CostModel) -> Result<u32> {
        self.check_pivot(p)?;
        Ok(self.step_cost_unchecked(p, model))
    }

    #[inline]
    pub(crate) fn step_cost_unchecked(&self, p: Pivot, model: CostModel) -> u32 {
        let (r, c) = self.counts_at(p);
        if r == 1 || c == 1 {
            return 0;
        }
        let tail = self.row_byte(p.row()) & !(1u8 << p.col());
        let affected = self.col_byte(p.col()) & !(1u8 << p.row());
        let mut clashes = 0;
        let mut scaled = 0;
        for k in Ones(affected as u64) {
            let row = self.row_byte(k);
            clashes += (row & tail).count_ones();
            scaled += row.count_ones() - 1;
        }
        let products = (r - 1) * (c - 1);
        match model {
            CostModel::Field => (c - 1) + products + clashes,
            CostModel::Ring => scaled + products + clashes,
        }
    }

    /// One elimination step: every row with a nonzero in the pivot column
    /// takes the union with the pivot row, then the pivot row and column are
    /// removed. The result does not depend on the cost model.
    pub fn eliminate(&self, p: Pivot) -> Result<BitMatrix> {
        self.check_pivot(p)?;
        Ok(self.eliminate_unchecked(p))
    }

    #[inline]
    pub(crate) fn eliminate_unchecked(&self, p: Pivot) -> BitMatrix {
        let tail = self.row_byte(p.row());
        let affected = self.col_byte(p.col());
        // bytes of rows that receive the pivot row
        let mut spread = 0u64;
        for k in Ones(affected as u64) {
            spread |= 0xFFu64 << (8 * k);
        }
        let bits = self.bits | (broadcast(tail, 8) & spread);
        let bits = drop_column(drop_row(bits, p.row()), p.col());
        BitMatrix::from_raw(self.rows() - 1, self.cols() - 1, bits)
    }

    /// Bitmask (same layout as `bits`) of the nonzeros with minimal fill-in.
    pub(crate) fn min_fill_in_mask(&self) -> u64 {
        let prof = self.profile();
        let mut best = u32::MAX;
        let mut mask = 0u64;
        for b in Ones(self.bits) {
            let (i, j) = (b / 8, b % 8);
            let f = (prof.row(i) - 1) * (prof.col(j) - 1);
            if f < best {
                best = f;
                mask = 0;
            }
            if f == best {
                mask |= 1 << b;
            }
        }
        mask
    }

    /// All nonzeros achieving the minimal fill-in; empty for a zero matrix.
    pub fn min_fill_in_pivots(&self) -> Vec<Pivot> {
        Ones(self.min_fill_in_mask())
            .map(|b| Pivot::new(b / 8, b % 8))
            .collect()
    }

    /// Bitmask of the free pivots.
    pub(crate) fn free_mask(&self) -> u64 {
        let mut mask = 0u64;
        for i in 0..self.rows() {
            let row = self.row_byte(i);
            if row.count_ones() == 1 {
                mask |= (row as u64) << (8 * i);
            }
        }
        for j in 0..self.cols() {
            let col = self.col_byte(j);
            if col.count_ones() == 1 {
                mask |= 1u64 << (8 * col.trailing_zeros() as usize + j);
            }
        }
        mask
    }

    /// Lexicographically smallest free pivot, if any.
    pub fn first_free_pivot(&self) -> Option<Pivot> {
        let m = self.free_mask();
        (m != 0).then(|| {
            let b = m.trailing_zeros() as usize;
            Pivot::new(b / 8, b % 8)
        })
    }

    pub fn free_pivots(&self) -> Vec<Pivot> {
        Ones(self.free_mask())
            .map(|b| Pivot::new(b / 8, b % 8))
            .collect()
    }

    /// Pads with zero rows or columns up to a square of side `max(rows, cols)`.
    pub fn padded_square(&self) -> BitMatrix {
        let n = self.rows().max(self.cols());
        BitMatrix::from_raw(n, n, self.bits)
    }

    /// Embeds the pattern at the top-left of a `rows × cols` frame.
    pub fn embed(&self, rows: usize, cols: usize) -> Result<BitMatrix> {
        if rows < self.rows() || cols < self.cols() {
            return Err(Error::SizeMismatch {
                expected: rows.max(cols),
                actual: self.rows().max(self.cols()),
            });
        }
        BitMatrix::new(rows, cols, self.bits)
    }

    /// Shrinks the dimensions to `rows × cols`; the removed part must be zero.
    pub fn crop(&self, rows: usize, cols: usize) -> Result<BitMatrix> {
        BitMatrix::new(rows, cols, self.bits)
    }

    /// Applies `new(i, j) = old(row_perm[i], col_perm[j])`.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Result<BitMatrix> {
        if row_perm.len() != self.rows() || col_perm.len() != self.cols() {
            return Err(Error::Invalid("permutation length does not match"));
        }
        let mut bits = 0u64;
        for (i, &ri) in row_perm.iter().enumerate() {
            for (j, &cj) in col_perm.iter().enumerate() {
                if self.get(ri, cj).is_star() {
                    bits |= 1 << (8 * i + j);
                }
            }
        }
        Ok(BitMatrix::from_raw(self.rows(), self.cols(), bits))
    }
}

/// Iterates the set bit positions of a word, lowest first.
#[derive(Clone, Copy)]
pub(crate) struct Ones(pub u64);

impl Iterator for Ones {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let b = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(b)
    }
}

impl fmt::Display for BitMatrix {
    /// `110/011/111`; the alternate form prints one row per line with `*`/`.`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (star, zero, sep) = if f.alternate() {
            ('*', '.', '\n')
        } else {
            ('1', '0', '/')
        };
        for i in 0..self.rows() {
            if i > 0 {
                write!(f, "{sep}")?;
            }
            for j in 0..self.cols() {
                let c = if self.get(i, j).is_star() { star } else { zero };
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for BitMatrix {
    type Err = Error;

    /// Rows separated by newlines or `/`; `0`/`.` is zero, `1`/`*` nonzero.
    fn from_str(s: &str) -> Result<Self> {
        let mut bits = 0u64;
        let mut rows = 0usize;
        let mut cols = None;
        for line in s.split(['\n', '/']) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if rows == MAX_DIM {
                return Err(Error::Parse("more than 8 rows"));
            }
            let mut width = 0usize;
            for ch in line.chars().filter(|c| !c.is_whitespace()) {
                let star = match ch {
                    '1' | '*' => true,
                    '0' | '.' => false,
                    _ => return Err(Error::Parse("unexpected character")),
                };
                if width == MAX_DIM {
                    return Err(Error::Parse("more than 8 columns"));
                }
                if star {
                    bits |= 1 << (8 * rows + width);
                }
                width += 1;
            }
            match cols {
                None => cols = Some(width),
                Some(w) if w != width => return Err(Error::Parse("ragged rows")),
                _ => {}
            }
            rows += 1;
        }
        let cols = cols.ok_or(Error::Parse("empty pattern"))?;
        BitMatrix::new(rows, cols, bits)
    }
}
