//! Normal forms of square patterns up to row permutation (≈) and up to row
//! and column permutation (~).
//!
//! Row order: a row's sort key reads the row as a binary string with column 0
//! as the most significant digit, and rows are arranged with non-increasing
//! keys. The canonical form of `m` is the minimum, comparing the packed
//! `u64` words as unsigned integers, of `row_sorted(m·σ)` over all column
//! permutations σ. Database keys depend on both conventions; do not change
//! them.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::matrix::{BitMatrix, MAX_DIM};

/// Bit-reverses the low `n` bits of a row byte.
#[inline]
pub fn row_key(byte: u8, n: usize) -> u8 {
    if n == 0 {
        0
    } else {
        byte.reverse_bits() >> (8 - n)
    }
}

/// Rows reordered so that their keys ([`row_key`]) are non-increasing.
pub fn row_sorted(m: &BitMatrix) -> BitMatrix {
    let n = m.cols();
    let mut rows = [0u8; MAX_DIM];
    for (i, r) in rows.iter_mut().enumerate().take(m.rows()) {
        *r = m.row_byte(i);
    }
    let rows = &mut rows[..m.rows()];
    rows.sort_unstable_by_key(|&r| core::cmp::Reverse(row_key(r, n)));
    BitMatrix::from_row_bytes(n, rows).expect("same shape")
}

/// The canonical representative of a ~ class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey {
    n: u8,
    bits: u64,
}

impl CanonicalKey {
    /// Wraps bits that are already canonical (e.g. read back from a file).
    pub fn from_canonical_bits(n: usize, bits: u64) -> Result<Self> {
        let m = BitMatrix::new(n, n, bits)?;
        Ok(CanonicalKey {
            n: n as u8,
            bits: m.bits(),
        })
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn matrix(&self) -> BitMatrix {
        BitMatrix::from_raw(self.n(), self.n(), self.bits)
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.bits)
    }
}

/// Number of raw 0/1 matrices in a ~ class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassWeight(pub u64);

pub(crate) fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// `n! / ∏ k!` over the multiplicities `k` of repeated rows: the number of
/// distinct matrices that sort to `sorted`.
fn row_arrangements(sorted: &BitMatrix) -> u64 {
    let n = sorted.rows();
    let mut out = factorial(n);
    let mut run = 1;
    for i in 1..=n {
        if i < n && sorted.row_byte(i) == sorted.row_byte(i - 1) {
            run += 1;
        } else {
            out /= factorial(run);
            run = 1;
        }
    }
    out
}

/// Precomputed column permutations for one size `n`.
///
/// For every permutation the table maps a row byte to the sort key of the
/// permuted row, so one canonicalization is `n!` rounds of `n` lookups and a
/// small sort.
#[derive(Clone)]
pub struct Canonizer {
    n: usize,
    perm_count: usize,
    table: Vec<u8>,
    unkey: [u8; 256],
}

impl fmt::Debug for Canonizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Canonizer").field("n", &self.n).finish()
    }
}

/// All permutations of `0..n` in lexicographic order.
pub(crate) fn permutations(n: usize) -> Vec<[u8; MAX_DIM]> {
    let mut cur: [u8; MAX_DIM] = [0, 1, 2, 3, 4, 5, 6, 7];
    let mut out = Vec::with_capacity(factorial(n) as usize);
    loop {
        out.push(cur);
        // next lexicographic permutation of cur[..n]
        let p = &mut cur[..n];
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
    }
    out
}

impl Canonizer {
    pub fn new(n: usize) -> Self {
        assert!(n <= MAX_DIM, "n = {n} exceeds 8");
        let perms = permutations(n);
        let width = 1usize << n;
        let mut table = Vec::with_capacity(perms.len() * width);
        for perm in &perms {
            for byte in 0..width {
                let mut out = 0u8;
                for (j, &src) in perm[..n].iter().enumerate() {
                    out |= ((byte >> src) as u8 & 1) << j;
                }
                table.push(row_key(out, n));
            }
        }
        let mut unkey = [0u8; 256];
        for (byte, slot) in unkey.iter_mut().enumerate().take(width) {
            *slot = row_key(byte as u8, n);
        }
        Canonizer {
            n,
            perm_count: perms.len(),
            table,
            unkey,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Canonical key of `m`, which must be `n × n`.
    pub fn canonical(&self, m: &BitMatrix) -> CanonicalKey {
        self.canonical_with_stabilizer(m).0
    }

    /// Canonical key plus the number of column permutations σ with
    /// `row_sorted(m·σ)` equal to it. That count is the order of the
    /// column stabilizer of the row multiset.
    pub fn canonical_with_stabilizer(&self, m: &BitMatrix) -> (CanonicalKey, u32) {
        let n = self.n;
        debug_assert!(m.rows() == n && m.cols() == n);
        if n == 0 {
            return (CanonicalKey { n: 0, bits: 0 }, 1);
        }
        let width = 1usize << n;
        let mut rows = [0usize; MAX_DIM];
        for (i, r) in rows.iter_mut().enumerate().take(n) {
            *r = m.row_byte(i) as usize;
        }
        let mut best = u64::MAX;
        let mut hits = 0u32;
        let mut keys = [0u8; MAX_DIM];
        for chunk in self.table.chunks_exact(width) {
            for i in 0..n {
                keys[i] = chunk[rows[i]];
            }
            sort_desc(&mut keys[..n]);
            let mut w = 0u64;
            for i in (0..n).rev() {
                w = (w << 8) | self.unkey[keys[i] as usize] as u64;
            }
            if w < best {
                best = w;
                hits = 1;
            } else if w == best {
                hits += 1;
            }
        }
        (
            CanonicalKey {
                n: n as u8,
                bits: best,
            },
            hits,
        )
    }

    /// Size of the ~ class of `m`: `n!/|stab| · n!/∏ k!`.
    pub fn class_weight(&self, m: &BitMatrix) -> (CanonicalKey, ClassWeight) {
        let (key, stab) = self.canonical_with_stabilizer(m);
        let orbit = self.perm_count as u64 / stab as u64;
        (key, ClassWeight(orbit * row_arrangements(&key.matrix())))
    }
}

/// Insertion sort, largest first; `keys.len() ≤ 8`.
#[inline(always)]
fn sort_desc(keys: &mut [u8]) {
    for i in 1..keys.len() {
        let x = keys[i];
        let mut j = i;
        while j > 0 && keys[j - 1] < x {
            keys[j] = keys[j - 1];
            j -= 1;
        }
        keys[j] = x;
    }
}

/// One-off canonicalization; builds a fresh [`Canonizer`]. Prefer keeping a
/// `Canonizer` around when canonicalizing many matrices.
pub fn canonical(m: &BitMatrix) -> Result<CanonicalKey> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    Ok(Canonizer::new(m.rows()).canonical(m))
}

/// `C(2^n + n - 1, n)`: sorted n-tuples of n-bit rows.
pub fn count_row_classes(n: usize) -> Result<u128> {
    if n == 0 || n > MAX_DIM {
        return Err(Error::Unsupported { n });
    }
    let top = (1u128 << n) + n as u128 - 1;
    let mut out = 1u128;
    for k in 0..n as u128 {
        // exact at every step: out = C(top, k + 1) after the division
        out = out * (top - k) / (k + 1);
    }
    Ok(out)
}

/// Size check shared by the enumeration entry points: sizes up to 6 run
/// freely, 7 needs `allow_large`, 8 is out of reach.
pub fn guard(n: usize, allow_large: bool) -> Result<()> {
    match n {
        0 => Err(Error::Invalid("n must be at least 1")),
        1..=6 => Ok(()),
        7 if allow_large => Ok(()),
        7 => Err(Error::ResourceGuard { n }),
        _ => Err(Error::Unsupported { n }),
    }
}

/// Streams the row-sorted `n × n` matrices in ascending order of their
/// packed words.
///
/// Ascending word order means the last row varies slowest. Row `i` is
/// constrained by `row_key(row i) >= row_key(row i + 1)`.
#[derive(Debug, Clone)]
pub struct RowClasses {
    n: usize,
    rows: [u8; MAX_DIM],
    top_end: u16,
    done: bool,
}

impl RowClasses {
    /// Only the classes whose last (smallest-key) row byte lies in
    /// `top_lo..top_hi`; used to split the stream between workers.
    pub fn with_top_range(n: usize, top_lo: u16, top_hi: u16, allow_large: bool) -> Result<Self> {
        guard(n, allow_large)?;
        let top_hi = top_hi.min(1 << n);
        let mut it = RowClasses {
            n,
            rows: [0; MAX_DIM],
            top_end: top_hi,
            done: top_lo >= top_hi,
        };
        if !it.done {
            it.rows[n - 1] = top_lo as u8;
            it.reset_below(n - 1);
        }
        Ok(it)
    }

    /// Smallest byte with key at least `floor`.
    fn first_at_least(&self, floor: u8) -> u8 {
        (0..(1u16 << self.n))
            .map(|b| b as u8)
            .find(|&b| row_key(b, self.n) >= floor)
            .expect("the all-ones row has the maximal key")
    }

    /// Next byte after `cur` whose key is at least `floor`.
    fn next_at_least(&self, cur: u8, floor: u8) -> Option<u8> {
        (cur as u16 + 1..(1u16 << self.n))
            .map(|b| b as u8)
            .find(|&b| row_key(b, self.n) >= floor)
    }

    fn reset_below(&mut self, level: usize) {
        for i in (0..level).rev() {
            let floor = row_key(self.rows[i + 1], self.n);
            self.rows[i] = self.first_at_least(floor);
        }
    }

    fn current(&self) -> BitMatrix {
        BitMatrix::from_row_bytes(self.n, &self.rows[..self.n]).expect("valid rows")
    }
}

impl Iterator for RowClasses {
    type Item = BitMatrix;

    fn next(&mut self) -> Option<BitMatrix> {
        if self.done {
            return None;
        }
        let out = self.current();
        let n = self.n;
        let mut level = 0;
        loop {
            if level == n - 1 {
                let next = self.rows[level] as u16 + 1;
                if next >= self.top_end {
                    self.done = true;
                } else {
                    self.rows[level] = next as u8;
                    self.reset_below(level);
                }
                break;
            }
            let floor = row_key(self.rows[level + 1], n);
            if let Some(b) = self.next_at_least(self.rows[level], floor) {
                self.rows[level] = b;
                self.reset_below(level);
                break;
            }
            level += 1;
        }
        Some(out)
    }
}

/// All row-sorted `n × n` matrices. Sizes above 6 need `allow_large`.
pub fn enumerate_row_classes(n: usize, allow_large: bool) -> Result<RowClasses> {
    RowClasses::with_top_range(n, 0, 1 << n, allow_large)
}

/// Candidate extensions of the `(n-1)`-classes in `parents` by one row and
/// one column, canonicalized at size `n`.
///
/// Every `n × n` matrix is similar to one whose top-left block is a canonical
/// `(n-1)`-form and whose last row and last column have minimal nonzero
/// counts, so those extensions cover every class.
pub fn extend_classes(parents: &[CanonicalKey], canon: &Canonizer) -> BTreeSet<u64> {
    let n = canon.n();
    let mut out = BTreeSet::new();
    for parent in parents {
        debug_assert_eq!(parent.n() + 1, n);
        let pm = parent.matrix();
        let base_rows: [u8; MAX_DIM] =
            core::array::from_fn(|i| if i + 1 < n { pm.row_byte(i) } else { 0 });
        let base_cols: [u32; MAX_DIM] = core::array::from_fn(|j| {
            if j + 1 < n {
                pm.col_byte(j).count_ones()
            } else {
                0
            }
        });
        for new_col in 0..(1u16 << (n - 1)) {
            let mut bits = pm.bits();
            let mut min_row = u32::MAX;
            for (i, &r) in base_rows.iter().enumerate().take(n - 1) {
                let b = (new_col >> i) as u8 & 1;
                bits |= (b as u64) << (8 * i + n - 1);
                min_row = min_row.min(r.count_ones() + b as u32);
            }
            let col_count = new_col.count_ones();
            for new_row in 0..(1u16 << n) {
                if new_row.count_ones() > min_row {
                    continue;
                }
                let last = col_count + ((new_row >> (n - 1)) as u32 & 1);
                let min_col = (0..n - 1)
                    .map(|j| base_cols[j] + ((new_row >> j) as u32 & 1))
                    .min()
                    .unwrap_or(u32::MAX);
                if last > min_col {
                    continue;
                }
                let m = BitMatrix::from_raw(n, n, bits | (new_row as u64) << (8 * (n - 1)));
                out.insert(canon.canonical(&m).bits());
            }
        }
    }
    out
}

/// Attaches class weights to canonical bit words.
pub fn weigh_classes(
    n: usize,
    keys: &[u64],
    canon: &Canonizer,
) -> Vec<(CanonicalKey, ClassWeight)> {
    keys.iter()
        .map(|&bits| canon.class_weight(&BitMatrix::from_raw(n, n, bits)))
        .collect()
}

/// Every ~ class of `n × n` patterns with its weight, sorted by key.
///
/// Built by extending the `(n-1)`-classes, starting from the empty matrix.
/// Class weights come from the stabilizer size, so they sum to `2^(n²)`.
pub fn enumerate_canonical_classes(
    n: usize,
    allow_large: bool,
) -> Result<Vec<(CanonicalKey, ClassWeight)>> {
    guard(n, allow_large)?;
    let mut parents = alloc::vec![CanonicalKey { n: 0, bits: 0 }];
    for k in 1..=n {
        let canon = Canonizer::new(k);
        let keys = extend_classes(&parents, &canon);
        parents = keys
            .into_iter()
            .map(|bits| CanonicalKey { n: k as u8, bits })
            .collect();
    }
    let canon = Canonizer::new(n);
    let bits: Vec<u64> = parents.iter().map(|k| k.bits()).collect();
    Ok(weigh_classes(n, &bits, &canon))
}

/// Same contract as [`enumerate_canonical_classes`], computed the long way:
/// canonicalize every row-sorted matrix and add up `n!/∏ k!` per key.
/// Practical up to n = 5.
pub fn enumerate_canonical_classes_by_rows(
    n: usize,
    allow_large: bool,
) -> Result<Vec<(CanonicalKey, ClassWeight)>> {
    use alloc::collections::BTreeMap;
    let canon = Canonizer::new(n);
    let mut acc: BTreeMap<u64, u64> = BTreeMap::new();
    for m in enumerate_row_classes(n, allow_large)? {
        *acc.entry(canon.canonical(&m).bits()).or_default() += row_arrangements(&m);
    }
    Ok(acc
        .into_iter()
        .map(|(bits, w)| (CanonicalKey { n: n as u8, bits }, ClassWeight(w)))
        .collect())
}

/// Whether `m` is already in canonical form.
pub fn is_canonical(m: &BitMatrix, canon: &Canonizer) -> bool {
    m.is_square() && canon.canonical(m).bits() == m.bits()
}
