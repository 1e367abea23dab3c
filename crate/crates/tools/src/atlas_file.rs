//! Atlas files.
//!
//! Binary layout, little-endian: an ASCII `PIVATLAS` magic, version `u16`,
//! `n` as `u8`, five zero bytes, the class count as `u64`, then one 40-byte
//! record per class in key order. A record is the key word followed by, per
//! combination (field/all, field/minfillin, ring/all, ring/minfillin), the
//! minimum and maximum as `u16`, the median in quarter units as `u16`, and
//! the best and worst pivot as `row * 16 + col` bytes (`0xFF` for none).
//!
//! The CSV form keeps the median at full precision.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use pivots_core::atlas::{AtlasEntry, COMBOS};
use pivots_core::{Atlas, CanonicalKey, ClassRecord, CostModel, CostSummary, Mode, Pivot};

use crate::error::{Result, ToolError};

pub const MAGIC: &[u8; 8] = b"PIVATLAS";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;
pub const RECORD_LEN: usize = 40;
pub const CSV_HEADER: &str =
    "key_hex,n,weight,model,mode,costmin,costmax,costmed,best_pivot,worst_pivot";

/// `dir/atlas_{n}.pivdb`.
pub fn atlas_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("atlas_{n}.pivdb"))
}

/// `dir/atlas_{n}.csv`.
pub fn atlas_csv_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("atlas_{n}.csv"))
}

fn pivot_byte(p: Option<Pivot>) -> u8 {
    p.map_or(0xFF, |p| p.row * 16 + p.col)
}

fn byte_pivot(b: u8, n: usize) -> Result<Option<Pivot>> {
    if b == 0xFF {
        return Ok(None);
    }
    let (r, c) = ((b >> 4) as usize, (b & 15) as usize);
    if r >= n || c >= n {
        return Err(ToolError::format(format!(
            "pivot byte {b:#04x} outside a {n}x{n} matrix"
        )));
    }
    Ok(Some(Pivot::new(r, c)))
}

fn quarter(med: f64) -> Result<u16> {
    let q = (med * 4.0).round();
    if !(0.0..=u16::MAX as f64).contains(&q) {
        return Err(ToolError::format(format!(
            "median {med} does not fit the record"
        )));
    }
    Ok(q as u16)
}

/// Serializes an atlas in the binary layout.
pub fn write_atlas<W: Write>(atlas: &Atlas, mut w: W) -> Result<()> {
    let io = |e| ToolError::io("<atlas stream>", e);
    let mut header = [0u8; HEADER_LEN];
    header[..8].copy_from_slice(MAGIC);
    header[8..10].copy_from_slice(&VERSION.to_le_bytes());
    header[10] = atlas.n() as u8;
    header[16..24].copy_from_slice(&(atlas.len() as u64).to_le_bytes());
    w.write_all(&header).map_err(io)?;
    let mut rec = [0u8; RECORD_LEN];
    for e in atlas.entries() {
        rec[..8].copy_from_slice(&e.key.bits().to_le_bytes());
        for (k, s) in e.record.summaries().iter().enumerate() {
            let o = 8 + 8 * k;
            rec[o..o + 2].copy_from_slice(&s.min.to_le_bytes());
            rec[o + 2..o + 4].copy_from_slice(&s.max.to_le_bytes());
            rec[o + 4..o + 6].copy_from_slice(&quarter(s.med)?.to_le_bytes());
            rec[o + 6] = pivot_byte(s.best);
            rec[o + 7] = pivot_byte(s.worst);
        }
        w.write_all(&rec).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => {
            ToolError::format(format!("truncated atlas file ({what})"))
        }
        _ => ToolError::io("<atlas stream>", e),
    })
}

/// Parses the binary layout. Keys are checked to be canonical and sorted,
/// and class weights are recomputed from them.
pub fn read_atlas<R: Read>(mut r: R) -> Result<Atlas> {
    let mut header = [0u8; HEADER_LEN];
    read_exact(&mut r, &mut header, "header")?;
    if &header[..8] != MAGIC {
        return Err(ToolError::format("not an atlas file (bad magic)"));
    }
    let version = u16::from_le_bytes([header[8], header[9]]);
    if version != VERSION {
        return Err(ToolError::format(format!(
            "unsupported atlas version {version}"
        )));
    }
    let n = header[10] as usize;
    if n == 0 || n > pivots_core::matrix::MAX_DIM {
        return Err(ToolError::format(format!("atlas size {n} out of range")));
    }
    if header[11..16].iter().any(|&b| b != 0) {
        return Err(ToolError::format("reserved header bytes are not zero"));
    }
    let count = u64::from_le_bytes(header[16..24].try_into().expect("8 bytes"));
    let atlas_canon = pivots_core::Canonizer::new(n);
    let mut entries = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut rec = [0u8; RECORD_LEN];
    for _ in 0..count {
        read_exact(&mut r, &mut rec, "records")?;
        let bits = u64::from_le_bytes(rec[..8].try_into().expect("8 bytes"));
        let m = pivots_core::BitMatrix::new(n, n, bits)
            .map_err(|e| ToolError::format(format!("record key {bits:#018x}: {e}")))?;
        let (key, weight) = atlas_canon.class_weight(&m);
        if key.bits() != bits {
            return Err(ToolError::format(format!(
                "record key {bits:#018x} is not canonical"
            )));
        }
        let mut summaries = [CostSummary::ZERO; 4];
        for (k, s) in summaries.iter_mut().enumerate() {
            let o = 8 + 8 * k;
            *s = CostSummary {
                min: u16::from_le_bytes([rec[o], rec[o + 1]]),
                max: u16::from_le_bytes([rec[o + 2], rec[o + 3]]),
                med: u16::from_le_bytes([rec[o + 4], rec[o + 5]]) as f64 / 4.0,
                best: byte_pivot(rec[o + 6], n)?,
                worst: byte_pivot(rec[o + 7], n)?,
            };
        }
        entries.push(AtlasEntry {
            key,
            weight,
            record: ClassRecord::new(summaries),
        });
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)
        .map_err(|e| ToolError::io("<atlas stream>", e))?
        != 0
    {
        return Err(ToolError::format("trailing bytes after the last record"));
    }
    Atlas::from_entries(n, entries).map_err(|e| ToolError::format(format!("atlas records: {e}")))
}

pub fn save_atlas(atlas: &Atlas, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| ToolError::io(path, e))?;
    write_atlas(atlas, BufWriter::new(f)).map_err(|e| relabel(e, path))
}

pub fn load_atlas(path: &Path) -> Result<Atlas> {
    let f = File::open(path).map_err(|e| ToolError::io(path, e))?;
    read_atlas(BufReader::new(f)).map_err(|e| relabel(e, path))
}

fn relabel(e: ToolError, path: &Path) -> ToolError {
    match e {
        ToolError::Io { source, .. } => ToolError::io(path, source),
        ToolError::Format(msg) => ToolError::Format(format!("{}: {msg}", path.display())),
        other => other,
    }
}

fn pivot_text(p: Option<Pivot>) -> String {
    p.map(|p| p.to_string()).unwrap_or_default()
}

/// One line per class and combination, after the metadata line and header.
pub fn write_atlas_csv<W: Write>(atlas: &Atlas, meta: &str, mut w: W) -> Result<()> {
    let io = |e| ToolError::io("<csv stream>", e);
    writeln!(w, "{meta}").map_err(io)?;
    writeln!(w, "{CSV_HEADER}").map_err(io)?;
    for e in atlas.entries() {
        for (s, (model, mode)) in e.record.summaries().iter().zip(COMBOS) {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                e.key,
                atlas.n(),
                e.weight.0,
                model,
                mode,
                s.min,
                s.max,
                s.med,
                pivot_text(s.best),
                pivot_text(s.worst)
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Reads the CSV form back, medians at full precision.
pub fn read_atlas_csv<R: BufRead>(r: R) -> Result<Atlas> {
    let mut lines = r.lines();
    let mut next_line = |what: &str| -> Result<Option<String>> {
        lines
            .next()
            .transpose()
            .map_err(|e| ToolError::io(format!("<csv stream: {what}>"), e))
    };
    let meta = next_line("metadata")?.ok_or_else(|| ToolError::format("empty atlas CSV"))?;
    crate::meta::parse_metadata_line(&meta)?;
    if next_line("header")?.as_deref() != Some(CSV_HEADER) {
        return Err(ToolError::format("unexpected atlas CSV header"));
    }
    let mut entries: Vec<AtlasEntry> = Vec::new();
    let mut n = None;
    let mut lineno = 2;
    let mut pending: Vec<CostSummary> = Vec::with_capacity(4);
    let mut pending_key: Option<(CanonicalKey, u64)> = None;
    while let Some(line) = next_line("records")? {
        lineno += 1;
        let bad = |what: &str| ToolError::format(format!("atlas CSV line {lineno}: {what}"));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(bad("expected 10 fields"));
        }
        let size: usize = f[1].parse().map_err(|_| bad("bad n"))?;
        if *n.get_or_insert(size) != size {
            return Err(bad("mixed sizes"));
        }
        let bits = u64::from_str_radix(f[0], 16).map_err(|_| bad("bad key"))?;
        let key = CanonicalKey::from_canonical_bits(size, bits).map_err(|e| bad(&e.to_string()))?;
        let weight: u64 = f[2].parse().map_err(|_| bad("bad weight"))?;
        let (model, mode) = COMBOS[pending.len()];
        if f[3].parse::<CostModel>().ok() != Some(model) || f[4].parse::<Mode>().ok() != Some(mode)
        {
            return Err(bad("combinations out of order"));
        }
        match pending_key {
            Some(k) if k != (key, weight) => return Err(bad("record split across keys")),
            _ => pending_key = Some((key, weight)),
        }
        let pivot = |t: &str| -> Result<Option<Pivot>> {
            if t.is_empty() {
                Ok(None)
            } else {
                t.parse().map(Some).map_err(|_| bad("bad pivot"))
            }
        };
        pending.push(CostSummary {
            min: f[5].parse().map_err(|_| bad("bad costmin"))?,
            max: f[6].parse().map_err(|_| bad("bad costmax"))?,
            med: f[7].parse().map_err(|_| bad("bad costmed"))?,
            best: pivot(f[8])?,
            worst: pivot(f[9])?,
        });
        if pending.len() == 4 {
            let (key, weight) = pending_key.take().expect("set above");
            entries.push(AtlasEntry {
                key,
                weight: pivots_core::ClassWeight(weight),
                record: ClassRecord::new(pending.as_slice().try_into().expect("four summaries")),
            });
            pending.clear();
        }
    }
    if !pending.is_empty() {
        return Err(ToolError::format("atlas CSV ends inside a record"));
    }
    let n = n.ok_or_else(|| ToolError::format("atlas CSV has no records"))?;
    Atlas::from_entries(n, entries).map_err(|e| ToolError::format(format!("atlas CSV: {e}")))
}

pub fn save_atlas_csv(atlas: &Atlas, meta: &str, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| ToolError::io(path, e))?;
    write_atlas_csv(atlas, meta, BufWriter::new(f)).map_err(|e| relabel(e, path))
}

pub fn load_atlas_csv(path: &Path) -> Result<Atlas> {
    let f = File::open(path).map_err(|e| ToolError::io(path, e))?;
    read_atlas_csv(BufReader::new(f)).map_err(|e| relabel(e, path))
}

/// Canonical keys as consecutive 8-byte little-endian words.
pub fn write_keys<W: Write>(keys: impl IntoIterator<Item = CanonicalKey>, mut w: W) -> Result<()> {
    let io = |e| ToolError::io("<key stream>", e);
    for k in keys {
        w.write_all(&k.bits().to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atlas3() -> Atlas {
        Atlas::build_chain(3, false)
            .unwrap()
            .get(3)
            .unwrap()
            .clone()
    }

    #[test]
    fn binary_layout_sizes() {
        let a = atlas3();
        let mut buf = Vec::new();
        write_atlas(&a, &mut buf).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + RECORD_LEN * 36);
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(buf[10], 3);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mut buf = Vec::new();
        write_atlas(&atlas3(), &mut buf).unwrap();
        let expect_err = |b: &[u8]| assert!(matches!(read_atlas(b), Err(ToolError::Format(_))));
        expect_err(&buf[..buf.len() - 1]);
        expect_err(&buf[..10]);
        let mut bad = buf.clone();
        bad[0] = b'X';
        expect_err(&bad);
        let mut bad = buf.clone();
        bad[8] = 2;
        expect_err(&bad);
        let mut bad = buf.clone();
        bad.push(0);
        expect_err(&bad);
        let mut bad = buf.clone();
        bad[HEADER_LEN] ^= 1;
        expect_err(&bad);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let a = Atlas::build_chain(4, false)
            .unwrap()
            .get(4)
            .unwrap()
            .clone();
        let mut buf = Vec::new();
        write_atlas_csv(&a, "# pivots 0 config={} hash=0", &mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 2 + 4 * a.len());
        assert_eq!(read_atlas_csv(&buf[..]).unwrap(), a);
    }

    #[test]
    fn pivot_bytes() {
        assert_eq!(pivot_byte(None), 0xFF);
        assert_eq!(pivot_byte(Some(Pivot::new(2, 5))), 0x25);
        assert_eq!(byte_pivot(0x25, 6).unwrap(), Some(Pivot::new(2, 5)));
        assert!(byte_pivot(0x25, 5).is_err());
    }
}
