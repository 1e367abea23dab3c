//! Q-network weight files.
//!
//! Little-endian: an ASCII `PIVDQN01` magic, frame size `u8`, fill-in
//! feature flag `u8`, number of layer sizes `u8`, each size as `u32`, then
//! every weight matrix row-major layer by layer as `f64`, then the biases.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use pivots_core::dqn::QNetwork;

use crate::error::{Result, ToolError};

pub const MAGIC: &[u8; 8] = b"PIVDQN01";

pub fn write_weights<W: Write>(net: &QNetwork, mut w: W) -> Result<()> {
    let io = |e| ToolError::io("<weight stream>", e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&[
        net.frame() as u8,
        net.fill_in_feature() as u8,
        net.dims().len() as u8,
    ])
    .map_err(io)?;
    for &d in net.dims() {
        w.write_all(&(d as u32).to_le_bytes()).map_err(io)?;
    }
    for x in net.weights().iter().chain(net.biases()).flatten() {
        w.write_all(&x.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn take<R: Read, const K: usize>(r: &mut R) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => ToolError::format("truncated weight file"),
        _ => ToolError::io("<weight stream>", e),
    })?;
    Ok(buf)
}

/// Parses a weight file; with `frame` given, other frame sizes are rejected.
pub fn read_weights<R: Read>(mut r: R, frame: Option<usize>) -> Result<QNetwork> {
    if &take::<_, 8>(&mut r)? != MAGIC {
        return Err(ToolError::format("not a weight file (bad magic)"));
    }
    let [n, flag, layers] = take::<_, 3>(&mut r)?;
    let n = n as usize;
    if frame.is_some_and(|f| f != n) {
        return Err(ToolError::format(format!(
            "weight file is for frame size {n}, expected {}",
            frame.unwrap()
        )));
    }
    if flag > 1 {
        return Err(ToolError::format("bad feature flag"));
    }
    let mut dims = Vec::with_capacity(layers as usize);
    for _ in 0..layers {
        dims.push(u32::from_le_bytes(take(&mut r)?) as usize);
    }
    let template = QNetwork::zeros(n, flag == 1)
        .map_err(|e| ToolError::format(format!("weight file: {e}")))?;
    if dims != template.dims() {
        return Err(ToolError::format(format!(
            "layer sizes {dims:?} do not match frame size {n} (expected {:?})",
            template.dims()
        )));
    }
    let mut read_block = |len: usize| -> Result<Vec<f64>> {
        (0..len)
            .map(|_| Ok(f64::from_le_bytes(take(&mut r)?)))
            .collect()
    };
    let weights = template
        .weights()
        .iter()
        .map(|w| read_block(w.len()))
        .collect::<Result<Vec<_>>>()?;
    let biases = template
        .biases()
        .iter()
        .map(|b| read_block(b.len()))
        .collect::<Result<Vec<_>>>()?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)
        .map_err(|e| ToolError::io("<weight stream>", e))?
        != 0
    {
        return Err(ToolError::format("trailing bytes in weight file"));
    }
    QNetwork::from_parts(n, flag == 1, &dims, weights, biases)
        .map_err(|e| ToolError::format(e.to_string()))
}

pub fn save_weights(net: &QNetwork, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| ToolError::io(path, e))?;
    write_weights(net, BufWriter::new(f))
}

pub fn load_weights(path: &Path, frame: Option<usize>) -> Result<QNetwork> {
    let f = File::open(path).map_err(|e| ToolError::io(path, e))?;
    read_weights(BufReader::new(f), frame).map_err(|e| match e {
        ToolError::Format(msg) => ToolError::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}
