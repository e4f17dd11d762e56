//! Text and binary serialization shared by the modules.

use crate::error::{Error, Result};
use crate::grid::{FieldPair, RadialGrid, C64};
use std::io::{Read, Write};

/// 17 significant digits, round-trips every `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a CSV table (header + rows, LF endings).
pub fn write_csv<W: Write>(mut w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt17).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Profile CSV `r,re_u,im_u,re_v,im_v`.
pub fn write_profile<W: Write>(w: W, grid: &RadialGrid, f: &FieldPair) -> Result<()> {
    write_csv(
        w,
        &["r", "re_u", "im_u", "re_v", "im_v"],
        (0..grid.n).map(|i| vec![grid.nodes[i], f.u[i].re, f.u[i].im, f.v[i].re, f.v[i].im]),
    )
}

pub fn read_profile<R: Read>(mut r: R, kappa: f64) -> Result<(Vec<f64>, FieldPair)> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty profile".into()))?;
    if header.trim() != "r,re_u,im_u,re_v,im_v" {
        return Err(Error::Format(format!("unexpected profile header: {header}")));
    }
    let mut rs = Vec::new();
    let mut u = Vec::new();
    let mut v = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| Error::Format(format!("line {}: {e}", k + 2)))?;
        if vals.len() != 5 {
            return Err(Error::Format(format!("line {}: expected 5 columns", k + 2)));
        }
        rs.push(vals[0]);
        u.push(C64::new(vals[1], vals[2]));
        v.push(C64::new(vals[3], vals[4]));
    }
    Ok((rs, FieldPair::new(u, v, kappa)?))
}

/// Checkpoint header.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckpointHeader {
    pub n: u64,
    pub r_max: f64,
    pub kappa: f64,
    pub t: f64,
}

/// Flat binary layout: `n: u64`, `r_max, κ, t: f64`, then `(re, im)` per node
/// for `u`, then for `v`; all little-endian.
pub fn write_checkpoint<W: Write>(mut w: W, grid: &RadialGrid, f: &FieldPair, t: f64) -> Result<()> {
    w.write_all(&(grid.n as u64).to_le_bytes())?;
    for x in [grid.r_max, f.kappa, t] {
        w.write_all(&x.to_le_bytes())?;
    }
    for z in f.u.iter().chain(&f.v) {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(CheckpointHeader, FieldPair)> {
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8);
    let mut f = || -> Result<f64> {
        r.read_exact(&mut b8)?;
        Ok(f64::from_le_bytes(b8))
    };
    let header = CheckpointHeader { n, r_max: f()?, kappa: f()?, t: f()? };
    let mut data = Vec::with_capacity(4 * n as usize);
    for _ in 0..4 * n {
        data.push(f()?);
    }
    let n = n as usize;
    let u = (0..n).map(|i| C64::new(data[2 * i], data[2 * i + 1])).collect();
    let v = (0..n).map(|i| C64::new(data[2 * (n + i)], data[2 * (n + i) + 1])).collect();
    Ok((header, FieldPair::new(u, v, header.kappa)?))
}
