//! Human-viewable exports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::{Branch, IterationRecord};
use crate::Image;

/// Writes a 16-bit binary PGM (`P5`, big-endian samples). Values in
/// `[min, min + data_range]` map linearly onto `[0, 65535]`, where `min` is the
/// image minimum; values above the window are clamped.
pub fn export_pgm(img: &Image, path: impl AsRef<Path>, data_range: f64) -> Result<()> {
    fs::write(path, pgm_bytes(img, data_range)?)?;
    Ok(())
}

fn pgm_bytes(img: &Image, data_range: f64) -> Result<Vec<u8>> {
    if !(data_range.is_finite() && data_range > 0.0) {
        return Err(Error::invalid(format!("PGM data range must be positive, got {data_range}")));
    }
    if !img.is_finite() {
        return Err(Error::invalid("cannot export a non-finite image"));
    }
    let (rows, cols) = img.shape();
    let min = img.data.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    for &v in img.data.iter() {
        let level = ((v - min) / data_range * 65535.0).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&level.to_be_bytes());
    }
    Ok(out)
}

/// Column order of [`export_csv_trace`].
pub const TRACE_CSV_HEADER: &str =
    "k,branch,backtracks,step_z,step_x,eps,phi_prev,phi,grad_norm_prev,grad_norm,eps_reduced,dx,dz";

/// One row per iteration record. Floats use the shortest representation that
/// parses back to the same bits.
pub fn export_csv_trace(trace: &[IterationRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for r in trace {
        writeln!(
            out,
            "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{:e}",
            r.k,
            r.branch,
            r.backtracks,
            r.step_z,
            r.step_x,
            r.eps,
            r.phi_prev,
            r.phi,
            r.grad_norm_prev,
            r.grad_norm,
            r.eps_reduced,
            r.dx,
            r.dz
        )
        .expect("writing to a String");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads back a file written by [`export_csv_trace`].
pub fn parse_csv_trace(text: &str) -> Result<Vec<IterationRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_CSV_HEADER) {
        return Err(Error::invalid("trace CSV header does not match"));
    }
    lines
        .enumerate()
        .map(|(row, line)| {
            let bad = |what: &str| Error::invalid(format!("trace row {row}: bad {what}"));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 13 {
                return Err(bad("column count"));
            }
            let num = |i: usize, name: &str| f[i].parse::<f64>().map_err(|_| bad(name));
            let int = |i: usize, name: &str| f[i].parse::<usize>().map_err(|_| bad(name));
            Ok(IterationRecord {
                k: int(0, "k")?,
                branch: match f[1] {
                    "candidate" => Branch::CandidateAccepted,
                    "safeguard" => Branch::Safeguard,
                    _ => return Err(bad("branch")),
                },
                backtracks: int(2, "backtracks")?,
                step_z: num(3, "step_z")?,
                step_x: num(4, "step_x")?,
                eps: num(5, "eps")?,
                phi_prev: num(6, "phi_prev")?,
                phi: num(7, "phi")?,
                grad_norm_prev: num(8, "grad_norm_prev")?,
                grad_norm: num(9, "grad_norm")?,
                eps_reduced: f[10].parse().map_err(|_| bad("eps_reduced"))?,
                dx: num(11, "dx")?,
                dz: num(12, "dz")?,
            })
        })
        .collect()
}
