//! Text export in the coordinate MatrixMarket layout.
//!
//! ```text
//! %%MatrixMarket matrix coordinate complex general
//! % label: H_full
//! % epsilon: 0.0625
//! <rows> <cols> <nnz>
//! <row> <col> <re> <im>      (1-based, one line per stored entry)
//! ```
//! Values are written in shortest round-trip form, so reading back is exact.

use std::io::{BufRead, Write};

use faer::c64;

use super::{CsrMatrix, DiscreteOperator, DiscretizeError, OperatorLabel};

const HEADER: &str = "%%MatrixMarket matrix coordinate complex general";

#[derive(Debug, Clone, PartialEq)]
pub struct MarketMatrix {
    pub label: OperatorLabel,
    pub epsilon: Option<f64>,
    pub matrix: CsrMatrix,
}

pub fn write_matrix_market(op: &DiscreteOperator, mut out: impl Write) -> std::io::Result<()> {
    let m = op.to_csr();
    writeln!(out, "{HEADER}")?;
    writeln!(out, "% label: {}", op.label().as_str())?;
    match op.epsilon() {
        Some(e) => writeln!(out, "% epsilon: {e:e}")?,
        None => writeln!(out, "% epsilon: none")?,
    }
    writeln!(out, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (r, c, v) in m.triplets() {
        writeln!(out, "{} {} {:e} {:e}", r + 1, c + 1, v.re, v.im)?;
    }
    Ok(())
}

fn bad(msg: impl Into<String>) -> DiscretizeError {
    DiscretizeError::Format(msg.into())
}

pub fn read_matrix_market(input: impl BufRead) -> Result<MarketMatrix, DiscretizeError> {
    let mut lines = input.lines();
    let mut next = || -> Result<Option<String>, DiscretizeError> {
        lines.next().transpose().map_err(|e| bad(e.to_string()))
    };
    if next()?.as_deref().map(str::trim) != Some(HEADER) {
        return Err(bad("missing header"));
    }
    let mut label = OperatorLabel::Other;
    let mut epsilon = None;
    let size = loop {
        let line = next()?.ok_or_else(|| bad("missing size line"))?;
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('%') {
            let rest = rest.trim();
            if let Some(l) = rest.strip_prefix("label:") {
                label = OperatorLabel::parse(l.trim())
                    .ok_or_else(|| bad(format!("unknown label {l}")))?;
            } else if let Some(e) = rest.strip_prefix("epsilon:") {
                let e = e.trim();
                epsilon = if e == "none" {
                    None
                } else {
                    Some(e.parse().map_err(|_| bad("bad epsilon"))?)
                };
            }
            continue;
        }
        if !line.is_empty() {
            break line.to_string();
        }
    };
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad size line")))
        .collect::<Result<_, _>>()?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(bad("size line needs three integers"));
    };
    let mut trip = Vec::with_capacity(nnz);
    while let Some(line) = next()? {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.is_empty() {
            continue;
        }
        if t.len() != 4 {
            return Err(bad(format!("bad entry line: {line}")));
        }
        let r: usize = t[0].parse().map_err(|_| bad("bad row"))?;
        let c: usize = t[1].parse().map_err(|_| bad("bad col"))?;
        if r == 0 || c == 0 || r > rows || c > cols {
            return Err(bad(format!("entry ({r}, {c}) out of range")));
        }
        let re: f64 = t[2].parse().map_err(|_| bad("bad value"))?;
        let im: f64 = t[3].parse().map_err(|_| bad("bad value"))?;
        trip.push((r - 1, c - 1, c64::new(re, im)));
    }
    if trip.len() != nnz {
        return Err(bad(format!("expected {nnz} entries, found {}", trip.len())));
    }
    Ok(MarketMatrix {
        label,
        epsilon,
        matrix: CsrMatrix::from_triplets(rows, cols, trip),
    })
}
