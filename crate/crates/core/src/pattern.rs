//! Residual matrices that certify relation patterns, and histogram exports
//! of their entries.
//!
//! A relation encodes symmetry when `e_R·e_R = I`, inversion when
//! `e_R¹·e_R² = I`, and composition when `e_R²·e_R¹ = e_R³` (second relation
//! applied after the first). Each check reports the deviation matrix; a
//! concentrated near-zero histogram certifies the pattern. Composition order
//! matters exactly when the block size exceeds 2: planar rotations commute.

use crate::error::{Error, Result};
use crate::tensor::{BlockDiagOrthogonal, DenseMatrix};
use serde_json::json;
use std::io::Write;

/// Which residual a report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    Symmetry,
    Inversion,
    Composition,
    CommutatorGap,
}

impl PatternKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PatternKind::Symmetry => "symmetry",
            PatternKind::Inversion => "inversion",
            PatternKind::Composition => "composition",
            PatternKind::CommutatorGap => "commutator-gap",
        }
    }
}

/// One histogram bucket: `[lower, upper)`, last bucket closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
}

/// A pattern-check result ready for export.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub kind: PatternKind,
    pub relations: Vec<String>,
    /// Frobenius norm of the residual divided by √n, comparable across
    /// dimensions.
    pub residual_norm: f64,
    /// Present only for the commutator gap, where both orderings are
    /// reported side by side.
    pub swapped_residual_norm: Option<f64>,
    pub histogram: Vec<HistBin>,
}

impl ResidualReport {
    /// CSV with header `bin_lower,bin_upper,count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_lower,bin_upper,count")?;
        for b in &self.histogram {
            writeln!(w, "{},{},{}", b.lower, b.upper, b.count)?;
        }
        Ok(())
    }

    /// JSON summary `{kind, relations, residual_norm}` (plus the swapped norm
    /// for commutator-gap reports).
    pub fn json_summary(&self) -> String {
        let mut v = json!({
            "kind": self.kind.as_str(),
            "relations": self.relations,
            "residual_norm": self.residual_norm,
        });
        if let Some(s) = self.swapped_residual_norm {
            v["swapped_residual_norm"] = json!(s);
        }
        serde_json::to_string_pretty(&v).expect("summary is always serializable")
    }
}

fn check_same_shape(rels: &[&BlockDiagOrthogonal]) -> Result<()> {
    let (d, n) = (rels[0].block_dim(), rels[0].dim());
    for (i, r) in rels.iter().enumerate() {
        if r.block_dim() != d || r.dim() != n {
            return Err(Error::Shape(format!(
                "relation {i} has (n, d) = ({}, {}), expected ({n}, {d})",
                r.dim(),
                r.block_dim()
            )));
        }
    }
    Ok(())
}

/// Assembles block-wise products `f(blocks...)` into the dense n×n residual.
fn assemble_blockwise(
    rels: &[&BlockDiagOrthogonal],
    f: impl Fn(&[&DenseMatrix]) -> Result<DenseMatrix>,
) -> Result<DenseMatrix> {
    check_same_shape(rels)?;
    let d = rels[0].block_dim();
    let n = rels[0].dim();
    let mut out = DenseMatrix::zeros(n, n);
    for bi in 0..rels[0].num_blocks() {
        let blocks: Vec<&DenseMatrix> = rels.iter().map(|r| r.block(bi)).collect();
        let res = f(&blocks)?;
        let base = bi * d;
        for r in 0..d {
            for c in 0..d {
                out.set(base + r, base + c, res.get(r, c));
            }
        }
    }
    Ok(out)
}

/// `e_R·e_R − I`, block-wise: zero exactly when every block is an involution.
pub fn symmetry_residual(r: &BlockDiagOrthogonal) -> DenseMatrix {
    assemble_blockwise(&[r], |b| {
        let sq = b[0].matmul(b[0])?;
        sq.sub(&DenseMatrix::identity(b[0].rows()))
    })
    .expect("single-relation residual cannot have shape errors")
}

/// `r1·r2 − I`, block-wise: zero when the relations are mutual inverses.
pub fn inversion_residual(
    r1: &BlockDiagOrthogonal,
    r2: &BlockDiagOrthogonal,
) -> Result<DenseMatrix> {
    assemble_blockwise(&[r1, r2], |b| {
        let prod = b[0].matmul(b[1])?;
        prod.sub(&DenseMatrix::identity(b[0].rows()))
    })
}

/// `r2·r1 − r3`, block-wise: the second relation is applied after the first.
pub fn composition_residual(
    r1: &BlockDiagOrthogonal,
    r2: &BlockDiagOrthogonal,
    r3: &BlockDiagOrthogonal,
) -> Result<DenseMatrix> {
    assemble_blockwise(&[r1, r2, r3], |b| b[1].matmul(b[0])?.sub(b[2]))
}

/// `(‖r2·r1 − r3‖_F/√n, ‖r1·r2 − r3‖_F/√n)`: identical for planar rotation
/// blocks, generically distinct for d ≥ 3.
pub fn commutator_gap(
    r1: &BlockDiagOrthogonal,
    r2: &BlockDiagOrthogonal,
    r3: &BlockDiagOrthogonal,
) -> Result<(f64, f64)> {
    let forward = composition_residual(r1, r2, r3)?;
    let swapped = composition_residual(r2, r1, r3)?;
    let n = r1.dim() as f64;
    Ok((forward.frob_norm() / n.sqrt(), swapped.frob_norm() / n.sqrt()))
}

/// Frobenius norm of a residual matrix divided by √n.
pub fn normalized_residual_norm(residual: &DenseMatrix) -> f64 {
    residual.frob_norm() / (residual.rows() as f64).sqrt()
}

/// Entries of the diagonal blocks of a block-structured matrix; structural
/// zeros outside the bands carry no information and are left out of the
/// exported plot data.
pub fn block_band_entries(mat: &DenseMatrix, block_dim: usize) -> Vec<f64> {
    debug_assert!(mat.is_square() && mat.rows() % block_dim == 0);
    let num_blocks = mat.rows() / block_dim;
    let mut out = Vec::with_capacity(num_blocks * block_dim * block_dim);
    for bi in 0..num_blocks {
        let base = bi * block_dim;
        for r in 0..block_dim {
            for c in 0..block_dim {
                out.push(mat.get(base + r, base + c));
            }
        }
    }
    out
}

/// Equal-width bins over `[min, max]`; a degenerate range falls in a single
/// bin. Counts are exact and sum to the input length.
pub fn histogram(entries: &[f64], num_bins: usize) -> Result<Vec<HistBin>> {
    if entries.is_empty() {
        return Err(Error::Protocol("histogram of no entries".into()));
    }
    if num_bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let min = entries.iter().copied().fold(f64::INFINITY, f64::min);
    let max = entries.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Ok(vec![HistBin {
            lower: min,
            upper: max,
            count: entries.len() as u64,
        }]);
    }
    let width = (max - min) / num_bins as f64;
    let mut counts = vec![0u64; num_bins];
    for &x in entries {
        let mut idx = ((x - min) / width) as usize;
        if idx >= num_bins {
            idx = num_bins - 1; // x == max lands in the last closed bin
        }
        counts[idx] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistBin {
            lower: min + i as f64 * width,
            upper: if i + 1 == num_bins { max } else { min + (i + 1) as f64 * width },
            count,
        })
        .collect())
}

/// Builds a full report for a residual matrix of the given block structure.
pub fn residual_report(
    kind: PatternKind,
    relations: Vec<String>,
    residual: &DenseMatrix,
    block_dim: usize,
    num_bins: usize,
) -> Result<ResidualReport> {
    let entries = block_band_entries(residual, block_dim);
    Ok(ResidualReport {
        kind,
        relations,
        residual_norm: normalized_residual_norm(residual),
        swapped_residual_norm: None,
        histogram: histogram(&entries, num_bins)?,
    })
}
