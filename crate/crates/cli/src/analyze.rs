//! `analyze`: relation-pattern residuals for named relations of a trained
//! checkpoint, exported as histogram CSV plus a JSON summary.

use crate::checkpoint;
use anyhow::{bail, Context, Result};
use orthogonale::kg::Vocabulary;
use orthogonale::pattern::{
    commutator_gap, composition_residual, inversion_residual, residual_report, symmetry_residual,
    PatternKind,
};
use orthogonale::tensor::BlockDiagOrthogonal;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyzeKind {
    Symmetry,
    /// Same residual as symmetry; the pattern holds when it is large.
    Antisymmetry,
    Inversion,
    Composition,
    CommutatorGap,
}

impl AnalyzeKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "symmetry" => Self::Symmetry,
            "antisymmetry" => Self::Antisymmetry,
            "inversion" => Self::Inversion,
            "composition" => Self::Composition,
            "commutator-gap" => Self::CommutatorGap,
            other => bail!(
                "unknown kind {other:?}; expected symmetry | antisymmetry | inversion | composition | commutator-gap"
            ),
        })
    }

    fn arity(self) -> usize {
        match self {
            Self::Symmetry | Self::Antisymmetry => 1,
            Self::Inversion => 2,
            Self::Composition | Self::CommutatorGap => 3,
        }
    }

    fn report_kind(self) -> PatternKind {
        match self {
            Self::Symmetry | Self::Antisymmetry => PatternKind::Symmetry,
            Self::Inversion => PatternKind::Inversion,
            Self::Composition => PatternKind::Composition,
            Self::CommutatorGap => PatternKind::CommutatorGap,
        }
    }
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn resolve_relation(vocab: &Vocabulary, name: &str) -> Result<u32> {
    if let Some(id) = vocab.relation_id(name) {
        return Ok(id);
    }
    let mut scored: Vec<(usize, &str)> = vocab
        .relation_names()
        .iter()
        .map(|n| (levenshtein(name, n), n.as_str()))
        .collect();
    scored.sort();
    let near: Vec<&str> = scored.iter().take(3).map(|(_, n)| *n).collect();
    bail!("unknown relation {name:?}; nearest names: {}", near.join(", "))
}

pub fn run(
    ckpt_path: &Path,
    kind: AnalyzeKind,
    relation_names: &[String],
    out_dir: &Path,
    bins: usize,
) -> Result<i32> {
    if relation_names.len() != kind.arity() {
        bail!(
            "kind {:?} needs {} relation name(s), got {}",
            kind.report_kind().as_str(),
            kind.arity(),
            relation_names.len()
        );
    }
    let ckpt = checkpoint::load(ckpt_path)?;
    let vocab = ckpt.vocabulary()?;
    let ids: Vec<u32> = relation_names
        .iter()
        .map(|n| resolve_relation(&vocab, n))
        .collect::<Result<_>>()?;
    let rel = |i: usize| -> &BlockDiagOrthogonal { ckpt.relations.relation(ids[i]) };
    let d = rel(0).block_dim();

    let residual = match kind {
        AnalyzeKind::Symmetry | AnalyzeKind::Antisymmetry => symmetry_residual(rel(0)),
        AnalyzeKind::Inversion => inversion_residual(rel(0), rel(1))?,
        AnalyzeKind::Composition | AnalyzeKind::CommutatorGap => {
            composition_residual(rel(0), rel(1), rel(2))?
        }
    };
    let mut report = residual_report(
        kind.report_kind(),
        relation_names.to_vec(),
        &residual,
        d,
        bins,
    )?;
    if kind == AnalyzeKind::CommutatorGap {
        let (fwd, swp) = commutator_gap(rel(0), rel(1), rel(2))?;
        debug_assert!((fwd - report.residual_norm).abs() <= 1e-12);
        report.swapped_residual_norm = Some(swp);
    }

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let stem = kind.report_kind().as_str();
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let json_path = out_dir.join(format!("{stem}.json"));
    let csv = std::fs::File::create(&csv_path)?;
    report.write_csv(std::io::BufWriter::new(csv))?;
    std::fs::write(&json_path, report.json_summary())?;

    if kind == AnalyzeKind::Antisymmetry {
        println!("antisymmetry holds when the symmetry residual is large");
    }
    println!("relations      {}", relation_names.join(", "));
    println!("residual_norm  {:.6e}", report.residual_norm);
    if let Some(s) = report.swapped_residual_norm {
        println!("swapped_norm   {s:.6e}");
    }
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(0)
}
