//! `eval`: filtered ranking metrics for a checkpoint on one split.

use crate::checkpoint;
use anyhow::{bail, Context, Result};
use orthogonale::eval::{evaluate_sides, EvalSides};
use orthogonale::kg::{build_filter_index, build_head_filter_index, Dataset};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitChoice {
    Valid,
    Test,
}

pub fn run(
    ckpt_path: &Path,
    data_dir: &Path,
    split: SplitChoice,
    both_sides: bool,
) -> Result<i32> {
    let ckpt = checkpoint::load(ckpt_path)?;
    let vocab = ckpt.vocabulary()?;
    let dataset = Dataset::load_with_vocab(data_dir, &vocab).with_context(|| {
        format!(
            "dataset {} is not compatible with checkpoint {} (trained on {:?})",
            data_dir.display(),
            ckpt_path.display(),
            ckpt.manifest.dataset
        )
    })?;
    if dataset.vocab.num_entities() != ckpt.manifest.num_entities as usize
        || dataset.vocab.num_relations() != ckpt.manifest.num_relations as usize
    {
        bail!("vocabulary size mismatch between checkpoint and dataset");
    }

    let split_set = match split {
        SplitChoice::Valid => &dataset.valid,
        SplitChoice::Test => &dataset.test,
    };
    let all = [&dataset.train, &dataset.valid, &dataset.test];
    let filter = build_filter_index(&all);
    let head_filter = build_head_filter_index(&all);
    let sides = if both_sides { EvalSides::Both } else { EvalSides::TailOnly };
    if both_sides {
        println!("note: head-side queries are an extra diagnostic pass, not the primary protocol");
    }
    let metrics = evaluate_sides(
        &ckpt.entities,
        &ckpt.relations,
        split_set,
        &filter,
        &head_filter,
        sides,
    )?;

    let split_name = match split {
        SplitChoice::Valid => "valid",
        SplitChoice::Test => "test",
    };
    println!("split      {split_name}");
    println!("queries    {}", metrics.count);
    println!("MRR        {:.6}", metrics.mrr);
    for (k, v) in metrics.hits_at {
        println!("Hits@{k:<5} {v:.6}");
    }
    println!(
        "mrr={:.6} h1={:.6} h3={:.6} h10={:.6} n={}",
        metrics.mrr,
        metrics.hits(1).unwrap(),
        metrics.hits(3).unwrap(),
        metrics.hits(10).unwrap(),
        metrics.count
    );
    Ok(0)
}
