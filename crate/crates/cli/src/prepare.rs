//! `prepare`: validate a dataset directory, report its statistics, and write
//! the vocabulary files.

use anyhow::{Context, Result};
use orthogonale::kg::Dataset;
use std::path::Path;

pub fn run(data_dir: &Path, out_dir: &Path) -> Result<i32> {
    let dataset = Dataset::load(data_dir)
        .with_context(|| format!("loading dataset from {}", data_dir.display()))?;
    std::fs::create_dir_all(out_dir)?;
    dataset.vocab.save(out_dir)?;
    println!("entities   {}", dataset.vocab.num_entities());
    println!("relations  {}", dataset.vocab.num_relations());
    println!("train      {}", dataset.train.triples.len());
    println!("valid      {}", dataset.valid.triples.len());
    println!("test       {}", dataset.test.triples.len());
    println!("vocabulary written to {}", out_dir.display());
    Ok(0)
}
