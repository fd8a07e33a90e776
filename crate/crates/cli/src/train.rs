//! `train`: run the alternating optimization with periodic validation,
//! early stopping, and best-checkpoint tracking.

use crate::checkpoint::{self, Manifest};
use crate::config::TrainSettings;
use anyhow::{bail, Context, Result};
use orthogonale::kg::{build_filter_index, Dataset};
use orthogonale::trainer::{RelationParameterization, Trainer};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

pub fn run(
    config_path: &Path,
    data_dir: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
    resume: Option<&Path>,
) -> Result<i32> {
    let mut settings = TrainSettings::from_file(config_path)?;
    if let Some(seed) = seed_override {
        settings.model.seed = seed;
    }
    // Configuration problems must surface before any data or compute.
    settings
        .model
        .validate()
        .context("invalid training configuration")?;

    let dataset = Dataset::load(data_dir)
        .with_context(|| format!("loading dataset from {}", data_dir.display()))?;
    let filter = build_filter_index(&[&dataset.train, &dataset.valid, &dataset.test]);
    let dataset_name = data_dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "unnamed".into());

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let log_path = out_dir.join("metrics.log");
    let mut log = std::fs::File::create(&log_path)
        .with_context(|| format!("cannot create {}", log_path.display()))?;
    let ckpt_path = out_dir.join("best.ckpt");

    let (mut trainer, mut best_mrr, mut best_epoch) = match resume {
        None => {
            let t = Trainer::new(
                settings.model.clone(),
                RelationParameterization::Riemannian,
                dataset.vocab.num_entities(),
                dataset.vocab.num_relations(),
            )?;
            (t, f64::NEG_INFINITY, 0usize)
        }
        Some(path) => {
            let ckpt = checkpoint::load(path)?;
            let old = &ckpt.manifest.config;
            if (old.n, old.m, old.d) != (settings.model.n, settings.model.m, settings.model.d) {
                bail!(
                    "cannot resume: checkpoint has (n, m, d) = ({}, {}, {})",
                    old.n,
                    old.m,
                    old.d
                );
            }
            if ckpt.manifest.entity_names != dataset.vocab.entity_names()
                || ckpt.manifest.relation_names != dataset.vocab.relation_names()
            {
                bail!("cannot resume: checkpoint vocabulary differs from the dataset");
            }
            let mut rel_opt = ckpt.rel_optimizer;
            for states in &mut rel_opt.states {
                for s in states {
                    s.lr = settings.model.lr_relation;
                }
            }
            let mut ent_opt = ckpt.ent_optimizer;
            ent_opt.lr = settings.model.lr_entity;
            for s in &mut ent_opt.mat_states {
                s.lr = settings.model.lr_entity;
            }
            let epoch = ckpt.manifest.epoch as usize;
            println!(
                "resuming from {} at epoch {epoch} (valid mrr {:.6})",
                path.display(),
                ckpt.manifest.valid_mrr
            );
            let t = Trainer::from_checkpoint(
                settings.model.clone(),
                ckpt.entities,
                ckpt.relations,
                rel_opt,
                ent_opt,
                epoch,
            )?;
            (t, ckpt.manifest.valid_mrr, epoch)
        }
    };

    println!(
        "training on {dataset_name}: {} entities, {} relations, {} train / {} valid / {} test",
        dataset.vocab.num_entities(),
        dataset.vocab.num_relations(),
        dataset.train.triples.len(),
        dataset.valid.triples.len(),
        dataset.test.triples.len()
    );

    let started = Instant::now();
    let first_epoch = trainer.epoch() + 1;
    if first_epoch > settings.model.max_epochs {
        bail!("checkpoint is already at epoch {}; raise max_epochs", trainer.epoch());
    }
    for epoch in first_epoch..=settings.model.max_epochs {
        let loss = trainer
            .run_epoch(&dataset.train)
            .with_context(|| format!("training aborted at epoch {epoch}"))?;
        if !loss.is_finite() {
            bail!("non-finite training loss {loss} at epoch {epoch}");
        }

        if epoch % settings.eval_every == 0 || epoch == settings.model.max_epochs {
            let metrics = trainer.evaluate(&dataset.valid, &filter)?;
            let elapsed = started.elapsed().as_secs_f64();
            // First three columns are deterministic under a fixed seed; the
            // wall-time column is informational only.
            let line = format!("{epoch}\t{loss:.6}\t{:.6}\t{elapsed:.1}", metrics.mrr);
            writeln!(log, "{line}")?;
            println!("epoch {line}");
            if metrics.mrr > best_mrr {
                best_mrr = metrics.mrr;
                best_epoch = epoch;
                trainer.stabilize_relations()?;
                let manifest = Manifest {
                    format_version: 1,
                    endianness: "little".into(),
                    numeric_width: 64,
                    dataset: dataset_name.clone(),
                    num_entities: dataset.vocab.num_entities() as u64,
                    num_relations: dataset.vocab.num_relations() as u64,
                    epoch: epoch as u64,
                    valid_mrr: metrics.mrr,
                    config: settings.model.clone(),
                    entity_names: dataset.vocab.entity_names().to_vec(),
                    relation_names: dataset.vocab.relation_names().to_vec(),
                };
                checkpoint::save(
                    &ckpt_path,
                    &manifest,
                    trainer.entities(),
                    trainer.relations(),
                    trainer
                        .relation_optimizer()
                        .expect("manifold training always has moment states"),
                    trainer.entity_optimizer(),
                )?;
            }
            if epoch - best_epoch >= settings.patience {
                println!("early stop: no validation improvement in {} epochs", settings.patience);
                break;
            }
        }
    }
    if best_epoch == 0 {
        bail!("no validation pass completed; lower eval_every or raise max_epochs");
    }
    println!(
        "best valid mrr {best_mrr:.6} at epoch {best_epoch}; checkpoint {}",
        ckpt_path.display()
    );
    Ok(0)
}
