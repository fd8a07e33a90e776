//! Checkpoint files: a JSON manifest followed by raw little-endian 64-bit
//! parameter and optimizer arrays. Zero-dependency to parse, auditable with
//! a hex editor, and byte-stable across save → load → save.
//!
//! Layout:
//!
//! ```text
//! magic      8  b"ORTHEKG\0"
//! version    4  u32 LE
//! json_len   8  u64 LE
//! manifest   json_len bytes of JSON
//! payload    entity matrices, biases, relation blocks, adaptive-moment
//!            first/second moments, per-block step counts, entity
//!            accumulators, bias accumulators — in that order
//! ```

use anyhow::{bail, Context, Result};
use orthogonale::kg::Vocabulary;
use orthogonale::model::{EntityTable, ModelConfig, RelationTable};
use orthogonale::optim::{
    AdagradState, EntityOptimizer, RelationOptimizer, RiemannianAdamState,
};
use orthogonale::tensor::{BlockDiagOrthogonal, DenseMatrix};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"ORTHEKG\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    /// Byte order of the payload arrays; only "little" is written or read.
    pub endianness: String,
    /// Bits per numeric payload element; only 64 is written or read.
    pub numeric_width: u32,
    pub dataset: String,
    pub num_entities: u64,
    pub num_relations: u64,
    pub epoch: u64,
    pub valid_mrr: f64,
    pub config: ModelConfig,
    pub entity_names: Vec<String>,
    pub relation_names: Vec<String>,
}

#[derive(Debug)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub entities: EntityTable,
    pub relations: RelationTable,
    pub rel_optimizer: RelationOptimizer,
    pub ent_optimizer: EntityOptimizer,
}

impl Checkpoint {
    pub fn vocabulary(&self) -> Result<Vocabulary> {
        Vocabulary::from_names(
            self.manifest.entity_names.clone(),
            self.manifest.relation_names.clone(),
        )
        .context("checkpoint manifest carries an inconsistent vocabulary")
    }
}

struct PayloadWriter<W: Write> {
    w: W,
}

impl<W: Write> PayloadWriter<W> {
    fn f64s(&mut self, values: &[f64]) -> Result<()> {
        for v in values {
            self.w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    fn u64s(&mut self, values: &[u64]) -> Result<()> {
        for v in values {
            self.w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

struct PayloadReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> PayloadReader<'a> {
    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = count * 8;
        if self.pos + bytes > self.buf.len() {
            bail!("checkpoint payload truncated");
        }
        let out = self.buf[self.pos..self.pos + bytes]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        self.pos += bytes;
        Ok(out)
    }

    fn u64s(&mut self, count: usize) -> Result<Vec<u64>> {
        let bytes = count * 8;
        if self.pos + bytes > self.buf.len() {
            bail!("checkpoint payload truncated");
        }
        let out = self.buf[self.pos..self.pos + bytes]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        self.pos += bytes;
        Ok(out)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            bail!(
                "checkpoint payload has {} trailing bytes",
                self.buf.len() - self.pos
            );
        }
        Ok(())
    }
}

pub fn save(
    path: &Path,
    manifest: &Manifest,
    entities: &EntityTable,
    relations: &RelationTable,
    rel_opt: &RelationOptimizer,
    ent_opt: &EntityOptimizer,
) -> Result<()> {
    for rid in 0..relations.len() as u32 {
        let res = relations.relation(rid).max_residual();
        if res > orthogonale::tensor::ORTHO_TOLERANCE {
            bail!("refusing to write checkpoint: relation {rid} residual {res:e}");
        }
    }
    let json = serde_json::to_vec(manifest).context("manifest serialization")?;
    let file = std::fs::File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;

    let mut pw = PayloadWriter { w: &mut w };
    for id in 0..entities.len() as u32 {
        pw.f64s(entities.matrix(id).data())?;
    }
    pw.f64s(entities.biases())?;
    for rid in 0..relations.len() as u32 {
        for block in relations.relation(rid).blocks() {
            pw.f64s(block.data())?;
        }
    }
    let mut step_counts = Vec::new();
    for rel_states in &rel_opt.states {
        for s in rel_states {
            pw.f64s(s.first_moment().data())?;
        }
    }
    for rel_states in &rel_opt.states {
        for s in rel_states {
            pw.f64s(s.second_moment().data())?;
            step_counts.push(s.step_count());
        }
    }
    pw.u64s(&step_counts)?;
    for s in &ent_opt.mat_states {
        pw.f64s(s.accum().data())?;
    }
    pw.f64s(&ent_opt.bias_accum)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut file = std::fs::File::open(path)
        .with_context(|| format!("cannot open checkpoint {}", path.display()))?;
    let mut header = [0u8; 8];
    file.read_exact(&mut header).context("checkpoint header")?;
    if &header != MAGIC {
        bail!("not a checkpoint file (bad magic)");
    }
    let mut word = [0u8; 4];
    file.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        bail!("unsupported checkpoint format version {version}");
    }
    let mut len8 = [0u8; 8];
    file.read_exact(&mut len8)?;
    let json_len = u64::from_le_bytes(len8) as usize;
    let mut json = vec![0u8; json_len];
    file.read_exact(&mut json).context("manifest bytes")?;
    let manifest: Manifest = serde_json::from_slice(&json).context("manifest JSON")?;

    if manifest.endianness != "little" {
        bail!("checkpoint written with unsupported byte order {:?}", manifest.endianness);
    }
    if manifest.numeric_width != 64 {
        bail!("checkpoint numeric width {} unsupported", manifest.numeric_width);
    }
    if manifest.format_version != FORMAT_VERSION {
        bail!("manifest format version disagrees with file header");
    }
    manifest.config.validate().context("checkpoint config")?;
    let cfg = &manifest.config;
    let num_entities = manifest.num_entities as usize;
    let num_relations = manifest.num_relations as usize;
    if manifest.entity_names.len() != num_entities || manifest.relation_names.len() != num_relations
    {
        bail!("manifest name lists disagree with declared vocabulary sizes");
    }

    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    let mut pr = PayloadReader { buf: &payload, pos: 0 };

    let (n, m, d) = (cfg.n, cfg.m, cfg.d);
    let num_blocks = cfg.num_blocks();
    let mut mats = Vec::with_capacity(num_entities);
    for _ in 0..num_entities {
        mats.push(DenseMatrix::from_vec(n, m, pr.f64s(n * m)?)?);
    }
    let biases = pr.f64s(num_entities)?;
    let entities = EntityTable::new(mats, biases).context("entity payload")?;

    let mut rels = Vec::with_capacity(num_relations);
    for rid in 0..num_relations {
        let mut blocks = Vec::with_capacity(num_blocks);
        for _ in 0..num_blocks {
            blocks.push(DenseMatrix::from_vec(d, d, pr.f64s(d * d)?)?);
        }
        // Orthogonality is re-validated here; a drifted or corrupted file
        // fails to load.
        rels.push(
            BlockDiagOrthogonal::new(blocks)
                .with_context(|| format!("relation {rid} fails the orthogonality invariant"))?,
        );
    }
    let relations = RelationTable::new(rels, n).context("relation payload")?;

    let mut first_moments = Vec::with_capacity(num_relations * num_blocks);
    for _ in 0..num_relations * num_blocks {
        first_moments.push(DenseMatrix::from_vec(d, d, pr.f64s(d * d)?)?);
    }
    let mut second_moments = Vec::with_capacity(num_relations * num_blocks);
    for _ in 0..num_relations * num_blocks {
        second_moments.push(DenseMatrix::from_vec(d, d, pr.f64s(d * d)?)?);
    }
    let step_counts = pr.u64s(num_relations * num_blocks)?;
    let mut states = Vec::with_capacity(num_relations);
    let mut it = first_moments
        .into_iter()
        .zip(second_moments)
        .zip(step_counts);
    for _ in 0..num_relations {
        let mut rel_states = Vec::with_capacity(num_blocks);
        for _ in 0..num_blocks {
            let ((mm, vv), sc) = it.next().expect("sized above");
            rel_states.push(
                RiemannianAdamState::from_parts(mm, vv, sc, cfg.lr_relation)
                    .context("adaptive-moment state")?,
            );
        }
        states.push(rel_states);
    }
    let rel_optimizer = RelationOptimizer { states };

    let mut mat_states = Vec::with_capacity(num_entities);
    for _ in 0..num_entities {
        let accum = DenseMatrix::from_vec(n, m, pr.f64s(n * m)?)?;
        mat_states.push(AdagradState::from_parts(accum, cfg.lr_entity).context("accumulator state")?);
    }
    let bias_accum = pr.f64s(num_entities)?;
    pr.finish()?;
    let ent_optimizer = EntityOptimizer {
        mat_states,
        bias_accum,
        lr: cfg.lr_entity,
        epsilon: orthogonale::optim::DEFAULT_EPSILON,
    };

    Ok(Checkpoint {
        manifest,
        entities,
        relations,
        rel_optimizer,
        ent_optimizer,
    })
}
