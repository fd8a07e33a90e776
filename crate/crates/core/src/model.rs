//! Model parameters, the distance scoring function, the sampled softplus
//! loss, and closed-form gradients for both parameter groups.
//!
//! An entity is an `n × m` matrix plus a scalar bias; a relation is a
//! block-diagonal orthogonal matrix acting on the rows of entity matrices.
//! The score of `(h, r, t)` is the negative Frobenius distance between the
//! transformed head and the tail, plus both biases:
//!
//! ```text
//! s(h, r, t) = −‖e_R · e_H − e_T‖_F + b_h + b_t
//! ```

use crate::error::{Error, Result};
use crate::kg::Triple;
use crate::manifold::random_orthogonal;
use crate::tensor::{BlockDiagOrthogonal, DenseMatrix};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Distance below which the score gradient is treated as at the norm cusp:
/// the distance term is dropped (a valid subgradient) and bias gradients are
/// kept.
pub const DISTANCE_SINGULARITY: f64 = 1e-12;

/// Triples per parallel work item in batched gradient evaluation. Gradients
/// are merged in triple order, so results are identical for any thread count.
const PAR_CHUNK: usize = 32;

/// Per-entity parameters: matrices are `n × m`, biases are scalars.
#[derive(Debug, Clone)]
pub struct EntityTable {
    n: usize,
    m: usize,
    mats: Vec<DenseMatrix>,
    biases: Vec<f64>,
}

impl EntityTable {
    pub fn new(mats: Vec<DenseMatrix>, biases: Vec<f64>) -> Result<Self> {
        if mats.is_empty() || mats.len() != biases.len() {
            return Err(Error::Shape(format!(
                "entity table: {} matrices, {} biases",
                mats.len(),
                biases.len()
            )));
        }
        let (n, m) = (mats[0].rows(), mats[0].cols());
        for (i, mat) in mats.iter().enumerate() {
            if mat.rows() != n || mat.cols() != m {
                return Err(Error::Shape(format!(
                    "entity {i} has shape {}x{}, expected {n}x{m}",
                    mat.rows(),
                    mat.cols()
                )));
            }
            if !mat.is_finite() {
                return Err(Error::Numeric(format!("entity {i} has non-finite entries")));
            }
        }
        if !biases.iter().all(|b| b.is_finite()) {
            return Err(Error::Numeric("non-finite entity bias".into()));
        }
        Ok(Self { n, m, mats, biases })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn matrix(&self, id: u32) -> &DenseMatrix {
        &self.mats[id as usize]
    }

    pub fn matrix_mut(&mut self, id: u32) -> &mut DenseMatrix {
        &mut self.mats[id as usize]
    }

    pub fn bias(&self, id: u32) -> f64 {
        self.biases[id as usize]
    }

    pub fn bias_mut(&mut self, id: u32) -> &mut f64 {
        &mut self.biases[id as usize]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    fn check_id(&self, id: u32) -> Result<()> {
        if (id as usize) < self.mats.len() {
            Ok(())
        } else {
            Err(Error::Index(format!(
                "entity id {id} out of range (|V| = {})",
                self.mats.len()
            )))
        }
    }
}

/// Per-relation block-diagonal orthogonal matrices sharing `(n, d)`.
#[derive(Debug, Clone)]
pub struct RelationTable {
    rels: Vec<BlockDiagOrthogonal>,
}

impl RelationTable {
    pub fn new(rels: Vec<BlockDiagOrthogonal>, n: usize) -> Result<Self> {
        for (i, r) in rels.iter().enumerate() {
            if r.dim() != n {
                return Err(Error::Shape(format!(
                    "relation {i} has total dimension {}, expected {n}",
                    r.dim()
                )));
            }
        }
        Ok(Self { rels })
    }

    pub fn len(&self) -> usize {
        self.rels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rels.is_empty()
    }

    pub fn relation(&self, id: u32) -> &BlockDiagOrthogonal {
        &self.rels[id as usize]
    }

    pub fn relation_mut(&mut self, id: u32) -> &mut BlockDiagOrthogonal {
        &mut self.rels[id as usize]
    }

    fn check_id(&self, id: u32) -> Result<()> {
        if (id as usize) < self.rels.len() {
            Ok(())
        } else {
            Err(Error::Index(format!(
                "relation id {id} out of range (|R| = {})",
                self.rels.len()
            )))
        }
    }
}

/// Model and run hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Row count of entity matrices = total relation dimension.
    pub n: usize,
    /// Column count of entity matrices.
    pub m: usize,
    /// Orthogonal block size; must divide `n`.
    pub d: usize,
    /// Negatives sampled per training triple.
    pub negative_k: usize,
    pub lr_entity: f64,
    pub lr_relation: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.d == 0 || self.batch_size == 0 || self.max_epochs == 0
        {
            return Err(Error::Config("all counts must be at least 1".into()));
        }
        if self.n % self.d != 0 {
            return Err(Error::Config(format!(
                "n = {} is not divisible by block size d = {}; pad n first",
                self.n, self.d
            )));
        }
        if !(self.lr_entity > 0.0 && self.lr_relation > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        Ok(())
    }

    pub fn num_blocks(&self) -> usize {
        self.n / self.d
    }
}

/// Free-parameter accounting for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterCounts {
    /// All entity parameters: `|V| · (n·m + 1)`, biases included.
    pub entity_params: u64,
    /// Free parameters of one relation: `n/d` blocks of `d(d−1)/2` each,
    /// i.e. `(d−1)·n/2`.
    pub relation_params_per_relation: u64,
}

pub fn parameter_counts(config: &ModelConfig, num_entities: usize) -> ParameterCounts {
    let per_block = (config.d as u64) * (config.d as u64 - 1) / 2;
    ParameterCounts {
        entity_params: num_entities as u64 * (config.n as u64 * config.m as u64 + 1),
        relation_params_per_relation: (config.n as u64 / config.d as u64) * per_block,
    }
}

/// Draws fresh parameters: entity entries ~ N(0, 1/√n), biases zero, and
/// near-identity orthogonal relation blocks. Fully determined by the
/// generator state.
pub fn init_params<R: Rng>(
    config: &ModelConfig,
    num_entities: usize,
    num_relations: usize,
    rng: &mut R,
) -> Result<(EntityTable, RelationTable)> {
    config.validate()?;
    if num_entities == 0 || num_relations == 0 {
        return Err(Error::Config("need at least one entity and one relation".into()));
    }
    let std = (1.0 / (config.n as f64).sqrt()).sqrt();
    let normal = Normal::new(0.0, std).unwrap();
    let mut mats = Vec::with_capacity(num_entities);
    for _ in 0..num_entities {
        let data: Vec<f64> = (0..config.n * config.m).map(|_| normal.sample(rng)).collect();
        mats.push(DenseMatrix::from_vec(config.n, config.m, data)?);
    }
    let biases = vec![0.0; num_entities];
    let entities = EntityTable::new(mats, biases)?;

    let mut rels = Vec::with_capacity(num_relations);
    for _ in 0..num_relations {
        let blocks: Vec<DenseMatrix> = (0..config.num_blocks())
            .map(|_| random_orthogonal(config.d, rng))
            .collect();
        rels.push(BlockDiagOrthogonal::new(blocks)?);
    }
    let relations = RelationTable::new(rels, config.n)?;
    Ok((entities, relations))
}

fn frob_distance(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    debug_assert_eq!(a.rows(), b.rows());
    debug_assert_eq!(a.cols(), b.cols());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `s(h, r, t) = −‖e_R·e_H − e_T‖_F + b_h + b_t`.
pub fn score(
    entities: &EntityTable,
    relations: &RelationTable,
    h: u32,
    r: u32,
    t: u32,
) -> Result<f64> {
    entities.check_id(h)?;
    entities.check_id(t)?;
    relations.check_id(r)?;
    let rotated = relations.relation(r).apply(entities.matrix(h))?;
    Ok(-frob_distance(&rotated, entities.matrix(t)) + entities.bias(h) + entities.bias(t))
}

/// Scores every entity as a candidate tail for `(h, r, ·)`. The rotated head
/// is computed once and reused, so element `e` equals `score(h, r, e)` bit
/// for bit.
pub fn score_all_tails(
    entities: &EntityTable,
    relations: &RelationTable,
    h: u32,
    r: u32,
) -> Result<Vec<f64>> {
    entities.check_id(h)?;
    relations.check_id(r)?;
    let rotated = relations.relation(r).apply(entities.matrix(h))?;
    let b_h = entities.bias(h);
    Ok((0..entities.len() as u32)
        .map(|t| -frob_distance(&rotated, entities.matrix(t)) + b_h + entities.bias(t))
        .collect())
}

/// Scores every entity as a candidate head for `(·, r, t)`. Each candidate
/// needs its own rotation, so this is the expensive direction; it exists for
/// the optional both-sides evaluation.
pub fn score_all_heads(
    entities: &EntityTable,
    relations: &RelationTable,
    r: u32,
    t: u32,
) -> Result<Vec<f64>> {
    entities.check_id(t)?;
    relations.check_id(r)?;
    let rel = relations.relation(r);
    let b_t = entities.bias(t);
    (0..entities.len() as u32)
        .map(|h| {
            let rotated = rel.apply(entities.matrix(h))?;
            Ok(-frob_distance(&rotated, entities.matrix(t)) + entities.bias(h) + b_t)
        })
        .collect()
}

/// One training example: a positive triple and its sampled negative tails.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub triple: Triple,
    pub negatives: Vec<u32>,
}

/// Accumulated entity gradients, keyed by entity id.
#[derive(Debug, Clone, Default)]
pub struct EntityGrads {
    pub mats: BTreeMap<u32, DenseMatrix>,
    pub biases: BTreeMap<u32, f64>,
}

/// Accumulated ambient (pre-projection) relation gradients: per relation, one
/// `d × d` matrix per block. Tangent projection happens inside the
/// Riemannian optimizer.
#[derive(Debug, Clone, Default)]
pub struct RelationGrads {
    pub blocks: BTreeMap<u32, Vec<DenseMatrix>>,
}

/// Which gradient group a caller needs; phases of the alternating schedule
/// freeze one side and skip its accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradTargets {
    All,
    EntitiesOnly,
    RelationsOnly,
}

struct TripleGrads {
    loss: f64,
    rel_id: u32,
    head_id: u32,
    head_mat: Option<DenseMatrix>,
    head_bias: f64,
    tails: BTreeMap<u32, (Option<DenseMatrix>, f64)>,
    rel_blocks: Option<Vec<DenseMatrix>>,
}

fn stable_softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Loss and gradients for one triple against its candidate tails. The first
/// candidate is the true tail (label −1); the rest are negatives (label +1).
fn triple_loss_and_grads(
    entities: &EntityTable,
    relations: &RelationTable,
    item: &BatchItem,
    targets: GradTargets,
) -> Result<TripleGrads> {
    let Triple { head, rel, tail } = item.triple;
    entities.check_id(head)?;
    entities.check_id(tail)?;
    relations.check_id(rel)?;
    let relation = relations.relation(rel);
    let e_h = entities.matrix(head);
    let rotated = relation.apply(e_h)?;
    let b_h = entities.bias(head);

    let want_entities = matches!(targets, GradTargets::All | GradTargets::EntitiesOnly);
    let want_relations = matches!(targets, GradTargets::All | GradTargets::RelationsOnly);

    let (n, m) = (entities.n(), entities.m());
    let mut loss = 0.0;
    let mut head_bias = 0.0;
    let mut tails: BTreeMap<u32, (Option<DenseMatrix>, f64)> = BTreeMap::new();
    // Σ over terms of w·D/δ; the head and relation gradients both factor
    // through this single accumulator because e_R and e_H are fixed within
    // the triple: ∂s/∂e_H = −e_Rᵀ·(D/δ) and ∂s/∂(block i) = −(D/δ)_band·e_Hᵀ_band.
    let mut weighted_dir = if want_entities || want_relations {
        Some(DenseMatrix::zeros(n, m))
    } else {
        None
    };

    for (idx, &cand) in std::iter::once(&tail).chain(item.negatives.iter()).enumerate() {
        entities.check_id(cand)?;
        let y = if idx == 0 { -1.0 } else { 1.0 };
        let e_t = entities.matrix(cand);
        let mut dist_sq = 0.0;
        for (a, b) in rotated.data().iter().zip(e_t.data()) {
            let d = a - b;
            dist_sq += d * d;
        }
        let delta = dist_sq.sqrt();
        let s = -delta + b_h + entities.bias(cand);
        let z = y * s;
        loss += stable_softplus(z);
        let w = y * stable_sigmoid(z);
        if !w.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss weight for triple ({head}, {rel}, {cand})"
            )));
        }

        head_bias += w;
        let entry = tails.entry(cand).or_insert_with(|| (None, 0.0));
        entry.1 += w;

        if delta >= DISTANCE_SINGULARITY {
            let scale = w / delta;
            if let Some(acc) = weighted_dir.as_mut() {
                for ((a, r_), t_) in acc.data_mut().iter_mut().zip(rotated.data()).zip(e_t.data()) {
                    *a += scale * (r_ - t_);
                }
            }
            if want_entities {
                // ∂s/∂e_T = D/δ with D = e_R·e_H − e_T.
                let g = entry.0.get_or_insert_with(|| DenseMatrix::zeros(n, m));
                for ((g_, r_), t_) in g.data_mut().iter_mut().zip(rotated.data()).zip(e_t.data()) {
                    *g_ += scale * (r_ - t_);
                }
            }
        }
    }

    let mut head_mat = None;
    let mut rel_blocks = None;
    if let Some(wd) = weighted_dir {
        if want_entities {
            // ∂L/∂e_H = −e_Rᵀ · Σ w·D/δ.
            head_mat = Some(relation.apply_transpose(&wd)?.scale(-1.0));
        }
        if want_relations {
            // ∂L/∂(block i) = −(Σ w·D/δ)_band · e_Hᵀ_band, assembled per band
            // without ever materializing the n×n ambient gradient.
            let d = relation.block_dim();
            let mut blocks = Vec::with_capacity(relation.num_blocks());
            for bi in 0..relation.num_blocks() {
                let mut g = DenseMatrix::zeros(d, d);
                let base = bi * d;
                for r_ in 0..d {
                    for c in 0..d {
                        let mut s = 0.0;
                        for j in 0..m {
                            s += wd.get(base + r_, j) * e_h.get(base + c, j);
                        }
                        g.set(r_, c, -s);
                    }
                }
                blocks.push(g);
            }
            rel_blocks = Some(blocks);
        }
    }

    Ok(TripleGrads {
        loss,
        rel_id: rel,
        head_id: head,
        head_mat,
        head_bias,
        tails,
        rel_blocks,
    })
}

fn merge_triple(
    acc_e: &mut EntityGrads,
    acc_r: &mut RelationGrads,
    tg: TripleGrads,
    targets: GradTargets,
    num_blocks: usize,
    d: usize,
) {
    let want_entities = matches!(targets, GradTargets::All | GradTargets::EntitiesOnly);
    let want_relations = matches!(targets, GradTargets::All | GradTargets::RelationsOnly);
    if want_entities {
        if let Some(hm) = tg.head_mat {
            acc_e
                .mats
                .entry(tg.head_id)
                .and_modify(|g| g.axpy(1.0, &hm).expect("shape fixed"))
                .or_insert(hm);
        }
        *acc_e.biases.entry(tg.head_id).or_insert(0.0) += tg.head_bias;
        // Entities hit only at the distance cusp carry bias gradients with no
        // matrix gradient; the maps stay sparse in that case.
        for (tid, (mat, bias)) in tg.tails {
            if let Some(mg) = mat {
                acc_e
                    .mats
                    .entry(tid)
                    .and_modify(|g| g.axpy(1.0, &mg).expect("shape fixed"))
                    .or_insert(mg);
            }
            *acc_e.biases.entry(tid).or_insert(0.0) += bias;
        }
    }
    if want_relations {
        if let Some(blocks) = tg.rel_blocks {
            let slot = acc_r
                .blocks
                .entry(tg.rel_id)
                .or_insert_with(|| vec![DenseMatrix::zeros(d, d); num_blocks]);
            for (a, b) in slot.iter_mut().zip(&blocks) {
                a.axpy(1.0, b).expect("shape fixed");
            }
        }
    }
}

/// Loss and gradients over a batch, restricted to the requested parameter
/// group. The loss is the plain sum over all positive and negative terms of
/// every triple. Triples are processed in fixed chunks whose results merge
/// in batch order, so the outcome is independent of the worker count.
pub fn loss_and_grads_masked(
    entities: &EntityTable,
    relations: &RelationTable,
    batch: &[BatchItem],
    targets: GradTargets,
) -> Result<(f64, EntityGrads, RelationGrads)> {
    let mut total = 0.0;
    let mut eg = EntityGrads::default();
    let mut rg = RelationGrads::default();
    if batch.is_empty() {
        return Ok((total, eg, rg));
    }
    let d = relations.relation(batch[0].triple.rel).block_dim();
    let num_blocks = relations.relation(batch[0].triple.rel).num_blocks();
    for chunk in batch.chunks(PAR_CHUNK) {
        let partials: Vec<Result<TripleGrads>> = chunk
            .par_iter()
            .map(|item| triple_loss_and_grads(entities, relations, item, targets))
            .collect();
        for p in partials {
            let tg = p?;
            total += tg.loss;
            merge_triple(&mut eg, &mut rg, tg, targets, num_blocks, d);
        }
    }
    if !total.is_finite() {
        return Err(Error::Numeric("non-finite batch loss".into()));
    }
    Ok((total, eg, rg))
}

/// Loss and gradients for both parameter groups; see
/// [`loss_and_grads_masked`] for the contract.
pub fn loss_and_grads(
    entities: &EntityTable,
    relations: &RelationTable,
    batch: &[BatchItem],
) -> Result<(f64, EntityGrads, RelationGrads)> {
    loss_and_grads_masked(entities, relations, batch, GradTargets::All)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn quarter_turn() -> DenseMatrix {
        DenseMatrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).unwrap()
    }

    fn tiny_model(seed: u64, num_entities: usize, n: usize, m: usize, d: usize) -> (EntityTable, RelationTable, ModelConfig) {
        let config = ModelConfig {
            n,
            m,
            d,
            negative_k: 2,
            lr_entity: 0.1,
            lr_relation: 0.01,
            batch_size: 4,
            max_epochs: 1,
            seed,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let (e, r) = init_params(&config, num_entities, 2, &mut rng).unwrap();
        (e, r, config)
    }

    #[test]
    fn score_zero_for_identity_match() {
        let e_h = DenseMatrix::from_vec(4, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let entities = EntityTable::new(vec![e_h.clone(), e_h], vec![0.0, 0.0]).unwrap();
        let relations = RelationTable::new(vec![BlockDiagOrthogonal::identity(2, 2)], 4).unwrap();
        let s = score(&entities, &relations, 0, 0, 1).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn score_exact_rotation_match_and_miss() {
        let entities = EntityTable::new(
            vec![
                DenseMatrix::from_vec(2, 1, vec![1.0, 0.0]).unwrap(),
                DenseMatrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap(),
            ],
            vec![0.0, 0.0],
        )
        .unwrap();
        let relations =
            RelationTable::new(vec![BlockDiagOrthogonal::new(vec![quarter_turn()]).unwrap()], 2)
                .unwrap();
        assert_eq!(score(&entities, &relations, 0, 0, 1).unwrap(), 0.0);
        let s = score(&entities, &relations, 0, 0, 0).unwrap();
        assert!((s - (-std::f64::consts::SQRT_2)).abs() <= 1e-12);
    }

    #[test]
    fn score_rejects_out_of_range_ids() {
        let (e, r, _) = tiny_model(1, 3, 4, 1, 2);
        assert!(matches!(score(&e, &r, 9, 0, 0), Err(Error::Index(_))));
        assert!(matches!(score(&e, &r, 0, 7, 0), Err(Error::Index(_))));
    }

    #[test]
    fn score_all_tails_matches_loop_oracle() {
        let (e, r, _) = tiny_model(2, 10, 6, 2, 3);
        let all = score_all_tails(&e, &r, 3, 1).unwrap();
        assert_eq!(all.len(), 10);
        for t in 0..10u32 {
            let one = score(&e, &r, 3, 1, t).unwrap();
            assert_eq!(all[t as usize], one, "candidate {t} diverges");
        }
    }

    #[test]
    fn score_all_tails_single_entity() {
        let (e, r, _) = tiny_model(3, 1, 4, 1, 2);
        let all = score_all_tails(&e, &r, 0, 0).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0], score(&e, &r, 0, 0, 0).unwrap());
    }

    #[test]
    fn score_all_heads_matches_loop_oracle() {
        let (e, r, _) = tiny_model(4, 6, 4, 1, 2);
        let all = score_all_heads(&e, &r, 1, 2).unwrap();
        for h in 0..6u32 {
            assert_eq!(all[h as usize], score(&e, &r, h, 1, 2).unwrap());
        }
    }

    #[test]
    fn loss_closed_forms() {
        // A positive term with s = 0 contributes ln 2; with s = 10 it
        // contributes ln(1 + e^(−10)).
        let entities = EntityTable::new(
            vec![
                DenseMatrix::from_vec(2, 1, vec![1.0, 0.0]).unwrap(),
                DenseMatrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap(),
            ],
            vec![0.0, 0.0],
        )
        .unwrap();
        let relations =
            RelationTable::new(vec![BlockDiagOrthogonal::new(vec![quarter_turn()]).unwrap()], 2)
                .unwrap();
        let batch = [BatchItem {
            triple: Triple { head: 0, rel: 0, tail: 1 },
            negatives: vec![],
        }];
        let (loss, _, _) = loss_and_grads(&entities, &relations, &batch).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() <= 1e-15);

        let mut biased = entities.clone();
        *biased.bias_mut(0) = 4.0;
        *biased.bias_mut(1) = 6.0;
        let (loss10, _, _) = loss_and_grads(&biased, &relations, &batch).unwrap();
        assert!((loss10 - (1.0 + (-10.0f64).exp()).ln()).abs() <= 1e-15);
        assert!((loss10 - 4.5398e-5).abs() < 1e-8);
    }

    /// Independent reference: the loss written out directly on raw dense
    /// parameters, with relations as assembled n×n matrices. No score or
    /// gradient code from the implementation is reused, and blocks may be
    /// perturbed off the manifold, so ambient finite differences are exact.
    fn reference_loss(
        mats: &[DenseMatrix],
        biases: &[f64],
        rel_dense: &[DenseMatrix],
        batch: &[BatchItem],
    ) -> f64 {
        let mut total = 0.0;
        for item in batch {
            let Triple { head, rel, tail } = item.triple;
            let rotated = rel_dense[rel as usize].matmul(&mats[head as usize]).unwrap();
            for (idx, &cand) in std::iter::once(&tail).chain(item.negatives.iter()).enumerate() {
                let y = if idx == 0 { -1.0 } else { 1.0 };
                let diff = rotated.sub(&mats[cand as usize]).unwrap();
                let s = -diff.frob_norm() + biases[head as usize] + biases[cand as usize];
                total += (1.0 + (y * s).exp()).ln();
            }
        }
        total
    }

    /// Central-difference oracle over every free parameter of a small model,
    /// including every raw entry of every relation block (the ambient
    /// gradient, checked off-manifold).
    fn fd_check(seed: u64, n: usize, m: usize, d: usize) {
        let (entities, relations, _) = tiny_model(seed, 3, n, m, d);
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xabcd);
        let batch: Vec<BatchItem> = (0..3)
            .map(|i| BatchItem {
                triple: Triple {
                    head: i % 3,
                    rel: (i % 2) as u32,
                    tail: (i + 1) % 3,
                },
                negatives: (0..2).map(|_| rng.random_range(0..3u32)).collect(),
            })
            .collect();
        let (loss, eg, rg) = loss_and_grads(&entities, &relations, &batch).unwrap();

        let mats: Vec<DenseMatrix> = (0..3u32).map(|id| entities.matrix(id).clone()).collect();
        let biases: Vec<f64> = entities.biases().to_vec();
        let rel_dense: Vec<DenseMatrix> = (0..2u32)
            .map(|rid| relations.relation(rid).to_dense())
            .collect();
        let base = reference_loss(&mats, &biases, &rel_dense, &batch);
        assert!((loss - base).abs() <= 1e-10 * base.abs().max(1.0), "loss paths disagree");

        let h = 1e-5;
        let rel_tol = 1e-4;
        let check = |analytic: f64, fd: f64, what: &str| {
            let denom = fd.abs().max(analytic.abs()).max(1e-6);
            assert!(
                (analytic - fd).abs() / denom <= rel_tol,
                "{what}: analytic {analytic} vs fd {fd}"
            );
        };

        for id in 0..3u32 {
            let grad = eg.mats.get(&id).cloned().unwrap_or_else(|| DenseMatrix::zeros(n, m));
            for i in 0..n {
                for j in 0..m {
                    let mut plus = mats.clone();
                    let v = plus[id as usize].get(i, j);
                    plus[id as usize].set(i, j, v + h);
                    let mut minus = mats.clone();
                    minus[id as usize].set(i, j, v - h);
                    let fd = (reference_loss(&plus, &biases, &rel_dense, &batch)
                        - reference_loss(&minus, &biases, &rel_dense, &batch))
                        / (2.0 * h);
                    check(grad.get(i, j), fd, &format!("entity {id} entry ({i},{j})"));
                }
            }
            let bg = eg.biases.get(&id).copied().unwrap_or(0.0);
            let mut bp = biases.clone();
            bp[id as usize] += h;
            let mut bm = biases.clone();
            bm[id as usize] -= h;
            let fd = (reference_loss(&mats, &bp, &rel_dense, &batch)
                - reference_loss(&mats, &bm, &rel_dense, &batch))
                / (2.0 * h);
            check(bg, fd, &format!("bias {id}"));
        }

        for rid in 0..2u32 {
            let zero_blocks = vec![DenseMatrix::zeros(d, d); relations.relation(rid).num_blocks()];
            let blocks = rg.blocks.get(&rid).cloned().unwrap_or(zero_blocks);
            for (bi, g_amb) in blocks.iter().enumerate() {
                for r_ in 0..d {
                    for c in 0..d {
                        let (gi, gj) = (bi * d + r_, bi * d + c);
                        let mut plus = rel_dense.clone();
                        let v = plus[rid as usize].get(gi, gj);
                        plus[rid as usize].set(gi, gj, v + h);
                        let mut minus = rel_dense.clone();
                        minus[rid as usize].set(gi, gj, v - h);
                        let fd = (reference_loss(&mats, &biases, &plus, &batch)
                            - reference_loss(&mats, &biases, &minus, &batch))
                            / (2.0 * h);
                        check(
                            g_amb.get(r_, c),
                            fd,
                            &format!("relation {rid} block {bi} entry ({r_},{c})"),
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        fd_check(40, 4, 2, 2);
        fd_check(41, 6, 1, 3);
        fd_check(42, 4, 3, 2);
    }

    #[test]
    fn singularity_policy_zeroes_distance_grads_keeps_bias() {
        // Exact coincidence: identity relation, e_H = e_T, so δ = 0.
        let mat = DenseMatrix::from_vec(2, 1, vec![0.3, -0.7]).unwrap();
        let entities = EntityTable::new(vec![mat.clone(), mat], vec![0.0, 0.0]).unwrap();
        let relations = RelationTable::new(vec![BlockDiagOrthogonal::identity(2, 1)], 2).unwrap();
        let batch = [BatchItem {
            triple: Triple { head: 0, rel: 0, tail: 1 },
            negatives: vec![],
        }];
        let (_, eg, rg) = loss_and_grads(&entities, &relations, &batch).unwrap();
        assert!(
            eg.mats.values().all(|g| g.frob_norm() == 0.0),
            "distance gradients must vanish at the cusp"
        );
        assert!(rg.blocks.values().all(|bs| bs.iter().all(|b| b.frob_norm() == 0.0)));
        // Bias gradients survive: w = −σ(0) = −1/2 for the positive term.
        assert!((eg.biases[&0] - (-0.5)).abs() <= 1e-15);
        assert!((eg.biases[&1] - (-0.5)).abs() <= 1e-15);
    }

    #[test]
    fn orthogonal_invariance_of_distance() {
        // Replacing e_R by identity and e_H by e_R·e_H leaves scores unchanged.
        let (entities, relations, _) = tiny_model(50, 4, 6, 2, 2);
        let h = 1u32;
        let r = 0u32;
        let rotated = relations.relation(r).apply(entities.matrix(h)).unwrap();
        let mut moved = entities.clone();
        *moved.matrix_mut(h) = rotated;
        let ident = RelationTable::new(
            vec![BlockDiagOrthogonal::identity(2, 3), BlockDiagOrthogonal::identity(2, 3)],
            6,
        )
        .unwrap();
        for t in 0..4u32 {
            if t == h {
                // Rewriting the table changes e_h in its tail role too; the
                // invariance statement is about the score expression only.
                continue;
            }
            let a = score(&entities, &relations, h, r, t).unwrap();
            let b = score(&moved, &ident, h, r, t).unwrap();
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn init_is_deterministic_and_clean() {
        let config = ModelConfig {
            n: 8,
            m: 2,
            d: 2,
            negative_k: 1,
            lr_entity: 0.1,
            lr_relation: 0.01,
            batch_size: 1,
            max_epochs: 1,
            seed: 7,
        };
        let (e1, r1) = init_params(&config, 5, 3, &mut ChaCha12Rng::seed_from_u64(7)).unwrap();
        let (e2, r2) = init_params(&config, 5, 3, &mut ChaCha12Rng::seed_from_u64(7)).unwrap();
        for id in 0..5u32 {
            assert_eq!(e1.matrix(id), e2.matrix(id));
        }
        assert!(e1.biases().iter().all(|&b| b == 0.0));
        for rid in 0..3u32 {
            assert_eq!(r1.relation(rid), r2.relation(rid));
            assert!(r1.relation(rid).max_residual() < 1e-10);
        }
    }

    #[test]
    fn init_rejects_unpadded_dimension() {
        let config = ModelConfig {
            n: 7,
            m: 1,
            d: 2,
            negative_k: 1,
            lr_entity: 0.1,
            lr_relation: 0.01,
            batch_size: 1,
            max_epochs: 1,
            seed: 0,
        };
        let got = init_params(&config, 2, 1, &mut ChaCha12Rng::seed_from_u64(0));
        assert!(matches!(got, Err(Error::Config(_))));
    }

    #[test]
    fn parameter_count_table() {
        let mk = |n: usize, m: usize, d: usize| ModelConfig {
            n,
            m,
            d,
            negative_k: 1,
            lr_entity: 0.1,
            lr_relation: 0.01,
            batch_size: 1,
            max_epochs: 1,
            seed: 0,
        };
        assert_eq!(parameter_counts(&mk(1000, 1, 2), 10).relation_params_per_relation, 500);
        assert_eq!(parameter_counts(&mk(501, 1, 3), 10).relation_params_per_relation, 501);
        assert_eq!(parameter_counts(&mk(500, 1, 10), 10).relation_params_per_relation, 2250);
        assert_eq!(parameter_counts(&mk(40, 7, 2), 10).relation_params_per_relation, 20);
        let c = parameter_counts(&mk(40, 7, 2), 3);
        assert_eq!(c.entity_params, 3 * (40 * 7 + 1));
        // Formula sweep over the valid corner of the advertised grid.
        for d in [2usize, 3, 4, 10] {
            for n in [500usize, 501, 1000] {
                if n % d != 0 {
                    continue;
                }
                for m in [1usize, 2, 3, 10] {
                    let pc = parameter_counts(&mk(n, m, d), 7);
                    assert_eq!(pc.relation_params_per_relation as usize, (d - 1) * n / 2);
                    assert_eq!(pc.entity_params as usize, 7 * (n * m + 1));
                }
            }
        }
    }

    #[test]
    fn masked_targets_skip_the_frozen_group() {
        let (entities, relations, _) = tiny_model(60, 4, 4, 1, 2);
        let batch = [BatchItem {
            triple: Triple { head: 0, rel: 0, tail: 1 },
            negatives: vec![2, 3],
        }];
        let (_, eg, rg) =
            loss_and_grads_masked(&entities, &relations, &batch, GradTargets::RelationsOnly).unwrap();
        assert!(eg.mats.is_empty() && eg.biases.is_empty());
        assert!(!rg.blocks.is_empty());
        let (_, eg2, rg2) =
            loss_and_grads_masked(&entities, &relations, &batch, GradTargets::EntitiesOnly).unwrap();
        assert!(rg2.blocks.is_empty());
        assert!(!eg2.mats.is_empty());
    }
}
