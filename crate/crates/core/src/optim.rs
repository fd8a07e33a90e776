//! Parameter update rules: an adaptive-moment optimizer that walks the
//! orthogonal manifold for relation blocks, a diagonal adaptive-gradient
//! optimizer for entity matrices and biases, and the alternating per-batch
//! schedule that drives them (relations first with entities frozen, then
//! entities with relations frozen).

use crate::error::{Error, Result};
use crate::manifold::{exp_map, tangent_project};
use crate::model::{
    loss_and_grads_masked, BatchItem, EntityTable, GradTargets, RelationTable,
};
use crate::tensor::DenseMatrix;

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Relation steps per block between re-orthogonalization sweeps.
pub const STABILIZE_EVERY: u64 = 1000;

/// Adaptive-moment state for one orthogonal block.
///
/// The first moment lives in tangent-ambient coordinates and is transported
/// to each new point by projection; the second moment is a raw element-wise
/// accumulator (a positive scaling, not a tangent object) and is never
/// transported.
#[derive(Debug, Clone)]
pub struct RiemannianAdamState {
    m: DenseMatrix,
    v: DenseMatrix,
    step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lr: f64,
}

impl RiemannianAdamState {
    pub fn new(block_dim: usize, lr: f64) -> Self {
        Self {
            m: DenseMatrix::zeros(block_dim, block_dim),
            v: DenseMatrix::zeros(block_dim, block_dim),
            step_count: 0,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
            lr,
        }
    }

    /// Restores a state from checkpointed parts.
    pub fn from_parts(
        m: DenseMatrix,
        v: DenseMatrix,
        step_count: u64,
        lr: f64,
    ) -> Result<Self> {
        if m.rows() != v.rows() || m.cols() != v.cols() || !m.is_square() {
            return Err(Error::Shape("moment shapes disagree".into()));
        }
        if v.data().iter().any(|&x| x < 0.0) {
            return Err(Error::Numeric("second moment has negative entries".into()));
        }
        Ok(Self {
            m,
            v,
            step_count,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
            lr,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn second_moment(&self) -> &DenseMatrix {
        &self.v
    }
}

/// One adaptive-moment step on the orthogonal manifold. Returns the new
/// point; the state is updated in place (moments, transport, step count).
pub fn riemannian_adam_step(
    state: &mut RiemannianAdamState,
    x: &DenseMatrix,
    euclid_grad: &DenseMatrix,
) -> Result<DenseMatrix> {
    if !euclid_grad.is_finite() {
        return Err(Error::Numeric("non-finite relation gradient".into()));
    }
    let g = tangent_project(x, euclid_grad)?.into_direction();

    state.step_count += 1;
    let t = state.step_count;
    state.m = state.m.scale(state.beta1).add(&g.scale(1.0 - state.beta1))?;
    state.v = state
        .v
        .scale(state.beta2)
        .zip_map(&g, |v, gi| v + (1.0 - state.beta2) * gi * gi)?;

    let bc1 = 1.0 - state.beta1.powi(t as i32);
    let bc2 = 1.0 - state.beta2.powi(t as i32);
    let m_hat = state.m.scale(1.0 / bc1);
    let v_hat = state.v.scale(1.0 / bc2);
    let update = m_hat.zip_map(&v_hat, |mh, vh| mh / (vh.sqrt() + state.epsilon))?;

    // The element-wise rescaling leaves the tangent space, so project again
    // before retracting.
    let step_dir = tangent_project(x, &update)?.into_direction().scale(-state.lr);
    let xi = crate::manifold::TangentVector::new(x.clone(), step_dir)?;
    let x_next = exp_map(x, &xi)?;

    // Transport the first moment to the new tangent space.
    state.m = tangent_project(&x_next, &state.m)?.into_direction();
    Ok(x_next)
}

/// Diagonal adaptive-gradient state for one parameter tensor.
#[derive(Debug, Clone)]
pub struct AdagradState {
    accum: DenseMatrix,
    pub lr: f64,
    pub epsilon: f64,
}

impl AdagradState {
    pub fn new(rows: usize, cols: usize, lr: f64) -> Self {
        Self {
            accum: DenseMatrix::zeros(rows, cols),
            lr,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn from_parts(accum: DenseMatrix, lr: f64) -> Result<Self> {
        if accum.data().iter().any(|&x| x < 0.0) {
            return Err(Error::Numeric("accumulator has negative entries".into()));
        }
        Ok(Self {
            accum,
            lr,
            epsilon: DEFAULT_EPSILON,
        })
    }

    pub fn accum(&self) -> &DenseMatrix {
        &self.accum
    }
}

/// `accum += g⊙g; θ −= lr · g ⊘ (√accum + ε)`. Returns the updated tensor.
pub fn adagrad_step(
    state: &mut AdagradState,
    theta: &DenseMatrix,
    grad: &DenseMatrix,
) -> Result<DenseMatrix> {
    if !grad.is_finite() {
        return Err(Error::Numeric("non-finite entity gradient".into()));
    }
    state.accum = state.accum.zip_map(grad, |a, g| a + g * g)?;
    let mut out = theta.clone();
    for ((o, g), a) in out
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(state.accum.data())
    {
        *o -= state.lr * g / (a.sqrt() + state.epsilon);
    }
    Ok(out)
}

/// Scalar form of the same rule, used for entity biases.
pub fn adagrad_step_scalar(accum: &mut f64, theta: f64, grad: f64, lr: f64, epsilon: f64) -> f64 {
    *accum += grad * grad;
    theta - lr * grad / (accum.sqrt() + epsilon)
}

/// Per-relation, per-block adaptive-moment states.
#[derive(Debug, Clone)]
pub struct RelationOptimizer {
    pub states: Vec<Vec<RiemannianAdamState>>,
}

impl RelationOptimizer {
    pub fn new(num_relations: usize, num_blocks: usize, block_dim: usize, lr: f64) -> Self {
        Self {
            states: (0..num_relations)
                .map(|_| (0..num_blocks).map(|_| RiemannianAdamState::new(block_dim, lr)).collect())
                .collect(),
        }
    }
}

/// Per-entity adaptive-gradient states: one accumulator matrix per entity
/// matrix plus one scalar accumulator per bias.
#[derive(Debug, Clone)]
pub struct EntityOptimizer {
    pub mat_states: Vec<AdagradState>,
    pub bias_accum: Vec<f64>,
    pub lr: f64,
    pub epsilon: f64,
}

impl EntityOptimizer {
    pub fn new(num_entities: usize, n: usize, m: usize, lr: f64) -> Self {
        Self {
            mat_states: (0..num_entities).map(|_| AdagradState::new(n, m, lr)).collect(),
            bias_accum: vec![0.0; num_entities],
            lr,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Relation half-step: recomputes loss and relation gradients on the batch
/// with entities frozen, then applies one adaptive-moment step to every
/// touched block. Returns the batch loss as seen by this phase.
pub fn relation_phase(
    entities: &EntityTable,
    relations: &mut RelationTable,
    batch: &[BatchItem],
    rel_opt: &mut RelationOptimizer,
) -> Result<f64> {
    let (loss, _eg, rg) =
        loss_and_grads_masked(entities, relations, batch, GradTargets::RelationsOnly)?;
    for (rel_id, block_grads) in rg.blocks {
        let rel = relations.relation_mut(rel_id);
        for (bi, grad) in block_grads.iter().enumerate() {
            let state = &mut rel_opt.states[rel_id as usize][bi];
            let next = riemannian_adam_step(state, rel.block(bi), grad)?;
            rel.set_block(bi, next)?;
            if state.step_count() % STABILIZE_EVERY == 0 {
                rel.stabilize_block(bi)?;
            }
        }
    }
    Ok(loss)
}

/// Entity half-step: recomputes loss and entity gradients on the same batch
/// with relations frozen, then applies adaptive-gradient updates to touched
/// entity matrices and biases. Returns the batch loss as seen by this phase.
pub fn entity_phase(
    entities: &mut EntityTable,
    relations: &RelationTable,
    batch: &[BatchItem],
    ent_opt: &mut EntityOptimizer,
) -> Result<f64> {
    let (loss, eg, _rg) =
        loss_and_grads_masked(entities, relations, batch, GradTargets::EntitiesOnly)?;
    for (id, grad) in eg.mats {
        let next = adagrad_step(&mut ent_opt.mat_states[id as usize], entities.matrix(id), &grad)?;
        *entities.matrix_mut(id) = next;
    }
    for (id, bias_grad) in eg.biases {
        if !bias_grad.is_finite() {
            return Err(Error::Numeric("non-finite bias gradient".into()));
        }
        let idx = id as usize;
        let next = adagrad_step_scalar(
            &mut ent_opt.bias_accum[idx],
            entities.bias(id),
            bias_grad,
            ent_opt.lr,
            ent_opt.epsilon,
        );
        *entities.bias_mut(id) = next;
    }
    Ok(loss)
}

/// One pass over the given batches: for each batch, a relation phase with
/// entities frozen, then an entity phase with relations frozen, each on a
/// fresh gradient evaluation of the same batch. Returns the summed
/// relation-phase loss, i.e. the loss before either update of each batch.
pub fn alternating_epoch(
    entities: &mut EntityTable,
    relations: &mut RelationTable,
    batches: &[Vec<BatchItem>],
    rel_opt: &mut RelationOptimizer,
    ent_opt: &mut EntityOptimizer,
) -> Result<f64> {
    let mut total = 0.0;
    for batch in batches {
        total += relation_phase(entities, relations, batch, rel_opt)?;
        entity_phase(entities, relations, batch, ent_opt)?;
    }
    if !total.is_finite() {
        return Err(Error::Numeric("non-finite epoch loss".into()));
    }
    Ok(total)
}
