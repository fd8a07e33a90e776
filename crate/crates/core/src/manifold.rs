//! Geometry of the orthogonal manifold O(d): tangent projection, the
//! exponential-map retraction, random rotations for initialization, and the
//! Gram-Schmidt parameterization used by the joint-training baseline.
//!
//! A point is an orthogonal matrix `X` (`XXᵀ = I`). The tangent space at `X`
//! is `{ξ : ξXᵀ + Xξᵀ = 0}`; moving along a tangent direction stays on the
//! manifold via `Exp_X(ξ) = X·expm(Xᵀξ)`.

use crate::error::{Error, Result};
use crate::tensor::{expm, mgs_qr, DenseMatrix, ORTHO_TOLERANCE};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Tangent-membership residual allowed when constructing a [`TangentVector`].
pub const TANGENT_TOLERANCE: f64 = 1e-8;

/// Looser membership bound at which [`exp_map`] rejects a handed-in vector.
pub const TANGENT_PRECONDITION: f64 = 1e-6;

/// Standard deviation of the skew entries behind [`random_orthogonal`]; the
/// draw is `expm` of a skew matrix with entries ~ N(0, 0.01), a near-identity
/// rotation.
pub const INIT_SKEW_STDDEV: f64 = 0.1;

/// A direction `dir` in the tangent space at the orthogonal base point `at`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    at: DenseMatrix,
    dir: DenseMatrix,
}

/// `‖ξXᵀ + Xξᵀ‖_F`, zero exactly when `ξ` is tangent at `X`.
pub fn tangent_residual(at: &DenseMatrix, dir: &DenseMatrix) -> Result<f64> {
    let a = dir.matmul(&at.transpose())?;
    let b = at.matmul(&dir.transpose())?;
    Ok(a.add(&b)?.frob_norm())
}

impl TangentVector {
    /// Wraps a raw direction, verifying tangent membership within
    /// [`TANGENT_TOLERANCE`].
    pub fn new(at: DenseMatrix, dir: DenseMatrix) -> Result<Self> {
        if at.rows() != dir.rows() || at.cols() != dir.cols() || !at.is_square() {
            return Err(Error::Shape(format!(
                "tangent vector: base {}x{}, direction {}x{}",
                at.rows(),
                at.cols(),
                dir.rows(),
                dir.cols()
            )));
        }
        let res = tangent_residual(&at, &dir)?;
        if res > TANGENT_TOLERANCE {
            return Err(Error::Precondition(format!(
                "direction is not tangent: residual {res:e} exceeds {TANGENT_TOLERANCE:e}"
            )));
        }
        Ok(Self { at, dir })
    }

    pub fn base(&self) -> &DenseMatrix {
        &self.at
    }

    pub fn direction(&self) -> &DenseMatrix {
        &self.dir
    }

    /// Consumes the vector, returning the direction matrix.
    pub fn into_direction(self) -> DenseMatrix {
        self.dir
    }
}

fn require_orthogonal(x: &DenseMatrix, who: &str) -> Result<()> {
    if !x.is_square() {
        return Err(Error::Shape(format!(
            "{who}: expected a square matrix, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    let res = x.orthogonality_residual();
    if res > ORTHO_TOLERANCE {
        return Err(Error::Precondition(format!(
            "{who}: base point residual {res:e} exceeds {ORTHO_TOLERANCE:e}"
        )));
    }
    Ok(())
}

/// Projects an ambient matrix `y` onto the tangent space at the orthogonal
/// point `x`: `P_X(y) = X·(Xᵀy − yᵀX)/2`.
pub fn tangent_project(x: &DenseMatrix, y: &DenseMatrix) -> Result<TangentVector> {
    require_orthogonal(x, "tangent_project")?;
    if y.rows() != x.rows() || y.cols() != x.cols() {
        return Err(Error::Shape(format!(
            "tangent_project: point {}x{}, ambient {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    let xty = x.transpose().matmul(y)?;
    let ytx = y.transpose().matmul(x)?;
    let skew = xty.sub(&ytx)?.scale(0.5);
    let dir = x.matmul(&skew)?;
    TangentVector::new(x.clone(), dir)
}

/// Moves from `x` along the tangent direction `xi`: `Exp_X(ξ) = X·expm(Xᵀξ)`.
/// The result stays orthogonal up to roundoff.
pub fn exp_map(x: &DenseMatrix, xi: &TangentVector) -> Result<DenseMatrix> {
    if xi.at != *x {
        return Err(Error::Precondition(
            "exp_map: tangent vector is based at a different point".into(),
        ));
    }
    let res = tangent_residual(&xi.at, &xi.dir)?;
    if res > TANGENT_PRECONDITION {
        return Err(Error::Precondition(format!(
            "exp_map: tangent residual {res:e} exceeds {TANGENT_PRECONDITION:e}"
        )));
    }
    let body = x.transpose().matmul(&xi.dir)?;
    x.matmul(&expm(&body)?)
}

/// One geodesic descent step: `x ← Exp_X(−η · P_X(∇f))`.
pub fn retraction_step(x: &DenseMatrix, euclid_grad: &DenseMatrix, eta: f64) -> Result<DenseMatrix> {
    if !(eta > 0.0) {
        return Err(Error::Precondition(format!(
            "retraction_step: learning rate must be positive, got {eta}"
        )));
    }
    let proj = tangent_project(x, euclid_grad)?;
    let step = TangentVector::new(x.clone(), proj.dir.scale(-eta))?;
    exp_map(x, &step)
}

/// A random rotation near the identity: `expm(S)` for a skew matrix with
/// entries ~ N(0, 0.01). Determinant is +1 and the draw is fully determined
/// by the generator state.
pub fn random_orthogonal<R: Rng>(d: usize, rng: &mut R) -> DenseMatrix {
    assert!(d >= 1, "dimension must be at least 1");
    let normal = Normal::new(0.0, INIT_SKEW_STDDEV).unwrap();
    let mut skew = DenseMatrix::zeros(d, d);
    for i in 0..d {
        for j in i + 1..d {
            let v = normal.sample(rng);
            skew.set(i, j, v);
            skew.set(j, i, -v);
        }
    }
    expm(&skew).expect("exponential of a small skew matrix cannot fail")
}

/// Orthonormalizes the columns of a square matrix by modified Gram-Schmidt:
/// column `j` is projected against columns `0..j` sequentially, then
/// normalized. Column-prefix spans are preserved.
pub fn gram_schmidt(a: &DenseMatrix) -> Result<DenseMatrix> {
    let (q, _r) = mgs_qr(a)?;
    Ok(q)
}

/// Exact reverse-mode derivative of [`gram_schmidt`]: given `∂L/∂Q`, returns
/// `∂L/∂A` by unwinding every projection and normalization step.
pub fn gram_schmidt_backward(a: &DenseMatrix, d_q: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "gram_schmidt_backward needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if d_q.rows() != a.rows() || d_q.cols() != a.cols() {
        return Err(Error::Shape(format!(
            "gram_schmidt_backward: input {}x{}, cotangent {}x{}",
            a.rows(),
            a.cols(),
            d_q.rows(),
            d_q.cols()
        )));
    }
    let d = a.rows();
    let col = |m: &DenseMatrix, j: usize| -> Vec<f64> { (0..d).map(|t| m.get(t, j)).collect() };
    let dot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).map(|(a, b)| a * b).sum() };

    // Forward pass with a tape: for column j, record the vector entering each
    // projection step, the projection coefficients, and the final norm.
    let mut q_cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut pre_step: Vec<Vec<Vec<f64>>> = Vec::with_capacity(d); // pre_step[j][i]
    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(d); // coeffs[j][i] = r_ij
    let mut norms: Vec<f64> = Vec::with_capacity(d);
    for j in 0..d {
        let mut v = col(a, j);
        let mut steps = Vec::with_capacity(j);
        let mut rs = Vec::with_capacity(j);
        for i in 0..j {
            steps.push(v.clone());
            let r = dot(&q_cols[i], &v);
            rs.push(r);
            for t in 0..d {
                v[t] -= r * q_cols[i][t];
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm <= crate::tensor::RANK_TOLERANCE {
            return Err(Error::Degenerate { column: j });
        }
        pre_step.push(steps);
        coeffs.push(rs);
        norms.push(norm);
        q_cols.push(v.iter().map(|x| x / norm).collect());
    }

    // Reverse pass: g_q accumulates cotangents flowing into each q column,
    // both from the caller and from later columns' projection steps.
    let mut g_q: Vec<Vec<f64>> = (0..d).map(|j| col(d_q, j)).collect();
    let mut d_a = DenseMatrix::zeros(d, d);
    for j in (0..d).rev() {
        // Backward through q_j = v / ‖v‖: dv = (g − q (q·g)) / ‖v‖.
        let qg = dot(&q_cols[j], &g_q[j]);
        let mut dv: Vec<f64> = (0..d)
            .map(|t| (g_q[j][t] - q_cols[j][t] * qg) / norms[j])
            .collect();
        // Backward through v ← v − r_ij q_i, in reverse step order.
        for i in (0..j).rev() {
            let v_pre = &pre_step[j][i];
            let r = coeffs[j][i];
            let dvq = dot(&dv, &q_cols[i]);
            for t in 0..d {
                g_q[i][t] += -r * dv[t] - dvq * v_pre[t];
            }
            for t in 0..d {
                dv[t] -= q_cols[i][t] * dvq;
            }
        }
        for t in 0..d {
            d_a.set(t, j, dv[t]);
        }
    }
    Ok(d_a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        DenseMatrix::from_vec(rows, cols, data).unwrap()
    }

    fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn projection_at_identity_is_skew_part() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let y = random_matrix(&mut rng, 4, 4);
        let proj = tangent_project(&DenseMatrix::identity(4), &y).unwrap();
        let skew_part = y.sub(&y.transpose()).unwrap().scale(0.5);
        assert!(max_abs_diff(proj.direction(), &skew_part) <= 1e-14);
    }

    #[test]
    fn projection_annihilates_normal_directions() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let x = random_orthogonal(4, &mut rng);
        let raw = random_matrix(&mut rng, 4, 4);
        let sym = raw.add(&raw.transpose()).unwrap().scale(0.5);
        let y = x.matmul(&sym).unwrap();
        let proj = tangent_project(&x, &y).unwrap();
        assert!(proj.direction().frob_norm() <= 1e-12);
    }

    #[test]
    fn projection_lands_in_tangent_space_and_is_idempotent() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for _ in 0..5 {
            let x = random_orthogonal(3, &mut rng);
            let y = random_matrix(&mut rng, 3, 3);
            let once = tangent_project(&x, &y).unwrap();
            assert!(tangent_residual(&x, once.direction()).unwrap() <= 1e-10);
            let twice = tangent_project(&x, once.direction()).unwrap();
            assert!(max_abs_diff(once.direction(), twice.direction()) <= 1e-10);
        }
    }

    #[test]
    fn projection_rejects_non_orthogonal_base() {
        let x = DenseMatrix::from_rows(&[&[1.0, 0.4], &[0.0, 1.0]]).unwrap();
        let y = DenseMatrix::zeros(2, 2);
        assert!(matches!(
            tangent_project(&x, &y),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn projection_rejects_shape_mismatch() {
        let x = DenseMatrix::identity(3);
        let y = DenseMatrix::zeros(2, 2);
        assert!(matches!(tangent_project(&x, &y), Err(Error::Shape(_))));
    }

    #[test]
    fn exp_map_of_zero_is_base_point() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let x = random_orthogonal(3, &mut rng);
        let zero = TangentVector::new(x.clone(), DenseMatrix::zeros(3, 3)).unwrap();
        assert_eq!(exp_map(&x, &zero).unwrap(), x);
    }

    #[test]
    fn exp_map_at_identity_reduces_to_expm() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let x = DenseMatrix::identity(2);
        let skew = DenseMatrix::from_rows(&[&[0.0, -half_pi], &[half_pi, 0.0]]).unwrap();
        let xi = TangentVector::new(x.clone(), skew).unwrap();
        let out = exp_map(&x, &xi).unwrap();
        let expected = DenseMatrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).unwrap();
        assert!(max_abs_diff(&out, &expected) <= 1e-10);
    }

    #[test]
    fn exp_map_stays_on_manifold() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        for _ in 0..5 {
            let x = random_orthogonal(4, &mut rng);
            let y = random_matrix(&mut rng, 4, 4).scale(5.0);
            let xi = tangent_project(&x, &y).unwrap();
            let out = exp_map(&x, &xi).unwrap();
            assert!(out.orthogonality_residual() <= 1e-9);
        }
    }

    #[test]
    fn exp_map_rejects_foreign_base_point() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let x = random_orthogonal(3, &mut rng);
        let other = random_orthogonal(3, &mut rng);
        let xi = TangentVector::new(x, DenseMatrix::zeros(3, 3)).unwrap();
        assert!(matches!(
            exp_map(&other, &xi),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn retraction_with_zero_gradient_is_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(16);
        let x = random_orthogonal(3, &mut rng);
        let out = retraction_step(&x, &DenseMatrix::zeros(3, 3), 0.1).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn retraction_ignores_normal_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let x = random_orthogonal(3, &mut rng);
        let raw = random_matrix(&mut rng, 3, 3);
        let sym = raw.add(&raw.transpose()).unwrap().scale(0.5);
        let grad = x.matmul(&sym).unwrap();
        let out = retraction_step(&x, &grad, 0.1).unwrap();
        assert!(max_abs_diff(&out, &x) <= 1e-12);
    }

    #[test]
    fn geodesic_descent_reaches_target() {
        // f(X) = ‖X − T‖²_F with orthogonal target T; ∇f = 2(X − T).
        let mut rng = ChaCha12Rng::seed_from_u64(18);
        let skew_scale = 2.0;
        let mut skew = DenseMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in i + 1..4 {
                let v = rng.random_range(-skew_scale..skew_scale);
                skew.set(i, j, v);
                skew.set(j, i, -v);
            }
        }
        let target = expm(&skew).unwrap();
        let mut x = DenseMatrix::identity(4);
        let f = |x: &DenseMatrix| x.sub(&target).unwrap().frob_norm().powi(2);
        let f0 = f(&x);
        for _ in 0..500 {
            let grad = x.sub(&target).unwrap().scale(2.0);
            x = retraction_step(&x, &grad, 0.1).unwrap();
        }
        assert!(f(&x) <= 0.01 * f0, "descent stalled: {} -> {}", f0, f(&x));
        assert!(x.orthogonality_residual() <= 1e-9);
    }

    #[test]
    fn many_retraction_steps_hold_the_manifold() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let mut x = random_orthogonal(3, &mut rng);
        for step in 1..=10_000u32 {
            let grad = random_matrix(&mut rng, 3, 3);
            x = retraction_step(&x, &grad, 0.01).unwrap();
            // Same stabilization cadence the optimizer uses.
            if step % 1000 == 0 && x.orthogonality_residual() > crate::tensor::STABILIZE_TRIGGER {
                x = gram_schmidt(&x).unwrap();
            }
        }
        assert!(x.orthogonality_residual() <= 1e-6);
    }

    #[test]
    fn random_orthogonal_properties() {
        let mut rng = ChaCha12Rng::seed_from_u64(20);
        assert_eq!(random_orthogonal(1, &mut rng), DenseMatrix::identity(1));
        for d in [2usize, 3, 7] {
            let q = random_orthogonal(d, &mut rng);
            assert!(q.orthogonality_residual() <= 1e-10);
        }
        let a = random_orthogonal(5, &mut ChaCha12Rng::seed_from_u64(99));
        let b = random_orthogonal(5, &mut ChaCha12Rng::seed_from_u64(99));
        assert_eq!(a, b);
    }

    #[test]
    fn gram_schmidt_fixes_orthonormal_input() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let q = random_orthogonal(4, &mut rng);
        let out = gram_schmidt(&q).unwrap();
        assert!(max_abs_diff(&out, &q) <= 1e-12);
    }

    #[test]
    fn gram_schmidt_hand_computed_2x2() {
        let a = DenseMatrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        let q = gram_schmidt(&a).unwrap();
        assert!(max_abs_diff(&q, &DenseMatrix::identity(2)) <= 1e-15);
    }

    /// Span oracle: each column of `b` must be reproducible from the first
    /// k columns of `q` by least squares; for orthonormal `q` the residual is
    /// `‖b_j − Q_k Q_kᵀ b_j‖`.
    fn prefix_span_residual(q: &DenseMatrix, b: &DenseMatrix, k: usize) -> f64 {
        let d = q.rows();
        let mut worst = 0.0f64;
        for j in 0..k {
            let bj: Vec<f64> = (0..d).map(|t| b.get(t, j)).collect();
            let mut recon = vec![0.0; d];
            for i in 0..k {
                let qi: Vec<f64> = (0..d).map(|t| q.get(t, i)).collect();
                let c: f64 = qi.iter().zip(&bj).map(|(a, b)| a * b).sum();
                for t in 0..d {
                    recon[t] += c * qi[t];
                }
            }
            let res: f64 = bj
                .iter()
                .zip(&recon)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(res);
        }
        worst
    }

    #[test]
    fn gram_schmidt_orthonormal_and_span_preserving() {
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        let a = random_matrix(&mut rng, 5, 5);
        let q = gram_schmidt(&a).unwrap();
        let qtq = q.transpose().matmul(&q).unwrap();
        assert!(max_abs_diff(&qtq, &DenseMatrix::identity(5)) <= 1e-10);
        for k in 1..=5 {
            assert!(prefix_span_residual(&q, &a, k) <= 1e-9, "span broken at prefix {k}");
        }
    }

    #[test]
    fn gram_schmidt_rejects_rank_deficiency_naming_column() {
        let a = DenseMatrix::from_rows(&[
            &[1.0, 2.0, 0.0],
            &[0.0, 0.0, 1.0],
            &[0.0, 0.0, 0.0],
        ])
        .unwrap();
        match gram_schmidt(&a) {
            Err(Error::Degenerate { column }) => assert_eq!(column, 1),
            other => panic!("expected degeneracy error, got {other:?}"),
        }
    }

    #[test]
    fn gram_schmidt_is_idempotent() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..5 {
            let a = random_matrix(&mut rng, 4, 4);
            let q1 = gram_schmidt(&a).unwrap();
            let q2 = gram_schmidt(&q1).unwrap();
            assert!(max_abs_diff(&q1, &q2) <= 1e-10);
        }
    }

    #[test]
    fn gram_schmidt_backward_zero_cotangent() {
        let mut rng = ChaCha12Rng::seed_from_u64(24);
        let a = random_matrix(&mut rng, 3, 3);
        let grad = gram_schmidt_backward(&a, &DenseMatrix::zeros(3, 3)).unwrap();
        assert!(grad.frob_norm() == 0.0);
    }

    /// Central finite differences of `scalar ∘ gram_schmidt` entry by entry.
    fn fd_gradient(a: &DenseMatrix, loss: impl Fn(&DenseMatrix) -> f64, h: f64) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(a.rows(), a.cols());
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                let mut plus = a.clone();
                plus.set(i, j, a.get(i, j) + h);
                let mut minus = a.clone();
                minus.set(i, j, a.get(i, j) - h);
                g.set(i, j, (loss(&plus) - loss(&minus)) / (2.0 * h));
            }
        }
        g
    }

    #[test]
    fn gram_schmidt_backward_matches_finite_differences_frobenius_loss() {
        // Loss ‖Q‖²_F; cotangent ∂L/∂Q = 2Q. The output is always
        // orthonormal, so the true gradient is identically zero and both
        // routes must agree on (numerical) zero; the unit floor keeps the
        // relative comparison meaningful at that scale.
        let mut rng = ChaCha12Rng::seed_from_u64(25);
        let a = random_orthogonal(3, &mut rng);
        let q = gram_schmidt(&a).unwrap();
        let analytic = gram_schmidt_backward(&a, &q.scale(2.0)).unwrap();
        let numeric = fd_gradient(&a, |m| gram_schmidt(m).unwrap().frob_norm().powi(2), 1e-6);
        let denom = numeric.frob_norm().max(1.0);
        let rel = analytic.sub(&numeric).unwrap().frob_norm() / denom;
        assert!(rel <= 1e-5, "relative disagreement {rel}");
        assert!(analytic.frob_norm() <= 1e-9, "gradient of a constant must vanish");
    }

    #[test]
    fn gram_schmidt_backward_matches_finite_differences_random_cotangent() {
        let mut rng = ChaCha12Rng::seed_from_u64(26);
        for _ in 0..3 {
            let a = random_matrix(&mut rng, 3, 3);
            if gram_schmidt(&a).is_err() {
                continue;
            }
            let d_q = random_matrix(&mut rng, 3, 3);
            let analytic = gram_schmidt_backward(&a, &d_q).unwrap();
            let loss = |m: &DenseMatrix| {
                let q = gram_schmidt(m).unwrap();
                q.data().iter().zip(d_q.data()).map(|(x, y)| x * y).sum::<f64>()
            };
            let numeric = fd_gradient(&a, loss, 1e-6);
            let rel = analytic.sub(&numeric).unwrap().frob_norm() / numeric.frob_norm().max(1e-12);
            assert!(rel <= 1e-4, "relative disagreement {rel}");
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn projected_directions_are_tangent(seed in 0u64..1000, d in 2usize..5) {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let x = random_orthogonal(d, &mut rng);
                let y = random_matrix(&mut rng, d, d);
                let xi = tangent_project(&x, &y).unwrap();
                prop_assert!(tangent_residual(&x, xi.direction()).unwrap() <= 1e-10);
            }

            #[test]
            fn exp_map_orthogonality_for_large_steps(seed in 0u64..1000, d in 2usize..5) {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let x = random_orthogonal(d, &mut rng);
                let y = random_matrix(&mut rng, d, d).scale(10.0 / (d as f64));
                let xi = tangent_project(&x, &y).unwrap();
                let out = exp_map(&x, &xi).unwrap();
                prop_assert!(out.orthogonality_residual() <= 1e-9);
            }
        }
    }
}
