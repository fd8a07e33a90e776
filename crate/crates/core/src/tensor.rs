//! Dense row-major matrices, block-diagonal orthogonal matrices, and the
//! matrix exponential. Everything is 64-bit: the orthogonality drift budget
//! over long optimization runs rules out single precision.

use crate::error::{Error, Result};

/// Frobenius residual `‖XXᵀ − I‖_F` above which a matrix is rejected as an
/// orthogonal block.
pub const ORTHO_TOLERANCE: f64 = 1e-6;

/// Residual beyond which [`BlockDiagOrthogonal::stabilize`] re-orthogonalizes
/// a block via its QR factor.
pub const STABILIZE_TRIGGER: f64 = 1e-8;

/// Post-projection column norm below which Gram-Schmidt treats the input as
/// rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Cap on repeated squarings in [`expm`]; exceeding it means the input norm
/// is unreasonably large for this code path.
const MAX_SQUARINGS: u32 = 64;

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from a row-major data vector.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::Numeric("non-finite entry in matrix data".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from explicit rows; handy in tests and small constructions.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Shape("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Standard matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "matmul: {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        // i-k-j order keeps the inner loop contiguous in both rhs and out.
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rrow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, r) in orow.iter_mut().zip(rrow) {
                    *o += a * r;
                }
            }
        }
        debug_assert!(out.is_finite(), "matmul produced non-finite entries");
        Ok(out)
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_map(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_map(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|x| x * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, rhs: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Shape(format!(
                "elementwise op on {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// In-place `self += s · rhs`; shapes must already agree.
    pub fn axpy(&mut self, s: f64, rhs: &Self) -> Result<()> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Shape(format!(
                "axpy on {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Max column sum of absolute values (the induced 1-norm), used by `expm`
    /// to pick the Padé degree.
    fn one_norm(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 0..self.cols {
            let mut s = 0.0;
            for i in 0..self.rows {
                s += self.data[i * self.cols + j].abs();
            }
            best = best.max(s);
        }
        best
    }

    /// `‖X·Xᵀ − I‖_F` for a square matrix; the orthogonality residual.
    pub fn orthogonality_residual(&self) -> f64 {
        debug_assert!(self.is_square());
        let n = self.rows;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.data[i * n + k] * self.data[j * n + k];
                }
                if i == j {
                    s -= 1.0;
                }
                acc += s * s;
            }
        }
        acc.sqrt()
    }
}

/// Solves `A · X = B` by LU with partial pivoting. `A` is consumed.
fn lu_solve(mut a: DenseMatrix, mut b: DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows;
    if !a.is_square() || b.rows != n {
        return Err(Error::Shape("lu_solve expects square A and matching B".into()));
    }
    let m = b.cols;
    for col in 0..n {
        let mut piv = col;
        let mut best = a.data[col * n + col].abs();
        for r in col + 1..n {
            let v = a.data[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return Err(Error::Numeric("singular system in lu_solve".into()));
        }
        if piv != col {
            for j in 0..n {
                a.data.swap(col * n + j, piv * n + j);
            }
            for j in 0..m {
                b.data.swap(col * m + j, piv * m + j);
            }
        }
        let d = a.data[col * n + col];
        for r in col + 1..n {
            let f = a.data[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            a.data[r * n + col] = 0.0;
            for j in col + 1..n {
                a.data[r * n + j] -= f * a.data[col * n + j];
            }
            for j in 0..m {
                b.data[r * m + j] -= f * b.data[col * m + j];
            }
        }
    }
    for col in (0..n).rev() {
        let d = a.data[col * n + col];
        for j in 0..m {
            let mut s = b.data[col * m + j];
            for k in col + 1..n {
                s -= a.data[col * n + k] * b.data[k * m + j];
            }
            b.data[col * m + j] = s / d;
        }
    }
    Ok(b)
}

// Padé numerator/denominator pairs for the scaling-and-squaring matrix
// exponential (Higham 2005). U is odd in A, V even; exp(A) ≈ (V−U)⁻¹(V+U).
fn pade_uv(a: &DenseMatrix, coeffs: &[f64]) -> Result<(DenseMatrix, DenseMatrix)> {
    let n = a.rows;
    let ident = DenseMatrix::identity(n);
    let a2 = a.matmul(a)?;
    // Powers a², a⁴, a⁶ as needed by the degree.
    let mut even_pows = vec![ident.clone(), a2.clone()];
    let half = (coeffs.len() - 1) / 2; // highest needed even power index
    while even_pows.len() <= half {
        let next = even_pows.last().unwrap().matmul(&a2)?;
        even_pows.push(next);
    }
    let mut u_inner = DenseMatrix::zeros(n, n);
    let mut v = DenseMatrix::zeros(n, n);
    for (k, &c) in coeffs.iter().enumerate() {
        let (pow, target) = (k / 2, k % 2);
        if target == 1 {
            u_inner.axpy(c, &even_pows[pow])?;
        } else {
            v.axpy(c, &even_pows[pow])?;
        }
    }
    let u = a.matmul(&u_inner)?;
    Ok((u, v))
}

// Degree-13 variant economizes the big powers as in Higham's algorithm.
fn pade13_uv(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = a.rows;
    let ident = DenseMatrix::identity(n);
    let a2 = a.matmul(a)?;
    let a4 = a2.matmul(&a2)?;
    let a6 = a4.matmul(&a2)?;

    let mut w = a6.scale(B[13]);
    w.axpy(B[11], &a4)?;
    w.axpy(B[9], &a2)?;
    let mut u_inner = a6.matmul(&w)?;
    u_inner.axpy(B[7], &a6)?;
    u_inner.axpy(B[5], &a4)?;
    u_inner.axpy(B[3], &a2)?;
    u_inner.axpy(B[1], &ident)?;
    let u = a.matmul(&u_inner)?;

    let mut w2 = a6.scale(B[12]);
    w2.axpy(B[10], &a4)?;
    w2.axpy(B[8], &a2)?;
    let mut v = a6.matmul(&w2)?;
    v.axpy(B[6], &a6)?;
    v.axpy(B[4], &a4)?;
    v.axpy(B[2], &a2)?;
    v.axpy(B[0], &ident)?;
    Ok((u, v))
}

/// Matrix exponential by scaling and squaring with Padé approximants.
///
/// Intended callers pass skew-symmetric matrices, for which the result is a
/// rotation, but any square matrix of moderate norm is handled.
pub fn expm(a: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "expm needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    if !a.is_finite() {
        return Err(Error::Numeric("expm input has non-finite entries".into()));
    }
    // Degree-(3,5,7,9) thresholds from Higham's error analysis.
    const THETA3: f64 = 1.495585217958292e-2;
    const THETA5: f64 = 2.539398330063230e-1;
    const THETA7: f64 = 9.504178996162932e-1;
    const THETA9: f64 = 2.097847961257068;
    const THETA13: f64 = 5.371920351148152;
    const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
    const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
    const PADE7: [f64; 8] = [
        17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
    ];
    const PADE9: [f64; 10] = [
        17643225600.0,
        8821612800.0,
        2075673600.0,
        302702400.0,
        30270240.0,
        2162160.0,
        110880.0,
        3960.0,
        90.0,
        1.0,
    ];

    let norm = a.one_norm();
    let (u, v, squarings) = if norm <= THETA3 {
        let (u, v) = pade_uv(a, &PADE3)?;
        (u, v, 0)
    } else if norm <= THETA5 {
        let (u, v) = pade_uv(a, &PADE5)?;
        (u, v, 0)
    } else if norm <= THETA7 {
        let (u, v) = pade_uv(a, &PADE7)?;
        (u, v, 0)
    } else if norm <= THETA9 {
        let (u, v) = pade_uv(a, &PADE9)?;
        (u, v, 0)
    } else {
        let s = (norm / THETA13).log2().ceil().max(0.0) as u32;
        if s > MAX_SQUARINGS {
            return Err(Error::Numeric(format!(
                "expm: input norm {norm:e} needs {s} squarings, budget is {MAX_SQUARINGS}"
            )));
        }
        let scaled = a.scale(2f64.powi(-(s as i32)));
        let (u, v) = pade13_uv(&scaled)?;
        (u, v, s)
    };

    let numer = v.add(&u)?;
    let denom = v.sub(&u)?;
    let mut r = lu_solve(denom, numer)?;
    for _ in 0..squarings {
        r = r.matmul(&r)?;
    }
    if !r.is_finite() {
        return Err(Error::Numeric("expm produced non-finite entries".into()));
    }
    Ok(r)
}

/// Modified Gram-Schmidt QR of a square matrix: returns `(Q, R)` with
/// `Q` column-orthonormal and `R` upper triangular with positive diagonal.
pub(crate) fn mgs_qr(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "QR orthogonalization needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let d = a.rows;
    let mut q = a.clone();
    let mut r = DenseMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..j {
            let mut proj = 0.0;
            for t in 0..d {
                proj += q.get(t, i) * q.get(t, j);
            }
            r.set(i, j, proj);
            for t in 0..d {
                let v = q.get(t, j) - proj * q.get(t, i);
                q.set(t, j, v);
            }
        }
        let mut norm = 0.0;
        for t in 0..d {
            norm += q.get(t, j) * q.get(t, j);
        }
        let norm = norm.sqrt();
        if norm <= RANK_TOLERANCE {
            return Err(Error::Degenerate { column: j });
        }
        r.set(j, j, norm);
        for t in 0..d {
            q.set(t, j, q.get(t, j) / norm);
        }
    }
    Ok((q, r))
}

/// Relation matrix: `num_blocks` independent orthogonal `block_dim × block_dim`
/// blocks arranged along the diagonal of an implied `n × n` matrix with
/// `n = block_dim · num_blocks`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagOrthogonal {
    block_dim: usize,
    blocks: Vec<DenseMatrix>,
}

impl BlockDiagOrthogonal {
    /// Validates each block: square of the right size and orthogonal within
    /// [`ORTHO_TOLERANCE`].
    pub fn new(blocks: Vec<DenseMatrix>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Shape("block-diagonal matrix needs at least one block".into()));
        }
        let block_dim = blocks[0].rows();
        for (i, b) in blocks.iter().enumerate() {
            if !b.is_square() || b.rows() != block_dim {
                return Err(Error::Shape(format!(
                    "block {i} has shape {}x{}, expected {block_dim}x{block_dim}",
                    b.rows(),
                    b.cols()
                )));
            }
            let res = b.orthogonality_residual();
            if res > ORTHO_TOLERANCE {
                return Err(Error::Precondition(format!(
                    "block {i} orthogonality residual {res:e} exceeds {ORTHO_TOLERANCE:e}"
                )));
            }
        }
        Ok(Self { block_dim, blocks })
    }

    pub fn identity(block_dim: usize, num_blocks: usize) -> Self {
        Self {
            block_dim,
            blocks: vec![DenseMatrix::identity(block_dim); num_blocks],
        }
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Total dimension `n` of the assembled matrix.
    pub fn dim(&self) -> usize {
        self.block_dim * self.blocks.len()
    }

    pub fn blocks(&self) -> &[DenseMatrix] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &DenseMatrix {
        &self.blocks[i]
    }

    /// Replaces block `i`, re-validating the orthogonality invariant.
    pub fn set_block(&mut self, i: usize, block: DenseMatrix) -> Result<()> {
        if !block.is_square() || block.rows() != self.block_dim {
            return Err(Error::Shape(format!(
                "block has shape {}x{}, expected {0}x{0}",
                block.rows(),
                block.cols()
            )));
        }
        let res = block.orthogonality_residual();
        if res > ORTHO_TOLERANCE {
            return Err(Error::Precondition(format!(
                "replacement block orthogonality residual {res:e} exceeds {ORTHO_TOLERANCE:e}"
            )));
        }
        self.blocks[i] = block;
        Ok(())
    }

    /// Applies the assembled `n × n` matrix to `h` without materializing it:
    /// row band `[i·d, (i+1)·d)` of the result is `blocks[i]` times the same
    /// band of `h`. Cost is O(n·d·m) instead of O(n²·m).
    pub fn apply(&self, h: &DenseMatrix) -> Result<DenseMatrix> {
        self.apply_impl(h, false)
    }

    /// Same banded product with every block transposed; the assembled matrix
    /// is orthogonal, so this is also its inverse action.
    pub fn apply_transpose(&self, h: &DenseMatrix) -> Result<DenseMatrix> {
        self.apply_impl(h, true)
    }

    fn apply_impl(&self, h: &DenseMatrix, transpose: bool) -> Result<DenseMatrix> {
        let n = self.dim();
        if h.rows() != n {
            return Err(Error::Shape(format!(
                "block apply: matrix is {n}x{n}, operand has {} rows",
                h.rows()
            )));
        }
        let d = self.block_dim;
        let m = h.cols();
        let mut out = DenseMatrix::zeros(n, m);
        for (bi, block) in self.blocks.iter().enumerate() {
            let base = bi * d;
            for r in 0..d {
                for c in 0..d {
                    let w = if transpose {
                        block.get(c, r)
                    } else {
                        block.get(r, c)
                    };
                    if w == 0.0 {
                        continue;
                    }
                    let hrow = (base + c) * m;
                    let orow = (base + r) * m;
                    for j in 0..m {
                        out.data_mut()[orow + j] += w * h.data()[hrow + j];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Assembles the full `n × n` dense matrix. Test oracles and residual
    /// reports use this; hot paths never should.
    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.dim();
        let d = self.block_dim;
        let mut out = DenseMatrix::zeros(n, n);
        for (bi, block) in self.blocks.iter().enumerate() {
            let base = bi * d;
            for r in 0..d {
                for c in 0..d {
                    out.set(base + r, base + c, block.get(r, c));
                }
            }
        }
        out
    }

    pub fn max_residual(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.orthogonality_residual())
            .fold(0.0, f64::max)
    }

    /// Re-orthogonalizes any block whose residual drifted past
    /// [`STABILIZE_TRIGGER`], replacing it with the Q factor of its QR
    /// decomposition (R has positive diagonal, so the factor is unique).
    pub fn stabilize(&mut self) -> Result<()> {
        for i in 0..self.blocks.len() {
            if self.blocks[i].orthogonality_residual() > STABILIZE_TRIGGER {
                let (q, _r) = mgs_qr(&self.blocks[i])?;
                self.blocks[i] = q;
            }
        }
        Ok(())
    }

    /// Re-orthogonalizes a single block regardless of drift.
    pub fn stabilize_block(&mut self, i: usize) -> Result<()> {
        let (q, _r) = mgs_qr(&self.blocks[i])?;
        self.blocks[i] = q;
        Ok(())
    }
}
