//! The self-adjoint linear part `L` and its spectral splitting.
//!
//! For a symmetric matrix with `0` on the right boundary of a spectral gap,
//! the eigendecomposition yields the orthogonal split `H = H₋ ⊕ H₊` where
//! `σ(L|H₋) ⊂ [-γ, -δ]` and `L|H₊ ≥ 0` (kernel included in `H₊`). The gap
//! width `δ` and the lower bound `γ` drive every solvability threshold
//! downstream.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dd;
use crate::{Error, Result};

/// A real symmetric matrix, validated on construction.
#[derive(Clone, Debug)]
pub struct SelfAdjointOperator {
    matrix: DMatrix<f64>,
    symmetry_tol: f64,
}

impl SelfAdjointOperator {
    /// Wraps a square matrix, rejecting it when the worst asymmetry
    /// `max |A_ij - A_ji|` exceeds `symmetry_tol`.
    pub fn new(matrix: DMatrix<f64>, symmetry_tol: f64) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidParameter(format!(
                "operator must be square with dim >= 1, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if symmetry_tol < 0.0 {
            return Err(Error::InvalidParameter(
                "symmetry_tol must be nonnegative".into(),
            ));
        }
        let mut max_asym = 0.0f64;
        for i in 0..matrix.nrows() {
            for j in (i + 1)..matrix.ncols() {
                max_asym = max_asym.max((matrix[(i, j)] - matrix[(j, i)]).abs());
            }
        }
        if max_asym > symmetry_tol {
            return Err(Error::NotSymmetric {
                max_asym,
                tol: symmetry_tol,
            });
        }
        Ok(Self {
            matrix,
            symmetry_tol,
        })
    }

    /// Diagonal operator `diag(entries)`.
    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        Self::new(m, 0.0).expect("diagonal matrix is symmetric")
    }

    /// Builds from row-major nested arrays (the dense JSON config form).
    pub fn from_rows(rows: &[Vec<f64>], symmetry_tol: f64) -> Result<Self> {
        let n = rows.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has length {} in a {n}-row matrix",
                    r.len()
                )));
            }
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(m, symmetry_tol)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn symmetry_tol(&self) -> f64 {
        self.symmetry_tol
    }

    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.matrix * u
    }
}

/// Which part of the split `H = H₋ ⊕ H₊` (with `ker L ⊂ H₊`) to select.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subspace {
    Minus,
    Plus,
    Kernel,
}

/// Eigendata of a [`SelfAdjointOperator`] together with the gap parameters
/// and the index partition realizing the split.
#[derive(Clone, Debug)]
pub struct SpectralSplit {
    /// Ascending eigenvalues, refined by a compensated Rayleigh quotient.
    eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors, column i paired with eigenvalue i.
    eigenvectors: DMatrix<f64>,
    /// Distance from 0 to the closest strictly negative eigenvalue;
    /// `+inf` when there is none.
    delta: f64,
    /// `max(0, -λ_min)`, with eigenvalues inside the kernel band counting
    /// as zero.
    gamma: f64,
    zero_tol: f64,
    idx_minus: Vec<usize>,
    idx_kernel: Vec<usize>,
    idx_plus: Vec<usize>,
    /// The original matrix, kept for exact residual and Jacobian assembly.
    matrix: DMatrix<f64>,
}

/// Default kernel classification tolerance: `1e-9 * max(1, spectral radius)`.
pub fn default_zero_tol(spectral_radius: f64) -> f64 {
    1e-9 * spectral_radius.max(1.0)
}

/// Full symmetric eigendecomposition with eigenvalue classification.
///
/// `zero_tol` decides which eigenvalues count as kernel; kernel indices are
/// assigned to `H₊` so that the negative part is strictly negative.
pub fn decompose(op: &SelfAdjointOperator, zero_tol: f64) -> Result<SpectralSplit> {
    if zero_tol < 0.0 {
        return Err(Error::InvalidParameter(
            "zero_tol must be nonnegative".into(),
        ));
    }
    let n = op.dim();
    let eig = nalgebra::SymmetricEigen::try_new(op.matrix.clone(), f64::EPSILON, 0)
        .ok_or(Error::EigenFailure {
            residual: f64::INFINITY,
        })?;

    // Refine every eigenvalue with a compensated Rayleigh quotient; the QR
    // values carry O(eps * ||A||) absolute error, which swamps small gap
    // parameters of stiff discretizations.
    let a_slice = op.matrix.as_slice();
    let mut pairs: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let v = eig.eigenvectors.column(i);
            let lam = dd::rayleigh_quotient(a_slice, n, v.as_slice());
            (lam, i)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let eigenvalues = DVector::from_iterator(n, pairs.iter().map(|p| p.0));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (k, &(_, src)) in pairs.iter().enumerate() {
        eigenvectors.set_column(k, &eig.eigenvectors.column(src));
    }

    let mut idx_minus = Vec::new();
    let mut idx_kernel = Vec::new();
    let mut idx_plus = Vec::new();
    for i in 0..n {
        let lam = eigenvalues[i];
        if lam < -zero_tol {
            idx_minus.push(i);
        } else {
            if lam.abs() <= zero_tol {
                idx_kernel.push(i);
            }
            idx_plus.push(i);
        }
    }
    let delta = idx_minus
        .iter()
        .map(|&i| eigenvalues[i].abs())
        .fold(f64::INFINITY, f64::min);
    // gamma = max(0, -λ_min) over the strictly negative part; eigenvalues
    // inside the zero_tol band count as kernel, not as a lower bound.
    let gamma = if idx_minus.is_empty() {
        0.0
    } else {
        -eigenvalues[0]
    };

    Ok(SpectralSplit {
        eigenvalues,
        eigenvectors,
        delta,
        gamma,
        zero_tol,
        idx_minus,
        idx_kernel,
        idx_plus,
        matrix: op.matrix.clone(),
    })
}

/// [`decompose`] with the default `zero_tol` scaled by the spectral radius.
pub fn decompose_auto(op: &SelfAdjointOperator) -> Result<SpectralSplit> {
    // One decomposition pass to learn the radius, then reclassify. The
    // eigendata is identical, only the index partition depends on zero_tol.
    let first = decompose(op, 0.0)?;
    let radius = first
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &l| m.max(l.abs()));
    decompose(op, default_zero_tol(radius))
}

impl SpectralSplit {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    pub fn idx_minus(&self) -> &[usize] {
        &self.idx_minus
    }

    pub fn idx_kernel(&self) -> &[usize] {
        &self.idx_kernel
    }

    pub fn idx_plus(&self) -> &[usize] {
        &self.idx_plus
    }

    pub fn kernel_dim(&self) -> usize {
        self.idx_kernel.len()
    }

    pub fn dim_minus(&self) -> usize {
        self.idx_minus.len()
    }

    /// Orthonormal kernel basis vectors, as owned columns.
    pub fn kernel_basis(&self) -> Vec<DVector<f64>> {
        self.idx_kernel
            .iter()
            .map(|&i| self.eigenvectors.column(i).into_owned())
            .collect()
    }

    /// The operator matrix the split was computed from.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `L u` through the stored matrix (exact, not the eigen-reconstruction).
    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.matrix * u
    }

    /// `γ/δ²`, the cocoercivity threshold; 0 when `H₋` is trivial.
    pub fn threshold(&self) -> f64 {
        if self.delta.is_infinite() {
            0.0
        } else {
            self.gamma / (self.delta * self.delta)
        }
    }

    fn check_dim(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Orthogonal projection of `u` onto the selected subspace.
    pub fn project(&self, u: &DVector<f64>, part: Subspace) -> Result<DVector<f64>> {
        self.check_dim(u)?;
        let idx = match part {
            Subspace::Minus => &self.idx_minus,
            Subspace::Plus => &self.idx_plus,
            Subspace::Kernel => &self.idx_kernel,
        };
        let mut out = DVector::zeros(self.dim());
        for &i in idx {
            let v = self.eigenvectors.column(i);
            let c = v.dot(u);
            out.axpy(c, &v, 1.0);
        }
        Ok(out)
    }

    /// Applies `K = (L|H₋)⁻¹` to the `H₋`-component of `w`.
    ///
    /// Returns the solution together with a flag that is true when `H₋` is
    /// trivial (in which case the result is 0 and no inversion happened).
    pub fn apply_k_minus(&self, w: &DVector<f64>) -> Result<(DVector<f64>, bool)> {
        self.check_dim(w)?;
        if self.idx_minus.is_empty() {
            return Ok((DVector::zeros(self.dim()), true));
        }
        let mut out = DVector::zeros(self.dim());
        for &i in &self.idx_minus {
            let v = self.eigenvectors.column(i);
            let c = v.dot(w) / self.eigenvalues[i];
            out.axpy(c, &v, 1.0);
        }
        Ok((out, false))
    }

    /// Dense projector onto `H₋` (low rank: `V₋ V₋ᵀ`).
    pub fn projector_minus(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut p = DMatrix::zeros(n, n);
        for &i in &self.idx_minus {
            let v = self.eigenvectors.column(i);
            // p += v vᵀ
            p.ger(1.0, &v, &v, 1.0);
        }
        p
    }
}

/// Outcome of [`verify_split`]; each check carries its measured worst case.
#[derive(Clone, Debug)]
pub struct SplitReport {
    pub orthonormal_ok: bool,
    pub max_orthonormality_defect: f64,
    pub projectors_ok: bool,
    pub max_projector_defect: f64,
    pub reconstruction_ok: bool,
    pub max_reconstruction_defect: f64,
    pub minus_spectrum_ok: bool,
    pub quadratic_estimate_ok: bool,
    pub plus_nonnegative_ok: bool,
    pub tol: f64,
}

impl SplitReport {
    pub fn ok(&self) -> bool {
        self.orthonormal_ok
            && self.projectors_ok
            && self.reconstruction_ok
            && self.minus_spectrum_ok
            && self.quadratic_estimate_ok
            && self.plus_nonnegative_ok
    }
}

/// Randomized verification of the split invariants against the operator it
/// came from: projector algebra, eigen-reconstruction, the inclusion
/// `σ(L|H₋) ⊂ [-γ, -δ]`, the quadratic estimate
/// `⟨Lu,u⟩ ≥ -(γ/δ²)‖Lu‖²` on `H₋`, and nonnegativity on `H₊`.
pub fn verify_split(
    split: &SpectralSplit,
    op: &SelfAdjointOperator,
    samples: usize,
    rng_seed: u64,
) -> SplitReport {
    let n = split.dim();
    let radius = split
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &l| m.max(l.abs()));
    let scale = radius.max(1.0);
    let tol = 1e-8 * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    // Orthonormality of the eigenvector family.
    let q = &split.eigenvectors;
    let gram = q.transpose() * q;
    let mut max_orth = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            max_orth = max_orth.max((gram[(i, j)] - want).abs());
        }
    }

    // Projector identities: P₋ + P₊ = I, P₋P₊ = 0, [P₋, L] = 0.
    let p_minus = split.projector_minus();
    let p_plus = DMatrix::identity(n, n) - &p_minus;
    let mut max_proj = 0.0f64;
    let prod = &p_minus * &p_plus;
    let comm = &p_minus * op.matrix() - op.matrix() * &p_minus;
    for v in prod.iter().chain(comm.iter()) {
        max_proj = max_proj.max(v.abs());
    }

    // Reconstruction ||A - Q Λ Qᵀ||_max.
    let mut lam_qt = q.transpose();
    for i in 0..n {
        let l = split.eigenvalues[i];
        lam_qt.row_mut(i).scale_mut(l);
    }
    let recon = q * lam_qt;
    let mut max_recon = 0.0f64;
    for (a, b) in op.matrix().iter().zip(recon.iter()) {
        max_recon = max_recon.max((a - b).abs());
    }

    // σ(L|H₋) ⊂ [-γ, -δ] (exact inequality on the computed eigenvalues).
    let minus_spectrum_ok = split.idx_minus.iter().all(|&i| {
        let l = split.eigenvalues[i];
        l >= -split.gamma - tol && (split.delta.is_infinite() || l <= -split.delta + tol)
    });

    // Random samples in H₋ and H₊.
    let ratio = split.threshold();
    let mut quad_ok = true;
    let mut plus_ok = true;
    for _ in 0..samples {
        if !split.idx_minus.is_empty() {
            let u = random_in_span(&mut rng, split, &split.idx_minus);
            let lu = op.apply(&u);
            let lhs = lu.dot(&u);
            let rhs = -ratio * lu.norm_squared();
            if lhs < rhs - tol {
                quad_ok = false;
            }
        }
        if !split.idx_plus.is_empty() {
            let u = random_in_span(&mut rng, split, &split.idx_plus);
            let lu = op.apply(&u);
            if lu.dot(&u) < -tol {
                plus_ok = false;
            }
        }
    }

    SplitReport {
        orthonormal_ok: max_orth <= tol,
        max_orthonormality_defect: max_orth,
        projectors_ok: max_proj <= tol,
        max_projector_defect: max_proj,
        reconstruction_ok: max_recon <= tol,
        max_reconstruction_defect: max_recon,
        minus_spectrum_ok,
        quadratic_estimate_ok: quad_ok,
        plus_nonnegative_ok: plus_ok,
        tol,
    }
}

fn random_in_span(rng: &mut ChaCha8Rng, split: &SpectralSplit, idx: &[usize]) -> DVector<f64> {
    let mut u = DVector::zeros(split.dim());
    for &i in idx {
        let c: f64 = rng.random_range(-1.0..1.0);
        u.axpy(c, &split.eigenvectors.column(i), 1.0);
    }
    u
}
