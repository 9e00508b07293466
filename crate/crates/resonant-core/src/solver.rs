//! The ε-perturbed equation `εP₊u + Lu + N(u) = h`.
//!
//! For every ε > 0 and cocoercivity constant `α > γ/δ²` the equation has
//! exactly one solution; the associated strong-monotonicity constant
//! `C = min{1/ε, α - γ/δ²}` is recorded as a conditioning diagnostic. The
//! solve itself is a damped Newton iteration on the residual with an Armijo
//! line search, falling back to a spectrally preconditioned Picard iteration
//! when Newton stagnates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nonlinearity::{estimate_cocoercivity, sample_pairs, Jacobian, NonlinearMap};
use crate::operator::{SpectralSplit, Subspace};
use crate::{Error, Result};

/// Iteration scheme that produced a result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Newton,
    Picard,
}

/// Initial iterate selection.
#[derive(Clone, Debug)]
pub enum StartPoint {
    Zero,
    Random { seed: u64, half_width: f64 },
    Given(DVector<f64>),
}

impl StartPoint {
    fn materialize(&self, dim: usize) -> DVector<f64> {
        match self {
            StartPoint::Zero => DVector::zeros(dim),
            StartPoint::Random { seed, half_width } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                DVector::from_fn(dim, |_, _| rng.random_range(-half_width..*half_width))
            }
            StartPoint::Given(v) => v.clone(),
        }
    }
}

/// Options for [`solve_perturbed`].
#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Convergence: `‖F_ε(u)‖ <= tol * max(1, ‖h‖)` in the weighted norm.
    pub tol: f64,
    /// Newton step budget.
    pub max_iter: usize,
    /// Picard step budget.
    pub picard_max_iter: usize,
    /// Force a backend; `None` means Newton with Picard fallback.
    pub backend: Option<Backend>,
    pub start: StartPoint,
    /// Cocoercivity constant override for the conditioning diagnostic; falls
    /// back to the map's claimed constant, then to a seeded sample estimate.
    pub alpha_hint: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            picard_max_iter: 10_000,
            backend: None,
            start: StartPoint::Zero,
            alpha_hint: None,
        }
    }
}

/// A converged (or best-effort) solution of the perturbed equation.
#[derive(Clone, Debug)]
pub struct PerturbedSolveResult {
    pub u: DVector<f64>,
    pub epsilon: f64,
    /// Weighted norm of the perturbed residual at `u`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `min{1/ε, α - γ/δ²}`; positive exactly in the unique-solvability regime.
    pub strong_monotonicity_c: f64,
    pub backend: Backend,
    /// Whether `α > γ/δ²` held for the α used in the diagnostic.
    pub threshold_ok: bool,
}

/// `F_ε(u) = ε P₊ u + L u + N(u) - h`; ε = 0 gives the unperturbed residual.
pub fn residual(
    split: &SpectralSplit,
    n: &NonlinearMap,
    h: &DVector<f64>,
    epsilon: f64,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    if epsilon < 0.0 {
        return Err(Error::InvalidParameter("epsilon must be >= 0".into()));
    }
    let dim = split.dim();
    for (len, what) in [(u.len(), "u"), (h.len(), "h"), (n.dim(), "N")] {
        if len != dim {
            return Err(Error::InvalidParameter(format!(
                "{what} has dimension {len}, operator has {dim}"
            )));
        }
    }
    let mut r = split.apply(u) + n.apply(u) - h;
    if epsilon > 0.0 {
        let plus = split.project(u, Subspace::Plus)?;
        r.axpy(epsilon, &plus, 1.0);
    }
    Ok(r)
}

fn resolve_alpha(n: &NonlinearMap, opts: &SolveOptions) -> f64 {
    opts.alpha_hint
        .or_else(|| n.claimed_alpha())
        .unwrap_or_else(|| {
            let pairs = sample_pairs(n.dim(), 500, 1.0, 0xA1FA);
            estimate_cocoercivity(n, &pairs)
                .ok()
                .and_then(|e| e.alpha_hat)
                .unwrap_or(f64::INFINITY)
        })
}

pub(crate) fn strong_monotonicity_c(epsilon: f64, alpha: f64, threshold: f64) -> f64 {
    (1.0 / epsilon).min(alpha - threshold)
}

/// Jacobian of the nonlinear part at `u`: analytic when available, otherwise
/// central finite differences with step `1e-7 * max(1, |u_i|)`.
fn nonlinear_jacobian(n: &NonlinearMap, u: &DVector<f64>) -> DMatrix<f64> {
    let dim = n.dim();
    match n.jacobian() {
        Jacobian::Diagonal(d) => DMatrix::from_diagonal(&d(u)),
        Jacobian::Full(j) => j(u),
        Jacobian::None => {
            let mut jac = DMatrix::zeros(dim, dim);
            let mut up = u.clone();
            for j in 0..dim {
                let step = 1e-7 * u[j].abs().max(1.0);
                up[j] = u[j] + step;
                let fp = n.apply(&up);
                up[j] = u[j] - step;
                let fm = n.apply(&up);
                up[j] = u[j];
                let col = (fp - fm) / (2.0 * step);
                jac.set_column(j, &col);
            }
            jac
        }
    }
}

struct Workspace {
    /// `L + ε P₊` as a dense matrix, reused across Newton iterations.
    linear_part: DMatrix<f64>,
}

impl Workspace {
    fn new(split: &SpectralSplit, epsilon: f64) -> Self {
        let n = split.dim();
        let p_plus = DMatrix::identity(n, n) - split.projector_minus();
        let linear_part = split.matrix() + p_plus * epsilon;
        Self { linear_part }
    }
}

/// Solves the perturbed equation for a fixed ε > 0.
///
/// The solver runs whether or not the cocoercivity threshold holds; the
/// result flags the regime it ran in. Non-convergence returns the best
/// iterate with `converged = false` rather than erroring, so continuation
/// can inspect partial progress.
pub fn solve_perturbed(
    split: &SpectralSplit,
    n: &NonlinearMap,
    h: &DVector<f64>,
    epsilon: f64,
    opts: &SolveOptions,
) -> Result<PerturbedSolveResult> {
    if epsilon <= 0.0 {
        return Err(Error::InvalidParameter(
            "solve_perturbed requires epsilon > 0".into(),
        ));
    }
    let alpha = resolve_alpha(n, opts);
    let threshold = split.threshold();
    let c = strong_monotonicity_c(epsilon, alpha, threshold);
    let threshold_ok = alpha > threshold;

    let target = opts.tol * n.norm(h).max(1.0);
    let ws = Workspace::new(split, epsilon);
    let mut u = opts.start.materialize(split.dim());
    let mut total_iters = 0usize;

    let mut backend = opts.backend.unwrap_or(Backend::Newton);
    if backend == Backend::Newton {
        match newton_loop(split, n, h, epsilon, &ws, &mut u, target, opts.max_iter) {
            NewtonOutcome::Converged { iterations } => {
                let rn = n.norm(&residual(split, n, h, epsilon, &u)?);
                return Ok(PerturbedSolveResult {
                    u,
                    epsilon,
                    residual_norm: rn,
                    iterations,
                    converged: true,
                    strong_monotonicity_c: c,
                    backend: Backend::Newton,
                    threshold_ok,
                });
            }
            NewtonOutcome::Stagnated { iterations } => {
                total_iters = iterations;
                if opts.backend == Some(Backend::Newton) {
                    // Explicit Newton request: report the best iterate.
                    let rn = n.norm(&residual(split, n, h, epsilon, &u)?);
                    return Ok(PerturbedSolveResult {
                        u,
                        epsilon,
                        residual_norm: rn,
                        iterations,
                        converged: rn <= target,
                        strong_monotonicity_c: c,
                        backend: Backend::Newton,
                        threshold_ok,
                    });
                }
                backend = Backend::Picard;
            }
        }
    }

    // Picard: u <- u - τ M F(u) with the spectral preconditioner
    // M = (L + εP₊ + (1/(2α)) I + μ I)⁻¹ applied in the eigenbasis.
    let iters = picard_loop(
        split,
        n,
        h,
        epsilon,
        alpha,
        c,
        &ws,
        &mut u,
        target,
        opts.picard_max_iter,
    )?;
    total_iters += iters;
    let rn = n.norm(&residual(split, n, h, epsilon, &u)?);
    Ok(PerturbedSolveResult {
        u,
        epsilon,
        residual_norm: rn,
        iterations: total_iters,
        converged: rn <= target,
        strong_monotonicity_c: c,
        backend,
        threshold_ok,
    })
}

enum NewtonOutcome {
    Converged { iterations: usize },
    Stagnated { iterations: usize },
}

#[allow(clippy::too_many_arguments)]
fn newton_loop(
    split: &SpectralSplit,
    n: &NonlinearMap,
    h: &DVector<f64>,
    epsilon: f64,
    ws: &Workspace,
    u: &mut DVector<f64>,
    target: f64,
    max_iter: usize,
) -> NewtonOutcome {
    // Levenberg–Marquardt on φ(u) = ½‖F(u)‖²_w: solve (JᵀWJ + νI)d = −JᵀWr.
    // For invertible J and ν → 0 this IS the Newton step; the damping keeps
    // the iteration alive where the Jacobian is singular (e.g. λ + f'(0) = 0
    // on a flat nonlinearity).
    let w = DMatrix::from_diagonal(n.weights());
    let mut r = residual(split, n, h, epsilon, u).expect("dims checked by caller");
    let mut merit = 0.5 * n.dot(&r, &r);
    let mut nu = 0.0f64;
    for iter in 0..max_iter {
        if (2.0 * merit).sqrt() <= target {
            return NewtonOutcome::Converged { iterations: iter };
        }
        let jac = &ws.linear_part + nonlinear_jacobian(n, u);
        let jtw = jac.transpose() * &w;
        let a = &jtw * &jac;
        let g = &jtw * &r;
        let a_scale = a.diagonal().iter().fold(0.0f64, |m, &d| m.max(d.abs())).max(1e-300);
        // Marquardt scaling: damping proportional to each diagonal entry so
        // components living on very different scales (ε² vs O(1)) are damped
        // relatively, not absolutely. Zero diagonals get a floor tied to the
        // overall scale so the damped matrix is invertible.
        let damping = DMatrix::from_diagonal(&DVector::from_iterator(
            a.nrows(),
            a.diagonal().iter().map(|&d| d.abs().max(1e-10 * a_scale)),
        ));
        let mut accepted = false;
        for _ in 0..40 {
            let damped = &a + &damping * nu;
            let step = match damped.clone().lu().solve(&(-&g)) {
                Some(d) => d,
                None => {
                    nu = (nu * 10.0).max(1e-12);
                    continue;
                }
            };
            let trial = &*u + &step;
            let rt = residual(split, n, h, epsilon, &trial).expect("dims fixed");
            let mt = 0.5 * n.dot(&rt, &rt);
            if mt < merit {
                *u = trial;
                r = rt;
                merit = mt;
                nu = if nu > 1e-12 { (nu / 3.0).max(0.0) } else { 0.0 };
                accepted = true;
                break;
            }
            nu = (nu * 10.0).max(1e-12);
        }
        if !accepted {
            return NewtonOutcome::Stagnated { iterations: iter };
        }
    }
    if (2.0 * merit).sqrt() <= target {
        NewtonOutcome::Converged {
            iterations: max_iter,
        }
    } else {
        NewtonOutcome::Stagnated {
            iterations: max_iter,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn picard_loop(
    split: &SpectralSplit,
    n: &NonlinearMap,
    h: &DVector<f64>,
    epsilon: f64,
    alpha: f64,
    strong_c: f64,
    ws: &Workspace,
    u: &mut DVector<f64>,
    target: f64,
    max_iter: usize,
) -> Result<usize> {
    let dim = split.dim();
    let inv_two_alpha = if alpha.is_finite() { 0.5 / alpha } else { 0.0 };

    // Preconditioner: inverse of the diagonalized linear part plus a slope
    // proxy 1/(2α) for N. The sign per eigendirection is load-bearing — the
    // Jacobian is negative on H₋ — so only the magnitude is clamped away
    // from zero, never the sign.
    let plus_set: std::collections::BTreeSet<usize> = split.idx_plus().iter().copied().collect();
    let diag: Vec<f64> = (0..dim)
        .map(|i| {
            split.eigenvalues()[i]
                + if plus_set.contains(&i) { epsilon } else { 0.0 }
                + inv_two_alpha
        })
        .collect();
    let d_max = diag.iter().cloned().fold(0.0f64, |m, d| m.max(d.abs()));
    let floor = (1e-6 * d_max.max(1.0)).max(1e-12);
    let m_diag = DVector::from_iterator(
        dim,
        diag.iter().map(|&d| {
            let clamped = if d.abs() < floor {
                floor.copysign(if d == 0.0 { 1.0 } else { d })
            } else {
                d
            };
            1.0 / clamped
        }),
    );
    let q = split.eigenvectors();
    let apply_m = |v: &DVector<f64>| -> DVector<f64> {
        let c = q.transpose() * v;
        q * c.component_mul(&m_diag)
    };

    // With M ≈ J⁻¹ the preconditioned map has Lipschitz constant ‖MJ‖ ≈ 1;
    // a power iteration at the start point calibrates τ when N bends the
    // picture. strong_c > 0 certifies the contraction regime but does not
    // enter the step size.
    let _ = strong_c;
    let jac = &ws.linear_part + nonlinear_jacobian(n, u);
    let mut v = DVector::from_element(dim, 1.0 / (dim as f64).sqrt());
    let mut lip = 1.0;
    for _ in 0..30 {
        let w = apply_m(&(&jac * &v));
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        lip = norm;
        v = w / norm;
    }
    let mut tau = (1.0 / lip).clamp(1e-8, 1.0);

    let mut r = residual(split, n, h, epsilon, u)?;
    let mut rn = n.norm(&r);
    let mut since_progress = 0usize;
    for iter in 0..max_iter {
        if rn <= target {
            return Ok(iter);
        }
        let g = apply_m(&r);
        let trial = &*u - &g * tau;
        let rt = residual(split, n, h, epsilon, &trial)?;
        let rtn = n.norm(&rt);
        if rtn < rn {
            *u = trial;
            r = rt;
            rn = rtn;
            since_progress = 0;
        } else {
            tau *= 0.5;
            since_progress += 1;
            if tau < 1e-14 || since_progress > 60 {
                return Ok(iter + 1);
            }
        }
    }
    Ok(max_iter)
}

/// Outcome of the multi-start agreement probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOutcome {
    /// All starts converged and agree within tolerance.
    Agree,
    /// All starts converged, at least one pair disagrees.
    Disagree,
    /// Some start did not converge; uniqueness not assessed.
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct UniquenessProbe {
    pub outcome: ProbeOutcome,
    pub max_pairwise_distance: f64,
    pub results: Vec<PerturbedSolveResult>,
}

/// Operationalizes the uniqueness claim: solve from several starts and
/// compare. Disagreement on a compliant problem falsifies the setup;
/// agreement is evidence, not proof.
pub fn uniqueness_probe(
    split: &SpectralSplit,
    n: &NonlinearMap,
    h: &DVector<f64>,
    epsilon: f64,
    starts: &[DVector<f64>],
    tol: f64,
    opts: &SolveOptions,
) -> Result<UniquenessProbe> {
    if starts.is_empty() {
        return Err(Error::InvalidParameter(
            "uniqueness probe needs at least one start".into(),
        ));
    }
    let mut results = Vec::with_capacity(starts.len());
    for s in starts {
        let mut o = opts.clone();
        o.start = StartPoint::Given(s.clone());
        results.push(solve_perturbed(split, n, h, epsilon, &o)?);
    }
    let mut max_dist = 0.0f64;
    for i in 0..results.len() {
        for j in (i + 1)..results.len() {
            max_dist = max_dist.max(n.norm(&(&results[i].u - &results[j].u)));
        }
    }
    let outcome = if results.iter().any(|r| !r.converged) {
        ProbeOutcome::Inconclusive
    } else if max_dist <= tol * n.norm(h).max(1.0) {
        ProbeOutcome::Agree
    } else {
        ProbeOutcome::Disagree
    };
    Ok(UniquenessProbe {
        outcome,
        max_pairwise_distance: max_dist,
        results,
    })
}
