//! The nonlinear operator `N`, superposition operators built from scalar
//! profiles, and the sampling-based monotonicity / cocoercivity estimators.
//!
//! Inner products on the grid are weighted, `⟨x, y⟩ = Σ w_i x_i y_i`, so the
//! discrete operator mirrors the L² pairing of the continuum problem.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{dot_w, norm_w, Error, Result};

/// Pointwise nonlinearity shapes selectable by name in configs.
#[derive(Clone, Debug)]
pub enum ProfileKind {
    /// `f(t) = c t`.
    Linear { c: f64 },
    /// `f(t) = scale * tanh(t)` — bounded, monotone, not coercive.
    Tanh { scale: f64 },
    /// `f(t) = (a + (c - a) t² / (1 + t²)) t`, the bounded-slope family
    /// `f = g(t) t` with `g` ranging over `[min(a,c), max(a,c))`.
    Saturating { a: f64, c: f64 },
    /// Monotone table with linear interpolation, end segments extrapolated
    /// with their own slopes.
    PiecewiseTable { ts: Vec<f64>, ys: Vec<f64> },
}

/// A scalar profile `f(x, t)` together with its growth and Lipschitz
/// constants. All shipped profiles are node-independent; the node index is
/// part of the call signature so node-dependent profiles can slot in.
#[derive(Clone, Debug)]
pub struct ScalarProfile {
    kind: ProfileKind,
    /// Coercive lower growth: `f(t) t >= a t²` when present.
    pub lower_a: Option<f64>,
    /// Upper growth slope in `|f(x,t)| <= q + b |t|`.
    pub upper_b: f64,
    /// Upper growth offset.
    pub upper_q: f64,
    /// Inverse Lipschitz constant: `|f(t) - f(t')| <= (1/alpha) |t - t'|`.
    pub alpha: f64,
}

impl ScalarProfile {
    pub fn linear(c: f64) -> Result<Self> {
        if c <= 0.0 {
            return Err(Error::InvalidParameter("linear profile needs c > 0".into()));
        }
        Ok(Self {
            kind: ProfileKind::Linear { c },
            lower_a: Some(c),
            upper_b: c,
            upper_q: 0.0,
            alpha: 1.0 / c,
        })
    }

    pub fn tanh(scale: f64) -> Result<Self> {
        if scale <= 0.0 {
            return Err(Error::InvalidParameter("tanh profile needs scale > 0".into()));
        }
        Ok(Self {
            kind: ProfileKind::Tanh { scale },
            lower_a: None,
            upper_b: scale,
            upper_q: 0.0,
            alpha: 1.0 / scale,
        })
    }

    pub fn saturating(a: f64, c: f64) -> Result<Self> {
        if a <= 0.0 || c <= 0.0 {
            return Err(Error::InvalidParameter(
                "saturating profile needs a > 0 and c > 0".into(),
            ));
        }
        // f'(t) = a + (c-a) s(3+s)/(1+s)² with s = t²; the factor ranges over
        // [0, 9/8], attained at s = 3.
        let extreme = a + 1.125 * (c - a);
        if extreme <= 0.0 {
            return Err(Error::InvalidParameter(
                "saturating profile is non-monotone for these (a, c)".into(),
            ));
        }
        Ok(Self {
            kind: ProfileKind::Saturating { a, c },
            lower_a: Some(a.min(c)),
            upper_b: a.max(c),
            upper_q: 0.0,
            alpha: 1.0 / a.max(extreme),
        })
    }

    /// Table must be strictly increasing in `t`, nondecreasing in `y`, and
    /// pass through the origin (interpolated).
    pub fn piecewise_table(ts: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if ts.len() < 2 || ts.len() != ys.len() {
            return Err(Error::ProfileViolation(
                "piecewise table needs at least two (t, y) points".into(),
            ));
        }
        let mut max_slope = 0.0f64;
        let mut min_slope = f64::INFINITY;
        for i in 1..ts.len() {
            let dt = ts[i] - ts[i - 1];
            if dt <= 0.0 {
                return Err(Error::ProfileViolation("table abscissae must increase".into()));
            }
            let slope = (ys[i] - ys[i - 1]) / dt;
            if slope < 0.0 {
                return Err(Error::MonotoneViolation(
                    "piecewise table is decreasing on a segment".into(),
                ));
            }
            max_slope = max_slope.max(slope);
            min_slope = min_slope.min(slope);
        }
        let probe = Self {
            kind: ProfileKind::PiecewiseTable { ts, ys },
            lower_a: None,
            upper_b: max_slope,
            upper_q: 0.0,
            alpha: if max_slope > 0.0 {
                1.0 / max_slope
            } else {
                f64::INFINITY
            },
        };
        if probe.eval(0, 0.0).abs() > 1e-14 {
            return Err(Error::ProfileViolation("table does not pass through 0".into()));
        }
        Ok(Self {
            lower_a: if min_slope > 0.0 { Some(min_slope) } else { None },
            ..probe
        })
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    /// Evaluates `f(x_node, t)`.
    pub fn eval(&self, _node: usize, t: f64) -> f64 {
        match &self.kind {
            ProfileKind::Linear { c } => c * t,
            ProfileKind::Tanh { scale } => scale * t.tanh(),
            ProfileKind::Saturating { a, c } => {
                let s = t * t;
                (a + (c - a) * s / (1.0 + s)) * t
            }
            ProfileKind::PiecewiseTable { ts, ys } => {
                let n = ts.len();
                if t <= ts[0] {
                    let slope = (ys[1] - ys[0]) / (ts[1] - ts[0]);
                    ys[0] + slope * (t - ts[0])
                } else if t >= ts[n - 1] {
                    let slope = (ys[n - 1] - ys[n - 2]) / (ts[n - 1] - ts[n - 2]);
                    ys[n - 1] + slope * (t - ts[n - 1])
                } else {
                    let k = ts.partition_point(|&x| x <= t).min(n - 1);
                    let slope = (ys[k] - ys[k - 1]) / (ts[k] - ts[k - 1]);
                    ys[k - 1] + slope * (t - ts[k - 1])
                }
            }
        }
    }

    /// Generalized derivative `∂_t f(x_node, t)`; at a table kink the
    /// right-hand slope wins.
    pub fn deriv(&self, _node: usize, t: f64) -> f64 {
        match &self.kind {
            ProfileKind::Linear { c } => *c,
            ProfileKind::Tanh { scale } => {
                let c = t.cosh();
                scale / (c * c)
            }
            ProfileKind::Saturating { a, c } => {
                let s = t * t;
                let d = 1.0 + s;
                a + (c - a) * s * (3.0 + s) / (d * d)
            }
            ProfileKind::PiecewiseTable { ts, ys } => {
                let n = ts.len();
                let k = if t < ts[0] {
                    1
                } else if t >= ts[n - 1] {
                    n - 1
                } else {
                    // right-hand slope at kinks: segment starting at t
                    ts.partition_point(|&x| x <= t).clamp(1, n - 1)
                };
                (ys[k] - ys[k - 1]) / (ts[k] - ts[k - 1])
            }
        }
    }

    /// Samples the profile contract on `[-t_max, t_max]`: `f(0) = 0`,
    /// monotone nondecrease, Lipschitz bound `1/alpha`, and the growth
    /// sandwich (the lower bound only when `lower_a` is claimed).
    pub fn validate(&self, t_max: f64, samples: usize) -> Result<()> {
        if self.eval(0, 0.0).abs() > 1e-12 {
            return Err(Error::ProfileViolation("f(x, 0) != 0".into()));
        }
        let m = samples.max(3);
        let step = 2.0 * t_max / (m - 1) as f64;
        let mut prev_t = -t_max;
        let mut prev_f = self.eval(0, prev_t);
        let scale = self.upper_q + self.upper_b * t_max;
        let tol = 1e-10 * scale.max(1.0);
        for k in 1..m {
            let t = -t_max + step * k as f64;
            let f = self.eval(0, t);
            if f < prev_f - tol {
                return Err(Error::MonotoneViolation(format!(
                    "f({t}) = {f} < f({prev_t}) = {prev_f}"
                )));
            }
            if self.alpha.is_finite() && (f - prev_f).abs() > (t - prev_t) / self.alpha + tol {
                return Err(Error::ProfileViolation(format!(
                    "Lipschitz bound 1/alpha = {} violated near t = {t}",
                    1.0 / self.alpha
                )));
            }
            if f.abs() > self.upper_q + self.upper_b * t.abs() + tol {
                return Err(Error::ProfileViolation(format!(
                    "upper growth bound violated at t = {t}"
                )));
            }
            if let Some(a) = self.lower_a {
                if f.abs() < a * t.abs() - tol {
                    return Err(Error::ProfileViolation(format!(
                        "lower growth bound a = {a} violated at t = {t}"
                    )));
                }
            }
            prev_t = t;
            prev_f = f;
        }
        Ok(())
    }
}

/// Named profile block of a JSON config.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ProfileConfig {
    Linear { c: f64 },
    Tanh { scale: f64 },
    Saturating { a: f64, c: f64 },
    PiecewiseTable { file: String },
}

impl ProfileConfig {
    /// Resolves the config into a profile; table files hold one `t y` pair
    /// per line.
    pub fn build(&self) -> Result<ScalarProfile> {
        match self {
            ProfileConfig::Linear { c } => ScalarProfile::linear(*c),
            ProfileConfig::Tanh { scale } => ScalarProfile::tanh(*scale),
            ProfileConfig::Saturating { a, c } => ScalarProfile::saturating(*a, *c),
            ProfileConfig::PiecewiseTable { file } => {
                let text = std::fs::read_to_string(file)?;
                let mut ts = Vec::new();
                let mut ys = Vec::new();
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let mut parts = line.split_whitespace();
                    let (t, y) = match (parts.next(), parts.next()) {
                        (Some(t), Some(y)) => (t, y),
                        _ => {
                            return Err(Error::Parse {
                                path: file.clone(),
                                reason: format!("line {}: expected `t y`", lineno + 1),
                            })
                        }
                    };
                    let parse = |s: &str| {
                        s.parse::<f64>().map_err(|e| Error::Parse {
                            path: file.clone(),
                            reason: format!("line {}: {e}", lineno + 1),
                        })
                    };
                    ts.push(parse(t)?);
                    ys.push(parse(y)?);
                }
                ScalarProfile::piecewise_table(ts, ys)
            }
        }
    }
}

type EvalFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type DiagJacFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type FullJacFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Analytic derivative information attached to a [`NonlinearMap`].
#[derive(Clone)]
pub enum Jacobian {
    /// No analytic derivative; solvers fall back to finite differences.
    None,
    /// Diagonal Jacobian (superposition operators).
    Diagonal(DiagJacFn),
    /// Full symmetric Jacobian.
    Full(FullJacFn),
}

/// The nonlinear operator `N: H -> H` with `N(0) = 0`, carrying the grid
/// weights that define the inner product it is monotone with respect to.
#[derive(Clone)]
pub struct NonlinearMap {
    dim: usize,
    weights: DVector<f64>,
    claimed_alpha: Option<f64>,
    profile: Option<ScalarProfile>,
    eval: EvalFn,
    jacobian: Jacobian,
}

impl std::fmt::Debug for NonlinearMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlinearMap")
            .field("dim", &self.dim)
            .field("claimed_alpha", &self.claimed_alpha)
            .field("profile", &self.profile)
            .finish()
    }
}

impl NonlinearMap {
    /// Superposition operator `(N(u))_i = f(i, u_i)` over the given
    /// quadrature weights. The profile contract is sampled at construction.
    pub fn superposition(profile: ScalarProfile, weights: DVector<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidParameter(
                "quadrature weights must be positive".into(),
            ));
        }
        profile.validate(10.0, 201)?;
        let dim = weights.len();
        let p_eval = profile.clone();
        let p_jac = profile.clone();
        let claimed_alpha = if profile.alpha.is_finite() {
            Some(profile.alpha)
        } else {
            None
        };
        Ok(Self {
            dim,
            weights,
            claimed_alpha,
            profile: Some(profile),
            eval: Arc::new(move |u: &DVector<f64>| {
                DVector::from_fn(u.len(), |i, _| p_eval.eval(i, u[i]))
            }),
            jacobian: Jacobian::Diagonal(Arc::new(move |u: &DVector<f64>| {
                DVector::from_fn(u.len(), |i, _| p_jac.deriv(i, u[i]))
            })),
        })
    }

    /// Wraps an arbitrary evaluator. `N(0) = 0` is checked here.
    pub fn from_fn<F>(
        dim: usize,
        weights: DVector<f64>,
        f: F,
        claimed_alpha: Option<f64>,
    ) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        if weights.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: weights.len(),
            });
        }
        let at_zero = f(&DVector::zeros(dim));
        if at_zero.norm() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "N(0) != 0 (norm {:e})",
                at_zero.norm()
            )));
        }
        Ok(Self {
            dim,
            weights,
            claimed_alpha,
            profile: None,
            eval: Arc::new(f),
            jacobian: Jacobian::None,
        })
    }

    /// Componentwise scalar map with an optional scalar derivative.
    pub fn componentwise<F, G>(
        dim: usize,
        weights: DVector<f64>,
        f: F,
        df: Option<G>,
        claimed_alpha: Option<f64>,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut map = Self::from_fn(
            dim,
            weights,
            move |u: &DVector<f64>| DVector::from_fn(u.len(), |i, _| f(u[i])),
            claimed_alpha,
        )?;
        if let Some(df) = df {
            map.jacobian = Jacobian::Diagonal(Arc::new(move |u: &DVector<f64>| {
                DVector::from_fn(u.len(), |i, _| df(u[i]))
            }));
        }
        Ok(map)
    }

    /// Attaches a full symmetric Jacobian evaluator.
    pub fn with_full_jacobian<F>(mut self, jac: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Jacobian::Full(Arc::new(jac));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn claimed_alpha(&self) -> Option<f64> {
        self.claimed_alpha
    }

    pub fn profile(&self) -> Option<&ScalarProfile> {
        self.profile.as_ref()
    }

    pub fn jacobian(&self) -> &Jacobian {
        &self.jacobian
    }

    /// True when monotonicity of `N` is backed by construction (profile or a
    /// claimed cocoercivity constant), not just hoped for.
    pub fn monotone_by_construction(&self) -> bool {
        self.profile.is_some() || self.claimed_alpha.is_some()
    }

    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(u.len(), self.dim);
        (self.eval)(u)
    }

    /// Weighted inner product against this map's quadrature weights.
    pub fn dot(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        dot_w(&self.weights, x, y)
    }

    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        norm_w(&self.weights, x)
    }

    /// `ψ_N(u) = ⟨N(u), u⟩` in the weighted pairing.
    pub fn psi(&self, u: &DVector<f64>) -> f64 {
        self.dot(&self.apply(u), u)
    }
}

/// Result of the sampled cocoercivity estimate.
#[derive(Clone, Copy, Debug)]
pub struct CocoercivityEstimate {
    /// Minimum of `⟨ΔN, Δu⟩ / ‖ΔN‖²` over non-degenerate pairs; `None`
    /// encodes +∞ (every pair had `N(u₁) = N(u₂)`). A negative value
    /// signals non-monotonicity and is reported, not clamped.
    pub alpha_hat: Option<f64>,
    /// Pairs with `⟨ΔN, Δu⟩ < 0` — direct monotonicity violations.
    pub negative_pairs: usize,
    pub pairs_used: usize,
}

/// Samples `⟨ΔN, Δu⟩ / ‖ΔN‖²` over pairs; the minimum lower-bounds nothing
/// but upper-bounds any claimed cocoercivity constant.
pub fn estimate_cocoercivity(
    n: &NonlinearMap,
    sample_pairs: &[(DVector<f64>, DVector<f64>)],
) -> Result<CocoercivityEstimate> {
    if sample_pairs.is_empty() {
        return Err(Error::InvalidParameter(
            "cocoercivity estimation needs at least one pair".into(),
        ));
    }
    let mut best = f64::INFINITY;
    let mut used = 0;
    let mut negative = 0;
    for (u1, u2) in sample_pairs {
        if u1.len() != n.dim() || u2.len() != n.dim() {
            return Err(Error::DimensionMismatch {
                expected: n.dim(),
                got: u1.len().max(u2.len()),
            });
        }
        let dn = n.apply(u1) - n.apply(u2);
        let denom = n.dot(&dn, &dn);
        if denom == 0.0 {
            continue;
        }
        used += 1;
        let du = u1 - u2;
        let ratio = n.dot(&dn, &du) / denom;
        if ratio < 0.0 {
            negative += 1;
        }
        best = best.min(ratio);
    }
    Ok(CocoercivityEstimate {
        alpha_hat: if best.is_finite() { Some(best) } else { None },
        negative_pairs: negative,
        pairs_used: used,
    })
}

/// Deterministic sample pairs drawn uniformly from `[-half_width, half_width]^dim`.
pub fn sample_pairs(
    dim: usize,
    count: usize,
    half_width: f64,
    seed: u64,
) -> Vec<(DVector<f64>, DVector<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a = DVector::from_fn(dim, |_, _| rng.random_range(-half_width..half_width));
            let b = DVector::from_fn(dim, |_, _| rng.random_range(-half_width..half_width));
            (a, b)
        })
        .collect()
}

/// The value returned by the radial recession probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadialValue {
    /// `r(t_max)` with the nondecrease contract verified along the schedule.
    Finite(f64),
    /// `r(t)` exceeded the divergence cap.
    Diverged,
}

/// Trace of `r(t) = ⟨N(t u), u⟩` along a schedule. This is the radial value
/// along the constant direction, hence an UPPER bound of the recession
/// functional `J_N(u)`.
#[derive(Clone, Debug)]
pub struct RadialRecession {
    pub radial_upper_bound: RadialValue,
    pub trace: Vec<(f64, f64)>,
    /// Set when monotonicity of `N` is not backed by construction, so the
    /// monotone-limit justification does not apply.
    pub heuristic: bool,
    /// `r(t_max) - r(t_prev)`, an extrapolation diagnostic.
    pub last_increment: f64,
    /// Last increment small relative to the value: the limit looks reached.
    pub settled: bool,
}

/// Geometric default schedule `t = 2^k`, `k = 0..=40`.
pub fn default_t_schedule() -> Vec<f64> {
    (0..=40).map(|k| (k as f64).exp2()).collect()
}

/// Default cap `1e12 * max(1, ‖N(u)‖)` evaluated at `t = 1`.
pub fn default_divergence_cap(n: &NonlinearMap, u: &DVector<f64>) -> f64 {
    1e12 * n.norm(&n.apply(u)).max(1.0)
}

/// Evaluates `r(t) = ⟨N(t u), u⟩` along an increasing schedule from a unit
/// direction `u`, asserting the nondecrease that monotonicity of `N`
/// guarantees. Returns the last value or a divergence flag.
pub fn radial_recession(
    n: &NonlinearMap,
    u: &DVector<f64>,
    t_schedule: &[f64],
    divergence_cap: f64,
) -> Result<RadialRecession> {
    if u.len() != n.dim() {
        return Err(Error::DimensionMismatch {
            expected: n.dim(),
            got: u.len(),
        });
    }
    let nu = n.norm(u);
    if (nu - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "radial direction must be a unit vector (‖u‖ = {nu})"
        )));
    }
    if t_schedule.is_empty() || t_schedule.windows(2).any(|w| w[1] <= w[0]) || t_schedule[0] <= 0.0
    {
        return Err(Error::InvalidParameter(
            "t_schedule must be positive and strictly increasing".into(),
        ));
    }

    let heuristic = !n.monotone_by_construction();
    let mut trace = Vec::with_capacity(t_schedule.len());
    let mut prev: Option<f64> = None;
    let mut last_increment = 0.0;
    for &t in t_schedule {
        let r = n.dot(&n.apply(&(u * t)), u);
        trace.push((t, r));
        if let Some(p) = prev {
            let tol = 1e-9 * p.abs().max(r.abs()).max(1.0);
            if r < p - tol {
                return Err(Error::MonotoneViolation(format!(
                    "r({t}) = {r} dropped below previous value {p}"
                )));
            }
            last_increment = r - p;
        }
        prev = Some(r);
        if r > divergence_cap {
            return Ok(RadialRecession {
                radial_upper_bound: RadialValue::Diverged,
                trace,
                heuristic,
                last_increment,
                settled: false,
            });
        }
    }
    let value = prev.expect("schedule nonempty");
    let settled = last_increment.abs() <= 1e-9 * value.abs().max(1.0);
    Ok(RadialRecession {
        radial_upper_bound: RadialValue::Finite(value),
        trace,
        heuristic,
        last_increment,
        settled,
    })
}
