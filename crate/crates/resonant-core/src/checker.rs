//! Checks the solvability hypotheses for a concrete (L, N, h) triple.
//!
//! Spectral facts about a finite matrix are decidable; the cocoercivity
//! threshold and the sign/recession conditions on infinite ray families are
//! not, so the report distinguishes *certified* facts from *consistent*
//! sampled evidence.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::nonlinearity::{
    default_divergence_cap, default_t_schedule, estimate_cocoercivity, radial_recession,
    sample_pairs, NonlinearMap, RadialValue,
};
use crate::operator::SpectralSplit;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    /// Holds by construction or by a finite decidable computation.
    Certified,
    /// Sampling found no counterexample.
    Consistent,
    /// A concrete counterexample or a definite violation was found.
    Failed,
    /// The condition is vacuous here (e.g. no kernel, or h = 0).
    NotApplicable,
}

impl CheckStatus {
    pub fn is_ok(self) -> bool {
        matches!(self, CheckStatus::Certified | CheckStatus::Consistent | CheckStatus::NotApplicable)
    }
}

/// Spectral-side facts (always certified: finite eigenproblem).
#[derive(Clone, Debug, Serialize)]
pub struct SpectralCheck {
    pub status: CheckStatus,
    /// `None` encodes +∞ (no strictly negative spectrum).
    pub delta: Option<f64>,
    pub gamma: f64,
    pub kernel_dim: usize,
    pub dim_minus: usize,
    /// `γ/δ²`; 0 when δ = ∞.
    pub threshold: f64,
    /// `γ ≤ δ` must hold by definition of the gap.
    pub gamma_vs_delta_ok: bool,
}

/// Cocoercivity threshold α > γ/δ².
#[derive(Clone, Debug, Serialize)]
pub struct ThresholdCheck {
    pub status: CheckStatus,
    pub alpha: f64,
    pub alpha_source: &'static str,
    pub threshold: f64,
    pub margin: f64,
    /// Worst sampled ratio ⟨ΔN,Δu⟩/‖ΔN‖², `None` when every ΔN vanished.
    pub sampled_alpha: Option<f64>,
    pub negative_pairs: usize,
}

/// One ray's recession evidence.
#[derive(Clone, Debug, Serialize)]
pub struct RayCheck {
    pub label: String,
    /// `sup_t ⟨N(tu), u⟩` over the schedule; `None` encodes divergence (+∞).
    pub radial_sup: Option<f64>,
    /// `⟨h, u⟩` for kernel rays, `None` otherwise.
    pub h_pairing: Option<f64>,
    pub clears_bound: bool,
}

/// Sign condition (ii) and recession condition (iii) on sampled rays.
#[derive(Clone, Debug, Serialize)]
pub struct SignRecessionCheck {
    pub status_sign: CheckStatus,
    pub status_recession: CheckStatus,
    /// Path A: a coercivity certificate ψ(u) ≥ a‖u‖² with a > 0 discharges
    /// both conditions at once.
    pub coercivity_constant: Option<f64>,
    /// `B = γ‖h‖/(δ²α − γ)` — the level every ray must clear for (ii).
    pub sign_bound: f64,
    pub rays: Vec<RayCheck>,
    /// A kernel ray with radial limit ≤ ⟨h,u⟩ + B is a definite failure.
    pub kernel_counterexample: Option<String>,
}

/// Aggregated report; field names are part of the JSON contract.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub dim: usize,
    pub norm_h: f64,
    pub spectral: SpectralCheck,
    pub threshold: ThresholdCheck,
    pub sign_recession: SignRecessionCheck,
    pub all_ok: bool,
}

impl HypothesisReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn check_spectral(split: &SpectralSplit) -> SpectralCheck {
    let delta = split.delta();
    let gamma = split.gamma();
    let threshold = if delta.is_infinite() {
        0.0
    } else {
        gamma / (delta * delta)
    };
    let gamma_vs_delta_ok = delta.is_infinite() || gamma >= delta - 1e-9 * delta.max(1.0);
    SpectralCheck {
        status: CheckStatus::Certified,
        delta: if delta.is_infinite() { None } else { Some(delta) },
        gamma,
        kernel_dim: split.kernel_dim(),
        dim_minus: split.dim_minus(),
        threshold,
        gamma_vs_delta_ok,
    }
}

/// Checks α > γ/δ². `alpha` must come from the map (claimed or hinted);
/// when absent a sampled estimate is used and the status can only reach
/// `Consistent`.
pub fn check_threshold(
    split: &SpectralSplit,
    n: &NonlinearMap,
    alpha_hint: Option<f64>,
    seed: u64,
) -> Result<ThresholdCheck> {
    let threshold = split.threshold();
    let pairs = sample_pairs(n.dim(), 400, 2.0, seed);
    let est = estimate_cocoercivity(n, &pairs)?;
    let sampled_alpha = est.alpha_hat.filter(|a| a.is_finite());

    let (alpha, source, mut status) = match alpha_hint.or(n.claimed_alpha()) {
        Some(a) => {
            if a <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "alpha must be positive, got {a}"
                )));
            }
            let s = if n.monotone_by_construction() {
                CheckStatus::Certified
            } else {
                CheckStatus::Consistent
            };
            (a, "claimed", s)
        }
        None => match sampled_alpha {
            Some(a) => (a, "sampled", CheckStatus::Consistent),
            // Every sampled ΔN vanished: N ≡ 0 on the sample, vacuous.
            None => (f64::INFINITY, "sampled", CheckStatus::Consistent),
        },
    };
    if est.negative_pairs > 0 {
        status = CheckStatus::Failed;
    }
    // A sampled ratio materially below the claim contradicts it.
    if source == "claimed" {
        if let Some(s) = sampled_alpha {
            if s < alpha * (1.0 - 1e-6) - 1e-12 {
                status = CheckStatus::Failed;
            }
        }
    }
    if alpha <= threshold {
        status = CheckStatus::Failed;
    }
    Ok(ThresholdCheck {
        status,
        alpha,
        alpha_source: source,
        threshold,
        margin: alpha - threshold,
        sampled_alpha,
        negative_pairs: est.negative_pairs,
    })
}

fn unit(v: &DVector<f64>, n: &NonlinearMap) -> Option<DVector<f64>> {
    let nv = n.norm(v);
    if nv < 1e-14 {
        None
    } else {
        Some(v / nv)
    }
}

/// Evaluates sign condition (ii) and recession condition (iii) on a ray set.
///
/// Two discharge routes:
/// - path A: a coercivity constant a > 0 with ψ(u) ≥ a‖u‖² sampled on scaled
///   rays certifies both at every level;
/// - path B: each sampled ray's radial upper bound must clear
///   `B = γ‖h‖/(δ²α − γ)`, and on kernel rays it must additionally exceed
///   `⟨h,u⟩ + B` in the limit. A kernel ray failing that is definitive.
pub fn check_sign_and_recession(
    split: &SpectralSplit,
    n: &NonlinearMap,
    h: &DVector<f64>,
    alpha: f64,
    rays: &[(String, DVector<f64>)],
) -> Result<SignRecessionCheck> {
    let delta = split.delta();
    let gamma = split.gamma();
    let norm_h = n.norm(h);
    let denom = if delta.is_infinite() {
        f64::INFINITY
    } else {
        delta * delta * alpha - gamma
    };
    if denom <= 0.0 {
        return Err(Error::InvalidParameter(
            "sign bound needs δ²α > γ".into(),
        ));
    }
    let sign_bound = if denom.is_infinite() {
        0.0
    } else {
        gamma * norm_h / denom
    };

    if norm_h < 1e-300 && split.kernel_dim() == 0 {
        return Ok(SignRecessionCheck {
            status_sign: CheckStatus::NotApplicable,
            status_recession: CheckStatus::NotApplicable,
            coercivity_constant: None,
            sign_bound,
            rays: Vec::new(),
            kernel_counterexample: None,
        });
    }

    // Path A: sample ψ(tu)/t² along scaled rays; a uniform positive floor is
    // a coercivity certificate.
    let schedule = default_t_schedule();
    let mut coercivity = f64::INFINITY;
    for (_, ray) in rays {
        let Some(u) = unit(ray, n) else { continue };
        for &t in schedule.iter().take(20) {
            let v = &u * t;
            coercivity = coercivity.min(n.psi(&v) / (t * t));
            if coercivity <= 0.0 {
                break;
            }
        }
        if coercivity <= 0.0 {
            break;
        }
    }
    let coercivity_constant = if coercivity.is_finite() && coercivity > 1e-12 {
        Some(coercivity)
    } else {
        None
    };

    let kernel_labels: std::collections::HashSet<&str> = rays
        .iter()
        .filter(|(_, v)| {
            unit(v, n)
                .map(|u| {
                    let pm = split.project(&u, crate::operator::Subspace::Minus).unwrap();
                    let pk = split.project(&u, crate::operator::Subspace::Kernel).unwrap();
                    n.norm(&pm) < 1e-9 && n.norm(&pk) > 1.0 - 1e-9
                })
                .unwrap_or(false)
        })
        .map(|(l, _)| l.as_str())
        .collect();

    let mut ray_checks = Vec::with_capacity(rays.len());
    let mut sign_failed = false;
    let mut kernel_counterexample = None;
    for (label, ray) in rays {
        let Some(u) = unit(ray, n) else { continue };
        let cap = default_divergence_cap(n, &u);
        let rec = radial_recession(n, &u, &schedule, cap)?;
        let (radial_sup, sup_val) = match rec.radial_upper_bound {
            RadialValue::Diverged => (None, f64::INFINITY),
            RadialValue::Finite(v) => (Some(v), v),
        };
        let is_kernel = kernel_labels.contains(label.as_str());
        let needs = if is_kernel {
            n.dot(h, &u) + sign_bound
        } else {
            sign_bound
        };
        let clears = sup_val > needs + 1e-12 || (sup_val >= needs && sign_bound == 0.0 && !is_kernel);
        if !clears {
            if is_kernel && rec.settled {
                // Finite, settled radial limit below the needed level on a
                // kernel direction: a definite counterexample to (iii).
                kernel_counterexample = Some(label.clone());
            }
            sign_failed = true;
        }
        ray_checks.push(RayCheck {
            label: label.clone(),
            radial_sup,
            h_pairing: if is_kernel { Some(n.dot(h, &u)) } else { None },
            clears_bound: clears,
        });
    }

    let (status_sign, status_recession) = if let Some(a) = coercivity_constant {
        let _ = a;
        if sign_failed {
            // Coercivity sample and ray sample disagree; trust the failure.
            (CheckStatus::Failed, CheckStatus::Failed)
        } else {
            (CheckStatus::Certified, CheckStatus::Certified)
        }
    } else if kernel_counterexample.is_some() {
        (CheckStatus::Failed, CheckStatus::Failed)
    } else if sign_failed {
        (CheckStatus::Failed, CheckStatus::Consistent)
    } else {
        let rec_status = if kernel_labels.is_empty() {
            CheckStatus::NotApplicable
        } else {
            CheckStatus::Consistent
        };
        (CheckStatus::Consistent, rec_status)
    };

    Ok(SignRecessionCheck {
        status_sign,
        status_recession,
        coercivity_constant,
        sign_bound,
        rays: ray_checks,
        kernel_counterexample,
    })
}

/// Default ray family: kernel basis vectors, ±h/‖h‖, and 20 seeded random
/// unit directions.
pub fn default_rays(
    split: &SpectralSplit,
    n: &NonlinearMap,
    h: &DVector<f64>,
    seed: u64,
) -> Vec<(String, DVector<f64>)> {
    let mut rays = Vec::new();
    for (i, v) in split.kernel_basis().into_iter().enumerate() {
        rays.push((format!("kernel_{i}"), v));
    }
    if n.norm(h) > 1e-14 {
        rays.push(("h_plus".into(), h.clone()));
        rays.push(("h_minus".into(), -h));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..20 {
        let v = DVector::from_fn(split.dim(), |_, _| rng.random_range(-1.0..1.0));
        if v.norm() > 1e-9 {
            rays.push((format!("random_{i}"), v));
        }
    }
    rays
}

/// Runs every check and aggregates.
pub fn check_all(
    split: &SpectralSplit,
    n: &NonlinearMap,
    h: &DVector<f64>,
    alpha_hint: Option<f64>,
    seed: u64,
) -> Result<HypothesisReport> {
    if n.dim() != split.dim() || h.len() != split.dim() {
        return Err(Error::DimensionMismatch {
            expected: split.dim(),
            got: n.dim().max(h.len()),
        });
    }
    let spectral = check_spectral(split);
    let threshold = check_threshold(split, n, alpha_hint, seed)?;
    let rays = default_rays(split, n, h, seed ^ 0x5EED);
    let sign_recession = if threshold.margin > 0.0 {
        check_sign_and_recession(split, n, h, threshold.alpha, &rays)?
    } else {
        // Without δ²α > γ the sign bound is undefined; report the rays as
        // not applicable rather than erroring the whole report.
        SignRecessionCheck {
            status_sign: CheckStatus::NotApplicable,
            status_recession: CheckStatus::NotApplicable,
            coercivity_constant: None,
            sign_bound: f64::NAN,
            rays: Vec::new(),
            kernel_counterexample: None,
        }
    };
    let all_ok = spectral.status.is_ok()
        && threshold.status.is_ok()
        && sign_recession.status_sign.is_ok()
        && sign_recession.status_recession.is_ok();
    Ok(HypothesisReport {
        dim: split.dim(),
        norm_h: n.norm(h),
        spectral,
        threshold,
        sign_recession,
        all_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::ScalarProfile;
    use crate::operator::{decompose, SelfAdjointOperator};

    fn setup(diag: &[f64], c: f64) -> (SpectralSplit, NonlinearMap) {
        let op = SelfAdjointOperator::diagonal(diag);
        let split = decompose(&op, 1e-10).unwrap();
        let profile = ScalarProfile::linear(c).unwrap();
        let n =
            NonlinearMap::superposition(profile, DVector::from_element(diag.len(), 1.0)).unwrap();
        (split, n)
    }

    #[test]
    fn compliant_linear_problem_passes_everything() {
        // diag(-1, 0, 2): δ = γ = 1, threshold 1; f(t) = 2t gives α = 1/2…
        // too small. f(t) = t/2 gives α = 2 > 1 and ψ = ‖u‖²/4 coercive.
        let (split, n) = setup(&[-1.0, 0.0, 2.0], 0.5);
        let h = DVector::from_vec(vec![1.0, 0.5, -1.0]);
        let report = check_all(&split, &n, &h, None, 7).unwrap();
        assert!(report.all_ok, "{}", report.to_json().unwrap());
        assert_eq!(report.spectral.delta, Some(1.0));
        assert_eq!(report.spectral.gamma, 1.0);
        assert_eq!(report.spectral.kernel_dim, 1);
        assert_eq!(report.threshold.status, CheckStatus::Certified);
        assert!((report.threshold.alpha - 2.0).abs() < 1e-12);
        assert_eq!(report.sign_recession.status_sign, CheckStatus::Certified);
        assert!(report.sign_recession.coercivity_constant.unwrap() > 0.2);
    }

    #[test]
    fn threshold_violation_fails() {
        // f(t) = 2t: α = 1/2 < γ/δ² = 1.
        let (split, n) = setup(&[-1.0, 0.0, 2.0], 2.0);
        let h = DVector::from_element(3, 1.0);
        let report = check_all(&split, &n, &h, None, 7).unwrap();
        assert_eq!(report.threshold.status, CheckStatus::Failed);
        assert!(!report.all_ok);
    }

    #[test]
    fn bounded_nonlinearity_fails_recession_on_kernel_ray() {
        // tanh saturates at 1 < ⟨h, e₂⟩ = 5: the kernel ray cannot clear
        // ⟨h,u⟩ + B.
        let op = SelfAdjointOperator::diagonal(&[-1.0, 0.0, 2.0]);
        let split = decompose(&op, 1e-10).unwrap();
        let n = NonlinearMap::componentwise(
            3,
            DVector::from_element(3, 1.0),
            |t: f64| 2.0 * t.tanh(),
            Some(|t: f64| 2.0 / t.cosh().powi(2)),
            Some(2.0),
        )
        .unwrap();
        let h = DVector::from_vec(vec![0.0, 5.0, 0.0]);
        let report = check_all(&split, &n, &h, Some(2.0), 7).unwrap();
        assert!(!report.all_ok);
        assert_eq!(report.sign_recession.status_recession, CheckStatus::Failed);
        assert!(report.sign_recession.kernel_counterexample.is_some());
    }

    #[test]
    fn no_negative_spectrum_means_zero_threshold() {
        let (split, n) = setup(&[0.0, 1.0, 3.0], 1.0);
        let h = DVector::from_vec(vec![0.1, 0.0, 0.0]);
        let report = check_all(&split, &n, &h, None, 3).unwrap();
        assert_eq!(report.spectral.delta, None);
        assert_eq!(report.spectral.threshold, 0.0);
        assert!(report.threshold.margin > 0.0);
        assert!(report.all_ok, "{}", report.to_json().unwrap());
    }

    #[test]
    fn non_monotone_map_reports_negative_pairs() {
        let n = NonlinearMap::componentwise(
            2,
            DVector::from_element(2, 1.0),
            |t: f64| -t,
            Some(|_| -1.0),
            None,
        )
        .unwrap();
        let op = SelfAdjointOperator::diagonal(&[-1.0, 2.0]);
        let split = decompose(&op, 1e-10).unwrap();
        let report = check_all(&split, &n, &DVector::zeros(2), None, 1).unwrap();
        assert_eq!(report.threshold.status, CheckStatus::Failed);
        assert!(report.threshold.negative_pairs > 0);
    }

    #[test]
    fn report_serializes_infinite_delta_as_null() {
        let (split, n) = setup(&[0.0, 1.0], 1.0);
        let report = check_all(&split, &n, &DVector::zeros(2), None, 1).unwrap();
        let json = report.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(v["spectral"]["delta"].is_null());
    }
}
