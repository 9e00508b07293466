//! Property-based tests for the structural invariants of the core crate.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use resonant_core::nonlinearity::{radial_recession, NonlinearMap, ScalarProfile};
use resonant_core::operator::{decompose_auto, SelfAdjointOperator};
use resonant_core::solver::{solve_perturbed, SolveOptions};

fn symmetric_matrix(dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim * dim).prop_map(move |v| {
        let b = DMatrix::from_vec(dim, dim, v);
        (&b + b.transpose()) * 0.5
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Spectral split of any symmetric matrix reconstructs the operator and
    /// yields orthogonal complementary projectors.
    #[test]
    fn split_invariants(m in symmetric_matrix(8)) {
        let op = SelfAdjointOperator::new(m.clone(), 0.0).unwrap();
        let split = decompose_auto(&op).unwrap();
        let scale = m.abs().max().max(1.0);

        let p_minus = split.projector_minus();
        let p_plus = DMatrix::identity(8, 8) - &p_minus;
        prop_assert!((&p_minus * &p_minus - &p_minus).abs().max() <= 1e-10);
        prop_assert!((&p_minus - p_minus.transpose()).abs().max() <= 1e-10);
        prop_assert!((&p_minus * &p_plus).abs().max() <= 1e-10);

        // L = L·P₊ + L·P₋ reconstructs the matrix.
        let recon = &m * (&p_plus + &p_minus);
        prop_assert!((recon - &m).abs().max() <= 1e-9 * scale);

        // Every negative eigenvalue lies in [-γ, -δ].
        for &i in split.idx_minus() {
            let l = split.eigenvalues()[i];
            prop_assert!(l <= -split.delta() + 1e-12 * scale);
            prop_assert!(l >= -split.gamma() - 1e-12 * scale);
        }
    }

    /// ⟨N(tu), u⟩ is nondecreasing in t for monotone superposition maps.
    #[test]
    fn radial_trace_is_monotone(
        raw in prop::collection::vec(-1.0f64..1.0, 5),
        c in 0.1f64..2.0,
    ) {
        let u = DVector::from_vec(raw);
        prop_assume!(u.norm() > 1e-3);
        let u = &u / u.norm();
        let n = NonlinearMap::superposition(
            ScalarProfile::saturating(0.2 * c, c).unwrap(),
            DVector::from_element(5, 1.0),
        ).unwrap();
        let schedule: Vec<f64> = (0..=30).map(|k| (k as f64).exp2()).collect();
        let rec = radial_recession(&n, &u, &schedule, 1e15).unwrap();
        for w in rec.trace.windows(2) {
            prop_assert!(w[1].1 >= w[0].1 - 1e-9 * w[0].1.abs().max(1.0));
        }
    }

    /// The radial pairing is positively homogeneous: R(λu) = λ R(u) for
    /// bounded profiles, approximated at a large fixed radius.
    #[test]
    fn radial_pairing_homogeneity(
        raw in prop::collection::vec(-1.0f64..1.0, 4),
        lambda in 0.25f64..8.0,
    ) {
        let u = DVector::from_vec(raw);
        prop_assume!(u.norm() > 1e-3);
        let n = NonlinearMap::superposition(
            ScalarProfile::tanh(1.0).unwrap(),
            DVector::from_element(4, 1.0),
        ).unwrap();
        let r = |v: &DVector<f64>| n.dot(&n.apply(&(v * 1e9)), v);
        let base = r(&u);
        let scaled = r(&(&u * lambda));
        prop_assert!((scaled - lambda * base).abs() <= 1e-6 * (1.0 + lambda * base.abs()));
    }

    /// Perturbed solve on a diagonal operator with a linear profile matches
    /// the componentwise closed form.
    #[test]
    fn diagonal_closed_form(
        lneg in -3.0f64..-0.5,
        lpos in 0.5f64..3.0,
        c in 0.2f64..1.5,
        h in prop::collection::vec(-2.0f64..2.0, 3),
        eps in 0.01f64..1.0,
    ) {
        let lambdas = [lneg, 0.0, lpos];
        let op = SelfAdjointOperator::diagonal(&lambdas);
        let split = decompose_auto(&op).unwrap();
        // compliance: α = 1/c must beat γ/δ²
        prop_assume!(1.0 / c > split.threshold());
        let n = NonlinearMap::superposition(
            ScalarProfile::linear(c).unwrap(),
            DVector::from_element(3, 1.0),
        ).unwrap();
        let h = DVector::from_vec(h);
        let res = solve_perturbed(&split, &n, &h, eps, &SolveOptions::default()).unwrap();
        prop_assert!(res.converged);
        for i in 0..3 {
            let indicator = if lambdas[i] >= 0.0 { eps } else { 0.0 };
            let expect = h[i] / (lambdas[i] + indicator + c);
            prop_assert!((res.u[i] - expect).abs() <= 1e-8);
        }
    }
}
