// Copyright 2026 HamForge Contributors
// SPDX-License-Identifier: Apache-2.0

mod common;

use std::f64::consts::PI;

use common::hermitian_matrix;
use hamforge::ops::{spherical_tensor, tensor_keys, Operator, TensorLabel, C64};
use hamforge::openg::{
    clifford_rotations, nnls, rank_leakage, rotate_tensor, solve_rotation_weights, wigner_coeffs, RotationStep,
};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn rotation() -> impl Strategy<Value = RotationStep> {
    ((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 0.0f64..(2.0 * PI))
        .prop_filter("nonzero axis", |((x, y, z), _)| x * x + y * y + z * z > 1e-4)
        .prop_map(|((x, y, z), angle)| RotationStep::about([x, y, z], angle).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn rotations_preserve_rank(step in rotation()) {
        for key in tensor_keys() {
            prop_assert!(rank_leakage(&step, key).unwrap() < 1e-9);
        }
    }

    #[test]
    fn scalar_tensor_is_rotation_invariant(step in rotation()) {
        let t00 = spherical_tensor(0, 0, TensorLabel::Pair).unwrap();
        prop_assert!(rotate_tensor(&step, &t00).unwrap().max_diff(&t00) < 1e-12);
    }

    #[test]
    fn wigner_matrices_are_unitary(step in rotation()) {
        for l in 0..=2 {
            let d = wigner_coeffs(&step, l).unwrap();
            let dd = d.t().mapv(|z| z.conj()).dot(&d);
            let eye = Array2::<C64>::eye(d.nrows());
            let dev = (&dd - &eye).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            prop_assert!(dev < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rotation_fit_is_covariant_under_the_cube_group(
        nat in hermitian_matrix(4),
        tar in hermitian_matrix(4),
        pick in 0usize..24,
    ) {
        let nat = Operator::general(2, nat).unwrap();
        let tar = Operator::general(2, tar).unwrap();
        let group = clifford_rotations();
        let r = group[pick].operator(2).unwrap();
        let base = solve_rotation_weights(&nat, &tar, &group).unwrap();
        let moved = solve_rotation_weights(&nat.conjugate_by(&r).unwrap(), &tar.conjugate_by(&r).unwrap(), &group).unwrap();
        prop_assert!((base.residual - moved.residual).abs() < 1e-8 * base.residual.max(1.0));
        prop_assert!(base.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn nnls_is_feasible_and_no_worse_than_zero(a in hermitian_matrix(4), b in prop::collection::vec(-1.0f64..1.0, 4)) {
        let a = a.mapv(|z| z.re);
        let b = Array1::from(b);
        let x = nnls(&a, &b).unwrap();
        prop_assert!(x.iter().all(|&v| v >= 0.0));
        let r = &a.dot(&x) - &b;
        prop_assert!(r.dot(&r) <= b.dot(&b) + 1e-12);
        // optimality: no descent direction on the free or zero coordinates
        let grad = a.t().dot(&r);
        for (j, &xj) in x.iter().enumerate() {
            if xj > 0.0 {
                prop_assert!(grad[j].abs() < 1e-8);
            } else {
                prop_assert!(grad[j] > -1e-8);
            }
        }
    }
}
