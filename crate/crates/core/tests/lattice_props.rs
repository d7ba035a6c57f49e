// Copyright 2026 HamForge Contributors
// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{dipolar_network, jittered_positions, unit_geometry};
use hamforge::lattice::{
    apply_gradient, perturb_positions, GradientConfig, PerturbTarget, SpinNetwork,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn couplings_are_symmetric_with_zero_diagonal(net in dipolar_network(6)) {
        let c = net.couplings();
        for i in 0..net.len() {
            prop_assert_eq!(c[[i, i]], 0.0);
            for j in 0..net.len() {
                prop_assert_eq!(c[[i, j]], c[[j, i]]);
                prop_assert!(c[[i, j]].is_finite());
            }
        }
    }

    #[test]
    fn couplings_scale_as_inverse_cube(positions in jittered_positions(5), s in 0.2f64..5.0) {
        let n = positions.len();
        let base = SpinNetwork::dipolar(positions.clone(), (0..n).collect(), unit_geometry(1.0)).unwrap();
        let scaled = SpinNetwork::dipolar(positions, (0..n).collect(), unit_geometry(s)).unwrap();
        for i in 0..n {
            for j in (i + 1)..n {
                let expect = base.coupling(i, j) / s.powi(3);
                prop_assert!((scaled.coupling(i, j) - expect).abs() <= 1e-12 * expect.abs());
            }
        }
    }

    #[test]
    fn gradient_is_idempotent(net in dipolar_network(5), w in 0.1f64..100.0, w0 in -50.0f64..50.0) {
        let g = GradientConfig::along_x(w, w0).unwrap();
        let once = apply_gradient(&net, &g);
        let twice = apply_gradient(&once, &g);
        prop_assert_eq!(once.frequencies(), twice.frequencies());
        for (j, p) in once.positions().iter().enumerate() {
            prop_assert!((once.frequencies()[j] - (p[0] * w - w0)).abs() <= 1e-12 * (p[0] * w).abs().max(1.0));
        }
    }

    #[test]
    fn disorder_keeps_networks_physical(net in dipolar_network(5), delta in 0.0f64..0.3, seed in any::<u64>()) {
        for target in [PerturbTarget::AllSpins, PerturbTarget::ChainMirror] {
            let p = perturb_positions(&net, delta, seed, target).unwrap();
            prop_assert_eq!(p.len(), net.len());
            prop_assert_eq!(p.chain(), net.chain());
            let c = p.couplings();
            for i in 0..p.len() {
                for j in 0..p.len() {
                    prop_assert_eq!(c[[i, j]], c[[j, i]]);
                }
            }
            let again = perturb_positions(&net, delta, seed, target).unwrap();
            prop_assert_eq!(again.positions(), p.positions());
        }
    }
}

#[test]
fn zero_disorder_is_identity() {
    let net = hamforge::lattice::unit_chain(5).unwrap();
    let p = perturb_positions(&net, 0.0, 3, PerturbTarget::AllSpins).unwrap();
    assert_eq!(p.positions(), net.positions());
}
