// Copyright 2026 HamForge Contributors
// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use hamforge::lattice::{CouplingModel, Geometry, PhysicalConstants, SpinNetwork};
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;

pub fn unit_geometry(spacing: f64) -> Geometry {
    Geometry {
        spacing,
        constants: PhysicalConstants::unit(),
        model: CouplingModel::IsotropicR3,
    }
}

/// Spins at x = 1..n with transverse offsets below 0.4, so no two coincide.
pub fn jittered_positions(max_spins: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    (3..=max_spins).prop_flat_map(|n| {
        prop::collection::vec((-0.4f64..0.4, -0.4f64..0.4), n).prop_map(|offsets| {
            offsets
                .into_iter()
                .enumerate()
                .map(|(j, (y, z))| [j as f64 + 1.0, y, z])
                .collect()
        })
    })
}

pub fn dipolar_network(max_spins: usize) -> impl Strategy<Value = SpinNetwork> {
    jittered_positions(max_spins).prop_map(|p| {
        let n = p.len();
        SpinNetwork::dipolar(p, (0..n).collect(), unit_geometry(1.0)).unwrap()
    })
}

/// Dipolar network with arbitrary frequencies attached.
pub fn tagged_network(max_spins: usize) -> impl Strategy<Value = SpinNetwork> {
    dipolar_network(max_spins).prop_flat_map(|net| {
        let n = net.len();
        prop::collection::vec(-30.0f64..30.0, n)
            .prop_map(move |w| net.clone().with_frequencies(w).unwrap())
    })
}

/// Nearest-neighbour chain with the given couplings.
pub fn nn_chain(couplings: &[f64]) -> SpinNetwork {
    let n = couplings.len() + 1;
    let mut c = Array2::zeros((n, n));
    for (j, &b) in couplings.iter().enumerate() {
        c[[j, j + 1]] = b;
        c[[j + 1, j]] = b;
    }
    let positions = (0..n).map(|j| [j as f64 + 1.0, 0.0, 0.0]).collect();
    SpinNetwork::new(positions, c, (0..n).collect()).unwrap()
}

/// Random dense complex matrix of side `dim`.
pub fn complex_matrix(dim: usize) -> impl Strategy<Value = Array2<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim).prop_map(move |v| {
        Array2::from_shape_vec(
            (dim, dim),
            v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect(),
        )
        .unwrap()
    })
}

pub fn hermitian_matrix(dim: usize) -> impl Strategy<Value = Array2<Complex64>> {
    complex_matrix(dim).prop_map(|a| {
        let ad = a.t().mapv(|z| z.conj());
        (&a + &ad).mapv(|z| z * 0.5)
    })
}
