// Copyright 2026 HamForge Contributors
// SPDX-License-Identifier: Apache-2.0

//! Two-spin operator engineering with collective rotations.
//!
//! A natural Hamiltonian H_nat is toggled by a set of collective rotations
//! R_k for fractions w_k of the cycle; to first order the cycle realizes
//! Σ_k w_k R_k H_nat R_k†. Rotations mix the m components of each rank l
//! through a Wigner matrix D^l, which is extracted here numerically from
//! the tabulated tensors rather than from closed formulas.

use ndarray::{Array1, Array2};
use ndarray_linalg::LeastSquaresSvd;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{
    collective_spin, decompose, expm_hermitian, hs_inner, spherical_tensor, tensor_keys, Axis, Operator,
    TensorCoefficients, TensorKey, TensorLabel, C64,
};

/// Collective rotation exp(−i·angle·n̂·ΣS) applied for a fraction of the
/// cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationStep {
    pub axis: [f64; 3],
    pub angle: f64,
    pub duration_weight: f64,
}

impl RotationStep {
    /// Normalizes `axis`; a zero axis is only accepted with a zero angle.
    pub fn new(axis: [f64; 3], angle: f64, duration_weight: f64) -> Result<Self> {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if !(duration_weight >= 0.0) || !angle.is_finite() {
            return Err(Error::InvalidInput(
                "rotation needs a finite angle and nonnegative weight".into(),
            ));
        }
        let axis = if norm > 0.0 {
            [axis[0] / norm, axis[1] / norm, axis[2] / norm]
        } else if angle == 0.0 {
            [0.0, 0.0, 1.0]
        } else {
            return Err(Error::InvalidInput("rotation axis must be nonzero".into()));
        };
        Ok(Self {
            axis,
            angle,
            duration_weight,
        })
    }

    pub fn identity() -> Self {
        Self {
            axis: [0.0, 0.0, 1.0],
            angle: 0.0,
            duration_weight: 1.0,
        }
    }

    pub fn about(axis: [f64; 3], angle: f64) -> Result<Self> {
        Self::new(axis, angle, 1.0)
    }

    /// The unitary on `spins` spins.
    pub fn operator(&self, spins: usize) -> Result<Operator> {
        let [x, y, z] = self.axis;
        let gen = collective_spin(spins, Axis::X)?
            .scale(x)
            .add(&collective_spin(spins, Axis::Y)?.scale(y))?
            .add(&collective_spin(spins, Axis::Z)?.scale(z))?;
        expm_hermitian(&gen, self.angle)
    }
}

/// R T R†.
pub fn rotate_tensor(step: &RotationStep, t: &Operator) -> Result<Operator> {
    let r = step.operator(t.spins())?;
    r.dot(t)?.dot(&r.dagger())
}

fn rank_keys(l: i32, label: TensorLabel) -> Result<Vec<TensorKey>> {
    let keys: Vec<TensorKey> = tensor_keys()
        .into_iter()
        .filter(|k| k.l == l && k.label == label)
        .collect();
    if keys.is_empty() {
        return Err(Error::InvalidTensor {
            l,
            m: 0,
            label: label.as_str().into(),
        });
    }
    Ok(keys)
}

/// Label used for rank `l` when none is given: the pair tensors for ranks 0
/// and 2, spin a for rank 1.
pub fn default_label(l: i32) -> TensorLabel {
    if l == 1 {
        TensorLabel::A
    } else {
        TensorLabel::Pair
    }
}

/// D^l in the basis of unit-norm tensors, rows and columns ordered m = l
/// down to −l: R T̂_{l,m} R† = Σ_{m'} D_{m',m} T̂_{l,m'}.
pub fn wigner_coeffs(step: &RotationStep, l: i32) -> Result<Array2<C64>> {
    wigner_coeffs_for(step, l, default_label(l))
}

pub fn wigner_coeffs_for(step: &RotationStep, l: i32, label: TensorLabel) -> Result<Array2<C64>> {
    let keys = rank_keys(l, label)?;
    let unit: Vec<Operator> = keys
        .iter()
        .map(|k| {
            let t = spherical_tensor(k.l, k.m, k.label)?;
            let norm = hs_inner(&t, &t).re.sqrt();
            Ok(t.scale(1.0 / norm))
        })
        .collect::<Result<_>>()?;
    let r = step.operator(2)?;
    let rd = r.dagger();
    let d = keys.len();
    let mut out = Array2::zeros((d, d));
    for (c, t) in unit.iter().enumerate() {
        let rotated = r.dot(t)?.dot(&rd)?;
        for (row, u) in unit.iter().enumerate() {
            out[[row, c]] = hs_inner(u, &rotated);
        }
    }
    Ok(out)
}

/// Weight of a rotated tensor on ranks other than its own.
pub fn rank_leakage(step: &RotationStep, key: TensorKey) -> Result<f64> {
    let t = spherical_tensor(key.l, key.m, key.label)?;
    let co = decompose(&rotate_tensor(step, &t)?)?;
    Ok(co
        .entries
        .iter()
        .filter(|(k, _)| k.l != key.l)
        .map(|(_, c)| c.norm())
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqRecipeReport {
    pub t1: f64,
    pub t2: f64,
    /// |T₂₀ coefficient| of t₁T₂₀ + t₂R T₂₀ R†.
    pub t20_coefficient: f64,
    /// ‖S/‖S‖ − H_DQ/‖H_DQ‖‖_F for the weighted sum S.
    pub residual: f64,
    pub coefficients: TensorCoefficients,
}

/// Secular dipolar coupling (∝ T₂₀) held for t₁, then for t₂ after a π/2
/// rotation about y.
pub fn dq_recipe(t1: f64, t2: f64) -> Result<DqRecipeReport> {
    let t20 = spherical_tensor(2, 0, TensorLabel::Pair)?;
    let ry = RotationStep::about([0.0, 1.0, 0.0], std::f64::consts::FRAC_PI_2)?;
    let sum = t20.scale(t1).add(&rotate_tensor(&ry, &t20)?.scale(t2))?;
    let coefficients = decompose(&sum)?;
    let t20_coefficient = coefficients.get(TensorKey::new(2, 0, TensorLabel::Pair)).norm();
    let net = crate::lattice::unit_chain(2)?;
    let dq = crate::ops::build_hamiltonian(&crate::ops::HamiltonianKind::DoubleQuantum, &net)?;
    let residual = sum.scale(1.0 / sum.norm()).sub(&dq.scale(1.0 / dq.norm()))?.norm();
    Ok(DqRecipeReport {
        t1,
        t2,
        t20_coefficient,
        residual,
        coefficients,
    })
}

/// The two-interval recipe with t₁ = t₂/2.
pub fn verify_dq_recipe() -> Result<DqRecipeReport> {
    dq_recipe(0.5, 1.0)
}

/// The 24 proper rotations of the cube: identity, quarter and half turns
/// about the coordinate axes, half turns about face diagonals, and third
/// turns about body diagonals.
pub fn clifford_rotations() -> Vec<RotationStep> {
    use std::f64::consts::PI;
    let mut out = vec![RotationStep::identity()];
    let mk = |axis: [f64; 3], angle: f64| RotationStep::about(axis, angle).expect("nonzero axis");
    for axis in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        for q in 1..=3 {
            out.push(mk(axis, q as f64 * PI / 2.0));
        }
    }
    for axis in [
        [1.0, 1.0, 0.0],
        [1.0, -1.0, 0.0],
        [1.0, 0.0, 1.0],
        [1.0, 0.0, -1.0],
        [0.0, 1.0, 1.0],
        [0.0, 1.0, -1.0],
    ] {
        out.push(mk(axis, PI));
    }
    for axis in [
        [1.0, 1.0, 1.0],
        [1.0, 1.0, -1.0],
        [1.0, -1.0, 1.0],
        [-1.0, 1.0, 1.0],
    ] {
        for q in 1..=2 {
            out.push(mk(axis, q as f64 * 2.0 * PI / 3.0));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationWeights {
    pub weights: Vec<f64>,
    /// ‖Σ w_k R_k H_nat R_k† − H_tar‖_F.
    pub residual: f64,
}

/// Nonnegative weights w minimizing ‖Σ w_k R_k H_nat R_k† − H_tar‖_F.
///
/// The tabulated tensors span the two-spin operator space, so matching the
/// operators matches every tensor condition at once; the Frobenius norm is
/// the residual of those conditions in the unit-norm tensor basis.
pub fn solve_rotation_weights(
    h_nat: &Operator,
    h_tar: &Operator,
    candidates: &[RotationStep],
) -> Result<RotationWeights> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if h_nat.spins() != h_tar.spins() {
        return Err(Error::DimensionMismatch(
            "natural and target operators act on different spin counts".into(),
        ));
    }
    let spins = h_nat.spins();
    let d2 = h_nat.dim() * h_nat.dim();
    let mut a = Array2::<f64>::zeros((2 * d2, candidates.len()));
    for (k, step) in candidates.iter().enumerate() {
        let r = step.operator(spins)?;
        let toggled = r.dot(h_nat)?.dot(&r.dagger())?;
        for (i, z) in toggled.matrix().iter().enumerate() {
            a[[2 * i, k]] = z.re;
            a[[2 * i + 1, k]] = z.im;
        }
    }
    let mut b = Array1::<f64>::zeros(2 * d2);
    for (i, z) in h_tar.matrix().iter().enumerate() {
        b[2 * i] = z.re;
        b[2 * i + 1] = z.im;
    }
    let w = nnls(&a, &b)?;
    let r = &a.dot(&w) - &b;
    Ok(RotationWeights {
        weights: w.to_vec(),
        residual: r.dot(&r).sqrt(),
    })
}

/// Lawson–Hanson active-set solver for min ‖Ax − b‖ subject to x ≥ 0.
pub fn nnls(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.ncols();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale * (a.nrows().max(n) as f64);
    let mut x = Array1::<f64>::zeros(n);
    let mut passive = vec![false; n];
    for _ in 0..(3 * n + 10) {
        let grad = a.t().dot(&(b - &a.dot(&x)));
        let pick = (0..n)
            .filter(|&j| !passive[j] && grad[j] > tol)
            .max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(j) = pick else {
            return Ok(x);
        };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = Array2::from_shape_fn((a.nrows(), idx.len()), |(r, c)| a[[r, idx[c]]]);
            let z_sub = sub.least_squares(b)?.solution;
            if z_sub.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (c, &k) in idx.iter().enumerate() {
                    x[k] = z_sub[c];
                }
                break;
            }
            // step back toward the feasible region
            let mut alpha = f64::INFINITY;
            for (c, &k) in idx.iter().enumerate() {
                if z_sub[c] <= 0.0 {
                    alpha = alpha.min(x[k] / (x[k] - z_sub[c]));
                }
            }
            for (c, &k) in idx.iter().enumerate() {
                x[k] += alpha * (z_sub[c] - x[k]);
                if x[k] <= tol {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn t(l: i32, m: i32) -> Operator {
        spherical_tensor(l, m, TensorLabel::Pair).unwrap()
    }

    #[test]
    fn identity_rotation_gives_identity_d() {
        for l in 0..=2 {
            let d = wigner_coeffs(&RotationStep::identity(), l).unwrap();
            for ((r, c), z) in d.indexed_iter() {
                let e = if r == c { 1.0 } else { 0.0 };
                assert!((z - C64::new(e, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn rank_one_labels_share_d() {
        let step = RotationStep::about([0.3, -0.5, 0.8], 1.1).unwrap();
        let a = wigner_coeffs_for(&step, 1, TensorLabel::A).unwrap();
        let b = wigner_coeffs_for(&step, 1, TensorLabel::B).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn y_quarter_turn_of_t20() {
        let step = RotationStep::about([0.0, 1.0, 0.0], PI / 2.0).unwrap();
        let co = decompose(&rotate_tensor(&step, &t(2, 0)).unwrap()).unwrap();
        let get = |m| co.get(TensorKey::new(2, m, TensorLabel::Pair));
        assert!((get(0) - C64::new(-0.5, 0.0)).norm() < 1e-12);
        let s = (3.0f64 / 8.0).sqrt();
        assert!((get(2) - C64::new(s, 0.0)).norm() < 1e-12);
        assert!((get(-2) - C64::new(s, 0.0)).norm() < 1e-12);
        assert!(get(1).norm() < 1e-12 && get(-1).norm() < 1e-12);
    }

    #[test]
    fn dq_recipe_cancels_t20() {
        let r = verify_dq_recipe().unwrap();
        assert!(r.t20_coefficient < 1e-12);
        assert!(r.residual < 1e-12, "{}", r.residual);
        let broken = dq_recipe(1.0, 1.0).unwrap();
        assert!(broken.t20_coefficient > 0.1);
    }

    #[test]
    fn clifford_set_is_a_group_of_24() {
        let rots = clifford_rotations();
        assert_eq!(rots.len(), 24);
        let ops: Vec<Operator> = rots.iter().map(|r| r.operator(1).unwrap()).collect();
        // distinct up to global phase
        for i in 0..24 {
            for j in (i + 1)..24 {
                let overlap = hs_inner(&ops[i], &ops[j]).norm() / 2.0;
                assert!(overlap < 1.0 - 1e-9, "{i} {j}");
            }
        }
    }

    #[test]
    fn weights_for_dq_from_dipolar() {
        let cands = [
            RotationStep::identity(),
            RotationStep::about([0.0, 1.0, 0.0], PI / 2.0).unwrap(),
        ];
        let net = crate::lattice::unit_chain(2).unwrap();
        let dq = crate::ops::build_hamiltonian(&crate::ops::HamiltonianKind::DoubleQuantum, &net).unwrap();
        let sol = solve_rotation_weights(&t(2, 0), &dq, &cands).unwrap();
        assert!(sol.residual < 1e-9);
        assert!((sol.weights[1] / sol.weights[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_identity_component() {
        let target = t(2, 0).add(&t(0, 0)).unwrap();
        let sol = solve_rotation_weights(&t(2, 0), &target, &clifford_rotations()).unwrap();
        assert!(sol.residual > 0.5);
        assert!(matches!(
            solve_rotation_weights(&t(2, 0), &target, &[]),
            Err(Error::EmptyCandidates)
        ));
    }

    #[test]
    fn nnls_small_cases() {
        let a = Array2::from_shape_vec((3, 2), vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let x = nnls(&a, &Array1::from(vec![1.0, 2.0, 3.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
        let x = nnls(&a, &Array1::from(vec![-1.0, 2.0, 1.0])).unwrap();
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 1.5).abs() < 1e-12);
    }
}
