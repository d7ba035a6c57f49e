// Copyright 2026 HamForge Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dense operators on n spin-1/2 particles.
//!
//! Basis: computational z basis with site 0 as the most significant bit; a
//! clear bit is spin up (S^z = +1/2).

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::SpinNetwork;

pub type C64 = Complex64;

/// Dense matrices are refused beyond this many spins.
pub const MAX_SPINS: usize = 14;

const HERMITIAN_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-8;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpTag {
    Hermitian,
    Unitary,
    General,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    spins: usize,
    mat: Array2<C64>,
    tag: OpTag,
}

pub fn check_spin_count(spins: usize) -> Result<()> {
    if spins > MAX_SPINS {
        return Err(Error::DimensionCap {
            spins,
            cap: MAX_SPINS,
        });
    }
    Ok(())
}

impl Operator {
    /// Wraps a matrix, verifying the tag.
    pub fn new(spins: usize, mat: Array2<C64>, tag: OpTag) -> Result<Self> {
        check_spin_count(spins)?;
        let dim = 1usize << spins;
        if mat.dim() != (dim, dim) {
            return Err(Error::DimensionMismatch(format!(
                "{:?} matrix for {spins} spins",
                mat.dim()
            )));
        }
        let op = Self { spins, mat, tag };
        match tag {
            OpTag::Hermitian => {
                let asym = op.hermitian_deviation();
                if asym > HERMITIAN_TOL * op.max_abs().max(f64::MIN_POSITIVE) {
                    return Err(Error::NotHermitian { asymmetry: asym });
                }
            }
            OpTag::Unitary => {
                let dev = op.unitary_deviation();
                if dev > UNITARY_TOL {
                    return Err(Error::NotUnitary { deviation: dev });
                }
            }
            OpTag::General => {}
        }
        Ok(op)
    }

    pub fn general(spins: usize, mat: Array2<C64>) -> Result<Self> {
        Self::new(spins, mat, OpTag::General)
    }

    pub fn identity(spins: usize) -> Result<Self> {
        check_spin_count(spins)?;
        Ok(Self {
            spins,
            mat: Array2::eye(1 << spins),
            tag: OpTag::Unitary,
        })
    }

    pub fn zeros(spins: usize) -> Result<Self> {
        check_spin_count(spins)?;
        let d = 1 << spins;
        Ok(Self {
            spins,
            mat: Array2::zeros((d, d)),
            tag: OpTag::Hermitian,
        })
    }

    pub fn spins(&self) -> usize {
        self.spins
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn tag(&self) -> OpTag {
        self.tag
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.mat
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let d = self.dim();
        let mut m = 0.0f64;
        for i in 0..d {
            for j in 0..=i {
                m = m.max((self.mat[[i, j]] - self.mat[[j, i]].conj()).norm());
            }
        }
        m
    }

    /// ‖A†A − I‖_max.
    pub fn unitary_deviation(&self) -> f64 {
        let p = self.dagger().mat.dot(&self.mat);
        p.indexed_iter().fold(0.0f64, |m, ((i, j), z)| {
            let target = if i == j { ONE } else { ZERO };
            m.max((z - target).norm())
        })
    }

    pub fn dagger(&self) -> Self {
        Self {
            spins: self.spins,
            mat: self.mat.t().mapv(|z| z.conj()),
            tag: self.tag,
        }
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.spins != other.spins {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {} spins",
                self.spins, other.spins
            )));
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let tag = if self.tag == OpTag::Unitary && other.tag == OpTag::Unitary {
            OpTag::Unitary
        } else {
            OpTag::General
        };
        Ok(Self {
            spins: self.spins,
            mat: self.mat.dot(&other.mat),
            tag,
        })
    }

    /// Linear combination `a·self + b·other`; Hermitian if both are and the
    /// scalars are real.
    pub fn combine(&self, a: C64, other: &Self, b: C64) -> Result<Self> {
        self.same_shape(other)?;
        let tag = if self.tag == OpTag::Hermitian
            && other.tag == OpTag::Hermitian
            && a.im == 0.0
            && b.im == 0.0
        {
            OpTag::Hermitian
        } else {
            OpTag::General
        };
        Ok(Self {
            spins: self.spins,
            mat: &self.mat * a + &other.mat * b,
            tag,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(ONE, other, ONE)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(ONE, other, -ONE)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            spins: self.spins,
            mat: &self.mat * C64::new(s, 0.0),
            tag: if self.tag == OpTag::Unitary { OpTag::General } else { self.tag },
        }
    }

    /// [A, B] = AB − BA.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self {
            spins: self.spins,
            mat: self.mat.dot(&other.mat) - other.mat.dot(&self.mat),
            tag: OpTag::General,
        })
    }

    pub fn trace(&self) -> C64 {
        self.mat.diag().sum()
    }

    /// U A U†, keeping the tag of `self`.
    pub fn conjugate_by(&self, u: &Self) -> Result<Self> {
        self.same_shape(u)?;
        let ud = u.mat.t().mapv(|z| z.conj());
        let mut mat = u.mat.dot(&self.mat).dot(&ud);
        if self.tag == OpTag::Hermitian {
            symmetrize(&mut mat);
        }
        Ok(Self {
            spins: self.spins,
            mat,
            tag: self.tag,
        })
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry-wise difference.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.mat
            .iter()
            .zip(other.mat.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}

fn symmetrize(mat: &mut Array2<C64>) {
    let d = mat.nrows();
    for i in 0..d {
        mat[[i, i]].im = 0.0;
        for j in 0..i {
            let avg = (mat[[i, j]] + mat[[j, i]].conj()) * 0.5;
            mat[[i, j]] = avg;
            mat[[j, i]] = avg.conj();
        }
    }
}

/// Bit mask of `site` among `spins` (site 0 is the MSB).
#[inline]
pub(crate) fn site_mask(spins: usize, site: usize) -> usize {
    1 << (spins - 1 - site)
}

/// S^z eigenvalue of `site` in basis state `state`.
#[inline]
pub(crate) fn sz_value(spins: usize, site: usize, state: usize) -> f64 {
    if state & site_mask(spins, site) == 0 {
        0.5
    } else {
        -0.5
    }
}

/// S^axis = σ^axis/2 on `site`, identity elsewhere; S^± = S^x ± iS^y.
pub fn spin_op(spins: usize, site: usize, axis: Axis) -> Result<Operator> {
    check_spin_count(spins)?;
    if site >= spins {
        return Err(Error::SiteOutOfRange { site, spins });
    }
    let d = 1usize << spins;
    let mask = site_mask(spins, site);
    let mut mat = Array2::zeros((d, d));
    for a in 0..d {
        let up = a & mask == 0;
        let flipped = a ^ mask;
        match axis {
            Axis::Z => mat[[a, a]] = C64::new(sz_value(spins, site, a), 0.0),
            Axis::X => mat[[flipped, a]] = C64::new(0.5, 0.0),
            // σ_y |↑⟩ = i|↓⟩, σ_y |↓⟩ = −i|↑⟩
            Axis::Y => mat[[flipped, a]] = C64::new(0.0, if up { 0.5 } else { -0.5 }),
            Axis::Plus => {
                if !up {
                    mat[[flipped, a]] = ONE;
                }
            }
            Axis::Minus => {
                if up {
                    mat[[flipped, a]] = ONE;
                }
            }
        }
    }
    let tag = match axis {
        Axis::Plus | Axis::Minus => OpTag::General,
        _ => OpTag::Hermitian,
    };
    Ok(Operator { spins, mat, tag })
}

/// Total Σ_i S_i^axis.
pub fn collective_spin(spins: usize, axis: Axis) -> Result<Operator> {
    let mut acc = Operator::zeros(spins)?.mat;
    for i in 0..spins {
        acc = acc + spin_op(spins, i, axis)?.mat;
    }
    let tag = match axis {
        Axis::Plus | Axis::Minus => OpTag::General,
        _ => OpTag::Hermitian,
    };
    Ok(Operator {
        spins,
        mat: acc,
        tag,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    /// Secular dipolar Σ b_ij (3S_i^zS_j^z − S_i·S_j).
    Dipolar,
    /// Σ b_ij (S_i^+S_j^+ + S_i^-S_j^-) = 2Σ b_ij (S_i^xS_j^x − S_i^yS_j^y).
    DoubleQuantum,
    /// Σ b_ij (S_i^+S_j^- + S_i^-S_j^+) = 2Σ b_ij (S_i^xS_j^x + S_i^yS_j^y).
    Xy,
    /// Σ ω_j S_j^z.
    Zeeman,
    /// Σ d_j (S_j^+S_{j+1}^+ + S_j^-S_{j+1}^-) along the chain; transports
    /// perfectly in π/(2d) for the parabolic profile.
    TargetDq(Vec<f64>),
}

/// A subset of computational basis states, used both for the full space
/// and for the parity sectors the dynamics exploits.
#[derive(Clone, Debug)]
pub(crate) struct Basis {
    pub spins: usize,
    pub states: Vec<usize>,
    lookup: Vec<u32>,
}

impl Basis {
    const ABSENT: u32 = u32::MAX;

    pub fn full(spins: usize) -> Self {
        let d = 1usize << spins;
        Self {
            spins,
            states: (0..d).collect(),
            lookup: (0..d as u32).collect(),
        }
    }

    pub fn from_states(spins: usize, states: Vec<usize>) -> Self {
        let mut lookup = vec![Self::ABSENT; 1 << spins];
        for (k, &s) in states.iter().enumerate() {
            lookup[s] = k as u32;
        }
        Self {
            spins,
            states,
            lookup,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    #[inline]
    pub fn index(&self, state: usize) -> Option<usize> {
        match self.lookup[state] {
            Self::ABSENT => None,
            k => Some(k as usize),
        }
    }
}

/// Accumulates two-body and one-body terms directly in a basis.
pub(crate) struct TermBuilder<'a> {
    basis: &'a Basis,
    pub mat: Array2<C64>,
}

impl<'a> TermBuilder<'a> {
    pub fn new(basis: &'a Basis) -> Self {
        let d = basis.len();
        Self {
            basis,
            mat: Array2::zeros((d, d)),
        }
    }

    pub fn z(&mut self, site: usize, coef: f64) {
        let n = self.basis.spins;
        for (k, &s) in self.basis.states.iter().enumerate() {
            self.mat[[k, k]] += coef * sz_value(n, site, s);
        }
    }

    pub fn zz(&mut self, i: usize, j: usize, coef: f64) {
        let n = self.basis.spins;
        for (k, &s) in self.basis.states.iter().enumerate() {
            self.mat[[k, k]] += coef * sz_value(n, i, s) * sz_value(n, j, s);
        }
    }

    /// `coef·S_i^+S_j^+ + conj(coef)·S_i^-S_j^-`.
    pub fn double_flip(&mut self, i: usize, j: usize, coef: C64) {
        let n = self.basis.spins;
        let (mi, mj) = (site_mask(n, i), site_mask(n, j));
        for (k, &s) in self.basis.states.iter().enumerate() {
            // both down: S+S+ raises to both up
            if s & mi != 0 && s & mj != 0 {
                if let Some(t) = self.basis.index(s ^ mi ^ mj) {
                    self.mat[[t, k]] += coef;
                    self.mat[[k, t]] += coef.conj();
                }
            }
        }
    }

    /// `coef·(S_i^+S_j^- + S_i^-S_j^+)`.
    pub fn flip_flop(&mut self, i: usize, j: usize, coef: f64) {
        let n = self.basis.spins;
        let (mi, mj) = (site_mask(n, i), site_mask(n, j));
        for (k, &s) in self.basis.states.iter().enumerate() {
            if (s & mi == 0) != (s & mj == 0) {
                if let Some(t) = self.basis.index(s ^ mi ^ mj) {
                    self.mat[[t, k]] += coef;
                }
            }
        }
    }
}

fn pairs(network: &SpinNetwork) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
    let n = network.len();
    (0..n).flat_map(move |i| {
        ((i + 1)..n).filter_map(move |j| {
            let b = network.coupling(i, j);
            (b != 0.0).then_some((i, j, b))
        })
    })
}

pub(crate) fn hamiltonian_in(
    kind: &HamiltonianKind,
    network: &SpinNetwork,
    basis: &Basis,
) -> Result<Array2<C64>> {
    let mut tb = TermBuilder::new(basis);
    match kind {
        HamiltonianKind::Dipolar => {
            // 3SzSz − S·S = 2SzSz − (S+S− + S−S+)/2
            for (i, j, b) in pairs(network) {
                tb.zz(i, j, 2.0 * b);
                tb.flip_flop(i, j, -0.5 * b);
            }
        }
        HamiltonianKind::DoubleQuantum => {
            for (i, j, b) in pairs(network) {
                tb.double_flip(i, j, C64::new(b, 0.0));
            }
        }
        HamiltonianKind::Xy => {
            for (i, j, b) in pairs(network) {
                tb.flip_flop(i, j, b);
            }
        }
        HamiltonianKind::Zeeman => {
            for (i, &w) in network.frequencies().iter().enumerate() {
                tb.z(i, w);
            }
        }
        HamiltonianKind::TargetDq(d) => {
            let chain = network.chain();
            if d.len() + 1 != chain.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} target couplings for a {}-spin chain",
                    d.len(),
                    chain.len()
                )));
            }
            for (w, &dj) in chain.windows(2).zip(d) {
                tb.double_flip(w[0], w[1], C64::new(dj, 0.0));
            }
        }
    }
    Ok(tb.mat)
}

pub fn build_hamiltonian(kind: &HamiltonianKind, network: &SpinNetwork) -> Result<Operator> {
    let spins = network.len();
    check_spin_count(spins)?;
    let mat = hamiltonian_in(kind, network, &Basis::full(spins))?;
    Ok(Operator {
        spins,
        mat,
        tag: OpTag::Hermitian,
    })
}

pub(crate) fn toggling_in(network: &SpinNetwork, tau: f64, basis: &Basis) -> Array2<C64> {
    let w = network.frequencies();
    let mut tb = TermBuilder::new(basis);
    for (i, j, b) in pairs(network) {
        let phase = tau * (w[i] + w[j]);
        tb.double_flip(i, j, C64::from_polar(b, -phase));
    }
    tb.mat
}

/// U_z(τ) H_DQ U_z(τ)† written out term by term: each pair picks up the
/// phase e^{∓iτδ_ij} on S⁺S⁺ / S⁻S⁻, with δ_ij = ω_i + ω_j.
pub fn toggling_hamiltonian(network: &SpinNetwork, tau: f64) -> Result<Operator> {
    let spins = network.len();
    check_spin_count(spins)?;
    Ok(Operator {
        spins,
        mat: toggling_in(network, tau, &Basis::full(spins)),
        tag: OpTag::Hermitian,
    })
}

/// Spectral decomposition of a Hermitian matrix, reusable for many
/// propagation times.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<C64>,
}

impl HermitianEigen {
    pub fn new(mat: &Array2<C64>) -> Result<Self> {
        if mat.nrows() == 0 {
            return Ok(Self {
                values: Array1::zeros(0),
                vectors: Array2::zeros((0, 0)),
            });
        }
        let (values, vectors) = mat.eigh(UPLO::Lower)?;
        Ok(Self { values, vectors })
    }

    /// exp(−iHt).
    pub fn propagator(&self, t: f64) -> Array2<C64> {
        let phases: Vec<C64> = self
            .values
            .iter()
            .map(|&l| C64::from_polar(1.0, -l * t))
            .collect();
        let mut scaled = self.vectors.clone();
        for (mut col, &p) in scaled.columns_mut().into_iter().zip(&phases) {
            col *= p;
        }
        let vh = self.vectors.t().mapv(|z| z.conj());
        scaled.dot(&vh)
    }
}

/// U = exp(−iHt) via spectral decomposition.
pub fn expm_hermitian(h: &Operator, t: f64) -> Result<Operator> {
    if h.tag != OpTag::Hermitian {
        let asym = h.hermitian_deviation();
        if asym > HERMITIAN_TOL * h.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
    }
    let eig = HermitianEigen::new(&h.mat)?;
    Ok(Operator {
        spins: h.spins,
        mat: eig.propagator(t),
        tag: OpTag::Unitary,
    })
}

// ---------------------------------------------------------------------------
// Two-spin spherical tensors

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorLabel {
    /// The identity, listed alongside the rank-0 pair tensor.
    Identity,
    /// Single-spin tensors of spin a.
    A,
    /// Single-spin tensors of spin b.
    B,
    /// Bilinear tensors of the pair.
    Pair,
}

impl TensorLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            TensorLabel::Identity => "identity",
            TensorLabel::A => "a",
            TensorLabel::B => "b",
            TensorLabel::Pair => "ab",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TensorKey {
    pub l: i32,
    pub m: i32,
    pub label: TensorLabel,
}

impl TensorKey {
    pub const fn new(l: i32, m: i32, label: TensorLabel) -> Self {
        Self { l, m, label }
    }
}

/// The sixteen tabulated two-spin tensors, ordered by label, rank, then m
/// descending.
pub fn tensor_keys() -> Vec<TensorKey> {
    use TensorLabel::*;
    let mut keys = vec![TensorKey::new(0, 0, Identity), TensorKey::new(0, 0, Pair)];
    for label in [A, B, Pair] {
        for m in [1, 0, -1] {
            keys.push(TensorKey::new(1, m, label));
        }
    }
    for m in [2, 1, 0, -1, -2] {
        keys.push(TensorKey::new(2, m, Pair));
    }
    keys
}

fn pauli(which: char) -> Array2<C64> {
    let z = ZERO;
    let o = ONE;
    let i = C64::new(0.0, 1.0);
    let v = match which {
        'I' => [o, z, z, o],
        'x' => [z, o, o, z],
        'y' => [z, -i, i, z],
        'z' => [o, z, z, -o],
        // σ± = σx ± iσy
        '+' => [z, o * 2.0, z, z],
        '-' => [z, z, o * 2.0, z],
        _ => unreachable!(),
    };
    Array2::from_shape_vec((2, 2), v.to_vec()).unwrap()
}

pub(crate) fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(r, c)| {
        a[[r / br, c / bc]] * b[[r % br, c % bc]]
    })
}

fn pp(a: char, b: char) -> Array2<C64> {
    kron(&pauli(a), &pauli(b))
}

/// Tensor T_{l,m} on two spins (a = site 0, b = site 1) in the tabulated
/// convention, σ± = σx ± iσy.
pub fn spherical_tensor(l: i32, m: i32, label: TensorLabel) -> Result<Operator> {
    use TensorLabel::*;
    let s2 = 2f64.sqrt();
    let s3 = 3f64.sqrt();
    let s6 = 6f64.sqrt();
    let mat = match (label, l, m) {
        (Identity, 0, 0) => pp('I', 'I'),
        (Pair, 0, 0) => (pp('x', 'x') + pp('y', 'y') + pp('z', 'z')) / C64::new(s3, 0.0),
        (A, 1, 0) => pp('z', 'I') * 0.5,
        (B, 1, 0) => pp('I', 'z') * 0.5,
        (A, 1, 1) => pp('+', 'I') / C64::new(s2, 0.0),
        (A, 1, -1) => pp('-', 'I') / C64::new(s2, 0.0),
        (B, 1, 1) => pp('I', '+') / C64::new(s2, 0.0),
        (B, 1, -1) => pp('I', '-') / C64::new(s2, 0.0),
        (Pair, 1, 1) => (pp('+', 'z') - pp('z', '+')) * 0.5,
        (Pair, 1, -1) => (pp('-', 'z') - pp('z', '-')) * 0.5,
        (Pair, 1, 0) => (pp('+', '-') - pp('-', '+')) * 0.5,
        (Pair, 2, 0) => {
            (pp('z', 'z') * 2.0 - pp('x', 'x') - pp('y', 'y')) / C64::new(s6, 0.0)
        }
        (Pair, 2, 1) => (pp('+', 'z') + pp('z', '+')) * 0.5,
        (Pair, 2, -1) => (pp('-', 'z') + pp('z', '-')) * 0.5,
        (Pair, 2, 2) => pp('+', '+') * 0.5,
        (Pair, 2, -2) => pp('-', '-') * 0.5,
        _ => {
            return Err(Error::InvalidTensor {
                l,
                m,
                label: label.as_str().into(),
            })
        }
    };
    Operator::general(2, mat)
}

/// Expansion H = Σ c_{l,m} T_{l,m} over the tabulated tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorCoefficients {
    pub entries: Vec<(TensorKey, C64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorCoefficientRecord {
    pub l: i32,
    pub m: i32,
    pub label: String,
    pub re: f64,
    pub im: f64,
}

impl TensorCoefficients {
    pub fn get(&self, key: TensorKey) -> C64 {
        self.entries
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, c)| *c)
            .unwrap_or(ZERO)
    }

    /// A_{l,m} in the convention H = Σ (−1)^m A_{l,−m} T_{l,m}.
    pub fn a_coefficient(&self, l: i32, m: i32, label: TensorLabel) -> C64 {
        let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        self.get(TensorKey::new(l, -m, label)) * sign
    }

    /// Rebuilds the operator from the coefficients.
    pub fn reconstruct(&self) -> Result<Operator> {
        let mut mat = Array2::zeros((4, 4));
        for (k, c) in &self.entries {
            mat = mat + spherical_tensor(k.l, k.m, k.label)?.mat * *c;
        }
        Operator::general(2, mat)
    }

    pub fn records(&self) -> Vec<TensorCoefficientRecord> {
        self.entries
            .iter()
            .map(|(k, c)| TensorCoefficientRecord {
                l: k.l,
                m: k.m,
                label: k.label.as_str().into(),
                re: c.re,
                im: c.im,
            })
            .collect()
    }
}

/// Hilbert–Schmidt inner product tr(A†B).
pub fn hs_inner(a: &Operator, b: &Operator) -> C64 {
    a.mat
        .iter()
        .zip(b.mat.iter())
        .map(|(x, y)| x.conj() * y)
        .sum()
}

/// Projects a two-spin operator on the tabulated tensors.
pub fn decompose(h: &Operator) -> Result<TensorCoefficients> {
    if h.spins != 2 {
        return Err(Error::DimensionMismatch(format!(
            "tensor decomposition needs 2 spins, got {}",
            h.spins
        )));
    }
    let mut entries = Vec::with_capacity(16);
    for key in tensor_keys() {
        let t = spherical_tensor(key.l, key.m, key.label)?;
        let c = hs_inner(&t, h) / hs_inner(&t, &t);
        entries.push((key, c));
    }
    Ok(TensorCoefficients { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{apply_gradient, unit_chain, GradientConfig};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn single_spin_z() {
        let sz = spin_op(1, 0, Axis::Z).unwrap();
        assert_eq!(sz.matrix()[[0, 0]], c(0.5));
        assert_eq!(sz.matrix()[[1, 1]], c(-0.5));
        assert_eq!(sz.matrix()[[0, 1]], ZERO);
    }

    #[test]
    fn su2_algebra_and_disjoint_sites() {
        let n = 3;
        let x = spin_op(n, 1, Axis::X).unwrap();
        let y = spin_op(n, 1, Axis::Y).unwrap();
        let z = spin_op(n, 1, Axis::Z).unwrap();
        let comm = x.commutator(&y).unwrap();
        let iz = z.combine(C64::new(0.0, 1.0), &z, ZERO).unwrap();
        assert!(comm.max_diff(&iz) < 1e-14);
        let y2 = spin_op(n, 2, Axis::Y).unwrap();
        assert!(x.commutator(&y2).unwrap().max_abs() < 1e-15);
        let plus = spin_op(n, 1, Axis::Plus).unwrap();
        let built = x.combine(ONE, &y, C64::new(0.0, 1.0)).unwrap();
        assert!(plus.max_diff(&built) < 1e-15);
    }

    #[test]
    fn site_out_of_range() {
        assert!(matches!(
            spin_op(3, 3, Axis::X),
            Err(Error::SiteOutOfRange { site: 3, spins: 3 })
        ));
        assert!(matches!(
            spin_op(MAX_SPINS + 1, 0, Axis::X),
            Err(Error::DimensionCap { .. })
        ));
    }

    #[test]
    fn dq_selection_rule() {
        let net = unit_chain(2).unwrap();
        let h = build_hamiltonian(&HamiltonianKind::DoubleQuantum, &net).unwrap();
        for ((i, j), z) in h.matrix().indexed_iter() {
            let expected = if (i, j) == (0, 3) || (i, j) == (3, 0) { 1.0 } else { 0.0 };
            assert!((z - c(expected)).norm() < 1e-15);
        }
    }

    #[test]
    fn builders_match_operator_products() {
        let net = apply_gradient(&unit_chain(3).unwrap(), &GradientConfig::along_x(0.7, 0.2).unwrap());
        let n = 3;
        let s = |i, a| spin_op(n, i, a).unwrap();
        let mut dq = Operator::zeros(n).unwrap();
        let mut dip = Operator::zeros(n).unwrap();
        let mut xy = Operator::zeros(n).unwrap();
        for i in 0..n {
            for j in (i + 1)..n {
                let b = net.coupling(i, j);
                let xx = s(i, Axis::X).dot(&s(j, Axis::X)).unwrap();
                let yy = s(i, Axis::Y).dot(&s(j, Axis::Y)).unwrap();
                let zz = s(i, Axis::Z).dot(&s(j, Axis::Z)).unwrap();
                dq = dq.add(&xx.sub(&yy).unwrap().scale(2.0 * b)).unwrap();
                xy = xy.add(&xx.add(&yy).unwrap().scale(2.0 * b)).unwrap();
                let dot = xx.add(&yy).unwrap().add(&zz).unwrap();
                dip = dip.add(&zz.scale(3.0).sub(&dot).unwrap().scale(b)).unwrap();
            }
        }
        let check = |kind, reference: &Operator| {
            let built = build_hamiltonian(&kind, &net).unwrap();
            assert!(built.max_diff(reference) < 1e-14, "{kind:?}");
        };
        check(HamiltonianKind::DoubleQuantum, &dq);
        check(HamiltonianKind::Xy, &xy);
        check(HamiltonianKind::Dipolar, &dip);
        let mut hz = Operator::zeros(n).unwrap();
        for i in 0..n {
            hz = hz.add(&s(i, Axis::Z).scale(net.frequencies()[i])).unwrap();
        }
        check(HamiltonianKind::Zeeman, &hz);
    }

    #[test]
    fn zero_couplings_give_zero_dipolar() {
        let net = SpinNetwork::new(vec![[0.0; 3], [1.0, 0.0, 0.0]], Array2::zeros((2, 2)), vec![0, 1]).unwrap();
        let h = build_hamiltonian(&HamiltonianKind::Dipolar, &net).unwrap();
        assert_eq!(h.max_abs(), 0.0);
    }

    #[test]
    fn target_dq_length_checked() {
        let net = unit_chain(4).unwrap();
        let err = build_hamiltonian(&HamiltonianKind::TargetDq(vec![1.0; 2]), &net);
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn expm_basics() {
        let h = Operator::new(
            1,
            Array2::from_shape_vec((2, 2), vec![c(0.3), ZERO, ZERO, c(-1.1)]).unwrap(),
            OpTag::Hermitian,
        )
        .unwrap();
        let u0 = expm_hermitian(&h, 0.0).unwrap();
        assert!(u0.max_diff(&Operator::identity(1).unwrap()) < 1e-15);
        let u = expm_hermitian(&h, 2.0).unwrap();
        assert!((u.matrix()[[0, 0]] - C64::from_polar(1.0, -0.6)).norm() < 1e-14);
        assert!((u.matrix()[[1, 1]] - C64::from_polar(1.0, 2.2)).norm() < 1e-14);
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let m = Array2::from_shape_vec((2, 2), vec![ZERO, ONE, ZERO, ZERO]).unwrap();
        let op = Operator::general(1, m).unwrap();
        assert!(matches!(expm_hermitian(&op, 1.0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn toggling_quarter_turn_flips_sign() {
        let net = unit_chain(2).unwrap().with_frequencies(vec![1.0, 2.0]).unwrap();
        let dq = build_hamiltonian(&HamiltonianKind::DoubleQuantum, &net).unwrap();
        let t0 = toggling_hamiltonian(&net, 0.0).unwrap();
        assert!(t0.max_diff(&dq) < 1e-15);
        let flipped = toggling_hamiltonian(&net, std::f64::consts::PI / 3.0).unwrap();
        assert!(flipped.max_diff(&dq.scale(-1.0)) < 1e-14);
    }

    #[test]
    fn table_values() {
        let t22 = spherical_tensor(2, 2, TensorLabel::Pair).unwrap();
        // σ+σ+/2 connects |↓↓⟩ to |↑↑⟩ with amplitude 2
        assert_eq!(t22.matrix()[[0, 3]], c(2.0));
        assert!(matches!(
            spherical_tensor(3, 0, TensorLabel::Pair),
            Err(Error::InvalidTensor { .. })
        ));
        assert!(spherical_tensor(2, 0, TensorLabel::A).is_err());
    }

    #[test]
    fn ising_decomposition() {
        let ising = Operator::general(2, pp('z', 'z')).unwrap();
        let co = decompose(&ising).unwrap();
        let t00 = co.get(TensorKey::new(0, 0, TensorLabel::Pair));
        let t20 = co.get(TensorKey::new(2, 0, TensorLabel::Pair));
        assert!((t00 - c(1.0 / 3f64.sqrt())).norm() < 1e-14);
        assert!((t20 / t00 - c(2f64.sqrt())).norm() < 1e-13);
        for (k, v) in &co.entries {
            if k.l != 0 && !(k.l == 2 && k.m == 0) {
                assert!(v.norm() < 1e-14, "{k:?}");
            }
        }
        assert!(co.reconstruct().unwrap().max_diff(&ising) < 1e-14);
    }

    #[test]
    fn tensors_are_orthogonal_and_self_decompose() {
        let keys = tensor_keys();
        assert_eq!(keys.len(), 16);
        let ts: Vec<Operator> = keys
            .iter()
            .map(|k| spherical_tensor(k.l, k.m, k.label).unwrap())
            .collect();
        for a in 0..ts.len() {
            for b in 0..ts.len() {
                let ip = hs_inner(&ts[a], &ts[b]);
                if a != b {
                    assert!(ip.norm() < 1e-13, "{:?} {:?}", keys[a], keys[b]);
                } else {
                    assert!(ip.re > 0.0);
                }
            }
            let co = decompose(&ts[a]).unwrap();
            for (k, v) in &co.entries {
                let expected = if *k == keys[a] { ONE } else { ZERO };
                assert!((v - expected).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn dq_is_rank_two_double_quantum() {
        let net = unit_chain(2).unwrap();
        let h = build_hamiltonian(&HamiltonianKind::DoubleQuantum, &net).unwrap();
        let co = decompose(&h).unwrap();
        let p = co.get(TensorKey::new(2, 2, TensorLabel::Pair));
        let m = co.get(TensorKey::new(2, -2, TensorLabel::Pair));
        assert!((p - m).norm() < 1e-15 && p.norm() > 0.1);
        let rest: f64 = co
            .entries
            .iter()
            .filter(|(k, _)| !(k.l == 2 && k.m.abs() == 2))
            .map(|(_, v)| v.norm())
            .sum();
        assert!(rest < 1e-14);
    }
}
