// Copyright 2026 HamForge Contributors
// SPDX-License-Identifier: Apache-2.0

//! Spin networks on physical lattices.
//!
//! Positions are stored in units of the nearest-neighbour spacing `r0`;
//! couplings and frequencies are angular frequencies (rad/s, ħ = 1).

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// ¹⁹F gyromagnetic ratio (rad s⁻¹ T⁻¹).
pub const GAMMA_F19: f64 = 2.518_15e8;
/// μ₀ħ/4π in SI units.
pub const MU0_HBAR_OVER_4PI: f64 = 1.0e-7 * 1.054_571_817e-34;
/// Intra-chain ¹⁹F spacing in fluorapatite (m).
pub const FAP_SPACING_M: f64 = 0.3442e-9;
/// Reference NN coupling b/2π of fluorapatite (Hz).
pub const FAP_NN_COUPLING_HZ: f64 = 1289.0;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub gamma: f64,
    pub mu0_hbar_over_4pi: f64,
    pub calibration_factor: f64,
}

impl PhysicalConstants {
    /// ¹⁹F constants with the calibration that maps r₀ = 0.3442 nm onto
    /// b/2π = 1.289 kHz.
    pub fn fluorine19() -> Self {
        let naive = MU0_HBAR_OVER_4PI * GAMMA_F19 * GAMMA_F19 / FAP_SPACING_M.powi(3);
        Self {
            gamma: GAMMA_F19,
            mu0_hbar_over_4pi: MU0_HBAR_OVER_4PI,
            calibration_factor: TWO_PI * FAP_NN_COUPLING_HZ / naive,
        }
    }

    /// Dimensionless constants: a unit displacement gives a unit coupling.
    pub fn unit() -> Self {
        Self {
            gamma: 1.0,
            mu0_hbar_over_4pi: 1.0,
            calibration_factor: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.gamma, self.mu0_hbar_over_4pi, self.calibration_factor]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "physical constants must be positive".into(),
            ))
        }
    }

    fn prefactor(&self) -> f64 {
        self.calibration_factor * self.mu0_hbar_over_4pi * self.gamma * self.gamma
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::fluorine19()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingModel {
    #[default]
    IsotropicR3,
    /// Multiplies by (1 − 3cos²θ)/2, θ measured from the z axis.
    Angular,
}

/// Dipolar coupling (rad/s) for a displacement given in metres.
pub fn dipolar_coupling(
    displacement: Vec3,
    constants: &PhysicalConstants,
    model: CouplingModel,
) -> Result<f64> {
    let r = norm(displacement);
    if r == 0.0 {
        return Err(Error::CoincidentSpins);
    }
    let iso = constants.prefactor() / (r * r * r);
    Ok(match model {
        CouplingModel::IsotropicR3 => iso,
        CouplingModel::Angular => {
            let cos = displacement[2] / r;
            iso * (1.0 - 3.0 * cos * cos) / 2.0
        }
    })
}

/// ω = γ · G · r₀.
pub fn gradient_from_field(field_gradient: f64, spacing: f64, constants: &PhysicalConstants) -> f64 {
    constants.gamma * field_gradient * spacing
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientConfig {
    /// Frequency step per unit r₀ along `direction` (rad/s).
    pub omega: f64,
    /// Excitation offset (rad/s).
    pub omega0: f64,
    pub direction: Vec3,
    pub origin: Vec3,
}

impl GradientConfig {
    /// Gradient along +x with the origin at x = 0, so a chain spin at x = j
    /// sits at jω − ω₀.
    pub fn along_x(omega: f64, omega0: f64) -> Result<Self> {
        let g = Self {
            omega,
            omega0,
            direction: [1.0, 0.0, 0.0],
            origin: [0.0; 3],
        };
        g.validate()?;
        Ok(g)
    }

    /// Gradient for the honeycomb lattice of [`build_lattice`]: `period` is
    /// the filter period ω, and NN spins of every zig-zag chain land on
    /// mω ± ω/6.
    pub fn honeycomb(period: f64) -> Result<Self> {
        let g = Self {
            omega: 2.0 * period / 3.0,
            omega0: 0.0,
            direction: [1.0, 0.0, 0.0],
            origin: [-0.25, 0.0, 0.0],
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidInput("gradient omega must be positive".into()));
        }
        if (norm(self.direction) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(
                "gradient direction must have unit norm".into(),
            ));
        }
        Ok(())
    }

    pub fn frequency_at(&self, pos: Vec3) -> f64 {
        let rel = sub(pos, self.origin);
        self.omega * dot(rel, self.direction) - self.omega0
    }
}

/// How couplings were generated, kept so they can be recomputed after the
/// positions move.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// r₀ in metres (1.0 together with [`PhysicalConstants::unit`] for
    /// dimensionless networks).
    pub spacing: f64,
    pub constants: PhysicalConstants,
    pub model: CouplingModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinNetwork {
    positions: Vec<Vec3>,
    couplings: Array2<f64>,
    chain: Vec<usize>,
    frequencies: Vec<f64>,
    geometry: Option<Geometry>,
    gradient: Option<GradientConfig>,
}

impl SpinNetwork {
    /// Network with explicit couplings and zero frequencies.
    pub fn new(positions: Vec<Vec3>, couplings: Array2<f64>, chain: Vec<usize>) -> Result<Self> {
        let n = positions.len();
        if couplings.dim() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "couplings are {:?} for {n} spins",
                couplings.dim()
            )));
        }
        for i in 0..n {
            if couplings[[i, i]] != 0.0 {
                return Err(Error::InvalidInput("coupling diagonal must be zero".into()));
            }
            for j in 0..i {
                if couplings[[i, j]] != couplings[[j, i]] {
                    return Err(Error::InvalidInput("couplings must be symmetric".into()));
                }
            }
        }
        if chain.len() < 2 {
            return Err(Error::InvalidInput("chain needs at least 2 spins".into()));
        }
        let mut seen = vec![false; n];
        for &c in &chain {
            if c >= n {
                return Err(Error::SiteOutOfRange { site: c, spins: n });
            }
            if seen[c] {
                return Err(Error::InvalidInput(format!("chain index {c} repeated")));
            }
            seen[c] = true;
        }
        Ok(Self {
            positions,
            couplings,
            chain,
            frequencies: vec![0.0; n],
            geometry: None,
            gradient: None,
        })
    }

    /// Network whose couplings follow from the positions.
    pub fn dipolar(positions: Vec<Vec3>, chain: Vec<usize>, geometry: Geometry) -> Result<Self> {
        geometry.constants.validate()?;
        if !(geometry.spacing > 0.0) {
            return Err(Error::InvalidInput("spacing must be positive".into()));
        }
        let couplings = dipolar_matrix(&positions, &geometry)?;
        let mut net = Self::new(positions, couplings, chain)?;
        net.geometry = Some(geometry);
        Ok(net)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn couplings(&self) -> &Array2<f64> {
        &self.couplings
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[[i, j]]
    }

    pub fn chain(&self) -> &[usize] {
        &self.chain
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn geometry(&self) -> Option<&Geometry> {
        self.geometry.as_ref()
    }

    pub fn gradient(&self) -> Option<&GradientConfig> {
        self.gradient.as_ref()
    }

    /// Overwrites the frequencies directly (no spatial gradient recorded).
    pub fn with_frequencies(mut self, frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} frequencies for {} spins",
                frequencies.len(),
                self.len()
            )));
        }
        self.frequencies = frequencies;
        self.gradient = None;
        Ok(self)
    }

    /// Couplings between chain neighbours, b_{j,j+1}.
    pub fn chain_nn_couplings(&self) -> Vec<f64> {
        self.chain
            .windows(2)
            .map(|w| self.couplings[[w[0], w[1]]])
            .collect()
    }

    /// Keeps only couplings between consecutive chain spins.
    pub fn nn_only(&self) -> Self {
        let n = self.len();
        let mut c = Array2::zeros((n, n));
        for w in self.chain.windows(2) {
            c[[w[0], w[1]]] = self.couplings[[w[0], w[1]]];
            c[[w[1], w[0]]] = self.couplings[[w[1], w[0]]];
        }
        Self {
            couplings: c,
            geometry: None,
            ..self.clone()
        }
    }

    /// The sub-network spanned by the chain spins, renumbered 0..n in chain
    /// order.
    pub fn chain_only(&self) -> Self {
        let n = self.chain.len();
        let positions = self.chain.iter().map(|&i| self.positions[i]).collect();
        let couplings =
            Array2::from_shape_fn((n, n), |(a, b)| self.couplings[[self.chain[a], self.chain[b]]]);
        let frequencies = self.chain.iter().map(|&i| self.frequencies[i]).collect();
        Self {
            positions,
            couplings,
            chain: (0..n).collect(),
            frequencies,
            geometry: self.geometry,
            gradient: self.gradient,
        }
    }

    /// Rescales every coupling by `factor`; geometry is dropped since the
    /// couplings no longer follow from it.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            couplings: &self.couplings * factor,
            geometry: self.geometry.map(|mut g| {
                g.constants.calibration_factor *= factor;
                g
            }),
            ..self.clone()
        }
    }

    fn with_positions(&self, positions: Vec<Vec3>) -> Result<Self> {
        let geometry = self.geometry.ok_or(Error::NoGeometry)?;
        let couplings = dipolar_matrix(&positions, &geometry)?;
        let frequencies = match &self.gradient {
            Some(g) => positions.iter().map(|&p| g.frequency_at(p)).collect(),
            None => self.frequencies.clone(),
        };
        Ok(Self {
            positions,
            couplings,
            frequencies,
            ..self.clone()
        })
    }
}

fn dipolar_matrix(positions: &[Vec3], geometry: &Geometry) -> Result<Array2<f64>> {
    let n = positions.len();
    let mut c = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = scale(sub(positions[j], positions[i]), geometry.spacing);
            let b = dipolar_coupling(d, &geometry.constants, geometry.model)?;
            c[[i, j]] = b;
            c[[j, i]] = b;
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Chain,
    TrigonalPlanar,
    Honeycomb,
}

impl std::str::FromStr for LatticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(Self::Chain),
            "trigonal_planar" | "trigonal" => Ok(Self::TrigonalPlanar),
            "honeycomb" => Ok(Self::Honeycomb),
            other => Err(Error::InvalidInput(format!("unknown lattice kind {other:?}"))),
        }
    }
}

/// Lays out a lattice and fills every pairwise dipolar coupling.
///
/// * `Chain`: `size` spins at x = 1..=size.
/// * `TrigonalPlanar`: the same chain plus one row of `size − 1` off-chain
///   spins of the triangular lattice, each sitting between two chain
///   neighbours at (j + ½, √3/2).
/// * `Honeycomb`: bond length 1 with horizontal bonds; `size` is the extent
///   in lattice vectors. The designated chain is the zig-zag column through
///   the origin, ordered by y.
pub fn build_lattice(
    kind: LatticeKind,
    size: usize,
    spacing: f64,
    constants: &PhysicalConstants,
    model: CouplingModel,
) -> Result<SpinNetwork> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidInput("spacing must be positive".into()));
    }
    let geometry = Geometry {
        spacing,
        constants: *constants,
        model,
    };
    let h = 3f64.sqrt() / 2.0;
    match kind {
        LatticeKind::Chain | LatticeKind::TrigonalPlanar => {
            if size < 2 {
                return Err(Error::InvalidInput("chain needs n >= 2".into()));
            }
            let mut positions: Vec<Vec3> = (1..=size).map(|j| [j as f64, 0.0, 0.0]).collect();
            if kind == LatticeKind::TrigonalPlanar {
                positions.extend((1..size).map(|j| [j as f64 + 0.5, h, 0.0]));
            }
            SpinNetwork::dipolar(positions, (0..size).collect(), geometry)
        }
        LatticeKind::Honeycomb => {
            if size < 1 {
                return Err(Error::InvalidInput("honeycomb extent must be >= 1".into()));
            }
            let e = size as i64;
            let mut positions = Vec::new();
            for i in -e..=e {
                for j in -e..=e {
                    let x = 1.5 * (i + j) as f64;
                    let y = h * (i - j) as f64;
                    positions.push([x, y, 0.0]);
                    positions.push([x + 1.0, y, 0.0]);
                }
            }
            let mut chain: Vec<usize> = (0..positions.len())
                .filter(|&k| {
                    let x = positions[k][0];
                    x.abs() < 1e-9 || (x + 0.5).abs() < 1e-9
                })
                .collect();
            chain.sort_by(|&a, &b| positions[a][1].total_cmp(&positions[b][1]));
            SpinNetwork::dipolar(positions, chain, geometry)
        }
    }
}

/// Unit-coupling chain (b = 1 between neighbours) of `n` spins.
pub fn unit_chain(n: usize) -> Result<SpinNetwork> {
    build_lattice(
        LatticeKind::Chain,
        n,
        1.0,
        &PhysicalConstants::unit(),
        CouplingModel::IsotropicR3,
    )
}

/// Sets ω_i from the spatial gradient; for a chain spin at x = j this is
/// jω − ω₀.
pub fn apply_gradient(network: &SpinNetwork, grad: &GradientConfig) -> SpinNetwork {
    let mut out = network.clone();
    out.frequencies = network
        .positions
        .iter()
        .map(|&p| grad.frequency_at(p))
        .collect();
    out.gradient = Some(*grad);
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbTarget {
    /// Every spin outside the chain (surrounding-network disorder).
    #[default]
    OffChain,
    /// Every spin, chain included.
    AllSpins,
    /// Chain spins only, along the chain axis, mirror-symmetric about the
    /// chain centre.
    ChainMirror,
}

/// Displaces spins by δ·r with r uniform on [−x/2, x/2], x the NN chain
/// spacing, and recomputes couplings (and frequencies, when a gradient is
/// attached). In-plane displacements get a uniformly random direction.
pub fn perturb_positions(
    network: &SpinNetwork,
    delta: f64,
    seed: u64,
    target: PerturbTarget,
) -> Result<SpinNetwork> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput("delta must be nonnegative".into()));
    }
    if delta == 0.0 {
        return Ok(network.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perturb_with(network, delta, &mut rng, target)
}

pub(crate) fn perturb_with<R: Rng>(
    network: &SpinNetwork,
    delta: f64,
    rng: &mut R,
    target: PerturbTarget,
) -> Result<SpinNetwork> {
    let chain = network.chain();
    let x = norm(sub(network.positions[chain[1]], network.positions[chain[0]]));
    let mut positions = network.positions.clone();
    let draw = |rng: &mut R| delta * rng.random_range(-0.5 * x..=0.5 * x);
    match target {
        PerturbTarget::OffChain | PerturbTarget::AllSpins => {
            let in_chain: Vec<bool> = (0..network.len()).map(|i| chain.contains(&i)).collect();
            for (i, p) in positions.iter_mut().enumerate() {
                if target == PerturbTarget::OffChain && in_chain[i] {
                    continue;
                }
                let r = draw(rng);
                let phi = rng.random_range(0.0..TWO_PI);
                p[0] += r * phi.cos();
                p[1] += r * phi.sin();
            }
        }
        PerturbTarget::ChainMirror => {
            let first = network.positions[chain[0]];
            let last = network.positions[chain[chain.len() - 1]];
            let axis = scale(sub(last, first), 1.0 / norm(sub(last, first)));
            let n = chain.len();
            for j in 0..n / 2 {
                let r = draw(rng);
                let a = &mut positions[chain[j]];
                *a = add(*a, scale(axis, r));
                let b = &mut positions[chain[n - 1 - j]];
                *b = add(*b, scale(axis, -r));
            }
        }
    }
    network.with_positions(positions)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingEstimates {
    /// Ideal fabricated chain, nπ/(8b).
    pub t_id: f64,
    /// Weak-coupling transport, Γπ/b.
    pub t_weak: f64,
    /// Filtered engineering, nπ²/(16b) + Nπ/ω.
    pub t_eng: f64,
}

pub fn timing_estimates(n: usize, b: f64, omega: f64, cycles: usize, gamma: f64) -> Result<TimingEstimates> {
    if n == 0 || cycles == 0 || !(b > 0.0) || !(omega > 0.0) || !(gamma > 0.0) {
        return Err(Error::InvalidInput("timing inputs must be positive".into()));
    }
    let pi = std::f64::consts::PI;
    let n = n as f64;
    Ok(TimingEstimates {
        t_id: n * pi / (8.0 * b),
        t_weak: gamma * pi / b,
        t_eng: n * pi * pi / (16.0 * b) + cycles as f64 * pi / omega,
    })
}

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn khz(rad_s: f64) -> f64 {
        rad_s / TWO_PI / 1e3
    }

    #[test]
    fn fap_coupling_is_calibrated() {
        let c = PhysicalConstants::fluorine19();
        let b = dipolar_coupling([FAP_SPACING_M, 0.0, 0.0], &c, CouplingModel::IsotropicR3).unwrap();
        assert!((khz(b) - 1.289).abs() < 1e-9);
        // the uncalibrated prefactor is roughly twice as large
        assert!((c.calibration_factor - 0.5).abs() < 0.02);
    }

    #[test]
    fn doubling_displacement_divides_by_eight() {
        let c = PhysicalConstants::unit();
        let b1 = dipolar_coupling([0.3, 0.4, 0.1], &c, CouplingModel::IsotropicR3).unwrap();
        let b2 = dipolar_coupling([0.6, 0.8, 0.2], &c, CouplingModel::IsotropicR3).unwrap();
        assert!((b1 / b2 - 8.0).abs() < 1e-12);
    }

    #[test]
    fn magic_angle_vanishes() {
        let theta = (1.0f64 / 3.0).sqrt().acos();
        let d = [theta.sin(), 0.0, theta.cos()];
        let b = dipolar_coupling(d, &PhysicalConstants::unit(), CouplingModel::Angular).unwrap();
        assert!(b.abs() < 1e-15);
        assert!((theta.to_degrees() - 54.7356).abs() < 1e-4);
    }

    #[test]
    fn coincident_spins_rejected() {
        let err = dipolar_coupling([0.0; 3], &PhysicalConstants::unit(), CouplingModel::IsotropicR3);
        assert!(matches!(err, Err(Error::CoincidentSpins)));
    }

    #[test]
    fn chain_nn_to_nnn_ratio() {
        let net = unit_chain(5).unwrap();
        assert!((net.coupling(0, 1) / net.coupling(0, 2) - 8.0).abs() < 1e-12);
        assert_eq!(net.chain(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn trigonal_has_spins_between_chain_sites() {
        let net = build_lattice(
            LatticeKind::TrigonalPlanar,
            5,
            1.0,
            &PhysicalConstants::unit(),
            CouplingModel::IsotropicR3,
        )
        .unwrap();
        assert_eq!(net.len(), 9);
        for k in 5..9 {
            let p = net.positions()[k];
            let j = k - 4;
            assert!((p[0] - (j as f64 + 0.5)).abs() < 1e-12);
            // equilateral: equidistant from the two chain neighbours
            assert!((net.coupling(k, j - 1) - 1.0).abs() < 1e-12);
            assert!((net.coupling(k, j) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn honeycomb_fourth_neighbour_ratio() {
        let net = build_lattice(
            LatticeKind::Honeycomb,
            2,
            1.0,
            &PhysicalConstants::unit(),
            CouplingModel::IsotropicR3,
        )
        .unwrap();
        let mut dists: Vec<f64> = Vec::new();
        for i in 0..net.len() {
            for j in (i + 1)..net.len() {
                dists.push(norm(sub(net.positions()[i], net.positions()[j])));
            }
        }
        dists.sort_by(f64::total_cmp);
        dists.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        // shells: 1, √3, 2, √7
        assert!((dists[0] - 1.0).abs() < 1e-12);
        assert!((dists[3] - 7f64.sqrt()).abs() < 1e-12);
        let ratio = 1.0 / dists[3].powi(3);
        assert!((1.0 / ratio - 18.52).abs() / 18.52 < 0.01);
    }

    #[test]
    fn honeycomb_chain_is_nn_zigzag_at_sixth_offsets() {
        let net = build_lattice(
            LatticeKind::Honeycomb,
            2,
            1.0,
            &PhysicalConstants::unit(),
            CouplingModel::IsotropicR3,
        )
        .unwrap();
        let w = 3.0;
        let net = apply_gradient(&net, &GradientConfig::honeycomb(w).unwrap());
        let chain = net.chain();
        assert!(chain.len() >= 4);
        for pair in chain.windows(2) {
            assert!((net.coupling(pair[0], pair[1]) - 1.0).abs() < 1e-12);
        }
        for &c in chain {
            let f = net.frequencies()[c] / w;
            let frac = f - f.round();
            assert!((frac.abs() - 1.0 / 6.0).abs() < 1e-12, "{f}");
        }
    }

    #[test]
    fn gradient_ramp() {
        let net = unit_chain(3).unwrap();
        let g = GradientConfig::along_x(1.0, 0.0).unwrap();
        let net = apply_gradient(&net, &g);
        assert_eq!(net.frequencies(), &[1.0, 2.0, 3.0]);
        let again = apply_gradient(&net, &g);
        assert_eq!(again.frequencies(), net.frequencies());
    }

    #[test]
    fn half_offset_puts_nn_sums_on_even_multiples() {
        let w = 1.7;
        let net = apply_gradient(&unit_chain(6).unwrap(), &GradientConfig::along_x(w, w / 2.0).unwrap());
        let f = net.frequencies();
        for j in 1..6 {
            let sum = f[j - 1] + f[j];
            assert!((sum - 2.0 * j as f64 * w).abs() < 1e-12);
        }
    }

    #[test]
    fn field_to_gradient_frequency() {
        let c = PhysicalConstants::fluorine19();
        // 5.588e8 G/m = 5.588e4 T/m
        let w = gradient_from_field(5.588e4, FAP_SPACING_M, &c);
        assert!((khz(w) - 0.7705).abs() / 0.7705 < 5e-3);
        // 60 G/nm = 6e6 T/m
        let w = gradient_from_field(6e6, FAP_SPACING_M, &c);
        assert!((khz(w) - 82.73).abs() / 82.73 < 5e-3);
        assert_eq!(gradient_from_field(0.0, FAP_SPACING_M, &c), 0.0);
    }

    #[test]
    fn perturbation_zero_and_determinism() {
        let net = build_lattice(
            LatticeKind::TrigonalPlanar,
            5,
            1.0,
            &PhysicalConstants::unit(),
            CouplingModel::IsotropicR3,
        )
        .unwrap();
        let same = perturb_positions(&net, 0.0, 7, PerturbTarget::OffChain).unwrap();
        assert_eq!(same.couplings(), net.couplings());
        let a = perturb_positions(&net, 0.3, 7, PerturbTarget::OffChain).unwrap();
        let b = perturb_positions(&net, 0.3, 7, PerturbTarget::OffChain).unwrap();
        assert_eq!(a, b);
        for &c in net.chain() {
            assert_eq!(a.positions()[c], net.positions()[c]);
        }
        assert_ne!(a.positions()[6], net.positions()[6]);
    }

    #[test]
    fn mirror_perturbation_is_symmetric() {
        let net = unit_chain(7).unwrap();
        let p = perturb_positions(&net, 0.15, 3, PerturbTarget::ChainMirror).unwrap();
        let nn = p.chain_nn_couplings();
        for j in 0..nn.len() {
            assert!((nn[j] - nn[nn.len() - 1 - j]).abs() < 1e-12);
        }
        assert_eq!(p.positions()[3], net.positions()[3]);
    }

    #[test]
    fn timing_formulas() {
        let b = TWO_PI * 1289.0;
        let w = TWO_PI * 25e3;
        let t = timing_estimates(25, b, w, 30, 25.0).unwrap();
        let pi = std::f64::consts::PI;
        assert!((t.t_id - 25.0 * pi / (8.0 * b)).abs() < 1e-12 * t.t_id);
        assert!((t.t_weak - 25.0 * pi / b).abs() < 1e-12 * t.t_weak);
        assert!(t.t_eng.is_finite() && t.t_eng > 0.0);
        let fast = timing_estimates(25, b, 1e18, 30, 25.0).unwrap();
        assert!((fast.t_eng - 25.0 * pi * pi / (16.0 * b)).abs() < 1e-9 * fast.t_eng);
    }

    #[test]
    fn engineering_beats_weak_regime_above_threshold() {
        // T_eng < T_weak  <=>  ω > Nπb / (Γπ − nπ²/16)
        let pi = std::f64::consts::PI;
        let b = 1.0;
        for n in [5usize, 11, 25, 51] {
            let gamma = n as f64;
            let cycles = n;
            let threshold = cycles as f64 * pi * b / (gamma * pi - n as f64 * pi * pi / 16.0);
            for (w, faster) in [(threshold * 1.01, true), (threshold * 0.99, false)] {
                let t = timing_estimates(n, b, w, cycles, gamma).unwrap();
                assert_eq!(t.t_eng < t.t_weak, faster, "n={n} w={w}");
            }
            // the threshold is of order the NN coupling
            assert!(threshold > 0.5 * b && threshold < 2.0 * b);
        }
    }
}
