// Copyright 2026 HamForge Contributors
// SPDX-License-Identifier: Apache-2.0

//! Exact simulation of engineered sequences.
//!
//! Every Hamiltonian used here conserves the parity of the number of up
//! spins, so propagators are built block by block on the two parity
//! sectors. Time runs left to right through the sequence: cycle 0 block 1
//! acts first, each block being free evolution for τ_h followed by mixing
//! for a_k t_h/(N d).

use std::collections::HashMap;
use std::str::FromStr;

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engineering::{grating, synthesize_sequence, weighting, PulseSequence, SynthesisParams, Window};
use crate::error::{Error, Result};
use crate::lattice::{apply_gradient, perturb_with, GradientConfig, PerturbTarget, SpinNetwork};
use crate::ops::{
    check_spin_count, hamiltonian_in, sz_value, Basis, HamiltonianKind, HermitianEigen,
    OpTag, Operator, TermBuilder, C64,
};

/// How the free-evolution blocks are realized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UzMode {
    /// Pure gradient evolution (couplings decoupled).
    #[default]
    Ideal,
    /// Gradient plus the bare DQ coupling, with the excitation offset moved
    /// so that pair sums shift by `periods` periods of the filter F𝒢.
    OffResonance { periods: f64 },
}

impl UzMode {
    /// Per-spin frequency raise. F𝒢 is periodic in δ with period 2π/q,
    /// q = τ/n being the time quantum of the free-time pattern, so raising
    /// every ω_j by `periods`·π/q leaves all block phases unchanged mod 2π.
    pub fn frequency_shift(&self, seq: &PulseSequence) -> f64 {
        match *self {
            UzMode::Ideal => 0.0,
            UzMode::OffResonance { periods } => periods * std::f64::consts::PI * seq.n as f64 / seq.tau(),
        }
    }
}

pub const DEFAULT_OFFRES_PERIODS: f64 = 3.0;

impl FromStr for UzMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "ideal" => Ok(UzMode::Ideal),
            None if s == "offres" => Ok(UzMode::OffResonance {
                periods: DEFAULT_OFFRES_PERIODS,
            }),
            Some(("offres", p)) => p
                .parse::<f64>()
                .ok()
                .filter(|p| p.is_finite())
                .map(|periods| UzMode::OffResonance { periods })
                .ok_or_else(|| Error::InvalidInput(format!("bad offset in uz mode '{s}'"))),
            _ => Err(Error::InvalidInput(format!(
                "unknown uz mode '{s}' (expected ideal or offres[:periods])"
            ))),
        }
    }
}

/// Which couplings of a network take part in the simulation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingScope {
    /// Only consecutive chain couplings.
    NnOnly,
    /// All couplings among the chain spins.
    All,
    /// The whole network, off-chain spins included.
    #[default]
    Network,
}

impl CouplingScope {
    pub fn apply(&self, network: &SpinNetwork) -> SpinNetwork {
        match self {
            CouplingScope::NnOnly => network.chain_only().nn_only(),
            CouplingScope::All => network.chain_only(),
            CouplingScope::Network => network.clone(),
        }
    }
}

impl FromStr for CouplingScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nn_only" | "nn-only" => Ok(CouplingScope::NnOnly),
            "all" => Ok(CouplingScope::All),
            "network" => Ok(CouplingScope::Network),
            _ => Err(Error::InvalidInput(format!(
                "unknown coupling scope '{s}' (expected nn_only, all or network)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub signed: f64,
    pub magnitude: f64,
}

/// tr(U S_src^z U† S_sink^z) / 2^{n−2}, so that perfect transport reads ±1.
pub fn transport_fidelity(u: &Operator, source: usize, sink: usize) -> Result<Fidelity> {
    let n = u.spins();
    if source >= n || sink >= n {
        return Err(Error::SiteOutOfRange {
            site: source.max(sink),
            spins: n,
        });
    }
    let basis = Basis::full(n);
    let src: Vec<f64> = basis.states.iter().map(|&s| sz_value(n, source, s)).collect();
    let snk: Vec<f64> = basis.states.iter().map(|&s| sz_value(n, sink, s)).collect();
    let signed = weighted_population(u.matrix(), &src, &snk) / norm_factor(n);
    Ok(Fidelity {
        signed,
        magnitude: signed.abs(),
    })
}

fn norm_factor(n: usize) -> f64 {
    (1u64 << n) as f64 / 4.0
}

/// Σ_{a,b} |U_ba|² src_a sink_b.
fn weighted_population(u: &Array2<C64>, src: &[f64], snk: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (b, row) in u.rows().into_iter().enumerate() {
        let mut r = 0.0;
        for (a, z) in row.iter().enumerate() {
            r += z.norm_sqr() * src[a];
        }
        acc += r * snk[b];
    }
    acc
}

/// One block of the executed timeline.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Block {
    free: f64,
    /// Signed mixing time (s); negative means reversed DQ evolution.
    mix: f64,
}

fn timeline(seq: &PulseSequence, cycles: usize) -> Vec<Block> {
    let mut out = Vec::with_capacity(cycles * seq.blocks());
    for k in 0..cycles {
        for h in 0..seq.blocks() {
            out.push(Block {
                free: seq.tau_list[h],
                mix: seq.mixing_seconds(h, k),
            });
        }
    }
    out
}

/// Hamiltonian pieces restricted to one parity sector.
struct Sector {
    basis: Basis,
    /// Diagonal of H_z.
    hz: Vec<f64>,
    dq: Array2<C64>,
    dq_eig: HermitianEigen,
    src: Vec<f64>,
    snk: Vec<f64>,
}

fn parity_sectors(spins: usize) -> [Basis; 2] {
    let (even, odd): (Vec<usize>, Vec<usize>) = (0..1usize << spins).partition(|s| s.count_ones() % 2 == 0);
    [Basis::from_states(spins, even), Basis::from_states(spins, odd)]
}

/// Sector-resolved simulator for one network and readout pair.
struct Engine {
    spins: usize,
    sectors: Vec<Sector>,
    mode: UzMode,
    shift: f64,
}

impl Engine {
    fn new(network: &SpinNetwork, source: usize, sink: usize, mode: UzMode, seq: &PulseSequence) -> Result<Self> {
        let spins = network.len();
        check_spin_count(spins)?;
        if source >= spins || sink >= spins {
            return Err(Error::SiteOutOfRange {
                site: source.max(sink),
                spins,
            });
        }
        let mut sectors = Vec::with_capacity(2);
        for basis in parity_sectors(spins) {
            let dq = hamiltonian_in(&HamiltonianKind::DoubleQuantum, network, &basis)?;
            let dq_eig = HermitianEigen::new(&dq)?;
            let w = network.frequencies();
            let hz = basis
                .states
                .iter()
                .map(|&s| (0..spins).map(|i| w[i] * sz_value(spins, i, s)).sum())
                .collect();
            let src = basis.states.iter().map(|&s| sz_value(spins, source, s)).collect();
            let snk = basis.states.iter().map(|&s| sz_value(spins, sink, s)).collect();
            sectors.push(Sector {
                basis,
                hz,
                dq,
                dq_eig,
                src,
                snk,
            });
        }
        Ok(Self {
            spins,
            sectors,
            mode,
            shift: mode.frequency_shift(seq),
        })
    }

    fn offset_shift(&self, sector: &Sector) -> Vec<f64> {
        match self.mode {
            UzMode::Ideal => vec![0.0; sector.basis.len()],
            UzMode::OffResonance { .. } => {
                let n = self.spins;
                let shift = self.shift;
                sector
                    .basis
                    .states
                    .iter()
                    .map(|&s| shift * (0..n).map(|i| sz_value(n, i, s)).sum::<f64>())
                    .collect()
            }
        }
    }

    fn fidelity(&self, us: &[Array2<C64>]) -> f64 {
        let total: f64 = self
            .sectors
            .iter()
            .zip(us)
            .map(|(s, u)| weighted_population(u, &s.src, &s.snk))
            .sum();
        total / norm_factor(self.spins)
    }

    fn identity(&self) -> Vec<Array2<C64>> {
        self.sectors.iter().map(|s| Array2::eye(s.basis.len())).collect()
    }

    /// Noiseless evolution through `blocks`; returns the signed fidelity
    /// after every block from index `record_from` on (index 0 being the
    /// initial state), plus the final sector propagators.
    fn run(&self, blocks: &[Block], record_from: usize) -> Result<(Vec<f64>, Vec<Array2<C64>>)> {
        let mut cache: Vec<SectorCache> = self.sectors.iter().map(|_| SectorCache::default()).collect();
        let mut us = self.identity();
        let mut record = Vec::new();
        if record_from == 0 {
            record.push(self.fidelity(&us));
        }
        for (idx, block) in blocks.iter().enumerate() {
            for ((sector, u), c) in self.sectors.iter().zip(us.iter_mut()).zip(cache.iter_mut()) {
                let free = c.free(self, sector, block.free)?;
                apply_left(u, free);
                let mix = c.mix(sector, block.mix);
                *u = mix.dot(u);
            }
            if idx + 1 >= record_from {
                record.push(self.fidelity(&us));
            }
        }
        Ok((record, us))
    }

    /// Evolution with per-spin frequency noise, sampled piecewise constant
    /// on steps no longer than `dt_max`.
    fn run_noisy<R: Rng>(
        &self,
        blocks: &[Block],
        record_from: usize,
        noise: &OuNoiseParams,
        dt_max: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let n = self.spins;
        let mut procs: Vec<OuProcess> = (0..n).map(|_| OuProcess::new(noise.tau_c, noise.sigma, rng)).collect();
        let shifts: Vec<Vec<f64>> = self.sectors.iter().map(|s| self.offset_shift(s)).collect();
        let sz: Vec<Vec<Vec<f64>>> = self
            .sectors
            .iter()
            .map(|s| {
                (0..n)
                    .map(|i| s.basis.states.iter().map(|&st| sz_value(n, i, st)).collect())
                    .collect()
            })
            .collect();
        let noise_diag = |k: usize, procs: &[OuProcess]| -> Vec<f64> {
            let mut d = vec![0.0; self.sectors[k].basis.len()];
            for (i, p) in procs.iter().enumerate() {
                for (v, s) in d.iter_mut().zip(&sz[k][i]) {
                    *v += p.value() * s;
                }
            }
            d
        };
        let mut us = self.identity();
        let mut record = Vec::new();
        if record_from == 0 {
            record.push(self.fidelity(&us));
        }
        let pieces = |dur: f64| -> (usize, f64) {
            if dur <= 0.0 {
                return (0, 0.0);
            }
            let k = (dur / dt_max - 1e-9).ceil().max(1.0) as usize;
            (k, dur / k as f64)
        };
        for (idx, block) in blocks.iter().enumerate() {
            // free evolution
            let (k, dt) = pieces(block.free);
            for _ in 0..k {
                for (s, (sector, u)) in self.sectors.iter().zip(us.iter_mut()).enumerate() {
                    let nd = noise_diag(s, &procs);
                    let diag: Vec<f64> = sector
                        .hz
                        .iter()
                        .zip(&shifts[s])
                        .zip(&nd)
                        .map(|((a, b), c)| a + b + c)
                        .collect();
                    match self.mode {
                        UzMode::Ideal => {
                            let phases: Vec<C64> = diag.iter().map(|&e| C64::from_polar(1.0, -e * dt)).collect();
                            apply_left(u, &Evolution::Diagonal(phases));
                        }
                        UzMode::OffResonance { .. } => {
                            let mut h = sector.dq.clone();
                            add_diag(&mut h, &diag);
                            let p = HermitianEigen::new(&h)?.propagator(dt);
                            *u = p.dot(u);
                        }
                    }
                }
                for p in procs.iter_mut() {
                    p.step(dt, rng);
                }
            }
            // mixing: physical duration |s|, DQ sign carries the time reversal
            let sign = block.mix.signum();
            let (k, dt) = pieces(block.mix.abs());
            for _ in 0..k {
                for (s, (sector, u)) in self.sectors.iter().zip(us.iter_mut()).enumerate() {
                    let mut h = sector.dq.mapv(|z| z * sign);
                    if noise.during_mixing {
                        add_diag(&mut h, &noise_diag(s, &procs));
                    }
                    let p = HermitianEigen::new(&h)?.propagator(dt);
                    *u = p.dot(u);
                }
                for p in procs.iter_mut() {
                    p.step(dt, rng);
                }
            }
            if idx + 1 >= record_from {
                record.push(self.fidelity(&us));
            }
        }
        Ok(record)
    }

    fn assemble(&self, us: &[Array2<C64>]) -> Result<Operator> {
        let d = 1usize << self.spins;
        let mut mat = Array2::<C64>::zeros((d, d));
        for (sector, u) in self.sectors.iter().zip(us) {
            let st = &sector.basis.states;
            for (r, &sr) in st.iter().enumerate() {
                for (c, &sc) in st.iter().enumerate() {
                    mat[[sr, sc]] = u[[r, c]];
                }
            }
        }
        Operator::new(self.spins, mat, OpTag::Unitary)
    }
}

fn add_diag(h: &mut Array2<C64>, d: &[f64]) {
    for (k, v) in d.iter().enumerate() {
        h[[k, k]] += v;
    }
}

enum Evolution {
    Diagonal(Vec<C64>),
    Dense(Array2<C64>),
}

fn apply_left(u: &mut Array2<C64>, e: &Evolution) {
    match e {
        Evolution::Diagonal(p) => {
            for (mut row, ph) in u.rows_mut().into_iter().zip(p) {
                row *= *ph;
            }
        }
        Evolution::Dense(m) => *u = m.dot(u),
    }
}

/// Propagators memoized by duration; sequences reuse a handful of times.
#[derive(Default)]
struct SectorCache {
    free: HashMap<u64, Evolution>,
    mix: HashMap<u64, Array2<C64>>,
    offres_eig: Option<HermitianEigen>,
}

impl SectorCache {
    fn free(&mut self, engine: &Engine, sector: &Sector, tau: f64) -> Result<&Evolution> {
        let key = tau.to_bits();
        if !self.free.contains_key(&key) {
            let ev = match engine.mode {
                UzMode::Ideal => Evolution::Diagonal(sector.hz.iter().map(|&e| C64::from_polar(1.0, -e * tau)).collect()),
                UzMode::OffResonance { .. } => {
                    if self.offres_eig.is_none() {
                        let mut h = sector.dq.clone();
                        let shift = engine.offset_shift(sector);
                        let diag: Vec<f64> = sector.hz.iter().zip(&shift).map(|(a, b)| a + b).collect();
                        add_diag(&mut h, &diag);
                        self.offres_eig = Some(HermitianEigen::new(&h)?);
                    }
                    Evolution::Dense(self.offres_eig.as_ref().expect("set above").propagator(tau))
                }
            };
            self.free.insert(key, ev);
        }
        Ok(&self.free[&key])
    }

    fn mix(&mut self, sector: &Sector, t: f64) -> &Array2<C64> {
        self.mix
            .entry(t.to_bits())
            .or_insert_with(|| sector.dq_eig.propagator(t))
    }
}

fn chain_ends(network: &SpinNetwork) -> (usize, usize) {
    let c = network.chain();
    (c[0], c[c.len() - 1])
}

/// U_N for the sequence's N cycles on `network` (frequencies as stored).
pub fn sequence_propagator(seq: &PulseSequence, network: &SpinNetwork, mode: UzMode) -> Result<Operator> {
    seq.validate()?;
    let (src, snk) = chain_ends(network);
    let engine = Engine::new(network, src, snk, mode, seq)?;
    let (_, us) = engine.run(&timeline(seq, seq.cycles), usize::MAX)?;
    engine.assemble(&us)
}

/// First-order average Hamiltonian integrated over the sequence,
/// Σ_{i<j} (F_ij 𝒢_ij S_i⁺S_j⁺ + h.c.), with F built from physical mixing
/// times; U_N ≈ U_z(Nτ)·exp(−iH̄).
pub fn average_hamiltonian(seq: &PulseSequence, network: &SpinNetwork) -> Result<Operator> {
    seq.validate()?;
    let n = network.len();
    check_spin_count(n)?;
    let basis = Basis::full(n);
    let mut tb = TermBuilder::new(&basis);
    let w = network.frequencies();
    let t_seconds: Vec<f64> = seq.t_list.iter().map(|t| t / seq.d()).collect();
    let tau = seq.tau();
    for i in 0..n {
        for j in (i + 1)..n {
            let b = network.coupling(i, j);
            if b == 0.0 {
                continue;
            }
            let delta = w[i] + w[j];
            let f = weighting(delta, &seq.tau_list, &t_seconds, b, seq.cycles)?;
            let g = grating(delta, tau, &seq.a_list);
            tb.double_flip(i, j, f * g);
        }
    }
    Operator::new(n, tb.mat, OpTag::Hermitian)
}

/// ‖U_z(Nτ)† U_N − exp(−iH̄)‖_F, the first-order product-formula error.
pub fn trotter_error(seq: &PulseSequence, network: &SpinNetwork) -> Result<f64> {
    let u = sequence_propagator(seq, network, UzMode::Ideal)?;
    let hz = crate::ops::build_hamiltonian(&HamiltonianKind::Zeeman, network)?;
    let uz = crate::ops::expm_hermitian(&hz, seq.cycles as f64 * seq.tau())?;
    let hbar = average_hamiltonian(seq, network)?;
    let avg = crate::ops::expm_hermitian(&hbar, 1.0)?;
    Ok(uz.dagger().dot(&u)?.sub(&avg)?.norm())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub uz_mode: UzMode,
    /// Scan the readout over the last cycle boundary ± one cycle.
    pub scan: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            uz_mode: UzMode::Ideal,
            scan: true,
        }
    }
}

/// Signed fidelities over the readout window and the best magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    /// Block index of the first recorded point (0 = before the sequence).
    pub first_block: usize,
    pub trace: Vec<f64>,
    /// Value at the nominal end of the N-cycle sequence.
    pub nominal: f64,
    pub max_abs: f64,
}

fn readout_window(seq: &PulseSequence, scan: bool) -> (usize, usize) {
    let l = seq.blocks();
    let n = seq.cycles;
    if scan {
        ((n - 1) * l, n + 1)
    } else {
        (n * l, n)
    }
}

fn make_readout(first_block: usize, nominal_block: usize, trace: Vec<f64>) -> Readout {
    let nominal = trace[nominal_block - first_block];
    let max_abs = trace.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    Readout {
        first_block,
        trace,
        nominal,
        max_abs,
    }
}

/// Noiseless transport from the first to the last chain spin.
pub fn simulate(seq: &PulseSequence, network: &SpinNetwork, opts: &SimOptions) -> Result<Readout> {
    seq.validate()?;
    let (src, snk) = chain_ends(network);
    let engine = Engine::new(network, src, snk, opts.uz_mode, seq)?;
    let (first, cycles) = readout_window(seq, opts.scan);
    let (trace, _) = engine.run(&timeline(seq, cycles), first)?;
    Ok(make_readout(first, seq.cycles * seq.blocks(), trace))
}

/// Retags a network with the sequence's gradient along x (spin at x has
/// frequency xω − ω₀).
pub fn tag_for_sequence(network: &SpinNetwork, seq: &PulseSequence) -> Result<SpinNetwork> {
    Ok(apply_gradient(network, &GradientConfig::along_x(seq.omega, seq.omega0)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// N, δ or noise σ depending on the study.
    pub key: f64,
    pub mean: f64,
    pub stderr: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub n: usize,
    pub window: Window,
    pub samples: Vec<Sample>,
    pub seed: Option<u64>,
    pub realizations: usize,
    pub noise: Option<OuNoiseParams>,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    // identical draws (σ = 0, δ = 0) report their common value exactly
    if let Some(&first) = values.first() {
        if values.iter().all(|&v| v == first) {
            return (first, 0.0);
        }
    }
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

fn sample(key: f64, values: Vec<f64>) -> Sample {
    let (mean, stderr) = mean_stderr(&values);
    Sample {
        key,
        mean,
        stderr,
        values,
    }
}

/// Settings shared by the experiment drivers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// Gradient step in units of the reference NN coupling.
    pub omega_over_b: f64,
    pub window: Window,
    pub sim: SimOptions,
    /// Per-bond targets (units of d); parabolic when absent.
    pub targets: Option<Vec<f64>>,
    /// Coupling that fixes d; the first chain bond when absent.
    pub reference_coupling: Option<f64>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            omega_over_b: 20.0,
            window: Window::Rect,
            sim: SimOptions::default(),
            targets: None,
            reference_coupling: None,
        }
    }
}

impl StudyConfig {
    /// Synthesizes the N-cycle sequence for the chain of `network`.
    pub fn sequence(&self, network: &SpinNetwork, cycles: usize) -> Result<PulseSequence> {
        let b = match self.reference_coupling {
            Some(b) => b,
            None => network.chain_nn_couplings()[0],
        };
        let mut params = SynthesisParams::new(network.chain().len(), b, self.omega_over_b * b, cycles, self.window);
        params.targets = self.targets.clone();
        Ok(synthesize_sequence(&params)?.0)
    }
}

/// Max readout fidelity for each cycle count, re-synthesizing every time.
pub fn fidelity_vs_cycles(
    network: &SpinNetwork,
    scope: CouplingScope,
    cycles: &[usize],
    config: &StudyConfig,
) -> Result<SimulationResult> {
    let net = scope.apply(network);
    let samples = cycles
        .par_iter()
        .map(|&n_cycles| {
            let seq = config.sequence(&net, n_cycles)?;
            let tagged = tag_for_sequence(&net, &seq)?;
            let r = simulate(&seq, &tagged, &config.sim)?;
            Ok(sample(n_cycles as f64, vec![r.max_abs]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationResult {
        n: net.chain().len(),
        window: config.window,
        samples,
        seed: None,
        realizations: 1,
        noise: None,
    })
}

/// Ornstein–Uhlenbeck noise settings. `sigma` is the stationary standard
/// deviation (rad/s) of each spin's frequency shift.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuNoiseParams {
    pub tau_c: f64,
    pub sigma: f64,
    pub realizations: usize,
    /// Step cap (s); defaults to min(τ_c/20, shortest segment).
    pub dt_max: Option<f64>,
    /// Whether the noise also acts during mixing blocks. Off by default:
    /// the DQ multiple-pulse block averages away static z fields (which is
    /// why the gradient is absent there), and a slow frequency shift is
    /// averaged the same way.
    #[serde(default)]
    pub during_mixing: bool,
}

impl OuNoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_c > 0.0) || !(self.sigma >= 0.0) || !self.sigma.is_finite() || self.realizations == 0 {
            return Err(Error::InvalidInput(
                "noise needs tau_c > 0, sigma >= 0 and at least one realization".into(),
            ));
        }
        if let Some(dt) = self.dt_max {
            if !(dt > 0.0) {
                return Err(Error::InvalidInput("dt_max must be positive".into()));
            }
        }
        Ok(())
    }

    /// Effective step for `seq`: the explicit cap or min(τ_c/20, shortest
    /// nonzero nominal segment).
    pub fn step_for(&self, seq: &PulseSequence) -> f64 {
        if let Some(dt) = self.dt_max {
            return dt;
        }
        let mut shortest = f64::INFINITY;
        for (&tau, &t) in seq.tau_list.iter().zip(&seq.t_list) {
            let mix = (t / (seq.cycles as f64 * seq.d())).abs();
            for v in [tau, mix] {
                if v > 0.0 {
                    shortest = shortest.min(v);
                }
            }
        }
        shortest.min(self.tau_c / 20.0)
    }
}

/// Exact-discretization OU process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuProcess {
    tau_c: f64,
    sigma: f64,
    x: f64,
}

impl OuProcess {
    /// Starts from the stationary distribution N(0, σ²).
    pub fn new<R: Rng + ?Sized>(tau_c: f64, sigma: f64, rng: &mut R) -> Self {
        let xi: f64 = rng.sample(StandardNormal);
        Self {
            tau_c,
            sigma,
            x: sigma * xi,
        }
    }

    pub fn value(&self) -> f64 {
        self.x
    }

    pub fn step<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) {
        let decay = (-dt / self.tau_c).exp();
        let xi: f64 = rng.sample(StandardNormal);
        self.x = self.x * decay + self.sigma * (1.0 - decay * decay).sqrt() * xi;
    }
}

/// Piecewise-constant OU trajectory on ceil(duration/dt) steps.
pub fn ou_sample(params: &OuNoiseParams, duration: f64, dt: f64, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    if !(dt > 0.0) || !(duration >= 0.0) {
        return Err(Error::InvalidInput("need dt > 0 and duration >= 0".into()));
    }
    if let Some(cap) = params.dt_max {
        if dt > cap {
            return Err(Error::InvalidInput(format!("dt {dt} exceeds dt_max {cap}")));
        }
    }
    let steps = (duration / dt).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = OuProcess::new(params.tau_c, params.sigma, &mut rng);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        out.push(p.value());
        p.step(dt, &mut rng);
    }
    Ok(out)
}

/// RNG for realization `index` of a study seeded with `seed`.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mean of the per-realization max |f| under independent OU dephasing on
/// every spin. Realization i draws from stream i of `seed`, so the result
/// does not depend on thread scheduling.
pub fn simulate_with_noise(
    seq: &PulseSequence,
    network: &SpinNetwork,
    noise: &OuNoiseParams,
    seed: u64,
    opts: &SimOptions,
) -> Result<SimulationResult> {
    seq.validate()?;
    noise.validate()?;
    let (src, snk) = chain_ends(network);
    let engine = Engine::new(network, src, snk, opts.uz_mode, seq)?;
    let (first, cycles) = readout_window(seq, opts.scan);
    let blocks = timeline(seq, cycles);
    let nominal = seq.cycles * seq.blocks();
    let values: Vec<f64> = if noise.sigma == 0.0 {
        let (trace, _) = engine.run(&blocks, first)?;
        let f = make_readout(first, nominal, trace).max_abs;
        vec![f; noise.realizations]
    } else {
        let dt = noise.step_for(seq);
        (0..noise.realizations as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = realization_rng(seed, i);
                let trace = engine.run_noisy(&blocks, first, noise, dt, &mut rng)?;
                Ok(make_readout(first, nominal, trace).max_abs)
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(SimulationResult {
        n: seq.n,
        window: seq.window,
        samples: vec![sample(noise.sigma, values)],
        seed: Some(seed),
        realizations: noise.realizations,
        noise: Some(*noise),
    })
}

/// Mean max |f| over disordered copies of `network` for each δ, with the
/// sequence held fixed. Realization r uses the same random draws for every
/// δ, so curves are compared on common random numbers.
pub fn disorder_study(
    seq: &PulseSequence,
    network: &SpinNetwork,
    deltas: &[f64],
    realizations: usize,
    seed: u64,
    target: PerturbTarget,
    opts: &SimOptions,
) -> Result<SimulationResult> {
    seq.validate()?;
    if realizations == 0 {
        return Err(Error::InvalidInput("need at least one realization".into()));
    }
    let mut samples = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        if !(delta >= 0.0) {
            return Err(Error::InvalidInput("delta must be nonnegative".into()));
        }
        let values = (0..realizations as u64)
            .into_par_iter()
            .map(|r| {
                let net = if delta == 0.0 {
                    network.clone()
                } else {
                    perturb_with(network, delta, &mut realization_rng(seed, r), target)?
                };
                Ok(simulate(seq, &net, opts)?.max_abs)
            })
            .collect::<Result<Vec<_>>>()?;
        samples.push(sample(delta, values));
    }
    Ok(SimulationResult {
        n: seq.n,
        window: seq.window,
        samples,
        seed: Some(seed),
        realizations,
        noise: None,
    })
}

/// Elementwise |a − b| max, for comparing propagators.
pub fn max_abs_diff(a: &Operator, b: &Operator) -> f64 {
    let mut m = 0.0f64;
    Zip::from(a.matrix()).and(b.matrix()).for_each(|x, y| m = m.max((x - y).norm()));
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engineering::ideal_couplings;
    use crate::lattice::unit_chain;
    use crate::ops::{build_hamiltonian, expm_hermitian, spin_op, Axis};
    use std::f64::consts::PI;

    fn chain_seq(n: usize, cycles: usize) -> (PulseSequence, SpinNetwork) {
        let net = unit_chain(n).unwrap().nn_only();
        let (seq, _) = synthesize_sequence(&SynthesisParams::new(n, 1.0, 20.0, cycles, Window::Rect)).unwrap();
        let tagged = tag_for_sequence(&net, &seq).unwrap();
        (seq, tagged)
    }

    #[test]
    fn identity_fidelities() {
        let u = Operator::identity(4).unwrap();
        assert!(transport_fidelity(&u, 0, 3).unwrap().magnitude < 1e-15);
        assert!((transport_fidelity(&u, 2, 2).unwrap().signed - 1.0).abs() < 1e-15);
    }

    #[test]
    fn target_dq_transports_perfectly() {
        for n in 4..=7 {
            let net = unit_chain(n).unwrap();
            let d = ideal_couplings(n, 1.0).unwrap();
            let h = build_hamiltonian(&HamiltonianKind::TargetDq(d), &net).unwrap();
            let u = expm_hermitian(&h, PI / 2.0).unwrap();
            let f = transport_fidelity(&u, 0, n - 1).unwrap();
            assert!((f.magnitude - 1.0).abs() < 1e-9, "n={n}: {f:?}");
        }
    }

    #[test]
    fn sector_propagator_matches_dense_product() {
        let (mut seq, net) = chain_seq(4, 3);
        seq.a_list = vec![0.5, 1.0, 1.5];
        let u = sequence_propagator(&seq, &net, UzMode::Ideal).unwrap();
        let hz = build_hamiltonian(&HamiltonianKind::Zeeman, &net).unwrap();
        let hdq = build_hamiltonian(&HamiltonianKind::DoubleQuantum, &net).unwrap();
        let mut dense = Operator::identity(4).unwrap();
        for k in 0..seq.cycles {
            for h in 0..seq.blocks() {
                let uz = expm_hermitian(&hz, seq.tau_list[h]).unwrap();
                let ud = expm_hermitian(&hdq, seq.mixing_seconds(h, k)).unwrap();
                dense = ud.dot(&uz.dot(&dense).unwrap()).unwrap();
            }
        }
        assert!(max_abs_diff(&u, &dense) < 1e-10);
        assert!(u.unitary_deviation() < 1e-10);
    }

    #[test]
    fn zero_mixing_is_diagonal() {
        let (mut seq, net) = chain_seq(4, 5);
        seq.t_list.iter_mut().for_each(|t| *t = 0.0);
        let u = sequence_propagator(&seq, &net, UzMode::Ideal).unwrap();
        for ((r, c), z) in u.matrix().indexed_iter() {
            if r != c {
                assert!(z.norm() < 1e-14);
            }
        }
        let f = simulate(&seq, &net, &SimOptions::default()).unwrap();
        assert!(f.max_abs < 1e-12);
    }

    #[test]
    fn average_hamiltonian_single_block() {
        let net = unit_chain(3).unwrap().with_frequencies(vec![0.0; 3]).unwrap();
        let seq = PulseSequence {
            n: 3,
            cycles: 1,
            tau_list: vec![0.7],
            t_list: vec![0.9],
            a_list: vec![1.0],
            omega: PI / 0.7,
            omega0: 0.0,
            nn_coupling: 1.0,
            window: Window::Rect,
        };
        let hbar = average_hamiltonian(&seq, &net).unwrap();
        let hdq = build_hamiltonian(&HamiltonianKind::DoubleQuantum, &net).unwrap();
        let expect = hdq.scale(0.9 / seq.d());
        assert!(max_abs_diff(&hbar, &expect) < 1e-14);
    }

    #[test]
    fn synthesized_average_hamiltonian_is_parabolic() {
        let (seq, net) = chain_seq(5, 10);
        let hbar = average_hamiltonian(&seq, &net).unwrap();
        let target = build_hamiltonian(
            &HamiltonianKind::TargetDq(ideal_couplings(5, 1.0).unwrap()),
            &net,
        )
        .unwrap()
        .scale(PI / 2.0);
        assert!(max_abs_diff(&hbar, &target) < 1e-9);
    }

    #[test]
    fn trotter_error_shrinks() {
        let (s8, net) = chain_seq(4, 8);
        let (s16, _) = chain_seq(4, 16);
        let e8 = trotter_error(&s8, &net).unwrap();
        let e16 = trotter_error(&s16, &net).unwrap();
        assert!(e16 < e8);
    }

    #[test]
    fn nn_chain_transports() {
        let (seq, net) = chain_seq(5, 10);
        let r = simulate(&seq, &net, &SimOptions::default()).unwrap();
        assert!(r.max_abs > 0.95, "{r:?}");
        assert!(r.max_abs <= 1.0 + 1e-9);
    }

    #[test]
    fn ou_statistics() {
        let p = OuNoiseParams {
            tau_c: 1.0,
            sigma: 2.0,
            realizations: 1,
            dt_max: None,
            during_mixing: true,
        };
        let dt = 0.1;
        let x = ou_sample(&p, 1e4 * dt * 10.0, dt, 7).unwrap();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64;
        assert!((var / 4.0 - 1.0).abs() < 0.05, "{var}");
        let lag: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (x.len() - 1) as f64 / var;
        assert!((lag - (-dt).exp()).abs() < 0.05);
        let zero = OuNoiseParams { sigma: 0.0, ..p };
        assert!(ou_sample(&zero, 10.0, 0.1, 1).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noisy_engine_without_noise_matches() {
        let (seq, net) = chain_seq(4, 4);
        let engine = Engine::new(&net, 0, 3, UzMode::Ideal, &seq).unwrap();
        let blocks = timeline(&seq, 4);
        let (a, _) = engine.run(&blocks, 0).unwrap();
        let p = OuNoiseParams {
            tau_c: 1.0,
            sigma: 0.0,
            realizations: 1,
            dt_max: Some(0.01),
            during_mixing: true,
        };
        let b = engine
            .run_noisy(&blocks, 0, &p, 0.01, &mut realization_rng(1, 0))
            .unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn uz_mode_parsing() {
        assert_eq!("ideal".parse::<UzMode>().unwrap(), UzMode::Ideal);
        assert_eq!(
            "offres:2.5".parse::<UzMode>().unwrap(),
            UzMode::OffResonance { periods: 2.5 }
        );
        assert!("offres:x".parse::<UzMode>().is_err());
        assert!("nope".parse::<CouplingScope>().is_err());
    }

    #[test]
    fn single_site_ops_in_sectors() {
        // parity sectors cover the space
        let [e, o] = parity_sectors(5);
        assert_eq!(e.len() + o.len(), 32);
        let _ = spin_op(5, 0, Axis::Z).unwrap();
    }
}
