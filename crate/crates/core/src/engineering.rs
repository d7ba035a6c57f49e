// Copyright 2026 HamForge Contributors
// SPDX-License-Identifier: Apache-2.0

//! Grating and weighting functions, apodization windows and the timing
//! solver that turns a target chain into a pulse sequence.
//!
//! A sequence cycle alternates free evolution under the gradient (times
//! τ_1..τ_L, seconds) with double-quantum mixing (times t_1..t_L, in units
//! of 1/d where d = 2b/π). The cycle is repeated N times; cycle k scales its
//! mixing times by the apodization weight a_k.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use ndarray_linalg::{LeastSquaresSvd, Solve, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::C64;

const TWO_PI: f64 = 2.0 * PI;
/// Timing systems with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Σ_k a_k e^{ikτδ}.
pub fn grating(delta: f64, tau: f64, weights: &[f64]) -> C64 {
    let x = tau * delta;
    weights
        .iter()
        .enumerate()
        .map(|(k, &a)| C64::from_polar(a, k as f64 * x))
        .sum()
}

/// Closed form of the unapodized grating,
/// e^{i(N−1)x/2} sin(Nx/2)/sin(x/2) with x = τδ (N at the maxima).
pub fn grating_closed_form(delta: f64, tau: f64, cycles: usize) -> C64 {
    let x = tau * delta;
    let n = cycles as f64;
    let s = (x / 2.0).sin();
    if s.abs() < 1e-8 {
        // near a maximum every phasor is aligned up to O(s)
        return grating(delta, tau, &vec![1.0; cycles]);
    }
    C64::from_polar((n * x / 2.0).sin() / s, (n - 1.0) * x / 2.0)
}

/// F = (b/N) Σ_h t_h exp(iδ Σ_{k≤h} τ_k).
pub fn weighting(delta: f64, taus: &[f64], ts: &[f64], b: f64, cycles: usize) -> Result<C64> {
    if taus.len() != ts.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} free times vs {} mixing times",
            taus.len(),
            ts.len()
        )));
    }
    let mut cum = 0.0;
    let mut acc = C64::new(0.0, 0.0);
    for (&tau, &t) in taus.iter().zip(ts) {
        cum += tau;
        acc += C64::from_polar(t, delta * cum);
    }
    Ok(acc * (b / cycles as f64))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    #[default]
    Rect,
    Sinc {
        #[serde(rename = "W")]
        w: f64,
    },
}

impl Window {
    /// Apodization weights a_0..a_{N−1}.
    pub fn weights(&self, cycles: usize) -> Result<Vec<f64>> {
        match *self {
            Window::Rect => Ok(vec![1.0; cycles]),
            Window::Sinc { w: 0.0 } => Ok(vec![1.0; cycles]),
            Window::Sinc { w } => sinc_window(cycles, w),
        }
    }
}

/// a_k = sin(W(k − N/2)) / (W(k − N/2)), rescaled to Σ a_k = N.
pub fn sinc_window(cycles: usize, w: f64) -> Result<Vec<f64>> {
    if cycles == 0 {
        return Err(Error::InvalidInput("need at least one cycle".into()));
    }
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::InvalidInput("window width W must be positive".into()));
    }
    let half = cycles as f64 / 2.0;
    let raw: Vec<f64> = (0..cycles)
        .map(|k| {
            let x = w * (k as f64 - half);
            if x == 0.0 {
                1.0
            } else {
                x.sin() / x
            }
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    if sum.abs() < 1e-9 {
        return Err(Error::InvalidInput(format!(
            "sinc window with W = {w} sums to zero over {cycles} cycles"
        )));
    }
    let s = cycles as f64 / sum;
    Ok(raw.into_iter().map(|a| a * s).collect())
}

/// Parabolic couplings d_j = d√(j(n−j)), j = 1..n−1.
pub fn ideal_couplings(n: usize, d: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput("chain needs n >= 2".into()));
    }
    if !(d > 0.0) {
        return Err(Error::InvalidInput("d must be positive".into()));
    }
    Ok((1..n).map(|j| d * ((j * (n - j)) as f64).sqrt()).collect())
}

/// Targets for a non-uniformly spaced chain, in units of d: the parabolic
/// profile times b_ref/b_{j,j+1} = (r_j/r_ref)³, so that each weaker bond
/// asks for proportionally more mixing.
pub fn ideal_couplings_nonuniform(positions: &[f64], reference_spacing: f64) -> Result<Vec<f64>> {
    let n = positions.len();
    let base = ideal_couplings(n, 1.0)?;
    let mut out = Vec::with_capacity(n - 1);
    for (j, w) in positions.windows(2).enumerate() {
        let r = w[1] - w[0];
        if !(r > 0.0) {
            return Err(Error::NonMonotone);
        }
        out.push(base[j] * (r / reference_spacing).powi(3));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub n: usize,
    pub cycles: usize,
    /// Free evolution times (s); they sum to π/ω.
    pub tau_list: Vec<f64>,
    /// Mixing times in units of 1/d.
    pub t_list: Vec<f64>,
    pub a_list: Vec<f64>,
    pub omega: f64,
    pub omega0: f64,
    /// Reference NN coupling b (rad/s) fixing d = 2b/π.
    pub nn_coupling: f64,
    pub window: Window,
}

impl PulseSequence {
    pub fn blocks(&self) -> usize {
        self.t_list.len()
    }

    /// Cycle period of the gradient evolution, τ = Σ τ_j.
    pub fn tau(&self) -> f64 {
        self.tau_list.iter().sum()
    }

    /// d = 2b/π: with this scale the N-cycle sequence performs one full
    /// transport.
    pub fn d(&self) -> f64 {
        2.0 * self.nn_coupling / PI
    }

    /// Physical duration (s, signed) of mixing block `h` in cycle `k`.
    pub fn mixing_seconds(&self, h: usize, k: usize) -> f64 {
        self.a_list[k % self.cycles] * self.t_list[h] / (self.cycles as f64 * self.d())
    }

    /// c_h = Σ_{k≤h} τ_k / τ.
    pub fn cumulative_fractions(&self) -> Vec<f64> {
        let tau = self.tau();
        let mut acc = 0.0;
        self.tau_list
            .iter()
            .map(|t| {
                acc += t;
                acc / tau
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_list.len() != self.t_list.len() {
            return Err(Error::DimensionMismatch(
                "tau_list and t_list lengths differ".into(),
            ));
        }
        if self.tau_list.is_empty() {
            return Err(Error::InvalidInput("sequence has no blocks".into()));
        }
        if self.cycles == 0 || self.a_list.len() != self.cycles {
            return Err(Error::InvalidInput(
                "apodization needs one weight per cycle".into(),
            ));
        }
        if self.tau_list.iter().any(|&t| !(t >= 0.0)) {
            return Err(Error::InvalidInput("free times must be nonnegative".into()));
        }
        if !(self.nn_coupling > 0.0) || !(self.omega > 0.0) {
            return Err(Error::InvalidInput(
                "omega and nn coupling must be positive".into(),
            ));
        }
        let sum: f64 = self.a_list.iter().sum();
        if (sum - self.cycles as f64).abs() > 1e-9 * self.cycles as f64 {
            return Err(Error::InvalidInput(format!(
                "apodization weights sum to {sum}, expected {}",
                self.cycles
            )));
        }
        Ok(())
    }
}

/// Free-time pattern as fractions of τ: all 1/n except the middle block,
/// which takes 3/n (odd n, L = n−2) or 2/n (even n, L = n−1).
pub fn free_time_fractions(n: usize) -> Result<Vec<f64>> {
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "sequence synthesis needs n >= 3, got {n}"
        )));
    }
    let (blocks, middle) = if n % 2 == 1 { (n - 2, 3.0) } else { (n - 1, 2.0) };
    let mut f = vec![1.0 / n as f64; blocks];
    f[blocks.div_ceil(2) - 1] = middle / n as f64;
    Ok(f)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisParams {
    pub n: usize,
    /// Reference NN coupling b (rad/s).
    pub nn_coupling: f64,
    /// Gradient step ω (rad/s).
    pub omega: f64,
    pub cycles: usize,
    pub window: Window,
    /// Per-bond targets in units of d; `None` means the parabolic profile.
    pub targets: Option<Vec<f64>>,
}

impl SynthesisParams {
    pub fn new(n: usize, nn_coupling: f64, omega: f64, cycles: usize, window: Window) -> Self {
        Self {
            n,
            nn_coupling,
            omega,
            cycles,
            window,
            targets: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairAmplitude {
    /// Chain positions (0-based) of the pair.
    pub i: usize,
    pub j: usize,
    /// Target amplitude in units of d (zero for pairs to be removed).
    pub target: f64,
    /// F_ij 𝒢_ij / (b_ij N), units of 1/d·d = dimensionless target units.
    pub achieved: C64,
    /// Relative error for kept pairs, absolute amplitude otherwise.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineeringReport {
    pub pairs: Vec<PairAmplitude>,
    /// Max relative residual over NN pairs.
    pub max_kept_residual: f64,
    /// Max |amplitude| over NNN pairs, the ones the filter places at the
    /// grating minima.
    pub max_suppressed_leakage: f64,
    /// Max |Σ t_h sin(phase)| over NN pairs; zero for a DQ-form result.
    pub max_sine_residual: f64,
    pub condition_number: f64,
    /// Least-squares residual when the targets were not mirror symmetric.
    pub lsq_residual: f64,
}

/// Solves for the mixing times of an n-spin chain.
///
/// Sets ω₀ = ω/2 and τ = π/ω so NN pair sums δ_{p,p+1} = 2pω land on the
/// grating maxima and NNN sums on odd multiples of π. With the mirror
/// constraint t_h = t_{L−h} (h < L) the sine conditions vanish identically
/// and the cosine conditions Σ_h t_h cos(2pπc_h) = target_p form a square
/// system. Non-symmetric targets are fitted by least squares.
pub fn synthesize_sequence(params: &SynthesisParams) -> Result<(PulseSequence, EngineeringReport)> {
    let n = params.n;
    let fractions = free_time_fractions(n)?;
    if !(params.omega > 0.0) || !(params.nn_coupling > 0.0) {
        return Err(Error::InvalidInput(
            "omega and nn coupling must be positive".into(),
        ));
    }
    if params.cycles == 0 {
        return Err(Error::InvalidInput("need at least one cycle".into()));
    }
    let targets = match &params.targets {
        Some(t) if t.len() != n - 1 => {
            return Err(Error::DimensionMismatch(format!(
                "{} targets for {} bonds",
                t.len(),
                n - 1
            )))
        }
        Some(t) => t.clone(),
        None => ideal_couplings(n, 1.0)?,
    };
    let a_list = params.window.weights(params.cycles)?;
    let blocks = fractions.len();
    let cum: Vec<f64> = fractions
        .iter()
        .scan(0.0, |acc, f| {
            *acc += f;
            Some(*acc)
        })
        .collect();
    // unknowns: mirror pairs g = 0..G (t_g = t_{L−2−g}) and the last block
    let mirror = (blocks - 1) / 2;
    let unknowns = mirror + 1;
    let symmetric = (0..targets.len())
        .all(|j| (targets[j] - targets[targets.len() - 1 - j]).abs() <= 1e-12 * targets[j].abs().max(1.0));
    let bonds: Vec<usize> = if symmetric {
        (1..=n.div_ceil(2).min(n - 1)).take(unknowns).collect()
    } else {
        (1..n).collect()
    };
    let rows = bonds.len();
    let mut m = Array2::<f64>::zeros((rows, unknowns));
    let mut rhs = Array1::<f64>::zeros(rows);
    for (r, &p) in bonds.iter().enumerate() {
        let phase = |h: usize| (TWO_PI * p as f64 * cum[h]).cos();
        for g in 0..mirror {
            m[[r, g]] = phase(g) + phase(blocks - 2 - g);
        }
        m[[r, mirror]] = phase(blocks - 1);
        rhs[r] = targets[p - 1];
    }
    let condition = condition_number(&m)?;
    if !(condition < MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    let (u, lsq_residual) = if symmetric {
        debug_assert_eq!(rows, unknowns);
        (m.solve(&rhs)?, 0.0)
    } else {
        let sol = m.least_squares(&rhs)?;
        let res = (&m.dot(&sol.solution) - &rhs)
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        (sol.solution, res)
    };
    let mut t_list = vec![0.0; blocks];
    for g in 0..mirror {
        t_list[g] = u[g];
        t_list[blocks - 2 - g] = u[g];
    }
    t_list[blocks - 1] = u[mirror];

    let tau = PI / params.omega;
    let seq = PulseSequence {
        n,
        cycles: params.cycles,
        tau_list: fractions.iter().map(|f| f * tau).collect(),
        t_list,
        a_list,
        omega: params.omega,
        omega0: params.omega / 2.0,
        nn_coupling: params.nn_coupling,
        window: params.window,
    };
    let mut report = engineering_report(&seq, &targets)?;
    report.condition_number = condition;
    report.lsq_residual = lsq_residual;
    Ok((seq, report))
}

fn condition_number(m: &Array2<f64>) -> Result<f64> {
    let (_, s, _) = m.svd(false, false)?;
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

/// Gradient frequency of chain site `pos` (0-based, at x = pos + 1).
fn chain_frequency(seq: &PulseSequence, pos: usize) -> f64 {
    (pos + 1) as f64 * seq.omega - seq.omega0
}

/// Engineered amplitudes F𝒢/(bN) of every chain pair of an ideal,
/// gradient-tagged chain, compared with `targets` (units of d).
#[allow(clippy::needless_range_loop)]
pub fn engineering_report(seq: &PulseSequence, targets: &[f64]) -> Result<EngineeringReport> {
    let n = seq.n;
    let tau = seq.tau();
    let mut pairs = Vec::new();
    let (mut kept, mut leak, mut sine) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let delta = chain_frequency(seq, i) + chain_frequency(seq, j);
            let f = weighting(delta, &seq.tau_list, &seq.t_list, 1.0, seq.cycles)?;
            let g = grating(delta, tau, &seq.a_list);
            let achieved = f * g;
            let (target, residual) = if j == i + 1 {
                let target = targets[i];
                // phase-aligned DQ amplitude: the unapodized per-cycle sum
                let per_cycle = f * seq.cycles as f64;
                sine = sine.max(per_cycle.im.abs());
                let r = (achieved - C64::new(target, 0.0)).norm() / target.abs();
                kept = kept.max(r);
                (target, r)
            } else {
                let r = achieved.norm();
                if j == i + 2 {
                    leak = leak.max(r);
                }
                (0.0, r)
            };
            pairs.push(PairAmplitude {
                i,
                j,
                target,
                achieved,
                residual,
            });
        }
    }
    Ok(EngineeringReport {
        pairs,
        max_kept_residual: kept,
        max_suppressed_leakage: leak,
        max_sine_residual: sine,
        condition_number: f64::NAN,
        lsq_residual: 0.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phasor {
    /// Phase in [0, 2π).
    pub angle: f64,
    pub weight: f64,
}

/// Phases δ·Σ_{k≤h}τ_k (mod 2π) acquired by a pair with pair sum `delta`
/// at each mixing block, weighted by the mixing times.
pub fn phasors(seq: &PulseSequence, delta: f64) -> Vec<Phasor> {
    let mut cum = 0.0;
    seq.tau_list
        .iter()
        .zip(&seq.t_list)
        .map(|(&tau, &t)| {
            cum += tau;
            Phasor {
                angle: (delta * cum).rem_euclid(TWO_PI),
                weight: t,
            }
        })
        .collect()
}

/// Phasors of the NN chain bond `p` (1-based, spins p and p+1).
pub fn phasor_diagram(seq: &PulseSequence, p: usize) -> Result<Vec<Phasor>> {
    if p == 0 || p >= seq.n {
        return Err(Error::InvalidInput(format!(
            "bond {p} outside 1..{}",
            seq.n - 1
        )));
    }
    let delta = chain_frequency(seq, p - 1) + chain_frequency(seq, p);
    Ok(phasors(seq, delta))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selectivity {
    pub cycles: usize,
    /// Mean |𝒢| over the primary maxima [0, π/N] ∪ [2π − π/N, 2π].
    pub main_lobe_mean: f64,
    /// Mean |𝒢| over the sidelobe region [π/N, 2π − π/N].
    pub sidelobe_mean: f64,
    pub ratio: f64,
    /// First zero of the grating in the phase variable τδ.
    pub first_zero: f64,
}

/// Mean grating amplitude in the main lobe versus the sidelobes.
pub fn grating_selectivity(cycles: usize) -> Result<Selectivity> {
    if cycles < 3 {
        return Err(Error::InvalidInput("selectivity needs N >= 3".into()));
    }
    let nf = cycles as f64;
    let amp = |x: f64| grating_closed_form(x, 1.0, cycles).norm();
    // |𝒢| is symmetric about π, so each region reduces to its left half
    let main = simpson(amp, 0.0, PI / nf, 4096) / (PI / nf);
    let side = simpson(amp, PI / nf, PI, 4096 * cycles) / (PI - PI / nf);

    // real amplitude from the direct phasor sum, which changes sign at the
    // first zero
    let ones = vec![1.0; cycles];
    let real_amp = |x: f64| (grating(x, 1.0, &ones) * C64::from_polar(1.0, -(nf - 1.0) * x / 2.0)).re;
    let (mut lo, mut hi) = (PI / nf, 3.0 * PI / nf);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if real_amp(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(Selectivity {
        cycles,
        main_lobe_mean: main,
        sidelobe_mean: side,
        ratio: main / side,
        first_zero: 0.5 * (lo + hi),
    })
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}
