// Copyright 2026 HamForge Contributors
// SPDX-License-Identifier: Apache-2.0

//! JSON file formats. Frequencies and couplings in files are kHz
//! (value/2π·10⁻³); positions are in units of r₀.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::engineering::{PulseSequence, Window};
use crate::error::{Error, Result};
use crate::lattice::{
    apply_gradient, CouplingModel, Geometry, GradientConfig, PhysicalConstants, SpinNetwork, Vec3, FAP_SPACING_M,
};
use crate::ops::{OpTag, Operator, C64};

/// rad/s per kHz.
pub const RAD_PER_KHZ: f64 = 2.0 * std::f64::consts::PI * 1e3;

pub fn khz_to_rad(v: f64) -> f64 {
    v * RAD_PER_KHZ
}

pub fn rad_to_khz(v: f64) -> f64 {
    v / RAD_PER_KHZ
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinEntry {
    pub id: usize,
    pub pos: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientEntry {
    pub omega: f64,
    pub omega0: f64,
    pub direction: Vec3,
    #[serde(default)]
    pub origin: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplingsEntry {
    /// Only "dipolar" is recognized.
    Named(String),
    /// [i, j, b_ij in kHz] by spin id.
    Explicit(Vec<(usize, usize, f64)>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub spins: Vec<SpinEntry>,
    pub chain: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<GradientEntry>,
    pub couplings: CouplingsEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<PhysicalConstants>,
    /// r₀ in nm for dipolar couplings; fluorapatite's 0.3442 nm by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<CouplingModel>,
    /// Explicit frequencies (kHz) for networks without a gradient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies_khz: Option<Vec<f64>>,
}

impl NetworkFile {
    pub fn to_network(&self) -> Result<SpinNetwork> {
        let index: HashMap<usize, usize> = self.spins.iter().enumerate().map(|(k, s)| (s.id, k)).collect();
        if index.len() != self.spins.len() {
            return Err(Error::InvalidInput("duplicate spin ids".into()));
        }
        let lookup = |id: usize| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("unknown spin id {id}")))
        };
        let positions: Vec<Vec3> = self.spins.iter().map(|s| s.pos).collect();
        let chain = self.chain.iter().map(|&id| lookup(id)).collect::<Result<Vec<_>>>()?;
        let mut net = match &self.couplings {
            CouplingsEntry::Named(name) if name == "dipolar" => {
                let constants = self.constants.unwrap_or_default();
                constants.validate()?;
                let spacing = self.spacing_nm.map_or(FAP_SPACING_M, |nm| nm * 1e-9);
                SpinNetwork::dipolar(
                    positions,
                    chain,
                    Geometry {
                        spacing,
                        constants,
                        model: self.model.unwrap_or_default(),
                    },
                )?
            }
            CouplingsEntry::Named(other) => {
                return Err(Error::InvalidInput(format!(
                    "unknown coupling source '{other}' (expected \"dipolar\" or a list)"
                )))
            }
            CouplingsEntry::Explicit(list) => {
                let n = positions.len();
                let mut c = Array2::zeros((n, n));
                for &(i, j, b) in list {
                    let (a, b_idx) = (lookup(i)?, lookup(j)?);
                    if a == b_idx {
                        return Err(Error::InvalidInput(format!("self coupling on spin {i}")));
                    }
                    c[[a, b_idx]] = khz_to_rad(b);
                    c[[b_idx, a]] = khz_to_rad(b);
                }
                SpinNetwork::new(positions, c, chain)?
            }
        };
        if let Some(g) = &self.gradient {
            let grad = GradientConfig {
                omega: khz_to_rad(g.omega),
                omega0: khz_to_rad(g.omega0),
                direction: g.direction,
                origin: g.origin,
            };
            grad.validate()?;
            net = apply_gradient(&net, &grad);
        } else if let Some(f) = &self.frequencies_khz {
            net = net.with_frequencies(f.iter().map(|&v| khz_to_rad(v)).collect())?;
        }
        Ok(net)
    }

    pub fn from_network(net: &SpinNetwork) -> Self {
        let spins = net
            .positions()
            .iter()
            .enumerate()
            .map(|(id, &pos)| SpinEntry { id, pos })
            .collect();
        let (couplings, constants, spacing_nm, model) = match net.geometry() {
            Some(g) => (
                CouplingsEntry::Named("dipolar".into()),
                Some(g.constants),
                Some(g.spacing * 1e9),
                Some(g.model),
            ),
            None => {
                let n = net.len();
                let mut list = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        let b = net.coupling(i, j);
                        if b != 0.0 {
                            list.push((i, j, rad_to_khz(b)));
                        }
                    }
                }
                (CouplingsEntry::Explicit(list), None, None, None)
            }
        };
        let gradient = net.gradient().map(|g| GradientEntry {
            omega: rad_to_khz(g.omega),
            omega0: rad_to_khz(g.omega0),
            direction: g.direction,
            origin: g.origin,
        });
        let frequencies_khz = match gradient {
            Some(_) => None,
            None => Some(net.frequencies().iter().map(|&w| rad_to_khz(w)).collect()),
        };
        Self {
            spins,
            chain: net.chain().to_vec(),
            gradient,
            couplings,
            constants,
            spacing_nm,
            model,
            frequencies_khz,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceFile {
    pub n: usize,
    #[serde(rename = "N")]
    pub cycles: usize,
    pub omega_khz: f64,
    pub omega0_khz: f64,
    pub tau_list_s: Vec<f64>,
    pub t_list_units_inv_d: Vec<f64>,
    pub window: Window,
    /// Reference NN coupling b/2π that fixes d = 2b/π.
    pub b_khz: f64,
    /// Apodization weights; regenerated from `window` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_list: Option<Vec<f64>>,
}

impl SequenceFile {
    pub fn from_sequence(seq: &PulseSequence) -> Self {
        Self {
            n: seq.n,
            cycles: seq.cycles,
            omega_khz: rad_to_khz(seq.omega),
            omega0_khz: rad_to_khz(seq.omega0),
            tau_list_s: seq.tau_list.clone(),
            t_list_units_inv_d: seq.t_list.clone(),
            window: seq.window,
            b_khz: rad_to_khz(seq.nn_coupling),
            a_list: Some(seq.a_list.clone()),
        }
    }

    pub fn to_sequence(&self) -> Result<PulseSequence> {
        let a_list = match &self.a_list {
            Some(a) => a.clone(),
            None => self.window.weights(self.cycles)?,
        };
        let seq = PulseSequence {
            n: self.n,
            cycles: self.cycles,
            tau_list: self.tau_list_s.clone(),
            t_list: self.t_list_units_inv_d.clone(),
            a_list,
            omega: khz_to_rad(self.omega_khz),
            omega0: khz_to_rad(self.omega0_khz),
            nn_coupling: khz_to_rad(self.b_khz),
            window: self.window,
        };
        seq.validate()?;
        Ok(seq)
    }
}

/// Dense operator as row-major [re, im] pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorDump {
    pub spins: usize,
    pub dim: usize,
    pub tag: OpTag,
    pub data: Vec<[f64; 2]>,
}

impl OperatorDump {
    pub fn from_operator(op: &Operator) -> Self {
        Self {
            spins: op.spins(),
            dim: op.dim(),
            tag: op.tag(),
            data: op.matrix().iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn to_operator(&self) -> Result<Operator> {
        if self.dim != 1 << self.spins || self.data.len() != self.dim * self.dim {
            return Err(Error::DimensionMismatch("operator dump has inconsistent size".into()));
        }
        let mat = Array2::from_shape_vec(
            (self.dim, self.dim),
            self.data.iter().map(|&[re, im]| C64::new(re, im)).collect(),
        )
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Operator::new(self.spins, mat, self.tag)
    }
}
