// Copyright 2026 HamForge Contributors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use hamforge::dynamics::{
    disorder_study, simulate, simulate_with_noise, tag_for_sequence, CouplingScope, OuNoiseParams, SimOptions,
    StudyConfig, UzMode,
};
use hamforge::engineering::{grating, synthesize_sequence, weighting, PulseSequence, SynthesisParams, Window};
use hamforge::io::{khz_to_rad, read_json, NetworkFile, SequenceFile};
use hamforge::lattice::{
    apply_gradient, build_lattice, CouplingModel, GradientConfig, LatticeKind, PerturbTarget, PhysicalConstants,
    SpinNetwork,
};
use hamforge::ops::{build_hamiltonian, spherical_tensor, HamiltonianKind, TensorLabel};
use hamforge::openg::{clifford_rotations, dq_recipe, solve_rotation_weights, RotationStep};

const DEFAULT_W: f64 = 5.0 * PI / 8.0;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] hamforge::Error),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

type Result<T> = std::result::Result<T, RunError>;

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Solve for the mixing times of an n-spin chain.
    Synth(SynthArgs),
    /// Maximum transport fidelity versus cycle count N.
    Simulate(SimulateArgs),
    /// Fidelity under Ornstein–Uhlenbeck frequency noise.
    Noise(NoiseArgs),
    /// Fidelity under positional disorder.
    Disorder(DisorderArgs),
    /// Engineering filter |F𝒢| of a synthesized sequence.
    Grating(GratingArgs),
    /// Generate a network file for a standard lattice.
    Lattice(LatticeArgs),
    /// Tensor-rotation report for the double-quantum recipe.
    Tensors(TensorsArgs),
    /// Regenerate a CSV from its JSON sidecar.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Rect,
    Sinc,
}

fn window_from(kind: WindowKind, w: f64) -> Window {
    match kind {
        WindowKind::Rect => Window::Rect,
        WindowKind::Sinc => Window::Sinc { w },
    }
}

/// W = 0 is the rectangular window.
fn window_for_w(w: f64) -> Window {
    if w == 0.0 {
        Window::Rect
    } else {
        Window::Sinc { w }
    }
}

fn parse_target(s: &str) -> std::result::Result<PerturbTarget, String> {
    match s {
        "off_chain" | "off-chain" => Ok(PerturbTarget::OffChain),
        "all_spins" | "all-spins" => Ok(PerturbTarget::AllSpins),
        "chain_mirror" | "chain-mirror" => Ok(PerturbTarget::ChainMirror),
        _ => Err(format!("unknown target '{s}' (off_chain, all_spins, chain_mirror)")),
    }
}

fn parse_model(s: &str) -> std::result::Result<CouplingModel, String> {
    match s {
        "isotropic" | "isotropic_r3" => Ok(CouplingModel::IsotropicR3),
        "angular" => Ok(CouplingModel::Angular),
        _ => Err(format!("unknown coupling model '{s}' (isotropic, angular)")),
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct NetworkArgs {
    /// Network JSON file (kHz, positions in r₀); replaces --lattice.
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Generated lattice: chain, trigonal or honeycomb.
    #[arg(long)]
    pub lattice: Option<LatticeKind>,
    /// Lattice size (chain length for chain and trigonal).
    #[arg(long, default_value_t = 5)]
    pub size: usize,
    /// NN spacing r₀ of generated lattices (nm).
    #[arg(long, default_value_t = 0.3442)]
    pub spacing_nm: f64,
    /// Couplings kept: nn_only, all (chain spins only) or network.
    #[arg(long, default_value = "network")]
    pub scope: CouplingScope,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SeqArgs {
    /// Sequence JSON file; by default one is synthesized for the chain.
    #[arg(long)]
    pub sequence: Option<PathBuf>,
    /// Gradient step ω in units of the first chain coupling.
    #[arg(long, default_value_t = 20.0)]
    pub omega_over_b: f64,
    /// Mixing-time window.
    #[arg(long, value_enum, default_value = "rect")]
    pub window: WindowKind,
    /// Sinc window parameter W (rad).
    #[arg(long = "W", default_value_t = DEFAULT_W)]
    pub w: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Chain length (at least 3).
    #[arg(long)]
    pub n: usize,
    /// Number of cycles; defaults to n.
    #[arg(long = "N")]
    pub cycles: Option<usize>,
    /// Reference NN coupling b/2π (kHz).
    #[arg(long, default_value_t = 1.289)]
    pub b_khz: f64,
    /// Gradient step ω/2π (kHz); defaults to 20 b.
    #[arg(long)]
    pub omega_khz: Option<f64>,
    /// Mixing-time window.
    #[arg(long, value_enum, default_value = "rect")]
    pub window: WindowKind,
    /// Sinc window parameter W (rad).
    #[arg(long = "W", default_value_t = DEFAULT_W)]
    pub w: f64,
    /// Bond targets in units of d; parabolic when omitted.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<f64>,
    /// Sequence JSON output (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Engineering report CSV.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub net: NetworkArgs,
    #[command(flatten)]
    pub seq: SeqArgs,
    /// Cycle counts to sweep (ignored with --sequence).
    #[arg(long = "N", value_delimiter = ',', default_value = "10")]
    pub cycles: Vec<usize>,
    /// Free evolution: ideal or offres[:periods].
    #[arg(long, default_value = "ideal")]
    pub uz_mode: UzMode,
    /// Scan the readout over the final cycle ± one cycle.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub scan: bool,
    /// Keep the network's frequencies instead of the sequence gradient.
    #[arg(long)]
    pub keep_frequencies: bool,
    /// CSV output (stdout when omitted); a .json sidecar is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct NoiseArgs {
    #[command(flatten)]
    pub net: NetworkArgs,
    /// Gradient step ω in units of the first chain coupling.
    #[arg(long, default_value_t = 20.0)]
    pub omega_over_b: f64,
    /// Number of cycles N.
    #[arg(long = "N", default_value_t = 20)]
    pub cycles: usize,
    /// Noise amplitudes σ/2π (kHz).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub sigma: Vec<f64>,
    /// Correlation time τ_c (ms); defaults to 2/b.
    #[arg(long)]
    pub tau_c: Option<f64>,
    /// Sinc window parameters; W = 0 is the rectangular window.
    #[arg(long = "W", value_delimiter = ',', default_value = "0,1.9634954084936207")]
    pub w: Vec<f64>,
    /// Noise realizations per point.
    #[arg(long, default_value_t = 20)]
    pub realizations: usize,
    /// Master RNG seed; realization i uses stream i.
    #[arg(long, env = "HAMFORGE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Largest integration step (ms).
    #[arg(long)]
    pub dt_max: Option<f64>,
    /// Let the noise act during mixing blocks as well.
    #[arg(long)]
    pub during_mixing: bool,
    /// Free evolution: ideal or offres[:periods].
    #[arg(long, default_value = "ideal")]
    pub uz_mode: UzMode,
    /// Scan the readout over the final cycle ± one cycle.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub scan: bool,
    /// CSV output (stdout when omitted); a .json sidecar is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DisorderArgs {
    /// Defaults to a trigonal lattice so that off-chain spins exist.
    #[command(flatten)]
    pub net: NetworkArgs,
    #[command(flatten)]
    pub seq: SeqArgs,
    /// Number of cycles N.
    #[arg(long = "N", default_value_t = 20)]
    pub cycles: usize,
    /// Disorder strengths δ (fraction of the NN spacing).
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.15,0.2")]
    pub delta: Vec<f64>,
    /// Disorder realizations per point.
    #[arg(long, default_value_t = 20)]
    pub realizations: usize,
    /// Master RNG seed; realization i uses stream i.
    #[arg(long, env = "HAMFORGE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Displaced spins: off_chain, all_spins or chain_mirror.
    #[arg(long, default_value = "off_chain", value_parser = parse_target)]
    pub target: PerturbTarget,
    /// Free evolution: ideal or offres[:periods].
    #[arg(long, default_value = "ideal")]
    pub uz_mode: UzMode,
    /// Scan the readout over the final cycle ± one cycle.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub scan: bool,
    /// CSV output (stdout when omitted); a .json sidecar is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GratingArgs {
    /// Chain length.
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    /// Number of cycles N.
    #[arg(long = "N", default_value_t = 10)]
    pub cycles: usize,
    /// Sinc window parameter W (rad) for the apodized column.
    #[arg(long = "W", default_value_t = DEFAULT_W)]
    pub w: f64,
    /// Samples over the phase range [0, 2πn].
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
    /// CSV output (stdout when omitted); a .json sidecar is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LatticeArgs {
    /// Lattice kind: chain, trigonal or honeycomb.
    #[arg(long, default_value = "chain")]
    pub kind: LatticeKind,
    /// Lattice size (chain length for chain and trigonal).
    #[arg(long, default_value_t = 5)]
    pub size: usize,
    /// NN spacing r₀ (nm).
    #[arg(long, default_value_t = 0.3442)]
    pub spacing_nm: f64,
    /// Coupling model: isotropic or angular.
    #[arg(long, default_value = "isotropic", value_parser = parse_model)]
    pub model: CouplingModel,
    /// Gradient step ω/2π along x (kHz).
    #[arg(long)]
    pub gradient_khz: Option<f64>,
    /// Offset ω₀/2π (kHz); defaults to half the gradient step.
    #[arg(long)]
    pub omega0_khz: Option<f64>,
    /// Network JSON output (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TensorsArgs {
    /// Time spent under the secular coupling.
    #[arg(long, default_value_t = 0.5)]
    pub t1: f64,
    /// Time spent after the π/2 rotation about y.
    #[arg(long, default_value_t = 1.0)]
    pub t2: f64,
    /// Also fit nonnegative weights over the 24 cube rotations.
    #[arg(long)]
    pub solve: bool,
    /// Report JSON output (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Sidecar JSON written next to a CSV.
    pub sidecar: PathBuf,
    /// Where to write the regenerated CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Resolved file inputs, embedded in sidecars so replays do not depend on
/// the original files.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Inputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceFile>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub inputs: Inputs,
}

/// A command's text outputs.
struct Produced {
    main: String,
    main_is_csv: bool,
    report: Option<String>,
    inputs: Inputs,
}

impl Produced {
    fn csv(&self) -> Option<&str> {
        if self.main_is_csv {
            Some(&self.main)
        } else {
            self.report.as_deref()
        }
    }
}

fn read_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    read_json(path).map_err(|e| match e {
        hamforge::Error::Io(source) => RunError::File {
            path: path.to_path_buf(),
            source,
        },
        other => RunError::Usage(format!("{}: {other}", path.display())),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| RunError::File {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_sidecar(csv: &Path, command: &Command, inputs: &Inputs) -> Result<()> {
    let car = Sidecar {
        tool: "hamforge".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.clone(),
        inputs: inputs.clone(),
    };
    let mut text = serde_json::to_string_pretty(&car)?;
    text.push('\n');
    write_text(Some(&sidecar_path(csv)), &text)
}

pub fn run(command: &Command) -> Result<()> {
    if let Command::Replay(args) = command {
        let car: Sidecar = read_file(&args.sidecar)?;
        if matches!(car.command, Command::Replay(_)) {
            return Err(RunError::Usage("sidecar holds a replay command".into()));
        }
        let produced = produce(&car.command, Some(&car.inputs))?;
        let csv = produced
            .csv()
            .ok_or_else(|| RunError::Usage("sidecar command produces no CSV".into()))?;
        return write_text(args.out.as_deref(), csv);
    }
    let produced = produce(command, None)?;
    let (out, report) = match command {
        Command::Synth(a) => (a.out.as_deref(), a.report.as_deref()),
        Command::Simulate(a) => (a.out.as_deref(), None),
        Command::Noise(a) => (a.out.as_deref(), None),
        Command::Disorder(a) => (a.out.as_deref(), None),
        Command::Grating(a) => (a.out.as_deref(), None),
        Command::Lattice(a) => (a.out.as_deref(), None),
        Command::Tensors(a) => (a.out.as_deref(), None),
        Command::Replay(_) => unreachable!(),
    };
    write_text(out, &produced.main)?;
    if produced.main_is_csv {
        if let Some(p) = out {
            write_sidecar(p, command, &produced.inputs)?;
        }
    }
    if let (Some(p), Some(text)) = (report, &produced.report) {
        write_text(Some(p), text)?;
        write_sidecar(p, command, &produced.inputs)?;
    }
    Ok(())
}

fn produce(command: &Command, embedded: Option<&Inputs>) -> Result<Produced> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Simulate(a) => simulate_cmd(a, embedded),
        Command::Noise(a) => noise_cmd(a, embedded),
        Command::Disorder(a) => disorder_cmd(a, embedded),
        Command::Grating(a) => grating_cmd(a),
        Command::Lattice(a) => lattice_cmd(a),
        Command::Tensors(a) => tensors_cmd(a),
        Command::Replay(_) => Err(RunError::Usage("nested replay".into())),
    }
}

struct Table(csv::Writer<Vec<u8>>);

impl Table {
    fn new(header: &[&str]) -> Result<Self> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        Ok(Self(w))
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        Ok(self.0.write_record(fields)?)
    }

    fn finish(self) -> Result<String> {
        let bytes = self.0.into_inner().map_err(|e| RunError::Usage(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn csv_output(table: Table, inputs: Inputs) -> Result<Produced> {
    Ok(Produced {
        main: table.finish()?,
        main_is_csv: true,
        report: None,
        inputs,
    })
}

fn json_text<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn synth(a: &SynthArgs) -> Result<Produced> {
    if a.n < 3 {
        return Err(RunError::Usage(format!("--n must be at least 3, got {}", a.n)));
    }
    let b = khz_to_rad(a.b_khz);
    let omega = a.omega_khz.map_or(20.0 * b, khz_to_rad);
    let mut params = SynthesisParams::new(a.n, b, omega, a.cycles.unwrap_or(a.n), window_from(a.window, a.w));
    if !a.targets.is_empty() {
        params.targets = Some(a.targets.clone());
    }
    let (seq, report) = synthesize_sequence(&params)?;
    let mut table = Table::new(&["pair", "target", "achieved_re", "achieved_im", "residual"])?;
    for p in &report.pairs {
        table.row(&[
            format!("{}-{}", p.i, p.j),
            p.target.to_string(),
            p.achieved.re.to_string(),
            p.achieved.im.to_string(),
            p.residual.to_string(),
        ])?;
    }
    Ok(Produced {
        main: json_text(&SequenceFile::from_sequence(&seq))?,
        main_is_csv: false,
        report: Some(table.finish()?),
        inputs: Inputs::default(),
    })
}

fn resolve_network(args: &NetworkArgs, default_kind: LatticeKind, embedded: Option<&Inputs>) -> Result<NetworkFile> {
    if let Some(net) = embedded.and_then(|i| i.network.clone()) {
        return Ok(net);
    }
    if let Some(path) = &args.network {
        return read_file(path);
    }
    let net = build_lattice(
        args.lattice.unwrap_or(default_kind),
        args.size,
        args.spacing_nm * 1e-9,
        &PhysicalConstants::fluorine19(),
        CouplingModel::IsotropicR3,
    )?;
    Ok(NetworkFile::from_network(&net))
}

fn resolve_sequence(args: &SeqArgs, embedded: Option<&Inputs>) -> Result<Option<SequenceFile>> {
    if let Some(inputs) = embedded {
        return Ok(inputs.sequence.clone());
    }
    args.sequence.as_deref().map(read_file).transpose()
}

fn study(omega_over_b: f64, window: Window, sim: SimOptions) -> StudyConfig {
    StudyConfig {
        omega_over_b,
        window,
        sim,
        ..StudyConfig::default()
    }
}

/// The sequence to run and the network it acts on.
fn prepare(
    net: &SpinNetwork,
    file: Option<&SequenceFile>,
    config: &StudyConfig,
    cycles: usize,
    keep_frequencies: bool,
) -> Result<(PulseSequence, SpinNetwork)> {
    let seq = match file {
        Some(f) => f.to_sequence()?,
        None => config.sequence(net, cycles)?,
    };
    if seq.n != net.chain().len() {
        return Err(RunError::Usage(format!(
            "sequence is for {} spins but the chain has {}",
            seq.n,
            net.chain().len()
        )));
    }
    let net = if keep_frequencies {
        net.clone()
    } else {
        tag_for_sequence(net, &seq)?
    };
    Ok((seq, net))
}

fn simulate_cmd(a: &SimulateArgs, embedded: Option<&Inputs>) -> Result<Produced> {
    let net_file = resolve_network(&a.net, LatticeKind::Chain, embedded)?;
    let seq_file = resolve_sequence(&a.seq, embedded)?;
    let net = a.net.scope.apply(&net_file.to_network()?);
    let sim = SimOptions {
        uz_mode: a.uz_mode,
        scan: a.scan,
    };
    let config = study(a.seq.omega_over_b, window_from(a.seq.window, a.seq.w), sim);
    let cycles = match &seq_file {
        Some(f) => vec![f.cycles],
        None => a.cycles.clone(),
    };
    let mut table = Table::new(&["N", "fidelity"])?;
    for n_cycles in cycles {
        let (seq, tagged) = prepare(&net, seq_file.as_ref(), &config, n_cycles, a.keep_frequencies)?;
        let r = simulate(&seq, &tagged, &sim)?;
        table.row(&[n_cycles.to_string(), r.max_abs.to_string()])?;
    }
    csv_output(
        table,
        Inputs {
            network: Some(net_file),
            sequence: seq_file,
        },
    )
}

fn noise_cmd(a: &NoiseArgs, embedded: Option<&Inputs>) -> Result<Produced> {
    let net_file = resolve_network(&a.net, LatticeKind::Chain, embedded)?;
    let net = a.net.scope.apply(&net_file.to_network()?);
    let sim = SimOptions {
        uz_mode: a.uz_mode,
        scan: a.scan,
    };
    let b = net
        .chain_nn_couplings()
        .first()
        .copied()
        .ok_or_else(|| RunError::Usage("chain needs at least two spins".into()))?;
    let tau_c = a.tau_c.map_or(2.0 / b, |ms| ms * 1e-3);
    let mut table = Table::new(&["noise_sigma", "W", "mean_f", "stderr"])?;
    for &w in &a.w {
        let config = study(a.omega_over_b, window_for_w(w), sim);
        let (seq, tagged) = prepare(&net, None, &config, a.cycles, false)?;
        for &sigma in &a.sigma {
            let params = OuNoiseParams {
                tau_c,
                sigma: khz_to_rad(sigma),
                realizations: a.realizations,
                dt_max: a.dt_max.map(|ms| ms * 1e-3),
                during_mixing: a.during_mixing,
            };
            let result = simulate_with_noise(&seq, &tagged, &params, a.seed, &sim)?;
            let s = &result.samples[0];
            table.row(&[sigma.to_string(), w.to_string(), s.mean.to_string(), s.stderr.to_string()])?;
        }
    }
    csv_output(
        table,
        Inputs {
            network: Some(net_file),
            sequence: None,
        },
    )
}

fn disorder_cmd(a: &DisorderArgs, embedded: Option<&Inputs>) -> Result<Produced> {
    let net_file = resolve_network(&a.net, LatticeKind::TrigonalPlanar, embedded)?;
    let seq_file = resolve_sequence(&a.seq, embedded)?;
    let net = a.net.scope.apply(&net_file.to_network()?);
    let sim = SimOptions {
        uz_mode: a.uz_mode,
        scan: a.scan,
    };
    let config = study(a.seq.omega_over_b, window_from(a.seq.window, a.seq.w), sim);
    let (seq, tagged) = prepare(&net, seq_file.as_ref(), &config, a.cycles, false)?;
    let result = disorder_study(&seq, &tagged, &a.delta, a.realizations, a.seed, a.target, &sim)?;
    let mut table = Table::new(&["delta", "mean_f", "stderr"])?;
    for s in &result.samples {
        table.row(&[s.key.to_string(), s.mean.to_string(), s.stderr.to_string()])?;
    }
    csv_output(
        table,
        Inputs {
            network: Some(net_file),
            sequence: seq_file,
        },
    )
}

/// |F𝒢|/(bN) in units of d for pair sums δ = x/τ.
fn filter_amplitude(seq: &PulseSequence, x: f64) -> Result<f64> {
    let tau = seq.tau();
    let delta = x / tau;
    let f = weighting(delta, &seq.tau_list, &seq.t_list, 1.0, seq.cycles)?;
    Ok((f * grating(delta, tau, &seq.a_list)).norm())
}

fn grating_cmd(a: &GratingArgs) -> Result<Produced> {
    if a.points < 2 {
        return Err(RunError::Usage("--points must be at least 2".into()));
    }
    let synth = |window| synthesize_sequence(&SynthesisParams::new(a.n, 1.0, 20.0, a.cycles, window));
    let (rect, _) = synth(Window::Rect)?;
    let (sinc, _) = synth(Window::Sinc { w: a.w })?;
    let span = 2.0 * PI * a.n as f64;
    let mut table = Table::new(&["phase", "rect", "sinc"])?;
    for k in 0..a.points {
        let x = span * k as f64 / (a.points - 1) as f64;
        table.row(&[
            x.to_string(),
            filter_amplitude(&rect, x)?.to_string(),
            filter_amplitude(&sinc, x)?.to_string(),
        ])?;
    }
    csv_output(table, Inputs::default())
}

fn lattice_cmd(a: &LatticeArgs) -> Result<Produced> {
    let mut net = build_lattice(
        a.kind,
        a.size,
        a.spacing_nm * 1e-9,
        &PhysicalConstants::fluorine19(),
        a.model,
    )?;
    if let Some(g) = a.gradient_khz {
        let omega0 = a.omega0_khz.unwrap_or(g / 2.0);
        net = apply_gradient(&net, &GradientConfig::along_x(khz_to_rad(g), khz_to_rad(omega0))?);
    }
    Ok(Produced {
        main: json_text(&NetworkFile::from_network(&net))?,
        main_is_csv: false,
        report: None,
        inputs: Inputs::default(),
    })
}

#[derive(Serialize)]
struct TensorReport {
    t1: f64,
    t2: f64,
    t20_coefficient: f64,
    residual: f64,
    coefficients: Vec<hamforge::ops::TensorCoefficientRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rotation_weights: Option<Vec<WeightEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rotation_residual: Option<f64>,
}

#[derive(Serialize)]
struct WeightEntry {
    axis: [f64; 3],
    angle: f64,
    weight: f64,
}

fn tensors_cmd(a: &TensorsArgs) -> Result<Produced> {
    let recipe = dq_recipe(a.t1, a.t2)?;
    let mut report = TensorReport {
        t1: recipe.t1,
        t2: recipe.t2,
        t20_coefficient: recipe.t20_coefficient,
        residual: recipe.residual,
        coefficients: recipe.coefficients.records(),
        rotation_weights: None,
        rotation_residual: None,
    };
    if a.solve {
        let natural = spherical_tensor(2, 0, TensorLabel::Pair)?;
        let dq = build_hamiltonian(&HamiltonianKind::DoubleQuantum, &hamforge::lattice::unit_chain(2)?)?;
        let target = dq.scale(natural.norm() / dq.norm());
        let candidates: Vec<RotationStep> = clifford_rotations();
        let fit = solve_rotation_weights(&natural, &target, &candidates)?;
        report.rotation_weights = Some(
            candidates
                .iter()
                .zip(&fit.weights)
                .filter(|(_, &w)| w > 0.0)
                .map(|(r, &w)| WeightEntry {
                    axis: r.axis,
                    angle: r.angle,
                    weight: w,
                })
                .collect(),
        );
        report.rotation_residual = Some(fit.residual);
    }
    Ok(Produced {
        main: json_text(&report)?,
        main_is_csv: false,
        report: None,
        inputs: Inputs::default(),
    })
}
