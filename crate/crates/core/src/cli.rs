//! Command-line front end. Subcommands emit data only: state JSON, verdict JSON, CSV rows or
//! JSON-lines records `{"quantity", "params", "value"}`.
//!
//! Exit codes: 0 ok, 2 usage or parameter error, 3 unphysical input, 4 no convergence.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::{evolve, twb_separability_time, BathPhysicalParams, ChannelSpec, ModeChannel};
use crate::error::{Error, Result};
use crate::nonlocality::{
    bell_dp_sweep, homodyne_bell2, homodyne_correlation_mc, ips_wigner, linear_grid, log_grid, ps_correlation,
    t_state_for_dp, t_state_ps_coefficients, twba_wigner, v3_gkm_closed, v3_quarter_turn, write_csv, BellResult,
    BellTest, DpParameterization, GaussianMixture, IpsPrecise, PsState, ThreeModePs, WignerFunction,
};
use crate::protocols::{
    ips_teleport_fidelity, lambda_from_r, optimal_asymmetric_family, r_from_lambda, teleclone_asymmetric_fidelities,
    teleclone_symmetric_fidelity, teleport_fidelity_ideal, teleport_fidelity_noisy, SharedBath, TeleportInput,
    TeleportationSetup,
};
use crate::separability::{
    duan_verdict, giedke_iterate, log_negativity_of, min_pt_symplectic_eig, ppt_check, simon_verdict,
    tripartite_classify, Bipartition, SeparabilityVerdict, TripartiteClass,
};
use crate::states::{
    build, mean_photon_number, purity, von_neumann_entropy, GaussianState, StateFamilySpec, StateJson,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNPHYSICAL: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Dimension(_) | Error::InvalidParameter(_) | Error::Io(_) => EXIT_USAGE,
        Error::NoConvergence(_) => EXIT_NO_CONVERGENCE,
        _ => EXIT_UNPHYSICAL,
    }
}

#[derive(Debug, Parser)]
#[command(name = "cvlab", version, about = "Continuous-variable Gaussian states in phase space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Also write a replay record (command, parameters, outputs) to this file
    #[arg(long, global = true)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a state, print its invariants and optionally save it as JSON
    State(StateArgs),
    /// Separability report for a saved state
    Separability(SeparabilityArgs),
    /// Evolve a saved state in a damped Gaussian channel
    Evolve(EvolveArgs),
    /// Twin-beam separability time, closed form and bisection
    Threshold(ThresholdArgs),
    /// Coherent-state teleportation fidelity
    Teleport(TeleportArgs),
    /// 1→2 telecloning fidelities
    Clone(CloneArgs),
    /// Bell-inequality sweeps
    Bell(BellArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StateKind {
    Vacuum,
    Thermal,
    Coherent,
    Squeezed,
    SqueezedThermal,
    Twb,
    Twst,
    V3,
    T,
}

#[derive(Debug, Args)]
pub struct StateArgs {
    #[arg(long, value_enum)]
    pub kind: StateKind,
    #[arg(long, default_value_t = 1)]
    pub modes: usize,
    /// Thermal photons per mode
    #[arg(long, default_value_t = 0.0)]
    pub n: f64,
    #[arg(long, default_value_t = 0.0)]
    pub r: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,
    /// Amplitudes as re,im pairs, one pair per mode
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub n1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub n2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub n3: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phi2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phi3: f64,
    /// Thermal photons of the T state
    #[arg(long, default_value_t = 0.0)]
    pub nth: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SeparabilityArgs {
    #[arg(long)]
    pub state: PathBuf,
    /// Modes of the two parties, e.g. "0|1,2"; the second party is transposed
    #[arg(long)]
    pub partition: Option<String>,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
}

/// Bath: either physical photon numbers (n_th, n_s) or direct (N, M).
#[derive(Debug, Args)]
pub struct BathArgs {
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub nth: f64,
    /// Bath squeezing photons
    #[arg(long, default_value_t = 0.0)]
    pub ns: f64,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Sweep a parameter: name=lo:hi:n, linear unless the name is j or `:log` is appended
    #[arg(long)]
    pub sweep: Vec<String>,
    /// JSON-lines records instead of CSV
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[command(flatten)]
    pub bath: BathArgs,
    /// Direct bath correlation M (real part); overrides --ns together with --n-bath
    #[arg(long, allow_hyphen_values = true)]
    pub m_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub m_im: Option<f64>,
    /// Bath photon number N used with --m-re/--m-im
    #[arg(long)]
    pub n_bath: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThresholdState {
    Twb,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, value_enum, default_value = "twb")]
    pub state: ThresholdState,
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    #[command(flatten)]
    pub bath: BathArgs,
    /// Upper end of the bisection window, in units of 1/Γ
    #[arg(long, default_value_t = 1e3)]
    pub t_max: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TeleportArgs {
    /// Twin-beam parameter λ = tanh r
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Effective transmissivity of photon subtraction; adds the IPS fidelity
    #[arg(long)]
    pub tau: Option<f64>,
    /// Damping rate of a shared bath; adds the noisy fidelities at time --t
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub nth: f64,
    #[arg(long, default_value_t = 0.0)]
    pub ns: f64,
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
    /// Efficiency of the joint measurement
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Squeezing of the input state
    #[arg(long, default_value_t = 0.0)]
    pub xi: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CloneArgs {
    /// Symmetric cloning with N₂ = N₃ = N
    #[arg(long)]
    pub n: Option<f64>,
    #[arg(long)]
    pub n2: Option<f64>,
    #[arg(long)]
    pub n3: Option<f64>,
    /// Optimal asymmetric family at this F₃
    #[arg(long)]
    pub f3: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BellKind {
    /// Displaced parity
    Dp,
    /// Pseudospin
    Ps,
    /// Binned homodyne
    Homodyne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BellState {
    Twb,
    Ips,
    Twba,
    V3,
    T,
    Ecs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DpParam {
    Bw,
    Optimized,
    Twba,
    ThreeMode,
    ThreeModeT,
    ThreeModeTOptimized,
}

impl From<DpParam> for DpParameterization {
    fn from(p: DpParam) -> Self {
        match p {
            DpParam::Bw => Self::Bw,
            DpParam::Optimized => Self::Optimized,
            DpParam::Twba => Self::Twba,
            DpParam::ThreeMode => Self::ThreeMode,
            DpParam::ThreeModeT => Self::ThreeModeT,
            DpParam::ThreeModeTOptimized => Self::ThreeModeTOptimized,
        }
    }
}

#[derive(Debug, Args)]
pub struct BellArgs {
    #[arg(long, value_enum)]
    pub test: BellKind,
    #[arg(long, value_enum)]
    pub state: BellState,
    /// Displacement family for the parity test; defaults to the natural one for the state
    #[arg(long, value_enum)]
    pub param: Option<DpParam>,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, default_value_t = 0.9)]
    pub tau: f64,
    /// Total photons of the T state (N₂ = N₃ = N/4 in the parity test)
    #[arg(long, default_value_t = 100.0)]
    pub n: f64,
    #[arg(long, default_value_t = 10.0)]
    pub n2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub n3: f64,
    /// On/off detector efficiency
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// ECS amplitude
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub phi2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi3: Option<f64>,
    /// Homodyne angles θ₁,θ₂,φ₁,φ₂
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub angles: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    pub eta_h: f64,
    /// Monte Carlo samples for the homodyne oracle (0 disables)
    #[arg(long, default_value_t = 0)]
    pub mc: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parameters of one grid point, ordered by name.
pub type Point = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub name: String,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("sweep '{s}' is not name=lo:hi:n[:log]"));
        let (name, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        if !(parts.len() == 3 || (parts.len() == 4 && parts[3] == "log")) || name.is_empty() {
            return Err(bad());
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].parse().map_err(|_| bad())?;
        let n: usize = parts[2].parse().map_err(|_| bad())?;
        let values = if parts.len() == 4 || name == "j" { log_grid(lo, hi, n)? } else { linear_grid(lo, hi, n)? };
        Ok(Self { name: name.to_string(), values })
    }
}

/// Cartesian product of the sweeps over `base`; unknown names are rejected.
pub fn expand(base: &Point, sweeps: &[Sweep]) -> Result<Vec<Point>> {
    let mut points = vec![base.clone()];
    for s in sweeps {
        if !base.contains_key(&s.name) {
            let known: Vec<&str> = base.keys().map(String::as_str).collect();
            return Err(Error::InvalidParameter(format!("cannot sweep '{}'; known: {}", s.name, known.join(", "))));
        }
        points = points
            .into_iter()
            .flat_map(|p| {
                s.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.insert(s.name.clone(), v);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub quantity: String,
    pub params: Point,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordOutput {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

/// Enough to replay a run: the argument vector, the resolved parameters and what came out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub outputs: Vec<RecordOutput>,
    pub version: String,
}

/// Nine significant digits for human-readable tables.
pub fn fmt9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..9).contains(&mag) {
        let decimals = (8 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.8e}")
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub fn read_state(path: &Path) -> Result<GaussianState> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let j: StateJson = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
    GaussianState::from_json(&j)
}

pub fn write_state(path: &Path, state: &GaussianState) -> Result<()> {
    let text = serde_json::to_string_pretty(&state.to_json()).map_err(|e| io_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Rows of (point, named quantities) to CSV or JSON lines; the header is the sorted parameter
/// names followed by the quantity names of the first row.
fn emit_rows(out: &mut dyn Write, rows: &[(Point, Vec<(&'static str, f64)>)], json: bool) -> Result<()> {
    let w = |e: std::io::Error| Error::Io(e.to_string());
    if json {
        for (p, qs) in rows {
            for &(q, v) in qs {
                let rec = Record { quantity: q.to_string(), params: p.clone(), value: v };
                let line = serde_json::to_string(&rec).map_err(|e| Error::Io(e.to_string()))?;
                writeln!(out, "{line}").map_err(w)?;
            }
        }
        return Ok(());
    }
    let mut wr = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(format!("csv: {e}"));
    if let Some((p, qs)) = rows.first() {
        let header: Vec<&str> = p.keys().map(String::as_str).chain(qs.iter().map(|q| q.0)).collect();
        wr.write_record(&header).map_err(csv_err)?;
    }
    for (p, qs) in rows {
        let rec: Vec<String> = p.values().chain(qs.iter().map(|q| &q.1)).map(|v| v.to_string()).collect();
        wr.write_record(&rec).map_err(csv_err)?;
    }
    wr.flush().map_err(w)
}

fn sweeps(o: &OutputArgs) -> Result<Vec<Sweep>> {
    o.sweep.iter().map(|s| Sweep::parse(s)).collect()
}

type Quantities = Vec<(&'static str, f64)>;

/// Evaluates every grid point in parallel; results keep grid order.
fn run_grid<F>(base: Point, o: &OutputArgs, f: F) -> Result<Vec<(Point, Quantities)>>
where
    F: Fn(&Point) -> Result<Quantities> + Sync,
{
    let points = expand(&base, &sweeps(o)?)?;
    points.into_par_iter().map(|p| f(&p).map(|q| (p, q))).collect()
}

fn with_output(o: &OutputArgs, stdout: &mut dyn Write, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match &o.out {
        Some(path) => {
            let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
            body(&mut f)
        }
        None => body(stdout),
    }
}

fn point(pairs: &[(&str, f64)]) -> Point {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn summarize(rows: &[(Point, Quantities)], o: &OutputArgs) -> Vec<RecordOutput> {
    let mut outs = Vec::new();
    if rows.len() == 1 {
        outs.extend(rows[0].1.iter().map(|&(q, v)| RecordOutput { name: q.into(), value: Some(v), path: None }));
    } else {
        outs.push(RecordOutput { name: "rows".into(), value: Some(rows.len() as f64), path: None });
    }
    if let Some(p) = &o.out {
        outs.push(RecordOutput { name: "data".into(), value: None, path: Some(p.display().to_string()) });
    }
    outs
}

struct Outcome {
    params: BTreeMap<String, serde_json::Value>,
    outputs: Vec<RecordOutput>,
}

fn params_json(p: &Point, o: Option<&OutputArgs>) -> BTreeMap<String, serde_json::Value> {
    let mut m: BTreeMap<String, serde_json::Value> = p.iter().map(|(k, v)| (k.clone(), (*v).into())).collect();
    if let Some(o) = o {
        if !o.sweep.is_empty() {
            m.insert("sweep".into(), o.sweep.clone().into());
        }
    }
    m
}

fn cmd_state(a: &StateArgs, out: &mut dyn Write) -> Result<Outcome> {
    let spec = match a.kind {
        StateKind::Vacuum => StateFamilySpec::Vacuum { n: a.modes },
        StateKind::Thermal => StateFamilySpec::Thermal { n: vec![a.n; a.modes] },
        StateKind::Coherent => {
            if a.alpha.is_empty() || a.alpha.len() % 2 != 0 {
                return Err(Error::InvalidParameter("--alpha takes re,im pairs".into()));
            }
            StateFamilySpec::Coherent { alpha: a.alpha.chunks(2).map(|c| (c[0], c[1])).collect() }
        }
        StateKind::Squeezed => StateFamilySpec::SqueezedVacuum { r: a.r, phi: a.phi },
        StateKind::SqueezedThermal => {
            let alpha = match a.alpha.as_slice() {
                [] => (0.0, 0.0),
                [re, im] => (*re, *im),
                _ => return Err(Error::InvalidParameter("--alpha takes one re,im pair".into())),
            };
            StateFamilySpec::DisplacedSqueezedThermal { alpha, r: a.r, phi: a.phi, n: a.n }
        }
        StateKind::Twb => StateFamilySpec::Twb { r: a.r },
        StateKind::Twst => StateFamilySpec::TwoModeSqueezedThermal { r: a.r, n1: a.n1, n2: a.n2 },
        StateKind::V3 => StateFamilySpec::TriV3 { r: a.r },
        StateKind::T => StateFamilySpec::TriT { n2: a.n2, n3: a.n3, phi2: a.phi2, phi3: a.phi3, n_thermal: a.nth },
    };
    let s = build(&spec)?;
    let eigs = s.symplectic_eigenvalues()?;
    let w = |e: std::io::Error| Error::Io(e.to_string());
    let mu = purity(&s);
    let entropy = von_neumann_entropy(&s)?;
    let photons = mean_photon_number(&s);
    writeln!(out, "modes             {}", s.n_modes).map_err(w)?;
    writeln!(out, "purity            {}", fmt9(mu)).map_err(w)?;
    writeln!(out, "entropy           {}", fmt9(entropy)).map_err(w)?;
    writeln!(out, "photons           {}", fmt9(photons)).map_err(w)?;
    let eig_str: Vec<String> = eigs.iter().map(|&d| fmt9(d)).collect();
    writeln!(out, "symplectic_eigs   {}", eig_str.join(" ")).map_err(w)?;
    let mut outputs = vec![
        RecordOutput { name: "purity".into(), value: Some(mu), path: None },
        RecordOutput { name: "entropy".into(), value: Some(entropy), path: None },
        RecordOutput { name: "photons".into(), value: Some(photons), path: None },
    ];
    if let Some(p) = &a.out {
        write_state(p, &s)?;
        outputs.push(RecordOutput { name: "state".into(), value: None, path: Some(p.display().to_string()) });
    }
    let params = serde_json::to_value(&spec)
        .ok()
        .and_then(|v| v.as_object().cloned())
        .map(|m| m.into_iter().collect())
        .unwrap_or_default();
    Ok(Outcome { params, outputs })
}

pub fn parse_partition(s: &str, n: usize) -> Result<Bipartition> {
    let bad = || Error::InvalidParameter(format!("partition '{s}' is not of the form 0|1,2"));
    let (a, b) = s.split_once('|').ok_or_else(bad)?;
    let list = |t: &str| -> Result<Vec<usize>> {
        t.split(',').map(|x| x.trim().parse::<usize>().map_err(|_| bad())).collect()
    };
    let p = Bipartition { a: list(a)?, b: list(b)? };
    p.validate(n)?;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparabilityReport {
    pub n_modes: usize,
    pub partition: [Vec<usize>; 2],
    pub log_negativity: f64,
    pub separable: Option<bool>,
    pub verdicts: Vec<SeparabilityVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tripartite: Option<TripartiteClass>,
}

pub fn separability_report(s: &GaussianState, p: &Bipartition, max_iter: usize) -> Result<SeparabilityReport> {
    let mut verdicts = vec![ppt_check(s, p)?];
    if s.n_modes == 2 {
        verdicts.push(simon_verdict(s)?);
        verdicts.push(duan_verdict(s)?);
    }
    verdicts.push(giedke_iterate(s, p, max_iter)?);
    // conclusive criteria agree; report the first conclusive one
    let separable = verdicts.iter().filter(|v| v.necessary_and_sufficient).find_map(|v| v.separable);
    let tripartite = if s.n_modes == 3 { Some(tripartite_classify(s)?) } else { None };
    Ok(SeparabilityReport {
        n_modes: s.n_modes,
        partition: [p.a.clone(), p.b.clone()],
        log_negativity: log_negativity_of(s, &p.b)?,
        separable,
        verdicts,
        tripartite,
    })
}

fn cmd_separability(a: &SeparabilityArgs, out: &mut dyn Write) -> Result<Outcome> {
    let s = read_state(&a.state)?;
    if s.n_modes < 2 {
        return Err(Error::InvalidParameter("separability needs at least two modes".into()));
    }
    let p = match &a.partition {
        Some(t) => parse_partition(t, s.n_modes)?,
        None => Bipartition::first_vs_rest(s.n_modes),
    };
    let rep = separability_report(&s, &p, a.max_iter)?;
    let text = serde_json::to_string_pretty(&rep).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| Error::Io(e.to_string()))?;
    let mut params = BTreeMap::new();
    params.insert("state".into(), a.state.display().to_string().into());
    params.insert("partition".into(), format!("{:?}|{:?}", p.a, p.b).into());
    let mut outputs = vec![RecordOutput { name: "log_negativity".into(), value: Some(rep.log_negativity), path: None }];
    if let Some(sep) = rep.separable {
        outputs.push(RecordOutput { name: "separable".into(), value: Some(f64::from(u8::from(sep))), path: None });
    }
    Ok(Outcome { params, outputs })
}

fn cmd_evolve(a: &EvolveArgs, out: &mut dyn Write) -> Result<Outcome> {
    let s = read_state(&a.state)?;
    let channel = match (a.n_bath, a.m_re, a.m_im) {
        (None, None, None) => BathPhysicalParams { n_th: a.bath.nth, n_s: a.bath.ns }.channel(a.bath.gamma),
        (n, re, im) => ModeChannel::new(
            a.bath.gamma,
            n.unwrap_or(0.0),
            num_complex::Complex64::new(re.unwrap_or(0.0), im.unwrap_or(0.0)),
        )?,
    };
    let spec = ChannelSpec::uniform(s.n_modes, channel);
    spec.validate()?;
    let base = point(&[("t", a.t)]);
    let two = s.n_modes >= 2;
    let rows = run_grid(base.clone(), &a.output, |p| {
        let e = evolve(&s, &spec, p["t"])?;
        let mut q = vec![
            ("purity", purity(&e)),
            ("photons", mean_photon_number(&e)),
            ("min_symplectic_eig", e.min_symplectic_eigenvalue()?),
        ];
        if two {
            let b = Bipartition::first_vs_rest(e.n_modes);
            q.push(("min_pt_symplectic_eig", min_pt_symplectic_eig(&e, &b.b)?));
            q.push(("log_negativity", log_negativity_of(&e, &b.b)?));
        }
        Ok(q)
    })?;
    with_output(&a.output, out, |w| emit_rows(w, &rows, a.output.json))?;
    let mut params = params_json(&base, Some(&a.output));
    params.insert("state".into(), a.state.display().to_string().into());
    params.insert("gamma".into(), channel.gamma.into());
    params.insert("n_bath".into(), channel.n_th.into());
    params.insert("m_re".into(), channel.m_re.into());
    params.insert("m_im".into(), channel.m_im.into());
    Ok(Outcome { params, outputs: summarize(&rows, &a.output) })
}

fn cmd_threshold(a: &ThresholdArgs, out: &mut dyn Write) -> Result<Outcome> {
    let base = point(&[("r", a.r), ("gamma", a.bath.gamma), ("nth", a.bath.nth), ("ns", a.bath.ns)]);
    let t_max = a.t_max;
    let rows = run_grid(base.clone(), &a.output, |p| {
        let (r, gamma) = (p["r"], p["gamma"]);
        let bath = BathPhysicalParams { n_th: p["nth"], n_s: p["ns"] };
        let analytic = twb_separability_time(r, gamma, bath.n_th, bath.n_s)?.time().unwrap_or(f64::INFINITY);
        let s = build(&StateFamilySpec::Twb { r })?;
        let spec = ChannelSpec::uniform(2, bath.channel(gamma));
        let numeric =
            crate::channels::separability_time_numeric(&s, &spec, &Bipartition::first_vs_rest(2), t_max / gamma)?
                .unwrap_or(f64::INFINITY);
        Ok(vec![("t_separable", analytic), ("t_separable_numeric", numeric)])
    })?;
    with_output(&a.output, out, |w| emit_rows(w, &rows, a.output.json))?;
    Ok(Outcome { params: params_json(&base, Some(&a.output)), outputs: summarize(&rows, &a.output) })
}

fn cmd_teleport(a: &TeleportArgs, out: &mut dyn Write) -> Result<Outcome> {
    let lambda = match (a.lambda, a.r) {
        (Some(_), Some(_)) => return Err(Error::InvalidParameter("give either --lambda or --r".into())),
        (Some(l), None) => l,
        (None, Some(r)) => lambda_from_r(r),
        (None, None) => return Err(Error::InvalidParameter("--lambda or --r is required".into())),
    };
    let mut base = point(&[("lambda", lambda)]);
    if let Some(t) = a.tau {
        base.insert("tau".into(), t);
    }
    if let Some(g) = a.gamma {
        for (k, v) in [("gamma", g), ("nth", a.nth), ("ns", a.ns), ("t", a.t), ("eta", a.eta), ("xi", a.xi)] {
            base.insert(k.into(), v);
        }
    }
    let rows = run_grid(base.clone(), &a.output, |p| {
        let l = p["lambda"];
        let mut q = vec![("fidelity", teleport_fidelity_ideal(l)?)];
        if let Some(&t) = p.get("tau") {
            q.push(("ips_fidelity", ips_teleport_fidelity(l, t)?));
        }
        if let Some(&gamma) = p.get("gamma") {
            let xi = p["xi"];
            let setup = TeleportationSetup {
                twb_r: r_from_lambda(l),
                bath: Some(SharedBath { gamma, params: BathPhysicalParams { n_th: p["nth"], n_s: p["ns"] } }),
                eta: p["eta"],
                input: if xi == 0.0 { TeleportInput::Coherent } else { TeleportInput::Squeezed { xi } },
            };
            let nf = teleport_fidelity_noisy(&setup, p["t"])?;
            q.push(("noisy_fidelity", nf.fidelity));
            q.push(("noisy_optimal", nf.optimal));
            q.push(("xi_max", nf.xi_max));
        }
        Ok(q)
    })?;
    with_output(&a.output, out, |w| emit_rows(w, &rows, a.output.json))?;
    Ok(Outcome { params: params_json(&base, Some(&a.output)), outputs: summarize(&rows, &a.output) })
}

fn cmd_clone(a: &CloneArgs, out: &mut dyn Write) -> Result<Outcome> {
    let base = match (a.n, a.n2, a.n3, a.f3) {
        (Some(n), None, None, None) => point(&[("n", n)]),
        (None, Some(n2), Some(n3), None) => point(&[("n2", n2), ("n3", n3)]),
        (None, None, None, Some(f3)) => point(&[("f3", f3)]),
        _ => return Err(Error::InvalidParameter("give --n, or --n2 with --n3, or --f3".into())),
    };
    let rows = run_grid(base.clone(), &a.output, |p| {
        if let Some(&n) = p.get("n") {
            return Ok(vec![("fidelity", teleclone_symmetric_fidelity(n)?)]);
        }
        let (n2, n3) = match p.get("f3") {
            Some(&f3) => optimal_asymmetric_family(f3)?,
            None => (p["n2"], p["n3"]),
        };
        let rep = teleclone_asymmetric_fidelities(n2, n3)?;
        let mut q = vec![("f2", rep.fidelities[0]), ("f3", rep.fidelities[1])];
        if p.contains_key("f3") {
            q.splice(0..0, [("n2", n2), ("n3", n3)]);
        }
        Ok(q)
    })?;
    with_output(&a.output, out, |w| emit_rows(w, &rows, a.output.json))?;
    Ok(Outcome { params: params_json(&base, Some(&a.output)), outputs: summarize(&rows, &a.output) })
}

fn default_param(state: BellState) -> Result<DpParameterization> {
    Ok(match state {
        BellState::Twb | BellState::Ips => DpParameterization::Bw,
        BellState::Twba => DpParameterization::Twba,
        BellState::V3 => DpParameterization::ThreeMode,
        BellState::T => DpParameterization::ThreeModeT,
        BellState::Ecs => return Err(Error::InvalidParameter("no displaced-parity test for the ECS".into())),
    })
}

/// The state's own parameters, in the order they appear as CSV columns.
fn bell_base(a: &BellArgs) -> Vec<(&'static str, f64)> {
    match (a.state, a.test) {
        (BellState::Twb | BellState::V3, _) => vec![("r", a.r)],
        (BellState::Ips, _) => vec![("r", a.r), ("tau", a.tau)],
        (BellState::Twba, _) => vec![("n2", a.n2), ("n3", a.n3), ("eta", a.eta)],
        (BellState::T, BellKind::Dp) => vec![("n", a.n)],
        (BellState::T, _) => vec![("n2", a.n2), ("n3", a.n3)],
        (BellState::Ecs, _) => vec![("gamma", a.gamma)],
    }
}

/// A two- or three-mode Wigner function for the parity test.
enum DpState {
    Mixture(GaussianMixture),
    Ips(Box<IpsPrecise>),
}

impl WignerFunction for DpState {
    fn n_modes(&self) -> usize {
        match self {
            Self::Mixture(m) => m.n_modes,
            Self::Ips(p) => WignerFunction::n_modes(p.as_ref()),
        }
    }

    fn wigner(&self, x: &crate::symplectic::Vector) -> Result<f64> {
        match self {
            Self::Mixture(m) => m.wigner(x),
            Self::Ips(p) => WignerFunction::wigner(p.as_ref(), x),
        }
    }
}

fn dp_state(a: &BellArgs, p: &Point, param: DpParameterization) -> Result<DpState> {
    let mix = |s: &GaussianState| GaussianMixture::try_from(s).map(DpState::Mixture);
    match a.state {
        BellState::Twb => mix(&build(&StateFamilySpec::Twb { r: p["r"] })?),
        BellState::Ips => Ok(DpState::Ips(Box::new(IpsPrecise::new(lambda_from_r(p["r"]), p["tau"])?))),
        BellState::Twba => twba_wigner(p["n2"] + p["n3"], p["n2"], p["n3"], p["eta"]).map(DpState::Mixture),
        BellState::V3 => mix(&v3_quarter_turn(p["r"])?),
        BellState::T => {
            let (d2, d3) = match param {
                DpParameterization::ThreeModeT => (PI, PI),
                DpParameterization::ThreeModeTOptimized => (0.0, PI),
                _ => (0.0, 0.0),
            };
            mix(&t_state_for_dp(p["n"], a.phi2.unwrap_or(d2), a.phi3.unwrap_or(d3))?)
        }
        BellState::Ecs => Err(Error::InvalidParameter("no displaced-parity test for the ECS".into())),
    }
}

fn ps_value(a: &BellArgs, p: &Point) -> Result<(BellTest, f64)> {
    let two = |s: PsState| -> Result<(BellTest, f64)> { Ok((BellTest::Ps2, ps_correlation(&s)?.bell())) };
    match a.state {
        BellState::Twb => two(PsState::Twb { r: p["r"] }),
        BellState::Ips => two(PsState::Ips { lambda: lambda_from_r(p["r"]), tau_eff: p["tau"] }),
        BellState::Twba => two(PsState::Twba { n2: p["n2"], n3: p["n3"], eta: p["eta"] }),
        BellState::Ecs => two(PsState::Ecs { gamma: p["gamma"] }),
        BellState::V3 => {
            let c = v3_gkm_closed(p["r"]);
            Ok((BellTest::Ps3, ThreeModePs { c: [c; 3], phi: [0.0; 3] }.maximize().0))
        }
        BellState::T => {
            let c = t_state_ps_coefficients(p["n2"], p["n3"])?;
            let phi = [0.0, a.phi2.unwrap_or(PI), a.phi3.unwrap_or(PI)];
            Ok((BellTest::Ps3, ThreeModePs { c, phi }.maximize().0))
        }
    }
}

fn homodyne_state(a: &BellArgs, p: &Point) -> Result<GaussianMixture> {
    match a.state {
        BellState::Twb => GaussianMixture::try_from(&build(&StateFamilySpec::Twb { r: p["r"] })?),
        BellState::Ips => ips_wigner(lambda_from_r(p["r"]), p["tau"]),
        BellState::Twba => twba_wigner(p["n2"] + p["n3"], p["n2"], p["n3"], p["eta"]),
        _ => Err(Error::InvalidParameter("the homodyne test is implemented for twb, ips and twba".into())),
    }
}

fn tag(s: BellState) -> &'static str {
    match s {
        BellState::Twb => "twb",
        BellState::Ips => "ips",
        BellState::Twba => "twba",
        BellState::V3 => "v3",
        BellState::T => "t",
        BellState::Ecs => "ecs",
    }
}

fn with_params(p: &Point, order: &[(&'static str, f64)]) -> Vec<(String, f64)> {
    order.iter().map(|&(k, _)| (k.to_string(), p[k])).collect()
}

pub fn bell_rows(a: &BellArgs) -> Result<Vec<BellResult>> {
    let order = bell_base(a);
    let mut base = point(&order);
    let mut all = sweeps(&a.output)?;
    let j_sweep = all.iter().position(|s| s.name == "j").map(|i| all.remove(i));
    let state_tag = tag(a.state);
    match a.test {
        BellKind::Dp => {
            let param: DpParameterization = match a.param {
                Some(p) => p.into(),
                None => default_param(a.state)?,
            };
            let js = match j_sweep {
                Some(s) => s.values,
                None => log_grid(1e-4, 1.0, 200)?,
            };
            let points = expand(&base, &all)?;
            let rows: Vec<Vec<BellResult>> = points
                .par_iter()
                .map(|p| {
                    let st = dp_state(a, p, param)?;
                    let (_, rows) = bell_dp_sweep(&st, state_tag, param, &js)?;
                    Ok(rows
                        .into_iter()
                        .map(|mut r| {
                            let mut ps = with_params(p, &order);
                            ps.append(&mut r.params);
                            r.params = ps;
                            r
                        })
                        .collect())
                })
                .collect::<Result<_>>()?;
            Ok(rows.into_iter().flatten().collect())
        }
        BellKind::Ps => {
            if j_sweep.is_some() {
                return Err(Error::InvalidParameter("the pseudospin test has no J".into()));
            }
            let points = expand(&base, &all)?;
            points
                .par_iter()
                .map(|p| {
                    let (test, b) = ps_value(a, p)?;
                    Ok(BellResult::new(test, state_tag, with_params(p, &order), b))
                })
                .collect()
        }
        BellKind::Homodyne => {
            if j_sweep.is_some() {
                return Err(Error::InvalidParameter("the homodyne test has no J".into()));
            }
            let ang: [f64; 4] = match &a.angles {
                None => [0.0, PI / 2.0, -PI / 4.0, PI / 4.0],
                Some(v) => {
                    v.as_slice().try_into().map_err(|_| Error::InvalidParameter("--angles takes four values".into()))?
                }
            };
            base.insert("eta_h".into(), a.eta_h);
            let mut order = order;
            order.push(("eta_h", a.eta_h));
            let points = expand(&base, &all)?;
            let rows: Vec<Vec<BellResult>> = points
                .par_iter()
                .map(|p| {
                    let st = homodyne_state(a, p)?;
                    let eta_h = p["eta_h"];
                    let b = homodyne_bell2(&st, ang, eta_h)?;
                    let mut rows = vec![BellResult::new(BellTest::H2, state_tag, with_params(p, &order), b)];
                    if a.mc > 0 {
                        let [t1, t2, p1, p2] = ang;
                        let mut est = 0.0;
                        let mut var = 0.0;
                        for (k, (t, ph, sign)) in
                            [(t1, p1, 1.0), (t1, p2, 1.0), (t2, p1, 1.0), (t2, p2, -1.0)].into_iter().enumerate()
                        {
                            let (m, se) = homodyne_correlation_mc(&st, t, ph, eta_h, a.mc, a.seed + k as u64)?;
                            est += sign * m;
                            var += se * se;
                        }
                        let mut ps = with_params(p, &order);
                        ps.push(("mc_stderr".into(), var.sqrt()));
                        rows.push(BellResult::new(BellTest::H2, &format!("{state_tag}_mc"), ps, est));
                    }
                    Ok(rows)
                })
                .collect::<Result<_>>()?;
            Ok(rows.into_iter().flatten().collect())
        }
    }
}

fn cmd_bell(a: &BellArgs, out: &mut dyn Write) -> Result<Outcome> {
    let rows = bell_rows(a)?;
    if a.output.json {
        with_output(&a.output, out, |w| {
            for r in &rows {
                let rec = Record {
                    quantity: format!("{}_{}", r.test.label(), r.state),
                    params: r.params.iter().cloned().collect(),
                    value: r.value,
                };
                let line = serde_json::to_string(&rec).map_err(|e| Error::Io(e.to_string()))?;
                writeln!(w, "{line}").map_err(|e| Error::Io(e.to_string()))?;
            }
            Ok(())
        })?;
    } else {
        with_output(&a.output, out, |w| write_csv(w, &rows))?;
    }
    let best = BellResult::best(&rows).ok_or_else(|| Error::InvalidParameter("empty grid".into()))?;
    let mut params: BTreeMap<String, serde_json::Value> = BTreeMap::new();
    params.insert("test".into(), format!("{:?}", a.test).to_lowercase().into());
    params.insert("state".into(), tag(a.state).into());
    for (k, v) in bell_base(a) {
        params.insert(k.into(), v.into());
    }
    if !a.output.sweep.is_empty() {
        params.insert("sweep".into(), a.output.sweep.clone().into());
    }
    let mut outputs = vec![RecordOutput { name: "max_abs_bell".into(), value: Some(best.value.abs()), path: None }];
    if let Some(p) = &a.output.out {
        outputs.push(RecordOutput { name: "data".into(), value: None, path: Some(p.display().to_string()) });
    }
    Ok(Outcome { params, outputs })
}

/// Caps the global rayon pool from `CVLAB_THREADS`; later calls are no-ops.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("CVLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("CVLAB_THREADS must be a positive integer, got '{v}'")))?;
    // fails only if the pool already exists
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(cli: &Cli, argv: &[String], out: &mut dyn Write) -> Result<()> {
    configure_threads()?;
    let outcome = match &cli.command {
        Command::State(a) => cmd_state(a, out)?,
        Command::Separability(a) => cmd_separability(a, out)?,
        Command::Evolve(a) => cmd_evolve(a, out)?,
        Command::Threshold(a) => cmd_threshold(a, out)?,
        Command::Teleport(a) => cmd_teleport(a, out)?,
        Command::Clone(a) => cmd_clone(a, out)?,
        Command::Bell(a) => cmd_bell(a, out)?,
    };
    if let Some(path) = &cli.record {
        let rec = RunRecord {
            command: argv.join(" "),
            params: outcome.params,
            outputs: outcome.outputs,
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let text = serde_json::to_string_pretty(&rec).map_err(|e| io_err(path, e))?;
        fs::write(path, text + "\n").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Parses `argv` (program name first), runs it and returns the process exit code.
pub fn run(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    match execute(&cli, argv, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
