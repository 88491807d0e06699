//! Builders for the demonstration circuits, the k-sweep driver and gate
//! truth tables.
//!
//! Simulated neurons carry small ids (1, 2, ...) numbered as in the circuit
//! diagrams; fixed inputs start at [`INPUT_BASE`].

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{KinkSchedule, LatticeConfig};
use crate::network::{NetworkSpec, NeuronId, NeuronSpec};
use crate::potentials::CouplingKind;
use crate::sampler::{derive_seed, run_pooled, SamplerConfig};

pub const INPUT_BASE: u32 = 100;

/// Activity above this counts as "On".
pub const ON_THRESHOLD: f64 = 0.5;
/// Activity below this counts as "Off".
pub const OFF_THRESHOLD: f64 = 0.2;
/// Required gap between the weakest "On" and the strongest "Off" case.
pub const SEPARATION_MARGIN: f64 = 0.3;

/// Input-side strength of the AND and OR gates.
pub const GATE_EPS_HAT: f64 = 8000.0;
/// Strength of each AND branch into the output neuron.
pub const AND_OUTPUT_EPS: f64 = 1500.0;
/// Mutual inhibition of the OR intermediates.
pub const OR_INHIBITION: f64 = 50000.0;
/// Strength of each OR intermediate into the output neuron.
pub const OR_OUTPUT_EPS: f64 = 6000.0;
/// Inhibition scale of the NOT pair.
pub const NOT_INHIBITION: f64 = 50000.0;
pub const NOT_EPS1: f64 = 8000.0;
pub const NOT_EPS2: f64 = 3500.0;
/// Layer-2 to output strength of the line detector.
pub const CONV_OUTPUT_EPS: f64 = 4000.0;

fn excite(from: u32, to: u32, eps: f64) -> CouplingKind {
    CouplingKind::excitatory(NeuronId(from), NeuronId(to), eps)
}

fn inhibit(a: u32, b: u32, eps: f64) -> CouplingKind {
    CouplingKind::inhibitory(NeuronId(a), NeuronId(b), eps)
}

fn check_strength(name: &str, eps: f64) -> Result<()> {
    if eps.is_finite() && eps >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidNetwork(vec![format!("{name} = {eps} must be finite and >= 0")]))
    }
}

fn finish(net: NetworkSpec) -> Result<NetworkSpec> {
    net.ensure_valid()?;
    Ok(net)
}

/// Active input 100 exciting simulated neuron 1.
pub fn two_neuron(cfg: LatticeConfig, epsilon: f64) -> Result<NetworkSpec> {
    check_strength("epsilon", epsilon)?;
    finish(
        NetworkSpec::new(cfg)
            .with_neuron(NeuronSpec::active(INPUT_BASE, KinkSchedule::default_for(&cfg)))
            .with_neuron(NeuronSpec::simulated(1))
            .with_connection(excite(INPUT_BASE, 1, epsilon)),
    )
}

/// Input -> 1 -> 2 -> 3 with strengths `k * (15000, 10000, 5000)`.
pub fn chain3(cfg: LatticeConfig, k: f64) -> Result<NetworkSpec> {
    check_strength("k", k)?;
    finish(
        NetworkSpec::new(cfg)
            .with_neuron(NeuronSpec::active(INPUT_BASE, KinkSchedule::default_for(&cfg)))
            .with_neuron(NeuronSpec::simulated(1))
            .with_neuron(NeuronSpec::simulated(2))
            .with_neuron(NeuronSpec::simulated(3))
            .with_connection(excite(INPUT_BASE, 1, 15000.0 * k))
            .with_connection(excite(1, 2, 10000.0 * k))
            .with_connection(excite(2, 3, 5000.0 * k)),
    )
}

/// Two inputs (passive when off) drive neurons 1 and 2 with `eps`; both
/// excite output neuron 3 with `eps_out`.
pub fn and_gate(cfg: LatticeConfig, on: [bool; 2], eps: [f64; 2], eps_out: f64) -> Result<NetworkSpec> {
    for e in eps.into_iter().chain([eps_out]) {
        check_strength("epsilon", e)?;
    }
    let schedule = KinkSchedule::default_for(&cfg);
    finish(
        NetworkSpec::new(cfg)
            .with_neuron(NeuronSpec::switch(INPUT_BASE, on[0], &schedule))
            .with_neuron(NeuronSpec::switch(INPUT_BASE + 1, on[1], &schedule))
            .with_neuron(NeuronSpec::simulated(1))
            .with_neuron(NeuronSpec::simulated(2))
            .with_neuron(NeuronSpec::simulated(3))
            .with_connection(excite(INPUT_BASE, 1, eps[0]))
            .with_connection(excite(INPUT_BASE + 1, 2, eps[1]))
            .with_connection(excite(1, 3, eps_out))
            .with_connection(excite(2, 3, eps_out)),
    )
}

/// One input exciting neurons 1 and 2 (`eps1 > eps2`), which inhibit each
/// other with `eps_inh`. Neuron 2 is the output.
pub fn not_pair(cfg: LatticeConfig, eps1: f64, eps2: f64, eps_inh: f64) -> Result<NetworkSpec> {
    for e in [eps1, eps2, eps_inh] {
        check_strength("epsilon", e)?;
    }
    if eps1 <= eps2 {
        return Err(Error::InvalidNetwork(vec![format!(
            "NOT pair needs eps1 > eps2, got {eps1} <= {eps2}"
        )]));
    }
    finish(
        NetworkSpec::new(cfg)
            .with_neuron(NeuronSpec::active(INPUT_BASE, KinkSchedule::default_for(&cfg)))
            .with_neuron(NeuronSpec::simulated(1))
            .with_neuron(NeuronSpec::simulated(2))
            .with_connection(excite(INPUT_BASE, 1, eps1))
            .with_connection(excite(INPUT_BASE, 2, eps2))
            .with_connection(inhibit(1, 2, eps_inh)),
    )
}

/// Inputs drive intermediates 1 and 2, which inhibit each other with
/// `eps_inh` and both excite output 3 with `eps_out`.
pub fn or_gate(
    cfg: LatticeConfig,
    on: [bool; 2],
    eps: [f64; 2],
    eps_inh: f64,
    eps_out: f64,
) -> Result<NetworkSpec> {
    for e in eps.into_iter().chain([eps_inh, eps_out]) {
        check_strength("epsilon", e)?;
    }
    let schedule = KinkSchedule::default_for(&cfg);
    finish(
        NetworkSpec::new(cfg)
            .with_neuron(NeuronSpec::switch(INPUT_BASE, on[0], &schedule))
            .with_neuron(NeuronSpec::switch(INPUT_BASE + 1, on[1], &schedule))
            .with_neuron(NeuronSpec::simulated(1))
            .with_neuron(NeuronSpec::simulated(2))
            .with_neuron(NeuronSpec::simulated(3))
            .with_connection(excite(INPUT_BASE, 1, eps[0]))
            .with_connection(excite(INPUT_BASE + 1, 2, eps[1]))
            .with_connection(inhibit(1, 2, eps_inh))
            .with_connection(excite(1, 3, eps_out))
            .with_connection(excite(2, 3, eps_out)),
    )
}

/// Strengths of the XOR circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XorParams {
    /// Each input into the coincidence neuron 1.
    pub eps_and: f64,
    /// Each input into its own relay (2 or 3).
    pub eps_or: f64,
    /// Mutual inhibition of relays 2 and 3.
    pub eps_relay_inh: f64,
    /// Each relay into output 4.
    pub eps_out: f64,
    /// Inhibition between neuron 1 and output 4.
    pub eps_veto: f64,
}

impl Default for XorParams {
    fn default() -> Self {
        Self {
            eps_and: 3000.0,
            eps_or: 10000.0,
            eps_relay_inh: 50000.0,
            eps_out: 6000.0,
            eps_veto: 200000.0,
        }
    }
}

/// Input A (100) and B (101) with their connections scaled by `k[0]` and
/// `k[1]`. Both feed coincidence neuron 1; A drives relay 2, B relay 3;
/// the relays feed output 4, which neuron 1 inhibits.
pub fn xor_gate(cfg: LatticeConfig, k: [f64; 2], p: &XorParams) -> Result<NetworkSpec> {
    for e in k.into_iter().chain([p.eps_and, p.eps_or, p.eps_relay_inh, p.eps_out, p.eps_veto]) {
        check_strength("epsilon", e)?;
    }
    let schedule = KinkSchedule::default_for(&cfg);
    let (a, b) = (INPUT_BASE, INPUT_BASE + 1);
    finish(
        NetworkSpec::new(cfg)
            .with_neuron(NeuronSpec::active(a, schedule.clone()))
            .with_neuron(NeuronSpec::active(b, schedule))
            .with_neuron(NeuronSpec::simulated(1))
            .with_neuron(NeuronSpec::simulated(2))
            .with_neuron(NeuronSpec::simulated(3))
            .with_neuron(NeuronSpec::simulated(4))
            .with_connection(excite(a, 1, k[0] * p.eps_and))
            .with_connection(excite(b, 1, k[1] * p.eps_and))
            .with_connection(excite(a, 2, k[0] * p.eps_or))
            .with_connection(excite(b, 3, k[1] * p.eps_or))
            .with_connection(inhibit(2, 3, p.eps_relay_inh))
            .with_connection(excite(2, 4, p.eps_out))
            .with_connection(excite(3, 4, p.eps_out))
            .with_connection(inhibit(1, 4, p.eps_veto)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Excitatory,
    Inhibitory,
}

/// Coupling pattern applied at every position of a 3x3 window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel3x3 {
    pub weights: [[f64; 3]; 3],
    pub scale: f64,
    pub polarity: Polarity,
}

impl Kernel3x3 {
    pub fn new(weights: [[f64; 3]; 3], scale: f64, polarity: Polarity) -> Result<Self> {
        if weights.iter().flatten().chain([&scale]).any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidNetwork(vec!["kernel entries must be finite and >= 0".into()]));
        }
        Ok(Self { weights, scale, polarity })
    }

    /// Center column, excitatory, 2000.
    pub fn vertical_excitatory() -> Self {
        let c = [0.0, 1.0, 0.0];
        Self { weights: [c; 3], scale: 2000.0, polarity: Polarity::Excitatory }
    }

    /// Side columns, inhibitory, 15000.
    pub fn vertical_inhibitory() -> Self {
        let s = [1.0, 0.0, 1.0];
        Self { weights: [s; 3], scale: 15000.0, polarity: Polarity::Inhibitory }
    }

    pub fn strength(&self, row: usize, col: usize) -> f64 {
        self.weights[row][col] * self.scale
    }
}

/// Binary 4x4 picture, row-major.
pub type Image4 = [[u8; 4]; 4];

pub mod images {
    use super::Image4;

    pub fn blank() -> Image4 {
        [[0; 4]; 4]
    }

    pub fn full() -> Image4 {
        [[1; 4]; 4]
    }

    pub fn vertical_line(col: usize) -> Image4 {
        let mut img = blank();
        img.iter_mut().for_each(|r| r[col] = 1);
        img
    }

    pub fn horizontal_line(row: usize) -> Image4 {
        let mut img = blank();
        img[row] = [1; 4];
        img
    }

    pub fn diagonal() -> Image4 {
        let mut img = blank();
        (0..4).for_each(|i| img[i][i] = 1);
        img
    }
}

/// Id of the input neuron for pixel `(row, col)`.
pub fn pixel_id(row: usize, col: usize) -> u32 {
    INPUT_BASE + (row * 4 + col) as u32
}

/// Id of the output neuron of the line detector.
pub const CONV_OUTPUT: u32 = 5;

/// Line detector with the standard kernels.
pub fn conv_line_detector(cfg: LatticeConfig, image: &Image4) -> Result<NetworkSpec> {
    conv_network(
        cfg,
        image,
        &[Kernel3x3::vertical_excitatory(), Kernel3x3::vertical_inhibitory()],
        CONV_OUTPUT_EPS,
    )
}

/// 16 pixel inputs (active where the pixel is 1), a 2x2 feature layer
/// (neurons 1..=4, row-major) connected to each 3x3 window through every
/// kernel at stride 1, and output neuron 5 fed by all features.
pub fn conv_network(
    cfg: LatticeConfig,
    image: &Image4,
    kernels: &[Kernel3x3],
    eps_out: f64,
) -> Result<NetworkSpec> {
    if let Some(p) = image.iter().flatten().find(|&&p| p > 1) {
        return Err(Error::Image(format!("pixel value {p} is not binary")));
    }
    check_strength("eps_out", eps_out)?;
    let schedule = KinkSchedule::default_for(&cfg);
    let mut net = NetworkSpec::new(cfg);
    for (r, row) in image.iter().enumerate() {
        for (c, &px) in row.iter().enumerate() {
            net = net.with_neuron(NeuronSpec::switch(pixel_id(r, c), px == 1, &schedule));
        }
    }
    for f in 1..=4 {
        net = net.with_neuron(NeuronSpec::simulated(f));
    }
    net = net.with_neuron(NeuronSpec::simulated(CONV_OUTPUT));
    for (fr, fc) in (0..2).flat_map(|r| (0..2).map(move |c| (r, c))) {
        let feature = 1 + (fr * 2 + fc) as u32;
        for kernel in kernels {
            for (dr, dc) in (0..3).flat_map(|r| (0..3).map(move |c| (r, c))) {
                let eps = kernel.strength(dr, dc);
                if eps == 0.0 {
                    continue;
                }
                let px = pixel_id(fr + dr, fc + dc);
                net = net.with_connection(match kernel.polarity {
                    Polarity::Excitatory => excite(px, feature, eps),
                    Polarity::Inhibitory => inhibit(px, feature, eps),
                });
            }
        }
        net = net.with_connection(excite(feature, CONV_OUTPUT, eps_out));
    }
    finish(net)
}

/// A circuit whose strengths scale with a single factor `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    /// `epsilon = k * eps_hat`.
    TwoNeuron { eps_hat: f64 },
    Chain3,
    /// Both inputs on; `eps = (eps_hat, k * eps_hat)`.
    And { eps_hat: f64, eps_out: f64 },
    /// `eps_inh = k * eps_inh_hat`.
    Not { eps1: f64, eps2: f64, eps_inh_hat: f64 },
    /// Both inputs on; `eps = (eps_hat, k * eps_hat)`.
    Or { eps_hat: f64, eps_inh: f64, eps_out: f64 },
    /// Input A scaled by `k`, input B by `k2`.
    Xor { k2: f64, params: XorParams },
    /// Every kernel and output strength scaled by `k`.
    ConvLine { image: Image4 },
}

pub const SCHEME_NAMES: [&str; 7] = ["two_neuron", "chain3", "and", "not", "or", "xor", "conv_line"];

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::TwoNeuron { .. } => "two_neuron",
            Scheme::Chain3 => "chain3",
            Scheme::And { .. } => "and",
            Scheme::Not { .. } => "not",
            Scheme::Or { .. } => "or",
            Scheme::Xor { .. } => "xor",
            Scheme::ConvLine { .. } => "conv_line",
        }
    }

    pub fn network(&self, cfg: LatticeConfig, k: f64) -> Result<NetworkSpec> {
        check_strength("k", k)?;
        match *self {
            Scheme::TwoNeuron { eps_hat } => two_neuron(cfg, k * eps_hat),
            Scheme::Chain3 => chain3(cfg, k),
            Scheme::And { eps_hat, eps_out } => and_gate(cfg, [true; 2], [eps_hat, k * eps_hat], eps_out),
            Scheme::Not { eps1, eps2, eps_inh_hat } => not_pair(cfg, eps1, eps2, k * eps_inh_hat),
            Scheme::Or { eps_hat, eps_inh, eps_out } => {
                or_gate(cfg, [true; 2], [eps_hat, k * eps_hat], eps_inh, eps_out)
            }
            Scheme::Xor { k2, ref params } => xor_gate(cfg, [k, k2], params),
            Scheme::ConvLine { ref image } => conv_network(
                cfg,
                image,
                &[Kernel3x3::vertical_excitatory(), Kernel3x3::vertical_inhibitory()].map(|kern| Kernel3x3 {
                    scale: kern.scale * k,
                    ..kern
                }),
                k * CONV_OUTPUT_EPS,
            ),
        }
    }

    /// The neuron whose activity the circuit reports.
    pub fn output(&self) -> NeuronId {
        NeuronId(match self {
            Scheme::TwoNeuron { .. } => 1,
            Scheme::Chain3 | Scheme::And { .. } | Scheme::Or { .. } => 3,
            Scheme::Not { .. } => 2,
            Scheme::Xor { .. } => 4,
            Scheme::ConvLine { .. } => CONV_OUTPUT,
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    /// Looks up a scheme by name with its default parameters.
    fn from_str(name: &str) -> Result<Self> {
        Ok(match name {
            "two_neuron" => Scheme::TwoNeuron { eps_hat: GATE_EPS_HAT },
            "chain3" => Scheme::Chain3,
            "and" => Scheme::And { eps_hat: GATE_EPS_HAT, eps_out: AND_OUTPUT_EPS },
            "not" => Scheme::Not { eps1: NOT_EPS1, eps2: NOT_EPS2, eps_inh_hat: NOT_INHIBITION },
            "or" => Scheme::Or { eps_hat: GATE_EPS_HAT, eps_inh: OR_INHIBITION, eps_out: OR_OUTPUT_EPS },
            "xor" => Scheme::Xor { k2: 1.0, params: XorParams::default() },
            "conv_line" => Scheme::ConvLine { image: images::vertical_line(1) },
            other => {
                return Err(Error::SweepPlan(format!(
                    "unknown scheme {other:?}; expected one of {}",
                    SCHEME_NAMES.join(", ")
                )))
            }
        })
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub scheme: Scheme,
    pub lattice: LatticeConfig,
    pub k_values: Vec<f64>,
    pub sampler: SamplerConfig,
    /// Independent chains pooled per point.
    pub chains: usize,
    /// Neurons reported per point; `None` means every simulated neuron.
    pub tracked: Option<Vec<NeuronId>>,
}

impl SweepPlan {
    pub fn new(scheme: Scheme, k_values: Vec<f64>) -> Self {
        Self {
            scheme,
            lattice: LatticeConfig::default(),
            k_values,
            sampler: SamplerConfig::default(),
            chains: 1,
            tracked: None,
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SweepPlan(m));
        if self.k_values.is_empty() {
            return bad("no k values".into());
        }
        if let Some(k) = self.k_values.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
            return bad(format!("k = {k} must be finite and >= 0"));
        }
        if self.k_values.windows(2).any(|w| w[0] > w[1]) {
            return bad("k values must be sorted".into());
        }
        if self.chains == 0 {
            return bad("chains must be at least 1".into());
        }
        self.lattice.check()?;
        self.sampler.check(self.lattice.n_slices)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: f64,
    pub neuron_id: NeuronId,
    pub activity: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub k: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,neuron_id,activity,std_error,n_samples\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.k, r.neuron_id, r.activity, r.std_error, r.n_samples));
        }
        out
    }

    /// `(k, activity, std_error)` of one neuron, in k order.
    pub fn curve(&self, id: NeuronId) -> Vec<(f64, f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.neuron_id == id)
            .map(|r| (r.k, r.activity, r.std_error))
            .collect()
    }
}

/// Runs every k point (in parallel) with seeds derived from the plan seed
/// and the point index. Failed points are recorded and skipped.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepTable> {
    plan.check()?;
    let points: Vec<_> = plan
        .k_values
        .par_iter()
        .enumerate()
        .map(|(i, &k)| {
            let cfg = plan.sampler.with_seed(derive_seed(plan.sampler.seed, i as u64));
            let run = plan
                .scheme
                .network(plan.lattice, k)
                .and_then(|net| run_pooled(&net, &cfg, plan.chains));
            (k, run)
        })
        .collect();
    let mut table = SweepTable::default();
    for (k, run) in points {
        match run {
            Ok((report, _)) => {
                for n in &report.neurons {
                    if plan.tracked.as_ref().is_some_and(|t| !t.contains(&n.id)) {
                        continue;
                    }
                    table.rows.push(SweepRow {
                        k,
                        neuron_id: n.id,
                        activity: n.activity,
                        std_error: n.std_error,
                        n_samples: n.n_samples,
                    });
                }
            }
            Err(e) => table.failures.push(SweepFailure { k, message: e.to_string() }),
        }
    }
    table.rows.sort_by(|a, b| a.k.total_cmp(&b.k).then(a.neuron_id.cmp(&b.neuron_id)));
    Ok(table)
}

/// True when no later point falls below an earlier one by more than
/// `sigmas` combined standard errors (or rises, for `increasing = false`).
pub fn is_monotone(curve: &[(f64, f64, f64)], increasing: bool, sigmas: f64) -> bool {
    let sign = if increasing { 1.0 } else { -1.0 };
    curve.iter().enumerate().all(|(i, a)| {
        curve[i + 1..].iter().all(|b| sign * (b.1 - a.1) >= -sigmas * a.2.hypot(b.2))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gate {
    And,
    Not,
    Or,
    Xor,
}

impl FromStr for Gate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "and" => Ok(Gate::And),
            "not" => Ok(Gate::Not),
            "or" => Ok(Gate::Or),
            "xor" => Ok(Gate::Xor),
            other => Err(Error::SweepPlan(format!("unknown gate {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    On,
    Off,
    Undecided,
}

impl Verdict {
    pub fn classify(activity: f64) -> Self {
        if activity > ON_THRESHOLD {
            Verdict::On
        } else if activity < OFF_THRESHOLD {
            Verdict::Off
        } else {
            Verdict::Undecided
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::On => "On",
            Verdict::Off => "Off",
            Verdict::Undecided => "undecided",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthCase {
    pub label: String,
    pub expect_on: bool,
    pub network: NetworkSpec,
    pub output: NeuronId,
}

/// The input combinations of a gate at its default strengths.
pub fn truth_cases(gate: Gate, cfg: LatticeConfig) -> Result<Vec<TruthCase>> {
    let bits = [(false, false), (false, true), (true, false), (true, true)];
    let label = |a: bool, b: bool| format!("{}{}", u8::from(a), u8::from(b));
    let eps = [GATE_EPS_HAT; 2];
    match gate {
        Gate::And => bits
            .iter()
            .map(|&(a, b)| {
                Ok(TruthCase {
                    label: label(a, b),
                    expect_on: a && b,
                    network: and_gate(cfg, [a, b], eps, AND_OUTPUT_EPS)?,
                    output: NeuronId(3),
                })
            })
            .collect(),
        Gate::Or => bits
            .iter()
            .map(|&(a, b)| {
                Ok(TruthCase {
                    label: label(a, b),
                    expect_on: a || b,
                    network: or_gate(cfg, [a, b], eps, OR_INHIBITION, OR_OUTPUT_EPS)?,
                    output: NeuronId(3),
                })
            })
            .collect(),
        Gate::Xor => bits
            .iter()
            .map(|&(a, b)| {
                let k = [f64::from(u8::from(a)), f64::from(u8::from(b))];
                Ok(TruthCase {
                    label: label(a, b),
                    expect_on: a != b,
                    network: xor_gate(cfg, k, &XorParams::default())?,
                    output: NeuronId(4),
                })
            })
            .collect(),
        Gate::Not => [(0.0, true), (NOT_INHIBITION, false)]
            .iter()
            .map(|&(inh, expect_on)| {
                Ok(TruthCase {
                    label: format!("eps_inh={inh}"),
                    expect_on,
                    network: not_pair(cfg, NOT_EPS1, NOT_EPS2, inh)?,
                    output: NeuronId(2),
                })
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub case: String,
    pub expect_on: bool,
    pub output_activity: f64,
    pub std_error: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTable {
    pub gate: Gate,
    pub rows: Vec<TruthRow>,
}

impl TruthTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("case,output_activity,verdict\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.case, r.output_activity, r.verdict));
        }
        out
    }

    /// Weakest expected-On activity minus strongest expected-Off activity.
    pub fn margin(&self) -> f64 {
        let on = self.rows.iter().filter(|r| r.expect_on).map(|r| r.output_activity);
        let off = self.rows.iter().filter(|r| !r.expect_on).map(|r| r.output_activity);
        on.fold(f64::INFINITY, f64::min) - off.fold(f64::NEG_INFINITY, f64::max)
    }

    /// Every case classified as expected and the margin above
    /// [`SEPARATION_MARGIN`].
    pub fn passes(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.verdict == if r.expect_on { Verdict::On } else { Verdict::Off })
            && self.margin() > SEPARATION_MARGIN
    }
}

/// Simulates every case of `gate`; case `i` uses a seed derived from the
/// sampler seed and `i`.
pub fn run_truth_table(gate: Gate, cfg: LatticeConfig, sampler: &SamplerConfig, chains: usize) -> Result<TruthTable> {
    let cases = truth_cases(gate, cfg)?;
    let rows = cases
        .par_iter()
        .enumerate()
        .map(|(i, case)| {
            let sc = sampler.with_seed(derive_seed(sampler.seed, i as u64));
            let (report, _) = run_pooled(&case.network, &sc, chains)?;
            let n = report.get(case.output).ok_or(Error::UnknownNeuron(case.output))?;
            Ok(TruthRow {
                case: case.label.clone(),
                expect_on: case.expect_on,
                output_activity: n.activity,
                std_error: n.std_error,
                verdict: Verdict::classify(n.activity),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TruthTable { gate, rows })
}
