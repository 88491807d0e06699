//! Multilevel Metropolis sampling of path ensembles with weight `exp(-S)`.
//!
//! One sweep consists of
//!
//! 1. a single-site pass: every slice of every evolving neuron receives a
//!    uniform proposal `phi + U(-step, step)`;
//! 2. for each level `l = 2..=levels`, rigid shifts of `2^(l-1)` contiguous
//!    slices at random positions, `n_slices / 2^(l-1)` proposals per neuron;
//! 3. a global reflection `phi -> -phi` of each neuron with probability 1/2.
//!
//! Every proposal is accepted with `min(1, exp(-dS))` using the exact action
//! change from [`ActionModel`]. Frozen input paths are never touched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Path;
use crate::network::{
    build_input_path, integrated_potential, reference_path, ActivityReport, NetworkSpec,
    NeuronActivity, NeuronId, SystemState,
};
use crate::potentials::ActionModel;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Single-site update attempts discarded before measuring.
    pub thermalization_updates: u64,
    pub measurement_sweeps: usize,
    /// Sweeps between recorded samples.
    pub measure_interval: usize,
    /// Half-width of the uniform proposal.
    pub step_size: f64,
    /// Multilevel depth; level `l` moves blocks of `2^(l-1)` slices.
    pub levels: usize,
    pub seed: u64,
    /// Run [`tune_step`] before thermalizing.
    pub tune: bool,
    /// Include the global reflection move.
    pub flips: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            thermalization_updates: 2_000_000,
            measurement_sweeps: 5000,
            measure_interval: 10,
            step_size: 0.1,
            levels: 4,
            seed: 0,
            tune: true,
            flips: true,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn check(&self, n_slices: usize) -> Result<()> {
        let bad = |m: String| Err(Error::SamplerConfig(m));
        if self.measurement_sweeps == 0 {
            return bad("measurement_sweeps must be positive".into());
        }
        if self.measure_interval == 0 {
            return bad("measure_interval must be at least 1".into());
        }
        if self.measure_interval > self.measurement_sweeps {
            return bad("measure_interval exceeds measurement_sweeps; no samples would be taken".into());
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad(format!("step_size {} must be positive", self.step_size));
        }
        if self.levels == 0 {
            return bad("levels must be at least 1".into());
        }
        let largest = 1usize << (self.levels - 1);
        if largest > n_slices / 4 {
            return bad(format!(
                "level {} moves blocks of {largest} slices, more than n_slices / 4 = {}",
                self.levels,
                n_slices / 4
            ));
        }
        Ok(())
    }
}

/// Accepted / proposed counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acceptance {
    pub accepted: u64,
    pub proposed: u64,
}

impl Acceptance {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn add(&mut self, other: Acceptance) {
        self.accepted += other.accepted;
        self.proposed += other.proposed;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    /// Acceptance rate per level; entry 0 is the single-site pass.
    pub acceptance_rate: Vec<f64>,
    pub flip_rate: f64,
    pub samples_taken: usize,
    pub sweeps: u64,
    pub step_size: f64,
    /// `false` when tuning ran out of rounds before reaching the target band.
    pub tuned: bool,
}

/// Saw start `phi_j = j mod 2` for simulated neurons; inputs get their
/// frozen paths.
pub fn init_state(net: &NetworkSpec) -> Result<SystemState> {
    net.ensure_valid()?;
    let cfg = net.lattice;
    let paths = net
        .neurons
        .iter()
        .map(|n| {
            if n.kind.is_input() {
                build_input_path(n, &cfg)
            } else {
                Ok(Path::saw(&cfg))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SystemState { paths })
}

#[inline]
fn accept(delta: f64, rng: &mut ChaCha8Rng) -> bool {
    delta <= 0.0 || rng.gen::<f64>() < (-delta).exp()
}

/// Single-site pass over every slice of every evolving neuron.
pub fn metropolis_sweep(
    state: &mut SystemState,
    model: &ActionModel,
    step: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Acceptance> {
    let n = model.lattice().n_slices;
    let mut acc = Acceptance::default();
    for slot in 0..model.n_evolving() {
        let idx = model.index_of_slot(slot);
        for j in 0..n {
            let old = state.paths[idx].values()[j];
            let proposed = old + rng.gen_range(-step..step);
            let delta = model.site_delta(&state.paths, slot, j, proposed);
            if delta.is_nan() {
                return Err(Error::NonFiniteAction { neuron: idx, slice: j });
            }
            acc.proposed += 1;
            if accept(delta, rng) {
                state.paths[idx].values_mut()[j] = proposed;
                acc.accepted += 1;
            }
        }
    }
    Ok(acc)
}

/// Rigid block shifts for levels `2..=levels`; returns one counter per level
/// starting at level 2.
pub fn multilevel_sweep(
    state: &mut SystemState,
    model: &ActionModel,
    levels: usize,
    step: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Acceptance>> {
    let n = model.lattice().n_slices;
    let mut out = Vec::with_capacity(levels.saturating_sub(1));
    for level in 2..=levels {
        let len = 1usize << (level - 1);
        let mut acc = Acceptance::default();
        for slot in 0..model.n_evolving() {
            let idx = model.index_of_slot(slot);
            for _ in 0..n / len {
                let start = rng.gen_range(0..n);
                let shift = rng.gen_range(-step..step);
                let delta = model.block_delta(&state.paths, slot, start, len, shift);
                if delta.is_nan() {
                    return Err(Error::NonFiniteAction { neuron: idx, slice: start });
                }
                acc.proposed += 1;
                if accept(delta, rng) {
                    let v = state.paths[idx].values_mut();
                    for k in 0..len {
                        v[(start + k) % n] += shift;
                    }
                    acc.accepted += 1;
                }
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Proposes `phi -> -phi` for each evolving neuron with probability 1/2.
pub fn flip_sweep(state: &mut SystemState, model: &ActionModel, rng: &mut ChaCha8Rng) -> Result<Acceptance> {
    let mut acc = Acceptance::default();
    for slot in 0..model.n_evolving() {
        if !rng.gen::<bool>() {
            continue;
        }
        let idx = model.index_of_slot(slot);
        let delta = model.flip_delta(&state.paths, slot);
        if delta.is_nan() {
            return Err(Error::NonFiniteAction { neuron: idx, slice: 0 });
        }
        acc.proposed += 1;
        if accept(delta, rng) {
            state.paths[idx].values_mut().iter_mut().for_each(|v| *v = -*v);
            acc.accepted += 1;
        }
    }
    Ok(acc)
}

/// Seed for point `index` of a family of runs sharing `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A single Markov chain over one network.
#[derive(Debug, Clone)]
pub struct Chain {
    model: ActionModel,
    state: SystemState,
    rng: ChaCha8Rng,
    config: SamplerConfig,
    step: f64,
    counts: Vec<Acceptance>,
    flips: Acceptance,
    sweeps: u64,
    tuned: bool,
}

impl Chain {
    pub fn new(net: &NetworkSpec, config: &SamplerConfig) -> Result<Self> {
        config.check(net.lattice.n_slices)?;
        let model = ActionModel::new(net)?;
        let state = init_state(net)?;
        Ok(Self {
            model,
            state,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config: *config,
            step: config.step_size,
            counts: vec![Acceptance::default(); config.levels],
            flips: Acceptance::default(),
            sweeps: 0,
            tuned: true,
        })
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn model(&self) -> &ActionModel {
        &self.model
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    pub fn set_step_size(&mut self, step: f64) {
        self.step = step;
    }

    pub fn sweep(&mut self) -> Result<()> {
        let site = metropolis_sweep(&mut self.state, &self.model, self.step, &mut self.rng)?;
        self.counts[0].add(site);
        if self.config.levels > 1 {
            let blocks = multilevel_sweep(&mut self.state, &self.model, self.config.levels, self.step, &mut self.rng)?;
            for (c, b) in self.counts[1..].iter_mut().zip(blocks) {
                c.add(b);
            }
        }
        if self.config.flips {
            let f = flip_sweep(&mut self.state, &self.model, &mut self.rng)?;
            self.flips.add(f);
        }
        self.sweeps += 1;
        Ok(())
    }

    fn reset_counts(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = Acceptance::default());
        self.flips = Acceptance::default();
    }

    /// Sweeps needed to spend `thermalization_updates` single-site attempts.
    pub fn thermalization_sweeps(&self) -> u64 {
        let per_sweep = (self.model.n_evolving() * self.model.lattice().n_slices) as u64;
        if per_sweep == 0 {
            0
        } else {
            self.config.thermalization_updates.div_ceil(per_sweep)
        }
    }

    /// Tunes the step (if configured) and discards the thermalization sweeps.
    pub fn thermalize(&mut self) -> Result<()> {
        if self.config.tune && self.model.n_evolving() > 0 {
            let outcome = tune_chain(self)?;
            self.step = outcome.step_size;
            self.tuned = outcome.converged;
        }
        for _ in 0..self.thermalization_sweeps() {
            self.sweep()?;
        }
        self.reset_counts();
        Ok(())
    }

    pub fn stats(&self, samples_taken: usize) -> ChainStats {
        ChainStats {
            acceptance_rate: self.counts.iter().map(Acceptance::rate).collect(),
            flip_rate: self.flips.rate(),
            samples_taken,
            sweeps: self.sweeps,
            step_size: self.step,
            tuned: self.tuned,
        }
    }

    /// Thermalizes, then records the activity of every simulated neuron
    /// every `measure_interval` sweeps.
    pub fn run(mut self) -> Result<ChainOutput> {
        let cfg = *self.model.lattice();
        let denom = integrated_potential(reference_path(&cfg).values(), &cfg);
        if denom <= 0.0 {
            return Err(Error::VacuumReference);
        }
        self.thermalize()?;
        let mut series = vec![Vec::new(); self.model.n_evolving()];
        for k in 1..=self.config.measurement_sweeps {
            self.sweep()?;
            if k % self.config.measure_interval == 0 {
                for (s, v) in series.iter_mut().zip(self.model.potential_integrals(&self.state.paths)) {
                    s.push(v / denom);
                }
            }
        }
        let samples = series.first().map_or(0, Vec::len);
        let stats = self.stats(samples);
        Ok(ChainOutput { series, stats, final_state: self.state })
    }
}

/// Activity time series of one chain, one entry per simulated neuron in
/// network order.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub series: Vec<Vec<f64>>,
    pub stats: ChainStats,
    pub final_state: SystemState,
}

fn report_from(net: &NetworkSpec, chains: &[ChainOutput]) -> ActivityReport {
    let ids: Vec<NeuronId> = net.simulated_ids();
    let neurons = ids
        .iter()
        .enumerate()
        .map(|(slot, &id)| {
            let parts: Vec<(f64, f64, usize)> = chains
                .iter()
                .map(|c| {
                    let s = &c.series[slot];
                    let (m, e) = stats::batch_means(s);
                    (m, e, s.len())
                })
                .collect();
            let (activity, std_error, n_samples) = stats::pool(&parts);
            NeuronActivity { id, activity, std_error, n_samples }
        })
        .collect();
    ActivityReport { neurons }
}

/// Runs one chain and reports the activity of every simulated neuron.
pub fn run_simulation(net: &NetworkSpec, config: &SamplerConfig) -> Result<(ActivityReport, ChainStats)> {
    let out = Chain::new(net, config)?.run()?;
    let report = report_from(net, std::slice::from_ref(&out));
    Ok((report, out.stats))
}

/// Runs `chains` independent chains (seeds derived from `config.seed`) in
/// parallel and pools their samples. With one chain this is exactly
/// [`run_simulation`].
pub fn run_pooled(
    net: &NetworkSpec,
    config: &SamplerConfig,
    chains: usize,
) -> Result<(ActivityReport, Vec<ChainStats>)> {
    if chains <= 1 {
        let (r, s) = run_simulation(net, config)?;
        return Ok((r, vec![s]));
    }
    let outputs = (0..chains as u64)
        .into_par_iter()
        .map(|c| {
            let cfg = config.with_seed(derive_seed(config.seed, c));
            Chain::new(net, &cfg)?.run()
        })
        .collect::<Result<Vec<_>>>()?;
    let report = report_from(net, &outputs);
    Ok((report, outputs.into_iter().map(|o| o.stats).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub step_size: f64,
    pub acceptance: f64,
    pub rounds: usize,
    pub converged: bool,
}

/// Site-acceptance band targeted by [`tune_step`].
pub const TUNE_BAND: (f64, f64) = (0.3, 0.6);
const TUNE_ROUNDS: usize = 50;
const TUNE_SWEEPS_PER_ROUND: usize = 20;

fn tune_chain(chain: &Chain) -> Result<TuneOutcome> {
    let mut pilot = chain.clone();
    pilot.rng = ChaCha8Rng::seed_from_u64(derive_seed(chain.config.seed, u64::MAX));
    let mut step = pilot.step;
    let mut rate = 0.0;
    for round in 1..=TUNE_ROUNDS {
        pilot.step = step;
        let mut acc = Acceptance::default();
        for _ in 0..TUNE_SWEEPS_PER_ROUND {
            acc.add(metropolis_sweep(&mut pilot.state, &pilot.model, step, &mut pilot.rng)?);
        }
        rate = acc.rate();
        if (TUNE_BAND.0..=TUNE_BAND.1).contains(&rate) {
            return Ok(TuneOutcome { step_size: step, acceptance: rate, rounds: round, converged: true });
        }
        let target = 0.5 * (TUNE_BAND.0 + TUNE_BAND.1);
        let factor = if rate <= 0.0 { 0.1 } else { (rate / target).clamp(0.1, 10.0) };
        let factor = if rate >= 0.999 { 10.0 } else { factor };
        step *= factor;
    }
    Ok(TuneOutcome { step_size: step, acceptance: rate, rounds: TUNE_ROUNDS, converged: false })
}

/// Short pilot run adjusting the proposal width until the single-site
/// acceptance falls in [`TUNE_BAND`]. Deterministic for a given seed.
pub fn tune_step(net: &NetworkSpec, config: &SamplerConfig) -> Result<TuneOutcome> {
    let chain = Chain::new(net, config)?;
    tune_chain(&chain)
}
