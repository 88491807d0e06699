//! Inter-neuron couplings and the total multi-neuron action.
//!
//! Two coupling energies enter the Lagrangian (and therefore the action with
//! a factor `dtau` per slice):
//!
//! * excitatory, directed source -> target: `eps * phi_t^2 * (phi_s^2 - 1)^2`
//! * inhibitory, symmetric: `eps * (phi_a^2 - 1)^4 * (phi_b^2 - 1)^4`
//!
//! [`ActionModel`] is the compiled form used by the sampler. Couplings to
//! frozen inputs are folded into per-slice drive coefficients so that a site
//! update only touches couplings between evolving neurons.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{path_self_action, self_potential, LatticeConfig};
use crate::network::{build_input_path, NetworkSpec, NeuronId, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CouplingKind {
    Excitatory { source: NeuronId, target: NeuronId, epsilon: f64 },
    /// Stored with `a < b`.
    Inhibitory { a: NeuronId, b: NeuronId, epsilon: f64 },
}

impl CouplingKind {
    pub fn excitatory(source: NeuronId, target: NeuronId, epsilon: f64) -> Self {
        CouplingKind::Excitatory { source, target, epsilon }
    }

    pub fn inhibitory(a: NeuronId, b: NeuronId, epsilon: f64) -> Self {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        CouplingKind::Inhibitory { a, b, epsilon }
    }

    pub fn epsilon(&self) -> f64 {
        match *self {
            CouplingKind::Excitatory { epsilon, .. } | CouplingKind::Inhibitory { epsilon, .. } => {
                epsilon
            }
        }
    }

    /// `(source, target)` or `(a, b)`.
    pub fn endpoints(&self) -> (NeuronId, NeuronId) {
        match *self {
            CouplingKind::Excitatory { source, target, .. } => (source, target),
            CouplingKind::Inhibitory { a, b, .. } => (a, b),
        }
    }

    /// Energy density for the first and second endpoint values.
    #[inline]
    pub fn energy(&self, first: f64, second: f64) -> f64 {
        match *self {
            CouplingKind::Excitatory { epsilon, .. } => excitatory_energy(first, second, epsilon),
            CouplingKind::Inhibitory { epsilon, .. } => inhibitory_energy(first, second, epsilon),
        }
    }
}

impl fmt::Display for CouplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingKind::Excitatory { source, target, epsilon } => {
                write!(f, "exc {source} -> {target}, eps {epsilon}")
            }
            CouplingKind::Inhibitory { a, b, epsilon } => write!(f, "inh {a} -- {b}, eps {epsilon}"),
        }
    }
}

/// `eps * phi_target^2 * (phi_source^2 - 1)^2`.
#[inline]
pub fn excitatory_energy(phi_source: f64, phi_target: f64, epsilon: f64) -> f64 {
    let u = phi_source * phi_source - 1.0;
    epsilon * phi_target * phi_target * u * u
}

/// `eps * (phi_a^2 - 1)^4 * (phi_b^2 - 1)^4`.
#[inline]
pub fn inhibitory_energy(phi_a: f64, phi_b: f64, epsilon: f64) -> f64 {
    epsilon * (quartic(phi_a) * quartic(phi_b))
}

#[inline]
fn quartic(phi: f64) -> f64 {
    let u = phi * phi - 1.0;
    let u2 = u * u;
    u2 * u2
}

/// Full action by direct summation over the connection list: self-action of
/// every simulated neuron plus `dtau` times every coupling on every slice.
pub fn total_action(state: &SystemState, net: &NetworkSpec) -> Result<f64> {
    state.conforms(net)?;
    let cfg = &net.lattice;
    let mut s: f64 = net
        .neurons
        .iter()
        .zip(&state.paths)
        .filter(|(n, _)| !n.kind.is_input())
        .map(|(_, p)| path_self_action(p, cfg))
        .sum();
    for c in &net.connections {
        let (a, b) = c.endpoints();
        let pa = state.path_of(net, a)?.values();
        let pb = state.path_of(net, b)?.values();
        let e: f64 = pa.iter().zip(pb).map(|(&x, &y)| c.energy(x, y)).sum();
        s += cfg.dtau() * e;
    }
    Ok(s)
}

/// `S(new) - S(old)` for moving one site of a simulated neuron. Compiles the
/// network on every call; the sampler keeps an [`ActionModel`] instead.
pub fn local_action_delta(
    state: &SystemState,
    net: &NetworkSpec,
    id: NeuronId,
    slice: usize,
    proposed: f64,
) -> Result<f64> {
    let model = ActionModel::new(net)?;
    let idx = net.index_of(id).ok_or(Error::UnknownNeuron(id))?;
    let slot = model.slot_of(idx).ok_or(Error::FixedNeuron(id))?;
    Ok(model.site_delta(&state.paths, slot, slice, proposed))
}

#[derive(Debug, Clone, Default)]
struct EvolvingNeuron {
    /// Index into `NetworkSpec::neurons` / `SystemState::paths`.
    index: usize,
    /// Per-slice coefficient of `phi^2` from frozen excitatory sources.
    exc_drive: Option<Vec<f64>>,
    /// Per-slice coefficient of `(phi^2 - 1)^4` from frozen inhibitory partners.
    inh_drive: Option<Vec<f64>>,
    /// Evolving sources exciting this neuron.
    exc_in: Vec<(usize, f64)>,
    /// Evolving targets this neuron excites.
    exc_out: Vec<(usize, f64)>,
    inh: Vec<(usize, f64)>,
}

/// Compiled action for fast local updates.
#[derive(Debug, Clone)]
pub struct ActionModel {
    lattice: LatticeConfig,
    slots: Vec<Option<usize>>,
    neurons: Vec<EvolvingNeuron>,
    /// Couplings among frozen inputs only.
    constant: f64,
    inv_two_dtau: f64,
}

impl ActionModel {
    pub fn new(net: &NetworkSpec) -> Result<Self> {
        net.ensure_valid()?;
        let cfg = net.lattice;
        let n = cfg.n_slices;
        let mut slots = vec![None; net.neurons.len()];
        let mut neurons = Vec::new();
        let mut frozen = vec![None; net.neurons.len()];
        for (i, spec) in net.neurons.iter().enumerate() {
            if spec.kind.is_input() {
                frozen[i] = Some(build_input_path(spec, &cfg)?);
            } else {
                slots[i] = Some(neurons.len());
                neurons.push(EvolvingNeuron { index: i, ..Default::default() });
            }
        }
        let index = |id: NeuronId| net.index_of(id).ok_or(Error::UnknownNeuron(id));
        let mut constant = 0.0;
        for c in &net.connections {
            let (ia, ib) = (index(c.endpoints().0)?, index(c.endpoints().1)?);
            let eps = c.epsilon();
            match (*c, slots[ia], slots[ib]) {
                (CouplingKind::Excitatory { .. }, Some(sa), Some(sb)) => {
                    neurons[sb].exc_in.push((ia, eps));
                    neurons[sa].exc_out.push((ib, eps));
                }
                (CouplingKind::Excitatory { .. }, None, Some(sb)) => {
                    let src = frozen[ia].as_ref().expect("inputs are frozen").values();
                    let drive = neurons[sb].exc_drive.get_or_insert_with(|| vec![0.0; n]);
                    for (d, &p) in drive.iter_mut().zip(src) {
                        let u = p * p - 1.0;
                        *d += eps * u * u;
                    }
                }
                (CouplingKind::Inhibitory { .. }, Some(sa), Some(sb)) => {
                    neurons[sa].inh.push((ib, eps));
                    neurons[sb].inh.push((ia, eps));
                }
                (CouplingKind::Inhibitory { .. }, Some(s), None)
                | (CouplingKind::Inhibitory { .. }, None, Some(s)) => {
                    let other = if slots[ia].is_some() { ib } else { ia };
                    let partner = frozen[other].as_ref().expect("inputs are frozen").values();
                    let drive = neurons[s].inh_drive.get_or_insert_with(|| vec![0.0; n]);
                    for (d, &p) in drive.iter_mut().zip(partner) {
                        *d += eps * quartic(p);
                    }
                }
                (_, None, None) => {
                    let (pa, pb) = (frozen[ia].as_ref().unwrap(), frozen[ib].as_ref().unwrap());
                    let e: f64 = pa
                        .values()
                        .iter()
                        .zip(pb.values())
                        .map(|(&x, &y)| c.energy(x, y))
                        .sum();
                    constant += cfg.dtau() * e;
                }
                (CouplingKind::Excitatory { .. }, Some(_), None) => {
                    unreachable!("validation rejects excitatory targets that are inputs")
                }
            }
        }
        Ok(Self {
            lattice: cfg,
            slots,
            neurons,
            constant,
            inv_two_dtau: 1.0 / (2.0 * cfg.dtau()),
        })
    }

    pub fn lattice(&self) -> &LatticeConfig {
        &self.lattice
    }

    /// Number of evolving neurons.
    pub fn n_evolving(&self) -> usize {
        self.neurons.len()
    }

    /// Evolving slot of network index `index`, if that neuron is simulated.
    pub fn slot_of(&self, index: usize) -> Option<usize> {
        self.slots.get(index).copied().flatten()
    }

    /// Network index of evolving slot `slot`.
    pub fn index_of_slot(&self, slot: usize) -> usize {
        self.neurons[slot].index
    }

    /// Action contribution of couplings among frozen inputs.
    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    /// Self-potential plus every coupling touching site `j` of `slot` when
    /// that site holds `x`; excludes the kinetic links.
    #[inline]
    fn site_energy(&self, paths: &[crate::lattice::Path], slot: usize, j: usize, x: f64) -> f64 {
        let node = &self.neurons[slot];
        let x2 = x * x;
        let u = x2 - 1.0;
        let u2 = u * u;
        let mut e = 0.25 * self.lattice.lambda * u2;
        if let Some(d) = &node.exc_drive {
            e += d[j] * x2;
        }
        if let Some(d) = &node.inh_drive {
            e += d[j] * u2 * u2;
        }
        for &(src, eps) in &node.exc_in {
            let p = paths[src].values()[j];
            let v = p * p - 1.0;
            e += eps * x2 * v * v;
        }
        for &(tgt, eps) in &node.exc_out {
            let p = paths[tgt].values()[j];
            e += eps * p * p * u2;
        }
        for &(other, eps) in &node.inh {
            e += eps * u2 * u2 * quartic(paths[other].values()[j]);
        }
        e
    }

    /// Exact action change for setting site `j` of `slot` to `x`.
    pub fn site_delta(&self, paths: &[crate::lattice::Path], slot: usize, j: usize, x: f64) -> f64 {
        let v = paths[self.neurons[slot].index].values();
        let n = v.len();
        let old = v[j];
        let prev = v[(j + n - 1) % n];
        let next = v[(j + 1) % n];
        let kin = ((next - x).powi(2) + (x - prev).powi(2) - (next - old).powi(2) - (old - prev).powi(2))
            * self.inv_two_dtau;
        let pot = self.site_energy(paths, slot, j, x) - self.site_energy(paths, slot, j, old);
        kin + self.lattice.dtau() * pot
    }

    /// Exact action change for shifting the `len` sites starting at `start`
    /// (wrapping) by `shift`.
    pub fn block_delta(
        &self,
        paths: &[crate::lattice::Path],
        slot: usize,
        start: usize,
        len: usize,
        shift: f64,
    ) -> f64 {
        let v = paths[self.neurons[slot].index].values();
        let n = v.len();
        let mut kin = 0.0;
        if len < n {
            let first = start % n;
            let last = (start + len - 1) % n;
            let before = v[(first + n - 1) % n];
            let after = v[(last + 1) % n];
            kin = ((v[first] + shift - before).powi(2) - (v[first] - before).powi(2)
                + (after - v[last] - shift).powi(2)
                - (after - v[last]).powi(2))
                * self.inv_two_dtau;
        }
        let pot: f64 = (0..len)
            .map(|k| {
                let j = (start + k) % n;
                self.site_energy(paths, slot, j, v[j] + shift) - self.site_energy(paths, slot, j, v[j])
            })
            .sum();
        kin + self.lattice.dtau() * pot
    }

    /// Exact action change for reflecting the whole path of `slot`,
    /// `phi -> -phi`.
    pub fn flip_delta(&self, paths: &[crate::lattice::Path], slot: usize) -> f64 {
        let v = paths[self.neurons[slot].index].values();
        // Links are invariant under a global sign change; only sites can differ.
        let pot: f64 = (0..v.len())
            .map(|j| self.site_energy(paths, slot, j, -v[j]) - self.site_energy(paths, slot, j, v[j]))
            .sum();
        self.lattice.dtau() * pot
    }

    /// Integrated self-potential of every evolving neuron's current path.
    pub fn potential_integrals(&self, paths: &[crate::lattice::Path]) -> Vec<f64> {
        let lambda = self.lattice.lambda;
        let dtau = self.lattice.dtau();
        self.neurons
            .iter()
            .map(|node| {
                dtau * paths[node.index]
                    .values()
                    .iter()
                    .map(|&p| self_potential(p, lambda))
                    .sum::<f64>()
            })
            .collect()
    }
}
