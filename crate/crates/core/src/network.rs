//! Network declarations, frozen input paths and the activity observable.

use std::collections::HashMap;
use std::fmt;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{analytic_kink_path, self_potential, KinkSchedule, LatticeConfig, Path};
use crate::potentials::CouplingKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NeuronId(pub u32);

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NeuronKind {
    Simulated,
    InputActive(KinkSchedule),
    InputPassive,
    InputGraded { brightness: f64, schedule: KinkSchedule },
}

impl NeuronKind {
    pub fn is_input(&self) -> bool {
        !matches!(self, NeuronKind::Simulated)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronSpec {
    pub id: NeuronId,
    pub kind: NeuronKind,
}

impl NeuronSpec {
    pub fn simulated(id: u32) -> Self {
        Self { id: NeuronId(id), kind: NeuronKind::Simulated }
    }

    pub fn active(id: u32, schedule: KinkSchedule) -> Self {
        Self { id: NeuronId(id), kind: NeuronKind::InputActive(schedule) }
    }

    pub fn passive(id: u32) -> Self {
        Self { id: NeuronId(id), kind: NeuronKind::InputPassive }
    }

    /// Active when `on`, passive otherwise.
    pub fn switch(id: u32, on: bool, schedule: &KinkSchedule) -> Self {
        if on {
            Self::active(id, schedule.clone())
        } else {
            Self::passive(id)
        }
    }

    pub fn graded(id: u32, brightness: f64, schedule: KinkSchedule) -> Self {
        Self {
            id: NeuronId(id),
            kind: NeuronKind::InputGraded { brightness, schedule },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub lattice: LatticeConfig,
    pub neurons: Vec<NeuronSpec>,
    pub connections: Vec<CouplingKind>,
}

impl NetworkSpec {
    pub fn new(lattice: LatticeConfig) -> Self {
        Self { lattice, neurons: Vec::new(), connections: Vec::new() }
    }

    pub fn with_neuron(mut self, neuron: NeuronSpec) -> Self {
        self.neurons.push(neuron);
        self
    }

    pub fn with_connection(mut self, connection: CouplingKind) -> Self {
        self.connections.push(connection);
        self
    }

    /// Position of `id` in `neurons`.
    pub fn index_of(&self, id: NeuronId) -> Option<usize> {
        self.neurons.iter().position(|n| n.id == id)
    }

    pub fn neuron(&self, id: NeuronId) -> Option<&NeuronSpec> {
        self.neurons.iter().find(|n| n.id == id)
    }

    pub fn simulated_ids(&self) -> Vec<NeuronId> {
        self.neurons
            .iter()
            .filter(|n| !n.kind.is_input())
            .map(|n| n.id)
            .collect()
    }

    /// Lists every broken invariant. Empty means the network is usable.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.lattice.check() {
            out.push(e.to_string());
        }
        let mut kinds: HashMap<NeuronId, &NeuronKind> = HashMap::new();
        for n in &self.neurons {
            if kinds.insert(n.id, &n.kind).is_some() {
                out.push(format!("neuron {}: duplicate id", n.id));
            }
            match &n.kind {
                NeuronKind::InputActive(s) => {
                    if let Err(e) = s.check(&self.lattice) {
                        out.push(format!("neuron {}: {e}", n.id));
                    }
                }
                NeuronKind::InputGraded { brightness, schedule } => {
                    if !(0.0..=1.0).contains(brightness) {
                        out.push(format!("neuron {}: brightness {brightness} outside [0, 1]", n.id));
                    }
                    if let Err(e) = schedule.check(&self.lattice) {
                        out.push(format!("neuron {}: {e}", n.id));
                    }
                }
                NeuronKind::Simulated | NeuronKind::InputPassive => {}
            }
        }
        for (k, c) in self.connections.iter().enumerate() {
            let (a, b) = c.endpoints();
            for id in [a, b] {
                if !kinds.contains_key(&id) {
                    out.push(format!("connection {k} ({c}): unknown neuron {id}"));
                }
            }
            if a == b {
                out.push(format!("connection {k} ({c}): self-coupling"));
            }
            let eps = c.epsilon();
            if !(eps.is_finite() && eps >= 0.0) {
                out.push(format!("connection {k} ({c}): epsilon {eps} must be >= 0"));
            }
            if let CouplingKind::Excitatory { target, .. } = c {
                if kinds.get(target).is_some_and(|kind| kind.is_input()) {
                    out.push(format!("connection {k} ({c}): target {target} is a fixed input"));
                }
            }
            if let CouplingKind::Inhibitory { a, b, .. } = c {
                if a > b {
                    out.push(format!("connection {k} ({c}): inhibitory endpoints not canonical"));
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidNetwork(v))
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkFile::from(self))?)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// One frozen or evolving path per neuron, in `NetworkSpec::neurons` order.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub paths: Vec<Path>,
}

impl SystemState {
    pub fn conforms(&self, net: &NetworkSpec) -> Result<()> {
        if self.paths.len() != net.neurons.len() {
            return Err(Error::StateShape {
                expected: net.neurons.len(),
                got: self.paths.len(),
            });
        }
        self.paths.iter().try_for_each(|p| p.conforms(&net.lattice))
    }

    pub fn path_of(&self, net: &NetworkSpec, id: NeuronId) -> Result<&Path> {
        let i = net.index_of(id).ok_or(Error::UnknownNeuron(id))?;
        Ok(&self.paths[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronActivity {
    pub id: NeuronId,
    pub activity: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActivityReport {
    pub neurons: Vec<NeuronActivity>,
}

impl ActivityReport {
    pub fn get(&self, id: NeuronId) -> Option<&NeuronActivity> {
        self.neurons.iter().find(|n| n.id == id)
    }

    /// Mean activity of `id`; panics if the neuron was not measured.
    pub fn activity(&self, id: u32) -> f64 {
        self.get(NeuronId(id))
            .unwrap_or_else(|| panic!("neuron {id} not in report"))
            .activity
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("neuron_id,activity,std_error,n_samples\n");
        for n in &self.neurons {
            s.push_str(&format!("{},{},{},{}\n", n.id, n.activity, n.std_error, n.n_samples));
        }
        s
    }
}

/// Element-wise `sqrt(sqrt(b) psi^2 - sqrt(b) + 1)`; satisfies
/// `graded^2 - 1 = sqrt(b) (psi^2 - 1)`.
pub fn graded_path(brightness: f64, base: &Path) -> Result<Path> {
    if !(0.0..=1.0).contains(&brightness) {
        return Err(Error::Brightness(brightness));
    }
    let s = brightness.sqrt();
    Path::new(
        base.values()
            .iter()
            .map(|&psi| (s * psi * psi - s + 1.0).max(0.0).sqrt())
            .collect(),
    )
}

pub fn build_input_path(spec: &NeuronSpec, cfg: &LatticeConfig) -> Result<Path> {
    match &spec.kind {
        NeuronKind::Simulated => Err(Error::NotAnInput(spec.id)),
        NeuronKind::InputPassive => Ok(Path::constant(1.0, cfg)),
        NeuronKind::InputActive(schedule) => analytic_kink_path(schedule, cfg),
        NeuronKind::InputGraded { brightness, schedule } => {
            graded_path(*brightness, &analytic_kink_path(schedule, cfg)?)
        }
    }
}

/// Canonical active input path used to normalize activity.
pub fn reference_path(cfg: &LatticeConfig) -> Path {
    analytic_kink_path(&KinkSchedule::default_for(cfg), cfg).expect("default schedule is valid")
}

/// `dtau * sum_j V0(phi_j)`, the time-integrated self-potential.
pub fn integrated_potential(values: &[f64], cfg: &LatticeConfig) -> f64 {
    cfg.dtau() * values.iter().map(|&p| self_potential(p, cfg.lambda)).sum::<f64>()
}

/// Mean and standard error of the per-sample potential-energy ratio against
/// `reference`. Samples are treated as independent here; the sampler
/// applies batch means to its own correlated series.
pub fn activity(
    samples: &[SystemState],
    net: &NetworkSpec,
    id: NeuronId,
    reference: &Path,
) -> Result<(f64, f64)> {
    let cfg = &net.lattice;
    let denom = integrated_potential(reference.values(), cfg);
    if denom <= 0.0 {
        return Err(Error::VacuumReference);
    }
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let ratios = samples
        .iter()
        .map(|s| Ok(integrated_potential(s.path_of(net, id)?.values(), cfg) / denom))
        .collect::<Result<Vec<_>>>()?;
    Ok(crate::stats::mean_and_error(&ratios))
}

// --- JSON network description -------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    lattice: LatticeConfig,
    neurons: Vec<NeuronEntry>,
    #[serde(default)]
    connections: Vec<ConnectionEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindTag {
    Simulated,
    Active,
    Passive,
    Graded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NeuronEntry {
    id: NeuronId,
    kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    brightness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kink_centers: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ConnectionTag {
    Exc,
    Inh,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConnectionEntry {
    #[serde(rename = "type")]
    kind: ConnectionTag,
    from: NeuronId,
    to: NeuronId,
    epsilon: f64,
}

impl TryFrom<NetworkFile> for NetworkSpec {
    type Error = Error;

    fn try_from(file: NetworkFile) -> Result<Self> {
        let lattice = file.lattice;
        lattice.check()?;
        let schedule = |centers: Option<Vec<f64>>| match centers {
            Some(c) => KinkSchedule::new(c, &lattice),
            None => Ok(KinkSchedule::default_for(&lattice)),
        };
        let mut neurons = Vec::with_capacity(file.neurons.len());
        for e in file.neurons {
            let kind = match e.kind {
                KindTag::Simulated => NeuronKind::Simulated,
                KindTag::Passive => NeuronKind::InputPassive,
                KindTag::Active => NeuronKind::InputActive(schedule(e.kink_centers)?),
                KindTag::Graded => NeuronKind::InputGraded {
                    brightness: e.brightness.ok_or_else(|| {
                        Error::InvalidNetwork(vec![format!("neuron {}: graded input needs brightness", e.id)])
                    })?,
                    schedule: schedule(e.kink_centers)?,
                },
            };
            neurons.push(NeuronSpec { id: e.id, kind });
        }
        let connections = file
            .connections
            .into_iter()
            .map(|c| match c.kind {
                ConnectionTag::Exc => CouplingKind::excitatory(c.from, c.to, c.epsilon),
                ConnectionTag::Inh => CouplingKind::inhibitory(c.from, c.to, c.epsilon),
            })
            .collect();
        Ok(NetworkSpec { lattice, neurons, connections })
    }
}

impl From<&NetworkSpec> for NetworkFile {
    fn from(net: &NetworkSpec) -> Self {
        let default = KinkSchedule::default_for(&net.lattice);
        let centers = |s: &KinkSchedule| (s != &default).then(|| s.centers().to_vec());
        let neurons = net
            .neurons
            .iter()
            .map(|n| {
                let (kind, brightness, kink_centers) = match &n.kind {
                    NeuronKind::Simulated => (KindTag::Simulated, None, None),
                    NeuronKind::InputPassive => (KindTag::Passive, None, None),
                    NeuronKind::InputActive(s) => (KindTag::Active, None, centers(s)),
                    NeuronKind::InputGraded { brightness, schedule } => {
                        (KindTag::Graded, Some(*brightness), centers(schedule))
                    }
                };
                NeuronEntry { id: n.id, kind, brightness, kink_centers }
            })
            .collect();
        let connections = net
            .connections
            .iter()
            .map(|c| match *c {
                CouplingKind::Excitatory { source, target, epsilon } => ConnectionEntry {
                    kind: ConnectionTag::Exc,
                    from: source,
                    to: target,
                    epsilon,
                },
                CouplingKind::Inhibitory { a, b, epsilon } => ConnectionEntry {
                    kind: ConnectionTag::Inh,
                    from: a,
                    to: b,
                    epsilon,
                },
            })
            .collect();
        NetworkFile { lattice: net.lattice, neurons, connections }
    }
}
