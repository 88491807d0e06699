//! Acceptance suite. Every criterion prints one `PASS` or `FAIL` line with
//! its measured values and runtime; the process exits with status 1 if any
//! criterion fails.
//!
//! MNIST is read from `$QNN_MNIST_DIR`, falling back to `data/mnist` at the
//! workspace root.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::Array2;

use qnn_core::experiments::{
    conv_line_detector, images, is_monotone, run_sweep, run_truth_table, two_neuron, Gate, Scheme,
    SweepPlan, CONV_OUTPUT,
};
use qnn_core::lattice::{
    analytic_kink_path, kink_action_analytic, path_self_action, KinkSchedule, LatticeConfig, Path,
};
use qnn_core::network::{graded_path, NetworkSpec, NeuronId, NeuronSpec, SystemState};
use qnn_core::potentials::{local_action_delta, total_action};
use qnn_core::sampler::{init_state, run_pooled, run_simulation, Chain, SamplerConfig};
use qnn_core::stats::batch_means;
use qnn_core::trainer::{
    accuracy, clamp_nonnegative, gradient, load_split, loss, normalize_weights, predict, recognize,
    softmax_row, train, DigitParams, Split, TrainParams,
};
use qnn_validation::{double_well, expectation, Grid};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Self::new(false, format!("error: {e}"))
    }
}

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Duration,
    run: fn(&mut Shared) -> Outcome,
}

/// Results handed from one criterion to a later one.
#[derive(Default)]
struct Shared {
    weights: Option<Array2<f64>>,
}

fn mnist_dir() -> PathBuf {
    std::env::var_os("QNN_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn kink_action(_: &mut Shared) -> Outcome {
    let cfg = LatticeConfig::default();
    let t = cfg.total_time;
    let path = KinkSchedule::new(vec![t / 4.0, 3.0 * t / 4.0], &cfg).and_then(|s| analytic_kink_path(&s, &cfg));
    match path {
        Ok(p) => {
            let s = path_self_action(&p, &cfg);
            let want = 2.0 * kink_action_analytic(cfg.lambda);
            let err = (s - want).abs() / want;
            Outcome::new(err < 0.02, format!("S = {s:.4}, 2 x 200/3 = {want:.4}, relative error {err:.2e}"))
        }
        Err(e) => Outcome::error(e),
    }
}

fn transfer_matrix(_: &mut Shared) -> Outcome {
    let cfg = match LatticeConfig::new(16, 4.0, 1.0) {
        Ok(c) => c,
        Err(e) => return Outcome::error(e),
    };
    let grid = Grid { half_width: 5.0, points: 501 };
    let v = double_well(cfg.lambda);
    let exact2 = expectation(&grid, cfg.n_slices, cfg.dtau(), &v, |x| x * x);
    let exact4 = expectation(&grid, cfg.n_slices, cfg.dtau(), &v, |x| x.powi(4));

    let net = NetworkSpec::new(cfg).with_neuron(NeuronSpec::simulated(1));
    let sampler = SamplerConfig { levels: 3, seed: 11, ..SamplerConfig::default() };
    let mut chain = match Chain::new(&net, &sampler).and_then(|mut c| c.thermalize().map(|_| c)) {
        Ok(c) => c,
        Err(e) => return Outcome::error(e),
    };
    let (mut m2, mut m4) = (Vec::new(), Vec::new());
    for _ in 0..400_000 {
        if let Err(e) = chain.sweep() {
            return Outcome::error(e);
        }
        let phi = chain.state().paths[0].values();
        let n = phi.len() as f64;
        m2.push(phi.iter().map(|x| x * x).sum::<f64>() / n);
        m4.push(phi.iter().map(|x| x.powi(4)).sum::<f64>() / n);
    }
    let (mc2, e2) = batch_means(&m2);
    let (mc4, e4) = batch_means(&m4);
    let z2 = (mc2 - exact2).abs() / e2;
    let z4 = (mc4 - exact4).abs() / e4;
    Outcome::new(
        z2 < 3.0 && z4 < 3.0,
        format!(
            "<phi^2> MC {mc2:.5} +- {e2:.5} vs {exact2:.5} ({z2:.2} sigma); \
             <phi^4> MC {mc4:.5} +- {e4:.5} vs {exact4:.5} ({z4:.2} sigma)"
        ),
    )
}

fn two_neuron_transmission(_: &mut Shared) -> Outcome {
    let net = match two_neuron(LatticeConfig::default(), 6000.0) {
        Ok(n) => n,
        Err(e) => return Outcome::error(e),
    };
    match run_simulation(&net, &SamplerConfig::default()) {
        Ok((report, _)) => {
            let n = report.get(NeuronId(1)).expect("output measured");
            Outcome::new(
                (n.activity - 0.92).abs() <= 0.08,
                format!("activity {:.4} +- {:.4}, target 0.92 +- 0.08", n.activity, n.std_error),
            )
        }
        Err(e) => Outcome::error(e),
    }
}

fn chain_transparency(_: &mut Shared) -> Outcome {
    let ks: Vec<f64> = (0..=8).map(|i| 0.25 * i as f64).collect();
    let plan = SweepPlan::new(Scheme::Chain3, ks);
    let table = match run_sweep(&plan) {
        Ok(t) => t,
        Err(e) => return Outcome::error(e),
    };
    if !table.failures.is_empty() {
        return Outcome::new(false, format!("{} sweep points failed", table.failures.len()));
    }
    let curve = table.curve(Scheme::Chain3.output());
    let first = curve.first().map_or(f64::NAN, |p| p.1);
    let last = curve.last().map_or(f64::NAN, |p| p.1);
    let monotone = is_monotone(&curve, true, 2.0);
    let shape: Vec<String> = curve.iter().map(|p| format!("{:.2}", p.1)).collect();
    Outcome::new(
        first < 0.1 && last > 0.6 && monotone && curve.len() >= 5,
        format!("activity(k=0) {first:.3} (< 0.1), activity(k=2) {last:.3} (> 0.6), monotone {monotone}, curve [{}]", shape.join(" ")),
    )
}

fn gate_truth_tables(_: &mut Shared) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for gate in [Gate::And, Gate::Not, Gate::Or, Gate::Xor] {
        match run_truth_table(gate, LatticeConfig::default(), &SamplerConfig::default(), 1) {
            Ok(t) => {
                pass &= t.passes();
                let cases: Vec<String> =
                    t.rows.iter().map(|r| format!("{}={:.2}", r.case, r.output_activity)).collect();
                parts.push(format!(
                    "{gate:?} {} [{}] margin {:.2}",
                    if t.passes() { "ok" } else { "fails" },
                    cases.join(" "),
                    t.margin()
                ));
            }
            Err(e) => return Outcome::error(e),
        }
    }
    Outcome::new(pass, parts.join("; "))
}

fn line_detector(_: &mut Shared) -> Outcome {
    let cfg = LatticeConfig::default();
    let sampler = SamplerConfig::default();
    let out = |img| -> qnn_core::Result<f64> {
        let (r, _) = run_pooled(&conv_line_detector(cfg, &img)?, &sampler, 1)?;
        Ok(r.activity(CONV_OUTPUT))
    };
    let targets = [("vertical@1", images::vertical_line(1)), ("vertical@2", images::vertical_line(2))];
    let others = [
        ("horizontal", images::horizontal_line(1)),
        ("diagonal", images::diagonal()),
        ("blank", images::blank()),
        ("full", images::full()),
    ];
    let mut measured = Vec::new();
    for (name, img) in targets.iter().chain(&others) {
        match out(*img) {
            Ok(a) => measured.push((*name, a)),
            Err(e) => return Outcome::error(e),
        }
    }
    let best_other = measured[2..].iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
    let pass = measured[..2].iter().all(|m| m.1 > best_other);
    let shown: Vec<String> = measured.iter().map(|(n, a)| format!("{n}={a:.3}")).collect();
    Outcome::new(pass, shown.join(" "))
}

fn classical_trainer(shared: &mut Shared) -> Outcome {
    let dir = mnist_dir();
    let (train_set, test_set) = match (load_split(&dir, Split::Train), load_split(&dir, Split::Test)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Outcome::error(format!("{e} (set QNN_MNIST_DIR)")),
    };
    let outcome = match train(&train_set, &TrainParams::default()) {
        Ok(o) => o,
        Err(e) => return Outcome::error(e),
    };
    let clamped = clamp_nonnegative(&outcome.weights);
    let acc = accuracy(&clamped, &test_set);
    let min = clamped.iter().copied().fold(f64::INFINITY, f64::min);
    shared.weights = Some(clamped);
    Outcome::new(acc >= 0.88 && min == 0.0, format!("test accuracy {:.2}% (>= 88%), min weight {min}", 100.0 * acc))
}

fn digit_recognition(shared: &mut Shared) -> Outcome {
    let Some(w) = shared.weights.as_ref() else {
        return Outcome::new(false, "no trained weights (trainer criterion did not produce any)");
    };
    let test = match load_split(&mnist_dir(), Split::Test) {
        Ok(t) => t,
        Err(e) => return Outcome::error(e),
    };
    let eps_hat = match normalize_weights(w) {
        Ok(e) => e,
        Err(e) => return Outcome::error(e),
    };
    let probe = test.head(50);
    let classical = predict(w, probe.brightness(&(0..probe.len()).collect::<Vec<_>>()).view());
    let chosen: Vec<usize> =
        (0..probe.len()).filter(|&i| classical[i] == probe.labels[i] as usize).take(3).collect();
    let mut pass = chosen.len() == 3;
    let mut parts = Vec::new();
    for &i in &chosen {
        match recognize(
            &test.image(i),
            &eps_hat,
            &DigitParams::default(),
            LatticeConfig::default(),
            &SamplerConfig::default(),
            1,
        ) {
            Ok(r) => {
                pass &= r.predicted == test.labels[i] as usize;
                parts.push(format!("#{i} label {} -> {} (score {:.3})", test.labels[i], r.predicted, r.scores[r.predicted]));
            }
            Err(e) => return Outcome::error(e),
        }
    }
    Outcome::new(pass, parts.join("; "))
}

fn perturbed_state(net: &NetworkSpec) -> qnn_core::Result<SystemState> {
    let mut state = init_state(net)?;
    for (i, (n, p)) in net.neurons.iter().zip(state.paths.iter_mut()).enumerate() {
        if !n.kind.is_input() {
            let v = (0..p.len()).map(|j| 1.1 * (0.37 * j as f64 + i as f64).sin() + 0.05).collect();
            *p = Path::new(v)?;
        }
    }
    Ok(state)
}

fn exactness() -> Result<Vec<String>, String> {
    let mut failed = Vec::new();
    let cfg = LatticeConfig::default().with_slices(64);

    let net = qnn_core::experiments::or_gate(cfg, [true, false], [8000.0; 2], 50000.0, 6000.0)
        .map_err(|e| e.to_string())?;
    let state = perturbed_state(&net).map_err(|e| e.to_string())?;
    let base = total_action(&state, &net).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for n in net.neurons.iter().filter(|n| !n.kind.is_input()) {
        for j in [0, 7, 31, 63] {
            let x = -0.8 + 0.1 * j as f64 / 7.0;
            let d = local_action_delta(&state, &net, n.id, j, x).map_err(|e| e.to_string())?;
            let mut moved = state.clone();
            let idx = net.index_of(n.id).expect("neuron in network");
            let mut v = moved.paths[idx].values().to_vec();
            v[j] = x;
            moved.paths[idx] = Path::new(v).map_err(|e| e.to_string())?;
            let full = total_action(&moved, &net).map_err(|e| e.to_string())? - base;
            worst = worst.max((d - full).abs() / full.abs().max(1.0));
        }
    }
    if worst > 1e-9 {
        failed.push(format!("local delta off by {worst:.1e}"));
    }

    let schedule = KinkSchedule::default_for(&cfg);
    let psi = analytic_kink_path(&schedule, &cfg).map_err(|e| e.to_string())?;
    for b in [0.0, 0.09, 0.5, 1.0] {
        let g = graded_path(b, &psi).map_err(|e| e.to_string())?;
        let off = g
            .values()
            .iter()
            .zip(psi.values())
            .map(|(gv, pv)| (gv * gv - 1.0 - b.sqrt() * (pv * pv - 1.0)).abs())
            .fold(0.0, f64::max);
        if off > 1e-12 {
            failed.push(format!("graded identity off by {off:.1e} at b = {b}"));
        }
    }

    let scores = [0.3, -1.2, 4.0, 0.0, 2.5];
    let p = softmax_row(&scores);
    let shifted = softmax_row(&scores.map(|s| s + 123.4));
    let shift_err = p.iter().zip(&shifted).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if shift_err > 1e-12 || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        failed.push("softmax shift invariance or unit sum".into());
    }

    let (features, rows) = (6, 4);
    let x = Array2::from_shape_fn((rows, features), |(i, j)| ((i * 7 + j * 3) % 5) as f64 / 4.0);
    let labels = [3u8, 0, 9, 3];
    let w = Array2::from_shape_fn((features, 10), |(i, j)| {
        let v = 0.3 * ((i * 10 + j) as f64 * 0.7).sin();
        if v.abs() < 0.02 {
            0.05
        } else {
            v
        }
    });
    let g = gradient(&w, x.view(), &labels, 100.0);
    let h = 1e-6;
    let mut fd_err: f64 = 0.0;
    for idx in [(0, 0), (1, 3), (2, 9), (5, 5), (4, 2)] {
        let (mut up, mut down) = (w.clone(), w.clone());
        up[idx] += h;
        down[idx] -= h;
        let fd = (loss(&up, x.view(), &labels, 100.0) - loss(&down, x.view(), &labels, 100.0)) / (2.0 * h);
        fd_err = fd_err.max((fd - g[idx]).abs());
    }
    if fd_err > 1e-5 {
        failed.push(format!("gradient vs finite differences off by {fd_err:.1e}"));
    }

    let raw = Array2::from_shape_fn((784, 10), |(i, j)| ((i * 31 + j * 17) % 97) as f64 - 20.0);
    let clamped = clamp_nonnegative(&raw);
    let norm = normalize_weights(&clamped).map_err(|e| e.to_string())?;
    let ordered = clamped.iter().zip(norm.iter()).all(|(a, na)| {
        clamped.iter().zip(norm.iter()).step_by(97).all(|(b, nb)| (a < b) == (na < nb))
    });
    if !ordered {
        failed.push("normalize_weights does not preserve order".into());
    }

    let small = two_neuron(cfg, 3000.0).map_err(|e| e.to_string())?;
    let sc = SamplerConfig { thermalization_updates: 50_000, measurement_sweeps: 200, ..SamplerConfig::default() };
    let a = run_simulation(&small, &sc).map_err(|e| e.to_string())?.0;
    let b = run_simulation(&small, &sc).map_err(|e| e.to_string())?.0;
    if a != b {
        failed.push("same seed gave different reports".into());
    }
    Ok(failed)
}

fn exactness_properties(_: &mut Shared) -> Outcome {
    match exactness() {
        Ok(f) if f.is_empty() => Outcome::new(
            true,
            "local delta, graded identity, softmax, gradient, normalization order and seed determinism hold",
        ),
        Ok(f) => Outcome::new(false, f.join("; ")),
        Err(e) => Outcome::error(e),
    }
}

const CRITERIA: [Criterion; 9] = [
    Criterion { id: 1, name: "kink action", budget: Duration::from_secs(1), run: kink_action },
    Criterion { id: 2, name: "transfer-matrix oracle", budget: Duration::from_secs(30), run: transfer_matrix },
    Criterion { id: 3, name: "two-neuron transmission", budget: Duration::from_secs(60), run: two_neuron_transmission },
    Criterion { id: 4, name: "chain transparency", budget: Duration::from_secs(600), run: chain_transparency },
    Criterion { id: 5, name: "gate truth tables", budget: Duration::from_secs(900), run: gate_truth_tables },
    Criterion { id: 6, name: "vertical-line detector", budget: Duration::from_secs(600), run: line_detector },
    Criterion { id: 7, name: "classical trainer", budget: Duration::from_secs(300), run: classical_trainer },
    Criterion { id: 8, name: "digit recognition", budget: Duration::from_secs(1200), run: digit_recognition },
    Criterion { id: 9, name: "exactness properties", budget: Duration::from_secs(10), run: exactness_properties },
];

fn main() -> ExitCode {
    let mut shared = Shared::default();
    let mut failures = 0;
    for c in &CRITERIA {
        let start = Instant::now();
        let outcome = (c.run)(&mut shared);
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let pass = outcome.pass && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "{} criterion {} {}: {} [{:.1} s of {} s{}]",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            outcome.detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    }
    println!("acceptance: {} of {} criteria passed", CRITERIA.len() - failures, CRITERIA.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
