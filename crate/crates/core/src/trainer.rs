//! Classical softmax regression on MNIST with a non-negativity penalty, and
//! the digit-recognition network built from its weights.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path as FsPath, PathBuf};

use flate2::read::GzDecoder;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{KinkSchedule, LatticeConfig};
use crate::network::{NetworkSpec, NeuronId, NeuronSpec};
use crate::potentials::CouplingKind;
use crate::sampler::{run_pooled, SamplerConfig};

pub const PIXELS: usize = 784;
pub const CLASSES: usize = 10;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// MNIST images kept as raw bytes; brightness is `byte / 255`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub pixels: Array2<u8>,
    pub labels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Brightness values of image `i`.
    pub fn image(&self, i: usize) -> Vec<f64> {
        self.pixels.row(i).iter().map(|&p| f64::from(p) / 255.0).collect()
    }

    /// Brightness matrix of the selected images.
    pub fn brightness(&self, indices: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((indices.len(), self.pixels.ncols()));
        for (mut row, &i) in out.rows_mut().into_iter().zip(indices) {
            row.zip_mut_with(&self.pixels.row(i), |o, &p| *o = f64::from(p) / 255.0);
        }
        out
    }

    /// The first `n` samples.
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            pixels: self.pixels.slice(s![..n, ..]).to_owned(),
            labels: self.labels[..n].to_vec(),
            rows: self.rows,
            cols: self.cols,
        }
    }
}

fn read_maybe_gz(path: &FsPath) -> Result<Vec<u8>> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let raw = fs::read(path).map_err(io)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out).map_err(io)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, path: &FsPath) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated { path: path.to_path_buf(), expected: at + 4, got: bytes.len() })
}

/// Parses an IDX image file (optionally gzipped): `(count, rows, cols, bytes)`.
pub fn read_idx_images(path: &FsPath) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = read_maybe_gz(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::BadMagic { path: path.to_path_buf(), expected: IMAGES_MAGIC, found: magic });
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let expected = 16 + n * rows * cols;
    if bytes.len() < expected {
        return Err(Error::Truncated { path: path.to_path_buf(), expected, got: bytes.len() });
    }
    Ok((n, rows, cols, bytes[16..expected].to_vec()))
}

/// Parses an IDX label file (optionally gzipped).
pub fn read_idx_labels(path: &FsPath) -> Result<Vec<u8>> {
    let bytes = read_maybe_gz(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != LABELS_MAGIC {
        return Err(Error::BadMagic { path: path.to_path_buf(), expected: LABELS_MAGIC, found: magic });
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    let expected = 8 + n;
    if bytes.len() < expected {
        return Err(Error::Truncated { path: path.to_path_buf(), expected, got: bytes.len() });
    }
    let labels = bytes[8..expected].to_vec();
    if let Some(&label) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::BadLabel { path: path.to_path_buf(), label });
    }
    Ok(labels)
}

pub fn load_mnist(images: &FsPath, labels: &FsPath) -> Result<Dataset> {
    let (n, rows, cols, bytes) = read_idx_images(images)?;
    let labels = read_idx_labels(labels)?;
    if labels.len() != n {
        return Err(Error::CountMismatch { images: n, labels: labels.len() });
    }
    let pixels = Array2::from_shape_vec((n, rows * cols), bytes)
        .map_err(|e| Error::Dimension(e.to_string()))?;
    Ok(Dataset { pixels, labels, rows, cols })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Image and label paths of `split` in `dir`, preferring uncompressed
/// files and falling back to `.gz`.
pub fn mnist_paths(dir: &FsPath, split: Split) -> (PathBuf, PathBuf) {
    let stem = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let pick = |name: String| {
        let plain = dir.join(&name);
        let gz = dir.join(format!("{name}.gz"));
        if !plain.exists() && gz.exists() {
            gz
        } else {
            plain
        }
    };
    (pick(format!("{stem}-images-idx3-ubyte")), pick(format!("{stem}-labels-idx1-ubyte")))
}

pub fn load_split(dir: &FsPath, split: Split) -> Result<Dataset> {
    let (images, labels) = mnist_paths(dir, split);
    load_mnist(&images, &labels)
}

/// Max-subtracted softmax.
pub fn softmax_row(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn softmax_rows(scores: &Array2<f64>) -> Array2<f64> {
    let mut p = scores.clone();
    for mut row in p.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    p
}

/// `lambda * sum(max(-W, 0))`.
pub fn penalty_term(w: &Array2<f64>, penalty: f64) -> f64 {
    penalty * w.iter().map(|&v| (-v).max(0.0)).sum::<f64>()
}

/// Mean cross-entropy of `softmax(X W)` against `labels`.
pub fn cross_entropy(w: &Array2<f64>, x: ArrayView2<f64>, labels: &[u8]) -> f64 {
    let scores = x.dot(w);
    let mut total = 0.0;
    for (row, &label) in scores.rows().into_iter().zip(labels) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[label as usize];
    }
    total / labels.len() as f64
}

/// Cross-entropy plus the hinge penalty on negative weights.
pub fn loss(w: &Array2<f64>, x: ArrayView2<f64>, labels: &[u8], penalty: f64) -> f64 {
    cross_entropy(w, x, labels) + penalty_term(w, penalty)
}

fn one_hot(labels: &[u8]) -> Array2<f64> {
    let mut y = Array2::zeros((labels.len(), CLASSES));
    for (i, &l) in labels.iter().enumerate() {
        y[[i, l as usize]] = 1.0;
    }
    y
}

fn cross_entropy_gradient(w: &Array2<f64>, x: ArrayView2<f64>, labels: &[u8]) -> Array2<f64> {
    let p = softmax_rows(&x.dot(w));
    x.t().dot(&(p - one_hot(labels))) / labels.len() as f64
}

/// `(1/B) X^T (P - Y) - penalty * [W < 0]`; the subgradient is 0 at `W = 0`.
pub fn gradient(w: &Array2<f64>, x: ArrayView2<f64>, labels: &[u8], penalty: f64) -> Array2<f64> {
    let mut g = cross_entropy_gradient(w, x, labels);
    g.zip_mut_with(w, |gi, &wi| {
        if wi < 0.0 {
            *gi -= penalty;
        }
    });
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub learning_rate: f64,
    /// Multiplies the learning rate after every epoch.
    pub decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub penalty: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { learning_rate: 0.5, decay: 0.9, batch_size: 256, epochs: 20, penalty: 100.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub weights: Array2<f64>,
    /// Mean penalized batch loss per epoch.
    pub epoch_loss: Vec<f64>,
}

/// Mini-batch training. The cross-entropy step is a gradient step; the
/// hinge penalty is applied through its proximal map, which lifts each
/// negative weight by `lr * penalty` but never past zero.
pub fn train(data: &Dataset, params: &TrainParams) -> Result<TrainOutcome> {
    if data.is_empty() || params.batch_size == 0 {
        return Err(Error::Dimension("empty dataset or zero batch size".into()));
    }
    let mut w = Array2::<f64>::zeros((data.pixels.ncols(), CLASSES));
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut lr = params.learning_rate;
    let mut epoch_loss = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for (b, idx) in order.chunks(params.batch_size).enumerate() {
            let x = data.brightness(idx);
            let labels: Vec<u8> = idx.iter().map(|&i| data.labels[i]).collect();
            let batch_loss = loss(&w, x.view(), &labels, params.penalty);
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b, loss: batch_loss });
            }
            sum += batch_loss;
            batches += 1;
            let g = cross_entropy_gradient(&w, x.view(), &labels);
            let lift = lr * params.penalty;
            w.zip_mut_with(&g, |wi, &gi| {
                let v = *wi - lr * gi;
                *wi = if v < 0.0 { (v + lift).min(0.0) } else { v };
            });
        }
        epoch_loss.push(sum / batches as f64);
        lr *= params.decay;
    }
    Ok(TrainOutcome { weights: w, epoch_loss })
}

/// Predicted class of each row of `x`.
pub fn predict(w: &Array2<f64>, x: ArrayView2<f64>) -> Vec<usize> {
    x.dot(w).rows().into_iter().map(|r| argmax(r)).collect()
}

fn argmax(r: ArrayView1<f64>) -> usize {
    r.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Fraction of `data` classified correctly, processed in chunks.
pub fn accuracy(w: &Array2<f64>, data: &Dataset) -> f64 {
    let idx: Vec<usize> = (0..data.len()).collect();
    let correct: usize = idx
        .chunks(4096)
        .map(|chunk| {
            let pred = predict(w, data.brightness(chunk).view());
            chunk.iter().zip(pred).filter(|&(&i, p)| data.labels[i] as usize == p).count()
        })
        .sum();
    correct as f64 / data.len().max(1) as f64
}

/// Replaces negative entries with zero.
pub fn clamp_nonnegative(w: &Array2<f64>) -> Array2<f64> {
    w.mapv(|v| v.max(0.0))
}

/// `(W - min W) / (max W - min W)`.
pub fn normalize_weights(w: &Array2<f64>) -> Result<Array2<f64>> {
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    if !(span.is_finite() && span > 0.0) {
        return Err(Error::ConstantWeights);
    }
    Ok(w.mapv(|v| (v - min) / span))
}

const CSV_HEADER: &str = "digit_0,digit_1,digit_2,digit_3,digit_4,digit_5,digit_6,digit_7,digit_8,digit_9";
const BINARY_MAGIC: &[u8; 4] = b"QNNW";

/// CSV: the header above, then one line per pixel (row-major, 784 x 10).
pub fn weights_to_csv(w: &Array2<f64>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in w.rows() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn weights_from_csv(text: &str) -> Result<Array2<f64>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(Error::Dimension(format!("unexpected weight header {other:?}"))),
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (n, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Dimension(format!("weight line {}: {e}", n + 2)))?;
        if row.len() != CLASSES {
            return Err(Error::Dimension(format!("weight line {} has {} columns", n + 2, row.len())));
        }
        values.extend(row);
        rows += 1;
    }
    Array2::from_shape_vec((rows, CLASSES), values).map_err(|e| Error::Dimension(e.to_string()))
}

/// Binary: `QNNW`, rows and cols as little-endian u32, then f64 LE values.
pub fn weights_to_bytes(w: &Array2<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * w.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(w.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(w.ncols() as u32).to_le_bytes());
    for v in w.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn weights_from_bytes(bytes: &[u8]) -> Result<Array2<f64>> {
    if bytes.len() < 12 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Dimension("not a binary weight file".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = &bytes[12..];
    if body.len() != 8 * rows * cols {
        return Err(Error::Dimension(format!("{rows}x{cols} weights need {} bytes, got {}", 8 * rows * cols, body.len())));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Dimension(e.to_string()))
}

/// Writes CSV for a `.csv` extension and the binary format otherwise.
pub fn save_weights(w: &Array2<f64>, path: &FsPath) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let mut f = fs::File::create(path).map_err(io)?;
    if path.extension().is_some_and(|e| e == "csv") {
        f.write_all(weights_to_csv(w).as_bytes()).map_err(io)
    } else {
        f.write_all(&weights_to_bytes(w)).map_err(io)
    }
}

pub fn load_weights(path: &FsPath) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    if bytes.starts_with(BINARY_MAGIC) {
        weights_from_bytes(&bytes)
    } else {
        weights_from_csv(&String::from_utf8_lossy(&bytes))
    }
}

/// Scale and output-inhibition strength of the digit network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DigitParams {
    pub k: f64,
    pub output_inhibition: f64,
}

impl Default for DigitParams {
    fn default() -> Self {
        Self { k: 1000.0, output_inhibition: 1e-17 }
    }
}

/// Id of the input neuron for pixel `i`; outputs use ids `0..10`.
pub fn digit_input_id(pixel: usize) -> u32 {
    1000 + pixel as u32
}

/// 784 graded inputs carrying the image brightness, 10 simulated outputs,
/// `input i -> output j` at `k * eps_hat[i][j]`, and pairwise inhibition
/// among the outputs. Brightness enters through the graded paths, whose
/// coupling factor equals `b_i` times that of a full-brightness input.
pub fn build_digit_network(
    eps_hat: &Array2<f64>,
    image: &[f64],
    params: &DigitParams,
    cfg: LatticeConfig,
) -> Result<NetworkSpec> {
    if eps_hat.dim() != (PIXELS, CLASSES) {
        return Err(Error::Dimension(format!("weights are {:?}, expected ({PIXELS}, {CLASSES})", eps_hat.dim())));
    }
    if image.len() != PIXELS {
        return Err(Error::Dimension(format!("image has {} pixels, expected {PIXELS}", image.len())));
    }
    if let Some(v) = eps_hat.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Dimension(format!("normalized weight {v} outside [0, 1]")));
    }
    let schedule = KinkSchedule::default_for(&cfg);
    let mut net = NetworkSpec::new(cfg);
    for (i, &b) in image.iter().enumerate() {
        net = net.with_neuron(NeuronSpec::graded(digit_input_id(i), b, schedule.clone()));
    }
    for j in 0..CLASSES as u32 {
        net = net.with_neuron(NeuronSpec::simulated(j));
    }
    for (i, row) in eps_hat.rows().into_iter().enumerate() {
        for (j, &e) in row.iter().enumerate() {
            net = net.with_connection(CouplingKind::excitatory(
                NeuronId(digit_input_id(i)),
                NeuronId(j as u32),
                params.k * e,
            ));
        }
    }
    for a in 0..CLASSES as u32 {
        for b in a + 1..CLASSES as u32 {
            net = net.with_connection(CouplingKind::inhibitory(NeuronId(a), NeuronId(b), params.output_inhibition));
        }
    }
    net.ensure_valid()?;
    Ok(net)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recognition {
    pub activities: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Softmax of the activities.
    pub scores: Vec<f64>,
    pub predicted: usize,
}

/// Simulates the digit network for one image and turns the ten output
/// activities into softmax scores.
pub fn recognize(
    image: &[f64],
    eps_hat: &Array2<f64>,
    params: &DigitParams,
    cfg: LatticeConfig,
    sampler: &SamplerConfig,
    chains: usize,
) -> Result<Recognition> {
    let net = build_digit_network(eps_hat, image, params, cfg)?;
    let (report, _) = run_pooled(&net, sampler, chains)?;
    let activities: Vec<f64> = (0..CLASSES as u32).map(|j| report.activity(j)).collect();
    let std_errors = (0..CLASSES as u32)
        .map(|j| report.get(NeuronId(j)).map_or(f64::NAN, |n| n.std_error))
        .collect();
    let scores = softmax_row(&activities);
    let predicted = argmax(Array1::from(scores.clone()).view());
    Ok(Recognition { activities, std_errors, scores, predicted })
}

/// Classical score `sum_i eps_hat[i][j] b_i` per class; the effective drive
/// of output `j` is `k` times this.
pub fn effective_drive(eps_hat: &Array2<f64>, image: &[f64]) -> Vec<f64> {
    let b = ArrayView1::from(image);
    eps_hat.t().dot(&b).to_vec()
}
