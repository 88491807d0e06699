//! Discretized Euclidean time axis, periodic paths and the single-particle
//! part of the action.
//!
//! A neuron is a particle in the double well `V0(phi) = (lambda/4)(phi^2 - 1)^2`.
//! Its path lives on `n_slices` nodes of a periodic time axis of length
//! `total_time`; the free action is
//!
//! ```text
//! S0 = sum_j (phi_{j+1} - phi_j)^2 / (2 dtau) + dtau * sum_j V0(phi_j)
//! ```
//!
//! with forward differences and the potential evaluated on the nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest supported lattice.
pub const MIN_SLICES: usize = 8;

/// Minimum distance between neighbouring kink centers, in slices.
pub const MIN_KINK_SEPARATION_SLICES: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub n_slices: usize,
    pub total_time: f64,
    pub lambda: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            n_slices: 512,
            total_time: 0.7,
            lambda: 5000.0,
        }
    }
}

impl LatticeConfig {
    pub fn new(n_slices: usize, total_time: f64, lambda: f64) -> Result<Self> {
        let cfg = Self {
            n_slices,
            total_time,
            lambda,
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// Checks the invariants; useful after deserializing.
    pub fn check(&self) -> Result<()> {
        if self.n_slices < MIN_SLICES {
            return Err(Error::Lattice(format!(
                "n_slices = {} < {MIN_SLICES}",
                self.n_slices
            )));
        }
        if !(self.total_time.is_finite() && self.total_time > 0.0) {
            return Err(Error::Lattice(format!(
                "total_time = {} must be positive",
                self.total_time
            )));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Lattice(format!(
                "lambda = {} must be positive",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Slice width.
    #[inline]
    pub fn dtau(&self) -> f64 {
        self.total_time / self.n_slices as f64
    }

    /// Euclidean time of slice `j`.
    #[inline]
    pub fn time_of(&self, j: usize) -> f64 {
        j as f64 * self.dtau()
    }

    /// Inverse kink width `sqrt(lambda / 2)`.
    #[inline]
    pub fn kink_rate(&self) -> f64 {
        (self.lambda / 2.0).sqrt()
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn with_slices(self, n_slices: usize) -> Self {
        Self { n_slices, ..self }
    }
}

/// One particle's periodic trajectory; slice `n_slices` wraps to slice 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Path(Vec<f64>);

impl Path {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(j));
        }
        Ok(Self(values))
    }

    pub fn constant(value: f64, cfg: &LatticeConfig) -> Self {
        Self(vec![value; cfg.n_slices])
    }

    /// Saw path `phi_j = j mod 2`.
    pub fn saw(cfg: &LatticeConfig) -> Self {
        Self((0..cfg.n_slices).map(|j| (j % 2) as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn conforms(&self, cfg: &LatticeConfig) -> Result<()> {
        if self.0.len() != cfg.n_slices {
            return Err(Error::PathLength {
                expected: cfg.n_slices,
                got: self.0.len(),
            });
        }
        Ok(())
    }

    /// Path rotated so that slice `shift` becomes slice 0.
    pub fn rotated(&self, shift: usize) -> Self {
        let mut v = self.0.clone();
        let n = v.len();
        if n > 0 {
            v.rotate_left(shift % n);
        }
        Self(v)
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|v| -v).collect())
    }
}

/// Times of alternating kink / anti-kink centers. The path starts in the
/// `+1` vacuum before the first center.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KinkSchedule {
    centers: Vec<f64>,
}

impl KinkSchedule {
    pub fn new(centers: Vec<f64>, cfg: &LatticeConfig) -> Result<Self> {
        let schedule = Self { centers };
        schedule.check(cfg)?;
        Ok(schedule)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// `count` centers at `(2m + 1) T / (2 count)`, i.e. T/8, 3T/8, 5T/8, 7T/8
    /// for four kinks.
    pub fn evenly_spaced(count: usize, cfg: &LatticeConfig) -> Result<Self> {
        let t = cfg.total_time;
        let centers = (0..count)
            .map(|m| (2 * m + 1) as f64 * t / (2 * count) as f64)
            .collect();
        Self::new(centers, cfg)
    }

    /// Default input signal: four evenly spaced kinks, or as many as fit
    /// (two, then none) on lattices too coarse for the separation floor.
    pub fn default_for(cfg: &LatticeConfig) -> Self {
        [4, 2]
            .into_iter()
            .find_map(|k| Self::evenly_spaced(k, cfg).ok())
            .unwrap_or_default()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn check(&self, cfg: &LatticeConfig) -> Result<()> {
        let c = &self.centers;
        if !c.len().is_multiple_of(2) {
            return Err(Error::Schedule(format!(
                "{} centers; a periodic path needs an even count",
                c.len()
            )));
        }
        let t = cfg.total_time;
        if let Some(x) = c.iter().find(|x| !(x.is_finite() && **x >= 0.0 && **x < t)) {
            return Err(Error::Schedule(format!("center {x} outside [0, {t})")));
        }
        let min_gap = MIN_KINK_SEPARATION_SLICES * cfg.dtau();
        for w in c.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Schedule("centers must be strictly increasing".into()));
            }
            if w[1] - w[0] < min_gap {
                return Err(Error::Schedule(format!(
                    "centers {} and {} closer than {min_gap}",
                    w[0], w[1]
                )));
            }
        }
        if let (Some(first), Some(last)) = (c.first(), c.last()) {
            if c.len() > 1 && first + t - last < min_gap {
                return Err(Error::Schedule(format!(
                    "centers {last} and {first} closer than {min_gap} across the boundary"
                )));
            }
        }
        Ok(())
    }
}

/// `V0(phi) = (lambda/4)(phi^2 - 1)^2`.
#[inline]
pub fn self_potential(phi: f64, lambda: f64) -> f64 {
    let u = phi * phi - 1.0;
    0.25 * lambda * u * u
}

/// Forward-difference kinetic term with periodic wrap.
pub fn kinetic_action(path: &Path, cfg: &LatticeConfig) -> f64 {
    let v = path.values();
    let n = v.len();
    let sum: f64 = (0..n)
        .map(|j| {
            let d = v[(j + 1) % n] - v[j];
            d * d
        })
        .sum();
    sum / (2.0 * cfg.dtau())
}

/// `dtau * sum_j V0(phi_j)`.
pub fn potential_action(path: &Path, cfg: &LatticeConfig) -> f64 {
    cfg.dtau()
        * path
            .values()
            .iter()
            .map(|&p| self_potential(p, cfg.lambda))
            .sum::<f64>()
}

pub fn path_self_action(path: &Path, cfg: &LatticeConfig) -> f64 {
    kinetic_action(path, cfg) + potential_action(path, cfg)
}

/// Classical action of one vacuum-to-vacuum transition, `2 sqrt(2 lambda) / 3`.
pub fn kink_action_analytic(lambda: f64) -> f64 {
    2.0 * (2.0 * lambda).sqrt() / 3.0
}

/// Multi-kink profile, a product of `tanh(sqrt(lambda/2)(tau - tau0))`
/// factors sampled on the slice nodes.
///
/// Time is unrolled from the middle of the widest gap between neighbouring
/// centers so every factor is saturated at the seam and the result is
/// periodic.
pub fn analytic_kink_path(schedule: &KinkSchedule, cfg: &LatticeConfig) -> Result<Path> {
    schedule.check(cfg)?;
    let centers = schedule.centers();
    if centers.is_empty() {
        return Ok(Path::constant(1.0, cfg));
    }
    let t = cfg.total_time;
    let n = centers.len();

    // Widest cyclic gap: after center `i`, up to center `i + 1` (mod n).
    let (gap_start, gap_len) = (0..n)
        .map(|i| {
            let next = if i + 1 < n {
                centers[i + 1]
            } else {
                centers[0] + t
            };
            (i, next - centers[i])
        })
        .fold((0, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    let origin = centers[gap_start] + 0.5 * gap_len;
    let origin_sign = if centers.iter().filter(|&&c| c < origin.rem_euclid(t)).count() % 2 == 0 {
        1.0
    } else {
        -1.0
    };

    let rate = cfg.kink_rate();
    let shifted: Vec<f64> = centers.iter().map(|&c| (c - origin).rem_euclid(t)).collect();
    let values = (0..cfg.n_slices)
        .map(|j| {
            let u = (cfg.time_of(j) - origin).rem_euclid(t);
            origin_sign
                * shifted
                    .iter()
                    .map(|&c| (rate * (u - c)).tanh())
                    .product::<f64>()
        })
        .collect();
    Path::new(values)
}

/// Per-slice share of the self-action: the forward link leaving slice `j`
/// plus `dtau * V0(phi_j)`.
pub fn action_density(path: &Path, cfg: &LatticeConfig) -> Vec<f64> {
    let v = path.values();
    let n = v.len();
    let dtau = cfg.dtau();
    (0..n)
        .map(|j| {
            let d = v[(j + 1) % n] - v[j];
            d * d / (2.0 * dtau) + dtau * self_potential(v[j], cfg.lambda)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn defaults() -> LatticeConfig {
        LatticeConfig::default()
    }

    fn pair_schedule(cfg: &LatticeConfig) -> KinkSchedule {
        let t = cfg.total_time;
        KinkSchedule::new(vec![t / 3.0, 2.0 * t / 3.0], cfg).unwrap()
    }

    #[test]
    fn self_potential_values() {
        assert_eq!(self_potential(1.0, 5000.0), 0.0);
        assert_eq!(self_potential(-1.0, 5000.0), 0.0);
        assert_eq!(self_potential(0.0, 5000.0), 1250.0);
        assert_relative_eq!(self_potential(0.5, 5000.0), 703.125);
    }

    #[test]
    fn kink_action_values() {
        assert_relative_eq!(kink_action_analytic(5000.0), 200.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(kink_action_analytic(2.0), 4.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(kink_action_analytic(8.0), 8.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn lattice_rejects_bad_configs() {
        assert!(LatticeConfig::new(4, 0.7, 5000.0).is_err());
        assert!(LatticeConfig::new(512, 0.0, 5000.0).is_err());
        assert!(LatticeConfig::new(512, 0.7, -1.0).is_err());
        assert!(LatticeConfig::new(512, 0.7, 5000.0).is_ok());
    }

    #[test]
    fn constant_paths_have_no_kinetic_action() {
        let cfg = defaults();
        assert_eq!(kinetic_action(&Path::constant(1.0, &cfg), &cfg), 0.0);
        assert_eq!(kinetic_action(&Path::constant(-1.0, &cfg), &cfg), 0.0);
        assert_eq!(path_self_action(&Path::constant(1.0, &cfg), &cfg), 0.0);
    }

    #[test]
    fn saw_path_action_is_kinetic_dominated() {
        let cfg = defaults();
        let saw = Path::saw(&cfg);
        let kin = kinetic_action(&saw, &cfg);
        assert_relative_eq!(kin, cfg.n_slices as f64 / (2.0 * cfg.dtau()), max_relative = 1e-12);
        let total = path_self_action(&saw, &cfg);
        assert!(total > 0.0);
        // Half the nodes sit at phi = 0.
        assert_relative_eq!(total - kin, cfg.dtau() * 256.0 * 1250.0, max_relative = 1e-12);
    }

    #[test]
    fn empty_schedule_is_vacuum() {
        let cfg = defaults();
        let p = analytic_kink_path(&KinkSchedule::empty(), &cfg).unwrap();
        assert!(p.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn odd_schedules_are_rejected() {
        let cfg = defaults();
        assert!(KinkSchedule::new(vec![0.35], &cfg).is_err());
        assert!(KinkSchedule::new(vec![0.1, 0.2, 0.3], &cfg).is_err());
    }

    #[test]
    fn crowded_or_unsorted_schedules_are_rejected() {
        let cfg = defaults();
        let dtau = cfg.dtau();
        assert!(KinkSchedule::new(vec![0.3, 0.3 + 5.0 * dtau], &cfg).is_err());
        assert!(KinkSchedule::new(vec![0.4, 0.3], &cfg).is_err());
        assert!(KinkSchedule::new(vec![0.1, 0.8], &cfg).is_err());
        // Wrap-around gap too small.
        assert!(KinkSchedule::new(vec![2.0 * dtau, 0.7 - 2.0 * dtau], &cfg).is_err());
    }

    #[test]
    fn kink_pair_sign_structure() {
        let cfg = defaults();
        let p = analytic_kink_path(&pair_schedule(&cfg), &cfg).unwrap();
        let t = cfg.total_time;
        for (j, &v) in p.values().iter().enumerate() {
            assert!((-1.0..=1.0).contains(&v));
            let tau = cfg.time_of(j);
            if tau > t / 3.0 + 0.07 && tau < 2.0 * t / 3.0 - 0.07 {
                assert!(v < -0.99, "slice {j}: {v}");
            }
            if tau < t / 3.0 - 0.07 || tau > 2.0 * t / 3.0 + 0.07 {
                assert!(v > 0.99, "slice {j}: {v}");
            }
        }
    }

    #[test]
    fn kink_pair_action_close_to_twice_analytic() {
        let cfg = defaults();
        let p = analytic_kink_path(&pair_schedule(&cfg), &cfg).unwrap();
        let s = path_self_action(&p, &cfg);
        let expected = 2.0 * kink_action_analytic(cfg.lambda);
        assert!((s - expected).abs() / expected < 0.02, "{s} vs {expected}");
        // Kinetic and potential parts split evenly for the classical solution.
        let kin = kinetic_action(&p, &cfg);
        assert!((kin - expected / 2.0).abs() / (expected / 2.0) < 0.02, "{kin}");
    }

    #[test]
    fn boundary_straddling_kinks_stay_periodic() {
        let cfg = defaults();
        let t = cfg.total_time;
        let near = KinkSchedule::new(vec![0.01, t / 2.0], &cfg).unwrap();
        let p = analytic_kink_path(&near, &cfg).unwrap();
        let s = path_self_action(&p, &cfg);
        let expected = 2.0 * kink_action_analytic(cfg.lambda);
        assert!((s - expected).abs() / expected < 0.02, "{s}");
        // Rotating the reference pair by the same offset gives the same path shape.
        let far = KinkSchedule::new(vec![0.2, 0.2 + t / 2.0 - 0.01], &cfg).unwrap();
        let q = analytic_kink_path(&far, &cfg).unwrap();
        assert_relative_eq!(path_self_action(&q, &cfg), s, max_relative = 1e-6);
    }

    #[test]
    fn action_density_partitions_total() {
        let cfg = defaults();
        let p = analytic_kink_path(&pair_schedule(&cfg), &cfg).unwrap();
        let dens = action_density(&p, &cfg);
        assert_eq!(dens.len(), cfg.n_slices);
        assert!(dens.iter().all(|&d| d >= 0.0));
        assert_relative_eq!(dens.iter().sum::<f64>(), path_self_action(&p, &cfg), max_relative = 1e-12);
        let vac = action_density(&Path::constant(1.0, &cfg), &cfg);
        assert!(vac.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn action_density_peaks_at_kink_centers() {
        let cfg = defaults();
        let p = analytic_kink_path(&pair_schedule(&cfg), &cfg).unwrap();
        let dens = action_density(&p, &cfg);
        let half = cfg.n_slices / 2;
        let argmax = |r: std::ops::Range<usize>| {
            r.max_by(|&a, &b| dens[a].partial_cmp(&dens[b]).unwrap()).unwrap()
        };
        let first = argmax(0..half);
        let second = argmax(half..cfg.n_slices);
        let c1 = (cfg.total_time / 3.0 / cfg.dtau()) as isize;
        let c2 = (2.0 * cfg.total_time / 3.0 / cfg.dtau()) as isize;
        assert!((first as isize - c1).abs() <= 2, "{first} vs {c1}");
        assert!((second as isize - c2).abs() <= 2, "{second} vs {c2}");
    }

    #[test]
    fn symmetries_of_self_action() {
        let cfg = defaults();
        let p = analytic_kink_path(&KinkSchedule::default_for(&cfg), &cfg).unwrap();
        let s = path_self_action(&p, &cfg);
        for shift in [1, 17, 255, 511] {
            assert_relative_eq!(path_self_action(&p.rotated(shift), &cfg), s, max_relative = 1e-12);
        }
        assert_relative_eq!(path_self_action(&p.negated(), &cfg), s, max_relative = 1e-15);
    }
}
