//! Kohonen self-organizing map trained in sequential "winner takes most" mode.
//!
//! Every presented vector pulls its best matching unit and, through a
//! Gaussian neighbourhood on the grid, the surrounding nodes toward itself:
//!
//! ```text
//! w(k) += eta(n) * h0 * exp(-d(k, bmu)^2 / sigma(n)^2) * (x - w(k))
//! ```
//!
//! Training runs an ordering phase, where the learning rate and spread decay
//! exponentially in the normalized phase progress, followed by a convergence
//! phase with both held constant.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::{Error, Result};

pub const DEFAULT_ROWS: usize = 8;
pub const DEFAULT_COLS: usize = 8;
pub const DEFAULT_ETA_ORDER: f64 = 0.12;
pub const DEFAULT_ETA_CONV: f64 = 0.001;
pub const DEFAULT_SIGMA0: f64 = 4.0;
pub const DEFAULT_TAU_SIGMA: f64 = 0.21;
pub const DEFAULT_TAU_ETA: f64 = 0.3;
pub const DEFAULT_H0: f64 = 1.0;
pub const DEFAULT_SIGMA_MIN: f64 = 0.5;
pub const DEFAULT_ITERATIONS: usize = 6272;
pub const DEFAULT_ORDER_FRAC: f64 = 0.25;
pub const DEFAULT_SAMPLE_EVERY: usize = 64;

/// Door / non-door decision attached to lattice nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Class {
    NonDoor = 0,
    Door = 1,
}

impl Class {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Class::NonDoor),
            1 => Some(Class::Door),
            _ => None,
        }
    }
}

/// Grid coordinate of a lattice node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Node {
    pub row: usize,
    pub col: usize,
}

impl Node {
    pub fn grid_distance_sq(self, other: Node) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        dr * dr + dc * dc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SomLattice {
    rows: usize,
    cols: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl SomLattice {
    /// Weights drawn i.i.d. uniform on `[0, 1)` from a SplitMix64 stream.
    pub fn init(rows: usize, cols: usize, dim: usize, seed: u64) -> Result<Self> {
        check_shape(rows, cols, dim)?;
        let mut rng = SplitMix64::seed_from_u64(seed);
        let weights = (0..rows * cols * dim)
            .map(|_| rng.random::<f64>())
            .collect();
        Ok(Self {
            rows,
            cols,
            dim,
            weights,
        })
    }

    /// Lattice from row-major node weights.
    pub fn from_weights(rows: usize, cols: usize, dim: usize, weights: Vec<f64>) -> Result<Self> {
        check_shape(rows, cols, dim)?;
        if weights.len() != rows * cols * dim {
            return Err(Error::invalid(alloc::format!(
                "lattice {rows}x{cols}x{dim} needs {} weights, got {}",
                rows * cols * dim,
                weights.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            dim,
            weights,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, index: usize) -> Node {
        Node {
            row: index / self.cols,
            col: index % self.cols,
        }
    }

    pub fn index(&self, node: Node) -> usize {
        node.row * self.cols + node.col
    }

    pub fn weight(&self, node: Node) -> &[f64] {
        let i = self.index(node) * self.dim;
        &self.weights[i..i + self.dim]
    }

    pub fn weight_mut(&mut self, node: Node) -> &mut [f64] {
        let i = self.index(node) * self.dim;
        &mut self.weights[i..i + self.dim]
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Node whose weight vector has the smallest Euclidean distance to `x`,
    /// with ties going to the first node in row-major order.
    pub fn best_matching_unit(&self, x: &[f64]) -> Result<Node> {
        self.check_dim(x)?;
        Ok(self.node(self.bmu_index(x).0))
    }

    fn bmu_index(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (k, w) in self.weights.chunks_exact(self.dim).enumerate() {
            let d = euclidean(x, w);
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    }

    /// Mean distance from each datum to its best matching unit.
    pub fn quantization_error(&self, data: &[Vec<f64>]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyData("quantization error needs data"));
        }
        let mut total = 0.0;
        for x in data {
            self.check_dim(x)?;
            total += self.bmu_index(x).1;
        }
        Ok(total / data.len() as f64)
    }

    /// One neighbourhood update toward `x` with explicit rate and spread.
    /// Returns the best matching unit.
    pub fn update(&mut self, x: &[f64], eta: f64, sigma: f64, h0: f64) -> Result<Node> {
        self.check_dim(x)?;
        let bmu = self.node(self.bmu_index(x).0);
        let dim = self.dim;
        for k in 0..self.node_count() {
            let d2 = self.node(k).grid_distance_sq(bmu);
            let h = neighborhood(d2, sigma, h0);
            let step = eta * h;
            if step == 0.0 {
                continue;
            }
            let w = &mut self.weights[k * dim..(k + 1) * dim];
            for (wj, xj) in w.iter_mut().zip(x) {
                *wj += step * (xj - *wj);
            }
        }
        Ok(bmu)
    }
}

fn check_shape(rows: usize, cols: usize, dim: usize) -> Result<()> {
    if rows == 0 || cols == 0 || dim == 0 {
        return Err(Error::invalid(alloc::format!(
            "lattice dimensions must be positive, got {rows}x{cols}x{dim}"
        )));
    }
    Ok(())
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, w)| (x - w) * (x - w)).sum())
}

/// Gaussian neighbourhood `h0 * exp(-d^2 / sigma^2)` from a squared grid distance.
pub fn neighborhood(d2: f64, sigma: f64, h0: f64) -> f64 {
    if d2 == 0.0 {
        return h0;
    }
    h0 * libm::exp(-d2 / (sigma * sigma))
}

/// Learning-rate and spread schedule for the two training phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSchedule {
    /// Initial learning rate of the ordering phase.
    pub eta_order: f64,
    /// Constant learning rate of the convergence phase.
    pub eta_conv: f64,
    /// Initial neighbourhood spread.
    pub sigma0: f64,
    /// Spread time constant, in units of ordering-phase progress.
    pub tau_sigma: f64,
    /// Learning-rate time constant, in units of ordering-phase progress.
    pub tau_eta: f64,
    /// Neighbourhood amplitude.
    pub h0: f64,
    /// Upper bound on the convergence-phase spread.
    pub sigma_min: f64,
    pub iterations: usize,
    /// Fraction of the iterations spent ordering.
    pub order_frac: f64,
    /// Error-curve sampling period, in iterations.
    pub sample_every: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            eta_order: DEFAULT_ETA_ORDER,
            eta_conv: DEFAULT_ETA_CONV,
            sigma0: DEFAULT_SIGMA0,
            tau_sigma: DEFAULT_TAU_SIGMA,
            tau_eta: DEFAULT_TAU_ETA,
            h0: DEFAULT_H0,
            sigma_min: DEFAULT_SIGMA_MIN,
            iterations: DEFAULT_ITERATIONS,
            order_frac: DEFAULT_ORDER_FRAC,
            sample_every: DEFAULT_SAMPLE_EVERY,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eta_conv > 0.0
            && self.eta_conv < self.eta_order
            && self.eta_order < 1.0
            && self.sigma0 > 0.0
            && self.tau_sigma > 0.0
            && self.tau_eta > 0.0
            && self.h0 > 0.0
            && self.eta_order * self.h0 <= 1.0
            && self.sigma_min > 0.0
            && self.order_frac > 0.0
            && self.order_frac < 1.0
            && self.iterations >= 2
            && self.sample_every >= 1;
        if !ok {
            return Err(Error::invalid(
                "schedule needs 0 < eta_conv < eta_order < 1, eta_order*h0 <= 1, \
                 positive spreads and time constants, 0 < order_frac < 1, iterations >= 2",
            ));
        }
        Ok(())
    }

    /// Number of ordering-phase iterations.
    pub fn ordering_len(&self) -> usize {
        let len = libm::round(self.order_frac * self.iterations as f64) as usize;
        len.clamp(1, self.iterations - 1)
    }

    /// Spread used throughout the convergence phase. Capped by the spread
    /// reached at the end of ordering so the schedule never widens.
    pub fn sigma_conv(&self) -> f64 {
        self.sigma_min
            .min(self.sigma0 * libm::exp(-1.0 / self.tau_sigma))
    }

    /// `(eta, sigma)` for iteration `n`.
    pub fn at(&self, n: usize) -> Result<(f64, f64)> {
        if n >= self.iterations {
            return Err(Error::invalid(alloc::format!(
                "iteration {n} outside schedule of {}",
                self.iterations
            )));
        }
        let order = self.ordering_len();
        if n < order {
            let p = n as f64 / order as f64;
            Ok((
                self.eta_order * libm::exp(-p / self.tau_eta),
                self.sigma0 * libm::exp(-p / self.tau_sigma),
            ))
        } else {
            Ok((self.eta_conv, self.sigma_conv()))
        }
    }
}

/// Applies the scheduled update for iteration `n`.
pub fn train_step(
    lattice: &mut SomLattice,
    x: &[f64],
    schedule: &TrainSchedule,
    n: usize,
) -> Result<Node> {
    let (eta, sigma) = schedule.at(n)?;
    lattice.update(x, eta, sigma, schedule.h0)
}

/// Error curves sampled during training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// `(iteration, quantization error)`; iteration 0 is the untrained lattice.
    pub quantization: Vec<(usize, f64)>,
    /// `(iteration, misclassification rate)` when a labeled set was supplied.
    pub misclassification: Vec<(usize, f64)>,
}

impl TrainReport {
    pub fn initial_error(&self) -> Option<f64> {
        self.quantization.first().map(|p| p.1)
    }

    pub fn final_error(&self) -> Option<f64> {
        self.quantization.last().map(|p| p.1)
    }
}

/// Sequential training: each iteration draws one vector uniformly at random
/// from `data` and applies [`train_step`].
pub fn train(
    lattice: &mut SomLattice,
    data: &[Vec<f64>],
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<TrainReport> {
    train_monitored(lattice, data, schedule, seed, None)
}

/// [`train`] that also tracks the misclassification rate of `labeled` after
/// calibrating labels at every sample point.
pub fn train_monitored(
    lattice: &mut SomLattice,
    data: &[Vec<f64>],
    schedule: &TrainSchedule,
    seed: u64,
    labeled: Option<&[(Vec<f64>, Class)]>,
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::EmptyData("training needs at least one vector"));
    }
    schedule.validate()?;
    for x in data {
        lattice.check_dim(x)?;
    }
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut report = TrainReport::default();
    let sample = |lattice: &SomLattice, n: usize, report: &mut TrainReport| -> Result<()> {
        report
            .quantization
            .push((n, lattice.quantization_error(data)?));
        if let Some(set) = labeled {
            let labels = calibrate_labels(lattice, set)?;
            let wrong = set
                .iter()
                .filter(|(x, c)| labels.get(lattice.node(lattice.bmu_index(x).0)) != *c)
                .count();
            report
                .misclassification
                .push((n, wrong as f64 / set.len() as f64));
        }
        Ok(())
    };
    sample(lattice, 0, &mut report)?;
    for n in 0..schedule.iterations {
        let x = &data[rng.random_range(0..data.len())];
        train_step(lattice, x, schedule, n)?;
        let done = n + 1;
        if done % schedule.sample_every == 0 || done == schedule.iterations {
            sample(lattice, done, &mut report)?;
        }
    }
    Ok(report)
}

/// Class assigned to every lattice node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeuronLabelMap {
    rows: usize,
    cols: usize,
    labels: Vec<Class>,
}

impl NeuronLabelMap {
    pub fn from_labels(rows: usize, cols: usize, labels: Vec<Class>) -> Result<Self> {
        if labels.len() != rows * cols {
            return Err(Error::invalid("label map size does not match lattice"));
        }
        Ok(Self { rows, cols, labels })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, node: Node) -> Class {
        self.labels[node.row * self.cols + node.col]
    }

    pub fn set(&mut self, node: Node, class: Class) {
        self.labels[node.row * self.cols + node.col] = class;
    }

    pub fn labels(&self) -> &[Class] {
        &self.labels
    }
}

/// Majority vote of the labeled vectors each node wins, ties going to door.
/// Nodes that win nothing copy the nearest voted node on the grid, ties
/// broken in row-major order.
pub fn calibrate_labels(
    lattice: &SomLattice,
    labeled: &[(Vec<f64>, Class)],
) -> Result<NeuronLabelMap> {
    if labeled.is_empty() {
        return Err(Error::EmptyData("calibration needs labeled vectors"));
    }
    let has = |c: Class| labeled.iter().any(|(_, k)| *k == c);
    if !has(Class::Door) || !has(Class::NonDoor) {
        return Err(Error::SingleClass);
    }
    let n = lattice.node_count();
    let mut votes = vec![(0usize, 0usize); n];
    for (x, class) in labeled {
        lattice.check_dim(x)?;
        let k = lattice.bmu_index(x).0;
        match class {
            Class::Door => votes[k].0 += 1,
            Class::NonDoor => votes[k].1 += 1,
        }
    }
    let voted: Vec<Option<Class>> = votes
        .iter()
        .map(|&(door, non)| match (door, non) {
            (0, 0) => None,
            (d, o) if d >= o => Some(Class::Door),
            _ => Some(Class::NonDoor),
        })
        .collect();
    let labels = (0..n)
        .map(|k| {
            voted[k].unwrap_or_else(|| {
                let here = lattice.node(k);
                let mut best = (f64::INFINITY, Class::Door);
                for (j, v) in voted.iter().enumerate() {
                    if let Some(c) = v {
                        let d = here.grid_distance_sq(lattice.node(j));
                        if d < best.0 {
                            best = (d, *c);
                        }
                    }
                }
                best.1
            })
        })
        .collect();
    NeuronLabelMap::from_labels(lattice.rows, lattice.cols, labels)
}

/// Label of the best matching unit.
pub fn classify(lattice: &SomLattice, labels: &NeuronLabelMap, x: &[f64]) -> Result<Class> {
    Ok(labels.get(lattice.best_matching_unit(x)?))
}
