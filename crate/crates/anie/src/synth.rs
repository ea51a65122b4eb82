//! Synthetic dynamic networks with known ground truth.
//!
//! Two generative models are provided. The ER-blocks model gives every node
//! pair the same piecewise-constant rate, built from a table of changepoints
//! and step heights with many distinct widths, so estimators face structure
//! at several time scales at once. The two-community DSBM holds a high
//! intra-community rate except on a merge interval where it drops to the
//! inter-community rate, producing sharp changes to localize.
//!
//! Sampling is exact for piecewise-constant rates (per-segment Poisson
//! counts plus uniform placement); Lewis-Shedler thinning covers arbitrary
//! bounded intensities. Per-pair randomness comes from independent streams
//! of a counter-based generator, so results do not depend on the order in
//! which pairs are sampled.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Directedness, Event, EventStream};
use crate::model::PairRate;

/// Non-negative piecewise-constant rate on `[0, 1]`.
///
/// `values` has one more entry than `breakpoints`; segment `i` covers
/// `[breakpoints[i-1], breakpoints[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstantIntensity {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstantIntensity {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::Parameter(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1])
            || breakpoints.iter().any(|&b| !(0.0 < b && b < 1.0))
        {
            return Err(Error::Parameter(
                "breakpoints must be strictly increasing inside (0, 1)".into(),
            ));
        }
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Parameter("rates must be finite and >= 0".into()));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![rate])
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b <= t);
        self.values[idx]
    }

    /// `(start, end, rate)` triples covering `[0, 1]`.
    pub fn segments(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.values.len());
        let mut start = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            let end = self.breakpoints.get(i).cloned().unwrap_or(1.0);
            out.push((start, end, v));
            start = end;
        }
        out
    }

    pub fn integral(&self) -> f64 {
        self.segments().iter().map(|(a, b, v)| (b - a) * v).sum()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Changepoints of the ER-blocks test intensity.
pub const ER_BLOCKS_CHANGEPOINTS: [f64; 11] = [
    0.10, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81,
];

/// Step heights added at the matching changepoints.
pub const ER_BLOCKS_STEP_HEIGHTS: [f64; 11] =
    [4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 5.1, -4.2];

/// Cumulative-step ER-blocks intensity, transformed by
/// `rate -> max(scale * rate + offset, 0)`.
///
/// The raw cumulative function dips below zero on three segments, which is
/// not a valid rate; the clamp makes the transform explicit instead of
/// hiding it inside the sampler.
pub fn er_blocks_intensity(scale: f64, offset: f64) -> Result<PiecewiseConstantIntensity> {
    if scale <= 0.0 {
        return Err(Error::Parameter("scale must be positive".into()));
    }
    if offset < 0.0 {
        return Err(Error::Parameter("offset must be >= 0".into()));
    }
    let mut values = Vec::with_capacity(ER_BLOCKS_STEP_HEIGHTS.len() + 1);
    let mut cumulative = 0.0;
    values.push((scale * cumulative + offset).max(0.0));
    for h in ER_BLOCKS_STEP_HEIGHTS {
        cumulative += h;
        values.push((scale * cumulative + offset).max(0.0));
    }
    PiecewiseConstantIntensity::new(ER_BLOCKS_CHANGEPOINTS.to_vec(), values)
}

/// Ground truth for a synthetic network: per-pair rate rule plus the induced
/// subspace matrix.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    n_nodes: usize,
    kind: GroundTruthKind,
}

#[derive(Debug, Clone)]
pub enum GroundTruthKind {
    /// Every pair shares one intensity.
    ErBlocks {
        intensity: PiecewiseConstantIntensity,
    },
    /// Two equal communities; `half = n_nodes / 2` nodes in the first.
    Dsbm {
        intra: PiecewiseConstantIntensity,
        inter: PiecewiseConstantIntensity,
    },
}

impl GroundTruth {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn kind(&self) -> &GroundTruthKind {
        &self.kind
    }

    /// Community label of a node (always 0 for ER).
    pub fn community(&self, u: usize) -> usize {
        match self.kind {
            GroundTruthKind::ErBlocks { .. } => 0,
            GroundTruthKind::Dsbm { .. } => usize::from(u >= self.n_nodes / 2),
        }
    }

    pub fn pair_intensity(&self, u: usize, v: usize) -> &PiecewiseConstantIntensity {
        match &self.kind {
            GroundTruthKind::ErBlocks { intensity } => intensity,
            GroundTruthKind::Dsbm { intra, inter } => {
                if self.community(u) == self.community(v) {
                    intra
                } else {
                    inter
                }
            }
        }
    }

    /// Model rank: 1 for ER, 2 for the DSBM.
    pub fn rank(&self) -> usize {
        match self.kind {
            GroundTruthKind::ErBlocks { .. } => 1,
            GroundTruthKind::Dsbm { .. } => 2,
        }
    }

    /// The induced orthonormal subspace matrix: a constant column for ER,
    /// normalized community indicators for the DSBM.
    pub fn u_true(&self) -> DMatrix<f64> {
        let n = self.n_nodes;
        match self.kind {
            GroundTruthKind::ErBlocks { .. } => {
                DMatrix::from_element(n, 1, 1.0 / (n as f64).sqrt())
            }
            GroundTruthKind::Dsbm { .. } => {
                let half = n / 2;
                let s = 1.0 / (half as f64).sqrt();
                DMatrix::from_fn(n, 2, |r, c| if (r < half) == (c == 0) { s } else { 0.0 })
            }
        }
    }

    /// Affinity density `S(t)` of the induced low-rank factorization, so
    /// that `Lambda(t) = U S(t) U^T` reproduces the pair rates.
    pub fn affinity_density(&self, t: f64) -> DMatrix<f64> {
        match &self.kind {
            GroundTruthKind::ErBlocks { intensity } => {
                DMatrix::from_element(1, 1, self.n_nodes as f64 * intensity.value_at(t))
            }
            GroundTruthKind::Dsbm { intra, inter } => {
                let half = self.n_nodes as f64 / 2.0;
                let a = half * intra.value_at(t);
                let b = half * inter.value_at(t);
                DMatrix::from_row_slice(2, 2, &[a, b, b, a])
            }
        }
    }
}

impl PairRate for GroundTruth {
    fn rate(&self, u: usize, v: usize, t: f64) -> f64 {
        self.pair_intensity(u, v).value_at(t)
    }
}

/// ER-blocks ground truth over `n_nodes`.
pub fn er_blocks_ground_truth(n_nodes: usize, scale: f64, offset: f64) -> Result<GroundTruth> {
    er_ground_truth(n_nodes, er_blocks_intensity(scale, offset)?)
}

/// One shared intensity for every pair (rank-1 ground truth).
pub fn er_ground_truth(
    n_nodes: usize,
    intensity: PiecewiseConstantIntensity,
) -> Result<GroundTruth> {
    if n_nodes == 0 {
        return Err(Error::Parameter("n_nodes must be positive".into()));
    }
    Ok(GroundTruth {
        n_nodes,
        kind: GroundTruthKind::ErBlocks { intensity },
    })
}

/// Two-community DSBM: intra pairs run at `lambda_intra` outside the merge
/// interval and drop to `lambda_inter` inside it; inter pairs stay at
/// `lambda_inter` throughout, so the two coincide on the merge interval.
///
/// The default rates (8 and 2) and merge interval `[0.5, 0.75]` are this
/// crate's configuration, not universal constants.
pub fn dsbm_ground_truth(
    n_nodes: usize,
    lambda_intra: f64,
    lambda_inter: f64,
    merge: (f64, f64),
) -> Result<GroundTruth> {
    if n_nodes == 0 || !n_nodes.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "n_nodes must be positive and even, got {n_nodes}"
        )));
    }
    if !(lambda_intra >= lambda_inter && lambda_inter >= 0.0) {
        return Err(Error::Parameter(
            "need lambda_intra >= lambda_inter >= 0".into(),
        ));
    }
    let (a, b) = merge;
    if !(0.0 < a && a < b && b < 1.0) {
        return Err(Error::Parameter(format!(
            "merge interval ({a}, {b}) must satisfy 0 < a < b < 1"
        )));
    }
    Ok(GroundTruth {
        n_nodes,
        kind: GroundTruthKind::Dsbm {
            intra: PiecewiseConstantIntensity::new(
                vec![a, b],
                vec![lambda_intra, lambda_inter, lambda_intra],
            )?,
            inter: PiecewiseConstantIntensity::constant(lambda_inter)?,
        },
    })
}

pub const DSBM_DEFAULT_INTRA: f64 = 8.0;
pub const DSBM_DEFAULT_INTER: f64 = 2.0;
pub const DSBM_DEFAULT_MERGE: (f64, f64) = (0.5, 0.75);

/// Samples a piecewise-constant process exactly: each segment draws a
/// Poisson count and scatters it uniformly. Sorted timestamps.
pub fn sample_piecewise(intensity: &PiecewiseConstantIntensity, rng: &mut impl Rng) -> Vec<f64> {
    let mut times = Vec::new();
    for (start, end, rate) in intensity.segments() {
        let mean = rate * (end - start);
        if mean <= 0.0 {
            continue;
        }
        let count = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
        for _ in 0..count {
            times.push(start + rng.random::<f64>() * (end - start));
        }
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times
}

/// Lewis-Shedler thinning for an arbitrary intensity bounded by `bound`:
/// homogeneous candidates at rate `bound`, accepted with probability
/// `intensity(t) / bound`. Errors out if the bound is ever violated.
pub fn sample_thinning(
    intensity: impl Fn(f64) -> f64,
    bound: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if bound < 0.0 || !bound.is_finite() {
        return Err(Error::Parameter("bound must be finite and >= 0".into()));
    }
    let mut times = Vec::new();
    if bound == 0.0 {
        return Ok(times);
    }
    let count = Poisson::new(bound).expect("positive bound").sample(rng) as usize;
    for _ in 0..count {
        let t = rng.random::<f64>();
        let value = intensity(t);
        if value > bound * (1.0 + 1e-12) {
            return Err(Error::BoundViolation {
                observed: value,
                bound,
            });
        }
        if rng.random::<f64>() * bound < value {
            times.push(t);
        }
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(times)
}

/// Independent per-pair stream of the master seed: same output no matter the
/// sampling order.
pub fn pair_rng(seed: u64, n_nodes: usize, u: usize, v: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream((u * n_nodes + v) as u64 + 1);
    rng
}

/// Samples every ordered off-diagonal pair of the ground truth independently
/// and merges the result into a normalized event stream.
pub fn generate_network(truth: &GroundTruth, seed: u64) -> Result<EventStream> {
    let n = truth.n_nodes();
    let mut events: Vec<Event> = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            let mut rng = pair_rng(seed, n, u, v);
            for t in sample_piecewise(truth.pair_intensity(u, v), &mut rng) {
                events.push(Event {
                    u: u as u32,
                    v: v as u32,
                    t,
                });
            }
        }
    }
    EventStream::new(n, 1.0, events, Directedness::Directed)
}

/// External generator configuration:
/// `{ "model": "er_blocks"|"dsbm", "n_nodes": int, "seed": int, "params": {...} }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorConfig {
    ErBlocks {
        n_nodes: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        params: ErBlocksParams,
    },
    Dsbm {
        n_nodes: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        params: DsbmParams,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErBlocksParams {
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
}

impl Default for ErBlocksParams {
    fn default() -> Self {
        Self {
            scale: 1.0,
            offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsbmParams {
    #[serde(default = "default_intra")]
    pub lambda_intra: f64,
    #[serde(default = "default_inter")]
    pub lambda_inter: f64,
    #[serde(default = "default_merge")]
    pub merge: (f64, f64),
}

impl Default for DsbmParams {
    fn default() -> Self {
        Self {
            lambda_intra: DSBM_DEFAULT_INTRA,
            lambda_inter: DSBM_DEFAULT_INTER,
            merge: DSBM_DEFAULT_MERGE,
        }
    }
}

fn default_scale() -> f64 {
    1.0
}

fn default_intra() -> f64 {
    DSBM_DEFAULT_INTRA
}

fn default_inter() -> f64 {
    DSBM_DEFAULT_INTER
}

fn default_merge() -> (f64, f64) {
    DSBM_DEFAULT_MERGE
}

impl GeneratorConfig {
    pub fn ground_truth(&self) -> Result<GroundTruth> {
        match self {
            GeneratorConfig::ErBlocks {
                n_nodes, params, ..
            } => er_blocks_ground_truth(*n_nodes, params.scale, params.offset),
            GeneratorConfig::Dsbm {
                n_nodes, params, ..
            } => dsbm_ground_truth(
                *n_nodes,
                params.lambda_intra,
                params.lambda_inter,
                params.merge,
            ),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            GeneratorConfig::ErBlocks { seed, .. } | GeneratorConfig::Dsbm { seed, .. } => *seed,
        }
    }

    pub fn with_seed(mut self, new_seed: u64) -> Self {
        match &mut self {
            GeneratorConfig::ErBlocks { seed, .. } | GeneratorConfig::Dsbm { seed, .. } => {
                *seed = new_seed
            }
        }
        self
    }
}
