//! Fixed-resolution intensity baselines: histogram and kernel estimators
//! followed by low-rank projection.
//!
//! Both build a naive per-pair estimate first and then denoise it through
//! the projector congruence `U U^T Lambda~(t) U U^T`. The histogram variant
//! with `M = 2^J` bins and a shared subspace reproduces the unthresholded
//! Haar reconstruction, which makes it the natural reference point for the
//! adaptive estimator.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventStream;
use crate::model::PairRate;
use crate::sparse::SparseMatrix;
use crate::subspace::{SubspaceEstimate, TsvdOptions, truncated_svd_with};

/// Naive per-pair intensity estimator, before projection.
pub trait NaiveEstimator: PairRate {
    /// The compressed middle factor `U^T Lambda~(t) U`, computed from the
    /// estimator's sparse structure without forming the N x N matrix.
    fn projected_middle(&self, u_hat: &DMatrix<f64>, t: f64) -> DMatrix<f64>;
}

/// Histogram estimator: `Lambda~_uv(t) = M * count_uv(bin of t)` on `M`
/// uniform bins, the right endpoint going to the last bin.
#[derive(Debug, Clone)]
pub struct HistEstimator {
    bins: usize,
    /// Sorted by pair; inner vector has one count per bin.
    counts: Vec<(u32, u32, Vec<u32>)>,
}

fn pair_times(stream: &EventStream) -> Vec<(u32, u32, Vec<f64>)> {
    let mut tagged: Vec<(u32, u32, f64)> = stream
        .events()
        .iter()
        .filter(|e| e.u != e.v)
        .map(|e| (e.u, e.v, e.t))
        .collect();
    tagged.sort_by_key(|a| (a.0, a.1));
    let mut groups: Vec<(u32, u32, Vec<f64>)> = Vec::new();
    for (u, v, t) in tagged {
        match groups.last_mut() {
            Some((gu, gv, ts)) if *gu == u && *gv == v => ts.push(t),
            _ => groups.push((u, v, vec![t])),
        }
    }
    groups
}

fn require_normalized(stream: &EventStream) -> Result<()> {
    if !stream.is_normalized() {
        return Err(Error::Domain {
            arg: "stream".into(),
            message: "baselines expect a rescaled stream on [0, 1]".into(),
        });
    }
    Ok(())
}

/// Builds the histogram estimator on `bins` uniform cells.
pub fn ipp_hist(stream: &EventStream, bins: usize) -> Result<HistEstimator> {
    require_normalized(stream)?;
    if bins == 0 {
        return Err(Error::Parameter("bins must be >= 1".into()));
    }
    let counts = pair_times(stream)
        .into_iter()
        .map(|(u, v, ts)| {
            let mut c = vec![0u32; bins];
            for t in ts {
                c[bin_of(bins, t)] += 1;
            }
            (u, v, c)
        })
        .collect();
    Ok(HistEstimator { bins, counts })
}

fn bin_of(bins: usize, t: f64) -> usize {
    ((t * bins as f64) as usize).min(bins - 1)
}

impl HistEstimator {
    pub fn bins(&self) -> usize {
        self.bins
    }
}

impl PairRate for HistEstimator {
    fn rate(&self, u: usize, v: usize, t: f64) -> f64 {
        match self
            .counts
            .binary_search_by_key(&(u as u32, v as u32), |e| (e.0, e.1))
        {
            Ok(i) => self.bins as f64 * self.counts[i].2[bin_of(self.bins, t)] as f64,
            Err(_) => 0.0,
        }
    }
}

impl NaiveEstimator for HistEstimator {
    fn projected_middle(&self, u_hat: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
        let d = u_hat.ncols();
        let bin = bin_of(self.bins, t);
        let mut mid = DMatrix::<f64>::zeros(d, d);
        for (u, v, counts) in &self.counts {
            let c = counts[bin];
            if c == 0 {
                continue;
            }
            let w = self.bins as f64 * c as f64;
            for p in 0..d {
                let up = u_hat[(*u as usize, p)] * w;
                for q in 0..d {
                    mid[(p, q)] += up * u_hat[(*v as usize, q)];
                }
            }
        }
        mid
    }
}

/// Gaussian kernel estimator with boundary reflection at 0 and 1, so mass
/// stays on the unit interval.
#[derive(Debug, Clone)]
pub struct KdeEstimator {
    bandwidth: f64,
    pairs: Vec<(u32, u32, Vec<f64>)>,
}

/// Builds the kernel estimator with bandwidth `h`.
pub fn ipp_kde(stream: &EventStream, bandwidth: f64) -> Result<KdeEstimator> {
    require_normalized(stream)?;
    if !bandwidth.is_finite() || bandwidth <= 0.0 {
        return Err(Error::Parameter("bandwidth must be positive".into()));
    }
    Ok(KdeEstimator {
        bandwidth,
        pairs: pair_times(stream),
    })
}

impl KdeEstimator {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Kernel with reflected images at both endpoints.
    fn kernel(&self, t: f64, tau: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / (h * (2.0 * PI).sqrt());
        let g = |x: f64| (-x * x / (2.0 * h * h)).exp();
        norm * (g(t - tau) + g(t + tau) + g(t + tau - 2.0))
    }
}

impl PairRate for KdeEstimator {
    fn rate(&self, u: usize, v: usize, t: f64) -> f64 {
        match self
            .pairs
            .binary_search_by_key(&(u as u32, v as u32), |e| (e.0, e.1))
        {
            Ok(i) => self.pairs[i].2.iter().map(|&tau| self.kernel(t, tau)).sum(),
            Err(_) => 0.0,
        }
    }
}

impl NaiveEstimator for KdeEstimator {
    fn projected_middle(&self, u_hat: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
        let d = u_hat.ncols();
        let mut mid = DMatrix::<f64>::zeros(d, d);
        for (u, v, times) in &self.pairs {
            let w: f64 = times.iter().map(|&tau| self.kernel(t, tau)).sum();
            if w == 0.0 {
                continue;
            }
            for p in 0..d {
                let up = u_hat[(*u as usize, p)] * w;
                for q in 0..d {
                    mid[(p, q)] += up * u_hat[(*v as usize, q)];
                }
            }
        }
        mid
    }
}

/// The full projected intensity matrix `U (U^T Lambda~(t) U) U^T` at `t`.
pub fn project_low_rank(
    naive: &dyn NaiveEstimator,
    sub: &SubspaceEstimate,
    t: f64,
) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain {
            arg: "t".into(),
            message: format!("{t} outside [0, 1]"),
        });
    }
    let u = sub.u_hat();
    let mid = naive.projected_middle(u, t);
    Ok(u * mid * u.transpose())
}

/// Which naive estimator a baseline model wraps.
#[derive(Debug, Clone)]
pub enum BaselineNaive {
    Hist(HistEstimator),
    Kde(KdeEstimator),
}

impl BaselineNaive {
    fn as_naive(&self) -> &dyn NaiveEstimator {
        match self {
            BaselineNaive::Hist(h) => h,
            BaselineNaive::Kde(k) => k,
        }
    }
}

/// Low-rank projected baseline: naive estimate plus the subspace used for
/// denoising.
#[derive(Debug, Clone)]
pub struct BaselineModel {
    naive: BaselineNaive,
    sub: SubspaceEstimate,
}

impl BaselineModel {
    pub fn new(naive: BaselineNaive, sub: SubspaceEstimate) -> Self {
        Self { naive, sub }
    }

    pub fn subspace(&self) -> &SubspaceEstimate {
        &self.sub
    }

    pub fn naive(&self) -> &BaselineNaive {
        &self.naive
    }

    fn pair_value(&self, mid: &DMatrix<f64>, u: usize, v: usize) -> f64 {
        let uh = self.sub.u_hat();
        let d = mid.nrows();
        let mut acc = 0.0;
        for p in 0..d {
            let up = uh[(u, p)];
            if up == 0.0 {
                continue;
            }
            for q in 0..d {
                acc += up * mid[(p, q)] * uh[(v, q)];
            }
        }
        acc
    }
}

impl PairRate for BaselineModel {
    fn rate(&self, u: usize, v: usize, t: f64) -> f64 {
        let mid = self.naive.as_naive().projected_middle(self.sub.u_hat(), t);
        self.pair_value(&mid, u, v)
    }

    fn rate_grid(&self, pairs: &[(u32, u32)], grid: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; grid.len()]; pairs.len()];
        for (ti, &t) in grid.iter().enumerate() {
            let mid = self.naive.as_naive().projected_middle(self.sub.u_hat(), t);
            for (pi, &(u, v)) in pairs.iter().enumerate() {
                out[pi][ti] = self.pair_value(&mid, u as usize, v as usize);
            }
        }
        out
    }
}

/// Estimates the subspace from the histogram count matrices themselves
/// (`X = [C_1^T | ... | C_M^T]`), for callers that do not want to share the
/// adaptive estimator's subspace.
pub fn hist_subspace(
    stream: &EventStream,
    bins: usize,
    rank: usize,
    seed: u64,
) -> Result<SubspaceEstimate> {
    let hist = ipp_hist(stream, bins)?;
    let n = stream.n_nodes();
    let mut triples: Vec<(u32, u32, f64)> = Vec::new();
    for (u, v, counts) in &hist.counts {
        for (b, &c) in counts.iter().enumerate() {
            if c > 0 {
                triples.push((*v, (b * n) as u32 + *u, c as f64));
            }
        }
    }
    triples.sort_unstable_by_key(|a| (a.0, a.1));
    let x = SparseMatrix::from_sorted_triples(n, n * bins, triples);
    truncated_svd_with(&x, rank, seed, TsvdOptions::default())
}

/// External baseline configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineConfig {
    Hist { bins: usize },
    Kde { bandwidth: f64 },
}

impl BaselineConfig {
    pub fn build(&self, stream: &EventStream, sub: SubspaceEstimate) -> Result<BaselineModel> {
        let naive = match *self {
            BaselineConfig::Hist { bins } => BaselineNaive::Hist(ipp_hist(stream, bins)?),
            BaselineConfig::Kde { bandwidth } => BaselineNaive::Kde(ipp_kde(stream, bandwidth)?),
        };
        Ok(BaselineModel::new(naive, sub))
    }
}
