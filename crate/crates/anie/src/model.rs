//! Intensity reconstruction and evaluation metrics.
//!
//! A fitted model reconstructs the intensity estimate
//! `Lambda_hat(t) = U_hat (sum_b S_thresh(phi^b) phi^b(t)) U_hat^T`,
//! evaluated lazily per pair and time point. The estimator carries no
//! positivity constraint, so reconstructed values may be negative; a clamp
//! flag is available for consumers that need rates.

use nalgebra::DMatrix;

use crate::affinity::AffinityResult;
use crate::basis::{BasisSet, dyadic_cell};
use crate::error::{Error, Result};
use crate::subspace::{SubspaceEstimate, procrustes_rotation};

/// Anything that exposes a per-pair intensity over the unit interval.
pub trait PairRate {
    fn rate(&self, u: usize, v: usize, t: f64) -> f64;

    /// Evaluates a pair list on a time grid; implementations override this
    /// to share per-`t` work across pairs. Row i holds pair i over the grid.
    fn rate_grid(&self, pairs: &[(u32, u32)], grid: &[f64]) -> Vec<Vec<f64>> {
        pairs
            .iter()
            .map(|&(u, v)| {
                grid.iter()
                    .map(|&t| self.rate(u as usize, v as usize, t))
                    .collect()
            })
            .collect()
    }
}

/// Fitted intensity model: subspace, thresholded affinity, basis.
#[derive(Debug, Clone)]
pub struct IntensityModel {
    subspace: SubspaceEstimate,
    affinity: AffinityResult,
    basis: BasisSet,
    clamp_negative: bool,
}

impl IntensityModel {
    pub fn new(
        subspace: SubspaceEstimate,
        affinity: AffinityResult,
        basis: BasisSet,
    ) -> Result<Self> {
        if affinity.n_functions() != basis.len() {
            return Err(Error::Shape(format!(
                "affinity covers {} functions, basis has {}",
                affinity.n_functions(),
                basis.len()
            )));
        }
        if affinity.rank() != subspace.rank() {
            return Err(Error::Shape(format!(
                "affinity rank {} does not match subspace rank {}",
                affinity.rank(),
                subspace.rank()
            )));
        }
        Ok(Self {
            subspace,
            affinity,
            basis,
            clamp_negative: false,
        })
    }

    /// Report negative reconstructed intensities as zero.
    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp_negative = clamp;
        self
    }

    pub fn subspace(&self) -> &SubspaceEstimate {
        &self.subspace
    }

    pub fn affinity(&self) -> &AffinityResult {
        &self.affinity
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn n_nodes(&self) -> usize {
        self.subspace.n_nodes()
    }

    /// Affinity density `S(t) = sum_b S_thresh(phi^b) phi^b(t)`.
    pub fn affinity_density(&self, t: f64) -> Result<DMatrix<f64>> {
        self.check_t(t)?;
        Ok(self.affinity_density_raw(t))
    }

    fn check_t(&self, t: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain {
                arg: "t".into(),
                message: format!("{t} outside [0, 1]"),
            });
        }
        Ok(())
    }

    fn affinity_density_raw(&self, t: f64) -> DMatrix<f64> {
        let d = self.affinity.rank();
        let mut acc = DMatrix::<f64>::zeros(d, d);
        if let Some(levels) = self.basis.haar_levels() {
            // Only the scaling function and one detail per level touch t.
            acc += &self.affinity.s_thresh[0];
            for j in 0..levels {
                let k = dyadic_cell(j, t);
                let id = self.basis.haar_detail_id(j, k);
                let val = self.basis.eval_raw(id, t);
                if val != 0.0 {
                    acc += &self.affinity.s_thresh[id] * val;
                }
            }
        } else {
            for b in 0..self.basis.len() {
                let val = self.basis.eval_raw(b, t);
                if val != 0.0 {
                    acc += &self.affinity.s_thresh[b] * val;
                }
            }
        }
        acc
    }

    /// Reconstructed intensity for one pair:
    /// `row_u(U_hat) S(t) row_v(U_hat)^T`.
    pub fn intensity_at(&self, u: usize, v: usize, t: f64) -> Result<f64> {
        let n = self.n_nodes();
        if u >= n || v >= n {
            return Err(Error::Domain {
                arg: "pair".into(),
                message: format!("({u}, {v}) outside [0, {n})"),
            });
        }
        self.check_t(t)?;
        let density = self.affinity_density_raw(t);
        Ok(self.pair_value(&density, u, v))
    }

    fn pair_value(&self, density: &DMatrix<f64>, u: usize, v: usize) -> f64 {
        let uh = self.subspace.u_hat();
        let d = density.nrows();
        let mut acc = 0.0;
        for p in 0..d {
            let up = uh[(u, p)];
            if up == 0.0 {
                continue;
            }
            for q in 0..d {
                acc += up * density[(p, q)] * uh[(v, q)];
            }
        }
        if self.clamp_negative {
            acc.max(0.0)
        } else {
            acc
        }
    }

    /// Evaluates many pairs on a sorted time grid, sharing the density
    /// computation across pairs at each grid point.
    pub fn evaluate_grid(&self, pairs: &[(u32, u32)], grid: &[f64]) -> Result<Vec<Vec<f64>>> {
        for &t in grid {
            self.check_t(t)?;
        }
        let n = self.n_nodes();
        for &(u, v) in pairs {
            if u as usize >= n || v as usize >= n {
                return Err(Error::Domain {
                    arg: "pair".into(),
                    message: format!("({u}, {v}) outside [0, {n})"),
                });
            }
        }
        let mut out = vec![vec![0.0; grid.len()]; pairs.len()];
        for (ti, &t) in grid.iter().enumerate() {
            let density = self.affinity_density_raw(t);
            for (pi, &(u, v)) in pairs.iter().enumerate() {
                out[pi][ti] = self.pair_value(&density, u as usize, v as usize);
            }
        }
        Ok(out)
    }
}

impl PairRate for IntensityModel {
    fn rate(&self, u: usize, v: usize, t: f64) -> f64 {
        let density = self.affinity_density_raw(t);
        self.pair_value(&density, u, v)
    }

    fn rate_grid(&self, pairs: &[(u32, u32)], grid: &[f64]) -> Vec<Vec<f64>> {
        self.evaluate_grid(pairs, grid).expect("validated grid")
    }
}

/// Mean integrated squared error between two intensity evaluators over a
/// pair patch, by midpoint quadrature with `quad_points` uniform cells.
/// Piecewise-constant integrands integrate exactly when their breakpoints
/// are dyadic and `quad_points` is a power of two.
pub fn mise(
    truth: &dyn PairRate,
    estimate: &dyn PairRate,
    pairs: &[(u32, u32)],
    quad_points: usize,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Parameter("empty pair patch".into()));
    }
    if quad_points == 0 {
        return Err(Error::Parameter("quad_points must be positive".into()));
    }
    let w = 1.0 / quad_points as f64;
    let grid: Vec<f64> = (0..quad_points).map(|i| (i as f64 + 0.5) * w).collect();
    let a = truth.rate_grid(pairs, &grid);
    let b = estimate.rate_grid(pairs, &grid);
    let mut total = 0.0;
    for (ra, rb) in a.iter().zip(b.iter()) {
        let mut acc = 0.0;
        for (x, y) in ra.iter().zip(rb.iter()) {
            let d = x - y;
            acc += d * d;
        }
        total += acc * w;
    }
    Ok(total / pairs.len() as f64)
}

/// Procrustes-aligned subspace error `min_Q |U_hat Q - U|_2` (spectral norm).
pub fn subspace_error(u_hat: &DMatrix<f64>, u_true: &DMatrix<f64>) -> Result<f64> {
    if u_hat.shape() != u_true.shape() {
        return Err(Error::Shape(format!(
            "{:?} vs {:?}",
            u_hat.shape(),
            u_true.shape()
        )));
    }
    let q = procrustes_rotation(u_hat, u_true)?;
    let diff = u_hat * q - u_true;
    let sv = diff.svd(false, false);
    Ok(sv.singular_values.iter().cloned().fold(0.0, f64::max))
}
