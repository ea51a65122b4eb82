//! Global subspace estimation from the concatenated coefficient matrix.
//!
//! The per-function coefficient matrices are laid side by side as
//! `X = [Y(phi^1)^T | ... | Y(phi^B)^T]` (N rows, N*B columns) and the top-D
//! left singular vectors of `X` estimate the common node subspace. The
//! decomposition runs as seeded randomized subspace iteration against the
//! sparse `X`; dense matrices are never formed.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::coeffs::CoeffSet;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Estimated subspace: orthonormal `N x D` matrix plus the retained spectrum.
#[derive(Debug, Clone)]
pub struct SubspaceEstimate {
    u_hat: DMatrix<f64>,
    singular_values: Vec<f64>,
    rank: usize,
    rank_deficient: bool,
    iterations: usize,
}

impl SubspaceEstimate {
    pub fn u_hat(&self) -> &DMatrix<f64> {
        &self.u_hat
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn n_nodes(&self) -> usize {
        self.u_hat.nrows()
    }

    /// Retained singular values (more than `rank` when oversampling allows),
    /// non-increasing.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// True when `X` had fewer than `rank` numerically nonzero singular
    /// values; the trailing spectrum is reported as zero.
    pub fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Builds an estimate from an explicit orthonormal matrix. Used when a
    /// subspace comes from somewhere other than the decomposition (tests,
    /// identity projections).
    pub fn from_matrix(u_hat: DMatrix<f64>) -> Result<Self> {
        let d = u_hat.ncols();
        let gram = u_hat.transpose() * &u_hat;
        for p in 0..d {
            for q in 0..d {
                let want = if p == q { 1.0 } else { 0.0 };
                if (gram[(p, q)] - want).abs() > 1e-6 {
                    return Err(Error::Validation(
                        "subspace matrix does not have orthonormal columns".into(),
                    ));
                }
            }
        }
        Ok(Self {
            u_hat,
            singular_values: Vec::new(),
            rank: d,
            rank_deficient: false,
            iterations: 0,
        })
    }
}

/// Scree export: 1-indexed `(index, sigma)` pairs of the retained spectrum.
pub fn scree(estimate: &SubspaceEstimate) -> Vec<(usize, f64)> {
    estimate
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, &s)| (i + 1, s))
        .collect()
}

/// Assembles the sparse concatenated matrix `X`; column block `b` holds the
/// transpose of the b-th coefficient matrix, so row `v` of `X` collects node
/// v's incoming relational behavior across all basis functions.
pub fn build_x(coeffs: &CoeffSet) -> SparseMatrix {
    let n = coeffs.n_nodes();
    let b_count = coeffs.n_functions();
    let mut triples: Vec<(u32, u32, f64)> = Vec::with_capacity(coeffs.total_entries());
    for b in 0..b_count {
        let base = (b * n) as u32;
        for e in coeffs.entries(b) {
            // Transposed block: entry (u, v) lands at row v, column b*N + u.
            triples.push((e.v, base + e.u, e.coeff));
        }
    }
    triples.sort_unstable_by_key(|a| (a.0, a.1));
    SparseMatrix::from_sorted_triples(n, n * b_count, triples)
}

/// Tuning for [`truncated_svd_with`].
#[derive(Debug, Clone, Copy)]
pub struct TsvdOptions {
    /// Extra subspace columns carried through the iteration.
    pub oversample: usize,
    /// Relative change in the retained singular values that counts as
    /// converged.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for TsvdOptions {
    fn default() -> Self {
        Self {
            oversample: 8,
            tol: 1e-10,
            max_iterations: 500,
        }
    }
}

/// Rank-`d` truncated SVD with default options.
pub fn truncated_svd(x: &SparseMatrix, d: usize, seed: u64) -> Result<SubspaceEstimate> {
    truncated_svd_with(x, d, seed, TsvdOptions::default())
}

/// Seeded randomized subspace iteration for the top-`d` singular triplets.
pub fn truncated_svd_with(
    x: &SparseMatrix,
    d: usize,
    seed: u64,
    opts: TsvdOptions,
) -> Result<SubspaceEstimate> {
    let n = x.nrows();
    if d == 0 {
        return Err(Error::Parameter("rank must be at least 1".into()));
    }
    if d > n {
        return Err(Error::Rank {
            requested: d,
            limit: n,
        });
    }

    if x.nnz() == 0 {
        // Degenerate input: report the first d coordinate directions with a
        // zero spectrum rather than failing, so empty streams stay usable.
        let mut u = DMatrix::<f64>::zeros(n, d);
        for i in 0..d {
            u[(i, i)] = 1.0;
        }
        return Ok(SubspaceEstimate {
            u_hat: u,
            singular_values: vec![0.0; d],
            rank: d,
            rank_deficient: true,
            iterations: 0,
        });
    }

    let k = (d + opts.oversample).min(n).min(x.ncols());
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let omega = DMatrix::<f64>::from_fn(x.ncols(), k, |_, _| StandardNormal.sample(&mut rng));

    let mut q = orthonormal_columns(x.mul_dense(&omega));
    let mut prev_sigma: Option<Vec<f64>> = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut bt = x.mul_transpose_dense(&q); // ncols x k, equals X^T Q

    while iterations < opts.max_iterations {
        iterations += 1;
        // Singular value estimates come from the small QR factor of X^T Q.
        let sigma = singular_estimates(&bt, d);
        if let Some(prev) = &prev_sigma {
            let scale = sigma[0].max(f64::MIN_POSITIVE);
            let delta = sigma
                .iter()
                .zip(prev.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if delta <= opts.tol * scale {
                converged = true;
                break;
            }
        }
        prev_sigma = Some(sigma);
        let z = orthonormal_columns(bt);
        q = orthonormal_columns(x.mul_dense(&z));
        bt = x.mul_transpose_dense(&q);
    }
    if !converged && iterations >= opts.max_iterations {
        return Err(Error::Convergence {
            iterations,
            message: "singular values did not stabilize".into(),
        });
    }

    // Small SVD of Q^T X = (X^T Q)^T recovers the triplets.
    let svd = bt.transpose().svd(true, true);
    let u_small = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v requested");

    let mut u_hat = DMatrix::<f64>::zeros(n, d);
    let qu = q * u_small; // n x k
    for c in 0..d {
        u_hat.set_column(c, &qu.column(c));
    }
    let retained: Vec<f64> = svd.singular_values.iter().cloned().collect();
    let mut singular_values: Vec<f64> = retained.iter().take(k).cloned().collect();

    // Numerical rank and the deficiency flag.
    let sigma_max = singular_values.first().cloned().unwrap_or(0.0);
    let cutoff = sigma_max * 1e-12;
    let numerical_rank = singular_values.iter().filter(|&&s| s > cutoff).count();
    let rank_deficient = numerical_rank < d;
    if rank_deficient {
        for s in singular_values.iter_mut().skip(numerical_rank) {
            *s = 0.0;
        }
    }

    // Residual diagnostic: for the retained triplets, X^T u_i must match
    // sigma_i v_i relative to the dominant singular value.
    let vt_top = v_t.rows(0, d).transpose(); // ncols x d
    let xtu = x.mul_transpose_dense(&u_hat);
    let mut residual: f64 = 0.0;
    for (c, &sigma) in singular_values.iter().take(d).enumerate() {
        let diff = xtu.column(c) - vt_top.column(c) * sigma;
        residual = residual.max(diff.norm());
    }
    if sigma_max > 0.0 && residual > 1e-6 * sigma_max {
        return Err(Error::Convergence {
            iterations,
            message: format!(
                "residual {residual:.3e} exceeds 1e-6 * sigma_1 = {:.3e}",
                1e-6 * sigma_max
            ),
        });
    }

    Ok(SubspaceEstimate {
        u_hat,
        singular_values,
        rank: d,
        rank_deficient,
        iterations,
    })
}

fn orthonormal_columns(m: DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.qr();
    qr.q()
}

fn singular_estimates(bt: &DMatrix<f64>, d: usize) -> Vec<f64> {
    // bt is ncols x k; its singular values equal those of the k x k R factor.
    let r = bt.clone().qr().unpack_r();
    let mut sv: Vec<f64> = r
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .collect();
    sv.truncate(d);
    sv
}

/// Orthogonal `Q` minimizing `|a Q - b|` over orthogonal matrices, from the
/// SVD of `a^T b`. Resolves the rotation indeterminacy when comparing
/// subspace estimates.
pub fn procrustes_rotation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let m = a.transpose() * b;
    let svd = m.svd(true, true);
    Ok(svd.u.expect("u") * svd.v_t.expect("v_t"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::haar_basis;
    use crate::coeffs::{ProjectOptions, project};
    use crate::events::{Directedness, Event, EventStream};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn build_x_single_block_transposes() {
        let s = EventStream::new(
            2,
            1.0,
            vec![Event { u: 0, v: 1, t: 0.2 }, Event { u: 0, v: 1, t: 0.8 }],
            Directedness::Directed,
        )
        .unwrap();
        let c = project(&s, &haar_basis(0), ProjectOptions::default()).unwrap();
        let x = build_x(&c);
        assert_eq!((x.nrows(), x.ncols()), (2, 2));
        assert_eq!(x.get(1, 0), 2.0); // Y[0,1] lands transposed
        assert_eq!(x.get(0, 1), 0.0);
    }

    #[test]
    fn build_x_empty() {
        let s = EventStream::new(3, 1.0, vec![], Directedness::Directed).unwrap();
        let c = project(&s, &haar_basis(1), ProjectOptions::default()).unwrap();
        let x = build_x(&c);
        assert_eq!((x.nrows(), x.ncols()), (3, 6));
        assert_eq!(x.nnz(), 0);
    }

    #[test]
    fn build_x_block_structure_matches_definition() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let events: Vec<Event> = (0..60)
            .map(|_| Event {
                u: rng.random_range(0..3),
                v: rng.random_range(0..3),
                t: rng.random::<f64>(),
            })
            .collect();
        let s = EventStream::new(3, 1.0, events, Directedness::Directed).unwrap();
        let basis = haar_basis(1);
        let c = project(&s, &basis, ProjectOptions::default()).unwrap();
        let x = build_x(&c);
        for b in 0..2 {
            for u in 0..3u32 {
                for v in 0..3u32 {
                    let want = c.get(b, u, v).map(|e| e.coeff).unwrap_or(0.0);
                    assert_eq!(x.get(v as usize, b * 3 + u as usize), want);
                }
            }
        }
    }

    fn sparse_from_dense(m: &DMatrix<f64>) -> SparseMatrix {
        let mut triples = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != 0.0 {
                    triples.push((r as u32, c as u32, m[(r, c)]));
                }
            }
        }
        SparseMatrix::from_sorted_triples(m.nrows(), m.ncols(), triples)
    }

    #[test]
    fn rank_one_matrix() {
        let u = DMatrix::from_column_slice(3, 1, &[0.6, 0.8, 0.0]);
        let v = DMatrix::from_column_slice(4, 1, &[0.5, 0.5, 0.5, 0.5]);
        let x = sparse_from_dense(&(&u * v.transpose()));
        let est = truncated_svd(&x, 1, 0).unwrap();
        assert!((est.singular_values()[0] - 1.0).abs() < 1e-10);
        let got = est.u_hat().column(0);
        let align = if got[0] * 0.6 < 0.0 { -1.0 } else { 1.0 };
        for i in 0..3 {
            assert!((align * got[i] - u[(i, 0)]).abs() < 1e-10);
        }
    }

    #[test]
    fn diagonal_matrix() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let x = sparse_from_dense(&m);
        let est = truncated_svd(&x, 2, 1).unwrap();
        assert!((est.singular_values()[0] - 3.0).abs() < 1e-10);
        assert!((est.singular_values()[1] - 2.0).abs() < 1e-10);
        for (c, expect_row) in [(0usize, 0usize), (1, 1)] {
            for r in 0..3 {
                let want = if r == expect_row { 1.0 } else { 0.0 };
                assert!((est.u_hat()[(r, c)].abs() - want).abs() < 1e-8);
            }
        }
        let s = scree(&est);
        assert_eq!(s[0], (1, est.singular_values()[0]));
        assert_eq!(s.len(), est.singular_values().len());
    }

    #[test]
    fn random_matrix_matches_full_svd_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let dense = DMatrix::<f64>::from_fn(8, 16, |_, _| rng.random::<f64>() - 0.5);
        let x = sparse_from_dense(&dense);
        let est = truncated_svd(&x, 3, 9).unwrap();
        let oracle = dense.clone().svd(true, false);
        for c in 0..3 {
            assert!(
                (est.singular_values()[c] - oracle.singular_values[c]).abs() < 1e-8,
                "sigma_{c}"
            );
            let got = est.u_hat().column(c);
            let want = oracle.u.as_ref().unwrap().column(c);
            let dot: f64 = got.iter().zip(want.iter()).map(|(a, b)| a * b).sum();
            let sign = if dot < 0.0 { -1.0 } else { 1.0 };
            for r in 0..8 {
                assert!((sign * got[r] - want[r]).abs() < 1e-8, "col {c} row {r}");
            }
        }
    }

    #[test]
    fn orthonormal_output_columns() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let dense = DMatrix::<f64>::from_fn(10, 20, |_, _| rng.random::<f64>());
        let x = sparse_from_dense(&dense);
        let est = truncated_svd(&x, 4, 17).unwrap();
        let gram = est.u_hat().transpose() * est.u_hat();
        for p in 0..4 {
            for q in 0..4 {
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((gram[(p, q)] - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let dense = DMatrix::<f64>::from_fn(6, 9, |_, _| rng.random::<f64>());
        let x = sparse_from_dense(&dense);
        let a = truncated_svd(&x, 2, 5).unwrap();
        let b = truncated_svd(&x, 2, 5).unwrap();
        assert_eq!(a.u_hat(), b.u_hat());
        assert_eq!(a.singular_values(), b.singular_values());
    }

    #[test]
    fn rank_error_when_d_exceeds_rows() {
        let x = SparseMatrix::from_sorted_triples(2, 4, vec![(0, 0, 1.0)]);
        assert!(matches!(truncated_svd(&x, 3, 0), Err(Error::Rank { .. })));
    }

    #[test]
    fn deficient_rank_is_flagged_and_zero_padded() {
        // Rank-1 matrix, request 2.
        let u = DMatrix::from_column_slice(4, 1, &[0.5, 0.5, 0.5, 0.5]);
        let x = sparse_from_dense(&(&u * u.transpose()));
        let est = truncated_svd(&x, 2, 0).unwrap();
        assert!(est.rank_deficient());
        assert_eq!(est.singular_values()[1], 0.0);
        let gram = est.u_hat().transpose() * est.u_hat();
        assert!((gram[(1, 1)] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_matrix_degenerates_gracefully() {
        let x = SparseMatrix::from_sorted_triples(3, 6, Vec::<(u32, u32, f64)>::new());
        let est = truncated_svd(&x, 2, 0).unwrap();
        assert!(est.rank_deficient());
        assert_eq!(est.singular_values(), &[0.0, 0.0]);
    }

    #[test]
    fn dsbm_spectrum_has_rank_two_gap() {
        // Two balanced communities: the first two singular values dominate
        // the noise tail.
        use crate::synth::{dsbm_ground_truth, generate_network};
        let truth = dsbm_ground_truth(200, 8.0, 2.0, (0.5, 0.75)).unwrap();
        let stream = generate_network(&truth, 1).unwrap();
        let basis = haar_basis(4);
        let coeffs = project(&stream, &basis, ProjectOptions::default()).unwrap();
        let x = build_x(&coeffs);
        let est = truncated_svd(&x, 6, 0).unwrap();
        let sv = est.singular_values();
        assert!(sv[1] / sv[2] > 3.0, "spectrum {:?}", &sv[..4]);
    }

    #[test]
    fn procrustes_absorbs_rotation() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let raw = DMatrix::<f64>::from_fn(6, 2, |_, _| rng.random::<f64>() - 0.5);
        let u = orthonormal_columns(raw);
        let theta: f64 = 0.7;
        let rot =
            DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let rotated = &u * &rot;
        let q = procrustes_rotation(&rotated, &u).unwrap();
        let err = (&rotated * q - &u).norm();
        assert!(err < 1e-12, "residual {err}");
    }
}
