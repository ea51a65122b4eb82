//! Affinity coefficients, z-scores and FDR thresholding.
//!
//! Each coefficient matrix is compressed through the estimated subspace into
//! a `D x D` affinity matrix `S_hat(phi^b) = U_hat^T Y(phi^b) U_hat`, whose
//! entry `(p, q)` measures how strongly latent factors p and q co-vary with
//! `phi^b`. The matching variance estimate
//! `sum_{u,v} U_hat[u,p]^2 U_hat[v,q]^2 Y_uv((phi^b)^2)` yields z-scores,
//! two-sided normal p-values, and a Benjamini-Hochberg significance mask at
//! level alpha over all tested coefficients jointly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSet;
use crate::coeffs::CoeffSet;
use crate::error::{Error, Result};
use crate::stats::two_sided_p;
use crate::subspace::SubspaceEstimate;

/// Which basis functions enter the multiple-testing family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TestScope {
    /// Test every function.
    All,
    /// Test detail functions only; function 0 (the scaling function) is
    /// always retained. This is what makes alpha = 0 produce the constant
    /// mean-rate estimate under a Haar basis.
    DetailOnly,
}

impl TestScope {
    pub fn tests(&self, b: usize) -> bool {
        match self {
            TestScope::All => true,
            TestScope::DetailOnly => b != 0,
        }
    }
}

/// Default scope for a basis: Haar sets keep their scaling function out of
/// the family, generic bases are tested in full.
pub fn scope_scaling_exclusion(basis: &BasisSet) -> TestScope {
    if basis.is_haar() {
        TestScope::DetailOnly
    } else {
        TestScope::All
    }
}

/// Affinity coefficients and the derived test artifacts, per basis function.
#[derive(Debug, Clone)]
pub struct AffinityResult {
    pub alpha: f64,
    pub s_hat: Vec<DMatrix<f64>>,
    pub var_hat: Vec<DMatrix<f64>>,
    pub z: Vec<DMatrix<f64>>,
    /// Raw two-sided p-values; NaN where the entry was not tested.
    pub p_raw: Vec<DMatrix<f64>>,
    /// BH-adjusted p-values; NaN where the entry was not tested.
    pub p_adj: Vec<DMatrix<f64>>,
    /// 1 where the coefficient is kept (rejected null, or retained scope).
    pub mask: Vec<DMatrix<u8>>,
    pub s_thresh: Vec<DMatrix<f64>>,
}

impl AffinityResult {
    pub fn n_functions(&self) -> usize {
        self.s_hat.len()
    }

    pub fn rank(&self) -> usize {
        self.s_hat.first().map(|m| m.nrows()).unwrap_or(0)
    }
}

/// Per-function `D x D` matrices.
pub type PerFunctionMatrices = Vec<DMatrix<f64>>;

/// `S_hat[b] = U_hat^T Y(phi^b) U_hat` and its variance estimate, computed by
/// iterating the stored sparse triples (the N x N matrices are never formed).
pub fn affinity_coeffs(
    coeffs: &CoeffSet,
    sub: &SubspaceEstimate,
) -> Result<(PerFunctionMatrices, PerFunctionMatrices)> {
    if coeffs.n_nodes() != sub.n_nodes() {
        return Err(Error::Shape(format!(
            "coefficients cover {} nodes, subspace {}",
            coeffs.n_nodes(),
            sub.n_nodes()
        )));
    }
    let d = sub.rank();
    let u = sub.u_hat();
    let mut s_hat = Vec::with_capacity(coeffs.n_functions());
    let mut var_hat = Vec::with_capacity(coeffs.n_functions());
    for b in 0..coeffs.n_functions() {
        let mut s = DMatrix::<f64>::zeros(d, d);
        let mut var = DMatrix::<f64>::zeros(d, d);
        for e in coeffs.entries(b) {
            let (ui, vi) = (e.u as usize, e.v as usize);
            for p in 0..d {
                let up = u[(ui, p)];
                let up2 = up * up;
                for q in 0..d {
                    let vq = u[(vi, q)];
                    s[(p, q)] += up * vq * e.coeff;
                    var[(p, q)] += up2 * vq * vq * e.sq;
                }
            }
        }
        s_hat.push(s);
        var_hat.push(var);
    }
    Ok((s_hat, var_hat))
}

/// Entrywise `z = s / sqrt(var)`; zero-variance entries get z = 0 and are
/// reported untestable.
pub fn z_scores(
    s_hat: &[DMatrix<f64>],
    var_hat: &[DMatrix<f64>],
) -> (Vec<DMatrix<f64>>, Vec<DMatrix<bool>>) {
    let mut z_all = Vec::with_capacity(s_hat.len());
    let mut testable_all = Vec::with_capacity(s_hat.len());
    for (s, var) in s_hat.iter().zip(var_hat.iter()) {
        let (d1, d2) = s.shape();
        let mut z = DMatrix::<f64>::zeros(d1, d2);
        let mut testable = DMatrix::<bool>::from_element(d1, d2, false);
        for p in 0..d1 {
            for q in 0..d2 {
                let v = var[(p, q)];
                if v > 0.0 {
                    z[(p, q)] = s[(p, q)] / v.sqrt();
                    testable[(p, q)] = true;
                }
            }
        }
        z_all.push(z);
        testable_all.push(testable);
    }
    (z_all, testable_all)
}

/// Output of the multiple-testing step.
#[derive(Debug, Clone)]
pub struct BhOutcome {
    pub p_raw: Vec<DMatrix<f64>>,
    pub p_adj: Vec<DMatrix<f64>>,
    /// 1 exactly on rejected hypotheses (tested entries only).
    pub rejected: Vec<DMatrix<u8>>,
    /// Number of hypotheses in the family.
    pub m: usize,
}

/// Benjamini-Hochberg step-up over all testable coefficients in scope,
/// jointly. Adjusted p-values are the usual monotone min(m p_(i) / i, 1).
pub fn bh_threshold(
    z: &[DMatrix<f64>],
    testable: &[DMatrix<bool>],
    scope: &TestScope,
    alpha: f64,
) -> Result<BhOutcome> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let mut p_raw: Vec<DMatrix<f64>> = Vec::with_capacity(z.len());
    let mut p_adj: Vec<DMatrix<f64>> = Vec::with_capacity(z.len());
    let mut rejected: Vec<DMatrix<u8>> = Vec::with_capacity(z.len());
    let mut family: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (b, zb) in z.iter().enumerate() {
        let (d1, d2) = zb.shape();
        let mut praw = DMatrix::<f64>::from_element(d1, d2, f64::NAN);
        if scope.tests(b) {
            for p in 0..d1 {
                for q in 0..d2 {
                    if testable[b][(p, q)] {
                        let pv = two_sided_p(zb[(p, q)]);
                        praw[(p, q)] = pv;
                        family.push((b, p, q, pv));
                    }
                }
            }
        }
        p_raw.push(praw);
        p_adj.push(DMatrix::<f64>::from_element(d1, d2, f64::NAN));
        rejected.push(DMatrix::<u8>::zeros(d1, d2));
    }

    let m = family.len();
    if m > 0 {
        family.sort_by(|a, b| a.3.partial_cmp(&b.3).expect("finite p-values"));
        // Monotone adjusted values: suffix minimum of m * p_(i) / i.
        let mut adj = vec![0.0f64; m];
        let mut running = f64::INFINITY;
        for i in (0..m).rev() {
            let v = family[i].3 * m as f64 / (i + 1) as f64;
            running = running.min(v);
            adj[i] = running.min(1.0);
        }
        // Step-up rule: largest i with p_(i) <= i * alpha / m rejects 1..=i.
        let mut cut = 0usize;
        for i in (0..m).rev() {
            if family[i].3 <= (i + 1) as f64 * alpha / m as f64 {
                cut = i + 1;
                break;
            }
        }
        for (i, &(b, p, q, _)) in family.iter().enumerate() {
            p_adj[b][(p, q)] = adj[i];
            if i < cut {
                rejected[b][(p, q)] = 1;
            }
        }
    }

    Ok(BhOutcome {
        p_raw,
        p_adj,
        rejected,
        m,
    })
}

/// Runs the full second stage: affinity compression, z-scores, BH mask and
/// thresholded coefficients.
pub fn compute_affinity(
    coeffs: &CoeffSet,
    sub: &SubspaceEstimate,
    basis: &BasisSet,
    alpha: f64,
    scope: Option<TestScope>,
) -> Result<AffinityResult> {
    let scope = scope.unwrap_or_else(|| scope_scaling_exclusion(basis));
    let (s_hat, var_hat) = affinity_coeffs(coeffs, sub)?;
    let (z, testable) = z_scores(&s_hat, &var_hat);
    let bh = bh_threshold(&z, &testable, &scope, alpha)?;

    let mut mask = bh.rejected;
    for (b, mb) in mask.iter_mut().enumerate() {
        if !scope.tests(b) {
            // Retained outside the family.
            mb.fill(1);
        }
    }
    let s_thresh = s_hat
        .iter()
        .zip(mask.iter())
        .map(|(s, mk)| {
            DMatrix::from_fn(s.nrows(), s.ncols(), |p, q| {
                if mk[(p, q)] == 1 { s[(p, q)] } else { 0.0 }
            })
        })
        .collect();

    Ok(AffinityResult {
        alpha,
        s_hat,
        var_hat,
        z,
        p_raw: bh.p_raw,
        p_adj: bh.p_adj,
        mask,
        s_thresh,
    })
}

/// Flat JSON form of an [`AffinityResult`]: per-function row-major `D x D`
/// arrays. NaNs (untested entries) serialize as null.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffinityExport {
    pub alpha: f64,
    pub rank: usize,
    pub functions: Vec<AffinityFunctionExport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffinityFunctionExport {
    pub id: usize,
    pub s_hat: Vec<f64>,
    pub var_hat: Vec<f64>,
    pub z: Vec<f64>,
    pub p_raw: Vec<Option<f64>>,
    pub p_adj: Vec<Option<f64>>,
    pub mask: Vec<u8>,
    pub s_thresh: Vec<f64>,
}

fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    (0..r)
        .flat_map(|p| (0..c).map(move |q| (p, q)))
        .map(|(p, q)| m[(p, q)])
        .collect()
}

fn flatten_opt(m: &DMatrix<f64>) -> Vec<Option<f64>> {
    flatten(m)
        .into_iter()
        .map(|v| if v.is_nan() { None } else { Some(v) })
        .collect()
}

fn unflatten(d: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, v)
}

impl AffinityResult {
    pub fn to_export(&self) -> AffinityExport {
        AffinityExport {
            alpha: self.alpha,
            rank: self.rank(),
            functions: (0..self.n_functions())
                .map(|b| AffinityFunctionExport {
                    id: b,
                    s_hat: flatten(&self.s_hat[b]),
                    var_hat: flatten(&self.var_hat[b]),
                    z: flatten(&self.z[b]),
                    p_raw: flatten_opt(&self.p_raw[b]),
                    p_adj: flatten_opt(&self.p_adj[b]),
                    mask: {
                        let m = &self.mask[b];
                        (0..m.nrows())
                            .flat_map(|p| (0..m.ncols()).map(move |q| (p, q)))
                            .map(|(p, q)| m[(p, q)])
                            .collect()
                    },
                    s_thresh: flatten(&self.s_thresh[b]),
                })
                .collect(),
        }
    }

    pub fn from_export(export: &AffinityExport) -> Result<Self> {
        let d = export.rank;
        let expect = d * d;
        let mut s_hat = Vec::new();
        let mut var_hat = Vec::new();
        let mut z = Vec::new();
        let mut p_raw = Vec::new();
        let mut p_adj = Vec::new();
        let mut mask = Vec::new();
        let mut s_thresh = Vec::new();
        for f in &export.functions {
            if f.s_hat.len() != expect || f.mask.len() != expect {
                return Err(Error::Shape(format!(
                    "function {} arrays do not match rank {d}",
                    f.id
                )));
            }
            s_hat.push(unflatten(d, &f.s_hat));
            var_hat.push(unflatten(d, &f.var_hat));
            z.push(unflatten(d, &f.z));
            let opt_to_mat = |vals: &[Option<f64>]| {
                let raw: Vec<f64> = vals.iter().map(|o| o.unwrap_or(f64::NAN)).collect();
                unflatten(d, &raw)
            };
            p_raw.push(opt_to_mat(&f.p_raw));
            p_adj.push(opt_to_mat(&f.p_adj));
            mask.push(DMatrix::from_row_slice(d, d, &f.mask));
            s_thresh.push(unflatten(d, &f.s_thresh));
        }
        Ok(AffinityResult {
            alpha: export.alpha,
            s_hat,
            var_hat,
            z,
            p_raw,
            p_adj,
            mask,
            s_thresh,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::haar_basis;
    use crate::coeffs::{ProjectOptions, project};
    use crate::events::{Directedness, Event, EventStream};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn identity_subspace(n: usize) -> SubspaceEstimate {
        SubspaceEstimate::from_matrix(DMatrix::identity(n, n)).unwrap()
    }

    #[test]
    fn identity_congruence_densifies() {
        let s = EventStream::new(
            2,
            1.0,
            vec![
                Event { u: 0, v: 1, t: 0.1 },
                Event { u: 0, v: 1, t: 0.2 },
                Event { u: 1, v: 0, t: 0.8 },
            ],
            Directedness::Directed,
        )
        .unwrap();
        let basis = haar_basis(1);
        let c = project(&s, &basis, ProjectOptions::default()).unwrap();
        let sub = identity_subspace(2);
        let (s_hat, var_hat) = affinity_coeffs(&c, &sub).unwrap();
        assert_eq!(s_hat[0][(0, 1)], 2.0);
        assert_eq!(s_hat[0][(1, 0)], 1.0);
        assert_eq!(var_hat[0][(0, 1)], 2.0);
        // Detail function: both (0,1) events left, the (1,0) event right.
        assert_eq!(s_hat[1][(0, 1)], 2.0);
        assert_eq!(s_hat[1][(1, 0)], -1.0);
    }

    #[test]
    fn zero_coefficients_give_zero_affinity() {
        let s = EventStream::new(3, 1.0, vec![], Directedness::Directed).unwrap();
        let c = project(&s, &haar_basis(2), ProjectOptions::default()).unwrap();
        let sub = identity_subspace(3);
        let (s_hat, var_hat) = affinity_coeffs(&c, &sub).unwrap();
        for b in 0..4 {
            assert_eq!(s_hat[b].iter().map(|v| v.abs()).sum::<f64>(), 0.0);
            assert_eq!(var_hat[b].iter().map(|v| v.abs()).sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn congruence_matches_dense_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let n = 3;
        let d = 2;
        // Random orthonormal Û via QR.
        let raw = DMatrix::<f64>::from_fn(n, d, |_, _| rng.random::<f64>() - 0.5);
        let u = raw.qr().q();
        let sub = SubspaceEstimate::from_matrix(u.clone()).unwrap();

        let events: Vec<Event> = (0..40)
            .map(|_| Event {
                u: rng.random_range(0..n as u32),
                v: rng.random_range(0..n as u32),
                t: rng.random::<f64>(),
            })
            .collect();
        let s = EventStream::new(n, 1.0, events, Directedness::Directed).unwrap();
        let basis = haar_basis(2);
        let c = project(&s, &basis, ProjectOptions::default()).unwrap();
        let (s_hat, var_hat) = affinity_coeffs(&c, &sub).unwrap();

        for b in 0..basis.len() {
            // Dense oracle: build Y and the two triple products directly.
            let mut y = DMatrix::<f64>::zeros(n, n);
            let mut ysq = DMatrix::<f64>::zeros(n, n);
            for e in c.entries(b) {
                y[(e.u as usize, e.v as usize)] = e.coeff;
                ysq[(e.u as usize, e.v as usize)] = e.sq;
            }
            let dense = u.transpose() * &y * &u;
            for p in 0..d {
                for q in 0..d {
                    assert!((s_hat[b][(p, q)] - dense[(p, q)]).abs() < 1e-12);
                    let mut var = 0.0;
                    for uu in 0..n {
                        for vv in 0..n {
                            var += u[(uu, p)].powi(2) * u[(vv, q)].powi(2) * ysq[(uu, vv)];
                        }
                    }
                    assert!((var_hat[b][(p, q)] - var).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn congruence_is_bilinear() {
        // affinity(aA + bB) = a affinity(A) + b affinity(B), checked through
        // two streams and their concatenation.
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let n = 4;
        let mk_events = |rng: &mut ChaCha12Rng, count: usize| -> Vec<Event> {
            (0..count)
                .map(|_| Event {
                    u: rng.random_range(0..n as u32),
                    v: rng.random_range(0..n as u32),
                    t: rng.random::<f64>(),
                })
                .collect()
        };
        let ev_a = mk_events(&mut rng, 30);
        let ev_b = mk_events(&mut rng, 25);
        let mut ev_ab = ev_a.clone();
        ev_ab.extend(ev_b.iter().cloned());
        let basis = haar_basis(1);
        let raw = DMatrix::<f64>::from_fn(n, 2, |_, _| rng.random::<f64>() - 0.5);
        let sub = SubspaceEstimate::from_matrix(raw.qr().q()).unwrap();
        let coeff = |events: Vec<Event>| {
            let s = EventStream::new(n, 1.0, events, Directedness::Directed).unwrap();
            let c = project(&s, &basis, ProjectOptions::default()).unwrap();
            affinity_coeffs(&c, &sub).unwrap().0
        };
        let sa = coeff(ev_a);
        let sb = coeff(ev_b);
        let sab = coeff(ev_ab);
        for b in 0..basis.len() {
            let sum = &sa[b] + &sb[b];
            assert!((&sab[b] - sum).norm() < 1e-9);
        }
    }

    #[test]
    fn z_score_rules() {
        let s = vec![DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.5, 1.0])];
        let v = vec![DMatrix::from_row_slice(2, 2, &[4.0, 7.0, 0.0, 1.0])];
        let (z, testable) = z_scores(&s, &v);
        assert_eq!(z[0][(0, 0)], 1.0);
        assert_eq!(z[0][(0, 1)], 0.0);
        assert!(testable[0][(0, 1)]);
        // Zero variance: z forced to 0, untestable.
        assert_eq!(z[0][(1, 0)], 0.0);
        assert!(!testable[0][(1, 0)]);
        assert_eq!(z[0][(1, 1)], 1.0);
    }

    fn brute_force_bh(ps: &[f64], alpha: f64) -> Vec<bool> {
        // Independent step-up oracle: try every k from m down.
        let m = ps.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| ps[a].partial_cmp(&ps[b]).unwrap());
        let mut k_star = 0;
        for k in (1..=m).rev() {
            if ps[order[k - 1]] <= k as f64 * alpha / m as f64 {
                k_star = k;
                break;
            }
        }
        let mut rej = vec![false; m];
        for i in 0..k_star {
            rej[order[i]] = true;
        }
        rej
    }

    #[test]
    fn bh_hand_example() {
        // p = {0.001, 0.02, 0.04, 0.5}, alpha = 0.05, m = 4: reject the two
        // smallest (largest k with p_(k) <= k alpha / m is k = 2).
        let zs: Vec<f64> = [0.001f64, 0.02, 0.04, 0.5]
            .iter()
            .map(|p| {
                // invert two_sided_p by bisection
                let mut lo = 0.0;
                let mut hi = 10.0;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if two_sided_p(mid) > *p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        let z = vec![DMatrix::from_row_slice(2, 2, &[zs[0], zs[1], zs[2], zs[3]])];
        let testable = vec![DMatrix::from_element(2, 2, true)];
        let out = bh_threshold(&z, &testable, &TestScope::All, 0.05).unwrap();
        assert_eq!(out.m, 4);
        assert_eq!(out.rejected[0][(0, 0)], 1);
        assert_eq!(out.rejected[0][(0, 1)], 1);
        assert_eq!(out.rejected[0][(1, 0)], 0);
        assert_eq!(out.rejected[0][(1, 1)], 0);
    }

    #[test]
    fn bh_agrees_with_brute_force_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let m = rng.random_range(1..=20usize);
            let ps: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let alpha = rng.random::<f64>();
            // Wrap into a 1 x m matrix family.
            let zs: Vec<f64> = ps
                .iter()
                .map(|p| {
                    let mut lo = 0.0;
                    let mut hi = 40.0;
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if two_sided_p(mid) > *p {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    0.5 * (lo + hi)
                })
                .collect();
            let z = vec![DMatrix::from_row_slice(1, m, &zs)];
            let testable = vec![DMatrix::from_element(1, m, true)];
            let out = bh_threshold(&z, &testable, &TestScope::All, alpha).unwrap();
            // Recover the p-values actually used (two_sided_p of inverted z),
            // then run the oracle on those.
            let used: Vec<f64> = zs.iter().map(|&zv| two_sided_p(zv)).collect();
            let want = brute_force_bh(&used, alpha);
            for (i, &w) in want.iter().enumerate() {
                assert_eq!(out.rejected[0][(0, i)] == 1, w, "m={m} alpha={alpha}");
            }
        }
    }

    #[test]
    fn bh_mask_monotone_in_alpha() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let zs: Vec<f64> = (0..12).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let z = vec![DMatrix::from_row_slice(3, 4, &zs)];
        let testable = vec![DMatrix::from_element(3, 4, true)];
        let mut alphas: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prev: Option<DMatrix<u8>> = None;
        for a in alphas {
            let out = bh_threshold(&z, &testable, &TestScope::All, a).unwrap();
            if let Some(p) = &prev {
                for i in 0..12 {
                    assert!(out.rejected[0][(i / 4, i % 4)] >= p[(i / 4, i % 4)]);
                }
            }
            prev = Some(out.rejected[0].clone());
        }
    }

    #[test]
    fn alpha_one_rejects_everything_testable() {
        let z = vec![DMatrix::from_row_slice(1, 3, &[0.0, 1.0, -2.0])];
        let testable = vec![DMatrix::from_element(1, 3, true)];
        let out = bh_threshold(&z, &testable, &TestScope::All, 1.0).unwrap();
        for i in 0..3 {
            assert_eq!(out.rejected[0][(0, i)], 1);
        }
    }

    #[test]
    fn adjusted_at_least_raw_and_bounded() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let zs: Vec<f64> = (0..9).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
        let z = vec![DMatrix::from_row_slice(3, 3, &zs)];
        let testable = vec![DMatrix::from_element(3, 3, true)];
        let out = bh_threshold(&z, &testable, &TestScope::All, 0.1).unwrap();
        for p in 0..3 {
            for q in 0..3 {
                let raw = out.p_raw[0][(p, q)];
                let adj = out.p_adj[0][(p, q)];
                assert!(adj >= raw - 1e-15);
                assert!((0.0..=1.0).contains(&raw) && (0.0..=1.0).contains(&adj));
            }
        }
    }

    fn toy_result(alpha: f64, scope: Option<TestScope>) -> AffinityResult {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let n = 6;
        let events: Vec<Event> = (0..200)
            .map(|_| Event {
                u: rng.random_range(0..n as u32),
                v: rng.random_range(0..n as u32),
                t: rng.random::<f64>(),
            })
            .collect();
        let s = EventStream::new(n, 1.0, events, Directedness::Directed).unwrap();
        let basis = haar_basis(3);
        let c = project(&s, &basis, ProjectOptions::default()).unwrap();
        let raw = DMatrix::<f64>::from_fn(n, 2, |_, _| rng.random::<f64>() - 0.5);
        let sub = SubspaceEstimate::from_matrix(raw.qr().q()).unwrap();
        compute_affinity(&c, &sub, &basis, alpha, scope).unwrap()
    }

    #[test]
    fn alpha_zero_keeps_only_scaling_under_haar() {
        let r = toy_result(0.0, None);
        for (p, q) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_eq!(r.mask[0][(p, q)], 1);
            assert_eq!(r.s_thresh[0][(p, q)], r.s_hat[0][(p, q)]);
        }
        for b in 1..r.n_functions() {
            for p in 0..2 {
                for q in 0..2 {
                    assert_eq!(r.mask[b][(p, q)], 0);
                    assert_eq!(r.s_thresh[b][(p, q)], 0.0);
                }
            }
        }
    }

    #[test]
    fn alpha_one_keeps_everything_testable() {
        let r = toy_result(1.0, None);
        for b in 0..r.n_functions() {
            for p in 0..2 {
                for q in 0..2 {
                    if b == 0 || r.var_hat[b][(p, q)] > 0.0 {
                        assert_eq!(r.mask[b][(p, q)], 1, "b={b}");
                        assert_eq!(r.s_thresh[b][(p, q)], r.s_hat[b][(p, q)]);
                    } else {
                        assert_eq!(r.mask[b][(p, q)], 0);
                    }
                }
            }
        }
    }

    #[test]
    fn explicit_all_scope_tests_scaling_too() {
        let r = toy_result(0.0, Some(TestScope::All));
        // With alpha = 0 nothing is rejected anywhere, scaling included.
        for b in 0..r.n_functions() {
            assert!(r.mask[b].iter().all(|&m| m == 0));
        }
    }

    #[test]
    fn export_round_trip() {
        let r = toy_result(0.05, None);
        let export = r.to_export();
        let text = serde_json::to_string(&export).unwrap();
        let parsed: AffinityExport = serde_json::from_str(&text).unwrap();
        let back = AffinityResult::from_export(&parsed).unwrap();
        for b in 0..r.n_functions() {
            assert_eq!(back.s_hat[b], r.s_hat[b]);
            assert_eq!(back.mask[b], r.mask[b]);
            assert_eq!(back.s_thresh[b], r.s_thresh[b]);
        }
    }

    #[test]
    fn alpha_out_of_range_rejected() {
        let z = vec![DMatrix::from_element(1, 1, 0.0)];
        let t = vec![DMatrix::from_element(1, 1, true)];
        assert!(bh_threshold(&z, &t, &TestScope::All, 1.5).is_err());
        assert!(bh_threshold(&z, &t, &TestScope::All, -0.1).is_err());
    }
}
