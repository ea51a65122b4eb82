//! Multiscale anomaly score from Haar affinity coefficients.
//!
//! At scale `j` the score over a dyadic cell is the sum of `|S_pq(psi_{j,k})|`
//! across all factor pairs, so each level reads as a step function flagging
//! where interaction structure moves at that resolution.

use std::io::Write;

use crate::affinity::AffinityResult;
use crate::basis::{BasisSet, dyadic_cell};
use crate::error::{Error, Result};

/// Which coefficients feed the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreSource {
    Raw,
    Thresholded,
}

/// Per-scale step functions of the score.
#[derive(Debug, Clone)]
pub struct AnomalyProfile {
    pub source: ScoreSource,
    pub scales: Vec<ScaleScores>,
}

#[derive(Debug, Clone)]
pub struct ScaleScores {
    pub level: u32,
    /// One value per dyadic cell `I_{level,k}`, `k = 0..2^level`.
    pub scores: Vec<f64>,
}

impl AnomalyProfile {
    /// Score of the scale-`level` profile at time `t`.
    pub fn score_at(&self, level: u32, t: f64) -> Option<f64> {
        self.scales
            .iter()
            .find(|s| s.level == level)
            .map(|s| s.scores[dyadic_cell(level, t) as usize])
    }

    /// Optional single-score view: per finest-resolution cell, the sum of the
    /// scores of every scale covering it.
    pub fn sum_over_scales(&self) -> Vec<f64> {
        let finest = match self.scales.iter().map(|s| s.level).max() {
            Some(l) => l,
            None => return Vec::new(),
        };
        let cells = 1usize << finest;
        let mut out = vec![0.0; cells];
        for (k, slot) in out.iter_mut().enumerate() {
            let t = (k as f64 + 0.5) / cells as f64;
            for s in &self.scales {
                *slot += s.scores[dyadic_cell(s.level, t) as usize];
            }
        }
        out
    }
}

/// Computes the per-scale score profile from a fitted affinity result.
pub fn multiscale_score(
    affinity: &AffinityResult,
    basis: &BasisSet,
    source: ScoreSource,
) -> Result<AnomalyProfile> {
    let levels = basis.haar_levels().ok_or_else(|| {
        Error::UnsupportedBasis("anomaly scores are defined on Haar bases".into())
    })?;
    if affinity.n_functions() != basis.len() {
        return Err(Error::Shape(format!(
            "affinity covers {} functions, basis has {}",
            affinity.n_functions(),
            basis.len()
        )));
    }
    let coeffs = match source {
        ScoreSource::Raw => &affinity.s_hat,
        ScoreSource::Thresholded => &affinity.s_thresh,
    };
    let mut scales = Vec::with_capacity(levels as usize);
    for j in 0..levels {
        let cells = 1usize << j;
        let scores: Vec<f64> = (0..cells)
            .map(|k| {
                let id = basis.haar_detail_id(j, k as u32);
                coeffs[id].iter().map(|v| v.abs()).sum()
            })
            .collect();
        scales.push(ScaleScores { level: j, scores });
    }
    Ok(AnomalyProfile { source, scales })
}

/// CSV rows `scale,cell_index,t_start,t_end,score`.
pub fn write_profile_csv(profile: &AnomalyProfile, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "scale,cell_index,t_start,t_end,score")?;
    for s in &profile.scales {
        let cells = s.scores.len();
        for (k, score) in s.scores.iter().enumerate() {
            let t0 = k as f64 / cells as f64;
            let t1 = (k + 1) as f64 / cells as f64;
            writeln!(out, "{},{},{},{},{}", s.level, k, t0, t1, score)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::compute_affinity;
    use crate::basis::haar_basis;
    use crate::coeffs::{ProjectOptions, project};
    use crate::events::{Directedness, Event, EventStream};
    use crate::subspace::SubspaceEstimate;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn empty_result(levels: u32, d: usize) -> (AffinityResult, BasisSet) {
        let basis = haar_basis(levels);
        let s = EventStream::new(d, 1.0, vec![], Directedness::Directed).unwrap();
        let c = project(&s, &basis, ProjectOptions::default()).unwrap();
        let sub = SubspaceEstimate::from_matrix(DMatrix::identity(d, d)).unwrap();
        let aff = compute_affinity(&c, &sub, &basis, 0.05, None).unwrap();
        (aff, basis)
    }

    #[test]
    fn zero_coefficients_zero_profile() {
        let (aff, basis) = empty_result(3, 2);
        let p = multiscale_score(&aff, &basis, ScoreSource::Thresholded).unwrap();
        assert_eq!(p.scales.len(), 3);
        for s in &p.scales {
            assert!(s.scores.iter().all(|&v| v == 0.0));
        }
        assert!(p.sum_over_scales().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_detail_coefficient_places_its_support() {
        let (mut aff, basis) = empty_result(2, 1);
        // Force S_hat(psi_{1,0}) = -3 on the single factor pair.
        let id = basis.haar_detail_id(1, 0);
        aff.s_hat[id][(0, 0)] = -3.0;
        let p = multiscale_score(&aff, &basis, ScoreSource::Raw).unwrap();
        assert_eq!(p.score_at(1, 0.2).unwrap(), 3.0);
        assert_eq!(p.score_at(1, 0.7).unwrap(), 0.0);
        assert_eq!(p.score_at(0, 0.2).unwrap(), 0.0); // level locality
    }

    #[test]
    fn matches_direct_double_sum() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let n = 6;
        let events: Vec<Event> = (0..500)
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
        let aff = compute_affinity(&c, &sub, &basis, 1.0, None).unwrap();
        let p = multiscale_score(&aff, &basis, ScoreSource::Raw).unwrap();
        for j in 0..3u32 {
            for k in 0..(1usize << j) {
                let id = basis.haar_detail_id(j, k as u32);
                let mut want = 0.0;
                for pp in 0..2 {
                    for qq in 0..2 {
                        want += aff.s_hat[id][(pp, qq)].abs();
                    }
                }
                let t = (k as f64 + 0.5) / (1 << j) as f64;
                assert!((p.score_at(j, t).unwrap() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn thresholded_never_exceeds_raw() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let n = 8;
        let events: Vec<Event> = (0..800)
            .map(|_| Event {
                u: rng.random_range(0..n as u32),
                v: rng.random_range(0..n as u32),
                t: rng.random::<f64>(),
            })
            .collect();
        let s = EventStream::new(n, 1.0, events, Directedness::Directed).unwrap();
        let basis = haar_basis(4);
        let c = project(&s, &basis, ProjectOptions::default()).unwrap();
        let x = crate::subspace::build_x(&c);
        let sub = crate::subspace::truncated_svd(&x, 2, 0).unwrap();
        let aff = compute_affinity(&c, &sub, &basis, 0.05, None).unwrap();
        let raw = multiscale_score(&aff, &basis, ScoreSource::Raw).unwrap();
        let thr = multiscale_score(&aff, &basis, ScoreSource::Thresholded).unwrap();
        for (r, t) in raw.scales.iter().zip(thr.scales.iter()) {
            for (a, b) in r.scores.iter().zip(t.scores.iter()) {
                assert!(b <= a);
            }
        }
    }

    #[test]
    fn non_haar_basis_rejected() {
        use crate::basis::{QuadratureOptions, RawFunction, orthonormalize};
        use std::sync::Arc;
        let generic = orthonormalize(
            vec![RawFunction::Evaluator(Arc::new(|_| 1.0))],
            QuadratureOptions::default(),
        )
        .unwrap();
        let (aff, _) = empty_result(0, 2);
        let got = multiscale_score(&aff, &generic, ScoreSource::Raw);
        assert!(matches!(got, Err(Error::UnsupportedBasis(_))));
    }

    #[test]
    fn merge_interval_dominates_quarter_resolving_scale() {
        // DSBM with the intra rate dropping to the inter rate on
        // [0.5, 0.75]: at the coarsest scale whose wavelets resolve
        // 0.25-wide structure (level 1, half-intervals of width 0.25), the
        // thresholded profile must peak on a cell meeting the merge window.
        use crate::pipeline::{FitConfig, fit_stream};
        use crate::synth::{dsbm_ground_truth, generate_network};
        let truth = dsbm_ground_truth(40, 8.0, 2.0, (0.5, 0.75)).unwrap();
        let mut hits = 0;
        for seed in 0..10u64 {
            let stream = generate_network(&truth, 400 + seed).unwrap();
            let config = FitConfig {
                levels: 4,
                rank: 2,
                alpha: 0.05,
                seed,
                ..FitConfig::default()
            };
            let fit = fit_stream(&stream, &config).unwrap();
            let profile =
                multiscale_score(&fit.affinity, &fit.basis, ScoreSource::Thresholded).unwrap();
            let scores = &profile.scales[1].scores; // level 1: cells [0,0.5), [0.5,1]
            let argmax = scores
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            // Cell [0.5, 1] intersects the merge window.
            if argmax == 1 && scores[1] > 0.0 {
                hits += 1;
            }
        }
        assert!(hits >= 6, "merge cell won in only {hits}/10 seeds");
    }

    #[test]
    fn csv_export_shape() {
        let (aff, basis) = empty_result(2, 1);
        let p = multiscale_score(&aff, &basis, ScoreSource::Thresholded).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scale,cell_index,t_start,t_end,score");
        // 1 cell at level 0 + 2 cells at level 1.
        assert_eq!(lines.len(), 1 + 1 + 2);
        assert!(lines[1].starts_with("0,0,0,0.5") || lines[1].starts_with("0,0,0,1"));
    }
}
