//! Projection of the event counting measure onto a basis.
//!
//! For each basis function `phi^b` and node pair `(u, v)` this produces the
//! empirical coefficient `sum_{tau in E_uv} phi^b(tau)` together with the
//! squared-evaluation sum `sum_tau phi^b(tau)^2` used downstream as a
//! variance estimate. Both inherit the sparsity of the event data: a pair is
//! stored for function `b` only when it has at least one event inside the
//! support of `phi^b`.
//!
//! Haar functions take a counting fast path: events are tallied as integers
//! per half-interval and scaled once, so the dyadic identity
//! `Y(psi_{j,k}) = 2^{j/2} (count(I_{j+1,2k}) - count(I_{j+1,2k+1}))`
//! holds exactly.

use serde::{Deserialize, Serialize};

use crate::basis::{BasisSet, dyadic_cell};
use crate::error::{Error, Result};
use crate::events::EventStream;

/// Stored projection values for one pair under one basis function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffEntry {
    pub u: u32,
    pub v: u32,
    /// `sum_tau phi^b(tau)`
    pub coeff: f64,
    /// `sum_tau phi^b(tau)^2`
    pub sq: f64,
}

/// Per-basis-function sparse coefficient matrices.
#[derive(Debug, Clone)]
pub struct CoeffSet {
    n_nodes: usize,
    basis_hash: u64,
    per_fn: Vec<Vec<CoeffEntry>>,
}

/// Options for [`project`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ProjectOptions {
    /// Keep u == v events in the coefficient matrices. Off by default: the
    /// model concerns pairwise interactions and the diagonal is unmodeled.
    pub include_self_loops: bool,
}

impl CoeffSet {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_functions(&self) -> usize {
        self.per_fn.len()
    }

    pub fn basis_hash(&self) -> u64 {
        self.basis_hash
    }

    /// Entries for function `b`, sorted by `(u, v)`.
    pub fn entries(&self, b: usize) -> &[CoeffEntry] {
        &self.per_fn[b]
    }

    pub fn get(&self, b: usize, u: u32, v: u32) -> Option<&CoeffEntry> {
        self.per_fn[b]
            .binary_search_by_key(&(u, v), |e| (e.u, e.v))
            .ok()
            .map(|i| &self.per_fn[b][i])
    }

    pub fn total_entries(&self) -> usize {
        self.per_fn.iter().map(Vec::len).sum()
    }
}

fn require_normalized(stream: &EventStream) -> Result<()> {
    if !stream.is_normalized() {
        return Err(Error::Domain {
            arg: "stream".into(),
            message: format!(
                "timestamps must lie in [0, 1]; horizon is {}",
                stream.horizon()
            ),
        });
    }
    Ok(())
}

/// Events regrouped by pair, preserving time order within each pair.
fn pair_groups(stream: &EventStream, include_self_loops: bool) -> Vec<(u32, u32, Vec<f64>)> {
    let mut tagged: Vec<(u32, u32, f64)> = stream
        .events()
        .iter()
        .filter(|e| include_self_loops || e.u != e.v)
        .map(|e| (e.u, e.v, e.t))
        .collect();
    tagged.sort_by_key(|a| (a.0, a.1));
    let mut groups: Vec<(u32, u32, Vec<f64>)> = Vec::new();
    for (u, v, t) in tagged {
        match groups.last_mut() {
            Some((gu, gv, times)) if *gu == u && *gv == v => times.push(t),
            _ => groups.push((u, v, vec![t])),
        }
    }
    groups
}

/// Computes the coefficient matrices of a normalized stream on a basis.
pub fn project(
    stream: &EventStream,
    basis: &BasisSet,
    options: ProjectOptions,
) -> Result<CoeffSet> {
    require_normalized(stream)?;
    let groups = pair_groups(stream, options.include_self_loops);
    let mut per_fn: Vec<Vec<CoeffEntry>> = vec![Vec::new(); basis.len()];

    if let Some(levels) = basis.haar_levels() {
        for (u, v, times) in &groups {
            // Scaling function: plain event count.
            let n = times.len() as f64;
            per_fn[0].push(CoeffEntry {
                u: *u,
                v: *v,
                coeff: n,
                sq: n,
            });
            for j in 0..levels {
                let amp = ((1u64 << j) as f64).sqrt();
                let sq_amp = amp * amp;
                // Times are sorted, so cells appear in nondecreasing order;
                // tally integer counts per half and flush on cell change.
                let mut cur: Option<(u32, i64, i64)> = None;
                for &t in times {
                    let k = dyadic_cell(j, t);
                    let left = is_left_half(j, k, t);
                    match cur.as_mut() {
                        Some((ck, plus, minus)) if *ck == k => {
                            if left {
                                *plus += 1;
                            } else {
                                *minus += 1;
                            }
                        }
                        _ => {
                            if let Some(done) = cur.take() {
                                flush_haar(&mut per_fn, levels, j, *u, *v, done, amp, sq_amp);
                            }
                            cur = Some((k, left as i64, !left as i64));
                        }
                    }
                }
                if let Some(done) = cur.take() {
                    flush_haar(&mut per_fn, levels, j, *u, *v, done, amp, sq_amp);
                }
            }
        }
    } else {
        for (u, v, times) in &groups {
            for (b, fn_entries) in per_fn.iter_mut().enumerate() {
                let mut sum = 0.0;
                let mut sum_sq = 0.0;
                let mut touched = false;
                let support = basis.function(b).support;
                for &t in times {
                    if t < support.start || t > support.end {
                        continue;
                    }
                    let val = basis.eval_raw(b, t);
                    sum += val;
                    sum_sq += val * val;
                    touched = true;
                }
                if touched {
                    fn_entries.push(CoeffEntry {
                        u: *u,
                        v: *v,
                        coeff: sum,
                        sq: sum_sq,
                    });
                }
            }
        }
    }

    Ok(CoeffSet {
        n_nodes: stream.n_nodes(),
        basis_hash: basis.descriptor_hash(),
        per_fn,
    })
}

fn is_left_half(level: u32, cell: u32, t: f64) -> bool {
    // Left half of I_{level,cell} is I_{level+1,2*cell}.
    dyadic_cell(level + 1, t) == 2 * cell
}

#[allow(clippy::too_many_arguments)]
fn flush_haar(
    per_fn: &mut [Vec<CoeffEntry>],
    _levels: u32,
    level: u32,
    u: u32,
    v: u32,
    (cell, plus, minus): (u32, i64, i64),
    amp: f64,
    sq_amp: f64,
) {
    let id = (1usize << level) + cell as usize;
    per_fn[id].push(CoeffEntry {
        u,
        v,
        coeff: (plus - minus) as f64 * amp,
        sq: (plus + minus) as f64 * sq_amp,
    });
}

/// Per-pair event counts on the dyadic grid `I_{level,k}`, `k = 0..2^level`.
#[derive(Debug, Clone)]
pub struct IntervalCounts {
    pub level: u32,
    /// Sorted by `(u, v)`; the inner vector has length `2^level`.
    pub counts: Vec<(u32, u32, Vec<u64>)>,
}

/// Bins each pair's events into the `2^level` dyadic cells.
pub fn interval_counts(
    stream: &EventStream,
    level: u32,
    options: ProjectOptions,
) -> Result<IntervalCounts> {
    require_normalized(stream)?;
    let cells = 1usize << level;
    let counts = pair_groups(stream, options.include_self_loops)
        .into_iter()
        .map(|(u, v, times)| {
            let mut bins = vec![0u64; cells];
            for t in times {
                bins[dyadic_cell(level, t) as usize] += 1;
            }
            (u, v, bins)
        })
        .collect();
    Ok(IntervalCounts { level, counts })
}

/// Serializable dump of a [`CoeffSet`] for caching: per-function triple
/// lists plus the basis descriptor hash they belong to.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffDump {
    pub n_nodes: usize,
    pub basis_hash: u64,
    /// Per function: `(u, v, coeff, sq)` tuples.
    pub entries: Vec<Vec<(u32, u32, f64, f64)>>,
}

impl CoeffSet {
    pub fn to_dump(&self) -> CoeffDump {
        CoeffDump {
            n_nodes: self.n_nodes,
            basis_hash: self.basis_hash,
            entries: self
                .per_fn
                .iter()
                .map(|v| v.iter().map(|e| (e.u, e.v, e.coeff, e.sq)).collect())
                .collect(),
        }
    }

    pub fn from_dump(dump: CoeffDump, basis: &BasisSet) -> Result<Self> {
        if dump.basis_hash != basis.descriptor_hash() {
            return Err(Error::Validation(
                "coefficient dump was computed with a different basis".into(),
            ));
        }
        if dump.entries.len() != basis.len() {
            return Err(Error::Shape(format!(
                "dump has {} functions, basis has {}",
                dump.entries.len(),
                basis.len()
            )));
        }
        Ok(CoeffSet {
            n_nodes: dump.n_nodes,
            basis_hash: dump.basis_hash,
            per_fn: dump
                .entries
                .into_iter()
                .map(|v| {
                    v.into_iter()
                        .map(|(u, vv, coeff, sq)| CoeffEntry {
                            u,
                            v: vv,
                            coeff,
                            sq,
                        })
                        .collect()
                })
                .collect(),
        })
    }
}
