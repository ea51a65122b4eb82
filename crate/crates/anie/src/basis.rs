//! Orthonormal function bases on the unit interval.
//!
//! The Haar wavelet family is the canonical instance: one scaling function
//! (the indicator of `[0, 1]`) plus detail functions `psi_{j,k}` for levels
//! `j = 0..J-1` and shifts `k = 0..2^j-1`, so a level-`J` set holds `B = 2^J`
//! functions. Arbitrary linearly independent families can be turned into an
//! orthonormal set through the Gram matrix (`G^{-1/2}` applied to the raw
//! function vector).
//!
//! Breakpoint convention: every Haar piece is left-closed/right-open, and the
//! global right endpoint `t = 1` belongs to the rightmost piece, so a point
//! on a dyadic breakpoint is counted by exactly one cell per level.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed subinterval of `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    HaarScaling,
    HaarDetail { level: u32, shift: u32 },
    Generic(usize),
}

/// One basis function: identity, family role and support.
#[derive(Debug, Clone)]
pub struct BasisFunction {
    pub id: usize,
    pub kind: BasisKind,
    pub support: Interval,
}

/// Raw (non-orthonormal) input function for [`orthonormalize`].
#[derive(Clone)]
pub enum RawFunction {
    /// Samples on a sorted grid covering `[0, 1]`, evaluated by linear
    /// interpolation.
    Sampled { grid: Vec<f64>, values: Vec<f64> },
    /// Black-box evaluator.
    Evaluator(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for RawFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RawFunction::Sampled { grid, .. } => {
                write!(f, "RawFunction::Sampled({} points)", grid.len())
            }
            RawFunction::Evaluator(_) => write!(f, "RawFunction::Evaluator"),
        }
    }
}

impl RawFunction {
    fn eval(&self, t: f64) -> f64 {
        match self {
            RawFunction::Evaluator(f) => f(t),
            RawFunction::Sampled { grid, values } => {
                if grid.is_empty() {
                    return 0.0;
                }
                match grid.binary_search_by(|g| g.partial_cmp(&t).unwrap()) {
                    Ok(i) => values[i],
                    Err(0) => values[0],
                    Err(i) if i == grid.len() => values[grid.len() - 1],
                    Err(i) => {
                        let (g0, g1) = (grid[i - 1], grid[i]);
                        let w = (t - g0) / (g1 - g0);
                        values[i - 1] * (1.0 - w) + values[i] * w
                    }
                }
            }
        }
    }
}

/// Orthonormalized generic family: output function `b` evaluates as
/// `sum_l transform[b, l] * raw_l(t)`.
#[derive(Debug, Clone)]
struct GenericFamily {
    transform: DMatrix<f64>,
    raw: Vec<RawFunction>,
}

/// Ordered set of orthonormal functions on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct BasisSet {
    functions: Vec<BasisFunction>,
    max_level: Option<u32>,
    generic: Option<GenericFamily>,
}

/// Serializable descriptor of a basis (the external JSON interface).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisDescriptor {
    Haar {
        #[serde(rename = "J")]
        levels: u32,
    },
    Custom {
        grid: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

/// Quadrature settings for generic-basis Gram computations.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    /// Composite midpoint panels over `[0, 1]`.
    pub panels: usize,
    /// Largest acceptable Gram condition number.
    pub max_condition: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            panels: 1 << 14,
            max_condition: 1e12,
        }
    }
}

/// Builds the Haar basis with `levels` detail levels (B = 2^levels).
pub fn haar_basis(levels: u32) -> BasisSet {
    let mut functions = Vec::with_capacity(1usize << levels);
    functions.push(BasisFunction {
        id: 0,
        kind: BasisKind::HaarScaling,
        support: Interval {
            start: 0.0,
            end: 1.0,
        },
    });
    for j in 0..levels {
        let cells = 1u32 << j;
        let width = 1.0 / cells as f64;
        for k in 0..cells {
            functions.push(BasisFunction {
                id: functions.len(),
                kind: BasisKind::HaarDetail { level: j, shift: k },
                support: Interval {
                    start: k as f64 * width,
                    end: (k + 1) as f64 * width,
                },
            });
        }
    }
    BasisSet {
        functions,
        max_level: Some(levels),
        generic: None,
    }
}

impl BasisSet {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.functions
    }

    pub fn function(&self, b: usize) -> &BasisFunction {
        &self.functions[b]
    }

    /// Detail levels of a Haar set; `None` for generic families.
    pub fn haar_levels(&self) -> Option<u32> {
        self.max_level
    }

    pub fn is_haar(&self) -> bool {
        self.max_level.is_some()
    }

    /// Index of `psi_{j,k}` within a Haar set.
    pub fn haar_detail_id(&self, level: u32, shift: u32) -> usize {
        debug_assert!(self.is_haar());
        (1usize << level) + shift as usize
    }

    /// Evaluates function `b` at `t in [0, 1]`.
    pub fn eval(&self, b: usize, t: f64) -> Result<f64> {
        check_domain(t)?;
        Ok(self.eval_raw(b, t))
    }

    /// Evaluates the square of function `b` at `t`; bit-identical to
    /// `eval(b, t)^2`.
    pub fn eval_squared(&self, b: usize, t: f64) -> Result<f64> {
        check_domain(t)?;
        let v = self.eval_raw(b, t);
        Ok(v * v)
    }

    pub(crate) fn eval_raw(&self, b: usize, t: f64) -> f64 {
        match self.functions[b].kind {
            BasisKind::HaarScaling => 1.0,
            BasisKind::HaarDetail { level, shift } => haar_detail_value(level, shift, t),
            BasisKind::Generic(row) => {
                let fam = self.generic.as_ref().expect("generic family present");
                let mut acc = 0.0;
                for (l, raw) in fam.raw.iter().enumerate() {
                    acc += fam.transform[(row, l)] * raw.eval(t);
                }
                acc
            }
        }
    }

    pub fn descriptor(&self) -> Option<BasisDescriptor> {
        self.max_level
            .map(|levels| BasisDescriptor::Haar { levels })
    }

    pub fn from_descriptor(desc: &BasisDescriptor) -> Result<BasisSet> {
        match desc {
            BasisDescriptor::Haar { levels } => {
                if *levels > 24 {
                    return Err(Error::Parameter(format!(
                        "haar level {levels} too large (max 24)"
                    )));
                }
                Ok(haar_basis(*levels))
            }
            BasisDescriptor::Custom { grid, values } => {
                let raw: Vec<RawFunction> = values
                    .iter()
                    .map(|vals| RawFunction::Sampled {
                        grid: grid.clone(),
                        values: vals.clone(),
                    })
                    .collect();
                orthonormalize(raw, QuadratureOptions::default())
            }
        }
    }

    /// FNV-1a hash of the descriptor, used to tie cached coefficient dumps to
    /// the basis they were computed with.
    pub fn descriptor_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &byte in bytes {
                h ^= byte as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        match self.max_level {
            Some(levels) => {
                eat(b"haar");
                eat(&levels.to_le_bytes());
            }
            None => {
                eat(b"generic");
                eat(&self.functions.len().to_le_bytes());
                if let Some(fam) = &self.generic {
                    for v in fam.transform.iter() {
                        eat(&v.to_le_bytes());
                    }
                }
            }
        }
        h
    }
}

fn check_domain(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain {
            arg: "t".into(),
            message: format!("{t} outside [0, 1]"),
        });
    }
    Ok(())
}

/// Value of `psi_{j,k}(t) = 2^{j/2} psi(2^j t - k)` under the half-open
/// breakpoint convention (t = 1 assigned to the rightmost piece).
fn haar_detail_value(level: u32, shift: u32, t: f64) -> f64 {
    let cells = 1u64 << level;
    let amp = (cells as f64).sqrt();
    if t == 1.0 {
        return if shift as u64 == cells - 1 { -amp } else { 0.0 };
    }
    let x = t * cells as f64 - shift as f64;
    if (0.0..0.5).contains(&x) {
        amp
    } else if (0.5..1.0).contains(&x) {
        -amp
    } else {
        0.0
    }
}

/// Index of the dyadic cell `I_{level,k}` containing `t`, with `t = 1`
/// assigned to the last cell.
pub fn dyadic_cell(level: u32, t: f64) -> u32 {
    let cells = 1u64 << level;
    let k = (t * cells as f64).floor() as u64;
    k.min(cells - 1) as u32
}

/// Composite midpoint quadrature of `f` over `[0, 1]`.
pub fn midpoint_quadrature(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
    let w = 1.0 / panels as f64;
    (0..panels).map(|i| f((i as f64 + 0.5) * w)).sum::<f64>() * w
}

/// Orthonormalizes a linearly independent family via its Gram matrix.
///
/// The output's function `b` is `t -> sum_l (G^{-1/2})_{b,l} raw_l(t)`, so the
/// output Gram matrix is the identity up to quadrature error.
pub fn orthonormalize(raw: Vec<RawFunction>, opts: QuadratureOptions) -> Result<BasisSet> {
    if raw.is_empty() {
        return Err(Error::Parameter("empty raw family".into()));
    }
    let n = raw.len();
    // One pass over the quadrature nodes, caching all function values.
    let w = 1.0 / opts.panels as f64;
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut vals = vec![0.0; n];
    for i in 0..opts.panels {
        let t = (i as f64 + 0.5) * w;
        for (l, r) in raw.iter().enumerate() {
            vals[l] = r.eval(t);
        }
        for a in 0..n {
            for b in a..n {
                gram[(a, b)] += vals[a] * vals[b] * w;
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }

    let eig = gram.clone().symmetric_eigen();
    let min_eig = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if min_eig <= 0.0 || max_eig / min_eig > opts.max_condition {
        return Err(Error::IllConditionedBasis {
            min_eigenvalue: min_eig,
        });
    }
    // G^{-1/2} = V diag(1/sqrt(lambda)) V^T
    let mut scaled = eig.eigenvectors.clone();
    for (c, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = 1.0 / lambda.sqrt();
        for r in 0..n {
            scaled[(r, c)] *= s;
        }
    }
    let transform = &scaled * eig.eigenvectors.transpose();

    let functions = (0..n)
        .map(|id| BasisFunction {
            id,
            kind: BasisKind::Generic(id),
            support: Interval {
                start: 0.0,
                end: 1.0,
            },
        })
        .collect();
    Ok(BasisSet {
        functions,
        max_level: None,
        generic: Some(GenericFamily { transform, raw }),
    })
}

/// Gram matrix `G_{kl} = integral of phi^k phi^l` of a basis set, by
/// quadrature. Mostly useful for verifying orthonormality.
pub fn gram_matrix(basis: &BasisSet, panels: usize) -> DMatrix<f64> {
    let n = basis.len();
    let w = 1.0 / panels as f64;
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut vals = vec![0.0; n];
    for i in 0..panels {
        let t = (i as f64 + 0.5) * w;
        for (b, slot) in vals.iter_mut().enumerate() {
            *slot = basis.eval_raw(b, t);
        }
        for a in 0..n {
            for b in a..n {
                gram[(a, b)] += vals[a] * vals[b] * w;
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    gram
}
