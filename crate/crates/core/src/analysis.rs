//! Minimum-determinant analysis of the code lattices.
//!
//! Full diversity, joint NVD and parallel NVD claims are certified (or
//! refuted) by searching bounded coefficient boxes. Lattice linearity means
//! codeword differences are again lattice points, so the search enumerates
//! nonzero coefficient vectors directly.
//!
//! Gram orientation: determinants are always taken in the smaller dimension
//! of a matrix (X^H X for tall, X X^H for wide). The product criterion for
//! parallel channels would be identically zero for wide blocks in the
//! alternative orientation, so the smaller-dimension convention is the one
//! the per-code determinant derivations actually use.

use crate::algebra::{CycloElement, GaussianInt};
use crate::codes::CodeDescriptor;
use crate::CMat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Normalised determinants below this count as zero when classifying
/// full diversity. Structured singular matrices land around 1e-12..1e-15
/// in floating point; this leaves three orders of magnitude of margin.
pub const ZERO_DET_THRESHOLD: f64 = 1e-9;

/// Hard cap on exhaustive search size before sampling must be enabled.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("box bound must be >= 1, got {0}")]
    InvalidBox(i64),
    #[error("search space {space} exceeds budget {budget} and sampling is not enabled")]
    BudgetExceeded { space: u128, budget: u64 },
    #[error("code '{0}' has no proper satellite/terrestrial row split")]
    ImproperSplit(String),
}

/// Search parameters for the determinant minimisation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Coefficient box half-width; coordinates range over -box..=box.
    pub box_bound: i64,
    /// Maximum number of evaluated vectors for the exhaustive path.
    pub budget: u64,
    /// When the space exceeds the budget, fall back to stratified random
    /// sampling instead of failing. The result is then an upper bound.
    pub allow_sampling: bool,
    /// Seed for the sampling fallback.
    pub sample_seed: u64,
    /// Restrict the search to vectors where every construction-level symbol
    /// slot (c_i, a, b, x_i, ...) is nonzero, e.g. the ab != 0 condition.
    pub nonzero_slots: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            box_bound: 1,
            budget: DEFAULT_BUDGET,
            allow_sampling: false,
            sample_seed: 0,
            nonzero_slots: false,
        }
    }
}

impl SearchConfig {
    pub fn with_box(box_bound: i64) -> Self {
        Self {
            box_bound,
            ..Self::default()
        }
    }
}

/// Minima of the parallel (per-site product) criterion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParallelReport {
    /// Minimum of det(Gram(X_S)) * det(Gram(X_T)) over nonzero vectors.
    pub min_product: f64,
    pub argmin: Vec<i64>,
    /// Same minimum restricted to vectors where neither block matrix is
    /// entirely zero, so a vanishing product cannot come from an empty block.
    pub min_product_nonzero_blocks: f64,
    pub argmin_nonzero_blocks: Vec<i64>,
}

/// Result of a determinant search over one code.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeterminantReport {
    pub code_name: String,
    pub box_bound: i64,
    /// False when the minima come from stratified sampling and are therefore
    /// only upper bounds.
    pub exhaustive: bool,
    pub evaluations: u64,
    pub nonzero_slots: bool,
    /// Minimum |det(Gram(X))| over nonzero vectors in the box.
    pub min_joint_det: f64,
    pub argmin_joint: Vec<i64>,
    pub parallel: Option<ParallelReport>,
    /// Joint minimum rescaled to the unit-energy code.
    pub normalized_min_det: f64,
    /// True when the normalised joint minimum clears [`ZERO_DET_THRESHOLD`].
    pub full_diversity: bool,
}

/// |det| of the Gram matrix of `x` taken in its smaller dimension.
pub fn gram_abs_det(x: &CMat) -> f64 {
    let (r, c) = x.shape();
    let rows: Vec<usize> = (0..r).collect();
    let mut scratch = vec![Complex64::new(0.0, 0.0); r.min(c) * r.min(c)];
    gram_abs_det_rows(x.as_slice(), r, c, &rows, &mut scratch)
}

/// Gram |det| of the sub-block formed by the given rows.
///
/// `flat` is the matrix in column-major order (nalgebra layout), shape r x c.
fn gram_abs_det_rows(
    flat: &[Complex64],
    r: usize,
    c: usize,
    rows: &[usize],
    scratch: &mut [Complex64],
) -> f64 {
    let nr = rows.len();
    let at = |row: usize, col: usize| flat[col * r + row];
    let d = nr.min(c);
    if nr <= c {
        // Wide block: X X^H over the selected rows.
        for a in 0..d {
            for b in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..c {
                    acc += at(rows[a], t) * at(rows[b], t).conj();
                }
                scratch[a * d + b] = acc;
            }
        }
    } else {
        // Tall block: X^H X restricted to the selected rows.
        for a in 0..d {
            for b in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for &row in rows {
                    acc += at(row, a).conj() * at(row, b);
                }
                scratch[a * d + b] = acc;
            }
        }
    }
    lu_abs_det(&mut scratch[..d * d], d)
}

/// |det| of a small complex matrix by in-place LU with partial pivoting.
fn lu_abs_det(m: &mut [Complex64], n: usize) -> f64 {
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let mut pivot = k;
        let mut best = m[k * n + k].norm_sqr();
        for r in (k + 1)..n {
            let v = m[r * n + k].norm_sqr();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if pivot != k {
            for c in 0..n {
                m.swap(k * n + c, pivot * n + c);
            }
        }
        let pk = m[k * n + k];
        det *= pk;
        for r in (k + 1)..n {
            let f = m[r * n + k] / pk;
            for c in (k + 1)..n {
                let sub = f * m[k * n + c];
                m[r * n + c] -= sub;
            }
        }
    }
    det.norm()
}

struct Evaluator<'a> {
    code: &'a CodeDescriptor,
    /// Dispersion matrices flattened column-major.
    basis: Vec<Vec<Complex64>>,
    all_rows: Vec<usize>,
    sat: Vec<usize>,
    ter: Vec<usize>,
    parallel: bool,
}

#[derive(Clone)]
struct Best {
    det: f64,
    g: Vec<i64>,
}

impl Best {
    fn new() -> Self {
        Best {
            det: f64::INFINITY,
            g: Vec::new(),
        }
    }

    fn offer(&mut self, det: f64, g: &[i64]) {
        if det < self.det || (det == self.det && (self.g.is_empty() || g < self.g.as_slice())) {
            self.det = det;
            self.g = g.to_vec();
        }
    }

    fn merge(&mut self, other: &Best) {
        if other.g.is_empty() {
            return;
        }
        self.offer(other.det, &other.g);
    }
}

#[derive(Clone)]
struct Acc {
    joint: Best,
    par: Best,
    par_restricted: Best,
    evaluations: u64,
}

impl Acc {
    fn new() -> Self {
        Acc {
            joint: Best::new(),
            par: Best::new(),
            par_restricted: Best::new(),
            evaluations: 0,
        }
    }

    fn merge(mut self, other: Acc) -> Acc {
        self.joint.merge(&other.joint);
        self.par.merge(&other.par);
        self.par_restricted.merge(&other.par_restricted);
        self.evaluations += other.evaluations;
        self
    }
}

impl<'a> Evaluator<'a> {
    fn new(code: &'a CodeDescriptor, parallel: bool) -> Self {
        let basis = code
            .dispersion
            .iter()
            .map(|b| b.as_slice().to_vec())
            .collect();
        Evaluator {
            code,
            basis,
            all_rows: (0..code.n_t).collect(),
            sat: code.sat_rows.clone(),
            ter: code.ter_rows(),
            parallel,
        }
    }

    fn slots_nonzero(&self, g: &[i64]) -> bool {
        self.code
            .symbol_slots
            .iter()
            .all(|range| g[range.clone()].iter().any(|&v| v != 0))
    }

    fn eval(&self, g: &[i64], x: &mut [Complex64], scratch: &mut [Complex64], acc: &mut Acc) {
        let (r, c) = (self.code.n_t, self.code.t);
        for v in x.iter_mut() {
            *v = Complex64::new(0.0, 0.0);
        }
        for (k, &gk) in g.iter().enumerate() {
            if gk != 0 {
                let f = gk as f64;
                for (xi, bi) in x.iter_mut().zip(&self.basis[k]) {
                    *xi += f * bi;
                }
            }
        }
        acc.evaluations += 1;
        let joint = gram_abs_det_rows(x, r, c, &self.all_rows, scratch);
        acc.joint.offer(joint, g);
        if self.parallel {
            let ds = gram_abs_det_rows(x, r, c, &self.sat, scratch);
            let dt = gram_abs_det_rows(x, r, c, &self.ter, scratch);
            let product = ds * dt;
            acc.par.offer(product, g);
            let sat_nonzero = self
                .sat
                .iter()
                .any(|&row| (0..c).any(|t| x[t * r + row].norm_sqr() > 1e-24));
            let ter_nonzero = self
                .ter
                .iter()
                .any(|&row| (0..c).any(|t| x[t * r + row].norm_sqr() > 1e-24));
            if sat_nonzero && ter_nonzero {
                acc.par_restricted.offer(product, g);
            }
        }
    }
}

fn decode_index(mut idx: u128, radix: u128, box_bound: i64, g: &mut [i64]) {
    for digit in g.iter_mut().rev() {
        *digit = (idx % radix) as i64 - box_bound;
        idx /= radix;
    }
}

/// Runs the full determinant search and builds the report.
///
/// The work is partitioned into fixed index chunks reduced by an associative
/// minimum with lexicographic tie-break, so the result does not depend on the
/// number of worker threads.
pub fn analyze_code(
    code: &CodeDescriptor,
    cfg: &SearchConfig,
) -> Result<DeterminantReport, AnalysisError> {
    if cfg.box_bound < 1 {
        return Err(AnalysisError::InvalidBox(cfg.box_bound));
    }
    let has_split = !code.sat_rows.is_empty() && code.sat_rows.len() < code.n_t;
    let radix = (2 * cfg.box_bound + 1) as u128;
    let space = radix.pow(code.k as u32);
    let exhaustive = space <= cfg.budget as u128;
    if !exhaustive && !cfg.allow_sampling {
        return Err(AnalysisError::BudgetExceeded {
            space,
            budget: cfg.budget,
        });
    }
    let evaluator = Evaluator::new(code, has_split);

    let acc = if exhaustive {
        let chunks: u128 = 256;
        let chunk_len = space.div_ceil(chunks);
        (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut acc = Acc::new();
                let mut g = vec![0i64; code.k];
                let mut x = vec![Complex64::new(0.0, 0.0); code.n_t * code.t];
                let mut scratch = vec![Complex64::new(0.0, 0.0); code.n_t * code.n_t];
                let start = chunk * chunk_len;
                let end = (start + chunk_len).min(space);
                for idx in start..end {
                    decode_index(idx, radix, cfg.box_bound, &mut g);
                    if g.iter().all(|&v| v == 0) {
                        continue;
                    }
                    if cfg.nonzero_slots && !evaluator.slots_nonzero(&g) {
                        continue;
                    }
                    evaluator.eval(&g, &mut x, &mut scratch, &mut acc);
                }
                acc
            })
            .reduce(Acc::new, Acc::merge)
    } else {
        // Stratified sampling: the budget is split evenly across the values
        // of the first coordinate, the remaining coordinates are uniform.
        let strata = radix as u64;
        let per_stratum = cfg.budget / strata;
        (0..strata)
            .into_par_iter()
            .map(|stratum| {
                let mut acc = Acc::new();
                let mut rng = ChaCha8Rng::seed_from_u64(
                    cfg.sample_seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(stratum + 1)),
                );
                let mut g = vec![0i64; code.k];
                let mut x = vec![Complex64::new(0.0, 0.0); code.n_t * code.t];
                let mut scratch = vec![Complex64::new(0.0, 0.0); code.n_t * code.n_t];
                for _ in 0..per_stratum {
                    g[0] = stratum as i64 - cfg.box_bound;
                    for digit in g.iter_mut().skip(1) {
                        *digit = rng.gen_range(-cfg.box_bound..=cfg.box_bound);
                    }
                    if g.iter().all(|&v| v == 0) {
                        continue;
                    }
                    if cfg.nonzero_slots && !evaluator.slots_nonzero(&g) {
                        continue;
                    }
                    evaluator.eval(&g, &mut x, &mut scratch, &mut acc);
                }
                acc
            })
            .reduce(Acc::new, Acc::merge)
    };

    let normalized = normalized_min_det_value(acc.joint.det, code);
    Ok(DeterminantReport {
        code_name: code.name.clone(),
        box_bound: cfg.box_bound,
        exhaustive,
        evaluations: acc.evaluations,
        nonzero_slots: cfg.nonzero_slots,
        min_joint_det: acc.joint.det,
        argmin_joint: acc.joint.g,
        parallel: has_split.then(|| ParallelReport {
            min_product: acc.par.det,
            argmin: acc.par.g,
            min_product_nonzero_blocks: acc.par_restricted.det,
            argmin_nonzero_blocks: acc.par_restricted.g,
        }),
        normalized_min_det: normalized,
        full_diversity: normalized >= ZERO_DET_THRESHOLD,
    })
}

/// Minimum |det(Gram(X))| over nonzero coefficient vectors in the box.
pub fn joint_min_det(
    code: &CodeDescriptor,
    cfg: &SearchConfig,
) -> Result<DeterminantReport, AnalysisError> {
    analyze_code(code, cfg)
}

/// Minimum of the satellite/terrestrial Gram determinant product.
pub fn parallel_min_product(
    code: &CodeDescriptor,
    cfg: &SearchConfig,
) -> Result<DeterminantReport, AnalysisError> {
    let report = analyze_code(code, cfg)?;
    if report.parallel.is_none() {
        return Err(AnalysisError::ImproperSplit(code.name.clone()));
    }
    Ok(report)
}

/// Rescales a raw-lattice minimum determinant to the unit-energy code:
/// scaling X by alpha multiplies a d-dimensional Gram determinant by
/// alpha^(2d).
pub fn normalized_min_det_value(min_det: f64, code: &CodeDescriptor) -> f64 {
    let d = code.n_t.min(code.t) as i32;
    min_det * code.energy_scale.powi(2 * d)
}

/// The unit-energy rescaling applied to a finished report's joint minimum.
pub fn normalized_min_det(report: &DeterminantReport, code: &CodeDescriptor) -> f64 {
    normalized_min_det_value(report.min_joint_det, code)
}

/// Closed-form det(X^H X) of the L3 code as a function of (a, b).
///
/// Cases:
///   b = 0:      |N(a)|^2 + |sigma(a)|^4
///   a = 0:      2 |b|^4
///   a,b != 0:   |b|^2 (|a|^2 + 3 |sigma(a)|^2 + 2 |b|^2) + |N(a)|^2 + |sigma(a)|^4
///
/// All three agree with the expansion of det(X^H X) =
/// |a|^2 |b|^2 + |N(a)|^2 + 3 |b|^2 |sigma(a)|^2 + |sigma(a)|^4 + 2 |b|^4
/// and are bounded below by 1, 2 and 3 respectively.
pub fn l3_closed_form(a: &CycloElement, b: GaussianInt) -> f64 {
    let b2 = b.norm_sqr() as f64;
    if a.is_zero() {
        return 2.0 * b2 * b2;
    }
    let a2 = a.embed().norm_sqr();
    let sa2 = a.sigma8().expect("l3 slot is over zeta_8").embed().norm_sqr();
    let n2 = a.norm8_to_qj().expect("l3 slot is over zeta_8").norm_sqr() as f64;
    if b.is_zero() {
        n2 + sa2 * sa2
    } else {
        b2 * (a2 + 3.0 * sa2 + 2.0 * b2) + n2 + sa2 * sa2
    }
}
