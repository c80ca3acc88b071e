//! Exact ML detection for any code descriptor.
//!
//! The complex block model Y = H_eff * (scale * X) + N is rewritten as a real
//! linear model y = G g + n over the integer coefficient vector g. Detection
//! is then a closest-lattice-point search: a brute-force enumerator serves as
//! the oracle and a depth-first sphere decoder with adaptive radius does the
//! same search efficiently. Soft output is max-log, computed from repeated
//! constrained sphere searches (one coordinate pinned per search).

use crate::codes::CodeDescriptor;
use crate::{CMat, RMat, RVec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("channel/code shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("alphabet must be nonempty for every coordinate")]
    EmptyAlphabet,
    #[error("search space {space} exceeds exhaustive budget {budget}")]
    BudgetExceeded { space: u128, budget: u64 },
}

/// Default cap on the exhaustive ML product-alphabet size.
pub const DEFAULT_ML_BUDGET: u64 = 1_000_000;

/// Real-valued equivalent of one received block.
#[derive(Debug, Clone)]
pub struct RealModel {
    /// (2 n_r T) x K real generator: column k is the real stacking of
    /// H_eff * B_k times the overall amplitude.
    pub g: RMat,
    /// Real stacking of the received block.
    pub y: RVec,
    /// Noise variance per complex dimension.
    pub noise_var: f64,
}

/// Builds the real model for one block.
///
/// `lattice_scale` is the overall amplitude applied to integer codewords
/// before transmission (code energy scale times constellation scale). For
/// every coefficient vector g, ||y - G g||^2 equals the Frobenius distance
/// ||Y - H_eff * scale * encode(g)||^2.
pub fn build_real_model(
    code: &CodeDescriptor,
    h_eff: &CMat,
    y: &CMat,
    lattice_scale: f64,
    noise_var: f64,
) -> Result<RealModel, DetectError> {
    let n_r = h_eff.nrows();
    if h_eff.ncols() != code.n_t {
        return Err(DetectError::ShapeMismatch(format!(
            "H has {} columns, code has {} antennas",
            h_eff.ncols(),
            code.n_t
        )));
    }
    if y.nrows() != n_r || y.ncols() != code.t {
        return Err(DetectError::ShapeMismatch(format!(
            "Y is {}x{}, expected {}x{}",
            y.nrows(),
            y.ncols(),
            n_r,
            code.t
        )));
    }
    let m = n_r * code.t;
    let mut g = RMat::zeros(2 * m, code.k);
    for (k, b) in code.dispersion.iter().enumerate() {
        let hb = h_eff * b * num_complex::Complex64::new(lattice_scale, 0.0);
        for (idx, v) in hb.iter().enumerate() {
            g[(idx, k)] = v.re;
            g[(m + idx, k)] = v.im;
        }
    }
    let mut yv = RVec::zeros(2 * m);
    for (idx, v) in y.iter().enumerate() {
        yv[idx] = v.re;
        yv[m + idx] = v.im;
    }
    Ok(RealModel {
        g,
        y: yv,
        noise_var,
    })
}

/// ||y - G g||^2 evaluated directly.
pub fn residual_metric(model: &RealModel, g: &[i64]) -> f64 {
    let mut acc = 0.0;
    for row in 0..model.g.nrows() {
        let mut v = model.y[row];
        for (k, &gk) in g.iter().enumerate() {
            v -= model.g[(row, k)] * gk as f64;
        }
        acc += v * v;
    }
    acc
}

/// Exhaustive ML search over the product alphabet; the oracle detector.
///
/// Ties in the metric break toward the lexicographically smallest vector.
pub fn ml_exhaustive(
    model: &RealModel,
    alphabet: &[Vec<i64>],
    budget: u64,
) -> Result<Vec<i64>, DetectError> {
    let k = model.g.ncols();
    if alphabet.len() != k || alphabet.iter().any(|a| a.is_empty()) {
        return Err(DetectError::EmptyAlphabet);
    }
    let space: u128 = alphabet.iter().map(|a| a.len() as u128).product();
    if space > budget as u128 {
        return Err(DetectError::BudgetExceeded {
            space,
            budget,
        });
    }
    let mut counters = vec![0usize; k];
    let mut best_metric = f64::INFINITY;
    let mut best: Vec<i64> = Vec::new();
    let mut g = vec![0i64; k];
    loop {
        for (i, &c) in counters.iter().enumerate() {
            g[i] = alphabet[i][c];
        }
        let metric = residual_metric(model, &g);
        if metric < best_metric || (metric == best_metric && (best.is_empty() || g < best)) {
            best_metric = metric;
            best = g.clone();
        }
        // Mixed-radix increment.
        let mut pos = k;
        loop {
            if pos == 0 {
                return Ok(best);
            }
            pos -= 1;
            counters[pos] += 1;
            if counters[pos] < alphabet[pos].len() {
                break;
            }
            counters[pos] = 0;
        }
    }
}

/// Per-search diagnostics from the sphere decoder.
#[derive(Debug, Clone, Copy, Default)]
pub struct SphereTrace {
    /// Tree nodes expanded.
    pub nodes: u64,
    /// Times the search radius tightened.
    pub radius_updates: u64,
    /// True when the generator was rank deficient and the search ran on a
    /// Tikhonov-regularised model instead.
    pub regularized: bool,
}

/// QR-preprocessed sphere decoder for one real model.
///
/// The decomposition is done once; each `decode` call is an independent
/// depth-first search with adaptive radius and per-level candidate ordering
/// by distance from the unconstrained center.
pub struct SphereDecoder {
    /// K x K upper-triangular factor with positive diagonal.
    r: RMat,
    /// Q^T y.
    qty: RVec,
    k: usize,
    regularized: bool,
}

impl SphereDecoder {
    pub fn new(model: &RealModel) -> Result<Self, DetectError> {
        let (m, k) = model.g.shape();
        if m >= k {
            if let Some(dec) = Self::try_qr(&model.g, &model.y, k) {
                return Ok(dec);
            }
        }
        // Rank-deficient generator: append a small ridge so every coordinate
        // becomes observable, and flag the result.
        let scale = model.g.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let ridge = 1e-6 * scale.max(1e-12);
        let mut g_aug = RMat::zeros(m + k, k);
        g_aug.view_mut((0, 0), (m, k)).copy_from(&model.g);
        for i in 0..k {
            g_aug[(m + i, i)] = ridge;
        }
        let mut y_aug = RVec::zeros(m + k);
        y_aug.view_mut((0, 0), (m, 1)).copy_from(&model.y);
        let mut dec = Self::try_qr(&g_aug, &y_aug, k)
            .expect("ridge-augmented generator has full column rank");
        dec.regularized = true;
        Ok(dec)
    }

    fn try_qr(g: &RMat, y: &RVec, k: usize) -> Option<SphereDecoder> {
        let qr = g.clone().qr();
        let mut r = qr.r();
        let q = qr.q();
        let mut qty = q.transpose() * y;
        // Normalise the diagonal to positive; detect rank deficiency.
        let scale = (0..k).fold(0.0f64, |a, i| a.max(r[(i, i)].abs()));
        for i in 0..k {
            if r[(i, i)].abs() <= 1e-10 * scale.max(1e-300) {
                return None;
            }
            if r[(i, i)] < 0.0 {
                for c in 0..k {
                    r[(i, c)] = -r[(i, c)];
                }
                qty[i] = -qty[i];
            }
        }
        Some(SphereDecoder {
            r,
            qty,
            k,
            regularized: false,
        })
    }

    pub fn regularized(&self) -> bool {
        self.regularized
    }

    /// Unconstrained ML search.
    pub fn decode(&self, alphabet: &[Vec<i64>], trace: &mut SphereTrace) -> Vec<i64> {
        self.search(alphabet, None, None, trace)
            .expect("unconstrained search always finds a leaf at infinite radius")
            .0
    }

    /// ML search with an optional initial squared radius. Returns the best
    /// vector and its squared distance in the QR domain (up to the constant
    /// residual term), or None when no leaf lies within the given radius.
    pub fn decode_with_radius(
        &self,
        alphabet: &[Vec<i64>],
        initial_radius_sq: Option<f64>,
        trace: &mut SphereTrace,
    ) -> Option<(Vec<i64>, f64)> {
        match self.search(alphabet, None, initial_radius_sq, trace) {
            Some(hit) => Some(hit),
            // An undersized radius must not change the answer: rerun open.
            None => self.search(alphabet, None, None, trace),
        }
    }

    /// Minimum squared distance over vectors with coordinate `coord` pinned
    /// to `value` (used by the max-log demapper).
    pub fn constrained_min(
        &self,
        alphabet: &[Vec<i64>],
        coord: usize,
        value: i64,
        trace: &mut SphereTrace,
    ) -> f64 {
        self.search(alphabet, Some((coord, value)), None, trace)
            .expect("constrained search always finds a leaf at infinite radius")
            .1
    }

    fn search(
        &self,
        alphabet: &[Vec<i64>],
        pin: Option<(usize, i64)>,
        initial_radius_sq: Option<f64>,
        trace: &mut SphereTrace,
    ) -> Option<(Vec<i64>, f64)> {
        let k = self.k;
        let mut best_metric = initial_radius_sq.unwrap_or(f64::INFINITY);
        let mut best: Option<Vec<i64>> = None;
        let mut g = vec![0i64; k];
        // cand[level] holds (distance-ordered) candidate values; idx the cursor.
        let mut cand: Vec<Vec<(f64, i64)>> = vec![Vec::new(); k];
        let mut idx = vec![0usize; k];
        let mut partial = vec![0.0f64; k + 1]; // partial[l] = distance above level l
        let mut level = k; // levels run k-1 (top) down to 0

        // Descend into the top level.
        let mut descend = true;
        loop {
            if descend {
                level -= 1;
                let center_num = self.partial_residual(&g, level);
                let rii = self.r[(level, level)];
                let list = &mut cand[level];
                list.clear();
                match pin {
                    Some((c, v)) if c == level => {
                        let d = center_num - rii * v as f64;
                        list.push((d * d, v));
                    }
                    _ => {
                        for &v in &alphabet[level] {
                            let d = center_num - rii * v as f64;
                            list.push((d * d, v));
                        }
                        // Schnorr-Euchner order: nearest first, ties by value.
                        list.sort_by(|a, b| {
                            a.0.partial_cmp(&b.0)
                                .unwrap()
                                .then_with(|| a.1.cmp(&b.1))
                        });
                    }
                }
                idx[level] = 0;
            }
            // Try candidates at this level.
            let mut moved_down = false;
            while idx[level] < cand[level].len() {
                let (step, v) = cand[level][idx[level]];
                idx[level] += 1;
                let d = partial[level + 1] + step;
                trace.nodes += 1;
                if d >= best_metric {
                    // Candidates are distance-ordered: nothing better remains here.
                    idx[level] = cand[level].len();
                    break;
                }
                g[level] = v;
                if level == 0 {
                    // Leaf: tie-break toward the lexicographically smaller vector.
                    let better = d < best_metric
                        || (d == best_metric
                            && best.as_ref().is_none_or(|b| g.as_slice() < b.as_slice()));
                    if better {
                        if d < best_metric {
                            trace.radius_updates += 1;
                        }
                        best_metric = d;
                        best = Some(g.clone());
                    }
                } else {
                    partial[level] = d;
                    moved_down = true;
                    break;
                }
            }
            if moved_down {
                descend = true;
                continue;
            }
            // Exhausted this level: backtrack.
            level += 1;
            descend = false;
            if level == k {
                return best.map(|b| (b, best_metric));
            }
        }
    }

    /// qty[level] minus the contribution of already-fixed upper coordinates.
    fn partial_residual(&self, g: &[i64], level: usize) -> f64 {
        let mut v = self.qty[level];
        for l in (level + 1)..self.k {
            v -= self.r[(level, l)] * g[l] as f64;
        }
        v
    }
}

/// Convenience wrapper: sphere-decode one model.
pub fn sphere_decode(
    model: &RealModel,
    alphabet: &[Vec<i64>],
    trace: &mut SphereTrace,
) -> Result<Vec<i64>, DetectError> {
    let k = model.g.ncols();
    if alphabet.len() != k || alphabet.iter().any(|a| a.is_empty()) {
        return Err(DetectError::EmptyAlphabet);
    }
    let dec = SphereDecoder::new(model)?;
    let mut t = SphereTrace {
        regularized: dec.regularized(),
        ..SphereTrace::default()
    };
    let out = dec.decode(alphabet, &mut t);
    *trace = t;
    Ok(out)
}

/// LLRs are clipped to this magnitude.
pub const LLR_CLIP: f64 = 25.0;

/// Max-log soft demapping of one block.
///
/// Every lattice coordinate carries `bits_per_axis` Gray-labelled bits (its
/// PAM level). The returned vector is coordinate-major: entry
/// k * bits_per_axis + p is the LLR of bit p (MSB first) of coordinate k.
/// Positive LLR favours bit 0. For each bit the two hypothesis minima come
/// from constrained sphere searches; the unconstrained optimum seeds the
/// minima table for free.
pub fn soft_llr(
    model: &RealModel,
    levels: &[i64],
    bits_per_axis: usize,
    bit_of_level: impl Fn(i64, usize) -> u8,
    trace: &mut SphereTrace,
) -> Result<Vec<f64>, DetectError> {
    let k = model.g.ncols();
    if levels.is_empty() {
        return Err(DetectError::EmptyAlphabet);
    }
    let dec = SphereDecoder::new(model)?;
    let mut t = SphereTrace {
        regularized: dec.regularized(),
        ..SphereTrace::default()
    };
    let alphabet: Vec<Vec<i64>> = vec![levels.to_vec(); k];
    let (g_hat, d_opt) = dec
        .decode_with_radius(&alphabet, None, &mut t)
        .expect("open-radius search yields a vector");
    // min_table[k][level index] = min distance^2 with coordinate k at level.
    let nl = levels.len();
    let mut min_table = vec![f64::INFINITY; k * nl];
    for coord in 0..k {
        for (li, &v) in levels.iter().enumerate() {
            min_table[coord * nl + li] = if g_hat[coord] == v {
                d_opt
            } else {
                dec.constrained_min(&alphabet, coord, v, &mut t)
            };
        }
    }
    let nv = model.noise_var.max(1e-300);
    let mut llrs = Vec::with_capacity(k * bits_per_axis);
    for coord in 0..k {
        for p in 0..bits_per_axis {
            let mut min0 = f64::INFINITY;
            let mut min1 = f64::INFINITY;
            for (li, &v) in levels.iter().enumerate() {
                let d = min_table[coord * nl + li];
                if bit_of_level(v, p) == 0 {
                    min0 = min0.min(d);
                } else {
                    min1 = min1.min(d);
                }
            }
            let llr = (min1 - min0) / nv;
            llrs.push(llr.clamp(-LLR_CLIP, LLR_CLIP));
        }
    }
    *trace = t;
    Ok(llrs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Constellation, ConstellationName};
    use crate::channel::{draw_noise, draw_rayleigh};
    use crate::codes::{make_code, CodeName};
    use num_complex::Complex64;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn qpsk_alphabet(k: usize) -> Vec<Vec<i64>> {
        vec![vec![-1, 1]; k]
    }

    fn random_g(levels: &[i64], k: usize, rng: &mut StdRng) -> Vec<i64> {
        (0..k).map(|_| levels[rng.gen_range(0..levels.len())]).collect()
    }

    /// Builds a model for a random channel instance of the given code.
    fn random_instance(
        code: &CodeDescriptor,
        levels: &[i64],
        noise_var: f64,
        n_r: usize,
        rng: &mut StdRng,
    ) -> (RealModel, Vec<i64>) {
        let h = draw_rayleigh(n_r, code.n_t, rng);
        let g = random_g(levels, code.k, rng);
        let x = code.encode(&g).unwrap();
        let scale = code.energy_scale;
        let y = &h * &x * Complex64::new(scale, 0.0)
            + draw_noise(n_r, code.t, noise_var, rng);
        let model = build_real_model(code, &h, &y, scale, noise_var).unwrap();
        (model, g)
    }

    #[test]
    fn real_model_zero_channel() {
        let code = make_code(CodeName::Alamouti);
        let h = CMat::zeros(2, 2);
        let y = CMat::zeros(2, 2);
        let model = build_real_model(&code, &h, &y, 1.0, 0.1).unwrap();
        assert!(model.g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn real_model_shape_mismatch() {
        let code = make_code(CodeName::Alamouti);
        let h = CMat::zeros(2, 3);
        let y = CMat::zeros(2, 2);
        assert!(build_real_model(&code, &h, &y, 1.0, 0.1).is_err());
    }

    #[test]
    fn alamouti_identity_channel_gives_orthogonal_generator() {
        let code = make_code(CodeName::Alamouti);
        let h = CMat::identity(2, 2);
        let y = CMat::zeros(2, 2);
        let model = build_real_model(&code, &h, &y, 1.0, 0.1).unwrap();
        let gram = model.g.transpose() * &model.g;
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 2.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn real_model_norm_equality() {
        // ||y - G g||^2 must equal the complex Frobenius distance.
        let mut rng = StdRng::seed_from_u64(61);
        for name in [CodeName::Alamouti, CodeName::L3, CodeName::L2] {
            let code = make_code(name);
            let scale = 0.83 * code.energy_scale;
            let h = draw_rayleigh(2, code.n_t, &mut rng);
            let y = draw_noise(2, code.t, 1.0, &mut rng);
            let model = build_real_model(&code, &h, &y, scale, 0.1).unwrap();
            for _ in 0..100 {
                let g: Vec<i64> = (0..code.k).map(|_| rng.gen_range(-3i64..=3)).collect();
                let x = code.encode(&g).unwrap();
                let diff = &y - &h * &x * Complex64::new(scale, 0.0);
                let complex_norm = diff.norm_squared();
                let real_norm = residual_metric(&model, &g);
                assert!(
                    (complex_norm - real_norm).abs() / complex_norm.max(1e-12) < 1e-10,
                    "{name}: {complex_norm} vs {real_norm}"
                );
            }
        }
    }

    #[test]
    fn ml_exhaustive_recovers_noiseless() {
        let mut rng = StdRng::seed_from_u64(62);
        let code = make_code(CodeName::Alamouti);
        for _ in 0..50 {
            let (model, g) = random_instance(&code, &[-1, 1], 1e-30, 2, &mut rng);
            assert_eq!(ml_exhaustive(&model, &qpsk_alphabet(4), 1 << 20).unwrap(), g);
        }
    }

    #[test]
    fn ml_exhaustive_singleton_alphabet() {
        let mut rng = StdRng::seed_from_u64(63);
        let code = make_code(CodeName::Alamouti);
        let (model, _) = random_instance(&code, &[-1, 1], 0.5, 2, &mut rng);
        let alphabet: Vec<Vec<i64>> = vec![vec![1], vec![-1], vec![1], vec![1]];
        assert_eq!(
            ml_exhaustive(&model, &alphabet, 1 << 20).unwrap(),
            vec![1, -1, 1, 1]
        );
    }

    #[test]
    fn ml_exhaustive_budget() {
        let mut rng = StdRng::seed_from_u64(64);
        let code = make_code(CodeName::Alamouti);
        let (model, _) = random_instance(&code, &[-1, 1], 0.5, 2, &mut rng);
        assert!(matches!(
            ml_exhaustive(&model, &qpsk_alphabet(4), 4),
            Err(DetectError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn ml_matches_reference_brute_force() {
        // Independent re-implementation: plain nested loop over QPSK coords.
        let mut rng = StdRng::seed_from_u64(65);
        let code = make_code(CodeName::Alamouti);
        for _ in 0..1000 {
            let (model, _) = random_instance(&code, &[-1, 1], 0.8, 2, &mut rng);
            let fast = ml_exhaustive(&model, &qpsk_alphabet(4), 1 << 20).unwrap();
            let mut best = vec![0i64; 4];
            let mut best_metric = f64::INFINITY;
            for a in [-1i64, 1] {
                for b in [-1i64, 1] {
                    for c in [-1i64, 1] {
                        for d in [-1i64, 1] {
                            let g = vec![a, b, c, d];
                            let m = residual_metric(&model, &g);
                            if m < best_metric {
                                best_metric = m;
                                best = g;
                            }
                        }
                    }
                }
            }
            assert_eq!(fast, best);
        }
    }

    #[test]
    fn sphere_agrees_with_exhaustive_alamouti_qpsk() {
        let mut rng = StdRng::seed_from_u64(66);
        let code = make_code(CodeName::Alamouti);
        for _ in 0..1000 {
            let (model, _) = random_instance(&code, &[-1, 1], 0.7, 2, &mut rng);
            let mut trace = SphereTrace::default();
            let sd = sphere_decode(&model, &qpsk_alphabet(4), &mut trace).unwrap();
            let ml = ml_exhaustive(&model, &qpsk_alphabet(4), 1 << 20).unwrap();
            assert_eq!(sd, ml);
            assert!(trace.nodes > 0);
        }
    }

    #[test]
    fn sphere_agrees_with_exhaustive_l2_qpsk() {
        let mut rng = StdRng::seed_from_u64(67);
        let code = make_code(CodeName::L2);
        let alphabet = qpsk_alphabet(8);
        for _ in 0..300 {
            let (model, _) = random_instance(&code, &[-1, 1], 0.7, 2, &mut rng);
            let mut trace = SphereTrace::default();
            let sd = sphere_decode(&model, &alphabet, &mut trace).unwrap();
            let ml = ml_exhaustive(&model, &alphabet, 1 << 20).unwrap();
            assert_eq!(sd, ml);
        }
    }

    #[test]
    fn sphere_agrees_with_exhaustive_l3_16qam() {
        let mut rng = StdRng::seed_from_u64(68);
        let code = make_code(CodeName::L3);
        let levels = vec![-3i64, -1, 1, 3];
        let alphabet: Vec<Vec<i64>> = vec![levels.clone(); 6];
        for _ in 0..300 {
            let (model, _) = random_instance(&code, &levels, 0.5, 2, &mut rng);
            let mut trace = SphereTrace::default();
            let sd = sphere_decode(&model, &alphabet, &mut trace).unwrap();
            let ml = ml_exhaustive(&model, &alphabet, 1 << 20).unwrap();
            assert_eq!(sd, ml);
        }
    }

    #[test]
    fn sphere_zero_noise_any_snr_scale() {
        let mut rng = StdRng::seed_from_u64(69);
        let code = make_code(CodeName::L3);
        let levels = vec![-3i64, -1, 1, 3];
        for scale in [1e-3, 1.0, 1e3] {
            let h = draw_rayleigh(2, 3, &mut rng) * Complex64::new(scale, 0.0);
            let g = random_g(&levels, 6, &mut rng);
            let x = code.encode(&g).unwrap();
            let y = &h * &x;
            let model = build_real_model(&code, &h, &y, 1.0, 1e-12).unwrap();
            let mut trace = SphereTrace::default();
            let alphabet: Vec<Vec<i64>> = vec![levels.clone(); 6];
            assert_eq!(sphere_decode(&model, &alphabet, &mut trace).unwrap(), g);
        }
    }

    #[test]
    fn sphere_invariant_to_initial_radius() {
        let mut rng = StdRng::seed_from_u64(70);
        let code = make_code(CodeName::Alamouti);
        let alphabet = qpsk_alphabet(4);
        for _ in 0..200 {
            let (model, _) = random_instance(&code, &[-1, 1], 0.7, 2, &mut rng);
            let dec = SphereDecoder::new(&model).unwrap();
            let mut t1 = SphereTrace::default();
            let mut t2 = SphereTrace::default();
            let mut t3 = SphereTrace::default();
            let open = dec.decode_with_radius(&alphabet, None, &mut t1).unwrap();
            let tight = dec
                .decode_with_radius(&alphabet, Some(open.1 * 1.0001), &mut t2)
                .unwrap();
            // A radius so small no leaf fits: the decoder must recover.
            let tiny = dec.decode_with_radius(&alphabet, Some(1e-30), &mut t3).unwrap();
            assert_eq!(open.0, tight.0);
            assert_eq!(open.0, tiny.0);
        }
    }

    #[test]
    fn ml_invariant_under_scaling_and_rotation() {
        let mut rng = StdRng::seed_from_u64(71);
        let code = make_code(CodeName::Alamouti);
        let alphabet = qpsk_alphabet(4);
        for _ in 0..100 {
            let (model, _) = random_instance(&code, &[-1, 1], 0.7, 2, &mut rng);
            let base = ml_exhaustive(&model, &alphabet, 1 << 20).unwrap();
            // Global positive scaling of (y, G).
            let scaled = RealModel {
                g: &model.g * 3.7,
                y: &model.y * 3.7,
                noise_var: model.noise_var,
            };
            assert_eq!(ml_exhaustive(&scaled, &alphabet, 1 << 20).unwrap(), base);
            // Common orthogonal rotation of the rows.
            let m = model.g.nrows();
            let rand_mat = RMat::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
            let q = rand_mat.qr().q();
            let rotated = RealModel {
                g: &q * &model.g,
                y: &q * &model.y,
                noise_var: model.noise_var,
            };
            assert_eq!(ml_exhaustive(&rotated, &alphabet, 1 << 20).unwrap(), base);
        }
    }

    #[test]
    fn rank_deficient_model_falls_back_to_regularised_search() {
        // One receive antenna and the K=16 code: 8 real observations for 16
        // coordinates.
        let code = make_code(CodeName::C1Mido);
        let mut rng = StdRng::seed_from_u64(72);
        let h = draw_rayleigh(1, 4, &mut rng);
        let g = random_g(&[-1, 1], 16, &mut rng);
        let x = code.encode(&g).unwrap();
        let y = &h * &x;
        let model = build_real_model(&code, &h, &y, 1.0, 0.1).unwrap();
        let mut trace = SphereTrace::default();
        let out = sphere_decode(&model, &qpsk_alphabet(16), &mut trace).unwrap();
        assert!(trace.regularized);
        assert_eq!(out.len(), 16);
    }

    #[test]
    fn soft_llr_two_point_closed_form() {
        // Single coordinate, G = [1], BPSK levels +-a: max-log LLR = 4 a y / N0.
        let a = 2.0_f64;
        let yv = 0.63_f64;
        let nv = 0.41_f64;
        let mut g = RMat::zeros(1, 1);
        g[(0, 0)] = a / 1.0;
        let model = RealModel {
            g: RMat::from_row_slice(1, 1, &[a]),
            y: RVec::from_row_slice(&[yv]),
            noise_var: nv,
        };
        drop(g);
        let mut trace = SphereTrace::default();
        let llrs = soft_llr(&model, &[-1, 1], 1, |v, _| u8::from(v < 0), &mut trace).unwrap();
        // d(+a) = (y - a)^2, d(-a) = (y + a)^2; +a carries bit 0.
        let expect = (((yv + a) * (yv + a)) - ((yv - a) * (yv - a))) / nv;
        assert!((llrs[0] - expect.clamp(-LLR_CLIP, LLR_CLIP)).abs() < 1e-12);
        assert!((expect - 4.0 * a * yv / nv).abs() < 1e-12);
    }

    #[test]
    fn soft_llr_zero_noise_reproduces_bits() {
        let mut rng = StdRng::seed_from_u64(73);
        let cons = Constellation::new(ConstellationName::Qam16);
        let levels = cons.axis_levels();
        let code = make_code(CodeName::L3);
        for _ in 0..100 {
            let (model, g) = random_instance(&code, &levels, 1e-28, 2, &mut rng);
            let mut trace = SphereTrace::default();
            let llrs = soft_llr(
                &model,
                &levels,
                cons.bits_per_axis(),
                |v, p| {
                    ((cons.axis_bits_of_level(v) >> (cons.bits_per_axis() - 1 - p)) & 1) as u8
                },
                &mut trace,
            )
            .unwrap();
            for (coord, &gv) in g.iter().enumerate() {
                for p in 0..cons.bits_per_axis() {
                    let bit =
                        (cons.axis_bits_of_level(gv) >> (cons.bits_per_axis() - 1 - p)) & 1;
                    let llr = llrs[coord * cons.bits_per_axis() + p];
                    if bit == 0 {
                        assert!(llr > 0.0, "coord {coord} bit {p}: llr {llr}");
                    } else {
                        assert!(llr < 0.0, "coord {coord} bit {p}: llr {llr}");
                    }
                }
            }
        }
    }

    #[test]
    fn soft_llr_vanishes_at_infinite_noise() {
        let mut rng = StdRng::seed_from_u64(74);
        let code = make_code(CodeName::Alamouti);
        let (mut model, _) = random_instance(&code, &[-1, 1], 1.0, 2, &mut rng);
        model.noise_var = 1e12;
        let mut trace = SphereTrace::default();
        let llrs = soft_llr(&model, &[-1, 1], 1, |v, _| u8::from(v < 0), &mut trace).unwrap();
        for llr in llrs {
            assert!(llr.abs() < 1e-3, "llr {llr}");
        }
    }

    #[test]
    fn detection_error_rate_sanity_at_30db() {
        // Uncoded alamouti/QPSK over Rayleigh at 30 dB receive SNR:
        // vector error rate well under 1e-4 across 100k trials.
        let mut rng = StdRng::seed_from_u64(75);
        let code = make_code(CodeName::Alamouti);
        let cons = Constellation::new(ConstellationName::Qpsk);
        let snr = 10f64.powf(3.0);
        // Unit transmit energy per channel use; noise accordingly.
        let noise_var = 1.0 / snr;
        let amp = code.energy_scale * cons.energy_scale();
        let alphabet = qpsk_alphabet(4);
        let mut errors = 0u64;
        let trials = 100_000;
        for _ in 0..trials {
            let h = draw_rayleigh(2, 2, &mut rng);
            let g = random_g(&[-1, 1], 4, &mut rng);
            let x = code.encode(&g).unwrap();
            let y = &h * &x * Complex64::new(amp, 0.0) + draw_noise(2, 2, noise_var, &mut rng);
            let model = build_real_model(&code, &h, &y, amp, noise_var).unwrap();
            let mut trace = SphereTrace::default();
            let out = sphere_decode(&model, &alphabet, &mut trace).unwrap();
            if out != g {
                errors += 1;
            }
        }
        let rate = errors as f64 / trials as f64;
        assert!(rate < 1e-4, "vector error rate {rate}");
    }
}
