//! Monte Carlo harness: BER curves, required-Eb/N0 search at a target BER,
//! and beta sweeps, with full reproducibility.
//!
//! Every frame draws its randomness from a counter-based stream derived by
//! hashing (seed, link config, channel, beta, Eb/N0, frame index). Frames are
//! simulated in fixed-size batches whose integer error counters are summed
//! associatively, so results are bit-identical regardless of worker count or
//! scheduling, and stopping decisions fall on fixed batch boundaries.

use crate::channel::ChannelKind;
use crate::link::{run_link_once, LinkConfig, LinkError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("experiment spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Link(#[from] LinkError),
}

/// Frames simulated between stopping checks; results are aggregated per
/// whole batch so the frame count at stop is scheduling-independent.
pub const FRAME_BATCH: u64 = 32;

/// One Monte Carlo experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub link: LinkConfig,
    pub channel_kind: ChannelKind,
    /// Eb/N0 evaluation grid in dB, ascending.
    pub ebn0_grid: Vec<f64>,
    /// Power imbalance values in dB.
    pub beta_grid: Vec<f64>,
    /// Target bit error rate for required-Eb/N0 searches.
    pub target_ber: f64,
    /// A BER point needs this many bit errors to count as uncensored.
    pub min_errors: u64,
    /// Frame cap per BER point.
    pub max_frames: u64,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        self.link.validate().map_err(SimError::Link)?;
        if self.ebn0_grid.is_empty() || self.beta_grid.is_empty() {
            return Err(SimError::Spec("grids must be nonempty".into()));
        }
        if self.ebn0_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::Spec("ebn0_grid must be strictly ascending".into()));
        }
        if self.min_errors < 100 {
            return Err(SimError::Spec(format!(
                "min_errors must be at least 100, got {}",
                self.min_errors
            )));
        }
        if !(self.target_ber > 0.0 && self.target_ber < 0.5) {
            return Err(SimError::Spec(format!(
                "target_ber must lie in (0, 0.5), got {}",
                self.target_ber
            )));
        }
        if self.max_frames == 0 {
            return Err(SimError::Spec("max_frames must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding; embedded in output files.
    pub fn sha256_hex(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serialises");
        hex_digest(json.as_bytes())
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Execution options that must never change results, only speed.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; None uses the global pool.
    pub workers: Option<usize>,
}

impl RunOptions {
    /// Honours the STSIM_WORKERS environment variable.
    pub fn from_env() -> Self {
        let workers = std::env::var("STSIM_WORKERS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0);
        Self { workers }
    }
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("worker pool")
            .install(f),
    }
}

fn canon_f64(x: f64) -> u64 {
    // Collapse -0.0 onto 0.0 so equal dB values hash identically.
    if x == 0.0 { 0.0f64.to_bits() } else { x.to_bits() }
}

/// Counter-based per-frame RNG stream.
fn frame_rng(spec: &ExperimentSpec, beta_db: f64, ebn0_db: f64, frame: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"stsim-frame-v1");
    h.update(spec.seed.to_le_bytes());
    h.update(spec.link.scheme.as_str().as_bytes());
    h.update(spec.link.constellation.to_string().as_bytes());
    h.update(spec.link.code_rate.to_string().as_bytes());
    h.update((spec.link.frame_bits as u64).to_le_bytes());
    h.update((spec.link.n_rx as u64).to_le_bytes());
    h.update(spec.link.interleaver_seed.to_le_bytes());
    h.update(serde_json::to_string(&spec.channel_kind).unwrap().as_bytes());
    h.update(canon_f64(beta_db).to_le_bytes());
    h.update(canon_f64(ebn0_db).to_le_bytes());
    h.update(frame.to_le_bytes());
    let digest = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

/// One simulated BER point.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BerPoint {
    pub ebn0_db: f64,
    pub frames: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    /// 95% Wilson confidence half-width on the BER.
    pub ci_halfwidth: f64,
    /// True when the point stopped at max_frames short of min_errors.
    pub censored: bool,
}

/// BER versus Eb/N0 for one scheme at one beta.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BerCurve {
    pub scheme: String,
    pub channel: ChannelKind,
    pub beta_db: f64,
    pub points: Vec<BerPoint>,
}

/// 95% Wilson score half-width for `errors` out of `n` Bernoulli trials.
pub fn wilson_halfwidth(errors: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let z = 1.959963984540054_f64;
    let nf = n as f64;
    let p = errors as f64 / nf;
    let z2 = z * z;
    z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / (1.0 + z2 / nf)
}

/// Simulates one (beta, Eb/N0) point until `min_errors` bit errors accumulate
/// or `max_frames` frames have run.
pub fn run_ber_point(
    spec: &ExperimentSpec,
    beta_db: f64,
    ebn0_db: f64,
    opts: &RunOptions,
) -> Result<BerPoint, SimError> {
    spec.validate()?;
    with_pool(opts.workers, || {
        let mut frames = 0u64;
        let mut bits = 0u64;
        let mut errors = 0u64;
        while errors < spec.min_errors && frames < spec.max_frames {
            let batch = FRAME_BATCH.min(spec.max_frames - frames);
            let (batch_errors, batch_bits) = (frames..frames + batch)
                .into_par_iter()
                .map(|f| {
                    let mut rng = frame_rng(spec, beta_db, ebn0_db, f);
                    let (tx, rx) = run_link_once(
                        &spec.link,
                        ebn0_db,
                        beta_db,
                        spec.channel_kind,
                        None,
                        &mut rng,
                    )
                    .expect("validated link config runs");
                    let e = tx.iter().zip(&rx).filter(|(a, b)| a != b).count() as u64;
                    (e, tx.len() as u64)
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            errors += batch_errors;
            bits += batch_bits;
            frames += batch;
        }
        Ok(BerPoint {
            ebn0_db,
            frames,
            bits,
            bit_errors: errors,
            ber: errors as f64 / bits.max(1) as f64,
            ci_halfwidth: wilson_halfwidth(errors, bits.max(1)),
            censored: errors < spec.min_errors,
        })
    })
}

/// BER over the whole Eb/N0 grid at one beta.
pub fn run_ber_curve(
    spec: &ExperimentSpec,
    beta_db: f64,
    opts: &RunOptions,
) -> Result<BerCurve, SimError> {
    spec.validate()?;
    let points = spec
        .ebn0_grid
        .iter()
        .map(|&ebn0| run_ber_point(spec, beta_db, ebn0, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BerCurve {
        scheme: spec.link.scheme.to_string(),
        channel: spec.channel_kind,
        beta_db,
        points,
    })
}

/// Curves for every beta in the grid.
pub fn run_all_curves(spec: &ExperimentSpec, opts: &RunOptions) -> Result<Vec<BerCurve>, SimError> {
    spec.beta_grid
        .iter()
        .map(|&beta| run_ber_curve(spec, beta, opts))
        .collect()
}

/// Outcome of a required-Eb/N0 search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RequiredEbn0 {
    /// Midpoint of the final bracket.
    pub ebn0_db: f64,
    /// BER measured at the returned point.
    pub achieved_ber: f64,
    /// Final bracket (below-target side, above-target side).
    pub bracket_db: (f64, f64),
}

/// Why a required-Eb/N0 search could not bracket the target.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BracketFailure {
    /// BER already below target at the lowest grid point.
    BelowGrid { ber_at_lowest: f64 },
    /// BER still above target at the highest grid point.
    AboveGrid { ber_at_highest: f64 },
}

/// Bisection on a monotone-in-expectation BER evaluator.
///
/// The grid is scanned in ascending order until the target is bracketed,
/// then the bracket is bisected to under 0.25 dB. The evaluator is any
/// Eb/N0 -> BER map; the Monte Carlo front ends plug the simulator in, the
/// tests plug closed forms in.
pub fn required_ebn0_with(
    mut eval: impl FnMut(f64) -> f64,
    grid: &[f64],
    target_ber: f64,
) -> Result<RequiredEbn0, BracketFailure> {
    assert!(!grid.is_empty(), "ebn0 grid is empty");
    let mut lo: Option<(f64, f64)> = None;
    let mut bracket: Option<((f64, f64), (f64, f64))> = None;
    for &x in grid {
        let ber = eval(x);
        if ber > target_ber {
            lo = Some((x, ber));
        } else if let Some(lo) = lo {
            bracket = Some((lo, (x, ber)));
            break;
        } else {
            return Err(BracketFailure::BelowGrid { ber_at_lowest: ber });
        }
    }
    let ((mut lo_x, _), (mut hi_x, _)) = match bracket {
        Some(b) => b,
        None => {
            return Err(BracketFailure::AboveGrid {
                ber_at_highest: lo.expect("nonempty grid").1,
            })
        }
    };
    while hi_x - lo_x >= 0.25 {
        let mid = 0.5 * (lo_x + hi_x);
        if eval(mid) > target_ber {
            lo_x = mid;
        } else {
            hi_x = mid;
        }
    }
    let mid = 0.5 * (lo_x + hi_x);
    Ok(RequiredEbn0 {
        ebn0_db: mid,
        achieved_ber: eval(mid),
        bracket_db: (lo_x, hi_x),
    })
}

/// Monte Carlo required-Eb/N0 for one spec at one beta.
pub fn required_ebn0(
    spec: &ExperimentSpec,
    beta_db: f64,
    opts: &RunOptions,
) -> Result<Result<RequiredEbn0, BracketFailure>, SimError> {
    spec.validate()?;
    let mut err: Option<SimError> = None;
    let result = required_ebn0_with(
        |ebn0| match run_ber_point(spec, beta_db, ebn0, opts) {
            Ok(p) => p.ber,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        &spec.ebn0_grid,
        spec.target_ber,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok(result)
}

/// A beta sweep over several schemes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub links: Vec<LinkConfig>,
    pub channel_kind: ChannelKind,
    pub ebn0_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub target_ber: f64,
    pub min_errors: u64,
    pub max_frames: u64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn experiment_for(&self, link: &LinkConfig) -> ExperimentSpec {
        ExperimentSpec {
            link: link.clone(),
            channel_kind: self.channel_kind,
            ebn0_grid: self.ebn0_grid.clone(),
            beta_grid: self.beta_grid.clone(),
            target_ber: self.target_ber,
            min_errors: self.min_errors,
            max_frames: self.max_frames,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.links.is_empty() {
            return Err(SimError::Spec("sweep needs at least one scheme".into()));
        }
        for link in &self.links {
            self.experiment_for(link).validate()?;
        }
        Ok(())
    }

    pub fn sha256_hex(&self) -> String {
        hex_digest(serde_json::to_string(self).expect("spec serialises").as_bytes())
    }
}

/// One (scheme, beta) cell of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub scheme: String,
    pub beta_db: f64,
    pub result: Result<RequiredEbn0, BracketFailure>,
}

/// Completed sweep with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub spec_sha256: String,
    pub seed: u64,
}

impl SweepResult {
    /// True when any cell failed to bracket its target.
    pub fn has_failures(&self) -> bool {
        self.cells.iter().any(|c| c.result.is_err())
    }

    pub fn cell(&self, scheme: &str, beta_db: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.scheme == scheme && c.beta_db == beta_db)
    }

    /// Deterministic CSV: one row per (scheme, beta) cell. The header
    /// comment embeds the spec hash and seed for provenance.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# spec_sha256={} seed={}\n",
            self.spec_sha256, self.seed
        ));
        out.push_str("scheme,beta_db,status,required_ebn0_db,achieved_ber,bracket_lo_db,bracket_hi_db\n");
        for cell in &self.cells {
            match &cell.result {
                Ok(r) => out.push_str(&format!(
                    "{},{:.2},ok,{:.4},{:.6e},{:.4},{:.4}\n",
                    cell.scheme, cell.beta_db, r.ebn0_db, r.achieved_ber, r.bracket_db.0, r.bracket_db.1
                )),
                Err(BracketFailure::BelowGrid { ber_at_lowest }) => out.push_str(&format!(
                    "{},{:.2},below_grid,,{:.6e},,\n",
                    cell.scheme, cell.beta_db, ber_at_lowest
                )),
                Err(BracketFailure::AboveGrid { ber_at_highest }) => out.push_str(&format!(
                    "{},{:.2},above_grid,,{:.6e},,\n",
                    cell.scheme, cell.beta_db, ber_at_highest
                )),
            }
        }
        out
    }
}

/// Runs the full sweep: one required-Eb/N0 per (scheme, beta). Per-cell
/// bracket failures are recorded and the sweep continues.
pub fn beta_sweep(sweep: &SweepSpec, opts: &RunOptions) -> Result<SweepResult, SimError> {
    sweep.validate()?;
    let mut cells = Vec::with_capacity(sweep.links.len() * sweep.beta_grid.len());
    for link in &sweep.links {
        let spec = sweep.experiment_for(link);
        for &beta in &sweep.beta_grid {
            let result = required_ebn0(&spec, beta, opts)?;
            cells.push(SweepCell {
                scheme: link.scheme.to_string(),
                beta_db: beta,
                result,
            });
        }
    }
    Ok(SweepResult {
        cells,
        spec_sha256: sweep.sha256_hex(),
        seed: sweep.seed,
    })
}

/// Deterministic CSV for a set of curves (one row per point).
pub fn curves_to_csv(curves: &[BerCurve], spec_sha256: &str, seed: u64) -> String {
    let mut out = String::new();
    out.push_str(&format!("# spec_sha256={spec_sha256} seed={seed}\n"));
    out.push_str("scheme,channel,beta_db,ebn0_db,frames,bits,bit_errors,ber,ci_halfwidth,censored\n");
    for curve in curves {
        let channel = serde_json::to_string(&curve.channel).unwrap();
        let channel = channel.trim_matches('"');
        for p in &curve.points {
            out.push_str(&format!(
                "{},{},{:.2},{:.4},{},{},{},{:.8e},{:.8e},{}\n",
                curve.scheme,
                channel,
                curve.beta_db,
                p.ebn0_db,
                p.frames,
                p.bits,
                p.bit_errors,
                p.ber,
                p.ci_halfwidth,
                p.censored
            ));
        }
    }
    out
}

/// Run manifest written next to every CSV: config echo, provenance and
/// environment. Wall time lives here so the CSV stays bit-identical.
pub fn run_manifest_json<T: Serialize>(
    spec: &T,
    spec_sha256: &str,
    seed: u64,
    workers: Option<usize>,
    wall_time_s: f64,
) -> String {
    let manifest = serde_json::json!({
        "tool": "stsim",
        "version": env!("CARGO_PKG_VERSION"),
        "spec": spec,
        "spec_sha256": spec_sha256,
        "seed": seed,
        "workers": workers,
        "wall_time_s": wall_time_s,
    });
    serde_json::to_string_pretty(&manifest).expect("manifest serialises")
}

/// Uncoded BPSK over a real AWGN channel; the closed-form debug mode.
/// BER approaches Q(sqrt(2 Eb/N0)).
pub fn awgn_bpsk_point(ebn0_db: f64, min_errors: u64, max_bits: u64, seed: u64) -> BerPoint {
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    let sigma = (1.0 / (2.0 * ebn0)).sqrt();
    let mut bits = 0u64;
    let mut errors = 0u64;
    let batch = 1u64 << 16;
    let mut counter = 0u64;
    while errors < min_errors && bits < max_bits {
        let mut h = Sha256::new();
        h.update(b"stsim-awgn-bpsk-v1");
        h.update(seed.to_le_bytes());
        h.update(canon_f64(ebn0_db).to_le_bytes());
        h.update(counter.to_le_bytes());
        let digest = h.finalize();
        let mut s = [0u8; 32];
        s.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(s);
        let n = batch.min(max_bits - bits);
        for _ in 0..n {
            let bit = rng.gen_range(0..2) as u8;
            let s = if bit == 0 { 1.0 } else { -1.0 };
            let noise: f64 = rng.sample(rand_distr::StandardNormal);
            let y = s + sigma * noise;
            let detected = u8::from(y < 0.0);
            if detected != bit {
                errors += 1;
            }
        }
        bits += n;
        counter += 1;
    }
    BerPoint {
        ebn0_db,
        frames: counter,
        bits,
        bit_errors: errors,
        ber: errors as f64 / bits.max(1) as f64,
        ci_halfwidth: wilson_halfwidth(errors, bits.max(1)),
        censored: errors < min_errors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ConstellationName;
    use crate::codes::CodeName;
    use crate::link::PunctureRate;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            link: LinkConfig::new(
                CodeName::Alamouti,
                ConstellationName::Qam16,
                PunctureRate::R1_2,
                256,
            ),
            channel_kind: ChannelKind::Rayleigh,
            ebn0_grid: vec![0.0, 4.0, 8.0],
            beta_grid: vec![0.0],
            target_ber: 1e-2,
            min_errors: 100,
            max_frames: 64,
            seed: 11,
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = small_spec();
        s.validate().unwrap();
        s.min_errors = 50;
        assert!(s.validate().is_err());
        let mut s = small_spec();
        s.target_ber = 0.7;
        assert!(s.validate().is_err());
        let mut s = small_spec();
        s.ebn0_grid = vec![];
        assert!(s.validate().is_err());
        let mut s = small_spec();
        s.ebn0_grid = vec![3.0, 1.0];
        assert!(s.validate().is_err());
    }

    #[test]
    fn same_seed_gives_identical_point() {
        let spec = small_spec();
        let opts = RunOptions::default();
        let a = run_ber_point(&spec, 0.0, 2.0, &opts).unwrap();
        let b = run_ber_point(&spec, 0.0, 2.0, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let spec = small_spec();
        let one = run_ber_point(&spec, 0.0, 2.0, &RunOptions { workers: Some(1) }).unwrap();
        let two = run_ber_point(&spec, 0.0, 2.0, &RunOptions { workers: Some(2) }).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn noiseless_point_is_censored_zero() {
        let mut spec = small_spec();
        spec.max_frames = 4;
        let p = run_ber_point(&spec, 0.0, 40.0, &RunOptions::default()).unwrap();
        assert_eq!(p.bit_errors, 0);
        assert!(p.censored);
        assert_eq!(p.ber, 0.0);
    }

    #[test]
    fn synthetic_required_ebn0_inverts_model() {
        // ber(x) = 10^(-x/2): target 1e-4 at exactly 8 dB.
        let grid: Vec<f64> = (0..=6).map(|i| 2.0 * i as f64).collect();
        let r = required_ebn0_with(|x| 10f64.powf(-x / 2.0), &grid, 1e-4).unwrap();
        assert!((r.ebn0_db - 8.0).abs() <= 0.25, "got {}", r.ebn0_db);
        assert!(r.bracket_db.1 - r.bracket_db.0 < 0.25);
        // Returned point lies within the original bracketing grid cell.
        assert!(r.ebn0_db > 6.0 && r.ebn0_db <= 8.0);
    }

    #[test]
    fn unbracketable_targets_fail_explicitly() {
        let grid = vec![0.0, 2.0, 4.0];
        // Target above the curve at the lowest point.
        let below = required_ebn0_with(|x| 10f64.powf(-x / 2.0) * 0.1, &grid, 0.2);
        assert!(matches!(below, Err(BracketFailure::BelowGrid { .. })));
        // Target unreachable on the grid.
        let above = required_ebn0_with(|x| 10f64.powf(-x / 2.0), &grid, 1e-9);
        assert!(matches!(above, Err(BracketFailure::AboveGrid { .. })));
    }

    #[test]
    fn awgn_bpsk_matches_q_function() {
        // Q(sqrt(2 * 10^0.96)) = 9.736e-6 at 9.6 dB; accept a factor of 2.
        let p = awgn_bpsk_point(9.6, 100, 50_000_000, 3);
        assert!(!p.censored, "needs more bits: {} errors", p.bit_errors);
        let expect = 9.736e-6;
        assert!(
            p.ber > expect / 2.0 && p.ber < expect * 2.0,
            "ber {} vs theory {expect}",
            p.ber
        );
    }

    #[test]
    fn awgn_bpsk_deterministic() {
        let a = awgn_bpsk_point(4.0, 100, 1_000_000, 9);
        let b = awgn_bpsk_point(4.0, 100, 1_000_000, 9);
        assert_eq!(a, b);
    }

    #[test]
    fn wilson_halfwidth_behaviour() {
        assert_eq!(wilson_halfwidth(0, 0), 0.0);
        let w = wilson_halfwidth(100, 100_000);
        assert!(w > 0.0 && w < 1e-3);
        // Zero errors still give a positive upper margin.
        assert!(wilson_halfwidth(0, 1000) > 0.0);
    }

    #[test]
    fn curve_csv_is_deterministic_and_complete() {
        let mut spec = small_spec();
        spec.ebn0_grid = vec![0.0, 3.0];
        spec.max_frames = 8;
        spec.min_errors = 100;
        let opts = RunOptions::default();
        let curves = run_all_curves(&spec, &opts).unwrap();
        let csv1 = curves_to_csv(&curves, &spec.sha256_hex(), spec.seed);
        let curves2 = run_all_curves(&spec, &opts).unwrap();
        let csv2 = curves_to_csv(&curves2, &spec.sha256_hex(), spec.seed);
        assert_eq!(csv1, csv2);
        // Header comment, column header, |betas| * |grid| rows.
        assert_eq!(csv1.lines().count(), 2 + 2);
        assert!(csv1.lines().next().unwrap().contains("spec_sha256="));
    }

    #[test]
    fn sweep_cell_bookkeeping_with_synthetic_cells() {
        // Row count = |schemes| x |beta_grid| using the closed-form evaluator.
        let betas = [0.0, -6.0, -12.0];
        let schemes = ["a", "b"];
        let mut cells = Vec::new();
        for s in schemes {
            for &beta in &betas {
                let r = required_ebn0_with(
                    |x| 10f64.powf(-(x + beta / 6.0) / 2.0),
                    &[0.0, 4.0, 8.0, 12.0],
                    1e-3,
                )
                .unwrap();
                cells.push(SweepCell {
                    scheme: s.into(),
                    beta_db: beta,
                    result: Ok(r),
                });
            }
        }
        let result = SweepResult {
            cells,
            spec_sha256: "deadbeef".into(),
            seed: 1,
        };
        assert_eq!(result.cells.len(), 6);
        let csv = result.to_csv();
        assert_eq!(csv.lines().count(), 2 + 6);
        assert!(!result.has_failures());
        assert!(result.cell("a", -6.0).is_some());
    }
}
