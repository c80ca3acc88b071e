//! Fading channel models: quasi-static i.i.d. Rayleigh MIMO with AWGN and
//! per-site power imbalance, plus a 3-state first-order Markov
//! land-mobile-satellite (LMS) model for the satellite link.
//!
//! The LMS states are S1 (line of sight), S2 (moderate shadowing) and
//! S3 (deep shadowing). The chain dwells in a state for a minimum travelled
//! distance L_min; converted through receiver speed and symbol duration this
//! becomes a minimum dwell in channel uses, and transitions happen only at
//! dwell multiples. Within one state the channel gain is a shadowed direct
//! component (log-normal amplitude) plus a diffuse Rayleigh component.

use crate::CMat;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("transition matrix row {0} sums to {1}, expected 1")]
    RowSum(usize, f64),
    #[error("state probabilities sum to {0}, expected 1")]
    StateSum(f64),
    #[error("state probabilities are not stationary for P (residual {0:.3e})")]
    NotStationary(f64),
    #[error("probability entry out of [0,1]: {0}")]
    BadProbability(f64),
    #[error("{0} must be positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error("mean state power must be non-increasing from S1 to S3 (LOS strongest)")]
    PowerOrdering,
    #[error("satellite antenna set {0:?} is not a valid subset of 0..{1}")]
    BadAntennaSet(Vec<usize>, usize),
    #[error("beta must lie in [-40, 0] dB, got {0}")]
    BadBeta(f64),
    #[error("config parse error: {0}")]
    Config(String),
}

/// One realisation of the MIMO channel for a quasi-static block.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Raw n_r x n_t channel matrix (unit-power fading).
    pub h: CMat,
    /// Noise variance per complex dimension.
    pub noise_var: f64,
    /// Per-transmit-antenna amplitude factors (power imbalance).
    pub tx_scale: Vec<f64>,
}

impl ChannelRealization {
    pub fn new(h: CMat, noise_var: f64) -> Self {
        let n_t = h.ncols();
        Self {
            h,
            noise_var,
            tx_scale: vec![1.0; n_t],
        }
    }

    /// H with the per-antenna amplitude factors applied to its columns,
    /// i.e. H * diag(tx_scale).
    pub fn effective_h(&self) -> CMat {
        let mut h = self.h.clone();
        for (c, &s) in self.tx_scale.iter().enumerate() {
            for r in 0..h.nrows() {
                h[(r, c)] *= s;
            }
        }
        h
    }
}

/// Draws an n_r x n_t matrix of i.i.d. circularly-symmetric complex Gaussian
/// entries with unit variance (fresh per codeword block).
pub fn draw_rayleigh<R: Rng + ?Sized>(n_r: usize, n_t: usize, rng: &mut R) -> CMat {
    // Column-major fill keeps draw order well-defined for reproducibility.
    CMat::from_fn(n_r, n_t, |_, _| draw_cn(1.0, rng))
}

/// One CN(0, var) sample.
pub fn draw_cn<R: Rng + ?Sized>(var: f64, rng: &mut R) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// An n_r x T matrix of i.i.d. CN(0, noise_var) noise samples.
pub fn draw_noise<R: Rng + ?Sized>(n_r: usize, t: usize, noise_var: f64, rng: &mut R) -> CMat {
    CMat::from_fn(n_r, t, |_, _| draw_cn(noise_var, rng))
}

/// Applies a power imbalance of `beta_db` to the satellite antenna columns:
/// their amplitude factors are multiplied by 10^(beta_db / 20).
pub fn apply_imbalance(
    ch: &ChannelRealization,
    beta_db: f64,
    sat_antennas: &[usize],
) -> Result<ChannelRealization, ChannelError> {
    if !(-40.0..=0.0).contains(&beta_db) {
        return Err(ChannelError::BadBeta(beta_db));
    }
    let n_t = ch.h.ncols();
    if sat_antennas.iter().any(|&a| a >= n_t) {
        return Err(ChannelError::BadAntennaSet(sat_antennas.to_vec(), n_t));
    }
    let factor = 10f64.powf(beta_db / 20.0);
    let mut out = ch.clone();
    for &a in sat_antennas {
        out.tx_scale[a] *= factor;
    }
    Ok(out)
}

/// Which antennas a power imbalance applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImbalanceScope {
    /// All antennas of the satellite site (default).
    #[default]
    SatSite,
    /// Only the first satellite antenna.
    SingleAntenna,
}

impl ImbalanceScope {
    pub fn antennas(self, sat_rows: &[usize]) -> Vec<usize> {
        match self {
            ImbalanceScope::SatSite => sat_rows.to_vec(),
            ImbalanceScope::SingleAntenna => sat_rows.iter().take(1).copied().collect(),
        }
    }
}

/// Markov LMS states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LmsState {
    /// Line-of-sight conditions.
    S1,
    /// Moderate shadowing.
    S2,
    /// Deep shadowing.
    S3,
}

impl LmsState {
    pub fn index(self) -> usize {
        match self {
            LmsState::S1 => 0,
            LmsState::S2 => 1,
            LmsState::S3 => 2,
        }
    }

    pub fn from_index(i: usize) -> LmsState {
        match i {
            0 => LmsState::S1,
            1 => LmsState::S2,
            _ => LmsState::S3,
        }
    }
}

/// Loo-type per-state statistics: a shadowed direct ray plus diffuse multipath.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LmsStateParams {
    /// Mean direct-path power in dB (the amplitude is 10^(x/20) with
    /// x normal around this mean).
    pub direct_mean_db: f64,
    /// Standard deviation of the shadowing in dB.
    pub shadow_spread_db: f64,
    /// Average diffuse multipath power in dB.
    pub multipath_power_db: f64,
}

impl LmsStateParams {
    /// Closed-form mean power of the log-normal direct ray plus the
    /// Rayleigh diffuse component.
    pub fn mean_power(&self) -> f64 {
        let eta = std::f64::consts::LN_10 / 10.0;
        let direct = 10f64.powf(self.direct_mean_db / 10.0)
            * (0.5 * (eta * self.shadow_spread_db).powi(2)).exp();
        direct + 10f64.powf(self.multipath_power_db / 10.0)
    }
}

/// The 3-state first-order Markov LMS channel model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkovLmsModel {
    /// State transition probabilities; rows sum to 1.
    pub p: [[f64; 3]; 3],
    /// Stationary state probabilities; sums to 1.
    pub w: [f64; 3],
    /// Minimum distance a state lasts, in metres.
    pub l_min_m: f64,
    /// Receiver speed in m/s.
    pub speed_mps: f64,
    /// Duration of one channel use in seconds.
    pub symbol_duration_s: f64,
    /// Per-state fading parameters, S1 to S3.
    pub states: [LmsStateParams; 3],
}

/// On-disk form of the model; `w` may be omitted and is then computed as the
/// stationary distribution of `p`.
#[derive(Debug, Clone, Deserialize)]
struct LmsConfigFile {
    p: Vec<Vec<f64>>,
    w: Option<Vec<f64>>,
    l_min_m: f64,
    speed_mps: f64,
    symbol_duration_s: f64,
    state: Vec<LmsStateParams>,
}

impl MarkovLmsModel {
    /// Builds a model from a transition matrix, computing the stationary
    /// distribution by power iteration.
    pub fn from_transitions(
        p: [[f64; 3]; 3],
        l_min_m: f64,
        speed_mps: f64,
        symbol_duration_s: f64,
        states: [LmsStateParams; 3],
    ) -> Result<Self, ChannelError> {
        let w = stationary_distribution(&p)?;
        let model = Self {
            p,
            w,
            l_min_m,
            speed_mps,
            symbol_duration_s,
            states,
        };
        model.validate()?;
        Ok(model)
    }

    /// Parses the TOML parameter file and validates it.
    pub fn from_toml(text: &str) -> Result<Self, ChannelError> {
        let file: LmsConfigFile =
            toml::from_str(text).map_err(|e| ChannelError::Config(e.to_string()))?;
        if file.p.len() != 3 || file.p.iter().any(|row| row.len() != 3) {
            return Err(ChannelError::Config("p must be a 3x3 matrix".into()));
        }
        if file.state.len() != 3 {
            return Err(ChannelError::Config(
                "exactly 3 [[state]] blocks required".into(),
            ));
        }
        let mut p = [[0.0; 3]; 3];
        for (i, row) in file.p.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                p[i][j] = v;
            }
        }
        let w = match file.w {
            Some(w) if w.len() == 3 => [w[0], w[1], w[2]],
            Some(_) => return Err(ChannelError::Config("w must have 3 entries".into())),
            None => stationary_distribution(&p)?,
        };
        let model = Self {
            p,
            w,
            l_min_m: file.l_min_m,
            speed_mps: file.speed_mps,
            symbol_duration_s: file.symbol_duration_s,
            states: [file.state[0], file.state[1], file.state[2]],
        };
        model.validate()?;
        Ok(model)
    }

    /// Illustrative default parameters (not fitted measurement values):
    /// a sticky chain with L_min at the low end of the observed 3-5 m range.
    pub fn illustrative_default() -> Self {
        Self::from_transitions(
            [
                [0.90, 0.08, 0.02],
                [0.10, 0.80, 0.10],
                [0.05, 0.15, 0.80],
            ],
            3.0,
            15.0,
            1.0 / 9.14e6,
            [
                LmsStateParams {
                    direct_mean_db: 0.0,
                    shadow_spread_db: 1.0,
                    multipath_power_db: -12.0,
                },
                LmsStateParams {
                    direct_mean_db: -8.0,
                    shadow_spread_db: 3.0,
                    multipath_power_db: -12.0,
                },
                LmsStateParams {
                    direct_mean_db: -20.0,
                    shadow_spread_db: 4.0,
                    multipath_power_db: -15.0,
                },
            ],
        )
        .expect("default LMS parameters are valid")
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        for (i, row) in self.p.iter().enumerate() {
            for &v in row {
                if !(0.0..=1.0).contains(&v) {
                    return Err(ChannelError::BadProbability(v));
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(ChannelError::RowSum(i, sum));
            }
        }
        let wsum: f64 = self.w.iter().sum();
        if (wsum - 1.0).abs() > 1e-9 {
            return Err(ChannelError::StateSum(wsum));
        }
        // w^T = w^T P within 1e-9.
        let mut residual = 0.0f64;
        for j in 0..3 {
            let wj: f64 = (0..3).map(|i| self.w[i] * self.p[i][j]).sum();
            residual = residual.max((wj - self.w[j]).abs());
        }
        if residual > 1e-9 {
            return Err(ChannelError::NotStationary(residual));
        }
        for (name, v) in [
            ("l_min_m", self.l_min_m),
            ("speed_mps", self.speed_mps),
            ("symbol_duration_s", self.symbol_duration_s),
        ] {
            if v <= 0.0 {
                return Err(ChannelError::NonPositive(name, v));
            }
        }
        for s in &self.states {
            if s.shadow_spread_db < 0.0 {
                return Err(ChannelError::NonPositive(
                    "shadow_spread_db",
                    s.shadow_spread_db,
                ));
            }
        }
        // LOS must carry the most power, deep shadowing the least.
        let powers: Vec<f64> = self.states.iter().map(|s| s.mean_power()).collect();
        if powers[0] < powers[1] || powers[1] < powers[2] {
            return Err(ChannelError::PowerOrdering);
        }
        Ok(())
    }

    /// Minimum state dwell in channel uses.
    pub fn dwell_symbols(&self) -> u64 {
        let d = self.l_min_m / (self.speed_mps * self.symbol_duration_s);
        (d.round() as u64).max(1)
    }

    /// Samples the initial state from W.
    pub fn draw_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> LmsState {
        sample_categorical(&self.w, rng)
    }

    /// Samples the successor state from the row of P for `state`.
    pub fn step_markov<R: Rng + ?Sized>(&self, state: LmsState, rng: &mut R) -> LmsState {
        sample_categorical(&self.p[state.index()], rng)
    }

    /// One complex channel gain in the given state: shadowed direct component
    /// (log-normal amplitude, zero phase) plus diffuse Rayleigh multipath.
    pub fn draw_lms_gain<R: Rng + ?Sized>(&self, state: LmsState, rng: &mut R) -> Complex64 {
        let s = &self.states[state.index()];
        let amp = self.draw_direct_amplitude(state, rng);
        Complex64::new(amp, 0.0) + draw_cn(10f64.powf(s.multipath_power_db / 10.0), rng)
    }

    /// The log-normal direct-ray amplitude alone.
    pub fn draw_direct_amplitude<R: Rng + ?Sized>(&self, state: LmsState, rng: &mut R) -> f64 {
        let s = &self.states[state.index()];
        let x: f64 = StandardNormal.sample(rng);
        10f64.powf((s.direct_mean_db + s.shadow_spread_db * x) / 20.0)
    }
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64; 3], rng: &mut R) -> LmsState {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return LmsState::from_index(i);
        }
    }
    LmsState::S3
}

fn stationary_distribution(p: &[[f64; 3]; 3]) -> Result<[f64; 3], ChannelError> {
    let mut w = [1.0 / 3.0; 3];
    for _ in 0..20_000 {
        let mut next = [0.0; 3];
        for j in 0..3 {
            for i in 0..3 {
                next[j] += w[i] * p[i][j];
            }
        }
        let diff: f64 = (0..3).map(|i| (next[i] - w[i]).abs()).sum();
        w = next;
        if diff < 1e-15 {
            break;
        }
    }
    let sum: f64 = w.iter().sum();
    if !(sum.is_finite() && sum > 0.0) {
        return Err(ChannelError::Config("no stationary distribution".into()));
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
    Ok(w)
}

/// Stateful Markov chain tracking the satellite-site LMS state across
/// quasi-static blocks. The state is shared by all satellite antennas and
/// changes only at multiples of the minimum dwell.
#[derive(Debug, Clone)]
pub struct LmsChain {
    model: MarkovLmsModel,
    state: LmsState,
    symbols_in_state: u64,
    dwell: u64,
}

impl LmsChain {
    pub fn new<R: Rng + ?Sized>(model: MarkovLmsModel, rng: &mut R) -> Self {
        let state = model.draw_initial_state(rng);
        let dwell = model.dwell_symbols();
        Self {
            model,
            state,
            symbols_in_state: 0,
            dwell,
        }
    }

    pub fn state(&self) -> LmsState {
        self.state
    }

    pub fn model(&self) -> &MarkovLmsModel {
        &self.model
    }

    /// Advances the travelled distance by `symbols` channel uses, stepping the
    /// chain at every completed dwell interval.
    pub fn advance<R: Rng + ?Sized>(&mut self, symbols: u64, rng: &mut R) {
        self.symbols_in_state += symbols;
        while self.symbols_in_state >= self.dwell {
            self.symbols_in_state -= self.dwell;
            self.state = self.model.step_markov(self.state, rng);
        }
    }
}

/// Which fading law each transmit antenna follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// All antennas i.i.d. Rayleigh (the baseline assumption).
    Rayleigh,
    /// All antennas through the LMS model with a common Markov state.
    Lms,
    /// Satellite antennas through LMS, terrestrial antennas Rayleigh.
    Hybrid,
}

impl std::str::FromStr for ChannelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rayleigh" => Ok(ChannelKind::Rayleigh),
            "lms" => Ok(ChannelKind::Lms),
            "hybrid" => Ok(ChannelKind::Hybrid),
            other => Err(format!("unknown channel kind '{other}'")),
        }
    }
}

/// Draws one hybrid channel realisation: columns in `sat_antennas` carry an
/// LMS gain under the chain's current state (common shadowing amplitude per
/// site, independent small-scale per entry), the rest are i.i.d. Rayleigh.
///
/// With an empty satellite set this reduces exactly to [`draw_rayleigh`],
/// entry for entry, given the same RNG stream.
pub fn hybrid_channel<R: Rng + ?Sized>(
    chain: &LmsChain,
    sat_antennas: &[usize],
    n_r: usize,
    n_t: usize,
    rng: &mut R,
) -> Result<CMat, ChannelError> {
    if sat_antennas.iter().any(|&a| a >= n_t) {
        return Err(ChannelError::BadAntennaSet(sat_antennas.to_vec(), n_t));
    }
    let state = chain.state();
    let model = chain.model();
    let site_amp = if sat_antennas.is_empty() {
        0.0
    } else {
        model.draw_direct_amplitude(state, rng)
    };
    let mp_var = 10f64.powf(model.states[state.index()].multipath_power_db / 10.0);
    let mut h = CMat::zeros(n_r, n_t);
    for c in 0..n_t {
        let is_sat = sat_antennas.contains(&c);
        for r in 0..n_r {
            h[(r, c)] = if is_sat {
                Complex64::new(site_amp, 0.0) + draw_cn(mp_var, rng)
            } else {
                draw_cn(1.0, rng)
            };
        }
    }
    Ok(h)
}
