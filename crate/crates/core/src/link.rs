//! The outer coded transmission chain: a terminated (133,171) constraint-7
//! convolutional code with DVB puncturing, a seeded random bit interleaver,
//! Gray QAM mapping, space-time encoding, the fading channel, max-log soft
//! demapping and soft Viterbi decoding.

use crate::algebra::{Constellation, ConstellationName};
use crate::channel::{
    apply_imbalance, draw_noise, draw_rayleigh, hybrid_channel, ChannelError, ChannelKind,
    ChannelRealization, ImbalanceScope, LmsChain, MarkovLmsModel,
};
use crate::codes::{make_code, CodeDescriptor, CodeError, CodeName};
use crate::detect::{build_real_model, soft_llr, sphere_decode, DetectError, SphereTrace};
use crate::CMat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("link config: {0}")]
    Config(String),
    #[error("LLR sequence length {got} does not match code length {expected}")]
    LlrLength { expected: usize, got: usize },
    #[error(transparent)]
    Algebra(#[from] crate::algebra::AlgebraError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Generator polynomials of the mother code, octal 133 and 171, constraint
/// length 7. Bit 6 of each mask taps the current input bit. The X output
/// uses 171 and the Y output 133, matching the DVB-T assignment the
/// puncturing patterns below are defined for.
pub const GEN_X: u32 = 0o171;
pub const GEN_Y: u32 = 0o133;
/// Default frame size: a few OFDM-symbol equivalents of the 2048-carrier
/// parameter set. BER at the simulated targets is frame-size-insensitive,
/// and desk-scale runs shrink this via config.
pub const DEFAULT_FRAME_BITS: usize = 8 * 2048;
const CONSTRAINT: usize = 7;
const STATES: usize = 64;
/// Tail bits appended to drive the encoder back to the zero state.
pub const TAIL_BITS: usize = CONSTRAINT - 1;

/// Puncturing of the rate-1/2 mother code (DVB patterns).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PunctureRate {
    /// No puncturing: X1 Y1.
    #[serde(rename = "1/2")]
    R1_2,
    /// X: 1 0, Y: 1 1 -> X1 Y1 Y2.
    #[serde(rename = "2/3")]
    R2_3,
    /// X: 1 0 1, Y: 1 1 0 -> X1 Y1 Y2 X3.
    #[serde(rename = "3/4")]
    R3_4,
}

impl PunctureRate {
    pub fn value(self) -> f64 {
        match self {
            PunctureRate::R1_2 => 0.5,
            PunctureRate::R2_3 => 2.0 / 3.0,
            PunctureRate::R3_4 => 0.75,
        }
    }

    /// (X pattern, Y pattern) over one puncturing period.
    pub fn patterns(self) -> (&'static [u8], &'static [u8]) {
        match self {
            PunctureRate::R1_2 => (&[1], &[1]),
            PunctureRate::R2_3 => (&[1, 0], &[1, 1]),
            PunctureRate::R3_4 => (&[1, 0, 1], &[1, 1, 0]),
        }
    }

    /// Number of transmitted bits for `steps` encoder steps.
    pub fn punctured_len(self, steps: usize) -> usize {
        let (px, py) = self.patterns();
        let period = px.len();
        let full = steps / period;
        let kept_per_period: usize =
            px.iter().map(|&b| b as usize).sum::<usize>() + py.iter().map(|&b| b as usize).sum::<usize>();
        let mut len = full * kept_per_period;
        for i in 0..(steps % period) {
            len += (px[i] + py[i]) as usize;
        }
        len
    }
}

impl std::str::FromStr for PunctureRate {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1/2" => Ok(PunctureRate::R1_2),
            "2/3" => Ok(PunctureRate::R2_3),
            "3/4" => Ok(PunctureRate::R3_4),
            other => Err(format!("unknown code rate '{other}' (use 1/2, 2/3, 3/4)")),
        }
    }
}

impl std::fmt::Display for PunctureRate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PunctureRate::R1_2 => write!(f, "1/2"),
            PunctureRate::R2_3 => write!(f, "2/3"),
            PunctureRate::R3_4 => write!(f, "3/4"),
        }
    }
}

#[inline]
fn parity(v: u32) -> u8 {
    (v.count_ones() & 1) as u8
}

/// Terminated convolutional encoding followed by puncturing.
///
/// Six zero tail bits are appended internally, so the encoder always ends in
/// the zero state; the output length is `rate.punctured_len(bits.len() + 6)`.
pub fn conv_encode(bits: &[u8], rate: PunctureRate) -> Vec<u8> {
    let (px, py) = rate.patterns();
    let period = px.len();
    let mut out = Vec::with_capacity(rate.punctured_len(bits.len() + TAIL_BITS));
    let mut window: u32 = 0;
    for (t, &b) in bits.iter().chain(std::iter::repeat_n(&0u8, TAIL_BITS)).enumerate() {
        window = ((b as u32) << 6) | (window >> 1);
        let x = parity(window & GEN_X);
        let y = parity(window & GEN_Y);
        let slot = t % period;
        if px[slot] == 1 {
            out.push(x);
        }
        if py[slot] == 1 {
            out.push(y);
        }
    }
    out
}

/// Re-inserts zero LLRs at punctured positions, returning the mother-code
/// LLR stream (two entries per encoder step).
pub fn depuncture(llrs: &[f64], steps: usize, rate: PunctureRate) -> Result<Vec<f64>, LinkError> {
    if llrs.len() != rate.punctured_len(steps) {
        return Err(LinkError::LlrLength {
            expected: rate.punctured_len(steps),
            got: llrs.len(),
        });
    }
    let (px, py) = rate.patterns();
    let period = px.len();
    let mut out = Vec::with_capacity(2 * steps);
    let mut cursor = 0usize;
    for t in 0..steps {
        let slot = t % period;
        if px[slot] == 1 {
            out.push(llrs[cursor]);
            cursor += 1;
        } else {
            out.push(0.0);
        }
        if py[slot] == 1 {
            out.push(llrs[cursor]);
            cursor += 1;
        } else {
            out.push(0.0);
        }
    }
    Ok(out)
}

/// Soft Viterbi decoding of the terminated, punctured stream.
///
/// `llrs` follow the sign convention of the demapper (positive favours 0);
/// punctured positions are filled with zero LLRs internally. Returns the
/// `n_info` information bits (tail dropped).
pub fn viterbi_decode(
    llrs: &[f64],
    n_info: usize,
    rate: PunctureRate,
) -> Result<Vec<u8>, LinkError> {
    let steps = n_info + TAIL_BITS;
    let mother = depuncture(llrs, steps, rate)?;
    // Transition table: next[state][input] and output pair per transition.
    let mut metric = vec![f64::INFINITY; STATES];
    metric[0] = 0.0;
    let mut survivors: Vec<[u8; STATES]> = Vec::with_capacity(steps);
    for t in 0..steps {
        let (lx, ly) = (mother[2 * t], mother[2 * t + 1]);
        let mut next = vec![f64::INFINITY; STATES];
        let mut surv = [0u8; STATES];
        for s in 0..STATES {
            let m = metric[s];
            if !m.is_finite() {
                continue;
            }
            for b in 0..2u32 {
                let window = (b << 6) | (s as u32);
                let x = parity(window & GEN_X);
                let y = parity(window & GEN_Y);
                // Positive LLR favours bit 0: hypothesising a 1 costs +llr.
                let cost = if x == 1 { lx } else { -lx } + if y == 1 { ly } else { -ly };
                let ns = (window >> 1) as usize;
                let cand = m + cost;
                if cand < next[ns] {
                    next[ns] = cand;
                    surv[ns] = ((b as u8) << 7) | (s as u8 & 0x3F);
                }
            }
        }
        metric = next;
        survivors.push(surv);
    }
    // Terminated trellis: trace back from state 0.
    let mut bits = vec![0u8; steps];
    let mut state = 0usize;
    for t in (0..steps).rev() {
        let s = survivors[t][state];
        bits[t] = s >> 7;
        state = (s & 0x3F) as usize;
    }
    bits.truncate(n_info);
    Ok(bits)
}

/// Seeded uniform random permutation of 0..len (Fisher-Yates over ChaCha).
pub fn interleave_permutation(len: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..len).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

/// out[perm[i]] = seq[i].
pub fn interleave<T: Copy + Default>(seq: &[T], seed: u64) -> Vec<T> {
    let perm = interleave_permutation(seq.len(), seed);
    let mut out = vec![T::default(); seq.len()];
    for (i, &v) in seq.iter().enumerate() {
        out[perm[i]] = v;
    }
    out
}

/// Inverse of [`interleave`] with the same seed.
pub fn deinterleave<T: Copy + Default>(seq: &[T], seed: u64) -> Vec<T> {
    let perm = interleave_permutation(seq.len(), seed);
    let mut out = vec![T::default(); seq.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = seq[perm[i]];
    }
    out
}

/// One simulated transmission configuration: scheme, constellation and
/// outer code rate, with the spectral efficiency they multiply out to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkConfig {
    pub scheme: CodeName,
    pub constellation: ConstellationName,
    pub code_rate: PunctureRate,
    /// Spectral efficiency in bits per channel use; must equal
    /// R * bits_per_symbol * Rc.
    pub eta_bpcu: f64,
    /// Information bits per frame.
    pub frame_bits: usize,
    pub interleaver_seed: u64,
    /// Receive antennas (the reference terminal uses 2).
    pub n_rx: usize,
    /// Which satellite antennas a power imbalance scales.
    #[serde(default)]
    pub imbalance_scope: ImbalanceScope,
}

impl LinkConfig {
    pub fn new(
        scheme: CodeName,
        constellation: ConstellationName,
        code_rate: PunctureRate,
        frame_bits: usize,
    ) -> Self {
        let code = make_code(scheme);
        let eta = code.rate() * constellation.bits_per_symbol() as f64 * code_rate.value();
        Self {
            scheme,
            constellation,
            code_rate,
            eta_bpcu: eta,
            frame_bits,
            interleaver_seed: 1,
            n_rx: 2,
            imbalance_scope: ImbalanceScope::SatSite,
        }
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        let code = make_code(self.scheme);
        let eta = code.rate() * self.constellation.bits_per_symbol() as f64 * self.code_rate.value();
        if (eta - self.eta_bpcu).abs() > 1e-12 {
            return Err(LinkError::Config(format!(
                "eta {} does not match R * m * Rc = {} for {}",
                self.eta_bpcu, eta, self.scheme
            )));
        }
        if self.frame_bits == 0 || self.n_rx == 0 {
            return Err(LinkError::Config("frame_bits and n_rx must be positive".into()));
        }
        Ok(())
    }

    /// Noise variance per complex dimension at the given Eb/N0, under unit
    /// transmit energy per channel use: N0 = 1 / (eta * 10^(EbN0/10)).
    /// Clamped positive so an infinite Eb/N0 models the noiseless chain.
    pub fn noise_var(&self, ebn0_db: f64) -> f64 {
        (1.0 / (self.eta_bpcu * 10f64.powf(ebn0_db / 10.0))).max(1e-300)
    }
}

/// Which repetition code plays the "MISO" role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MisoAntennas {
    Two,
    Four,
}

/// The ten simulated scheme/constellation/code-rate combinations at 2 and
/// 4 bpcu.
pub fn reference_configs(frame_bits: usize, miso: MisoAntennas) -> Vec<LinkConfig> {
    let miso_scheme = match miso {
        MisoAntennas::Two => CodeName::MisoRepetition2,
        MisoAntennas::Four => CodeName::Repetition4,
    };
    vec![
        // eta = 2 bpcu
        LinkConfig::new(CodeName::Alamouti, ConstellationName::Qam16, PunctureRate::R1_2, frame_bits),
        LinkConfig::new(miso_scheme, ConstellationName::Qam16, PunctureRate::R1_2, frame_bits),
        LinkConfig::new(CodeName::L3, ConstellationName::Qpsk, PunctureRate::R2_3, frame_bits),
        LinkConfig::new(CodeName::DoubleAlamouti, ConstellationName::Qam16, PunctureRate::R1_2, frame_bits),
        LinkConfig::new(CodeName::L2, ConstellationName::Qam16, PunctureRate::R1_2, frame_bits),
        // eta = 4 bpcu
        LinkConfig::new(CodeName::Alamouti, ConstellationName::Qam64, PunctureRate::R2_3, frame_bits),
        LinkConfig::new(miso_scheme, ConstellationName::Qam64, PunctureRate::R2_3, frame_bits),
        LinkConfig::new(CodeName::L3, ConstellationName::Qam16, PunctureRate::R2_3, frame_bits),
        LinkConfig::new(CodeName::DoubleAlamouti, ConstellationName::Qam64, PunctureRate::R2_3, frame_bits),
        LinkConfig::new(CodeName::L2, ConstellationName::Qam64, PunctureRate::R2_3, frame_bits),
    ]
}

/// Collects the state one frame needs from the channel generator.
struct BlockChannel {
    kind: ChannelKind,
    chain: Option<LmsChain>,
    sat_cols: Vec<usize>,
}

impl BlockChannel {
    fn new<R: Rng + ?Sized>(
        kind: ChannelKind,
        code: &CodeDescriptor,
        lms: Option<&MarkovLmsModel>,
        rng: &mut R,
    ) -> Self {
        let chain = match kind {
            ChannelKind::Rayleigh => None,
            _ => {
                let model = lms.cloned().unwrap_or_else(MarkovLmsModel::illustrative_default);
                Some(LmsChain::new(model, rng))
            }
        };
        let sat_cols = match kind {
            ChannelKind::Lms => (0..code.n_t).collect(),
            _ => code.sat_rows.clone(),
        };
        Self {
            kind,
            chain,
            sat_cols,
        }
    }

    fn next<R: Rng + ?Sized>(
        &mut self,
        n_r: usize,
        code: &CodeDescriptor,
        rng: &mut R,
    ) -> Result<CMat, ChannelError> {
        let h = match self.kind {
            ChannelKind::Rayleigh => draw_rayleigh(n_r, code.n_t, rng),
            _ => {
                let chain = self.chain.as_mut().expect("chain exists for LMS kinds");
                let h = hybrid_channel(chain, &self.sat_cols, n_r, code.n_t, rng)?;
                chain.advance(code.t as u64, rng);
                h
            }
        };
        Ok(h)
    }
}

/// Runs the full coded chain for one frame and returns transmitted and
/// decoded information bits.
///
/// The channel is quasi-static per space-time block and redrawn across
/// blocks. `beta_db` attenuates the satellite antenna columns per the
/// config's imbalance scope.
pub fn run_link_once<R: Rng + ?Sized>(
    cfg: &LinkConfig,
    ebn0_db: f64,
    beta_db: f64,
    channel_kind: ChannelKind,
    lms: Option<&MarkovLmsModel>,
    rng: &mut R,
) -> Result<(Vec<u8>, Vec<u8>), LinkError> {
    cfg.validate()?;
    let code = make_code(cfg.scheme);
    let cons = Constellation::new(cfg.constellation);
    let m_bits = cons.bits_per_symbol();
    let axis_bits = cons.bits_per_axis();
    let noise_var = cfg.noise_var(ebn0_db);
    let amp = code.energy_scale * cons.energy_scale();
    let levels = cons.axis_levels();

    // Per-frame interleaver seed, derived from the frame RNG stream.
    let ilv_seed = cfg.interleaver_seed ^ rng.gen::<u64>();

    let info: Vec<u8> = (0..cfg.frame_bits).map(|_| rng.gen_range(0..2) as u8).collect();
    let coded = conv_encode(&info, cfg.code_rate);
    let interleaved = interleave(&coded, ilv_seed);

    // Pad to a whole number of space-time blocks.
    let bits_per_block = (code.k / 2) * m_bits;
    let blocks = interleaved.len().div_ceil(bits_per_block);
    let mut tx_bits = interleaved.clone();
    tx_bits.resize(blocks * bits_per_block, 0);

    let mut channel = BlockChannel::new(channel_kind, &code, lms, rng);
    let sat_cols = cfg.imbalance_scope.antennas(&code.sat_rows);

    let mut rx_llrs = vec![0.0f64; tx_bits.len()];
    for blk in 0..blocks {
        let chunk = &tx_bits[blk * bits_per_block..(blk + 1) * bits_per_block];
        let symbols = cons.map_bits(chunk)?;
        let g = code.group_symbols(&symbols)?;
        let x = code.encode(&g)?;

        let h = channel.next(cfg.n_rx, &code, rng)?;
        let real =
            apply_imbalance(&ChannelRealization::new(h, noise_var), beta_db, &sat_cols)?;
        let h_eff = real.effective_h();
        let y = &h_eff * &x * Complex64::new(amp, 0.0)
            + draw_noise(cfg.n_rx, code.t, noise_var, rng);

        let model = build_real_model(&code, &h_eff, &y, amp, noise_var)?;
        let mut trace = SphereTrace::default();
        let llrs = soft_llr(&model, &levels, axis_bits, |v, p| {
            ((cons.axis_bits_of_level(v) >> (axis_bits - 1 - p)) & 1) as u8
        }, &mut trace)?;

        // Coordinate-major LLRs back into transmit bit order.
        for (i, &(i_coord, q_coord)) in code.symbol_coords.iter().enumerate() {
            for p in 0..axis_bits {
                rx_llrs[blk * bits_per_block + i * m_bits + p] =
                    llrs[i_coord * axis_bits + p];
                rx_llrs[blk * bits_per_block + i * m_bits + axis_bits + p] =
                    llrs[q_coord * axis_bits + p];
            }
        }
    }

    rx_llrs.truncate(interleaved.len());
    let deinterleaved = deinterleave(&rx_llrs, ilv_seed);
    let decoded = viterbi_decode(&deinterleaved, cfg.frame_bits, cfg.code_rate)?;
    Ok((info, decoded))
}

/// Uncoded variant of the chain (no convolutional code or interleaver):
/// bits map straight onto symbols and hard ML decisions come back.
pub fn run_link_once_uncoded<R: Rng + ?Sized>(
    cfg: &LinkConfig,
    ebn0_db: f64,
    beta_db: f64,
    channel_kind: ChannelKind,
    lms: Option<&MarkovLmsModel>,
    rng: &mut R,
) -> Result<(Vec<u8>, Vec<u8>), LinkError> {
    let code = make_code(cfg.scheme);
    let cons = Constellation::new(cfg.constellation);
    let m_bits = cons.bits_per_symbol();
    let eta = code.rate() * m_bits as f64;
    let noise_var = (1.0 / (eta * 10f64.powf(ebn0_db / 10.0))).max(1e-300);
    let amp = code.energy_scale * cons.energy_scale();
    let levels = cons.axis_levels();
    let alphabet: Vec<Vec<i64>> = vec![levels.clone(); code.k];

    let bits_per_block = (code.k / 2) * m_bits;
    let blocks = cfg.frame_bits.div_ceil(bits_per_block);
    let mut tx_bits: Vec<u8> = (0..blocks * bits_per_block)
        .map(|_| rng.gen_range(0..2) as u8)
        .collect();

    let mut channel = BlockChannel::new(channel_kind, &code, lms, rng);
    let sat_cols = cfg.imbalance_scope.antennas(&code.sat_rows);
    let mut rx_bits = vec![0u8; tx_bits.len()];
    for blk in 0..blocks {
        let chunk = &tx_bits[blk * bits_per_block..(blk + 1) * bits_per_block];
        let symbols = cons.map_bits(chunk)?;
        let g = code.group_symbols(&symbols)?;
        let x = code.encode(&g)?;
        let h = channel.next(cfg.n_rx, &code, rng)?;
        let real =
            apply_imbalance(&ChannelRealization::new(h, noise_var), beta_db, &sat_cols)?;
        let h_eff = real.effective_h();
        let y = &h_eff * &x * Complex64::new(amp, 0.0)
            + draw_noise(cfg.n_rx, code.t, noise_var, rng);
        let model = build_real_model(&code, &h_eff, &y, amp, noise_var)?;
        let mut trace = SphereTrace::default();
        let g_hat = sphere_decode(&model, &alphabet, &mut trace)?;
        let symbols_hat = code.extract_symbols(&g_hat)?;
        for (i, s) in symbols_hat.iter().enumerate() {
            let bits = cons.demap_hard(*s);
            rx_bits[blk * bits_per_block + i * m_bits..blk * bits_per_block + (i + 1) * m_bits]
                .copy_from_slice(&bits);
        }
    }
    tx_bits.truncate(cfg.frame_bits);
    rx_bits.truncate(cfg.frame_bits);
    Ok((tx_bits, rx_bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;

    #[test]
    fn all_zero_input_encodes_to_all_zero() {
        let out = conv_encode(&vec![0u8; 64], PunctureRate::R1_2);
        assert!(out.iter().all(|&b| b == 0));
        assert_eq!(out.len(), 2 * (64 + TAIL_BITS));
    }

    #[test]
    fn impulse_response_matches_octal_generators() {
        // Hand expansion of the octal masks: 171 -> 1111001 (X output),
        // 133 -> 1011011 (Y output), MSB tapping the current bit. A single
        // leading one then produces the tap sequences interleaved X1 Y1 X2 Y2.
        let mut input = vec![0u8; 10];
        input[0] = 1;
        let out = conv_encode(&input, PunctureRate::R1_2);
        let x_taps = [1, 1, 1, 1, 0, 0, 1];
        let y_taps = [1, 0, 1, 1, 0, 1, 1];
        for t in 0..7 {
            assert_eq!(out[2 * t], x_taps[t], "X tap {t}");
            assert_eq!(out[2 * t + 1], y_taps[t], "Y tap {t}");
        }
        // Everything after the impulse leaves the register: zeros.
        assert!(out[14..].iter().all(|&b| b == 0));
    }

    #[test]
    fn punctured_lengths_are_exact() {
        for (rate, n) in [
            (PunctureRate::R1_2, 100usize),
            (PunctureRate::R2_3, 100),
            (PunctureRate::R3_4, 99),
        ] {
            let bits: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
            let out = conv_encode(&bits, rate);
            assert_eq!(out.len(), rate.punctured_len(n + TAIL_BITS), "{rate}");
            // Rate bookkeeping: kept fraction approaches 1/Rc.
            let steps = n + TAIL_BITS;
            let expect = (2.0 * steps as f64 * rate.value() / 0.5).round() as usize / 2;
            // punctured_len = steps / Rc exactly when steps divides the period.
            if steps % rate.patterns().0.len() == 0 {
                assert_eq!(out.len(), (steps as f64 / rate.value()).round() as usize);
            }
            let _ = expect;
        }
    }

    fn hard_llrs(bits: &[u8]) -> Vec<f64> {
        bits.iter().map(|&b| if b == 0 { 4.0 } else { -4.0 }).collect()
    }

    #[test]
    fn viterbi_recovers_noiseless_frames_all_rates() {
        let mut rng = StdRng::seed_from_u64(81);
        for rate in [PunctureRate::R1_2, PunctureRate::R2_3, PunctureRate::R3_4] {
            for _ in 0..20 {
                let n = 120;
                let bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
                let coded = conv_encode(&bits, rate);
                let decoded = viterbi_decode(&hard_llrs(&coded), n, rate).unwrap();
                assert_eq!(decoded, bits, "rate {rate}");
            }
        }
    }

    #[test]
    fn viterbi_corrects_single_hard_error() {
        let mut rng = StdRng::seed_from_u64(82);
        for _ in 0..1000 {
            let n = 200;
            let bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
            let mut coded = conv_encode(&bits, PunctureRate::R1_2);
            let flip = rng.gen_range(0..coded.len());
            coded[flip] ^= 1;
            let decoded = viterbi_decode(&hard_llrs(&coded), n, PunctureRate::R1_2).unwrap();
            assert_eq!(decoded, bits, "flip at {flip}");
        }
    }

    #[test]
    fn viterbi_rejects_wrong_length() {
        let llrs = vec![0.0; 13];
        assert!(matches!(
            viterbi_decode(&llrs, 10, PunctureRate::R1_2),
            Err(LinkError::LlrLength { .. })
        ));
    }

    #[test]
    fn interleaver_roundtrip_and_determinism() {
        let mut rng = StdRng::seed_from_u64(83);
        for len in [1usize, 2, 17, 1000] {
            let data: Vec<u8> = (0..len).map(|_| rng.gen_range(0..2) as u8).collect();
            let a = interleave(&data, 99);
            let b = interleave(&data, 99);
            assert_eq!(a, b);
            assert_eq!(deinterleave(&a, 99), data);
            if len == 1 {
                assert_eq!(a, data);
            }
        }
        // Different seeds permute differently (overwhelmingly likely).
        let data: Vec<u8> = (0..256).map(|i| (i % 2) as u8).collect();
        assert_ne!(interleave(&data, 1), interleave(&data, 2));
    }

    #[test]
    fn reference_config_eta_arithmetic() {
        let configs = reference_configs(1024, MisoAntennas::Two);
        let expect = [2.0, 2.0, 2.0, 2.0, 2.0, 4.0, 4.0, 4.0, 4.0, 4.0];
        for (cfg, &eta) in configs.iter().zip(&expect) {
            cfg.validate().unwrap();
            assert_eq!(cfg.eta_bpcu, eta, "{:?}", cfg.scheme);
        }
        // The two quoted rows.
        let l3 = &configs[2];
        assert_eq!(
            (l3.scheme, l3.constellation, l3.code_rate),
            (CodeName::L3, ConstellationName::Qpsk, PunctureRate::R2_3)
        );
        assert_eq!(l3.eta_bpcu, 1.5 * 2.0 * (2.0 / 3.0));
        let ala4 = &configs[5];
        assert_eq!(ala4.eta_bpcu, 4.0);
        assert_eq!(ala4.constellation, ConstellationName::Qam64);
    }

    #[test]
    fn eta_mismatch_is_rejected() {
        let mut cfg = LinkConfig::new(
            CodeName::Alamouti,
            ConstellationName::Qam16,
            PunctureRate::R1_2,
            256,
        );
        cfg.eta_bpcu = 3.0;
        assert!(matches!(cfg.validate(), Err(LinkError::Config(_))));
    }

    #[test]
    fn noiseless_chain_is_error_free() {
        let mut rng = StdRng::seed_from_u64(84);
        for cfg in [
            LinkConfig::new(CodeName::Alamouti, ConstellationName::Qam16, PunctureRate::R1_2, 512),
            LinkConfig::new(CodeName::L3, ConstellationName::Qpsk, PunctureRate::R2_3, 512),
        ] {
            let (tx, rx) = run_link_once(
                &cfg,
                f64::INFINITY,
                0.0,
                ChannelKind::Rayleigh,
                None,
                &mut rng,
            )
            .unwrap();
            assert_eq!(tx, rx, "{:?}", cfg.scheme);
        }
    }

    #[test]
    fn chain_is_deterministic_for_fixed_seed() {
        let cfg = LinkConfig::new(
            CodeName::Alamouti,
            ConstellationName::Qam16,
            PunctureRate::R1_2,
            256,
        );
        let run = |seed: u64| {
            let mut rng = StdRng::seed_from_u64(seed);
            run_link_once(&cfg, 6.0, -6.0, ChannelKind::Rayleigh, None, &mut rng).unwrap()
        };
        let (tx1, rx1) = run(7);
        let (tx2, rx2) = run(7);
        assert_eq!(tx1, tx2);
        assert_eq!(rx1, rx2);
    }

    #[test]
    fn noiseless_hybrid_channel_chain() {
        let cfg = LinkConfig::new(
            CodeName::L3,
            ConstellationName::Qpsk,
            PunctureRate::R2_3,
            256,
        );
        let mut rng = StdRng::seed_from_u64(85);
        let (tx, rx) = run_link_once(
            &cfg,
            f64::INFINITY,
            0.0,
            ChannelKind::Hybrid,
            None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(tx, rx);
    }

    #[test]
    fn uncoded_chain_noiseless() {
        let cfg = LinkConfig::new(
            CodeName::Alamouti,
            ConstellationName::Qam16,
            PunctureRate::R1_2,
            256,
        );
        let mut rng = StdRng::seed_from_u64(86);
        let (tx, rx) =
            run_link_once_uncoded(&cfg, 300.0, 0.0, ChannelKind::Rayleigh, None, &mut rng)
                .unwrap();
        assert_eq!(tx, rx);
    }

    #[test]
    fn coding_gain_is_positive_at_moderate_ebn0() {
        // Coded BER <= uncoded BER for alamouti/16-QAM at the same Eb/N0.
        let cfg = LinkConfig::new(
            CodeName::Alamouti,
            ConstellationName::Qam16,
            PunctureRate::R1_2,
            2048,
        );
        let mut rng = StdRng::seed_from_u64(87);
        let frames = 30;
        let mut coded_err = 0u64;
        let mut coded_bits = 0u64;
        let mut uncoded_err = 0u64;
        let mut uncoded_bits = 0u64;
        for _ in 0..frames {
            let (tx, rx) =
                run_link_once(&cfg, 8.0, 0.0, ChannelKind::Rayleigh, None, &mut rng).unwrap();
            coded_err += tx.iter().zip(&rx).filter(|(a, b)| a != b).count() as u64;
            coded_bits += tx.len() as u64;
            let (txu, rxu) =
                run_link_once_uncoded(&cfg, 8.0, 0.0, ChannelKind::Rayleigh, None, &mut rng)
                    .unwrap();
            uncoded_err += txu.iter().zip(&rxu).filter(|(a, b)| a != b).count() as u64;
            uncoded_bits += txu.len() as u64;
        }
        let coded_ber = coded_err as f64 / coded_bits as f64;
        let uncoded_ber = uncoded_err as f64 / uncoded_bits as f64;
        assert!(
            coded_ber <= uncoded_ber,
            "coded {coded_ber} vs uncoded {uncoded_ber}"
        );
    }
}
