//! Space-time lattice code constructions.
//!
//! Every code is reduced to one uniform representation: K real dispersion
//! matrices B_k spanning the code lattice, so that a codeword is
//! X = sum g_k * B_k for an integer coefficient vector g. The printed
//! per-code matrices act as golden references in the test suite; one generic
//! encoder, detector and determinant search then serves every scheme.
//!
//! Codes and shapes:
//!
//! | name                    | n_t | T | K  | rate R |
//! |-------------------------|-----|---|----|--------|
//! | alamouti                | 2   | 2 | 4  | 1      |
//! | miso_repetition_2       | 2   | 1 | 2  | 1      |
//! | repetition_4            | 4   | 1 | 2  | 1      |
//! | jafarkhani_qo           | 4   | 4 | 8  | 1      |
//! | double_alamouti         | 4   | 2 | 4  | 1      |
//! | alamouti_sigma          | 4   | 2 | 6  | 3/2    |
//! | l2                      | 4   | 4 | 8  | 1      |
//! | double_alamouti_swapped | 4   | 2 | 8  | 2      |
//! | c1_mido                 | 4   | 4 | 16 | 2      |
//! | qam_alamouti_3tx        | 3   | 2 | 4  | 1      |
//! | l3                      | 3   | 2 | 6  | 3/2    |

use crate::algebra::{CycloElement, GaussianInt, RootOrder};
use crate::CMat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodeError {
    #[error("unknown code name '{0}'")]
    UnknownCode(String),
    #[error("coefficient vector has length {got}, code expects K = {expected}")]
    CoefficientLength { expected: usize, got: usize },
    #[error("symbol list has length {got}, code expects K/2 = {expected}")]
    SymbolCount { expected: usize, got: usize },
    #[error("descriptor parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dispersion matrices are linearly dependent (real rank {rank} < K = {k})")]
    DependentDispersion { rank: usize, k: usize },
}

/// Integer lattice coordinates of one codeword.
pub type CoeffVector = Vec<i64>;

/// The code constructions shipped with the library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodeName {
    #[serde(rename = "alamouti")]
    Alamouti,
    #[serde(rename = "miso_repetition_2")]
    MisoRepetition2,
    #[serde(rename = "repetition_4")]
    Repetition4,
    #[serde(rename = "jafarkhani_qo")]
    JafarkhaniQo,
    #[serde(rename = "double_alamouti")]
    DoubleAlamouti,
    #[serde(rename = "alamouti_sigma")]
    AlamoutiSigma,
    #[serde(rename = "l2")]
    L2,
    #[serde(rename = "double_alamouti_swapped")]
    DoubleAlamoutiSwapped,
    #[serde(rename = "c1_mido")]
    C1Mido,
    #[serde(rename = "qam_alamouti_3tx")]
    QamAlamouti3tx,
    #[serde(rename = "l3")]
    L3,
}

pub const ALL_CODES: [CodeName; 11] = [
    CodeName::Alamouti,
    CodeName::MisoRepetition2,
    CodeName::Repetition4,
    CodeName::JafarkhaniQo,
    CodeName::DoubleAlamouti,
    CodeName::AlamoutiSigma,
    CodeName::L2,
    CodeName::DoubleAlamoutiSwapped,
    CodeName::C1Mido,
    CodeName::QamAlamouti3tx,
    CodeName::L3,
];

impl CodeName {
    pub fn as_str(self) -> &'static str {
        match self {
            CodeName::Alamouti => "alamouti",
            CodeName::MisoRepetition2 => "miso_repetition_2",
            CodeName::Repetition4 => "repetition_4",
            CodeName::JafarkhaniQo => "jafarkhani_qo",
            CodeName::DoubleAlamouti => "double_alamouti",
            CodeName::AlamoutiSigma => "alamouti_sigma",
            CodeName::L2 => "l2",
            CodeName::DoubleAlamoutiSwapped => "double_alamouti_swapped",
            CodeName::C1Mido => "c1_mido",
            CodeName::QamAlamouti3tx => "qam_alamouti_3tx",
            CodeName::L3 => "l3",
        }
    }
}

impl fmt::Display for CodeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CodeName {
    type Err = CodeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ALL_CODES
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CodeError::UnknownCode(s.to_string()))
    }
}

/// A space-time lattice code: K dispersion matrices plus transmit metadata.
#[derive(Debug, Clone)]
pub struct CodeDescriptor {
    /// Display name; one of [`CodeName`] for built-ins, arbitrary for imports.
    pub name: String,
    /// Transmit antennas (matrix rows).
    pub n_t: usize,
    /// Channel uses per block (matrix columns).
    pub t: usize,
    /// Lattice rank in real dimensions.
    pub k: usize,
    /// Basis matrices B_k, each n_t x T.
    pub dispersion: Vec<CMat>,
    /// Rows transmitted by the satellite site.
    pub sat_rows: Vec<usize>,
    /// (I, Q) coordinate indices for each of the K/2 complex symbol slots.
    pub symbol_coords: Vec<(usize, usize)>,
    /// Coordinate ranges of the construction-level symbol slots
    /// (c_i, a, b, x_i, ...).
    pub symbol_slots: Vec<std::ops::Range<usize>>,
    /// Amplitude factor bringing the average transmit energy per channel use
    /// to 1 under a unit-energy symbol constellation.
    pub energy_scale: f64,
}

impl CodeDescriptor {
    /// Code rate R = K / (2T) in complex symbols per channel use.
    pub fn rate(&self) -> f64 {
        self.k as f64 / (2.0 * self.t as f64)
    }

    /// Dimension rate R1 = K / T in real dimensions per channel use.
    pub fn dim_rate(&self) -> f64 {
        self.k as f64 / self.t as f64
    }

    /// Rows transmitted by the terrestrial site.
    pub fn ter_rows(&self) -> Vec<usize> {
        (0..self.n_t).filter(|r| !self.sat_rows.contains(r)).collect()
    }

    /// X = sum g_k B_k.
    pub fn encode(&self, g: &[i64]) -> Result<CMat, CodeError> {
        if g.len() != self.k {
            return Err(CodeError::CoefficientLength {
                expected: self.k,
                got: g.len(),
            });
        }
        let mut x = CMat::zeros(self.n_t, self.t);
        for (gk, b) in g.iter().zip(&self.dispersion) {
            if *gk != 0 {
                x += b * Complex64::new(*gk as f64, 0.0);
            }
        }
        Ok(x)
    }

    /// Packs K/2 QAM symbols into lattice coordinates using the pinned layout.
    ///
    /// Symbol i fills the coordinate pair `symbol_coords[i]` with its real and
    /// imaginary part. For the zeta_8-valued slots this realises a = s + t*zeta_8,
    /// and for c1_mido each x_i takes two symbols filling (y1,y2) and (y3,y4).
    pub fn group_symbols(&self, symbols: &[GaussianInt]) -> Result<CoeffVector, CodeError> {
        if symbols.len() != self.k / 2 {
            return Err(CodeError::SymbolCount {
                expected: self.k / 2,
                got: symbols.len(),
            });
        }
        let mut g = vec![0i64; self.k];
        for (s, &(i_coord, q_coord)) in symbols.iter().zip(&self.symbol_coords) {
            g[i_coord] = s.re;
            g[q_coord] = s.im;
        }
        Ok(g)
    }

    /// Inverse of [`CodeDescriptor::group_symbols`].
    pub fn extract_symbols(&self, g: &[i64]) -> Result<Vec<GaussianInt>, CodeError> {
        if g.len() != self.k {
            return Err(CodeError::CoefficientLength {
                expected: self.k,
                got: g.len(),
            });
        }
        Ok(self
            .symbol_coords
            .iter()
            .map(|&(i_coord, q_coord)| GaussianInt::new(g[i_coord], g[q_coord]))
            .collect())
    }

    /// Real rank of the stacked dispersion matrices.
    pub fn dispersion_rank(&self) -> usize {
        let rows = 2 * self.n_t * self.t;
        let mut s = crate::RMat::zeros(rows, self.k);
        for (k, b) in self.dispersion.iter().enumerate() {
            for (idx, v) in b.iter().enumerate() {
                s[(idx, k)] = v.re;
                s[(self.n_t * self.t + idx, k)] = v.im;
            }
        }
        s.rank(1e-9)
    }
}

fn cpx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pair(g: &[i64], i: usize) -> Complex64 {
    cpx(g[i] as f64, g[i + 1] as f64)
}

/// a = s + t*zeta_8 from coords (s.re, t.re, s.im, t.im), and sigma(a).
fn zeta8_slot(g: &[i64], base: usize) -> (Complex64, Complex64) {
    let a = CycloElement::new(
        RootOrder::Zeta8,
        [g[base], g[base + 1], g[base + 2], g[base + 3]],
    );
    (a.embed(), a.sigma8().expect("zeta8 element").embed())
}

/// x_i of the c1_mido code in the difference basis
/// x = y1(1-z) + y2(z-z^2) + y3(z^2-z^3) + y4(z^3-z^4), z = zeta_5,
/// returned together with sigma(x) for sigma: z -> z^3.
fn zeta5_diff_slot(g: &[i64], base: usize) -> (Complex64, Complex64) {
    let (y1, y2, y3, y4) = (g[base], g[base + 1], g[base + 2], g[base + 3]);
    // Power-basis coordinates after reducing z^4 = -(1 + z + z^2 + z^3).
    let x = CycloElement::new(
        RootOrder::Zeta5,
        [y1 + y4, y2 - y1 + y4, y3 - y2 + y4, 2 * y4 - y3],
    );
    (x.embed(), x.sigma5().expect("zeta5 element").embed())
}

fn alamouti_block(c1: Complex64, c2: Complex64) -> [[Complex64; 2]; 2] {
    [[c1, -c2.conj()], [c2, c1.conj()]]
}

/// Evaluates the printed code matrix for one coefficient vector.
///
/// This is the ground-truth map the dispersion basis is extracted from; it is
/// R-linear in g, so the generic lattice encoder reproduces it exactly.
fn structural_encode(name: CodeName, g: &[i64]) -> CMat {
    let j = cpx(0.0, 1.0);
    match name {
        CodeName::Alamouti => {
            let (c1, c2) = (pair(g, 0), pair(g, 2));
            let b = alamouti_block(c1, c2);
            CMat::from_row_slice(2, 2, &[b[0][0], b[0][1], b[1][0], b[1][1]])
        }
        CodeName::MisoRepetition2 => {
            let c = pair(g, 0);
            CMat::from_row_slice(2, 1, &[c, c])
        }
        CodeName::Repetition4 => {
            let c = pair(g, 0);
            CMat::from_row_slice(4, 1, &[c, c, c, c])
        }
        CodeName::JafarkhaniQo => {
            // Block Alamouti of Alamouti blocks: [[X1, -X2*], [X2, X1*]],
            // with * the entrywise conjugate.
            let x1 = alamouti_block(pair(g, 0), pair(g, 2));
            let x2 = alamouti_block(pair(g, 4), pair(g, 6));
            let mut m = CMat::zeros(4, 4);
            for r in 0..2 {
                for c in 0..2 {
                    m[(r, c)] = x1[r][c];
                    m[(r, c + 2)] = -x2[r][c].conj();
                    m[(r + 2, c)] = x2[r][c];
                    m[(r + 2, c + 2)] = x1[r][c].conj();
                }
            }
            m
        }
        CodeName::DoubleAlamouti => {
            let b = alamouti_block(pair(g, 0), pair(g, 2));
            CMat::from_row_slice(
                4,
                2,
                &[
                    b[0][0], b[0][1], b[1][0], b[1][1], b[0][0], b[0][1], b[1][0], b[1][1],
                ],
            )
        }
        CodeName::AlamoutiSigma => {
            let (a, sa) = zeta8_slot(g, 0);
            let b = pair(g, 4);
            CMat::from_row_slice(
                4,
                2,
                &[a, -b.conj(), b, a.conj(), sa, -b.conj(), b, sa.conj()],
            )
        }
        CodeName::L2 => {
            let (c1, c2, c3, c4) = (pair(g, 0), pair(g, 2), pair(g, 4), pair(g, 6));
            CMat::from_row_slice(
                4,
                4,
                &[
                    c1,
                    j * c2,
                    -c3.conj(),
                    -c4.conj(),
                    c2,
                    c1,
                    j * c4.conj(),
                    -c3.conj(),
                    c3,
                    j * c4,
                    c1.conj(),
                    c2.conj(),
                    c4,
                    c3,
                    -j * c2.conj(),
                    c1.conj(),
                ],
            )
        }
        CodeName::DoubleAlamoutiSwapped => {
            // Independent Alamouti blocks per site, 2nd and 3rd row switched.
            let (a, b, c, d) = (pair(g, 0), pair(g, 2), pair(g, 4), pair(g, 6));
            CMat::from_row_slice(
                4,
                2,
                &[a, -b.conj(), c, -d.conj(), b, a.conj(), d, c.conj()],
            )
        }
        CodeName::C1Mido => {
            let r = (8.0f64 / 9.0).powf(0.25);
            let (r2, r3) = (r * r, r * r * r);
            let (x0, s0) = zeta5_diff_slot(g, 0);
            let (x1, s1) = zeta5_diff_slot(g, 4);
            let (x2, s2) = zeta5_diff_slot(g, 8);
            let (x3, s3) = zeta5_diff_slot(g, 12);
            CMat::from_row_slice(
                4,
                4,
                &[
                    x0,
                    -r2 * x1.conj(),
                    -r3 * s3,
                    -r * s2.conj(),
                    r2 * x1,
                    x0.conj(),
                    r * s2,
                    -r3 * s3.conj(),
                    r * x2,
                    -r3 * x3.conj(),
                    s0,
                    -r2 * s1.conj(),
                    r3 * x3,
                    r * x2.conj(),
                    r2 * s1,
                    s0.conj(),
                ],
            )
        }
        CodeName::QamAlamouti3tx => {
            let (a, b) = (pair(g, 0), pair(g, 2));
            CMat::from_row_slice(3, 2, &[a, b, a, -b.conj(), b, a.conj()])
        }
        CodeName::L3 => {
            let (a, sa) = zeta8_slot(g, 0);
            let b = pair(g, 4);
            CMat::from_row_slice(3, 2, &[a, b, sa, -b.conj(), b, sa.conj()])
        }
    }
}

fn shape(name: CodeName) -> (usize, usize, usize) {
    match name {
        CodeName::Alamouti => (2, 2, 4),
        CodeName::MisoRepetition2 => (2, 1, 2),
        CodeName::Repetition4 => (4, 1, 2),
        CodeName::JafarkhaniQo => (4, 4, 8),
        CodeName::DoubleAlamouti => (4, 2, 4),
        CodeName::AlamoutiSigma => (4, 2, 6),
        CodeName::L2 => (4, 4, 8),
        CodeName::DoubleAlamoutiSwapped => (4, 2, 8),
        CodeName::C1Mido => (4, 4, 16),
        CodeName::QamAlamouti3tx => (3, 2, 4),
        CodeName::L3 => (3, 2, 6),
    }
}

/// Satellite rows: the first ceil(n_t/2) rows for 2- and 4-Tx codes, row 0
/// for the 3-Tx codes whose top block is the single satellite antenna.
fn sat_rows(name: CodeName) -> Vec<usize> {
    let (n_t, _, _) = shape(name);
    match n_t {
        3 => vec![0],
        n => (0..n.div_ceil(2)).collect(),
    }
}

fn symbol_layout(name: CodeName) -> (Vec<(usize, usize)>, Vec<std::ops::Range<usize>>) {
    let (_, _, k) = shape(name);
    match name {
        // A zeta_8 slot a = s + t*zeta_8 on coords 0..4, then b on 4..6.
        CodeName::AlamoutiSigma | CodeName::L3 => {
            (vec![(0, 2), (1, 3), (4, 5)], vec![0..4, 4..6])
        }
        // Four zeta_5 slots x_i, two symbols each on (y1,y2) and (y3,y4).
        CodeName::C1Mido => {
            let coords = (0..8).map(|i| (2 * i, 2 * i + 1)).collect();
            (coords, (0..4).map(|i| 4 * i..4 * i + 4).collect())
        }
        // Plain Z[j] parameterisation: symbol i on coords (2i, 2i+1).
        _ => {
            let coords: Vec<_> = (0..k / 2).map(|i| (2 * i, 2 * i + 1)).collect();
            let slots = (0..k / 2).map(|i| 2 * i..2 * i + 2).collect();
            (coords, slots)
        }
    }
}

/// Builds the descriptor for a named construction.
///
/// Dispersion matrices are the structural encodings of the K unit coefficient
/// vectors; the energy scale makes the average transmit energy per channel
/// use equal 1 under any unit-energy square QAM (each lattice coordinate then
/// has variance 1/2, and cross terms vanish by symmetry).
pub fn make_code(name: CodeName) -> CodeDescriptor {
    let (n_t, t, k) = shape(name);
    let dispersion: Vec<CMat> = (0..k)
        .map(|i| {
            let mut g = vec![0i64; k];
            g[i] = 1;
            structural_encode(name, &g)
        })
        .collect();
    let basis_energy: f64 = dispersion.iter().map(|b| b.norm_squared()).sum();
    let energy_scale = (t as f64 / (0.5 * basis_energy)).sqrt();
    let (symbol_coords, symbol_slots) = symbol_layout(name);
    debug_assert!(symbol_coords_cover(&symbol_coords, k));
    let code = CodeDescriptor {
        name: name.as_str().to_string(),
        n_t,
        t,
        k,
        dispersion,
        sat_rows: sat_rows(name),
        symbol_coords,
        symbol_slots,
        energy_scale,
    };
    debug_assert_eq!(code.dispersion_rank(), k, "{name}: dependent dispersion");
    code
}

pub fn make_code_by_name(name: &str) -> Result<CodeDescriptor, CodeError> {
    Ok(make_code(name.parse::<CodeName>()?))
}

fn symbol_coords_cover(coords: &[(usize, usize)], k: usize) -> bool {
    let mut seen = vec![false; k];
    for &(a, b) in coords {
        if a >= k || b >= k || seen[a] || seen[b] {
            return false;
        }
        seen[a] = true;
        seen[b] = true;
    }
    seen.iter().all(|&s| s)
}

/// Writes a descriptor in the line-based text interchange format:
/// a header (`name`, `nt`, `t`, `k`, `sat_rows`, `energy_scale`) followed by
/// one `b` line per dispersion matrix holding 2 * n_t * T floats, row-major,
/// real part before imaginary part.
pub fn write_descriptor(code: &CodeDescriptor) -> String {
    let mut out = String::new();
    out.push_str("stcode v1\n");
    out.push_str(&format!("name {}\n", code.name));
    out.push_str(&format!("nt {}\n", code.n_t));
    out.push_str(&format!("t {}\n", code.t));
    out.push_str(&format!("k {}\n", code.k));
    let rows: Vec<String> = code.sat_rows.iter().map(|r| r.to_string()).collect();
    out.push_str(&format!("sat_rows {}\n", rows.join(" ")));
    out.push_str(&format!("energy_scale {:.17e}\n", code.energy_scale));
    for b in &code.dispersion {
        out.push('b');
        for r in 0..code.n_t {
            for c in 0..code.t {
                let v = b[(r, c)];
                out.push_str(&format!(" {:.17e} {:.17e}", v.re, v.im));
            }
        }
        out.push('\n');
    }
    out
}

/// Parses the text format produced by [`write_descriptor`].
///
/// Imported codes get the default pairwise symbol layout; they are meant for
/// the determinant analysis front end, which only needs the lattice.
pub fn parse_descriptor(text: &str) -> Result<CodeDescriptor, CodeError> {
    let err = |line: usize, msg: &str| CodeError::Parse {
        line,
        msg: msg.to_string(),
    };
    let mut name = None;
    let mut n_t = None;
    let mut t = None;
    let mut k = None;
    let mut sat = None;
    let mut energy_scale = None;
    let mut dispersion: Vec<CMat> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "stcode" => {
                if rest != "v1" {
                    return Err(err(i + 1, "unsupported format version"));
                }
            }
            "name" => name = Some(rest.to_string()),
            "nt" => n_t = Some(rest.parse().map_err(|_| err(i + 1, "bad nt"))?),
            "t" => t = Some(rest.parse().map_err(|_| err(i + 1, "bad t"))?),
            "k" => k = Some(rest.parse().map_err(|_| err(i + 1, "bad k"))?),
            "sat_rows" => {
                let rows: Result<Vec<usize>, _> =
                    rest.split_whitespace().map(|s| s.parse()).collect();
                sat = Some(rows.map_err(|_| err(i + 1, "bad sat_rows"))?);
            }
            "energy_scale" => {
                energy_scale = Some(rest.parse().map_err(|_| err(i + 1, "bad energy_scale"))?)
            }
            "b" => {
                let (n_t, t) = (
                    n_t.ok_or_else(|| err(i + 1, "b before nt"))?,
                    t.ok_or_else(|| err(i + 1, "b before t"))?,
                );
                let vals: Result<Vec<f64>, _> =
                    rest.split_whitespace().map(|s| s.parse()).collect();
                let vals = vals.map_err(|_| err(i + 1, "bad matrix entry"))?;
                if vals.len() != 2 * n_t * t {
                    return Err(err(i + 1, "wrong number of matrix entries"));
                }
                let mut m = CMat::zeros(n_t, t);
                for r in 0..n_t {
                    for c in 0..t {
                        let base = 2 * (r * t + c);
                        m[(r, c)] = cpx(vals[base], vals[base + 1]);
                    }
                }
                dispersion.push(m);
            }
            _ => return Err(err(i + 1, "unknown field")),
        }
    }
    let k = k.ok_or_else(|| err(0, "missing k"))?;
    if dispersion.len() != k {
        return Err(err(0, "dispersion count does not match k"));
    }
    let (coords, slots) = {
        let coords: Vec<_> = (0..k / 2).map(|i| (2 * i, 2 * i + 1)).collect();
        let slots: Vec<_> = (0..k / 2).map(|i| 2 * i..2 * i + 2).collect();
        (coords, slots)
    };
    let code = CodeDescriptor {
        name: name.ok_or_else(|| err(0, "missing name"))?,
        n_t: n_t.ok_or_else(|| err(0, "missing nt"))?,
        t: t.ok_or_else(|| err(0, "missing t"))?,
        k,
        dispersion,
        sat_rows: sat.ok_or_else(|| err(0, "missing sat_rows"))?,
        symbol_coords: coords,
        symbol_slots: slots,
        energy_scale: energy_scale.ok_or_else(|| err(0, "missing energy_scale"))?,
    };
    let rank = code.dispersion_rank();
    if rank != code.k {
        return Err(CodeError::DependentDispersion { rank, k: code.k });
    }
    Ok(code)
}
