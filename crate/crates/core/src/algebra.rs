//! Exact integer arithmetic in the rings underlying the code constructions:
//! Gaussian integers Z[j], the degree-4 cyclotomic rings Z[zeta_8] and Z[zeta_5],
//! their relevant automorphisms and relative norms, and the Gray-labelled QAM
//! constellations used for transmission.
//!
//! Elements are kept as integer coordinate vectors; embedding into floating
//! complex numbers happens only when a codeword is actually built. Determinant
//! and norm identities are therefore checked without floating residue.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("unsupported root of unity order {0} (only 5 and 8 are implemented)")]
    UnsupportedRootOrder(u32),
    #[error("operation requires a zeta_{expected} element, got zeta_{got}")]
    RootOrderMismatch { expected: u32, got: u32 },
    #[error("bit string length {len} is not a multiple of {bits_per_symbol} bits per symbol")]
    BitLengthMismatch { len: usize, bits_per_symbol: usize },
}

/// A Gaussian integer a + b*j.
///
/// Every nonzero Gaussian integer has |a + bj| >= 1, which is what makes the
/// QAM-parameterised codes non-vanishing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GaussianInt {
    pub re: i64,
    pub im: i64,
}

impl GaussianInt {
    pub const ZERO: GaussianInt = GaussianInt { re: 0, im: 0 };
    pub const ONE: GaussianInt = GaussianInt { re: 1, im: 0 };

    pub fn new(re: i64, im: i64) -> Self {
        Self { re, im }
    }

    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    /// |z|^2 as an exact integer.
    pub fn norm_sqr(self) -> i64 {
        self.re * self.re + self.im * self.im
    }

    pub fn is_zero(self) -> bool {
        self.re == 0 && self.im == 0
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re as f64, self.im as f64)
    }
}

impl std::ops::Add for GaussianInt {
    type Output = GaussianInt;
    fn add(self, rhs: GaussianInt) -> GaussianInt {
        GaussianInt::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl std::ops::Sub for GaussianInt {
    type Output = GaussianInt;
    fn sub(self, rhs: GaussianInt) -> GaussianInt {
        GaussianInt::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl std::ops::Mul for GaussianInt {
    type Output = GaussianInt;
    fn mul(self, rhs: GaussianInt) -> GaussianInt {
        GaussianInt::new(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )
    }
}

impl std::ops::Neg for GaussianInt {
    type Output = GaussianInt;
    fn neg(self) -> GaussianInt {
        GaussianInt::new(-self.re, -self.im)
    }
}

impl fmt::Display for GaussianInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:+}j", self.re, self.im)
    }
}

/// Which primitive root of unity an element lives over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RootOrder {
    Zeta5,
    Zeta8,
}

impl RootOrder {
    pub fn order(self) -> u32 {
        match self {
            RootOrder::Zeta5 => 5,
            RootOrder::Zeta8 => 8,
        }
    }

    pub fn try_from_order(n: u32) -> Result<Self, AlgebraError> {
        match n {
            5 => Ok(RootOrder::Zeta5),
            8 => Ok(RootOrder::Zeta8),
            other => Err(AlgebraError::UnsupportedRootOrder(other)),
        }
    }
}

/// An element of Z[zeta_5] or Z[zeta_8] in the power basis 1, zeta, zeta^2, zeta^3.
///
/// Both fields have degree 4 over Q. Reduction rules:
/// zeta_8^4 = -1, and zeta_5^4 = -(1 + zeta + zeta^2 + zeta^3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CycloElement {
    pub root: RootOrder,
    pub coords: [i64; 4],
}

impl CycloElement {
    pub fn new(root: RootOrder, coords: [i64; 4]) -> Self {
        Self { root, coords }
    }

    pub fn zero(root: RootOrder) -> Self {
        Self::new(root, [0; 4])
    }

    pub fn one(root: RootOrder) -> Self {
        Self::new(root, [1, 0, 0, 0])
    }

    pub fn is_zero(&self) -> bool {
        self.coords == [0; 4]
    }

    /// Builds s + t*zeta_8 from two Gaussian integers, using j = zeta_8^2.
    ///
    /// This is the pinned layout by which pairs of QAM symbols fill a zeta_8
    /// slot: coords = (s.re, t.re, s.im, t.im).
    pub fn zeta8_from_qam_pair(s: GaussianInt, t: GaussianInt) -> Self {
        Self::new(RootOrder::Zeta8, [s.re, t.re, s.im, t.im])
    }

    /// Inverse of [`CycloElement::zeta8_from_qam_pair`].
    pub fn zeta8_to_qam_pair(&self) -> Result<(GaussianInt, GaussianInt), AlgebraError> {
        self.expect_root(RootOrder::Zeta8)?;
        let [c0, c1, c2, c3] = self.coords;
        Ok((GaussianInt::new(c0, c2), GaussianInt::new(c1, c3)))
    }

    fn expect_root(&self, expected: RootOrder) -> Result<(), AlgebraError> {
        if self.root == expected {
            Ok(())
        } else {
            Err(AlgebraError::RootOrderMismatch {
                expected: expected.order(),
                got: self.root.order(),
            })
        }
    }

    /// Numeric embedding: sum of coords[k] * zeta^k with zeta = e^{2 pi j / n}.
    pub fn embed(&self) -> Complex64 {
        let n = self.root.order() as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &c) in self.coords.iter().enumerate() {
            if c != 0 {
                let angle = 2.0 * PI * (k as f64) / n;
                acc += (c as f64) * Complex64::new(angle.cos(), angle.sin());
            }
        }
        acc
    }

    pub fn add(&self, rhs: &CycloElement) -> Result<CycloElement, AlgebraError> {
        self.expect_root(rhs.root)?;
        let mut coords = [0i64; 4];
        for k in 0..4 {
            coords[k] = self.coords[k] + rhs.coords[k];
        }
        Ok(CycloElement::new(self.root, coords))
    }

    /// Exact product with reduction modulo the minimal polynomial.
    pub fn mul(&self, rhs: &CycloElement) -> Result<CycloElement, AlgebraError> {
        self.expect_root(rhs.root)?;
        // Degree-6 convolution before reduction.
        let mut raw = [0i64; 7];
        for (i, &a) in self.coords.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (k, &b) in rhs.coords.iter().enumerate() {
                raw[i + k] += a * b;
            }
        }
        let mut coords = [raw[0], raw[1], raw[2], raw[3]];
        match self.root {
            RootOrder::Zeta8 => {
                // zeta^4 = -1: zeta^{4+k} = -zeta^k.
                for k in 0..3 {
                    coords[k] -= raw[4 + k];
                }
            }
            RootOrder::Zeta5 => {
                // zeta^5 = 1 brings degrees 5,6 down, then zeta^4 = -(1+zeta+zeta^2+zeta^3).
                coords[0] += raw[5];
                coords[1] += raw[6];
                for c in coords.iter_mut() {
                    *c -= raw[4];
                }
            }
        }
        Ok(CycloElement::new(self.root, coords))
    }

    /// The generator of Gal(Q(zeta_8)/Q(j)): zeta_8 -> -zeta_8.
    ///
    /// On power-basis coordinates this is (c0, c1, c2, c3) -> (c0, -c1, c2, -c3);
    /// it fixes Q(j) = span{1, zeta_8^2} and has order 2.
    pub fn sigma8(&self) -> Result<CycloElement, AlgebraError> {
        self.expect_root(RootOrder::Zeta8)?;
        let [c0, c1, c2, c3] = self.coords;
        Ok(CycloElement::new(RootOrder::Zeta8, [c0, -c1, c2, -c3]))
    }

    /// The automorphism zeta_5 -> zeta_5^3 of Q(zeta_5), an order-4 map.
    ///
    /// Substituting zeta -> zeta^3 in c0 + c1 zeta + c2 zeta^2 + c3 zeta^3 and
    /// reducing with zeta^4 = -(1 + zeta + zeta^2 + zeta^3) gives
    /// (c0 - c3, c2 - c3, -c3, c1 - c3).
    pub fn sigma5(&self) -> Result<CycloElement, AlgebraError> {
        self.expect_root(RootOrder::Zeta5)?;
        let [c0, c1, c2, c3] = self.coords;
        Ok(CycloElement::new(
            RootOrder::Zeta5,
            [c0 - c3, c2 - c3, -c3, c1 - c3],
        ))
    }

    /// Relative norm N(a) = a * sigma(a) from Q(zeta_8) down to Q(j).
    ///
    /// The result is a Gaussian integer (j = zeta_8^2); for nonzero input its
    /// modulus is at least 1.
    pub fn norm8_to_qj(&self) -> Result<GaussianInt, AlgebraError> {
        self.expect_root(RootOrder::Zeta8)?;
        let prod = self.mul(&self.sigma8()?)?;
        // A sigma-fixed element has no zeta or zeta^3 component.
        debug_assert_eq!(prod.coords[1], 0);
        debug_assert_eq!(prod.coords[3], 0);
        Ok(GaussianInt::new(prod.coords[0], prod.coords[2]))
    }

    pub fn scale(&self, k: i64) -> CycloElement {
        let mut coords = self.coords;
        for c in coords.iter_mut() {
            *c *= k;
        }
        CycloElement::new(self.root, coords)
    }
}

/// Named square constellations used by the simulated configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ConstellationName {
    Qpsk,
    Qam16,
    Qam64,
}

impl ConstellationName {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            ConstellationName::Qpsk => 2,
            ConstellationName::Qam16 => 4,
            ConstellationName::Qam64 => 6,
        }
    }
}

impl fmt::Display for ConstellationName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstellationName::Qpsk => write!(f, "QPSK"),
            ConstellationName::Qam16 => write!(f, "16-QAM"),
            ConstellationName::Qam64 => write!(f, "64-QAM"),
        }
    }
}

impl std::str::FromStr for ConstellationName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" => Ok(ConstellationName::Qpsk),
            "qam16" | "16qam" | "16-qam" => Ok(ConstellationName::Qam16),
            "qam64" | "64qam" | "64-qam" => Ok(ConstellationName::Qam64),
            other => Err(format!("unknown constellation '{other}'")),
        }
    }
}

/// A Gray-labelled square QAM constellation on the odd-integer grid.
///
/// Points are unnormalised Gaussian integers with coordinates in
/// {+-1, +-3, ...}; `energy_scale` brings the average symbol energy to 1.
///
/// Bit labelling is the per-axis binary-reflected Gray construction: a symbol
/// of 2m bits splits into m in-phase bits followed by m quadrature bits
/// (MSB first per axis), and on each axis the level is
/// (L-1) - 2 * gray_to_binary(bits), so the all-zero label sits at +(L-1).
/// In particular QPSK "00" maps to 1+j. Axis-adjacent levels differ in
/// exactly one bit.
#[derive(Debug, Clone)]
pub struct Constellation {
    pub name: ConstellationName,
    points: Vec<GaussianInt>,
    energy_scale: f64,
}

fn gray_to_binary(mut g: u32) -> u32 {
    let mut shift = 1;
    while shift < 32 {
        g ^= g >> shift;
        shift <<= 1;
    }
    g
}

fn binary_to_gray(n: u32) -> u32 {
    n ^ (n >> 1)
}

impl Constellation {
    pub fn new(name: ConstellationName) -> Self {
        let m = name.bits_per_symbol();
        let axis_bits = m / 2;
        let mut points = Vec::with_capacity(1 << m);
        let mut total_energy = 0i64;
        for label in 0..(1u32 << m) {
            let i_bits = label >> axis_bits;
            let q_bits = label & ((1u32 << axis_bits) - 1);
            let p = GaussianInt::new(
                Self::axis_level_static(i_bits, axis_bits),
                Self::axis_level_static(q_bits, axis_bits),
            );
            total_energy += p.norm_sqr();
            points.push(p);
        }
        let mean_energy = total_energy as f64 / points.len() as f64;
        Self {
            name,
            points,
            energy_scale: 1.0 / mean_energy.sqrt(),
        }
    }

    fn axis_level_static(bits: u32, axis_bits: usize) -> i64 {
        let levels = 1i64 << axis_bits;
        let idx = gray_to_binary(bits) as i64;
        (levels - 1) - 2 * idx
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.name.bits_per_symbol()
    }

    pub fn bits_per_axis(&self) -> usize {
        self.name.bits_per_symbol() / 2
    }

    /// Amplitude factor normalising the average symbol energy to 1.
    pub fn energy_scale(&self) -> f64 {
        self.energy_scale
    }

    /// All constellation points, indexed by their bit label.
    pub fn points(&self) -> &[GaussianInt] {
        &self.points
    }

    /// The PAM levels one axis ranges over, in descending order.
    pub fn axis_levels(&self) -> Vec<i64> {
        let l = 1i64 << self.bits_per_axis();
        (0..l).map(|i| (l - 1) - 2 * i).collect()
    }

    /// Gray label bits of one axis level, MSB first.
    pub fn axis_bits_of_level(&self, level: i64) -> u32 {
        let l = 1i64 << self.bits_per_axis();
        debug_assert!(level.abs() < l && level.rem_euclid(2) == 1);
        let idx = ((l - 1) - level) / 2;
        binary_to_gray(idx as u32)
    }

    /// Level encoded by Gray label bits of one axis.
    pub fn axis_level_of_bits(&self, bits: u32) -> i64 {
        Self::axis_level_static(bits, self.bits_per_axis())
    }

    /// Maps a bit string onto unnormalised constellation points.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<GaussianInt>, AlgebraError> {
        let m = self.bits_per_symbol();
        if bits.len() % m != 0 {
            return Err(AlgebraError::BitLengthMismatch {
                len: bits.len(),
                bits_per_symbol: m,
            });
        }
        Ok(bits
            .chunks(m)
            .map(|chunk| {
                let mut label = 0u32;
                for &b in chunk {
                    label = (label << 1) | (b as u32 & 1);
                }
                self.points[label as usize]
            })
            .collect())
    }

    /// Hard demapping of an unnormalised point back to its bit label.
    ///
    /// The point must be on the constellation grid; this is the zero-noise
    /// inverse of [`Constellation::map_bits`].
    pub fn demap_hard(&self, p: GaussianInt) -> Vec<u8> {
        let axis_bits = self.bits_per_axis();
        let i_lab = self.axis_bits_of_level(p.re);
        let q_lab = self.axis_bits_of_level(p.im);
        let label = (i_lab << axis_bits) | q_lab;
        (0..self.bits_per_symbol())
            .map(|k| ((label >> (self.bits_per_symbol() - 1 - k)) & 1) as u8)
            .collect()
    }
}
