//! Space-time lattice codes for hybrid satellite-terrestrial MIMO broadcasting,
//! together with the machinery needed to evaluate them: algebraic minimum-determinant
//! searches, fading channel models (i.i.d. Rayleigh and a 3-state Markov
//! land-mobile-satellite model), exact ML / sphere detection with max-log soft
//! output, a convolutionally coded BICM link chain, and a reproducible Monte Carlo
//! BER harness.
//!
//! ```
//! use stsim_core::analysis::{analyze_code, SearchConfig};
//! use stsim_core::codes::{make_code, CodeName};
//!
//! // Certify the Alamouti code over a small coefficient box: minimum
//! // determinant 1, full diversity.
//! let code = make_code(CodeName::Alamouti);
//! let report = analyze_code(&code, &SearchConfig::with_box(1)).unwrap();
//! assert!(report.full_diversity);
//! assert!((report.min_joint_det - 1.0).abs() < 1e-12);
//! ```

pub mod algebra;
pub mod analysis;
pub mod channel;
pub mod codes;
pub mod detect;
pub mod link;
pub mod sim;

pub use num_complex::Complex64;

/// Complex matrix type used for codewords, channels and received blocks.
pub type CMat = nalgebra::DMatrix<Complex64>;
/// Real matrix type used by the real-valued detection model.
pub type RMat = nalgebra::DMatrix<f64>;
/// Real vector type used by the real-valued detection model.
pub type RVec = nalgebra::DVector<f64>;
