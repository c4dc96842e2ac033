//! Symbolic-plus-numeric calculus on charts of complex supermanifolds:
//! exact Grassmann arithmetic, superfunctions with graded derivatives,
//! superforms with the antiholomorphic differential and graded contraction,
//! Berezin integration coupled to numerical quadrature over the body, and
//! closed-form residues for odd holomorphic supervector fields, with a
//! localization consistency check `∫η = Σ Res`.
//!
//! ```
//! use superloc::residue::{residue_simple, HypothesisMode, HypothesisOptions};
//! use superloc::{BodyExpr, Complex, MultiIndex, OpaqueRegistry, SuperForm, SuperFunction,
//!                SuperVectorField};
//!
//! // V = 2z d/dxi on the 1|1 chart, singular at the origin with det(JV) = 2
//! let n = 1;
//! let g = SuperFunction::from_body(n, n, BodyExpr::z(1).scale(Complex::new(2.0, 0.0)));
//! let field = SuperVectorField::new(vec![SuperFunction::zero(n, n)], vec![g]).unwrap();
//!
//! // eta = dz ∧ dxb · xi xb · (i/pi): its hatted (1,0)|(0,1) component is i/pi
//! let coeff = SuperFunction::term(
//!     n, n,
//!     MultiIndex::full(1), MultiIndex::full(1),
//!     BodyExpr::constant(0.0, std::f64::consts::FRAC_1_PI),
//! );
//! let eta = SuperForm::monomial(n, n, SuperForm::eta10_hat_monomial(n, 1), coeff);
//!
//! // residue = (2*pi/i) * (i/pi) / 2 = 1
//! let r = residue_simple(
//!     &field, &eta, &[Complex::new(0.0, 0.0)],
//!     HypothesisMode::FZero, HypothesisOptions::default(),
//!     &OpaqueRegistry::new(),
//! ).unwrap();
//! assert!((r - Complex::new(1.0, 0.0)).norm() < 1e-14);
//! ```

pub mod berezin;
pub mod expr;
pub mod grassmann;
pub mod quad;
pub mod ratfun;
pub mod residue;
pub mod scenario;
pub mod selftest;
pub mod superform;
pub mod superfun;

pub use expr::{BodyExpr, OpaqueRegistry, Var};
pub use grassmann::{GrassmannMatrix, GrassmannValue, MultiIndex, Parity};
pub use superform::{DegreeCaps, FormMonomial, SuperForm};
pub use superfun::{SuperFunction, SuperVectorField};

pub type Complex = num_complex::Complex64;
