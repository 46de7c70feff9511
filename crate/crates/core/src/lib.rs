//! Numeric laboratory for sums of ratios of sums-of-two-squares counts.
//!
//! The central objects are the multiplicative function h(n) = Σ_{d|n} χ₄(d),
//! which counts representations by two squares up to the factor 4, the
//! partial sums Q(x) = Σ'_{n≤x} h(n)/h(n+1) (the prime restricts to n with
//! h(n+1) ≠ 0), and the constants and main-term machinery that describe the
//! asymptotic growth Q(x) ≈ c₁ · x · (ln x)^{-3/4}.
//!
//! Modules:
//! - [`arith`]: factorization, χ₄, h, and coupled-moduli CRT,
//! - [`sieve`]: segmented sieves for h, τ, and the main-term density E,
//! - [`series`]: the partial sums Q(x), S(x) and their divisor-range splits,
//! - [`constants`]: Euler products for c₁ and related constants,
//! - [`characters`]: Dirichlet characters, conductors, twisted h-sums,
//! - [`quad`]: adaptive Gauss–Kronrod quadrature,
//! - [`smooth`]: the compact bump ρ, smoothed cutoffs, Fourier and Mellin checks,
//! - [`mainterm`]: the density E(n), H(x) = Σ' E(n)/h(n), and the Q main term,
//! - [`lemmas`]: executable checks of the identities used by the method,
//! - [`dispersion`]: a desk-scale model of the dispersion inequality.

pub mod accum;
pub mod arith;
pub mod characters;
pub mod constants;
pub mod dispersion;
pub mod error;
pub mod lemmas;
pub mod mainterm;
pub mod quad;
pub mod series;
pub mod sieve;
pub mod smooth;

pub use error::{Error, Result};
