//! Exact rational arithmetic and univariate polynomials over the rationals.

mod poly;
mod rational;

pub use poly::{interpolate, PolyError, UniPoly};
pub use rational::{
    format_compact, format_exact, format_significant, int, is_one, midpoint, parse_rational, ratio, to_f64,
    ParseRationalError, Rational,
};
