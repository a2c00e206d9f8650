use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use super::rational::{format_compact, int, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("interpolation needs at least one point")]
    NoPoints,
    #[error("duplicate interpolation node {0}")]
    DuplicateNode(String),
    #[error("integration bounds out of order: {lo} > {hi}")]
    ReversedBounds { lo: String, hi: String },
}

/// Univariate polynomial with exact coefficients, lowest degree first.
///
/// The coefficient list never ends in a zero; the zero polynomial is the
/// empty list and has no degree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct UniPoly {
    coeffs: Vec<Rational>,
}

impl UniPoly {
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: Rational) -> Self {
        Self::from_coeffs(vec![c])
    }

    /// The monomial `x`.
    pub fn x() -> Self {
        Self::from_coeffs(vec![Rational::zero(), Rational::one()])
    }

    pub fn from_coeffs(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.coeffs
            .iter()
            .rev()
            .fold(Rational::zero(), |acc, c| acc * x + c)
    }

    pub fn add(&self, other: &UniPoly) -> UniPoly {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len)
            .map(|i| {
                let a = self.coeffs.get(i).cloned().unwrap_or_else(Rational::zero);
                match other.coeffs.get(i) {
                    Some(b) => a + b,
                    None => a,
                }
            })
            .collect();
        UniPoly::from_coeffs(coeffs)
    }

    pub fn mul(&self, other: &UniPoly) -> UniPoly {
        if self.is_zero() || other.is_zero() {
            return UniPoly::zero();
        }
        let mut coeffs = vec![Rational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        UniPoly::from_coeffs(coeffs)
    }

    pub fn scale(&self, c: &Rational) -> UniPoly {
        UniPoly::from_coeffs(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// Antiderivative with zero constant term.
    pub fn antiderivative(&self) -> UniPoly {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(Rational::zero());
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs.push(c / int(i as i64 + 1));
        }
        UniPoly::from_coeffs(coeffs)
    }

    pub fn derivative(&self) -> UniPoly {
        UniPoly::from_coeffs(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * int(i as i64))
                .collect(),
        )
    }

    /// Exact `∫_lo^hi p(y) dy`.
    pub fn definite_integral(&self, lo: &Rational, hi: &Rational) -> Result<Rational, PolyError> {
        if lo > hi {
            return Err(PolyError::ReversedBounds {
                lo: lo.to_string(),
                hi: hi.to_string(),
            });
        }
        let anti = self.antiderivative();
        Ok(anti.eval(hi) - anti.eval(lo))
    }
}

impl fmt::Display for UniPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{}", format_compact(c))?,
                1 => write!(f, "{}·y", format_compact(c))?,
                _ => write!(f, "{}·y^{}", format_compact(c), i)?,
            }
        }
        Ok(())
    }
}

/// The unique polynomial of degree below `points.len()` through all points,
/// via Newton divided differences.
pub fn interpolate(points: &[(Rational, Rational)]) -> Result<UniPoly, PolyError> {
    if points.is_empty() {
        return Err(PolyError::NoPoints);
    }
    let n = points.len();
    for i in 0..n {
        for j in 0..i {
            if points[i].0 == points[j].0 {
                return Err(PolyError::DuplicateNode(points[i].0.to_string()));
            }
        }
    }
    let xs: Vec<&Rational> = points.iter().map(|(x, _)| x).collect();
    let mut table: Vec<Rational> = points.iter().map(|(_, y)| y.clone()).collect();
    for level in 1..n {
        for i in (level..n).rev() {
            table[i] = (&table[i] - &table[i - 1]) / (xs[i] - xs[i - level]);
        }
    }
    // Horner over the Newton basis: p = t0 + (x - x0)(t1 + (x - x1)(t2 + ...)).
    let mut coeffs = vec![table[n - 1].clone()];
    for k in (0..n - 1).rev() {
        // coeffs <- coeffs * (x - xs[k]) + table[k]
        let mut next = vec![Rational::zero(); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * xs[k];
        }
        next[0] += &table[k];
        coeffs = next;
    }
    Ok(UniPoly::from_coeffs(coeffs))
}
