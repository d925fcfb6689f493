//! Multivariate polynomials with exact rational coefficients.
//!
//! Used to expand mass-action drifts symbolically: the descending factorial
//! `x^(y)` is a polynomial in x, so the drift and the excess of a sub-network
//! certificate are polynomials whose cancellations (e.g. a virtual source
//! whose outflows average out) must be recognized exactly, not within a float
//! tolerance.

use crate::exact::{rat_from_i64, rat_to_f64, Rat};
use num::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;

/// Polynomial in `dims` variables; keys are exponent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPoly {
    dims: usize,
    terms: BTreeMap<Vec<u32>, Rat>,
}

impl MultiPoly {
    pub fn zero(dims: usize) -> Self {
        MultiPoly {
            dims,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dims: usize, c: Rat) -> Self {
        let mut p = Self::zero(dims);
        if !c.is_zero() {
            p.terms.insert(vec![0; dims], c);
        }
        p
    }

    /// The single variable `x_i`.
    pub fn var(dims: usize, i: usize) -> Self {
        let mut exp = vec![0u32; dims];
        exp[i] = 1;
        let mut p = Self::zero(dims);
        p.terms.insert(exp, Rat::one());
        p
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, exp: Vec<u32>, coeff: Rat) {
        debug_assert_eq!(exp.len(), self.dims);
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(exp).or_insert_with(Rat::zero);
        *entry = &*entry + coeff;
        if entry.is_zero() {
            // remove exact cancellations eagerly
            let dead: Vec<Vec<u32>> = self
                .terms
                .iter()
                .filter(|(_, v)| v.is_zero())
                .map(|(k, _)| k.clone())
                .collect();
            for k in dead {
                self.terms.remove(&k);
            }
        }
    }

    pub fn add_assign(&mut self, other: &MultiPoly) {
        assert_eq!(self.dims, other.dims);
        for (e, c) in &other.terms {
            self.add_term(e.clone(), c.clone());
        }
    }

    pub fn scale(&self, f: &Rat) -> MultiPoly {
        if f.is_zero() {
            return MultiPoly::zero(self.dims);
        }
        MultiPoly {
            dims: self.dims,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * f)).collect(),
        }
    }

    pub fn mul(&self, other: &MultiPoly) -> MultiPoly {
        assert_eq!(self.dims, other.dims);
        let mut out = MultiPoly::zero(self.dims);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exp: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(exp, ca * cb);
            }
        }
        out
    }

    /// Expansion of the descending factorial of one species:
    /// `x_i (x_i - 1) ... (x_i - count + 1)`.
    pub fn falling_factorial(dims: usize, i: usize, count: u32) -> MultiPoly {
        let mut p = MultiPoly::constant(dims, Rat::one());
        for l in 0..count {
            let mut factor = MultiPoly::var(dims, i);
            factor.add_term(vec![0; dims], rat_from_i64(-(l as i64)));
            p = p.mul(&factor);
        }
        p
    }

    /// Exact evaluation at a non-negative integer state.
    pub fn eval_state(&self, x: &[u64]) -> Rat {
        assert_eq!(x.len(), self.dims);
        let mut acc = Rat::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for (i, &p) in e.iter().enumerate() {
                for _ in 0..p {
                    term *= rat_from_i64(x[i] as i64);
                }
            }
            acc += term;
        }
        acc
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dims);
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut term = rat_to_f64(c);
            for (i, &p) in e.iter().enumerate() {
                term *= x[i].powi(p as i32);
            }
            acc += term;
        }
        acc
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Terms as `(exponents, coefficient)` pairs in deterministic order.
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Rat)> {
        self.terms.iter()
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // highest-degree terms first reads naturally
        let mut entries: Vec<(&Vec<u32>, &Rat)> = self.terms.iter().collect();
        entries.sort_by(|(ea, _), (eb, _)| {
            let da: u32 = ea.iter().sum();
            let db: u32 = eb.iter().sum();
            db.cmp(&da).then(eb.cmp(ea))
        });
        for (k, (exp, coeff)) in entries.iter().enumerate() {
            let neg = coeff.is_negative();
            let mag = coeff.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let is_const = exp.iter().all(|&e| e == 0);
            if !mag.is_one() || is_const {
                write!(f, "{mag}")?;
                if !is_const {
                    write!(f, "*")?;
                }
            }
            let mut first = true;
            for (i, &e) in exp.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if !first {
                    write!(f, "*")?;
                }
                first = false;
                write!(f, "x{}", i + 1)?;
                if e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat_from_i64 as ri;

    #[test]
    fn falling_factorial_expands() {
        // x(x-1) = x^2 - x
        let p = MultiPoly::falling_factorial(1, 0, 2);
        assert_eq!(p.eval_state(&[3]), ri(6));
        assert_eq!(p.eval_state(&[1]), ri(0));
        assert_eq!(p.total_degree(), 2);
        assert_eq!(p.to_string(), "x1^2 - x1");
    }

    #[test]
    fn exact_cancellation() {
        let mut p = MultiPoly::var(2, 0).scale(&ri(3));
        let q = MultiPoly::var(2, 0).scale(&ri(-3));
        p.add_assign(&q);
        assert!(p.is_zero());
        assert_eq!(p.to_string(), "0");
    }

    #[test]
    fn eval_matches_by_hand() {
        // 2*x1*x2^2 - 5
        let mut p = MultiPoly::zero(2);
        p.add_term(vec![1, 2], ri(2));
        p.add_term(vec![0, 0], ri(-5));
        assert_eq!(p.eval_state(&[3, 2]), ri(19));
        assert!((p.eval_f64(&[3.0, 2.0]) - 19.0).abs() < 1e-12);
    }
}
