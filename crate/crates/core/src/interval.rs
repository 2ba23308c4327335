//! Interval arithmetic and polynomial maps with a natural interval extension.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn scale(self, c: f64) -> Self {
        if c >= 0.0 {
            Self::new(c * self.lo, c * self.hi)
        } else {
            Self::new(c * self.hi, c * self.lo)
        }
    }

    /// Integer power. Even powers of an interval straddling zero start at zero.
    pub fn powi(self, n: u32) -> Self {
        match n {
            0 => Self::point(1.0),
            1 => self,
            _ => {
                let a = self.lo.powi(n as i32);
                let b = self.hi.powi(n as i32);
                if n % 2 == 1 {
                    Self::new(a, b)
                } else if self.lo >= 0.0 {
                    Self::new(a, b)
                } else if self.hi <= 0.0 {
                    Self::new(b, a)
                } else {
                    Self::new(0.0, a.max(b))
                }
            }
        }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::new(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval::new(self.lo - rhs.hi, self.hi - rhs.lo)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let p = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        Interval::new(
            p.iter().copied().fold(f64::INFINITY, f64::min),
            p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }
}

/// `coeff * prod x_i^state[i] * prod u_j^input[j]`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    #[serde(default)]
    pub state: Vec<u32>,
    #[serde(default)]
    pub input: Vec<u32>,
}

impl Monomial {
    pub fn constant(c: f64) -> Self {
        Self {
            coeff: c,
            state: Vec::new(),
            input: Vec::new(),
        }
    }

    fn input_factor(&self, u: &[f64]) -> f64 {
        self.input
            .iter()
            .enumerate()
            .map(|(j, &p)| u[j].powi(p as i32))
            .product()
    }

    fn eval(&self, x: &[f64], u: &[f64]) -> f64 {
        let s: f64 = self
            .state
            .iter()
            .enumerate()
            .map(|(i, &p)| x[i].powi(p as i32))
            .product();
        self.coeff * s * self.input_factor(u)
    }

    fn eval_interval(&self, x: &[Interval], u: &[f64]) -> Interval {
        let mut acc = Interval::point(1.0);
        for (i, &p) in self.state.iter().enumerate() {
            if p > 0 {
                acc = acc * x[i].powi(p);
            }
        }
        acc.scale(self.coeff * self.input_factor(u))
    }
}

/// Vector-valued polynomial in state and input; one term list per output component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyMap {
    pub components: Vec<Vec<Monomial>>,
}

impl PolyMap {
    pub fn validate(&self, state_dim: usize, input_dim: usize) -> Result<()> {
        if self.components.len() != state_dim {
            return Err(Error::Dimension {
                expected: state_dim,
                got: self.components.len(),
            });
        }
        for term in self.components.iter().flatten() {
            if term.state.len() > state_dim || term.input.len() > input_dim {
                return Err(Error::System(
                    "monomial exponent list longer than the variable count".into(),
                ));
            }
            if !term.coeff.is_finite() {
                return Err(Error::System("non-finite coefficient".into()));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|terms| terms.iter().map(|t| t.eval(x, u)).sum())
            .collect()
    }

    /// Natural interval extension: term-wise enclosures summed.
    pub fn eval_interval(&self, x: &[Interval], u: &[f64]) -> Vec<Interval> {
        self.components
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .map(|t| t.eval_interval(x, u))
                    .fold(Interval::point(0.0), |a, b| a + b)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_power_rule() {
        let x = Interval::new(-1.0, 1.0);
        assert_eq!(x.powi(2), Interval::new(0.0, 1.0));
        assert_eq!(x * x, Interval::new(-1.0, 1.0));
        assert_eq!(Interval::new(-3.0, -2.0).powi(2), Interval::new(4.0, 9.0));
        assert_eq!(Interval::new(-2.0, 1.0).powi(3), Interval::new(-8.0, 1.0));
    }

    #[test]
    fn square_enclosure_is_tight_by_sampling() {
        let x = Interval::new(-1.0, 1.0).powi(2);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..=2000 {
            let v = -1.0 + k as f64 / 1000.0;
            lo = lo.min(v * v);
            hi = hi.max(v * v);
        }
        assert_eq!((x.lo, x.hi), (lo, hi));
    }

    #[test]
    fn constant_polynomial() {
        let p = PolyMap {
            components: vec![vec![Monomial::constant(2.5)]],
        };
        let r = p.eval_interval(&[Interval::new(-4.0, 7.0)], &[]);
        assert_eq!(r[0], Interval::point(2.5));
    }
}
