//! Rational-function normal form for body expressions, used to decide
//! symbolic identities: an expression maps to a pair of sparse multivariate
//! polynomials (numerator, denominator) over the variables
//! `z_1..z_m, zb_1..zb_m`, and is identically zero iff the numerator is.
//!
//! Opaque functions (and conjugates wrapping them) have no normal form;
//! callers get `None` and must fall back to weaker checks.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::expr::{BodyExpr, Var};

/// Sparse polynomial: exponent vector (z's then zb's) -> coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u16>, Complex64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Complex64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, idx: usize) -> Self {
        let mut exps = vec![0u16; nvars];
        exps[idx] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(exps, Complex64::new(1.0, 0.0));
        p
    }

    fn add_term(&mut self, exps: Vec<u16>, c: Complex64) {
        if c.re == 0.0 && c.im == 0.0 {
            return;
        }
        match self.terms.entry(exps) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                let v = *o.get();
                if v.re == 0.0 && v.im == 0.0 {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exps: Vec<u16> = ea.iter().zip(eb.iter()).map(|(a, b)| a + b).collect();
                out.add_term(exps, ca * cb);
            }
        }
        out
    }

    pub fn powi(&self, k: u32) -> Poly {
        let mut out = Poly::constant(self.nvars, Complex64::new(1.0, 0.0));
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Drop terms with |coefficient| <= tol (absolute).
    pub fn is_zero_within(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.norm() <= tol)
    }
}

/// Numerator/denominator pair. No GCD reduction is performed; only the
/// numerator's vanishing is meaningful.
pub struct Rational {
    pub num: Poly,
    pub den: Poly,
}

/// Normalize an expression over `m` even variables. Returns `None` when an
/// opaque function (or a conjugate wrapping one) occurs.
pub fn to_rational(e: &BodyExpr, m: u32) -> Option<Rational> {
    let nvars = 2 * m as usize;
    let one = Poly::constant(nvars, Complex64::new(1.0, 0.0));
    match e {
        BodyExpr::Const(c) => Some(Rational {
            num: Poly::constant(nvars, *c),
            den: one,
        }),
        BodyExpr::Var(v) => {
            let idx = match v {
                Var::Z(i) => (*i as usize) - 1,
                Var::Zbar(i) => m as usize + (*i as usize) - 1,
            };
            Some(Rational {
                num: Poly::var(nvars, idx),
                den: one,
            })
        }
        BodyExpr::Add(ts) => {
            let mut acc = Rational {
                num: Poly::zero(nvars),
                den: one,
            };
            for t in ts {
                let r = to_rational(t, m)?;
                // a/b + c/d = (ad + cb) / bd
                acc = Rational {
                    num: acc.num.mul(&r.den).add(&r.num.mul(&acc.den)),
                    den: acc.den.mul(&r.den),
                };
            }
            Some(acc)
        }
        BodyExpr::Mul(fs) => {
            let mut acc = Rational {
                num: one.clone(),
                den: one,
            };
            for f in fs {
                let r = to_rational(f, m)?;
                acc = Rational {
                    num: acc.num.mul(&r.num),
                    den: acc.den.mul(&r.den),
                };
            }
            Some(acc)
        }
        BodyExpr::Div(n, d) => {
            let rn = to_rational(n, m)?;
            let rd = to_rational(d, m)?;
            Some(Rational {
                num: rn.num.mul(&rd.den),
                den: rn.den.mul(&rd.num),
            })
        }
        BodyExpr::Pow(b, k) => {
            let rb = to_rational(b, m)?;
            if *k >= 0 {
                Some(Rational {
                    num: rb.num.powi(*k as u32),
                    den: rb.den.powi(*k as u32),
                })
            } else {
                let k = (-k) as u32;
                Some(Rational {
                    num: rb.den.powi(k),
                    den: rb.num.powi(k),
                })
            }
        }
        // canonicalization pushes conj to the leaves, so a remaining Conj
        // wraps an opaque
        BodyExpr::Conj(_) => None,
        BodyExpr::Opaque(_) => None,
    }
}

/// Decide `e == 0` as a rational function of the body variables.
/// `tol` bounds the surviving numerator coefficients (0.0 demands exact
/// cancellation). `None` when the expression contains opaques.
pub fn is_identically_zero(e: &BodyExpr, m: u32, tol: f64) -> Option<bool> {
    let e = e.clone().canonical();
    if e.is_zero() {
        return Some(true);
    }
    let r = to_rational(&e, m)?;
    Some(r.num.is_zero_within(tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotient_rule_output_cancels() {
        // z*(i/2pi)/(1+z zb)^2 - d/dzb[(i/2pi)(1+2 z zb)/(1+z zb)]  == 0
        let i2pi = BodyExpr::constant(0.0, 0.15915494309189535);
        let zzb = BodyExpr::mul(vec![BodyExpr::z(1), BodyExpr::zbar(1)]);
        let denom = BodyExpr::add(vec![BodyExpr::ONE, zzb.clone()]);
        let a = BodyExpr::mul(vec![
            BodyExpr::z(1),
            i2pi.clone(),
            BodyExpr::div(BodyExpr::ONE, BodyExpr::pow(denom.clone(), 2)),
        ]);
        let b = BodyExpr::mul(vec![
            i2pi,
            BodyExpr::div(
                BodyExpr::add(vec![BodyExpr::ONE, zzb.scale(Complex64::new(2.0, 0.0))]),
                denom,
            ),
        ])
        .diff(crate::expr::Var::Zbar(1));
        let diff = a.sub(b);
        assert_eq!(is_identically_zero(&diff, 1, 0.0), Some(true));
    }

    #[test]
    fn nonzero_detected() {
        let e = BodyExpr::add(vec![BodyExpr::z(1), BodyExpr::ONE]);
        assert_eq!(is_identically_zero(&e, 1, 0.0), Some(false));
    }

    #[test]
    fn opaque_is_undecidable() {
        let e = BodyExpr::Opaque("f".into());
        assert_eq!(is_identically_zero(&e, 1, 0.0), None);
    }
}
