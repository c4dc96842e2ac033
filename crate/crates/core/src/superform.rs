//! Graded differential forms on an `(m,n)` chart.
//!
//! Basis 1-forms come in two parities: `dz_i`, `dzbar_i` are even 1-forms
//! (anticommuting, square zero) and `dxi_j`, `dxibar_j` are odd 1-forms
//! (mutually commuting, arbitrary powers). Two basis 1-forms a, b satisfy
//! `a ∧ b = -(-1)^(par(a)·par(b)) b ∧ a`, and a homogeneous coefficient
//! function h passes a monomial M at the cost `(-1)^(par(h)·par(M))`.
//! Coefficient functions are stored to the right of their monomial.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::expr::BodyExpr;
use crate::grassmann::{MultiIndex, Parity};
use crate::superfun::{SuperFunError, SuperFunction, SuperVectorField};

#[derive(Debug, Clone, thiserror::Error)]
pub enum SuperFormError {
    #[error("chart mismatch: ({0},{1}) vs ({2},{3})")]
    ChartMismatch(u32, u32, u32, u32),
    #[error("{0}")]
    Fun(#[from] SuperFunError),
    #[error("monomial index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("degree-0 part has a non-constant body coefficient `{0}`; exponential not representable")]
    NotExponentiable(String),
    #[error("exponential series failed to terminate (internal bound exceeded)")]
    SeriesDiverged,
}

/// One basis generator of a form monomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Gen {
    Dz(u32),
    Dzbar(u32),
    Dxi(u32),
    Dxibar(u32),
}

impl Gen {
    fn odd(self) -> bool {
        matches!(self, Gen::Dxi(_) | Gen::Dxibar(_))
    }
}

impl fmt::Display for Gen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gen::Dz(i) => write!(f, "dz{i}"),
            Gen::Dzbar(i) => write!(f, "dzb{i}"),
            Gen::Dxi(j) => write!(f, "dxi{j}"),
            Gen::Dxibar(j) => write!(f, "dxb{j}"),
        }
    }
}

/// Canonical form monomial: dz subset, dzbar subset, then per-index powers
/// of dxi and dxibar.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct FormMonomial {
    pub dz: MultiIndex,
    pub dzbar: MultiIndex,
    pub dxi: Vec<u16>,
    pub dxibar: Vec<u16>,
}

impl FormMonomial {
    pub fn unit(n: u32) -> Self {
        FormMonomial {
            dz: MultiIndex::EMPTY,
            dzbar: MultiIndex::EMPTY,
            dxi: vec![0; n as usize],
            dxibar: vec![0; n as usize],
        }
    }

    pub fn degree(&self) -> u32 {
        self.dz.len()
            + self.dzbar.len()
            + self.dxi.iter().map(|&k| k as u32).sum::<u32>()
            + self.dxibar.iter().map(|&k| k as u32).sum::<u32>()
    }

    /// Parity counts only the odd 1-form generators.
    pub fn parity(&self) -> u32 {
        (self.dxi.iter().map(|&k| k as u32).sum::<u32>()
            + self.dxibar.iter().map(|&k| k as u32).sum::<u32>())
            % 2
    }

    pub fn is_unit(&self) -> bool {
        self.degree() == 0
    }

    fn sequence(&self) -> Vec<Gen> {
        let mut out = Vec::with_capacity(self.degree() as usize);
        for i in self.dz.labels() {
            out.push(Gen::Dz(i));
        }
        for i in self.dzbar.labels() {
            out.push(Gen::Dzbar(i));
        }
        for (j, &k) in self.dxi.iter().enumerate() {
            for _ in 0..k {
                out.push(Gen::Dxi(j as u32 + 1));
            }
        }
        for (j, &k) in self.dxibar.iter().enumerate() {
            for _ in 0..k {
                out.push(Gen::Dxibar(j as u32 + 1));
            }
        }
        out
    }

    fn without(&self, gen: Gen) -> FormMonomial {
        let mut out = self.clone();
        match gen {
            Gen::Dz(i) => out.dz = out.dz.remove(i),
            Gen::Dzbar(i) => out.dzbar = out.dzbar.remove(i),
            Gen::Dxi(j) => out.dxi[(j - 1) as usize] -= 1,
            Gen::Dxibar(j) => out.dxibar[(j - 1) as usize] -= 1,
        }
        out
    }

    /// Wedge of two canonical monomials: `None` when a dz or dzbar repeats,
    /// otherwise the combined monomial and the reordering sign.
    pub fn wedge(&self, other: &FormMonomial) -> Option<(FormMonomial, i32)> {
        if !self.dz.disjoint(other.dz) || !self.dzbar.disjoint(other.dzbar) {
            return None;
        }
        let seq1 = self.sequence();
        let mut sign = 1i32;
        for y in other.sequence() {
            // y moves left past every generator of seq1 with a greater key;
            // odd-odd swaps are free, the rest flip the sign.
            let flips = seq1
                .iter()
                .filter(|&&x| x > y && !(x.odd() && y.odd()))
                .count();
            if flips % 2 == 1 {
                sign = -sign;
            }
        }
        let combined = FormMonomial {
            dz: self.dz.union(other.dz),
            dzbar: self.dzbar.union(other.dzbar),
            dxi: self
                .dxi
                .iter()
                .zip(other.dxi.iter())
                .map(|(a, b)| a + b)
                .collect(),
            dxibar: self
                .dxibar
                .iter()
                .zip(other.dxibar.iter())
                .map(|(a, b)| a + b)
                .collect(),
        };
        Some((combined, sign))
    }
}

impl fmt::Display for FormMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let seq = self.sequence();
        if seq.is_empty() {
            return write!(f, "1");
        }
        for (i, g) in seq.iter().enumerate() {
            if i > 0 {
                write!(f, "∧")?;
            }
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

/// Per-index truncation bounds for odd 1-form powers.
#[derive(Clone, Debug)]
pub struct DegreeCaps {
    pub dxi: Vec<u16>,
    pub dxibar: Vec<u16>,
}

impl DegreeCaps {
    pub fn uniform(n: u32, cap: u16) -> Self {
        DegreeCaps {
            dxi: vec![cap; n as usize],
            dxibar: vec![cap; n as usize],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuperForm {
    m: u32,
    n: u32,
    terms: BTreeMap<FormMonomial, SuperFunction>,
}

impl SuperForm {
    pub fn zero(m: u32, n: u32) -> Self {
        SuperForm {
            m,
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.m, self.n)
    }

    pub fn from_fn(h: SuperFunction) -> Self {
        let (m, n) = h.dims();
        let mut out = Self::zero(m, n);
        out.add_term(FormMonomial::unit(n), h);
        out
    }

    pub fn monomial(m: u32, n: u32, mono: FormMonomial, h: SuperFunction) -> Self {
        let mut out = Self::zero(m, n);
        out.add_term(mono, h);
        out
    }

    pub fn dz(m: u32, n: u32, i: u32) -> Result<Self, SuperFormError> {
        if i == 0 || i > m {
            return Err(SuperFormError::IndexOutOfRange(format!("dz{i}")));
        }
        let mut mono = FormMonomial::unit(n);
        mono.dz = mono.dz.insert(i);
        Ok(Self::monomial(m, n, mono, SuperFunction::one(m, n)))
    }

    pub fn dzbar(m: u32, n: u32, i: u32) -> Result<Self, SuperFormError> {
        if i == 0 || i > m {
            return Err(SuperFormError::IndexOutOfRange(format!("dzb{i}")));
        }
        let mut mono = FormMonomial::unit(n);
        mono.dzbar = mono.dzbar.insert(i);
        Ok(Self::monomial(m, n, mono, SuperFunction::one(m, n)))
    }

    pub fn dxi(m: u32, n: u32, j: u32) -> Result<Self, SuperFormError> {
        if j == 0 || j > n {
            return Err(SuperFormError::IndexOutOfRange(format!("dxi{j}")));
        }
        let mut mono = FormMonomial::unit(n);
        mono.dxi[(j - 1) as usize] = 1;
        Ok(Self::monomial(m, n, mono, SuperFunction::one(m, n)))
    }

    pub fn dxibar(m: u32, n: u32, j: u32) -> Result<Self, SuperFormError> {
        if j == 0 || j > n {
            return Err(SuperFormError::IndexOutOfRange(format!("dxb{j}")));
        }
        let mut mono = FormMonomial::unit(n);
        mono.dxibar[(j - 1) as usize] = 1;
        Ok(Self::monomial(m, n, mono, SuperFunction::one(m, n)))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FormMonomial, &SuperFunction)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, mono: &FormMonomial) -> SuperFunction {
        self.terms
            .get(mono)
            .cloned()
            .unwrap_or_else(|| SuperFunction::zero(self.m, self.n))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, mono: FormMonomial, h: SuperFunction) {
        if h.is_zero() {
            return;
        }
        debug_assert_eq!(h.dims(), (self.m, self.n), "coefficient chart mismatch");
        match self.terms.entry(mono) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(h);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().add(&h).expect("same chart");
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    fn check_chart(&self, other: &Self) -> Result<(), SuperFormError> {
        if (self.m, self.n) != (other.m, other.n) {
            return Err(SuperFormError::ChartMismatch(
                self.m, self.n, other.m, other.n,
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, SuperFormError> {
        self.check_chart(other)?;
        let mut out = self.clone();
        for (mono, h) in other.terms() {
            out.add_term(mono.clone(), h.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        self.scale(Complex64::new(-1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SuperFormError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.m, self.n);
        for (mono, h) in self.terms() {
            out.add_term(mono.clone(), h.scale(c));
        }
        out
    }

    /// Wedge product. Per pair of terms `(M1·h1) ∧ (M2·h2)` the coefficient
    /// h1 crosses M2, so each homogeneous part of h1 contributes the sign
    /// `(-1)^(par(h1)·par(M2))` on top of the monomial reordering sign.
    pub fn wedge(&self, other: &Self) -> Result<Self, SuperFormError> {
        self.check_chart(other)?;
        let mut out = Self::zero(self.m, self.n);
        for (m1, h1) in self.terms() {
            for (m2, h2) in other.terms() {
                let Some((mono, msign)) = m1.wedge(m2) else {
                    continue;
                };
                let m2_parity = m2.parity();
                for ((mu, lam), coeff) in h1.terms() {
                    let hp = (mu.len() + lam.len()) % 2;
                    let mut sign = msign;
                    if hp == 1 && m2_parity == 1 {
                        sign = -sign;
                    }
                    let part = SuperFunction::term(self.m, self.n, *mu, *lam, coeff.clone())
                        .mul(h2)?
                        .scale(Complex64::new(sign as f64, 0.0));
                    out.add_term(mono.clone(), part);
                }
            }
        }
        Ok(out)
    }

    /// Antiholomorphic exterior derivative. On a 0-form this is
    /// `sum_i dzbar_i·(d h/d zbar_i) + sum_j dxibar_j·(d h/d xibar_j)`;
    /// on `M·h` it is `(-1)^deg(M) M ∧ dbar(h)`.
    pub fn dbar(&self) -> Result<Self, SuperFormError> {
        let mut out = Self::zero(self.m, self.n);
        for (mono, h) in self.terms() {
            let mut d0 = Self::zero(self.m, self.n);
            for i in 1..=self.m {
                let dh = h.d_zbar(i)?;
                if !dh.is_zero() {
                    let mut mb = FormMonomial::unit(self.n);
                    mb.dzbar = mb.dzbar.insert(i);
                    d0.add_term(mb, dh);
                }
            }
            for j in 1..=self.n {
                let dh = h.d_xibar(j)?;
                if !dh.is_zero() {
                    let mut mb = FormMonomial::unit(self.n);
                    mb.dxibar[(j - 1) as usize] = 1;
                    d0.add_term(mb, dh);
                }
            }
            if d0.is_zero() {
                continue;
            }
            let single = Self::monomial(
                self.m,
                self.n,
                mono.clone(),
                SuperFunction::one(self.m, self.n),
            );
            let mut piece = single.wedge(&d0)?;
            if mono.degree() % 2 == 1 {
                piece = piece.neg();
            }
            out = out.add(&piece)?;
        }
        Ok(out)
    }

    /// Graded contraction with an odd holomorphic field:
    /// `i_V(dz_i) = f_i`, `i_V(dxi_j) = g_j`, `i_V(dzbar) = i_V(dxibar) = 0`,
    /// `i_V(function) = 0`, extended by
    /// `i_V(a∧b) = i_V(a)∧b + (-1)^deg(a) (-1)^(par(a)·par(V)) a∧i_V(b)`.
    pub fn contract(&self, field: &SuperVectorField) -> Result<Self, SuperFormError> {
        if (self.m, self.n) != (field.n(), field.n()) {
            return Err(SuperFormError::ChartMismatch(
                self.m,
                self.n,
                field.n(),
                field.n(),
            ));
        }
        let mut out = Self::zero(self.m, self.n);
        for (mono, h) in self.terms() {
            let seq = mono.sequence();
            let mut prefix_sign = 1i32;
            for (k, &gen) in seq.iter().enumerate() {
                let w = match gen {
                    Gen::Dz(i) => Some(field.f(i)),
                    Gen::Dxi(j) => Some(field.g(j)),
                    Gen::Dzbar(_) | Gen::Dxibar(_) => None,
                };
                if let Some(w) = w {
                    if !w.is_zero() {
                        // the inserted function moves right past the suffix
                        let suffix_parity = seq[k + 1..].iter().filter(|g| g.odd()).count() % 2;
                        let wp = match w.parity() {
                            Parity::Odd => 1usize,
                            _ => 0,
                        };
                        let mut sign = prefix_sign;
                        if wp == 1 && suffix_parity == 1 {
                            sign = -sign;
                        }
                        let coeff = w.mul(h)?.scale(Complex64::new(sign as f64, 0.0));
                        out.add_term(mono.without(gen), coeff);
                    }
                }
                // advancing past `gen`: even 1-forms flip the sign, odd ones do not
                if !gen.odd() {
                    prefix_sign = -prefix_sign;
                }
            }
        }
        Ok(out)
    }

    /// The closedness defect `(dbar + i_V)(self)`; identically zero for
    /// forms the localization theorems apply to.
    pub fn dbar_plus_contract(&self, field: &SuperVectorField) -> Result<Self, SuperFormError> {
        self.dbar()?.add(&self.contract(field)?)
    }

    fn prune(&self, caps: &DegreeCaps) -> Self {
        let mut out = Self::zero(self.m, self.n);
        for (mono, h) in self.terms() {
            let over = mono
                .dxi
                .iter()
                .zip(caps.dxi.iter())
                .any(|(d, c)| d > c)
                || mono
                    .dxibar
                    .iter()
                    .zip(caps.dxibar.iter())
                    .any(|(d, c)| d > c);
            if !over {
                out.add_term(mono.clone(), h.clone());
            }
        }
        out
    }

    /// Truncated exponential `sum_k self^k / k!` with per-index caps on the
    /// odd 1-form powers. The degree-0 body coefficient must be constant
    /// (its exponential is the scalar prefactor); everything else terminates
    /// by nilpotency or by the caps.
    pub fn exp_truncated(&self, caps: &DegreeCaps) -> Result<Self, SuperFormError> {
        let unit = FormMonomial::unit(self.n);
        let mut scalar = Complex64::new(0.0, 0.0);
        let mut rest = self.prune(caps);
        if let Some(h0) = rest.terms.get(&unit).cloned() {
            let body = h0.body_coeff();
            match body.clone().canonical() {
                BodyExpr::Const(c) => {
                    scalar = c;
                    let mut h0p = h0;
                    h0p.add_term(
                        MultiIndex::EMPTY,
                        MultiIndex::EMPTY,
                        BodyExpr::Const(-c),
                    );
                    rest.terms.remove(&unit);
                    if !h0p.is_zero() {
                        rest.add_term(unit.clone(), h0p);
                    }
                }
                e if e.is_zero() => {}
                e => return Err(SuperFormError::NotExponentiable(e.to_string())),
            }
        }
        let mut acc = Self::from_fn(SuperFunction::one(self.m, self.n));
        let mut power = acc.clone();
        let mut factorial = 1.0f64;
        let cap_total: u32 = caps.dxi.iter().map(|&c| c as u32).sum::<u32>()
            + caps.dxibar.iter().map(|&c| c as u32).sum::<u32>();
        let bound = 2 * self.m + 2 * self.n + cap_total + 2;
        for k in 1..=bound as u64 + 1 {
            power = power.wedge(&rest)?.prune(caps);
            if power.is_zero() {
                break;
            }
            if k > bound as u64 {
                return Err(SuperFormError::SeriesDiverged);
            }
            factorial *= k as f64;
            acc = acc.add(&power.scale(Complex64::new(1.0 / factorial, 0.0)))?;
        }
        Ok(acc.scale(scalar.exp()))
    }

    /// The `(mu; lam)` expansion coefficient of the function attached to
    /// exactly the given canonical monomial (zero if absent).
    pub fn extract_component(
        &self,
        mono: &FormMonomial,
        mu: MultiIndex,
        lam: MultiIndex,
    ) -> BodyExpr {
        match self.terms.get(mono) {
            Some(h) => h.coefficient(mu, lam),
            None => BodyExpr::ZERO,
        }
    }

    /// Monomial of the `(0,0)|(n,n)` component: `dxi_1∧..∧dxi_n∧dxb_1∧..∧dxb_n`.
    pub fn eta00_monomial(n: u32) -> FormMonomial {
        let mut mono = FormMonomial::unit(n);
        mono.dxi = vec![1; n as usize];
        mono.dxibar = vec![1; n as usize];
        mono
    }

    /// Monomial of the `(1,0)|(n-1,n)` component with `dxi_j` omitted:
    /// `dz_j∧dxi_1∧..(no j)..∧dxi_n∧dxb_1∧..∧dxb_n`.
    pub fn eta10_hat_monomial(n: u32, j: u32) -> FormMonomial {
        let mut mono = FormMonomial::unit(n);
        mono.dz = mono.dz.insert(j);
        mono.dxi = vec![1; n as usize];
        mono.dxi[(j - 1) as usize] = 0;
        mono.dxibar = vec![1; n as usize];
        mono
    }

    /// Top monomial `dz_1..dz_m ∧ dzb_1..dzb_m ∧ dxi_1..dxi_n ∧ dxb_1..dxb_n`.
    pub fn top_monomial(m: u32, n: u32) -> FormMonomial {
        FormMonomial {
            dz: MultiIndex::full(m),
            dzbar: MultiIndex::full(m),
            dxi: vec![1; n as usize],
            dxibar: vec![1; n as usize],
        }
    }

    pub fn eta_00_nn(&self, mu: MultiIndex, lam: MultiIndex) -> BodyExpr {
        self.extract_component(&Self::eta00_monomial(self.n), mu, lam)
    }

    pub fn eta_10_hat(&self, j: u32, mu: MultiIndex, lam: MultiIndex) -> BodyExpr {
        self.extract_component(&Self::eta10_hat_monomial(self.n, j), mu, lam)
    }

    /// `sum_j` of the hatted `(1,0)|(n-1,n)` components.
    pub fn eta_10_hat_star(&self, mu: MultiIndex, lam: MultiIndex) -> BodyExpr {
        let mut parts = Vec::new();
        for j in 1..=self.n {
            parts.push(self.eta_10_hat(j, mu, lam));
        }
        BodyExpr::add(parts)
    }

    /// Symbolic zero test for every coefficient, via the rational normal
    /// form. `None` when some coefficient contains an opaque function.
    pub fn is_identically_zero(&self, tol: f64) -> Option<bool> {
        for (_, h) in self.terms() {
            for (_, e) in h.terms() {
                match crate::ratfun::is_identically_zero(e, self.m, tol) {
                    Some(true) => {}
                    other => return other.map(|_| false),
                }
            }
        }
        Some(true)
    }

    /// Names of the monomial sectors whose coefficient is not symbolically
    /// zero (best effort: undecidable coefficients count as nonzero).
    pub fn nonzero_sectors(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (mono, h) in self.terms() {
            let all_zero = h.terms().all(|(_, e)| {
                crate::ratfun::is_identically_zero(e, self.m, tol) == Some(true)
            });
            if !all_zero {
                out.push(mono.to_string());
            }
        }
        out
    }
}

impl fmt::Display for SuperForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (mono, h)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{mono}·({h})")?;
        }
        Ok(())
    }
}
