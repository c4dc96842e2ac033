//! Superfunctions on a chart of even dimension `m` and odd dimension `n`:
//! finite sums `f = sum_{mu,lam} xi_mu xibar_lam f_{mu;lam}(z, zbar)` with
//! expression-tree coefficients, together with the four graded derivatives,
//! products, parity, conjugation of body-only functions, and evaluation into
//! the Grassmann algebra on 2n generators (`xi_k -> b_k`, `xibar_k -> b_{n+k}`).

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::expr::{BodyExpr, EvalError, OpaqueRegistry, Var};
use crate::grassmann::{merge_sign, GrassmannValue, MultiIndex, Parity};

#[derive(Debug, Clone, thiserror::Error)]
pub enum SuperFunError {
    #[error("chart mismatch: ({0},{1}) vs ({2},{3})")]
    ChartMismatch(u32, u32, u32, u32),
    #[error("odd index {index} out of range 1..={n}")]
    OddIndexOutOfRange { index: u32, n: u32 },
    #[error("even index {index} out of range 1..={m}")]
    EvenIndexOutOfRange { index: u32, m: u32 },
    #[error("conjugation requires a function free of odd variables, found term xi={0:?} xibar={1:?}")]
    ConjugationNeedsBodyOnly(Vec<u32>, Vec<u32>),
    #[error("{0}")]
    Eval(#[from] EvalError),
    #[error("invariant `{invariant}` violated for {subject}: {detail}")]
    Invariant {
        invariant: &'static str,
        subject: String,
        detail: String,
    },
}

/// Key of one term: the xi multi-index and the xibar multi-index.
pub type OddKey = (MultiIndex, MultiIndex);

#[derive(Clone, Debug, PartialEq)]
pub struct SuperFunction {
    m: u32,
    n: u32,
    terms: BTreeMap<OddKey, BodyExpr>,
}

impl SuperFunction {
    pub fn zero(m: u32, n: u32) -> Self {
        SuperFunction {
            m,
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(m: u32, n: u32, c: Complex64) -> Self {
        Self::from_body(m, n, BodyExpr::Const(c))
    }

    pub fn one(m: u32, n: u32) -> Self {
        Self::constant(m, n, Complex64::new(1.0, 0.0))
    }

    /// Purely even function of the body variables.
    pub fn from_body(m: u32, n: u32, e: BodyExpr) -> Self {
        let mut f = Self::zero(m, n);
        f.add_term(MultiIndex::EMPTY, MultiIndex::EMPTY, e);
        f
    }

    pub fn xi(m: u32, n: u32, j: u32) -> Result<Self, SuperFunError> {
        if j == 0 || j > n {
            return Err(SuperFunError::OddIndexOutOfRange { index: j, n });
        }
        let mut f = Self::zero(m, n);
        f.add_term(MultiIndex::EMPTY.insert(j), MultiIndex::EMPTY, BodyExpr::ONE);
        Ok(f)
    }

    pub fn xibar(m: u32, n: u32, j: u32) -> Result<Self, SuperFunError> {
        if j == 0 || j > n {
            return Err(SuperFunError::OddIndexOutOfRange { index: j, n });
        }
        let mut f = Self::zero(m, n);
        f.add_term(MultiIndex::EMPTY, MultiIndex::EMPTY.insert(j), BodyExpr::ONE);
        Ok(f)
    }

    pub fn term(m: u32, n: u32, mu: MultiIndex, lam: MultiIndex, coeff: BodyExpr) -> Self {
        let mut f = Self::zero(m, n);
        f.add_term(mu, lam, coeff);
        f
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.m, self.n)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&OddKey, &BodyExpr)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, mu: MultiIndex, lam: MultiIndex) -> BodyExpr {
        self.terms
            .get(&(mu, lam))
            .cloned()
            .unwrap_or(BodyExpr::ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, mu: MultiIndex, lam: MultiIndex, e: BodyExpr) {
        let e = e.canonical();
        if e.is_zero() {
            return;
        }
        match self.terms.entry((mu, lam)) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(e);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let combined = BodyExpr::add(vec![o.get().clone(), e]);
                if combined.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = combined;
                }
            }
        }
    }

    fn check_chart(&self, other: &Self) -> Result<(), SuperFunError> {
        if (self.m, self.n) != (other.m, other.n) {
            return Err(SuperFunError::ChartMismatch(
                self.m, self.n, other.m, other.n,
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, SuperFunError> {
        self.check_chart(other)?;
        let mut out = self.clone();
        for ((mu, lam), e) in other.terms() {
            out.add_term(*mu, *lam, e.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        self.scale(Complex64::new(-1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SuperFunError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.m, self.n);
        for ((mu, lam), e) in self.terms() {
            out.add_term(*mu, *lam, e.clone().scale(c));
        }
        out
    }

    /// Multiply every coefficient by a body expression (an even factor, so
    /// no sign bookkeeping is involved).
    pub fn scale_expr(&self, e: &BodyExpr) -> Self {
        let mut out = Self::zero(self.m, self.n);
        for ((mu, lam), coeff) in self.terms() {
            out.add_term(*mu, *lam, BodyExpr::mul(vec![e.clone(), coeff.clone()]));
        }
        out
    }

    /// Product; odd monomials multiply in the Grassmann algebra on 2n
    /// generators with all xi's before all xibar's in canonical order.
    pub fn mul(&self, other: &Self) -> Result<Self, SuperFunError> {
        self.check_chart(other)?;
        let n = self.n;
        let mut out = Self::zero(self.m, self.n);
        for ((mu1, lam1), e1) in self.terms() {
            let mask1 = mu1.0 | (lam1.0 << n);
            for ((mu2, lam2), e2) in other.terms() {
                let mask2 = mu2.0 | (lam2.0 << n);
                if mask1 & mask2 != 0 {
                    continue;
                }
                let sign = merge_sign(mask1, mask2);
                let coeff = BodyExpr::mul(vec![e1.clone(), e2.clone()])
                    .scale(Complex64::new(sign as f64, 0.0));
                out.add_term(mu1.union(*mu2), lam1.union(*lam2), coeff);
            }
        }
        Ok(out)
    }

    /// Coefficient-wise holomorphic body derivative.
    pub fn d_z(&self, i: u32) -> Result<Self, SuperFunError> {
        if i == 0 || i > self.m {
            return Err(SuperFunError::EvenIndexOutOfRange { index: i, m: self.m });
        }
        let mut out = Self::zero(self.m, self.n);
        for ((mu, lam), e) in self.terms() {
            out.add_term(*mu, *lam, e.diff(Var::Z(i)));
        }
        Ok(out)
    }

    pub fn d_zbar(&self, i: u32) -> Result<Self, SuperFunError> {
        if i == 0 || i > self.m {
            return Err(SuperFunError::EvenIndexOutOfRange { index: i, m: self.m });
        }
        let mut out = Self::zero(self.m, self.n);
        for ((mu, lam), e) in self.terms() {
            out.add_term(*mu, *lam, e.diff(Var::Zbar(i)));
        }
        Ok(out)
    }

    /// Left derivative with respect to `xi_j`: a term survives iff `j` occurs
    /// in its xi index, picking up `(-1)^(l-1)` for the 1-based position `l`.
    pub fn d_xi(&self, j: u32) -> Result<Self, SuperFunError> {
        if j == 0 || j > self.n {
            return Err(SuperFunError::OddIndexOutOfRange { index: j, n: self.n });
        }
        let mut out = Self::zero(self.m, self.n);
        for ((mu, lam), e) in self.terms() {
            if let Some(pos) = mu.position(j) {
                let sign = if (pos - 1) % 2 == 0 { 1.0 } else { -1.0 };
                out.add_term(mu.remove(j), *lam, e.clone().scale(Complex64::new(sign, 0.0)));
            }
        }
        Ok(out)
    }

    /// Left derivative with respect to `xibar_j`, with the extra global
    /// factor `(-1)^L(mu)` from passing the xi block.
    pub fn d_xibar(&self, j: u32) -> Result<Self, SuperFunError> {
        if j == 0 || j > self.n {
            return Err(SuperFunError::OddIndexOutOfRange { index: j, n: self.n });
        }
        let mut out = Self::zero(self.m, self.n);
        for ((mu, lam), e) in self.terms() {
            if let Some(pos) = lam.position(j) {
                let mut sign = if (pos - 1) % 2 == 0 { 1.0 } else { -1.0 };
                if mu.len() % 2 == 1 {
                    sign = -sign;
                }
                out.add_term(*mu, lam.remove(j), e.clone().scale(Complex64::new(sign, 0.0)));
            }
        }
        Ok(out)
    }

    pub fn parity(&self) -> Parity {
        let mut even = false;
        let mut odd = false;
        for ((mu, lam), _) in self.terms() {
            if (mu.len() + lam.len()) % 2 == 0 {
                even = true;
            } else {
                odd = true;
            }
        }
        match (even, odd) {
            (true, true) => Parity::Mixed,
            (false, true) => Parity::Odd,
            _ => Parity::Even,
        }
    }

    /// Conjugation, defined only for functions of the body variables.
    pub fn conj(&self) -> Result<Self, SuperFunError> {
        for ((mu, lam), _) in self.terms() {
            if !mu.is_empty() || !lam.is_empty() {
                return Err(SuperFunError::ConjugationNeedsBodyOnly(
                    mu.labels(),
                    lam.labels(),
                ));
            }
        }
        let mut out = Self::zero(self.m, self.n);
        out.add_term(
            MultiIndex::EMPTY,
            MultiIndex::EMPTY,
            self.coefficient(MultiIndex::EMPTY, MultiIndex::EMPTY).conj_expr(),
        );
        Ok(out)
    }

    /// Substitute the body point, leaving the odd monomials as Grassmann
    /// generators of the 2n-generator algebra.
    pub fn eval(
        &self,
        z: &[Complex64],
        reg: &OpaqueRegistry,
    ) -> Result<GrassmannValue, SuperFunError> {
        let gens = 2 * self.n;
        let mut out = GrassmannValue::zero(gens);
        for ((mu, lam), e) in self.terms() {
            let c = e.eval(z, reg)?;
            let idx = MultiIndex(mu.0 | (lam.0 << self.n));
            out = out
                .add(&GrassmannValue::monomial(gens, idx, c).expect("index in range"))
                .expect("same algebra");
        }
        Ok(out)
    }

    /// True when no coefficient depends on any `zbar_i` (or on an opaque,
    /// whose dependence is unknown) and no `xibar_j` occurs.
    pub fn is_holomorphic(&self) -> bool {
        self.terms()
            .all(|((_, lam), e)| lam.is_empty() && !e.mentions_zbar())
    }

    /// True when the function involves no odd variables at all.
    pub fn is_body_only(&self) -> bool {
        self.terms()
            .all(|((mu, lam), _)| mu.is_empty() && lam.is_empty())
    }

    pub fn body_coeff(&self) -> BodyExpr {
        self.coefficient(MultiIndex::EMPTY, MultiIndex::EMPTY)
    }

    pub fn max_body_var(&self) -> u32 {
        self.terms()
            .map(|(_, e)| e.max_var_index())
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for SuperFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, ((mu, lam), e)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            for l in mu.labels() {
                write!(f, "xi{l}·")?;
            }
            for l in lam.labels() {
                write!(f, "xb{l}·")?;
            }
            write!(f, "[{e}]")?;
        }
        Ok(())
    }
}

/// Odd holomorphic supervector field `V = sum f_i d/dz_i + sum g_j d/dxi_j`
/// on an `n|n` chart. Construction validates parity and holomorphy; the
/// theorem-mode flag records whether every `g_j` is free of odd variables.
#[derive(Clone, Debug)]
pub struct SuperVectorField {
    n: u32,
    f: Vec<SuperFunction>,
    g: Vec<SuperFunction>,
    theorem_mode: bool,
}

impl SuperVectorField {
    pub fn new(f: Vec<SuperFunction>, g: Vec<SuperFunction>) -> Result<Self, SuperFunError> {
        if f.len() != g.len() {
            return Err(SuperFunError::Invariant {
                invariant: "field.shape",
                subject: "vector field".into(),
                detail: format!("need n dz-components and n dxi-components, got {} and {}", f.len(), g.len()),
            });
        }
        let n = f.len() as u32;
        for (i, fi) in f.iter().enumerate() {
            if fi.dims() != (n, n) {
                return Err(SuperFunError::Invariant {
                    invariant: "field.chart",
                    subject: format!("f[{i}]"),
                    detail: format!("component lives on chart {:?}, field needs ({n},{n})", fi.dims()),
                });
            }
            if !fi.is_zero() && fi.parity() != Parity::Odd {
                return Err(SuperFunError::Invariant {
                    invariant: "field.f_odd",
                    subject: format!("f[{i}]"),
                    detail: format!("dz-component must be odd, got {:?}", fi.parity()),
                });
            }
            if !fi.is_holomorphic() {
                return Err(SuperFunError::Invariant {
                    invariant: "field.holomorphic",
                    subject: format!("f[{i}]"),
                    detail: "dz-component depends on zbar or xibar".into(),
                });
            }
        }
        for (j, gj) in g.iter().enumerate() {
            if gj.dims() != (n, n) {
                return Err(SuperFunError::Invariant {
                    invariant: "field.chart",
                    subject: format!("g[{j}]"),
                    detail: format!("component lives on chart {:?}, field needs ({n},{n})", gj.dims()),
                });
            }
            if gj.parity() == Parity::Odd || gj.parity() == Parity::Mixed {
                return Err(SuperFunError::Invariant {
                    invariant: "field.g_even",
                    subject: format!("g[{j}]"),
                    detail: format!("dxi-component must be even, got {:?}", gj.parity()),
                });
            }
            if !gj.is_holomorphic() {
                return Err(SuperFunError::Invariant {
                    invariant: "field.holomorphic",
                    subject: format!("g[{j}]"),
                    detail: "dxi-component depends on zbar or xibar".into(),
                });
            }
        }
        let theorem_mode = g.iter().all(|gj| gj.is_body_only());
        Ok(SuperVectorField {
            n,
            f,
            g,
            theorem_mode,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn f(&self, i: u32) -> &SuperFunction {
        &self.f[(i - 1) as usize]
    }

    pub fn g(&self, j: u32) -> &SuperFunction {
        &self.g[(j - 1) as usize]
    }

    pub fn f_components(&self) -> &[SuperFunction] {
        &self.f
    }

    pub fn g_components(&self) -> &[SuperFunction] {
        &self.g
    }

    /// All dxi-components free of odd variables.
    pub fn theorem_mode(&self) -> bool {
        self.theorem_mode
    }

    pub fn is_f_zero(&self) -> bool {
        self.f.iter().all(|fi| fi.is_zero())
    }
}
