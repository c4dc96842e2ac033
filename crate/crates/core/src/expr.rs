//! Expression trees for coefficient functions on the body manifold.
//!
//! A [`BodyExpr`] is a function of the chart variables `z_1..z_m` and their
//! formal conjugates `zb_1..zb_m`. The two families are treated as independent
//! variables for differentiation (Wirtinger convention); evaluation binds
//! `zb_i` to the complex conjugate of the supplied `z_i`.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;

/// A variable on the body: holomorphic `z_i` or antiholomorphic `zb_i`.
/// Indices are 1-based throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Z(u32),
    Zbar(u32),
}

impl Var {
    pub fn conj(self) -> Var {
        match self {
            Var::Z(i) => Var::Zbar(i),
            Var::Zbar(i) => Var::Z(i),
        }
    }

    pub fn index(self) -> u32 {
        match self {
            Var::Z(i) | Var::Zbar(i) => i,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Z(i) => write!(f, "z{i}"),
            Var::Zbar(i) => write!(f, "zb{i}"),
        }
    }
}

/// Expression tree over body variables with complex constants.
#[derive(Clone, Debug, PartialEq)]
pub enum BodyExpr {
    Const(Complex64),
    Var(Var),
    Add(Vec<BodyExpr>),
    Mul(Vec<BodyExpr>),
    Div(Box<BodyExpr>, Box<BodyExpr>),
    Pow(Box<BodyExpr>, i32),
    Conj(Box<BodyExpr>),
    /// Named function with an evaluator supplied through [`OpaqueRegistry`].
    /// Differentiation produces a derived opaque name; evaluation of an
    /// unregistered name is an error.
    Opaque(String),
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero in subexpression `{expr}`")]
    DivisionByZero { expr: String },
    #[error("zero raised to negative power in subexpression `{expr}`")]
    ZeroToNegativePower { expr: String },
    #[error("variable {var} out of range: point has dimension {dim}")]
    VarOutOfRange { var: String, dim: usize },
    #[error("opaque function `{0}` has no registered evaluator")]
    UnknownOpaque(String),
}

/// Evaluators for opaque named functions. Each gets the full body point.
#[derive(Default)]
pub struct OpaqueRegistry {
    fns: HashMap<String, Box<dyn Fn(&[Complex64]) -> Complex64 + Sync + Send>>,
}

impl OpaqueRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with the evaluators the shipped scenarios rely on.
    ///
    /// `exp_neg_norm` is `exp(-sum_i |z_i|^2)`, the Gaussian weight that the
    /// rational expression grammar cannot spell.
    pub fn builtin() -> Self {
        let mut r = Self::new();
        r.register("exp_neg_norm", |z| {
            let s: f64 = z.iter().map(|c| c.norm_sqr()).sum();
            Complex64::new((-s).exp(), 0.0)
        });
        r
    }

    pub fn register(
        &mut self,
        name: &str,
        f: impl Fn(&[Complex64]) -> Complex64 + Sync + Send + 'static,
    ) {
        self.fns.insert(name.to_string(), Box::new(f));
    }

    pub fn get(&self, name: &str) -> Option<&(dyn Fn(&[Complex64]) -> Complex64 + Sync + Send)> {
        self.fns.get(name).map(|b| &**b)
    }
}

impl BodyExpr {
    pub const ZERO: BodyExpr = BodyExpr::Const(Complex64::new(0.0, 0.0));
    pub const ONE: BodyExpr = BodyExpr::Const(Complex64::new(1.0, 0.0));

    pub fn constant(re: f64, im: f64) -> BodyExpr {
        BodyExpr::Const(Complex64::new(re, im))
    }

    pub fn z(i: u32) -> BodyExpr {
        BodyExpr::Var(Var::Z(i))
    }

    pub fn zbar(i: u32) -> BodyExpr {
        BodyExpr::Var(Var::Zbar(i))
    }

    pub fn add(terms: Vec<BodyExpr>) -> BodyExpr {
        BodyExpr::Add(terms).canonical()
    }

    pub fn mul(factors: Vec<BodyExpr>) -> BodyExpr {
        BodyExpr::Mul(factors).canonical()
    }

    pub fn div(num: BodyExpr, den: BodyExpr) -> BodyExpr {
        BodyExpr::Div(Box::new(num), Box::new(den)).canonical()
    }

    pub fn pow(base: BodyExpr, k: i32) -> BodyExpr {
        BodyExpr::Pow(Box::new(base), k).canonical()
    }

    pub fn neg(self) -> BodyExpr {
        BodyExpr::mul(vec![BodyExpr::constant(-1.0, 0.0), self])
    }

    pub fn sub(self, rhs: BodyExpr) -> BodyExpr {
        BodyExpr::add(vec![self, rhs.neg()])
    }

    pub fn scale(self, c: Complex64) -> BodyExpr {
        BodyExpr::mul(vec![BodyExpr::Const(c), self])
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, BodyExpr::Const(c) if c.re == 0.0 && c.im == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, BodyExpr::Const(c) if c.re == 1.0 && c.im == 0.0)
    }

    /// Exact recursive evaluation at a body point; `zb_i` is bound to
    /// `conj(z[i-1])`.
    pub fn eval(&self, z: &[Complex64], reg: &OpaqueRegistry) -> Result<Complex64, EvalError> {
        match self {
            BodyExpr::Const(c) => Ok(*c),
            BodyExpr::Var(v) => {
                let i = v.index() as usize;
                if i == 0 || i > z.len() {
                    return Err(EvalError::VarOutOfRange {
                        var: v.to_string(),
                        dim: z.len(),
                    });
                }
                Ok(match v {
                    Var::Z(_) => z[i - 1],
                    Var::Zbar(_) => z[i - 1].conj(),
                })
            }
            BodyExpr::Add(ts) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in ts {
                    acc += t.eval(z, reg)?;
                }
                Ok(acc)
            }
            BodyExpr::Mul(fs) => {
                let mut acc = Complex64::new(1.0, 0.0);
                for f in fs {
                    acc *= f.eval(z, reg)?;
                }
                Ok(acc)
            }
            BodyExpr::Div(n, d) => {
                let dv = d.eval(z, reg)?;
                if dv.re == 0.0 && dv.im == 0.0 {
                    return Err(EvalError::DivisionByZero {
                        expr: self.to_string(),
                    });
                }
                Ok(n.eval(z, reg)? / dv)
            }
            BodyExpr::Pow(b, k) => {
                let bv = b.eval(z, reg)?;
                if *k < 0 && bv.re == 0.0 && bv.im == 0.0 {
                    return Err(EvalError::ZeroToNegativePower {
                        expr: self.to_string(),
                    });
                }
                Ok(bv.powi(*k))
            }
            BodyExpr::Conj(e) => Ok(e.eval(z, reg)?.conj()),
            BodyExpr::Opaque(name) => match reg.get(name) {
                Some(f) => Ok(f(z)),
                None => Err(EvalError::UnknownOpaque(name.clone())),
            },
        }
    }

    /// Exact partial derivative, treating `z_i` and `zb_i` as independent.
    pub fn diff(&self, var: Var) -> BodyExpr {
        match self {
            BodyExpr::Const(_) => BodyExpr::ZERO,
            BodyExpr::Var(v) => {
                if *v == var {
                    BodyExpr::ONE
                } else {
                    BodyExpr::ZERO
                }
            }
            BodyExpr::Add(ts) => BodyExpr::add(ts.iter().map(|t| t.diff(var)).collect()),
            BodyExpr::Mul(fs) => {
                let mut terms = Vec::with_capacity(fs.len());
                for (i, _) in fs.iter().enumerate() {
                    let mut prod = Vec::with_capacity(fs.len());
                    for (j, f) in fs.iter().enumerate() {
                        prod.push(if i == j { f.diff(var) } else { f.clone() });
                    }
                    terms.push(BodyExpr::mul(prod));
                }
                BodyExpr::add(terms)
            }
            BodyExpr::Div(n, d) => {
                // (n'd - nd') / d^2
                let num = BodyExpr::mul(vec![n.diff(var), (**d).clone()])
                    .sub(BodyExpr::mul(vec![(**n).clone(), d.diff(var)]));
                BodyExpr::div(num, BodyExpr::pow((**d).clone(), 2))
            }
            BodyExpr::Pow(b, k) => {
                if *k == 0 {
                    return BodyExpr::ZERO;
                }
                BodyExpr::mul(vec![
                    BodyExpr::constant(*k as f64, 0.0),
                    BodyExpr::pow((**b).clone(), k - 1),
                    b.diff(var),
                ])
            }
            BodyExpr::Conj(e) => BodyExpr::Conj(Box::new(e.diff(var.conj()))).canonical(),
            BodyExpr::Opaque(name) => BodyExpr::Opaque(format!("{name}__d_{var}")),
        }
    }

    /// Swap `z_i <-> zb_i` and conjugate constants.
    pub fn conj_expr(&self) -> BodyExpr {
        match self {
            BodyExpr::Const(c) => BodyExpr::Const(c.conj()),
            BodyExpr::Var(v) => BodyExpr::Var(v.conj()),
            BodyExpr::Add(ts) => BodyExpr::add(ts.iter().map(|t| t.conj_expr()).collect()),
            BodyExpr::Mul(fs) => BodyExpr::mul(fs.iter().map(|f| f.conj_expr()).collect()),
            BodyExpr::Div(n, d) => BodyExpr::div(n.conj_expr(), d.conj_expr()),
            BodyExpr::Pow(b, k) => BodyExpr::pow(b.conj_expr(), *k),
            BodyExpr::Conj(e) => (**e).clone().canonical(),
            BodyExpr::Opaque(_) => BodyExpr::Conj(Box::new(self.clone())),
        }
    }

    /// Largest variable index mentioned (0 if none).
    pub fn max_var_index(&self) -> u32 {
        match self {
            BodyExpr::Const(_) | BodyExpr::Opaque(_) => 0,
            BodyExpr::Var(v) => v.index(),
            BodyExpr::Add(ts) | BodyExpr::Mul(ts) => {
                ts.iter().map(|t| t.max_var_index()).max().unwrap_or(0)
            }
            BodyExpr::Div(n, d) => n.max_var_index().max(d.max_var_index()),
            BodyExpr::Pow(b, _) => b.max_var_index(),
            BodyExpr::Conj(e) => e.max_var_index(),
        }
    }

    pub fn mentions_zbar(&self) -> bool {
        match self {
            BodyExpr::Const(_) => false,
            BodyExpr::Var(v) => matches!(v, Var::Zbar(_)),
            BodyExpr::Add(ts) | BodyExpr::Mul(ts) => ts.iter().any(|t| t.mentions_zbar()),
            BodyExpr::Div(n, d) => n.mentions_zbar() || d.mentions_zbar(),
            BodyExpr::Pow(b, _) => b.mentions_zbar(),
            // Conjugation flips which family the inner expression touches;
            // an opaque's dependence is unknown, treat it as antiholomorphic.
            BodyExpr::Conj(e) => e.mentions_z(),
            BodyExpr::Opaque(_) => true,
        }
    }

    pub fn mentions_z(&self) -> bool {
        match self {
            BodyExpr::Const(_) => false,
            BodyExpr::Var(v) => matches!(v, Var::Z(_)),
            BodyExpr::Add(ts) | BodyExpr::Mul(ts) => ts.iter().any(|t| t.mentions_z()),
            BodyExpr::Div(n, d) => n.mentions_z() || d.mentions_z(),
            BodyExpr::Pow(b, _) => b.mentions_z(),
            BodyExpr::Conj(e) => e.mentions_zbar(),
            BodyExpr::Opaque(_) => true,
        }
    }

    /// Light canonicalization: flatten sums/products, fold constants, push
    /// conjugation to the leaves, combine scalar multiples of equal terms.
    /// Not a full simplifier.
    pub fn canonical(self) -> BodyExpr {
        match self {
            BodyExpr::Const(_) | BodyExpr::Var(_) | BodyExpr::Opaque(_) => self,
            BodyExpr::Add(ts) => {
                let mut flat: Vec<BodyExpr> = Vec::new();
                let mut konst = Complex64::new(0.0, 0.0);
                for t in ts {
                    match t.canonical() {
                        BodyExpr::Const(c) => konst += c,
                        BodyExpr::Add(inner) => {
                            for u in inner {
                                match u {
                                    BodyExpr::Const(c) => konst += c,
                                    other => flat.push(other),
                                }
                            }
                        }
                        other => flat.push(other),
                    }
                }
                // combine c1*e + c2*e
                let mut groups: Vec<(BodyExpr, Complex64)> = Vec::new();
                for t in flat {
                    let (coef, core) = split_scalar(t);
                    match groups.iter_mut().find(|(g, _)| *g == core) {
                        Some((_, c)) => *c += coef,
                        None => groups.push((core, coef)),
                    }
                }
                let mut out: Vec<BodyExpr> = groups
                    .into_iter()
                    .filter(|(_, c)| !(c.re == 0.0 && c.im == 0.0))
                    .map(|(core, c)| rescale(core, c))
                    .collect();
                if !(konst.re == 0.0 && konst.im == 0.0) {
                    out.push(BodyExpr::Const(konst));
                }
                out.sort_by(expr_cmp);
                match out.len() {
                    0 => BodyExpr::ZERO,
                    1 => out.pop().unwrap(),
                    _ => BodyExpr::Add(out),
                }
            }
            BodyExpr::Mul(fs) => {
                let mut flat: Vec<BodyExpr> = Vec::new();
                let mut konst = Complex64::new(1.0, 0.0);
                for f in fs {
                    match f.canonical() {
                        BodyExpr::Const(c) => konst *= c,
                        BodyExpr::Mul(inner) => {
                            for u in inner {
                                match u {
                                    BodyExpr::Const(c) => konst *= c,
                                    other => flat.push(other),
                                }
                            }
                        }
                        other => flat.push(other),
                    }
                }
                if konst.re == 0.0 && konst.im == 0.0 {
                    return BodyExpr::ZERO;
                }
                flat.sort_by(expr_cmp);
                if !konst.is_one() {
                    flat.insert(0, BodyExpr::Const(konst));
                }
                match flat.len() {
                    0 => BodyExpr::ONE,
                    1 => flat.pop().unwrap(),
                    _ => BodyExpr::Mul(flat),
                }
            }
            BodyExpr::Div(n, d) => {
                let n = n.canonical();
                let d = d.canonical();
                if n.is_zero() {
                    return BodyExpr::ZERO;
                }
                if d.is_one() {
                    return n;
                }
                if let (BodyExpr::Const(a), BodyExpr::Const(b)) = (&n, &d) {
                    if !(b.re == 0.0 && b.im == 0.0) {
                        return BodyExpr::Const(a / b);
                    }
                }
                BodyExpr::Div(Box::new(n), Box::new(d))
            }
            BodyExpr::Pow(b, k) => {
                let b = b.canonical();
                match k {
                    0 => BodyExpr::ONE,
                    1 => b,
                    _ => {
                        if let BodyExpr::Const(c) = &b {
                            if k > 0 || !(c.re == 0.0 && c.im == 0.0) {
                                return BodyExpr::Const(c.powi(k));
                            }
                        }
                        BodyExpr::Pow(Box::new(b), k)
                    }
                }
            }
            BodyExpr::Conj(e) => {
                let inner = e.canonical();
                match inner {
                    BodyExpr::Opaque(_) => BodyExpr::Conj(Box::new(inner)),
                    BodyExpr::Conj(inner2) => match *inner2 {
                        o @ BodyExpr::Opaque(_) => o,
                        other => other.conj_expr(),
                    },
                    other => other.conj_expr(),
                }
            }
        }
    }
}

fn is_one_helper(c: &Complex64) -> bool {
    c.re == 1.0 && c.im == 0.0
}

trait IsOne {
    fn is_one(&self) -> bool;
}

impl IsOne for Complex64 {
    fn is_one(&self) -> bool {
        is_one_helper(self)
    }
}

/// Split a canonical expression into (scalar coefficient, core).
fn split_scalar(e: BodyExpr) -> (Complex64, BodyExpr) {
    match e {
        BodyExpr::Mul(fs) => {
            if let Some(BodyExpr::Const(c)) = fs.first() {
                let c = *c;
                let rest: Vec<BodyExpr> = fs.into_iter().skip(1).collect();
                let core = match rest.len() {
                    1 => rest.into_iter().next().unwrap(),
                    _ => BodyExpr::Mul(rest),
                };
                (c, core)
            } else {
                (Complex64::new(1.0, 0.0), BodyExpr::Mul(fs))
            }
        }
        other => (Complex64::new(1.0, 0.0), other),
    }
}

fn rescale(core: BodyExpr, c: Complex64) -> BodyExpr {
    if is_one_helper(&c) {
        return core;
    }
    match core {
        BodyExpr::Mul(mut fs) => {
            fs.insert(0, BodyExpr::Const(c));
            BodyExpr::Mul(fs)
        }
        other => BodyExpr::Mul(vec![BodyExpr::Const(c), other]),
    }
}

/// Total structural order used to sort commutative children deterministically.
fn expr_cmp(a: &BodyExpr, b: &BodyExpr) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    fn rank(e: &BodyExpr) -> u8 {
        match e {
            BodyExpr::Const(_) => 0,
            BodyExpr::Var(_) => 1,
            BodyExpr::Pow(_, _) => 2,
            BodyExpr::Mul(_) => 3,
            BodyExpr::Add(_) => 4,
            BodyExpr::Div(_, _) => 5,
            BodyExpr::Conj(_) => 6,
            BodyExpr::Opaque(_) => 7,
        }
    }
    match (a, b) {
        (BodyExpr::Const(x), BodyExpr::Const(y)) => x
            .re
            .total_cmp(&y.re)
            .then_with(|| x.im.total_cmp(&y.im)),
        (BodyExpr::Var(x), BodyExpr::Var(y)) => x.cmp(y),
        (BodyExpr::Pow(x, i), BodyExpr::Pow(y, j)) => expr_cmp(x, y).then_with(|| i.cmp(j)),
        (BodyExpr::Mul(x), BodyExpr::Mul(y)) | (BodyExpr::Add(x), BodyExpr::Add(y)) => {
            let mut it = x.iter().zip(y.iter());
            loop {
                match it.next() {
                    Some((u, v)) => match expr_cmp(u, v) {
                        Ordering::Equal => continue,
                        ord => return ord,
                    },
                    None => return x.len().cmp(&y.len()),
                }
            }
        }
        (BodyExpr::Div(nx, dx), BodyExpr::Div(ny, dy)) => {
            expr_cmp(nx, ny).then_with(|| expr_cmp(dx, dy))
        }
        (BodyExpr::Conj(x), BodyExpr::Conj(y)) => expr_cmp(x, y),
        (BodyExpr::Opaque(x), BodyExpr::Opaque(y)) => x.cmp(y),
        _ => rank(a).cmp(&rank(b)),
    }
}

impl fmt::Display for BodyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyExpr::Const(c) => {
                if c.im == 0.0 {
                    write!(f, "{}", c.re)
                } else {
                    write!(f, "({}{}{}i)", c.re, if c.im < 0.0 { "" } else { "+" }, c.im)
                }
            }
            BodyExpr::Var(v) => write!(f, "{v}"),
            BodyExpr::Add(ts) => {
                write!(f, "(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            BodyExpr::Mul(fs) => {
                for (i, t) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{t}")?;
                }
                Ok(())
            }
            BodyExpr::Div(n, d) => write!(f, "({n})/({d})"),
            BodyExpr::Pow(b, k) => write!(f, "({b})^{k}"),
            BodyExpr::Conj(e) => write!(f, "conj({e})"),
            BodyExpr::Opaque(n) => write!(f, "opaque:{n}"),
        }
    }
}
