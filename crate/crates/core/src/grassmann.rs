//! Exact arithmetic in the complex Grassmann algebra with finitely many
//! named generators, plus determinants and the Berezinian for block matrices
//! over it.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, thiserror::Error)]
pub enum GrassmannError {
    #[error("generator count mismatch: {0} vs {1}")]
    GeneratorMismatch(u32, u32),
    #[error("generator label {label} out of range 1..={gens}")]
    LabelOutOfRange { label: u32, gens: u32 },
    #[error("multi-index labels must be strictly increasing, got {0:?}")]
    NotIncreasing(Vec<u32>),
    #[error("element is not even, cannot invert")]
    NotEven,
    #[error("element has zero body, not invertible")]
    ZeroBody,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix entry ({row},{col}) is not {expected}")]
    BadEntryParity {
        row: usize,
        col: usize,
        expected: &'static str,
    },
    #[error("block shapes incompatible for Berezinian")]
    BadBlockShape,
    #[error("det(D) has zero body; Berezinian undefined")]
    SingularD,
    #[error("elimination pivot has zero body")]
    SingularPivot,
}

/// Strictly increasing sequence of generator labels, stored as a bitmask
/// (bit `k` set means generator `k+1` occurs). The empty index is the unit
/// monomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(pub(crate) u64);

impl MultiIndex {
    pub const EMPTY: MultiIndex = MultiIndex(0);

    /// Build from strictly increasing labels in `1..=gens` (gens checked by
    /// the value-level constructors; here only monotonicity and range > 0).
    pub fn from_labels(labels: &[u32]) -> Result<MultiIndex, GrassmannError> {
        let mut mask = 0u64;
        let mut prev = 0u32;
        for &l in labels {
            if l == 0 || l > 64 {
                return Err(GrassmannError::LabelOutOfRange { label: l, gens: 64 });
            }
            if l <= prev {
                return Err(GrassmannError::NotIncreasing(labels.to_vec()));
            }
            prev = l;
            mask |= 1u64 << (l - 1);
        }
        Ok(MultiIndex(mask))
    }

    pub fn labels(self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.0.count_ones() as usize);
        let mut m = self.0;
        while m != 0 {
            let b = m.trailing_zeros();
            out.push(b + 1);
            m &= m - 1;
        }
        out
    }

    /// Number of labels, written L(mu) in index notation.
    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, label: u32) -> bool {
        label >= 1 && label <= 64 && (self.0 >> (label - 1)) & 1 == 1
    }

    pub fn insert(self, label: u32) -> MultiIndex {
        MultiIndex(self.0 | (1u64 << (label - 1)))
    }

    pub fn remove(self, label: u32) -> MultiIndex {
        MultiIndex(self.0 & !(1u64 << (label - 1)))
    }

    pub fn max_label(self) -> u32 {
        if self.0 == 0 {
            0
        } else {
            64 - self.0.leading_zeros()
        }
    }

    /// 1-based position of `label` within the increasing sequence.
    pub fn position(self, label: u32) -> Option<u32> {
        if !self.contains(label) {
            return None;
        }
        let below = self.0 & ((1u64 << (label - 1)) - 1);
        Some(below.count_ones() + 1)
    }

    /// Complement within `{1..n}`.
    pub fn complement(self, n: u32) -> MultiIndex {
        let full = if n == 64 { !0u64 } else { (1u64 << n) - 1 };
        MultiIndex(full & !self.0)
    }

    pub fn full(n: u32) -> MultiIndex {
        let mask = if n == 64 { !0u64 } else { (1u64 << n) - 1 };
        MultiIndex(mask)
    }

    pub fn disjoint(self, other: MultiIndex) -> bool {
        self.0 & other.0 == 0
    }

    pub fn union(self, other: MultiIndex) -> MultiIndex {
        MultiIndex(self.0 | other.0)
    }
}

/// Sign (-1)^inv for interleaving the sorted labels of `b` into those of `a`.
/// The masks must be disjoint.
pub(crate) fn merge_sign(a: u64, b: u64) -> i32 {
    let mut inv = 0u32;
    let mut m = b;
    while m != 0 {
        let j = m.trailing_zeros(); // label j+1
        inv += (a >> (j + 1)).count_ones();
        m &= m - 1;
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

/// Element of the complex Grassmann algebra with `gens` generators:
/// a finite map from multi-indices to complex coefficients; zero coefficients
/// are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannValue {
    gens: u32,
    terms: BTreeMap<MultiIndex, Complex64>,
}

impl GrassmannValue {
    pub fn zero(gens: u32) -> Self {
        GrassmannValue {
            gens,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(gens: u32) -> Self {
        Self::scalar(gens, Complex64::new(1.0, 0.0))
    }

    pub fn scalar(gens: u32, c: Complex64) -> Self {
        let mut v = Self::zero(gens);
        v.add_term(MultiIndex::EMPTY, c);
        v
    }

    pub fn generator(gens: u32, label: u32) -> Result<Self, GrassmannError> {
        if label == 0 || label > gens {
            return Err(GrassmannError::LabelOutOfRange { label, gens });
        }
        let mut v = Self::zero(gens);
        v.add_term(MultiIndex::EMPTY.insert(label), Complex64::new(1.0, 0.0));
        Ok(v)
    }

    pub fn monomial(gens: u32, idx: MultiIndex, c: Complex64) -> Result<Self, GrassmannError> {
        if idx.max_label() > gens {
            return Err(GrassmannError::LabelOutOfRange {
                label: idx.max_label(),
                gens,
            });
        }
        let mut v = Self::zero(gens);
        v.add_term(idx, c);
        Ok(v)
    }

    pub fn gens(&self) -> u32 {
        self.gens
    }

    pub fn terms(&self) -> impl Iterator<Item = (MultiIndex, Complex64)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v))
    }

    pub fn coefficient(&self, idx: MultiIndex) -> Complex64 {
        self.terms
            .get(&idx)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, idx: MultiIndex, c: Complex64) {
        if c.re == 0.0 && c.im == 0.0 {
            return;
        }
        let entry = self.terms.entry(idx).or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
        if entry.re == 0.0 && entry.im == 0.0 {
            self.terms.remove(&idx);
        }
    }

    fn check_gens(&self, other: &Self) -> Result<(), GrassmannError> {
        if self.gens != other.gens {
            return Err(GrassmannError::GeneratorMismatch(self.gens, other.gens));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, GrassmannError> {
        self.check_gens(other)?;
        let mut out = self.clone();
        for (idx, c) in other.terms() {
            out.add_term(idx, c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, GrassmannError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(Complex64::new(-1.0, 0.0))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.gens);
        for (idx, v) in self.terms() {
            out.add_term(idx, v * c);
        }
        out
    }

    /// Bilinear product with inversion-count signs; shared generators kill a
    /// monomial pair.
    pub fn mul(&self, other: &Self) -> Result<Self, GrassmannError> {
        self.check_gens(other)?;
        let mut out = Self::zero(self.gens);
        for (ia, ca) in self.terms() {
            for (ib, cb) in other.terms() {
                if !ia.disjoint(ib) {
                    continue;
                }
                let sign = merge_sign(ia.0, ib.0);
                out.add_term(ia.union(ib), ca * cb * sign as f64);
            }
        }
        Ok(out)
    }

    pub fn parity(&self) -> Parity {
        let mut even = false;
        let mut odd = false;
        for (idx, _) in self.terms() {
            if idx.len() % 2 == 0 {
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

    /// Coefficient of the unit monomial.
    pub fn body(&self) -> Complex64 {
        self.coefficient(MultiIndex::EMPTY)
    }

    /// Nilpotent remainder after removing the body.
    pub fn soul(&self) -> Self {
        let mut out = self.clone();
        out.terms.remove(&MultiIndex::EMPTY);
        out
    }

    /// Exact inverse of an even element with nonzero body:
    /// `b^-1 * sum_k (-soul/b)^k`, terminating by nilpotency.
    pub fn inverse(&self) -> Result<Self, GrassmannError> {
        if self.parity() != Parity::Even {
            return Err(GrassmannError::NotEven);
        }
        let b = self.body();
        if b.re == 0.0 && b.im == 0.0 {
            return Err(GrassmannError::ZeroBody);
        }
        let ratio = self.soul().scale(-1.0 / b);
        let mut acc = Self::one(self.gens);
        let mut power = Self::one(self.gens);
        for _ in 0..(self.gens / 2 + 1) {
            power = power.mul(&ratio)?;
            if power.is_zero() {
                break;
            }
            acc = acc.add(&power)?;
        }
        Ok(acc.scale(1.0 / b))
    }

    /// `exp(body) * sum_k soul^k / k!`; the series terminates because the
    /// soul is nilpotent.
    pub fn exp(&self) -> Self {
        let b = self.body();
        let scale = b.exp();
        let soul = self.soul();
        let mut acc = Self::one(self.gens);
        let mut power = Self::one(self.gens);
        let mut factorial = 1.0f64;
        for k in 1..=(self.gens as u64 + 1) {
            power = power.mul(&soul).expect("same algebra");
            if power.is_zero() {
                break;
            }
            factorial *= k as f64;
            acc = acc
                .add(&power.scale(Complex64::new(1.0 / factorial, 0.0)))
                .expect("same algebra");
        }
        acc.scale(scale)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.gens != other.gens {
            return false;
        }
        let mut keys: Vec<MultiIndex> = self.terms.keys().copied().collect();
        keys.extend(other.terms.keys().copied());
        keys.sort_unstable();
        keys.dedup();
        keys.iter()
            .all(|k| (self.coefficient(*k) - other.coefficient(*k)).norm() <= tol)
    }
}

impl fmt::Display for GrassmannValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (idx, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}{}{}i)", c.re, if c.im < 0.0 { "" } else { "+" }, c.im)?;
            for l in idx.labels() {
                write!(f, "·b{l}")?;
            }
        }
        Ok(())
    }
}

/// Serialization record for one term: `{"idx":[...],"re":..,"im":..}`.
#[derive(Serialize, Deserialize)]
pub struct TermRecord {
    pub idx: Vec<u32>,
    pub re: f64,
    pub im: f64,
}

impl GrassmannValue {
    pub fn to_records(&self) -> Vec<TermRecord> {
        self.terms()
            .map(|(idx, c)| TermRecord {
                idx: idx.labels(),
                re: c.re,
                im: c.im,
            })
            .collect()
    }

    pub fn from_records(gens: u32, records: &[TermRecord]) -> Result<Self, GrassmannError> {
        let mut v = Self::zero(gens);
        for r in records {
            let idx = MultiIndex::from_labels(&r.idx)?;
            if idx.max_label() > gens {
                return Err(GrassmannError::LabelOutOfRange {
                    label: idx.max_label(),
                    gens,
                });
            }
            v.add_term(idx, Complex64::new(r.re, r.im));
        }
        Ok(v)
    }
}

/// Dense matrix of Grassmann values. Constructors for the even/odd block
/// roles validate entry parity (zero entries are allowed anywhere).
#[derive(Clone, Debug)]
pub struct GrassmannMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<GrassmannValue>,
}

impl GrassmannMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<GrassmannValue>) -> Self {
        assert_eq!(entries.len(), rows * cols);
        GrassmannMatrix {
            rows,
            cols,
            entries,
        }
    }

    pub fn even(
        rows: usize,
        cols: usize,
        entries: Vec<GrassmannValue>,
    ) -> Result<Self, GrassmannError> {
        for (k, e) in entries.iter().enumerate() {
            if e.parity() == Parity::Odd || e.parity() == Parity::Mixed {
                return Err(GrassmannError::BadEntryParity {
                    row: k / cols,
                    col: k % cols,
                    expected: "even",
                });
            }
        }
        Ok(Self::new(rows, cols, entries))
    }

    pub fn odd(
        rows: usize,
        cols: usize,
        entries: Vec<GrassmannValue>,
    ) -> Result<Self, GrassmannError> {
        for (k, e) in entries.iter().enumerate() {
            if !e.is_zero() && e.parity() != Parity::Odd {
                return Err(GrassmannError::BadEntryParity {
                    row: k / cols,
                    col: k % cols,
                    expected: "odd",
                });
            }
        }
        Ok(Self::new(rows, cols, entries))
    }

    pub fn identity(n: usize, gens: u32) -> Self {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(if i == j {
                    GrassmannValue::one(gens)
                } else {
                    GrassmannValue::zero(gens)
                });
            }
        }
        Self::new(n, n, entries)
    }

    pub fn at(&self, i: usize, j: usize) -> &GrassmannValue {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: GrassmannValue) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn gens(&self) -> u32 {
        self.entries.first().map(|e| e.gens()).unwrap_or(0)
    }

    fn require_even(&self) -> Result<(), GrassmannError> {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let p = self.at(i, j).parity();
                if p == Parity::Odd || p == Parity::Mixed {
                    return Err(GrassmannError::BadEntryParity {
                        row: i,
                        col: j,
                        expected: "even",
                    });
                }
            }
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self, GrassmannError> {
        assert_eq!(self.cols, other.rows);
        let gens = self.gens().max(other.gens());
        let mut out = Vec::with_capacity(self.rows * other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = GrassmannValue::zero(gens);
                for k in 0..self.cols {
                    acc = acc.add(&self.at(i, k).mul(other.at(k, j))?)?;
                }
                out.push(acc);
            }
        }
        Ok(Self::new(self.rows, other.cols, out))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, GrassmannError> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = Vec::with_capacity(self.entries.len());
        for (a, b) in self.entries.iter().zip(other.entries.iter()) {
            out.push(a.sub(b)?);
        }
        Ok(Self::new(self.rows, self.cols, out))
    }

    /// Gauss-Jordan inverse with pivots chosen by maximal body magnitude.
    /// Requires even entries and invertible body.
    pub fn inverse(&self) -> Result<Self, GrassmannError> {
        if self.rows != self.cols {
            return Err(GrassmannError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        self.require_even()?;
        let n = self.rows;
        let gens = self.gens();
        let mut work = self.clone();
        let mut inv = Self::identity(n, gens);
        for col in 0..n {
            // pivot by maximal body magnitude
            let mut best = col;
            let mut best_mag = work.at(col, col).body().norm();
            for r in col + 1..n {
                let mag = work.at(r, col).body().norm();
                if mag > best_mag {
                    best = r;
                    best_mag = mag;
                }
            }
            if best_mag == 0.0 {
                return Err(GrassmannError::SingularPivot);
            }
            if best != col {
                for j in 0..n {
                    let a = work.at(col, j).clone();
                    let b = work.at(best, j).clone();
                    work.set(col, j, b);
                    work.set(best, j, a);
                    let a = inv.at(col, j).clone();
                    let b = inv.at(best, j).clone();
                    inv.set(col, j, b);
                    inv.set(best, j, a);
                }
            }
            let pivot_inv = work.at(col, col).inverse()?;
            for j in 0..n {
                work.set(col, j, work.at(col, j).mul(&pivot_inv)?);
                inv.set(col, j, inv.at(col, j).mul(&pivot_inv)?);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = work.at(r, col).clone();
                if factor.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let w = work.at(r, j).sub(&factor.mul(work.at(col, j))?)?;
                    work.set(r, j, w);
                    let v = inv.at(r, j).sub(&factor.mul(inv.at(col, j))?)?;
                    inv.set(r, j, v);
                }
            }
        }
        Ok(inv)
    }
}

/// Determinant of a square matrix of even (hence commuting) entries.
/// Leibniz expansion up to dimension 6, fraction-free elimination above.
pub fn even_det(m: &GrassmannMatrix) -> Result<GrassmannValue, GrassmannError> {
    if m.rows != m.cols {
        return Err(GrassmannError::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    m.require_even()?;
    let n = m.rows;
    let gens = m.gens();
    if n == 0 {
        return Ok(GrassmannValue::one(gens));
    }
    if n <= 6 {
        leibniz_det(m)
    } else {
        bareiss_det(m)
    }
}

fn leibniz_det(m: &GrassmannMatrix) -> Result<GrassmannValue, GrassmannError> {
    let n = m.rows;
    let gens = m.gens();
    let mut acc = GrassmannValue::zero(gens);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut used = vec![false; n];
    fn rec(
        m: &GrassmannMatrix,
        row: usize,
        perm: &mut Vec<usize>,
        used: &mut Vec<bool>,
        sign: i32,
        acc: &mut GrassmannValue,
    ) -> Result<(), GrassmannError> {
        let n = m.rows;
        if row == n {
            let mut prod = GrassmannValue::one(m.gens());
            for (i, &j) in perm.iter().enumerate() {
                prod = prod.mul(m.at(i, j))?;
                if prod.is_zero() {
                    break;
                }
            }
            *acc = acc.add(&prod.scale(Complex64::new(sign as f64, 0.0)))?;
            return Ok(());
        }
        for j in 0..n {
            if used[j] {
                continue;
            }
            // sign flips by the number of used columns greater than j
            let inversions = used[j + 1..].iter().filter(|&&u| u).count();
            used[j] = true;
            perm[row] = j;
            let s = if inversions % 2 == 0 { sign } else { -sign };
            rec(m, row + 1, perm, used, s, acc)?;
            used[j] = false;
        }
        Ok(())
    }
    rec(m, 0, &mut perm, &mut used, 1, &mut acc)?;
    Ok(acc)
}

/// Bareiss fraction-free elimination; divisions are exact at every step.
/// Pivots are chosen by maximal body magnitude and must stay invertible.
fn bareiss_det(m: &GrassmannMatrix) -> Result<GrassmannValue, GrassmannError> {
    let n = m.rows;
    let gens = m.gens();
    let mut a = m.clone();
    let mut prev = GrassmannValue::one(gens);
    let mut sign = 1i32;
    for k in 0..n - 1 {
        let mut best = k;
        let mut best_mag = a.at(k, k).body().norm();
        for r in k + 1..n {
            let mag = a.at(r, k).body().norm();
            if mag > best_mag {
                best = r;
                best_mag = mag;
            }
        }
        if best_mag == 0.0 {
            return Err(GrassmannError::SingularPivot);
        }
        if best != k {
            for j in 0..n {
                let x = a.at(k, j).clone();
                let y = a.at(best, j).clone();
                a.set(k, j, y);
                a.set(best, j, x);
            }
            sign = -sign;
        }
        let prev_inv = prev.inverse()?;
        for i in k + 1..n {
            for j in k + 1..n {
                let num = a
                    .at(i, j)
                    .mul(a.at(k, k))?
                    .sub(&a.at(i, k).mul(a.at(k, j))?)?;
                a.set(i, j, num.mul(&prev_inv)?);
            }
        }
        prev = a.at(k, k).clone();
    }
    Ok(a.at(n - 1, n - 1).scale(Complex64::new(sign as f64, 0.0)))
}

/// Berezinian of the block matrix `[[A,B],[C,D]]`: `det(A - B D^-1 C) * det(D)^-1`.
/// A and D must have even entries, B and C odd entries, and det(D) must have
/// nonzero body.
pub fn berezinian(
    a: &GrassmannMatrix,
    b: &GrassmannMatrix,
    c: &GrassmannMatrix,
    d: &GrassmannMatrix,
) -> Result<GrassmannValue, GrassmannError> {
    let p = a.rows;
    let q = d.rows;
    if a.cols != p || d.cols != q || b.rows != p || b.cols != q || c.rows != q || c.cols != p {
        return Err(GrassmannError::BadBlockShape);
    }
    a.require_even()?;
    d.require_even()?;
    for (m, name) in [(b, "odd"), (c, "odd")] {
        for i in 0..m.rows {
            for j in 0..m.cols {
                let e = m.at(i, j);
                if !e.is_zero() && e.parity() != Parity::Odd {
                    return Err(GrassmannError::BadEntryParity {
                        row: i,
                        col: j,
                        expected: name,
                    });
                }
            }
        }
    }
    let det_d = even_det(d)?;
    if det_d.body().re == 0.0 && det_d.body().im == 0.0 {
        return Err(GrassmannError::SingularD);
    }
    let d_inv = d.inverse().map_err(|e| match e {
        GrassmannError::SingularPivot => GrassmannError::SingularD,
        other => other,
    })?;
    let schur = a.sub(&b.mul(&d_inv)?.mul(c)?)?;
    even_det(&schur)?.mul(&det_d.inverse()?)
}
