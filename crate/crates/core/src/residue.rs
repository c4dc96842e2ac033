//! Residues of odd holomorphic supervector fields at non-degenerate
//! singularities, and the localization consistency check `∫η = Σ Res`.
//!
//! Three routes are provided: the direct formula dividing by `det(JV)`,
//! the Berezinian route dividing by `Ber(V)·det(D)` (equal whenever both
//! are defined), and the generalized formula with caller-supplied
//! decomposition coefficients. All three evaluate component functions
//! exactly at the singular point; no quadrature is involved.

use num_complex::Complex64;
use serde::Serialize;

use crate::berezin::{gaussian_constant, integrate_chart};
use crate::expr::{EvalError, OpaqueRegistry};
use crate::grassmann::{
    berezinian, even_det, GrassmannError, GrassmannMatrix, GrassmannValue, MultiIndex,
};
use crate::quad::QuadError;
use crate::scenario::{Mode, Scenario};
use crate::superform::{DegreeCaps, SuperForm, SuperFormError};
use crate::superfun::{SuperFunError, SuperFunction, SuperVectorField};

/// Tolerance for treating an evaluated field component as vanishing when
/// validating a singular point.
const POINT_TOL: f64 = 1e-9;
/// Below this magnitude `det(JV)(p)` counts as degenerate.
const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum ResidueError {
    #[error("validation: {0}")]
    Validation(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("degenerate singularity: |det(JV)(p)| = {0:.3e}")]
    DegenerateSingularity(f64),
    #[error("decomposition mismatch for f[{component}]: difference {difference}")]
    DecompositionMismatch {
        component: u32,
        difference: String,
    },
    #[error("{0}")]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Fun(#[from] SuperFunError),
    #[error("{0}")]
    Form(#[from] SuperFormError),
    #[error("{0}")]
    Grassmann(#[from] GrassmannError),
    #[error("{0}")]
    Quad(#[from] QuadError),
}

impl ResidueError {
    /// Process exit code class: 1 validation, 2 math domain, 3 quadrature.
    pub fn exit_code(&self) -> i32 {
        match self {
            ResidueError::Validation(_)
            | ResidueError::Hypothesis(_)
            | ResidueError::DecompositionMismatch { .. }
            | ResidueError::Fun(_)
            | ResidueError::Form(_) => 1,
            ResidueError::DegenerateSingularity(_)
            | ResidueError::Eval(_)
            | ResidueError::Grassmann(_) => 2,
            ResidueError::Quad(QuadError::BadSpec(_)) => 1,
            ResidueError::Quad(QuadError::NodeFailure { .. }) => 2,
            ResidueError::Quad(_) => 3,
        }
    }
}

/// How the parity hypothesis of the simple residue formula is handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HypothesisMode {
    /// Enforce the parity hypothesis on the relevant components.
    Strict,
    /// All `f_i` must vanish identically; no parity constraints apply.
    FZero,
}

/// Reading of "quantities of variables xi" in the parity hypothesis:
/// by default only the xi indices are counted, not the xibar indices.
#[derive(Clone, Copy, Debug, Default)]
pub struct HypothesisOptions {
    pub count_xibar: bool,
}

/// Decomposition data `f_i = sum_l xi_l a_l^i g_i + sum_l xi_l b_l^i g_(t)`
/// for the generalized residue formula.
#[derive(Clone, Debug)]
pub struct DecompositionEntry {
    pub lambda: MultiIndex,
    pub a: Complex64,
    pub b: Complex64,
    /// The index `i_lambda != i` multiplying through `b`; required iff b != 0.
    pub target: Option<u32>,
}

#[derive(Clone, Debug, Default)]
pub struct Decomposition {
    /// One entry list per field component, index `i` = position + 1.
    pub per_component: Vec<Vec<DecompositionEntry>>,
}

fn eval_at(
    expr: &crate::expr::BodyExpr,
    p: &[Complex64],
    reg: &OpaqueRegistry,
) -> Result<Complex64, ResidueError> {
    Ok(expr.eval(p, reg)?)
}

/// Check that the body of every field component vanishes at `p`.
pub fn validate_singular_point(
    field: &SuperVectorField,
    p: &[Complex64],
    reg: &OpaqueRegistry,
) -> Result<(), ResidueError> {
    let n = field.n();
    if p.len() != n as usize {
        return Err(ResidueError::Validation(format!(
            "point has {} coordinates, chart has {}",
            p.len(),
            n
        )));
    }
    for j in 1..=n {
        let gj = field.g(j).body_coeff();
        let v = eval_at(&gj, p, reg)?;
        if v.norm() > POINT_TOL {
            return Err(ResidueError::Validation(format!(
                "not a singular point: g[{j}](p) = {v} != 0"
            )));
        }
    }
    Ok(())
}

/// Determinant of the body Jacobian `(d g_i / d z_j)` at `p`.
/// Requires theorem mode (every `g_i` free of odd variables).
pub fn jacobian_det(
    field: &SuperVectorField,
    p: &[Complex64],
    reg: &OpaqueRegistry,
) -> Result<Complex64, ResidueError> {
    if !field.theorem_mode() {
        return Err(ResidueError::Validation(
            "jacobian_det requires theorem mode: every dxi-component free of odd variables".into(),
        ));
    }
    let n = field.n() as usize;
    let mut mat = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 1..=n as u32 {
        for j in 1..=n as u32 {
            let d = field.g(i).d_z(j)?.body_coeff();
            mat[(i as usize - 1) * n + (j as usize - 1)] = eval_at(&d, p, reg)?;
        }
    }
    Ok(complex_det(&mut mat, n))
}

/// In-place Gaussian elimination with partial pivoting.
fn complex_det(mat: &mut [Complex64], n: usize) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let mut best = k;
        let mut best_mag = mat[k * n + k].norm();
        for r in k + 1..n {
            let mag = mat[r * n + k].norm();
            if mag > best_mag {
                best = r;
                best_mag = mag;
            }
        }
        if best_mag == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if best != k {
            for c in 0..n {
                mat.swap(k * n + c, best * n + c);
            }
            det = -det;
        }
        let pivot = mat[k * n + k];
        det *= pivot;
        for r in k + 1..n {
            let factor = mat[r * n + k] / pivot;
            for c in k..n {
                let sub = factor * mat[k * n + c];
                mat[r * n + c] -= sub;
            }
        }
    }
    det
}

/// The four super-Jacobian blocks at `p`, in the layout with rows indexed
/// by the derivative variable and columns by the field component:
/// `A = dg/dz`, `B = df/dz`, `C = dg/dxi`, `D = df/dxi`.
pub struct JacobianBlocks {
    pub a: GrassmannMatrix,
    pub b: GrassmannMatrix,
    pub c: GrassmannMatrix,
    pub d: GrassmannMatrix,
}

pub fn super_jacobian(
    field: &SuperVectorField,
    p: &[Complex64],
    reg: &OpaqueRegistry,
) -> Result<JacobianBlocks, ResidueError> {
    let n = field.n();
    let gens = 2 * n;
    let eval_sf = |sf: &SuperFunction| -> Result<GrassmannValue, ResidueError> {
        Ok(sf.eval(p, reg)?)
    };
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut c = Vec::new();
    let mut d = Vec::new();
    for j in 1..=n {
        // row j: derivatives with respect to z_j
        for i in 1..=n {
            a.push(eval_sf(&field.g(i).d_z(j)?)?);
        }
        for k in 1..=n {
            b.push(eval_sf(&field.f(k).d_z(j)?)?);
        }
    }
    for l in 1..=n {
        // row l: derivatives with respect to xi_l
        for i in 1..=n {
            c.push(eval_sf(&field.g(i).d_xi(l)?)?);
        }
        for k in 1..=n {
            d.push(eval_sf(&field.f(k).d_xi(l)?)?);
        }
    }
    let nn = n as usize;
    let _ = gens;
    Ok(JacobianBlocks {
        a: GrassmannMatrix::even(nn, nn, a)?,
        b: GrassmannMatrix::odd(nn, nn, b)?,
        c: GrassmannMatrix::odd(nn, nn, c)?,
        d: GrassmannMatrix::even(nn, nn, d)?,
    })
}

/// Berezinian of the super-Jacobian at `p`.
pub fn berezinian_of_field(
    field: &SuperVectorField,
    p: &[Complex64],
    reg: &OpaqueRegistry,
) -> Result<GrassmannValue, ResidueError> {
    let blocks = super_jacobian(field, p, reg)?;
    Ok(berezinian(&blocks.a, &blocks.b, &blocks.c, &blocks.d)?)
}

fn check_chart(field: &SuperVectorField, eta: &SuperForm) -> Result<(), ResidueError> {
    let n = field.n();
    if eta.dims() != (n, n) {
        return Err(ResidueError::Validation(format!(
            "form lives on chart {:?}, field on ({n},{n})",
            eta.dims()
        )));
    }
    Ok(())
}

/// Enforce the parity hypothesis: on an `n|n` chart the relevant component
/// functions may contain only terms whose count of xi variables matches the
/// parity of `n`.
fn check_parity_hypothesis(
    eta: &SuperForm,
    n: u32,
    opts: HypothesisOptions,
) -> Result<(), ResidueError> {
    let want = n % 2;
    let check = |name: String, h: &SuperFunction| -> Result<(), ResidueError> {
        for ((mu, lam), _) in h.terms() {
            let count = if opts.count_xibar {
                mu.len() + lam.len()
            } else {
                mu.len()
            };
            if count % 2 != want {
                return Err(ResidueError::Hypothesis(format!(
                    "component {name} contains term xi={:?} xibar={:?} with {} xi variables; \
                     n = {n} requires {} counts",
                    mu.labels(),
                    lam.labels(),
                    count,
                    if want == 0 { "even" } else { "odd" },
                )));
            }
        }
        Ok(())
    };
    let e00 = eta.coefficient(&SuperForm::eta00_monomial(n));
    check("eta^(0,0)|(n,n)".into(), &e00)?;
    for j in 1..=n {
        let ej = eta.coefficient(&SuperForm::eta10_hat_monomial(n, j));
        check(format!("eta^(1,0)|(n-1,n)_hat{j}"), &ej)?;
    }
    Ok(())
}

fn mode_checks(
    field: &SuperVectorField,
    eta: &SuperForm,
    mode: HypothesisMode,
    opts: HypothesisOptions,
) -> Result<(), ResidueError> {
    match mode {
        HypothesisMode::Strict => {
            if !field.is_f_zero() {
                check_parity_hypothesis(eta, field.n(), opts)?;
            }
            Ok(())
        }
        HypothesisMode::FZero => {
            if !field.is_f_zero() {
                return Err(ResidueError::Validation(
                    "f_zero mode requires every dz-component to vanish identically".into(),
                ));
            }
            Ok(())
        }
    }
}

fn component_sum_at(
    eta: &SuperForm,
    mu: MultiIndex,
    lam: MultiIndex,
    p: &[Complex64],
    reg: &OpaqueRegistry,
) -> Result<(Complex64, Complex64), ResidueError> {
    let e00 = eval_at(&eta.eta_00_nn(mu, lam), p, reg)?;
    let estar = eval_at(&eta.eta_10_hat_star(mu, lam), p, reg)?;
    Ok((e00, estar))
}

fn det_jv_checked(
    field: &SuperVectorField,
    p: &[Complex64],
    reg: &OpaqueRegistry,
) -> Result<Complex64, ResidueError> {
    let det = jacobian_det(field, p, reg)?;
    if det.norm() < DEGENERATE_TOL {
        return Err(ResidueError::DegenerateSingularity(det.norm()));
    }
    Ok(det)
}

/// Simple residue formula:
/// `(2π/i)^n [ (η^(0,0)|(n,n) + η^(1,0)|(n-1,n)_*hat)_(1..n;1..n) / det(JV) ](p)`.
pub fn residue_simple(
    field: &SuperVectorField,
    eta: &SuperForm,
    p: &[Complex64],
    mode: HypothesisMode,
    opts: HypothesisOptions,
    reg: &OpaqueRegistry,
) -> Result<Complex64, ResidueError> {
    check_chart(field, eta)?;
    validate_singular_point(field, p, reg)?;
    mode_checks(field, eta, mode, opts)?;
    let n = field.n();
    let det = det_jv_checked(field, p, reg)?;
    let top = MultiIndex::full(n);
    let (e00, estar) = component_sum_at(eta, top, top, p, reg)?;
    Ok(gaussian_constant(n) * ((e00 + estar) / det))
}

/// Same value through the Berezinian: divides by `Ber(V)·det(D)` instead of
/// `det(JV)`; requires the D block to have invertible body at `p`.
pub fn residue_ber(
    field: &SuperVectorField,
    eta: &SuperForm,
    p: &[Complex64],
    mode: HypothesisMode,
    opts: HypothesisOptions,
    reg: &OpaqueRegistry,
) -> Result<Complex64, ResidueError> {
    check_chart(field, eta)?;
    validate_singular_point(field, p, reg)?;
    mode_checks(field, eta, mode, opts)?;
    let n = field.n();
    let blocks = super_jacobian(field, p, reg)?;
    let det_d = even_det(&blocks.d)?;
    let ber = berezinian(&blocks.a, &blocks.b, &blocks.c, &blocks.d)?;
    let denom = ber.mul(&det_d)?;
    let soul_mag: f64 = denom
        .soul()
        .terms()
        .map(|(_, c)| c.norm())
        .fold(0.0, f64::max);
    if soul_mag > 1e-9 {
        return Err(ResidueError::Validation(format!(
            "Ber(V)·det(D) has a non-scalar part of magnitude {soul_mag:.3e}; \
             residue is only scalar in theorem mode"
        )));
    }
    let denom = denom.body();
    if denom.norm() < DEGENERATE_TOL {
        return Err(ResidueError::DegenerateSingularity(denom.norm()));
    }
    let top = MultiIndex::full(n);
    let (e00, estar) = component_sum_at(eta, top, top, p, reg)?;
    Ok(gaussian_constant(n) * ((e00 + estar) / denom))
}

/// Validate a decomposition against the field: each `f_i` must reconstruct
/// exactly as `sum xi_l a g_i + sum xi_l b g_target`.
pub fn validate_decomposition(
    field: &SuperVectorField,
    dec: &Decomposition,
) -> Result<(), ResidueError> {
    let n = field.n();
    if dec.per_component.len() != n as usize {
        return Err(ResidueError::Validation(format!(
            "decomposition has {} component lists, field has {}",
            dec.per_component.len(),
            n
        )));
    }
    for (idx, entries) in dec.per_component.iter().enumerate() {
        let i = idx as u32 + 1;
        let mut rec = SuperFunction::zero(n, n);
        for e in entries {
            if e.lambda.len() % 2 != 1 {
                return Err(ResidueError::Validation(format!(
                    "decomposition entry for f[{i}] has even-length lambda {:?}",
                    e.lambda.labels()
                )));
            }
            if e.lambda.max_label() > n {
                return Err(ResidueError::Validation(format!(
                    "decomposition entry for f[{i}]: lambda {:?} out of range",
                    e.lambda.labels()
                )));
            }
            let xi_l = SuperFunction::term(
                n,
                n,
                e.lambda,
                MultiIndex::EMPTY,
                crate::expr::BodyExpr::ONE,
            );
            if !(e.a.re == 0.0 && e.a.im == 0.0) {
                rec = rec.add(&xi_l.mul(field.g(i))?.scale(e.a))?;
            }
            if !(e.b.re == 0.0 && e.b.im == 0.0) {
                let t = e.target.ok_or_else(|| {
                    ResidueError::Validation(format!(
                        "decomposition entry for f[{i}] has b != 0 but no target index"
                    ))
                })?;
                if t == 0 || t > n || t == i {
                    return Err(ResidueError::Validation(format!(
                        "decomposition entry for f[{i}]: target {t} must differ from {i} and lie in 1..={n}"
                    )));
                }
                rec = rec.add(&xi_l.mul(field.g(t))?.scale(e.b))?;
            }
        }
        let diff = field.f(i).sub(&rec)?;
        let mut ok = true;
        for (_, coeff) in diff.terms() {
            match crate::ratfun::is_identically_zero(coeff, n, 0.0) {
                Some(true) => {}
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            return Err(ResidueError::DecompositionMismatch {
                component: i,
                difference: diff.to_string(),
            });
        }
    }
    Ok(())
}

/// Generalized residue formula: the simple main term plus the correction
/// `(2π/i)^n Σ_j Σ_λ a_λ^j (η*hat_(μ,1..n) - η00_(μ,1..n)) / det(JV)` at `p`,
/// where `μ = λ^c` and λ ranges over the odd multi-indices of the
/// decomposition.
pub fn residue_general(
    field: &SuperVectorField,
    eta: &SuperForm,
    p: &[Complex64],
    dec: &Decomposition,
    reg: &OpaqueRegistry,
) -> Result<Complex64, ResidueError> {
    check_chart(field, eta)?;
    validate_singular_point(field, p, reg)?;
    validate_decomposition(field, dec)?;
    let n = field.n();
    let det = det_jv_checked(field, p, reg)?;
    let top = MultiIndex::full(n);
    let (e00, estar) = component_sum_at(eta, top, top, p, reg)?;
    let mut total = (e00 + estar) / det;
    for entries in dec.per_component.iter() {
        for e in entries {
            if e.a.re == 0.0 && e.a.im == 0.0 {
                continue;
            }
            let mu = e.lambda.complement(n);
            let (c00, cstar) = component_sum_at(eta, mu, top, p, reg)?;
            total += e.a * ((cstar - c00) / det);
        }
    }
    Ok(gaussian_constant(n) * total)
}

/// The localization 1-form `ω̃ = Σ_j dz_j·conj(g_j) + Σ_j dxi_j·conj(g_j)`
/// attached to a theorem-mode field.
pub fn localization_one_form(field: &SuperVectorField) -> Result<SuperForm, ResidueError> {
    if !field.theorem_mode() {
        return Err(ResidueError::Validation(
            "the localization 1-form needs body-only dxi-components".into(),
        ));
    }
    let n = field.n();
    let mut omega = SuperForm::zero(n, n);
    for j in 1..=n {
        let gbar = SuperForm::from_fn(field.g(j).conj()?);
        omega = omega.add(&SuperForm::dz(n, n, j)?.wedge(&gbar)?)?;
        omega = omega.add(&SuperForm::dxi(n, n, j)?.wedge(&gbar)?)?;
    }
    Ok(omega)
}

/// Residue dispatch selector for the exponential construction.
pub enum ResidueMethod<'a> {
    Simple(HypothesisMode, HypothesisOptions),
    General(&'a Decomposition),
}

/// Residues of `exp(ω - s·g)`: verifies `(dbar + i_V)(ω) = 0` and
/// `i_V(ω) = dbar(g)` symbolically, builds the truncated exponential, and
/// dispatches to the selected residue formula.
pub fn dh_residue(
    field: &SuperVectorField,
    omega: &SuperForm,
    g: &SuperFunction,
    s: f64,
    p: &[Complex64],
    caps: &DegreeCaps,
    method: ResidueMethod<'_>,
    reg: &OpaqueRegistry,
) -> Result<Complex64, ResidueError> {
    let defect = omega.dbar_plus_contract(field)?;
    match defect.is_identically_zero(1e-12) {
        Some(true) => {}
        Some(false) => {
            return Err(ResidueError::Hypothesis(format!(
                "(dbar + i_V)(omega) != 0 in sectors {:?}",
                defect.nonzero_sectors(1e-12)
            )))
        }
        None => {
            return Err(ResidueError::Hypothesis(
                "(dbar + i_V)(omega) contains opaque coefficients; cannot verify".into(),
            ))
        }
    }
    let moment = omega
        .contract(field)?
        .sub(&SuperForm::from_fn(g.clone()).dbar()?)?;
    match moment.is_identically_zero(1e-12) {
        Some(true) => {}
        _ => {
            return Err(ResidueError::Hypothesis(
                "i_V(omega) != dbar(g)".into(),
            ))
        }
    }
    let exponent = omega.sub(&SuperForm::from_fn(g.scale(Complex64::new(s, 0.0))))?;
    let eta = exponent.exp_truncated(caps)?;
    match method {
        ResidueMethod::Simple(mode, opts) => residue_simple(field, &eta, p, mode, opts, reg),
        ResidueMethod::General(dec) => residue_general(field, &eta, p, dec, reg),
    }
}

/// Report of the localization consistency check.
#[derive(Debug, Clone, Serialize)]
pub struct LocalizationReport {
    pub residues: Vec<[f64; 2]>,
    pub sum: [f64; 2],
    pub integral: [f64; 2],
    pub abs_diff: f64,
    pub pass: bool,
}

/// Residue at one scenario point, dispatching on the scenario mode.
pub fn scenario_residue(
    sc: &Scenario,
    point_index: usize,
    mode_override: Option<Mode>,
    reg: &OpaqueRegistry,
) -> Result<Complex64, ResidueError> {
    let point = sc.points.get(point_index).ok_or_else(|| {
        ResidueError::Validation(format!(
            "point index {point_index} out of range ({} points)",
            sc.points.len()
        ))
    })?;
    let mode = mode_override.unwrap_or(sc.mode);
    match mode {
        Mode::Strict => residue_simple(
            &sc.field,
            &sc.form,
            &point.z,
            HypothesisMode::Strict,
            HypothesisOptions::default(),
            reg,
        ),
        Mode::FZero => residue_simple(
            &sc.field,
            &sc.form,
            &point.z,
            HypothesisMode::FZero,
            HypothesisOptions::default(),
            reg,
        ),
        Mode::General => {
            let dec = point.decomposition.as_ref().ok_or_else(|| {
                ResidueError::Validation(format!(
                    "point {point_index} has no decomposition but mode is general"
                ))
            })?;
            residue_general(&sc.field, &sc.form, &point.z, dec, reg)
        }
    }
}

/// Compute the residue sum exactly and the chart integral numerically,
/// and compare at the given tolerance (defaults to the quadrature tol).
pub fn check_localization(
    sc: &Scenario,
    check_tol: Option<f64>,
    reg: &OpaqueRegistry,
) -> Result<LocalizationReport, ResidueError> {
    let mut residues = Vec::with_capacity(sc.points.len());
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..sc.points.len() {
        let r = scenario_residue(sc, i, None, reg)?;
        residues.push([r.re, r.im]);
        sum += r;
    }
    let integral = integrate_chart(&sc.form, &sc.quad, reg)?;
    let abs_diff = (sum - integral).norm();
    let tol = check_tol.unwrap_or(sc.quad.tol);
    Ok(LocalizationReport {
        residues,
        sum: [sum.re, sum.im],
        integral: [integral.re, integral.im],
        abs_diff,
        pass: abs_diff < tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::BodyExpr;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// The 1|1 projective fixture field: f = (z+z^2) xi, g = z.
    fn p11_field() -> SuperVectorField {
        let n = 1;
        let f = SuperFunction::xi(n, n, 1).unwrap().scale_expr(&BodyExpr::add(vec![
            BodyExpr::z(1),
            BodyExpr::pow(BodyExpr::z(1), 2),
        ]));
        let g = SuperFunction::from_body(n, n, BodyExpr::z(1));
        SuperVectorField::new(vec![f], vec![g]).unwrap()
    }

    #[test]
    fn jacobian_of_p11_field_is_one() {
        let reg = OpaqueRegistry::new();
        let v = p11_field();
        let det = jacobian_det(&v, &[c(0.0, 0.0)], &reg).unwrap();
        assert_eq!(det, c(1.0, 0.0));
    }

    #[test]
    fn jacobian_diagonal() {
        let n = 2;
        let g1 = SuperFunction::from_body(n, n, BodyExpr::z(1).scale(c(2.0, 0.0)));
        let g2 = SuperFunction::from_body(n, n, BodyExpr::z(2).scale(c(3.0, 0.0)));
        let v = SuperVectorField::new(
            vec![SuperFunction::zero(n, n), SuperFunction::zero(n, n)],
            vec![g1, g2],
        )
        .unwrap();
        let reg = OpaqueRegistry::new();
        let det = jacobian_det(&v, &[c(0.0, 0.0), c(0.0, 0.0)], &reg).unwrap();
        assert_eq!(det, c(6.0, 0.0));
    }

    #[test]
    fn p11_d_block_singular_at_origin() {
        // D = (df/dxi)(p) = z+z^2 at 0 = 0, so the Berezinian route errors
        let reg = OpaqueRegistry::new();
        let v = p11_field();
        let blocks = super_jacobian(&v, &[c(0.0, 0.0)], &reg).unwrap();
        assert!(blocks.d.at(0, 0).is_zero());
        let err = berezinian_of_field(&v, &[c(0.0, 0.0)], &reg).unwrap_err();
        assert!(matches!(
            err,
            ResidueError::Grassmann(GrassmannError::SingularD)
        ));
    }

    #[test]
    fn simple_one_one_berezinian() {
        // f = xi z, g = z at z=1 (not singular, but Ber is defined):
        // Ber = (dg/dz)/(df/dxi) = 1/1 ... evaluated at z=1: df/dxi = z = 1
        let n = 1;
        let f = SuperFunction::xi(n, n, 1).unwrap().scale_expr(&BodyExpr::z(1));
        let g = SuperFunction::from_body(n, n, BodyExpr::z(1));
        let v = SuperVectorField::new(vec![f], vec![g]).unwrap();
        let reg = OpaqueRegistry::new();
        let ber = berezinian_of_field(&v, &[c(1.0, 0.0)], &reg).unwrap();
        assert_eq!(ber.body(), c(1.0, 0.0));
        assert!(ber.soul().is_zero());
    }

    #[test]
    fn ber_times_det_d_equals_det_jv_randomized() {
        // theorem-mode fields with invertible D at a generic point
        let n = 2u32;
        let mut s = 0x5eed5eedu64;
        let mut rnd = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let reg = OpaqueRegistry::new();
        for _ in 0..50 {
            // g_i = sum_j A_ij z_j, f_k = sum_l xi_l * (c_kl + d_kl z_1)
            let mut g = Vec::new();
            for _ in 0..n {
                let mut terms = Vec::new();
                for j in 1..=n {
                    terms.push(BodyExpr::z(j).scale(c(rnd(), rnd())));
                }
                g.push(SuperFunction::from_body(n, n, BodyExpr::add(terms)));
            }
            let mut f = Vec::new();
            for _ in 0..n {
                let mut fk = SuperFunction::zero(n, n);
                for l in 1..=n {
                    let coeff = BodyExpr::add(vec![
                        BodyExpr::constant(rnd() + 2.0, rnd()),
                        BodyExpr::z(1).scale(c(rnd(), rnd())),
                    ]);
                    fk = fk
                        .add(&SuperFunction::xi(n, n, l).unwrap().scale_expr(&coeff))
                        .unwrap();
                }
                f.push(fk);
            }
            let field = SuperVectorField::new(f, g).unwrap();
            assert!(field.theorem_mode());
            let p = [c(rnd(), rnd()), c(rnd(), rnd())];
            let blocks = super_jacobian(&field, &p, &reg).unwrap();
            let det_d = even_det(&blocks.d).unwrap();
            if det_d.body().norm() < 1e-3 {
                continue;
            }
            let ber = berezinian(&blocks.a, &blocks.b, &blocks.c, &blocks.d).unwrap();
            let prod = ber.mul(&det_d).unwrap();
            let det_jv = jacobian_det(&field, &p, &reg).unwrap();
            assert!(
                prod.approx_eq(&GrassmannValue::scalar(2 * n, det_jv), 1e-10),
                "Ber·det(D) = {prod}, det(JV) = {det_jv}"
            );
        }
    }

    #[test]
    fn residue_zero_components() {
        let reg = OpaqueRegistry::new();
        let v = p11_field();
        let eta = SuperForm::zero(1, 1);
        let r = residue_simple(
            &v,
            &eta,
            &[c(0.0, 0.0)],
            HypothesisMode::Strict,
            HypothesisOptions::default(),
            &reg,
        )
        .unwrap();
        assert_eq!(r, c(0.0, 0.0));
    }

    #[test]
    fn residue_f_zero_hand_example() {
        // V = 2z d/dxi (f = 0), eta = dz1 ∧ dxb1 · xi xb · (i/pi)
        // residue = (2π/i)·(i/π)/2 = 1
        let n = 1;
        let g = SuperFunction::from_body(n, n, BodyExpr::z(1).scale(c(2.0, 0.0)));
        let v = SuperVectorField::new(vec![SuperFunction::zero(n, n)], vec![g]).unwrap();
        let coeff = SuperFunction::term(
            n,
            n,
            MultiIndex::full(1),
            MultiIndex::full(1),
            BodyExpr::constant(0.0, std::f64::consts::FRAC_1_PI),
        );
        let eta = SuperForm::monomial(n, n, SuperForm::eta10_hat_monomial(n, 1), coeff);
        let reg = OpaqueRegistry::new();
        let r = residue_simple(
            &v,
            &eta,
            &[c(0.0, 0.0)],
            HypothesisMode::FZero,
            HypothesisOptions::default(),
            &reg,
        )
        .unwrap();
        assert!((r - c(1.0, 0.0)).norm() < 1e-14, "got {r}");
    }

    #[test]
    fn f_zero_mode_rejects_nonzero_f() {
        let reg = OpaqueRegistry::new();
        let v = p11_field();
        let eta = SuperForm::zero(1, 1);
        let err = residue_simple(
            &v,
            &eta,
            &[c(0.0, 0.0)],
            HypothesisMode::FZero,
            HypothesisOptions::default(),
            &reg,
        )
        .unwrap_err();
        assert!(matches!(err, ResidueError::Validation(_)));
    }

    #[test]
    fn degenerate_singularity_is_hard_error() {
        let n = 1;
        let g = SuperFunction::from_body(n, n, BodyExpr::pow(BodyExpr::z(1), 2));
        let v = SuperVectorField::new(vec![SuperFunction::zero(n, n)], vec![g]).unwrap();
        let eta = SuperForm::zero(1, 1);
        let reg = OpaqueRegistry::new();
        let err = residue_simple(
            &v,
            &eta,
            &[c(0.0, 0.0)],
            HypothesisMode::FZero,
            HypothesisOptions::default(),
            &reg,
        )
        .unwrap_err();
        assert!(matches!(err, ResidueError::DegenerateSingularity(_)));
    }

    #[test]
    fn strict_mode_parity_violation_detected() {
        // n = 1 (odd): a component term with zero xi variables violates
        let n = 1;
        let v = p11_field();
        let coeff = SuperFunction::term(
            n,
            n,
            MultiIndex::EMPTY,
            MultiIndex::full(1),
            BodyExpr::ONE,
        );
        let eta = SuperForm::monomial(n, n, SuperForm::eta00_monomial(n), coeff);
        let reg = OpaqueRegistry::new();
        let err = residue_simple(
            &v,
            &eta,
            &[c(0.0, 0.0)],
            HypothesisMode::Strict,
            HypothesisOptions::default(),
            &reg,
        )
        .unwrap_err();
        assert!(matches!(err, ResidueError::Hypothesis(_)), "{err}");
        // counting xibar as well makes the same term acceptable (1 odd var)
        let ok = residue_simple(
            &v,
            &eta,
            &[c(0.0, 0.0)],
            HypothesisMode::Strict,
            HypothesisOptions { count_xibar: true },
            &reg,
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn general_reduces_to_simple_when_a_vanishes() {
        // f = xi·2·g decomposes with the single entry a = 2
        let n = 1;
        let f = SuperFunction::xi(n, n, 1)
            .unwrap()
            .scale_expr(&BodyExpr::z(1))
            .scale(c(2.0, 0.0));
        let g = SuperFunction::from_body(n, n, BodyExpr::z(1));
        let field = SuperVectorField::new(vec![f], vec![g]).unwrap();
        let coeff = SuperFunction::term(
            n,
            n,
            MultiIndex::full(1),
            MultiIndex::full(1),
            BodyExpr::constant(0.3, 0.7),
        );
        let eta = SuperForm::monomial(n, n, SuperForm::eta00_monomial(n), coeff);
        let reg = OpaqueRegistry::new();
        let dec = Decomposition {
            per_component: vec![vec![DecompositionEntry {
                lambda: MultiIndex::full(1),
                a: c(2.0, 0.0),
                b: c(0.0, 0.0),
                target: None,
            }]],
        };
        let r_gen = residue_general(&field, &eta, &[c(0.0, 0.0)], &dec, &reg).unwrap();
        // correction term: mu = complement(lambda) = empty, components at
        // (empty, top) are zero for this eta, so general == simple
        let r_simple = residue_simple(
            &field,
            &eta,
            &[c(0.0, 0.0)],
            HypothesisMode::Strict,
            HypothesisOptions::default(),
            &reg,
        )
        .unwrap();
        assert!((r_gen - r_simple).norm() < 1e-14);
    }

    #[test]
    fn general_hand_example_n1() {
        // f1 = xi·a·g1, eta with only the (mu=∅, lam={1}) coefficient of the
        // (0,0)|(1,1) monomial: residue = (2π/i)(-a·q(p))/det(JV)
        let n = 1;
        let a = c(0.5, -0.25);
        let g = SuperFunction::from_body(n, n, BodyExpr::z(1).scale(c(2.0, 0.0)));
        let f = SuperFunction::xi(n, n, 1)
            .unwrap()
            .mul(&g)
            .unwrap()
            .scale(a);
        let field = SuperVectorField::new(vec![f], vec![g.clone()]).unwrap();
        let q = c(0.8, 0.1);
        let coeff = SuperFunction::term(
            n,
            n,
            MultiIndex::EMPTY,
            MultiIndex::full(1),
            BodyExpr::Const(q),
        );
        let eta = SuperForm::monomial(n, n, SuperForm::eta00_monomial(n), coeff);
        let dec = Decomposition {
            per_component: vec![vec![DecompositionEntry {
                lambda: MultiIndex::full(1),
                a,
                b: c(0.0, 0.0),
                target: None,
            }]],
        };
        let reg = OpaqueRegistry::new();
        let r = residue_general(&field, &eta, &[c(0.0, 0.0)], &dec, &reg).unwrap();
        let expected = gaussian_constant(1) * (-a * q) / c(2.0, 0.0);
        assert!((r - expected).norm() < 1e-14, "got {r}, want {expected}");
    }

    #[test]
    fn berezinian_route_equals_direct_route() {
        // f = xi (1 + z), g = z: singular at 0 with D(0) = 1 invertible,
        // so both residue routes are defined and must agree exactly.
        let n = 1;
        let f = SuperFunction::xi(n, n, 1).unwrap().scale_expr(&BodyExpr::add(vec![
            BodyExpr::ONE,
            BodyExpr::z(1),
        ]));
        let g = SuperFunction::from_body(n, n, BodyExpr::z(1));
        let field = SuperVectorField::new(vec![f], vec![g]).unwrap();
        let coeff = SuperFunction::term(
            n,
            n,
            MultiIndex::full(1),
            MultiIndex::full(1),
            BodyExpr::add(vec![
                BodyExpr::constant(0.25, -0.5),
                BodyExpr::mul(vec![BodyExpr::z(1), BodyExpr::zbar(1)]),
            ]),
        );
        let mut eta = SuperForm::monomial(n, n, SuperForm::eta00_monomial(n), coeff.clone());
        eta = eta
            .add(&SuperForm::monomial(
                n,
                n,
                SuperForm::eta10_hat_monomial(n, 1),
                coeff.scale(c(0.0, 2.0)),
            ))
            .unwrap();
        let reg = OpaqueRegistry::new();
        let p = [c(0.0, 0.0)];
        let direct = residue_simple(
            &field,
            &eta,
            &p,
            HypothesisMode::Strict,
            HypothesisOptions::default(),
            &reg,
        )
        .unwrap();
        let via_ber = residue_ber(
            &field,
            &eta,
            &p,
            HypothesisMode::Strict,
            HypothesisOptions::default(),
            &reg,
        )
        .unwrap();
        assert_eq!(direct, via_ber);
        assert!(direct.norm() > 0.1, "test should be nontrivial: {direct}");
    }

    #[test]
    fn general_with_all_a_zero_is_the_main_term() {
        // n = 2, f_1 = xi_2 g_2, f_2 = xi_1 g_1: decomposes with b's only,
        // so the correction sum vanishes identically.
        let n = 2;
        let g1 = SuperFunction::from_body(n, n, BodyExpr::z(1));
        let g2 = SuperFunction::from_body(n, n, BodyExpr::z(2).scale(c(2.0, 0.0)));
        let f1 = SuperFunction::xi(n, n, 2).unwrap().mul(&g2).unwrap();
        let f2 = SuperFunction::xi(n, n, 1).unwrap().mul(&g1).unwrap();
        let field = SuperVectorField::new(vec![f1, f2], vec![g1, g2]).unwrap();
        let dec = Decomposition {
            per_component: vec![
                vec![DecompositionEntry {
                    lambda: MultiIndex::from_labels(&[2]).unwrap(),
                    a: c(0.0, 0.0),
                    b: c(1.0, 0.0),
                    target: Some(2),
                }],
                vec![DecompositionEntry {
                    lambda: MultiIndex::from_labels(&[1]).unwrap(),
                    a: c(0.0, 0.0),
                    b: c(1.0, 0.0),
                    target: Some(1),
                }],
            ],
        };
        // eta with nonzero components both at the top and at (mu, top) slots,
        // so a nonvanishing correction would be visible
        let top = MultiIndex::full(n);
        let mut coeff = SuperFunction::term(n, n, top, top, BodyExpr::constant(0.7, 0.1));
        coeff.add_term(
            MultiIndex::from_labels(&[1]).unwrap(),
            top,
            BodyExpr::constant(-0.3, 0.9),
        );
        coeff.add_term(
            MultiIndex::from_labels(&[2]).unwrap(),
            top,
            BodyExpr::constant(1.1, 0.0),
        );
        let eta = SuperForm::monomial(n, n, SuperForm::eta00_monomial(n), coeff);
        let reg = OpaqueRegistry::new();
        let p = [c(0.0, 0.0), c(0.0, 0.0)];
        let r_gen = residue_general(&field, &eta, &p, &dec, &reg).unwrap();
        let det = jacobian_det(&field, &p, &reg).unwrap();
        let main = gaussian_constant(2) * (c(0.7, 0.1) / det);
        assert_eq!(r_gen, main);
    }

    #[test]
    fn decomposition_mismatch_reported() {
        let n = 1;
        let field = p11_field(); // f = (z + z^2) xi, not xi·3·g
        let dec = Decomposition {
            per_component: vec![vec![DecompositionEntry {
                lambda: MultiIndex::full(1),
                a: c(3.0, 0.0),
                b: c(0.0, 0.0),
                target: None,
            }]],
        };
        let err = validate_decomposition(&field, &dec).unwrap_err();
        assert!(matches!(err, ResidueError::DecompositionMismatch { .. }));
        let _ = n;
    }

    #[test]
    fn localization_one_form_contracts_to_norm() {
        // i_V(ω̃) = Σ ḡ g + Σ ḡ f
        let v = p11_field();
        let omega = localization_one_form(&v).unwrap();
        let contracted = omega.contract(&v).unwrap();
        let n = 1;
        let gbar = SuperFunction::from_body(n, n, BodyExpr::zbar(1));
        let expected = v
            .f(1)
            .mul(&gbar)
            .unwrap()
            .add(&v.g(1).mul(&gbar).unwrap())
            .unwrap();
        let diff = contracted.sub(&SuperForm::from_fn(expected)).unwrap();
        assert_eq!(diff.is_identically_zero(0.0), Some(true), "diff {diff}");
    }

    #[test]
    fn supersymmetry_square_annihilates_localization_form() {
        // (dbar + i_V)^2 ω̃ = 0 for the fixture field
        let v = p11_field();
        let omega = localization_one_form(&v).unwrap();
        let once = omega.dbar_plus_contract(&v).unwrap();
        let twice = once.dbar_plus_contract(&v).unwrap();
        assert_eq!(twice.is_identically_zero(0.0), Some(true), "got {twice}");

        // and for the dxi-only block sum dxi_j · conj(g_j) alone
        let n = 1;
        let gbar = SuperForm::from_fn(v.g(1).conj().unwrap());
        let omega2 = SuperForm::dxi(n, n, 1).unwrap().wedge(&gbar).unwrap();
        let once2 = omega2.dbar_plus_contract(&v).unwrap();
        let twice2 = once2.dbar_plus_contract(&v).unwrap();
        assert_eq!(twice2.is_identically_zero(0.0), Some(true), "got {twice2}");
    }
}
