//! Berezin integration and the chart integral: top odd-coefficient
//! extraction coupled to numerical quadrature over the body, using the
//! volume convention `dz_i ∧ dzbar_i -> -2i dx_i dy_i`.

use num_complex::Complex64;

use crate::expr::{BodyExpr, OpaqueRegistry};
use crate::grassmann::MultiIndex;
use crate::quad::{integrate_r1, integrate_rn, QuadError, QuadratureSpec};
use crate::superform::SuperForm;
use crate::superfun::SuperFunction;

/// Coefficient of `xi_1..xi_n xibar_1..xibar_n` (the zero expression if
/// absent). Linear, and kills every term missing an odd generator.
pub fn berezin_top(f: &SuperFunction) -> BodyExpr {
    let (_, n) = f.dims();
    f.coefficient(MultiIndex::full(n), MultiIndex::full(n))
}

/// Sign of reordering `dz_1..dz_m dzb_1..dzb_m` into interleaved pairs
/// `dz_1 dzb_1 .. dz_m dzb_m`, times `(-2i)^m`: the measure factor that
/// takes the canonical top monomial to `dx_1 dy_1 .. dx_m dy_m`.
pub fn measure_factor(m: u32) -> Complex64 {
    let swaps = (m as i64) * (m as i64 - 1) / 2;
    let sign = if swaps % 2 == 0 { 1.0 } else { -1.0 };
    Complex64::new(0.0, -2.0).powi(m as i32) * sign
}

/// Exact value of the odd-pair Gaussian body integral: `(-2*pi*i)^n`.
pub fn gaussian_constant(n: u32) -> Complex64 {
    Complex64::new(0.0, -2.0 * std::f64::consts::PI).powi(n as i32)
}

/// Chart integral of a superform over the full body plane: extract the
/// coefficient of the canonical top monomial, take its Berezin top
/// coefficient, convert the measure, and integrate over `R^(2m)`.
pub fn integrate_chart(
    form: &SuperForm,
    spec: &QuadratureSpec,
    reg: &OpaqueRegistry,
) -> Result<Complex64, QuadError> {
    spec.validate()?;
    let (m, n) = form.dims();
    if m > 8 {
        return Err(QuadError::BadSpec(format!(
            "chart integrals over {} real axes are not supported",
            2 * m
        )));
    }
    let top = SuperForm::top_monomial(m, n);
    let coeff = form.coefficient(&top);
    let integrand = berezin_top(&coeff).canonical();
    if integrand.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let factor = measure_factor(m);
    let axes = 2 * m as usize;
    let value = integrate_rn(axes, spec, |xy| {
        let mut z = [Complex64::new(0.0, 0.0); 8];
        for i in 0..m as usize {
            z[i] = Complex64::new(xy[2 * i], xy[2 * i + 1]);
        }
        integrand
            .eval(&z[..m as usize], reg)
            .map_err(|e| e.to_string())
    })?;
    Ok(factor * value)
}

/// Quadrature self-test: `\int exp(-x^2) x^2 dx = sqrt(pi)/2`.
pub fn second_moment_check(spec: &QuadratureSpec) -> Result<f64, QuadError> {
    integrate_r1(spec, |x| (-x * x).exp() * x * x)
}

pub fn gaussian_moment(spec: &QuadratureSpec, power: u32) -> Result<f64, QuadError> {
    integrate_r1(spec, move |x| (-x * x).exp() * x.powi(power as i32))
}
