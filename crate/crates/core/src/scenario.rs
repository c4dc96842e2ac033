//! Scenario files: JSON descriptions of a chart, a vector field, a form,
//! singular points (optionally with decomposition data), and a quadrature
//! spec. Loading validates every structural invariant and reports the
//! failing one by name.

use num_complex::Complex64;
use serde::Deserialize;
use serde_json::Value;

use crate::expr::BodyExpr;
use crate::grassmann::MultiIndex;
use crate::quad::QuadratureSpec;
use crate::residue::{validate_decomposition, Decomposition, DecompositionEntry};
use crate::superform::{FormMonomial, SuperForm};
use crate::superfun::{SuperFunction, SuperVectorField};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(String),
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invariant violation: {0}")]
    Invariant(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Strict,
    FZero,
    General,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Strict => "strict",
            Mode::FZero => "f_zero",
            Mode::General => "general",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(Mode::Strict),
            "f_zero" => Ok(Mode::FZero),
            "general" => Ok(Mode::General),
            other => Err(format!(
                "unknown mode `{other}` (expected strict | f_zero | general)"
            )),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioPoint {
    pub z: Vec<Complex64>,
    pub decomposition: Option<Decomposition>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub m: u32,
    pub n: u32,
    pub field: SuperVectorField,
    pub form: SuperForm,
    pub points: Vec<ScenarioPoint>,
    pub quad: QuadratureSpec,
    pub mode: Mode,
}

#[derive(Deserialize)]
struct RawScenario {
    m: u32,
    n: u32,
    field: RawField,
    form: Vec<RawFormTerm>,
    #[serde(default)]
    points: Vec<RawPoint>,
    quad: QuadratureSpec,
    mode: String,
}

#[derive(Deserialize)]
struct RawField {
    f: Vec<Vec<RawSfTerm>>,
    g: Vec<Vec<RawSfTerm>>,
}

#[derive(Deserialize)]
struct RawSfTerm {
    #[serde(default)]
    xi: Vec<u32>,
    #[serde(default)]
    xibar: Vec<u32>,
    coeff: Value,
}

#[derive(Deserialize)]
struct RawFormTerm {
    #[serde(default)]
    dz: Vec<u32>,
    #[serde(default)]
    dzbar: Vec<u32>,
    #[serde(default)]
    dxi: Vec<u16>,
    #[serde(default)]
    dxibar: Vec<u16>,
    #[serde(rename = "fn")]
    func: Vec<RawSfTerm>,
}

#[derive(Deserialize)]
struct RawPoint {
    z: Vec<[f64; 2]>,
    #[serde(default)]
    decomposition: Option<Vec<Vec<RawDecEntry>>>,
}

#[derive(Deserialize)]
struct RawDecEntry {
    lambda: Vec<u32>,
    #[serde(default)]
    a: Option<[f64; 2]>,
    #[serde(default)]
    b: Option<[f64; 2]>,
    #[serde(default)]
    target: Option<u32>,
}

fn schema_err<T>(path: &str, message: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Schema {
        path: path.to_string(),
        message: message.into(),
    })
}

/// Parse one expression node of the scenario grammar.
pub fn parse_expr(v: &Value, path: &str) -> Result<BodyExpr, ScenarioError> {
    let obj = match v.as_object() {
        Some(o) => o,
        None => return schema_err(path, "expression must be a single-key object"),
    };
    if obj.len() != 1 {
        return schema_err(path, format!("expression must have exactly one key, got {}", obj.len()));
    }
    let (key, val) = obj.iter().next().unwrap();
    match key.as_str() {
        "const" => {
            let arr = val
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| ScenarioError::Schema {
                    path: path.into(),
                    message: "const takes [re, im]".into(),
                })?;
            let re = arr[0].as_f64();
            let im = arr[1].as_f64();
            match (re, im) {
                (Some(re), Some(im)) => Ok(BodyExpr::constant(re, im)),
                _ => schema_err(path, "const components must be numbers"),
            }
        }
        "var" => {
            let name = val
                .as_str()
                .ok_or_else(|| ScenarioError::Schema {
                    path: path.into(),
                    message: "var takes a string like \"z1\" or \"zb1\"".into(),
                })?;
            if let Some(idx) = name.strip_prefix("zb") {
                let i: u32 = idx
                    .parse()
                    .map_err(|_| ScenarioError::Schema {
                        path: path.into(),
                        message: format!("bad variable `{name}`"),
                    })?;
                Ok(BodyExpr::zbar(i))
            } else if let Some(idx) = name.strip_prefix('z') {
                let i: u32 = idx
                    .parse()
                    .map_err(|_| ScenarioError::Schema {
                        path: path.into(),
                        message: format!("bad variable `{name}`"),
                    })?;
                Ok(BodyExpr::z(i))
            } else {
                schema_err(path, format!("bad variable `{name}`"))
            }
        }
        "add" | "mul" => {
            let arr = val.as_array().ok_or_else(|| ScenarioError::Schema {
                path: path.into(),
                message: format!("{key} takes a list"),
            })?;
            let mut parts = Vec::with_capacity(arr.len());
            for (i, item) in arr.iter().enumerate() {
                parts.push(parse_expr(item, &format!("{path}.{key}[{i}]"))?);
            }
            Ok(if key == "add" {
                BodyExpr::add(parts)
            } else {
                BodyExpr::mul(parts)
            })
        }
        "div" => {
            let arr = val
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| ScenarioError::Schema {
                    path: path.into(),
                    message: "div takes [numerator, denominator]".into(),
                })?;
            let num = parse_expr(&arr[0], &format!("{path}.div[0]"))?;
            let den = parse_expr(&arr[1], &format!("{path}.div[1]"))?;
            Ok(BodyExpr::div(num, den))
        }
        "pow" => {
            let arr = val
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| ScenarioError::Schema {
                    path: path.into(),
                    message: "pow takes [base, integer]".into(),
                })?;
            let base = parse_expr(&arr[0], &format!("{path}.pow[0]"))?;
            let k = arr[1].as_i64().ok_or_else(|| ScenarioError::Schema {
                path: path.into(),
                message: "pow exponent must be an integer".into(),
            })?;
            Ok(BodyExpr::pow(base, k as i32))
        }
        "conj" => {
            let inner = parse_expr(val, &format!("{path}.conj"))?;
            Ok(BodyExpr::Conj(Box::new(inner)).canonical())
        }
        "opaque" => {
            let name = val.as_str().ok_or_else(|| ScenarioError::Schema {
                path: path.into(),
                message: "opaque takes a name string".into(),
            })?;
            Ok(BodyExpr::Opaque(name.to_string()))
        }
        other => schema_err(path, format!("unknown expression node `{other}`")),
    }
}

fn parse_superfunction(
    terms: &[RawSfTerm],
    m: u32,
    n: u32,
    path: &str,
) -> Result<SuperFunction, ScenarioError> {
    let mut f = SuperFunction::zero(m, n);
    for (i, t) in terms.iter().enumerate() {
        let tpath = format!("{path}[{i}]");
        let mu = MultiIndex::from_labels(&t.xi).map_err(|e| ScenarioError::Schema {
            path: format!("{tpath}.xi"),
            message: e.to_string(),
        })?;
        let lam = MultiIndex::from_labels(&t.xibar).map_err(|e| ScenarioError::Schema {
            path: format!("{tpath}.xibar"),
            message: e.to_string(),
        })?;
        if mu.max_label() > n || lam.max_label() > n {
            return schema_err(&tpath, format!("odd index exceeds n = {n}"));
        }
        let coeff = parse_expr(&t.coeff, &format!("{tpath}.coeff"))?;
        if coeff.max_var_index() > m {
            return schema_err(
                &format!("{tpath}.coeff"),
                format!("body variable index exceeds m = {m}"),
            );
        }
        f.add_term(mu, lam, coeff);
    }
    Ok(f)
}

/// Sort an index list, counting the permutation sign. `None` when an index
/// repeats (the wedge term is zero).
fn normalize_index_list(list: &[u32]) -> Option<(Vec<u32>, i32)> {
    let mut v = list.to_vec();
    let mut sign = 1i32;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, sign))
}

fn parse_form(
    terms: &[RawFormTerm],
    m: u32,
    n: u32,
) -> Result<SuperForm, ScenarioError> {
    let mut form = SuperForm::zero(m, n);
    for (i, t) in terms.iter().enumerate() {
        let path = format!("form[{i}]");
        let Some((dz_sorted, dz_sign)) = normalize_index_list(&t.dz) else {
            continue; // repeated dz index: the term is identically zero
        };
        let Some((dzbar_sorted, dzbar_sign)) = normalize_index_list(&t.dzbar) else {
            continue;
        };
        let dz = MultiIndex::from_labels(&dz_sorted).map_err(|e| ScenarioError::Schema {
            path: format!("{path}.dz"),
            message: e.to_string(),
        })?;
        let dzbar = MultiIndex::from_labels(&dzbar_sorted).map_err(|e| ScenarioError::Schema {
            path: format!("{path}.dzbar"),
            message: e.to_string(),
        })?;
        if dz.max_label() > m || dzbar.max_label() > m {
            return schema_err(&path, format!("dz index exceeds m = {m}"));
        }
        let mut dxi = t.dxi.clone();
        let mut dxibar = t.dxibar.clone();
        dxi.resize(n as usize, 0);
        dxibar.resize(n as usize, 0);
        if t.dxi.len() > n as usize || t.dxibar.len() > n as usize {
            return schema_err(&path, format!("dxi multidegree longer than n = {n}"));
        }
        let mono = FormMonomial {
            dz,
            dzbar,
            dxi,
            dxibar,
        };
        let coeff = parse_superfunction(&t.func, m, n, &format!("{path}.fn"))?;
        let sign = (dz_sign * dzbar_sign) as f64;
        form.add_term(mono, coeff.scale(Complex64::new(sign, 0.0)));
    }
    Ok(form)
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Scenario, ScenarioError> {
        let raw: RawScenario =
            serde_json::from_str(text).map_err(|e| ScenarioError::Json(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn load(path: &std::path::Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    fn from_raw(raw: RawScenario) -> Result<Scenario, ScenarioError> {
        let (m, n) = (raw.m, raw.n);
        if m != n {
            return Err(ScenarioError::Invariant(format!(
                "scenarios describe n|n charts; got m = {m}, n = {n}"
            )));
        }
        if n == 0 || n > 32 {
            return Err(ScenarioError::Invariant(format!(
                "odd dimension n = {n} out of supported range 1..=32"
            )));
        }
        raw.quad
            .validate()
            .map_err(|e| ScenarioError::Invariant(e.to_string()))?;
        let mode: Mode = raw
            .mode
            .parse()
            .map_err(ScenarioError::Invariant)?;
        let mut f = Vec::with_capacity(raw.field.f.len());
        for (i, terms) in raw.field.f.iter().enumerate() {
            f.push(parse_superfunction(terms, m, n, &format!("field.f[{i}]"))?);
        }
        let mut g = Vec::with_capacity(raw.field.g.len());
        for (j, terms) in raw.field.g.iter().enumerate() {
            g.push(parse_superfunction(terms, m, n, &format!("field.g[{j}]"))?);
        }
        let field =
            SuperVectorField::new(f, g).map_err(|e| ScenarioError::Invariant(e.to_string()))?;
        let form = parse_form(&raw.form, m, n)?;
        let mut points = Vec::with_capacity(raw.points.len());
        for (pi, rp) in raw.points.iter().enumerate() {
            let z: Vec<Complex64> = rp.z.iter().map(|c| Complex64::new(c[0], c[1])).collect();
            if z.len() != n as usize {
                return Err(ScenarioError::Invariant(format!(
                    "points[{pi}] has {} coordinates, chart has {n}",
                    z.len()
                )));
            }
            let decomposition = match &rp.decomposition {
                None => None,
                Some(lists) => {
                    let mut per_component = Vec::with_capacity(lists.len());
                    for (ci, entries) in lists.iter().enumerate() {
                        let mut out = Vec::with_capacity(entries.len());
                        for (ei, e) in entries.iter().enumerate() {
                            let lambda = MultiIndex::from_labels(&e.lambda).map_err(|err| {
                                ScenarioError::Schema {
                                    path: format!(
                                        "points[{pi}].decomposition[{ci}][{ei}].lambda"
                                    ),
                                    message: err.to_string(),
                                }
                            })?;
                            let a = e.a.map(|v| Complex64::new(v[0], v[1]));
                            let b = e.b.map(|v| Complex64::new(v[0], v[1]));
                            out.push(DecompositionEntry {
                                lambda,
                                a: a.unwrap_or(Complex64::new(0.0, 0.0)),
                                b: b.unwrap_or(Complex64::new(0.0, 0.0)),
                                target: e.target,
                            });
                        }
                        per_component.push(out);
                    }
                    let dec = Decomposition { per_component };
                    validate_decomposition(&field, &dec)
                        .map_err(|e| ScenarioError::Invariant(e.to_string()))?;
                    Some(dec)
                }
            };
            points.push(ScenarioPoint { z, decomposition });
        }
        if mode == Mode::General {
            for (pi, p) in points.iter().enumerate() {
                if p.decomposition.is_none() {
                    return Err(ScenarioError::Invariant(format!(
                        "mode is general but points[{pi}] has no decomposition"
                    )));
                }
            }
        }
        Ok(Scenario {
            m,
            n,
            field,
            form,
            points,
            quad: raw.quad,
            mode,
        })
    }
}
