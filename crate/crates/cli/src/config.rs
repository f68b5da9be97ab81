//! JSON run configuration.
//!
//! ```json
//! {
//!   "manifold":   {"preset": "euclidean", "n": 2}
//!               | {"metric": [[poly, ...], ...], "domain": {"lower": [...], "upper": [...]}},
//!   "connection": {"case": 12, "bindings": {"u": [poly, poly]}}
//!               | {"raw": {"f1": poly, "u": [...], "phi": [[...]]}}
//!               | {"random": {"seed": 7}},
//!   "points":     [[1, 0], ...] | {"count": 20, "seed": 3},
//!   "tolerances": {"identity": 1e-10, "curvature": 1e-8, "exact": 1e-12},
//!   "output":     "json" | "pretty"
//! }
//! ```
//!
//! A polynomial is `{"terms": [{"c": 1.5, "e": [1, 0]}]}` (coefficient and
//! one exponent per coordinate); a bare number is a constant. The connection
//! may also carry `"zero": ["u1", ...]` to switch individual fields off after
//! it is built, which is how ablation counterexamples are written back.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};
use uniconn::cases::{build_case, Bindings, CaseId, BINDING_NAMES};
use uniconn::connection::ConnectionSpec;
use uniconn::fields::{
    preset_manifold, Chart, EndoField, Manifold, MetricField, OneFormField, Point, PolynomialExpr, ScalarField,
};
use uniconn::verify::{zero_field, Tolerances, FIELD_NAMES};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("dimension mismatch at {path}: expected {expected}, found {found}")]
    DimensionMismatch { path: String, expected: usize, found: usize },
    #[error("unknown case `{0}`")]
    UnknownCase(String),
    #[error("{0}")]
    Io(String),
    #[error("at {path}: {source}")]
    Geometry {
        path: String,
        #[source]
        source: uniconn::Error,
    },
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Json,
    Pretty,
}

/// How the connection was described.
#[derive(Clone, Debug)]
pub enum ConnectionSource {
    Case { id: CaseId, bindings: Bindings },
    Raw,
    Random { seed: u64 },
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub manifold: Manifold,
    pub source: ConnectionSource,
    /// Fields switched off with `"zero"`.
    pub zeroed: Vec<&'static str>,
    pub spec: ConnectionSpec,
    pub points: Vec<Point>,
    pub tolerances: Tolerances,
    pub output: Option<OutputFormat>,
    /// The parsed document, kept for writing derived configs.
    pub document: Value,
}

impl RunConfig {
    pub fn dim(&self) -> usize {
        self.manifold.chart.dim()
    }

    pub fn case(&self) -> Option<(CaseId, &Bindings)> {
        match &self.source {
            ConnectionSource::Case { id, bindings } => Some((*id, bindings)),
            _ => None,
        }
    }
}

/// A JSON path such as `connection.bindings.u[1]`.
#[derive(Clone, Debug)]
struct Path(String);

impl Path {
    fn root() -> Path {
        Path("$".into())
    }

    fn key(&self, k: &str) -> Path {
        Path(format!("{}.{k}", self.0))
    }

    fn idx(&self, i: usize) -> Path {
        Path(format!("{}[{i}]", self.0))
    }

    fn schema(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::Schema {
            path: self.0.clone(),
            message: message.into(),
        }
    }

    fn dims(&self, expected: usize, found: usize) -> ConfigError {
        ConfigError::DimensionMismatch {
            path: self.0.clone(),
            expected,
            found,
        }
    }

    fn geometry(&self, source: uniconn::Error) -> ConfigError {
        match source {
            uniconn::Error::DimensionMismatch { expected, found, .. } => self.dims(expected, found),
            uniconn::Error::CaseUnknown(c) => ConfigError::UnknownCase(c),
            source => ConfigError::Geometry {
                path: self.0.clone(),
                source,
            },
        }
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn object<'a>(v: &'a Value, path: &Path, allowed: &[&str]) -> Result<&'a Map<String, Value>> {
    let obj = v.as_object().ok_or_else(|| path.schema("expected an object"))?;
    for k in obj.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(path.key(k).schema(format!("unknown key (expected one of: {})", allowed.join(", "))));
        }
    }
    Ok(obj)
}

fn array<'a>(v: &'a Value, path: &Path) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| path.schema("expected an array"))
}

fn array_of_len<'a>(v: &'a Value, n: usize, path: &Path) -> Result<&'a Vec<Value>> {
    let a = array(v, path)?;
    if a.len() != n {
        return Err(path.dims(n, a.len()));
    }
    Ok(a)
}

fn real(v: &Value, path: &Path) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| path.schema("expected a finite number"))
}

fn uint(v: &Value, path: &Path) -> Result<u64> {
    v.as_u64().ok_or_else(|| path.schema("expected a non-negative integer"))
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str, path: &Path) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| path.schema(format!("missing required key `{key}`")))
}

fn polynomial(v: &Value, n: usize, path: &Path) -> Result<PolynomialExpr> {
    if v.is_number() {
        return Ok(PolynomialExpr::constant(n, real(v, path)?));
    }
    let obj = object(v, path, &["terms"])?;
    let tp = path.key("terms");
    let mut terms = Vec::new();
    for (i, t) in array(required(obj, "terms", path)?, &tp)?.iter().enumerate() {
        let p = tp.idx(i);
        let t = object(t, &p, &["c", "e"])?;
        let c = real(required(t, "c", &p)?, &p.key("c"))?;
        let ep = p.key("e");
        let e = array_of_len(required(t, "e", &p)?, n, &ep)?
            .iter()
            .enumerate()
            .map(|(k, x)| {
                x.as_u64()
                    .and_then(|x| u32::try_from(x).ok())
                    .ok_or_else(|| ep.idx(k).schema("expected a non-negative integer exponent"))
            })
            .collect::<Result<Vec<u32>>>()?;
        terms.push((c, e));
    }
    PolynomialExpr::new(n, terms).map_err(|e| path.geometry(e))
}

fn scalar_field(v: &Value, n: usize, path: &Path) -> Result<ScalarField> {
    match v {
        Value::Number(_) => Ok(ScalarField::constant(n, real(v, path)?)),
        _ => Ok(ScalarField::Polynomial(polynomial(v, n, path)?)),
    }
}

fn one_form(v: &Value, n: usize, path: &Path) -> Result<OneFormField> {
    let comps = array_of_len(v, n, path)?
        .iter()
        .enumerate()
        .map(|(i, c)| polynomial(c, n, &path.idx(i)))
        .collect::<Result<Vec<_>>>()?;
    OneFormField::polynomial(comps).map_err(|e| path.geometry(e))
}

fn matrix_of_polys(v: &Value, n: usize, path: &Path) -> Result<Vec<Vec<PolynomialExpr>>> {
    array_of_len(v, n, path)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let rp = path.idx(i);
            array_of_len(row, n, &rp)?
                .iter()
                .enumerate()
                .map(|(j, e)| polynomial(e, n, &rp.idx(j)))
                .collect()
        })
        .collect()
}

fn endo(v: &Value, n: usize, path: &Path) -> Result<EndoField> {
    match v.as_str() {
        Some("identity") => Ok(EndoField::Identity { dim: n }),
        Some("zero") => Ok(EndoField::Zero { dim: n }),
        Some(other) => Err(path.schema(format!("unknown endomorphism `{other}` (use a matrix, \"identity\" or \"zero\")"))),
        None => EndoField::polynomial(matrix_of_polys(v, n, path)?).map_err(|e| path.geometry(e)),
    }
}

fn manifold(v: &Value, path: &Path) -> Result<Manifold> {
    let obj = v.as_object().ok_or_else(|| path.schema("expected an object"))?;
    if obj.contains_key("preset") {
        let name = required(obj, "preset", path)?
            .as_str()
            .ok_or_else(|| path.key("preset").schema("expected a string"))?;
        let (keys, defaults): (&[&str], &[Option<f64>]) = match name {
            "euclidean" => (&["n"], &[None]),
            "sphere2" => (&["r"], &[Some(1.0)]),
            "half_plane" => (&["k"], &[Some(1.0)]),
            "bumpy" => (&["n", "eps", "seed"], &[None, None, None]),
            other => {
                return Err(path
                    .key("preset")
                    .schema(format!("unknown preset `{other}` (euclidean, sphere2, half_plane, bumpy)")))
            }
        };
        let mut allowed = vec!["preset"];
        allowed.extend_from_slice(keys);
        object(v, path, &allowed)?;
        let mut params = Vec::new();
        for (k, d) in keys.iter().zip(defaults) {
            let x = match (obj.get(*k), d) {
                (Some(x), _) => real(x, &path.key(k))?,
                (None, Some(d)) => *d,
                (None, None) => return Err(path.schema(format!("preset `{name}` needs `{k}`"))),
            };
            params.push(x);
        }
        preset_manifold(name, &params).map_err(|e| path.geometry(e))
    } else {
        let obj = object(v, path, &["metric", "domain"])?;
        let dp = path.key("domain");
        let domain = object(required(obj, "domain", path)?, &dp, &["lower", "upper"])?;
        let bound = |k: &str| -> Result<Vec<f64>> {
            let p = dp.key(k);
            array(required(domain, k, &dp)?, &p)?
                .iter()
                .enumerate()
                .map(|(i, x)| real(x, &p.idx(i)))
                .collect()
        };
        let (lower, upper) = (bound("lower")?, bound("upper")?);
        if lower.len() != upper.len() {
            return Err(dp.key("upper").dims(lower.len(), upper.len()));
        }
        let chart = Chart::new(lower, upper).map_err(|e| dp.geometry(e))?;
        let n = chart.dim();
        let mp = path.key("metric");
        let metric =
            MetricField::polynomial_upper(matrix_of_polys(required(obj, "metric", path)?, n, &mp)?)
                .map_err(|e| mp.geometry(e))?;
        Ok(Manifold {
            name: format!("inline({n})"),
            chart,
            metric,
        })
    }
}

fn case_id(v: &Value, path: &Path) -> Result<CaseId> {
    let label = match v {
        Value::Number(x) => x.to_string(),
        Value::String(s) => s.clone(),
        _ => return Err(path.schema("expected a case id (number or string such as \"13a\")")),
    };
    label.parse().map_err(|_| ConfigError::UnknownCase(label))
}

fn bindings(v: Option<&Value>, n: usize, path: &Path) -> Result<Bindings> {
    let mut b = Bindings::new();
    let Some(v) = v else { return Ok(b) };
    let obj = object(v, path, &BINDING_NAMES)?;
    for (k, val) in obj {
        let p = path.key(k);
        b = match k.as_str() {
            "f1" | "f2" => b.scalar(k, scalar_field(val, n, &p)?),
            "phi" => b.phi(endo(val, n, &p)?),
            _ => b.form(k, one_form(val, n, &p)?),
        };
    }
    Ok(b)
}

fn raw_spec(v: &Value, n: usize, path: &Path) -> Result<ConnectionSpec> {
    let obj = object(v, path, &FIELD_NAMES)?;
    let mut spec = ConnectionSpec::zero(n);
    for (k, val) in obj {
        let p = path.key(k);
        match k.as_str() {
            "f1" => spec.f1 = scalar_field(val, n, &p)?.into(),
            "f2" => spec.f2 = scalar_field(val, n, &p)?.into(),
            "u" => spec.u = one_form(val, n, &p)?.into(),
            "u1" => spec.u1 = one_form(val, n, &p)?.into(),
            "u2" => spec.u2 = one_form(val, n, &p)?.into(),
            "phi" => spec.phi = endo(val, n, &p)?.into(),
            _ => unreachable!("keys checked above"),
        }
    }
    Ok(spec)
}

fn connection(
    v: &Value,
    m: &Manifold,
    path: &Path,
) -> Result<(ConnectionSource, ConnectionSpec, Vec<&'static str>)> {
    let obj = object(v, path, &["case", "bindings", "raw", "random", "zero"])?;
    let kinds: Vec<&str> = ["case", "raw", "random"]
        .into_iter()
        .filter(|k| obj.contains_key(*k))
        .collect();
    if kinds.len() != 1 {
        return Err(path.schema(format!(
            "exactly one of `case`, `raw`, `random` is required (found: {})",
            if kinds.is_empty() { "none".to_string() } else { kinds.join(", ") }
        )));
    }
    if obj.contains_key("bindings") && kinds[0] != "case" {
        return Err(path.key("bindings").schema("`bindings` only goes with `case`"));
    }
    let n = m.chart.dim();
    let (source, mut spec) = match kinds[0] {
        "case" => {
            let id = case_id(&obj["case"], &path.key("case"))?;
            let bp = path.key("bindings");
            let b = bindings(obj.get("bindings"), n, &bp)?;
            let spec = build_case(id, &b, m).map_err(|e| match e {
                uniconn::Error::MissingBinding { .. } | uniconn::Error::ExtraBinding { .. } => bp.schema(e.to_string()),
                e => bp.geometry(e),
            })?;
            (ConnectionSource::Case { id, bindings: b }, spec)
        }
        "raw" => (ConnectionSource::Raw, raw_spec(&obj["raw"], n, &path.key("raw"))?),
        _ => {
            let rp = path.key("random");
            let r = object(&obj["random"], &rp, &["seed"])?;
            let seed = uint(required(r, "seed", &rp)?, &rp.key("seed"))?;
            let spec = ConnectionSpec::random(n, &mut ChaCha8Rng::seed_from_u64(seed));
            (ConnectionSource::Random { seed }, spec)
        }
    };
    let mut zeroed = Vec::new();
    if let Some(z) = obj.get("zero") {
        let zp = path.key("zero");
        for (i, name) in array(z, &zp)?.iter().enumerate() {
            let name = name
                .as_str()
                .and_then(|s| FIELD_NAMES.into_iter().find(|f| *f == s))
                .ok_or_else(|| zp.idx(i).schema(format!("expected one of {}", FIELD_NAMES.join(", "))))?;
            spec = zero_field(&spec, name);
            zeroed.push(name);
        }
    }
    spec.validate().map_err(|e| path.geometry(e))?;
    Ok((source, spec, zeroed))
}

fn points(v: &Value, chart: &Chart, path: &Path) -> Result<Vec<Point>> {
    let n = chart.dim();
    let pts = match v {
        Value::Array(list) => {
            if list.is_empty() {
                return Err(path.schema("at least one point is required"));
            }
            list.iter()
                .enumerate()
                .map(|(i, p)| {
                    let pp = path.idx(i);
                    array_of_len(p, n, &pp)?
                        .iter()
                        .enumerate()
                        .map(|(k, x)| real(x, &pp.idx(k)))
                        .collect::<Result<Vec<f64>>>()
                        .map(Point::new)
                })
                .collect::<Result<Vec<_>>>()?
        }
        _ => {
            let obj = object(v, path, &["count", "seed"])?;
            let count = uint(required(obj, "count", path)?, &path.key("count"))?;
            let seed = uint(
                obj.get("seed")
                    .ok_or_else(|| path.schema("`seed` is required when sampling points"))?,
                &path.key("seed"),
            )?;
            if count == 0 {
                return Err(path.key("count").schema("must be at least 1"));
            }
            chart.sample_points(count as usize, seed)
        }
    };
    for (i, p) in pts.iter().enumerate() {
        if !chart.contains(p) {
            return Err(path
                .idx(i)
                .schema(format!("point {:?} lies outside the chart domain", p.coords)));
        }
    }
    Ok(pts)
}

fn tolerances(v: Option<&Value>, path: &Path) -> Result<Tolerances> {
    let mut t = Tolerances::default();
    let Some(v) = v else { return Ok(t) };
    let obj = object(v, path, &["identity", "curvature", "exact"])?;
    for (k, val) in obj {
        let p = path.key(k);
        let x = real(val, &p)?;
        if x <= 0.0 {
            return Err(p.schema("tolerance must be positive"));
        }
        match k.as_str() {
            "identity" => t.identity = x,
            "curvature" => t.curvature = x,
            _ => t.exact = x,
        }
    }
    Ok(t)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root = Path::root();
    let doc: Value = serde_json::from_str(text).map_err(|e| root.schema(format!("invalid JSON: {e}")))?;
    let obj = object(&doc, &root, &["manifold", "connection", "points", "tolerances", "output"])?;
    let manifold = manifold(required(obj, "manifold", &root)?, &root.key("manifold"))?;
    let (source, spec, zeroed) = connection(required(obj, "connection", &root)?, &manifold, &root.key("connection"))?;
    let points = points(required(obj, "points", &root)?, &manifold.chart, &root.key("points"))?;
    let tolerances = tolerances(obj.get("tolerances"), &root.key("tolerances"))?;
    let output = match obj.get("output") {
        None => None,
        Some(Value::String(s)) if s == "json" => Some(OutputFormat::Json),
        Some(Value::String(s)) if s == "pretty" => Some(OutputFormat::Pretty),
        Some(_) => return Err(root.key("output").schema("expected \"json\" or \"pretty\"")),
    };
    Ok(RunConfig {
        manifold,
        source,
        zeroed,
        spec,
        points,
        tolerances,
        output,
        document: doc,
    })
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}
