use serde_json::{json, Map, Value};
use uniconn::cases::{case_catalogue, verify_case, CaseCheckResult};
use uniconn::connection::{check_nonmetricity, check_torsion, deformation_h, gamma_tilde, HScales, PointContext};
use uniconn::curvature::{curvature_direct, curvature_formula, Fault, FormulaOptions};
use uniconn::tensor::normalized_residual;
use uniconn::verify::{minimal_failing_configuration, sweep, SweepReport, Tolerances};

use crate::config::{ConnectionSource, RunConfig};
use crate::report::{conventions, real, reals, tensor};

/// A finished command: the report tree and the process exit code.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: Value,
    pub code: i32,
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

fn header(command: &str, cfg: &RunConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("conventions".into(), conventions());
    m.insert("manifold".into(), json!({"name": cfg.manifold.name, "dim": cfg.dim()}));
    m.insert("connection".into(), describe_connection(cfg));
    m
}

fn describe_connection(cfg: &RunConfig) -> Value {
    let mut v = match &cfg.source {
        ConnectionSource::Case { id, bindings } => json!({
            "kind": "case",
            "case": id.label(),
            "name": id.preset().name,
            "bindings": bindings.present(),
        }),
        ConnectionSource::Raw => json!({"kind": "raw"}),
        ConnectionSource::Random { seed } => json!({"kind": "random", "seed": seed}),
    };
    v["zeroed"] = json!(cfg.zeroed);
    v
}

fn tolerances(t: &Tolerances) -> Value {
    json!({"identity": real(t.identity), "curvature": real(t.curvature), "exact": real(t.exact)})
}

fn residual_map(pairs: impl IntoIterator<Item = (&'static str, f64)>) -> Value {
    Value::Object(pairs.into_iter().map(|(k, v)| (k.to_string(), real(v))).collect())
}

fn ablation_table(r: &SweepReport) -> Value {
    Value::Array(
        r.attribution
            .rows()
            .into_iter()
            .map(|row| {
                json!({
                    "term": row.name,
                    "pool": row.pool,
                    "max_contribution": real(row.max_contribution),
                    "explained": real(row.explained),
                })
            })
            .collect(),
    )
}

fn case_check(c: &CaseCheckResult) -> Value {
    json!({
        "case": c.case,
        "points": c.points,
        "connection": real(c.connection),
        "torsion": real(c.torsion),
        "metricity": real(c.metricity),
        "stated_torsion": c.stated_torsion.map(real),
        "stated_metricity": real(c.stated_metricity),
        "prose_deviation": c.prose_deviation,
        "curvature": c.curvature.map(|k| json!({
            "formula_vs_reduced": real(k.formula_vs_reduced),
            "reduced_vs_direct": real(k.reduced_vs_direct),
            "s_skew": real(k.s_skew),
        })),
        "pass": c.pass,
    })
}

fn effective_tolerances(cfg: &RunConfig, tolerance: Option<f64>) -> Tolerances {
    tolerance.map_or(cfg.tolerances, Tolerances::uniform)
}

/// Runs every identity check at every point.
pub fn cmd_verify(cfg: &RunConfig, tolerance: Option<f64>, fault: Option<Fault>) -> uniconn::Result<Outcome> {
    let tol = effective_tolerances(cfg, tolerance);
    let r = sweep(&cfg.manifold, &cfg.spec, &cfg.points, fault, tol)?;
    let case = match cfg.case() {
        Some((id, b)) if cfg.zeroed.is_empty() => Some(verify_case(id, b, &cfg.manifold, &cfg.points, &tol)?),
        _ => None,
    };
    let pass = r.passes() && case.as_ref().is_none_or(|c| c.pass);
    let mut m = header("verify", cfg);
    m.insert("corrupt_term".into(), json!(fault.map(Fault::name)));
    m.insert("tolerances".into(), tolerances(&tol));
    m.insert(
        "points".into(),
        Value::Array(
            r.checks
                .iter()
                .map(|c| {
                    json!({
                        "point": reals(&c.point),
                        "residuals": residual_map(c.residuals(&tol).map(|(n, v, _)| (n, v))),
                        "failed": c.failures(&tol),
                    })
                })
                .collect(),
        ),
    );
    m.insert("max_residuals".into(), residual_map(r.max_residuals()));
    m.insert("case_check".into(), case.as_ref().map_or(Value::Null, case_check));
    m.insert(
        "ablation".into(),
        json!({"terms": ablation_table(&r), "dominant": r.dominant().map(|d| d.name)}),
    );
    m.insert("pass".into(), json!(pass));
    Ok(Outcome {
        report: Value::Object(m),
        code: if pass { EXIT_PASS } else { EXIT_FAIL },
    })
}

/// Dumps every tensor at every point.
pub fn cmd_tensors(cfg: &RunConfig) -> uniconn::Result<Outcome> {
    let hs = HScales::default();
    let mut pts = Vec::new();
    for p in &cfg.points {
        let ctx = PointContext::evaluate(&cfg.manifold.chart, &cfg.manifold.metric, &cfg.spec, p)?;
        let gt = gamma_tilde(&ctx, &hs);
        let formula = curvature_formula(&ctx, &FormulaOptions::default())?.total;
        let direct = curvature_direct(&ctx, &hs)?;
        pts.push(json!({
            "point": reals(&p.coords),
            "g": tensor(&ctx.g()),
            "gamma": tensor(&ctx.christoffel.gamma()),
            "h": tensor(&deformation_h(&ctx, &hs)),
            "gamma_tilde": tensor(&gt.gamma),
            "torsion": tensor(&check_torsion(&ctx, &gt).direct),
            "nabla_g": tensor(&check_nonmetricity(&ctx, &gt).direct),
            "r_formula": tensor(&formula),
            "r_direct": tensor(&direct),
            "curvature_residual": real(normalized_residual(&formula, &direct)),
        }));
    }
    let mut m = header("tensors", cfg);
    m.insert("points".into(), Value::Array(pts));
    Ok(Outcome {
        report: Value::Object(m),
        code: EXIT_PASS,
    })
}

/// Lists the catalogue of particular connections.
pub fn cmd_cases() -> Outcome {
    let cat = case_catalogue();
    let entries: Vec<Value> = cat
        .iter()
        .map(|c| {
            json!({
                "id": c.id,
                "number": c.number,
                "name": c.name,
                "required_bindings": c.required_bindings(),
                "fixed_values": c.fixed_values(),
                "connection": c.connection,
                "metricity": c.metricity,
                "symmetric": c.symmetric,
                "checks": c.checks(),
                "prose_deviation": c.prose_deviation,
                "manifold_requirement": if c.requires_curved { "curved (Q ≠ 0)" } else { "any" },
            })
        })
        .collect();
    let primary = cat.iter().filter(|c| c.id == c.number.to_string()).count();
    Outcome {
        report: json!({
            "command": "cases",
            "conventions": conventions(),
            "primary": primary,
            "sub_cases": cat.len() - primary,
            "cases": entries,
        }),
        code: EXIT_PASS,
    }
}

/// Per-term contribution table and, on failure, the minimal failing
/// configuration with a config that reproduces it.
pub fn cmd_ablate(cfg: &RunConfig, tolerance: Option<f64>, fault: Option<Fault>) -> uniconn::Result<Outcome> {
    let tol = effective_tolerances(cfg, tolerance);
    let r = sweep(&cfg.manifold, &cfg.spec, &cfg.points, fault, tol)?;
    let minimal = minimal_failing_configuration(&cfg.manifold, &cfg.spec, &cfg.points, fault, tol)?;
    let minimal = minimal.map(|mf| {
        let bad = mf
            .report
            .checks
            .iter()
            .find(|c| !c.passes(&tol))
            .expect("a failing configuration has a failing point");
        let mut doc = cfg.document.clone();
        let mut zero: Vec<&str> = cfg.zeroed.clone();
        zero.extend(mf.zeroed.iter().copied());
        doc["connection"]["zero"] = json!(zero);
        doc["points"] = json!([reals(&mf.counterexample)]);
        json!({
            "zeroed": mf.zeroed,
            "remaining": mf.remaining,
            "counterexample_point": reals(&mf.counterexample),
            "failed_checks": bad.failures(&tol),
            "residuals": residual_map(bad.residuals(&tol).map(|(n, v, _)| (n, v))),
            "dominant": mf.report.dominant().map(|d| d.name),
            "terms": ablation_table(&mf.report),
            "config": doc,
        })
    });
    let mut m = header("ablate", cfg);
    m.insert("corrupt_term".into(), json!(fault.map(Fault::name)));
    m.insert("tolerances".into(), tolerances(&tol));
    m.insert("terms".into(), ablation_table(&r));
    m.insert("max_residuals".into(), residual_map(r.max_residuals()));
    m.insert("dominant".into(), json!(r.dominant().map(|d| d.name)));
    m.insert("minimal_failing_configuration".into(), minimal.unwrap_or(Value::Null));
    m.insert("pass".into(), json!(r.passes()));
    Ok(Outcome {
        report: Value::Object(m),
        code: if r.passes() { EXIT_PASS } else { EXIT_FAIL },
    })
}
