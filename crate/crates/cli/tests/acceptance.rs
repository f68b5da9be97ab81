//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs without the libtest harness so the verdict table is always printed.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use uniconn::cases::{case_catalogue, verify_case, Bindings, CaseId};
use uniconn::connection::{check_nonmetricity, check_torsion, gamma_tilde, nonmetricity, ConnectionSpec, HScales, PointContext};
use uniconn::curvature::{curvature_direct, curvature_formula, Fault, FormulaOptions};
use uniconn::fields::{preset_manifold, Manifold};
use uniconn::levi_civita::{ricci_data, riemann};
use uniconn::tensor::{normalized_residual, Matrix};
use uniconn::verify::{sweep, Tolerances};

const IDENTITY_TOL: f64 = 1e-10;
const CURVATURE_TOL: f64 = 1e-8;
const EXACT_TOL: f64 = 1e-12;
const GEOMETRY_TOL: f64 = 1e-9;

type Verdict = Result<String, String>;

fn bumpy(n: usize) -> Manifold {
    preset_manifold("bumpy", &[n as f64, 0.05, 7.0]).unwrap()
}

fn sweep_manifolds() -> Vec<Manifold> {
    let mut v: Vec<Manifold> = [2.0, 3.0, 4.0]
        .iter()
        .map(|&n| preset_manifold("euclidean", &[n]).unwrap())
        .collect();
    v.push(preset_manifold("sphere2", &[1.0]).unwrap());
    v.push(preset_manifold("half_plane", &[1.0]).unwrap());
    v.push(bumpy(2));
    v.push(bumpy(3));
    v
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_uniconn")
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin()).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

/// Criteria 1 and 2 share one sweep: worst torsion and metricity residuals.
fn identity_sweep() -> (f64, f64, usize, f64) {
    let start = Instant::now();
    let (mut t, mut q, mut count) = (0.0f64, 0.0f64, 0);
    for m in sweep_manifolds() {
        let pts = m.chart.sample_points(20, 11);
        for s in 0..100u64 {
            let spec = ConnectionSpec::random(m.chart.dim(), &mut ChaCha8Rng::seed_from_u64(1000 + s));
            for p in &pts {
                let ctx = PointContext::evaluate(&m.chart, &m.metric, &spec, p).unwrap();
                let gt = gamma_tilde(&ctx, &HScales::default());
                t = t.max(check_torsion(&ctx, &gt).residual);
                q = q.max(check_nonmetricity(&ctx, &gt).residual);
                count += 1;
            }
        }
    }
    (t, q, count, start.elapsed().as_secs_f64())
}

fn criterion_1_2() -> (Verdict, Verdict) {
    let (t, q, count, secs) = identity_sweep();
    let line = |r: f64| format!("max residual {r:.2e} (tol {IDENTITY_TOL:.0e}) over {count} point evaluations in {secs:.1} s");
    let judge = |r: f64| {
        if r < IDENTITY_TOL && secs < 10.0 {
            Ok(line(r))
        } else {
            Err(line(r))
        }
    };
    (judge(t), judge(q))
}

fn criterion_3() -> Verdict {
    let mut worst = 0.0f64;
    for m in sweep_manifolds() {
        let spec = ConnectionSpec::zero(m.chart.dim());
        for p in m.chart.sample_points(20, 3) {
            let ctx = PointContext::evaluate(&m.chart, &m.metric, &spec, &p).unwrap();
            let gt = gamma_tilde(&ctx, &HScales::default());
            let lc = riemann(&ctx.christoffel).unwrap().r;
            let formula = curvature_formula(&ctx, &FormulaOptions::default()).unwrap().total;
            let direct = curvature_direct(&ctx, &HScales::default()).unwrap();
            let checks = [
                normalized_residual(&gt.gamma, &ctx.christoffel.gamma()),
                check_torsion(&ctx, &gt).direct.max_abs(),
                nonmetricity(&gt, &ctx).q.max_abs(),
                normalized_residual(&formula, &lc),
                normalized_residual(&direct, &lc),
            ];
            worst = checks.into_iter().fold(worst, f64::max);
        }
    }
    let msg = format!("Γ̃ = Γ, T̃ = 0, ∇̃g = 0, R̃ = R: max residual {worst:.2e} (tol {EXACT_TOL:.0e})");
    if worst < EXACT_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_4() -> Verdict {
    let tol = Tolerances::default();
    let mut failures = Vec::new();
    let mut deviations = Vec::new();
    let mut runs = 0;
    for c in case_catalogue() {
        let id: CaseId = c.id.parse().unwrap();
        for m in sweep_manifolds() {
            if c.requires_curved && m.name.starts_with("euclidean") {
                continue;
            }
            let n = m.chart.dim();
            let b = Bindings::random(id, n, &mut ChaCha8Rng::seed_from_u64(40 + n as u64));
            let r = verify_case(id, &b, &m, &m.chart.sample_points(20, 4), &tol).unwrap();
            runs += 1;
            if !r.pass {
                failures.push(format!("{} on {}", c.id, m.name));
            }
            if r.prose_deviation && r.stated_metricity > tol.identity && !deviations.contains(&c.id) {
                deviations.push(c.id);
            }
        }
    }
    let msg = format!(
        "{} cases, {runs} case×manifold runs; stated-coefficient deviations reported for cases {:?}",
        case_catalogue().len(),
        deviations
    );
    if failures.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; failing: {}", failures.join(", ")))
    }
}

fn criterion_5() -> Verdict {
    let tol = Tolerances::default();
    let id: CaseId = "17".parse().unwrap();
    let (mut fr, mut rd, mut sk) = (0.0f64, 0.0f64, 0.0f64);
    for m in [preset_manifold("euclidean", &[2.0]).unwrap(), bumpy(2)] {
        let b = Bindings::random(id, 2, &mut ChaCha8Rng::seed_from_u64(17));
        let r = verify_case(id, &b, &m, &m.chart.sample_points(50, 17), &tol).unwrap();
        let c = r.curvature.expect("case 17 carries curvature laws");
        fr = fr.max(c.formula_vs_reduced);
        rd = rd.max(c.reduced_vs_direct);
        sk = sk.max(c.s_skew);
    }
    let msg = format!("formula vs reduced {fr:.2e}, reduced vs direct {rd:.2e}, s-skew {sk:.2e}");
    if fr < IDENTITY_TOL && rd < CURVATURE_TOL && sk < EXACT_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn x(i: usize) -> Value {
    let mut e = vec![0, 0];
    e[i] = 1;
    json!({"terms": [{"c": 1, "e": e}]})
}

fn criterion_6(dir: &Path) -> Verdict {
    let e1 = write_config(
        dir,
        "e1.json",
        &json!({
            "manifold": {"preset": "euclidean", "n": 2},
            "connection": {"case": 12, "bindings": {"u": [0, x(0)]}},
            "points": [[1, 0]],
        }),
    );
    let e2 = write_config(
        dir,
        "e2.json",
        &json!({
            "manifold": {"preset": "euclidean", "n": 2},
            "connection": {"case": 17, "bindings": {"omega": [x(1), 0]}},
            "points": [[0, 1]],
        }),
    );
    let tensors = |path: &str| -> Value {
        let (code, out, err) = run_cli(&["tensors", "--config", path]);
        assert_eq!(code, 0, "{err}");
        serde_json::from_str::<Value>(&out).unwrap()["points"][0].clone()
    };
    let a = tensors(&e1);
    let b = tensors(&e2);
    // 0-based storage: h[k][i][j] = H^k_ij, r[l][i][j][k] = R̃^l_ijk
    let got = [
        ("H^1_12", a["h"][0][0][1].as_f64().unwrap(), 1.0),
        ("H^2_11", a["h"][1][0][0].as_f64().unwrap(), -1.0),
        ("T^1_12", a["torsion"][0][0][1].as_f64().unwrap(), 1.0),
        ("R^1_121 formula", b["r_formula"][0][0][1][0].as_f64().unwrap(), -2.0),
        ("R^2_121 formula", b["r_formula"][1][0][1][0].as_f64().unwrap(), -1.0),
        ("R^1_121 direct", b["r_direct"][0][0][1][0].as_f64().unwrap(), -2.0),
        ("R^2_121 direct", b["r_direct"][1][0][1][0].as_f64().unwrap(), -1.0),
    ];
    let nabla_g = a["nabla_g"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|x| x.as_array().unwrap())
        .flat_map(|x| x.as_array().unwrap())
        .map(|x| x.as_f64().unwrap().abs())
        .fold(0.0, f64::max);
    let bad: Vec<String> = got
        .iter()
        .filter(|(_, v, e)| (v - e).abs() > EXACT_TOL)
        .map(|(n, v, e)| format!("{n} = {v} (expected {e})"))
        .collect();
    if bad.is_empty() && nabla_g < EXACT_TOL {
        Ok(format!("E1 and E2 reproduced via `uniconn tensors`; E1 max|∇̃g| = {nabla_g:.1e}"))
    } else {
        Err(format!("{}; E1 max|∇̃g| = {nabla_g:.1e}", bad.join(", ")))
    }
}

fn criterion_7() -> Verdict {
    let tol = Tolerances::default();
    let mut worst = 0.0f64;
    let mut failing = Vec::new();
    for n in [2, 3] {
        let m = bumpy(n);
        let pts = m.chart.sample_points(100, 26);
        for s in 0..5u64 {
            let spec = ConnectionSpec::random(n, &mut ChaCha8Rng::seed_from_u64(2600 + s));
            let r = sweep(&m, &spec, &pts, None, tol).unwrap();
            let c = r.checks.iter().map(|c| c.curvature).fold(0.0, f64::max);
            worst = worst.max(c);
            if c >= CURVATURE_TOL {
                failing.push(format!("bumpy({n}) spec {s}"));
            }
        }
    }
    let msg = format!("closed form vs direct oracle on bumpy(2), bumpy(3): 5 full specs × 100 points each, max residual {worst:.2e} (tol {CURVATURE_TOL:.0e})");
    if failing.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; failing: {}", failing.join(", ")))
    }
}

fn criterion_8() -> Verdict {
    let mut dk = 0.0f64;
    let mut dq = 0.0f64;
    for (name, k0) in [("sphere2", 1.0), ("half_plane", -1.0)] {
        let m = preset_manifold(name, &[1.0]).unwrap();
        let spec = ConnectionSpec::zero(2);
        for p in m.chart.sample_points(50, 8) {
            let ctx = PointContext::evaluate(&m.chart, &m.metric, &spec, &p).unwrap();
            let k = riemann(&ctx.christoffel).unwrap().sectional(&ctx.g(), 0, 1);
            dk = dk.max((k - k0).abs());
            if name == "sphere2" {
                let q = ricci_data(&ctx.jets.metric, &ctx.christoffel).unwrap().q;
                dq = dq.max(q.sub(&Matrix::identity(2)).max_abs());
            }
        }
    }
    let msg = format!("|K − K₀| ≤ {dk:.2e}, sphere |Q − Id| ≤ {dq:.2e} (tol {GEOMETRY_TOL:.0e})");
    if dk < GEOMETRY_TOL && dq < GEOMETRY_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn fault_config(dir: &Path) -> String {
    write_config(
        dir,
        "fault.json",
        &json!({
            "manifold": {"preset": "bumpy", "n": 3, "eps": 0.05, "seed": 7},
            "connection": {"random": {"seed": 9}},
            "points": {"count": 10, "seed": 9},
        }),
    )
}

fn criterion_9(dir: &Path) -> Verdict {
    let cfg = fault_config(dir);
    let (code, _, err) = run_cli(&["verify", "--config", &cfg]);
    if code != 0 {
        return Err(format!("uncorrupted run exited {code}: {err}"));
    }
    let mut bad = Vec::new();
    for name in Fault::all_names() {
        let (code, out, _) = run_cli(&["verify", "--config", &cfg, "--corrupt-term", name]);
        let v: Value = serde_json::from_str(&out).unwrap_or(Value::Null);
        let dom = v["ablation"]["dominant"].as_str().unwrap_or("-").to_string();
        if code != 1 || dom != *name {
            bad.push(format!("{name}: exit {code}, dominant {dom}"));
        }
    }
    let msg = format!("{} terms corrupted one at a time; clean run exits 0", Fault::all_names().len());
    if bad.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", bad.join("; ")))
    }
}

fn criterion_10(dir: &Path) -> Verdict {
    let cfg = fault_config(dir);
    let case = write_config(
        dir,
        "case.json",
        &json!({
            "manifold": {"preset": "sphere2", "r": 1},
            "connection": {"case": 2, "bindings": {"u": [x(0), x(1)]}},
            "points": {"count": 10, "seed": 2},
        }),
    );
    for (path, extra) in [(&cfg, None), (&case, None), (&cfg, Some("h_f1"))] {
        let mut args = vec!["verify", "--config", path.as_str()];
        if let Some(t) = extra {
            args.extend(["--corrupt-term", t]);
        }
        let a = run_cli(&args);
        let b = run_cli(&args);
        if a != b {
            return Err(format!("reports differ for {path} {extra:?}"));
        }
    }
    Ok("three configurations run twice each; reports byte-identical".into())
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let (c1, c2) = criterion_1_2();
    let results: Vec<(&str, Verdict)> = vec![
        ("torsion law sweep", c1),
        ("metricity law sweep", c2),
        ("degeneration to Levi-Civita", criterion_3()),
        ("case catalogue", criterion_4()),
        ("case 17 curvature", criterion_5()),
        ("hand fixtures E1/E2", criterion_6(dir.path())),
        ("curvature closed form vs oracle", criterion_7()),
        ("baseline geometry", criterion_8()),
        ("fault injection", criterion_9(dir.path())),
        ("determinism", criterion_10(dir.path())),
    ];
    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        let (tag, detail) = match v {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name}: {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
