//! Point-by-point verification sweeps with fault injection and ablation.

use std::sync::Arc;

use rayon::prelude::*;

use crate::connection::{check_nonmetricity, check_torsion, gamma_tilde, transpose_torsion, ConnectionSpec, PointContext};
use crate::curvature::{
    antisymmetry_residual, connection_residuals, curvature_direct, curvature_formula, fault_scales, Attribution,
    AttributionRow, Fault, FormulaOutput,
};
use crate::error::Result;
use crate::fields::{EndoField, Manifold, OneFormField, Point, ScalarField};
use crate::tensor::{normalized_residual, Tensor4};

/// Residual thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Identities forced algebraically by the construction (torsion,
    /// non-metricity, reduced connections).
    pub identity: f64,
    /// Closed-form curvature against the direct oracle.
    pub curvature: f64,
    /// Exact degenerations and the `s`-skew identity.
    pub exact: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-10,
            curvature: 1e-8,
            exact: 1e-12,
        }
    }
}

impl Tolerances {
    /// One threshold for the identity and curvature checks; the exact checks
    /// keep their own unless `t` is tighter.
    pub fn uniform(t: f64) -> Self {
        Tolerances {
            identity: t,
            curvature: t,
            exact: Tolerances::default().exact.min(t),
        }
    }
}

/// The named residuals of one point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCheck {
    pub point: Vec<f64>,
    pub torsion: f64,
    pub metricity: f64,
    pub transpose_torsion: f64,
    pub formula_antisymmetry: f64,
    pub direct_antisymmetry: f64,
    pub curvature: f64,
}

impl PointCheck {
    /// Names and values, in report order, with the tolerance each is held to.
    pub fn residuals(&self, tol: &Tolerances) -> [(&'static str, f64, f64); 6] {
        [
            ("torsion", self.torsion, tol.identity),
            ("metricity", self.metricity, tol.identity),
            ("transpose_torsion", self.transpose_torsion, tol.identity),
            ("formula_antisymmetry", self.formula_antisymmetry, tol.identity),
            ("direct_antisymmetry", self.direct_antisymmetry, tol.identity),
            ("curvature", self.curvature, tol.curvature),
        ]
    }

    pub fn failures(&self, tol: &Tolerances) -> Vec<&'static str> {
        self.residuals(tol)
            .into_iter()
            .filter(|(_, r, t)| r.is_nan() || r > t)
            .map(|(name, _, _)| name)
            .collect()
    }

    pub fn passes(&self, tol: &Tolerances) -> bool {
        self.failures(tol).is_empty()
    }

    pub fn connection_failed(&self, tol: &Tolerances) -> bool {
        !(self.torsion <= tol.identity && self.metricity <= tol.identity && self.transpose_torsion <= tol.identity)
    }
}

/// Everything computed at one point during a sweep.
#[derive(Clone, Debug)]
pub struct PointEvaluation {
    pub ctx: PointContext,
    pub check: PointCheck,
    pub formula: FormulaOutput,
    pub direct: Tensor4,
}

pub fn evaluate_point(manifold: &Manifold, spec: &ConnectionSpec, p: &Point, fault: Option<Fault>) -> Result<PointEvaluation> {
    let ctx = PointContext::evaluate(&manifold.chart, &manifold.metric, spec, p)?;
    let (hs, opts) = fault_scales(fault);
    let gt = gamma_tilde(&ctx, &hs);
    let t = check_torsion(&ctx, &gt);
    let q = check_nonmetricity(&ctx, &gt);
    let formula = curvature_formula(&ctx, &opts)?;
    let direct = curvature_direct(&ctx, &hs)?;
    let check = PointCheck {
        point: p.coords.clone(),
        torsion: t.residual,
        metricity: q.residual,
        transpose_torsion: transpose_torsion(&ctx, &t.direct).residual,
        formula_antisymmetry: antisymmetry_residual(&formula.total),
        direct_antisymmetry: antisymmetry_residual(&direct),
        curvature: normalized_residual(&formula.total, &direct),
    };
    Ok(PointEvaluation {
        ctx,
        check,
        formula,
        direct,
    })
}

/// Result of running every check over a list of points.
#[derive(Clone, Debug)]
pub struct SweepReport {
    pub checks: Vec<PointCheck>,
    pub attribution: Attribution,
    pub tolerances: Tolerances,
}

impl SweepReport {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.passes(&self.tolerances))
    }

    pub fn connection_failed(&self) -> bool {
        self.checks.iter().any(|c| c.connection_failed(&self.tolerances))
    }

    /// Largest value of each named residual over all points.
    pub fn max_residuals(&self) -> Vec<(&'static str, f64)> {
        let mut out: Vec<(&'static str, f64)> = Vec::new();
        for c in &self.checks {
            for (i, (name, r, _)) in c.residuals(&self.tolerances).into_iter().enumerate() {
                if out.len() <= i {
                    out.push((name, r));
                } else {
                    out[i].1 = max_nan(out[i].1, r);
                }
            }
        }
        out
    }

    /// The term that best explains the failures, if any check failed.
    pub fn dominant(&self) -> Option<AttributionRow> {
        if self.passes() {
            None
        } else {
            self.attribution.dominant(self.connection_failed())
        }
    }
}

fn max_nan(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Runs every check at every point. Points are evaluated in parallel; the
/// attribution is accumulated afterwards in point order, so the report does
/// not depend on scheduling.
pub fn sweep(
    manifold: &Manifold,
    spec: &ConnectionSpec,
    points: &[Point],
    fault: Option<Fault>,
    tolerances: Tolerances,
) -> Result<SweepReport> {
    let evals: Vec<PointEvaluation> = points
        .par_iter()
        .map(|p| evaluate_point(manifold, spec, p, fault))
        .collect::<Result<_>>()?;
    let (hs, _) = fault_scales(fault);
    let mut attribution = Attribution::default();
    let mut checks = Vec::with_capacity(evals.len());
    for e in evals {
        let (t_res, q_res) = connection_residuals(&e.ctx, &hs);
        attribution.add_connection(&e.ctx, &t_res, &q_res);
        attribution.add_curvature(&e.formula.total.sub(&e.direct), &e.formula);
        checks.push(e.check);
    }
    Ok(SweepReport {
        checks,
        attribution,
        tolerances,
    })
}

/// Field names in the order the minimal-configuration search zeroes them.
pub const FIELD_NAMES: [&str; 6] = ["f1", "f2", "u", "u1", "u2", "phi"];

/// `spec` with the named field replaced by zero.
pub fn zero_field(spec: &ConnectionSpec, name: &str) -> ConnectionSpec {
    let n = spec.dim();
    let mut s = spec.clone();
    match name {
        "f1" => s.f1 = Arc::new(ScalarField::zero(n)),
        "f2" => s.f2 = Arc::new(ScalarField::zero(n)),
        "u" => s.u = Arc::new(OneFormField::zero(n)),
        "u1" => s.u1 = Arc::new(OneFormField::zero(n)),
        "u2" => s.u2 = Arc::new(OneFormField::zero(n)),
        "phi" => s.phi = Arc::new(EndoField::Zero { dim: n }),
        _ => {}
    }
    s
}

fn is_zero_field(spec: &ConnectionSpec, name: &str) -> bool {
    match name {
        "f1" => spec.f1.is_zero(),
        "f2" => spec.f2.is_zero(),
        "u" => spec.u.is_zero(),
        "u1" => spec.u1.is_zero(),
        "u2" => spec.u2.is_zero(),
        "phi" => spec.phi.is_zero(),
        _ => true,
    }
}

/// Outcome of the minimal-failing-configuration search.
#[derive(Clone, Debug)]
pub struct MinimalFailure {
    /// Fields that could be zeroed while the sweep kept failing.
    pub zeroed: Vec<&'static str>,
    /// Nonzero fields of the minimal configuration.
    pub remaining: Vec<&'static str>,
    pub spec: ConnectionSpec,
    pub report: SweepReport,
    /// First failing point of the minimal configuration.
    pub counterexample: Vec<f64>,
}

/// Greedily zeroes fields, in [`FIELD_NAMES`] order, as long as the sweep
/// still fails. Returns `None` when the original configuration passes.
pub fn minimal_failing_configuration(
    manifold: &Manifold,
    spec: &ConnectionSpec,
    points: &[Point],
    fault: Option<Fault>,
    tolerances: Tolerances,
) -> Result<Option<MinimalFailure>> {
    let mut report = sweep(manifold, spec, points, fault, tolerances)?;
    if report.passes() {
        return Ok(None);
    }
    let mut current = spec.clone();
    let mut zeroed = Vec::new();
    for name in FIELD_NAMES {
        if is_zero_field(&current, name) {
            continue;
        }
        let trial = zero_field(&current, name);
        let r = sweep(manifold, &trial, points, fault, tolerances)?;
        if !r.passes() {
            current = trial;
            report = r;
            zeroed.push(name);
        }
    }
    let remaining = FIELD_NAMES
        .into_iter()
        .filter(|n| !is_zero_field(&current, n))
        .collect();
    let counterexample = report
        .checks
        .iter()
        .find(|c| !c.passes(&tolerances))
        .map(|c| c.point.clone())
        .unwrap_or_default();
    Ok(Some(MinimalFailure {
        zeroed,
        remaining,
        spec: current,
        report,
        counterexample,
    }))
}
