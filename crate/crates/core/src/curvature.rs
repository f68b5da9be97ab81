//! Curvature of the unified connection, two ways.
//!
//! [`curvature_formula`] assembles `R̃(X,Y)Z` from the Levi-Civita curvature
//! and the helper tensors `β, B, α, A, μ, R₀` as fourteen additive term
//! groups. [`curvature_direct`] differentiates `Γ̃ = Γ + H` and plugs it into
//! the coordinate expression for the curvature of an arbitrary connection.
//! The two routes share only the field jets, the Levi-Civita symbols, the
//! metric duals, and the `φ` split; none of the helper-tensor code below is
//! used by the direct route.
//!
//! Components are stored at `[l, i, j, k]` for `R̃(∂_i, ∂_j)∂_k = R̃^l_{ijk} ∂_l`.

use crate::connection::{
    deformation_h_jets, deformation_h_terms, gamma_tilde, predicted_nonmetricity, predicted_torsion, torsion,
    nonmetricity, HScales, HTerm, PointContext, SharpJet,
};
use rayon::prelude::*;

use crate::connection::ConnectionSpec;
use crate::error::{Error, Result};
use crate::fields::{Manifold, OneFormFieldJet, Point};
use crate::jet::Jet;
use crate::levi_civita::{cov_deriv_endo, cov_deriv_oneform, cov_deriv_vector, riemann};
use crate::tensor::{normalized_residual, Matrix, Tensor3, Tensor4, Vector};

/// `β(η,·,·)`, `B(η,·)`, `α(η,·,·)`, `A(η,·)` for one one-form `η`.
///
/// `beta[i, j] = β(η, ∂_i, ∂_j)` and `bvec[i, k] = B(η, ∂_i)^k`; likewise
/// for `alpha`/`avec`.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaHelpers {
    pub beta: Matrix,
    pub bvec: Matrix,
    pub alpha: Matrix,
    pub avec: Matrix,
}

/// Helper tensors for `η` with metric dual `ξ`:
///
/// ```text
/// β(η,X,Y) = (∇_Xη)Y + u(X)η(φ₂Y) − η(φ₁X)u(Y) + η(U)g(φ₁X,Y)
/// B(η,X)   = ∇_Xξ − u(X)φ₂ξ − η(φ₁X)U + η(U)φ₁X
/// α = β − ½η(U)g(φ₁·,·),   A = B − ½η(U)φ₁
/// ```
pub fn eta_helpers(eta: &OneFormFieldJet, xi: &SharpJet, ctx: &PointContext) -> EtaHelpers {
    let n = ctx.dim();
    let cj = &ctx.christoffel;
    let nabla_eta = cov_deriv_oneform(&eta.comp, cj);
    let nabla_xi = cov_deriv_vector(&xi.comp, cj);
    let e = eta.values();
    let x = xi.values();
    let u = ctx.jets.u.values();
    let uu = ctx.sharp_u.values();
    let phi1 = ctx.split.phi1.values();
    let phi2 = ctx.split.phi2.values();
    let big1 = ctx.split.big_phi1_values();

    let eta_phi2 = |j: usize| (0..n).map(|m| e[[m]] * phi2[[m, j]]).sum::<f64>();
    let eta_phi1 = |i: usize| (0..n).map(|m| e[[m]] * phi1[[m, i]]).sum::<f64>();
    let eta_u: f64 = (0..n).map(|m| e[[m]] * uu[[m]]).sum();
    let phi2_xi = phi2.apply(&x);

    let beta = Matrix::from_fn(n, |[i, j]| {
        nabla_eta[[i, j]] + u[[i]] * eta_phi2(j) - eta_phi1(i) * u[[j]] + eta_u * big1[[i, j]]
    });
    let bvec = Matrix::from_fn(n, |[i, k]| {
        nabla_xi[[i, k]] - u[[i]] * phi2_xi[[k]] - eta_phi1(i) * uu[[k]] + eta_u * phi1[[k, i]]
    });
    let alpha = beta.zip_map(&big1, |b, p| b - 0.5 * eta_u * p);
    let avec = Matrix::from_fn(n, |[i, k]| bvec[[i, k]] - 0.5 * eta_u * phi1[[k, i]]);
    EtaHelpers {
        beta,
        bvec,
        alpha,
        avec,
    }
}

/// `μ(X,Y) = (∇_Xφ₁)Y − u(X)φ₂φ₁Y`, stored at `[k, i, j] = μ(∂_i, ∂_j)^k`.
pub fn mu_tensor(ctx: &PointContext) -> Tensor3 {
    let n = ctx.dim();
    let nabla_phi1 = cov_deriv_endo(&ctx.split.phi1.comp, &ctx.christoffel);
    let u = ctx.jets.u.values();
    let phi21 = ctx.split.phi2.values().matmul(&ctx.split.phi1.values());
    Tensor3::from_fn(n, |[k, i, j]| nabla_phi1[[i, k, j]] - u[[i]] * phi21[[k, j]])
}

/// `R₀(X,Y)Z = g(Y,Z)X − g(X,Z)Y`.
pub fn r0(g: &Matrix, x: &Vector, y: &Vector, z: &Vector) -> Vector {
    let n = g.dim();
    let ip = |a: &Vector, b: &Vector| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += g[[i, j]] * a[[i]] * b[[j]];
            }
        }
        s
    };
    let (yz, xz) = (ip(y, z), ip(x, z));
    Vector::from_vec((0..n).map(|l| yz * x[[l]] - xz * y[[l]]).collect())
}

/// `2dη(∂_i, ∂_j) = ∂_i η_j − ∂_j η_i`.
pub fn exterior_2du(eta: &OneFormFieldJet) -> Matrix {
    Matrix::from_fn(eta.dim(), |[i, j]| eta.comp[j].d1(i) - eta.comp[i].d1(j))
}

/// The fourteen additive groups of the closed-form curvature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TermGroup {
    /// `R(X,Y)Z`
    Riemann,
    /// `−2du(X,Y)φ₂Z`
    DuPhi2,
    /// `−α(u,Y,Z)φ₁X + α(u,X,Z)φ₁Y`
    AlphaPhi1,
    /// `−g(φ₁Y,Z)A(u,X) + g(φ₁X,Z)A(u,Y)`
    Phi1A,
    /// `−R₀(U, μ(X,Y) − μ(Y,X))Z`
    R0Mu,
    /// `u(X)(∇_Yφ₂)Z − u(Y)(∇_Xφ₂)Z`
    NablaPhi2,
    /// `−f₁{2du₁(X,Y)Z − β(u₁,Y,Z)X + … − u(X)R₀(φY,U₁)Z}`
    F1Block,
    /// `f₂{g(φY,Z)u(X)U₂ − … + g(X,Z)B(u₂,Y)}`
    F2Block,
    /// `−f₁²{g(Y,Z)R₀(X,U₁)U₁ − g(X,Z)R₀(Y,U₁)U₁ − u₁(Z)R₀(X,Y)U₁}`
    F1Squared,
    /// `f₂²{g(Y,Z)u₂(X)U₂ − g(X,Z)u₂(Y)U₂}`
    F2Squared,
    /// `f₁f₂{g(Y,Z)(R₀(X,U₂)U₁ − u₂(X)U₁) − g(X,Z)(R₀(Y,U₂)U₁ − u₂(Y)U₁)}`
    F1F2,
    /// `−(Xf₁){u₁(Y)Z + u₁(Z)Y − g(Y,Z)U₁}`
    GradF1X,
    /// `(Yf₁){u₁(X)Z + u₁(Z)X − g(X,Z)U₁}`
    GradF1Y,
    /// `−(Xf₂)g(Y,Z)U₂ + (Yf₂)g(X,Z)U₂`
    GradF2,
}

impl TermGroup {
    pub const ALL: [TermGroup; 14] = [
        TermGroup::Riemann,
        TermGroup::DuPhi2,
        TermGroup::AlphaPhi1,
        TermGroup::Phi1A,
        TermGroup::R0Mu,
        TermGroup::NablaPhi2,
        TermGroup::F1Block,
        TermGroup::F2Block,
        TermGroup::F1Squared,
        TermGroup::F2Squared,
        TermGroup::F1F2,
        TermGroup::GradF1X,
        TermGroup::GradF1Y,
        TermGroup::GradF2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TermGroup::Riemann => "riemann",
            TermGroup::DuPhi2 => "du_phi2",
            TermGroup::AlphaPhi1 => "alpha_phi1",
            TermGroup::Phi1A => "phi1_a",
            TermGroup::R0Mu => "r0_mu",
            TermGroup::NablaPhi2 => "nabla_phi2",
            TermGroup::F1Block => "f1_block",
            TermGroup::F2Block => "f2_block",
            TermGroup::F1Squared => "f1_squared",
            TermGroup::F2Squared => "f2_squared",
            TermGroup::F1F2 => "f1_f2",
            TermGroup::GradF1X => "grad_f1_x",
            TermGroup::GradF1Y => "grad_f1_y",
            TermGroup::GradF2 => "grad_f2",
        }
    }

    pub fn from_name(name: &str) -> Option<TermGroup> {
        TermGroup::ALL.into_iter().find(|t| t.name() == name)
    }
}

/// Per-group multipliers: `0` switches a group off, `1` keeps it, anything
/// else is a deliberate corruption.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormulaOptions {
    pub scales: [f64; 14],
}

impl Default for FormulaOptions {
    fn default() -> Self {
        FormulaOptions { scales: [1.0; 14] }
    }
}

impl FormulaOptions {
    pub fn with(mut self, group: TermGroup, factor: f64) -> Self {
        self.scales[group as usize] = factor;
        self
    }

    pub fn without(self, group: TermGroup) -> Self {
        self.with(group, 0.0)
    }
}

#[derive(Clone, Debug)]
pub struct FormulaOutput {
    /// `Σ scale_g · group_g`.
    pub total: Tensor4,
    /// Unscaled contribution of every group.
    pub groups: Vec<(TermGroup, Tensor4)>,
}

impl FormulaOutput {
    pub fn group(&self, g: TermGroup) -> &Tensor4 {
        &self.groups[g as usize].1
    }
}

/// Closed-form curvature, group by group.
pub fn curvature_formula(ctx: &PointContext, opts: &FormulaOptions) -> Result<FormulaOutput> {
    let n = ctx.dim();
    let cj = &ctx.christoffel;
    let riem = riemann(cj)?.r;
    let j = &ctx.jets;
    let g = ctx.g();
    let (u, u1, u2) = (j.u.values(), j.u1.values(), j.u2.values());
    let (uu, uu1, uu2) = (ctx.sharp_u.values(), ctx.sharp_u1.values(), ctx.sharp_u2.values());
    let (f1, f2) = (j.f1.value(), j.f2.value());
    let (df1, df2) = (j.f1.grad(), j.f2.grad());
    let phi = j.phi.values();
    let phi1 = ctx.split.phi1.values();
    let phi2 = ctx.split.phi2.values();
    let big = ctx.split.big_phi_values();
    let big1 = ctx.split.big_phi1_values();

    let hu = eta_helpers(&j.u, &ctx.sharp_u, ctx);
    let hu1 = eta_helpers(&j.u1, &ctx.sharp_u1, ctx);
    let hu2 = eta_helpers(&j.u2, &ctx.sharp_u2, ctx);
    let mu = mu_tensor(ctx);
    let mu_skew = Tensor3::from_fn(n, |[m, i, jj]| mu[[m, i, jj]] - mu[[m, jj, i]]);
    let nabla_phi2 = cov_deriv_endo(&ctx.split.phi2.comp, cj);
    let du = exterior_2du(&j.u);
    let du1 = exterior_2du(&j.u1);
    let u1_sq = u1.dot(&uu1);
    let u2_u1 = u2.dot(&uu1);
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };

    let mut groups = Vec::with_capacity(14);
    for group in TermGroup::ALL {
        let t = match group {
            TermGroup::Riemann => riem.clone(),
            TermGroup::DuPhi2 => Tensor4::from_fn(n, |[l, i, jj, k]| -du[[i, jj]] * phi2[[l, k]]),
            TermGroup::AlphaPhi1 => Tensor4::from_fn(n, |[l, i, jj, k]| {
                -hu.alpha[[jj, k]] * phi1[[l, i]] + hu.alpha[[i, k]] * phi1[[l, jj]]
            }),
            TermGroup::Phi1A => Tensor4::from_fn(n, |[l, i, jj, k]| {
                -big1[[jj, k]] * hu.avec[[i, l]] + big1[[i, k]] * hu.avec[[jj, l]]
            }),
            TermGroup::R0Mu => Tensor4::from_fn(n, |[l, i, jj, k]| {
                // R₀(U, M)Z = g(M,Z)U − g(U,Z)M
                let m_z: f64 = (0..n).map(|m| mu_skew[[m, i, jj]] * g[[m, k]]).sum();
                -(m_z * uu[[l]] - u[[k]] * mu_skew[[l, i, jj]])
            }),
            TermGroup::NablaPhi2 => Tensor4::from_fn(n, |[l, i, jj, k]| {
                u[[i]] * nabla_phi2[[jj, l, k]] - u[[jj]] * nabla_phi2[[i, l, k]]
            }),
            TermGroup::F1Block => Tensor4::from_fn(n, |[l, i, jj, k]| {
                // R₀(φX,U₁)Z = u₁(Z)φX − g(φX,Z)U₁
                let r0_i = u1[[k]] * phi[[l, i]] - big[[i, k]] * uu1[[l]];
                let r0_j = u1[[k]] * phi[[l, jj]] - big[[jj, k]] * uu1[[l]];
                -f1 * (du1[[i, jj]] * d(l, k) - hu1.beta[[jj, k]] * d(l, i) + hu1.beta[[i, k]] * d(l, jj)
                    - g[[jj, k]] * hu1.bvec[[i, l]]
                    + g[[i, k]] * hu1.bvec[[jj, l]]
                    + u[[jj]] * r0_i
                    - u[[i]] * r0_j)
            }),
            TermGroup::F2Block => Tensor4::from_fn(n, |[l, i, jj, k]| {
                f2 * (big[[jj, k]] * u[[i]] * uu2[[l]] - big[[i, k]] * u[[jj]] * uu2[[l]]
                    - g[[jj, k]] * hu2.bvec[[i, l]]
                    + g[[i, k]] * hu2.bvec[[jj, l]])
            }),
            TermGroup::F1Squared => Tensor4::from_fn(n, |[l, i, jj, k]| {
                let r0_x = u1_sq * d(l, i) - u1[[i]] * uu1[[l]];
                let r0_y = u1_sq * d(l, jj) - u1[[jj]] * uu1[[l]];
                let r0_xy = u1[[jj]] * d(l, i) - u1[[i]] * d(l, jj);
                -f1 * f1 * (g[[jj, k]] * r0_x - g[[i, k]] * r0_y - u1[[k]] * r0_xy)
            }),
            TermGroup::F2Squared => Tensor4::from_fn(n, |[l, i, jj, k]| {
                f2 * f2 * (g[[jj, k]] * u2[[i]] * uu2[[l]] - g[[i, k]] * u2[[jj]] * uu2[[l]])
            }),
            TermGroup::F1F2 => Tensor4::from_fn(n, |[l, i, jj, k]| {
                // R₀(X,U₂)U₁ = g(U₂,U₁)X − g(X,U₁)U₂
                let a = u2_u1 * d(l, i) - u1[[i]] * uu2[[l]] - u2[[i]] * uu1[[l]];
                let b = u2_u1 * d(l, jj) - u1[[jj]] * uu2[[l]] - u2[[jj]] * uu1[[l]];
                f1 * f2 * (g[[jj, k]] * a - g[[i, k]] * b)
            }),
            TermGroup::GradF1X => Tensor4::from_fn(n, |[l, i, jj, k]| {
                -df1[[i]] * (u1[[jj]] * d(l, k) + u1[[k]] * d(l, jj) - g[[jj, k]] * uu1[[l]])
            }),
            TermGroup::GradF1Y => Tensor4::from_fn(n, |[l, i, jj, k]| {
                df1[[jj]] * (u1[[i]] * d(l, k) + u1[[k]] * d(l, i) - g[[i, k]] * uu1[[l]])
            }),
            TermGroup::GradF2 => Tensor4::from_fn(n, |[l, i, jj, k]| {
                -df2[[i]] * g[[jj, k]] * uu2[[l]] + df2[[jj]] * g[[i, k]] * uu2[[l]]
            }),
        };
        groups.push((group, t));
    }
    let mut total = Tensor4::zeros(n);
    for (g, t) in &groups {
        let s = opts.scales[*g as usize];
        if s != 0.0 {
            total = total.add(&t.scale(s));
        }
    }
    Ok(FormulaOutput { total, groups })
}

/// `R̃^l_{ijk} = ∂_iΓ̃^l_{jk} − ∂_jΓ̃^l_{ik} + Γ̃^l_{im}Γ̃^m_{jk} − Γ̃^l_{jm}Γ̃^m_{ik}`
/// with `Γ̃ = Γ + H` differentiated exactly through the field jets.
pub fn curvature_direct(ctx: &PointContext, scales: &HScales) -> Result<Tensor4> {
    let n = ctx.dim();
    let cj = &ctx.christoffel;
    if cj.order() < 1 {
        return Err(Error::JetOrderUnsupported {
            field: "Christoffel symbols (direct curvature)".into(),
            requested: 1,
            available: cj.order(),
        });
    }
    let h = deformation_h_jets(ctx, scales);
    let gt: Vec<Jet> = (0..n * n * n)
        .map(|f| {
            let (k, i, j) = (f / (n * n), (f / n) % n, f % n);
            *cj.jet(k, i, j) + h[f]
        })
        .collect();
    let at = |k: usize, i: usize, j: usize| &gt[(k * n + i) * n + j];
    let mut r = Tensor4::zeros(n);
    for l in 0..n {
        for i in 0..n {
            for j in i + 1..n {
                for k in 0..n {
                    let mut v = at(l, j, k).d1(i) - at(l, i, k).d1(j);
                    for m in 0..n {
                        v += at(l, i, m).value() * at(m, j, k).value();
                        v -= at(l, j, m).value() * at(m, i, k).value();
                    }
                    r[[l, i, j, k]] = v;
                    r[[l, j, i, k]] = -v;
                }
            }
        }
    }
    Ok(r)
}

/// `max |T^l_{ijk} + T^l_{jik}|`, scaled like [`normalized_residual`].
pub fn antisymmetry_residual(t: &Tensor4) -> f64 {
    let swapped = Tensor4::from_fn(t.dim(), |[l, i, j, k]| -t[[l, j, i, k]]);
    normalized_residual(t, &swapped)
}

/// One comparison of the two curvature routes.
#[derive(Clone, Debug)]
pub struct CurvatureReport {
    pub point: Vec<f64>,
    pub formula: Tensor4,
    pub direct: Tensor4,
    pub residual: f64,
    pub formula_antisymmetry: f64,
    pub direct_antisymmetry: f64,
    /// Max-abs contribution of each term group.
    pub term_contributions: Vec<(TermGroup, f64)>,
}

pub fn compare_at(ctx: &PointContext, opts: &FormulaOptions, scales: &HScales) -> Result<(CurvatureReport, FormulaOutput)> {
    let out = curvature_formula(ctx, opts)?;
    let direct = curvature_direct(ctx, scales)?;
    let report = CurvatureReport {
        point: ctx.jets.point.coords.clone(),
        residual: normalized_residual(&out.total, &direct),
        formula_antisymmetry: antisymmetry_residual(&out.total),
        direct_antisymmetry: antisymmetry_residual(&direct),
        term_contributions: out.groups.iter().map(|(g, t)| (*g, t.max_abs())).collect(),
        formula: out.total.clone(),
        direct,
    };
    Ok((report, out))
}

/// Formula against oracle at every point, in point order.
pub fn compare_curvature(manifold: &Manifold, spec: &ConnectionSpec, points: &[Point]) -> Result<Vec<CurvatureReport>> {
    points
        .par_iter()
        .map(|p| {
            let ctx = PointContext::evaluate(&manifold.chart, &manifold.metric, spec, p)?;
            compare_at(&ctx, &FormulaOptions::default(), &HScales::default()).map(|(r, _)| r)
        })
        .collect()
}

/// A deliberate error injected into one named term, for sensitivity checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    H(HTerm),
    Formula(TermGroup),
}

/// Corrupted terms are doubled.
pub const FAULT_FACTOR: f64 = 2.0;

impl Fault {
    pub fn from_name(name: &str) -> Option<Fault> {
        HTerm::from_name(name)
            .map(Fault::H)
            .or_else(|| TermGroup::from_name(name).map(Fault::Formula))
    }

    pub fn name(self) -> &'static str {
        match self {
            Fault::H(t) => t.name(),
            Fault::Formula(g) => g.name(),
        }
    }

    pub fn all_names() -> Vec<&'static str> {
        HTerm::ALL
            .iter()
            .map(|t| t.name())
            .chain(TermGroup::ALL.iter().map(|g| g.name()))
            .collect()
    }
}

/// How the multipliers look with an optional fault applied.
pub fn fault_scales(fault: Option<Fault>) -> (HScales, FormulaOptions) {
    match fault {
        None => (HScales::default(), FormulaOptions::default()),
        Some(Fault::H(t)) => (HScales::default().with(t, FAULT_FACTOR), FormulaOptions::default()),
        Some(Fault::Formula(g)) => (HScales::default(), FormulaOptions::default().with(g, FAULT_FACTOR)),
    }
}

/// Accumulates how well each named term explains the observed residuals.
///
/// For a residual vector `D` and a term contribution `C`, the explained
/// fraction is `⟨D,C⟩² / (|D|²|C|²)`: the share of `|D|²` removed by the best
/// multiple of `C`. A single corrupted term scores ≈ 1.
///
/// `H` terms are scored against the torsion and non-metricity residuals,
/// curvature groups against the curvature residual. The two pools are kept
/// apart: a fault in `H` also moves the direct curvature, and that should not
/// be credited to a formula group.
#[derive(Clone, Debug, Default)]
pub struct Attribution {
    connection: Pool,
    curvature: Pool,
}

#[derive(Clone, Debug, Default)]
struct Pool {
    // per name: (⟨D,C⟩, |C|², max |C|)
    rows: Vec<(&'static str, f64, f64, f64)>,
    residual_sq: f64,
}

impl Pool {
    fn add(&mut self, name: &'static str, dot: f64, c_sq: f64, c_max: f64) {
        match self.rows.iter_mut().find(|r| r.0 == name) {
            Some(r) => {
                r.1 += dot;
                r.2 += c_sq;
                r.3 = r.3.max(c_max);
            }
            None => self.rows.push((name, dot, c_sq, c_max)),
        }
    }

    fn rows(&self, pool: &'static str) -> impl Iterator<Item = AttributionRow> + '_ {
        self.rows.iter().map(move |&(name, dot, c_sq, c_max)| AttributionRow {
            name,
            pool,
            max_contribution: c_max,
            explained: if self.residual_sq > 0.0 && c_sq > 0.0 {
                (dot * dot / (self.residual_sq * c_sq)).min(1.0)
            } else {
                0.0
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributionRow {
    pub name: &'static str,
    /// `"connection"` for `H` terms, `"curvature"` for formula groups.
    pub pool: &'static str,
    pub max_contribution: f64,
    pub explained: f64,
}

impl Attribution {
    /// Records the curvature residual `formula − direct` of one point.
    pub fn add_curvature(&mut self, residual: &Tensor4, out: &FormulaOutput) {
        self.curvature.residual_sq += residual.dot(residual);
        for (g, t) in &out.groups {
            self.curvature.add(g.name(), residual.dot(t), t.dot(t), t.max_abs());
        }
    }

    /// Records the torsion and non-metricity residuals (`direct − predicted`)
    /// of one point and the share each `H` term contributes to them.
    pub fn add_connection(&mut self, ctx: &PointContext, torsion_res: &Tensor3, metric_res: &Tensor3) {
        let n = ctx.dim();
        let g = ctx.g();
        self.connection.residual_sq += torsion_res.dot(torsion_res) + metric_res.dot(metric_res);
        for (term, h) in deformation_h_terms(ctx) {
            let ct = Tensor3::from_fn(n, |[k, i, j]| h[[k, i, j]] - h[[k, j, i]]);
            let cq = Tensor3::from_fn(n, |[i, j, k]| {
                -(0..n)
                    .map(|m| h[[m, i, j]] * g[[m, k]] + h[[m, i, k]] * g[[j, m]])
                    .sum::<f64>()
            });
            let dot = torsion_res.dot(&ct) + metric_res.dot(&cq);
            let c_sq = ct.dot(&ct) + cq.dot(&cq);
            self.connection.add(term.name(), dot, c_sq, h.max_abs());
        }
    }

    /// All rows, `H` terms first, then curvature groups.
    pub fn rows(&self) -> Vec<AttributionRow> {
        self.connection
            .rows("connection")
            .chain(self.curvature.rows("curvature"))
            .collect()
    }

    /// The row explaining the largest share of the residual. When the
    /// connection identities fail the search is restricted to `H` terms,
    /// otherwise to curvature groups.
    pub fn dominant(&self, connection_failed: bool) -> Option<AttributionRow> {
        let pool = if connection_failed {
            self.connection.rows("connection").collect::<Vec<_>>()
        } else {
            self.curvature.rows("curvature").collect()
        };
        pool.into_iter()
            .filter(|r| r.explained > 0.0)
            .max_by(|a, b| a.explained.total_cmp(&b.explained))
    }
}

/// Convenience: residual tensors for torsion and non-metricity under the
/// given `H` multipliers.
pub fn connection_residuals(ctx: &PointContext, scales: &HScales) -> (Tensor3, Tensor3) {
    let gt = gamma_tilde(ctx, scales);
    let t = torsion(&gt).t.sub(&predicted_torsion(ctx));
    let q = nonmetricity(&gt, ctx).q.sub(&predicted_nonmetricity(ctx));
    (t, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::ConnectionSpec;
    use crate::fields::{preset_manifold, EndoField, OneFormField, Point, PolynomialExpr, ScalarField};
    use crate::tensor::multi_indices;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn flat_ctx(spec: &ConnectionSpec, p: &[f64]) -> PointContext {
        let m = preset_manifold("euclidean", &[2.0]).unwrap();
        PointContext::evaluate(&m.chart, &m.metric, spec, &Point::new(p.to_vec())).unwrap()
    }

    fn case12_spec() -> ConnectionSpec {
        let mut spec = ConnectionSpec::zero(2);
        spec.u = Arc::new(
            OneFormField::polynomial(vec![PolynomialExpr::zero(2), PolynomialExpr::linear(2, 0, 1.0)]).unwrap(),
        );
        spec.phi = Arc::new(EndoField::Identity { dim: 2 });
        spec
    }

    fn case17_spec(omega: OneFormField) -> ConnectionSpec {
        let omega = Arc::new(omega);
        ConnectionSpec {
            f1: Arc::new(ScalarField::constant(2, -1.0)),
            f2: Arc::new(ScalarField::constant(2, -1.0)),
            u: Arc::new(OneFormField::zero(2)),
            u1: omega.clone(),
            u2: omega,
            phi: Arc::new(EndoField::Zero { dim: 2 }),
        }
    }

    #[test]
    fn helpers_vanish_for_zero_eta() {
        let ctx = flat_ctx(&case12_spec(), &[1.0, 0.0]);
        let h = eta_helpers(&ctx.jets.u1, &ctx.sharp_u1, &ctx);
        for m in [&h.beta, &h.bvec, &h.alpha, &h.avec] {
            assert_eq!(m.max_abs(), 0.0);
        }
    }

    #[test]
    fn alpha_on_e1() {
        let ctx = flat_ctx(&case12_spec(), &[1.0, 0.0]);
        let h = eta_helpers(&ctx.jets.u, &ctx.sharp_u, &ctx);
        assert_eq!(h.alpha.as_slice(), &[0.5, 1.0, 0.0, -0.5]);
        // flat metric: A(u,∂_i)^k = α_ik
        assert_eq!(h.avec, h.alpha);
    }

    #[test]
    fn beta_reduces_to_nabla_eta_when_u_vanishes() {
        let m = preset_manifold("bumpy", &[3.0, 0.2, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut spec = ConnectionSpec::random(3, &mut rng);
        spec.u = Arc::new(OneFormField::zero(3));
        let ctx = PointContext::evaluate(&m.chart, &m.metric, &spec, &Point::new(vec![0.1, 0.2, 0.3])).unwrap();
        let h = eta_helpers(&ctx.jets.u1, &ctx.sharp_u1, &ctx);
        let nabla = cov_deriv_oneform(&ctx.jets.u1.comp, &ctx.christoffel);
        assert_eq!(h.beta, nabla);
    }

    #[test]
    fn helper_pairings_hold() {
        let m = preset_manifold("bumpy", &[3.0, 0.2, 6.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in m.chart.sample_points(30, 2) {
            let spec = ConnectionSpec::random(3, &mut rng);
            let ctx = PointContext::evaluate(&m.chart, &m.metric, &spec, &p).unwrap();
            let g = ctx.g();
            for (eta, xi) in [(&ctx.jets.u, &ctx.sharp_u), (&ctx.jets.u1, &ctx.sharp_u1)] {
                let h = eta_helpers(eta, xi, &ctx);
                let lower = |v: &Matrix| Matrix::from_fn(3, |[i, j]| (0..3).map(|k| v[[i, k]] * g[[k, j]]).sum());
                assert!(normalized_residual(&lower(&h.bvec), &h.beta) < 1e-12);
                assert!(normalized_residual(&lower(&h.avec), &h.alpha) < 1e-12);
            }
        }
    }

    #[test]
    fn mu_examples() {
        let ctx = flat_ctx(&case12_spec(), &[1.0, 0.0]);
        assert_eq!(mu_tensor(&ctx).max_abs(), 0.0);

        let z = PolynomialExpr::zero(2);
        let x = PolynomialExpr::linear(2, 0, 1.0);
        let mut spec = ConnectionSpec::zero(2);
        // φ^0_1 = x¹
        spec.phi = Arc::new(EndoField::polynomial(vec![vec![z.clone(), x], vec![z.clone(), z]]).unwrap());
        let ctx = flat_ctx(&spec, &[0.3, 0.7]);
        let mu = mu_tensor(&ctx);
        // φ₁ = ½(φ + φᵀ): ∂_0 φ₁^0_1 = ∂_0 φ₁^1_0 = ½, all else 0
        for [k, i, j] in multi_indices::<3>(2) {
            let expect = if i == 0 && k != j { 0.5 } else { 0.0 };
            assert_eq!(mu[[k, i, j]], expect, "μ^{k}_{i}{j}");
        }
    }

    #[test]
    fn r0_examples() {
        let g = Matrix::identity(2);
        let e = |i: usize| Vector::from_vec((0..2).map(|k| if k == i { 1.0 } else { 0.0 }).collect());
        assert_eq!(r0(&g, &e(0), &e(0), &e(1)).max_abs(), 0.0);
        assert_eq!(r0(&g, &e(0), &e(1), &e(1)).as_slice(), &[1.0, 0.0]);
        let t = std::f64::consts::FRAC_PI_4;
        let gs = Matrix::from_fn(2, |[i, j]| match (i, j) {
            (0, 0) => 1.0,
            (1, 1) => t.sin().powi(2),
            _ => 0.0,
        });
        let v = r0(&gs, &e(0), &e(1), &e(1));
        assert!((v[[0]] - 0.5).abs() < 1e-15 && v[[1]] == 0.0);
    }

    #[test]
    fn exterior_derivative_examples() {
        let p = [0.4, -0.3];
        let f = PolynomialExpr::new(2, [(1.0, vec![2, 1]), (-0.5, vec![0, 3])]).unwrap();
        let df = OneFormField::exact(&f).jet(&Point::new(p.to_vec()));
        assert_eq!(exterior_2du(&df).max_abs(), 0.0);
        let a = OneFormField::polynomial(vec![PolynomialExpr::zero(2), PolynomialExpr::linear(2, 0, 1.0)]).unwrap();
        assert_eq!(exterior_2du(&a.jet(&Point::new(p.to_vec())))[[0, 1]], 1.0);
        let b = OneFormField::polynomial(vec![PolynomialExpr::linear(2, 1, 1.0), PolynomialExpr::zero(2)]).unwrap();
        assert_eq!(exterior_2du(&b.jet(&Point::new(p.to_vec())))[[0, 1]], -1.0);
    }

    #[test]
    fn zero_fields_reduce_to_levi_civita() {
        let m = preset_manifold("sphere2", &[1.0]).unwrap();
        let ctx = PointContext::evaluate(&m.chart, &m.metric, &ConnectionSpec::zero(2), &Point::new(vec![1.2, 0.1]))
            .unwrap();
        let r = riemann(&ctx.christoffel).unwrap().r;
        let f = curvature_formula(&ctx, &FormulaOptions::default()).unwrap();
        let d = curvature_direct(&ctx, &HScales::default()).unwrap();
        assert_eq!(f.total, r);
        assert!(normalized_residual(&d, &r) < 1e-12);
    }

    #[test]
    fn e2_curvature() {
        let omega = OneFormField::polynomial(vec![PolynomialExpr::linear(2, 1, 1.0), PolynomialExpr::zero(2)]).unwrap();
        let ctx = flat_ctx(&case17_spec(omega), &[0.0, 1.0]);
        let d = curvature_direct(&ctx, &HScales::default()).unwrap();
        assert_eq!(d[[0, 0, 1, 0]], -2.0);
        assert_eq!(d[[1, 0, 1, 0]], -1.0);
        let f = curvature_formula(&ctx, &FormulaOptions::default()).unwrap().total;
        assert!((f[[0, 0, 1, 0]] + 2.0).abs() < 1e-12);
        assert!((f[[1, 0, 1, 0]] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn fault_names_roundtrip() {
        for name in Fault::all_names() {
            assert_eq!(Fault::from_name(name).unwrap().name(), name);
        }
        assert_eq!(Fault::all_names().len(), 19);
        assert!(Fault::from_name("nope").is_none());
    }
}
