//! The unified connection `∇̃ = ∇ + H` built from `(f₁, f₂, u, u₁, u₂, φ)`.
//!
//! `H(∂_i, ∂_j) = H^k_{ij} ∂_k` with
//!
//! ```text
//! H^k_{ij} = u_j (φ₁)^k_i − u_i (φ₂)^k_j − (Φ₁)_{ij} U^k
//!          − f₁ (u₁_i δ^k_j + u₁_j δ^k_i − g_{ij} U₁^k)
//!          − f₂ g_{ij} U₂^k
//! ```
//!
//! where `U, U₁, U₂` are the metric duals of the one-forms and `φ₁, φ₂` the
//! g-self-adjoint and g-skew parts of `φ`. Torsion and non-metricity are
//! computed from the assembled coefficients and compared with their closed
//! forms; all work happens in the coordinate frame, where `[∂_i, ∂_j] = 0`.

use std::sync::Arc;

use rand::Rng;

use crate::error::Result;
use crate::fields::{
    evaluate_jets, Chart, EndoField, EndoFieldJet, MetricField, OneFormField, OneFormFieldJet,
    Point, PointJets, ScalarField,
};
use crate::jet::Jet;
use crate::levi_civita::{christoffel, inverse_metric, ChristoffelJet, InverseMetric};
use crate::tensor::{normalized_residual, Matrix, Tensor3, Vector};

/// The six fields parameterizing the connection. Fields are shared through
/// `Arc` so that tied bindings (`u₁ = u`, ...) are the same object.
#[derive(Clone, Debug)]
pub struct ConnectionSpec {
    pub f1: Arc<ScalarField>,
    pub f2: Arc<ScalarField>,
    pub u: Arc<OneFormField>,
    pub u1: Arc<OneFormField>,
    pub u2: Arc<OneFormField>,
    pub phi: Arc<EndoField>,
}

impl ConnectionSpec {
    /// All fields zero: `∇̃` is the Levi-Civita connection.
    pub fn zero(dim: usize) -> Self {
        ConnectionSpec {
            f1: Arc::new(ScalarField::zero(dim)),
            f2: Arc::new(ScalarField::zero(dim)),
            u: Arc::new(OneFormField::zero(dim)),
            u1: Arc::new(OneFormField::zero(dim)),
            u2: Arc::new(OneFormField::zero(dim)),
            phi: Arc::new(EndoField::Zero { dim }),
        }
    }

    /// Six independent random polynomial fields; `φ` is a full matrix, so
    /// both its self-adjoint and skew parts are generically nonzero.
    pub fn random(dim: usize, rng: &mut impl Rng) -> Self {
        ConnectionSpec {
            f1: Arc::new(ScalarField::Polynomial(crate::fields::PolynomialExpr::random(dim, rng))),
            f2: Arc::new(ScalarField::Polynomial(crate::fields::PolynomialExpr::random(dim, rng))),
            u: Arc::new(OneFormField::random(dim, rng)),
            u1: Arc::new(OneFormField::random(dim, rng)),
            u2: Arc::new(OneFormField::random(dim, rng)),
            phi: Arc::new(EndoField::random(dim, rng)),
        }
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    /// Dimension of every field, in binding order.
    pub fn dims(&self) -> [(&'static str, usize); 6] {
        [
            ("f1", self.f1.dim()),
            ("f2", self.f2.dim()),
            ("u", self.u.dim()),
            ("u1", self.u1.dim()),
            ("u2", self.u2.dim()),
            ("phi", self.phi.dim()),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        for (name, d) in self.dims() {
            if d != n {
                return Err(crate::error::Error::DimensionMismatch {
                    what: name.into(),
                    expected: n,
                    found: d,
                });
            }
        }
        Ok(())
    }

    /// Metric jet order needed for curvature: second derivatives always,
    /// third when `φ` is built from the Ricci operator.
    pub fn required_metric_order(&self) -> usize {
        self.phi.required_metric_order().max(2)
    }
}

/// Metric dual `ξ^k = g^{km} η_m` of a one-form, as first-order jets.
#[derive(Clone, Debug)]
pub struct SharpJet {
    pub comp: Vec<Jet>,
}

impl SharpJet {
    pub fn values(&self) -> Vector {
        Vector::from_vec(self.comp.iter().map(Jet::value).collect())
    }

    /// `[k, a] = ∂_a ξ^k`.
    pub fn d1(&self) -> Matrix {
        Matrix::from_fn(self.comp.len(), |[k, a]| self.comp[k].d1(a))
    }
}

pub fn sharp(eta: &OneFormFieldJet, ginv: &InverseMetric) -> SharpJet {
    let n = eta.dim();
    SharpJet {
        comp: (0..n)
            .map(|k| (0..n).map(|m| *ginv.jet(k, m) * eta.comp[m]).sum())
            .collect(),
    }
}

/// `Φ(X,Y) = g(φX, Y)` split into symmetric and skew parts, together with
/// the endomorphisms `φ₁, φ₂` they come from. Matrices of two-forms are
/// indexed `[i, j]`; endomorphisms `[k, i] = φ^k_i`.
#[derive(Clone, Debug)]
pub struct PhiSplit {
    dim: usize,
    pub big_phi: Vec<Jet>,
    pub big_phi1: Vec<Jet>,
    pub big_phi2: Vec<Jet>,
    pub phi1: EndoFieldJet,
    pub phi2: EndoFieldJet,
}

impl PhiSplit {
    fn values(&self, v: &[Jet]) -> Matrix {
        Matrix::from_fn(self.dim, |[i, j]| v[i * self.dim + j].value())
    }

    pub fn big_phi_values(&self) -> Matrix {
        self.values(&self.big_phi)
    }

    pub fn big_phi1_values(&self) -> Matrix {
        self.values(&self.big_phi1)
    }

    pub fn big_phi2_values(&self) -> Matrix {
        self.values(&self.big_phi2)
    }
}

pub fn split_phi(phi: &EndoFieldJet, metric: &crate::fields::MetricFieldJet, ginv: &InverseMetric) -> PhiSplit {
    let n = phi.dim();
    let big: Vec<Jet> = (0..n * n)
        .map(|f| {
            let (i, j) = (f / n, f % n);
            (0..n).map(|m| *metric.jet(m, j) * *phi.jet(m, i)).sum()
        })
        .collect();
    let big1: Vec<Jet> = (0..n * n)
        .map(|f| {
            let (i, j) = (f / n, f % n);
            (big[i * n + j] + big[j * n + i]) * 0.5
        })
        .collect();
    let big2: Vec<Jet> = (0..n * n)
        .map(|f| {
            let (i, j) = (f / n, f % n);
            (big[i * n + j] - big[j * n + i]) * 0.5
        })
        .collect();
    // Φ₁(∂_i, ∂_j) = g_{kj} (φ₁)^k_i  ⇒  (φ₁)^k_i = g^{kj} (Φ₁)_{ij}
    let raise = |form: &[Jet]| -> EndoFieldJet {
        let comp = (0..n * n)
            .map(|f| {
                let (k, i) = (f / n, f % n);
                (0..n).map(|j| *ginv.jet(k, j) * form[i * n + j]).sum()
            })
            .collect();
        EndoFieldJet::from_jets(n, comp)
    };
    PhiSplit {
        dim: n,
        phi1: raise(&big1),
        phi2: raise(&big2),
        big_phi: big,
        big_phi1: big1,
        big_phi2: big2,
    }
}

/// Everything evaluated at one point that both the connection and the
/// curvature computations start from.
#[derive(Clone, Debug)]
pub struct PointContext {
    pub jets: PointJets,
    pub ginv: InverseMetric,
    pub christoffel: ChristoffelJet,
    pub sharp_u: SharpJet,
    pub sharp_u1: SharpJet,
    pub sharp_u2: SharpJet,
    pub split: PhiSplit,
}

impl PointContext {
    pub fn evaluate(chart: &Chart, metric: &MetricField, spec: &ConnectionSpec, p: &Point) -> Result<Self> {
        spec.validate()?;
        let jets = evaluate_jets(chart, metric, spec, p, spec.required_metric_order())?;
        Self::from_jets(jets)
    }

    pub fn from_jets(jets: PointJets) -> Result<Self> {
        let ginv = inverse_metric(&jets.metric)?;
        let christoffel = christoffel(&jets.metric)?;
        let split = split_phi(&jets.phi, &jets.metric, &ginv);
        Ok(PointContext {
            sharp_u: sharp(&jets.u, &ginv),
            sharp_u1: sharp(&jets.u1, &ginv),
            sharp_u2: sharp(&jets.u2, &ginv),
            split,
            ginv,
            christoffel,
            jets,
        })
    }

    pub fn dim(&self) -> usize {
        self.jets.metric.dim()
    }

    pub fn g(&self) -> Matrix {
        self.jets.metric.values()
    }
}

/// The five additive pieces of `H`, in the order they are written above.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HTerm {
    /// `u(Y) φ₁X`
    UPhi1,
    /// `−u(X) φ₂Y`
    UPhi2,
    /// `−g(φ₁X, Y) U`
    Phi1U,
    /// `−f₁{u₁(X)Y + u₁(Y)X − g(X,Y)U₁}`
    F1,
    /// `−f₂ g(X,Y) U₂`
    F2,
}

impl HTerm {
    pub const ALL: [HTerm; 5] = [HTerm::UPhi1, HTerm::UPhi2, HTerm::Phi1U, HTerm::F1, HTerm::F2];

    pub fn name(self) -> &'static str {
        match self {
            HTerm::UPhi1 => "h_u_phi1",
            HTerm::UPhi2 => "h_u_phi2",
            HTerm::Phi1U => "h_phi1_u",
            HTerm::F1 => "h_f1",
            HTerm::F2 => "h_f2",
        }
    }

    pub fn from_name(name: &str) -> Option<HTerm> {
        HTerm::ALL.into_iter().find(|t| t.name() == name)
    }
}

/// Per-term multipliers for `H`; `1` everywhere reproduces the connection.
/// Non-unit values are only used for fault injection and ablation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HScales(pub [f64; 5]);

impl Default for HScales {
    fn default() -> Self {
        HScales([1.0; 5])
    }
}

impl HScales {
    pub fn with(mut self, term: HTerm, factor: f64) -> Self {
        self.0[term as usize] = factor;
        self
    }
}

/// Jets of each `H` term, `[term][(k * n + i) * n + j]`.
pub fn deformation_h_term_jets(ctx: &PointContext) -> [Vec<Jet>; 5] {
    let n = ctx.dim();
    let j = &ctx.jets;
    let g = &j.metric;
    let phi1 = &ctx.split.phi1;
    let phi2 = &ctx.split.phi2;
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut terms: [Vec<Jet>; 5] = Default::default();
    for k in 0..n {
        for i in 0..n {
            for jj in 0..n {
                terms[0].push(j.u.comp[jj] * *phi1.jet(k, i));
                terms[1].push(-(j.u.comp[i] * *phi2.jet(k, jj)));
                terms[2].push(-(ctx.split.big_phi1[i * n + jj] * ctx.sharp_u.comp[k]));
                let brace = j.u1.comp[i] * delta(k, jj) + j.u1.comp[jj] * delta(k, i)
                    - *g.jet(i, jj) * ctx.sharp_u1.comp[k];
                terms[3].push(-(j.f1.jet * brace));
                terms[4].push(-(j.f2.jet * *g.jet(i, jj) * ctx.sharp_u2.comp[k]));
            }
        }
    }
    terms
}

/// `H^k_{ij}` as first-order jets, stored at `(k * n + i) * n + j`.
pub fn deformation_h_jets(ctx: &PointContext, scales: &HScales) -> Vec<Jet> {
    let terms = deformation_h_term_jets(ctx);
    let len = terms[0].len();
    (0..len)
        .map(|f| {
            (0..5)
                .map(|t| terms[t][f] * scales.0[t])
                .sum()
        })
        .collect()
}

/// `[k, i, j] = H^k_{ij}`.
pub fn deformation_h(ctx: &PointContext, scales: &HScales) -> Tensor3 {
    let n = ctx.dim();
    let h = deformation_h_jets(ctx, scales);
    Tensor3::from_fn(n, |[k, i, j]| h[(k * n + i) * n + j].value())
}

/// Values of each `H` term separately.
pub fn deformation_h_terms(ctx: &PointContext) -> Vec<(HTerm, Tensor3)> {
    let n = ctx.dim();
    let terms = deformation_h_term_jets(ctx);
    HTerm::ALL
        .into_iter()
        .zip(terms.iter())
        .map(|(t, v)| (t, Tensor3::from_fn(n, |[k, i, j]| v[(k * n + i) * n + j].value())))
        .collect()
}

/// `Γ̃^k_{ij} = Γ^k_{ij} + H^k_{ij}`, stored at `[k, i, j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaTilde {
    pub gamma: Tensor3,
}

pub fn gamma_tilde(ctx: &PointContext, scales: &HScales) -> GammaTilde {
    GammaTilde {
        gamma: ctx.christoffel.gamma().add(&deformation_h(ctx, scales)),
    }
}

/// `T̃^k_{ij}` at `[k, i, j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorsionComponents {
    pub t: Tensor3,
}

/// `T̃^k_{ij} = Γ̃^k_{ij} − Γ̃^k_{ji}` (coordinate brackets vanish).
pub fn torsion(gt: &GammaTilde) -> TorsionComponents {
    let g = &gt.gamma;
    TorsionComponents {
        t: Tensor3::from_fn(g.dim(), |[k, i, j]| g[[k, i, j]] - g[[k, j, i]]),
    }
}

/// `u(Y)φX − u(X)φY` in components: `u_j φ^k_i − u_i φ^k_j`.
pub fn predicted_torsion(ctx: &PointContext) -> Tensor3 {
    let u = ctx.jets.u.values();
    let phi = ctx.jets.phi.values();
    Tensor3::from_fn(ctx.dim(), |[k, i, j]| u[[j]] * phi[[k, i]] - u[[i]] * phi[[k, j]])
}

#[derive(Clone, Debug)]
pub struct IdentityCheck<T> {
    pub direct: T,
    pub predicted: T,
    pub residual: f64,
}

pub fn check_torsion(ctx: &PointContext, gt: &GammaTilde) -> IdentityCheck<Tensor3> {
    let direct = torsion(gt).t;
    let predicted = predicted_torsion(ctx);
    let residual = normalized_residual(&direct, &predicted);
    IdentityCheck {
        direct,
        predicted,
        residual,
    }
}

/// `(∇̃_i g)_{jk}` at `[i, j, k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonMetricity {
    pub q: Tensor3,
}

/// `(∇̃_i g)_{jk} = ∂_i g_{jk} − Γ̃^m_{ij} g_{mk} − Γ̃^m_{ik} g_{jm}`.
pub fn nonmetricity(gt: &GammaTilde, ctx: &PointContext) -> NonMetricity {
    let n = ctx.dim();
    let g = ctx.g();
    let dg = ctx.jets.metric.d1();
    let gam = &gt.gamma;
    NonMetricity {
        q: Tensor3::from_fn(n, |[i, j, k]| {
            dg[[j, k, i]]
                - (0..n)
                    .map(|m| gam[[m, i, j]] * g[[m, k]] + gam[[m, i, k]] * g[[j, m]])
                    .sum::<f64>()
        }),
    }
}

/// `2f₁u₁(X)g(Y,Z) + f₂{u₂(Y)g(X,Z) + u₂(Z)g(X,Y)}`.
pub fn predicted_nonmetricity(ctx: &PointContext) -> Tensor3 {
    let g = ctx.g();
    let f1 = ctx.jets.f1.value();
    let f2 = ctx.jets.f2.value();
    let u1 = ctx.jets.u1.values();
    let u2 = ctx.jets.u2.values();
    Tensor3::from_fn(ctx.dim(), |[i, j, k]| {
        2.0 * f1 * u1[[i]] * g[[j, k]] + f2 * (u2[[j]] * g[[i, k]] + u2[[k]] * g[[i, j]])
    })
}

pub fn check_nonmetricity(ctx: &PointContext, gt: &GammaTilde) -> IdentityCheck<Tensor3> {
    let direct = nonmetricity(gt, ctx).q;
    let predicted = predicted_nonmetricity(ctx);
    let residual = normalized_residual(&direct, &predicted);
    IdentityCheck {
        direct,
        predicted,
        residual,
    }
}

/// `T̃′` computed from `g(T̃′(X,Y),Z) = g(T̃(Z,X),Y)` (as `direct`) and from
/// the closed form `u(X)φ₁Y − u(X)φ₂Y − Φ(X,Y)U` (as `predicted`).
pub fn transpose_torsion(ctx: &PointContext, t: &Tensor3) -> IdentityCheck<Tensor3> {
    let n = ctx.dim();
    let g = ctx.g();
    let ginv = ctx.ginv.values();
    // lowered[i][j][k] = g(T̃′(∂_i,∂_j), ∂_k) = g_{mj} T̃^m_{ki}
    let lowered = Tensor3::from_fn(n, |[i, j, k]| (0..n).map(|m| g[[m, j]] * t[[m, k, i]]).sum());
    let direct = Tensor3::from_fn(n, |[l, i, j]| {
        (0..n).map(|k| ginv[[l, k]] * lowered[[i, j, k]]).sum()
    });
    let u = ctx.jets.u.values();
    let uu = ctx.sharp_u.values();
    let phi1 = ctx.split.phi1.values();
    let phi2 = ctx.split.phi2.values();
    let big = ctx.split.big_phi_values();
    let predicted = Tensor3::from_fn(n, |[l, i, j]| {
        u[[i]] * phi1[[l, j]] - u[[i]] * phi2[[l, j]] - big[[i, j]] * uu[[l]]
    });
    let residual = normalized_residual(&direct, &predicted);
    IdentityCheck {
        direct,
        predicted,
        residual,
    }
}
