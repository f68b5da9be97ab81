//! The particular connections obtained by fixing some of the six fields.
//!
//! Each entry of the catalogue knows how to build a [`ConnectionSpec`] from
//! its free fields and carries its own displayed laws: the reduced connection
//! `∇̃_XY = ∇_XY + …`, the reduced `∇̃g`, and where stated the torsion and
//! curvature. [`verify_case`] evaluates those laws from the bound fields
//! directly and compares them with the general construction.
//!
//! Sub-cases displayed inside a case get their own ids (`"2a"`, `"13a"`, …).
//! Case `"2"` is the Ricci connection with `φ = Q`; `"2a"` is the general
//! `φ₂ = 0` connection.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::connection::{
    check_nonmetricity, check_torsion, gamma_tilde, nonmetricity, torsion, ConnectionSpec, HScales, PointContext,
};
use crate::curvature::{curvature_direct, curvature_formula, FormulaOptions};
use crate::error::{Error, Result};
use crate::fields::{EndoField, Manifold, OneFormField, Point, PolynomialExpr, ScalarField};
use crate::levi_civita::{cov_deriv_oneform, ricci_data, riemann};
use crate::tensor::{normalized_residual, Matrix, Tensor3, Tensor4, Vector};
use crate::verify::Tolerances;

/// Binding names, in canonical order.
pub const BINDING_NAMES: [&str; 7] = ["f1", "f2", "u", "u1", "u2", "phi", "omega"];

/// How a scalar slot is filled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalarRule {
    Const(f64),
    Bound(&'static str),
}

/// How a one-form slot is filled; `Bound("u")` in the `u1` slot ties `u₁ = u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FormRule {
    Zero,
    Bound(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiRule {
    Zero,
    Identity,
    /// The Ricci operator of the metric.
    Ricci,
    /// The bound `φ` as given.
    Bound,
    /// The g-self-adjoint part of the bound `φ` (`φ₂ = 0`).
    SymmetricPart,
    /// The g-skew part of the bound `φ` (`φ₁ = 0`).
    SkewPart,
}

/// One entry of the catalogue.
#[derive(Clone, Debug)]
pub struct CasePreset {
    pub id: &'static str,
    pub number: u8,
    pub name: &'static str,
    pub f1: ScalarRule,
    pub f2: ScalarRule,
    pub u: FormRule,
    pub u1: FormRule,
    pub u2: FormRule,
    pub phi: PhiRule,
    /// Displayed reduced connection.
    pub connection: &'static str,
    /// Displayed `∇̃g` law.
    pub metricity: &'static str,
    /// Torsion vanishes.
    pub symmetric: bool,
    /// The displayed metricity coefficient disagrees with the general law;
    /// reported, not asserted.
    pub prose_deviation: bool,
    /// `φ = Q` vanishes on flat space.
    pub requires_curved: bool,
}

impl CasePreset {
    /// Names of the bindings this case takes.
    pub fn required_bindings(&self) -> Vec<&'static str> {
        let mut used: Vec<&'static str> = Vec::new();
        for r in [self.f1, self.f2] {
            if let ScalarRule::Bound(n) = r {
                used.push(n);
            }
        }
        for r in [self.u, self.u1, self.u2] {
            if let FormRule::Bound(n) = r {
                used.push(n);
            }
        }
        if matches!(self.phi, PhiRule::Bound | PhiRule::SymmetricPart | PhiRule::SkewPart) {
            used.push("phi");
        }
        BINDING_NAMES.into_iter().filter(|n| used.contains(n)).collect()
    }

    /// Human-readable fixed values and ties, e.g. `f1 = 0.5`, `u1 = omega`.
    pub fn fixed_values(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (slot, r) in [("f1", self.f1), ("f2", self.f2)] {
            if let ScalarRule::Const(c) = r {
                out.push(format!("{slot} = {c}"));
            }
        }
        for (slot, r) in [("u", self.u), ("u1", self.u1), ("u2", self.u2)] {
            match r {
                FormRule::Zero => out.push(format!("{slot} = 0")),
                FormRule::Bound(n) if n != slot => out.push(format!("{slot} = {n}")),
                FormRule::Bound(_) => {}
            }
        }
        out.push(
            match self.phi {
                PhiRule::Zero => "phi = 0",
                PhiRule::Identity => "phi = Id",
                PhiRule::Ricci => "phi = Q (Ricci operator)",
                PhiRule::Bound => return out,
                PhiRule::SymmetricPart => "phi2 = 0 (phi is replaced by its g-self-adjoint part)",
                PhiRule::SkewPart => "phi1 = 0 (phi is replaced by its g-skew part)",
            }
            .to_string(),
        );
        out
    }

    /// Names of the checks [`verify_case`] runs for this case.
    pub fn checks(&self) -> Vec<&'static str> {
        let mut c = vec!["connection", "torsion", "metricity", "stated_metricity"];
        if self.symmetric || self.id == "2" {
            c.push("stated_torsion");
        }
        if self.id == "17" {
            c.extend(["curvature_formula_vs_reduced", "curvature_reduced_vs_direct", "s_skew"]);
        }
        c
    }
}

macro_rules! case {
    ($id:expr, $num:expr, $name:expr, f1: $f1:expr, f2: $f2:expr, u: $u:expr, u1: $u1:expr, u2: $u2:expr,
     phi: $phi:expr, conn: $conn:expr, metric: $metric:expr $(, $flag:ident)*) => {
        #[allow(unused_mut)]
        {
            let mut c = CasePreset {
                id: $id,
                number: $num,
                name: $name,
                f1: $f1,
                f2: $f2,
                u: $u,
                u1: $u1,
                u2: $u2,
                phi: $phi,
                connection: $conn,
                metricity: $metric,
                symmetric: false,
                prose_deviation: false,
                requires_curved: false,
            };
            $(c.$flag = true;)*
            c
        }
    };
}

fn build_catalogue() -> Vec<CasePreset> {
    use FormRule::{Bound as B, Zero as Z};
    use PhiRule::*;
    use ScalarRule::{Bound as SB, Const as C};
    vec![
        case!("1", 1, "quarter-symmetric metric connection",
            f1: C(0.0), f2: C(0.0), u: B("u"), u1: Z, u2: Z, phi: Bound,
            conn: "∇_XY + u(Y)φ₁X − u(X)φ₂Y − g(φ₁X,Y)U", metric: "∇̃g = 0"),
        case!("2", 2, "Ricci quarter-symmetric metric connection",
            f1: C(0.0), f2: C(0.0), u: B("u"), u1: Z, u2: Z, phi: Ricci,
            conn: "∇_XY + u(Y)QX − S(X,Y)U", metric: "∇̃g = 0", requires_curved),
        case!("2a", 2, "quarter-symmetric metric connection (φ₂ = 0)",
            f1: C(0.0), f2: C(0.0), u: B("u"), u1: Z, u2: Z, phi: SymmetricPart,
            conn: "∇_XY + u(Y)φX − g(φX,Y)U", metric: "∇̃g = 0"),
        case!("3", 3, "semi-symmetric metric S-connection",
            f1: C(0.0), f2: C(0.0), u: B("u"), u1: Z, u2: Z, phi: SkewPart,
            conn: "∇_XY − u(X)φY", metric: "∇̃g = 0"),
        case!("4", 4, "quarter-symmetric recurrent-metric connection",
            f1: SB("f1"), f2: C(0.0), u: B("u"), u1: B("u1"), u2: Z, phi: SymmetricPart,
            conn: "∇_XY + u(Y)φX − g(φX,Y)U − f₁{u₁(X)Y + u₁(Y)X − g(X,Y)U₁}",
            metric: "∇̃g = 2f₁u₁ ⊗ g"),
        case!("5", 5, "special quarter-symmetric recurrent-metric connection",
            f1: C(1.0), f2: C(0.0), u: B("u"), u1: B("u"), u2: Z, phi: SymmetricPart,
            conn: "∇_XY + u(Y)φX − g(φX,Y)U − u(X)Y − u(Y)X + g(X,Y)U", metric: "∇̃g = 2u ⊗ g"),
        case!("6", 6, "quarter-symmetric recurrent-metric connection",
            f1: SB("f1"), f2: C(0.0), u: B("u"), u1: B("u1"), u2: Z, phi: SkewPart,
            conn: "∇_XY − u(X)φY − f₁{u₁(X)Y + u₁(Y)X − g(X,Y)U₁}", metric: "∇̃g = f₁u₁ ⊗ g",
            prose_deviation),
        case!("7", 7, "special quarter-symmetric recurrent-metric connection",
            f1: C(1.0), f2: C(0.0), u: B("u"), u1: B("u"), u2: Z, phi: SkewPart,
            conn: "∇_XY − u(X)φY − u(X)Y − u(Y)X + g(X,Y)U", metric: "∇̃g = 2u ⊗ g"),
        case!("8", 8, "quarter-symmetric non-metric connection",
            f1: C(0.0), f2: SB("f2"), u: B("u"), u1: Z, u2: B("u2"), phi: SymmetricPart,
            conn: "∇_XY + u(Y)φX − g(φX,Y)U − f₂g(X,Y)U₂",
            metric: "(∇̃_Xg)(Y,Z) = f₂{u₂(Y)g(X,Z) + u₂(Z)g(X,Y)}"),
        case!("9", 9, "quarter-symmetric non-metric connection",
            f1: C(0.0), f2: SB("f2"), u: B("u"), u1: Z, u2: B("u"), phi: SymmetricPart,
            conn: "∇_XY + u(Y)φX − g(φX,Y)U − f₂g(X,Y)U",
            metric: "(∇̃_Xg)(Y,Z) = f₂{u(Y)g(X,Z) + u(Z)g(X,Y)}"),
        case!("10", 10, "quarter-symmetric non-metric connection",
            f1: C(0.0), f2: SB("f2"), u: B("u"), u1: Z, u2: B("u2"), phi: SkewPart,
            conn: "∇_XY − u(X)φY − f₂g(X,Y)U₂",
            metric: "(∇̃_Xg)(Y,Z) = f₂{u₂(Y)g(X,Z) + u₂(Z)g(X,Y)}"),
        case!("11", 11, "quarter-symmetric non-metric connection",
            f1: C(0.0), f2: SB("f2"), u: B("u"), u1: Z, u2: B("u"), phi: SkewPart,
            conn: "∇_XY − u(X)φY − f₂g(X,Y)U",
            metric: "(∇̃_Xg)(Y,Z) = f₂{u(Y)g(X,Z) + u(Z)g(X,Y)}"),
        case!("12", 12, "semi-symmetric metric connection",
            f1: C(0.0), f2: C(0.0), u: B("u"), u1: Z, u2: Z, phi: Identity,
            conn: "∇_XY + u(Y)X − g(X,Y)U", metric: "∇̃g = 0"),
        case!("13", 13, "semi-symmetric recurrent-metric connection",
            f1: SB("f1"), f2: C(0.0), u: B("u"), u1: B("u1"), u2: Z, phi: Identity,
            conn: "∇_XY + u(Y)X − g(X,Y)U − f₁{u₁(X)Y + u₁(Y)X − g(X,Y)U₁}", metric: "∇̃g = f₁u₁ ⊗ g",
            prose_deviation),
        case!("13a", 13, "semi-symmetric recurrent-metric connection (f₁ = 1)",
            f1: C(1.0), f2: C(0.0), u: B("u"), u1: B("u1"), u2: Z, phi: Identity,
            conn: "∇_XY + u(Y)X − g(X,Y)U − u₁(X)Y − u₁(Y)X + g(X,Y)U₁", metric: "∇̃g = 2u₁ ⊗ g"),
        case!("13b", 13, "semi-symmetric recurrent-metric connection (f₁ = 1, u₁ = u)",
            f1: C(1.0), f2: C(0.0), u: B("u"), u1: B("u"), u2: Z, phi: Identity,
            conn: "∇_XY − u(X)Y", metric: "∇̃g = 2u ⊗ g"),
        case!("14", 14, "semi-symmetric non-metric connection",
            f1: C(0.0), f2: SB("f2"), u: B("u"), u1: Z, u2: B("u2"), phi: Identity,
            conn: "∇_XY + u(Y)X − g(X,Y)U − f₂g(X,Y)U₂",
            metric: "(∇̃_Xg)(Y,Z) = f₂{u₂(Y)g(X,Z) + u₂(Z)g(X,Y)}"),
        case!("14a", 14, "semi-symmetric non-metric connection (f₂ = −1)",
            f1: C(0.0), f2: C(-1.0), u: B("u"), u1: Z, u2: B("u2"), phi: Identity,
            conn: "∇_XY + u(Y)X − g(X,Y)U + g(X,Y)U₂",
            metric: "(∇̃_Xg)(Y,Z) = −u₂(Y)g(X,Z) − u₂(Z)g(X,Y)"),
        case!("14b", 14, "semi-symmetric non-metric connection (f₂ = −1, u₂ = u)",
            f1: C(0.0), f2: C(-1.0), u: B("u"), u1: Z, u2: B("u"), phi: Identity,
            conn: "∇_XY + u(Y)X", metric: "(∇̃_Xg)(Y,Z) = −u(Y)g(X,Z) − u(Z)g(X,Y)"),
        case!("15", 15, "symmetric non-metric connection",
            f1: SB("f1"), f2: SB("f2"), u: Z, u1: B("u1"), u2: B("u2"), phi: Zero,
            conn: "∇_XY − f₁{u₁(X)Y + u₁(Y)X − g(X,Y)U₁} − f₂g(X,Y)U₂",
            metric: "(∇̃_Xg)(Y,Z) = 2f₁u₁(X)g(Y,Z) + f₂{u₂(Y)g(X,Z) + u₂(Z)g(X,Y)}", symmetric),
        case!("16", 16, "Weyl connection",
            f1: C(0.5), f2: C(0.0), u: Z, u1: B("omega"), u2: Z, phi: Zero,
            conn: "∇_XY − ½{ω(X)Y + ω(Y)X − g(X,Y)W}", metric: "∇̃g = ω ⊗ g", symmetric),
        case!("17", 17, "symmetric non-metric connection projectively related to Levi-Civita",
            f1: C(-1.0), f2: C(-1.0), u: Z, u1: B("omega"), u2: B("omega"), phi: Zero,
            conn: "∇_XY + ω(X)Y + ω(Y)X",
            metric: "(∇̃_Xg)(Y,Z) = −2ω(X)g(Y,Z) − ω(Y)g(X,Z) − ω(Z)g(X,Y)", symmetric),
    ]
}

/// The catalogue, in listing order.
pub fn case_catalogue() -> &'static [CasePreset] {
    static CATALOGUE: std::sync::OnceLock<Vec<CasePreset>> = std::sync::OnceLock::new();
    CATALOGUE.get_or_init(build_catalogue)
}

/// A catalogue entry, addressed by its id (`"12"`, `"13a"`, …).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CaseId(usize);

impl CaseId {
    pub fn all() -> impl Iterator<Item = CaseId> {
        (0..case_catalogue().len()).map(CaseId)
    }

    pub fn preset(self) -> &'static CasePreset {
        &case_catalogue()[self.0]
    }

    pub fn label(self) -> &'static str {
        self.preset().id
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<CaseId> {
        case_catalogue()
            .iter()
            .position(|c| c.id == s.trim())
            .map(CaseId)
            .ok_or_else(|| Error::CaseUnknown(s.to_string()))
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The free fields handed to a case.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    pub f1: Option<Arc<ScalarField>>,
    pub f2: Option<Arc<ScalarField>>,
    pub u: Option<Arc<OneFormField>>,
    pub u1: Option<Arc<OneFormField>>,
    pub u2: Option<Arc<OneFormField>>,
    pub omega: Option<Arc<OneFormField>>,
    pub phi: Option<Arc<EndoField>>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds a one-form to `u`, `u1`, `u2` or `omega`; other names are ignored.
    pub fn form(mut self, name: &str, field: OneFormField) -> Self {
        let f = Some(Arc::new(field));
        match name {
            "u" => self.u = f,
            "u1" => self.u1 = f,
            "u2" => self.u2 = f,
            "omega" => self.omega = f,
            _ => {}
        }
        self
    }

    /// Binds `f1` or `f2`.
    pub fn scalar(mut self, name: &str, field: ScalarField) -> Self {
        let f = Some(Arc::new(field));
        match name {
            "f1" => self.f1 = f,
            "f2" => self.f2 = f,
            _ => {}
        }
        self
    }

    pub fn phi(mut self, field: EndoField) -> Self {
        self.phi = Some(Arc::new(field));
        self
    }

    /// Names of the bound fields, in canonical order.
    pub fn present(&self) -> Vec<&'static str> {
        let flags = [
            self.f1.is_some(),
            self.f2.is_some(),
            self.u.is_some(),
            self.u1.is_some(),
            self.u2.is_some(),
            self.phi.is_some(),
            self.omega.is_some(),
        ];
        BINDING_NAMES.into_iter().zip(flags).filter(|(_, f)| *f).map(|(n, _)| n).collect()
    }

    fn get_form(&self, name: &str) -> Option<&Arc<OneFormField>> {
        match name {
            "u" => self.u.as_ref(),
            "u1" => self.u1.as_ref(),
            "u2" => self.u2.as_ref(),
            "omega" => self.omega.as_ref(),
            _ => None,
        }
    }

    fn get_scalar(&self, name: &str) -> Option<&Arc<ScalarField>> {
        match name {
            "f1" => self.f1.as_ref(),
            "f2" => self.f2.as_ref(),
            _ => None,
        }
    }

    /// Random polynomial fields for exactly the bindings `case` requires.
    pub fn random(case: CaseId, dim: usize, rng: &mut impl Rng) -> Bindings {
        let mut b = Bindings::new();
        for name in case.preset().required_bindings() {
            b = match name {
                "f1" | "f2" => b.scalar(name, ScalarField::Polynomial(PolynomialExpr::random(dim, rng))),
                "phi" => b.phi(EndoField::random(dim, rng)),
                _ => b.form(name, OneFormField::random(dim, rng)),
            };
        }
        b
    }
}

/// Builds the connection fields of `case` from `bindings`. Tied slots share
/// one `Arc`.
pub fn build_case(case: CaseId, bindings: &Bindings, manifold: &Manifold) -> Result<ConnectionSpec> {
    let preset = case.preset();
    let required = preset.required_bindings();
    for name in bindings.present() {
        if !required.contains(&name) {
            return Err(Error::ExtraBinding {
                case: preset.id.into(),
                binding: name.into(),
            });
        }
    }
    let missing = |name: &str| Error::MissingBinding {
        case: preset.id.into(),
        binding: name.into(),
    };
    let n = manifold.chart.dim();
    let scalar = |r: ScalarRule| -> Result<Arc<ScalarField>> {
        match r {
            ScalarRule::Const(c) => Ok(Arc::new(ScalarField::constant(n, c))),
            ScalarRule::Bound(name) => bindings.get_scalar(name).cloned().ok_or_else(|| missing(name)),
        }
    };
    let form = |r: FormRule| -> Result<Arc<OneFormField>> {
        match r {
            FormRule::Zero => Ok(Arc::new(OneFormField::zero(n))),
            FormRule::Bound(name) => bindings.get_form(name).cloned().ok_or_else(|| missing(name)),
        }
    };
    let bound_phi = || bindings.phi.clone().ok_or_else(|| missing("phi"));
    let phi = match preset.phi {
        PhiRule::Zero => Arc::new(EndoField::Zero { dim: n }),
        PhiRule::Identity => Arc::new(EndoField::Identity { dim: n }),
        PhiRule::Ricci => Arc::new(EndoField::RicciOperator { dim: n }),
        PhiRule::Bound => bound_phi()?,
        PhiRule::SymmetricPart => Arc::new(EndoField::MetricSymmetricPart(bound_phi()?)),
        PhiRule::SkewPart => Arc::new(EndoField::MetricSkewPart(bound_phi()?)),
    };
    let spec = ConnectionSpec {
        f1: scalar(preset.f1)?,
        f2: scalar(preset.f2)?,
        u: form(preset.u)?,
        u1: form(preset.u1)?,
        u2: form(preset.u2)?,
        phi,
    };
    for (name, d) in spec.dims() {
        if d != n {
            return Err(Error::DimensionMismatch {
                what: format!("binding {name} of case {}", preset.id),
                expected: n,
                found: d,
            });
        }
    }
    Ok(spec)
}

/// Values of the bound fields at one point, read straight from the bindings
/// and lowered/raised with the metric there. Nothing here goes through the
/// general deformation tensor.
struct Local {
    n: usize,
    g: Matrix,
    ginv: Matrix,
    f1: f64,
    f2: f64,
    forms: Vec<(&'static str, Vector, Vector)>,
    phi: Matrix,
}

impl Local {
    fn new(bindings: &Bindings, ctx: &PointContext) -> Result<Local> {
        let n = ctx.dim();
        let p = &ctx.jets.point;
        let g = ctx.g();
        let ginv = ctx.ginv.values();
        let scalar = |s: &Option<Arc<ScalarField>>| s.as_ref().map_or(0.0, |f| f.jet(p).value());
        let mut forms = Vec::new();
        for name in ["u", "u1", "u2", "omega"] {
            let eta = bindings
                .get_form(name)
                .map_or_else(|| Vector::zeros(n), |f| f.jet(p).values());
            let sharp = ginv.apply(&eta);
            forms.push((name, eta, sharp));
        }
        let phi = match &bindings.phi {
            Some(f) => f.jet(p, &ctx.jets.metric)?.values(),
            None => Matrix::zeros(n),
        };
        Ok(Local {
            n,
            g,
            ginv,
            f1: scalar(&bindings.f1),
            f2: scalar(&bindings.f2),
            forms,
            phi,
        })
    }

    fn eta(&self, name: &str) -> &Vector {
        &self.forms.iter().find(|f| f.0 == name).unwrap().1
    }

    fn sharp(&self, name: &str) -> &Vector {
        &self.forms.iter().find(|f| f.0 == name).unwrap().2
    }

    /// g-adjoint `g⁻¹φᵀg`.
    fn adjoint(&self, phi: &Matrix) -> Matrix {
        self.ginv.matmul(&phi.transpose()).matmul(&self.g)
    }

    fn sym(&self) -> Matrix {
        let a = self.adjoint(&self.phi);
        self.phi.zip_map(&a, |x, y| 0.5 * (x + y))
    }

    fn skew(&self) -> Matrix {
        let a = self.adjoint(&self.phi);
        self.phi.zip_map(&a, |x, y| 0.5 * (x - y))
    }

    // Building blocks, all as [k, i, j] components of a vector-valued
    // bilinear form evaluated on (∂_i, ∂_j).

    /// `η(Y)φX`
    fn eta_y_phi_x(&self, eta: &Vector, phi: &Matrix) -> Tensor3 {
        Tensor3::from_fn(self.n, |[k, i, j]| eta[[j]] * phi[[k, i]])
    }

    /// `η(X)φY`
    fn eta_x_phi_y(&self, eta: &Vector, phi: &Matrix) -> Tensor3 {
        Tensor3::from_fn(self.n, |[k, i, j]| eta[[i]] * phi[[k, j]])
    }

    /// `g(φX,Y)E`
    fn g_phi_x_y(&self, phi: &Matrix, e: &Vector) -> Tensor3 {
        let g = &self.g;
        Tensor3::from_fn(self.n, |[k, i, j]| (0..self.n).map(|m| g[[m, j]] * phi[[m, i]]).sum::<f64>() * e[[k]])
    }

    /// `η(X)Y`
    fn eta_x_y(&self, eta: &Vector) -> Tensor3 {
        Tensor3::from_fn(self.n, |[k, i, j]| if k == j { eta[[i]] } else { 0.0 })
    }

    /// `η(Y)X`
    fn eta_y_x(&self, eta: &Vector) -> Tensor3 {
        Tensor3::from_fn(self.n, |[k, i, j]| if k == i { eta[[j]] } else { 0.0 })
    }

    /// `g(X,Y)E`
    fn g_x_y(&self, e: &Vector) -> Tensor3 {
        Tensor3::from_fn(self.n, |[k, i, j]| self.g[[i, j]] * e[[k]])
    }

    /// `η(X)Y + η(Y)X − g(X,Y)E`
    fn brace(&self, name: &str) -> Tensor3 {
        let (eta, e) = (self.eta(name), self.sharp(name));
        self.eta_x_y(eta).add(&self.eta_y_x(eta)).sub(&self.g_x_y(e))
    }

    /// `c·η(X)g(Y,Z)` at `[i, j, k]` (X = ∂_i).
    fn recurrent(&self, c: f64, name: &str) -> Tensor3 {
        let eta = self.eta(name);
        Tensor3::from_fn(self.n, |[i, j, k]| c * eta[[i]] * self.g[[j, k]])
    }

    /// `c·{η(Y)g(X,Z) + η(Z)g(X,Y)}` at `[i, j, k]`.
    fn non_metric(&self, c: f64, name: &str) -> Tensor3 {
        let eta = self.eta(name);
        Tensor3::from_fn(self.n, |[i, j, k]| c * (eta[[j]] * self.g[[i, k]] + eta[[k]] * self.g[[i, j]]))
    }
}

/// `∇̃ − ∇` as displayed for `case`, at `[k, i, j]`.
fn reduced_deformation(case: &str, l: &Local, ctx: &PointContext) -> Result<Tensor3> {
    let u = l.eta("u");
    let uu = l.sharp("u");
    let (f1, f2) = (l.f1, l.f2);
    // u(Y)φX − g(φX,Y)U with φ self-adjoint
    let quarter_sym = || {
        let s = l.sym();
        l.eta_y_phi_x(u, &s).sub(&l.g_phi_x_y(&s, uu))
    };
    // −u(X)φY with φ skew
    let quarter_skew = || l.eta_x_phi_y(u, &l.skew()).scale(-1.0);
    // u(Y)X − g(X,Y)U
    let semi = || l.eta_y_x(u).sub(&l.g_x_y(uu));
    Ok(match case {
        "1" => {
            let (s, k) = (l.sym(), l.skew());
            l.eta_y_phi_x(u, &s).sub(&l.eta_x_phi_y(u, &k)).sub(&l.g_phi_x_y(&s, uu))
        }
        "2" => {
            let ricci = ricci_data(&ctx.jets.metric, &ctx.christoffel)?;
            let s = &ricci.s;
            l.eta_y_phi_x(u, &ricci.q)
                .sub(&Tensor3::from_fn(l.n, |[k, i, j]| s[[i, j]] * uu[[k]]))
        }
        "2a" => quarter_sym(),
        "3" => quarter_skew(),
        "4" => quarter_sym().sub(&l.brace("u1").scale(f1)),
        "5" => quarter_sym().sub(&l.brace("u")),
        "6" => quarter_skew().sub(&l.brace("u1").scale(f1)),
        "7" => quarter_skew().sub(&l.brace("u")),
        "8" => quarter_sym().sub(&l.g_x_y(l.sharp("u2")).scale(f2)),
        "9" => quarter_sym().sub(&l.g_x_y(uu).scale(f2)),
        "10" => quarter_skew().sub(&l.g_x_y(l.sharp("u2")).scale(f2)),
        "11" => quarter_skew().sub(&l.g_x_y(uu).scale(f2)),
        "12" => semi(),
        "13" => semi().sub(&l.brace("u1").scale(f1)),
        "13a" => semi().sub(&l.brace("u1")),
        "13b" => l.eta_x_y(u).scale(-1.0),
        "14" => semi().sub(&l.g_x_y(l.sharp("u2")).scale(f2)),
        "14a" => semi().add(&l.g_x_y(l.sharp("u2"))),
        "14b" => l.eta_y_x(u),
        "15" => l.brace("u1").scale(-f1).sub(&l.g_x_y(l.sharp("u2")).scale(f2)),
        "16" => l.brace("omega").scale(-0.5),
        "17" => {
            let w = l.eta("omega");
            l.eta_x_y(w).add(&l.eta_y_x(w))
        }
        other => return Err(Error::CaseUnknown(other.into())),
    })
}

/// Displayed `(∇̃_i g)_{jk}` for `case`.
fn stated_metricity(case: &str, l: &Local) -> Tensor3 {
    let (f1, f2) = (l.f1, l.f2);
    match case {
        "4" => l.recurrent(2.0 * f1, "u1"),
        "5" | "7" | "13b" => l.recurrent(2.0, "u"),
        "6" | "13" => l.recurrent(f1, "u1"),
        "13a" => l.recurrent(2.0, "u1"),
        "8" | "10" | "14" => l.non_metric(f2, "u2"),
        "9" | "11" => l.non_metric(f2, "u"),
        "14a" => l.non_metric(-1.0, "u2"),
        "14b" => l.non_metric(-1.0, "u"),
        "15" => l.recurrent(2.0 * f1, "u1").add(&l.non_metric(f2, "u2")),
        "16" => l.recurrent(1.0, "omega"),
        "17" => l.recurrent(-2.0, "omega").add(&l.non_metric(-1.0, "omega")),
        _ => Tensor3::zeros(l.n),
    }
}

/// Displayed torsion, where the case states one.
fn stated_torsion(case: &str, l: &Local, ctx: &PointContext) -> Result<Option<Tensor3>> {
    Ok(match case {
        "2" => {
            let q = ricci_data(&ctx.jets.metric, &ctx.christoffel)?.q;
            let u = l.eta("u");
            Some(l.eta_y_phi_x(u, &q).sub(&l.eta_x_phi_y(u, &q)))
        }
        "15" | "16" | "17" => Some(Tensor3::zeros(l.n)),
        _ => None,
    })
}

/// The reduced curvature of case 17 and its ingredients at one point.
#[derive(Clone, Debug)]
pub struct Case17Curvature {
    /// `R + s(X,Z)Y − s(Y,Z)X + (s(X,Y) − s(Y,X))Z` at `[l, i, j, k]`.
    pub reduced: Tensor4,
    /// `s_ij = (∇_iω)_j − ω_iω_j`.
    pub s: Matrix,
    /// `∂_iω_j − ∂_jω_i`.
    pub two_d_omega: Matrix,
}

pub fn case17_curvature(omega: &OneFormField, ctx: &PointContext) -> Result<Case17Curvature> {
    let n = ctx.dim();
    let wj = omega.jet(&ctx.jets.point);
    let w = wj.values();
    let nabla = cov_deriv_oneform(&wj.comp, &ctx.christoffel);
    let s = Matrix::from_fn(n, |[i, j]| nabla[[i, j]] - w[[i]] * w[[j]]);
    let r = riemann(&ctx.christoffel)?.r;
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let reduced = Tensor4::from_fn(n, |[l, i, j, k]| {
        r[[l, i, j, k]] + s[[i, k]] * d(l, j) - s[[j, k]] * d(l, i) + (s[[i, j]] - s[[j, i]]) * d(l, k)
    });
    let two_d_omega = Matrix::from_fn(n, |[i, j]| wj.comp[j].d1(i) - wj.comp[i].d1(j));
    Ok(Case17Curvature { reduced, s, two_d_omega })
}

/// Residuals of the case-17 curvature laws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureLawCheck {
    pub formula_vs_reduced: f64,
    pub reduced_vs_direct: f64,
    pub s_skew: f64,
}

/// Worst residual of every law over the sampled points.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseCheckResult {
    pub case: &'static str,
    pub points: usize,
    /// General `Γ̃` against the displayed reduced connection.
    pub connection: f64,
    /// General torsion law.
    pub torsion: f64,
    /// General `∇̃g` law.
    pub metricity: f64,
    /// Displayed torsion, where stated.
    pub stated_torsion: Option<f64>,
    /// Displayed `∇̃g` law.
    pub stated_metricity: f64,
    /// The displayed metricity is a known misprint and is not asserted.
    pub prose_deviation: bool,
    pub curvature: Option<CurvatureLawCheck>,
    pub pass: bool,
}

struct PointResult {
    connection: f64,
    torsion: f64,
    metricity: f64,
    stated_torsion: Option<f64>,
    stated_metricity: f64,
    curvature: Option<CurvatureLawCheck>,
}

fn verify_point(case: CaseId, spec: &ConnectionSpec, bindings: &Bindings, manifold: &Manifold, p: &Point) -> Result<PointResult> {
    let id = case.label();
    let ctx = PointContext::evaluate(&manifold.chart, &manifold.metric, spec, p)?;
    let gt = gamma_tilde(&ctx, &HScales::default());
    let local = Local::new(bindings, &ctx)?;
    let reduced = ctx.christoffel.gamma().add(&reduced_deformation(id, &local, &ctx)?);
    let direct_q = nonmetricity(&gt, &ctx).q;
    let direct_t = torsion(&gt).t;
    let curvature = if id == "17" {
        let omega = bindings.omega.as_ref().expect("case 17 binds omega");
        let c = case17_curvature(omega, &ctx)?;
        let formula = curvature_formula(&ctx, &FormulaOptions::default())?.total;
        let direct = curvature_direct(&ctx, &HScales::default())?;
        let skew = Matrix::from_fn(ctx.dim(), |[i, j]| c.s[[i, j]] - c.s[[j, i]]);
        Some(CurvatureLawCheck {
            formula_vs_reduced: normalized_residual(&formula, &c.reduced),
            reduced_vs_direct: normalized_residual(&c.reduced, &direct),
            s_skew: normalized_residual(&skew, &c.two_d_omega),
        })
    } else {
        None
    };
    Ok(PointResult {
        connection: normalized_residual(&gt.gamma, &reduced),
        torsion: check_torsion(&ctx, &gt).residual,
        metricity: check_nonmetricity(&ctx, &gt).residual,
        stated_torsion: stated_torsion(id, &local, &ctx)?.map(|t| normalized_residual(&direct_t, &t)),
        stated_metricity: normalized_residual(&direct_q, &stated_metricity(id, &local)),
        curvature,
    })
}

/// Checks every law of `case` at every point; failures are data, errors are
/// reserved for bad bindings and points outside the chart.
pub fn verify_case(
    case: CaseId,
    bindings: &Bindings,
    manifold: &Manifold,
    points: &[Point],
    tol: &Tolerances,
) -> Result<CaseCheckResult> {
    let spec = build_case(case, bindings, manifold)?;
    let results: Vec<PointResult> = points
        .par_iter()
        .map(|p| verify_point(case, &spec, bindings, manifold, p))
        .collect::<Result<_>>()?;
    let mx = |f: &dyn Fn(&PointResult) -> f64| results.iter().map(f).fold(0.0, nan_max);
    let preset = case.preset();
    let stated_torsion = preset
        .checks()
        .contains(&"stated_torsion")
        .then(|| mx(&|r| r.stated_torsion.unwrap_or(0.0)));
    let curvature = (preset.id == "17").then(|| CurvatureLawCheck {
        formula_vs_reduced: mx(&|r| r.curvature.map_or(0.0, |c| c.formula_vs_reduced)),
        reduced_vs_direct: mx(&|r| r.curvature.map_or(0.0, |c| c.reduced_vs_direct)),
        s_skew: mx(&|r| r.curvature.map_or(0.0, |c| c.s_skew)),
    });
    let mut result = CaseCheckResult {
        case: preset.id,
        points: points.len(),
        connection: mx(&|r| r.connection),
        torsion: mx(&|r| r.torsion),
        metricity: mx(&|r| r.metricity),
        stated_torsion,
        stated_metricity: mx(&|r| r.stated_metricity),
        prose_deviation: preset.prose_deviation,
        curvature,
        pass: false,
    };
    let ok = |r: f64, t: f64| r <= t;
    result.pass = ok(result.connection, tol.identity)
        && ok(result.torsion, tol.identity)
        && ok(result.metricity, tol.identity)
        && result.stated_torsion.is_none_or(|r| ok(r, tol.identity))
        && (result.prose_deviation || ok(result.stated_metricity, tol.identity))
        && result.curvature.is_none_or(|c| {
            ok(c.formula_vs_reduced, tol.identity) && ok(c.reduced_vs_direct, tol.curvature) && ok(c.s_skew, tol.exact)
        });
    Ok(result)
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::preset_manifold;
    use crate::tensor::multi_indices;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn id(s: &str) -> CaseId {
        s.parse().unwrap()
    }

    fn x1_dx2() -> OneFormField {
        OneFormField::polynomial(vec![PolynomialExpr::zero(2), PolynomialExpr::linear(2, 0, 1.0)]).unwrap()
    }

    #[test]
    fn catalogue_ids_are_unique_and_cover_all_cases() {
        let cat = case_catalogue();
        assert_eq!(cat.len(), 22);
        for (a, c) in cat.iter().enumerate() {
            assert!(cat[a + 1..].iter().all(|d| d.id != c.id));
        }
        let mut numbers: Vec<u8> = cat.iter().map(|c| c.number).collect();
        numbers.dedup();
        assert_eq!(numbers, (1..=17).collect::<Vec<_>>());
        assert!(matches!("18".parse::<CaseId>(), Err(Error::CaseUnknown(_))));
    }

    #[test]
    fn case16_fixed_values() {
        let c = id("16").preset();
        assert_eq!(c.f1, ScalarRule::Const(0.5));
        assert_eq!(c.f2, ScalarRule::Const(0.0));
        assert_eq!(c.u, FormRule::Zero);
        assert_eq!(c.required_bindings(), vec!["omega"]);
        assert!(c.fixed_values().contains(&"u1 = omega".to_string()));
    }

    #[test]
    fn case12_builds_expected_spec() {
        let m = preset_manifold("euclidean", &[2.0]).unwrap();
        let spec = build_case(id("12"), &Bindings::new().form("u", x1_dx2()), &m).unwrap();
        assert!(spec.f1.is_zero() && spec.f2.is_zero());
        assert_eq!(*spec.phi, EndoField::Identity { dim: 2 });
        assert_eq!(*spec.u, x1_dx2());
    }

    #[test]
    fn binding_errors() {
        let m = preset_manifold("euclidean", &[2.0]).unwrap();
        let e = build_case(id("12"), &Bindings::new(), &m).unwrap_err();
        assert_eq!(
            e,
            Error::MissingBinding {
                case: "12".into(),
                binding: "u".into()
            }
        );
        let b = Bindings::new().form("u", x1_dx2()).form("u1", x1_dx2());
        assert!(matches!(build_case(id("12"), &b, &m), Err(Error::ExtraBinding { .. })));
        let b3 = Bindings::new().form("u", OneFormField::zero(3));
        assert!(matches!(build_case(id("12"), &b3, &m), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn tied_bindings_share_one_field() {
        let m = preset_manifold("euclidean", &[2.0]).unwrap();
        let b = Bindings::new().form("u", x1_dx2()).phi(EndoField::Identity { dim: 2 });
        for c in ["5", "7"] {
            let spec = build_case(id(c), &b, &m).unwrap();
            assert!(Arc::ptr_eq(&spec.u, &spec.u1));
            let p = Point::new(vec![0.3, -0.7]);
            assert_eq!(spec.u.jet(&p).values(), spec.u1.jet(&p).values());
        }
        let w = Bindings::new().form("omega", x1_dx2());
        let spec = build_case(id("17"), &w, &m).unwrap();
        assert!(Arc::ptr_eq(&spec.u1, &spec.u2));
    }

    #[test]
    fn case2_on_unit_sphere_has_identity_ricci_operator() {
        let m = preset_manifold("sphere2", &[1.0]).unwrap();
        let b = Bindings::random(id("2"), 2, &mut ChaCha8Rng::seed_from_u64(1));
        let spec = build_case(id("2"), &b, &m).unwrap();
        let ctx = PointContext::evaluate(&m.chart, &m.metric, &spec, &Point::new(vec![1.1, 0.4])).unwrap();
        let q = ctx.jets.phi.values();
        assert!(normalized_residual(&q, &Matrix::identity(2)) < 1e-9);
        assert!(ctx.jets.phi.d1().max_abs() < 1e-9);
    }

    #[test]
    fn e1_case12_checks() {
        let m = preset_manifold("euclidean", &[2.0]).unwrap();
        let b = Bindings::new().form("u", x1_dx2());
        let r = verify_case(id("12"), &b, &m, &[Point::new(vec![1.0, 0.0])], &Tolerances::default()).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.connection < 1e-12);
        assert!(r.stated_metricity < 1e-12);
    }

    #[test]
    fn case13b_cancellation() {
        // u(Y)X − g(X,Y)U − {u(X)Y + u(Y)X − g(X,Y)U} = −u(X)Y
        let m = preset_manifold("bumpy", &[3.0, 0.2, 1.0]).unwrap();
        let b = Bindings::random(id("13b"), 3, &mut ChaCha8Rng::seed_from_u64(9));
        let spec = build_case(id("13b"), &b, &m).unwrap();
        for p in m.chart.sample_points(10, 3) {
            let ctx = PointContext::evaluate(&m.chart, &m.metric, &spec, &p).unwrap();
            let h = crate::connection::deformation_h(&ctx, &HScales::default());
            let u = ctx.jets.u.values();
            for [k, i, j] in multi_indices::<3>(3) {
                let expect = if k == j { -u[[i]] } else { 0.0 };
                assert!((h[[k, i, j]] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn case16_is_weyl() {
        let m = preset_manifold("half_plane", &[1.0]).unwrap();
        let b = Bindings::random(id("16"), 2, &mut ChaCha8Rng::seed_from_u64(4));
        let pts = m.chart.sample_points(10, 4);
        let r = verify_case(id("16"), &b, &m, &pts, &Tolerances::default()).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.stated_metricity < 1e-10);
        assert!(r.stated_torsion.unwrap() < 1e-10);
    }

    #[test]
    fn case14b_agashe_chafle_form() {
        let m = preset_manifold("sphere2", &[1.0]).unwrap();
        let b = Bindings::random(id("14b"), 2, &mut ChaCha8Rng::seed_from_u64(5));
        let r = verify_case(id("14b"), &b, &m, &m.chart.sample_points(10, 5), &Tolerances::default()).unwrap();
        assert!(r.pass && r.connection < 1e-10 && r.stated_metricity < 1e-10, "{r:?}");
    }

    #[test]
    fn stated_coefficient_deviation_is_reported_not_asserted() {
        let m = preset_manifold("euclidean", &[2.0]).unwrap();
        let pts = m.chart.sample_points(5, 6);
        for c in ["6", "13"] {
            let b = Bindings::random(id(c), 2, &mut ChaCha8Rng::seed_from_u64(6));
            let r = verify_case(id(c), &b, &m, &pts, &Tolerances::default()).unwrap();
            assert!(r.prose_deviation);
            assert!(r.stated_metricity > 1e-3);
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn case17_curvature_laws() {
        let m = preset_manifold("bumpy", &[2.0, 0.2, 3.0]).unwrap();
        let b = Bindings::random(id("17"), 2, &mut ChaCha8Rng::seed_from_u64(7));
        let r = verify_case(id("17"), &b, &m, &m.chart.sample_points(10, 7), &Tolerances::default()).unwrap();
        assert!(r.pass, "{r:?}");
        let c = r.curvature.unwrap();
        assert!(c.formula_vs_reduced < 1e-10 && c.reduced_vs_direct < 1e-8 && c.s_skew < 1e-12);
    }
}
