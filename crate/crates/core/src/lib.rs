//! Unified affine connections on coordinate charts.
//!
//! Given a Riemannian metric `g`, two functions `f₁, f₂`, three one-forms
//! `u, u₁, u₂`, and a (1,1) tensor `φ`, this crate builds the connection
//!
//! ```text
//! ∇̃_X Y = ∇_X Y + u(Y)φ₁X − u(X)φ₂Y − g(φ₁X,Y)U
//!         − f₁{u₁(X)Y + u₁(Y)X − g(X,Y)U₁} − f₂ g(X,Y)U₂
//! ```
//!
//! evaluates its torsion, non-metricity, and curvature with exact jets, and
//! checks every closed-form identity against a direct computation.
//!
//! ```
//! use uniconn::prelude::*;
//!
//! let m = preset_manifold("sphere2", &[1.0]).unwrap();
//! let spec = ConnectionSpec::random(2, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
//! let ctx = PointContext::evaluate(&m.chart, &m.metric, &spec, &Point::new(vec![1.0, 0.5])).unwrap();
//! let gt = gamma_tilde(&ctx, &HScales::default());
//! assert!(check_torsion(&ctx, &gt).residual < 1e-10);
//! assert!(check_nonmetricity(&ctx, &gt).residual < 1e-10);
//! ```

pub mod cases;
pub mod connection;
pub mod curvature;
pub mod error;
pub mod fields;
pub mod jet;
pub mod levi_civita;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/connection.md")]
    mod connection {}
    #[doc = include_str!("../../../book/src/curvature.md")]
    mod curvature {}
    #[doc = include_str!("../../../book/src/cases.md")]
    mod cases {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

pub mod prelude {
    pub use crate::cases::{build_case, case_catalogue, verify_case, Bindings, CaseId};
    pub use crate::connection::{
        check_nonmetricity, check_torsion, gamma_tilde, ConnectionSpec, HScales, HTerm, PointContext,
    };
    pub use crate::curvature::{curvature_direct, curvature_formula, FormulaOptions, TermGroup};
    pub use crate::fields::{preset_manifold, Chart, Manifold, Point, PolynomialExpr, Preset};
    pub use crate::tensor::{Matrix, Tensor3, Tensor4, Vector};
    pub use rand::SeedableRng;
}
