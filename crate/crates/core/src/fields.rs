//! Coordinate charts, smooth fields, and their exact jets.
//!
//! Every field in this module evaluates to [`Jet`]s: polynomial fields through
//! exact Taylor expansion, the closed-form preset metrics through jet
//! arithmetic on `sin` and reciprocals. Nothing is finite-differenced.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::connection::ConnectionSpec;
use crate::error::{Error, Result};
use crate::jet::{Jet, MAX_ORDER, MAX_VARS};
use crate::levi_civita;
use crate::tensor::{Matrix, Tensor3, Tensor4, Vector};

/// Order of the jets supplied by non-metric fields.
pub const FIELD_ORDER: usize = 1;

/// Positive-definiteness threshold: `λ_min > SPD_RATIO · λ_max`.
pub const SPD_RATIO: f64 = 1e-10;

/// An axis-aligned coordinate box in `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Chart {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Chart> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidChart(format!(
                "{} lower bounds but {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        let n = lower.len();
        if !(2..=MAX_VARS).contains(&n) {
            return Err(Error::DimensionUnsupported(n));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidChart(format!(
                    "coordinate {i} has empty range [{lo}, {hi}]"
                )));
            }
        }
        Ok(Chart { lower, upper })
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Chart> {
        Chart::new(vec![lo; n], vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.coords.len() == self.dim()
            && p
                .coords
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    /// Uniform sample of the domain.
    pub fn sample(&self, rng: &mut impl Rng) -> Point {
        Point::new(
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(&lo, &hi)| rng.gen_range(lo..=hi))
                .collect(),
        )
    }

    /// `count` points drawn from a ChaCha stream seeded with `seed`.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample(&mut rng)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Point {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl From<&[f64]> for Point {
    fn from(c: &[f64]) -> Point {
        Point::new(c.to_vec())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

/// A real polynomial in the chart coordinates, kept in canonical form:
/// terms sorted by exponent tuple, duplicates merged, zero terms dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialExpr {
    nvars: usize,
    terms: Vec<Monomial>,
}

impl PolynomialExpr {
    pub fn new(nvars: usize, terms: impl IntoIterator<Item = (f64, Vec<u32>)>) -> Result<Self> {
        let mut out: Vec<Monomial> = Vec::new();
        for (coeff, exponents) in terms {
            if exponents.len() != nvars {
                return Err(Error::DimensionMismatch {
                    what: "monomial exponent tuple".into(),
                    expected: nvars,
                    found: exponents.len(),
                });
            }
            out.push(Monomial { coeff, exponents });
        }
        Ok(Self::canonical(nvars, out))
    }

    fn canonical(nvars: usize, mut terms: Vec<Monomial>) -> Self {
        terms.sort_by(|a, b| a.exponents.cmp(&b.exponents));
        let mut merged: Vec<Monomial> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.exponents == t.exponents => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        PolynomialExpr {
            nvars,
            terms: merged,
        }
    }

    pub fn zero(nvars: usize) -> Self {
        PolynomialExpr {
            nvars,
            terms: Vec::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::canonical(
            nvars,
            vec![Monomial {
                coeff: c,
                exponents: vec![0; nvars],
            }],
        )
    }

    /// `c · x_var`.
    pub fn linear(nvars: usize, var: usize, c: f64) -> Self {
        let mut e = vec![0; nvars];
        e[var] = 1;
        Self::canonical(
            nvars,
            vec![Monomial {
                coeff: c,
                exponents: e,
            }],
        )
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.exponents.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.exponents
                    .iter()
                    .zip(x)
                    .fold(t.coeff, |acc, (&e, &xi)| acc * xi.powi(e as i32))
            })
            .sum()
    }

    /// Exact partial derivative with respect to `x_var`.
    pub fn derivative(&self, var: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.exponents[var] > 0)
            .map(|t| {
                let mut e = t.exponents.clone();
                let k = e[var];
                e[var] -= 1;
                Monomial {
                    coeff: t.coeff * k as f64,
                    exponents: e,
                }
            })
            .collect();
        Self::canonical(self.nvars, terms)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::canonical(
            self.nvars,
            self.terms
                .iter()
                .map(|t| Monomial {
                    coeff: t.coeff * s,
                    exponents: t.exponents.clone(),
                })
                .collect(),
        )
    }

    pub fn l1_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    /// Taylor jet of the polynomial at `x`.
    pub fn jet(&self, x: &[f64], order: usize) -> Jet {
        let n = self.nvars;
        let vars: Vec<Jet> = (0..n).map(|v| Jet::variable(n, order, v, x[v])).collect();
        let mut acc = Jet::zero(n).truncate(order);
        for t in &self.terms {
            let mut m = Jet::constant(n, t.coeff);
            for (v, &e) in t.exponents.iter().enumerate() {
                if e > 0 {
                    m *= vars[v].powi(e as i32);
                }
            }
            acc += m;
        }
        acc
    }

    /// Between one and four terms of total degree ≤ 3, coefficients in [−1, 1].
    pub fn random(nvars: usize, rng: &mut impl Rng) -> Self {
        let count = rng.gen_range(1..=4);
        let terms = (0..count)
            .map(|_| {
                let degree = rng.gen_range(0..=3u32);
                let mut e = vec![0u32; nvars];
                for _ in 0..degree {
                    e[rng.gen_range(0..nvars)] += 1;
                }
                Monomial {
                    coeff: rng.gen_range(-1.0..=1.0),
                    exponents: e,
                }
            })
            .collect();
        Self::canonical(nvars, terms)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScalarField {
    Constant { dim: usize, value: f64 },
    Polynomial(PolynomialExpr),
}

impl ScalarField {
    pub fn zero(dim: usize) -> Self {
        ScalarField::Constant { dim, value: 0.0 }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        ScalarField::Constant { dim, value }
    }

    pub fn dim(&self) -> usize {
        match self {
            ScalarField::Constant { dim, .. } => *dim,
            ScalarField::Polynomial(p) => p.nvars(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ScalarField::Constant { value, .. } => *value == 0.0,
            ScalarField::Polynomial(p) => p.is_zero(),
        }
    }

    pub fn jet(&self, p: &Point) -> ScalarFieldJet {
        let n = self.dim();
        let jet = match self {
            ScalarField::Constant { value, .. } => Jet::constant(n, *value),
            ScalarField::Polynomial(poly) => poly.jet(&p.coords, FIELD_ORDER),
        };
        ScalarFieldJet {
            jet: jet.truncate(FIELD_ORDER),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OneFormField {
    Zero { dim: usize },
    Polynomial(Vec<PolynomialExpr>),
}

impl OneFormField {
    pub fn zero(dim: usize) -> Self {
        OneFormField::Zero { dim }
    }

    /// A one-form from its components `η_i`.
    pub fn polynomial(components: Vec<PolynomialExpr>) -> Result<Self> {
        let n = components.len();
        for c in &components {
            check_dim("one-form component", n, c.nvars())?;
        }
        Ok(OneFormField::Polynomial(components))
    }

    pub fn dim(&self) -> usize {
        match self {
            OneFormField::Zero { dim } => *dim,
            OneFormField::Polynomial(c) => c.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            OneFormField::Zero { .. } => true,
            OneFormField::Polynomial(c) => c.iter().all(PolynomialExpr::is_zero),
        }
    }

    pub fn jet(&self, p: &Point) -> OneFormFieldJet {
        let n = self.dim();
        let comp = match self {
            OneFormField::Zero { .. } => vec![Jet::zero(n).truncate(FIELD_ORDER); n],
            OneFormField::Polynomial(c) => c.iter().map(|e| e.jet(&p.coords, FIELD_ORDER)).collect(),
        };
        OneFormFieldJet { comp }
    }

    /// `df` for a polynomial `f`.
    pub fn exact(f: &PolynomialExpr) -> Self {
        OneFormField::Polynomial((0..f.nvars()).map(|v| f.derivative(v)).collect())
    }

    pub fn random(dim: usize, rng: &mut impl Rng) -> Self {
        OneFormField::Polynomial((0..dim).map(|_| PolynomialExpr::random(dim, rng)).collect())
    }
}

/// A (1,1) tensor field. Polynomial components are stored row-major with
/// the upper index first: entry `[k * n + i]` is `φ^k_i`.
#[derive(Clone, Debug, PartialEq)]
pub enum EndoField {
    Zero { dim: usize },
    Identity { dim: usize },
    Polynomial { dim: usize, entries: Vec<PolynomialExpr> },
    /// The Ricci operator `Q = g⁻¹S` of the ambient metric.
    RicciOperator { dim: usize },
    /// The g-self-adjoint part `g⁻¹ sym(g φ)` of another field.
    MetricSymmetricPart(Arc<EndoField>),
    /// The g-skew part `g⁻¹ skew(g φ)` of another field.
    MetricSkewPart(Arc<EndoField>),
}

impl EndoField {
    pub fn polynomial(rows: Vec<Vec<PolynomialExpr>>) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            check_dim("endomorphism row", n, row.len())?;
            for e in row {
                check_dim("endomorphism entry", n, e.nvars())?;
                entries.push(e);
            }
        }
        Ok(EndoField::Polynomial { dim: n, entries })
    }

    pub fn dim(&self) -> usize {
        match self {
            EndoField::Zero { dim }
            | EndoField::Identity { dim }
            | EndoField::Polynomial { dim, .. }
            | EndoField::RicciOperator { dim } => *dim,
            EndoField::MetricSymmetricPart(inner) | EndoField::MetricSkewPart(inner) => inner.dim(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            EndoField::Zero { .. } => true,
            EndoField::Polynomial { entries, .. } => entries.iter().all(PolynomialExpr::is_zero),
            _ => false,
        }
    }

    /// Metric order this field needs to produce a first-order jet.
    pub fn required_metric_order(&self) -> usize {
        match self {
            EndoField::RicciOperator { .. } => 3,
            EndoField::MetricSymmetricPart(inner) | EndoField::MetricSkewPart(inner) => {
                inner.required_metric_order().max(1)
            }
            _ => 0,
        }
    }

    pub fn jet(&self, p: &Point, metric: &MetricFieldJet) -> Result<EndoFieldJet> {
        let n = self.dim();
        let comp = match self {
            EndoField::Zero { .. } => vec![Jet::zero(n).truncate(FIELD_ORDER); n * n],
            EndoField::Identity { .. } => (0..n * n)
                .map(|f| Jet::constant(n, if f / n == f % n { 1.0 } else { 0.0 }).truncate(FIELD_ORDER))
                .collect(),
            EndoField::Polynomial { entries, .. } => entries
                .iter()
                .map(|e| e.jet(&p.coords, FIELD_ORDER))
                .collect(),
            EndoField::RicciOperator { .. } => {
                if metric.order() < 3 {
                    return Err(Error::JetOrderUnsupported {
                        field: "Ricci operator (needs metric order 3)".into(),
                        requested: FIELD_ORDER,
                        available: metric.order().saturating_sub(2),
                    });
                }
                let q = levi_civita::ricci_operator_jets(metric)?;
                q.into_iter().map(|j| j.truncate(FIELD_ORDER)).collect()
            }
            EndoField::MetricSymmetricPart(inner) | EndoField::MetricSkewPart(inner) => {
                let sign = if matches!(self, EndoField::MetricSymmetricPart(_)) {
                    1.0
                } else {
                    -1.0
                };
                let phi = inner.jet(p, metric)?;
                let ginv = levi_civita::inverse_metric(metric)?;
                // Φ_ij = g_mj φ^m_i, then raise the (anti)symmetrized form
                let big = |i: usize, j: usize| -> Jet {
                    (0..n).map(|m| *metric.jet(m, j) * phi.comp[m * n + i]).sum()
                };
                let mut part = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        part.push((big(i, j) + big(j, i) * sign) * 0.5);
                    }
                }
                let mut out = Vec::with_capacity(n * n);
                for k in 0..n {
                    for i in 0..n {
                        let s: Jet = (0..n).map(|m| *ginv.jet(k, m) * part[i * n + m]).sum();
                        out.push(s.truncate(FIELD_ORDER));
                    }
                }
                out
            }
        };
        Ok(EndoFieldJet { dim: n, comp })
    }

    pub fn random(dim: usize, rng: &mut impl Rng) -> Self {
        EndoField::Polynomial {
            dim,
            entries: (0..dim * dim).map(|_| PolynomialExpr::random(dim, rng)).collect(),
        }
    }
}

/// A Riemannian metric given in closed form or by polynomial components.
#[derive(Clone, Debug, PartialEq)]
pub enum MetricField {
    Euclidean { dim: usize },
    /// `r²(dθ² + sin²θ dφ²)` in coordinates `(θ, φ)`.
    Sphere2 { radius: f64 },
    /// `(k/y)²(dx² + dy²)`; sectional curvature `−1/k²`.
    HalfPlane { scale: f64 },
    /// Row-major symmetric polynomial components.
    Polynomial { dim: usize, entries: Vec<PolynomialExpr> },
}

impl MetricField {
    /// Reads the upper triangle (`i ≤ j`) of `rows` and mirrors it.
    pub fn polynomial_upper(rows: Vec<Vec<PolynomialExpr>>) -> Result<Self> {
        let n = rows.len();
        for row in &rows {
            check_dim("metric row", n, row.len())?;
            for e in row {
                check_dim("metric entry", n, e.nvars())?;
            }
        }
        let entries = (0..n * n)
            .map(|f| {
                let (i, j) = (f / n, f % n);
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                rows[a][b].clone()
            })
            .collect();
        Ok(MetricField::Polynomial { dim: n, entries })
    }

    pub fn dim(&self) -> usize {
        match self {
            MetricField::Euclidean { dim } | MetricField::Polynomial { dim, .. } => *dim,
            MetricField::Sphere2 { .. } | MetricField::HalfPlane { .. } => 2,
        }
    }

    /// Jets of `g_ij` at `p`, checked for positive definiteness.
    pub fn jet(&self, p: &Point, order: usize) -> Result<MetricFieldJet> {
        if order > MAX_ORDER {
            return Err(Error::JetOrderUnsupported {
                field: "metric".into(),
                requested: order,
                available: MAX_ORDER,
            });
        }
        let n = self.dim();
        check_dim("point", n, p.dim())?;
        let x = &p.coords;
        let zero = Jet::zero(n).truncate(order);
        let mut comp = vec![zero; n * n];
        match self {
            MetricField::Euclidean { .. } => {
                for i in 0..n {
                    comp[i * n + i] = Jet::constant(n, 1.0).truncate(order);
                }
            }
            MetricField::Sphere2 { radius } => {
                let r2 = radius * radius;
                let s = Jet::variable(2, order, 0, x[0]).sin();
                comp[0] = Jet::constant(2, r2).truncate(order);
                comp[3] = s * s * r2;
            }
            MetricField::HalfPlane { scale } => {
                let y = Jet::variable(2, order, 1, x[1]);
                let c = y.powi(-2) * (scale * scale);
                comp[0] = c;
                comp[3] = c;
            }
            MetricField::Polynomial { entries, .. } => {
                for i in 0..n {
                    for j in i..n {
                        let e = entries[i * n + j].jet(x, order);
                        comp[i * n + j] = e;
                        comp[j * n + i] = e;
                    }
                }
            }
        }
        let mj = MetricFieldJet { dim: n, comp };
        mj.check_positive_definite(p)?;
        Ok(mj)
    }
}

fn check_dim(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what: what.into(),
            expected,
            found,
        });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ScalarFieldJet {
    pub jet: Jet,
}

impl ScalarFieldJet {
    pub fn value(&self) -> f64 {
        self.jet.value()
    }

    pub fn grad(&self) -> Vector {
        Vector::from_vec(self.jet.gradient())
    }
}

#[derive(Clone, Debug)]
pub struct OneFormFieldJet {
    pub comp: Vec<Jet>,
}

impl OneFormFieldJet {
    pub fn dim(&self) -> usize {
        self.comp.len()
    }

    /// Components `η_i`.
    pub fn values(&self) -> Vector {
        Vector::from_vec(self.comp.iter().map(Jet::value).collect())
    }

    /// `[i, a] = ∂_a η_i`.
    pub fn d1(&self) -> Matrix {
        Matrix::from_fn(self.dim(), |[i, a]| self.comp[i].d1(a))
    }
}

#[derive(Clone, Debug)]
pub struct EndoFieldJet {
    dim: usize,
    pub comp: Vec<Jet>,
}

impl EndoFieldJet {
    pub fn from_jets(dim: usize, comp: Vec<Jet>) -> Self {
        assert_eq!(comp.len(), dim * dim);
        EndoFieldJet { dim, comp }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jet(&self, k: usize, i: usize) -> &Jet {
        &self.comp[k * self.dim + i]
    }

    /// `[k, i] = φ^k_i`.
    pub fn values(&self) -> Matrix {
        Matrix::from_fn(self.dim, |[k, i]| self.jet(k, i).value())
    }

    /// `[k, i, a] = ∂_a φ^k_i`.
    pub fn d1(&self) -> Tensor3 {
        Tensor3::from_fn(self.dim, |[k, i, a]| self.jet(k, i).d1(a))
    }
}

#[derive(Clone, Debug)]
pub struct MetricFieldJet {
    dim: usize,
    comp: Vec<Jet>,
}

impl MetricFieldJet {
    pub fn from_jets(dim: usize, comp: Vec<Jet>) -> Self {
        assert_eq!(comp.len(), dim * dim);
        MetricFieldJet { dim, comp }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.comp.iter().map(Jet::order).min().unwrap_or(0)
    }

    pub fn jet(&self, i: usize, j: usize) -> &Jet {
        &self.comp[i * self.dim + j]
    }

    pub fn jets(&self) -> &[Jet] {
        &self.comp
    }

    /// `g_ij`.
    pub fn values(&self) -> Matrix {
        Matrix::from_fn(self.dim, |[i, j]| self.jet(i, j).value())
    }

    /// `[i, j, a] = ∂_a g_ij`.
    pub fn d1(&self) -> Tensor3 {
        Tensor3::from_fn(self.dim, |[i, j, a]| self.jet(i, j).partial_value(&[a]))
    }

    /// `[i, j, a, b] = ∂_a ∂_b g_ij`.
    pub fn d2(&self) -> Tensor4 {
        Tensor4::from_fn(self.dim, |[i, j, a, b]| self.jet(i, j).partial_value(&[a, b]))
    }

    /// `∂_a ∂_b ∂_c g_ij`.
    pub fn d3(&self, i: usize, j: usize, a: usize, b: usize, c: usize) -> f64 {
        self.jet(i, j).partial_value(&[a, b, c])
    }

    fn check_positive_definite(&self, p: &Point) -> Result<()> {
        let g = self.values();
        let m = DMatrix::from_fn(self.dim, self.dim, |i, j| g[[i, j]]);
        let eig = SymmetricEigen::new(m).eigenvalues;
        let min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_eig = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(min_eig > 0.0 && min_eig > SPD_RATIO * max_eig) {
            return Err(Error::MetricNotPositiveDefinite {
                point: p.coords.clone(),
                min_eig,
                max_eig,
            });
        }
        Ok(())
    }
}

/// Every jet needed to evaluate a connection at one point.
#[derive(Clone, Debug)]
pub struct PointJets {
    pub point: Point,
    pub metric: MetricFieldJet,
    pub f1: ScalarFieldJet,
    pub f2: ScalarFieldJet,
    pub u: OneFormFieldJet,
    pub u1: OneFormFieldJet,
    pub u2: OneFormFieldJet,
    pub phi: EndoFieldJet,
}

/// Evaluates the metric to `metric_order` and every connection field to
/// first order at `p`.
pub fn evaluate_jets(
    chart: &Chart,
    metric: &MetricField,
    spec: &ConnectionSpec,
    p: &Point,
    metric_order: usize,
) -> Result<PointJets> {
    let n = chart.dim();
    check_dim("metric", n, metric.dim())?;
    check_dim("connection spec", n, spec.dim())?;
    check_dim("point", n, p.dim())?;
    if !(1..=MAX_ORDER).contains(&metric_order) {
        return Err(Error::JetOrderUnsupported {
            field: "metric".into(),
            requested: metric_order,
            available: MAX_ORDER,
        });
    }
    if !chart.contains(p) {
        return Err(Error::PointOutsideDomain {
            point: p.coords.clone(),
        });
    }
    let need = spec.phi.required_metric_order();
    if need > metric_order {
        return Err(Error::JetOrderUnsupported {
            field: "phi".into(),
            requested: need,
            available: metric_order,
        });
    }
    let mj = metric.jet(p, metric_order)?;
    let phi = spec.phi.jet(p, &mj)?;
    Ok(PointJets {
        point: p.clone(),
        f1: spec.f1.jet(p),
        f2: spec.f2.jet(p),
        u: spec.u.jet(p),
        u1: spec.u1.jet(p),
        u2: spec.u2.jet(p),
        phi,
        metric: mj,
    })
}

/// Named test manifolds.
#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    Euclidean { dim: usize },
    Sphere2 { radius: f64 },
    HalfPlane { scale: f64 },
    /// `δ + ε·P` with `P` a seeded symmetric polynomial perturbation.
    Bumpy { dim: usize, eps: f64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifold {
    pub name: String,
    pub chart: Chart,
    pub metric: MetricField,
}

impl Preset {
    pub fn from_name(name: &str, params: &[f64]) -> Result<Preset> {
        let param = |i: usize, what: &str| {
            params
                .get(i)
                .copied()
                .ok_or_else(|| Error::BadParams(format!("{name} needs parameter `{what}`")))
        };
        let as_dim = |x: f64| -> Result<usize> {
            if x.fract() == 0.0 && x >= 0.0 {
                Ok(x as usize)
            } else {
                Err(Error::BadParams(format!("dimension must be an integer, got {x}")))
            }
        };
        Ok(match name {
            "euclidean" => Preset::Euclidean {
                dim: as_dim(param(0, "n")?)?,
            },
            "sphere2" => Preset::Sphere2 {
                radius: param(0, "r")?,
            },
            "half_plane" => Preset::HalfPlane {
                scale: param(0, "k")?,
            },
            "bumpy" => Preset::Bumpy {
                dim: as_dim(param(0, "n")?)?,
                eps: param(1, "eps")?,
                seed: param(2, "seed")? as u64,
            },
            other => return Err(Error::UnknownPreset(other.into())),
        })
    }

    pub fn build(&self) -> Result<Manifold> {
        match *self {
            Preset::Euclidean { dim } => Ok(Manifold {
                name: format!("euclidean({dim})"),
                chart: Chart::cube(dim, -2.0, 2.0)?,
                metric: MetricField::Euclidean { dim },
            }),
            Preset::Sphere2 { radius } => {
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(Error::BadParams(format!("sphere radius must be > 0, got {radius}")));
                }
                Ok(Manifold {
                    name: format!("sphere2({radius})"),
                    chart: Chart::new(
                        vec![0.3, -std::f64::consts::PI],
                        vec![std::f64::consts::PI - 0.3, std::f64::consts::PI],
                    )?,
                    metric: MetricField::Sphere2 { radius },
                })
            }
            Preset::HalfPlane { scale } => {
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(Error::BadParams(format!("half-plane scale must be > 0, got {scale}")));
                }
                Ok(Manifold {
                    name: format!("half_plane({scale})"),
                    chart: Chart::new(vec![-2.0, 0.5], vec![2.0, 5.0])?,
                    metric: MetricField::HalfPlane { scale },
                })
            }
            Preset::Bumpy { dim, eps, seed } => {
                let chart = Chart::cube(dim, -1.0, 1.0)?;
                // |P_ij| ≤ 1 on the unit cube, so Gershgorin gives λ_min ≥ 1 − ε·n
                if !(eps.is_finite() && eps >= 0.0 && eps * (dim as f64) < 1.0) {
                    return Err(Error::BadParams(format!(
                        "bumpy eps must satisfy 0 <= eps < 1/n = {}, got {eps}",
                        1.0 / dim as f64
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut rows = vec![vec![PolynomialExpr::zero(dim); dim]; dim];
                for (i, row) in rows.iter_mut().enumerate() {
                    for (j, slot) in row.iter_mut().enumerate().skip(i) {
                        let p = PolynomialExpr::random(dim, &mut rng);
                        let norm = p.l1_norm();
                        let p = if norm > 0.0 { p.scale(eps / norm) } else { p };
                        let delta = if i == j { 1.0 } else { 0.0 };
                        *slot = PolynomialExpr::new(
                            dim,
                            p.terms()
                                .iter()
                                .map(|t| (t.coeff, t.exponents.clone()))
                                .chain(std::iter::once((delta, vec![0; dim]))),
                        )?;
                    }
                }
                Ok(Manifold {
                    name: format!("bumpy({dim}, {eps}, {seed})"),
                    chart,
                    metric: MetricField::polynomial_upper(rows)?,
                })
            }
        }
    }
}

/// Builds a preset chart and metric.
pub fn preset_manifold(name: &str, params: &[f64]) -> Result<Manifold> {
    Preset::from_name(name, params)?.build()
}
