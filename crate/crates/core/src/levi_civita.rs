//! Levi-Civita machinery: inverse metric, Christoffel symbols, Riemann and
//! Ricci tensors, and covariant derivatives of one-forms, vectors, and
//! endomorphisms.
//!
//! Index conventions, fixed once for the whole crate:
//!
//! * `∇_{∂_i} ∂_j = Γ^k_{ij} ∂_k`, stored at `[k, i, j]`;
//! * `R(∂_i, ∂_j) ∂_k = R^l_{ijk} ∂_l`, stored at `[l, i, j, k]`, with
//!   `R^l_{ijk} = ∂_i Γ^l_{jk} − ∂_j Γ^l_{ik} + Γ^l_{im} Γ^m_{jk} − Γ^l_{jm} Γ^m_{ik}`;
//! * Ricci tensor `S_{jk} = R^m_{mjk}` (contraction on the first slot), so the
//!   unit sphere has `S = g`;
//! * Ricci operator `Q^i_j = g^{im} S_{mj}`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fields::MetricFieldJet;
use crate::jet::Jet;
use crate::tensor::{Matrix, Tensor3, Tensor4};

/// `g^{ij}` as jets of the same order as the metric.
#[derive(Clone, Debug)]
pub struct InverseMetric {
    dim: usize,
    comp: Vec<Jet>,
}

impl InverseMetric {
    pub fn jet(&self, i: usize, j: usize) -> &Jet {
        &self.comp[i * self.dim + j]
    }

    pub fn values(&self) -> Matrix {
        Matrix::from_fn(self.dim, |[i, j]| self.jet(i, j).value())
    }

    /// `[i, j, a] = ∂_a g^{ij}`.
    pub fn d1(&self) -> Tensor3 {
        Tensor3::from_fn(self.dim, |[i, j, a]| self.jet(i, j).d1(a))
    }
}

fn jet_matmul(n: usize, a: &[Jet], b: &[Jet]) -> Vec<Jet> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push((0..n).map(|m| a[i * n + m] * b[m * n + j]).sum());
        }
    }
    out
}

/// Inverts the metric jet.
///
/// With `g = g₀ + E` (`E` carrying no constant term), the truncated Neumann
/// series `Σ_m (−g₀⁻¹E)^m g₀⁻¹` terminates after `order` steps because `E`
/// is nilpotent in the jet algebra.
pub fn inverse_metric(mj: &MetricFieldJet) -> Result<InverseMetric> {
    let n = mj.dim();
    let g0 = mj.values();
    let inv0 = DMatrix::from_fn(n, n, |i, j| g0[[i, j]])
        .try_inverse()
        .filter(|m| m.iter().all(|x| x.is_finite()))
        .ok_or_else(|| Error::MetricNotPositiveDefinite {
            point: Vec::new(),
            min_eig: 0.0,
            max_eig: 0.0,
        })?;
    let order = mj.order();
    let a: Vec<Jet> = (0..n * n)
        .map(|f| Jet::constant(n, inv0[(f / n, f % n)]))
        .collect();
    let e: Vec<Jet> = mj
        .jets()
        .iter()
        .map(|j| {
            let mut t = *j;
            t = t + (-j.value());
            t
        })
        .collect();
    let neg_ae: Vec<Jet> = jet_matmul(n, &a, &e).into_iter().map(|j| -j).collect();
    let mut term = a.clone();
    let mut acc = a;
    for _ in 0..order {
        term = jet_matmul(n, &neg_ae, &term);
        for (s, t) in acc.iter_mut().zip(&term) {
            *s += *t;
        }
    }
    let comp = acc.into_iter().map(|j| j.truncate(order)).collect();
    Ok(InverseMetric { dim: n, comp })
}

/// Christoffel symbols as jets one order below the metric.
#[derive(Clone, Debug)]
pub struct ChristoffelJet {
    dim: usize,
    comp: Vec<Jet>,
}

impl ChristoffelJet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.comp.iter().map(Jet::order).min().unwrap_or(0)
    }

    pub fn jet(&self, k: usize, i: usize, j: usize) -> &Jet {
        &self.comp[(k * self.dim + i) * self.dim + j]
    }

    /// `[k, i, j] = Γ^k_{ij}`.
    pub fn gamma(&self) -> Tensor3 {
        Tensor3::from_fn(self.dim, |[k, i, j]| self.jet(k, i, j).value())
    }

    /// `[k, i, j, l] = ∂_l Γ^k_{ij}`; needs metric order ≥ 2.
    pub fn d1(&self) -> Result<Tensor4> {
        self.require(1)?;
        Ok(Tensor4::from_fn(self.dim, |[k, i, j, l]| self.jet(k, i, j).d1(l)))
    }

    fn require(&self, order: usize) -> Result<()> {
        if self.order() < order {
            return Err(Error::JetOrderUnsupported {
                field: "Christoffel symbols".into(),
                requested: order,
                available: self.order(),
            });
        }
        Ok(())
    }
}

/// `Γ^k_{ij} = ½ g^{km}(∂_i g_{mj} + ∂_j g_{mi} − ∂_m g_{ij})`.
pub fn christoffel(mj: &MetricFieldJet) -> Result<ChristoffelJet> {
    if mj.order() < 1 {
        return Err(Error::JetOrderUnsupported {
            field: "metric".into(),
            requested: 1,
            available: mj.order(),
        });
    }
    let n = mj.dim();
    let ginv = inverse_metric(mj)?;
    // dg[(i*n + j)*n + a] = ∂_a g_ij
    let mut dg = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for a in 0..n {
                dg.push(mj.jet(i, j).partial(a));
            }
        }
    }
    let d = |i: usize, j: usize, a: usize| dg[(i * n + j) * n + a];
    let mut first_kind = Vec::with_capacity(n * n * n);
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                first_kind.push((d(m, j, i) + d(m, i, j) - d(i, j, m)) * 0.5);
            }
        }
    }
    let mut comp = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let s: Jet = (0..n)
                    .map(|m| *ginv.jet(k, m) * first_kind[(m * n + i) * n + j])
                    .sum();
                comp.push(s);
            }
        }
    }
    Ok(ChristoffelJet { dim: n, comp })
}

/// `R(∂_i, ∂_j) ∂_k = R^l_{ijk} ∂_l`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureComponents {
    pub r: Tensor4,
}

fn riemann_jets(cj: &ChristoffelJet) -> Result<Vec<Jet>> {
    cj.require(1)?;
    let n = cj.dim();
    let mut out: Vec<Jet> = Vec::with_capacity(n.pow(4));
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    // antisymmetric in (i, j) exactly: mirror the i < j half
                    if i > j {
                        let mirrored = -out[((l * n + j) * n + i) * n + k];
                        out.push(mirrored);
                        continue;
                    }
                    let mut r = cj.jet(l, j, k).partial(i) - cj.jet(l, i, k).partial(j);
                    for m in 0..n {
                        r += *cj.jet(l, i, m) * *cj.jet(m, j, k);
                        r -= *cj.jet(l, j, m) * *cj.jet(m, i, k);
                    }
                    out.push(r);
                }
            }
        }
    }
    Ok(out)
}

pub fn riemann(cj: &ChristoffelJet) -> Result<CurvatureComponents> {
    let n = cj.dim();
    let jets = riemann_jets(cj)?;
    Ok(CurvatureComponents {
        r: Tensor4::from_fn(n, |[l, i, j, k]| jets[((l * n + i) * n + j) * n + k].value()),
    })
}

impl CurvatureComponents {
    /// `K(∂_a, ∂_b) = g(R(∂_a,∂_b)∂_b, ∂_a) / (g_aa g_bb − g_ab²)`.
    pub fn sectional(&self, g: &Matrix, a: usize, b: usize) -> f64 {
        let n = g.dim();
        let num: f64 = (0..n).map(|l| self.r[[l, a, b, b]] * g[[l, a]]).sum();
        num / (g[[a, a]] * g[[b, b]] - g[[a, b]] * g[[a, b]])
    }
}

#[derive(Clone, Debug)]
pub struct RicciData {
    /// `S_{jk} = R^m_{mjk}`.
    pub s: Matrix,
    /// `Q^i_j = g^{im} S_{mj}`, stored at `[i, j]`.
    pub q: Matrix,
    /// `[i, j, a] = ∂_a Q^i_j`; present when the metric has order 3.
    pub q_d1: Option<Tensor3>,
}

fn ricci_jets(mj: &MetricFieldJet, cj: &ChristoffelJet) -> Result<(Vec<Jet>, Vec<Jet>)> {
    let n = mj.dim();
    let r = riemann_jets(cj)?;
    let ginv = inverse_metric(mj)?;
    let s: Vec<Jet> = (0..n * n)
        .map(|f| {
            let (j, k) = (f / n, f % n);
            (0..n).map(|m| r[((m * n + m) * n + j) * n + k]).sum()
        })
        .collect();
    let q: Vec<Jet> = (0..n * n)
        .map(|f| {
            let (i, j) = (f / n, f % n);
            (0..n).map(|m| *ginv.jet(i, m) * s[m * n + j]).sum()
        })
        .collect();
    Ok((s, q))
}

pub fn ricci_data(mj: &MetricFieldJet, cj: &ChristoffelJet) -> Result<RicciData> {
    let n = mj.dim();
    let (s, q) = ricci_jets(mj, cj)?;
    let q_d1 = (q.iter().all(|j| j.order() >= 1))
        .then(|| Tensor3::from_fn(n, |[i, j, a]| q[i * n + j].d1(a)));
    Ok(RicciData {
        s: Matrix::from_fn(n, |[j, k]| s[j * n + k].value()),
        q: Matrix::from_fn(n, |[i, j]| q[i * n + j].value()),
        q_d1,
    })
}

/// Jets of the Ricci operator, row-major `[i * n + j] = Q^i_j`.
pub fn ricci_operator_jets(mj: &MetricFieldJet) -> Result<Vec<Jet>> {
    let cj = christoffel(mj)?;
    Ok(ricci_jets(mj, &cj)?.1)
}

/// `[i, j] = (∇_i η)_j = ∂_i η_j − Γ^m_{ij} η_m` for a one-form given by
/// first-order jets of its components.
pub fn cov_deriv_oneform(eta: &[Jet], cj: &ChristoffelJet) -> Matrix {
    let n = cj.dim();
    Matrix::from_fn(n, |[i, j]| {
        eta[j].d1(i) - (0..n).map(|m| cj.jet(m, i, j).value() * eta[m].value()).sum::<f64>()
    })
}

/// `[i, k] = (∇_i ξ)^k = ∂_i ξ^k + Γ^k_{im} ξ^m`.
pub fn cov_deriv_vector(xi: &[Jet], cj: &ChristoffelJet) -> Matrix {
    let n = cj.dim();
    Matrix::from_fn(n, |[i, k]| {
        xi[k].d1(i) + (0..n).map(|m| cj.jet(k, i, m).value() * xi[m].value()).sum::<f64>()
    })
}

/// `[i, k, j] = (∇_i φ)^k_j = ∂_i φ^k_j + Γ^k_{im} φ^m_j − Γ^m_{ij} φ^k_m`,
/// with `phi[k * n + j] = φ^k_j`.
pub fn cov_deriv_endo(phi: &[Jet], cj: &ChristoffelJet) -> Tensor3 {
    let n = cj.dim();
    Tensor3::from_fn(n, |[i, k, j]| {
        let mut s = phi[k * n + j].d1(i);
        for m in 0..n {
            s += cj.jet(k, i, m).value() * phi[m * n + j].value();
            s -= cj.jet(m, i, j).value() * phi[k * n + m].value();
        }
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{preset_manifold, Point, PolynomialExpr};
    use crate::tensor::multi_indices;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn metric_at(name: &str, params: &[f64], p: &[f64], order: usize) -> MetricFieldJet {
        preset_manifold(name, params)
            .unwrap()
            .metric
            .jet(&Point::new(p.to_vec()), order)
            .unwrap()
    }

    #[test]
    fn flat_inverse_and_christoffel() {
        let mj = metric_at("euclidean", &[3.0], &[0.1, 0.2, 0.3], 3);
        let inv = inverse_metric(&mj).unwrap();
        assert_eq!(inv.values(), Matrix::identity(3));
        assert_eq!(inv.d1().max_abs(), 0.0);
        let cj = christoffel(&mj).unwrap();
        assert_eq!(cj.gamma().max_abs(), 0.0);
        assert_eq!(riemann(&cj).unwrap().r.max_abs(), 0.0);
        let rd = ricci_data(&mj, &cj).unwrap();
        assert_eq!(rd.s.max_abs(), 0.0);
        assert_eq!(rd.q.max_abs(), 0.0);
    }

    #[test]
    fn sphere_inverse_at_quarter_pi() {
        let mj = metric_at("sphere2", &[1.0], &[PI / 4.0, 0.0], 2);
        let inv = inverse_metric(&mj).unwrap().values();
        assert_abs_diff_eq!(inv[[0, 0]], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(inv[[1, 1]], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(inv[[0, 1]], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn inverse_derivative_identity() {
        // ∂g⁻¹ = −g⁻¹ (∂g) g⁻¹
        let m = preset_manifold("bumpy", &[3.0, 0.2, 5.0]).unwrap();
        for p in m.chart.sample_points(20, 3) {
            let mj = m.metric.jet(&p, 3).unwrap();
            let inv = inverse_metric(&mj).unwrap();
            let (gi, dgi, g, dg) = (inv.values(), inv.d1(), mj.values(), mj.d1());
            let eye = g.matmul(&gi);
            assert!(eye.sub(&Matrix::identity(3)).max_abs() < 1e-12);
            for [i, j, a] in multi_indices::<3>(3) {
                let mut expect = 0.0;
                for r in 0..3 {
                    for s in 0..3 {
                        expect -= gi[[i, r]] * dg[[r, s, a]] * gi[[s, j]];
                    }
                }
                assert_abs_diff_eq!(dgi[[i, j, a]], expect, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn sphere_christoffel_symbols() {
        let t: f64 = 1.1;
        let mj = metric_at("sphere2", &[1.0], &[t, 0.4], 2);
        let g = christoffel(&mj).unwrap().gamma();
        assert_abs_diff_eq!(g[[0, 1, 1]], -t.sin() * t.cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(g[[1, 0, 1]], t.cos() / t.sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(g[[1, 1, 0]], t.cos() / t.sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(g[[0, 0, 0]], 0.0);
        let eq = christoffel(&metric_at("sphere2", &[1.0], &[PI / 2.0, 0.0], 2)).unwrap().gamma();
        assert_abs_diff_eq!(eq[[0, 1, 1]], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn half_plane_christoffel() {
        let y = 2.5;
        let g = christoffel(&metric_at("half_plane", &[1.0], &[0.3, y], 2)).unwrap().gamma();
        assert_abs_diff_eq!(g[[0, 0, 1]], -1.0 / y, epsilon = 1e-14);
        assert_abs_diff_eq!(g[[1, 0, 0]], 1.0 / y, epsilon = 1e-14);
        assert_abs_diff_eq!(g[[1, 1, 1]], -1.0 / y, epsilon = 1e-14);
    }

    #[test]
    fn constant_curvature_presets() {
        for (name, p, k, sign) in [
            ("sphere2", [0.9, 1.0], 1.0, 1.0),
            ("half_plane", [0.5, 1.3], 1.0, -1.0),
        ] {
            let mj = metric_at(name, &[k], &p, 3);
            let cj = christoffel(&mj).unwrap();
            let cc = riemann(&cj).unwrap();
            let g = mj.values();
            assert_abs_diff_eq!(cc.sectional(&g, 0, 1), sign, epsilon = 1e-12);
            let rd = ricci_data(&mj, &cj).unwrap();
            // S = (n − 1) K g
            assert!(rd.s.sub(&g.scale(sign)).max_abs() < 1e-12);
            assert!(rd.q.sub(&Matrix::identity(2).scale(sign)).max_abs() < 1e-12);
            assert!(rd.q_d1.unwrap().max_abs() < 1e-11);
        }
    }

    #[test]
    fn levi_civita_identities_on_bumpy() {
        let m = preset_manifold("bumpy", &[3.0, 0.25, 9.0]).unwrap();
        for p in m.chart.sample_points(100, 1) {
            let mj = m.metric.jet(&p, 3).unwrap();
            let cj = christoffel(&mj).unwrap();
            let (g, dg, gam) = (mj.values(), mj.d1(), cj.gamma());
            let dgam = cj.d1().unwrap();
            for [i, j, k] in multi_indices::<3>(3) {
                let compat = dg[[j, k, i]]
                    - (0..3).map(|m| gam[[m, i, j]] * g[[m, k]] + gam[[m, i, k]] * g[[j, m]]).sum::<f64>();
                assert!(compat.abs() < 1e-11);
                assert_eq!(gam[[k, i, j]], gam[[k, j, i]]);
                for l in 0..3 {
                    assert_eq!(dgam[[k, i, j, l]], dgam[[k, j, i, l]]);
                }
            }
            let r = riemann(&cj).unwrap().r;
            for [l, i, j, k] in multi_indices::<4>(3) {
                assert_eq!(r[[l, i, j, k]], -r[[l, j, i, k]]);
                let bianchi = r[[l, i, j, k]] + r[[l, j, k, i]] + r[[l, k, i, j]];
                assert!(bianchi.abs() < 1e-10);
            }
            let rd = ricci_data(&mj, &cj).unwrap();
            assert!(rd.s.sub(&rd.s.transpose()).max_abs() < 1e-10);
        }
    }

    #[test]
    fn ricci_operator_derivative_matches_chain_rule() {
        // ∂Q from jets against Q = g⁻¹S differentiated with the third-order
        // metric jets shifted through `partial`
        let m = preset_manifold("bumpy", &[2.0, 0.3, 4.0]).unwrap();
        let p = Point::new(vec![0.2, -0.4]);
        let mj = m.metric.jet(&p, 3).unwrap();
        let q = ricci_operator_jets(&mj).unwrap();
        assert!(q.iter().all(|j| j.order() == 1));
        let rd = ricci_data(&mj, &christoffel(&mj).unwrap()).unwrap();
        let qd = rd.q_d1.unwrap();
        for [i, j, a] in multi_indices::<3>(2) {
            assert_eq!(qd[[i, j, a]], q[i * 2 + j].d1(a));
        }
        // lower order metric: no derivative available
        let mj2 = m.metric.jet(&p, 2).unwrap();
        assert!(ricci_data(&mj2, &christoffel(&mj2).unwrap()).unwrap().q_d1.is_none());
        let mj1 = m.metric.jet(&p, 1).unwrap();
        assert!(riemann(&christoffel(&mj1).unwrap()).is_err());
    }

    #[test]
    fn covariant_derivative_examples() {
        let mj = metric_at("euclidean", &[2.0], &[1.0, 0.0], 2);
        let cj = christoffel(&mj).unwrap();
        let p = Point::new(vec![1.0, 0.0]);
        let eta = vec![
            PolynomialExpr::zero(2).jet(&p.coords, 1),
            PolynomialExpr::linear(2, 0, 1.0).jet(&p.coords, 1),
        ];
        let d = cov_deriv_oneform(&eta, &cj);
        assert_eq!(d, Matrix::from_fn(2, |[i, j]| if (i, j) == (0, 1) { 1.0 } else { 0.0 }));

        let t: f64 = 0.7;
        let mj = metric_at("sphere2", &[1.0], &[t, 0.0], 2);
        let cj = christoffel(&mj).unwrap();
        let dphi = vec![Jet::constant(2, 0.0).truncate(1), Jet::constant(2, 1.0).truncate(1)];
        let d = cov_deriv_oneform(&dphi, &cj);
        assert_abs_diff_eq!(d[[0, 1]], -t.cos() / t.sin(), epsilon = 1e-14);
    }
}
