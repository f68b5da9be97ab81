//! Truncated multivariate Taylor series ("jets").
//!
//! A [`Jet`] of order `k` in `n` variables stores the Taylor coefficients
//! `c_α = ∂^α f(p) / α!` of a smooth function at a base point `p`, for every
//! multi-index with `|α| ≤ k`. Arithmetic on jets is exact up to floating
//! point rounding: no finite differences are involved anywhere.
//!
//! Mixing jets of different order truncates to the smaller order. Constants
//! carry [`MAX_ORDER`] so they never lower the order of an expression.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::OnceLock;

/// Largest supported number of variables (chart dimension).
pub const MAX_VARS: usize = 4;
/// Largest supported jet order.
pub const MAX_ORDER: usize = 3;
/// Number of monomials of degree ≤ 3 in 4 variables.
const CAPACITY: usize = 35;

type Exponents = [u8; MAX_VARS];

struct Layout {
    exps: Vec<Exponents>,
    len_by_order: [usize; MAX_ORDER + 1],
    // (a, b, c) with monomial a * b = c, sorted by degree of c
    products: Vec<(u8, u8, u8)>,
    products_by_order: [usize; MAX_ORDER + 1],
    // shift[v][b] = index of b + e_v, for deg(b) < MAX_ORDER
    shift: Vec<Vec<usize>>,
}

fn degree(e: &Exponents) -> usize {
    e.iter().map(|&x| x as usize).sum()
}

impl Layout {
    fn build(nvars: usize) -> Layout {
        let mut exps: Vec<Exponents> = Vec::new();
        let mut len_by_order = [0; MAX_ORDER + 1];
        for (d, slot) in len_by_order.iter_mut().enumerate() {
            let mut level = Vec::new();
            monomials_of_degree(nvars, d, &mut [0; MAX_VARS], 0, &mut level);
            // graded reverse order keeps x0 first, which reads naturally in tests
            level.sort_by(|a, b| b.cmp(a));
            exps.extend(level);
            *slot = exps.len();
        }
        let find = |e: &Exponents| exps.iter().position(|x| x == e);
        let mut products = Vec::new();
        for (a, ea) in exps.iter().enumerate() {
            for (b, eb) in exps.iter().enumerate() {
                if degree(ea) + degree(eb) > MAX_ORDER {
                    continue;
                }
                let mut ec = [0; MAX_VARS];
                for v in 0..MAX_VARS {
                    ec[v] = ea[v] + eb[v];
                }
                let c = find(&ec).expect("product monomial present");
                products.push((a as u8, b as u8, c as u8));
            }
        }
        products.sort_by_key(|&(_, _, c)| degree(&exps[c as usize]));
        let mut products_by_order = [0; MAX_ORDER + 1];
        for (k, slot) in products_by_order.iter_mut().enumerate() {
            *slot = products
                .iter()
                .filter(|&&(_, _, c)| degree(&exps[c as usize]) <= k)
                .count();
        }
        let mut shift = Vec::with_capacity(nvars);
        for v in 0..nvars {
            let mut row = Vec::new();
            for e in exps.iter().take(len_by_order[MAX_ORDER - 1]) {
                let mut up = *e;
                up[v] += 1;
                row.push(find(&up).expect("shifted monomial present"));
            }
            shift.push(row);
        }
        Layout {
            exps,
            len_by_order,
            products,
            products_by_order,
            shift,
        }
    }
}

fn monomials_of_degree(
    nvars: usize,
    remaining: usize,
    cur: &mut Exponents,
    var: usize,
    out: &mut Vec<Exponents>,
) {
    if var + 1 == nvars {
        cur[var] = remaining as u8;
        out.push(*cur);
        cur[var] = 0;
        return;
    }
    for k in 0..=remaining {
        cur[var] = k as u8;
        monomials_of_degree(nvars, remaining - k, cur, var + 1, out);
    }
    cur[var] = 0;
}

fn layout(nvars: usize) -> &'static Layout {
    static LAYOUTS: OnceLock<Vec<Layout>> = OnceLock::new();
    let all = LAYOUTS.get_or_init(|| (1..=MAX_VARS).map(Layout::build).collect());
    &all[nvars - 1]
}

/// Truncated Taylor expansion of a scalar function around a point.
#[derive(Clone, Copy)]
pub struct Jet {
    nvars: u8,
    order: u8,
    c: [f64; CAPACITY],
}

impl Jet {
    /// A constant; compatible with jets of any order.
    pub fn constant(nvars: usize, value: f64) -> Jet {
        assert!(
            (1..=MAX_VARS).contains(&nvars),
            "jet dimension {nvars} outside 1..={MAX_VARS}"
        );
        let mut c = [0.0; CAPACITY];
        c[0] = value;
        Jet {
            nvars: nvars as u8,
            order: MAX_ORDER as u8,
            c,
        }
    }

    pub fn zero(nvars: usize) -> Jet {
        Jet::constant(nvars, 0.0)
    }

    /// The coordinate function `x_var`, expanded at `value`.
    pub fn variable(nvars: usize, order: usize, var: usize, value: f64) -> Jet {
        assert!(order <= MAX_ORDER && var < nvars);
        let mut j = Jet::constant(nvars, value);
        j.order = order as u8;
        if order >= 1 {
            j.c[1 + var] = 1.0;
        }
        j
    }

    /// Builds a jet from partial derivatives `derivs(α) = ∂^α f(p)`.
    pub fn from_partials(
        nvars: usize,
        order: usize,
        mut derivs: impl FnMut(&[usize]) -> f64,
    ) -> Jet {
        let lay = layout(nvars);
        let mut j = Jet::constant(nvars, 0.0);
        j.order = order as u8;
        for (idx, e) in lay.exps.iter().take(lay.len_by_order[order]).enumerate() {
            let vars = exps_to_vars(e, nvars);
            j.c[idx] = derivs(&vars) / factorial(e);
        }
        j
    }

    pub fn nvars(&self) -> usize {
        self.nvars as usize
    }

    pub fn order(&self) -> usize {
        self.order as usize
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    fn len(&self) -> usize {
        layout(self.nvars()).len_by_order[self.order()]
    }

    /// First partial `∂_var f(p)`.
    pub fn d1(&self, var: usize) -> f64 {
        assert!(self.order >= 1, "first derivative of an order-0 jet");
        self.c[1 + var]
    }

    /// Mixed partial `∂_{vars[0]} ∂_{vars[1]} … f(p)`.
    pub fn partial_value(&self, vars: &[usize]) -> f64 {
        assert!(
            vars.len() <= self.order(),
            "derivative of order {} requested from jet of order {}",
            vars.len(),
            self.order
        );
        let mut e = [0u8; MAX_VARS];
        for &v in vars {
            e[v] += 1;
        }
        let lay = layout(self.nvars());
        let idx = lay
            .exps
            .iter()
            .position(|x| *x == e)
            .expect("monomial present");
        self.c[idx] * factorial(&e)
    }

    /// Gradient `(∂_0 f, …, ∂_{n-1} f)` at the base point.
    pub fn gradient(&self) -> Vec<f64> {
        (0..self.nvars()).map(|v| self.d1(v)).collect()
    }

    /// The jet of `∂_var f`, one order lower.
    pub fn partial(&self, var: usize) -> Jet {
        assert!(self.order >= 1, "partial of an order-0 jet");
        let lay = layout(self.nvars());
        let mut out = Jet::constant(self.nvars(), 0.0);
        out.order = self.order - 1;
        let shift = &lay.shift[var];
        for (b, &up) in shift.iter().enumerate().take(out.len()) {
            let k = lay.exps[b][var] as f64 + 1.0;
            out.c[b] = k * self.c[up];
        }
        out
    }

    /// Drops all coefficients above `order`.
    pub fn truncate(mut self, order: usize) -> Jet {
        if order < self.order() {
            let lay = layout(self.nvars());
            for x in &mut self.c[lay.len_by_order[order]..] {
                *x = 0.0;
            }
            self.order = order as u8;
        }
        self
    }

    /// `f ∘ self` for a univariate `f` given its derivatives at the base value.
    fn compose(&self, derivs: [f64; MAX_ORDER + 1]) -> Jet {
        let mut t = *self;
        t.c[0] = 0.0;
        let mut result = Jet::constant(self.nvars(), derivs[0]);
        result.order = self.order;
        let mut power = Jet::constant(self.nvars(), 1.0);
        let mut fact = 1.0;
        for (m, d) in derivs.iter().enumerate().skip(1).take(self.order()) {
            power *= t;
            fact *= m as f64;
            result += power * (d / fact);
        }
        result
    }

    pub fn recip(&self) -> Jet {
        let x = self.value();
        self.compose([
            1.0 / x,
            -1.0 / (x * x),
            2.0 / (x * x * x),
            -6.0 / (x * x * x * x),
        ])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn powi(&self, k: i32) -> Jet {
        if k < 0 {
            return self.recip().powi(-k);
        }
        let mut acc = Jet::constant(self.nvars(), 1.0);
        for _ in 0..k {
            acc *= *self;
        }
        acc
    }

    /// Largest absolute coefficient difference over the common order.
    pub fn max_abs_diff(&self, other: &Jet) -> f64 {
        let len = self.len().min(other.len());
        (0..len)
            .map(|i| (self.c[i] - other.c[i]).abs())
            .fold(0.0, f64::max)
    }

    fn check_compatible(&self, other: &Jet) {
        debug_assert_eq!(self.nvars, other.nvars, "jets over different charts");
    }
}

fn exps_to_vars(e: &Exponents, nvars: usize) -> Vec<usize> {
    let mut vars = Vec::new();
    for (v, &k) in e.iter().enumerate().take(nvars) {
        for _ in 0..k {
            vars.push(v);
        }
    }
    vars
}

fn factorial(e: &Exponents) -> f64 {
    e.iter()
        .map(|&k| (1..=k as u32).product::<u32>() as f64)
        .product()
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("coeffs", &&self.c[..self.len()])
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Jet) -> bool {
        self.nvars == other.nvars
            && self.order == other.order
            && self.c[..self.len()] == other.c[..other.len()]
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self += rhs;
        self
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        self.check_compatible(&rhs);
        if rhs.order < self.order {
            *self = self.truncate(rhs.order());
        }
        for i in 0..self.len() {
            self.c[i] += rhs.c[i];
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        self -= rhs;
        self
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        self.check_compatible(&rhs);
        if rhs.order < self.order {
            *self = self.truncate(rhs.order());
        }
        for i in 0..self.len() {
            self.c[i] -= rhs.c[i];
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for x in &mut self.c {
            *x = -*x;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.check_compatible(&rhs);
        let order = self.order.min(rhs.order);
        let lay = layout(self.nvars());
        let mut out = Jet::constant(self.nvars(), 0.0);
        out.order = order;
        for &(a, b, c) in &lay.products[..lay.products_by_order[order as usize]] {
            out.c[c as usize] += self.c[a as usize] * rhs.c[b as usize];
        }
        out
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for x in &mut self.c {
            *x *= rhs;
        }
        self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl std::iter::Sum for Jet {
    fn sum<I: Iterator<Item = Jet>>(iter: I) -> Jet {
        let mut iter = iter;
        let first = iter.next().expect("sum of an empty jet iterator");
        iter.fold(first, |acc, x| acc + x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn layout_sizes() {
        assert_eq!(layout(2).len_by_order, [1, 3, 6, 10]);
        assert_eq!(layout(4).len_by_order, [1, 5, 15, 35]);
        // first-order monomials follow variable order
        assert_eq!(layout(3).exps[1], [1, 0, 0, 0]);
        assert_eq!(layout(3).exps[3], [0, 0, 1, 0]);
    }

    #[test]
    fn product_rule_on_xy() {
        let x = Jet::variable(2, 3, 0, 2.0);
        let y = Jet::variable(2, 3, 1, 3.0);
        let f = x * y;
        assert_eq!(f.value(), 6.0);
        assert_eq!(f.gradient(), vec![3.0, 2.0]);
        assert_eq!(f.partial_value(&[0, 1]), 1.0);
        assert_eq!(f.partial_value(&[0, 0]), 0.0);
    }

    #[test]
    fn cubic_partials() {
        // f = x^2 y at (1.5, -2)
        let x = Jet::variable(2, 3, 0, 1.5);
        let y = Jet::variable(2, 3, 1, -2.0);
        let f = x * x * y;
        assert_abs_diff_eq!(f.partial_value(&[0]), 2.0 * 1.5 * -2.0);
        assert_abs_diff_eq!(f.partial_value(&[0, 0]), 2.0 * -2.0);
        assert_abs_diff_eq!(f.partial_value(&[0, 0, 1]), 2.0);
        assert_abs_diff_eq!(f.partial_value(&[1, 0, 0]), 2.0);
        assert_abs_diff_eq!(f.partial_value(&[1, 1]), 0.0);
    }

    #[test]
    fn partial_lowers_order() {
        let x = Jet::variable(2, 3, 0, 0.5);
        let y = Jet::variable(2, 3, 1, 0.25);
        let f = x * x * x + x * y;
        let fx = f.partial(0);
        assert_eq!(fx.order(), 2);
        assert_abs_diff_eq!(fx.value(), 3.0 * 0.25 + 0.25);
        assert_abs_diff_eq!(fx.d1(0), 6.0 * 0.5);
        assert_abs_diff_eq!(fx.d1(1), 1.0);
        assert_abs_diff_eq!(fx.partial_value(&[0, 0]), 6.0);
    }

    #[test]
    fn transcendental_derivatives() {
        let t = 0.7;
        let x = Jet::variable(1, 3, 0, t);
        let s = x.sin();
        assert_abs_diff_eq!(s.partial_value(&[0]), t.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.partial_value(&[0, 0]), -t.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.partial_value(&[0, 0, 0]), -t.cos(), epsilon = 1e-15);
        let r = (x * x).recip();
        assert_abs_diff_eq!(r.partial_value(&[0]), -2.0 / t.powi(3), epsilon = 1e-12);
        assert_abs_diff_eq!(r.partial_value(&[0, 0]), 6.0 / t.powi(4), epsilon = 1e-12);
        assert_abs_diff_eq!(
            r.partial_value(&[0, 0, 0]),
            -24.0 / t.powi(5),
            epsilon = 1e-10
        );
    }

    #[test]
    fn mixed_orders_truncate() {
        let x3 = Jet::variable(2, 3, 0, 1.0);
        let y1 = Jet::variable(2, 1, 1, 2.0);
        let p = x3 * y1;
        assert_eq!(p.order(), 1);
        let c = Jet::constant(2, 4.0);
        assert_eq!((c * x3).order(), 3);
        assert_eq!((x3 + y1).order(), 1);
    }

    #[test]
    fn from_partials_roundtrip() {
        let x = Jet::variable(3, 3, 0, 0.3);
        let y = Jet::variable(3, 3, 1, -0.2);
        let z = Jet::variable(3, 3, 2, 1.1);
        let f = x * y * z + (y * z).sin();
        let g = Jet::from_partials(3, 3, |vars| f.partial_value(vars));
        assert!(f.max_abs_diff(&g) < 1e-15);
    }
}
