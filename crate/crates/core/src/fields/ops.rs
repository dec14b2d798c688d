//! Second-order finite-difference operators on the cell-centred grid.

use super::grid::{ScalarField, VectorField};
use crate::model::PhiBc;

/// How a standalone first derivative closes at a wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRule {
    /// The field vanishes on the wall: quadratic through the wall value and
    /// the two nearest centres.
    Dirichlet,
    /// Zero normal derivative on the wall (even reflection).
    Neumann,
    /// No boundary information: one-sided three-point formula.
    Extrapolate,
}

impl From<PhiBc> for EdgeRule {
    fn from(bc: PhiBc) -> Self {
        match bc {
            PhiBc::Dirichlet => EdgeRule::Dirichlet,
            PhiBc::Neumann => EdgeRule::Neumann,
        }
    }
}

/// Ghost-cell reflection used by the 5-point operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reflection {
    /// ghost = −interior: zero wall value
    Odd,
    /// ghost = interior: zero normal derivative
    Even,
}

impl From<PhiBc> for Reflection {
    fn from(bc: PhiBc) -> Self {
        match bc {
            PhiBc::Dirichlet => Reflection::Odd,
            PhiBc::Neumann => Reflection::Even,
        }
    }
}

impl Reflection {
    #[inline]
    pub(crate) fn sign(self) -> f64 {
        match self {
            Reflection::Odd => -1.0,
            Reflection::Even => 1.0,
        }
    }
}

/// Derivative along one grid line of length `n`.
#[inline]
fn diff_line(f: impl Fn(usize) -> f64, n: usize, h: f64, rule: EdgeRule, mut out: impl FnMut(usize, f64)) {
    let inv2h = 0.5 / h;
    for k in 1..n - 1 {
        out(k, (f(k + 1) - f(k - 1)) * inv2h);
    }
    let (lo, hi) = match rule {
        EdgeRule::Dirichlet => (
            (f(0) + f(1) / 3.0) / h,
            -(f(n - 1) + f(n - 2) / 3.0) / h,
        ),
        EdgeRule::Neumann => ((f(1) - f(0)) * inv2h, (f(n - 1) - f(n - 2)) * inv2h),
        EdgeRule::Extrapolate => (
            (-3.0 * f(0) + 4.0 * f(1) - f(2)) * inv2h,
            (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) * inv2h,
        ),
    };
    out(0, lo);
    out(n - 1, hi);
}

pub fn d_dx(f: &ScalarField, rule: EdgeRule) -> ScalarField {
    let g = f.grid();
    let n = g.n();
    let mut out = ScalarField::zeros(g);
    for j in 0..n {
        diff_line(|i| f.at(i, j), n, g.h(), rule, |i, v| out[(i, j)] = v);
    }
    out
}

pub fn d_dy(f: &ScalarField, rule: EdgeRule) -> ScalarField {
    let g = f.grid();
    let n = g.n();
    let mut out = ScalarField::zeros(g);
    for i in 0..n {
        diff_line(|j| f.at(i, j), n, g.h(), rule, |j, v| out[(i, j)] = v);
    }
    out
}

/// Central-difference gradient, closed at the walls by `rule`.
pub fn gradient(f: &ScalarField, rule: impl Into<EdgeRule>) -> VectorField {
    let rule = rule.into();
    VectorField {
        u: d_dx(f, rule),
        v: d_dy(f, rule),
    }
}

/// Central derivative with a reflected ghost value at each wall.
fn reflected_line(f: impl Fn(usize) -> f64, n: usize, h: f64, refl: Reflection, mut out: impl FnMut(usize, f64)) {
    let inv2h = 0.5 / h;
    let s = refl.sign();
    for k in 0..n {
        let left = if k == 0 { s * f(0) } else { f(k - 1) };
        let right = if k == n - 1 { s * f(n - 1) } else { f(k + 1) };
        out(k, (right - left) * inv2h);
    }
}

/// `∂u/∂x + ∂v/∂y` for a field satisfying `w·n = 0` (normal components
/// odd-reflected).
pub fn divergence(w: &VectorField) -> ScalarField {
    let g = w.grid();
    let n = g.n();
    let mut out = ScalarField::zeros(g);
    for j in 0..n {
        reflected_line(|i| w.u.at(i, j), n, g.h(), Reflection::Odd, |i, d| out[(i, j)] = d);
    }
    for i in 0..n {
        reflected_line(|j| w.v.at(i, j), n, g.h(), Reflection::Odd, |j, d| out[(i, j)] += d);
    }
    out
}

/// Scalar vorticity `∂v/∂x − ∂u/∂y`. The differentiated components are
/// tangential to the walls they meet and are even-reflected.
pub fn curl2d(w: &VectorField) -> ScalarField {
    let g = w.grid();
    let n = g.n();
    let mut out = ScalarField::zeros(g);
    for j in 0..n {
        reflected_line(|i| w.v.at(i, j), n, g.h(), Reflection::Even, |i, d| out[(i, j)] = d);
    }
    for i in 0..n {
        reflected_line(|j| w.u.at(i, j), n, g.h(), Reflection::Even, |j, d| out[(i, j)] -= d);
    }
    out
}

/// 5-point Laplacian with reflected ghost cells.
pub fn laplacian(f: &ScalarField, refl: impl Into<Reflection>) -> ScalarField {
    let mut out = ScalarField::zeros(f.grid());
    laplacian_into(f, refl.into(), &mut out);
    out
}

pub(crate) fn laplacian_into(f: &ScalarField, refl: Reflection, out: &mut ScalarField) {
    let g = f.grid();
    let n = g.n();
    let inv_h2 = 1.0 / (g.h() * g.h());
    let s = refl.sign();
    let v = f.values();
    let o = out.values_mut();
    for j in 0..n {
        let row = j * n;
        for i in 0..n {
            let c = v[row + i];
            let w = if i == 0 { s * c } else { v[row + i - 1] };
            let e = if i == n - 1 { s * c } else { v[row + i + 1] };
            let sth = if j == 0 { s * c } else { v[row + i - n] };
            let nth = if j == n - 1 { s * c } else { v[row + i + n] };
            o[row + i] = ((w + e) + (sth + nth) - 4.0 * c) * inv_h2;
        }
    }
}

/// Discrete L² inner product `h² Σ f g`.
pub fn inner(f: &ScalarField, g: &ScalarField) -> f64 {
    let h = f.grid().h();
    h * h * f.values().iter().zip(g.values()).map(|(a, b)| a * b).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn max_abs(f: &ScalarField) -> f64 {
        f.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let f = ScalarField::constant(grid(8), 3.5);
        for rule in [EdgeRule::Neumann, EdgeRule::Extrapolate] {
            let g = gradient(&f, rule);
            assert!(max_abs(&g.u) < 1e-13 && max_abs(&g.v) < 1e-13);
        }
    }

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let g = grid(16);
        let f = ScalarField::from_fn(g, |x, _| x);
        let grad = gradient(&f, EdgeRule::Extrapolate);
        for j in 0..16 {
            for i in 0..16 {
                assert!((grad.u.at(i, j) - 1.0).abs() < 1e-12);
                assert!(grad.v.at(i, j).abs() < 1e-12);
            }
        }
        // interior cells are exact for any closure
        let grad = gradient(&f, EdgeRule::Neumann);
        for j in 0..16 {
            for i in 1..15 {
                assert!((grad.u.at(i, j) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dirichlet_closure_exact_for_quadratics_vanishing_on_wall() {
        let g = grid(10);
        let f = ScalarField::from_fn(g, |x, _| x * (1.0 - x));
        let dx = d_dx(&f, EdgeRule::Dirichlet);
        for i in 0..10 {
            let x = g.center(i);
            assert!((dx.at(i, 3) - (1.0 - 2.0 * x)).abs() < 1e-12, "i={i}");
        }
    }

    fn gradient_error(n: usize) -> f64 {
        let g = grid(n);
        let f = ScalarField::from_fn(g, |x, y| (PI * x).sin() * (PI * y).sin());
        let grad = gradient(&f, EdgeRule::Dirichlet);
        let ex = ScalarField::from_fn(g, |x, y| PI * (PI * x).cos() * (PI * y).sin());
        let ey = ScalarField::from_fn(g, |x, y| PI * (PI * x).sin() * (PI * y).cos());
        max_abs(&grad.u.zip_map(&ex, |a, b| a - b)).max(max_abs(&grad.v.zip_map(&ey, |a, b| a - b)))
    }

    #[test]
    fn gradient_converges_second_order() {
        let ratio = gradient_error(32) / gradient_error(64);
        assert!(ratio > 3.6 && ratio < 4.4, "ratio {ratio}");
    }

    #[test]
    fn curl_of_gradient_vanishes() {
        let g = grid(24);
        let psi = ScalarField::from_fn(g, |x, y| (3.0 * x).sin() * (2.0 * y).cos() + x * y * y);
        let w = gradient(&psi, EdgeRule::Neumann);
        let c = curl2d(&w);
        assert!(max_abs(&c) < 1e-10, "{}", max_abs(&c));
    }

    #[test]
    fn laplacian_of_constant_with_even_reflection() {
        let f = ScalarField::constant(grid(8), 2.0);
        assert_eq!(max_abs(&laplacian(&f, Reflection::Even)), 0.0);
    }

    #[test]
    fn divergence_of_linear_field() {
        let g = grid(16);
        let w = VectorField::from_fn(g, |x, y| (x, y));
        let d = divergence(&w);
        for j in 1..15 {
            for i in 1..15 {
                assert!((d.at(i, j) - 2.0).abs() < 1e-12);
            }
        }
    }

    fn laplacian_error(n: usize, refl: Reflection) -> f64 {
        let g = grid(n);
        let (f, lap): (ScalarField, ScalarField) = match refl {
            Reflection::Odd => (
                ScalarField::from_fn(g, |x, y| (PI * x).sin() * (PI * y).sin()),
                ScalarField::from_fn(g, |x, y| -2.0 * PI * PI * (PI * x).sin() * (PI * y).sin()),
            ),
            Reflection::Even => (
                ScalarField::from_fn(g, |x, y| (PI * x).cos() * (PI * y).cos()),
                ScalarField::from_fn(g, |x, y| -2.0 * PI * PI * (PI * x).cos() * (PI * y).cos()),
            ),
        };
        max_abs(&laplacian(&f, refl).zip_map(&lap, |a, b| a - b))
    }

    #[test]
    fn laplacian_converges_second_order() {
        for refl in [Reflection::Odd, Reflection::Even] {
            let order = (laplacian_error(32, refl) / laplacian_error(64, refl)).log2();
            assert!(order > 1.9, "{refl:?}: {order}");
        }
    }

    fn random_field(g: Grid, seed: &[f64]) -> ScalarField {
        let n = g.n();
        ScalarField::from_fn(g, |x, y| {
            let k = ((x * n as f64) as usize * 7 + (y * n as f64) as usize * 13) % seed.len();
            seed[k]
        })
    }

    proptest! {
        #[test]
        fn operators_are_linear(
            seed_f in proptest::collection::vec(-1.0f64..1.0, 37),
            seed_g in proptest::collection::vec(-1.0f64..1.0, 41),
            a in -3.0f64..3.0, b in -3.0f64..3.0,
        ) {
            let g = grid(9);
            let f = random_field(g, &seed_f);
            let h = random_field(g, &seed_g);
            let combo = f.zip_map(&h, |p, q| a * p + b * q);
            let check = |op: &dyn Fn(&ScalarField) -> ScalarField| {
                let lhs = op(&combo);
                let rhs = op(&f).zip_map(&op(&h), |p, q| a * p + b * q);
                let scale = 1.0 + max_abs(&lhs);
                max_abs(&lhs.zip_map(&rhs, |p, q| p - q)) / scale
            };
            prop_assert!(check(&|s| laplacian(s, Reflection::Odd)) < 1e-12);
            prop_assert!(check(&|s| laplacian(s, Reflection::Even)) < 1e-12);
            prop_assert!(check(&|s| d_dx(s, EdgeRule::Dirichlet)) < 1e-12);
            prop_assert!(check(&|s| d_dy(s, EdgeRule::Extrapolate)) < 1e-12);
        }

        #[test]
        fn negative_laplacian_is_nonnegative(seed in proptest::collection::vec(-1.0f64..1.0, 53)) {
            let g = grid(11);
            let f = random_field(g, &seed);
            for refl in [Reflection::Odd, Reflection::Even] {
                let q = -inner(&laplacian(&f, refl), &f);
                prop_assert!(q >= -1e-12, "{refl:?}: {q}");
            }
        }
    }
}
