use super::grid::{ScalarField, VectorField};
use super::ops::{d_dx, d_dy, EdgeRule};

/// Discrete norms of a field: `l2 = h √Σf²`, `h1 = √(l2² + ‖∇f‖²)`,
/// `linf = max |f|`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
}

fn l2_sq(f: &ScalarField) -> f64 {
    let h = f.grid().h();
    h * h * f.values().iter().map(|v| v * v).sum::<f64>()
}

fn linf(f: &ScalarField) -> f64 {
    f.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

impl Norms {
    /// Norms of a scalar field; `rule` closes the gradient at the walls.
    pub fn of_scalar(f: &ScalarField, rule: impl Into<EdgeRule>) -> Norms {
        let rule = rule.into();
        let l2 = l2_sq(f);
        let grad = l2_sq(&d_dx(f, rule)) + l2_sq(&d_dy(f, rule));
        Norms {
            l2: l2.sqrt(),
            h1: (l2 + grad).sqrt(),
            linf: linf(f),
        }
    }

    /// Norms of a velocity-like field with `w·n = 0` on the walls. `linf`
    /// is the largest pointwise Euclidean length.
    pub fn of_velocity(w: &VectorField) -> Norms {
        use EdgeRule::{Dirichlet, Extrapolate};
        let l2 = l2_sq(&w.u) + l2_sq(&w.v);
        let grad = l2_sq(&d_dx(&w.u, Dirichlet))
            + l2_sq(&d_dy(&w.u, Extrapolate))
            + l2_sq(&d_dx(&w.v, Extrapolate))
            + l2_sq(&d_dy(&w.v, Dirichlet));
        let linf = w
            .u
            .values()
            .iter()
            .zip(w.v.values())
            .fold(0.0f64, |m, (a, b)| m.max(a.hypot(*b)));
        Norms {
            l2: l2.sqrt(),
            h1: (l2 + grad).sqrt(),
            linf,
        }
    }

    /// L² norm only, skipping the gradient.
    pub fn l2(f: &ScalarField) -> f64 {
        l2_sq(f).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use std::f64::consts::PI;

    #[test]
    fn zero_field() {
        let g = Grid::new(8).unwrap();
        assert_eq!(Norms::of_scalar(&ScalarField::zeros(g), EdgeRule::Neumann), Norms::default());
        assert_eq!(Norms::of_velocity(&VectorField::zeros(g)), Norms::default());
    }

    #[test]
    fn unit_field_has_unit_l2() {
        let g = Grid::new(16).unwrap();
        let n = Norms::of_scalar(&ScalarField::constant(g, 1.0), EdgeRule::Neumann);
        assert!((n.l2 - 1.0).abs() < 1e-14);
        assert!((n.h1 - 1.0).abs() < 1e-14);
        assert_eq!(n.linf, 1.0);
    }

    #[test]
    fn sine_bump_l2_tends_to_half() {
        let mut errs = vec![];
        for n in [16, 32, 64] {
            let g = Grid::new(n).unwrap();
            let f = ScalarField::from_fn(g, |x, y| (PI * x).sin() * (PI * y).sin());
            let nrm = Norms::of_scalar(&f, EdgeRule::Dirichlet);
            errs.push((nrm.l2 - 0.5).abs());
            // ‖∇f‖² = π²/2
            let h1 = (0.25 + PI * PI / 2.0).sqrt();
            assert!((nrm.h1 - h1).abs() < 20.0 / (n * n) as f64, "n={n}");
        }
        assert!(errs[2] < 1e-12 || errs[0] > errs[1] && errs[1] > errs[2]);
    }
}
