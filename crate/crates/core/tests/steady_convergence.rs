use frdvasc::fields::{laplacian, Grid};
use frdvasc::steady::{build_steady, SeriesSpec};
use frdvasc::{Coefficients, ModelParams, PhiBc};

fn params() -> ModelParams {
    ModelParams::new(Coefficients::default()).unwrap()
}

/// L2 Helmholtz residual of the sampled series restricted to cells with
/// centres in [0.25, 0.75]^2.
fn core_residual(n: usize, m_max: usize) -> f64 {
    let p = params();
    let spec = SeriesSpec::new(m_max, 1e-8).unwrap();
    let s = build_steady(&p, PhiBc::Dirichlet, 1.0, Grid::new(n).unwrap(), &spec).unwrap();
    let g = s.phi.grid();
    let lap = laplacian(&s.phi, PhiBc::Dirichlet);
    let mut sum = 0.0;
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (g.center(i), g.center(j));
            if !(0.25..=0.75).contains(&x) || !(0.25..=0.75).contains(&y) {
                continue;
            }
            let r = -p.d() * lap.at(i, j) + p.a() * s.phi.at(i, j) - p.b() * s.rho.at(i, j);
            sum += r * r;
        }
    }
    (sum * g.h() * g.h()).sqrt()
}

#[test]
fn steady_core_region_is_second_order() {
    let r: Vec<f64> = [64, 128, 256].iter().map(|&n| core_residual(n, 1001)).collect();
    println!("core residuals {r:?}");
    for w in r.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.8, "observed order {order:.3} from {r:?}");
    }
}
