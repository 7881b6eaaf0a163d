//! Gauss-Legendre quadrature.
//!
//! Nodes and weights are generated at runtime by Newton iteration on the
//! Legendre polynomials (standard Golub-Welsch alternative for modest
//! orders). Composite panels over [a, b] are enough for every integrand in
//! this crate once the endpoint singularities have been substituted away.

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrate `f` over [a, b] with `panels` composite Gauss-Legendre panels
/// of `order` points each.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
) -> f64 {
    if a == b {
        return 0.0;
    }
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            s += w * f(mid + half * x);
        }
        total += s * half;
    }
    total
}

/// Panel-doubling driver: integrates with `panels` and `2*panels`, returns
/// the finer value and the difference as an error estimate.
pub fn integrate_check<F: FnMut(f64) -> f64 + Copy>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
) -> (f64, f64) {
    let coarse = integrate(f, a, b, panels, order);
    let fine = integrate(f, a, b, panels * 2, order);
    (fine, (fine - coarse).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_integrate_polynomials_exactly() {
        // n-point GL is exact through degree 2n-1.
        let v = integrate(|x| x.powi(9) + 3.0 * x.powi(4) + 1.0, -1.0, 1.0, 1, 8);
        let exact = 0.0 + 3.0 * 2.0 / 5.0 + 2.0;
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn gaussian_integral() {
        let v = integrate(|x| (-x * x).exp(), -8.0, 8.0, 16, 16);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn panel_doubling_reports_convergence() {
        let (v, err) = integrate_check(|x| (3.0 * x).sin().exp(), 0.0, 2.0, 8, 12);
        assert!(err < 1e-10);
        assert!(v.is_finite());
    }
}
