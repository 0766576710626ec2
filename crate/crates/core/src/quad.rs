//! Small quadrature helpers shared by the constants and operator modules.

use std::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, w * half))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, dp)
}

/// Tanh-sinh (double exponential) quadrature on `[a, b]`; tolerates
/// integrable algebraic singularities at both endpoints.
///
/// `f` receives `(x, distance to a, distance to b)` so that integrands
/// with endpoint singularities can be evaluated without cancellation.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let step = 1.0 / 64.0;
    let mut total = 0.0;
    let kmax = (6.0 / step) as i64;
    for k in -kmax..=kmax {
        let t = k as f64 * step;
        let u = 0.5 * PI * t.sinh();
        let cu = u.cosh();
        // 1 - tanh(u) and 1 + tanh(u), computed without cancellation.
        let e = (-2.0 * u.abs()).exp();
        let small = 2.0 * e / (1.0 + e);
        let (to_a, to_b) = if u >= 0.0 {
            (2.0 - small, small)
        } else {
            (small, 2.0 - small)
        };
        let da = half * to_a;
        let db = half * to_b;
        if da <= 0.0 || db <= 0.0 {
            continue;
        }
        let x = mid + half * u.tanh();
        let w = 0.5 * PI * t.cosh() / (cu * cu);
        let v = f(x, da, db);
        if v.is_finite() {
            total += w * v;
        }
    }
    total * half * step
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let rule = GaussLegendre::new(6);
        // degree 11 is the exactness limit of a 6-point rule
        let v = rule.integrate(0.0, 2.0, |x| x.powi(11) + 3.0 * x * x);
        let exact = 2f64.powi(12) / 12.0 + 8.0;
        assert!((v - exact).abs() < 1e-11 * exact);
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularities() {
        // ∫_0^1 x^{-1/2} (1-x)^{-1/2} dx = π
        let v = tanh_sinh(0.0, 1.0, |_, da, db| da.powf(-0.5) * db.powf(-0.5));
        assert!((v - PI).abs() < 1e-10, "{v}");
        let v = tanh_sinh(-1.0, 3.0, |x, _, _| x.exp());
        assert!((v - (3f64.exp() - (-1f64).exp())).abs() < 1e-12);
    }
}
