//! Gauss–Legendre rules and breakpoint-aware composite integration.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Chebyshev-like initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
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
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule over the sorted `breakpoints`; each sub-interval gets
    /// one copy of the rule. Zero-length pieces are skipped.
    pub fn integrate_piecewise<F: FnMut(f64) -> f64>(&self, breakpoints: &[f64], mut f: F) -> f64 {
        let mut total = 0.0;
        for pair in breakpoints.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b > a {
                total += self.integrate(a, b, &mut f);
            }
        }
        total
    }
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Sorts, clips to `[lo, hi]` and deduplicates a breakpoint list in place;
/// `lo` and `hi` are always included.
pub fn normalize_breakpoints(points: &mut Vec<f64>, lo: f64, hi: f64) {
    points.retain(|x| x.is_finite() && *x > lo && *x < hi);
    points.push(lo);
    points.push(hi);
    points.sort_by(|a, b| a.total_cmp(b));
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (1.0 + b.abs()));
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_two() {
        for n in 1..=12 {
            let rule = GaussLegendre::new(n);
            let s: f64 = rule.weights.iter().sum();
            assert_relative_eq!(s, 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for n in 1..=8 {
            let rule = GaussLegendre::new(n);
            for deg in 0..(2 * n) {
                let got = rule.integrate(0.0, 1.0, |x| x.powi(deg as i32));
                assert_relative_eq!(got, 1.0 / (deg as f64 + 1.0), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn five_point_nodes_match_tables() {
        let rule = GaussLegendre::new(5);
        assert_relative_eq!(rule.nodes[4], 0.906_179_845_938_664, epsilon = 1e-14);
        assert_relative_eq!(rule.weights[2], 128.0 / 225.0, epsilon = 1e-14);
    }

    #[test]
    fn piecewise_integral_of_kinked_function() {
        let rule = GaussLegendre::new(3);
        let got = rule.integrate_piecewise(&[-1.0, 0.0, 2.0], |x: f64| x.abs());
        assert_relative_eq!(got, 2.5, epsilon = 1e-14);
    }

    #[test]
    fn normalize_keeps_ends_and_removes_duplicates() {
        let mut pts = vec![0.5, 0.5, -3.0, 0.2, 9.0];
        normalize_breakpoints(&mut pts, 0.0, 1.0);
        assert_eq!(pts, vec![0.0, 0.2, 0.5, 1.0]);
    }
}
