//! Exact entropy solutions of the deterministic problem on the torus, and
//! cell-wise error norms against them.

use serde::{Deserialize, Serialize};

use crate::config::{InitialCondition, RunConfig};
use crate::mesh::TorusGrid;
use crate::quadrature::{normalize_breakpoints, GaussLegendre};
use crate::{Error, Result};

/// Gauss order of the error quadrature on each smooth piece of a cell.
const ERROR_QUAD_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSolution {
    /// `u(x, t) = u0(x − c t)` for the linear flux `A(u) = c u`.
    LinearAdvection { velocity: Vec<f64>, initial: InitialCondition },
    /// Burgers with periodic Riemann data `left` on `[0, x0)`, `right` on
    /// `[x0, 1)` (in the first coordinate). Two waves emanate, from `x0` and
    /// from `0`; one is a shock and the other a rarefaction fan unless the
    /// states coincide. Valid until the waves meet.
    BurgersRiemann { left: f64, right: f64, x0: f64 },
}

/// An elementary wave issued from `origin` at `t = 0`.
#[derive(Debug, Clone, Copy)]
struct Wave {
    origin: f64,
    left: f64,
    right: f64,
}

impl Wave {
    /// Speeds of the left and right edges.
    fn edge_speeds(&self) -> (f64, f64) {
        if self.left > self.right {
            let s = 0.5 * (self.left + self.right);
            (s, s)
        } else {
            (self.left, self.right)
        }
    }

    fn edges(&self, t: f64) -> (f64, f64) {
        let (a, b) = self.edge_speeds();
        (self.origin + a * t, self.origin + b * t)
    }

    fn inside(&self, y: f64, t: f64) -> f64 {
        // only reached for fans (shocks have no interior)
        ((y - self.origin) / t).clamp(self.left, self.right)
    }
}

impl ReferenceSolution {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        match (cfg.flux.name.as_str(), &cfg.initial) {
            ("burgers", InitialCondition::Riemann { left, right, x0 }) => {
                Ok(ReferenceSolution::BurgersRiemann { left: *left, right: *right, x0: *x0 })
            }
            ("linear", init) if init.eval(&[0.0, 0.0]).is_some() => {
                let mut c = cfg.flux.velocity.clone();
                c.resize(cfg.grid.dim, 0.0);
                Ok(ReferenceSolution::LinearAdvection { velocity: c, initial: init.clone() })
            }
            (flux, init) => {
                Err(Error::ExactSolution(format!("no exact solution for flux '{flux}' with initial data {init:?}")))
            }
        }
    }

    fn waves(&self) -> Vec<Wave> {
        match *self {
            ReferenceSolution::BurgersRiemann { left, right, x0 } => {
                // W_k at integers (right → left), V_k at k + x0 (left → right)
                let mut w = Vec::with_capacity(7);
                for k in -1..=2 {
                    let k = k as f64;
                    w.push(Wave { origin: k, left: right, right: left });
                    if k < 2.0 {
                        w.push(Wave { origin: k + x0, left, right });
                    }
                }
                w
            }
            ReferenceSolution::LinearAdvection { .. } => Vec::new(),
        }
    }

    /// First time at which two waves meet (`∞` if never).
    pub fn interaction_time(&self) -> f64 {
        let waves = self.waves();
        let mut t_star = f64::INFINITY;
        for pair in waves.windows(2) {
            let (_, c1) = pair[0].edge_speeds();
            let (c2, _) = pair[1].edge_speeds();
            if c1 > c2 {
                let gap = pair[1].origin - pair[0].origin;
                t_star = t_star.min(gap / (c1 - c2));
            }
        }
        t_star
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::ExactSolution(format!("negative time {t}")));
        }
        let t_star = self.interaction_time();
        if t > t_star * (1.0 + 1e-12) {
            return Err(Error::ExactSolution(format!("t = {t} is past the wave interaction time {t_star}")));
        }
        Ok(())
    }

    /// `u(x, t)`, periodized in `x`.
    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.eval_unchecked(x, t))
    }

    fn eval_unchecked(&self, x: &[f64], t: f64) -> f64 {
        match self {
            ReferenceSolution::LinearAdvection { velocity, initial } => {
                let y: Vec<f64> = x.iter().zip(velocity).map(|(x, c)| (x - c * t).rem_euclid(1.0)).collect();
                initial.eval(&y).expect("pointwise initial data")
            }
            ReferenceSolution::BurgersRiemann { left, right, x0 } => {
                let y = x[0].rem_euclid(1.0);
                if t == 0.0 {
                    return if y < *x0 { *left } else { *right };
                }
                // last wave whose left edge lies at or before y
                let waves = self.waves();
                let mut value = *left;
                for w in &waves {
                    let (a, b) = w.edges(t);
                    if a > y {
                        break;
                    }
                    value = if y < b { w.inside(y, t) } else { w.right };
                }
                value
            }
        }
    }

    /// Points in `[0, 1)` of the first coordinate where `u(·, t)` is not smooth.
    pub fn breakpoints(&self, t: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for w in self.waves() {
            let (a, b) = w.edges(t);
            out.push(a.rem_euclid(1.0));
            out.push(b.rem_euclid(1.0));
        }
        out
    }

    /// `Σ_K ∫_K |v_K − u(x, t)|^p dx` (the `p`-th power of the `L^p` error).
    pub fn error_pow(&self, grid: &TorusGrid, v: &[f64], t: f64, p: f64) -> Result<f64> {
        self.check_time(t)?;
        let rule = GaussLegendre::new(ERROR_QUAD_ORDER);
        let kinks = self.breakpoints(t);
        let h = grid.h();
        let transverse: Vec<(f64, f64)> =
            if grid.dim() == 2 { rule.mapped(0.0, 1.0).collect() } else { vec![(0.0, 1.0)] };
        let mut total = 0.0;
        for (cell, &vk) in v.iter().enumerate() {
            let o = grid.cell_origin(cell);
            let mut pts = kinks.clone();
            normalize_breakpoints(&mut pts, o[0], o[0] + h);
            let mut acc = 0.0;
            for &(s, ws) in &transverse {
                let x1 = o[1] + s * h;
                acc += ws * rule.integrate_piecewise(&pts, |x0| (vk - self.eval_unchecked(&[x0, x1], t)).abs().powf(p));
            }
            // acc is an integral over the first coordinate times an average in the second
            total += acc * grid.cell_volume() / h;
        }
        Ok(total)
    }

    pub fn error_lp(&self, grid: &TorusGrid, v: &[f64], t: f64, p: f64) -> Result<f64> {
        Ok(self.error_pow(grid, v, t, p)?.powf(1.0 / p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn riemann(left: f64, right: f64) -> ReferenceSolution {
        ReferenceSolution::BurgersRiemann { left, right, x0: 0.5 }
    }

    #[test]
    fn linear_advection_transports() {
        let r = ReferenceSolution::LinearAdvection {
            velocity: vec![1.0],
            initial: InitialCondition::Sine { amplitude: 1.0, wavevector: vec![1.0], offset: 0.0 },
        };
        for x in [0.1, 0.37, 0.9] {
            let u = r.eval(&[x, 0.0], 0.5).unwrap();
            assert!((u - (2.0 * PI * (x - 0.5)).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn shock_moves_at_rankine_hugoniot_speed() {
        let r = riemann(1.0, 0.0);
        let t = 0.3;
        let s = 0.5 + t / 2.0;
        assert_eq!(r.eval(&[s - 1e-9], t).unwrap(), 1.0);
        assert_eq!(r.eval(&[s + 1e-9], t).unwrap(), 0.0);
        // fan issued from 0 ≡ 1
        assert!((r.eval(&[0.15], t).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(r.eval(&[0.95], t).unwrap(), 0.0);
        assert!((r.interaction_time() - 1.0).abs() < 1e-15);
        assert!(r.eval(&[0.2], 1.5).is_err());
    }

    #[test]
    fn rarefaction_is_self_similar() {
        let r = riemann(0.0, 1.0);
        let t = 0.2;
        for xi in [0.1, 0.5, 0.9] {
            let u = r.eval(&[0.5 + xi * t], t).unwrap();
            assert!((u - xi).abs() < 1e-12);
        }
        assert_eq!(r.eval(&[0.3], t).unwrap(), 0.0);
        assert_eq!(r.eval(&[0.75], t).unwrap(), 1.0);
    }

    #[test]
    fn exact_cell_averages_have_zero_error() {
        let r = riemann(1.0, 0.0);
        let g = TorusGrid::new(1, 4).unwrap();
        let v = [1.0, 1.0, 0.0, 0.0];
        assert_eq!(r.error_pow(&g, &v, 0.0, 1.0).unwrap(), 0.0);
        let e = r.error_pow(&g, &[0.0; 4], 0.0, 1.0).unwrap();
        assert!((e - 0.5).abs() < 1e-14);
    }

    #[test]
    fn error_in_two_dimensions_uses_first_coordinate() {
        let r = riemann(1.0, 0.0);
        let g = TorusGrid::new(2, 2).unwrap();
        let e = r.error_pow(&g, &[0.0; 4], 0.0, 2.0).unwrap();
        assert!((e - 0.5).abs() < 1e-14);
    }

    #[test]
    fn from_config_requires_known_pairs() {
        let mut c = RunConfig::default();
        assert!(ReferenceSolution::from_config(&c).is_err());
        c.initial = InitialCondition::Riemann { left: 1.0, right: 0.0, x0: 0.5 };
        assert!(matches!(ReferenceSolution::from_config(&c), Ok(ReferenceSolution::BurgersRiemann { .. })));
    }
}
