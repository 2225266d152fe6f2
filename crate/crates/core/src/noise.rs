//! Noise coefficients `g_k(x, u)` with compact support in `u ∈ [-1, 1]` and
//! their cell averages `g_{k,K}(u) = (1/|K|) ∫_K g_k(x, u) dx`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mesh::TorusGrid;
use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// Default spatial quadrature order for cell tables.
pub const DEFAULT_NOISE_QUAD_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trig {
    Sin,
    Cos,
    /// `x`-independent mode.
    Const,
}

/// One mode of the built-in family
/// `g_k(x, u) = σ_k · max(1 − u², 0)^q · trig_k(2π κ_k · x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub sigma: f64,
    #[serde(default)]
    pub kappa: Vec<f64>,
    #[serde(default = "default_trig")]
    pub trig: Trig,
}

fn default_trig() -> Trig {
    Trig::Sin
}

impl Mode {
    pub fn new(sigma: f64, kappa: &[f64], trig: Trig) -> Self {
        Mode { sigma, kappa: kappa.to_vec(), trig }
    }

    fn spatial(&self, x: &[f64]) -> f64 {
        let phase: f64 = self.kappa.iter().zip(x).map(|(k, x)| 2.0 * PI * k * x).sum();
        match self.trig {
            Trig::Sin => phase.sin(),
            Trig::Cos => phase.cos(),
            Trig::Const => 1.0,
        }
    }

    fn wavenumber_sq(&self) -> f64 {
        match self.trig {
            Trig::Const => 0.0,
            _ => self.kappa.iter().map(|k| (2.0 * PI * k).powi(2)).sum(),
        }
    }
}

/// `(k, x, u) ↦ g_k(x, u)`.
pub type NoiseFn = Arc<dyn Fn(usize, &[f64], f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Family {
    Separable { modes: Vec<Mode>, q: f64 },
    Custom { k_max: usize, g: NoiseFn },
}

#[derive(Clone)]
pub struct NoiseModel {
    family: Family,
    d0: f64,
    d1: f64,
}

impl fmt::Debug for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("NoiseModel");
        match &self.family {
            Family::Separable { modes, q } => s.field("modes", modes).field("q", q),
            Family::Custom { k_max, .. } => s.field("custom_modes", k_max),
        };
        s.field("d0", &self.d0).field("d1", &self.d1).finish()
    }
}

/// `max(1 − u², 0)^q`.
#[inline]
pub fn profile(u: f64, q: f64) -> f64 {
    let b = 1.0 - u * u;
    if b <= 0.0 {
        0.0
    } else if q == 1.0 {
        b
    } else {
        b.powf(q)
    }
}

impl NoiseModel {
    /// No forcing at all.
    pub fn zero() -> Self {
        NoiseModel { family: Family::Separable { modes: vec![], q: 1.0 }, d0: 0.0, d1: 0.0 }
    }

    /// Built-in separable family; `D0 = Σσ²`, `D1 = Σσ²|2πκ|²`.
    pub fn separable(modes: Vec<Mode>, q: f64) -> Result<Self> {
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::Config(format!("noise exponent q must be >= 1, got {q}")));
        }
        for (k, m) in modes.iter().enumerate() {
            if !m.sigma.is_finite() || m.kappa.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("noise mode {k} has non-finite parameters")));
            }
            if m.trig != Trig::Const && m.kappa.is_empty() {
                return Err(Error::Config(format!("noise mode {k} needs a wave vector kappa")));
            }
        }
        let d0 = modes.iter().map(|m| m.sigma * m.sigma).sum();
        let d1 = modes.iter().map(|m| m.sigma * m.sigma * m.wavenumber_sq()).sum();
        Ok(NoiseModel { family: Family::Separable { modes, q }, d0, d1 })
    }

    /// Arbitrary coefficients with declared constants `D0 ≥ sup Σ_k g_k²` and
    /// `D1 ≥ sup Σ_k |∇_x g_k|²`.
    pub fn custom(k_max: usize, g: NoiseFn, d0: f64, d1: f64) -> Self {
        NoiseModel { family: Family::Custom { k_max, g }, d0, d1 }
    }

    pub fn k_max(&self) -> usize {
        match &self.family {
            Family::Separable { modes, .. } => modes.len(),
            Family::Custom { k_max, .. } => *k_max,
        }
    }

    pub fn d0(&self) -> f64 {
        self.d0
    }

    pub fn d1(&self) -> f64 {
        self.d1
    }

    pub fn is_zero(&self) -> bool {
        match &self.family {
            Family::Separable { modes, .. } => modes.iter().all(|m| m.sigma == 0.0),
            Family::Custom { k_max, .. } => *k_max == 0,
        }
    }

    pub fn eval(&self, k: usize, x: &[f64], u: f64) -> f64 {
        match &self.family {
            Family::Separable { modes, q } => {
                let m = &modes[k];
                m.sigma * profile(u, *q) * m.spatial(x)
            }
            Family::Custom { g, .. } => {
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    g(k, x, u)
                }
            }
        }
    }

    /// `G²(x, u) = Σ_k g_k(x, u)²`.
    pub fn g_squared(&self, x: &[f64], u: f64) -> f64 {
        (0..self.k_max()).map(|k| self.eval(k, x, u).powi(2)).sum()
    }

    pub fn cell_table(&self, grid: &TorusGrid, quad_order: usize) -> CellNoiseTable {
        let rule = GaussLegendre::new(quad_order.max(1));
        let k_max = self.k_max();
        let kind = match &self.family {
            Family::Separable { modes, q } => {
                let mut coeff = Vec::with_capacity(grid.num_cells() * k_max);
                for cell in 0..grid.num_cells() {
                    let pts = grid.quadrature_points(cell, &rule);
                    for m in modes {
                        let c: f64 = pts.iter().map(|(x, w)| w * m.spatial(&x[..grid.dim()])).sum();
                        coeff.push(m.sigma * c);
                    }
                }
                TableKind::Separable { q: *q, coeff }
            }
            Family::Custom { g, .. } => TableKind::Custom {
                g: g.clone(),
                points: (0..grid.num_cells()).map(|c| grid.quadrature_points(c, &rule)).collect(),
                dim: grid.dim(),
            },
        };
        CellNoiseTable { k_max, cells: grid.num_cells(), kind }
    }
}

#[derive(Clone)]
enum TableKind {
    Separable { q: f64, coeff: Vec<f64> },
    Custom { g: NoiseFn, points: Vec<Vec<([f64; 2], f64)>>, dim: usize },
}

/// Cell-averaged noise coefficients; immutable once built.
#[derive(Clone)]
pub struct CellNoiseTable {
    k_max: usize,
    cells: usize,
    kind: TableKind,
}

impl fmt::Debug for CellNoiseTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CellNoiseTable").field("k_max", &self.k_max).field("cells", &self.cells).finish()
    }
}

impl CellNoiseTable {
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn num_cells(&self) -> usize {
        self.cells
    }

    /// `g_{k,K}(u)`.
    pub fn g(&self, cell: usize, k: usize, u: f64) -> f64 {
        match &self.kind {
            TableKind::Separable { q, coeff } => coeff[cell * self.k_max + k] * profile(u, *q),
            TableKind::Custom { g, points, dim } => {
                if u.abs() >= 1.0 {
                    return 0.0;
                }
                points[cell].iter().map(|(x, w)| w * g(k, &x[..*dim], u)).sum()
            }
        }
    }

    /// `G²_K(u) = Σ_k g_{k,K}(u)²`.
    pub fn g_squared(&self, cell: usize, u: f64) -> f64 {
        match &self.kind {
            TableKind::Separable { q, coeff } => {
                let p = profile(u, *q);
                if p == 0.0 {
                    return 0.0;
                }
                let row = &coeff[cell * self.k_max..(cell + 1) * self.k_max];
                p * p * row.iter().map(|c| c * c).sum::<f64>()
            }
            TableKind::Custom { .. } => (0..self.k_max).map(|k| self.g(cell, k, u).powi(2)).sum(),
        }
    }

    /// `Σ_k g_{k,K}(u) · x_k`.
    pub fn forcing(&self, cell: usize, u: f64, x: &[f64]) -> f64 {
        match &self.kind {
            TableKind::Separable { q, coeff } => {
                let p = profile(u, *q);
                if p == 0.0 {
                    return 0.0;
                }
                let row = &coeff[cell * self.k_max..(cell + 1) * self.k_max];
                p * row.iter().zip(x).map(|(c, x)| c * x).sum::<f64>()
            }
            TableKind::Custom { .. } => (0..self.k_max).map(|k| self.g(cell, k, u) * x[k]).sum(),
        }
    }
}
