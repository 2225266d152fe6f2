//! Uniform cartesian meshes of the periodic torus `T^N = [0,1)^N`, `N ∈ {1, 2}`.
//!
//! Cells are numbered lexicographically by their multi-index `(i_1, .., i_N)`,
//! first axis slowest. Every reduction in the crate iterates cells in this
//! order.

use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// Default per-axis Gauss–Legendre order for cell averages.
pub const DEFAULT_QUAD_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    m: usize,
    h: f64,
    cell_volume: f64,
    face_area: f64,
    alpha: f64,
}

/// Multi-index of a cell; unused trailing axes are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellIndex(pub [usize; 2]);

/// One oriented face of a cell: the interface `owner | neighbor`, whose
/// outward unit normal (seen from `owner`) is `sign * e_axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub owner: usize,
    pub neighbor: usize,
    pub axis: usize,
    pub sign: f64,
}

impl Face {
    pub fn reversed(&self) -> Face {
        Face { owner: self.neighbor, neighbor: self.owner, axis: self.axis, sign: -self.sign }
    }
}

impl TorusGrid {
    pub fn new(dim: usize, m: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if m == 0 {
            return Err(Error::InvalidGrid("cells per axis must be positive".into()));
        }
        let h = 1.0 / m as f64;
        Ok(TorusGrid {
            dim,
            m,
            h,
            cell_volume: h.powi(dim as i32),
            face_area: h.powi(dim as i32 - 1),
            alpha: 0.5f64.powi(dim as i32),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `|K| = h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    /// `|K|L| = h^{N-1}`.
    pub fn face_area(&self) -> f64 {
        self.face_area
    }

    /// `|∂K| = 2N h^{N-1}`.
    pub fn perimeter(&self) -> f64 {
        2.0 * self.dim as f64 * self.face_area
    }

    /// Shape-regularity constant `α_N = 2^{-N}`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_cells(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn multi_index(&self, cell: usize) -> CellIndex {
        match self.dim {
            1 => CellIndex([cell, 0]),
            _ => CellIndex([cell / self.m, cell % self.m]),
        }
    }

    pub fn linear_index(&self, idx: CellIndex) -> usize {
        match self.dim {
            1 => idx.0[0] % self.m,
            _ => (idx.0[0] % self.m) * self.m + idx.0[1] % self.m,
        }
    }

    /// Lower corner of the cell.
    pub fn cell_origin(&self, cell: usize) -> [f64; 2] {
        let idx = self.multi_index(cell);
        let mut x = [0.0; 2];
        for (xd, &i) in x.iter_mut().zip(&idx.0).take(self.dim) {
            *xd = i as f64 * self.h;
        }
        x
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let mut x = self.cell_origin(cell);
        for xd in x.iter_mut().take(self.dim) {
            *xd += 0.5 * self.h;
        }
        x
    }

    /// Cell containing the point `x` (coordinates are wrapped onto the torus).
    pub fn locate(&self, x: &[f64]) -> usize {
        let mut idx = [0usize; 2];
        for d in 0..self.dim {
            let y = x[d].rem_euclid(1.0);
            idx[d] = ((y * self.m as f64).floor() as usize).min(self.m - 1);
        }
        self.linear_index(CellIndex(idx))
    }

    /// Neighbour across the face with normal `sign * e_axis`, with periodic wrap.
    pub fn neighbor(&self, cell: usize, axis: usize, sign: f64) -> usize {
        let mut idx = self.multi_index(cell).0;
        idx[axis] = if sign > 0.0 { (idx[axis] + 1) % self.m } else { (idx[axis] + self.m - 1) % self.m };
        self.linear_index(CellIndex(idx))
    }

    /// The `2N` faces of a cell, ordered by axis then `+`, `-`.
    pub fn faces(&self, cell: usize) -> impl Iterator<Item = Face> + '_ {
        (0..self.dim).flat_map(move |axis| {
            [1.0, -1.0].into_iter().map(move |sign| Face {
                owner: cell,
                neighbor: self.neighbor(cell, axis, sign),
                axis,
                sign,
            })
        })
    }

    /// Per-cell tensor Gauss–Legendre approximation of `(1/|K|) ∫_K f`.
    /// `f` receives a point with `dim` meaningful coordinates.
    pub fn cell_average<F: Fn(&[f64]) -> f64>(&self, f: F, quad_order: usize) -> Vec<f64> {
        let rule = GaussLegendre::new(quad_order.max(1));
        (0..self.num_cells()).map(|cell| self.average_over_cell(cell, &rule, &f)).collect()
    }

    fn average_over_cell<F: Fn(&[f64]) -> f64>(&self, cell: usize, rule: &GaussLegendre, f: &F) -> f64 {
        // Averages are taken relative to the first node so that constants
        // are reproduced exactly despite the rounding of the weights.
        let points = self.quadrature_points(cell, rule);
        let base = f(&points[0].0);
        let total: f64 = points.iter().map(|(_, w)| w).sum();
        base + points.iter().map(|(x, w)| w * (f(x) - base)).sum::<f64>() / total
    }

    /// Quadrature points of a cell with weights normalized to sum to one.
    pub fn quadrature_points(&self, cell: usize, rule: &GaussLegendre) -> Vec<([f64; 2], f64)> {
        let origin = self.cell_origin(cell);
        let line: Vec<(f64, f64)> = rule.mapped(0.0, 1.0).collect();
        let mut out = Vec::with_capacity(line.len().pow(self.dim as u32));
        match self.dim {
            1 => {
                for &(s, w) in &line {
                    out.push(([origin[0] + s * self.h, 0.0], w));
                }
            }
            _ => {
                for &(s, ws) in &line {
                    for &(r, wr) in &line {
                        out.push(([origin[0] + s * self.h, origin[1] + r * self.h], ws * wr));
                    }
                }
            }
        }
        out
    }

    /// Volume-weighted `L^p` norm to the power `p` of a cell field.
    pub fn lp_norm_pow(&self, values: &[f64], p: f64) -> f64 {
        self.cell_volume * values.iter().map(|v| v.abs().powf(p)).sum::<f64>()
    }

    /// `sum_K |K| v_K^2`.
    pub fn l2_norm_sq(&self, values: &[f64]) -> f64 {
        self.cell_volume * values.iter().map(|v| v * v).sum::<f64>()
    }

    /// `sum_K |K| v_K`.
    pub fn mass(&self, values: &[f64]) -> f64 {
        self.cell_volume * values.iter().sum::<f64>()
    }

    /// Grid with twice as many cells per axis, and the parent → children map.
    pub fn refine(&self) -> (TorusGrid, Refinement) {
        let fine = TorusGrid::new(self.dim, 2 * self.m).expect("refinement of a valid grid");
        let children = (0..self.num_cells())
            .map(|cell| {
                let idx = self.multi_index(cell).0;
                match self.dim {
                    1 => vec![2 * idx[0], 2 * idx[0] + 1],
                    _ => {
                        let mut c = Vec::with_capacity(4);
                        for a in 0..2 {
                            for b in 0..2 {
                                c.push(fine.linear_index(CellIndex([2 * idx[0] + a, 2 * idx[1] + b])));
                            }
                        }
                        c
                    }
                }
            })
            .collect();
        (fine, Refinement { children })
    }
}

/// Parent → children index map between a grid and its refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub children: Vec<Vec<usize>>,
}

impl Refinement {
    pub fn num_fine(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    /// Cell-constant prolongation of a coarse field.
    pub fn prolong(&self, coarse: &[f64]) -> Vec<f64> {
        let mut fine = vec![0.0; self.num_fine()];
        for (parent, kids) in self.children.iter().enumerate() {
            for &c in kids {
                fine[c] = coarse[parent];
            }
        }
        fine
    }

    /// Volume-weighted restriction (children share the parent volume equally).
    pub fn restrict(&self, fine: &[f64]) -> Vec<f64> {
        self.children.iter().map(|kids| kids.iter().map(|&c| fine[c]).sum::<f64>() / kids.len() as f64).collect()
    }

    /// Parent of every fine cell.
    pub fn parents(&self) -> Vec<usize> {
        let mut p = vec![0; self.num_fine()];
        for (parent, kids) in self.children.iter().enumerate() {
            for &c in kids {
                p[c] = parent;
            }
        }
        p
    }
}
