//! The split explicit scheme: a deterministic finite-volume half-step
//!
//! ```text
//! |K| (v^{n+1/2}_K − v^n_K) + Δt_n Σ_L A_{K→L}(v^n_K, v^n_L) = 0
//! ```
//!
//! followed by the Euler–Maruyama forcing
//! `v^{n+1}_K = v^{n+1/2}_K + √Δt_n Σ_k g_{k,K}(v^n_K) X^{n+1}_k`.
//! The noise coefficients are frozen at `v^n`, and nothing is clamped.

use crate::flux::MonotoneFlux;
use crate::mesh::{Face, TorusGrid, DEFAULT_QUAD_ORDER};
use crate::noise::{CellNoiseTable, NoiseModel, DEFAULT_NOISE_QUAD_ORDER};
use crate::rng::{IncrementSource, WienerIncrements};
use crate::{Error, Result};

/// Default splitting margin `θ` of the CFL condition.
pub const DEFAULT_THETA: f64 = 0.5;

#[cfg(feature = "parallel")]
const PARALLEL_CELLS: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    dts: Vec<f64>,
}

impl TimeGrid {
    /// `Δt = (1−θ) α_N² h / (2 L)`, capped at 1.
    pub fn cfl_step(grid: &TorusGrid, lipschitz: f64, theta: f64) -> f64 {
        let a = grid.alpha();
        ((1.0 - theta) * a * a * grid.h() / (2.0 * lipschitz)).min(1.0)
    }

    /// Uniform CFL-tied grid on `[0, T]` with a shortened last step.
    pub fn cfl(grid: &TorusGrid, lipschitz: f64, theta: f64, t_final: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Config(format!("theta must lie in (0, 1), got {theta}")));
        }
        if !(lipschitz >= 0.0) {
            return Err(Error::Config(format!("Lipschitz constant must be nonnegative, got {lipschitz}")));
        }
        let dt = if lipschitz == 0.0 { 1.0 } else { Self::cfl_step(grid, lipschitz, theta) };
        let tg = Self::uniform(dt, t_final)?;
        check_cfl(grid, lipschitz, tg.max_dt())?;
        Ok(tg)
    }

    /// `t_n = n Δt` and `t_{N_T} = T`. When `T/Δt` is an integer up to
    /// rounding, no sliver step is produced.
    pub fn uniform(dt: f64, t_final: f64) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::Config(format!("final time must be positive, got {t_final}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let ratio = t_final / dt;
        let nearest = ratio.round();
        let steps =
            if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) { nearest.max(1.0) } else { ratio.ceil() } as usize;
        let mut times: Vec<f64> = (0..steps).map(|n| n as f64 * dt).collect();
        times.push(t_final);
        // Every step but the last is exactly `dt`; only the last absorbs the
        // remainder, so rounding never pushes an interior step above `dt`.
        let mut dts = vec![dt; steps - 1];
        dts.push(t_final - times[steps - 1]);
        Ok(TimeGrid { times, dts })
    }

    pub fn num_steps(&self) -> usize {
        self.dts.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dts(&self) -> &[f64] {
        &self.dts
    }

    pub fn dt(&self, n: usize) -> f64 {
        self.dts[n]
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().expect("time grid has at least one step")
    }

    pub fn max_dt(&self) -> f64 {
        self.dts.iter().copied().fold(0.0, f64::max)
    }

    /// Index `n` with `t_n ≤ t < t_{n+1}` (the last step also owns `T`).
    pub fn step_containing(&self, t: f64) -> Option<usize> {
        if t < 0.0 || t > self.t_final() {
            return None;
        }
        let n = self.times.partition_point(|&s| s <= t);
        Some(n.saturating_sub(1).min(self.num_steps() - 1))
    }
}

/// `Δt |∂K|/|K| L ≤ 1`.
pub fn check_cfl(grid: &TorusGrid, lipschitz: f64, dt: f64) -> Result<()> {
    let c = dt * grid.perimeter() / grid.cell_volume() * lipschitz;
    if c > 1.0 + 1e-12 {
        Err(Error::Cfl(format!("Δt |∂K|/|K| L_A = {c} > 1 (Δt = {dt}, h = {})", grid.h())))
    } else {
        Ok(())
    }
}

/// Cell averages of `u0` (tensor Gauss–Legendre). Values of `u0` outside
/// `[-1, 1]` at the quadrature nodes are reported through `log`.
pub fn init_state<F: Fn(&[f64]) -> f64>(grid: &TorusGrid, u0: F, quad_order: usize) -> Vec<f64> {
    let outside = std::cell::Cell::new(0usize);
    let v = grid.cell_average(
        |x| {
            let u = u0(x);
            if u.abs() > 1.0 {
                outside.set(outside.get() + 1);
            }
            u
        },
        quad_order,
    );
    if outside.get() > 0 {
        log::warn!("initial data leaves [-1, 1] at {} quadrature nodes", outside.get());
    }
    v
}

/// One step of a trajectory, borrowed from wherever the data lives.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub n: usize,
    pub t: f64,
    pub dt: f64,
    pub pre: &'a [f64],
    pub half: &'a [f64],
    pub post: &'a [f64],
    pub increments: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct Scheme {
    grid: TorusGrid,
    flux: MonotoneFlux,
    noise: NoiseModel,
    table: CellNoiseTable,
    faces: Vec<Face>,
}

impl Scheme {
    pub fn new(grid: TorusGrid, flux: MonotoneFlux, noise: NoiseModel) -> Result<Self> {
        Self::with_noise_quadrature(grid, flux, noise, DEFAULT_NOISE_QUAD_ORDER)
    }

    pub fn with_noise_quadrature(
        grid: TorusGrid,
        flux: MonotoneFlux,
        noise: NoiseModel,
        quad_order: usize,
    ) -> Result<Self> {
        if flux.flux().dim() != grid.dim() {
            return Err(Error::Config(format!(
                "flux is {}-dimensional but the grid is {}-dimensional",
                flux.flux().dim(),
                grid.dim()
            )));
        }
        let table = noise.cell_table(&grid, quad_order);
        let faces = (0..grid.num_cells()).flat_map(|c| grid.faces(c).collect::<Vec<_>>()).collect();
        Ok(Scheme { grid, flux, noise, table, faces })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn flux(&self) -> &MonotoneFlux {
        &self.flux
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn table(&self) -> &CellNoiseTable {
        &self.table
    }

    /// The `2N` oriented faces of `cell`.
    pub fn faces(&self, cell: usize) -> &[Face] {
        let per = 2 * self.grid.dim();
        &self.faces[cell * per..(cell + 1) * per]
    }

    /// Lipschitz constant the CFL condition is checked against.
    pub fn lipschitz(&self) -> f64 {
        self.flux.lipschitz()
    }

    pub fn time_grid(&self, theta: f64, t_final: f64) -> Result<TimeGrid> {
        TimeGrid::cfl(&self.grid, self.lipschitz(), theta, t_final)
    }

    pub fn initial_state<F: Fn(&[f64]) -> f64>(&self, u0: F) -> Vec<f64> {
        init_state(&self.grid, u0, DEFAULT_QUAD_ORDER)
    }

    fn half_value(&self, v: &[f64], dt: f64, cell: usize) -> f64 {
        let area = self.grid.face_area();
        let vk = v[cell];
        let flux: f64 = self.faces(cell).iter().map(|f| area * self.flux.eval(f.axis, f.sign, vk, v[f.neighbor])).sum();
        vk - dt / self.grid.cell_volume() * flux
    }

    /// `v^{n+1/2}`; rejects time steps violating `Δt |∂K|/|K| L ≤ 1`.
    pub fn half_step(&self, v: &[f64], dt: f64) -> Result<Vec<f64>> {
        check_cfl(&self.grid, self.lipschitz(), dt)?;
        Ok(self.map_cells(|cell| self.half_value(v, dt, cell)))
    }

    fn map_cells<F: Fn(usize) -> f64 + Sync + Send>(&self, f: F) -> Vec<f64> {
        let n = self.grid.num_cells();
        #[cfg(feature = "parallel")]
        if n >= PARALLEL_CELLS {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// `v^{n+1} = v^{n+1/2} + √Δt Σ_k g_{k,K}(v^n_K) X_k`.
    pub fn stochastic_step(&self, half: &[f64], pre: &[f64], dt: f64, x: &[f64]) -> Vec<f64> {
        if self.table.k_max() == 0 {
            return half.to_vec();
        }
        let s = dt.sqrt();
        half.iter().zip(pre).enumerate().map(|(cell, (&h, &v))| h + s * self.table.forcing(cell, v, x)).collect()
    }

    /// One full step; returns `(v^{n+1/2}, v^{n+1})`.
    pub fn step(&self, n: usize, v: &[f64], dt: f64, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let half = self.half_step(v, dt)?;
        let post = self.stochastic_step(&half, v, dt, x);
        if let Some(cell) = post.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { step: n, cell });
        }
        Ok((half, post))
    }

    /// Advances `v0` over `time`, handing each step to `visit`; returns the
    /// final state. No step data outlives its visit.
    pub fn run_streaming<S, F>(&self, v0: &[f64], time: &TimeGrid, source: &S, mut visit: F) -> Result<Vec<f64>>
    where
        S: IncrementSource + ?Sized,
        F: FnMut(StepView<'_>) -> Result<()>,
    {
        if v0.len() != self.grid.num_cells() {
            return Err(Error::Config(format!(
                "state has {} values, grid has {} cells",
                v0.len(),
                self.grid.num_cells()
            )));
        }
        if let Some(cell) = v0.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { step: 0, cell });
        }
        let mut v = v0.to_vec();
        let mut x = vec![0.0; self.table.k_max()];
        for n in 0..time.num_steps() {
            let dt = time.dt(n);
            source.fill(n, &mut x);
            let (half, post) = self.step(n, &v, dt, &x)?;
            visit(StepView { n, t: time.times()[n], dt, pre: &v, half: &half, post: &post, increments: &x })?;
            v = post;
        }
        Ok(v)
    }

    /// Full trajectory with every intermediate state retained.
    pub fn run<S: IncrementSource + ?Sized>(&self, v0: &[f64], time: &TimeGrid, source: &S) -> Result<Trajectory> {
        let mut states = vec![v0.to_vec()];
        let mut halves = Vec::with_capacity(time.num_steps());
        let mut increments = Vec::with_capacity(time.num_steps());
        self.run_streaming(v0, time, source, |s| {
            halves.push(s.half.to_vec());
            increments.push(s.increments.to_vec());
            states.push(s.post.to_vec());
            Ok(())
        })?;
        Ok(Trajectory { times: time.times().to_vec(), dts: time.dts().to_vec(), states, halves, increments })
    }

    /// `v^♯_K(t) = v^{n+1/2}_K + Σ_k g_{k,K}(v^n_K) (β_k(t) − β_k(t_n))`
    /// for given Brownian increments `db` since `t_n`.
    pub fn v_sharp(&self, step: &StepView<'_>, db: &[f64]) -> Vec<f64> {
        step.half.iter().zip(step.pre).enumerate().map(|(cell, (&h, &v))| h + self.table.forcing(cell, v, db)).collect()
    }

    /// `v^♯` at time `t ∈ [t_n, t_{n+1}]`, using the Brownian bridge of the
    /// step refined to `2^levels` substeps (`t` is rounded down to the bridge
    /// grid).
    pub fn v_sharp_at(&self, step: &StepView<'_>, path: &WienerIncrements, t: f64, levels: u32) -> Result<Vec<f64>> {
        let end = step.t + step.dt;
        if t < step.t || t > end {
            return Err(Error::OutsideStep { t, start: step.t, end });
        }
        let j_max = 1usize << levels;
        let j = (((t - step.t) / step.dt * j_max as f64) + 1e-9).floor().min(j_max as f64) as usize;
        let db: Vec<f64> = (0..self.table.k_max())
            .map(|k| {
                let b = path.bridge_to(step.n, k, step.dt, levels, step.dt.sqrt() * step.increments[k]);
                b[j]
            })
            .collect();
        Ok(self.v_sharp(step, &db))
    }
}

/// Stored trajectory: `states[n] = v^n` (`n = 0..=N_T`), `halves[n] =
/// v^{n+1/2}` and `increments[n] = X^{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub dts: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub halves: Vec<Vec<f64>>,
    pub increments: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn num_steps(&self) -> usize {
        self.dts.len()
    }

    pub fn step(&self, n: usize) -> StepView<'_> {
        StepView {
            n,
            t: self.times[n],
            dt: self.dts[n],
            pre: &self.states[n],
            half: &self.halves[n],
            post: &self.states[n + 1],
            increments: &self.increments[n],
        }
    }

    pub fn steps(&self) -> impl Iterator<Item = StepView<'_>> {
        (0..self.num_steps()).map(|n| self.step(n))
    }

    pub fn initial(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// `v_δ(t)`: left-constant in time, `v^n` on `[t_n, t_{n+1})`; `t = T`
    /// returns the final state.
    pub fn value_at(&self, t: f64) -> &[f64] {
        if t >= *self.times.last().unwrap() {
            return self.final_state();
        }
        let n = self.times.partition_point(|&s| s <= t).saturating_sub(1);
        &self.states[n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{FluxFunction, NumericalFluxKind};
    use crate::noise::{Mode, Trig};
    use approx::assert_relative_eq;

    fn burgers_scheme(m: usize) -> Scheme {
        let grid = TorusGrid::new(1, m).unwrap();
        let flux = MonotoneFlux::godunov(FluxFunction::burgers(1).unwrap());
        Scheme::new(grid, flux, NoiseModel::zero()).unwrap()
    }

    #[test]
    fn cfl_step_example() {
        let g = TorusGrid::new(1, 2).unwrap();
        assert_eq!(TimeGrid::cfl_step(&g, 1.0, 0.5), 1.0 / 32.0);
    }

    #[test]
    fn final_step_is_trimmed() {
        let dt = 1.0 / 32.0;
        let tg = TimeGrid::uniform(dt, 3.5 * dt).unwrap();
        assert_eq!(tg.num_steps(), 4);
        assert_eq!(&tg.dts()[..3], &[dt, dt, dt]);
        assert_relative_eq!(tg.dts()[3], dt / 2.0, max_relative = 1e-12);
        assert_eq!(tg.t_final(), 3.5 * dt);
    }

    #[test]
    fn exact_multiples_have_no_sliver() {
        let tg = TimeGrid::uniform(0.1, 0.3).unwrap();
        assert_eq!(tg.num_steps(), 3);
        let tg = TimeGrid::uniform(1.0 / 640.0, 200.0 / 640.0).unwrap();
        assert_eq!(tg.num_steps(), 200);
    }

    #[test]
    fn cfl_grid_properties() {
        for (dim, m) in [(1, 16), (2, 8)] {
            let g = TorusGrid::new(dim, m).unwrap();
            let tg = TimeGrid::cfl(&g, 1.25, 0.5, 0.7).unwrap();
            let sum: f64 = tg.dts().iter().sum();
            assert_relative_eq!(sum, 0.7, max_relative = 1e-12);
            let bound = 0.5 * g.alpha().powi(2) * g.h() / 2.5;
            assert!(tg.dts().iter().all(|&d| d <= bound * (1.0 + 1e-15) && d <= 1.0));
            assert!(check_cfl(&g, 1.25, tg.max_dt()).is_ok());
        }
    }

    #[test]
    fn halving_h_halves_dt() {
        let a = TimeGrid::cfl_step(&TorusGrid::new(1, 16).unwrap(), 1.25, 0.5);
        let b = TimeGrid::cfl_step(&TorusGrid::new(1, 32).unwrap(), 1.25, 0.5);
        assert_eq!(a, 2.0 * b);
    }

    #[test]
    fn rejects_bad_theta_and_time() {
        let g = TorusGrid::new(1, 4).unwrap();
        assert!(TimeGrid::cfl(&g, 1.0, 1.0, 1.0).is_err());
        assert!(TimeGrid::cfl(&g, 1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn two_cell_burgers_half_step() {
        let s = burgers_scheme(2);
        let half = s.half_step(&[1.0, 0.0], 1.0 / 32.0).unwrap();
        assert_eq!(half, vec![31.0 / 32.0, 1.0 / 32.0]);
    }

    #[test]
    fn constant_state_is_stationary() {
        let s = burgers_scheme(8);
        let v = vec![0.37; 8];
        assert_eq!(s.half_step(&v, 0.01).unwrap(), v);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let s = burgers_scheme(8);
        assert!(matches!(s.half_step(&[0.0; 8], 0.5), Err(Error::Cfl(_))));
    }

    #[test]
    fn initial_state_examples() {
        let g = TorusGrid::new(1, 2).unwrap();
        assert_eq!(init_state(&g, |_| 0.5, 3), vec![0.5, 0.5]);
        let v = init_state(&g, |x| if x[0] < 0.5 { -1.0 } else { 1.0 }, 3);
        assert_eq!(v, vec![-1.0, 1.0]);
        let v = init_state(&g, |x| (2.0 * std::f64::consts::PI * x[0]).sin(), 8);
        assert_relative_eq!(v[0], 2.0 / std::f64::consts::PI, epsilon = 1e-10);
        assert_relative_eq!(v[1], -2.0 / std::f64::consts::PI, epsilon = 1e-10);
    }

    #[test]
    fn stochastic_step_examples() {
        let grid = TorusGrid::new(1, 1).unwrap();
        let flux = MonotoneFlux::godunov(FluxFunction::burgers(1).unwrap());
        let noise = NoiseModel::separable(vec![Mode::new(0.1, &[], Trig::Const)], 1.0).unwrap();
        let s = Scheme::new(grid, flux, noise).unwrap();
        // g(0) = 0.1, Δt = 0.01, X = 2
        let post = s.stochastic_step(&[0.3], &[0.0], 0.01, &[2.0]);
        assert_relative_eq!(post[0], 0.32, epsilon = 1e-15);
        // coefficients vanish for |v^n| >= 1
        assert_eq!(s.stochastic_step(&[0.3], &[1.0], 0.01, &[2.0]), vec![0.3]);
        // zero noise
        assert_eq!(burgers_scheme(1).stochastic_step(&[0.3], &[0.0], 0.01, &[]), vec![0.3]);
    }

    #[test]
    fn upwind_equivalence_for_linear_flux() {
        let m = 16;
        let grid = TorusGrid::new(1, m).unwrap();
        let flux = MonotoneFlux::new(FluxFunction::linear(&[1.0]).unwrap(), NumericalFluxKind::Godunov);
        let s = Scheme::new(grid, flux, NoiseModel::zero()).unwrap();
        let v: Vec<f64> = (0..m).map(|i| if (4..9).contains(&i) { 1.0 } else { 0.0 }).collect();
        let dt = 0.01;
        let half = s.half_step(&v, dt).unwrap();
        let nu = dt * m as f64;
        for i in 0..m {
            let up = v[i] - nu * (v[i] - v[(i + m - 1) % m]);
            assert!((half[i] - up).abs() < 1e-14);
        }
    }

    #[test]
    fn v_sharp_matches_step_ends() {
        let grid = TorusGrid::new(1, 4).unwrap();
        let flux = MonotoneFlux::godunov(FluxFunction::burgers(1).unwrap());
        let noise = NoiseModel::separable(vec![Mode::new(0.3, &[1.0], Trig::Sin)], 1.0).unwrap();
        let s = Scheme::new(grid, flux, noise).unwrap();
        let path = WienerIncrements::new(3);
        let v0 = s.initial_state(|x| 0.5 * (2.0 * std::f64::consts::PI * x[0]).cos());
        let tg = s.time_grid(0.5, 0.05).unwrap();
        let traj = s.run(&v0, &tg, &path).unwrap();
        let st = traj.step(1);
        let at_start = s.v_sharp_at(&st, &path, st.t, 4).unwrap();
        assert_eq!(at_start, st.half);
        let at_end = s.v_sharp_at(&st, &path, st.t + st.dt, 4).unwrap();
        for (a, b) in at_end.iter().zip(st.post) {
            assert_relative_eq!(*a, *b, epsilon = 1e-15);
        }
        assert!(s.v_sharp_at(&st, &path, st.t + 2.0 * st.dt, 4).is_err());
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let flux = MonotoneFlux::godunov(FluxFunction::burgers(2).unwrap());
        let noise = NoiseModel::separable(vec![Mode::new(0.2, &[1.0, 0.0], Trig::Sin)], 1.0).unwrap();
        let s = Scheme::new(grid, flux, noise).unwrap();
        let v0 = s.initial_state(|x| 0.5 * (2.0 * std::f64::consts::PI * (x[0] + x[1])).sin());
        let tg = s.time_grid(0.5, 0.1).unwrap();
        let a = s.run(&v0, &tg, &WienerIncrements::new(11)).unwrap();
        let b = s.run(&v0, &tg, &WienerIncrements::new(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn value_at_is_left_constant() {
        let s = burgers_scheme(4);
        let tg = TimeGrid::uniform(0.01, 0.03).unwrap();
        let v0 = vec![1.0, 0.0, 0.0, 0.0];
        let traj = s.run(&v0, &tg, &WienerIncrements::new(0)).unwrap();
        assert_eq!(traj.value_at(0.0), &traj.states[0][..]);
        assert_eq!(traj.value_at(0.015), &traj.states[1][..]);
        assert_eq!(traj.value_at(0.03), traj.final_state());
    }
}
