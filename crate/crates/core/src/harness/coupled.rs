//! Self-convergence on shared Brownian paths.
//!
//! Every level runs on its own CFL time grid; since `Δt ∝ h` the grids are
//! nested and each coarse step is tiled by `2^r` fine steps of the finest
//! level. The finest level consumes the path's increments directly and every
//! coarser level consumes their aggregates, so all levels see the same
//! Brownian motion.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::diagnostics::MeanStat;
use crate::mesh::TorusGrid;
use crate::rng::{couple_time_refinement, path_seed, IncrementSource, WienerIncrements};
use crate::scheme::{Scheme, TimeGrid, Trajectory};
use crate::{Error, Result};

use super::{map_paths, ConvergenceRow, ConvergenceTable};

/// Increments of a coarse time grid assembled from a fine one.
#[derive(Debug, Clone)]
pub struct CoupledIncrements<'a> {
    path: &'a WienerIncrements,
    ratio: usize,
    fine_dts: &'a [f64],
    coarse_dts: &'a [f64],
}

impl<'a> CoupledIncrements<'a> {
    /// Checks that coarse step `n` is tiled by fine steps `ratio·n ..
    /// min(ratio·(n+1), N_fine)`.
    pub fn new(path: &'a WienerIncrements, fine: &'a TimeGrid, coarse: &'a TimeGrid, ratio: usize) -> Result<Self> {
        let nf = fine.num_steps();
        for (n, &dt) in coarse.dts().iter().enumerate() {
            let lo = ratio * n;
            let hi = (ratio * (n + 1)).min(nf);
            if lo >= hi {
                return Err(Error::Tiling(format!("coarse step {n} has no fine substeps")));
            }
            let sum: f64 = fine.dts()[lo..hi].iter().sum();
            if (sum - dt).abs() > 1e-12 * dt {
                return Err(Error::Tiling(format!("coarse step {n}: {dt:e} vs fine sum {sum:e}")));
            }
        }
        if ratio * (coarse.num_steps() - 1) >= nf || ratio * coarse.num_steps() < nf {
            return Err(Error::Tiling("coarse and fine grids end at different steps".into()));
        }
        Ok(CoupledIncrements { path, ratio, fine_dts: fine.dts(), coarse_dts: coarse.dts() })
    }
}

impl IncrementSource for CoupledIncrements<'_> {
    fn fill(&self, n: usize, out: &mut [f64]) {
        let lo = self.ratio * n;
        let hi = (self.ratio * (n + 1)).min(self.fine_dts.len());
        let dts = &self.fine_dts[lo..hi];
        for (k, x) in out.iter_mut().enumerate() {
            let xs: Vec<f64> = (lo..hi).map(|j| self.path.normal(j as u64, k as u32, 0)).collect();
            *x = couple_time_refinement(self.coarse_dts[n], dts, &xs).expect("tiling checked at construction");
        }
    }
}

/// Result of [`coupled_refinement_study`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledStudy {
    pub master_seed: u64,
    pub table: ConvergenceTable,
    /// `errors[l][i]`: difference between levels `l` and `l+1` on path `i`.
    pub errors: Vec<Vec<f64>>,
}

impl CoupledStudy {
    /// Paired comparison of consecutive rows: mean and standard error of
    /// `e_l − e_{l+1}` per path.
    pub fn decrements(&self) -> Vec<MeanStat> {
        self.errors
            .windows(2)
            .map(|w| {
                let d: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
                MeanStat::from_samples(&d)
            })
            .collect()
    }

    /// Every consecutive decrease is positive by more than `k` standard errors.
    pub fn decreasing_within(&self, k: f64) -> bool {
        self.decrements().iter().all(|d| d.mean - k * d.stderr > 0.0)
    }
}

/// `Σ_j δt_j Σ_{K'} |K'| |v_c(t_j) − v_f(t_j)|^p` with the coarse field
/// prolonged cell-constant and both fields left-constant in time.
fn space_time_difference(
    coarse: &Trajectory,
    fine: &Trajectory,
    fine_grid: &TorusGrid,
    parents: &[usize],
    ratio: usize,
    p: f64,
) -> f64 {
    let vol = fine_grid.cell_volume();
    let mut total = 0.0;
    for (j, &dt) in fine.dts.iter().enumerate() {
        let vc = &coarse.states[j / ratio];
        let vf = &fine.states[j];
        let s: f64 = vf.iter().zip(parents).map(|(f, &par)| (vc[par] - f).abs().powf(p)).sum();
        total += dt * vol * s;
    }
    total
}

/// Coupled-path self-convergence over the levels `cfg.refinement.levels`
/// (coarse to fine, each doubling the previous) with `paths` paths.
pub fn coupled_refinement_study(cfg: &RunConfig, paths: usize) -> Result<CoupledStudy> {
    let ms = &cfg.refinement.levels;
    if ms.len() < 2 {
        return Err(Error::Config("the coupled study needs at least two levels".into()));
    }
    if paths < 2 {
        return Err(Error::Config(format!("the coupled study needs at least 2 paths, got {paths}")));
    }
    cfg.validate()?;
    let p = cfg.refinement.p;

    let mut schemes = Vec::with_capacity(ms.len());
    let mut times = Vec::with_capacity(ms.len());
    let mut inits = Vec::with_capacity(ms.len());
    for &m in ms {
        let c = cfg.with_m(m);
        let s = c.scheme()?;
        times.push(c.time_grid(&s)?);
        inits.push(c.initial_state(s.grid())?);
        schemes.push(s);
    }
    let finest = ms.len() - 1;
    let parents: Vec<Vec<usize>> = schemes.windows(2).map(|w| w[0].grid().refine().1.parents()).collect();
    for (l, w) in schemes.windows(2).enumerate() {
        if w[0].grid().refine().0.m() != w[1].grid().m() {
            return Err(Error::Config(format!("levels {l} and {} are not nested", l + 1)));
        }
    }
    // every level must tile into the finest grid
    let probe = WienerIncrements::new(0);
    for l in 0..finest {
        CoupledIncrements::new(&probe, &times[finest], &times[l], 1 << (finest - l))?;
    }

    let master = cfg.noise.seed;
    let per_path: Vec<Vec<f64>> = map_paths(paths, |i| {
        let path = WienerIncrements::new(path_seed(master, i as u64));
        let trajectories: Vec<Trajectory> = (0..ms.len())
            .map(|l| run_level(&schemes[l], &inits[l], &times, l, finest, &path))
            .collect::<Result<_>>()?;
        Ok((0..finest)
            .map(|l| {
                space_time_difference(&trajectories[l], &trajectories[l + 1], schemes[l + 1].grid(), &parents[l], 2, p)
            })
            .collect())
    })?;

    let errors: Vec<Vec<f64>> = (0..finest).map(|l| per_path.iter().map(|e| e[l]).collect()).collect();
    let mut table = ConvergenceTable::default();
    for (l, e) in errors.iter().enumerate() {
        let stat = MeanStat::from_samples(e);
        table.push(ConvergenceRow {
            level: l,
            m: ms[l],
            h: schemes[l].grid().h(),
            dt: times[l].max_dt(),
            paths,
            p,
            error: stat.mean,
            stderr: stat.stderr,
            order: None,
            l2_error: None,
        });
    }
    Ok(CoupledStudy { master_seed: master, table, errors })
}

fn run_level(
    scheme: &Scheme,
    v0: &[f64],
    times: &[TimeGrid],
    l: usize,
    finest: usize,
    path: &WienerIncrements,
) -> Result<Trajectory> {
    if l == finest {
        scheme.run(v0, &times[l], path)
    } else {
        let src = CoupledIncrements::new(path, &times[finest], &times[l], 1 << (finest - l))?;
        scheme.run(v0, &times[l], &src)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{Mode, Trig};

    fn study_config(sigma: f64) -> RunConfig {
        let mut c = RunConfig::default();
        c.noise.modes = Some(if sigma > 0.0 { vec![Mode::new(sigma, &[1.0], Trig::Sin)] } else { vec![] });
        c.time.t_final = 0.2;
        c.refinement.levels = vec![8, 16, 32];
        c
    }

    #[test]
    fn coarse_increments_aggregate_fine_ones() {
        let fine = TimeGrid::uniform(0.1, 0.5).unwrap();
        let coarse = TimeGrid::uniform(0.2, 0.5).unwrap();
        let w = WienerIncrements::new(3);
        let src = CoupledIncrements::new(&w, &fine, &coarse, 2).unwrap();
        let mut x = [0.0];
        src.fill(0, &mut x);
        let expect = (w.normal(0, 0, 0) + w.normal(1, 0, 0)) / 2f64.sqrt();
        assert!((x[0] - expect).abs() < 1e-15);
        // the trimmed last coarse step is a single fine step
        src.fill(2, &mut x);
        assert_eq!(x[0], w.normal(4, 0, 0));
        assert!(CoupledIncrements::new(&w, &TimeGrid::uniform(0.15, 0.5).unwrap(), &coarse, 2).is_err());
    }

    #[test]
    fn zero_noise_study_is_deterministic_cauchy() {
        let s = coupled_refinement_study(&study_config(0.0), 2).unwrap();
        assert!(s.table.strictly_decreasing());
        assert!(s.errors.iter().all(|e| e[0] == e[1]));
    }

    #[test]
    fn study_is_bitwise_reproducible() {
        let c = study_config(0.2);
        let a = coupled_refinement_study(&c, 4).unwrap();
        let b = coupled_refinement_study(&c, 4).unwrap();
        assert_eq!(a, b);
    }
}
