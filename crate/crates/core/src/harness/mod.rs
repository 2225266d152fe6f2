//! Experiment drivers: exact reference solutions, deterministic convergence
//! tables, Monte Carlo ensembles and the coupled-path self-convergence study.
//!
//! Ensembles draw path `i` from the seed `path_seed(master, i)` and are
//! collected in path order, so every statistic is a deterministic function of
//! the configuration regardless of how many threads execute the paths.

mod coupled;
mod exact;
mod table;

pub use coupled::{coupled_refinement_study, CoupledIncrements, CoupledStudy};
pub use exact::ReferenceSolution;
pub use table::{ConvergenceRow, ConvergenceTable, TABLE_COLUMNS};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::diagnostics::{diagnose, DiagnosticsReport, EnsembleSummary, MeanStat};
use crate::rng::{path_seed, WienerIncrements};
use crate::{Error, Result};

/// Evaluates `f(i)` for `i = 0..n`, in parallel when available, preserving order.
pub(crate) fn map_paths<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Deterministic convergence against the exact solution: the configuration
/// is run without noise on `m` cells per direction for every entry of
/// `ms`; rows hold `L¹` errors (and `L²` errors alongside) at the final time.
pub fn deterministic_convergence(cfg: &RunConfig, ms: &[usize]) -> Result<ConvergenceTable> {
    let reference = ReferenceSolution::from_config(cfg)?;
    let mut table = ConvergenceTable::default();
    for (level, &m) in ms.iter().enumerate() {
        let c = cfg.with_m(m).without_noise();
        let scheme = c.scheme()?;
        let time = c.time_grid(&scheme)?;
        let v0 = c.initial_state(scheme.grid())?;
        let v = scheme.run_streaming(&v0, &time, &WienerIncrements::new(0), |_| Ok(()))?;
        let t = time.t_final();
        table.push(ConvergenceRow {
            level,
            m,
            h: scheme.grid().h(),
            dt: time.max_dt(),
            paths: 1,
            p: 1.0,
            error: reference.error_lp(scheme.grid(), &v, t, 1.0)?,
            stderr: 0.0,
            order: None,
            l2_error: Some(reference.error_lp(scheme.grid(), &v, t, 2.0)?),
        });
    }
    Ok(table)
}

/// Result of [`mc_ensemble`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub summary: EnsembleSummary,
    pub reports: Vec<DiagnosticsReport>,
}

impl Ensemble {
    /// `E ‖v(T)‖_p^p` for every moment exponent of the diagnostics.
    pub fn final_norms(&self) -> Vec<(u32, MeanStat)> {
        self.summary.moments.iter().map(|m| (m.p, m.final_norm)).collect()
    }
}

/// Runs the configuration along the Brownian paths with the given seeds.
pub fn run_paths(cfg: &RunConfig, seeds: &[u64]) -> Result<Vec<DiagnosticsReport>> {
    let scheme = cfg.scheme()?;
    let time = cfg.time_grid(&scheme)?;
    let v0 = cfg.initial_state(scheme.grid())?;
    let options = cfg.diagnostics_options();
    map_paths(seeds.len(), |i| diagnose(&scheme, &v0, &time, &WienerIncrements::new(seeds[i]), options.clone()))
}

/// `paths` independent trajectories with seeds derived from the master seed.
pub fn mc_ensemble(cfg: &RunConfig, paths: usize) -> Result<Ensemble> {
    if paths < 2 {
        return Err(Error::Config(format!("an ensemble needs at least 2 paths, got {paths}")));
    }
    let master = cfg.noise.seed;
    let seeds: Vec<u64> = (0..paths as u64).map(|i| path_seed(master, i)).collect();
    let reports = run_paths(cfg, &seeds)?;
    Ok(Ensemble { master_seed: master, summary: EnsembleSummary::from_reports(&reports), seeds, reports })
}

/// Moment estimates of one refinement level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentLevel {
    pub m: usize,
    pub p: u32,
    /// `E sup_n (1 + ‖v^n‖_p^p)`
    pub sup_nu: f64,
    /// `E |∫∫∫ (1 + |ξ|^p) dm_δ|²`
    pub mass_square: f64,
}

/// Moment bounds across grid refinements (one ensemble per level).
pub fn moment_study(cfg: &RunConfig, ms: &[usize], paths: usize) -> Result<Vec<MomentLevel>> {
    let mut out = Vec::new();
    for &m in ms {
        let mut c = cfg.with_m(m);
        c.diagnostics.weak_bv = false;
        c.diagnostics.phi_square = false;
        let e = mc_ensemble(&c, paths)?;
        for row in &e.summary.moments {
            out.push(MomentLevel { m, p: row.p, sup_nu: row.sup_nu.mean, mass_square: row.mass_square.mean });
        }
    }
    Ok(out)
}
