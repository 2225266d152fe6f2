//! The run configuration shared by the command-line tool and the web demo.
//!
//! Every section has defaults, so an empty document is a valid configuration
//! (1D Burgers, Godunov, `m = 32`, four noise modes, sine initial data).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsOptions;
use crate::flux::{FluxFunction, MonotoneFlux, NumericalFluxKind};
use crate::mesh::{TorusGrid, DEFAULT_QUAD_ORDER};
use crate::noise::{Mode, NoiseModel, Trig, DEFAULT_NOISE_QUAD_ORDER};
use crate::scheme::{Scheme, TimeGrid, DEFAULT_THETA};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub flux: FluxConfig,
    pub noise: NoiseConfig,
    pub time: TimeConfig,
    pub initial: InitialCondition,
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputConfig,
    pub ensemble: EnsembleConfig,
    pub refinement: RefinementConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub m: usize,
    /// Gauss order per direction for initial cell averages.
    pub quad_order: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { dim: 1, m: 32, quad_order: DEFAULT_QUAD_ORDER }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluxConfig {
    /// `burgers`, `cubic` or `linear`.
    pub name: String,
    /// Advection velocity of the linear flux.
    pub velocity: Vec<f64>,
    pub numerical: NumericalFluxKind,
    /// Rusanov viscosity; defaults to `L_A`.
    pub lambda: Option<f64>,
    /// Declared Lipschitz constant (checked against the sampled one).
    pub lipschitz: Option<f64>,
    /// Working range of the flux; defaults to `[−1.25, 1.25]`.
    pub range: Option<[f64; 2]>,
}

impl Default for FluxConfig {
    fn default() -> Self {
        FluxConfig {
            name: "burgers".into(),
            velocity: vec![1.0],
            numerical: NumericalFluxKind::Godunov,
            lambda: None,
            lipschitz: None,
            range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Explicit modes; when absent, [`default_modes`] is used.
    pub modes: Option<Vec<Mode>>,
    /// Exponent of the `u`-profile `max(1 − u², 0)^q`.
    pub q: f64,
    /// Master seed of the Brownian increments.
    pub seed: u64,
    /// Gauss order per direction of the cell-averaged coefficients.
    pub quad_order: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { modes: None, q: 1.0, seed: 0, quad_order: DEFAULT_NOISE_QUAD_ORDER }
    }
}

/// Default truncation: `k_max = 4` modes of amplitude 0.1 along the first axis.
pub fn default_modes(dim: usize) -> Vec<Mode> {
    (1..=4)
        .map(|k| {
            let mut kappa = vec![0.0; dim.max(1)];
            kappa[0] = ((k + 1) / 2) as f64;
            let trig = if k % 2 == 1 { Trig::Sin } else { Trig::Cos };
            Mode::new(0.1, &kappa, trig)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    pub theta: f64,
    /// Fixed step; when absent the CFL step for `theta` is used.
    pub dt: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { t_final: 0.5, theta: DEFAULT_THETA, dt: None }
    }
}

/// Initial data `u0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Constant {
        value: f64,
    },
    /// `offset + amplitude · sin(2π κ·x)`.
    Sine {
        #[serde(default = "half")]
        amplitude: f64,
        #[serde(default = "unit_x")]
        wavevector: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `left` on `[0, x0)`, `right` on `[x0, 1)` in the first coordinate.
    Riemann {
        left: f64,
        right: f64,
        #[serde(default = "half")]
        x0: f64,
    },
    /// Independent uniform cell values in `[lo, hi]`.
    Random {
        #[serde(default = "minus_one")]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
        #[serde(default)]
        seed: u64,
    },
    /// `amplitude · sign(sin(2π x₁))`.
    Sign {
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn half() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}
fn minus_one() -> f64 {
    -1.0
}
fn unit_x() -> Vec<f64> {
    vec![1.0]
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Sine { amplitude: 0.5, wavevector: vec![1.0], offset: 0.0 }
    }
}

impl InitialCondition {
    /// Pointwise value, for the kinds that have one.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        use std::f64::consts::PI;
        match self {
            InitialCondition::Constant { value } => Some(*value),
            InitialCondition::Sine { amplitude, wavevector, offset } => {
                let phase: f64 = wavevector.iter().zip(x).map(|(k, x)| 2.0 * PI * k * x).sum();
                Some(offset + amplitude * phase.sin())
            }
            InitialCondition::Riemann { left, right, x0 } => {
                let y = x[0].rem_euclid(1.0);
                Some(if y < *x0 { *left } else { *right })
            }
            InitialCondition::Random { .. } => None,
            InitialCondition::Sign { amplitude } => {
                let y = x[0].rem_euclid(1.0);
                Some(if y == 0.0 || y == 0.5 {
                    0.0
                } else if y < 0.5 {
                    *amplitude
                } else {
                    -amplitude
                })
            }
        }
    }

    /// Cell averages on `grid`.
    pub fn cell_values(&self, grid: &TorusGrid, quad_order: usize) -> Result<Vec<f64>> {
        match self {
            InitialCondition::Random { lo, hi, seed } => {
                let dist =
                    Uniform::new_inclusive(*lo, *hi).map_err(|e| Error::Config(format!("random initial data: {e}")))?;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..grid.num_cells()).map(|_| dist.sample(&mut rng)).collect())
            }
            other => Ok(crate::scheme::init_state(grid, |x| other.eval(x).unwrap_or(0.0), quad_order)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub weak_bv: bool,
    pub phi_square: bool,
    pub lp_identities: Vec<u32>,
    pub moments: Vec<u32>,
    pub energy_tolerance: f64,
    pub lp_tolerance: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        let d = DiagnosticsOptions::default();
        DiagnosticsConfig {
            weak_bv: d.weak_bv,
            phi_square: d.phi_square,
            lp_identities: d.lp_identities,
            moments: d.moments,
            energy_tolerance: d.energy_tolerance,
            lp_tolerance: d.lp_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    /// Times at which `run` writes state snapshots (the final time is always written).
    pub snapshot_times: Vec<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into(), snapshot_times: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub paths: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { paths: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementConfig {
    /// Cells per direction of each level, coarse to fine.
    pub levels: Vec<usize>,
    /// Exponent of the space-time error norm.
    pub p: f64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig { levels: vec![8, 16, 32, 64], p: 1.0 }
    }
}

impl RunConfig {
    /// Checks every invariant that does not require building the scheme.
    pub fn validate(&self) -> Result<()> {
        if !(self.time.theta > 0.0 && self.time.theta < 1.0) {
            return Err(Error::Config(format!("time.theta must lie in (0, 1), got {}", self.time.theta)));
        }
        if !(self.time.t_final > 0.0) || !self.time.t_final.is_finite() {
            return Err(Error::Config(format!("time.t_final must be positive, got {}", self.time.t_final)));
        }
        if self.ensemble.paths == 0 {
            return Err(Error::Config("ensemble.paths must be at least 1".into()));
        }
        if !(self.refinement.p >= 1.0) {
            return Err(Error::Config(format!("refinement.p must be >= 1, got {}", self.refinement.p)));
        }
        for w in self.refinement.levels.windows(2) {
            if w[1] != 2 * w[0] {
                return Err(Error::Config(format!("refinement levels must double: {} is followed by {}", w[0], w[1])));
            }
        }
        if self.diagnostics.lp_identities.iter().any(|&p| p < 2 || p % 2 == 1) {
            return Err(Error::Config("diagnostics.lp_identities must be even exponents >= 2".into()));
        }
        if self.output.snapshot_times.iter().any(|&t| !(0.0..=self.time.t_final).contains(&t)) {
            return Err(Error::Config("output.snapshot_times must lie in [0, t_final]".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.grid.dim, self.grid.m)
    }

    pub fn flux_function(&self) -> Result<FluxFunction> {
        let dim = self.grid.dim;
        let mut f = match self.flux.name.as_str() {
            "burgers" => FluxFunction::burgers(dim)?,
            "cubic" => FluxFunction::cubic(dim)?,
            "linear" => {
                let mut c = self.flux.velocity.clone();
                c.resize(dim, 0.0);
                FluxFunction::linear(&c)?
            }
            other => return Err(Error::Config(format!("unknown flux '{other}'"))),
        };
        if let Some([lo, hi]) = self.flux.range {
            f = f.with_range(lo, hi)?;
        }
        if let Some(l) = self.flux.lipschitz {
            f = f.with_declared_lipschitz(l)?;
        }
        Ok(f)
    }

    pub fn numerical_flux(&self) -> Result<MonotoneFlux> {
        let f = self.flux_function()?;
        match self.flux.numerical {
            NumericalFluxKind::Rusanov => MonotoneFlux::rusanov(f, self.flux.lambda),
            kind => Ok(MonotoneFlux::new(f, kind)),
        }
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.noise.modes.clone().unwrap_or_else(|| default_modes(self.grid.dim))
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::separable(self.modes(), self.noise.q)
    }

    pub fn scheme(&self) -> Result<Scheme> {
        self.validate()?;
        Scheme::with_noise_quadrature(self.grid()?, self.numerical_flux()?, self.noise_model()?, self.noise.quad_order)
    }

    pub fn time_grid(&self, scheme: &Scheme) -> Result<TimeGrid> {
        match self.time.dt {
            Some(dt) => {
                let tg = TimeGrid::uniform(dt, self.time.t_final)?;
                crate::scheme::check_cfl(scheme.grid(), scheme.lipschitz(), tg.max_dt())?;
                Ok(tg)
            }
            None => scheme.time_grid(self.time.theta, self.time.t_final),
        }
    }

    pub fn initial_state(&self, grid: &TorusGrid) -> Result<Vec<f64>> {
        let v = self.initial.cell_values(grid, self.grid.quad_order)?;
        if v.iter().any(|x| x.abs() > 1.0) {
            log::warn!(
                "initial data leaves [-1, 1]; the noise vanishes there and the maximum principle is not available"
            );
        }
        Ok(v)
    }

    pub fn diagnostics_options(&self) -> DiagnosticsOptions {
        let d = &self.diagnostics;
        DiagnosticsOptions {
            theta: self.time.theta,
            lp_identities: d.lp_identities.clone(),
            moments: d.moments.clone(),
            weak_bv: d.weak_bv,
            phi_square: d.phi_square,
            energy_tolerance: d.energy_tolerance,
            lp_tolerance: d.lp_tolerance,
        }
    }

    /// Same configuration on `m` cells per direction.
    pub fn with_m(&self, m: usize) -> RunConfig {
        let mut c = self.clone();
        c.grid.m = m;
        c
    }

    /// Same configuration without forcing.
    pub fn without_noise(&self) -> RunConfig {
        let mut c = self.clone();
        c.noise.modes = Some(Vec::new());
        c
    }
}
