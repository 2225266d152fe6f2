//! Energy ledgers, weak-BV sums and moment bounds of the scheme.
//!
//! [`Diagnostics`] is a streaming accumulator: feed it every [`StepView`] of a
//! run (typically from [`Scheme::run_streaming`]) and call
//! [`Diagnostics::finish`] to obtain a [`DiagnosticsReport`]. Reports of
//! independent paths are combined by [`EnsembleSummary::from_reports`].
//!
//! Notation: `‖·‖` is the `L²(𝕋^N)` norm of a cell field, `E_n = Δt_n Σ|K|∫m`
//! the dissipation of step `n`, `f̄^n_K = 1_{ξ ≥ v^n_K}`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::kinetic::{DissipationMeasure, FaceKinetics};
use crate::scheme::{Scheme, StepView};

/// Distance outside the convex envelope at which the dissipation density is
/// probed for its support property.
pub const SUPPORT_PROBE: f64 = 0.05;

/// Samples of `ξ ∈ [v_K, v_L]` for the pointwise entropy-flux bound.
const PHI_SQUARE_SAMPLES: usize = 33;

#[cfg(feature = "parallel")]
const PARALLEL_CELLS: usize = 256;

/// Which of the (more expensive) per-face quantities to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsOptions {
    /// θ of the CFL condition the run was set up with.
    pub theta: f64,
    /// Exponents of the `L^p` identities of the half-step (even, ≥ 2).
    pub lp_identities: Vec<u32>,
    /// Exponents of the moment bounds and of the reported `L^p` norms.
    pub moments: Vec<u32>,
    /// Face jump integrals, pathwise controls and the fE13 identities.
    pub weak_bv: bool,
    /// Pointwise bound `|Φ(ξ∨v_K)|² ≤ 2 sup|a| ∫(f̄_L − f̄_K)Φ`.
    pub phi_square: bool,
    pub energy_tolerance: f64,
    pub lp_tolerance: f64,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        DiagnosticsOptions {
            theta: crate::scheme::DEFAULT_THETA,
            lp_identities: vec![2, 4],
            moments: vec![1, 2, 4, 6],
            weak_bv: true,
            phi_square: true,
            energy_tolerance: 1e-8,
            lp_tolerance: 1e-8,
        }
    }
}

/// One row of the per-step energy ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub n: usize,
    pub t: f64,
    /// `½‖v^n‖²`
    pub half_energy_pre: f64,
    /// `½‖v^{n+1/2}‖²`
    pub half_energy_half: f64,
    /// `½‖v^{n+1}‖²`
    pub half_energy_post: f64,
    /// `Δt Σ|K| ∫ m dξ`
    pub dissipation: f64,
    /// `(Δt/2) Σ|K| G²_K(v^n_K)`
    pub noise_input: f64,
    /// `½‖v^{n+1/2}‖² + Δt Σ|K|∫m − ½‖v^n‖²`
    pub residual: f64,
}

pub const LEDGER_COLUMNS: &str = "n,t_n,half_energy_pre,half_energy_post,dissipation,noise_input,residual";

/// Round-trip formatting used by every numeric CSV column.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes ledger rows as CSV (header line included).
pub fn write_ledger_csv<W: Write>(out: &mut W, rows: &[LedgerRow]) -> io::Result<()> {
    writeln!(out, "{LEDGER_COLUMNS}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            format_f64(r.t),
            format_f64(r.half_energy_pre),
            format_f64(r.half_energy_post),
            format_f64(r.dissipation),
            format_f64(r.noise_input),
            format_f64(r.residual)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpIdentity {
    pub p: u32,
    /// Largest relative mismatch of `‖v^{n+1/2}‖_p^p + p(p−1)Δt Σ|K|∫ξ^{p−2}m = ‖v^n‖_p^p`.
    pub max_relative_residual: f64,
}

/// Left-hand sides of the weak-BV estimates, summed over the run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeakBv {
    /// `Σ Δt Σ_K Σ_L ∫ (f̄_L − f̄_K) Φ dξ`
    pub space_phi: f64,
    /// `Σ Δt Σ_K Σ_L ∫ (f_L − f_K) Φ̄ dξ`
    pub space_phibar: f64,
    /// `Σ ‖[v^{n+1/2} − v^n]₊‖²`
    pub time_plus: f64,
    /// `Σ ‖[v^{n+1/2} − v^n]₋‖²`
    pub time_minus: f64,
    /// `Σ ‖v^{n+1/2} − v^n‖²`
    pub time_flat: f64,
    /// `Σ ‖v^{n+1} − v^n‖²`
    pub time_full: f64,
    /// `Σ Δt Σ|K| ∫ f̄ m dξ`
    pub fbar_m: f64,
    /// `Σ Δt Σ|K| ∫ f m dξ`
    pub f_m: f64,
    /// θ for which the strong CFL condition holds on every step.
    pub theta_control: f64,
    pub control_space: bool,
    pub control_space_bar: bool,
    pub control_time: bool,
    pub control_time_bar: bool,
    /// Largest mismatch of the per-step identities behind the controls.
    pub max_identity_residual: f64,
    /// `θ⁻¹‖v(0)‖² + D0 T/θ`
    pub bound: f64,
    /// `θ⁻¹‖v(0)‖² + 2 D0 T/θ`
    pub bound_full: f64,
}

impl WeakBv {
    pub fn space_sum(&self) -> f64 {
        self.space_phi + self.space_phibar
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub p: u32,
    /// `sup_n (1 + ‖v^n‖_p^p)` over the time grid.
    pub sup_nu: f64,
    /// `Σ Δt Σ|K| ∫ (1 + |ξ|^p) m dξ`
    pub mass: f64,
    /// `‖v(T)‖_p^p`
    pub final_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(value: f64, tolerance: f64) -> Self {
        Check { value, tolerance, pass: value <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    pub energy_balance: Check,
    pub dissipation_positive: Check,
    pub dissipation_support: Check,
    pub lp_identities: Check,
    pub weak_bv_controls: bool,
    pub phi_square: Check,
}

impl Checks {
    pub fn all_pass(&self) -> bool {
        self.energy_balance.pass
            && self.dissipation_positive.pass
            && self.dissipation_support.pass
            && self.lp_identities.pass
            && self.weak_bv_controls
            && self.phi_square.pass
    }
}

/// Everything measured on one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub steps: usize,
    pub t_final: f64,
    pub max_dt: f64,
    pub d0: f64,
    pub ledger: Vec<LedgerRow>,
    /// `½‖v(0)‖²`
    pub energy_initial: f64,
    /// `½‖v(T)‖²`
    pub energy_final: f64,
    /// `ℰ(T) = Σ Δt Σ|K| ∫ m dξ`
    pub dissipation_total: f64,
    pub noise_input_total: f64,
    /// `Σ [½‖v^{n+1} − v^{n+1/2}‖² − (Δt/2)Σ|K|G²]`
    pub noise_increment_excess: f64,
    pub max_energy_residual: f64,
    pub min_dissipation: f64,
    pub max_outside_support: f64,
    pub lp_identities: Vec<LpIdentity>,
    pub weak_bv: Option<WeakBv>,
    /// `max |Φ(ξ∨v_K)|² / (2 sup|a| ∫(f̄_L − f̄_K)Φ)`; at most 1.
    pub phi_square_ratio: Option<f64>,
    /// Conditional-expectation estimate of `∫∫|∫ |f_δ − 𝚏_δ| dξ|² dx dt`.
    pub closeness: f64,
    /// `[θ⁻¹‖v(0)‖² + D0 T (1 + θ⁻¹)] max Δt`
    pub closeness_bound: f64,
    pub moments: Vec<MomentRow>,
    pub checks: Checks,
}

#[derive(Debug, Clone, Default)]
struct CellTerms {
    mass: f64,
    fbar_m: f64,
    f_m: f64,
    lp: Vec<f64>,
    moments: Vec<f64>,
    m_min: f64,
    outside: f64,
    space_phi: f64,
    space_phibar: f64,
    phi_square: f64,
}

/// Streaming accumulator of a [`DiagnosticsReport`].
#[derive(Debug, Clone)]
pub struct Diagnostics<'a> {
    scheme: &'a Scheme,
    options: DiagnosticsOptions,
    ledger: Vec<LedgerRow>,
    energy_initial: f64,
    l2_initial: f64,
    t_final: f64,
    max_dt: f64,
    noise_excess: f64,
    min_m: f64,
    outside: f64,
    lp_max: Vec<f64>,
    weak: WeakBv,
    max_cfl: f64,
    phi_square: f64,
    closeness: f64,
    sup_nu: Vec<f64>,
    mass_moments: Vec<f64>,
    last: Vec<f64>,
}

impl<'a> Diagnostics<'a> {
    pub fn new(scheme: &'a Scheme, options: DiagnosticsOptions, v0: &[f64]) -> Self {
        let grid = scheme.grid();
        let l2 = grid.l2_norm_sq(v0);
        let sup_nu = options.moments.iter().map(|&p| 1.0 + grid.lp_norm_pow(v0, p as f64)).collect();
        Diagnostics {
            scheme,
            lp_max: vec![0.0; options.lp_identities.len()],
            mass_moments: vec![0.0; options.moments.len()],
            sup_nu,
            options,
            ledger: Vec::new(),
            energy_initial: 0.5 * l2,
            l2_initial: l2,
            t_final: 0.0,
            max_dt: 0.0,
            noise_excess: 0.0,
            min_m: f64::INFINITY,
            outside: 0.0,
            weak: WeakBv::default(),
            max_cfl: 0.0,
            phi_square: 0.0,
            closeness: 0.0,
            last: v0.to_vec(),
        }
    }

    pub fn options(&self) -> &DiagnosticsOptions {
        &self.options
    }

    fn cell_terms(&self, step: &StepView<'_>, cell: usize) -> CellTerms {
        let scheme = self.scheme;
        let opts = &self.options;
        let v = step.pre[cell];
        let dm = DissipationMeasure::new(scheme, step, cell);
        let mut t = CellTerms {
            lp: vec![0.0; opts.lp_identities.len()],
            moments: vec![0.0; opts.moments.len()],
            m_min: f64::INFINITY,
            ..CellTerms::default()
        };
        for (x, w, m) in dm.nodes() {
            t.mass += w * m;
            if x >= v {
                t.fbar_m += w * m;
            } else {
                t.f_m += w * m;
            }
            for (acc, &p) in t.lp.iter_mut().zip(&opts.lp_identities) {
                *acc += w * x.powi(p as i32 - 2) * m;
            }
            for (acc, &p) in t.moments.iter_mut().zip(&opts.moments) {
                *acc += w * (1.0 + x.abs().powi(p as i32)) * m;
            }
            t.m_min = t.m_min.min(m);
        }
        let (lo, hi) = dm.support();
        t.outside = dm.eval(lo - SUPPORT_PROBE).abs().max(dm.eval(hi + SUPPORT_PROBE).abs());

        if opts.weak_bv || opts.phi_square {
            let sup_a = scheme.flux().lipschitz() * scheme.grid().face_area();
            for f in scheme.faces(cell) {
                let w = step.pre[f.neighbor];
                let fk = FaceKinetics::of_face(scheme, f);
                let (jp, jpb) = fk.jump_integrals(v, w);
                t.space_phi += jp;
                t.space_phibar += jpb;
                if opts.phi_square && v < w {
                    let rhs = 2.0 * sup_a * jp;
                    let lhs = (0..PHI_SQUARE_SAMPLES)
                        .map(|i| {
                            let xi = v + (w - v) * i as f64 / (PHI_SQUARE_SAMPLES - 1) as f64;
                            fk.entropy_flux(xi, v, w).powi(2)
                        })
                        .fold(0.0, f64::max);
                    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
                    t.phi_square = t.phi_square.max(ratio);
                }
            }
        }
        t
    }

    fn all_cell_terms(&self, step: &StepView<'_>) -> Vec<CellTerms> {
        let n = self.scheme.grid().num_cells();
        #[cfg(feature = "parallel")]
        if n >= PARALLEL_CELLS {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(|c| self.cell_terms(step, c)).collect();
        }
        (0..n).map(|c| self.cell_terms(step, c)).collect()
    }

    /// Accounts one step; steps must be observed in order.
    pub fn observe(&mut self, step: &StepView<'_>) -> LedgerRow {
        let scheme = self.scheme;
        let grid = scheme.grid();
        let vol = grid.cell_volume();
        let dt = step.dt;
        let terms = self.all_cell_terms(step);

        // fixed-order reductions
        let mass: f64 = terms.iter().map(|t| t.mass).sum::<f64>() * vol;
        let dissipation = dt * mass;
        let g2: f64 = (0..grid.num_cells()).map(|c| scheme.table().g_squared(c, step.pre[c])).sum::<f64>() * vol;
        let noise_input = 0.5 * dt * g2;

        let half_energy_pre = 0.5 * grid.l2_norm_sq(step.pre);
        let half_energy_half = 0.5 * grid.l2_norm_sq(step.half);
        let half_energy_post = 0.5 * grid.l2_norm_sq(step.post);
        let residual = half_energy_half + dissipation - half_energy_pre;

        let diff_sq = |a: &[f64], b: &[f64], f: fn(f64) -> f64| -> f64 {
            a.iter().zip(b).map(|(x, y)| f(x - y).powi(2)).sum::<f64>() * vol
        };
        let jump_sq = diff_sq(step.post, step.half, |d| d);
        self.noise_excess += 0.5 * jump_sq - noise_input;

        for t in &terms {
            self.min_m = self.min_m.min(t.m_min);
            self.outside = self.outside.max(t.outside);
            self.phi_square = self.phi_square.max(t.phi_square);
        }

        for (i, &p) in self.options.lp_identities.iter().enumerate() {
            let pf = p as f64;
            let integral: f64 = terms.iter().map(|t| t.lp[i]).sum::<f64>() * vol;
            let lhs = grid.lp_norm_pow(step.half, pf) + pf * (pf - 1.0) * dt * integral;
            let rhs = grid.lp_norm_pow(step.pre, pf);
            let rel = (lhs - rhs).abs() / rhs.max(lhs).max(f64::MIN_POSITIVE);
            self.lp_max[i] = self.lp_max[i].max(rel);
        }
        for (i, &p) in self.options.moments.iter().enumerate() {
            let q: f64 = terms.iter().map(|t| t.moments[i]).sum::<f64>() * vol;
            self.mass_moments[i] += dt * q;
            let nu = 1.0 + grid.lp_norm_pow(step.post, p as f64);
            self.sup_nu[i] = self.sup_nu[i].max(nu);
        }

        let plus = diff_sq(step.half, step.pre, |d| d.max(0.0));
        let minus = diff_sq(step.half, step.pre, |d| d.min(0.0));
        let fbar_m = dt * vol * terms.iter().map(|t| t.fbar_m).sum::<f64>();
        let f_m = dt * vol * terms.iter().map(|t| t.f_m).sum::<f64>();
        let w = &mut self.weak;
        w.time_plus += plus;
        w.time_minus += minus;
        w.time_flat += plus + minus;
        w.time_full += diff_sq(step.post, step.pre, |d| d);
        w.fbar_m += fbar_m;
        w.f_m += f_m;
        if self.options.weak_bv {
            let sp = dt * terms.iter().map(|t| t.space_phi).sum::<f64>();
            let spb = dt * terms.iter().map(|t| t.space_phibar).sum::<f64>();
            w.space_phi += sp;
            w.space_phibar += spb;
            let scale = half_energy_pre.max(f64::MIN_POSITIVE);
            let r1 = (0.5 * plus + fbar_m - 0.5 * sp).abs() / scale;
            let r2 = (0.5 * minus + f_m - 0.5 * spb).abs() / scale;
            w.max_identity_residual = w.max_identity_residual.max(r1).max(r2);
        }
        let cfl = 2.0 * dt * grid.perimeter() / vol * scheme.flux().lipschitz();
        self.max_cfl = self.max_cfl.max(cfl);

        // E[∫_{t_n}^{t_{n+1}} w(t)² |v♯ − v^n|² dt | F_n] with w = (t − t_n)/Δt
        self.closeness += dt / 3.0 * (plus + minus) + dt * dt / 4.0 * g2;

        self.t_final = step.t + dt;
        self.max_dt = self.max_dt.max(dt);
        self.last.clear();
        self.last.extend_from_slice(step.post);

        let row = LedgerRow {
            n: step.n,
            t: step.t,
            half_energy_pre,
            half_energy_half,
            half_energy_post,
            dissipation,
            noise_input,
            residual,
        };
        self.ledger.push(row);
        row
    }

    pub fn finish(self) -> DiagnosticsReport {
        let opts = &self.options;
        let grid = self.scheme.grid();
        let d0 = self.scheme.noise().d0();
        let theta = opts.theta;
        let t = self.t_final;
        let dissipation_total: f64 = self.ledger.iter().map(|r| r.dissipation).sum();
        let noise_input_total: f64 = self.ledger.iter().map(|r| r.noise_input).sum();
        let max_energy_residual = self.ledger.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
        let energy_scale = self.energy_initial.max(1.0);

        let weak_bv = opts.weak_bv.then(|| {
            let mut w = self.weak.clone();
            let th = (1.0 - self.max_cfl).max(0.0);
            w.theta_control = th;
            let slack = |x: f64| x * (1.0 + 1e-9) + 1e-14;
            if th > 0.0 {
                w.control_space = w.space_phi <= slack(2.0 / th * w.fbar_m);
                w.control_space_bar = w.space_phibar <= slack(2.0 / th * w.f_m);
                w.control_time = w.time_plus <= slack(2.0 / th * w.fbar_m);
                w.control_time_bar = w.time_minus <= slack(2.0 / th * w.f_m);
            }
            w.bound = self.l2_initial / theta + d0 * t / theta;
            w.bound_full = self.l2_initial / theta + 2.0 * d0 * t / theta;
            w
        });
        let weak_ok = weak_bv.as_ref().is_none_or(|w| {
            w.control_space
                && w.control_space_bar
                && w.control_time
                && w.control_time_bar
                && w.max_identity_residual <= opts.energy_tolerance
        });

        let lp_identities: Vec<LpIdentity> = opts
            .lp_identities
            .iter()
            .zip(&self.lp_max)
            .map(|(&p, &r)| LpIdentity { p, max_relative_residual: r })
            .collect();
        let lp_worst = self.lp_max.iter().copied().fold(0.0, f64::max);

        let moments = opts
            .moments
            .iter()
            .enumerate()
            .map(|(i, &p)| MomentRow {
                p,
                sup_nu: self.sup_nu[i],
                mass: self.mass_moments[i],
                final_norm: grid.lp_norm_pow(&self.last, p as f64),
            })
            .collect();

        let min_dissipation = if self.min_m.is_finite() { self.min_m } else { 0.0 };
        let phi_ratio = self.phi_square;
        let checks = Checks {
            energy_balance: Check::at_most(max_energy_residual, opts.energy_tolerance * energy_scale),
            dissipation_positive: Check::at_most(-min_dissipation, 1e-10),
            dissipation_support: Check::at_most(self.outside, 1e-10),
            lp_identities: Check::at_most(lp_worst, opts.lp_tolerance),
            weak_bv_controls: weak_ok,
            phi_square: Check::at_most(phi_ratio, 1.0 + 1e-9),
        };

        DiagnosticsReport {
            steps: self.ledger.len(),
            t_final: t,
            max_dt: self.max_dt,
            d0,
            energy_initial: self.energy_initial,
            energy_final: 0.5 * grid.l2_norm_sq(&self.last),
            dissipation_total,
            noise_input_total,
            noise_increment_excess: self.noise_excess,
            max_energy_residual,
            min_dissipation,
            max_outside_support: self.outside,
            lp_identities,
            weak_bv,
            phi_square_ratio: opts.phi_square.then_some(phi_ratio),
            closeness: self.closeness,
            closeness_bound: (self.l2_initial / theta + d0 * t * (1.0 + 1.0 / theta)) * self.max_dt,
            moments,
            checks,
            ledger: self.ledger,
        }
    }
}

/// Mean and standard error of independent samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStat {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanStat {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanStat { mean: f64::NAN, stderr: f64::NAN, n };
        }
        if xs.iter().all(|&x| x == xs[0]) {
            return MeanStat { mean: xs[0], stderr: 0.0, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        MeanStat { mean, stderr, n }
    }

    /// `|mean − target| ≤ k·stderr + abs_tol`.
    pub fn consistent_with(&self, target: f64, k: f64, abs_tol: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr + abs_tol
    }

    /// `mean − k·stderr ≤ bound`.
    pub fn below(&self, bound: f64, k: f64) -> bool {
        self.mean - k * self.stderr <= bound
    }
}

/// Expectation of the energy identity over an ensemble:
/// `E½‖v(T)‖² + Eℰ(T) = ½‖v(0)‖² + ½E ΣΔtΣ|K|G²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyIdentity {
    pub lhs: MeanStat,
    pub rhs: MeanStat,
    /// Per-path difference of the two sides.
    pub difference: MeanStat,
    /// `Σ_n [½‖v^{n+1} − v^{n+1/2}‖² − (Δt/2)Σ|K|G²]`, mean zero.
    pub noise_increment: MeanStat,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakBvEnsemble {
    pub space_sum: MeanStat,
    pub time_flat: MeanStat,
    pub time_full: MeanStat,
    pub bound: f64,
    pub bound_full: f64,
    pub means_below_bounds: bool,
    pub pathwise_controls: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEnsemble {
    pub p: u32,
    /// `E sup_n (1 + ‖v^n‖_p^p)`
    pub sup_nu: MeanStat,
    /// `E |Σ Δt Σ|K| ∫ (1 + |ξ|^p) m|²`
    pub mass_square: MeanStat,
    /// `E ‖v(T)‖_p^p`
    pub final_norm: MeanStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub paths: usize,
    pub energy: EnergyIdentity,
    pub weak_bv: Option<WeakBvEnsemble>,
    pub closeness: MeanStat,
    pub closeness_bound: f64,
    pub moments: Vec<MomentEnsemble>,
}

/// Standard errors of slack granted to statistical bound checks.
pub const SE_SLACK: f64 = 3.0;

impl EnsembleSummary {
    pub fn from_reports(reports: &[DiagnosticsReport]) -> Self {
        let col = |f: &dyn Fn(&DiagnosticsReport) -> f64| -> MeanStat {
            MeanStat::from_samples(&reports.iter().map(f).collect::<Vec<_>>())
        };
        let lhs = col(&|r| r.energy_final + r.dissipation_total);
        let rhs = col(&|r| r.energy_initial + r.noise_input_total);
        let difference = col(&|r| r.energy_final + r.dissipation_total - r.energy_initial - r.noise_input_total);
        let noise_increment = col(&|r| r.noise_increment_excess);
        let scale = reports.first().map_or(1.0, |r| r.energy_initial.max(1.0));
        let pass = difference.consistent_with(0.0, SE_SLACK, 1e-8 * scale)
            && noise_increment.consistent_with(0.0, SE_SLACK, 1e-8 * scale);

        let weak_bv = reports.first().and_then(|r| r.weak_bv.as_ref()).map(|w0| {
            let wcol = |f: &dyn Fn(&WeakBv) -> f64| col(&|r| r.weak_bv.as_ref().map_or(f64::NAN, f));
            let space_sum = wcol(&|w| w.space_sum());
            let time_flat = wcol(&|w| w.time_flat);
            let time_full = wcol(&|w| w.time_full);
            WeakBvEnsemble {
                means_below_bounds: space_sum.below(w0.bound, SE_SLACK)
                    && time_flat.below(w0.bound, SE_SLACK)
                    && time_full.below(w0.bound_full, SE_SLACK),
                pathwise_controls: reports.iter().all(|r| {
                    r.weak_bv
                        .as_ref()
                        .is_some_and(|w| w.control_space && w.control_space_bar && w.control_time && w.control_time_bar)
                }),
                space_sum,
                time_flat,
                time_full,
                bound: w0.bound,
                bound_full: w0.bound_full,
            }
        });

        let moments = reports
            .first()
            .map(|r0| {
                (0..r0.moments.len())
                    .map(|i| MomentEnsemble {
                        p: r0.moments[i].p,
                        sup_nu: col(&|r| r.moments[i].sup_nu),
                        mass_square: col(&|r| r.moments[i].mass.powi(2)),
                        final_norm: col(&|r| r.moments[i].final_norm),
                    })
                    .collect()
            })
            .unwrap_or_default();

        EnsembleSummary {
            paths: reports.len(),
            energy: EnergyIdentity { lhs, rhs, difference, noise_increment, pass },
            weak_bv,
            closeness: col(&|r| r.closeness),
            closeness_bound: reports.iter().map(|r| r.closeness_bound).fold(0.0, f64::max),
            moments,
        }
    }
}

/// Runs `scheme` from `v0` over `time` with `source`, collecting diagnostics.
pub fn diagnose<S: crate::rng::IncrementSource + ?Sized>(
    scheme: &Scheme,
    v0: &[f64],
    time: &crate::scheme::TimeGrid,
    source: &S,
    options: DiagnosticsOptions,
) -> crate::Result<DiagnosticsReport> {
    let mut d = Diagnostics::new(scheme, options, v0);
    scheme.run_streaming(v0, time, source, |s| {
        d.observe(&s);
        Ok(())
    })?;
    Ok(d.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{FluxFunction, MonotoneFlux};
    use crate::mesh::TorusGrid;
    use crate::noise::{Mode, NoiseModel, Trig};
    use crate::rng::WienerIncrements;
    use crate::scheme::TimeGrid;

    fn burgers(m: usize, noise: NoiseModel) -> Scheme {
        let grid = TorusGrid::new(1, m).unwrap();
        Scheme::new(grid, MonotoneFlux::godunov(FluxFunction::burgers(1).unwrap()), noise).unwrap()
    }

    fn pseudo_random(m: usize, seed: u64) -> Vec<f64> {
        let w = WienerIncrements::new(seed);
        (0..m).map(|i| (w.normal(i as u64, 0, 0) / 2.0).clamp(-1.0, 1.0)).collect()
    }

    #[test]
    fn constant_state_ledger_is_zero() {
        let s = burgers(8, NoiseModel::zero());
        let v0 = vec![0.3; 8];
        let tg = s.time_grid(0.5, 0.2).unwrap();
        let r = diagnose(&s, &v0, &tg, &WienerIncrements::new(1), DiagnosticsOptions::default()).unwrap();
        assert!(r.ledger.iter().all(|row| row.residual == 0.0 && row.dissipation == 0.0));
        let w = r.weak_bv.as_ref().unwrap();
        assert_eq!(w.space_sum(), 0.0);
        assert_eq!(w.time_full, 0.0);
        assert!(w.bound > 0.0);
        assert!(r.checks.all_pass());
    }

    #[test]
    fn two_cell_residual() {
        let s = burgers(2, NoiseModel::zero());
        let tg = TimeGrid::uniform(1.0 / 32.0, 1.0 / 32.0).unwrap();
        let r = diagnose(&s, &[1.0, 0.0], &tg, &WienerIncrements::new(1), DiagnosticsOptions::default()).unwrap();
        assert!(r.ledger[0].residual.abs() < 1e-10);
        assert!(r.ledger[0].dissipation > 0.0);
    }

    #[test]
    fn random_data_identities_hold() {
        let s = burgers(16, NoiseModel::zero());
        let v0 = pseudo_random(16, 3);
        let tg = TimeGrid::uniform(
            TimeGrid::cfl_step(s.grid(), s.lipschitz(), 0.5),
            100.0 * TimeGrid::cfl_step(s.grid(), s.lipschitz(), 0.5),
        )
        .unwrap();
        let r = diagnose(&s, &v0, &tg, &WienerIncrements::new(1), DiagnosticsOptions::default()).unwrap();
        assert_eq!(r.steps, 100);
        assert!(r.max_energy_residual < 1e-8, "{}", r.max_energy_residual);
        assert!(r.checks.all_pass(), "{:?}", r.checks);
        let w = r.weak_bv.unwrap();
        assert!(w.space_sum() < w.bound);
        // max principle
        for m in &r.moments {
            assert!(m.sup_nu <= 2.0);
        }
    }

    #[test]
    fn zero_state_moments() {
        let s = burgers(4, NoiseModel::zero());
        let tg = s.time_grid(0.5, 0.1).unwrap();
        let r = diagnose(&s, &[0.0; 4], &tg, &WienerIncrements::new(1), DiagnosticsOptions::default()).unwrap();
        for m in &r.moments {
            assert_eq!(m.sup_nu, 1.0);
            assert_eq!(m.mass, 0.0);
        }
    }

    #[test]
    fn noisy_path_satisfies_pathwise_controls() {
        let noise = NoiseModel::separable(vec![Mode::new(0.5, &[1.0], Trig::Sin)], 1.0).unwrap();
        let s = burgers(16, noise);
        let v0 = pseudo_random(16, 9);
        let tg = s.time_grid(0.5, 0.3).unwrap();
        let r = diagnose(&s, &v0, &tg, &WienerIncrements::new(77), DiagnosticsOptions::default()).unwrap();
        assert!(r.checks.all_pass(), "{:?}", r.checks);
        assert!(r.noise_input_total > 0.0);
    }

    #[test]
    fn ledger_csv_has_contract_columns() {
        let row = LedgerRow {
            n: 0,
            t: 0.0,
            half_energy_pre: 0.5,
            half_energy_half: 0.25,
            half_energy_post: 0.25,
            dissipation: 0.25,
            noise_input: 0.0,
            residual: 0.0,
        };
        let mut buf = Vec::new();
        write_ledger_csv(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), LEDGER_COLUMNS);
        assert_eq!(lines.next().unwrap().split(',').count(), 7);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn mean_stat_basics() {
        let s = MeanStat::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(s.consistent_with(2.0, 3.0, 0.0));
        assert!(MeanStat::from_samples(&[1.0; 5]).stderr == 0.0);
    }
}
