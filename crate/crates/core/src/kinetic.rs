//! Kinetic formulation of the finite-volume half-step.
//!
//! For an oriented face `K → L` with area `|K|L|` and face flux
//! `A_{K→L} = |K|L| F_d`, the kinetic flux is
//!
//! ```text
//! a(ξ, v, w) = a*(ξ)         for ξ < v∧w,       a*(ξ) = |K|L| sign A_d'(ξ)
//!            = ∂₂A(v, ξ)     for v ≤ ξ < w
//!            = ∂₁A(ξ, w)     for w ≤ ξ < v
//!            = 0             for ξ ≥ v∨w
//! ```
//!
//! The indicator intervals are taken half-open so that `a` vanishes on the
//! whole half-line `ξ ≥ v∨w`; the closed indicators differ on a null set
//! only. Where the face flux is not differentiable the partials use the
//! one-sided conventions of [`MonotoneFlux::partials`].
//!
//! The dissipation density of a cell over one step is
//!
//! ```text
//! m(ξ) = −[(v^{n+1/2} − ξ)⁺ − (v^n − ξ)⁺]/Δt − (1/|K|) Σ_L Φ_{K→L}(ξ, v^n_K, v^n_L),
//! Φ_{K→L}(ξ, v, w) = A_{K→L}(v, w) − A_{K→L}(v∧ξ, w∧ξ).
//! ```
//!
//! All ξ-integrals are composite 5-point Gauss rules between the points where
//! the integrands may kink, so they are exact up to rounding for polynomial
//! fluxes and polynomial weights of moderate degree.

use std::sync::OnceLock;

use crate::flux::MonotoneFlux;
use crate::mesh::{Face, TorusGrid};
use crate::quadrature::{normalize_breakpoints, GaussLegendre};
use crate::rng::WienerIncrements;
use crate::scheme::{Scheme, StepView};

pub(crate) fn gauss5() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(5))
}

/// Kinetic quantities of one oriented face.
#[derive(Debug, Clone, Copy)]
pub struct FaceKinetics<'a> {
    flux: &'a MonotoneFlux,
    axis: usize,
    sign: f64,
    area: f64,
}

impl<'a> FaceKinetics<'a> {
    pub fn new(flux: &'a MonotoneFlux, axis: usize, sign: f64, area: f64) -> Self {
        FaceKinetics { flux, axis, sign, area }
    }

    pub fn of_face(scheme: &'a Scheme, face: &Face) -> Self {
        Self::new(scheme.flux(), face.axis, face.sign, scheme.grid().face_area())
    }

    /// The same interface seen from the other side.
    pub fn reversed(&self) -> Self {
        FaceKinetics { sign: -self.sign, ..*self }
    }

    /// `A_{K→L}(v, w)`.
    pub fn flux_value(&self, v: f64, w: f64) -> f64 {
        self.area * self.flux.eval(self.axis, self.sign, v, w)
    }

    /// `a*(ξ) = |K|L| A'(ξ)·n`.
    pub fn a_star(&self, xi: f64) -> f64 {
        self.area * self.sign * self.flux.flux().derivative(self.axis, xi)
    }

    pub fn a(&self, xi: f64, v: f64, w: f64) -> f64 {
        if xi < v.min(w) {
            self.a_star(xi)
        } else if v <= xi && xi < w {
            self.area * self.flux.partials(self.axis, self.sign, v, xi).1
        } else if w <= xi && xi < v {
            self.area * self.flux.partials(self.axis, self.sign, xi, w).0
        } else {
            0.0
        }
    }

    /// `ā = a* − a`.
    pub fn a_bar(&self, xi: f64, v: f64, w: f64) -> f64 {
        self.a_star(xi) - self.a(xi, v, w)
    }

    /// `ā` from its explicit piecewise expression (closed indicators).
    pub fn a_bar_explicit(&self, xi: f64, v: f64, w: f64) -> f64 {
        let s = self.a_star(xi);
        if xi > v.max(w) {
            s
        } else if v <= xi && xi <= w {
            s - self.area * self.flux.partials(self.axis, self.sign, v, xi).1
        } else if w <= xi && xi <= v {
            s - self.area * self.flux.partials(self.axis, self.sign, xi, w).0
        } else {
            0.0
        }
    }

    /// `b̄(ζ, ξ, v, w)`, the alternative density of `Φ̄` used by the
    /// conjugate CFL condition; only its diagonal `ζ = ξ` is ever needed.
    pub fn b_bar(&self, zeta: f64, xi: f64, v: f64, w: f64) -> f64 {
        if xi > v.max(w) {
            self.a_star(xi)
        } else if v <= xi && xi <= w {
            self.area * self.flux.partials(self.axis, self.sign, zeta, xi).0
        } else if w <= xi && xi <= v {
            self.area * self.flux.partials(self.axis, self.sign, xi, zeta).1
        } else {
            0.0
        }
    }

    /// `Φ(ξ, v, w) = A(v, w) − A(v∧ξ, w∧ξ)`.
    pub fn entropy_flux(&self, xi: f64, v: f64, w: f64) -> f64 {
        self.area
            * (self.flux.eval(self.axis, self.sign, v, w) - self.flux.eval(self.axis, self.sign, v.min(xi), w.min(xi)))
    }

    /// `Φ̄(ξ, v, w) = A(ξ, ξ) − A(v∧ξ, w∧ξ)`.
    pub fn conj_entropy_flux(&self, xi: f64, v: f64, w: f64) -> f64 {
        self.area
            * (self.flux.eval(self.axis, self.sign, xi, xi)
                - self.flux.eval(self.axis, self.sign, v.min(xi), w.min(xi)))
    }

    /// Kinks in `ξ` of every face quantity for states `(v, w)`.
    pub fn kinks(&self, v: f64, w: f64, out: &mut Vec<f64>) {
        self.flux.kinks(self.axis, v, w, out);
    }

    /// `∫_lo^hi f(ξ) dξ` split at the kinks of this face.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, v: f64, w: f64, lo: f64, hi: f64, extra: &[f64], f: F) -> f64 {
        if !(hi > lo) {
            return 0.0;
        }
        let mut pts = Vec::with_capacity(8 + extra.len());
        self.kinks(v, w, &mut pts);
        pts.extend_from_slice(extra);
        normalize_breakpoints(&mut pts, lo, hi);
        gauss5().integrate_piecewise(&pts, f)
    }

    /// `(∫ (f̄_L − f̄_K) Φ dξ, ∫ (f_L − f_K) Φ̄ dξ)` for `v = v_K`, `w = v_L`;
    /// both are nonnegative for a monotone flux.
    pub fn jump_integrals(&self, v: f64, w: f64) -> (f64, f64) {
        if v == w {
            return (0.0, 0.0);
        }
        let (lo, hi) = (v.min(w), v.max(w));
        // f̄_L − f̄_K = 1_{v>ξ} − 1_{w>ξ} is ±1 between the states.
        let s = if v > w { 1.0 } else { -1.0 };
        let phi = self.integrate(v, w, lo, hi, &[], |x| self.entropy_flux(x, v, w));
        let phibar = self.integrate(v, w, lo, hi, &[], |x| self.conj_entropy_flux(x, v, w));
        (s * phi, -s * phibar)
    }
}

/// The dissipation density `m^n_K` of one cell over one step.
#[derive(Debug, Clone)]
pub struct DissipationMeasure<'a> {
    scheme: &'a Scheme,
    cell: usize,
    dt: f64,
    v: f64,
    vh: f64,
    neighbors: Vec<(Face, f64, f64)>,
    breakpoints: Vec<f64>,
}

impl<'a> DissipationMeasure<'a> {
    pub fn new(scheme: &'a Scheme, step: &StepView<'_>, cell: usize) -> Self {
        Self::from_states(scheme, cell, step.dt, step.pre, step.half[cell])
    }

    /// From the pre-step field `pre` and the cell's half-step value.
    pub fn from_states(scheme: &'a Scheme, cell: usize, dt: f64, pre: &[f64], vh: f64) -> Self {
        let v = pre[cell];
        let mut lo = v.min(vh);
        let mut hi = v.max(vh);
        let mut pts = vec![v, vh];
        let neighbors: Vec<(Face, f64, f64)> = scheme
            .faces(cell)
            .iter()
            .map(|f| {
                let w = pre[f.neighbor];
                lo = lo.min(w);
                hi = hi.max(w);
                let fk = FaceKinetics::of_face(scheme, f);
                fk.kinks(v, w, &mut pts);
                (*f, w, fk.flux_value(v, w))
            })
            .collect();
        normalize_breakpoints(&mut pts, lo, hi);
        DissipationMeasure { scheme, cell, dt, v, vh, neighbors, breakpoints: pts }
    }

    pub fn cell(&self) -> usize {
        self.cell
    }

    /// Convex envelope of `{v^{n+1/2}_K, v^n_K, v^n_L}`.
    pub fn support(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// `m^n_K(ξ)`, evaluated from its defining formula everywhere.
    pub fn eval(&self, xi: f64) -> f64 {
        let grid = self.scheme.grid();
        let kink = ((self.vh - xi).max(0.0) - (self.v - xi).max(0.0)) / self.dt;
        let mut phi = 0.0;
        for (f, w, full) in &self.neighbors {
            let fk = FaceKinetics::of_face(self.scheme, f);
            phi += full - fk.flux_value(self.v.min(xi), w.min(xi));
        }
        -kink - phi / grid.cell_volume()
    }

    /// Gauss nodes `(ξ, weight, m(ξ))` of the composite rule on the support.
    pub fn nodes(&self) -> Vec<(f64, f64, f64)> {
        let rule = gauss5();
        let mut out = Vec::with_capacity(rule.len() * self.breakpoints.len());
        for seg in self.breakpoints.windows(2) {
            if seg[1] > seg[0] {
                out.extend(rule.mapped(seg[0], seg[1]).map(|(x, w)| (x, w, self.eval(x))));
            }
        }
        out
    }

    /// `∫ ψ(ξ) m(ξ) dξ`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, psi: F) -> f64 {
        self.nodes().iter().map(|&(x, w, m)| w * psi(x) * m).sum()
    }

    /// `∫ ψ m dξ` with additional breakpoints (kinks of `ψ`).
    pub fn integrate_with<F: Fn(f64) -> f64>(&self, extra: &[f64], psi: F) -> f64 {
        let (lo, hi) = self.support();
        let mut pts = self.breakpoints.clone();
        pts.extend_from_slice(extra);
        normalize_breakpoints(&mut pts, lo, hi);
        gauss5().integrate_piecewise(&pts, |x| psi(x) * self.eval(x))
    }

    /// `∫ m dξ`.
    pub fn mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }
}

/// Compactly supported test function in `ξ`.
pub trait TestFunction {
    fn value(&self, xi: f64) -> f64;
    fn derivative(&self, xi: f64) -> f64;
    /// `∫_a^b ψ`.
    fn integral(&self, a: f64, b: f64) -> f64;
    fn support(&self) -> (f64, f64);
}

/// `ψ(ξ) = (1 − ((ξ − c)/r)²)³` on `[c − r, c + r]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub radius: f64,
}

impl Bump {
    pub fn new(center: f64, radius: f64) -> Self {
        Bump { center, radius }
    }

    fn primitive(s: f64) -> f64 {
        let s = s.clamp(-1.0, 1.0);
        let s2 = s * s;
        s * (1.0 - s2 + 0.6 * s2 * s2 - s2 * s2 * s2 / 7.0)
    }
}

impl TestFunction for Bump {
    fn value(&self, xi: f64) -> f64 {
        let s = (xi - self.center) / self.radius;
        if s.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - s * s).powi(3)
        }
    }

    fn derivative(&self, xi: f64) -> f64 {
        let s = (xi - self.center) / self.radius;
        if s.abs() >= 1.0 {
            0.0
        } else {
            -6.0 * s * (1.0 - s * s).powi(2) / self.radius
        }
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        let r = self.radius;
        r * (Self::primitive((b - self.center) / r) - Self::primitive((a - self.center) / r))
    }

    fn support(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }
}

/// `Σ_L ∫ a_{K→L}(ξ) ψ(ξ) dξ` for the cell's faces.
pub fn flux_moment<T: TestFunction>(scheme: &Scheme, pre: &[f64], cell: usize, psi: &T) -> f64 {
    let (lo, hi) = psi.support();
    let v = pre[cell];
    scheme
        .faces(cell)
        .iter()
        .map(|f| {
            let w = pre[f.neighbor];
            let fk = FaceKinetics::of_face(scheme, f);
            let top = hi.min(v.max(w));
            fk.integrate(v, w, lo, top, &[lo, hi], |x| fk.a(x, v, w) * psi.value(x))
        })
        .sum()
}

/// Residual of the kinetic half-step equation tested against `ψ`:
/// `|K|(Ψ(v^{n+1/2}) − Ψ(v^n)) + Δt Σ_L ∫ a ψ + |K| Δt ∫ ψ' m`.
pub fn kinetic_residual<T: TestFunction>(scheme: &Scheme, step: &StepView<'_>, cell: usize, psi: &T) -> f64 {
    let vol = scheme.grid().cell_volume();
    let (lo, hi) = psi.support();
    let lhs = vol * psi.integral(step.pre[cell], step.half[cell]);
    let flux = step.dt * flux_moment(scheme, step.pre, cell, psi);
    let m = DissipationMeasure::new(scheme, step, cell);
    let diss = vol * step.dt * m.integrate_with(&[lo, hi], |x| psi.derivative(x));
    lhs + flux + diss
}

/// Residual of the discrete kinetic equation at `t = t_n + (j/2^levels) Δt_n`
/// for a cell, with the stochastic integral evaluated as an Itô sum on the
/// step's Brownian bridge and the correction term by a left Riemann sum.
pub fn discrete_kinetic_residual<T: TestFunction>(
    scheme: &Scheme,
    step: &StepView<'_>,
    path: &WienerIncrements,
    cell: usize,
    j: usize,
    levels: u32,
    psi: &T,
) -> f64 {
    let substeps = 1usize << levels;
    let j = j.min(substeps);
    if j == 0 {
        return 0.0;
    }
    let table = scheme.table();
    let k_max = table.k_max();
    let v = step.pre[cell];
    let vh = step.half[cell];
    let tau = step.dt / substeps as f64;
    let elapsed = tau * j as f64;
    let weight = j as f64 / substeps as f64;

    let bridges: Vec<Vec<f64>> =
        (0..k_max).map(|k| path.bridge_to(step.n, k, step.dt, levels, step.dt.sqrt() * step.increments[k])).collect();
    let g: Vec<f64> = (0..k_max).map(|k| table.g(cell, k, v)).collect();
    let g2 = table.g_squared(cell, v);
    let sharp = |i: usize| vh + (0..k_max).map(|k| g[k] * bridges[k][i]).sum::<f64>();

    let lhs = weight * psi.integral(v, sharp(j));

    let vol = scheme.grid().cell_volume();
    let (lo, hi) = psi.support();
    let flux = flux_moment(scheme, step.pre, cell, psi) / vol;
    let m = DissipationMeasure::new(scheme, step, cell);
    let diss = m.integrate_with(&[lo, hi], |x| psi.derivative(x));
    let mut ito = 0.0;
    let mut correction = 0.0;
    for i in 0..j {
        let s = sharp(i);
        let db: f64 = (0..k_max).map(|k| g[k] * (bridges[k][i + 1] - bridges[k][i])).sum();
        ito += psi.value(s) * db;
        correction += psi.derivative(s) * tau;
    }
    let rhs = -elapsed * flux - elapsed * diss + weight * ito + 0.5 * weight * g2 * correction;
    lhs - rhs
}

/// `f_δ(x, t, ξ)` in a cell: `w 1_{v♯>ξ} + (1 − w) 1_{v>ξ}` with
/// `w = (t − t_n)/Δt_n`.
pub fn f_delta(v: f64, v_sharp: f64, weight: f64, xi: f64) -> f64 {
    let ind = |u: f64| if u > xi { 1.0 } else { 0.0 };
    weight * ind(v_sharp) + (1.0 - weight) * ind(v)
}

/// `∫∫ (1 + |ξ|^p) dν^δ dx = 1 + w ‖v♯‖_p^p + (1 − w) ‖v‖_p^p`.
pub fn nu_moment(grid: &TorusGrid, v: &[f64], v_sharp: &[f64], weight: f64, p: f64) -> f64 {
    1.0 + weight * grid.lp_norm_pow(v_sharp, p) + (1.0 - weight) * grid.lp_norm_pow(v, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{FluxFunction, NumericalFluxKind};
    use crate::noise::NoiseModel;
    use approx::assert_relative_eq;

    fn two_cell() -> (Scheme, Vec<f64>, Vec<f64>) {
        let grid = TorusGrid::new(1, 2).unwrap();
        let flux = MonotoneFlux::godunov(FluxFunction::burgers(1).unwrap());
        let s = Scheme::new(grid, flux, NoiseModel::zero()).unwrap();
        let pre = vec![1.0, 0.0];
        let half = s.half_step(&pre, 1.0 / 32.0).unwrap();
        (s, pre, half)
    }

    fn view<'a>(pre: &'a [f64], half: &'a [f64]) -> StepView<'a> {
        StepView { n: 0, t: 0.0, dt: 1.0 / 32.0, pre, half, post: half, increments: &[] }
    }

    #[test]
    fn kinetic_flux_examples() {
        let nf = MonotoneFlux::godunov(FluxFunction::burgers(1).unwrap());
        let fk = FaceKinetics::new(&nf, 0, 1.0, 1.0);
        assert_eq!(fk.a(1.5, 1.0, 0.0), 0.0);
        assert_eq!(fk.a(-0.5, 0.3, 0.3), fk.a_star(-0.5));
        assert_eq!(fk.a(0.5, 1.0, 0.0), 0.5);
    }

    #[test]
    fn entropy_flux_examples() {
        let nf = MonotoneFlux::godunov(FluxFunction::burgers(1).unwrap());
        let fk = FaceKinetics::new(&nf, 0, 1.0, 1.0);
        assert_eq!(fk.entropy_flux(1.2, 1.0, 0.0), 0.0);
        assert_eq!(fk.entropy_flux(0.5, 1.0, 0.0), 0.375);
    }

    #[test]
    fn hand_derived_dissipation_value() {
        let (s, pre, half) = two_cell();
        assert_eq!(half, vec![31.0 / 32.0, 1.0 / 32.0]);
        let st = view(&pre, &half);
        let m = DissipationMeasure::new(&s, &st, 0);
        assert!((m.eval(0.5) - 0.25).abs() < 1e-12);
        assert_eq!(m.eval(1.5), 0.0);
        assert_eq!(m.support(), (0.0, 1.0));
    }

    #[test]
    fn two_cell_energy_identity() {
        let (s, pre, half) = two_cell();
        let st = view(&pre, &half);
        let g = s.grid();
        let diss: f64 = (0..2).map(|c| g.cell_volume() * DissipationMeasure::new(&s, &st, c).mass()).sum();
        let lhs = 0.5 * g.l2_norm_sq(&half) + st.dt * diss;
        assert!((lhs - 0.5 * g.l2_norm_sq(&pre)).abs() < 1e-12);
    }

    #[test]
    fn constant_state_has_no_dissipation() {
        let grid = TorusGrid::new(2, 3).unwrap();
        let flux = MonotoneFlux::godunov(FluxFunction::burgers(2).unwrap());
        let s = Scheme::new(grid, flux, NoiseModel::zero()).unwrap();
        let pre = vec![0.4; 9];
        let half = s.half_step(&pre, 0.01).unwrap();
        let st = StepView { dt: 0.01, ..view(&pre, &half) };
        for c in 0..9 {
            let m = DissipationMeasure::new(&s, &st, c);
            assert_eq!(m.mass(), 0.0);
            assert_eq!(kinetic_residual(&s, &st, c, &Bump::new(0.3, 0.5)), 0.0);
        }
    }

    #[test]
    fn bump_primitive_matches_quadrature() {
        let b = Bump::new(0.2, 0.7);
        let q = gauss5().integrate_piecewise(&[-0.5, 0.0, 0.4, 0.9], |x| b.value(x));
        assert_relative_eq!(b.integral(-0.5, 0.9), q, epsilon = 1e-14);
        assert_relative_eq!(b.integral(-9.0, 9.0), 0.7 * 32.0 / 35.0, epsilon = 1e-14);
    }

    #[test]
    fn kinetic_half_step_residual_on_two_cells() {
        let (s, pre, half) = two_cell();
        let st = view(&pre, &half);
        for c in 0..2 {
            let r = kinetic_residual(&s, &st, c, &Bump::new(0.5, 0.7));
            assert!(r.abs() < 1e-12, "cell {c}: {r}");
        }
        // test function above the envelope
        assert_eq!(kinetic_residual(&s, &st, 0, &Bump::new(3.0, 0.5)), 0.0);
    }

    #[test]
    fn conjugate_density_two_ways() {
        for kind in [NumericalFluxKind::Godunov, NumericalFluxKind::Rusanov, NumericalFluxKind::EngquistOsher] {
            let nf = MonotoneFlux::new(FluxFunction::cubic(1).unwrap(), kind);
            for sign in [1.0, -1.0] {
                let fk = FaceKinetics::new(&nf, 0, sign, 0.5);
                for &(v, w) in &[(0.3, -0.6), (-0.6, 0.3), (0.1, 0.8)] {
                    for i in 0..40 {
                        let xi = -1.013 + 0.0517 * i as f64;
                        assert!((fk.a_bar(xi, v, w) - fk.a_bar_explicit(xi, v, w)).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn jump_integrals_are_nonnegative() {
        let nf = MonotoneFlux::godunov(FluxFunction::burgers(1).unwrap());
        for sign in [1.0, -1.0] {
            let fk = FaceKinetics::new(&nf, 0, sign, 1.0);
            for &(v, w) in &[(0.9, -0.4), (-0.4, 0.9), (0.2, 0.5), (-0.7, -0.1)] {
                let (a, b) = fk.jump_integrals(v, w);
                assert!(a >= -1e-15 && b >= -1e-15, "{v} {w}: {a} {b}");
            }
        }
    }

    #[test]
    fn nu_and_f_delta() {
        let g = TorusGrid::new(1, 4).unwrap();
        let c = vec![0.3; 4];
        assert_relative_eq!(nu_moment(&g, &c, &c, 0.4, 2.0), 1.09, epsilon = 1e-15);
        assert_eq!(f_delta(0.2, 0.9, 0.0, 0.5), 0.0);
        assert_eq!(f_delta(0.2, 0.9, 0.25, 0.5), 0.25);
        assert_eq!(f_delta(0.2, 0.9, 0.25, 0.1), 1.0);
    }
}
