//! Flux functions `A: ℝ → ℝ^N` and monotone two-point face fluxes.
//!
//! A face flux is always evaluated per unit face area for an oriented face
//! with outward normal `sign * e_axis`; along that face everything reduces to
//! the scalar flux `g(ξ) = sign * A_axis(ξ)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mesh::{Face, TorusGrid};
use crate::{Error, Result};

/// Default working range half-width margin around `[-1, 1]`.
pub const RANGE_MARGIN: f64 = 0.25;
/// Relative amount by which a declared Lipschitz constant may undershoot the
/// sampled one before it is rejected.
pub const LIPSCHITZ_TOLERANCE: f64 = 0.05;

const SCAN_SAMPLES: usize = 4096;

/// `(axis, u) ↦ value`.
pub type AxisFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Burgers,
    Cubic,
    Linear([f64; 2]),
    Custom { a: AxisFn, da: AxisFn },
}

#[derive(Clone)]
pub struct FluxFunction {
    dim: usize,
    kind: Kind,
    range: (f64, f64),
    lipschitz: f64,
    sonic: [Vec<f64>; 2],
}

impl fmt::Debug for FluxFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FluxFunction")
            .field("name", &self.name())
            .field("dim", &self.dim)
            .field("range", &self.range)
            .field("lipschitz", &self.lipschitz)
            .field("sonic", &self.sonic)
            .finish()
    }
}

fn default_range() -> (f64, f64) {
    (-1.0 - RANGE_MARGIN, 1.0 + RANGE_MARGIN)
}

impl FluxFunction {
    /// `A(u) = u²/2` along every axis.
    pub fn burgers(dim: usize) -> Result<Self> {
        Self::builtin(dim, Kind::Burgers, [vec![0.0], vec![0.0]])
    }

    /// `A(u) = u³/3` along every axis.
    pub fn cubic(dim: usize) -> Result<Self> {
        Self::builtin(dim, Kind::Cubic, [vec![0.0], vec![0.0]])
    }

    /// `A(u) = c u`; the dimension is the length of `velocity`.
    pub fn linear(velocity: &[f64]) -> Result<Self> {
        if velocity.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("velocity must be finite".into()));
        }
        let mut c = [0.0; 2];
        c[..velocity.len().min(2)].copy_from_slice(&velocity[..velocity.len().min(2)]);
        Self::builtin(velocity.len(), Kind::Linear(c), [vec![], vec![]])
    }

    /// User flux from its components and their derivatives. Sonic points are
    /// located by scanning `da` over the working range.
    pub fn custom(dim: usize, a: AxisFn, da: AxisFn) -> Result<Self> {
        check_dim(dim)?;
        for axis in 0..dim {
            let a0 = a(axis, 0.0);
            if a0.abs() > 1e-12 {
                return Err(Error::FluxValidation(format!("A(0) = {a0:e} on axis {axis}, expected 0")));
            }
        }
        let mut f = FluxFunction {
            dim,
            kind: Kind::Custom { a, da },
            range: default_range(),
            lipschitz: 0.0,
            sonic: [vec![], vec![]],
        };
        f.refresh()?;
        Ok(f)
    }

    fn builtin(dim: usize, kind: Kind, sonic: [Vec<f64>; 2]) -> Result<Self> {
        check_dim(dim)?;
        let mut f = FluxFunction { dim, kind, range: default_range(), lipschitz: 0.0, sonic };
        f.refresh()?;
        Ok(f)
    }

    fn refresh(&mut self) -> Result<()> {
        if let Kind::Custom { da, .. } = &self.kind {
            let (lo, hi) = self.range;
            let w = hi - lo;
            for axis in 0..self.dim {
                self.sonic[axis] = scan_roots(|x| da(axis, x), lo - w, hi + w)?;
            }
        }
        self.lipschitz = self.lipschitz_on(self.range.0, self.range.1);
        Ok(())
    }

    /// Same flux with another working range; `L_A` is recomputed.
    pub fn with_range(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("invalid working range [{lo}, {hi}]")));
        }
        self.range = (lo, hi);
        self.refresh()?;
        Ok(self)
    }

    /// Replaces the sampled `L_A` by a declared constant. The declaration is
    /// rejected when it undershoots the sampled constant by 5% or more; a
    /// generous declaration only makes the time step smaller.
    pub fn with_declared_lipschitz(mut self, declared: f64) -> Result<Self> {
        let sampled = self.lipschitz;
        if !(declared > 0.0) || !declared.is_finite() {
            return Err(Error::Config(format!("declared L_A must be positive, got {declared}")));
        }
        if declared < sampled * (1.0 - LIPSCHITZ_TOLERANCE) {
            return Err(Error::FluxValidation(format!(
                "declared L_A = {declared} underestimates the sampled Lipschitz constant {sampled} on [{}, {}]",
                self.range.0, self.range.1
            )));
        }
        self.lipschitz = declared;
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            Kind::Burgers => "burgers",
            Kind::Cubic => "cubic",
            Kind::Linear(_) => "linear",
            Kind::Custom { .. } => "custom",
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    /// `L_A`: max over axes of `sup |A_d'|` on the working range (or the
    /// declared constant).
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Roots of `A_axis'`; empty when `A_axis'` never changes sign.
    pub fn sonic_points(&self, axis: usize) -> &[f64] {
        &self.sonic[axis]
    }

    pub fn velocity(&self) -> Option<[f64; 2]> {
        match self.kind {
            Kind::Linear(c) => Some(c),
            _ => None,
        }
    }

    #[inline]
    pub fn value(&self, axis: usize, u: f64) -> f64 {
        match &self.kind {
            Kind::Burgers => 0.5 * u * u,
            Kind::Cubic => u * u * u / 3.0,
            Kind::Linear(c) => c[axis] * u,
            Kind::Custom { a, .. } => a(axis, u),
        }
    }

    #[inline]
    pub fn derivative(&self, axis: usize, u: f64) -> f64 {
        match &self.kind {
            Kind::Burgers => u,
            Kind::Cubic => u * u,
            Kind::Linear(c) => c[axis],
            Kind::Custom { da, .. } => da(axis, u),
        }
    }

    /// `max_d sup_{[lo,hi]} |A_d'|`.
    pub fn lipschitz_on(&self, lo: f64, hi: f64) -> f64 {
        match &self.kind {
            Kind::Burgers => lo.abs().max(hi.abs()),
            Kind::Cubic => (lo * lo).max(hi * hi),
            Kind::Linear(c) => c[..self.dim].iter().fold(0.0, |m: f64, x| m.max(x.abs())),
            Kind::Custom { a, da } => {
                let mut best: f64 = 0.0;
                let step = (hi - lo) / SCAN_SAMPLES as f64;
                for axis in 0..self.dim {
                    for i in 0..=SCAN_SAMPLES {
                        let x = lo + step * i as f64;
                        best = best.max(da(axis, x).abs());
                        if i < SCAN_SAMPLES {
                            best = best.max(((a(axis, x + step) - a(axis, x)) / step).abs());
                        }
                    }
                }
                best
            }
        }
    }

    /// Points `ξ ∈ (lo, hi)` where `sign * A_axis(ξ) = level`.
    pub fn level_crossings(&self, axis: usize, sign: f64, level: f64, lo: f64, hi: f64, out: &mut Vec<f64>) {
        if !(lo < hi) {
            return;
        }
        let target = sign * level;
        let mut push = |x: f64| {
            if x > lo && x < hi {
                out.push(x);
            }
        };
        match &self.kind {
            Kind::Burgers => {
                if target >= 0.0 {
                    let r = (2.0 * target).sqrt();
                    push(r);
                    push(-r);
                }
            }
            Kind::Cubic => push((3.0 * target).cbrt()),
            Kind::Linear(c) => {
                if c[axis] != 0.0 {
                    push(target / c[axis]);
                }
            }
            Kind::Custom { .. } => {
                let g = |x: f64| self.value(axis, x) - target;
                let mut nodes = vec![lo];
                nodes.extend(self.sonic[axis].iter().copied().filter(|&s| s > lo && s < hi));
                nodes.push(hi);
                for seg in nodes.windows(2) {
                    let (mut a, mut b) = (seg[0], seg[1]);
                    let (ga, gb) = (g(a), g(b));
                    if ga == 0.0 {
                        push(a);
                        continue;
                    }
                    if ga * gb >= 0.0 {
                        continue;
                    }
                    let neg_left = ga < 0.0;
                    for _ in 0..200 {
                        let mid = 0.5 * (a + b);
                        if mid <= a || mid >= b {
                            break;
                        }
                        if (g(mid) < 0.0) == neg_left {
                            a = mid;
                        } else {
                            b = mid;
                        }
                    }
                    push(0.5 * (a + b));
                }
            }
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=2).contains(&dim) {
        Ok(())
    } else {
        Err(Error::Config(format!("flux dimension must be 1 or 2, got {dim}")))
    }
}

/// Sign changes (and exact zeros) of `f` on `[lo, hi]`, refined by bisection.
fn scan_roots<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let step = (hi - lo) / SCAN_SAMPLES as f64;
    let mut roots = Vec::new();
    let mut prev = f(lo);
    if prev == 0.0 {
        roots.push(lo);
    }
    for i in 1..=SCAN_SAMPLES {
        let x = lo + step * i as f64;
        let cur = f(x);
        if cur == 0.0 {
            roots.push(x);
        } else if prev != 0.0 && prev * cur < 0.0 {
            let (mut a, mut b) = (x - step, x);
            let neg_left = prev < 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if (f(mid) < 0.0) == neg_left {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = cur;
    }
    // A derivative that changes sign at nearly every sample cannot be
    // resolved on this grid.
    if roots.len() > SCAN_SAMPLES / 8 {
        return Err(Error::Extremum { lo, hi, uncertainty: step });
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    Ok(roots)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericalFluxKind {
    Godunov,
    Rusanov,
    EngquistOsher,
}

impl NumericalFluxKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "godunov" => Ok(Self::Godunov),
            "rusanov" | "lax_friedrichs" | "local_lax_friedrichs" => Ok(Self::Rusanov),
            "engquist_osher" | "eo" => Ok(Self::EngquistOsher),
            other => Err(Error::Config(format!("unknown numerical flux '{other}'"))),
        }
    }
}

/// A monotone two-point numerical flux built on a [`FluxFunction`].
#[derive(Debug, Clone)]
pub struct MonotoneFlux {
    flux: FluxFunction,
    kind: NumericalFluxKind,
    lambda: f64,
}

impl MonotoneFlux {
    /// Rusanov uses the viscosity `λ = L_A`.
    pub fn new(flux: FluxFunction, kind: NumericalFluxKind) -> Self {
        let lambda = flux.lipschitz();
        MonotoneFlux { flux, kind, lambda }
    }

    pub fn godunov(flux: FluxFunction) -> Self {
        Self::new(flux, NumericalFluxKind::Godunov)
    }

    pub fn engquist_osher(flux: FluxFunction) -> Self {
        Self::new(flux, NumericalFluxKind::EngquistOsher)
    }

    pub fn rusanov(flux: FluxFunction, lambda: Option<f64>) -> Result<Self> {
        let lambda = lambda.unwrap_or_else(|| flux.lipschitz());
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("Rusanov viscosity must be nonnegative, got {lambda}")));
        }
        Ok(MonotoneFlux { flux, kind: NumericalFluxKind::Rusanov, lambda })
    }

    pub fn flux(&self) -> &FluxFunction {
        &self.flux
    }

    pub fn kind(&self) -> NumericalFluxKind {
        self.kind
    }

    pub fn viscosity(&self) -> f64 {
        self.lambda
    }

    /// Per-argument Lipschitz constant of the face flux per unit area; this
    /// is what the CFL condition must control.
    pub fn lipschitz(&self) -> f64 {
        let la = self.flux.lipschitz();
        match self.kind {
            NumericalFluxKind::Rusanov => la.max(0.5 * (la + self.lambda)),
            _ => la,
        }
    }

    #[inline]
    fn g(&self, axis: usize, sign: f64, x: f64) -> f64 {
        sign * self.flux.value(axis, x)
    }

    #[inline]
    fn dg(&self, axis: usize, sign: f64, x: f64) -> f64 {
        sign * self.flux.derivative(axis, x)
    }

    /// `F_d(v, w)` per unit area for the face with normal `sign * e_axis`.
    pub fn eval(&self, axis: usize, sign: f64, v: f64, w: f64) -> f64 {
        match self.kind {
            NumericalFluxKind::Godunov => self.godunov_value(axis, sign, v, w),
            NumericalFluxKind::Rusanov => {
                0.5 * (self.g(axis, sign, v) + self.g(axis, sign, w)) - 0.5 * self.lambda * (w - v)
            }
            NumericalFluxKind::EngquistOsher => {
                let g0 = self.g(axis, sign, 0.0);
                let pos_v = self.positive_variation(axis, sign, 0.0, v);
                let pos_w = self.positive_variation(axis, sign, 0.0, w);
                let neg_w = (self.g(axis, sign, w) - g0) - pos_w;
                g0 + pos_v + neg_w
            }
        }
    }

    fn godunov_value(&self, axis: usize, sign: f64, v: f64, w: f64) -> f64 {
        let (lo, hi) = if v <= w { (v, w) } else { (w, v) };
        let mut best = self.g(axis, sign, v);
        let mut consider = |x: f64| {
            let gx = self.g(axis, sign, x);
            if v <= w {
                best = best.min(gx);
            } else {
                best = best.max(gx);
            }
        };
        consider(w);
        for &s in self.flux.sonic_points(axis) {
            if s > lo && s < hi {
                consider(s);
            }
        }
        best
    }

    /// `∫_a^b max(g', 0)` with signed orientation (`a > b` negates).
    fn positive_variation(&self, axis: usize, sign: f64, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let (lo, hi, s) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let mut total = 0.0;
        let mut g_left = self.g(axis, sign, lo);
        for &p in self.flux.sonic_points(axis) {
            if p > lo && p < hi {
                let gp = self.g(axis, sign, p);
                total += (gp - g_left).max(0.0);
                g_left = gp;
            }
        }
        total += (self.g(axis, sign, hi) - g_left).max(0.0);
        s * total
    }

    /// `(∂₁F_d, ∂₂F_d)(v, w)`; nonnegative and nonpositive respectively.
    /// Non-differentiable points use the one-sided limits described in the
    /// module docs of [`crate::kinetic`].
    pub fn partials(&self, axis: usize, sign: f64, v: f64, w: f64) -> (f64, f64) {
        match self.kind {
            NumericalFluxKind::Rusanov => {
                (0.5 * (self.dg(axis, sign, v) + self.lambda), 0.5 * (self.dg(axis, sign, w) - self.lambda))
            }
            NumericalFluxKind::EngquistOsher => (self.dg(axis, sign, v).max(0.0), self.dg(axis, sign, w).min(0.0)),
            NumericalFluxKind::Godunov => {
                if v == w {
                    let d = self.dg(axis, sign, v);
                    return (d.max(0.0), d.min(0.0));
                }
                let f = self.godunov_value(axis, sign, v, w);
                let tol = 1e-14 * (1.0 + f.abs());
                let at_v = (self.g(axis, sign, v) - f).abs() <= tol;
                let at_w = (self.g(axis, sign, w) - f).abs() <= tol;
                let d1 = if at_v { self.dg(axis, sign, v).max(0.0) } else { 0.0 };
                let d2 = if at_w { self.dg(axis, sign, w).min(0.0) } else { 0.0 };
                (d1, d2)
            }
        }
    }

    /// Appends the points where `ξ ↦ F_d(v∧ξ, w∧ξ)` may fail to be smooth.
    /// The set does not depend on the face orientation.
    pub fn kinks(&self, axis: usize, v: f64, w: f64, out: &mut Vec<f64>) {
        out.push(v);
        out.push(w);
        let (lo, hi) = if v <= w { (v, w) } else { (w, v) };
        match self.kind {
            NumericalFluxKind::Rusanov => {}
            NumericalFluxKind::EngquistOsher => {
                out.extend(self.flux.sonic_points(axis).iter().copied().filter(|&s| s > lo && s < hi));
            }
            NumericalFluxKind::Godunov => {
                if lo == hi {
                    return;
                }
                let start = out.len();
                out.extend(self.flux.sonic_points(axis).iter().copied().filter(|&s| s > lo && s < hi));
                let end = out.len();
                let mut levels = vec![self.flux.value(axis, v), self.flux.value(axis, w)];
                levels.extend(out[start..end].iter().map(|&s| self.flux.value(axis, s)));
                for level in levels {
                    self.flux.level_crossings(axis, 1.0, level, lo, hi, out);
                }
            }
        }
    }

    /// `Q_{K→L} = |K|L| F_d(v_K, v_L)` on an oriented face.
    pub fn face_flux(&self, grid: &TorusGrid, face: &Face, v_k: f64, v_l: f64) -> f64 {
        grid.face_area() * self.eval(face.axis, face.sign, v_k, v_l)
    }

    /// Lipschitz bound the axioms promise on `[lo, hi]`: `L_A` for Godunov and
    /// Engquist–Osher, `L_A + λ/2` for Rusanov.
    pub fn lipschitz_bound_on(&self, lo: f64, hi: f64) -> f64 {
        let la = self.flux.lipschitz_on(lo, hi);
        match self.kind {
            NumericalFluxKind::Rusanov => la + 0.5 * self.lambda,
            _ => la,
        }
    }

    /// Sampled check of the four flux axioms on `[lo, hi]²`.
    pub fn validate(&self, lo: f64, hi: f64, samples: usize) -> AxiomReport {
        validate_flux(
            |axis, sign, v, w| self.eval(axis, sign, v, w),
            &self.flux,
            self.lipschitz_bound_on(lo, hi),
            (lo, hi),
            samples,
        )
    }
}

/// Worst cases of the four flux axioms over a sample grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub samples: usize,
    pub range: (f64, f64),
    pub tolerance: f64,
    pub monotony_violation: f64,
    pub lipschitz: f64,
    pub lipschitz_bound: f64,
    pub consistency_residual: f64,
    pub symmetry_residual: f64,
    pub monotony_ok: bool,
    pub lipschitz_ok: bool,
    pub consistency_ok: bool,
    pub symmetry_ok: bool,
}

impl AxiomReport {
    pub fn all_ok(&self) -> bool {
        self.monotony_ok && self.lipschitz_ok && self.consistency_ok && self.symmetry_ok
    }
}

/// Checks monotony, Lipschitz continuity, consistency with `flux` and
/// conservative symmetry of an arbitrary oriented face flux
/// `eval(axis, sign, v, w)` on a uniform `samples × samples` grid.
pub fn validate_flux<F>(
    eval: F,
    flux: &FluxFunction,
    lipschitz_bound: f64,
    range: (f64, f64),
    samples: usize,
) -> AxiomReport
where
    F: Fn(usize, f64, f64, f64) -> f64,
{
    let tol = 1e-10;
    let n = samples.max(2);
    let (lo, hi) = range;
    let dx = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| if i + 1 == n { hi } else { lo + dx * i as f64 }).collect();

    let mut mono: f64 = 0.0;
    let mut lip: f64 = 0.0;
    let mut cons: f64 = 0.0;
    let mut sym: f64 = 0.0;
    for axis in 0..flux.dim() {
        for sign in [1.0, -1.0] {
            let table: Vec<Vec<f64>> =
                xs.iter().map(|&v| xs.iter().map(|&w| eval(axis, sign, v, w)).collect()).collect();
            for i in 0..n {
                for j in 0..n {
                    let f = table[i][j];
                    if i + 1 < n {
                        let df = table[i + 1][j] - f;
                        mono = mono.max(-df);
                        lip = lip.max(df.abs() / (xs[i + 1] - xs[i]));
                    }
                    if j + 1 < n {
                        let df = table[i][j + 1] - f;
                        mono = mono.max(df);
                        lip = lip.max(df.abs() / (xs[j + 1] - xs[j]));
                    }
                    let reversed = eval(axis, -sign, xs[j], xs[i]);
                    sym = sym.max((f + reversed).abs());
                }
                cons = cons.max((table[i][i] - sign * flux.value(axis, xs[i])).abs());
            }
        }
    }
    AxiomReport {
        samples: n,
        range,
        tolerance: tol,
        monotony_violation: mono,
        lipschitz: lip,
        lipschitz_bound,
        consistency_residual: cons,
        symmetry_residual: sym,
        monotony_ok: mono <= tol,
        lipschitz_ok: lip <= lipschitz_bound * (1.0 + tol) + tol,
        consistency_ok: cons <= tol,
        symmetry_ok: sym <= tol,
    }
}
