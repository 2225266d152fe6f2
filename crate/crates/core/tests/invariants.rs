use proptest::prelude::*;

use stofv::flux::{FluxFunction, MonotoneFlux, NumericalFluxKind};
use stofv::kinetic::{discrete_kinetic_residual, Bump, DissipationMeasure};
use stofv::mesh::TorusGrid;
use stofv::noise::{Mode, NoiseModel, Trig};
use stofv::rng::WienerIncrements;
use stofv::scheme::{Scheme, TimeGrid};

fn kind() -> impl Strategy<Value = NumericalFluxKind> {
    prop_oneof![
        Just(NumericalFluxKind::Godunov),
        Just(NumericalFluxKind::Rusanov),
        Just(NumericalFluxKind::EngquistOsher)
    ]
}

fn flux_function() -> impl Strategy<Value = FluxFunction> {
    prop_oneof![
        Just(FluxFunction::burgers(1).unwrap()),
        Just(FluxFunction::cubic(1).unwrap()),
        (-1.0..1.0f64).prop_map(|c| FluxFunction::linear(&[c]).unwrap()),
    ]
}

fn noisy_scheme(m: usize, kind: NumericalFluxKind, sigma: f64) -> Scheme {
    let grid = TorusGrid::new(1, m).unwrap();
    let flux = MonotoneFlux::new(FluxFunction::burgers(1).unwrap(), kind);
    let modes = vec![Mode::new(sigma, &[1.0], Trig::Sin), Mode::new(sigma / 2.0, &[2.0], Trig::Cos)];
    Scheme::new(grid, flux, NoiseModel::separable(modes, 1.0).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn numerical_flux_is_consistent_and_monotone(f in flux_function(), k in kind(), v in -1.0..1.0f64, w in -1.0..1.0f64, d in 0.0..0.5f64) {
        let nf = MonotoneFlux::new(f.clone(), k);
        for sign in [1.0, -1.0] {
            prop_assert!((nf.eval(0, sign, v, v) - sign * f.value(0, v)).abs() < 1e-12);
            // nondecreasing in the inner state, nonincreasing in the outer one
            prop_assert!(nf.eval(0, sign, v + d, w) >= nf.eval(0, sign, v, w) - 1e-12);
            prop_assert!(nf.eval(0, sign, v, w + d) <= nf.eval(0, sign, v, w) + 1e-12);
            // conservation across a face
            prop_assert!((nf.eval(0, sign, v, w) + nf.eval(0, -sign, w, v)).abs() < 1e-12);
        }
    }

    #[test]
    fn half_step_conserves_mass_and_dissipation_is_nonnegative(k in kind(), v0 in prop::collection::vec(-1.0..1.0f64, 8..24)) {
        let s = noisy_scheme(v0.len(), k, 0.1);
        let dt = TimeGrid::cfl_step(s.grid(), s.lipschitz(), 0.5);
        let half = s.half_step(&v0, dt).unwrap();
        let g = s.grid();
        prop_assert!((g.mass(&half) - g.mass(&v0)).abs() < 1e-13);
        for (cell, &vh) in half.iter().enumerate() {
            let m = DissipationMeasure::from_states(&s, cell, dt, &v0, vh);
            for (_, _, value) in m.nodes() {
                prop_assert!(value >= -1e-10);
            }
        }
    }

    #[test]
    fn pathwise_energy_balance(k in kind(), seed in any::<u64>(), v0 in prop::collection::vec(-1.0..1.0f64, 8..16)) {
        let s = noisy_scheme(v0.len(), k, 0.3);
        let dt = TimeGrid::cfl_step(s.grid(), s.lipschitz(), 0.5);
        let time = TimeGrid::uniform(dt, 10.0 * dt).unwrap();
        let g = s.grid().clone();
        let w = WienerIncrements::new(seed);
        s.run_streaming(&v0, &time, &w, |step| {
            // ½‖v^{n+1}‖² = ½‖v^n‖² − Δt Σ|K|∫m + Σ|K| (½|v^{n+1} − v^{n+½}|² + v^{n+½}(v^{n+1} − v^{n+½}))
            let mut lhs = 0.5 * g.l2_norm_sq(step.post) - 0.5 * g.l2_norm_sq(step.pre);
            for cell in 0..step.pre.len() {
                let m = DissipationMeasure::new(&s, &step, cell);
                lhs += step.dt * g.cell_volume() * m.mass();
                let jump = step.post[cell] - step.half[cell];
                lhs -= g.cell_volume() * (0.5 * jump * jump + step.half[cell] * jump);
            }
            assert!(lhs.abs() < 1e-12, "energy residual {lhs:e}");
            Ok(())
        }).unwrap();
    }

    #[test]
    fn increments_are_a_pure_function_of_the_seed(seed in any::<u64>(), n in 0u64..1_000_000, k in 0u32..16) {
        let a = WienerIncrements::new(seed);
        let b = WienerIncrements::new(seed);
        prop_assert_eq!(a.normal(n, k, 0).to_bits(), b.normal(n, k, 0).to_bits());
        prop_assert_ne!(a.normal(n, k, 0), a.normal(n + 1, k, 0));
    }

    #[test]
    fn stochastic_step_is_linear_in_the_increments(seed in any::<u64>(), scale in 0.1..3.0f64) {
        let s = noisy_scheme(12, NumericalFluxKind::Godunov, 0.2);
        let v: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin() * 0.8).collect();
        let w = WienerIncrements::new(seed);
        let x = w.sample(0, 2);
        let dt = 0.01;
        let base = s.stochastic_step(&v, &v, dt, &[0.0, 0.0]);
        let one = s.stochastic_step(&v, &v, dt, &x);
        let xs: Vec<f64> = x.iter().map(|x| x * scale).collect();
        let many = s.stochastic_step(&v, &v, dt, &xs);
        for i in 0..12 {
            prop_assert_eq!(base[i], v[i]);
            prop_assert!(((many[i] - v[i]) - scale * (one[i] - v[i])).abs() < 1e-13);
        }
    }
}

#[test]
fn discrete_kinetic_residual_vanishes_without_noise() {
    let grid = TorusGrid::new(1, 16).unwrap();
    let flux = MonotoneFlux::godunov(FluxFunction::burgers(1).unwrap());
    let s = Scheme::new(grid, flux, NoiseModel::zero()).unwrap();
    let v0: Vec<f64> = (0..16).map(|i| if i < 8 { 0.8 } else { -0.3 }).collect();
    let time = TimeGrid::cfl(s.grid(), s.lipschitz(), 0.5, 0.05).unwrap();
    let path = WienerIncrements::new(1);
    let traj = s.run(&v0, &time, &path).unwrap();
    let psi = Bump::new(0.2, 0.7);
    for step in traj.steps() {
        for cell in 0..16 {
            let r = discrete_kinetic_residual(&s, &step, &path, cell, 4, 2, &psi);
            assert!(r.abs() < 1e-12, "step {} cell {cell}: {r:e}", step.n);
        }
    }
}

#[test]
fn discrete_kinetic_residual_shrinks_with_bridge_levels() {
    let s = noisy_scheme(16, NumericalFluxKind::Godunov, 0.3);
    let v0: Vec<f64> = (0..16).map(|i| (i as f64 * 0.4).cos() * 0.6).collect();
    let time = TimeGrid::cfl(s.grid(), s.lipschitz(), 0.5, 0.05).unwrap();
    let path = WienerIncrements::new(9);
    let traj = s.run(&v0, &time, &path).unwrap();
    let psi = Bump::new(0.0, 0.8);
    let total = |levels: u32| -> f64 {
        traj.steps()
            .map(|step| {
                (0..16)
                    .map(|c| discrete_kinetic_residual(&s, &step, &path, c, 1 << levels, levels, &psi).abs())
                    .sum::<f64>()
            })
            .sum()
    };
    let coarse = total(1);
    let fine = total(6);
    assert!(fine < coarse, "coarse {coarse:e}, fine {fine:e}");
}
