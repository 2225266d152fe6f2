//! wasm-bindgen entry points for the browser demo. Each export takes a JSON
//! configuration (any subset of the run configuration; missing keys take
//! their defaults) and returns a JSON string, or an error message.

use serde::Serialize;
use stofv::config::RunConfig;
use stofv::diagnostics::diagnose;
use stofv::harness::deterministic_convergence;
use stofv::rng::WienerIncrements;
use wasm_bindgen::prelude::*;

/// Cap on stored frames so that large runs stay cheap to ship to the page.
const MAX_FRAMES: usize = 200;

fn parse(config: &str) -> Result<RunConfig, String> {
    let cfg: RunConfig = if config.trim().is_empty() {
        RunConfig::default()
    } else {
        serde_json::from_str(config).map_err(|e| format!("config: {e}"))?
    };
    cfg.validate().map_err(|e| e.to_string())?;
    if cfg.grid.dim != 1 {
        return Err("the demo plots one-dimensional runs only".into());
    }
    Ok(cfg)
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Simulation {
    x: Vec<f64>,
    times: Vec<f64>,
    frames: Vec<Vec<f64>>,
    mass: Vec<f64>,
    energy: Vec<f64>,
}

/// One trajectory, subsampled to at most [`MAX_FRAMES`] frames.
pub fn simulate_json(config: &str) -> Result<String, String> {
    let cfg = parse(config)?;
    let scheme = cfg.scheme().map_err(|e| e.to_string())?;
    let time = cfg.time_grid(&scheme).map_err(|e| e.to_string())?;
    let grid = scheme.grid().clone();
    let v0 = cfg.initial_state(&grid).map_err(|e| e.to_string())?;
    let stride = time.num_steps().div_ceil(MAX_FRAMES).max(1);
    let mut sim = Simulation {
        x: (0..grid.num_cells()).map(|c| grid.cell_center(c)[0]).collect(),
        times: vec![0.0],
        mass: vec![grid.mass(&v0)],
        energy: vec![0.5 * grid.l2_norm_sq(&v0)],
        frames: vec![v0.clone()],
    };
    let last = time.num_steps() - 1;
    scheme
        .run_streaming(&v0, &time, &WienerIncrements::new(cfg.noise.seed), |step| {
            if (step.n + 1) % stride == 0 || step.n == last {
                sim.times.push(step.t + step.dt);
                sim.mass.push(grid.mass(step.post));
                sim.energy.push(0.5 * grid.l2_norm_sq(step.post));
                sim.frames.push(step.post.to_vec());
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    to_json(&sim)
}

/// Full diagnostics report (ledger, identities, weak-BV controls).
pub fn diagnose_json(config: &str) -> Result<String, String> {
    let cfg = parse(config)?;
    let scheme = cfg.scheme().map_err(|e| e.to_string())?;
    let time = cfg.time_grid(&scheme).map_err(|e| e.to_string())?;
    let v0 = cfg.initial_state(scheme.grid()).map_err(|e| e.to_string())?;
    let report = diagnose(&scheme, &v0, &time, &WienerIncrements::new(cfg.noise.seed), cfg.diagnostics_options())
        .map_err(|e| e.to_string())?;
    to_json(&report)
}

/// Deterministic convergence table over `refinement.levels`.
pub fn converge_json(config: &str) -> Result<String, String> {
    let cfg = parse(config)?;
    let table = deterministic_convergence(&cfg, &cfg.refinement.levels).map_err(|e| e.to_string())?;
    to_json(&serde_json::json!({ "table": table, "fitted_order": table.fitted_order() }))
}

#[wasm_bindgen]
pub fn simulate(config: &str) -> Result<String, String> {
    simulate_json(config)
}

#[wasm_bindgen]
pub fn diagnostics(config: &str) -> Result<String, String> {
    diagnose_json(config)
}

#[wasm_bindgen]
pub fn convergence(config: &str) -> Result<String, String> {
    converge_json(config)
}

/// Default configuration, as a starting point for the page's form.
#[wasm_bindgen]
pub fn default_config() -> String {
    serde_json::to_string_pretty(&RunConfig::default()).expect("config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn simulation_conserves_mass_without_noise() {
        let cfg = r#"{"grid": {"m": 16}, "noise": {"modes": []}, "time": {"t_final": 0.2}}"#;
        let v: Value = serde_json::from_str(&simulate_json(cfg).unwrap()).unwrap();
        let mass: Vec<f64> = v["mass"].as_array().unwrap().iter().map(|m| m.as_f64().unwrap()).collect();
        assert!(mass.iter().all(|m| (m - mass[0]).abs() < 1e-14));
        assert_eq!(v["x"].as_array().unwrap().len(), 16);
        assert!(v["frames"].as_array().unwrap().len() <= MAX_FRAMES + 1);
    }

    #[test]
    fn diagnostics_report_passes_checks() {
        let v: Value = serde_json::from_str(&diagnose_json(r#"{"grid": {"m": 16}}"#).unwrap()).unwrap();
        assert!(v["max_energy_residual"].as_f64().unwrap() < 1e-10);
    }

    #[test]
    fn convergence_needs_an_exact_solution() {
        assert!(converge_json("").is_err());
        let cfg = r#"{"initial": {"name": "riemann", "left": 1, "right": 0}, "time": {"t_final": 0.3}, "refinement": {"levels": [16, 32, 64]}}"#;
        let v: Value = serde_json::from_str(&converge_json(cfg).unwrap()).unwrap();
        assert_eq!(v["table"]["rows"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn malformed_config_is_an_error() {
        assert!(simulate_json("{").is_err());
        assert!(simulate_json(r#"{"grid": {"dim": 2}}"#).is_err());
        assert!(default_config().contains("\"grid\""));
    }
}
