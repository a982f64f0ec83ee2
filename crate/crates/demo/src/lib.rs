//! WebAssembly bindings for the static page in `www/`.
//!
//! Each exported function has a plain-Rust twin (`*_impl`) so the logic can be
//! tested natively; the exports only translate errors into JS exceptions.

use simlab_core::aoa_beam_training::{
    build_detection_grid, default_grid_size, select_strongest, simulate_bs_tone_reception, NoiseConfig,
};
use simlab_core::array_channel::{ChannelRealization, RicianConfig, SystemDims};
use simlab_core::rng::seeded;
use simlab_core::simlab::{run_scenario, write_csv, Scenario, ScenarioConfig};
use simlab_core::Result;
use wasm_bindgen::prelude::*;

fn js(e: simlab_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Detection-grid angles of an `m`-element array, in degrees.
pub fn grid_angles_impl(m: usize) -> Result<Vec<f64>> {
    let grid = build_detection_grid(default_grid_size(m), m, 0.5)?;
    Ok(grid.angles.iter().map(|a| a.to_degrees()).collect())
}

/// Correlation power `|r_i|^2` of one user's training tone on every grid
/// direction, followed by the selected grid index as the last element.
pub fn beam_scan_impl(m: usize, theta_deg: f64, kappa: f64, tone_snr_db: f64, seed: u64) -> Result<Vec<f64>> {
    let dims = SystemDims::new(m, 1, 1)?;
    let grid = build_detection_grid(default_grid_size(m), m, 0.5)?;
    let mut rng = seeded(seed);
    let ch = ChannelRealization::draw(&mut rng, theta_deg.to_radians(), 0.0, &dims, &RicianConfig::iid(kappa))?;
    let noise = NoiseConfig::from_tone_snr(10f64.powf(tone_snr_db / 10.0));
    let r = simulate_bs_tone_reception(&ch, &grid, &noise, &mut rng)?;
    let best = select_strongest(&r)?;
    let mut out: Vec<f64> = r.iter().map(|z| z.norm_sqr()).collect();
    out.push(best as f64);
    Ok(out)
}

/// Runs a scenario from its defaults plus `key = value` lines and returns CSV.
pub fn run_csv_impl(scenario: &str, overrides: &str) -> Result<String> {
    let scenario: Scenario = scenario.parse()?;
    let mut cfg = ScenarioConfig::defaults(scenario);
    cfg.apply_source(overrides)?;
    cfg.validate()?;
    Ok(write_csv(&run_scenario(&cfg)?.records))
}

#[wasm_bindgen]
pub fn grid_angles(m: usize) -> std::result::Result<Vec<f64>, JsError> {
    grid_angles_impl(m).map_err(js)
}

#[wasm_bindgen]
pub fn beam_scan(m: usize, theta_deg: f64, kappa: f64, tone_snr_db: f64, seed: u64) -> std::result::Result<Vec<f64>, JsError> {
    beam_scan_impl(m, theta_deg, kappa, tone_snr_db, seed).map_err(js)
}

/// Hybrid vs fully digital rate against SNR, as CSV.
#[wasm_bindgen]
pub fn rate_curves(m: usize, users: usize, kappa: f64, trials: usize, seed: u64) -> std::result::Result<String, JsError> {
    let src = format!("dims.M = {m}\ndims.N = {users}\nkappa = {kappa}\ntrials = {trials}\nseed = {seed}\nsnr_db = -10:5:30\n");
    run_csv_impl("rate-vs-snr", &src).map_err(js)
}

/// Empirical and closed-form estimation MSE against `M P`, as CSV.
#[wasm_bindgen]
pub fn mse_curve(pilot_snr_db: f64, users: usize, trials: usize, seed: u64) -> std::result::Result<String, JsError> {
    let src = format!("pilot_snr_db = {pilot_snr_db}\ndims.N = {users}\ntrials = {trials}\nseed = {seed}\n");
    run_csv_impl("mse-sweep", &src).map_err(js)
}
