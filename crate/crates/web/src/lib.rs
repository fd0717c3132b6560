//! WebAssembly bindings for the demo page in `www/`. Every call returns a
//! JSON string so the page can render it without extra glue.

use ricci_forge::constructions::{build_n_closed_profiles, n_open_certificate_on, BuildOptions};
use ricci_forge::spaces::{min_displacement, volume_closed, volume_mc, GroupAction};
use ricci_forge::Grid;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Certificate of the open Berger family with slope `c` on `(0.01, r_max)`,
/// with node spacing `step`. Includes `ρ` and `φ` samples for plotting.
pub fn berger_certificate_json(n: u32, c: f64, r_max: f64, step: f64) -> Result<String, ricci_forge::Error> {
    let grid = Grid::new(0.01, r_max, step)?;
    let opts = BuildOptions { allow_failure: true, ..BuildOptions::default() };
    let cert = n_open_certificate_on(n, c, &grid, &opts)?;
    Ok(json!({
        "passed": cert.passed,
        "conditions": cert.conditions,
        "min_values": cert.min_values,
        "witnesses": cert.witnesses,
        "nodes": cert.nodes,
    })
    .to_string())
}

/// Closed-form and Monte-Carlo volumes of the closed Berger family.
pub fn closed_volume_json(c: f64, d: f64, samples: usize, seed: u64) -> Result<String, ricci_forge::Error> {
    let spec = build_n_closed_profiles(c, d)?;
    let exact = volume_closed(&spec)?;
    let mc = volume_mc(&spec, samples, seed)?;
    Ok(json!({ "closed": exact, "estimate": mc.estimate, "stderr": mc.stderr, "samples": mc.samples }).to_string())
}

pub fn displacement_json(group: &str, samples: usize, seed: u64) -> Result<String, ricci_forge::Error> {
    let action = GroupAction::from_label(group.parse()?);
    let r = min_displacement(&action, samples, seed)?;
    Ok(serde_json::to_string(&r)?)
}

#[wasm_bindgen(js_name = bergerCertificate)]
pub fn berger_certificate(n: u32, c: f64, r_max: f64, step: f64) -> Result<String, JsError> {
    berger_certificate_json(n, c, r_max, step).map_err(js)
}

#[wasm_bindgen(js_name = closedVolume)]
pub fn closed_volume(c: f64, d: f64, samples: u32, seed: u32) -> Result<String, JsError> {
    closed_volume_json(c, d, samples as usize, seed as u64).map_err(js)
}

#[wasm_bindgen]
pub fn displacement(group: &str, samples: u32, seed: u32) -> Result<String, JsError> {
    displacement_json(group, samples as usize, seed as u64).map_err(js)
}
