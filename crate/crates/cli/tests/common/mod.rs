#![allow(dead_code)]

use adiabat_cli::SweepConfig;

/// Small warped model; `coupling` scales V = a·sin(x)cos(πy), 0 gives a separable model.
pub fn model_json(nb: usize, nf: usize, amplitude: f64, coupling: f64) -> String {
    let warp = if amplitude == 0.0 {
        r#"{ "preset": "constant", "value": 1.0 }"#.to_string()
    } else {
        format!(r#"{{ "preset": "sin", "amplitude": {amplitude}, "harmonic": 1 }}"#)
    };
    let potential = if coupling == 0.0 {
        String::new()
    } else {
        format!(
            r#", "potential": [{{ "re": [[{coupling}]], "x": {{ "profile": "sin", "harmonic": 1 }}, "y": {{ "profile": "cos", "mode": 1 }} }}]"#
        )
    };
    format!(
        r#"{{ "base_circumference": 6.283185307179586, "base_points": {nb}, "fibre_points": {nf}, "rank": 1, "warp": {warp}{potential} }}"#
    )
}

pub fn sweep_json(model: &str, depth: usize) -> String {
    format!(
        r#"{{ "model": {model}, "depth": {depth}, "epsilons": [0.125, 0.0625, 0.03125, 0.015625] }}"#
    )
}

pub fn sweep(model: &str, depth: usize) -> SweepConfig {
    SweepConfig::from_json(&sweep_json(model, depth)).unwrap()
}
