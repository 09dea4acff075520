//! Named configurations: full-scale studies and their desk-scale versions.

use serde_json::{json, Value};

pub const NAMES: &[&str] = &[
    "poisson2d-full",
    "poisson2d-desk",
    "poisson1d-kernel",
    "burgers-nu01",
    "burgers-nu001",
    "burgers-nu0001",
    "burgers-desk",
    "discrete-demo",
    "complexity-sweep",
];

fn burgers(nu: f64) -> Value {
    json!({
        "experiment": "burgers",
        "sampling": ["optimal"],
        "measure": { "d_in": 20 },
        "d_out": 150,
        "index_set": {
            "kind": { "type": "hyperbolic_cross" },
            "radii": [10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
            "anisotropy": { "type": "linear", "step": 0.99 / 20.0 },
            "degree_cap": 10
        },
        "sample_rule": { "type": "n_log_n" },
        "solver": { "nu": nu },
        "test_samples": 1000
    })
}

pub fn preset(name: &str) -> Option<Value> {
    Some(match name {
        "poisson2d-full" => json!({
            "experiment": "poisson2d",
            "measure": { "alpha_rule": { "exponent": 3.0, "norm": "l1" }, "d_in": 35 },
            "sizes": [100, 200, 300, 400, 500, 600, 700, 800, 900, 1000, 1100, 1225],
            "test_samples": 1000
        }),
        "poisson2d-desk" => json!({
            "experiment": "poisson2d",
            "measure": { "alpha_rule": { "exponent": 3.0, "norm": "l1" }, "d_in": 8 },
            "sizes": [16, 32, 64],
            "trials": 3
        }),
        "poisson1d-kernel" => json!({
            "experiment": "poisson1d_kernel",
            "sampling": ["optimal"],
            "sizes": [8, 16, 32, 64]
        }),
        "burgers-nu01" => burgers(0.1),
        "burgers-nu001" => burgers(0.01),
        "burgers-nu0001" => burgers(0.001),
        "burgers-desk" => json!({
            "experiment": "burgers",
            "sampling": ["optimal"],
            "measure": { "d_in": 8 },
            "d_out": 48,
            "index_set": {
                "kind": { "type": "hyperbolic_cross" },
                "radii": [4.0, 8.0, 12.0],
                "anisotropy": { "type": "linear", "step": 0.99 / 20.0 },
                "degree_cap": 10
            },
            "sample_rule": { "type": "n_log_n" },
            "solver": { "nu": 0.1 },
            "test_samples": 200
        }),
        "discrete-demo" => json!({
            "experiment": "discrete_demo",
            "sizes": [25, 50, 100],
            "trials": 20,
            "cloud_size": 2000
        }),
        "complexity-sweep" => json!({
            "experiment": "complexity_sweep",
            "sampling": ["optimal"],
            "sizes": [25, 50, 100, 200, 400],
            "sample_rule": { "type": "fixed", "m": 4000 },
            "trials": 3
        }),
        _ => return None,
    })
}
