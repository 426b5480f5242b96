//! Thin wasm bindings for the browser demo: each export takes simple
//! arguments, runs on the Gaussian-lattice torus, and returns a JSON string
//! the page renders directly.

use wasm_bindgen::prelude::*;

use greentorus::cohomology;
use greentorus::entropy;
use greentorus::forms::FourierForm;
use greentorus::green;
use greentorus::torus::{MapSpec, Torus};

fn parse_matrix(rows: &str) -> Result<Vec<Vec<i64>>, String> {
    let m: Vec<Vec<i64>> = rows
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<i64>().map_err(|_| format!("bad entry `{v}`")))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let k = m.len();
    if k == 0 || m.iter().any(|r| r.len() != k) {
        return Err("matrix must be square, rows separated by `;`".into());
    }
    Ok(m)
}

fn err_json(e: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": e.to_string() }).to_string()
}

/// Dynamical degrees and entropy of an integer matrix acting on the
/// Gaussian-lattice torus. `rows` like "2,1;1,1".
#[wasm_bindgen]
pub fn degrees(rows: &str) -> String {
    let inner = || -> Result<String, String> {
        let m = parse_matrix(rows)?;
        let torus = Torus::gaussian(m.len()).map_err(|e| e.to_string())?;
        let map = MapSpec::from_integer(&m).build(&torus).map_err(|e| e.to_string())?;
        let model =
            cohomology::build_torus_cohomology(&torus, &map).map_err(|e| e.to_string())?;
        let profile = cohomology::dynamical_degrees(&model).map_err(|e| e.to_string())?;
        Ok(serde_json::json!({
            "degrees": profile.degrees,
            "entropy": profile.entropy,
            "p": profile.p,
        })
        .to_string())
    };
    inner().unwrap_or_else(err_json)
}

/// Convergence curve of the normalized pullbacks toward the Green current:
/// surrogate distance to the limit per iterate.
#[wasm_bindgen]
pub fn green_curve(rows: &str, n_max: usize) -> String {
    let inner = || -> Result<String, String> {
        let m = parse_matrix(rows)?;
        let torus = Torus::gaussian(m.len()).map_err(|e| e.to_string())?;
        let map = MapSpec::from_integer(&m).build(&torus).map_err(|e| e.to_string())?;
        let s0 = FourierForm::std_omega(torus.k);
        let run = green::iterate_green(&torus, &map, &s0, n_max.min(40), 1 << 40, 1e-8)
            .map_err(|e| e.to_string())?;
        Ok(serde_json::json!({
            "d_q": run.normalization.1,
            "distances_to_limit": run.distances_to_limit,
            "fitted_rate": run.fitted_rate,
        })
        .to_string())
    };
    inner().unwrap_or_else(err_json)
}

/// Lyapunov exponents and a Bowen-ball entropy estimate.
#[wasm_bindgen]
pub fn entropy_report(rows: &str) -> String {
    let inner = || -> Result<String, String> {
        let m = parse_matrix(rows)?;
        let torus = Torus::gaussian(m.len()).map_err(|e| e.to_string())?;
        let map = MapSpec::from_integer(&m).build(&torus).map_err(|e| e.to_string())?;
        let spectrum = entropy::lyapunov_exponents(&map).map_err(|e| e.to_string())?;
        let centers = vec![vec![0.0; 2 * torus.k]];
        let est = entropy::brin_katok_estimate(&map, 20, 0.05, &centers, 20_000, 1)
            .map_err(|e| e.to_string())?;
        Ok(serde_json::json!({
            "exponents": spectrum.exponents,
            "hyperbolic": spectrum.hyperbolic,
            "h_estimate": est.h_value,
            "method": est.method,
        })
        .to_string())
    };
    inner().unwrap_or_else(err_json)
}
