//! Config-driven experiment runner: parses JSON experiment configs,
//! dispatches to the library, and persists reports, CSV sequences and plot
//! data into content-addressed run directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use greentorus::cohomology;
use greentorus::entropy;
use greentorus::forms::FourierForm;
use greentorus::green;
use greentorus::matrix::RealMatrix;
use greentorus::spectral;
use greentorus::superpot;
use greentorus::torus::{MapSpec, Torus, TorusMap, TorusSpec};

pub const SCHEMA_VERSION: u32 = 1;
pub const OUT_ENV: &str = "GREENTORUS_OUT";

#[derive(thiserror::Error, Debug)]
pub enum CliError {
    /// schema or usage problem: exit code 2
    #[error("usage error: {0}")]
    Usage(String),
    /// failure inside an experiment: exit code 1
    #[error("experiment error: {0}")]
    Module(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<greentorus::Error> for CliError {
    fn from(e: greentorus::Error) -> Self {
        CliError::Module(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("invalid JSON: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Degrees,
    Spectral,
    Green,
    Cesaro,
    Uniqueness,
    Measure,
    Mixing,
    Moderate,
    Entropy,
    Lyapunov,
    Sweep,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub q: Option<usize>,
    pub n: Option<usize>,
    pub n_max: Option<usize>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub cap: Option<i64>,
    pub budget: Option<f64>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub lambda_grid: Option<Vec<f64>>,
    pub family_size: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub kind: Kind,
    pub torus: TorusSpec,
    /// Integer derivative matrix, k x k, acting on the complex coordinates.
    pub map: Vec<Vec<i64>>,
    #[serde(default)]
    pub translation: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub params: Params,
    /// Overrides the output root for this run.
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    /// The mathematical property this assertion certifies.
    pub anchor: String,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: u32,
    pub config: ExperimentConfig,
    pub scalars: BTreeMap<String, f64>,
    pub sequences: BTreeMap<String, Vec<f64>>,
    pub verdicts: Vec<Verdict>,
    pub dropped_mass: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

pub mod anchors {
    pub const DEGREES: &str = "dynamical degrees are log-concave with d_0 = d_k = 1";
    pub const ENTROPY_DEGREES: &str = "entropy equals the maximum of log d_q";
    pub const PROJECTOR: &str =
        "Cesaro averages of the normalized action converge to the limit projector";
    pub const GREEN_FUNCTIONAL: &str = "the Green current satisfies d_q^{-1} f^* T = T";
    pub const GREEN_CLASS: &str = "the Green limit lies in the dominant cohomology class";
    pub const UNIQUENESS: &str =
        "smooth positive starts in one class share a single Green limit";
    pub const MEASURE_INVARIANT: &str = "the equilibrium measure is invariant under the map";
    pub const MEASURE_MASS: &str =
        "the measure mass equals the intersection number of the limit classes";
    pub const MEASURE_POSITIVE: &str = "the equilibrium density is nonnegative";
    pub const MIXING_CONDITIONS: &str =
        "multiplicity-one dominance holds for the pullback iff it holds for the pushforward";
    pub const MIXING_MASS: &str =
        "the double Cesaro mass stays bounded below exactly when the criterion holds";
    pub const MODERATE: &str = "exponential moments of the sampled observables stay finite";
    pub const BRIN_KATOK: &str = "the Bowen-ball entropy estimate matches the degree entropy";
    pub const MISIUREWICZ: &str =
        "the volume-based lower bound does not exceed the degree entropy";
    pub const LYAPUNOV_SUM: &str = "Lyapunov exponents of an automorphism sum to zero";
    pub const DE_THELIN: &str =
        "p positive exponents are at least half of log(d_p / d_{p-1})";
    pub const SWEEP: &str = "the super-potential estimate holds with a uniform constant";

    pub fn list() -> Vec<&'static str> {
        vec![
            DEGREES,
            ENTROPY_DEGREES,
            PROJECTOR,
            GREEN_FUNCTIONAL,
            GREEN_CLASS,
            UNIQUENESS,
            MEASURE_INVARIANT,
            MEASURE_MASS,
            MEASURE_POSITIVE,
            MIXING_CONDITIONS,
            MIXING_MASS,
            MODERATE,
            BRIN_KATOK,
            MISIUREWICZ,
            LYAPUNOV_SUM,
            DE_THELIN,
            SWEEP,
        ]
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)?;
    validate_config(&cfg)?;
    Ok(cfg)
}

pub fn validate_config(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if cfg.version != SCHEMA_VERSION {
        return Err(CliError::Usage(format!(
            "version: expected {SCHEMA_VERSION}, got {}",
            cfg.version
        )));
    }
    let k = match &cfg.torus {
        TorusSpec::Gaussian { k } => *k,
        TorusSpec::Lattice { k, .. } => *k,
    };
    if k == 0 {
        return Err(CliError::Usage("torus.k: must be at least 1".into()));
    }
    if cfg.map.len() != k || cfg.map.iter().any(|r| r.len() != k) {
        return Err(CliError::Usage(format!("map: expected a {k} x {k} matrix")));
    }
    if let Some(tr) = &cfg.translation {
        if tr.len() != k {
            return Err(CliError::Usage(format!(
                "translation: expected {k} complex entries"
            )));
        }
    }
    for (name, v) in [
        ("params.epsilon", cfg.params.epsilon),
        ("params.delta", cfg.params.delta),
        ("params.budget", cfg.params.budget),
        ("params.tolerance", cfg.params.tolerance),
    ] {
        if let Some(v) = v {
            if !(v > 0.0) {
                return Err(CliError::Usage(format!("{name}: must be > 0, got {v}")));
            }
        }
    }
    if let Some(c) = cfg.params.cap {
        if c <= 0 {
            return Err(CliError::Usage("params.cap: must be > 0".into()));
        }
    }
    if cfg.kind == Kind::Moderate && cfg.params.seed.is_none() {
        return Err(CliError::Usage(
            "params.seed: required for stochastic kind `moderate`".into(),
        ));
    }
    if let Some(q) = cfg.params.q {
        if q == 0 || q > k {
            return Err(CliError::Usage(format!(
                "params.q: must be between 1 and {k}"
            )));
        }
    }
    Ok(())
}

/// Content address of a run: hash of the canonical config JSON plus seed.
pub fn run_id(cfg: &ExperimentConfig) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    h.update(cfg.params.seed.unwrap_or(0).to_le_bytes());
    hex::encode(&h.finalize()[..6])
}

pub fn output_root(cfg: &ExperimentConfig, cli_out: Option<&Path>) -> PathBuf {
    if let Some(o) = &cfg.output {
        return PathBuf::from(o);
    }
    if let Some(o) = cli_out {
        return o.to_path_buf();
    }
    if let Ok(o) = std::env::var(OUT_ENV) {
        return PathBuf::from(o);
    }
    PathBuf::from("runs")
}

struct Parts {
    scalars: BTreeMap<String, f64>,
    sequences: BTreeMap<String, Vec<f64>>,
    verdicts: Vec<Verdict>,
    dropped_mass: BTreeMap<String, f64>,
}

impl Parts {
    fn new() -> Self {
        Parts {
            scalars: BTreeMap::new(),
            sequences: BTreeMap::new(),
            verdicts: Vec::new(),
            dropped_mass: BTreeMap::new(),
        }
    }

    fn scalar(&mut self, name: &str, v: f64) {
        self.scalars.insert(name.into(), v);
    }

    fn seq(&mut self, name: &str, v: Vec<f64>) {
        self.sequences.insert(name.into(), v);
    }

    fn verdict(&mut self, name: &str, pass: bool, anchor: &str, detail: String) {
        self.verdicts.push(Verdict {
            name: name.into(),
            pass,
            anchor: anchor.into(),
            detail,
        });
    }
}

fn build_map(cfg: &ExperimentConfig, torus: &Torus) -> Result<TorusMap, CliError> {
    let mut spec = MapSpec::from_integer(&cfg.map);
    spec.translation = cfg.translation.clone();
    Ok(spec.build(torus)?)
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A small nonzero integer mode vector derived from a seed.
fn seeded_mode(k: usize, state: &mut u64) -> Vec<i64> {
    loop {
        let m: Vec<i64> = (0..2 * k)
            .map(|_| (splitmix(state) % 3) as i64 - 1)
            .collect();
        if m.iter().any(|&v| v != 0) {
            return m;
        }
    }
}

/// Runs the experiment and writes report.json, timing.json, per-sequence
/// CSVs and plot.csv under a content-addressed directory. Returns the run
/// directory and the report.
pub fn run_config(
    cfg: &ExperimentConfig,
    cli_out: Option<&Path>,
) -> Result<(PathBuf, ExperimentReport), CliError> {
    validate_config(cfg)?;
    let started = Instant::now();
    let torus = cfg.torus.build()?;
    let map = build_map(cfg, &torus)?;
    let parts = match cfg.kind {
        Kind::Degrees => exec_degrees(cfg, &torus, &map)?,
        Kind::Spectral => exec_spectral(cfg, &torus, &map)?,
        Kind::Green => exec_green(cfg, &torus, &map, false)?,
        Kind::Cesaro => exec_green(cfg, &torus, &map, true)?,
        Kind::Uniqueness => exec_uniqueness(cfg, &torus, &map)?,
        Kind::Measure => exec_measure(cfg, &torus, &map)?,
        Kind::Mixing => exec_mixing(cfg, &torus, &map)?,
        Kind::Moderate => exec_moderate(cfg, &torus, &map)?,
        Kind::Entropy => exec_entropy(cfg, &torus, &map)?,
        Kind::Lyapunov => exec_lyapunov(cfg, &torus, &map)?,
        Kind::Sweep => exec_sweep(cfg, &torus, &map)?,
    };
    let report = ExperimentReport {
        version: SCHEMA_VERSION,
        config: cfg.clone(),
        scalars: parts.scalars,
        sequences: parts.sequences,
        verdicts: parts.verdicts,
        dropped_mass: parts.dropped_mass,
    };
    let dir = output_root(cfg, cli_out).join(run_id(cfg));
    write_report(&dir, &report, started.elapsed().as_millis() as u64)?;
    Ok((dir, report))
}

fn write_report(dir: &Path, report: &ExperimentReport, elapsed_ms: u64) -> Result<(), CliError> {
    fs::create_dir_all(dir.join("sequences"))?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report).map_err(|e| CliError::Module(e.to_string()))?,
    )?;
    // timing lives in its own file so report.json is byte-reproducible
    fs::write(
        dir.join("timing.json"),
        format!("{{\n  \"elapsed_ms\": {elapsed_ms}\n}}\n"),
    )?;
    let mut plot = String::from("index");
    for name in report.sequences.keys() {
        plot.push(',');
        plot.push_str(name);
    }
    plot.push('\n');
    let longest = report.sequences.values().map(Vec::len).max().unwrap_or(0);
    for i in 0..longest {
        plot.push_str(&i.to_string());
        for seq in report.sequences.values() {
            plot.push(',');
            if let Some(v) = seq.get(i) {
                plot.push_str(&format!("{v}"));
            }
        }
        plot.push('\n');
    }
    fs::write(dir.join("plot.csv"), plot)?;
    for (name, seq) in &report.sequences {
        let mut csv = String::from("index,value\n");
        for (i, v) in seq.iter().enumerate() {
            csv.push_str(&format!("{i},{v}\n"));
        }
        fs::write(dir.join("sequences").join(format!("{name}.csv")), csv)?;
    }
    Ok(())
}

fn exec_degrees(cfg: &ExperimentConfig, torus: &Torus, map: &TorusMap) -> Result<Parts, CliError> {
    let tol = cfg.params.tolerance.unwrap_or(1e-9);
    let model = cohomology::build_torus_cohomology(torus, map)?;
    model.check_invariants()?;
    let profile = cohomology::dynamical_degrees(&model)?;
    let mut p = Parts::new();
    for (q, d) in profile.degrees.iter().enumerate() {
        p.scalar(&format!("d_{q}"), *d);
    }
    p.scalar("entropy", profile.entropy);
    p.scalar("p", profile.p as f64);
    p.seq("degrees", profile.degrees.clone());
    p.seq("limit_estimate", profile.limit_estimate.clone());
    p.seq("limit_gap", profile.limit_gap.clone());
    let edges_ok = (profile.degrees[0] - 1.0).abs() < tol
        && (profile.degrees[torus.k] - 1.0).abs() < tol;
    let concave = cohomology::check_log_concavity(&profile, tol).is_ok();
    p.verdict(
        "log_concavity_and_edges",
        concave && edges_ok,
        anchors::DEGREES,
        format!("d_0 = {}, d_k = {}", profile.degrees[0], profile.degrees[torus.k]),
    );
    let max_log = profile
        .degrees
        .iter()
        .map(|d| d.ln())
        .fold(f64::NEG_INFINITY, f64::max);
    p.verdict(
        "entropy_from_degrees",
        (profile.entropy - max_log).abs() < tol,
        anchors::ENTROPY_DEGREES,
        format!("entropy = {}, max log d_q = {max_log}", profile.entropy),
    );
    Ok(p)
}

fn exec_spectral(cfg: &ExperimentConfig, torus: &Torus, map: &TorusMap) -> Result<Parts, CliError> {
    let q = cfg.params.q.unwrap_or(1);
    let tol = cfg.params.tolerance.unwrap_or(1e-6);
    let n_max = cfg.params.n_max.unwrap_or(512);
    let mq = RealMatrix::from_float(cohomology::real_pullback_matrix(torus.k, &map.a, q)?);
    let profile = spectral::compute_spectral_profile(&mq, 1e-9)?;
    let lp = spectral::limit_projector(&mq, &profile, tol, n_max)?;
    let mut p = Parts::new();
    p.scalar("spectral_radius", profile.spectral_radius);
    p.scalar("multiplicity_m", profile.multiplicity_m as f64);
    p.scalar("projector_residual", lp.residual);
    p.scalar("projector_n_used", lp.n_used as f64);
    p.verdict(
        "projector_converged",
        lp.converged && lp.residual < tol,
        anchors::PROJECTOR,
        format!("residual {} after N = {}", lp.residual, lp.n_used),
    );
    // P M = lambda P on the strictly dominant part
    let pm = lp.projector.to_float() * mq.to_float();
    let lam_p = lp.projector.to_float() * profile.spectral_radius;
    let comm = (&pm - &lam_p).norm() / lam_p.norm().max(1e-300);
    p.scalar("projector_commutation", comm);
    p.verdict(
        "projector_commutes",
        comm < 1e-5,
        anchors::PROJECTOR,
        format!("|P M - lambda P| / |lambda P| = {comm}"),
    );
    Ok(p)
}

fn exec_green(
    cfg: &ExperimentConfig,
    torus: &Torus,
    map: &TorusMap,
    cesaro: bool,
) -> Result<Parts, CliError> {
    let q = cfg.params.q.unwrap_or(1);
    let n_max = cfg.params.n_max.unwrap_or(if cesaro { 200 } else { 14 });
    let cap = cfg.params.cap.unwrap_or(1 << 40);
    let budget = cfg.params.budget.unwrap_or(1e-8);
    let s0 = FourierForm::std_omega_power(torus.k, q);
    let run = if cesaro {
        green::cesaro_green(torus, map, &s0, n_max, cap, budget)?
    } else {
        green::iterate_green(torus, map, &s0, n_max, cap, budget)?
    };
    let mut p = Parts::new();
    p.scalar("d_q", run.normalization.1);
    p.scalar("block_order_m", run.normalization.0 as f64);
    p.scalar("fitted_rate", run.fitted_rate);
    p.scalar("class_residual", run.class_residual);
    p.scalar("n_done", run.n_done as f64);
    p.seq("distances", run.distances.clone());
    p.seq("distances_to_limit", run.distances_to_limit.clone());
    p.dropped_mass
        .insert("iteration".into(), run.dropped_mass_total);
    if cesaro {
        p.verdict(
            "limit_in_dominant_class",
            run.class_residual < 1e-4,
            anchors::GREEN_CLASS,
            format!("class residual {}", run.class_residual),
        );
    } else {
        let lhs = run
            .limit
            .pullback(map, cap)?
            .scale(Complex64::new(1.0 / run.normalization.1, 0.0));
        let res = lhs.sub(&run.limit)?.sup_coefficient();
        let scale = run.limit.sup_coefficient().max(1.0);
        p.scalar("functional_equation_residual", res);
        p.verdict(
            "functional_equation",
            res < 1e-8 * scale,
            anchors::GREEN_FUNCTIONAL,
            format!("|d_q^-1 f^* T - T| = {res}"),
        );
        p.verdict(
            "limit_in_dominant_class",
            run.class_residual < 1e-6,
            anchors::GREEN_CLASS,
            format!("class residual {}", run.class_residual),
        );
    }
    if run.truncated {
        p.verdict(
            "truncation_budget",
            false,
            anchors::GREEN_FUNCTIONAL,
            "truncation budget exhausted before n_max".into(),
        );
    }
    Ok(p)
}

fn exec_uniqueness(
    cfg: &ExperimentConfig,
    torus: &Torus,
    map: &TorusMap,
) -> Result<Parts, CliError> {
    let n_max = cfg.params.n_max.unwrap_or(12);
    let cap = cfg.params.cap.unwrap_or(1 << 40);
    let budget = cfg.params.budget.unwrap_or(1e-6);
    let mut state = cfg.params.seed.unwrap_or(1);
    let mode = seeded_mode(torus.k, &mut state);
    let om = FourierForm::std_omega(torus.k);
    let bump = FourierForm::real_character(torus.k, mode.clone(), Complex64::new(0.01, 0.0))
        .ddc(torus)?;
    let s0p = om.add(&bump)?;
    let d = green::uniqueness_experiment(torus, map, &om, &s0p, n_max, cap, budget)?;
    let mut p = Parts::new();
    p.scalar("limit_distance", d);
    p.verdict(
        "single_limit",
        d < 1e-7,
        anchors::UNIQUENESS,
        format!("perturbation mode {mode:?}, limit distance {d}"),
    );
    Ok(p)
}

fn exec_measure(cfg: &ExperimentConfig, torus: &Torus, map: &TorusMap) -> Result<Parts, CliError> {
    let n_max = cfg.params.n_max.unwrap_or(16);
    let cap = cfg.params.cap.unwrap_or(1 << 40);
    let budget = cfg.params.budget.unwrap_or(1e-8);
    let om = FourierForm::std_omega(torus.k);
    let fwd = green::iterate_green(torus, map, &om, n_max, cap, budget)?;
    let inv = map.inverse(torus)?;
    let bwd = green::iterate_green(torus, &inv, &om, n_max, cap, budget)?;
    let model = cohomology::build_torus_cohomology(torus, map)?;
    let criterion = cohomology::mixing_criterion(&model, 30)?.cond2;
    let mu = green::equilibrium_measure(torus, map, &fwd.limit, &bwd.limit, cap, criterion)?;
    let mut p = Parts::new();
    p.scalar("mass", mu.mass);
    p.scalar("nonneg_grid_min", mu.nonneg_grid_min);
    p.scalar("invariance_residual", mu.invariance_residual);
    p.verdict(
        "invariant",
        mu.invariance_residual < 1e-8,
        anchors::MEASURE_INVARIANT,
        format!("|f^* mu - mu| = {}", mu.invariance_residual),
    );
    let pairing = fwd.limit.pairing(&bwd.limit, torus)?.re;
    p.verdict(
        "mass_is_intersection",
        (mu.mass - pairing).abs() < 1e-9 * pairing.abs().max(1.0),
        anchors::MEASURE_MASS,
        format!("mass {} vs class pairing {pairing}", mu.mass),
    );
    p.verdict(
        "nonnegative_density",
        mu.nonneg_grid_min > -1e-10,
        anchors::MEASURE_POSITIVE,
        format!("grid minimum {}", mu.nonneg_grid_min),
    );
    Ok(p)
}

fn exec_mixing(cfg: &ExperimentConfig, torus: &Torus, map: &TorusMap) -> Result<Parts, CliError> {
    let n_max = cfg.params.n_max.unwrap_or(50);
    let model = cohomology::build_torus_cohomology(torus, map)?;
    let report = cohomology::mixing_criterion(&model, n_max)?;
    let mut p = Parts::new();
    p.scalar("cond2", report.cond2 as u8 as f64);
    p.scalar("cond3", report.cond3 as u8 as f64);
    p.scalar("block_size", report.block_size as f64);
    p.scalar("fitted_floor", report.fitted_floor);
    p.seq("mass_series", report.mass_series.clone());
    p.verdict(
        "conditions_agree",
        report.cond2 == report.cond3,
        anchors::MIXING_CONDITIONS,
        format!("cond2 = {}, cond3 = {}", report.cond2, report.cond3),
    );
    let floor_ok = if report.cond2 {
        report.fitted_floor > 0.0 && report.mass_series.iter().all(|&v| v > 0.0)
    } else {
        let half = report.mass_series[report.mass_series.len() / 2 - 1];
        let last = *report.mass_series.last().unwrap();
        last < half
    };
    p.verdict(
        "mass_floor",
        floor_ok,
        anchors::MIXING_MASS,
        format!("fitted floor {}", report.fitted_floor),
    );
    Ok(p)
}

fn exec_moderate(
    cfg: &ExperimentConfig,
    torus: &Torus,
    map: &TorusMap,
) -> Result<Parts, CliError> {
    let seed = cfg.params.seed.expect("validated");
    let samples = cfg.params.samples.unwrap_or(20_000);
    let lambda_grid = cfg
        .params
        .lambda_grid
        .clone()
        .unwrap_or_else(|| vec![0.0, 0.25, 0.5]);
    let n_max = cfg.params.n_max.unwrap_or(16);
    let cap = cfg.params.cap.unwrap_or(1 << 40);
    let om = FourierForm::std_omega(torus.k);
    let fwd = green::iterate_green(torus, map, &om, n_max, cap, 1e-8)?;
    let inv = map.inverse(torus)?;
    let bwd = green::iterate_green(torus, &inv, &om, n_max, cap, 1e-8)?;
    let model = cohomology::build_torus_cohomology(torus, map)?;
    let criterion = cohomology::mixing_criterion(&model, 30)?.cond2;
    let mu = green::equilibrium_measure(torus, map, &fwd.limit, &bwd.limit, cap, criterion)?;
    let mut state = seed;
    let center: Vec<f64> = (0..2 * torus.k)
        .map(|_| (splitmix(&mut state) % 1000) as f64 / 1000.0)
        .collect();
    let family = vec![green::TestFunction::LogDistance { center }];
    let table = green::moderate_check(&mu, torus, &family, &lambda_grid, samples, seed)?;
    let mut p = Parts::new();
    let mut all_ok = true;
    for (ui, row) in table.iter().enumerate() {
        p.seq(
            &format!("estimates_u{ui}"),
            row.iter().map(|e| e.estimate).collect(),
        );
        p.seq(
            &format!("std_errors_u{ui}"),
            row.iter().map(|e| e.std_error).collect(),
        );
        all_ok &= row.iter().all(|e| !e.inconclusive && e.estimate.is_finite());
    }
    p.seq("lambda_grid", lambda_grid);
    p.verdict(
        "moments_finite",
        all_ok,
        anchors::MODERATE,
        format!("{} observables, {samples} samples", table.len()),
    );
    Ok(p)
}

fn exec_entropy(cfg: &ExperimentConfig, torus: &Torus, map: &TorusMap) -> Result<Parts, CliError> {
    let n = cfg.params.n.unwrap_or(20);
    let epsilon = cfg.params.epsilon.unwrap_or(0.05);
    let samples = cfg.params.samples.unwrap_or(30_000);
    let seed = cfg.params.seed.unwrap_or(1);
    let centers = vec![vec![0.0; 2 * torus.k]];
    let model = cohomology::build_torus_cohomology(torus, map)?;
    let profile = cohomology::dynamical_degrees(&model)?;
    let est = entropy::brin_katok_estimate(map, n, epsilon, &centers, samples, seed)?;
    let mut p = Parts::new();
    p.scalar("h_estimate", est.h_value);
    p.scalar("degree_entropy", profile.entropy);
    p.scalar("error_bar", est.error_bar);
    let tol = 0.05 * profile.entropy + 1e-9;
    p.verdict(
        "brin_katok_matches_degrees",
        (est.h_value - profile.entropy).abs() <= tol,
        anchors::BRIN_KATOK,
        format!("{} ({}) vs {}", est.h_value, est.method, profile.entropy),
    );
    // Misiurewicz bound from baseline-corrected exact Bowen volumes, when
    // the exact boxes are available.
    let q0 = entropy::BowenQuery {
        n: 0,
        epsilon,
        center: centers[0].clone(),
    };
    if let Ok(base) = entropy::bowen_ball_log_volume_exact(map, &q0) {
        let mut vols = Vec::new();
        let mut ns = Vec::new();
        for i in 1..=n {
            let q = entropy::BowenQuery {
                n: i,
                epsilon,
                center: centers[0].clone(),
            };
            vols.push((entropy::bowen_ball_log_volume_exact(map, &q)? - base).exp());
            ns.push(i as f64);
        }
        let (bound, _) = entropy::misiurewicz_bound(&vols, &ns)?;
        p.scalar("misiurewicz_bound", bound);
        p.verdict(
            "lower_bound",
            bound <= profile.entropy + 1e-6,
            anchors::MISIUREWICZ,
            format!("bound {bound} vs entropy {}", profile.entropy),
        );
    }
    Ok(p)
}

fn exec_lyapunov(cfg: &ExperimentConfig, torus: &Torus, map: &TorusMap) -> Result<Parts, CliError> {
    let tol = cfg.params.tolerance.unwrap_or(1e-8);
    let spectrum = entropy::lyapunov_exponents(map)?;
    let mut p = Parts::new();
    p.scalar("exponent_sum", spectrum.sum);
    p.scalar("hyperbolic", spectrum.hyperbolic as u8 as f64);
    p.seq("exponents", spectrum.expanded());
    p.verdict(
        "zero_sum",
        spectrum.sum.abs() < 1e-10,
        anchors::LYAPUNOV_SUM,
        format!("sum = {}", spectrum.sum),
    );
    let model = cohomology::build_torus_cohomology(torus, map)?;
    let profile = cohomology::dynamical_degrees(&model)?;
    if profile.p == profile.p_prime && profile.p > 0 && profile.p < torus.k {
        let v = entropy::de_thelin_check(&spectrum, &profile, tol)?;
        p.scalar("p", v.p as f64);
        p.scalar("exponent_lower_bound", v.lower_bound);
        p.verdict("exponent_bounds", v.pass, anchors::DE_THELIN, v.details);
    }
    Ok(p)
}

fn exec_sweep(cfg: &ExperimentConfig, torus: &Torus, map: &TorusMap) -> Result<Parts, CliError> {
    let _ = map;
    let k = torus.k;
    if k < 2 {
        return Err(CliError::Usage(
            "kind sweep needs a torus of dimension at least 2".into(),
        ));
    }
    let size = cfg.params.family_size.unwrap_or(8);
    let mut state = cfg.params.seed.unwrap_or(1);
    let basis = superpot::NormalizationBasis::standard(torus, 1)?;
    let mode = seeded_mode(k, &mut state);
    let g = FourierForm::real_character(k, mode, Complex64::new(0.25, 0.0));
    let s = FourierForm::std_omega(k).add(&g.ddc(torus)?)?;
    let family = |max: usize| -> Result<Vec<FourierForm>, CliError> {
        let mut out = Vec::new();
        let mut st = state;
        for _ in 0..max {
            let m = seeded_mode(k, &mut st);
            let probe = FourierForm::real_character(k, m, Complex64::new(1.0, 0.0))
                .ddc(torus)?
                .wedge(&FourierForm::std_omega_power(k, k - 1), 4 * max as i64 + 8)?;
            let scale = 1.0 / probe.sup_coefficient().max(1e-300);
            out.push(probe.scale(Complex64::new(scale, 0.0)));
        }
        Ok(out)
    };
    let c_small = superpot::main_estimate_sweep(&s, &family(size)?, &basis, torus)?;
    let c_large = superpot::main_estimate_sweep(&s, &family(2 * size)?, &basis, torus)?;
    let mut p = Parts::new();
    p.scalar("constant_small_family", c_small);
    p.scalar("constant_doubled_family", c_large);
    p.verdict(
        "uniform_constant",
        c_small.is_finite() && c_large <= 2.0 * c_small.max(1e-12),
        anchors::SWEEP,
        format!("{c_small} -> {c_large} under family doubling"),
    );
    Ok(p)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub config: String,
    pub run_dir: String,
    pub kind: Kind,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub entries: Vec<SuiteEntry>,
    pub all_pass: bool,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Manifest {
    Plain(Vec<String>),
    Tagged { configs: Vec<String> },
}

/// Runs every config listed in the manifest, in order, and writes
/// summary.json into the output root.
pub fn run_suite(manifest_path: &Path, cli_out: Option<&Path>) -> Result<SuiteSummary, CliError> {
    let text = fs::read_to_string(manifest_path).map_err(|e| {
        CliError::Usage(format!(
            "cannot read manifest {}: {e}",
            manifest_path.display()
        ))
    })?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let paths = match manifest {
        Manifest::Plain(p) => p,
        Manifest::Tagged { configs } => configs,
    };
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::new();
    let mut all_pass = true;
    let mut out_root = None;
    for rel in &paths {
        let path = base.join(rel);
        if !path.exists() {
            return Err(CliError::Usage(format!(
                "manifest entry not found: {}",
                path.display()
            )));
        }
        let cfg = load_config(&path)?;
        out_root.get_or_insert_with(|| output_root(&cfg, cli_out));
        // a failing experiment is recorded and the suite moves on; only
        // schema/manifest problems abort the whole run
        let (run_dir, passed, failed) = match run_config(&cfg, cli_out) {
            Ok((dir, report)) => {
                let passed = report.verdicts.iter().filter(|v| v.pass).count();
                (dir.display().to_string(), passed, report.verdicts.len() - passed)
            }
            Err(e @ CliError::Usage(_)) => return Err(e),
            Err(e) => (format!("error: {e}"), 0, 1),
        };
        all_pass &= failed == 0;
        entries.push(SuiteEntry {
            config: rel.clone(),
            run_dir,
            kind: cfg.kind,
            passed,
            failed,
        });
    }
    let summary = SuiteSummary { entries, all_pass };
    let root = out_root.unwrap_or_else(|| {
        output_root(
            &ExperimentConfig {
                version: SCHEMA_VERSION,
                kind: Kind::Degrees,
                torus: TorusSpec::Gaussian { k: 1 },
                map: vec![vec![1]],
                translation: None,
                params: Params::default(),
                output: None,
            },
            cli_out,
        )
    });
    fs::create_dir_all(&root)?;
    fs::write(
        root.join("summary.json"),
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Module(e.to_string()))?,
    )?;
    Ok(summary)
}

pub fn load_report(run_dir: &Path) -> Result<ExperimentReport, CliError> {
    let text = fs::read_to_string(run_dir.join("report.json")).map_err(|e| {
        CliError::Usage(format!("cannot read report in {}: {e}", run_dir.display()))
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Human summary of a stored report, for `show`.
pub fn format_report(report: &ExperimentReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("kind: {:?}\n", report.config.kind));
    if !report.scalars.is_empty() {
        out.push_str("scalars:\n");
        for (k, v) in &report.scalars {
            out.push_str(&format!("  {k} = {v}\n"));
        }
    }
    if !report.sequences.is_empty() {
        out.push_str("sequences:\n");
        for (k, v) in &report.sequences {
            out.push_str(&format!("  {k}: {} points\n", v.len()));
        }
    }
    out.push_str("verdicts:\n");
    for v in &report.verdicts {
        out.push_str(&format!(
            "  [{}] {} — {} ({})\n",
            if v.pass { "pass" } else { "FAIL" },
            v.name,
            v.detail,
            v.anchor
        ));
    }
    out
}
