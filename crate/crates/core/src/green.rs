//! Iteration toward Green currents and the dynamics built on them:
//! normalized pullbacks, Cesaro averaging, uniqueness and equidistribution
//! experiments, equilibrium measures, correlation decay and moderate-measure
//! checks.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cohomology;
use crate::error::{Error, Result};
use crate::forms::FourierForm;
use crate::matrix::RealMatrix;
use crate::spectral;
use crate::torus::{Torus, TorusMap};

/// Result of a normalized-pullback (or Cesaro) iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRun {
    pub q: usize,
    /// (m, d_q): polynomial order and degree used in the normalization
    /// n^{1-m} d_q^{-n}.
    pub normalization: (usize, f64),
    /// c_minus_2 surrogate distances between consecutive normalized iterates.
    pub distances: Vec<f64>,
    /// Distances from each iterate to the final one.
    pub distances_to_limit: Vec<f64>,
    pub limit: FourierForm,
    /// Geometric rate fitted on the tail of `distances`.
    pub fitted_rate: f64,
    /// Residual of the limit's class against the certified subspace
    /// (F for plain iteration, H for Cesaro).
    pub class_residual: f64,
    pub dropped_mass_total: f64,
    /// Set when the truncation budget stopped the run before n_max.
    pub truncated: bool,
    pub n_done: usize,
}

/// c_minus_2 surrogate distance between two forms of the same type.
pub fn c_minus_2_distance(a: &FourierForm, b: &FourierForm) -> f64 {
    let diff = match a.sub(b) {
        Ok(d) => d,
        Err(_) => return f64::INFINITY,
    };
    diff.coefficients
        .iter()
        .map(|(m, c)| {
            let w = 1.0 + m.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
            crate::forms::coef_norm(c) * w.powi(-2)
        })
        .fold(0.0_f64, f64::max)
}

fn degree_data(torus: &Torus, map: &TorusMap, q: usize) -> Result<(f64, usize)> {
    let model = cohomology::build_torus_cohomology(torus, map)?;
    let profile = cohomology::dynamical_degrees(&model)?;
    let d_q = profile.degrees[q];
    let d_qm1 = profile.degrees[q - 1];
    if d_qm1 >= d_q * (1.0 - 1e-9) {
        return Err(Error::Hypothesis(format!(
            "d_(q-1) < d_q violated: {d_qm1} vs {d_q}"
        )));
    }
    let mq = model.action[q].to_float();
    let count = profile.multiplicity[q];
    let m = cohomology::dominant_block_size(&mq, d_q, count);
    Ok((d_q, m))
}

/// Residual of `v` against the column space of `basis` (least squares).
fn span_residual(basis: &RealMatrix, v: &[f64]) -> f64 {
    let b = basis.to_float();
    if b.ncols() == 0 {
        return v.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    let rhs = DMatrix::from_fn(v.len(), 1, |i, _| v[i]);
    let sol = b.clone().svd(true, true).solve(&rhs, 1e-12).unwrap();
    (&b * sol - &rhs).norm() / rhs.norm().max(1e-300)
}

fn geometric_rate(distances: &[f64]) -> f64 {
    let tail: Vec<f64> = distances
        .iter()
        .cloned()
        .filter(|&d| d > 1e-300)
        .collect();
    if tail.len() < 2 {
        return 0.0;
    }
    let take = tail.len().min(6);
    let window = &tail[tail.len() - take..];
    let mut ratios: Vec<f64> = window.windows(2).map(|w| w[1] / w[0]).collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ratios[ratios.len() / 2]
}

/// Normalized pullback iteration n^{1-m} d_q^{-n} (f^n)^* S0.
pub fn iterate_green(
    torus: &Torus,
    map: &TorusMap,
    s0: &FourierForm,
    n_max: usize,
    cap: i64,
    budget: f64,
) -> Result<IterationRun> {
    let (q, q2) = s0.bidegree;
    if q != q2 || q == 0 {
        return Err(Error::InvalidParameter("S0 must have bidegree (q,q), q >= 1".into()));
    }
    let res = s0.d_residual(torus);
    if res > 1e-9 * s0.sup_coefficient().max(1.0) {
        return Err(Error::NotClosed(res));
    }
    let (d_q, m) = degree_data(torus, map, q)?;
    let mut g = s0.clone(); // d_q^{-n} (f^n)^* S0
    let mut iterates: Vec<FourierForm> = Vec::with_capacity(n_max + 1);
    iterates.push(s0.clone());
    let mut truncated = false;
    for n in 1..=n_max {
        g = g.pullback(map, cap)?.scale(Complex64::new(1.0 / d_q, 0.0));
        if g.dropped_mass - s0.dropped_mass > budget {
            truncated = true;
            break;
        }
        let t_n = g.scale(Complex64::new((n as f64).powi(1 - m as i32), 0.0));
        iterates.push(t_n);
    }
    finish_run(torus, map, q, (m, d_q), iterates, truncated, false)
}

/// Cesaro averages of the normalized pullbacks, with one Richardson step for
/// the reported limit (the raw averages converge only like 1/N).
pub fn cesaro_green(
    torus: &Torus,
    map: &TorusMap,
    s0: &FourierForm,
    n_max: usize,
    cap: i64,
    budget: f64,
) -> Result<IterationRun> {
    let (q, q2) = s0.bidegree;
    if q != q2 || q == 0 {
        return Err(Error::InvalidParameter("S0 must have bidegree (q,q), q >= 1".into()));
    }
    let (d_q, m) = degree_data(torus, map, q)?;
    let mut g = s0.clone();
    let mut sum = FourierForm::zero(s0.k, s0.bidegree);
    let mut averages: Vec<FourierForm> = Vec::new();
    let mut half_average: Option<FourierForm> = None;
    let mut truncated = false;
    let checkpoints: Vec<usize> = (1..=n_max).filter(|n| n % (n_max / 8).max(1) == 0).collect();
    for n in 1..=n_max {
        g = g.pullback(map, cap)?.scale(Complex64::new(1.0 / d_q, 0.0));
        if g.dropped_mass - s0.dropped_mass > budget {
            truncated = true;
            break;
        }
        let t_n = g.scale(Complex64::new((n as f64).powi(1 - m as i32), 0.0));
        sum = sum.add(&t_n)?;
        if n == n_max / 2 {
            half_average = Some(sum.scale(Complex64::new(1.0 / n as f64, 0.0)));
        }
        if checkpoints.contains(&n) {
            averages.push(sum.scale(Complex64::new(1.0 / n as f64, 0.0)));
        }
    }
    // Richardson against the 1/N term when both checkpoints are available.
    if let (Some(half), Some(full)) = (half_average, averages.last().cloned()) {
        let accel = full
            .scale(Complex64::new(2.0, 0.0))
            .sub(&half)?;
        averages.push(accel);
    }
    finish_run(torus, map, q, (m, d_q), averages, truncated, true)
}

fn finish_run(
    torus: &Torus,
    map: &TorusMap,
    q: usize,
    normalization: (usize, f64),
    iterates: Vec<FourierForm>,
    truncated: bool,
    cesaro: bool,
) -> Result<IterationRun> {
    if iterates.is_empty() {
        return Err(Error::InvalidParameter("no iterates computed".into()));
    }
    let limit = iterates.last().unwrap().clone();
    let distances: Vec<f64> = iterates
        .windows(2)
        .map(|w| c_minus_2_distance(&w[0], &w[1]))
        .collect();
    let distances_to_limit: Vec<f64> = iterates
        .iter()
        .map(|f| c_minus_2_distance(f, &limit))
        .collect();
    // class certification: F (dominant generalized eigenspace) for plain
    // iteration, H (eigenvalue d_q itself) for Cesaro limits.
    let mq = RealMatrix::from_float(
        cohomology::real_pullback_matrix(torus.k, &map.a, q)?,
    );
    let profile = spectral::compute_spectral_profile(&mq, 1e-9)?;
    let (_, coords) = limit.harmonic_part(torus, 1e-6 * limit.sup_coefficient().max(1.0))?;
    let basis = if cesaro {
        &profile.h_basis
    } else {
        &profile.f_basis
    };
    let class_residual = if coords.iter().all(|&v| v.abs() < 1e-12) {
        0.0
    } else {
        span_residual(basis, &coords)
    };
    let n_done = iterates.len() - 1;
    Ok(IterationRun {
        q,
        normalization,
        fitted_rate: geometric_rate(&distances),
        distances,
        distances_to_limit,
        dropped_mass_total: limit.dropped_mass,
        limit,
        class_residual,
        truncated,
        n_done,
    })
}

/// Iterates two cohomologous positive starts and reports the surrogate
/// distance between the two limits.
pub fn uniqueness_experiment(
    torus: &Torus,
    map: &TorusMap,
    s0: &FourierForm,
    s0_prime: &FourierForm,
    n_max: usize,
    cap: i64,
    budget: f64,
) -> Result<f64> {
    let tol = 1e-9 * s0.sup_coefficient().max(1.0);
    let (_, c1) = s0.harmonic_part(torus, tol)?;
    let (_, c2) = s0_prime.harmonic_part(torus, tol)?;
    let gap = c1
        .iter()
        .zip(c2.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    if gap > 1e-9 * c1.iter().map(|v| v.abs()).fold(1.0, f64::max) {
        return Err(Error::ClassMismatch(format!(
            "starting classes differ by {gap}"
        )));
    }
    for (name, s) in [("S0", s0), ("S0'", s0_prime)] {
        let (c, certified) = s.positivity_constant(torus, 8)?;
        if !certified || c > 1e-9 {
            return Err(Error::Hypothesis(format!(
                "{name} is not grid-certified positive (C = {c})"
            )));
        }
    }
    let run_a = iterate_green(torus, map, s0, n_max, cap, budget)?;
    let run_b = iterate_green(torus, map, s0_prime, n_max, cap, budget)?;
    Ok(c_minus_2_distance(&run_a.limit, &run_b.limit))
}

/// Wedge of the forward and backward Green limits, as a measure density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureDensity {
    pub density: FourierForm,
    pub mass: f64,
    /// Minimum of the density over the certification grid.
    pub nonneg_grid_min: f64,
    /// Coefficient norm of f^* mu - mu.
    pub invariance_residual: f64,
    pub zero_flag: bool,
}

pub fn equilibrium_measure(
    torus: &Torus,
    map: &TorusMap,
    t_plus: &FourierForm,
    t_minus: &FourierForm,
    cap: i64,
    criterion_holds: bool,
) -> Result<MeasureDensity> {
    let density = t_plus.wedge(t_minus, cap)?;
    if density.bidegree != (torus.k, torus.k) {
        return Err(Error::BidegreeOverflow {
            p: density.bidegree.0,
            q: density.bidegree.1,
            k: torus.k,
        });
    }
    let zero_mode = vec![0i64; 2 * torus.k];
    let mass = density
        .coefficients
        .get(&zero_mode)
        .map(|c| torus.top_integral(c).re)
        .unwrap_or(0.0);
    let scale = t_plus.sup_coefficient() * t_minus.sup_coefficient();
    if criterion_holds && mass <= 1e-10 * scale.max(1e-300) {
        return Err(Error::Hypothesis(
            "mixing criterion holds but the wedge measure has zero mass".into(),
        ));
    }
    // grid minimum of the scalar density against the volume form
    let vol = torus.top_const;
    let grid = 12usize;
    let mut min = f64::INFINITY;
    let mut t = vec![0.0_f64; 2 * torus.k];
    let npts = grid.pow(2 * torus.k as u32);
    for idx in 0..npts {
        let mut rem = idx;
        for a in 0..2 * torus.k {
            t[a] = rem as f64 % grid as f64 / grid as f64;
            rem /= grid;
        }
        let v = density.value_at(&t);
        let val = (v[0] * vol).re;
        if val < min {
            min = val;
        }
    }
    let pulled = density.pullback(map, 4 * cap)?;
    let invariance_residual = pulled.sub(&density)?.sup_coefficient();
    Ok(MeasureDensity {
        zero_flag: mass.abs() <= 1e-14 * scale.max(1e-300),
        density,
        mass,
        nonneg_grid_min: min,
        invariance_residual,
    })
}

/// Correlations C_n = <mu, (phi o f^n) psi> - <mu,phi><mu,psi>/||mu||,
/// evaluated exactly through the character calculus.
pub fn mixing_correlations(
    mu: &MeasureDensity,
    torus: &Torus,
    map: &TorusMap,
    phi: &FourierForm,
    psi: &FourierForm,
    n_max: usize,
    cap: i64,
) -> Result<Vec<f64>> {
    if phi.bidegree != (0, 0) || psi.bidegree != (0, 0) {
        return Err(Error::InvalidParameter("observables must be functions".into()));
    }
    if mu.mass.abs() < 1e-300 {
        return Err(Error::InvalidParameter("measure has zero mass".into()));
    }
    let pair = |g: &FourierForm| -> Result<f64> { Ok(g.pairing(&mu.density, torus)?.re) };
    let mean_phi = pair(phi)?;
    let mean_psi = pair(psi)?;
    let background = mean_phi * mean_psi / mu.mass;
    let mut out = Vec::with_capacity(n_max + 1);
    let mut phi_n = phi.clone();
    for _ in 0..=n_max {
        let prod = phi_n.wedge(psi, cap)?;
        out.push(pair(&prod)? - background);
        phi_n = phi_n.pullback(map, cap)?;
    }
    Ok(out)
}

/// A test function for moderate-measure checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Zero,
    /// log of the flat torus distance to a center point (internal coords).
    LogDistance { center: Vec<f64> },
    /// max of two test functions
    Max {
        a: Box<TestFunction>,
        b: Box<TestFunction>,
    },
}

impl TestFunction {
    pub fn eval(&self, t: &[f64]) -> f64 {
        match self {
            TestFunction::Zero => 0.0,
            TestFunction::LogDistance { center } => {
                let mut d2 = 0.0;
                for (a, b) in t.iter().zip(center.iter()) {
                    let mut d = (a - b).rem_euclid(1.0);
                    if d > 0.5 {
                        d = 1.0 - d;
                    }
                    d2 += d * d;
                }
                d2.sqrt().max(1e-300).ln()
            }
            TestFunction::Max { a, b } => a.eval(t).max(b.eval(t)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModerateEntry {
    pub lambda: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub inconclusive: bool,
}

/// Monte Carlo table of <mu, e^{lambda |u|}> over a function family and a
/// lambda grid. Deterministic for a fixed seed.
pub fn moderate_check(
    mu: &MeasureDensity,
    torus: &Torus,
    u_family: &[TestFunction],
    lambda_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<ModerateEntry>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * torus.k;
    let vol = torus.top_const;
    // fixed sample set shared by all entries
    let points: Vec<Vec<f64>> = (0..samples)
        .map(|_| (0..n).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let weights: Vec<f64> = points
        .iter()
        .map(|t| (mu.density.value_at(t)[0] * vol).re)
        .collect();
    let mut table = Vec::with_capacity(u_family.len());
    for u in u_family {
        let uvals: Vec<f64> = points.iter().map(|t| u.eval(t).abs()).collect();
        let mut row = Vec::with_capacity(lambda_grid.len());
        for &lambda in lambda_grid {
            let vals: Vec<f64> = uvals
                .iter()
                .zip(weights.iter())
                .map(|(&uv, &w)| w * (lambda * uv).exp())
                .collect();
            let mean = vals.iter().sum::<f64>() / samples as f64;
            let var = vals
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / (samples as f64 - 1.0);
            let std_error = (var / samples as f64).sqrt();
            let inconclusive = !mean.is_finite() || std_error > 0.5 * mean.abs().max(1e-300);
            row.push(ModerateEntry {
                lambda,
                estimate: mean,
                std_error,
                inconclusive,
            });
        }
        table.push(row);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::FourierForm;
    use crate::torus::MapSpec;

    const PHI: f64 = 1.618033988749894848;

    fn gauss2() -> Torus {
        Torus::gaussian(2).unwrap()
    }

    fn worked_map(t: &Torus) -> TorusMap {
        MapSpec::from_integer(&[vec![2, 1], vec![1, 1]]).build(t).unwrap()
    }

    #[test]
    fn identity_map_fails_hypothesis_gate() {
        let t = gauss2();
        let id = MapSpec::from_integer(&[vec![1, 0], vec![0, 1]]).build(&t).unwrap();
        let om = FourierForm::std_omega(2);
        assert!(matches!(
            iterate_green(&t, &id, &om, 10, 64, 1e-8),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn iterate_green_on_worked_example() {
        let t = gauss2();
        let f = worked_map(&t);
        let om = FourierForm::std_omega(2);
        let run = iterate_green(&t, &f, &om, 14, 64, 1e-8).unwrap();
        assert_eq!(run.normalization.0, 1);
        assert!((run.normalization.1 - PHI.powi(4)).abs() < 1e-8);
        assert!(!run.truncated);
        // limit is the constant dominant eigenform: pulling it back once more
        // and renormalizing changes nothing.
        let once = run
            .limit
            .pullback(&f, 64)
            .unwrap()
            .scale(Complex64::new(1.0 / run.normalization.1, 0.0));
        assert!(c_minus_2_distance(&once, &run.limit) < 1e-8);
        // distance to limit small by n = 10
        assert!(run.distances_to_limit[10] < 1e-9);
        assert!(run.class_residual < 1e-8);

        // adding an exact single-mode part does not change the limit
        let bump = FourierForm::real_character(2, vec![1, 0, 0, 1], Complex64::new(0.05, 0.0))
            .ddc(&t)
            .unwrap();
        let s0 = om.add(&bump).unwrap();
        let run2 = iterate_green(&t, &f, &s0, 14, 1_000_000, 1e-8).unwrap();
        assert!(c_minus_2_distance(&run.limit, &run2.limit) < 1e-8);
        // fitted decay of the exact part is at most about 1/d_1 here;
        // certainly a genuine geometric rate below 1.
        assert!(run2.fitted_rate < 1.0);
    }

    #[test]
    fn cesaro_green_limits() {
        let t = gauss2();
        let f = worked_map(&t);
        let om = FourierForm::std_omega(2);
        let plain = iterate_green(&t, &f, &om, 14, 64, 1e-8).unwrap();
        let ces = cesaro_green(&t, &f, &om, 400, 64, 1e-8).unwrap();
        // Same limit for a simple real dominant eigenvalue; the Cesaro
        // average converges like 1/N, the Richardson step buys ~1/N^2.
        assert!(
            c_minus_2_distance(&plain.limit, &ces.limit) < 1e-4,
            "distance {}",
            c_minus_2_distance(&plain.limit, &ces.limit)
        );
        assert!(ces.class_residual < 1e-4);

        // class in the contracting eigenspace: limit 0.
        // The eigenform for phi^{-4} of M_1 is the pullback-invariant
        // direction of the inverse map; build it from the inverse model.
        let g = f.inverse(&t).unwrap();
        let back = iterate_green(&t, &g, &om, 30, 64, 1e-8).unwrap();
        let minus_class = back.limit.clone(); // eigenform for d_1 of f^{-1} = phi^4
        // f^* on this class contracts by phi^{-4}: normalized iteration tends to 0
        let run0 = iterate_green(&t, &f, &minus_class, 20, 64, 1e-8).unwrap();
        assert!(run0.limit.sup_coefficient() < 1e-9);

        let z = FourierForm::zero(2, (1, 1));
        let runz = cesaro_green(&t, &f, &z, 50, 64, 1e-8).unwrap();
        assert!(runz.limit.sup_coefficient() == 0.0);
    }

    #[test]
    fn green_limit_functional_equation_and_linearity() {
        let t = gauss2();
        let f = worked_map(&t);
        let om = FourierForm::std_omega(2);
        let d1 = PHI.powi(4);
        let run = iterate_green(&t, &f, &om, 16, 64, 1e-8).unwrap();
        let lhs = run
            .limit
            .pullback(&f, 64)
            .unwrap()
            .scale(Complex64::new(1.0 / d1, 0.0));
        assert!(lhs.sub(&run.limit).unwrap().sup_coefficient() < 1e-8);
        // linearity in the start
        let s2 = om.scale(Complex64::new(3.0, 0.0));
        let run2 = iterate_green(&t, &f, &s2, 16, 64, 1e-8).unwrap();
        let scaled = run.limit.scale(Complex64::new(3.0, 0.0));
        assert!(scaled.sub(&run2.limit).unwrap().sup_coefficient() < 1e-8);
    }

    #[test]
    fn uniqueness_experiment_cases() {
        let t = gauss2();
        let f = worked_map(&t);
        let om = FourierForm::std_omega(2);
        // identical starts
        let d = uniqueness_experiment(&t, &f, &om, &om, 12, 1_000_000, 1e-6).unwrap();
        assert_eq!(d, 0.0);
        // dd^c-perturbed start, small enough to stay positive
        let bump = FourierForm::real_character(2, vec![1, 0, -1, 0], Complex64::new(0.01, 0.0))
            .ddc(&t)
            .unwrap();
        let s0p = om.add(&bump).unwrap();
        let d = uniqueness_experiment(&t, &f, &om, &s0p, 12, 1_000_000, 1e-6).unwrap();
        assert!(d < 1e-7, "limit distance {d}");
        // different class is rejected
        let other = om.scale(Complex64::new(2.0, 0.0));
        assert!(matches!(
            uniqueness_experiment(&t, &f, &om, &other, 8, 64, 1e-6),
            Err(Error::ClassMismatch(_))
        ));
    }

    #[test]
    fn equilibrium_measure_on_worked_example() {
        let t = gauss2();
        let f = worked_map(&t);
        let g = f.inverse(&t).unwrap();
        let om = FourierForm::std_omega(2);
        let plus = iterate_green(&t, &f, &om, 16, 64, 1e-8).unwrap();
        let minus = iterate_green(&t, &g, &om, 16, 64, 1e-8).unwrap();
        let mu = equilibrium_measure(&t, &f, &plus.limit, &minus.limit, 64, true).unwrap();
        assert!(mu.mass > 0.0);
        assert!(!mu.zero_flag);
        // constant density: Haar up to scale
        assert_eq!(mu.density.coefficients.len(), 1);
        assert!(mu.invariance_residual < 1e-10);
        assert!(mu.nonneg_grid_min > 0.0);
        // mass equals the cohomological pairing of the limit classes
        let pairing = plus.limit.pairing(&minus.limit, &t).unwrap().re;
        assert!((mu.mass - pairing).abs() < 1e-10);
        // bilinearity in the inputs
        let mu2 = equilibrium_measure(
            &t,
            &f,
            &plus.limit.scale(Complex64::new(2.0, 0.0)),
            &minus.limit.scale(Complex64::new(3.0, 0.0)),
            64,
            true,
        )
        .unwrap();
        assert!((mu2.mass - 6.0 * mu.mass).abs() < 1e-9);
        // zero input is flagged, not an error (criterion not asserted)
        let z = FourierForm::zero(2, (1, 1));
        let mu0 = equilibrium_measure(&t, &f, &plus.limit, &z, 64, false).unwrap();
        assert!(mu0.zero_flag);
    }

    #[test]
    fn mixing_correlations_vanish_exactly() {
        let t = gauss2();
        let f = worked_map(&t);
        let haar = FourierForm::constant(
            2,
            (2, 2),
            vec![Complex64::new(1.0, 0.0) / t.top_const],
        )
        .unwrap();
        let mu = MeasureDensity {
            density: haar,
            mass: 1.0,
            nonneg_grid_min: 1.0,
            invariance_residual: 0.0,
            zero_flag: false,
        };
        // constant observable: all correlations vanish
        let c = FourierForm::constant(2, (0, 0), vec![Complex64::new(2.0, 0.0)]).unwrap();
        let psi = FourierForm::character(2, vec![1, 0, 0, 0], Complex64::new(1.0, 0.0));
        let corr = mixing_correlations(&mu, &t, &f, &c, &psi, 8, 1 << 40).unwrap();
        assert!(corr.iter().all(|&v| v.abs() < 1e-12));
        // single modes: C_n = 1 exactly when the pulled mode cancels m'
        let phi = FourierForm::character(2, vec![1, 0, 0, 0], Complex64::new(1.0, 0.0));
        let psi0 = FourierForm::character(2, vec![-1, 0, 0, 0], Complex64::new(1.0, 0.0));
        let corr = mixing_correlations(&mu, &t, &f, &phi, &psi0, 10, 1 << 40).unwrap();
        assert!((corr[0] - 1.0).abs() < 1e-12);
        // oracle: nonzero exactly when B^T^n m = -m'
        for (n, &v) in corr.iter().enumerate() {
            let mut m = vec![1i64, 0, 0, 0];
            for _ in 0..n {
                m = f.pullback_mode(&m).unwrap();
            }
            let hit = m == vec![1, 0, 0, 0];
            if hit {
                assert!((v - 1.0).abs() < 1e-12, "n={n}");
            } else {
                assert!(v.abs() < 1e-12, "n={n}: {v}");
            }
        }
        // multi-mode observables: exact zero tail
        let mut phi5 = FourierForm::zero(2, (0, 0));
        let mut psi5 = FourierForm::zero(2, (0, 0));
        let modes = [
            (vec![1i64, 0, 0, 0], 0.3),
            (vec![0, 1, 0, 0], -0.2),
            (vec![1, 1, -1, 0], 0.15),
            (vec![0, 0, 1, 1], 0.4),
            (vec![-1, 0, 1, 0], 0.25),
        ];
        for (m, a) in &modes {
            let neg: Vec<i64> = m.iter().map(|&v| -v).collect();
            phi5.add_to_mode(m, &[Complex64::new(*a, 0.0)]);
            phi5.add_to_mode(&neg, &[Complex64::new(*a, 0.0)]);
            psi5.add_to_mode(&neg, &[Complex64::new(*a * 0.5, 0.1)]);
            psi5.add_to_mode(m, &[Complex64::new(*a * 0.5, -0.1)]);
        }
        let corr = mixing_correlations(&mu, &t, &f, &phi5, &psi5, 12, 1 << 40).unwrap();
        let tail_start = corr
            .iter()
            .rposition(|&v| v.abs() > 1e-12)
            .map(|i| i + 1)
            .unwrap_or(0);
        assert!(tail_start <= 8, "correlations persist to n = {tail_start}");
        assert!(corr[8..].iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn moderate_check_examples() {
        let t = gauss2();
        let haar = FourierForm::constant(
            2,
            (2, 2),
            vec![Complex64::new(1.0, 0.0) / t.top_const],
        )
        .unwrap();
        let mu = MeasureDensity {
            density: haar,
            mass: 1.0,
            nonneg_grid_min: 1.0,
            invariance_residual: 0.0,
            zero_flag: false,
        };
        let family = vec![
            TestFunction::Zero,
            TestFunction::LogDistance {
                center: vec![0.3, 0.3, 0.7, 0.1],
            },
        ];
        let table = moderate_check(&mu, &t, &family, &[0.0, 0.5], 20_000, 7).unwrap();
        // u = 0 or lambda = 0: value exactly 1
        assert!((table[0][0].estimate - 1.0).abs() < 1e-12);
        assert!((table[0][1].estimate - 1.0).abs() < 1e-12);
        assert!((table[1][0].estimate - 1.0).abs() < 1e-12);
        let e = &table[1][1];
        assert!(!e.inconclusive);
        // oracle: deterministic grid quadrature of the same integrand
        let g = 24usize;
        let u = &family[1];
        let mut acc = 0.0;
        let mut pt = [0.0_f64; 4];
        for idx in 0..g.pow(4) {
            let mut rem = idx;
            for a in 0..4 {
                pt[a] = (rem % g) as f64 / g as f64 + 0.5 / g as f64;
                rem /= g;
            }
            acc += (0.5 * u.eval(&pt).abs()).exp();
        }
        let oracle = acc / g.pow(4) as f64;
        assert!(
            (e.estimate - oracle).abs() < 3.0 * e.std_error + 1e-3,
            "{} vs {} (se {})",
            e.estimate,
            oracle,
            e.std_error
        );
        // determinism
        let again = moderate_check(&mu, &t, &family, &[0.0, 0.5], 20_000, 7).unwrap();
        assert_eq!(again[1][1].estimate, e.estimate);
    }

    #[test]
    fn green_series_cross_check() {
        // superpotential of the iterated limit vs the series evaluation
        let t = gauss2();
        let f = worked_map(&t);
        let om = FourierForm::std_omega(2);
        let run = iterate_green(&t, &f, &om, 40, 64, 1e-8).unwrap();
        let basis = crate::superpot::NormalizationBasis::standard(&t, 1).unwrap();
        let c = basis.class_coordinates(&om, &t).unwrap();
        let gs = crate::superpot::GreenSeries::new(&t, &f, 1, c, None, 4096, 1e-6).unwrap();
        let r = FourierForm::real_character(2, vec![1, 0, 0, 0], Complex64::new(0.5, 0.0))
            .ddc(&t)
            .unwrap()
            .wedge(&FourierForm::std_omega(2), 64)
            .unwrap();
        let series = gs.eval(&r, 1e-9).unwrap();
        let direct =
            crate::superpot::superpotential_value(&run.limit, &r, &basis, &t).unwrap();
        assert!(
            (series.value - direct).abs() < 2e-9 + 2.0 * series.tail_bound,
            "{} vs {}",
            series.value,
            direct
        );
    }
}
