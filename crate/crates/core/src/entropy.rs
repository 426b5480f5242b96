//! Entropy-side checks: Bowen-ball volumes, Brin-Katok estimates, the
//! Misiurewicz-style lower bound, Lyapunov exponents of affine maps and the
//! exponent/degree comparison, plus boundedness of pulled-back ball masses.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cohomology::{self, DegreeProfile};
use crate::error::{Error, Result};
use crate::forms::FourierForm;
use crate::torus::{Torus, TorusMap};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BowenQuery {
    pub n: usize,
    pub epsilon: f64,
    pub center: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub h_value: f64,
    pub n_used: usize,
    pub epsilon: f64,
    pub method: String,
    pub error_bar: f64,
}

/// Real eigenframe of the derivative on R^{2k}/Z^{2k}. The Bowen metric is
/// the sup norm in these coordinates (columns normalized to unit length).
struct EigenFrame {
    lambdas: Vec<f64>,
    w: DMatrix<f64>,
    w_inv: DMatrix<f64>,
    abs_det_w: f64,
}

fn real_eigenframe(map: &TorusMap) -> Result<EigenFrame> {
    let b = map.b.to_float();
    let n = b.nrows();
    let scale = b.norm().max(1.0);
    let schur = nalgebra::linalg::Schur::try_new(b.clone(), 1e-13, 100_000)
        .ok_or_else(|| Error::UseMonteCarlo("Schur iteration failed".into()))?;
    let t = schur.unpack().1;
    for i in 1..n {
        if t[(i, i - 1)].abs() > 1e-9 * scale {
            return Err(Error::UseMonteCarlo(
                "derivative has non-real eigenvalues".into(),
            ));
        }
    }
    let mut lambdas: Vec<f64> = (0..n).map(|i| t[(i, i)]).collect();
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // eigenvectors per distinct eigenvalue via SVD null spaces
    let mut cols: Vec<DMatrix<f64>> = Vec::new();
    let mut i = 0;
    while i < n {
        let lam = lambdas[i];
        let mut mult = 1;
        while i + mult < n && (lambdas[i + mult] - lam).abs() < 1e-7 * scale {
            mult += 1;
        }
        let shifted = &b - DMatrix::<f64>::identity(n, n) * lam;
        let svd = shifted.svd(true, true);
        let vt = svd.v_t.as_ref().unwrap();
        let mut found = 0;
        for (j, s) in svd.singular_values.iter().enumerate() {
            if *s < 1e-8 * scale {
                cols.push(DMatrix::from_fn(n, 1, |r, _| vt[(j, r)]));
                found += 1;
            }
        }
        if found < mult {
            return Err(Error::UseMonteCarlo(
                "derivative not diagonalizable over R".into(),
            ));
        }
        i += mult;
    }
    if cols.len() != n {
        return Err(Error::UseMonteCarlo(
            "eigenvector count mismatch".into(),
        ));
    }
    let w = DMatrix::from_fn(n, n, |r, c| cols[c][(r, 0)]);
    let det = w.determinant();
    if det.abs() < 1e-10 {
        return Err(Error::UseMonteCarlo(
            "eigenbasis is numerically degenerate".into(),
        ));
    }
    let w_inv = w
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::UseMonteCarlo("eigenbasis not invertible".into()))?;
    Ok(EigenFrame {
        lambdas,
        abs_det_w: det.abs(),
        w,
        w_inv,
    })
}

/// Shortest nonzero lattice vector in the frame's sup metric, scanned over
/// the +-1 shell (enough for the well-conditioned frames we accept).
fn frame_systole(frame: &EigenFrame) -> f64 {
    let n = frame.w.nrows();
    let mut best = f64::INFINITY;
    let mut l = vec![0i64; n];
    let total = 3usize.pow(n as u32);
    for idx in 0..total {
        let mut rem = idx;
        for v in l.iter_mut() {
            *v = (rem % 3) as i64 - 1;
            rem /= 3;
        }
        if l.iter().all(|&v| v == 0) {
            continue;
        }
        let mut sup = 0.0_f64;
        for r in 0..n {
            let y: f64 = (0..n).map(|c| frame.w_inv[(r, c)] * l[c] as f64).sum();
            sup = sup.max(y.abs());
        }
        best = best.min(sup);
    }
    best
}

fn check_epsilon(frame: &EigenFrame, epsilon: f64) -> Result<()> {
    if epsilon <= 0.0 {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    let sys = frame_systole(frame);
    if epsilon >= 0.5 * sys {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} is not below half the lattice systole {sys}"
        )));
    }
    Ok(())
}

/// Exact log Haar volume of the Bowen ball. In eigencoordinates the ball is
/// the box |y_j| <= eps * min(1, |lambda_j|^{-n}); mod 1 it is the only
/// component because the derivative is unimodular.
pub fn bowen_ball_log_volume_exact(map: &TorusMap, q: &BowenQuery) -> Result<f64> {
    let frame = real_eigenframe(map)?;
    check_epsilon(&frame, q.epsilon)?;
    let mut log_vol = frame.abs_det_w.ln();
    for &lam in &frame.lambdas {
        let contraction = if lam.abs() > 1.0 {
            -(q.n as f64) * lam.abs().ln()
        } else {
            0.0
        };
        log_vol += (2.0 * q.epsilon).ln() + contraction;
    }
    Ok(log_vol)
}

/// Monte Carlo Bowen volume: importance-sampled inside the n = 0 box,
/// orbit constraints checked with the wrapped eigen-sup distance.
/// Returns (volume, standard error).
pub fn bowen_ball_volume_monte_carlo(
    map: &TorusMap,
    q: &BowenQuery,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let frame = real_eigenframe(map)?;
    check_epsilon(&frame, q.epsilon)?;
    let n = frame.w.nrows();
    let b = map.b.to_float();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    let mut u = DMatrix::<f64>::zeros(n, 1);
    for _ in 0..samples {
        let y = DMatrix::from_fn(n, 1, |_, _| (rng.gen::<f64>() * 2.0 - 1.0) * q.epsilon);
        u.copy_from(&(&frame.w * y));
        let mut ok = true;
        for _ in 1..=q.n {
            u.copy_from(&(&b * &u));
            for r in 0..n {
                let mut v = u[(r, 0)].rem_euclid(1.0);
                if v > 0.5 {
                    v -= 1.0;
                }
                u[(r, 0)] = v;
            }
            let mut sup = 0.0_f64;
            for r in 0..n {
                let yr: f64 = (0..n).map(|c| frame.w_inv[(r, c)] * u[(c, 0)]).sum();
                sup = sup.max(yr.abs());
            }
            if sup > q.epsilon {
                ok = false;
                break;
            }
        }
        if ok {
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(Error::ZeroHits(samples));
    }
    let box_vol = (2.0 * q.epsilon).powi(n as i32) * frame.abs_det_w;
    let p = hits as f64 / samples as f64;
    let se = (p * (1.0 - p) / samples as f64).sqrt();
    Ok((box_vol * p, box_vol * se))
}

/// Brin-Katok estimate against Haar with a baseline correction: the h value
/// is -(1/n)(log vol_n - log vol_0), which removes the eps-box constant and
/// leaves only the dynamical contraction. Error bar is the O(1/n) box term
/// plus center spread / sampling error.
pub fn brin_katok_estimate(
    map: &TorusMap,
    n: usize,
    epsilon: f64,
    centers: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> Result<EntropyEstimate> {
    if n == 0 || centers.is_empty() {
        return Err(Error::InvalidParameter(
            "need n >= 1 and at least one center".into(),
        ));
    }
    match real_eigenframe(map) {
        Ok(frame) => {
            check_epsilon(&frame, epsilon)?;
            let q0 = BowenQuery {
                n: 0,
                epsilon,
                center: centers[0].clone(),
            };
            let qn = BowenQuery {
                n,
                epsilon,
                center: centers[0].clone(),
            };
            let base = bowen_ball_log_volume_exact(map, &q0)?;
            let log_vol = bowen_ball_log_volume_exact(map, &qn)?;
            let h = (-(log_vol - base) / n as f64).max(0.0);
            Ok(EntropyEstimate {
                h_value: h,
                n_used: n,
                epsilon,
                method: "exact-box".into(),
                error_bar: base.abs() / n as f64,
            })
        }
        Err(Error::UseMonteCarlo(_)) => {
            let mut values = Vec::with_capacity(centers.len());
            let mut rel_err = 0.0_f64;
            for (ci, center) in centers.iter().enumerate() {
                let q = BowenQuery {
                    n,
                    epsilon,
                    center: center.clone(),
                };
                let (vol, se) =
                    bowen_mc_identity_metric(map, &q, samples, seed.wrapping_add(ci as u64))?;
                let base = (2.0 * epsilon).powi(2 * map.k as i32);
                values.push((-(vol.ln() - base.ln()) / n as f64).max(0.0));
                rel_err = rel_err.max(se / vol / n as f64);
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let spread = values
                .iter()
                .map(|v| (v - mean).abs())
                .fold(0.0_f64, f64::max);
            Ok(EntropyEstimate {
                h_value: mean.max(0.0),
                n_used: n,
                epsilon,
                method: "monte-carlo".into(),
                error_bar: spread + rel_err,
            })
        }
        Err(e) => Err(e),
    }
}

/// Monte Carlo fallback in the standard sup metric, for maps whose
/// derivative has no real eigenbasis.
fn bowen_mc_identity_metric(
    map: &TorusMap,
    q: &BowenQuery,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if q.epsilon >= 0.5 {
        return Err(Error::InvalidParameter(
            "epsilon is not below half the lattice systole".into(),
        ));
    }
    let n = 2 * map.k;
    let b = map.b.to_float();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    let mut u = DMatrix::<f64>::zeros(n, 1);
    for _ in 0..samples {
        for r in 0..n {
            u[(r, 0)] = (rng.gen::<f64>() * 2.0 - 1.0) * q.epsilon;
        }
        let mut ok = true;
        for _ in 1..=q.n {
            u.copy_from(&(&b * &u));
            let mut sup = 0.0_f64;
            for r in 0..n {
                let mut v = u[(r, 0)].rem_euclid(1.0);
                if v > 0.5 {
                    v -= 1.0;
                }
                u[(r, 0)] = v;
                sup = sup.max(v.abs());
            }
            if sup > q.epsilon {
                ok = false;
                break;
            }
        }
        if ok {
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(Error::ZeroHits(samples));
    }
    let box_vol = (2.0 * q.epsilon).powi(n as i32);
    let p = hits as f64 / samples as f64;
    let se = (p * (1.0 - p) / samples as f64).sqrt();
    Ok((box_vol * p, box_vol * se))
}

/// Lower bound limsup -(1/n_i) log c_{n_i}, taken as the max over the
/// trailing quarter of the sequence (at least one entry).
pub fn misiurewicz_bound(c_sequence: &[f64], n_sequence: &[f64]) -> Result<(f64, usize)> {
    if c_sequence.len() != n_sequence.len() || c_sequence.is_empty() {
        return Err(Error::InvalidParameter(
            "sequences must be nonempty and of equal length".into(),
        ));
    }
    if c_sequence.iter().chain(n_sequence).any(|&v| v <= 0.0) {
        return Err(Error::InvalidParameter("sequences must be positive".into()));
    }
    let window = (c_sequence.len() / 4).max(1);
    let start = c_sequence.len() - window;
    let bound = c_sequence[start..]
        .iter()
        .zip(&n_sequence[start..])
        .map(|(&c, &n)| -c.ln() / n)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((bound, window))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovSpectrum {
    /// (exponent, multiplicity) over the real 2k eigendirections, descending.
    pub exponents: Vec<(f64, usize)>,
    pub hyperbolic: bool,
    pub sum: f64,
}

impl LyapunovSpectrum {
    /// All 2k real exponents, multiplicities expanded, descending.
    pub fn expanded(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for &(e, m) in &self.exponents {
            out.extend(std::iter::repeat(e).take(m));
        }
        out
    }
}

pub fn lyapunov_exponents(map: &TorusMap) -> Result<LyapunovSpectrum> {
    let b = map.b.to_float();
    let moduli = cohomology::eigen_moduli(&b);
    let mut exps: Vec<f64> = moduli.iter().map(|&m| m.max(1e-300).ln()).collect();
    exps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let sum: f64 = exps.iter().sum();
    let mut grouped: Vec<(f64, usize)> = Vec::new();
    for e in exps {
        match grouped.last_mut() {
            Some((v, m)) if (*v - e).abs() < 1e-8 => *m += 1,
            _ => grouped.push((e, 1)),
        }
    }
    let hyperbolic = grouped.iter().all(|&(e, _)| e.abs() > 1e-9);
    Ok(LyapunovSpectrum {
        exponents: grouped,
        hyperbolic,
        sum,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeThelinVerdict {
    pub pass: bool,
    pub p: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// k complex-direction exponents, descending.
    pub complex_exponents: Vec<f64>,
    pub details: String,
}

/// Checks that exactly p complex exponents sit at or above
/// (1/2) log(d_p/d_{p-1}) and the remaining k-p at or below
/// -(1/2) log(d_p/d_{p+1}).
pub fn de_thelin_check(
    spectrum: &LyapunovSpectrum,
    degrees: &DegreeProfile,
    tol: f64,
) -> Result<DeThelinVerdict> {
    let p = degrees.p;
    if degrees.p != degrees.p_prime {
        return Err(Error::Hypothesis(format!(
            "no strictly maximal degree: plateau [{}, {}]",
            degrees.p, degrees.p_prime
        )));
    }
    let k = degrees.degrees.len() - 1;
    if p == 0 || p == k {
        return Err(Error::Hypothesis(
            "strict maximum must sit in an interior degree".into(),
        ));
    }
    let reals = spectrum.expanded();
    if reals.len() != 2 * k {
        return Err(Error::Dimension(format!(
            "expected {} real exponents, got {}",
            2 * k,
            reals.len()
        )));
    }
    // pair real exponents into complex directions
    let mut complex_exponents = Vec::with_capacity(k);
    for i in 0..k {
        let (a, b) = (reals[2 * i], reals[2 * i + 1]);
        if (a - b).abs() > 1e-6 * a.abs().max(1.0).max(b.abs()) {
            return Ok(DeThelinVerdict {
                pass: false,
                p,
                lower_bound: 0.0,
                upper_bound: 0.0,
                complex_exponents: reals,
                details: format!("real exponents {a} and {b} do not pair"),
            });
        }
        complex_exponents.push(0.5 * (a + b));
    }
    let lower_bound = 0.5 * (degrees.degrees[p] / degrees.degrees[p - 1]).ln();
    let upper_bound = -0.5 * (degrees.degrees[p] / degrees.degrees[p + 1]).ln();
    let n_plus = complex_exponents
        .iter()
        .filter(|&&e| e >= lower_bound - tol)
        .count();
    let n_minus = complex_exponents
        .iter()
        .filter(|&&e| e <= upper_bound + tol)
        .count();
    let pass = n_plus == p && n_minus == k - p;
    let details = if pass {
        format!("{n_plus} exponents >= {lower_bound:.6}, {n_minus} <= {upper_bound:.6}")
    } else {
        format!(
            "expected {p} exponents >= {lower_bound:.6} and {} <= {upper_bound:.6}, \
             found {n_plus} and {n_minus}",
            k - p
        )
    };
    Ok(DeThelinVerdict {
        pass,
        p,
        lower_bound,
        upper_bound,
        complex_exponents,
        details,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct YomdinReport {
    /// nu_n''(B_n(a, eps)) * e^{-n delta} for n = 0..=n_max.
    pub ratios: Vec<f64>,
    /// max of the ratios: the smallest admissible constant A.
    pub fitted_a: f64,
    /// true when the max is attained in the first half of the range.
    pub bounded: bool,
}

/// Mass of (f^n)^*(omega^p) wedge omega^{k-p} on Bowen balls, scaled by
/// e^{-n delta}. The density is constant, so each mass is the total pairing
/// times the exact Haar box volume.
pub fn yomdin_ball_mass(
    torus: &Torus,
    map: &TorusMap,
    p: usize,
    n_max: usize,
    epsilon: f64,
    delta: f64,
) -> Result<YomdinReport> {
    if p > torus.k {
        return Err(Error::BidegreeOverflow {
            p,
            q: p,
            k: torus.k,
        });
    }
    let omega_p = FourierForm::std_omega_power(torus.k, p);
    let omega_rest = FourierForm::std_omega_power(torus.k, torus.k - p);
    let mut pulled = omega_p;
    let mut ratios = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mass = pulled.pairing(&omega_rest, torus)?.re;
        let q = BowenQuery {
            n,
            epsilon,
            center: vec![0.0; 2 * torus.k],
        };
        let log_vol = bowen_ball_log_volume_exact(map, &q)?;
        ratios.push(mass * log_vol.exp() * (-(n as f64) * delta).exp());
        if n < n_max {
            pulled = pulled.pullback(map, 4)?;
        }
    }
    let (argmax, &max) = ratios
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    Ok(YomdinReport {
        ratios,
        fitted_a: max,
        bounded: 2 * argmax <= n_max,
    })
}
