//! Action of an automorphism on the full Hodge diagonal H^{q,q}.
//!
//! For a torus every class has a unique constant representative, so the
//! action of f on H^{q,q} is the exterior-power action of its derivative,
//! expressed in the fixed real basis of `covector::real_basis`. Dynamical
//! degrees, duality, mixing conditions and mass growth are all read off
//! these finite matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::covector;
use crate::error::{Error, Result};
use crate::matrix::RealMatrix;
use crate::torus::{Torus, TorusMap};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohomologyModel {
    pub k: usize,
    /// h[q] = dim H^{q,q}.
    pub h: Vec<usize>,
    /// action[q] = matrix of f^* on H^{q,q}, column convention.
    pub action: Vec<RealMatrix>,
    /// push_action[q] = matrix of f_* = (f^{-1})^* on H^{q,q}, column convention.
    pub push_action: Vec<RealMatrix>,
    /// pairing[q][i][j] = integral of e_i^{(q)} wedge e_j^{(k-q)}.
    pub pairing: Vec<RealMatrix>,
    /// omega_class[q] = coordinates of [omega^q].
    pub omega_class: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegreeProfile {
    pub degrees: Vec<f64>,
    /// Plateau endpoints of the maximal degree.
    pub p: usize,
    pub p_prime: usize,
    pub entropy: f64,
    /// Number of eigenvalues of maximal modulus, per q.
    pub multiplicity: Vec<usize>,
    /// Degree estimate from the volume-growth limit formula at n = 60.
    pub limit_estimate: Vec<f64>,
    pub limit_gap: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixingReport {
    pub hypotheses_met: bool,
    pub p: usize,
    pub cond2: bool,
    pub cond3: bool,
    /// Largest Jordan block size among eigenvalues of maximal modulus.
    pub block_size: usize,
    pub mass_series: Vec<f64>,
    pub fitted_floor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MassGrowth {
    pub sequence: Vec<f64>,
    pub kappa: f64,
    pub growth_rate: f64,
    pub poly_degree: f64,
}

/// Pullback of a component vector of a constant (p,q)-covector.
pub fn pullback_components(
    k: usize,
    a: &DMatrix<Complex64>,
    bideg: (usize, usize),
    comps: &[Complex64],
) -> Vec<Complex64> {
    let act = covector::pullback_action(k, a, bideg.0, bideg.1);
    let d = comps.len();
    let mut out = vec![Complex64::new(0.0, 0.0); d];
    for (i, &c) in comps.iter().enumerate() {
        if c.norm_sqr() == 0.0 {
            continue;
        }
        for j in 0..d {
            out[j] += c * act[(i, j)];
        }
    }
    out
}

/// Matrix of the pullback by the complex-linear map `a` on the real basis
/// of (p,p)-covectors. Column j holds the coordinates of the image of basis
/// vector j.
pub fn real_pullback_matrix(k: usize, a: &DMatrix<Complex64>, p: usize) -> Result<DMatrix<f64>> {
    let basis = covector::real_basis(k, p);
    let h = basis.len();
    let act = covector::pullback_action(k, a, p, p);
    let d = covector::dim(k, p, p);
    let mut out = DMatrix::zeros(h, h);
    for (j, vec) in basis.iter().enumerate() {
        let mut comps = vec![Complex64::new(0.0, 0.0); d];
        for &(idx, val) in &vec.terms {
            comps[idx] += val;
        }
        let mut pulled = vec![Complex64::new(0.0, 0.0); d];
        for (i, &c) in comps.iter().enumerate() {
            if c.norm_sqr() == 0.0 {
                continue;
            }
            for t in 0..d {
                pulled[t] += c * act[(i, t)];
            }
        }
        let (coords, imag) = covector::real_coordinates(k, p, &pulled);
        if imag > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "pullback of a real form not real (residual {imag:.3e})"
            )));
        }
        for (i, &v) in coords.iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

pub fn build_torus_cohomology(torus: &Torus, map: &TorusMap) -> Result<CohomologyModel> {
    let k = torus.k;
    let a_inv = map
        .a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotAutomorphism("derivative not invertible".into()))?;
    let mut h = Vec::with_capacity(k + 1);
    let mut action = Vec::with_capacity(k + 1);
    let mut push_action = Vec::with_capacity(k + 1);
    let mut pairing = Vec::with_capacity(k + 1);
    let mut omega_class = Vec::with_capacity(k + 1);
    for q in 0..=k {
        let hq = covector::binomial(k, q).pow(2);
        h.push(hq);
        action.push(RealMatrix::from_float(real_pullback_matrix(k, &map.a, q)?));
        push_action.push(RealMatrix::from_float(real_pullback_matrix(k, &a_inv, q)?));
        // Pairing against the real basis of H^{k-q,k-q}.
        let bq = covector::real_basis(k, q);
        let bc = covector::real_basis(k, k - q);
        let mut pq = DMatrix::zeros(bq.len(), bc.len());
        for (i, vi) in bq.iter().enumerate() {
            let ci = expand(k, q, vi);
            for (j, vj) in bc.iter().enumerate() {
                let cj = expand(k, k - q, vj);
                let w = covector::wedge_components(k, (q, q), &ci, (k - q, k - q), &cj);
                let val = torus.top_integral(&w);
                if val.im.abs() > 1e-9 {
                    return Err(Error::DegeneratePairing("pairing entry not real".into()));
                }
                pq[(i, j)] = val.re;
            }
        }
        if pq.clone().svd(false, false).singular_values.iter().any(|&s| s < 1e-9) {
            return Err(Error::DegeneratePairing("singular pairing matrix".into()));
        }
        pairing.push(RealMatrix::from_float(pq));
        let (oc, _) = covector::real_coordinates(k, q, &crate::torus::omega_power(k, q));
        omega_class.push(oc);
    }
    Ok(CohomologyModel {
        k,
        h,
        action,
        push_action,
        pairing,
        omega_class,
    })
}

fn expand(k: usize, p: usize, v: &covector::RealBasisVector) -> Vec<Complex64> {
    let mut comps = vec![Complex64::new(0.0, 0.0); covector::dim(k, p, p)];
    for &(idx, val) in &v.terms {
        comps[idx] += val;
    }
    comps
}

impl CohomologyModel {
    /// Build a model from user-supplied pullback matrices and pairings.
    /// The pushforward matrices are derived from the pairing adjoint.
    pub fn from_matrices(
        k: usize,
        action: Vec<RealMatrix>,
        pairing: Vec<RealMatrix>,
        omega_class: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if action.len() != k + 1 || pairing.len() != k + 1 || omega_class.len() != k + 1 {
            return Err(Error::Dimension("need k+1 graded pieces".into()));
        }
        let h: Vec<usize> = action.iter().map(|m| m.nrows()).collect();
        let mut push_action = Vec::with_capacity(k + 1);
        for q in 0..=k {
            // <f^* x, y> = <x, f_* y> forces f_* = P_q^{-1} M_{k-q}^T P_{k-q}... for
            // hand-supplied models we only have the adjoint route, so define
            // f_* on H^{q,q} through the pairing with H^{k-q,k-q}.
            let pk = pairing[k - q].to_float(); // pairs H^{k-q} x H^{q}
            let m = action[k - q].to_float();
            let pk_inv = pk
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::DegeneratePairing("singular pairing matrix".into()))?;
            // f_* y solves <f^* x, y> = <x, f_* y> for all x in H^{k-q,k-q}.
            let f_push = pk_inv * m.transpose() * pk;
            push_action.push(RealMatrix::from_float(f_push));
        }
        Ok(CohomologyModel {
            k,
            h,
            action,
            push_action,
            pairing,
            omega_class,
        })
    }

    pub fn check_invariants(&self) -> Result<()> {
        if self.h[0] != 1 || self.h[self.k] != 1 {
            return Err(Error::Dimension("h_0 and h_k must be 1".into()));
        }
        for q in 0..=self.k {
            let m = self.action[q].to_float();
            if !self.action[q].is_square() || m.nrows() != self.h[q] {
                return Err(Error::Dimension(format!("M_{q} has wrong size")));
            }
        }
        let top = self.action[self.k].to_float()[(0, 0)];
        let bot = self.action[0].to_float()[(0, 0)];
        if (top - 1.0).abs() > 1e-9 || (bot - 1.0).abs() > 1e-9 {
            return Err(Error::NotAutomorphism(
                "action on H^{0,0} and H^{k,k} must be trivial".into(),
            ));
        }
        Ok(())
    }
}

/// Eigenvalue moduli with a bounded Schur iteration. The unbounded variant
/// can stall on matrices with many eigenvalues of equal modulus (Kuenneth
/// products are full of those), so cap the iterations and retry with a tiny
/// deterministic diagonal perturbation when the cap is hit.
pub fn eigen_moduli(m: &DMatrix<f64>) -> Vec<f64> {
    let scale = m.iter().map(|v| v.abs()).fold(0.0_f64, f64::max).max(1.0);
    for attempt in 0..6 {
        let mut work = m.clone();
        if attempt > 0 {
            let eps = scale * 1e-12 * 10.0_f64.powi(attempt);
            for i in 0..work.nrows() {
                work[(i, i)] += eps * (i as f64 + 1.0) / work.nrows() as f64;
            }
        }
        if let Some(schur) = nalgebra::linalg::Schur::try_new(work, 1e-13, 100_000) {
            if let Some(eigs) = schur.eigenvalues() {
                return eigs.iter().map(|v| v.abs()).collect();
            }
            // Complex pairs: read 1x1 and 2x2 blocks off the quasi-triangular form.
            let t = schur.unpack().1;
            let n = t.nrows();
            let mut out = Vec::with_capacity(n);
            let mut i = 0;
            while i < n {
                if i + 1 < n && t[(i + 1, i)].abs() > 1e-12 * scale {
                    let a = t[(i, i)];
                    let b = t[(i, i + 1)];
                    let c = t[(i + 1, i)];
                    let d = t[(i + 1, i + 1)];
                    let tr = a + d;
                    let det = a * d - b * c;
                    let disc = tr * tr - 4.0 * det;
                    let modulus = if disc < 0.0 {
                        det.abs().sqrt()
                    } else {
                        let r = disc.sqrt();
                        ((tr + r) / 2.0).abs().max(((tr - r) / 2.0).abs())
                    };
                    out.push(modulus);
                    out.push(modulus);
                    i += 2;
                } else {
                    out.push(t[(i, i)].abs());
                    i += 1;
                }
            }
            return out;
        }
    }
    // Last resort: infinity-norm upper bound, reported as a single value.
    vec![(0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0_f64, f64::max)]
}

fn spectral_radius_and_count(m: &DMatrix<f64>, rel_tol: f64) -> (f64, usize) {
    let eigs = eigen_moduli(m);
    let radius = eigs.iter().cloned().fold(0.0_f64, f64::max);
    if radius == 0.0 {
        return (0.0, m.nrows());
    }
    let count = eigs.iter().filter(|&&v| v >= radius * (1.0 - rel_tol)).count();
    (radius, count)
}

/// Largest Jordan block size among eigenvalues of maximal modulus, estimated
/// from the polynomial factor in the growth of matrix powers.
pub fn dominant_block_size(m: &DMatrix<f64>, radius: f64, n_dominant: usize) -> usize {
    if n_dominant == 1 || radius == 0.0 {
        return 1;
    }
    // Fit log(||M^n|| / r^n) ~ (m-1) log n on a dyadic range of n.
    let mut pow = m.clone();
    let mut logscale = 0.0_f64;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for n in 1..=64usize {
        let norm = pow.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
        if n >= 16 {
            pts.push(((n as f64).ln(), logscale + norm.ln() - n as f64 * radius.ln()));
        }
        if n == 64 {
            break;
        }
        pow /= norm;
        logscale += norm.ln();
        pow = &pow * m;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope.round().max(0.0) as usize) + 1
}

pub fn dynamical_degrees(model: &CohomologyModel) -> Result<DegreeProfile> {
    model.check_invariants()?;
    let k = model.k;
    let mut degrees = Vec::with_capacity(k + 1);
    let mut multiplicity = Vec::with_capacity(k + 1);
    let mut limit_estimate = Vec::with_capacity(k + 1);
    let mut limit_gap = Vec::with_capacity(k + 1);
    for q in 0..=k {
        let m = model.action[q].to_float();
        let (radius, count) = spectral_radius_and_count(&m, 1e-8);
        degrees.push(radius);
        multiplicity.push(count);
        // Volume-growth estimate: <M^n [omega^q], P_q, [omega^{k-q}]>^{1/n}
        // computed in log scale to survive n = 60.
        let est = limit_formula_estimate(model, q, 60);
        limit_estimate.push(est);
        limit_gap.push((est - radius).abs());
    }
    let dmax = degrees.iter().cloned().fold(0.0_f64, f64::max);
    let on_plateau: Vec<usize> = (0..=k)
        .filter(|&q| degrees[q] >= dmax * (1.0 - 1e-8))
        .collect();
    let p = *on_plateau.first().unwrap();
    let p_prime = *on_plateau.last().unwrap();
    Ok(DegreeProfile {
        entropy: dmax.ln().max(0.0),
        degrees,
        p,
        p_prime,
        multiplicity,
        limit_estimate,
        limit_gap,
    })
}

/// Pairing <x, P_q, omega_{k-q}> of a coordinate vector on H^{q,q}.
pub fn pair_with_dual_omega(model: &CohomologyModel, q: usize, x: &DMatrix<f64>) -> f64 {
    let p = model.pairing[q].to_float();
    let oc = &model.omega_class[model.k - q];
    let mut acc = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            acc += x[(i, 0)] * p[(i, j)] * oc[j];
        }
    }
    acc
}

fn limit_formula_estimate(model: &CohomologyModel, q: usize, n: usize) -> f64 {
    let m = model.action[q].to_float();
    let mut v = DMatrix::from_fn(model.h[q], 1, |i, _| model.omega_class[q][i]);
    let mut logscale = 0.0_f64;
    for _ in 0..n {
        v = &m * v;
        let s = v.iter().map(|x| x.abs()).fold(0.0_f64, f64::max);
        if s == 0.0 {
            return 0.0;
        }
        v /= s;
        logscale += s.ln();
    }
    let paired = pair_with_dual_omega(model, q, &v);
    if paired <= 0.0 {
        return f64::NAN;
    }
    ((logscale + paired.ln()) / n as f64).exp()
}

pub fn check_log_concavity(profile: &DegreeProfile, tol: f64) -> Result<(usize, usize)> {
    let d = &profile.degrees;
    for q in 1..d.len() - 1 {
        let lhs = d[q] * d[q];
        let rhs = d[q - 1] * d[q + 1];
        if lhs < rhs * (1.0 - tol) {
            return Err(Error::ConcavityViolation { q, lhs, rhs });
        }
    }
    Ok((profile.p, profile.p_prime))
}

/// Residual of the duality statement: in the basis of H^{k-q,k-q} dual to
/// the chosen basis of H^{q,q} (via the cup-product pairing, row convention
/// for the pushforward), f_* is given by the same matrix as f^* on H^{q,q}.
/// The pushforward enters through the independently built inverse action.
pub fn duality_check(model: &CohomologyModel, q: usize) -> Result<f64> {
    let k = model.k;
    let mq = model.action[q].to_float();
    // f_* on H^{k-q,k-q} in the standard basis, column convention.
    let f_push = model.push_action[k - q].to_float();
    let pq = model.pairing[q].to_float();
    let pq_inv = pq.clone().try_inverse().ok_or_else(|| Error::DegeneratePairing("singular pairing matrix".into()))?;
    // Base change to the dual basis, then transpose to the row convention.
    let in_dual = &pq * f_push * pq_inv;
    let residual = (in_dual.transpose() - &mq).norm();
    let (r1, c1) = spectral_radius_and_count(&mq, 1e-8);
    let (r2, c2) = spectral_radius_and_count(&model.push_action[k - q].to_float(), 1e-8);
    // the radius comparison is a coarse sanity gate: on spectra with many
    // equal-modulus eigenvalues the Schur-based moduli carry ~1e-5 noise
    if (r1 - r2).abs() > 1e-4 * r1.max(1.0) {
        return Err(Error::ClassMismatch(format!(
            "duality spectra disagree: ({r1}, {c1}) vs ({r2}, {c2})"
        )));
    }
    Ok(residual)
}

pub fn mixing_criterion(model: &CohomologyModel, n_max: usize) -> Result<MixingReport> {
    let profile = dynamical_degrees(model)?;
    let p = profile.p;
    let hypotheses_met = profile.p == profile.p_prime;
    let mp = model.action[p].to_float();
    let (radius, count) = spectral_radius_and_count(&mp, 1e-8);
    let block = dominant_block_size(&mp, radius, count);
    let cond2 = block == 1;
    let push = model.push_action[model.k - p].to_float();
    let (r3, c3) = spectral_radius_and_count(&push, 1e-8);
    let cond3 = dominant_block_size(&push, r3, c3) == 1;
    // Double Cesaro mass of the wedge of forward and backward averages.
    // Each factor is normalized by n^{block-1} d_p^n; with block = 1 this is
    // exactly (1/N^2) sum d_p^{-n-l} <M_p^{n+l} [omega^p], [omega^{k-p}]>.
    let mut a = vec![0.0_f64; 2 * n_max + 1];
    {
        let m = model.action[p].to_float();
        let mut v = DMatrix::from_fn(model.h[p], 1, |i, _| model.omega_class[p][i]);
        let mut logscale = 0.0_f64;
        for s in 1..=2 * n_max {
            v = &m * v;
            let sc = v.iter().map(|x| x.abs()).fold(0.0_f64, f64::max);
            v /= sc;
            logscale += sc.ln();
            let paired = pair_with_dual_omega(model, p, &v);
            a[s] = paired * (logscale - s as f64 * radius.ln()).exp();
        }
    }
    let mut mass_series = Vec::with_capacity(n_max);
    for big_n in 1..=n_max {
        let mut acc = 0.0;
        for n in 1..=big_n {
            for l in 1..=big_n {
                let weight = ((n * l) as f64).powi(block as i32 - 1);
                acc += a[n + l] / weight;
            }
        }
        mass_series.push(acc / (big_n as f64).powi(2));
    }
    // One Richardson step against 1/N to estimate the floor.
    let fitted_floor = if n_max >= 2 {
        let half = mass_series[n_max / 2 - 1];
        let full = mass_series[n_max - 1];
        2.0 * full - half
    } else {
        mass_series[0]
    };
    Ok(MixingReport {
        hypotheses_met,
        p,
        cond2,
        cond3,
        block_size: block,
        mass_series,
        fitted_floor,
    })
}

pub fn mass_growth(
    model: &CohomologyModel,
    q: usize,
    class_s: &[f64],
    n_max: usize,
) -> Result<MassGrowth> {
    if class_s.len() != model.h[q] {
        return Err(Error::Dimension("class has wrong dimension".into()));
    }
    let m = model.action[q].to_float();
    let mut v = DMatrix::from_fn(model.h[q], 1, |i, _| class_s[i]);
    let mut sequence = Vec::with_capacity(n_max);
    let mut logs: Vec<(f64, f64)> = Vec::new();
    let mut logscale = 0.0_f64;
    for n in 1..=n_max {
        v = &m * v;
        let sc = v.iter().map(|x| x.abs()).fold(0.0_f64, f64::max);
        v /= sc;
        logscale += sc.ln();
        let paired = pair_with_dual_omega(model, q, &v);
        sequence.push(paired * logscale.exp());
        // Fit only the tail: early terms carry subleading eigenvalues and
        // would bias the exponent.
        if paired > 0.0 && 3 * n > n_max {
            logs.push((n as f64, logscale + paired.ln()));
        }
    }
    // Least-squares fit log a_n = log kappa + deg * log n + rate * n.
    let rows = logs.len();
    if rows < 3 {
        return Err(Error::InvalidParameter("too few positive mass terms".into()));
    }
    let design = DMatrix::from_fn(rows, 3, |i, j| match j {
        0 => 1.0,
        1 => logs[i].0.ln(),
        _ => logs[i].0,
    });
    let rhs = DMatrix::from_fn(rows, 1, |i, _| logs[i].1);
    let sol = (design.transpose() * &design)
        .try_inverse()
        .ok_or_else(|| Error::DegeneratePairing("singular pairing matrix".into()))?
        * design.transpose()
        * rhs;
    Ok(MassGrowth {
        sequence,
        kappa: sol[(0, 0)].exp(),
        poly_degree: sol[(1, 0)],
        growth_rate: sol[(2, 0)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::MapSpec;

    const PHI: f64 = 1.618033988749894848;

    fn worked_model() -> CohomologyModel {
        let t = Torus::gaussian(2).unwrap();
        let f = MapSpec::from_integer(&[vec![2, 1], vec![1, 1]]).build(&t).unwrap();
        build_torus_cohomology(&t, &f).unwrap()
    }

    #[test]
    fn identity_on_elliptic_curve() {
        let t = Torus::gaussian(1).unwrap();
        let f = MapSpec::from_integer(&[vec![1]]).build(&t).unwrap();
        let model = build_torus_cohomology(&t, &f).unwrap();
        assert_eq!(model.h, vec![1, 1]);
        let profile = dynamical_degrees(&model).unwrap();
        assert!(profile.degrees.iter().all(|&d| (d - 1.0).abs() < 1e-9));
        assert!(profile.entropy.abs() < 1e-12);
    }

    #[test]
    fn worked_example_spectrum_matches_kronecker_oracle() {
        let model = worked_model();
        assert_eq!(model.h[1], 4);
        // Oracle: eigenvalues of M_1 are the pairwise products lambda_i *
        // conj(lambda_j) over the spectrum of A, computed independently.
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        let ev = a.complex_eigenvalues();
        let mut oracle: Vec<f64> = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                oracle.push((ev[i] * ev[j].conj()).norm());
            }
        }
        oracle.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut got: Vec<f64> = model.action[1]
            .to_float()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .collect();
        got.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (o, g) in oracle.iter().zip(got.iter()) {
            assert!((o - g).abs() < 1e-8, "oracle {o} vs got {g}");
        }
        // The top product is phi^4 = (7 + 3 sqrt 5)/2.
        assert!((got[3] - (7.0 + 3.0 * 5.0_f64.sqrt()) / 2.0).abs() < 1e-8);
    }

    #[test]
    fn worked_example_degrees_and_entropy() {
        let model = worked_model();
        let profile = dynamical_degrees(&model).unwrap();
        assert!((profile.degrees[0] - 1.0).abs() < 1e-9);
        assert!((profile.degrees[2] - 1.0).abs() < 1e-9);
        assert!((profile.degrees[1] - 6.854101966).abs() < 1e-8);
        assert!((profile.entropy - 4.0 * PHI.ln()).abs() < 1e-9);
        assert_eq!((profile.p, profile.p_prime), (1, 1));
        // The volume-growth limit formula agrees at n = 60 for this model.
        assert!(profile.limit_gap[1] < 1e-6);
    }

    #[test]
    fn unitary_map_has_trivial_degrees() {
        let t = Torus::gaussian(2).unwrap();
        let spec = MapSpec {
            derivative: vec![
                vec![[0.0, 1.0], [0.0, 0.0]],
                vec![[0.0, 0.0], [0.0, 1.0]],
            ],
            translation: None,
        };
        let f = spec.build(&t).unwrap();
        let model = build_torus_cohomology(&t, &f).unwrap();
        let profile = dynamical_degrees(&model).unwrap();
        assert!(profile.degrees.iter().all(|&d| (d - 1.0).abs() < 1e-9));
    }

    #[test]
    fn log_concavity_accepts_and_rejects() {
        let model = worked_model();
        let profile = dynamical_degrees(&model).unwrap();
        assert_eq!(check_log_concavity(&profile, 1e-9).unwrap(), (1, 1));

        let flat = DegreeProfile {
            degrees: vec![1.0, 1.0, 1.0],
            p: 0,
            p_prime: 2,
            entropy: 0.0,
            multiplicity: vec![1, 1, 1],
            limit_estimate: vec![1.0; 3],
            limit_gap: vec![0.0; 3],
        };
        assert!(check_log_concavity(&flat, 1e-9).is_ok());

        let bad = DegreeProfile {
            degrees: vec![1.0, 2.0, 5.0, 1.0],
            p: 2,
            p_prime: 2,
            entropy: 5.0_f64.ln(),
            multiplicity: vec![1; 4],
            limit_estimate: vec![0.0; 4],
            limit_gap: vec![0.0; 4],
        };
        match check_log_concavity(&bad, 1e-9) {
            Err(Error::ConcavityViolation { q, .. }) => assert_eq!(q, 1),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn duality_residual_small() {
        let model = worked_model();
        for q in 0..=2 {
            let r = duality_check(&model, q).unwrap();
            assert!(r < 1e-9, "duality residual {r} at q={q}");
        }
    }

    #[test]
    fn forward_and_inverse_actions_are_mutually_inverse() {
        let t = Torus::gaussian(2).unwrap();
        let f = MapSpec::from_integer(&[vec![2, 1], vec![1, 1]]).build(&t).unwrap();
        let g = f.inverse(&t).unwrap();
        let mf = build_torus_cohomology(&t, &f).unwrap();
        let mg = build_torus_cohomology(&t, &g).unwrap();
        for q in 0..=2 {
            let prod = mf.action[q].to_float() * mg.action[q].to_float();
            let id = DMatrix::identity(mf.h[q], mf.h[q]);
            assert!((prod - id).norm() < 1e-9);
        }
        // d_q(f) = d_{k-q}(f^{-1})
        let pf = dynamical_degrees(&mf).unwrap();
        let pg = dynamical_degrees(&mg).unwrap();
        for q in 0..=2 {
            assert!((pf.degrees[q] - pg.degrees[2 - q]).abs() < 1e-8);
        }
    }

    #[test]
    fn kunneth_product_top_degree() {
        // f x f^{-1} on the product torus: the middle degree is d_1(f)^2.
        let t = Torus::gaussian(4).unwrap();
        let spec = MapSpec::from_integer(&[
            vec![2, 1, 0, 0],
            vec![1, 1, 0, 0],
            vec![0, 0, 1, -1],
            vec![0, 0, -1, 2],
        ]);
        let f = spec.build(&t).unwrap();
        let model = build_torus_cohomology(&t, &f).unwrap();
        let profile = dynamical_degrees(&model).unwrap();
        let d1 = (7.0 + 3.0 * 5.0_f64.sqrt()) / 2.0;
        assert!(
            (profile.degrees[2] - d1 * d1).abs() < 1e-6 * d1 * d1,
            "d_2 = {} vs {}",
            profile.degrees[2],
            d1 * d1
        );
        assert!((profile.degrees[2] - 46.9787).abs() < 1e-3);
        // Oracle: spectral radius of the Kronecker product of M_1(f) and
        // M_1(f^{-1}) on the k=2 factors.
        let t2 = Torus::gaussian(2).unwrap();
        let ff = MapSpec::from_integer(&[vec![2, 1], vec![1, 1]]).build(&t2).unwrap();
        let gg = ff.inverse(&t2).unwrap();
        let m1f = build_torus_cohomology(&t2, &ff).unwrap().action[1].to_float();
        let m1g = build_torus_cohomology(&t2, &gg).unwrap().action[1].to_float();
        let kron = m1f.kronecker(&m1g);
        let r = eigen_moduli(&kron).into_iter().fold(0.0_f64, f64::max);
        assert!((profile.degrees[2] - r).abs() < 1e-6 * r);
    }

    #[test]
    fn mixing_report_on_worked_example() {
        let model = worked_model();
        let report = mixing_criterion(&model, 50).unwrap();
        assert!(report.hypotheses_met);
        assert!(report.cond2 && report.cond3);
        assert_eq!(report.block_size, 1);
        assert!(report.mass_series.iter().all(|&v| v >= 0.1));
        assert!(report.fitted_floor > 0.0);
    }

    #[test]
    fn mixing_identity_model_trivially_holds() {
        let t = Torus::gaussian(1).unwrap();
        let f = MapSpec::from_integer(&[vec![1]]).build(&t).unwrap();
        let model = build_torus_cohomology(&t, &f).unwrap();
        let report = mixing_criterion(&model, 20).unwrap();
        assert!(report.cond2);
        assert_eq!(report.block_size, 1);
    }

    fn jordan_toy_model() -> CohomologyModel {
        // Hand-built: H^{1,1} carries a single 2-block J_{2,2}.
        let one = RealMatrix::from_rows(&[vec![1.0]]);
        CohomologyModel::from_matrices(
            2,
            vec![
                one.clone(),
                RealMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 2.0]]),
                one.clone(),
            ],
            vec![
                RealMatrix::from_rows(&[vec![1.0]]),
                RealMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
                RealMatrix::from_rows(&[vec![1.0]]),
            ],
            vec![vec![1.0], vec![1.0, 1.0], vec![1.0]],
        )
        .unwrap()
    }

    #[test]
    fn mixing_jordan_block_fails_and_mass_decays() {
        let model = jordan_toy_model();
        let report = mixing_criterion(&model, 60).unwrap();
        assert!(!report.cond2);
        assert_eq!(report.block_size, 2);
        // mass_series(N) decays roughly like 1/N (up to a log factor):
        // doubling N should clearly shrink it.
        let v30 = report.mass_series[29];
        let v60 = report.mass_series[59];
        assert!(v60 < v30 * 0.7, "no decay: {v30} -> {v60}");
        // Closed-form oracle for the 2-block with these classes:
        // a_s = d^{-s} <M^s (e1+e2), P, e1+e2> = 2 + s/2, and the weighted
        // double sum is sum a_{n+l}/(n l) / N^2.
        let n = 60usize;
        let mut acc = 0.0;
        for i in 1..=n {
            for l in 1..=n {
                let s = (i + l) as f64;
                acc += (2.0 + s / 2.0) / ((i * l) as f64);
            }
        }
        let oracle = acc / (n as f64).powi(2);
        assert!((v60 - oracle).abs() < 1e-9 * oracle.max(1.0));
    }

    #[test]
    fn mass_growth_fits() {
        let model = worked_model();
        let fit = mass_growth(&model, 1, &model.omega_class[1].clone(), 20).unwrap();
        assert!((fit.growth_rate - 4.0 * PHI.ln()).abs() < 1e-3);
        assert!(fit.poly_degree.abs() < 0.2);

        // Identity: constant sequence.
        let t = Torus::gaussian(1).unwrap();
        let f = MapSpec::from_integer(&[vec![1]]).build(&t).unwrap();
        let idm = build_torus_cohomology(&t, &f).unwrap();
        let fit = mass_growth(&idm, 1, &idm.omega_class[1].clone(), 10).unwrap();
        assert!(fit.growth_rate.abs() < 1e-9);
        let first = fit.sequence[0];
        assert!(fit.sequence.iter().all(|&v| (v - first).abs() < 1e-12));

        // Jordan toy: polynomial degree near 1.
        let jm = jordan_toy_model();
        let fit = mass_growth(&jm, 1, &[0.0, 1.0], 30).unwrap();
        assert!((fit.growth_rate - 2.0_f64.ln()).abs() < 1e-2);
        assert!((fit.poly_degree - 1.0).abs() < 0.2, "degree {}", fit.poly_degree);
    }
}
