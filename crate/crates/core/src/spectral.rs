//! Spectral profiles of iterated linear actions: dominant eigenstructure,
//! normalized iterates, Cesaro averaging and the limit projector onto the
//! strictly dominant subspace.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{rational_to_f64, RealMatrix};

/// Classification of the closed subgroup generated by the dominant direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaGroup {
    /// All angles rational multiples of 2*pi: cyclic group of this order.
    Finite { order: u64 },
    /// At least one angle looks irrational up to the denominator bound.
    TorusRank { rank: usize, denom_bound: u64 },
    /// A rational fit sits inside float noise; we refuse to classify.
    Undetermined { denom_bound: u64 },
}

fn serialize_complex<S: serde::Serializer>(
    c: &Complex64,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    (c.re, c.im).serialize(s)
}

fn deserialize_complex<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Complex64, D::Error> {
    let (re, im) = <(f64, f64)>::deserialize(d)?;
    Ok(Complex64::new(re, im))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Eigenvalue {
    #[serde(
        serialize_with = "serialize_complex",
        deserialize_with = "deserialize_complex"
    )]
    pub value: Complex64,
    pub algebraic_multiplicity: usize,
    /// Multiset of Jordan block sizes, descending.
    pub jordan_sizes: Vec<usize>,
}

/// Complete spectral data of a real linear automorphism.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralProfile {
    pub eigenvalues: Vec<Eigenvalue>,
    /// Indices into `eigenvalues`, grouped by equal modulus up to tolerance.
    pub modulus_clusters: Vec<Vec<usize>>,
    pub spectral_radius: f64,
    /// Size of the largest Jordan block among eigenvalues of maximal modulus.
    pub multiplicity_m: usize,
    /// Eigenvalues with (modulus, max block size) = (spectral_radius, m).
    pub dominant_indices: Vec<usize>,
    /// Real basis (columns) of the dominant eigenspace F.
    pub f_basis: RealMatrix,
    /// Real basis (columns) of the strictly dominant eigenspace H.
    pub h_basis: RealMatrix,
    /// Arguments of the dominant eigenvalues, descending.
    pub theta: Vec<f64>,
    pub theta_group: ThetaGroup,
    /// Set when two modulus clusters are within 2*tol of the merge boundary.
    pub near_tie_warning: bool,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectorResult {
    pub projector: RealMatrix,
    pub n_used: usize,
    /// Operator-norm distance between the last two accelerated Cesaro operators.
    pub residual: f64,
    pub converged: bool,
}

const DEFAULT_DENOM_BOUND: u64 = 64;

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

fn complex_inf_norm(m: &DMatrix<Complex64>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0_f64, f64::max)
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0_f64, f64::max)
}

/// Numerical rank with singular values below `thresh` treated as zero.
fn numerical_rank(m: &DMatrix<Complex64>, thresh: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let svd = m.clone().svd(false, false);
    svd.singular_values.iter().filter(|&&s| s > thresh).count()
}

/// Orthonormal basis of the null space of `m` (columns).
fn null_space(m: &DMatrix<Complex64>, thresh: f64) -> DMatrix<Complex64> {
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut cols = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= thresh {
            cols.push(vt.row(i).conjugate().transpose());
        }
    }
    // Rows of V^T beyond the singular value count also span the kernel.
    for i in svd.singular_values.len()..vt.nrows() {
        cols.push(vt.row(i).conjugate().transpose());
    }
    let n = m.ncols();
    let mut out = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    out
}

/// Orthonormal basis of the column space of `m` (columns).
fn column_space(m: &DMatrix<Complex64>, thresh: f64) -> DMatrix<Complex64> {
    if m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let rank = svd.singular_values.iter().filter(|&&s| s > thresh).count();
    u.columns(0, rank).into_owned()
}

fn eigenvalues_raw(l: &RealMatrix) -> Vec<Complex64> {
    match l {
        RealMatrix::Exact { .. } => {
            // Exact characteristic polynomial, roots from its companion matrix,
            // polished by a few Newton steps.
            let coeffs: Vec<f64> = l
                .char_poly_exact()
                .expect("square exact matrix")
                .iter()
                .map(rational_to_f64)
                .collect();
            let n = coeffs.len() - 1;
            if n == 0 {
                return vec![];
            }
            let mut comp = DMatrix::<f64>::zeros(n, n);
            for i in 1..n {
                comp[(i, i - 1)] = 1.0;
            }
            for i in 0..n {
                comp[(i, n - 1)] = -coeffs[n - i];
            }
            // Companion of p(x) = x^n + c1 x^(n-1) + ... + cn in the basis
            // 1, x, ..., x^(n-1): last column is -(cn, ..., c1).
            for i in 0..n {
                comp[(i, n - 1)] = -coeffs[n - i];
            }
            let mut roots: Vec<Complex64> =
                comp.complex_eigenvalues().iter().copied().collect();
            for r in roots.iter_mut() {
                *r = polish_root(&coeffs, *r);
            }
            roots
        }
        RealMatrix::Float(m) => m.complex_eigenvalues().iter().copied().collect(),
    }
}

fn polish_root(coeffs: &[f64], mut x: Complex64) -> Complex64 {
    for _ in 0..4 {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in coeffs {
            dp = dp * x + p;
            p = p * x + Complex64::new(c, 0.0);
        }
        if dp.norm() < 1e-8 * p.norm().max(1e-300) {
            break; // near-multiple root; Newton would not help
        }
        let step = p / dp;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        x -= step;
        if step.norm() < 1e-15 * x.norm().max(1.0) {
            break;
        }
    }
    x
}

/// Group nearly equal complex numbers; returns (value, multiplicity) pairs.
fn cluster_values(mut vals: Vec<Complex64>, tol_abs: f64) -> Vec<(Complex64, usize)> {
    vals.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    'outer: for v in vals {
        for (c, count) in clusters.iter_mut() {
            if (*c - v).norm() <= tol_abs {
                // Running mean keeps the representative centered.
                *c = (*c * (*count as f64) + v) / (*count as f64 + 1.0);
                *count += 1;
                continue 'outer;
            }
        }
        clusters.push((v, 1));
    }
    clusters
}

/// Compute the full spectral profile of a square invertible real matrix.
pub fn compute_spectral_profile(l: &RealMatrix, tol: f64) -> Result<SpectralProfile> {
    if !l.is_square() {
        return Err(Error::Dimension("spectral profile of non-square matrix".into()));
    }
    let n = l.nrows();
    if l.is_exact() {
        if l.det_exact()?.numer() == &num::BigInt::from(0) {
            return Err(Error::NotAutomorphism("singular matrix".into()));
        }
    } else if l.det().abs() < 1e-300 {
        return Err(Error::NotAutomorphism("singular matrix".into()));
    }

    let lf = l.to_float();
    let scale = lf.iter().map(|v| v.abs()).fold(0.0_f64, f64::max).max(1.0);
    let raw = eigenvalues_raw(l);
    let eig_scale = raw.iter().map(|v| v.norm()).fold(0.0_f64, f64::max).max(1e-300);
    let clustered = cluster_values(raw, tol.max(1e-14) * eig_scale * 10.0);

    // Jordan sizes from numerical rank sequences of (L - lambda I)^j.
    let lc = to_complex(&lf);
    let mut eigenvalues = Vec::new();
    for (val, mult) in &clustered {
        let mut shifted = lc.clone();
        for i in 0..n {
            shifted[(i, i)] -= val;
        }
        let thresh = tol.max(1e-13) * complex_inf_norm(&lc).max(1.0);
        let mut ranks = vec![n]; // rank of (L - lambda)^0
        let mut pw = DMatrix::<Complex64>::identity(n, n);
        for _ in 1..=*mult {
            pw = &pw * &shifted;
            ranks.push(numerical_rank(&pw, thresh));
        }
        // blocks of size >= j: rank_(j-1) - rank_j
        let mut sizes = Vec::new();
        for j in 1..=*mult {
            let ge_j = ranks[j - 1].saturating_sub(ranks[j]);
            let ge_j1 = if j < *mult {
                ranks[j].saturating_sub(ranks[j + 1])
            } else {
                0
            };
            let exactly_j = ge_j.saturating_sub(ge_j1);
            for _ in 0..exactly_j {
                sizes.push(j);
            }
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        if sizes.is_empty() {
            sizes.push(*mult); // degenerate numerics; fall back to one block
        }
        eigenvalues.push(Eigenvalue {
            value: *val,
            algebraic_multiplicity: *mult,
            jordan_sizes: sizes,
        });
    }

    // Modulus clusters with relative tolerance.
    let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eigenvalues[b]
            .value
            .norm()
            .partial_cmp(&eigenvalues[a].value.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut modulus_clusters: Vec<Vec<usize>> = Vec::new();
    let mut near_tie_warning = false;
    for &idx in &order {
        let m = eigenvalues[idx].value.norm();
        match modulus_clusters.last_mut() {
            Some(cluster) => {
                let rep = eigenvalues[cluster[0]].value.norm();
                let gap = (rep - m).abs() / rep.max(1e-300);
                if gap <= tol {
                    cluster.push(idx);
                } else {
                    if gap <= 2.0 * tol {
                        near_tie_warning = true;
                    }
                    modulus_clusters.push(vec![idx]);
                }
            }
            None => modulus_clusters.push(vec![idx]),
        }
    }

    let spectral_radius = eigenvalues
        .iter()
        .map(|e| e.value.norm())
        .fold(0.0_f64, f64::max);
    let dominant_cluster = &modulus_clusters[0];
    let multiplicity_m = dominant_cluster
        .iter()
        .map(|&i| eigenvalues[i].jordan_sizes[0])
        .max()
        .unwrap_or(1);
    // Dominant: maximal modulus and maximal block size among those.
    let mut dominant_indices: Vec<usize> = dominant_cluster
        .iter()
        .copied()
        .filter(|&i| eigenvalues[i].jordan_sizes[0] == multiplicity_m)
        .collect();
    dominant_indices.sort_by(|&a, &b| {
        eigenvalues[b]
            .value
            .arg()
            .partial_cmp(&eigenvalues[a].value.arg())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let svd_thresh = tol.max(1e-12) * scale.max(1.0) * (n as f64);
    let mut f_cols: Vec<DMatrix<Complex64>> = Vec::new();
    let mut h_cols: Vec<DMatrix<Complex64>> = Vec::new();
    for &di in &dominant_indices {
        let ev = &eigenvalues[di];
        let mut shifted = lc.clone();
        for i in 0..n {
            shifted[(i, i)] -= ev.value;
        }
        // Eigenlines of the maximal blocks: image of N^(m-1) on ker(N^m).
        let mut nm = DMatrix::<Complex64>::identity(n, n);
        for _ in 0..multiplicity_m {
            nm = &nm * &shifted;
        }
        let ker = null_space(&nm, svd_thresh);
        let mut nm1 = DMatrix::<Complex64>::identity(n, n);
        for _ in 0..multiplicity_m - 1 {
            nm1 = &nm1 * &shifted;
        }
        let image = column_space(&(&nm1 * &ker), svd_thresh);
        // Count only the expected number of top blocks.
        let expected = ev
            .jordan_sizes
            .iter()
            .filter(|&&s| s == multiplicity_m)
            .count();
        let take = image.ncols().min(expected.max(1));
        let img = image.columns(0, take).into_owned();
        f_cols.push(img.clone());
        let is_real_positive = ev.value.im.abs() <= tol * spectral_radius.max(1.0)
            && ev.value.re > 0.0;
        if is_real_positive {
            h_cols.push(img);
        }
    }
    let realify = |mats: &[DMatrix<Complex64>]| -> RealMatrix {
        let mut cols: Vec<DMatrix<f64>> = Vec::new();
        for m in mats {
            for j in 0..m.ncols() {
                cols.push(DMatrix::from_fn(n, 1, |i, _| m[(i, j)].re));
                cols.push(DMatrix::from_fn(n, 1, |i, _| m[(i, j)].im));
            }
        }
        if cols.is_empty() {
            return RealMatrix::from_float(DMatrix::zeros(n, 0));
        }
        let mut stacked = DMatrix::<f64>::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            stacked.set_column(j, &c.column(0));
        }
        let basis = column_space(&to_complex(&stacked), 1e-9);
        RealMatrix::from_float(DMatrix::from_fn(basis.nrows(), basis.ncols(), |i, j| {
            basis[(i, j)].re
        }))
    };
    let f_basis = realify(&f_cols);
    let h_basis = realify(&h_cols);

    let theta: Vec<f64> = dominant_indices
        .iter()
        .map(|&i| eigenvalues[i].value.arg())
        .collect();
    let theta_group = classify_theta(&theta, DEFAULT_DENOM_BOUND);

    Ok(SpectralProfile {
        eigenvalues,
        modulus_clusters,
        spectral_radius,
        multiplicity_m,
        dominant_indices,
        f_basis,
        h_basis,
        theta,
        theta_group,
        near_tie_warning,
        tol,
    })
}

/// Best rational approximation p/q of `x` with q <= bound, via continued fractions.
fn continued_fraction(x: f64, bound: u64) -> (i64, u64, f64) {
    let mut p0: i64 = 1;
    let mut q0: u64 = 0;
    let mut p1: i64 = x.floor() as i64;
    let mut q1: u64 = 1;
    let mut frac = x - x.floor();
    for _ in 0..64 {
        if frac.abs() < 1e-15 {
            break;
        }
        let a = (1.0 / frac).floor();
        let ai = a as i64;
        let p2 = ai
            .checked_mul(p1)
            .and_then(|v| v.checked_add(p0))
            .unwrap_or(i64::MAX);
        let q2 = (a as u64)
            .checked_mul(q1)
            .and_then(|v| v.checked_add(q0))
            .unwrap_or(u64::MAX);
        if q2 > bound {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        frac = 1.0 / frac - a;
    }
    (p1, q1, (x - p1 as f64 / q1 as f64).abs())
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Classify the closure of the group generated by the dominant direction.
pub fn classify_theta(theta: &[f64], denom_bound: u64) -> ThetaGroup {
    use std::f64::consts::PI;
    let mut denominators = Vec::new();
    let mut irrational = 0usize;
    let mut ambiguous = false;
    for &t in theta {
        let x = (t / (2.0 * PI)).rem_euclid(1.0);
        let (_, q, err) = continued_fraction(x, denom_bound);
        // Accept a rational fit only when the error is at float-noise scale;
        // fits in the gray zone are flagged rather than classified.
        let noise = 1e-9;
        if err < noise {
            denominators.push(q.max(1));
        } else if err < 100.0 * noise {
            ambiguous = true;
        } else {
            irrational += 1;
        }
    }
    if ambiguous {
        return ThetaGroup::Undetermined { denom_bound };
    }
    if irrational == 0 {
        let order = denominators.iter().fold(1u64, |acc, &q| lcm(acc, q));
        ThetaGroup::Finite { order }
    } else {
        ThetaGroup::TorusRank {
            rank: irrational.min(theta.len()),
            denom_bound,
        }
    }
}

/// Re-classify the dominant direction with a caller-chosen denominator bound.
pub fn dominant_direction_group(profile: &SpectralProfile, denom_bound: u64) -> ThetaGroup {
    classify_theta(&profile.theta, denom_bound)
}

/// Returns `n^(1-m) lambda^(-n) L^n`, carried in scaled form to avoid overflow.
pub fn normalized_iterate(l: &RealMatrix, profile: &SpectralProfile, n: usize) -> RealMatrix {
    assert!(n >= 1, "iterate count must be >= 1");
    let lam = profile.spectral_radius;
    let m = profile.multiplicity_m;
    let lf = l.to_float();
    let dim = lf.nrows();
    let step = lf.map(|v| v / lam);
    let mut acc = DMatrix::<f64>::identity(dim, dim);
    let mut log_scale = 0.0_f64;
    for _ in 0..n {
        acc = &acc * &step;
        let nrm = inf_norm(&acc);
        if nrm > 1e100 || (nrm < 1e-100 && nrm > 0.0) {
            acc /= nrm;
            log_scale += nrm.ln();
        }
    }
    let total = log_scale + (1.0 - m as f64) * (n as f64).ln();
    RealMatrix::from_float(acc.map(|v| v * total.exp()))
}

/// The Cesaro operator: `(1/N) sum_{n=1}^{N} L^n / (n^(m-1) lambda^n)`.
pub fn cesaro_operator(l: &RealMatrix, profile: &SpectralProfile, big_n: usize) -> RealMatrix {
    assert!(big_n >= 1);
    let lam = profile.spectral_radius;
    let m = profile.multiplicity_m;
    let lf = l.to_float();
    let dim = lf.nrows();
    let step = lf.map(|v| v / lam);
    let mut pw = DMatrix::<f64>::identity(dim, dim);
    let mut sum = DMatrix::<f64>::zeros(dim, dim);
    for n in 1..=big_n {
        pw = &pw * &step;
        let w = (n as f64).powi(m as i32 - 1);
        sum += pw.map(|v| v / w);
    }
    RealMatrix::from_float(sum / big_n as f64)
}

/// Iterate Cesaro operators toward the limit projector onto H.
///
/// The raw Cesaro sequence has a 1/N error term, so we evaluate it on a
/// doubling schedule aligned with the period of the dominant direction and
/// apply one Richardson extrapolation level; the residual reported is the
/// distance between consecutive extrapolated operators.
pub fn limit_projector(
    l: &RealMatrix,
    profile: &SpectralProfile,
    tol: f64,
    n_max: usize,
) -> Result<ProjectorResult> {
    if n_max < 2 {
        return Err(Error::InvalidParameter("N_max must be >= 2".into()));
    }
    let lam = profile.spectral_radius;
    let m = profile.multiplicity_m;
    let lf = l.to_float();
    let dim = lf.nrows();
    let step = lf.map(|v| v / lam);
    let period = match profile.theta_group {
        ThetaGroup::Finite { order } => order.max(1) as usize,
        _ => 1,
    };
    let mut n0 = period;
    while n0 < 4 {
        n0 *= 2;
    }

    let mut pw = DMatrix::<f64>::identity(dim, dim);
    let mut sum = DMatrix::<f64>::zeros(dim, dim);
    let mut n_done = 0usize;
    let mut cesaro_at = Vec::new(); // (N, L_hat_N)
    let mut schedule_n = n0;
    let mut prev_accel: Option<DMatrix<f64>> = None;
    let mut best = DMatrix::<f64>::zeros(dim, dim);
    let mut residual = f64::INFINITY;
    let mut converged = false;
    while schedule_n <= n_max {
        while n_done < schedule_n {
            n_done += 1;
            pw = &pw * &step;
            let w = (n_done as f64).powi(m as i32 - 1);
            sum += pw.map(|v| v / w);
        }
        let cesaro = sum.map(|v| v / n_done as f64);
        cesaro_at.push((n_done, cesaro.clone()));
        if cesaro_at.len() >= 2 {
            let (_, ref prev) = cesaro_at[cesaro_at.len() - 2];
            let accel = cesaro.map(|v| 2.0 * v) - prev;
            if let Some(ref pa) = prev_accel {
                let diff = inf_norm(&(&accel - pa));
                residual = diff;
                best = accel.clone();
                if diff < tol {
                    converged = true;
                    break;
                }
            } else {
                best = accel.clone();
            }
            prev_accel = Some(accel);
        }
        schedule_n *= 2;
    }

    // Structural checks: image inside H, P L = lambda P, rank = dim H.
    let h = profile.h_basis.to_float();
    let h_dim = h.ncols();
    if h_dim > 0 {
        let hc = to_complex(&h);
        let proj_cols = to_complex(&best);
        // Distance of each column of P from span(H): via orthogonal projection.
        let ortho = &hc * hc.adjoint();
        let outside = &proj_cols - &(&ortho * &proj_cols);
        let img_residual = complex_inf_norm(&outside);
        if converged && img_residual > 100.0 * tol.max(1e-9) * inf_norm(&best).max(1.0) {
            return Err(Error::Hypothesis(format!(
                "projector image escapes H by {img_residual}"
            )));
        }
    }
    let commut = inf_norm(&(&best * &lf - best.map(|v| v * lam)));
    if converged && commut > 10.0 * tol.max(1e-12) * inf_norm(&lf).max(1.0) {
        return Err(Error::Hypothesis(format!(
            "projector does not intertwine L: residual {commut}"
        )));
    }
    let rank = numerical_rank(&to_complex(&best), 1e-7 * inf_norm(&best).max(1.0));
    if converged && rank != h_dim {
        return Err(Error::Hypothesis(format!(
            "projector rank {rank} does not match dim H = {h_dim}"
        )));
    }

    Ok(ProjectorResult {
        projector: RealMatrix::from_float(best),
        n_used: n_done,
        residual,
        converged,
    })
}
