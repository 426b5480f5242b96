//! Super-potentials of closed (p,p)-forms on a torus.
//!
//! The potential of an exact form is found mode-by-mode: on each nonzero
//! Fourier mode dd^c acts as a constant linear map on covector components,
//! inverted by a minimal-norm least-squares solve. Normalization pins the
//! constant part so the potential pairs to zero against a fixed basis of
//! classes; super-potential values, the iteration recursion and the Green
//! series are all built on that solver.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::covector;
use crate::error::{Error, Result};
use crate::forms::{coef_norm, mode_covectors, FourierForm};
use crate::torus::{Torus, TorusMap};

/// Basis of the classes in H^{q,q} used to normalize potentials, with the
/// dual constant forms of complementary degree.
#[derive(Debug, Clone)]
pub struct NormalizationBasis {
    pub k: usize,
    pub q: usize,
    /// Constant real closed (q,q)-forms with independent classes.
    pub alpha: Vec<FourierForm>,
    /// Constant (k-q,k-q)-forms with <alpha_dual_i, alpha_j> = delta_ij.
    pub alpha_dual: Vec<FourierForm>,
}

impl NormalizationBasis {
    /// The standard choice: the fixed real covector basis of (q,q), with
    /// duals obtained by inverting the integration pairing.
    pub fn standard(torus: &Torus, q: usize) -> Result<Self> {
        let k = torus.k;
        let bq = covector::real_basis(k, q);
        let bc = covector::real_basis(k, k - q);
        let h = bq.len();
        let alpha: Vec<FourierForm> = bq
            .iter()
            .map(|v| {
                let mut comps = vec![Complex64::new(0.0, 0.0); covector::dim(k, q, q)];
                for &(idx, val) in &v.terms {
                    comps[idx] += val;
                }
                FourierForm::constant(k, (q, q), comps).unwrap()
            })
            .collect();
        // pairing[i][l] = <alpha_i, e_l^{(k-q)}>
        let mut pq = DMatrix::zeros(h, h);
        let consts: Vec<FourierForm> = bc
            .iter()
            .map(|v| {
                let mut comps = vec![Complex64::new(0.0, 0.0); covector::dim(k, k - q, k - q)];
                for &(idx, val) in &v.terms {
                    comps[idx] += val;
                }
                FourierForm::constant(k, (k - q, k - q), comps).unwrap()
            })
            .collect();
        for i in 0..h {
            for l in 0..h {
                pq[(i, l)] = alpha[i].pairing(&consts[l], torus)?.re;
            }
        }
        let c = pq
            .try_inverse()
            .ok_or_else(|| Error::DegeneratePairing("normalization pairing singular".into()))?;
        let alpha_dual: Vec<FourierForm> = (0..h)
            .map(|j| {
                let mut acc = FourierForm::zero(k, (k - q, k - q));
                for l in 0..h {
                    acc = acc
                        .add(&consts[l].scale(Complex64::new(c[(l, j)], 0.0)))
                        .unwrap();
                }
                acc
            })
            .collect();
        Ok(NormalizationBasis {
            k,
            q,
            alpha,
            alpha_dual,
        })
    }

    pub fn h(&self) -> usize {
        self.alpha.len()
    }

    /// Max |<alpha_dual_i, alpha_j> - delta_ij|.
    pub fn duality_residual(&self, torus: &Torus) -> f64 {
        let mut res = 0.0_f64;
        for (i, d) in self.alpha_dual.iter().enumerate() {
            for (j, a) in self.alpha.iter().enumerate() {
                let v = a.pairing(d, torus).unwrap().re;
                let target = if i == j { 1.0 } else { 0.0 };
                res = res.max((v - target).abs());
            }
        }
        res
    }

    /// Class coordinates of a closed (q,q)-form in the alpha basis.
    pub fn class_coordinates(&self, f: &FourierForm, torus: &Torus) -> Result<Vec<f64>> {
        let (_, coords) = f.harmonic_part(torus, 1e-8 * f.sup_coefficient().max(1.0))?;
        // The alpha basis IS the real covector basis, so harmonic coordinates
        // are already the class coordinates.
        Ok(coords)
    }
}

/// Solve dd^c U = R with U alpha-normalized: <U, alpha_i> = 0 for all i.
/// R must have bidegree (r,r) with r >= 1 and zero class; `basis` carries the
/// classes of degree (k-r+1, k-r+1) against which U (degree (r-1,r-1)) pairs.
pub fn solve_ddc(r: &FourierForm, basis: &NormalizationBasis, torus: &Torus) -> Result<FourierForm> {
    let k = r.k;
    let (p, q) = r.bidegree;
    if p != q || p == 0 {
        return Err(Error::InvalidParameter(
            "solve_ddc needs bidegree (r,r), r >= 1".into(),
        ));
    }
    if basis.q != k - p + 1 {
        return Err(Error::Dimension(
            "normalization basis has the wrong degree".into(),
        ));
    }
    let scale = r.sup_coefficient().max(1e-300);
    // class must vanish
    let zero_mode = vec![0i64; 2 * k];
    if let Some(c0) = r.coefficients.get(&zero_mode) {
        let n = coef_norm(c0);
        if n > 1e-10 * scale {
            return Err(Error::NonzeroClass(n));
        }
    }
    let dim_lo = covector::dim(k, p - 1, p - 1);
    let dim_hi = covector::dim(k, p, p);
    let i_over_pi = Complex64::new(0.0, 1.0 / std::f64::consts::PI);
    let mut u = FourierForm::zero(k, (p - 1, p - 1));
    u.real_flag = r.real_flag;
    u.dropped_mass = r.dropped_mass;
    for (m, c) in &r.coefficients {
        if m.iter().all(|&v| v == 0) {
            continue;
        }
        // T_m: components of (i/pi) alpha_m wedge beta_m wedge (.)
        let (alpha, beta) = mode_covectors(torus, m);
        let mut t = DMatrix::<Complex64>::zeros(dim_hi, dim_lo);
        for j in 0..dim_lo {
            let mut unit = vec![Complex64::new(0.0, 0.0); dim_lo];
            unit[j] = Complex64::new(1.0, 0.0);
            let bc = covector::wedge_components(k, (0, 1), &beta, (p - 1, p - 1), &unit);
            let abc = covector::wedge_components(k, (1, 0), &alpha, (p - 1, p), &bc);
            for i in 0..dim_hi {
                t[(i, j)] = abc[i] * i_over_pi;
            }
        }
        let rhs = DMatrix::from_fn(dim_hi, 1, |i, _| c[i]);
        let svd = t.clone().svd(true, true);
        let sol = svd
            .solve(&rhs, 1e-12 * scale)
            .map_err(|e| Error::InvalidParameter(format!("svd solve failed: {e}")))?;
        let residual = (&t * &sol - &rhs).norm();
        if residual > 1e-10 * scale {
            return Err(Error::NotDdcExact {
                mode: m.clone(),
                residual,
            });
        }
        u.set_mode(m.clone(), sol.iter().cloned().collect());
    }
    u.clean();
    // alpha-normalize the constant part.
    let mut correction = FourierForm::zero(k, (p - 1, p - 1));
    for (i, a) in basis.alpha.iter().enumerate() {
        let ci = u.pairing(a, torus)?.re;
        if ci != 0.0 {
            correction = correction
                .add(&basis.alpha_dual[i].scale(Complex64::new(-ci, 0.0)))?;
        }
    }
    let u = u.add(&correction)?;
    Ok(u)
}

/// U_S(R) = <S, U_R> with U_R alpha-normalized.
pub fn superpotential_value(
    s: &FourierForm,
    r: &FourierForm,
    basis: &NormalizationBasis,
    torus: &Torus,
) -> Result<f64> {
    let u_r = solve_ddc(r, basis, torus)?;
    Ok(s.pairing(&u_r, torus)?.re)
}

#[derive(Debug, Clone)]
pub struct SpIterate {
    pub direct: f64,
    pub recursion: f64,
    pub dropped_mass: f64,
}

/// Evaluate the super-potential of (f^n)^* S at R two ways: directly, and by
/// the cohomological recursion
///   U_{S_n} = sum_{l<n} (U o Lambda^l) M^{n-l-1} A + U_S o Lambda^n,
/// where U_j is the super-potential of f^*(alpha_j), M the action on classes,
/// A the class of S and Lambda the pushforward on potentials' arguments.
pub fn sp_iterate(
    s: &FourierForm,
    map: &TorusMap,
    n: usize,
    r: &FourierForm,
    basis: &NormalizationBasis,
    torus: &Torus,
    cap: i64,
    budget: f64,
) -> Result<SpIterate> {
    let q = basis.q;
    if s.bidegree != (q, q) {
        return Err(Error::Dimension("S degree does not match basis".into()));
    }
    // direct: pull back S n times (modes of constants never move, but S may
    // be non-constant in general).
    let mut s_n = s.clone();
    for step in 0..n {
        s_n = s_n.pullback(map, cap)?;
        if s_n.dropped_mass - s.dropped_mass > budget {
            return Err(Error::TruncationBudget {
                dropped: s_n.dropped_mass,
                budget,
                step,
            });
        }
    }
    let direct = s_n.pairing(&solve_ddc(r, basis, torus)?, torus)?.re;

    // recursion
    let m = crate::cohomology::real_pullback_matrix(torus.k, &map.a, q)?;
    let a = basis.class_coordinates(s, torus)?;
    let h = basis.h();
    let u_forms: Vec<FourierForm> = basis
        .alpha
        .iter()
        .map(|al| al.pullback(map, cap))
        .collect::<Result<_>>()?;
    let inv = map.inverse(torus)?;
    // powers M^j A for j = 0..n-1
    let mut m_pow_a: Vec<Vec<f64>> = vec![a.clone()];
    for _ in 1..n {
        let last = m_pow_a.last().unwrap();
        let v = DMatrix::from_fn(h, 1, |i, _| last[i]);
        let next = &m * v;
        m_pow_a.push((0..h).map(|i| next[(i, 0)]).collect());
    }
    let mut recursion = 0.0_f64;
    let mut r_l = r.clone();
    let mut dropped = 0.0_f64;
    for l in 0..n {
        let u_rl = solve_ddc(&r_l, basis, torus)?;
        let coeffs = &m_pow_a[n - l - 1];
        for j in 0..h {
            if coeffs[j] != 0.0 {
                recursion += coeffs[j] * u_forms[j].pairing(&u_rl, torus)?.re;
            }
        }
        r_l = r_l.pullback(&inv, cap)?;
        dropped = r_l.dropped_mass - r.dropped_mass;
        if dropped > budget {
            return Err(Error::TruncationBudget {
                dropped,
                budget,
                step: l,
            });
        }
    }
    recursion += s.pairing(&solve_ddc(&r_l, basis, torus)?, torus)?.re;
    Ok(SpIterate {
        direct,
        recursion,
        dropped_mass: dropped,
    })
}

/// The Green-current super-potential as a convergent series.
#[derive(Debug, Clone)]
pub struct GreenSeries {
    pub torus: Torus,
    pub map: TorusMap,
    pub basis: NormalizationBasis,
    /// f^*(alpha_j), the evaluator forms.
    pub u_forms: Vec<FourierForm>,
    pub m_inv: DMatrix<f64>,
    pub c: Vec<f64>,
    pub d_q: f64,
    pub delta: f64,
    pub cap: i64,
    pub budget: f64,
}

#[derive(Debug, Clone)]
pub struct GreenEval {
    pub value: f64,
    pub terms_used: usize,
    pub kappa_fitted: f64,
    pub tail_bound: f64,
}

impl GreenSeries {
    /// `delta` defaults to the geometric midpoint of the spectral gap
    /// (sqrt(d_{q-1} d_q)) when not given.
    pub fn new(
        torus: &Torus,
        map: &TorusMap,
        q: usize,
        c: Vec<f64>,
        delta: Option<f64>,
        cap: i64,
        budget: f64,
    ) -> Result<Self> {
        let basis = NormalizationBasis::standard(torus, q)?;
        if c.len() != basis.h() {
            return Err(Error::Dimension("class vector has wrong length".into()));
        }
        let model = crate::cohomology::build_torus_cohomology(torus, map)?;
        let profile = crate::cohomology::dynamical_degrees(&model)?;
        let d_q = profile.degrees[q];
        let d_qm1 = profile.degrees[q - 1];
        let delta = delta.unwrap_or_else(|| (d_qm1 * d_q).sqrt());
        if delta >= d_q {
            return Err(Error::NonSummable { delta, dq: d_q });
        }
        let m = model.action[q].to_float();
        let m_inv = m
            .try_inverse()
            .ok_or_else(|| Error::NotAutomorphism("class action not invertible".into()))?;
        let u_forms: Vec<FourierForm> = basis
            .alpha
            .iter()
            .map(|al| al.pullback(map, cap))
            .collect::<Result<_>>()?;
        Ok(GreenSeries {
            torus: torus.clone(),
            map: map.clone(),
            basis,
            u_forms,
            m_inv,
            c,
            d_q,
            delta,
            cap,
            budget,
        })
    }

    /// Partial sums of sum_l (U o Lambda^l) M^{-l-1} c at R, stopped when
    /// the fitted tail bound kappa delta^l d_q^{-l} drops below `tol`.
    pub fn eval(&self, r: &FourierForm, tol: f64) -> Result<GreenEval> {
        let rho = self.delta / self.d_q;
        let h = self.basis.h();
        if self.c.iter().all(|&v| v == 0.0) || r.coefficients.is_empty() {
            return Ok(GreenEval {
                value: 0.0,
                terms_used: 0,
                kappa_fitted: 0.0,
                tail_bound: 0.0,
            });
        }
        let inv = self.map.inverse(&self.torus)?;
        let mut w = DMatrix::from_fn(h, 1, |i, _| self.c[i]);
        let mut r_l = r.clone();
        let mut value = 0.0_f64;
        let mut kappa = 0.0_f64;
        let max_terms = 400usize;
        for l in 0..max_terms {
            w = &self.m_inv * w; // M^{-l-1} c
            let u_rl = solve_ddc(&r_l, &self.basis, &self.torus)?;
            let mut term = 0.0;
            for j in 0..h {
                if w[(j, 0)] != 0.0 {
                    term += w[(j, 0)] * self.u_forms[j].pairing(&u_rl, &self.torus)?.re;
                }
            }
            value += term;
            kappa = kappa.max(term.abs() / rho.powi(l as i32));
            let tail = kappa * rho.powi(l as i32 + 1) / (1.0 - rho);
            if tail < tol && l >= 2 {
                return Ok(GreenEval {
                    value,
                    terms_used: l + 1,
                    kappa_fitted: kappa,
                    tail_bound: tail,
                });
            }
            r_l = r_l.pullback(&inv, self.cap)?;
            if r_l.dropped_mass - r.dropped_mass > self.budget {
                return Err(Error::TruncationBudget {
                    dropped: r_l.dropped_mass,
                    budget: self.budget,
                    step: l,
                });
            }
        }
        Err(Error::InvalidParameter(
            "green series did not reach tolerance".into(),
        ))
    }
}

/// lambda = -log(rho) / (log(kappa) - log(rho)), the Hoelder exponent of the
/// Green super-potential on bounded sets.
pub fn holder_exponent(kappa: f64, rho: f64) -> Result<f64> {
    if kappa <= 1.0 {
        return Err(Error::InvalidParameter("kappa must exceed 1".into()));
    }
    if rho <= 0.0 || rho >= 1.0 {
        return Err(Error::InvalidParameter("rho must lie in (0,1)".into()));
    }
    Ok(-rho.ln() / (kappa.ln() - rho.ln()))
}

/// <S wedge S', Phi> via super-potentials:
///   U_S(dd^c Phi wedge S') + sum_i a_i <alpha_i, Phi wedge S'>.
pub fn wedge_sp(
    s: &FourierForm,
    s_prime: &FourierForm,
    phi: &FourierForm,
    basis: &NormalizationBasis,
    torus: &Torus,
    cap: i64,
) -> Result<f64> {
    if s_prime.coefficients.is_empty() {
        return Ok(0.0);
    }
    let a = basis.class_coordinates(s, torus)?;
    let ddc_phi = phi.ddc(torus)?;
    let r = ddc_phi.wedge(s_prime, cap)?;
    let first = if r.coefficients.is_empty() {
        0.0
    } else {
        superpotential_value(s, &r, basis, torus)?
    };
    let mut second = 0.0;
    for (i, al) in basis.alpha.iter().enumerate() {
        if a[i] != 0.0 {
            let ps = phi.wedge(s_prime, cap)?;
            second += a[i] * al.pairing(&ps, torus)?.re;
        }
    }
    Ok(first + second)
}

/// Max over the family of |U_S(R)| / (1 + log^+ c_1(R)); the constant of the
/// main estimate, fitted empirically.
pub fn main_estimate_sweep(
    s: &FourierForm,
    family: &[FourierForm],
    basis: &NormalizationBasis,
    torus: &Torus,
) -> Result<f64> {
    let mut best = 0.0_f64;
    for r in family {
        if r.coefficients.is_empty() {
            continue;
        }
        let v = superpotential_value(s, r, basis, torus)?.abs();
        let mut c1 = 0.0;
        for (m, c) in &r.coefficients {
            let w = 1.0 + m.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
            c1 += coef_norm(c) * w;
        }
        let denom = 1.0 + c1.ln().max(0.0);
        best = best.max(v / denom);
    }
    Ok(best)
}
