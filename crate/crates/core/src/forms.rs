//! Fourier-series calculus of smooth forms on a complex torus.
//!
//! A form is a finite sum over modes m in Z^{2k} of e_m(t) = exp(2 pi i m.t)
//! times a constant (p,q)-covector, stored over the component basis of
//! `covector`. All operators (wedge, d, dd^c, pullback) act mode-wise; mode
//! relabeling under pullback is the integer matrix of the map, so nothing
//! here ever leaves the class of trigonometric polynomials.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::covector;
use crate::error::{Error, Result};
use crate::torus::{Torus, TorusMap};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Coefficients below this threshold are dropped when cleaning up a form.
const CLEAN_EPS: f64 = 1e-15;

#[derive(Debug, Clone)]
pub struct FourierForm {
    pub k: usize,
    pub bidegree: (usize, usize),
    /// Truncation radius: all stored modes have sup-norm <= truncation.
    pub truncation: i64,
    /// mode -> components over the (p,q)-covector basis.
    pub coefficients: BTreeMap<Vec<i64>, Vec<Complex64>>,
    pub real_flag: bool,
    /// Cumulative coefficient mass dropped by truncation in the history of
    /// this form.
    pub dropped_mass: f64,
}

impl FourierForm {
    pub fn zero(k: usize, bidegree: (usize, usize)) -> Self {
        FourierForm {
            k,
            bidegree,
            truncation: 0,
            coefficients: BTreeMap::new(),
            real_flag: true,
            dropped_mass: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        covector::dim(self.k, self.bidegree.0, self.bidegree.1)
    }

    /// Constant form from complex components.
    pub fn constant(k: usize, bidegree: (usize, usize), comps: Vec<Complex64>) -> Result<Self> {
        if comps.len() != covector::dim(k, bidegree.0, bidegree.1) {
            return Err(Error::Dimension("component count mismatch".into()));
        }
        let mut f = FourierForm::zero(k, bidegree);
        f.set_mode(vec![0; 2 * k], comps);
        f.real_flag = f.real_residual() < 1e-12;
        Ok(f)
    }

    /// The standard Kaehler form omega = (i/2) sum dz_j wedge dzbar_j.
    pub fn std_omega(k: usize) -> Self {
        let nj = covector::binomial(k, 1);
        let mut comps = vec![Complex64::new(0.0, 0.0); nj * nj];
        for j in 0..k {
            comps[j * nj + j] = Complex64::new(0.0, 0.5);
        }
        FourierForm::constant(k, (1, 1), comps).unwrap()
    }

    /// omega^p as a constant form.
    pub fn std_omega_power(k: usize, p: usize) -> Self {
        FourierForm::constant(k, (p, p), crate::torus::omega_power(k, p)).unwrap()
    }

    /// Single-mode scalar function a * e_m as a (0,0)-form.
    pub fn character(k: usize, mode: Vec<i64>, amplitude: Complex64) -> Self {
        let mut f = FourierForm::zero(k, (0, 0));
        f.set_mode(mode, vec![amplitude]);
        f.real_flag = false;
        f
    }

    /// Real single-mode function 2 Re(a e_m) = a e_m + conj(a) e_{-m}.
    pub fn real_character(k: usize, mode: Vec<i64>, amplitude: Complex64) -> Self {
        let mut f = FourierForm::zero(k, (0, 0));
        let neg: Vec<i64> = mode.iter().map(|&v| -v).collect();
        f.set_mode(mode, vec![amplitude]);
        f.add_to_mode(&neg, &[amplitude.conj()]);
        f.real_flag = true;
        f
    }

    pub fn set_mode(&mut self, mode: Vec<i64>, comps: Vec<Complex64>) {
        debug_assert_eq!(mode.len(), 2 * self.k);
        debug_assert_eq!(comps.len(), self.dim());
        let r = mode.iter().map(|v| v.abs()).max().unwrap_or(0);
        self.truncation = self.truncation.max(r);
        self.coefficients.insert(mode, comps);
    }

    pub fn add_to_mode(&mut self, mode: &[i64], comps: &[Complex64]) {
        let r = mode.iter().map(|v| v.abs()).max().unwrap_or(0);
        self.truncation = self.truncation.max(r);
        let entry = self
            .coefficients
            .entry(mode.to_vec())
            .or_insert_with(|| vec![Complex64::new(0.0, 0.0); comps.len()]);
        for (a, b) in entry.iter_mut().zip(comps.iter()) {
            *a += b;
        }
    }

    /// Drop negligible coefficients; keeps mode counts from creeping up.
    pub fn clean(&mut self) {
        let scale = self.sup_coefficient().max(1.0);
        self.coefficients
            .retain(|_, c| coef_norm(c) > CLEAN_EPS * scale);
        self.truncation = self
            .coefficients
            .keys()
            .map(|m| m.iter().map(|v| v.abs()).max().unwrap_or(0))
            .max()
            .unwrap_or(0);
    }

    pub fn sup_coefficient(&self) -> f64 {
        self.coefficients
            .values()
            .map(|c| coef_norm(c))
            .fold(0.0_f64, f64::max)
    }

    pub fn scale(&self, s: Complex64) -> FourierForm {
        let mut out = self.clone();
        for c in out.coefficients.values_mut() {
            for v in c.iter_mut() {
                *v *= s;
            }
        }
        if s.im != 0.0 {
            out.real_flag = false;
        }
        out
    }

    pub fn add(&self, other: &FourierForm) -> Result<FourierForm> {
        if self.k != other.k || self.bidegree != other.bidegree {
            return Err(Error::Dimension("cannot add forms of different type".into()));
        }
        let mut out = self.clone();
        for (m, c) in &other.coefficients {
            out.add_to_mode(m, c);
        }
        out.real_flag = self.real_flag && other.real_flag;
        out.dropped_mass = self.dropped_mass + other.dropped_mass;
        out.clean();
        Ok(out)
    }

    pub fn sub(&self, other: &FourierForm) -> Result<FourierForm> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Residual of the reality constraint coef(-m) = conj-dual of coef(m).
    pub fn real_residual(&self) -> f64 {
        let (p, q) = self.bidegree;
        let mut res = 0.0_f64;
        for (m, c) in &self.coefficients {
            let neg: Vec<i64> = m.iter().map(|&v| -v).collect();
            let conj = covector::conjugate_components(self.k, (p, q), c);
            match self.coefficients.get(&neg) {
                Some(cn) if p == q => {
                    for (a, b) in cn.iter().zip(conj.iter()) {
                        res = res.max((a - b).norm());
                    }
                }
                Some(_) => {}
                None => res = res.max(coef_norm(&conj)),
            }
        }
        res
    }

    /// Value of the form at a point t (length-2k internal coordinates).
    pub fn value_at(&self, t: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (m, c) in &self.coefficients {
            let phase: f64 = m.iter().zip(t.iter()).map(|(&mi, &ti)| mi as f64 * ti).sum();
            let e = Complex64::from_polar(1.0, TWO_PI * phase);
            for (o, v) in out.iter_mut().zip(c.iter()) {
                *o += e * v;
            }
        }
        out
    }

    /// Wedge product by coefficient convolution. Modes beyond `cap` are
    /// dropped and their coefficient mass recorded on the result.
    pub fn wedge(&self, other: &FourierForm, cap: i64) -> Result<FourierForm> {
        let (p1, q1) = self.bidegree;
        let (p2, q2) = other.bidegree;
        let k = self.k;
        if other.k != k {
            return Err(Error::Dimension("forms live on different tori".into()));
        }
        if p1 + p2 > k || q1 + q2 > k {
            return Err(Error::BidegreeOverflow {
                p: p1 + p2,
                q: q1 + q2,
                k,
            });
        }
        let mut out = FourierForm::zero(k, (p1 + p2, q1 + q2));
        out.real_flag = self.real_flag && other.real_flag;
        out.dropped_mass = self.dropped_mass + other.dropped_mass;
        for (m1, c1) in &self.coefficients {
            for (m2, c2) in &other.coefficients {
                let m: Vec<i64> = m1.iter().zip(m2.iter()).map(|(a, b)| a + b).collect();
                let w = covector::wedge_components(k, (p1, q1), c1, (p2, q2), c2);
                if m.iter().map(|v| v.abs()).max().unwrap_or(0) > cap {
                    out.dropped_mass += coef_norm(&w);
                } else {
                    out.add_to_mode(&m, &w);
                }
            }
        }
        out.clean();
        Ok(out)
    }

    /// The two pieces of the exterior derivative: (del F, delbar F).
    /// Each is None when the target bidegree does not exist.
    pub fn d(&self, torus: &Torus) -> (Option<FourierForm>, Option<FourierForm>) {
        let (p, q) = self.bidegree;
        let k = self.k;
        let del = if p < k {
            let mut out = FourierForm::zero(k, (p + 1, q));
            out.real_flag = false;
            for (m, c) in &self.coefficients {
                if m.iter().all(|&v| v == 0) {
                    continue;
                }
                let (alpha, _) = mode_covectors(torus, m);
                let w = covector::wedge_components(k, (1, 0), &alpha, (p, q), c);
                out.add_to_mode(m, &w);
            }
            out.clean();
            Some(out)
        } else {
            None
        };
        let delbar = if q < k {
            let mut out = FourierForm::zero(k, (p, q + 1));
            out.real_flag = false;
            for (m, c) in &self.coefficients {
                if m.iter().all(|&v| v == 0) {
                    continue;
                }
                let (_, beta) = mode_covectors(torus, m);
                let w = covector::wedge_components(k, (0, 1), &beta, (p, q), c);
                out.add_to_mode(m, &w);
            }
            out.clean();
            Some(out)
        } else {
            None
        };
        (del, delbar)
    }

    /// Sup coefficient norm of dF; zero iff the form is closed.
    pub fn d_residual(&self, torus: &Torus) -> f64 {
        let (del, delbar) = self.d(torus);
        let a = del.map(|f| f.sup_coefficient()).unwrap_or(0.0);
        let b = delbar.map(|f| f.sup_coefficient()).unwrap_or(0.0);
        a.max(b)
    }

    /// dd^c F = (i/pi) del delbar F; kills mode 0 exactly.
    pub fn ddc(&self, torus: &Torus) -> Result<FourierForm> {
        let (p, q) = self.bidegree;
        let k = self.k;
        if p >= k || q >= k {
            return Err(Error::BidegreeOverflow { p: p + 1, q: q + 1, k });
        }
        let mut out = FourierForm::zero(k, (p + 1, q + 1));
        out.real_flag = self.real_flag;
        out.dropped_mass = self.dropped_mass;
        let i_over_pi = Complex64::new(0.0, 1.0 / std::f64::consts::PI);
        for (m, c) in &self.coefficients {
            if m.iter().all(|&v| v == 0) {
                continue;
            }
            let (alpha, beta) = mode_covectors(torus, m);
            let bc = covector::wedge_components(k, (0, 1), &beta, (p, q), c);
            let abc = covector::wedge_components(k, (1, 0), &alpha, (p, q + 1), &bc);
            let scaled: Vec<Complex64> = abc.iter().map(|v| v * i_over_pi).collect();
            out.add_to_mode(m, &scaled);
        }
        out.clean();
        Ok(out)
    }

    /// Pullback by an affine automorphism: modes relabel by the transpose of
    /// the integer lattice matrix, covectors by the exterior action of the
    /// derivative, and each coefficient picks up the translation phase.
    /// Relabeled modes escaping the cap are dropped with their mass recorded.
    pub fn pullback(&self, map: &TorusMap, cap: i64) -> Result<FourierForm> {
        let (p, q) = self.bidegree;
        let k = self.k;
        if map.k != k {
            return Err(Error::Dimension("map and form dimension differ".into()));
        }
        let act = covector::pullback_action(k, &map.a, p, q);
        let d = self.dim();
        let mut out = FourierForm::zero(k, (p, q));
        out.real_flag = self.real_flag;
        out.dropped_mass = self.dropped_mass;
        for (m, c) in &self.coefficients {
            let new_mode = map.pullback_mode(m)?;
            let phase = map.pullback_phase(m);
            let mut nc = vec![Complex64::new(0.0, 0.0); d];
            for (i, &ci) in c.iter().enumerate() {
                if ci.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..d {
                    nc[j] += ci * act[(i, j)];
                }
            }
            for v in nc.iter_mut() {
                *v *= phase;
            }
            if new_mode.iter().map(|v| v.abs()).max().unwrap_or(0) > cap {
                out.dropped_mass += coef_norm(&nc);
            } else {
                out.add_to_mode(&new_mode, &nc);
            }
        }
        out.clean();
        Ok(out)
    }

    /// Pushforward f_* = pullback by the inverse automorphism.
    pub fn pushforward(&self, torus: &Torus, map: &TorusMap, cap: i64) -> Result<FourierForm> {
        self.pullback(&map.inverse(torus)?, cap)
    }

    /// Constant part and class coordinates of a closed (p,p)-form.
    pub fn harmonic_part(&self, torus: &Torus, tol: f64) -> Result<(Vec<Complex64>, Vec<f64>)> {
        let res = self.d_residual(torus);
        if res > tol {
            return Err(Error::NotClosed(res));
        }
        let zero_mode = vec![0i64; 2 * self.k];
        let comps = self
            .coefficients
            .get(&zero_mode)
            .cloned()
            .unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); self.dim()]);
        let (p, q) = self.bidegree;
        if p != q {
            return Ok((comps, Vec::new()));
        }
        let (coords, _) = covector::real_coordinates(self.k, p, &comps);
        Ok((comps, coords))
    }

    /// Integral of F wedge G over the torus: only opposite mode pairs
    /// survive the character integral.
    pub fn pairing(&self, other: &FourierForm, torus: &Torus) -> Result<Complex64> {
        let (p1, q1) = self.bidegree;
        let (p2, q2) = other.bidegree;
        if p1 + p2 != self.k || q1 + q2 != self.k {
            return Err(Error::BidegreeOverflow {
                p: p1 + p2,
                q: q1 + q2,
                k: self.k,
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, c1) in &self.coefficients {
            let neg: Vec<i64> = m.iter().map(|&v| -v).collect();
            if let Some(c2) = other.coefficients.get(&neg) {
                let w = covector::wedge_components(self.k, (p1, q1), c1, (p2, q2), c2);
                acc += torus.top_integral(&w);
            }
        }
        Ok(acc)
    }

    /// Mass of a (p,p)-form: pairing with omega^{k-p}.
    pub fn mass(&self, torus: &Torus) -> Result<f64> {
        let (p, q) = self.bidegree;
        if p != q {
            return Err(Error::InvalidParameter("mass needs bidegree (p,p)".into()));
        }
        let om = FourierForm::std_omega_power(self.k, self.k - p);
        Ok(self.pairing(&om, torus)?.re)
    }

    /// Surrogate norms; see NormReport. `grid` is the per-axis resolution of
    /// the positivity certification grid (grid^{2k} points).
    pub fn norms(&self, torus: &Torus, l_list: &[u32], grid: usize) -> Result<NormReport> {
        let (p, q) = self.bidegree;
        if p != q {
            return Err(Error::InvalidParameter("norms need bidegree (p,p)".into()));
        }
        let mut c_l = BTreeMap::new();
        let mut c_minus_l = BTreeMap::new();
        for &l in l_list {
            let mut sum = 0.0_f64;
            let mut sup = 0.0_f64;
            for (m, c) in &self.coefficients {
                let n = coef_norm(c);
                let w = 1.0 + mode_norm(m);
                sum += n * w.powi(l as i32);
                sup = sup.max(n * w.powi(-(l as i32)));
            }
            c_l.insert(l, sum);
            c_minus_l.insert(l, sup);
        }
        let mass = self.mass(torus)?;
        let (c, certified) = self.positivity_constant(torus, grid)?;
        let omega_mass = FourierForm::std_omega_power(self.k, p).mass(torus)?;
        let star_surrogate = (mass + 2.0 * c * omega_mass).max(0.0);
        Ok(NormReport {
            mass,
            star_surrogate,
            star_constant: c,
            star_upper_bound_only: !certified,
            c_l,
            c_minus_l,
        })
    }

    /// Minimal C (by bisection) such that F + C omega^p passes the grid
    /// positivity test, plus a certification flag. The test pairs values
    /// against a frame of simple positive (k-p, k-p)-covectors.
    pub fn positivity_constant(&self, torus: &Torus, grid: usize) -> Result<(f64, bool)> {
        let p = self.bidegree.0;
        let k = self.k;
        let frame = positive_frame(k, k - p);
        // Duals: t(gamma, v) = Re(top_integral(v wedge gamma)) is linear in v.
        let duals: Vec<Vec<Complex64>> = frame
            .iter()
            .map(|g| {
                let d = self.dim();
                let mut dual = vec![Complex64::new(0.0, 0.0); d];
                for i in 0..d {
                    let mut unit = vec![Complex64::new(0.0, 0.0); d];
                    unit[i] = Complex64::new(1.0, 0.0);
                    let w = covector::wedge_components(k, (p, p), &unit, (k - p, k - p), g);
                    dual[i] = torus.top_integral(&w);
                }
                dual
            })
            .collect();
        let omega = crate::torus::omega_power(k, p);
        let t_omega: Vec<f64> = duals
            .iter()
            .map(|dual| {
                omega
                    .iter()
                    .zip(dual.iter())
                    .map(|(v, d)| (v * d).re)
                    .sum::<f64>()
            })
            .collect();
        if t_omega.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidParameter(
                "positivity frame degenerate against omega^p".into(),
            ));
        }
        // Worst margin over the grid per frame element.
        let npts = grid.pow(2 * k as u32);
        let mut worst = vec![f64::INFINITY; frame.len()];
        let mut t = vec![0.0_f64; 2 * k];
        for idx in 0..npts {
            let mut rem = idx;
            for a in 0..2 * k {
                t[a] = (rem % grid) as f64 / grid as f64;
                rem /= grid;
            }
            let v = self.value_at(&t);
            for (fi, dual) in duals.iter().enumerate() {
                let s: f64 = v.iter().zip(dual.iter()).map(|(a, b)| (a * b).re).sum();
                if s < worst[fi] {
                    worst[fi] = s;
                }
            }
        }
        let scale = self.sup_coefficient().max(1.0);
        let tol = 1e-12 * scale;
        let passes = |c: f64| {
            worst
                .iter()
                .zip(t_omega.iter())
                .all(|(&w, &tw)| w + c * tw >= -tol)
        };
        if passes(0.0) {
            return Ok((0.0, true));
        }
        let mut hi = 1.0_f64;
        let limit = 1e6 * scale;
        while !passes(hi) {
            hi *= 2.0;
            if hi > limit {
                return Ok((hi, false));
            }
        }
        let mut lo = 0.0_f64;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if passes(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok((hi, true))
    }
}

pub fn coef_norm(c: &[Complex64]) -> f64 {
    c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn mode_norm(m: &[i64]) -> f64 {
    m.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt()
}

/// The (1,0) and (0,1) covectors alpha_m, beta_m with d e_m = e_m (alpha+beta):
/// coordinates are 2 pi i times the entries of V^{-T} m split into the dz and
/// dzbar halves.
pub fn mode_covectors(torus: &Torus, m: &[i64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let k = torus.k;
    let mut alpha = vec![Complex64::new(0.0, 0.0); k];
    let mut beta = vec![Complex64::new(0.0, 0.0); k];
    let two_pi_i = Complex64::new(0.0, TWO_PI);
    for i in 0..2 * k {
        // (V^{-T} m)_i = sum_j V^{-1}[j, i] m_j
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..2 * k {
            acc += torus.v_inv[(j, i)] * m[j] as f64;
        }
        if i < k {
            alpha[i] = two_pi_i * acc;
        } else {
            beta[i - k] = two_pi_i * acc;
        }
    }
    (alpha, beta)
}

/// Frame of simple positive (r,r)-covectors built from a finite covector set:
/// the coordinate covectors plus two-coordinate combinations with unit phases.
pub fn positive_frame(k: usize, r: usize) -> Vec<Vec<Complex64>> {
    if r == 0 {
        return vec![vec![Complex64::new(1.0, 0.0)]];
    }
    let mut etas: Vec<Vec<Complex64>> = Vec::new();
    for j in 0..k {
        let mut e = vec![Complex64::new(0.0, 0.0); k];
        e[j] = Complex64::new(1.0, 0.0);
        etas.push(e);
    }
    for j in 0..k {
        for l in (j + 1)..k {
            for phase in [
                Complex64::new(1.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
            ] {
                let mut e = vec![Complex64::new(0.0, 0.0); k];
                e[j] = Complex64::new(1.0, 0.0);
                e[l] = phase;
                etas.push(e);
            }
        }
    }
    // (i/2) eta wedge etabar as (1,1)-components.
    let one_one = |eta: &Vec<Complex64>| -> Vec<Complex64> {
        let nj = covector::binomial(k, 1);
        let mut c = vec![Complex64::new(0.0, 0.0); nj * nj];
        for a in 0..k {
            for b in 0..k {
                c[a * nj + b] = Complex64::new(0.0, 0.5) * eta[a] * eta[b].conj();
            }
        }
        c
    };
    // All r-subsets of the eta set, wedged.
    let mut out = Vec::new();
    let n = etas.len();
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        let mut acc = vec![Complex64::new(1.0, 0.0)];
        let mut deg = 0;
        for &i in &idx {
            acc = covector::wedge_components(k, (deg, deg), &acc, (1, 1), &one_one(&etas[i]));
            deg += 1;
        }
        if coef_norm(&acc) > 1e-14 {
            out.push(acc);
        }
        // next combination
        let mut pos = r;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if idx[pos] + 1 <= n - (r - pos) {
                idx[pos] += 1;
                for t in pos + 1..r {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormReport {
    pub mass: f64,
    pub star_surrogate: f64,
    /// The certified constant C with F + C omega^p grid-positive.
    pub star_constant: f64,
    /// Set when certification failed at the configured grid resolution; the
    /// reported value is then only an upper bound.
    pub star_upper_bound_only: bool,
    pub c_l: BTreeMap<u32, f64>,
    pub c_minus_l: BTreeMap<u32, f64>,
}

// --- serde: modes as a list, coefficients as [re, im] pairs ---

#[derive(Serialize, Deserialize)]
struct ModeEntry {
    m: Vec<i64>,
    c: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct FormRepr {
    k: usize,
    bidegree: (usize, usize),
    truncation: i64,
    real_flag: bool,
    dropped_mass: f64,
    modes: Vec<ModeEntry>,
}

impl Serialize for FourierForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = FormRepr {
            k: self.k,
            bidegree: self.bidegree,
            truncation: self.truncation,
            real_flag: self.real_flag,
            dropped_mass: self.dropped_mass,
            modes: self
                .coefficients
                .iter()
                .map(|(m, c)| ModeEntry {
                    m: m.clone(),
                    c: c.iter().map(|v| [v.re, v.im]).collect(),
                })
                .collect(),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FourierForm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = FormRepr::deserialize(d)?;
        let dim = covector::dim(repr.k, repr.bidegree.0, repr.bidegree.1);
        let mut coefficients = BTreeMap::new();
        for entry in repr.modes {
            if entry.m.len() != 2 * repr.k || entry.c.len() != dim {
                return Err(serde::de::Error::custom("malformed mode entry"));
            }
            coefficients.insert(
                entry.m,
                entry.c.iter().map(|v| Complex64::new(v[0], v[1])).collect(),
            );
        }
        Ok(FourierForm {
            k: repr.k,
            bidegree: repr.bidegree,
            truncation: repr.truncation,
            real_flag: repr.real_flag,
            dropped_mass: repr.dropped_mass,
            coefficients,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::MapSpec;

    fn gauss2() -> Torus {
        Torus::gaussian(2).unwrap()
    }

    fn worked_map(t: &Torus) -> TorusMap {
        MapSpec::from_integer(&[vec![2, 1], vec![1, 1]]).build(t).unwrap()
    }

    #[test]
    fn omega_wedge_omega_is_twice_volume_form() {
        let t = gauss2();
        let om = FourierForm::std_omega(2);
        let w = om.wedge(&om, 8).unwrap();
        assert_eq!(w.bidegree, (2, 2));
        // Single mode-0 coefficient; integral = 2 = 2 * volume.
        assert_eq!(w.coefficients.len(), 1);
        let int = t.top_integral(w.coefficients.values().next().unwrap());
        assert!((int.re - 2.0).abs() < 1e-12 && int.im.abs() < 1e-14);
    }

    #[test]
    fn wedge_with_zero_and_characters() {
        let om = FourierForm::std_omega(2);
        let z = FourierForm::zero(2, (1, 1));
        let w = om.wedge(&z, 8).unwrap();
        assert!(w.coefficients.is_empty());
        let a = FourierForm::character(2, vec![1, 0, 0, 0], Complex64::new(2.0, 0.0));
        let b = FourierForm::character(2, vec![0, 1, -1, 0], Complex64::new(0.0, 3.0));
        let ab = a.wedge(&b, 8).unwrap();
        assert_eq!(ab.coefficients.len(), 1);
        let (m, c) = ab.coefficients.iter().next().unwrap();
        assert_eq!(m, &vec![1, 1, -1, 0]);
        assert!((c[0] - Complex64::new(0.0, 6.0)).norm() < 1e-14);
    }

    #[test]
    fn wedge_graded_commutative_and_associative() {
        let t = gauss2();
        let om = FourierForm::std_omega(2);
        let mut u = FourierForm::real_character(2, vec![1, 0, 0, 1], Complex64::new(0.3, 0.1));
        u = u.add(&FourierForm::real_character(2, vec![0, 1, 1, 0], Complex64::new(-0.2, 0.4)))
            .unwrap();
        let r = u.ddc(&t).unwrap();
        // (1,1) forms commute; r wedge om == om wedge r.
        let a = r.wedge(&om, 8).unwrap();
        let b = om.wedge(&r, 8).unwrap();
        let diff = a.sub(&b).unwrap();
        assert!(diff.sup_coefficient() < 1e-12);
        // associativity on a scalar triple
        let f = FourierForm::real_character(2, vec![1, 0, 0, 0], Complex64::new(1.0, 2.0));
        let g = FourierForm::real_character(2, vec![0, 0, 1, 0], Complex64::new(-1.0, 0.5));
        let left = f.wedge(&g, 8).unwrap().wedge(&r, 16).unwrap();
        let right = f.wedge(&g.wedge(&r, 16).unwrap(), 16).unwrap();
        let diff = left.sub(&right).unwrap();
        assert!(diff.sup_coefficient() < 1e-12);
    }

    #[test]
    fn d_squares_to_zero() {
        let t = gauss2();
        let u = FourierForm::real_character(2, vec![2, -1, 0, 3], Complex64::new(0.7, -0.2));
        let (del, delbar) = u.d(&t);
        let (del2, mixed1) = del.as_ref().unwrap().d(&t);
        let (mixed2, delbar2) = delbar.as_ref().unwrap().d(&t);
        assert!(del2.unwrap().sup_coefficient() < 1e-12);
        assert!(delbar2.unwrap().sup_coefficient() < 1e-12);
        // del delbar + delbar del = 0
        let anti = mixed1.unwrap().add(&mixed2.unwrap()).unwrap();
        assert!(anti.sup_coefficient() < 1e-12);
        // dd^c of dd^c vanishes identically; one more step overflows on k=2
        let r = u.ddc(&t).unwrap();
        let rr = r.ddc(&t).unwrap();
        assert!(rr.sup_coefficient() < 1e-12);
        assert!(matches!(rr.ddc(&t), Err(Error::BidegreeOverflow { .. })));
    }

    #[test]
    fn ddc_constant_is_zero() {
        let t = gauss2();
        let om = FourierForm::std_omega(2);
        // ddc of a (1,1) constant is fine on k >= 2... but constants die anyway:
        // mode 0 is skipped by the operator.
        let c = FourierForm::constant(2, (0, 0), vec![Complex64::new(3.0, 0.0)]).unwrap();
        let r = c.ddc(&t).unwrap();
        assert!(r.coefficients.is_empty());
        assert!(om.d_residual(&t) < 1e-15);
    }

    #[test]
    fn ddc_of_cosine_matches_finite_differences() {
        // k=1, u = cos(2 pi t1). dd^c u is a single-component (1,1)-form;
        // oracle: dd^c u = (i/pi) u_{z zbar} dz wedge dzbar with
        // u_{z zbar} = Laplacian/4 by central differences on a grid.
        let t = Torus::gaussian(1).unwrap();
        let u = FourierForm::real_character(1, vec![1, 0], Complex64::new(0.5, 0.0));
        let r = u.ddc(&t).unwrap();
        let h = 1.0 / 256.0;
        for &x in &[0.0, 0.13, 0.31, 0.5, 0.77] {
            let up = |t1: f64, t2: f64| (TWO_PI * t1).cos() * (1.0 + 0.0 * t2);
            // z = t1 + i t2, so Laplacian in (t1, t2) equals 4 u_{z zbar}.
            let lap = (up(x + h, 0.2) + up(x - h, 0.2) + up(x, 0.2 + h) + up(x, 0.2 - h)
                - 4.0 * up(x, 0.2))
                / (h * h);
            let oracle = Complex64::new(0.0, 1.0 / std::f64::consts::PI) * (lap / 4.0);
            let got = r.value_at(&[x, 0.2])[0];
            assert!(
                (got - oracle).norm() < 1e-3,
                "at {x}: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn pullback_identity_translation_and_cross_module_mass() {
        let t = gauss2();
        let id = MapSpec::from_integer(&[vec![1, 0], vec![0, 1]]).build(&t).unwrap();
        let u = FourierForm::real_character(2, vec![1, 0, -1, 2], Complex64::new(0.4, 0.1));
        let r = u.ddc(&t).unwrap();
        let back = r.pullback(&id, 16).unwrap();
        assert!(back.sub(&r).unwrap().sup_coefficient() < 1e-14);

        // translation: same modes, unit phases, norms unchanged
        let tr = MapSpec {
            derivative: vec![
                vec![[1.0, 0.0], [0.0, 0.0]],
                vec![[0.0, 0.0], [1.0, 0.0]],
            ],
            translation: Some(vec![[0.25, 0.0], [0.0, 0.5]]),
        }
        .build(&t)
        .unwrap();
        let shifted = r.pullback(&tr, 16).unwrap();
        for (m, c) in &r.coefficients {
            let sc = shifted.coefficients.get(m).expect("mode survived");
            assert!((coef_norm(c) - coef_norm(sc)).abs() < 1e-13);
        }

        // f^* omega pairing against omega matches the cohomology action.
        let f = worked_map(&t);
        let om = FourierForm::std_omega(2);
        let pf = om.pullback(&f, 16).unwrap();
        let lhs = pf.pairing(&om, &t).unwrap().re;
        let model = crate::cohomology::build_torus_cohomology(&t, &f).unwrap();
        let m1 = model.action[1].to_float();
        let oc = &model.omega_class[1];
        let p1 = model.pairing[1].to_float();
        let mut rhs = 0.0;
        let img = &m1 * nalgebra::DMatrix::from_fn(4, 1, |i, _| oc[i]);
        for i in 0..4 {
            for j in 0..4 {
                rhs += img[(i, 0)] * p1[(i, j)] * oc[j];
            }
        }
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn pullback_preserves_pairing() {
        let t = gauss2();
        let f = worked_map(&t);
        let om = FourierForm::std_omega(2);
        let u = FourierForm::real_character(2, vec![1, -1, 0, 1], Complex64::new(0.3, 0.2));
        let r = om.add(&u.ddc(&t).unwrap()).unwrap();
        let g = FourierForm::real_character(2, vec![0, 1, 1, 0], Complex64::new(-0.1, 0.6))
            .ddc(&t)
            .unwrap()
            .add(&om)
            .unwrap();
        let before = r.pairing(&g, &t).unwrap();
        let fa = r.pullback(&f, 64).unwrap();
        let fb = g.pullback(&f, 64).unwrap();
        assert_eq!(fa.dropped_mass + fb.dropped_mass, 0.0);
        let after = fa.pairing(&fb, &t).unwrap();
        assert!((before - after).norm() < 1e-9, "{before} vs {after}");
    }

    #[test]
    fn harmonic_part_examples() {
        let t = gauss2();
        let om = FourierForm::std_omega(2);
        let (comps, coords) = om.harmonic_part(&t, 1e-12).unwrap();
        assert!((comps[0] - Complex64::new(0.0, 0.5)).norm() < 1e-14);
        // exact piece has zero class
        let u = FourierForm::real_character(2, vec![1, 1, 0, 0], Complex64::new(0.8, 0.0));
        let e = u.ddc(&t).unwrap();
        let (_, ecoords) = e.harmonic_part(&t, 1e-12).unwrap();
        assert!(ecoords.iter().all(|&v| v.abs() < 1e-13));
        // linearity
        let s = om.add(&e).unwrap();
        let (_, scoords) = s.harmonic_part(&t, 1e-12).unwrap();
        for (a, b) in scoords.iter().zip(coords.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        // non-closed input is rejected
        let open = FourierForm::real_character(2, vec![1, 0, 0, 0], Complex64::new(1.0, 0.0));
        let (del, _) = open.d(&t);
        let not_closed = del.unwrap();
        assert!(matches!(
            not_closed.harmonic_part(&t, 1e-12),
            Err(Error::NotClosed(_))
        ));
    }

    #[test]
    fn norm_report_examples() {
        let t = gauss2();
        let om = FourierForm::std_omega(2);
        let rep = om.norms(&t, &[2], 8).unwrap();
        assert!((rep.star_constant - 0.0).abs() < 1e-12);
        assert!(!rep.star_upper_bound_only);
        assert!((rep.star_surrogate - rep.mass).abs() < 1e-12);
        assert!((rep.mass - 2.0).abs() < 1e-12);

        let z = FourierForm::zero(2, (1, 1));
        let zrep = z.norms(&t, &[1, 2], 4).unwrap();
        assert_eq!(zrep.mass, 0.0);
        assert_eq!(zrep.star_surrogate, 0.0);
        assert!(zrep.c_l.values().all(|&v| v == 0.0));

        // single-mode dd^c: c_minus_2 surrogate by hand
        let mode = vec![1i64, 0, -1, 0];
        let u = FourierForm::real_character(2, mode.clone(), Complex64::new(0.35, 0.0));
        let r = u.ddc(&t).unwrap();
        let rep = r.norms(&t, &[2], 4).unwrap();
        let c = r.coefficients.get(&mode).unwrap();
        let expect = coef_norm(c) * (1.0 + mode_norm(&mode)).powi(-2);
        assert!((rep.c_minus_l[&2] - expect).abs() < 1e-14);
        // monotonicity of the surrogate family
        let rep2 = r.norms(&t, &[1, 3], 4).unwrap();
        assert!(rep2.c_minus_l[&3] <= rep2.c_minus_l[&1]);
    }

    #[test]
    fn positivity_needs_a_constant_for_wild_forms() {
        let t = gauss2();
        let u = FourierForm::real_character(2, vec![1, 0, 0, 0], Complex64::new(2.0, 0.0));
        let r = u.ddc(&t).unwrap();
        // dd^c of a function oscillates, so it cannot be positive by itself,
        // and its class is 0: mass is 0 but star surrogate is not.
        let rep = r.norms(&t, &[2], 8).unwrap();
        assert!(rep.mass.abs() < 1e-12);
        assert!(rep.star_constant > 0.0);
        assert!(rep.star_surrogate > 0.0);
        assert!(!rep.star_upper_bound_only);
    }

    #[test]
    fn json_round_trip() {
        let t = gauss2();
        let u = FourierForm::real_character(2, vec![1, 2, -1, 0], Complex64::new(0.3, -0.4));
        let r = u.ddc(&t).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: FourierForm = serde_json::from_str(&json).unwrap();
        assert_eq!(back.coefficients.len(), r.coefficients.len());
        assert!(back.sub(&r).unwrap().sup_coefficient() < 1e-15);
    }

    #[test]
    fn real_residual_detects_asymmetry() {
        let om = FourierForm::std_omega(2);
        assert!(om.real_residual() < 1e-15);
        let mut bad = FourierForm::zero(2, (0, 0));
        bad.set_mode(vec![1, 0, 0, 0], vec![Complex64::new(1.0, 0.0)]);
        assert!(bad.real_residual() > 0.5);
    }
}
