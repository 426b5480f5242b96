//! Compact complex tori C^k / Lambda and their affine automorphisms.
//!
//! Internal coordinates are t in R^{2k}/Z^{2k}; the complex coordinates are
//! z = P t where the columns of the k x 2k matrix P are the lattice
//! generators. The stacked change of variables (dz, dzbar) = V dt with
//! V = [P; conj(P)] converts covector components into integrals over the
//! unit cube.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::covector;
use crate::error::{Error, Result};
use crate::matrix::RealMatrix;

/// Serializable description of a torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TorusSpec {
    /// C^k / (Z[i])^k with lattice generators e_1, i e_1, e_2, i e_2, ...
    Gaussian { k: usize },
    /// Explicit lattice: 2k generators, each a length-k list of [re, im].
    Lattice { k: usize, columns: Vec<Vec<[f64; 2]>> },
}

impl TorusSpec {
    pub fn build(&self) -> Result<Torus> {
        match self {
            TorusSpec::Gaussian { k } => Torus::gaussian(*k),
            TorusSpec::Lattice { k, columns } => {
                if columns.len() != 2 * k || columns.iter().any(|c| c.len() != *k) {
                    return Err(Error::Dimension(
                        "lattice needs 2k generators of length k".into(),
                    ));
                }
                let p = DMatrix::from_fn(*k, 2 * k, |i, j| {
                    Complex64::new(columns[j][i][0], columns[j][i][1])
                });
                Torus::from_periods(p)
            }
        }
    }
}

/// A torus with its period matrix and cached volume data.
#[derive(Debug, Clone)]
pub struct Torus {
    pub k: usize,
    /// k x 2k period matrix; column j is lattice generator j.
    pub periods: DMatrix<Complex64>,
    /// 2k x 2k stacked matrix [P; conj(P)].
    pub v: DMatrix<Complex64>,
    pub v_inv: DMatrix<Complex64>,
    /// Integral over the torus of dz_{1..k} wedge dzbar_{1..k}, orientation
    /// fixed so that the standard Kaehler form has positive total volume.
    pub top_const: Complex64,
}

impl Torus {
    pub fn gaussian(k: usize) -> Result<Self> {
        if k == 0 || k > 8 {
            return Err(Error::InvalidParameter("k must be in 1..=8".into()));
        }
        let p = DMatrix::from_fn(k, 2 * k, |i, j| {
            if j / 2 == i {
                if j % 2 == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 1.0)
                }
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Torus::from_periods(p)
    }

    pub fn from_periods(periods: DMatrix<Complex64>) -> Result<Self> {
        let k = periods.nrows();
        if periods.ncols() != 2 * k {
            return Err(Error::Dimension("period matrix must be k x 2k".into()));
        }
        let mut v = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            for j in 0..2 * k {
                v[(i, j)] = periods[(i, j)];
                v[(k + i, j)] = periods[(i, j)].conj();
            }
        }
        let det = v.determinant();
        if det.norm() < 1e-12 {
            return Err(Error::InvalidParameter(
                "degenerate lattice: periods do not span".into(),
            ));
        }
        let v_inv = v
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("period matrix not invertible".into()))?;
        let mut torus = Torus {
            k,
            periods,
            v,
            v_inv,
            top_const: det,
        };
        // Fix the orientation sign by the volume of the standard form.
        let vol = torus.top_integral(&omega_power(k, k));
        if vol.re < 0.0 {
            torus.top_const = -torus.top_const;
        }
        let vol = torus.top_integral(&omega_power(k, k));
        if vol.re <= 0.0 || vol.im.abs() > 1e-9 * vol.re.abs().max(1.0) {
            return Err(Error::InvalidParameter(
                "lattice volume is not positive real".into(),
            ));
        }
        Ok(torus)
    }

    /// Integral over the torus of a constant (k,k)-covector.
    pub fn top_integral(&self, comps: &[Complex64]) -> Complex64 {
        debug_assert_eq!(comps.len(), 1);
        comps[0] * self.top_const
    }

    /// Total volume against the standard form: integral of omega^k / k!.
    pub fn volume(&self) -> f64 {
        let factorial: f64 = (1..=self.k).map(|i| i as f64).product();
        self.top_integral(&omega_power(self.k, self.k)).re / factorial
    }
}

/// Components of omega^p where omega = (i/2) sum_j dz_j wedge dzbar_j.
pub fn omega_power(k: usize, p: usize) -> Vec<Complex64> {
    let mut acc = vec![Complex64::new(1.0, 0.0)]; // (0,0) scalar 1
    let mut omega = vec![Complex64::new(0.0, 0.0); covector::dim(k, 1, 1)];
    let nj = covector::binomial(k, 1);
    for j in 0..k {
        omega[j * nj + j] = Complex64::new(0.0, 0.5);
    }
    for step in 0..p {
        acc = covector::wedge_components(k, (step, step), &acc, (1, 1), &omega);
    }
    acc
}

/// An affine automorphism z -> A z + c of a torus, with its induced integer
/// action B on the real lattice coordinates and translation tau (t-coords).
#[derive(Debug, Clone)]
pub struct TorusMap {
    pub k: usize,
    /// Complex derivative, k x k.
    pub a: DMatrix<Complex64>,
    /// Induced integer matrix on R^{2k}/Z^{2k}: exact, |det| = 1.
    pub b: RealMatrix,
    /// Translation part in t-coordinates, length 2k.
    pub tau: Vec<f64>,
}

impl TorusMap {
    /// Build the map z -> A z + c, verifying that A preserves the lattice
    /// (B integer) and is invertible over it (det B = +/-1, checked exactly).
    pub fn new(torus: &Torus, a: DMatrix<Complex64>, c: &[Complex64]) -> Result<Self> {
        let k = torus.k;
        if a.nrows() != k || a.ncols() != k || c.len() != k {
            return Err(Error::Dimension("map dimensions do not match torus".into()));
        }
        // Solve V B = [A P; conj(A P)] for B; it must be integer.
        let ap = &a * &torus.periods;
        let mut rhs = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            for j in 0..2 * k {
                rhs[(i, j)] = ap[(i, j)];
                rhs[(k + i, j)] = ap[(i, j)].conj();
            }
        }
        let b_float = &torus.v_inv * rhs;
        let mut rows = vec![vec![0i64; 2 * k]; 2 * k];
        let mut residual = 0.0_f64;
        for i in 0..2 * k {
            for j in 0..2 * k {
                let v = b_float[(i, j)];
                let r = v.re.round();
                residual = residual.max((v.re - r).abs()).max(v.im.abs());
                rows[i][j] = r as i64;
            }
        }
        if residual > 1e-9 {
            return Err(Error::NotLatticeAutomorphism(format!(
                "induced lattice matrix is not integer (residual {residual:.3e})"
            )));
        }
        let b = RealMatrix::from_exact_i64(&rows);
        let det = b.det_exact()?;
        use num::{One, Signed};
        if !det.abs().is_one() {
            return Err(Error::NotAutomorphism(format!(
                "lattice determinant is {det}, not a unit"
            )));
        }
        // tau = V^{-1} (c; conj(c)) must be real.
        let mut cvec = DMatrix::zeros(2 * k, 1);
        for i in 0..k {
            cvec[(i, 0)] = c[i];
            cvec[(k + i, 0)] = c[i].conj();
        }
        let t = &torus.v_inv * cvec;
        let mut tau = Vec::with_capacity(2 * k);
        for i in 0..2 * k {
            if t[(i, 0)].im.abs() > 1e-9 {
                return Err(Error::InvalidParameter(
                    "translation is not in the real span of the lattice".into(),
                ));
            }
            tau.push(t[(i, 0)].re.rem_euclid(1.0));
        }
        Ok(TorusMap { k, a, b, tau })
    }

    /// The inverse automorphism.
    pub fn inverse(&self, torus: &Torus) -> Result<TorusMap> {
        let a_inv = self
            .a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NotAutomorphism("derivative not invertible".into()))?;
        // c' = -A^{-1} c, expressed through tau for exactness of B.
        let b_inv_f = self
            .b
            .to_float()
            .try_inverse()
            .ok_or_else(|| Error::NotAutomorphism("lattice matrix not invertible".into()))?;
        let tau_v = DMatrix::from_fn(2 * self.k, 1, |i, _| self.tau[i]);
        let tv = -&b_inv_f * tau_v;
        let c_inv: Vec<Complex64> = (0..self.k)
            .map(|i| {
                let mut z = Complex64::new(0.0, 0.0);
                for j in 0..2 * self.k {
                    z += torus.periods[(i, j)] * Complex64::new(tv[(j, 0)], 0.0);
                }
                z
            })
            .collect();
        TorusMap::new(torus, a_inv, &c_inv)
    }

    /// Phase factor picked up by the Fourier character e_m under pullback.
    pub fn pullback_phase(&self, mode: &[i64]) -> Complex64 {
        let dot: f64 = mode
            .iter()
            .zip(self.tau.iter())
            .map(|(&m, &t)| m as f64 * t)
            .sum();
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * dot)
    }

    /// Mode relabeling under pullback: f^* e_m = phase * e_{B^T m}.
    pub fn pullback_mode(&self, mode: &[i64]) -> Result<Vec<i64>> {
        self.mode_action(mode, false)
    }

    /// Mode relabeling under pushforward along f^{-1}-pullback: (B^T)^{-1} m.
    pub fn mode_action(&self, mode: &[i64], inverse: bool) -> Result<Vec<i64>> {
        let n = 2 * self.k;
        if mode.len() != n {
            return Err(Error::Dimension("mode length must be 2k".into()));
        }
        let bf = if inverse {
            self.b
                .to_float()
                .try_inverse()
                .ok_or_else(|| Error::NotAutomorphism("lattice matrix not invertible".into()))?
        } else {
            self.b.to_float()
        };
        let mut out = vec![0i64; n];
        for j in 0..n {
            // (B^T m)_j = sum_i B_ij m_i
            let mut acc = 0.0_f64;
            for i in 0..n {
                acc += bf[(i, j)] * mode[i] as f64;
            }
            let r = acc.round();
            if (acc - r).abs() > 1e-6 || r.abs() > 9.0e15 {
                return Err(Error::BidegreeOverflow {
                    p: 0,
                    q: 0,
                    k: self.k,
                });
            }
            out[j] = r as i64;
        }
        Ok(out)
    }
}

/// Serializable description of an affine torus automorphism.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapSpec {
    /// k x k complex derivative, entries as [re, im].
    pub derivative: Vec<Vec<[f64; 2]>>,
    /// Optional translation, k entries [re, im].
    #[serde(default)]
    pub translation: Option<Vec<[f64; 2]>>,
}

impl MapSpec {
    pub fn build(&self, torus: &Torus) -> Result<TorusMap> {
        let k = torus.k;
        if self.derivative.len() != k || self.derivative.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension("derivative must be k x k".into()));
        }
        let a = DMatrix::from_fn(k, k, |i, j| {
            Complex64::new(self.derivative[i][j][0], self.derivative[i][j][1])
        });
        let c: Vec<Complex64> = match &self.translation {
            Some(t) => {
                if t.len() != k {
                    return Err(Error::Dimension("translation must have k entries".into()));
                }
                t.iter().map(|e| Complex64::new(e[0], e[1])).collect()
            }
            None => vec![Complex64::new(0.0, 0.0); k],
        };
        TorusMap::new(torus, a, &c)
    }

    pub fn from_integer(rows: &[Vec<i64>]) -> Self {
        MapSpec {
            derivative: rows
                .iter()
                .map(|r| r.iter().map(|&v| [v as f64, 0.0]).collect())
                .collect(),
            translation: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_map(torus: &Torus) -> TorusMap {
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        );
        TorusMap::new(torus, a, &[Complex64::new(0.0, 0.0); 2]).unwrap()
    }

    #[test]
    fn gaussian_surface_volume() {
        let t = Torus::gaussian(2).unwrap();
        // integral of omega^2 is 2, so volume = 1.
        let w2 = omega_power(2, 2);
        let int = t.top_integral(&w2);
        assert!((int.re - 2.0).abs() < 1e-12 && int.im.abs() < 1e-12);
        assert!((t.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn worked_example_lattice_matrix() {
        let t = Torus::gaussian(2).unwrap();
        let f = worked_map(&t);
        // B acts block-wise: multiplication by a real integer matrix commutes
        // with i, so B = A tensor I_2 in the interleaved ordering.
        let b = f.b.to_float();
        assert_eq!(b.nrows(), 4);
        assert!((b[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((b[(1, 1)] - 2.0).abs() < 1e-12);
        assert!((b[(0, 2)] - 1.0).abs() < 1e-12);
        assert!((b[(2, 0)] - 1.0).abs() < 1e-12);
        use num::{One, Signed};
        assert!(f.b.det_exact().unwrap().abs().is_one());
    }

    #[test]
    fn multiplication_by_i_is_order_four() {
        let t = Torus::gaussian(1).unwrap();
        let a = DMatrix::from_element(1, 1, Complex64::new(0.0, 1.0));
        let f = TorusMap::new(&t, a, &[Complex64::new(0.0, 0.0)]).unwrap();
        let b = f.b.to_float();
        let b4 = &b * &b * &b * &b;
        assert!((b4 - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_lattice_map() {
        let t = Torus::gaussian(1).unwrap();
        let a = DMatrix::from_element(1, 1, Complex64::new(0.5, 0.0));
        assert!(TorusMap::new(&t, a, &[Complex64::new(0.0, 0.0)]).is_err());
        // det 2 over the lattice: z -> (1+i) z preserves Z[i] but is not onto.
        let a = DMatrix::from_element(1, 1, Complex64::new(1.0, 1.0));
        let err = TorusMap::new(&t, a, &[Complex64::new(0.0, 0.0)]);
        assert!(matches!(err, Err(Error::NotAutomorphism(_))));
    }

    #[test]
    fn inverse_composes_to_identity_on_modes() {
        let t = Torus::gaussian(2).unwrap();
        let f = worked_map(&t);
        let g = f.inverse(&t).unwrap();
        let m = vec![1, -2, 3, 0];
        let fwd = f.pullback_mode(&m).unwrap();
        let back = g.pullback_mode(&fwd).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn translation_phase() {
        let t = Torus::gaussian(1).unwrap();
        let a = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let f = TorusMap::new(&t, a, &[Complex64::new(0.5, 0.0)]).unwrap();
        // mode (1,0) picks up e^{pi i} = -1 under the half-period shift.
        let ph = f.pullback_phase(&[1, 0]);
        assert!((ph - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }
}
