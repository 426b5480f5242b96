//! Real matrices with exact-rational or double-precision entries.
//!
//! Exact mode exists so that characteristic polynomials and lattice checks
//! of integer cohomology actions can be carried out without rounding; all
//! iterative spectral work happens in floating point.

use nalgebra::DMatrix;
use num::{BigInt, BigRational, One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Entry of a matrix in its JSON form: either a float or an exact "p/q" string.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntryRepr {
    Float(f64),
    Exact(String),
}

/// A real matrix, square in all dynamics uses.
#[derive(Debug, Clone, PartialEq)]
pub enum RealMatrix {
    Exact {
        n: usize,
        entries: Vec<BigRational>,
    },
    Float(DMatrix<f64>),
}

impl RealMatrix {
    pub fn from_float(m: DMatrix<f64>) -> Self {
        RealMatrix::Float(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let cols = if n > 0 { rows[0].len() } else { 0 };
        RealMatrix::Float(DMatrix::from_fn(n, cols, |i, j| rows[i][j]))
    }

    pub fn from_exact_i64(rows: &[Vec<i64>]) -> Self {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            for &v in row {
                entries.push(BigRational::from_integer(BigInt::from(v)));
            }
        }
        RealMatrix::Exact { n, entries }
    }

    pub fn identity(n: usize) -> Self {
        RealMatrix::Float(DMatrix::identity(n, n))
    }

    pub fn nrows(&self) -> usize {
        match self {
            RealMatrix::Exact { n, .. } => *n,
            RealMatrix::Float(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            RealMatrix::Exact { n, .. } => *n,
            RealMatrix::Float(m) => m.ncols(),
        }
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, RealMatrix::Exact { .. })
    }

    pub fn to_float(&self) -> DMatrix<f64> {
        match self {
            RealMatrix::Exact { n, entries } => DMatrix::from_fn(*n, *n, |i, j| {
                rational_to_f64(&entries[i * n + j])
            }),
            RealMatrix::Float(m) => m.clone(),
        }
    }

    /// Exact characteristic polynomial via the Faddeev-LeVerrier recursion.
    /// Returns coefficients `[1, c_1, ..., c_n]` of
    /// `lambda^n + c_1 lambda^(n-1) + ... + c_n`.
    pub fn char_poly_exact(&self) -> Result<Vec<BigRational>> {
        let entries = match self {
            RealMatrix::Exact { n, entries } => {
                if !self.is_square() {
                    return Err(Error::Dimension("char poly of non-square matrix".into()));
                }
                (*n, entries.clone())
            }
            RealMatrix::Float(m) => {
                // Rationalize; meaningful mostly for integer-valued floats.
                let n = m.nrows();
                let mut e = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        e.push(f64_to_rational(m[(i, j)])?);
                    }
                }
                (n, e)
            }
        };
        let (n, a) = entries;
        let get = |m: &[BigRational], i: usize, j: usize| m[i * n + j].clone();
        let mut coeffs = vec![BigRational::one()];
        // N = A, c_1 = -tr(N)
        let mut nmat = a.clone();
        for step in 1..=n {
            let mut tr = BigRational::zero();
            for i in 0..n {
                tr += get(&nmat, i, i);
            }
            let c = -tr / BigRational::from_integer(BigInt::from(step as i64));
            coeffs.push(c.clone());
            if step == n {
                break;
            }
            // N <- A (N + c I)
            let mut shifted = nmat.clone();
            for i in 0..n {
                shifted[i * n + i] += c.clone();
            }
            let mut next = vec![BigRational::zero(); n * n];
            for i in 0..n {
                for l in 0..n {
                    let aval = get(&a, i, l);
                    if aval.is_zero() {
                        continue;
                    }
                    for j in 0..n {
                        let s = get(&shifted, l, j);
                        if !s.is_zero() {
                            next[i * n + j] += aval.clone() * s;
                        }
                    }
                }
            }
            nmat = next;
        }
        Ok(coeffs)
    }

    /// Exact determinant: `(-1)^n c_n` from the characteristic polynomial.
    pub fn det_exact(&self) -> Result<BigRational> {
        let n = self.nrows();
        let coeffs = self.char_poly_exact()?;
        let sign = if n % 2 == 0 {
            BigRational::one()
        } else {
            -BigRational::one()
        };
        Ok(sign * coeffs[n].clone())
    }

    pub fn det(&self) -> f64 {
        self.to_float().determinant()
    }

    /// Spectral-norm surrogate: the max row sum (infinity norm).
    pub fn op_norm(&self) -> f64 {
        let m = self.to_float();
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)].abs()).sum::<f64>())
            .fold(0.0_f64, f64::max)
    }

    pub fn to_entry_rows(&self) -> Vec<Vec<EntryRepr>> {
        match self {
            RealMatrix::Exact { n, entries } => (0..*n)
                .map(|i| {
                    (0..*n)
                        .map(|j| {
                            let r = &entries[i * n + j];
                            EntryRepr::Exact(format!("{}/{}", r.numer(), r.denom()))
                        })
                        .collect()
                })
                .collect(),
            RealMatrix::Float(m) => (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| EntryRepr::Float(m[(i, j)])).collect())
                .collect(),
        }
    }

    /// Parse from JSON rows; any "p/q" string switches the matrix to exact mode.
    pub fn from_entry_rows(rows: &[Vec<EntryRepr>]) -> Result<Self> {
        let n = rows.len();
        let any_exact = rows
            .iter()
            .flatten()
            .any(|e| matches!(e, EntryRepr::Exact(_)));
        if any_exact {
            let mut entries = Vec::with_capacity(n * n);
            for row in rows {
                if row.len() != n {
                    return Err(Error::Dimension("ragged matrix rows".into()));
                }
                for e in row {
                    entries.push(match e {
                        EntryRepr::Exact(s) => parse_rational(s)?,
                        EntryRepr::Float(v) => f64_to_rational(*v)?,
                    });
                }
            }
            Ok(RealMatrix::Exact { n, entries })
        } else {
            let cols = if n > 0 { rows[0].len() } else { 0 };
            for row in rows {
                if row.len() != cols {
                    return Err(Error::Dimension("ragged matrix rows".into()));
                }
            }
            Ok(RealMatrix::Float(DMatrix::from_fn(n, cols, |i, j| {
                match &rows[i][j] {
                    EntryRepr::Float(v) => *v,
                    EntryRepr::Exact(_) => unreachable!(),
                }
            })))
        }
    }
}

impl Serialize for RealMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_entry_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RealMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<EntryRepr>>::deserialize(d)?;
        RealMatrix::from_entry_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let parts: Vec<&str> = s.split('/').collect();
    let bad = || Error::InvalidParameter(format!("cannot parse rational '{s}'"));
    match parts.len() {
        1 => {
            let n = BigInt::from_str(parts[0].trim()).map_err(|_| bad())?;
            Ok(BigRational::from_integer(n))
        }
        2 => {
            let n = BigInt::from_str(parts[0].trim()).map_err(|_| bad())?;
            let d = BigInt::from_str(parts[1].trim()).map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(n, d))
        }
        _ => Err(bad()),
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    // Scale down before converting so very large numerators stay finite.
    let numer = r.numer();
    let denom = r.denom();
    let nb = numer.bits() as i64;
    let db = denom.bits() as i64;
    if nb < 500 && db < 500 {
        let n: f64 = bigint_to_f64(numer);
        let d: f64 = bigint_to_f64(denom);
        n / d
    } else {
        let shift = (nb.max(db) - 400).max(0) as u64;
        let n = bigint_to_f64(&(numer >> shift));
        let d = bigint_to_f64(&(denom >> shift));
        n / d
    }
}

fn bigint_to_f64(b: &BigInt) -> f64 {
    use num::ToPrimitive;
    b.to_f64().unwrap_or(if b.is_negative() {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    })
}

fn f64_to_rational(v: f64) -> Result<BigRational> {
    if !v.is_finite() {
        return Err(Error::InvalidParameter("non-finite matrix entry".into()));
    }
    BigRational::from_float(v)
        .ok_or_else(|| Error::InvalidParameter("cannot rationalize entry".into()))
}
