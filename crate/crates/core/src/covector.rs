//! Exterior algebra of constant (p,q)-covectors on C^k.
//!
//! A basis covector is dz_I wedge dzbar_J with I, J subsets of {0..k-1}
//! stored as bitmasks, dz factors first in increasing order, then dzbar
//! factors in increasing order. Components of a (p,q)-element are indexed
//! by (position of I in the sorted p-subset list) * C(k,q) + (position of J).

use nalgebra::DMatrix;
use num_complex::Complex64;

pub fn binomial(n: usize, r: usize) -> usize {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc = 1usize;
    for i in 0..r {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Sorted list of bitmasks with exactly `p` bits among `k`, ascending as integers.
pub fn subsets(k: usize, p: usize) -> Vec<u16> {
    let mut out = Vec::with_capacity(binomial(k, p));
    for mask in 0u16..(1 << k) {
        if mask.count_ones() as usize == p {
            out.push(mask);
        }
    }
    out
}

pub fn subset_index(k: usize, mask: u16) -> usize {
    let p = mask.count_ones() as usize;
    subsets(k, p).iter().position(|&m| m == mask).expect("mask in list")
}

/// Dimension of the (p,q)-component space.
pub fn dim(k: usize, p: usize, q: usize) -> usize {
    binomial(k, p) * binomial(k, q)
}

/// Sign of merging two disjoint ascending index sets into one ascending set,
/// or None if they intersect.
fn merge_sign(a: u16, b: u16) -> Option<i32> {
    if a & b != 0 {
        return None;
    }
    // Inversions: for each element of b, count elements of a above it.
    let mut inversions = 0u32;
    let mut bb = b;
    while bb != 0 {
        let low = bb.trailing_zeros();
        let above = a >> (low + 1);
        inversions += above.count_ones();
        bb &= bb - 1;
    }
    Some(if inversions % 2 == 0 { 1 } else { -1 })
}

/// Wedge of basis covectors (I1,J1) and (I2,J2): target masks and sign.
pub fn wedge_basis(
    i1: u16,
    j1: u16,
    i2: u16,
    j2: u16,
) -> Option<(u16, u16, i32)> {
    let si = merge_sign(i1, i2)?;
    let sj = merge_sign(j1, j2)?;
    // Moving the dz factors of the second covector across the dzbar factors
    // of the first one costs (-1)^(p2*q1).
    let p2 = i2.count_ones();
    let q1 = j1.count_ones();
    let cross = if (p2 * q1) % 2 == 0 { 1 } else { -1 };
    Some((i1 | i2, j1 | j2, si * sj * cross))
}

/// Wedge of two component vectors: (p1,q1) x (p2,q2) -> (p1+p2, q1+q2).
pub fn wedge_components(
    k: usize,
    bideg1: (usize, usize),
    c1: &[Complex64],
    bideg2: (usize, usize),
    c2: &[Complex64],
) -> Vec<Complex64> {
    let (p1, q1) = bideg1;
    let (p2, q2) = bideg2;
    let is1 = subsets(k, p1);
    let js1 = subsets(k, q1);
    let is2 = subsets(k, p2);
    let js2 = subsets(k, q2);
    let is_out = subsets(k, p1 + p2);
    let js_out = subsets(k, q1 + q2);
    let mut out = vec![Complex64::new(0.0, 0.0); is_out.len() * js_out.len()];
    for (ai, &i1) in is1.iter().enumerate() {
        for (aj, &j1) in js1.iter().enumerate() {
            let v1 = c1[ai * js1.len() + aj];
            if v1.norm_sqr() == 0.0 {
                continue;
            }
            for (bi, &i2) in is2.iter().enumerate() {
                for (bj, &j2) in js2.iter().enumerate() {
                    let v2 = c2[bi * js2.len() + bj];
                    if v2.norm_sqr() == 0.0 {
                        continue;
                    }
                    if let Some((im, jm, sign)) = wedge_basis(i1, j1, i2, j2) {
                        let oi = is_out.iter().position(|&m| m == im).unwrap();
                        let oj = js_out.iter().position(|&m| m == jm).unwrap();
                        out[oi * js_out.len() + oj] += v1 * v2 * sign as f64;
                    }
                }
            }
        }
    }
    out
}

/// Complex conjugation on a (p,q)-component vector; result lives in (q,p).
pub fn conjugate_components(
    k: usize,
    bideg: (usize, usize),
    c: &[Complex64],
) -> Vec<Complex64> {
    let (p, q) = bideg;
    let is = subsets(k, p);
    let js = subsets(k, q);
    let is_out = subsets(k, q);
    let js_out = subsets(k, p);
    let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
    let mut out = vec![Complex64::new(0.0, 0.0); is_out.len() * js_out.len()];
    for (ai, &i) in is.iter().enumerate() {
        for (aj, &j) in js.iter().enumerate() {
            let v = c[ai * js.len() + aj];
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let oi = is_out.iter().position(|&m| m == j).unwrap();
            let oj = js_out.iter().position(|&m| m == i).unwrap();
            out[oi * js_out.len() + oj] += v.conj() * sign;
        }
    }
    out
}

/// Minor of a complex matrix: rows and columns selected by bitmasks.
pub fn minor(a: &DMatrix<Complex64>, rows: u16, cols: u16) -> Complex64 {
    let ridx: Vec<usize> = (0..a.nrows()).filter(|i| rows & (1 << i) != 0).collect();
    let cidx: Vec<usize> = (0..a.ncols()).filter(|j| cols & (1 << j) != 0).collect();
    debug_assert_eq!(ridx.len(), cidx.len());
    let n = ridx.len();
    let sub = DMatrix::from_fn(n, n, |i, j| a[(ridx[i], cidx[j])]);
    match n {
        0 => Complex64::new(1.0, 0.0),
        1 => sub[(0, 0)],
        2 => sub[(0, 0)] * sub[(1, 1)] - sub[(0, 1)] * sub[(1, 0)],
        _ => sub.determinant(),
    }
}

/// Matrix of the pullback action on (p,q)-components induced by the complex
/// linear map with matrix `a`: dz_i -> sum_j a[i][j] dz_j.
///
/// Entry ((I,J),(I',J')) = det(a[I,I']) * conj(det(a[J,J'])).
pub fn pullback_action(
    k: usize,
    a: &DMatrix<Complex64>,
    p: usize,
    q: usize,
) -> DMatrix<Complex64> {
    let is = subsets(k, p);
    let js = subsets(k, q);
    let d = is.len() * js.len();
    let mut out = DMatrix::zeros(d, d);
    // Cache the p- and q-minors once.
    let pm: Vec<Vec<Complex64>> = is
        .iter()
        .map(|&i| is.iter().map(|&i2| minor(a, i, i2)).collect())
        .collect();
    let qm: Vec<Vec<Complex64>> = js
        .iter()
        .map(|&j| js.iter().map(|&j2| minor(a, j, j2).conj()).collect())
        .collect();
    for (ri, _) in is.iter().enumerate() {
        for (rj, _) in js.iter().enumerate() {
            for (ci, _) in is.iter().enumerate() {
                for (cj, _) in js.iter().enumerate() {
                    out[(ri * js.len() + rj, ci * js.len() + cj)] = pm[ri][ci] * qm[rj][cj];
                }
            }
        }
    }
    out
}

/// One vector of the real basis of the (p,p)-space, as sparse complex components.
#[derive(Debug, Clone)]
pub struct RealBasisVector {
    pub terms: Vec<(usize, Complex64)>,
}

/// Real basis of the real (p,p)-covectors, in a fixed lexicographic order:
/// for each p-subset I (ascending), first the diagonal vector from
/// dz_I dzbar_I, then for each J > I the symmetric and antisymmetric
/// combinations of dz_I dzbar_J and dz_J dzbar_I.
pub fn real_basis(k: usize, p: usize) -> Vec<RealBasisVector> {
    let is = subsets(k, p);
    let c = Complex64::i().powu((p * p) as u32);
    let nj = is.len();
    let comp = |a: usize, b: usize| a * nj + b;
    let mut out = Vec::with_capacity(nj * nj);
    for a in 0..nj {
        out.push(RealBasisVector {
            terms: vec![(comp(a, a), c)],
        });
        for b in (a + 1)..nj {
            out.push(RealBasisVector {
                terms: vec![(comp(a, b), c), (comp(b, a), c)],
            });
            out.push(RealBasisVector {
                terms: vec![
                    (comp(a, b), Complex64::i() * c),
                    (comp(b, a), -Complex64::i() * c),
                ],
            });
        }
    }
    out
}

/// Express a real (p,p)-element given by complex components in the real basis.
/// Returns the coordinate vector; imaginary residuals are reported back.
pub fn real_coordinates(k: usize, p: usize, comps: &[Complex64]) -> (Vec<f64>, f64) {
    let is = subsets(k, p);
    let c = Complex64::i().powu((p * p) as u32);
    let nj = is.len();
    let comp = |a: usize, b: usize| a * nj + b;
    let mut coords = Vec::with_capacity(nj * nj);
    let mut imag_residual = 0.0_f64;
    for a in 0..nj {
        let lw = comps[comp(a, a)] / c;
        imag_residual = imag_residual.max(lw.im.abs());
        coords.push(lw.re);
        for b in (a + 1)..nj {
            let x = comps[comp(a, b)];
            let y = comps[comp(b, a)];
            let lu = (x + y) / (2.0 * c);
            let lv = (x - y) / (2.0 * Complex64::i() * c);
            imag_residual = imag_residual.max(lu.im.abs()).max(lv.im.abs());
            coords.push(lu.re);
            coords.push(lv.re);
        }
    }
    (coords, imag_residual)
}

/// Inverse of `real_coordinates`: assemble complex components.
pub fn complex_components(k: usize, p: usize, coords: &[f64]) -> Vec<Complex64> {
    let basis = real_basis(k, p);
    let d = dim(k, p, p);
    let mut out = vec![Complex64::new(0.0, 0.0); d];
    for (vec, &coord) in basis.iter().zip(coords.iter()) {
        for &(idx, val) in &vec.terms {
            out[idx] += val * coord;
        }
    }
    out
}
