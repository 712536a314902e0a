//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::multilinear::{dot, norm};

pub fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn frobenius(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Orthonormal basis of `{w : ⟨rᵢ, w⟩ = 0 ∀i}` for the given rows.
///
/// Gram–Schmidt over the rows followed by the standard basis, greedily
/// picking the candidate with the largest remaining component. Each output
/// vector is oriented so its largest-magnitude entry is positive. Returns an
/// error if the rows are rank deficient relative to `tol`.
pub fn orthonormal_complement(rows: &[Vec<f64>], n: usize, tol: f64) -> Result<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let scale = rows.iter().map(|r| norm(r)).fold(1.0, f64::max);
    let project_out = |v: &mut Vec<f64>, basis: &[Vec<f64>]| {
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for b in basis {
                let c = dot(v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
    };
    for r in rows {
        let mut v = r.clone();
        project_out(&mut v, &basis);
        let vn = norm(&v);
        if vn <= tol * scale {
            return Err(Error::DegenerateFrame(format!(
                "constraint rows are dependent (residual {vn:e})"
            )));
        }
        v.iter_mut().for_each(|x| *x /= vn);
        basis.push(v);
    }
    let k = basis.len();
    let mut candidates: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    while basis.len() < n {
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for (idx, c) in candidates.iter().enumerate() {
            let mut v = c.clone();
            project_out(&mut v, &basis);
            let vn = norm(&v);
            if best.as_ref().is_none_or(|b| vn > b.2 + 1e-12) {
                best = Some((idx, v, vn));
            }
        }
        let (idx, mut v, vn) = best.expect("standard basis spans the space");
        candidates.remove(idx);
        v.iter_mut().for_each(|x| *x /= vn);
        basis.push(v);
    }
    let mut complement = basis.split_off(k);
    for v in &mut complement {
        let lead = v.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(complement)
}

/// Eigenvalues of a real square matrix, sorted by |Re|, then |Im|, then Im.
pub fn eigenvalues(rows: &[Vec<f64>]) -> Vec<Complex<f64>> {
    let m = to_matrix(rows);
    let mut ev: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    sort_spectrum(&mut ev);
    ev
}

pub fn sort_spectrum(ev: &mut [Complex<f64>]) {
    ev.sort_by(|a, b| {
        a.re.abs()
            .total_cmp(&b.re.abs())
            .then(a.im.abs().total_cmp(&b.im.abs()))
            .then(a.im.total_cmp(&b.im))
            .then(a.re.total_cmp(&b.re))
    });
}

/// Smallest achievable maximum distance over all pairings of two multisets.
pub fn multiset_mismatch(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    if n > 8 {
        // greedy pairing for large spectra
        let mut used = vec![false; n];
        let mut worst = 0.0f64;
        for x in a {
            let (j, d) = b
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, y)| (j, (x - y).norm()))
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap();
            used[j] = true;
            worst = worst.max(d);
        }
        return worst;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let d = p
            .iter()
            .enumerate()
            .map(|(i, j)| (a[i] - b[*j]).norm())
            .fold(0.0f64, f64::max);
        best = best.min(d);
    });
    best
}

fn permute(p: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// Least-squares solution of `A x ≈ b` via SVD.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone()
        .svd(true, true)
        .solve(b, 1e-14)
        .map_err(|e| Error::DegenerateFrame(e.to_string()))
}
