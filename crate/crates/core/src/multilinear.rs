//! Decomposable k-vectors `v₁∧…∧v_k` in ℝⁿ.
//!
//! Inner products of k-vectors are Gram determinants,
//! `⟨u₁∧…∧u_k, v₁∧…∧v_k⟩ = det[⟨uᵢ, vⱼ⟩]`, and the Hodge complement of an
//! (n−1)-frame is the generalized cross product, oriented so that
//! `⟨⋆U, x⟩ = det(u₁, …, u_{n−1}, x)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default relative tolerance for dependence tests.
pub const DEFAULT_FRAME_TOL: f64 = 1e-9;

/// An ordered list of `k` vectors in ℝⁿ, `1 ≤ k ≤ n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    vectors: Vec<Vec<f64>>,
}

impl Frame {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let k = vectors.len();
        if k == 0 {
            return Err(Error::Dimension("a frame needs at least one vector".into()));
        }
        let n = vectors[0].len();
        if vectors.iter().any(|v| v.len() != n) {
            return Err(Error::Dimension("frame vectors differ in length".into()));
        }
        if k > n {
            return Err(Error::Dimension(format!("{k} vectors in dimension {n}")));
        }
        Ok(Frame { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// k×n matrix with the frame vectors as rows.
    pub fn to_rows(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.dim(), |i, j| self.vectors[i][j])
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `⟨U, V⟩_k = det[⟨uᵢ, vⱼ⟩]`.
pub fn gram_inner(u: &Frame, v: &Frame) -> Result<f64> {
    if u.len() != v.len() || u.dim() != v.dim() {
        return Err(Error::Dimension(format!(
            "frames of shape {}x{} and {}x{}",
            u.len(),
            u.dim(),
            v.len(),
            v.dim()
        )));
    }
    let k = u.len();
    let m = DMatrix::from_fn(k, k, |i, j| dot(&u.vectors[i], &v.vectors[j]));
    Ok(m.determinant())
}

/// k-volume `‖U‖_k = √⟨U, U⟩_k`.
pub fn frame_volume(u: &Frame) -> f64 {
    // the Gram determinant is ≥ 0 in exact arithmetic
    gram_inner(u, u).map(|g| g.max(0.0).sqrt()).unwrap_or(0.0)
}

/// Singular values of the k×n row matrix, descending.
pub fn singular_values(u: &Frame) -> Vec<f64> {
    let mut s: Vec<f64> = u.to_rows().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// True iff `σ_min ≤ tol · σ_max` (σ_max taken as 1 for an all-zero frame).
pub fn frame_dependent(u: &Frame, tol: f64) -> bool {
    let s = singular_values(u);
    let largest = s[0];
    let smallest = *s.last().unwrap();
    let reference = if largest == 0.0 { 1.0 } else { largest };
    smallest <= tol * reference
}

/// Dependence with an additional absolute floor `σ_min ≤ tol · scale`.
///
/// A single short vector is never relatively dependent; the floor catches
/// gradients that vanish.
pub fn frame_degenerate(u: &Frame, tol: f64, scale: f64) -> bool {
    frame_dependent(u, tol) || *singular_values(u).last().unwrap() <= tol * scale
}

/// Hodge complement `⋆(u₁∧…∧u_{n−1})`.
pub fn hodge_complement(u: &Frame) -> Result<Vec<f64>> {
    let n = u.dim();
    if u.len() + 1 != n {
        return Err(Error::Dimension(format!(
            "hodge complement needs n-1 = {} vectors, got {}",
            n - 1,
            u.len()
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    for (i, v) in u.vectors.iter().enumerate() {
        for (j, x) in v.iter().enumerate() {
            m[(i, j)] = *x;
        }
    }
    Ok((0..n)
        .map(|i| {
            let mut mi = m.clone();
            mi[(n - 1, i)] = 1.0;
            mi.determinant()
        })
        .collect())
}
