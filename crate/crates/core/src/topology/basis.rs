use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Orthonormal split of `R^{pn}` into the consensus block `[1]` and its
/// complement `V_sync`, with `V' L V = diag(D1, D2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncBasis {
    pub p: usize,
    pub n: usize,
    /// `(1/sqrt(p)) [I_n; ...; I_n]`, `pn x n`.
    pub one_block: DMatrix<f64>,
    /// `pn x (p-1)n`, columns ordered by descending eigenvalue.
    pub v_sync: DMatrix<f64>,
    /// Tracking gain block `[1]' L [1]`.
    pub d1: DMatrix<f64>,
    /// Synchronization gain block `V_sync' L V_sync` (diagonal).
    pub d2: DMatrix<f64>,
    /// Largest entry of `[1]' L V_sync`; zero when `[1]` is an eigenblock.
    pub cross_coupling: f64,
}

impl SyncBasis {
    /// Builds the basis for a symmetric `pn x pn` matrix `l`.
    ///
    /// `V_sync` starts from a Gram-Schmidt complement of `[1]` and is then
    /// rotated onto the eigenvectors of `l`. Inside a repeated eigenvalue the
    /// Gram-Schmidt directions are projected onto the eigenspace in order, so
    /// the result does not depend on the eigensolver's arbitrary rotation.
    /// Each column's first non-negligible entry is positive.
    pub fn new(l: &DMatrix<f64>, p: usize, n: usize) -> Result<Self> {
        let dim = p * n;
        if p < 2 || n == 0 || l.nrows() != dim || l.ncols() != dim {
            return Err(Error::Dimension {
                context: "sync basis",
                expected: dim,
                actual: l.nrows(),
            });
        }
        let asym = (l - l.transpose()).amax();
        if asym > 1e-12 * l.amax().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }

        let one_block = consensus_block(p, n);
        let complement = gram_schmidt_complement(&one_block);
        let reduced = complement.transpose() * l * &complement;
        let rotation = canonical_eigenbasis(&reduced);
        let mut v_sync = &complement * rotation;
        for mut col in v_sync.column_iter_mut() {
            if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-10) {
                if first < 0.0 {
                    col.neg_mut();
                }
            }
        }

        let d1 = one_block.transpose() * l * &one_block;
        let d2 = v_sync.transpose() * l * &v_sync;
        let cross_coupling = (one_block.transpose() * l * &v_sync).amax();
        Ok(Self {
            p,
            n,
            one_block,
            v_sync,
            d1,
            d2,
            cross_coupling,
        })
    }

    /// `[ [1]  V_sync ]`, square and orthogonal.
    pub fn full(&self) -> DMatrix<f64> {
        let dim = self.p * self.n;
        let mut v = DMatrix::zeros(dim, dim);
        v.columns_mut(0, self.n).copy_from(&self.one_block);
        v.columns_mut(self.n, dim - self.n).copy_from(&self.v_sync);
        v
    }

    /// `V diag(D1, D2) V'`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let dim = self.p * self.n;
        let mut d = DMatrix::zeros(dim, dim);
        d.view_mut((0, 0), (self.n, self.n)).copy_from(&self.d1);
        d.view_mut((self.n, self.n), (dim - self.n, dim - self.n))
            .copy_from(&self.d2);
        let v = self.full();
        &v * d * v.transpose()
    }

    /// Eigenvalues of `D1`, descending.
    pub fn d1_spectrum(&self) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(self.d1.clone()).eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| b.total_cmp(a));
        e
    }

    /// Diagonal of `D2` in basis order (descending).
    pub fn d2_spectrum(&self) -> Vec<f64> {
        self.d2.diagonal().iter().copied().collect()
    }

    /// Disagreement coordinates `V_sync' x` of a stacked vector.
    pub fn project_sync(&self, stacked: &DVector<f64>) -> DVector<f64> {
        self.v_sync.transpose() * stacked
    }

    /// Common-mode coordinates `[1]' x`.
    pub fn project_common(&self, stacked: &DVector<f64>) -> DVector<f64> {
        self.one_block.transpose() * stacked
    }
}

fn consensus_block(p: usize, n: usize) -> DMatrix<f64> {
    let w = 1.0 / (p as f64).sqrt();
    DMatrix::from_fn(p * n, n, |r, c| if r % n == c { w } else { 0.0 })
}

/// Orthonormal complement of the columns of `basis`, built by Gram-Schmidt
/// over the unit vectors in index order.
fn gram_schmidt_complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = basis.nrows();
    let mut columns: Vec<DVector<f64>> = basis.column_iter().map(|c| c.into_owned()).collect();
    let start = columns.len();
    for k in 0..dim {
        if columns.len() == dim {
            break;
        }
        let mut v = DVector::zeros(dim);
        v[k] = 1.0;
        if let Some(u) = orthonormalize(v, &columns) {
            columns.push(u);
        }
    }
    DMatrix::from_columns(&columns[start..])
}

fn orthonormalize(mut v: DVector<f64>, against: &[DVector<f64>]) -> Option<DVector<f64>> {
    // Two passes keep the result orthogonal to working precision.
    for _ in 0..2 {
        for u in against {
            let c = u.dot(&v);
            v.axpy(-c, u, 1.0);
        }
    }
    let norm = v.norm();
    (norm > 1e-8).then(|| v / norm)
}

/// Orthonormal eigenvectors of a symmetric matrix, ordered by descending
/// eigenvalue, with every repeated eigenspace spanned by the projected unit
/// vectors in index order.
fn canonical_eigenbasis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let scale = eig.eigenvalues.amax().max(1.0);
    let tol = 1e-9 * scale;

    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(dim);
    let mut start = 0;
    while start < dim {
        let lead = eig.eigenvalues[order[start]];
        let mut end = start + 1;
        while end < dim && (lead - eig.eigenvalues[order[end]]).abs() <= tol {
            end += 1;
        }
        let cluster: Vec<DVector<f64>> = order[start..end]
            .iter()
            .map(|&k| eig.eigenvectors.column(k).into_owned())
            .collect();
        let mut picked: Vec<DVector<f64>> = Vec::with_capacity(cluster.len());
        for k in 0..dim {
            if picked.len() == cluster.len() {
                break;
            }
            let projected = cluster
                .iter()
                .fold(DVector::zeros(dim), |acc, w| acc + w * w[k]);
            if let Some(u) = orthonormalize(projected, &picked) {
                picked.push(u);
            }
        }
        columns.extend(picked);
        start = end;
    }
    DMatrix::from_columns(&columns)
}
