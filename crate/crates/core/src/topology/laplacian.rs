use nalgebra::{DMatrix, DVector};

use super::{CouplingGraph, Gains};
use crate::error::{Error, Result};

/// The block matrices `L = [L^p_{K1,-K2}]` and `U = [U^p_{K2}]` of a network.
///
/// Block row `i` of `L` holds `K1` on the diagonal and `-w K2 P` for every
/// inbound link of weight `w`; an inhibitory link adds `K` to the four blocks
/// joining its two members.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedLaplacian {
    pub l: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub p: usize,
    pub n: usize,
}

impl ModifiedLaplacian {
    pub fn build(graph: &CouplingGraph, gains: &Gains) -> Result<Self> {
        gains.validate()?;
        let n = gains.dof();
        let p = graph.size();
        let selector = graph.selector(n)?;
        let coupling = gains.k2.component_mul(&selector);

        let mut l = DMatrix::zeros(p * n, p * n);
        let mut u = DMatrix::zeros(p * n, p * n);
        for i in 0..p {
            add_diag(&mut l, i, i, &gains.k1, 1.0);
            for link in graph.neighbors(i) {
                add_diag(&mut l, i, link.from, &coupling, -link.weight);
            }
            for j in 0..p {
                add_diag(&mut u, i, j, &coupling, 1.0);
            }
        }
        if let Some((a, b)) = graph.inhibitory_link() {
            let k = gains.k_inhib.as_ref().ok_or_else(|| {
                Error::Gains("an inhibitory link needs a K_inhib gain".into())
            })?;
            for (r, c) in [(a, a), (a, b), (b, a), (b, b)] {
                let mut block = l.view_mut((r * n, c * n), (n, n));
                block += k;
            }
        }
        Ok(Self { l, u, p, n })
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.l - self.l.transpose()).amax()
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry() <= 1e-12 * self.l.amax().max(1.0)
    }

    /// `(L + L') / 2`, the matrix whose definiteness governs a digraph.
    pub fn symmetrized(&self) -> DMatrix<f64> {
        (&self.l + self.l.transpose()) * 0.5
    }

    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.l.view((i * self.n, j * self.n), (self.n, self.n)).into_owned()
    }
}

fn add_diag(m: &mut DMatrix<f64>, bi: usize, bj: usize, diag: &DVector<f64>, scale: f64) {
    let n = diag.len();
    for k in 0..n {
        m[(bi * n + k, bj * n + k)] += scale * diag[k];
    }
}
