//! Thin layer over the dense Hermitian eigensolver plus block-structured
//! eigenbases.

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};

/// Eigenvectors of a real symmetric or complex Hermitian matrix, stored
/// column-wise.
#[derive(Debug, Clone)]
pub enum EigenVectors {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

impl EigenVectors {
    pub fn nrows(&self) -> usize {
        match self {
            Self::Real(m) => m.nrows(),
            Self::Complex(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Self::Real(m) => m.ncols(),
            Self::Complex(m) => m.ncols(),
        }
    }

    pub fn column(&self, k: usize) -> Vec<c64> {
        match self {
            Self::Real(m) => m
                .col_as_slice(k)
                .iter()
                .map(|&v| c64::new(v, 0.0))
                .collect(),
            Self::Complex(m) => m.col_as_slice(k).to_vec(),
        }
    }

    /// `⟨v_k|x⟩` for one column.
    pub fn dot_column(&self, k: usize, x: &[c64]) -> c64 {
        match self {
            Self::Real(m) => m.col_as_slice(k).iter().zip(x).map(|(&v, a)| a * v).sum(),
            Self::Complex(m) => m
                .col_as_slice(k)
                .iter()
                .zip(x)
                .map(|(v, a)| v.conj() * a)
                .sum(),
        }
    }

    /// `out += c · v_k`.
    pub fn axpy_column(&self, k: usize, c: c64, out: &mut [c64]) {
        match self {
            Self::Real(m) => {
                for (o, &v) in out.iter_mut().zip(m.col_as_slice(k)) {
                    *o += c * v;
                }
            }
            Self::Complex(m) => {
                for (o, &v) in out.iter_mut().zip(m.col_as_slice(k)) {
                    *o += c * v;
                }
            }
        }
    }
}

pub fn eigh_real(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let e = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("{e:?}")))?;
    let vals = e.S().column_vector().iter().copied().collect();
    Ok((vals, e.U().to_owned()))
}

pub fn eigh_complex(m: &Mat<c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let e = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("{e:?}")))?;
    let vals = e.S().column_vector().iter().map(|v| v.re).collect();
    Ok((vals, e.U().to_owned()))
}

pub fn eigvalsh_complex(m: &Mat<c64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("{e:?}")))
}

pub fn eigvalsh_real(m: &Mat<f64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("{e:?}")))
}

/// Largest `|m_ij - conj(m_ji)|`.
pub fn hermitian_defect(m: &Mat<c64>) -> f64 {
    let n = m.nrows();
    let mut d = 0.0f64;
    for j in 0..n {
        for i in j..n {
            d = d.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    d
}

/// Eigenvectors of one diagonal block, living on a subset of basis states.
#[derive(Debug, Clone)]
pub struct EigenBlock {
    /// Basis-state indices spanned by the block, ascending.
    pub support: Vec<usize>,
    pub values: Vec<f64>,
    pub vectors: EigenVectors,
}

/// Orthonormal eigenbasis assembled from one or more blocks, indexed in
/// ascending eigenvalue order.
#[derive(Debug, Clone)]
pub struct Eigenbasis {
    dim: usize,
    blocks: Vec<EigenBlock>,
    /// Global level -> (block, column).
    order: Vec<(usize, usize)>,
}

impl Eigenbasis {
    /// Ties keep block order, so earlier blocks come first.
    pub fn new(dim: usize, blocks: Vec<EigenBlock>) -> Self {
        let mut order: Vec<(usize, usize)> = blocks
            .iter()
            .enumerate()
            .flat_map(|(b, blk)| (0..blk.values.len()).map(move |c| (b, c)))
            .collect();
        order.sort_by(|&(b1, c1), &(b2, c2)| {
            blocks[b1].values[c1]
                .total_cmp(&blocks[b2].values[c2])
                .then(b1.cmp(&b2))
        });
        Self { dim, blocks, order }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn blocks(&self) -> &[EigenBlock] {
        &self.blocks
    }

    /// (block, column) of global level `k`.
    pub fn locate(&self, k: usize) -> (usize, usize) {
        self.order[k]
    }

    pub fn value(&self, k: usize) -> f64 {
        let (b, c) = self.order[k];
        self.blocks[b].values[c]
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.value(k)).collect()
    }

    /// Full-length amplitudes of eigenvector `k`.
    pub fn vector(&self, k: usize) -> Vec<c64> {
        let (b, c) = self.order[k];
        let blk = &self.blocks[b];
        let col = blk.vectors.column(c);
        let mut out = vec![c64::default(); self.dim];
        for (&i, v) in blk.support.iter().zip(col) {
            out[i] = v;
        }
        out
    }

    /// `⟨v_k|x⟩` for every level, in global order.
    pub fn project(&self, x: &[c64]) -> Vec<c64> {
        let mut per_block: Vec<Vec<c64>> = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let xs: Vec<c64> = blk.support.iter().map(|&i| x[i]).collect();
            per_block.push(
                (0..blk.values.len())
                    .map(|c| blk.vectors.dot_column(c, &xs))
                    .collect(),
            );
        }
        self.order.iter().map(|&(b, c)| per_block[b][c]).collect()
    }

    /// `Σ_k c_k v_k`, coefficients in global order.
    pub fn combine(&self, coeffs: &[c64]) -> Vec<c64> {
        let mut per_block: Vec<Vec<c64>> = self
            .blocks
            .iter()
            .map(|b| vec![c64::default(); b.support.len()])
            .collect();
        for (&(b, c), &a) in self.order.iter().zip(coeffs) {
            if a != c64::default() {
                self.blocks[b].vectors.axpy_column(c, a, &mut per_block[b]);
            }
        }
        let mut out = vec![c64::default(); self.dim];
        for (blk, vals) in self.blocks.iter().zip(per_block) {
            for (&i, v) in blk.support.iter().zip(vals) {
                out[i] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorted_and_orthonormal() {
        let m = Mat::<c64>::from_fn(4, 4, |i, j| {
            if i == j {
                c64::new(i as f64, 0.0)
            } else if i < j {
                c64::new(0.1, 0.2 * (j - i) as f64)
            } else {
                c64::new(0.1, -0.2 * (i - j) as f64)
            }
        });
        let (vals, vecs) = eigh_complex(&m).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for a in 0..4 {
            for b in 0..4 {
                let ov: c64 = (0..4).map(|i| vecs[(i, a)].conj() * vecs[(i, b)]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ov - c64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn blocks_project_and_combine_round_trip() {
        let b0 = EigenBlock {
            support: vec![0, 3],
            values: vec![-1.0, 1.0],
            vectors: EigenVectors::Real(Mat::from_fn(2, 2, |i, j| {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                if i == 1 && j == 1 {
                    -s
                } else {
                    s
                }
            })),
        };
        let b1 = EigenBlock {
            support: vec![1, 2],
            values: vec![-1.0, 0.5],
            vectors: EigenVectors::Real(Mat::identity(2, 2)),
        };
        let basis = Eigenbasis::new(4, vec![b0, b1]);
        assert_eq!(basis.values(), vec![-1.0, -1.0, 0.5, 1.0]);
        assert_eq!(basis.locate(0), (0, 0));
        assert_eq!(basis.locate(1), (1, 0));
        let x: Vec<c64> = (0..4).map(|k| c64::new(k as f64, 1.0)).collect();
        let back = basis.combine(&basis.project(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
