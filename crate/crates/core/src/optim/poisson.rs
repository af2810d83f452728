//! Finite element Laplacian on a field grid, used to smooth raw gradients.

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Error, Result};
use crate::pgrid::Domain;

/// Factorized stiffness matrices, one per field component. Component `k` has
/// homogeneous Dirichlet conditions on the faces normal to axis `k` and
/// natural conditions elsewhere; Dirichlet rows and columns are replaced by
/// identity rows.
pub struct PoissonSolver {
    domain: Domain,
    matrices: Vec<CscMatrix<f64>>,
    factors: Vec<CscCholesky<f64>>,
}

impl std::fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonSolver").field("domain", &self.domain).finish_non_exhaustive()
    }
}

impl PoissonSolver {
    pub fn new(domain: &Domain) -> Result<Self> {
        let mut matrices = Vec::with_capacity(domain.dim());
        let mut factors = Vec::with_capacity(domain.dim());
        for k in 0..domain.dim() {
            let m = assemble(domain, k);
            let f = CscCholesky::factor(&m).map_err(|e| Error::Numerical {
                stage: "stiffness factorization",
                detail: format!("{e:?}"),
            })?;
            matrices.push(m);
            factors.push(f);
        }
        Ok(Self { domain: domain.clone(), matrices, factors })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// `K_k^{-1} g`.
    pub fn solve(&self, component: usize, g: &[f64]) -> Result<Vec<f64>> {
        self.check(component, g)?;
        let b = DMatrix::from_column_slice(g.len(), 1, g);
        let x = self.factors[component].solve(&b);
        Ok(x.as_slice().to_vec())
    }

    /// `K_k v`.
    pub fn apply(&self, component: usize, v: &[f64]) -> Result<Vec<f64>> {
        self.check(component, v)?;
        let m = &self.matrices[component];
        let mut out = vec![0.0; v.len()];
        for (col, lane) in m.col_iter().enumerate() {
            for (&row, &val) in lane.row_indices().iter().zip(lane.values()) {
                out[row] += val * v[col];
            }
        }
        Ok(out)
    }

    fn check(&self, component: usize, v: &[f64]) -> Result<()> {
        if component >= self.factors.len() {
            return Err(Error::IndexOutOfRange { index: component, len: self.factors.len() });
        }
        if v.len() != self.domain.node_count() {
            return Err(Error::ShapeMismatch(format!(
                "load of length {} on a grid with {} nodes",
                v.len(),
                self.domain.node_count()
            )));
        }
        Ok(())
    }
}

fn assemble(domain: &Domain, component: usize) -> CscMatrix<f64> {
    let n = domain.node_count();
    let dirichlet: Vec<bool> = (0..n).map(|i| domain.on_normal_boundary(i, component)).collect();
    let mut coo = CooMatrix::new(n, n);
    let mut push = |i: usize, j: usize, v: f64| {
        if !dirichlet[i] && !dirichlet[j] {
            coo.push(i, j, v);
        }
    };
    if domain.dim() == 1 {
        let h = domain.spacing(0);
        for c in 0..domain.cells()[0] {
            push(c, c, 1.0 / h);
            push(c + 1, c + 1, 1.0 / h);
            push(c, c + 1, -1.0 / h);
            push(c + 1, c, -1.0 / h);
        }
    } else {
        let (hx, hy) = (domain.spacing(0), domain.spacing(1));
        // bilinear element: (hy/hx) A ⊗ M + (hx/hy) M ⊗ A on the unit cell
        let a = [[1.0, -1.0], [-1.0, 1.0]];
        let m = [[2.0 / 6.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 6.0]];
        for j in 0..domain.cells()[1] {
            for i in 0..domain.cells()[0] {
                let local = |l: usize| domain.node_index(i + (l & 1), j + (l >> 1));
                for p in 0..4 {
                    for q in 0..4 {
                        let (px, py, qx, qy) = (p & 1, p >> 1, q & 1, q >> 1);
                        let v = hy / hx * a[px][qx] * m[py][qy] + hx / hy * m[px][qx] * a[py][qy];
                        push(local(p), local(q), v);
                    }
                }
            }
        }
    }
    for (i, &d) in dirichlet.iter().enumerate() {
        if d {
            coo.push(i, i, 1.0);
        }
    }
    CscMatrix::from(&coo)
}
