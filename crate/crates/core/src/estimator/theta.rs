use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Stacked dynamics parameters `[vec(A₁); vec(A₂); vec(B)]` (column-major
/// vectorization), length `2n² + mn`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector {
    n: usize,
    m: usize,
    values: DVector<f64>,
}

impl ThetaVector {
    pub fn len_for(n: usize, m: usize) -> usize {
        2 * n * n + m * n
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self { n, m, values: DVector::zeros(Self::len_for(n, m)) }
    }

    pub fn from_vector(n: usize, m: usize, values: DVector<f64>) -> Result<Self> {
        if values.len() != Self::len_for(n, m) {
            return Err(Error::dims("ThetaVector::from_vector", Self::len_for(n, m), values.len()));
        }
        Ok(Self { n, m, values })
    }

    /// Builds θ from `A = [A₁, A₂]` (`n × 2n`) and `B` (`n × m`).
    pub fn from_matrices(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        if a.ncols() != 2 * n || b.nrows() != n {
            return Err(Error::dims(
                "ThetaVector::from_matrices",
                format!("A {n}x{} and B {n}xm", 2 * n),
                format!("A {:?}, B {:?}", a.shape(), b.shape()),
            ));
        }
        let values = DVector::from_iterator(Self::len_for(n, m), a.as_slice().iter().chain(b.as_slice()).copied());
        Ok(Self { n, m, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.values
    }

    pub fn a1(&self) -> DMatrix<f64> {
        let nn = self.n * self.n;
        DMatrix::from_column_slice(self.n, self.n, &self.values.as_slice()[..nn])
    }

    pub fn a2(&self) -> DMatrix<f64> {
        let nn = self.n * self.n;
        DMatrix::from_column_slice(self.n, self.n, &self.values.as_slice()[nn..2 * nn])
    }

    /// `A = [A₁, A₂]`.
    pub fn a(&self) -> DMatrix<f64> {
        let nn = self.n * self.n;
        DMatrix::from_column_slice(self.n, 2 * self.n, &self.values.as_slice()[..2 * nn])
    }

    pub fn b(&self) -> DMatrix<f64> {
        let nn = self.n * self.n;
        DMatrix::from_column_slice(self.n, self.m, &self.values.as_slice()[2 * nn..])
    }

    /// `A′ = [[0, 1], [A₁, A₂]]`.
    pub fn a_prime(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut ap = DMatrix::zeros(2 * n, 2 * n);
        ap.view_mut((0, n), (n, n)).fill_with_identity();
        ap.view_mut((n, 0), (n, 2 * n)).copy_from(&self.a());
        ap
    }

    /// `B′ = [0; B]`.
    pub fn b_prime(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut bp = DMatrix::zeros(2 * n, self.m);
        bp.view_mut((n, 0), (n, self.m)).copy_from(&self.b());
        bp
    }
}
