use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quadratic monomials `x_i x_j` (`i <= j`) over a fixed-dimensional input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialBasis {
    dim: usize,
    pairs: Vec<(usize, usize)>,
}

impl MonomialBasis {
    /// All `dim (dim + 1) / 2` monomials, upper triangle in row-major order:
    /// `x₁², x₁x₂, …, x₁x_d, x₂², …`.
    pub fn full_quadratic(dim: usize) -> Self {
        let pairs = (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect();
        Self { dim, pairs }
    }

    /// The `dim` pure squares `x_i²`.
    pub fn squares(dim: usize) -> Self {
        Self { dim, pairs: (0..dim).map(|i| (i, i)).collect() }
    }

    pub fn from_pairs(dim: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for &(i, j) in &pairs {
            if i > j || j >= dim {
                return Err(Error::Domain(format!(
                    "monomial ({i}, {j}) invalid for dimension {dim} (need i <= j < dim)"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::Domain(format!("monomial ({i}, {j}) listed twice")));
            }
        }
        Ok(Self { dim, pairs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.dim);
        DVector::from_iterator(self.pairs.len(), self.pairs.iter().map(|&(i, j)| x[i] * x[j]))
    }

    /// Jacobian, one row per monomial: row for `x_i x_j` holds `x_j` in
    /// column `i` and `x_i` in column `j` (a single `2 x_i` when `i = j`).
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let mut jac = DMatrix::zeros(self.pairs.len(), self.dim);
        for (row, &(i, j)) in self.pairs.iter().enumerate() {
            if i == j {
                jac[(row, i)] = 2.0 * x[i];
            } else {
                jac[(row, i)] = x[j];
                jac[(row, j)] = x[i];
            }
        }
        jac
    }

    /// Symmetric `S` such that `xᵀ S x = wᵀ σ(x)`.
    pub fn quadratic_form(&self, weights: &DVector<f64>) -> Result<DMatrix<f64>> {
        if weights.len() != self.len() {
            return Err(Error::dims("MonomialBasis::quadratic_form", self.len(), weights.len()));
        }
        let mut s = DMatrix::zeros(self.dim, self.dim);
        for (&(i, j), &w) in self.pairs.iter().zip(weights.iter()) {
            if i == j {
                s[(i, i)] += w;
            } else {
                s[(i, j)] += 0.5 * w;
                s[(j, i)] += 0.5 * w;
            }
        }
        Ok(s)
    }

    /// Weights `w` with `wᵀ σ(x) = xᵀ S x`: `S_ii` on squares and `2 S_ij`
    /// on cross terms. Fails if `S` has entries the basis cannot represent.
    pub fn weights_of(&self, s: &DMatrix<f64>) -> Result<DVector<f64>> {
        if s.shape() != (self.dim, self.dim) {
            return Err(Error::dims("MonomialBasis::weights_of", self.dim, format!("{:?}", s.shape())));
        }
        let sym = (s + s.transpose()) * 0.5;
        let w = DVector::from_iterator(
            self.len(),
            self.pairs.iter().map(|&(i, j)| if i == j { sym[(i, i)] } else { 2.0 * sym[(i, j)] }),
        );
        let back = self.quadratic_form(&w)?;
        let scale = 1.0 + sym.amax();
        if (back - &sym).amax() > 1e-12 * scale {
            return Err(Error::Domain("quadratic form has terms outside the monomial basis".into()));
        }
        Ok(w)
    }
}

/// Feature maps of the inverse problem: value features `σ_V` over the
/// state, cost features `σ_Q` over the state, and input squares `σ_u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBasis {
    pub value: MonomialBasis,
    pub cost: MonomialBasis,
    pub inputs: usize,
}

/// Evaluated features at one `(x, u)`.
#[derive(Debug, Clone)]
pub struct Features {
    pub sigma_v: DVector<f64>,
    /// `P × 2n` Jacobian of `σ_V`.
    pub grad_sigma_v: DMatrix<f64>,
    pub sigma_q: DVector<f64>,
    pub sigma_u: DVector<f64>,
}

impl FeatureBasis {
    pub fn new(value: MonomialBasis, cost: MonomialBasis, inputs: usize) -> Result<Self> {
        if value.dim() != cost.dim() {
            return Err(Error::dims("FeatureBasis::new", value.dim(), cost.dim()));
        }
        if inputs == 0 {
            return Err(Error::Domain("at least one input required".into()));
        }
        Ok(Self { value, cost, inputs })
    }

    /// Full quadratic value basis with squared-state cost basis.
    pub fn default_for(state_dim: usize, inputs: usize) -> Self {
        Self { value: MonomialBasis::full_quadratic(state_dim), cost: MonomialBasis::squares(state_dim), inputs }
    }

    pub fn state_dim(&self) -> usize {
        self.value.dim()
    }

    /// `P`, the number of value features.
    pub fn value_len(&self) -> usize {
        self.value.len()
    }

    /// `L`, the number of cost features.
    pub fn cost_len(&self) -> usize {
        self.cost.len()
    }

    /// Unknowns in the normalized regression: `P + L + m − 1`.
    pub fn unknowns(&self) -> usize {
        self.value.len() + self.cost.len() + self.inputs - 1
    }

    pub fn eval_features(&self, x: &DVector<f64>, u: &DVector<f64>) -> Features {
        Features {
            sigma_v: self.value.eval(x),
            grad_sigma_v: self.value.jacobian(x),
            sigma_q: self.cost.eval(x),
            sigma_u: u.map(|v| v * v),
        }
    }
}
