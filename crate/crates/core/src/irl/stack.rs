//! History stack of regression row blocks with condition-number-driven
//! data selection and the least-squares weight solve.

use nalgebra::{DMatrix, DVector};

use super::basis::FeatureBasis;
use super::rows::WeightVector;
use crate::error::{Error, Result};
use crate::numerics::{condition_number, least_squares, numerical_rank};

/// One recorded data point: its row block, right-hand side, the estimate
/// quality at recording time, and the recording time.
#[derive(Debug, Clone, PartialEq)]
pub struct IrlEntry {
    pub rows: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub eta: f64,
    pub t: f64,
}

/// Stacked regression `Σ̂ W = −Σ_u1` over at most `capacity` entries.
///
/// `Σ̂`, `Σ_u1` and `κ(Σ̂)` are recomputed on every mutation.
#[derive(Debug, Clone)]
pub struct IrlHistoryStack {
    capacity: usize,
    unknowns: usize,
    xi1: f64,
    xi2: f64,
    entries: Vec<IrlEntry>,
    sigma: DMatrix<f64>,
    sigma_u1: DVector<f64>,
    gram: DMatrix<f64>,
    kappa: f64,
}

fn gram_condition(g: &DMatrix<f64>) -> f64 {
    let e = g.clone().symmetric_eigenvalues();
    let (lo, hi) = (e.min(), e.max());
    if !(hi > 0.0) || lo <= hi * 1e-15 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

impl IrlHistoryStack {
    /// `xi1` is the required improvement factor of `κ(Σ̂ᵀΣ̂)` for a
    /// replacement, `xi2` the minimum norm of `Σ_u1`.
    pub fn new(capacity: usize, basis: &FeatureBasis, xi1: f64, xi2: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("N", "history stack capacity must be positive"));
        }
        if !(xi1 > 0.0) {
            return Err(Error::config("xi1", format!("must be positive, got {xi1}")));
        }
        if !(xi2 > 0.0) {
            return Err(Error::config("xi2", format!("must be positive, got {xi2}")));
        }
        let unknowns = basis.unknowns();
        Ok(Self {
            capacity,
            unknowns,
            xi1,
            xi2,
            entries: Vec::with_capacity(capacity),
            sigma: DMatrix::zeros(0, unknowns),
            sigma_u1: DVector::zeros(0),
            gram: DMatrix::zeros(unknowns, unknowns),
            kappa: f64::INFINITY,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn xi1(&self) -> f64 {
        self.xi1
    }

    pub fn xi2(&self) -> f64 {
        self.xi2
    }

    pub fn entries(&self) -> &[IrlEntry] {
        &self.entries
    }

    /// Stacked `Σ̂`.
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Stacked `Σ_u1` (the negated right-hand sides).
    pub fn sigma_u1(&self) -> &DVector<f64> {
        &self.sigma_u1
    }

    /// `κ(Σ̂)`; infinite while `Σ̂` lacks full column rank.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `κ(Σ̂ᵀΣ̂) = κ(Σ̂)²`, the quantity the selection and purge rules use.
    pub fn kappa_gram(&self) -> f64 {
        self.kappa * self.kappa
    }

    /// Minimum stored quality score; infinite when empty.
    pub fn eta_bar(&self) -> f64 {
        self.entries.iter().map(|e| e.eta).fold(f64::INFINITY, f64::min)
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.rebuild();
    }

    fn rebuild(&mut self) {
        let rows: usize = self.entries.iter().map(|e| e.rows.nrows()).sum();
        let mut sigma = DMatrix::zeros(rows, self.unknowns);
        let mut sigma_u1 = DVector::zeros(rows);
        let mut r = 0;
        for e in &self.entries {
            let k = e.rows.nrows();
            sigma.rows_mut(r, k).copy_from(&e.rows);
            sigma_u1.rows_mut(r, k).copy_from(&(-&e.rhs));
            r += k;
        }
        self.gram = sigma.transpose() * &sigma;
        self.kappa = if rows == 0 { f64::INFINITY } else { condition_number(&sigma).unwrap_or(f64::INFINITY) };
        self.sigma = sigma;
        self.sigma_u1 = sigma_u1;
    }

    fn check_entry(&self, e: &IrlEntry) -> Result<()> {
        if e.rows.ncols() != self.unknowns || e.rows.nrows() != e.rhs.len() {
            return Err(Error::dims(
                "IrlHistoryStack::data_select",
                format!("k x {} rows with k rhs", self.unknowns),
                format!("{:?} rows with {} rhs", e.rows.shape(), e.rhs.len()),
            ));
        }
        if e.rows.iter().chain(e.rhs.iter()).any(|v| !v.is_finite()) || e.eta.is_nan() {
            return Err(Error::NumericOverflow("IrlHistoryStack::data_select"));
        }
        Ok(())
    }

    /// Offers a candidate; returns `ϖ`, whether it was stored.
    ///
    /// Below capacity the candidate is appended. At capacity it replaces
    /// the entry whose substitution minimizes `κ(Σ̂)`, provided that lowers
    /// `κ(Σ̂ᵀΣ̂)` by the factor `ξ₁`. Either way the resulting `‖Σ_u1‖` must
    /// reach `ξ₂`, otherwise the candidate is discarded.
    pub fn data_select(&mut self, candidate: IrlEntry) -> Result<bool> {
        self.check_entry(&candidate)?;
        let u1_sq = self.sigma_u1.norm_squared();
        let cand_sq = candidate.rhs.norm_squared();
        if !self.is_full() {
            if (u1_sq + cand_sq).sqrt() < self.xi2 {
                return Ok(false);
            }
            self.entries.push(candidate);
            self.rebuild();
            return Ok(true);
        }

        // screen replacements through the Gram matrix, then confirm by SVD
        let cand_gram = candidate.rows.transpose() * &candidate.rows;
        let base = &self.gram + &cand_gram;
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in self.entries.iter().enumerate() {
            let k = gram_condition(&(&base - e.rows.transpose() * &e.rows));
            if best.is_none_or(|(_, b)| k < b) {
                best = Some((i, k));
            }
        }
        let Some((i, _)) = best else { return Ok(false) };
        let replaced_sq = self.entries[i].rhs.norm_squared();
        if (u1_sq - replaced_sq + cand_sq).max(0.0).sqrt() < self.xi2 {
            return Ok(false);
        }
        let old = std::mem::replace(&mut self.entries[i], candidate);
        let kappa_old = self.kappa;
        self.rebuild();
        if self.kappa_gram() < self.xi1 * kappa_old * kappa_old {
            Ok(true)
        } else {
            self.entries[i] = old;
            self.rebuild();
            Ok(false)
        }
    }

    /// Least-squares weights `argmin ‖Σ̂W + Σ_u1‖`.
    ///
    /// Refused when `Σ̂` lacks full column rank or `‖Σ_u1‖ < ξ₂`; the
    /// caller then keeps its previous weights.
    pub fn solve_weights(&self, basis: &FeatureBasis, r1: f64) -> Result<WeightVector> {
        if basis.unknowns() != self.unknowns {
            return Err(Error::dims("solve_weights", self.unknowns, basis.unknowns()));
        }
        let rank = if self.sigma.nrows() == 0 { 0 } else { numerical_rank(&self.sigma) };
        if rank < self.unknowns {
            return Err(Error::RankDeficient { rank, required: self.unknowns });
        }
        if self.sigma_u1.norm() < self.xi2 {
            return Err(Error::Domain(format!(
                "regression right-hand side norm {} is below xi2 = {}",
                self.sigma_u1.norm(),
                self.xi2
            )));
        }
        let w = least_squares(&self.sigma, &(-&self.sigma_u1))?;
        WeightVector::from_stacked(basis, &w, r1)
    }

    /// Norm of the regression residual `Σ̂W + Σ_u1`.
    pub fn residual_norm(&self, w: &WeightVector) -> f64 {
        if self.sigma.nrows() == 0 {
            return 0.0;
        }
        (&self.sigma * w.stacked() + &self.sigma_u1).norm()
    }
}
