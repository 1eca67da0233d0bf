//! Regression rows of the inverse problem: the inverse Bellman error and
//! the optimal-controller identity, normalized by the known `r₁`.
//!
//! The unknowns are stacked as `W = [W_V; W_Q; W_R⁻]`, where `W_R⁻` is the
//! control-weight diagonal without its first entry.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::FeatureBasis;
use crate::error::{Error, Result};
use crate::estimator::ThetaVector;
use crate::plant::Demonstrator;

/// Cost and value weights, with the known `r₁` carried alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w_v: DVector<f64>,
    pub w_q: DVector<f64>,
    pub w_r_minus: DVector<f64>,
    pub r1: f64,
}

impl WeightVector {
    pub fn zeros(basis: &FeatureBasis, r1: f64) -> Self {
        Self {
            w_v: DVector::zeros(basis.value_len()),
            w_q: DVector::zeros(basis.cost_len()),
            w_r_minus: DVector::zeros(basis.inputs - 1),
            r1,
        }
    }

    pub fn from_stacked(basis: &FeatureBasis, w: &DVector<f64>, r1: f64) -> Result<Self> {
        if w.len() != basis.unknowns() {
            return Err(Error::dims("WeightVector::from_stacked", basis.unknowns(), w.len()));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow("WeightVector::from_stacked"));
        }
        let (p, l) = (basis.value_len(), basis.cost_len());
        Ok(Self {
            w_v: w.rows(0, p).into_owned(),
            w_q: w.rows(p, l).into_owned(),
            w_r_minus: w.rows(p + l, basis.inputs - 1).into_owned(),
            r1,
        })
    }

    /// `[W_V; W_Q; W_R⁻]`.
    pub fn stacked(&self) -> DVector<f64> {
        let mut w = DVector::zeros(self.len());
        let (p, l) = (self.w_v.len(), self.w_q.len());
        w.rows_mut(0, p).copy_from(&self.w_v);
        w.rows_mut(p, l).copy_from(&self.w_q);
        w.rows_mut(p + l, self.w_r_minus.len()).copy_from(&self.w_r_minus);
        w
    }

    pub fn len(&self) -> usize {
        self.w_v.len() + self.w_q.len() + self.w_r_minus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `‖self − truth‖ / ‖truth‖` over the stacked unknowns.
    pub fn relative_error(&self, truth: &WeightVector) -> f64 {
        (self.stacked() - truth.stacked()).norm() / truth.stacked().norm()
    }
}

/// Ideal weights of a demonstrator in `basis`: the value weights come from
/// the Riccati solution (`Pᵢᵢ` on squares, `2Pᵢⱼ` on cross terms).
pub fn true_weights(demo: &Demonstrator, basis: &FeatureBasis) -> Result<WeightVector> {
    let cost = demo.cost();
    let q = cost.q_basis().quadratic_form(cost.w_q())?;
    Ok(WeightVector {
        w_v: basis.value.weights_of(demo.riccati_p())?,
        w_q: basis.cost.weights_of(&q)?,
        w_r_minus: cost.r_diag().rows(1, cost.r_diag().len() - 1).into_owned(),
        r1: cost.r1_known(),
    })
}

fn check_dims(basis: &FeatureBasis, x: &DVector<f64>, u: &DVector<f64>, theta: &ThetaVector) -> Result<()> {
    if x.len() != basis.state_dim() || x.len() != 2 * theta.n() {
        return Err(Error::dims("irl rows: state", basis.state_dim(), x.len()));
    }
    if u.len() != basis.inputs || u.len() != theta.m() {
        return Err(Error::dims("irl rows: input", basis.inputs, u.len()));
    }
    Ok(())
}

/// `σ″ = [∇σ_V(x̂)(Â′x̂ + B̂′u); σ_Q(x̂); σ_u⁻(u)]` with right-hand side
/// `−r₁u₁²`, so that the inverse Bellman error is `row·W − rhs`.
pub fn inverse_bellman_row(
    basis: &FeatureBasis,
    x_hat: &DVector<f64>,
    u: &DVector<f64>,
    theta_hat: &ThetaVector,
    r1: f64,
) -> Result<(DVector<f64>, f64)> {
    check_dims(basis, x_hat, u, theta_hat)?;
    let f = basis.eval_features(x_hat, u);
    let xdot = theta_hat.a_prime() * x_hat + theta_hat.b_prime() * u;
    let (p, l, m) = (basis.value_len(), basis.cost_len(), basis.inputs);
    let mut row = DVector::zeros(basis.unknowns());
    row.rows_mut(0, p).copy_from(&(&f.grad_sigma_v * xdot));
    row.rows_mut(p, l).copy_from(&f.sigma_q);
    row.rows_mut(p + l, m - 1).copy_from(&f.sigma_u.rows(1, m - 1));
    Ok((row, -r1 * f.sigma_u[0]))
}

/// Rows of `−2Ru = B′ᵀ∇σ_Vᵀ W_V` with `r₁` moved to the right-hand side.
///
/// Row 1 is `[σ_B₁, 0, 0]` with rhs `−2r₁u₁`; row `i ≥ 2` is
/// `[σ_Bᵢ, 0, 2uᵢ eᵢ₋₁]` with rhs 0.
pub fn controller_rows(
    basis: &FeatureBasis,
    x_hat: &DVector<f64>,
    u: &DVector<f64>,
    theta_hat: &ThetaVector,
    r1: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_dims(basis, x_hat, u, theta_hat)?;
    let (p, l, m) = (basis.value_len(), basis.cost_len(), basis.inputs);
    let sigma_b = theta_hat.b_prime().transpose() * basis.value.jacobian(x_hat).transpose();
    let mut rows = DMatrix::zeros(m, basis.unknowns());
    rows.columns_mut(0, p).copy_from(&sigma_b);
    for i in 1..m {
        rows[(i, p + l + i - 1)] = 2.0 * u[i];
    }
    let mut rhs = DVector::zeros(m);
    rhs[0] = -2.0 * r1 * u[0];
    Ok((rows, rhs))
}

/// The inverse Bellman row stacked over the controller rows:
/// `(1 + m) × (P + L + m − 1)` and its right-hand side.
pub fn row_block(
    basis: &FeatureBasis,
    x_hat: &DVector<f64>,
    u: &DVector<f64>,
    theta_hat: &ThetaVector,
    r1: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (row, rhs0) = inverse_bellman_row(basis, x_hat, u, theta_hat, r1)?;
    let (ctrl, ctrl_rhs) = controller_rows(basis, x_hat, u, theta_hat, r1)?;
    let m = basis.inputs;
    let mut rows = DMatrix::zeros(1 + m, basis.unknowns());
    rows.row_mut(0).copy_from(&row.transpose());
    rows.rows_mut(1, m).copy_from(&ctrl);
    let mut rhs = DVector::zeros(1 + m);
    rhs[0] = rhs0;
    rhs.rows_mut(1, m).copy_from(&ctrl_rhs);
    Ok((rows, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{make_demonstrator, CostFunction, LinearPlant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn demo() -> Demonstrator {
        let plant = LinearPlant::new(
            DMatrix::from_row_slice(2, 4, &[1.0, 1.0, -1.0, 1.0, 5.0, 1.0, 1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 0.0, 1.0]),
        )
        .unwrap();
        make_demonstrator(plant, CostFunction::diagonal(&[1.0, 2.0, 3.0, 6.0], &[20.0, 10.0]).unwrap()).unwrap()
    }

    #[test]
    fn zero_state_and_input_give_zero_rows() {
        let basis = FeatureBasis::default_for(4, 2);
        let th = demo().plant().theta();
        let (row, rhs) = inverse_bellman_row(&basis, &DVector::zeros(4), &DVector::zeros(2), &th, 20.0).unwrap();
        assert_eq!(row.amax(), 0.0);
        assert_eq!(rhs, 0.0);
        let (rows, rhs) = controller_rows(&basis, &DVector::zeros(4), &DVector::zeros(2), &th, 20.0).unwrap();
        assert_eq!(rows.amax(), 0.0);
        assert_eq!(rhs.amax(), 0.0);
    }

    #[test]
    fn true_weights_zero_the_residuals_on_optimal_data() {
        let d = demo();
        let basis = FeatureBasis::default_for(4, 2);
        let w = true_weights(&d, &basis).unwrap();
        assert_eq!(w.w_q.as_slice(), &[1.0, 2.0, 3.0, 6.0]);
        assert_eq!(w.w_r_minus.as_slice(), &[10.0]);
        let th = d.plant().theta();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
            let u = d.optimal_action(&x);
            let (row, rhs) = inverse_bellman_row(&basis, &x, &u, &th, 20.0).unwrap();
            assert!((row.dot(&w.stacked()) - rhs).abs() < 1e-8 * (1.0 + x.norm_squared()));
            let (rows, rhs) = controller_rows(&basis, &x, &u, &th, 20.0).unwrap();
            assert!((rows * w.stacked() - rhs).amax() < 1e-8 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn residual_is_linear_in_weights() {
        let d = demo();
        let basis = FeatureBasis::default_for(4, 2);
        let w = true_weights(&d, &basis).unwrap().stacked();
        let x = DVector::from_vec(vec![0.3, -1.0, 0.7, 0.2]);
        let u = d.optimal_action(&x);
        let (row, rhs) = inverse_bellman_row(&basis, &x, &u, &d.plant().theta(), 20.0).unwrap();
        let mut w1 = w.clone();
        w1[0] += 1.0;
        let r0 = row.dot(&w) - rhs;
        let r1 = row.dot(&w1) - rhs;
        assert!((r1 - r0 - row[0]).abs() < 1e-12 * (1.0 + row[0].abs() + r0.abs()));
    }

    #[test]
    fn single_input_has_no_extra_columns() {
        let plant = LinearPlant::new(DMatrix::from_row_slice(1, 2, &[0.0, 0.0]), DMatrix::from_row_slice(1, 1, &[1.0]))
            .unwrap();
        let basis = FeatureBasis::default_for(2, 1);
        assert_eq!(basis.unknowns(), 5);
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let u = DVector::from_vec(vec![0.5]);
        let (rows, rhs) = controller_rows(&basis, &x, &u, &plant.theta(), 1.0).unwrap();
        assert_eq!(rows.shape(), (1, 5));
        assert_eq!(rhs[0], -1.0);
    }

    #[test]
    fn block_shape() {
        let d = demo();
        let basis = FeatureBasis::default_for(4, 2);
        let x = DVector::from_vec(vec![0.3, -1.0, 0.7, 0.2]);
        let (rows, rhs) = row_block(&basis, &x, &d.optimal_action(&x), &d.plant().theta(), 20.0).unwrap();
        assert_eq!(rows.shape(), (3, 15));
        assert_eq!(rhs.len(), 3);
    }
}
