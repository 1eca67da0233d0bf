//! The demonstrator: a linear agent `ṗ = q`, `q̇ = A x + B u` acting
//! optimally for a quadratic cost `Q(x) + uᵀ R u`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimator::ThetaVector;
use crate::irl::MonomialBasis;
use crate::numerics::{
    controllability_matrix, is_hurwitz, numerical_rank, rk4_step, solve_are, symmetric_eigen_range, SampledSignal,
};

/// True dynamics with position dimension `n` and input dimension `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPlant {
    n: usize,
    m: usize,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    a_prime: DMatrix<f64>,
    b_prime: DMatrix<f64>,
}

impl LinearPlant {
    /// `a` is `n × 2n` (`[A₁, A₂]`), `b` is `n × m`. The pair `(A′, B′)`
    /// must be controllable.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let theta = ThetaVector::from_matrices(&a, &b)?;
        let n = a.nrows();
        let m = b.ncols();
        if n == 0 || m == 0 {
            return Err(Error::Construction("plant needs n >= 1 and m >= 1".into()));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Construction("plant matrices must be finite".into()));
        }
        let a_prime = theta.a_prime();
        let b_prime = theta.b_prime();
        let rank = numerical_rank(&controllability_matrix(&a_prime, &b_prime));
        if rank != 2 * n {
            return Err(Error::Construction(format!(
                "(A', B') not controllable: controllability rank {rank} < {}",
                2 * n
            )));
        }
        Ok(Self { n, m, a, b, a_prime, b_prime })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn state_dim(&self) -> usize {
        2 * self.n
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn a1(&self) -> DMatrix<f64> {
        self.a.columns(0, self.n).into_owned()
    }

    pub fn a2(&self) -> DMatrix<f64> {
        self.a.columns(self.n, self.n).into_owned()
    }

    pub fn a_prime(&self) -> &DMatrix<f64> {
        &self.a_prime
    }

    pub fn b_prime(&self) -> &DMatrix<f64> {
        &self.b_prime
    }

    pub fn theta(&self) -> ThetaVector {
        ThetaVector::from_matrices(&self.a, &self.b).expect("dimensions checked at construction")
    }
}

/// `r(x, u) = W_Qᵀ σ_Q(x) + uᵀ diag(r) u`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFunction {
    q_basis: MonomialBasis,
    w_q: DVector<f64>,
    r_diag: DVector<f64>,
    r1_known: f64,
}

impl CostFunction {
    pub fn new(q_basis: MonomialBasis, w_q: DVector<f64>, r_diag: DVector<f64>) -> Result<Self> {
        if w_q.len() != q_basis.len() {
            return Err(Error::dims("CostFunction::new", q_basis.len(), w_q.len()));
        }
        if r_diag.is_empty() || r_diag.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::Construction("input weights must be positive and finite".into()));
        }
        let q = q_basis.quadratic_form(&w_q)?;
        let (qmin, qmax) = symmetric_eigen_range(&q);
        if qmin < -1e-12 * (1.0 + qmax.abs()) {
            return Err(Error::Construction(format!("state cost is indefinite (min eigenvalue {qmin:.3e})")));
        }
        let r1_known = r_diag[0];
        Ok(Self { q_basis, w_q, r_diag, r1_known })
    }

    /// Diagonal `Q(x) = xᵀ diag(q) x` over the squared-state basis.
    pub fn diagonal(q_diag: &[f64], r_diag: &[f64]) -> Result<Self> {
        Self::new(
            MonomialBasis::squares(q_diag.len()),
            DVector::from_column_slice(q_diag),
            DVector::from_column_slice(r_diag),
        )
    }

    pub fn q_basis(&self) -> &MonomialBasis {
        &self.q_basis
    }

    pub fn w_q(&self) -> &DVector<f64> {
        &self.w_q
    }

    pub fn r_diag(&self) -> &DVector<f64> {
        &self.r_diag
    }

    pub fn r1_known(&self) -> f64 {
        self.r1_known
    }

    /// Symmetric matrix of the state cost.
    pub fn q_matrix(&self) -> DMatrix<f64> {
        self.q_basis.quadratic_form(&self.w_q).expect("lengths checked at construction")
    }

    pub fn r_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.r_diag)
    }

    pub fn state_cost(&self, x: &DVector<f64>) -> f64 {
        self.w_q.dot(&self.q_basis.eval(x))
    }

    pub fn instantaneous(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.state_cost(x) + u.iter().zip(self.r_diag.iter()).map(|(u, r)| r * u * u).sum::<f64>()
    }

    /// The same cost multiplied by `k > 0`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.q_basis.clone(), &self.w_q * k, &self.r_diag * k)
    }
}

/// Optimal agent: plant, cost, Riccati solution and LQR gain.
#[derive(Debug, Clone)]
pub struct Demonstrator {
    plant: LinearPlant,
    cost: CostFunction,
    riccati_p: DMatrix<f64>,
    gain: DMatrix<f64>,
}

/// Solves the Riccati equation for `(plant, cost)` and verifies the
/// closed loop.
///
/// The Riccati equation is solved for the cost divided by `r₁`, and the
/// solution is scaled back. The gain therefore depends only on the cost
/// ratios, so costs that differ by an exact positive factor yield
/// bit-identical gains and trajectories.
pub fn make_demonstrator(plant: LinearPlant, cost: CostFunction) -> Result<Demonstrator> {
    let dim = plant.state_dim();
    if cost.q_basis.dim() != dim {
        return Err(Error::dims("make_demonstrator", dim, cost.q_basis.dim()));
    }
    if cost.r_diag.len() != plant.m() {
        return Err(Error::dims("make_demonstrator", plant.m(), cost.r_diag.len()));
    }
    let r1 = cost.r1_known;
    let q_norm = cost.q_basis.quadratic_form(&cost.w_q.map(|w| w / r1))?;
    let r_norm = DMatrix::from_diagonal(&cost.r_diag.map(|r| r / r1));
    let p_norm = solve_are(plant.a_prime(), plant.b_prime(), &q_norm, &r_norm)
        .map_err(|e| Error::Construction(format!("Riccati solve failed: {e}")))?;
    let gain = DMatrix::from_diagonal(&r_norm.diagonal().map(|r| 1.0 / r)) * plant.b_prime().transpose() * &p_norm;
    let riccati_p = p_norm * r1;
    let closed = plant.a_prime() - plant.b_prime() * &gain;
    if !is_hurwitz(&closed) {
        return Err(Error::Construction("optimal closed loop is not Hurwitz".into()));
    }
    Ok(Demonstrator { plant, cost, riccati_p, gain })
}

impl Demonstrator {
    pub fn plant(&self) -> &LinearPlant {
        &self.plant
    }

    pub fn cost(&self) -> &CostFunction {
        &self.cost
    }

    pub fn riccati_p(&self) -> &DMatrix<f64> {
        &self.riccati_p
    }

    /// `K = R⁻¹ B′ᵀ P`; the policy is `u = −K x`.
    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn closed_loop(&self) -> DMatrix<f64> {
        self.plant.a_prime() - self.plant.b_prime() * &self.gain
    }

    pub fn optimal_action(&self, x: &DVector<f64>) -> DVector<f64> {
        -(&self.gain * x)
    }

    /// Same answer as [`Self::optimal_action`]; kept separate so callers
    /// can meter oracle queries.
    pub fn query(&self, x_star: &DVector<f64>) -> DVector<f64> {
        self.optimal_action(x_star)
    }

    /// `V*(x) = xᵀ P x`.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.riccati_p * x))
    }

    /// `∇V*(x) · (A′x + B′u) + Q(x) + uᵀRu`; zero along optimal behavior.
    pub fn hjb_residual(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let xdot = self.plant.a_prime() * x + self.plant.b_prime() * u;
        2.0 * (&self.riccati_p * x).dot(&xdot) + self.cost.instantaneous(x, u)
    }

    /// Full-state rollout; `probe` adds an exogenous signal to the policy.
    pub fn rollout(
        &self,
        x0: &DVector<f64>,
        duration: f64,
        dt: f64,
        probe: Option<&dyn Fn(f64) -> DVector<f64>>,
    ) -> Result<Trajectory> {
        if !(duration > 0.0) {
            return Err(Error::Domain(format!("duration must be positive, got {duration}")));
        }
        let steps = (duration / dt).round() as usize;
        let mut run = DemonstratorRun::new(self, x0.clone(), dt)?;
        if let Some(p) = probe {
            run = run.with_probe(p);
        }
        let n = self.plant.n();
        let mut traj = Trajectory {
            p: SampledSignal::unbounded(dt, n)?,
            u: SampledSignal::unbounded(dt, self.plant.m())?,
            x: SampledSignal::unbounded(dt, 2 * n)?,
        };
        let first = run.measurement();
        traj.record(&first, run.state())?;
        for _ in 0..steps {
            let meas = run.step()?;
            traj.record(&meas, run.state())?;
        }
        Ok(traj)
    }
}

/// Position and input logs of the demonstrator; the velocity stays hidden.
pub fn simulate_demonstrator(
    d: &Demonstrator,
    x0: &DVector<f64>,
    duration: f64,
    dt: f64,
) -> Result<(SampledSignal, SampledSignal)> {
    let traj = d.rollout(x0, duration, dt, None)?;
    Ok((traj.p, traj.u))
}

/// Logged rollout including the full state (ground truth for tests and
/// reporting only).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub p: SampledSignal,
    pub u: SampledSignal,
    pub x: SampledSignal,
}

impl Trajectory {
    fn record(&mut self, meas: &Measurement, x: &DVector<f64>) -> Result<()> {
        self.p.push(meas.t, meas.p.clone())?;
        self.u.push(meas.t, meas.u.clone())?;
        self.x.push(meas.t, x.clone())
    }
}

/// What an observer gets to see at one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub t: f64,
    pub p: DVector<f64>,
    pub u: DVector<f64>,
}

/// Incremental closed-loop simulation on a fixed RK4 grid.
pub struct DemonstratorRun<'a> {
    demo: &'a Demonstrator,
    x: DVector<f64>,
    k: usize,
    dt: f64,
    probe: Option<&'a dyn Fn(f64) -> DVector<f64>>,
}

impl<'a> DemonstratorRun<'a> {
    pub fn new(demo: &'a Demonstrator, x0: DVector<f64>, dt: f64) -> Result<Self> {
        if x0.len() != demo.plant.state_dim() {
            return Err(Error::dims("DemonstratorRun::new", demo.plant.state_dim(), x0.len()));
        }
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { demo, x: x0, k: 0, dt, probe: None })
    }

    pub fn with_probe(mut self, probe: &'a dyn Fn(f64) -> DVector<f64>) -> Self {
        self.probe = Some(probe);
        self
    }

    pub fn time(&self) -> f64 {
        self.k as f64 * self.dt
    }

    /// Ground-truth state. Estimation code must not read this.
    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    fn input(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let u = self.demo.optimal_action(x);
        match self.probe {
            Some(p) => u + p(t),
            None => u,
        }
    }

    pub fn measurement(&self) -> Measurement {
        let t = self.time();
        Measurement { t, p: self.x.rows(0, self.demo.plant.n()).into_owned(), u: self.input(t, &self.x) }
    }

    pub fn step(&mut self) -> Result<Measurement> {
        let ap = self.demo.plant.a_prime();
        let bp = self.demo.plant.b_prime();
        let f = |t: f64, x: &DVector<f64>| ap * x + bp * self.input(t, x);
        let next = rk4_step(f, self.time(), &self.x, self.dt)?;
        self.x = next;
        self.k += 1;
        Ok(self.measurement())
    }
}

/// Deterministic sum of sinusoids per input channel, used to excite the
/// plant when recording a parameter history stack.
pub fn multisine_probe(m: usize, amplitude: f64) -> impl Fn(f64) -> DVector<f64> {
    const BASE: [f64; 5] = [0.7, 1.9, 3.1, 4.3, 5.9];
    move |t: f64| {
        DVector::from_fn(m, |j, _| {
            let shift = 0.37 * j as f64;
            BASE.iter().enumerate().map(|(k, w)| ((w + shift) * t + 1.3 * (k + j) as f64).sin()).sum::<f64>()
                * amplitude
                / BASE.len() as f64
        })
    }
}
