use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Recorded pairs `(𝓕ᵢ, 𝓖ᵢ)` of the integral error system.
///
/// Keeps `𝒢 = Σ 𝓖ᵢᵀ𝓖ᵢ` and `Σ 𝓖ᵢᵀ𝓕ᵢ` up to date on every mutation. The
/// stack is full rank when `λ_min(𝒢) > g_lower`.
#[derive(Debug, Clone)]
pub struct ParamHistoryStack {
    capacity: usize,
    g_lower: f64,
    entries: Vec<(DVector<f64>, DMatrix<f64>)>,
    gram: DMatrix<f64>,
    cross: DVector<f64>,
    lambda_min: f64,
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

impl ParamHistoryStack {
    pub fn new(capacity: usize, g_lower: f64, theta_len: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("M", "history stack capacity must be positive"));
        }
        if !(g_lower > 0.0) {
            return Err(Error::config("g_lower", "rank threshold must be positive"));
        }
        Ok(Self {
            capacity,
            g_lower,
            entries: Vec::with_capacity(capacity),
            gram: DMatrix::zeros(theta_len, theta_len),
            cross: DVector::zeros(theta_len),
            lambda_min: 0.0,
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

    pub fn g_lower(&self) -> f64 {
        self.g_lower
    }

    pub fn entries(&self) -> &[(DVector<f64>, DMatrix<f64>)] {
        &self.entries
    }

    /// `𝒢 = Σ 𝓖ᵢᵀ𝓖ᵢ`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `Σ 𝓖ᵢᵀ𝓕ᵢ`.
    pub fn cross(&self) -> &DVector<f64> {
        &self.cross
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn is_full_rank(&self) -> bool {
        self.lambda_min > self.g_lower
    }

    /// Appends while below capacity; afterwards swaps in the pair only if
    /// some substitution raises `λ_min(𝒢)`, choosing the best one. Returns
    /// whether the pair was stored.
    pub fn maybe_record(&mut self, f: DVector<f64>, g: DMatrix<f64>) -> Result<bool> {
        let d = self.gram.nrows();
        if g.ncols() != d || f.len() != g.nrows() {
            return Err(Error::dims(
                "ParamHistoryStack::maybe_record",
                format!("F len r, G r x {d}"),
                format!("F len {}, G {:?}", f.len(), g.shape()),
            ));
        }
        if f.iter().chain(g.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow("ParamHistoryStack::maybe_record"));
        }
        let gtg = g.transpose() * &g;
        if self.entries.len() < self.capacity {
            self.gram += &gtg;
            self.cross += g.transpose() * &f;
            self.entries.push((f, g));
            self.lambda_min = min_eigenvalue(&self.gram);
            return Ok(true);
        }

        let base = &self.gram + &gtg;
        let mut best: Option<(usize, f64)> = None;
        for (i, (_, gi)) in self.entries.iter().enumerate() {
            let lam = min_eigenvalue(&(&base - gi.transpose() * gi));
            if best.is_none_or(|(_, b)| lam > b) {
                best = Some((i, lam));
            }
        }
        match best {
            Some((i, lam)) if lam > self.lambda_min => {
                let (fi, gi) = std::mem::replace(&mut self.entries[i], (f, g));
                self.gram = base - gi.transpose() * &gi;
                self.cross += self.entries[i].1.transpose() * &self.entries[i].0 - gi.transpose() * fi;
                self.lambda_min = lam;
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    /// Recomputes `(𝒢, Σ𝓖ᵀ𝓕)` from scratch.
    pub fn recomputed(&self) -> (DMatrix<f64>, DVector<f64>) {
        let d = self.gram.nrows();
        self.entries.iter().fold((DMatrix::zeros(d, d), DVector::zeros(d)), |(gram, cross), (f, g)| {
            (gram + g.transpose() * g, cross + g.transpose() * f)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pair(rng: &mut ChaCha8Rng, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let g = DMatrix::from_fn(2, theta.len(), |_, _| rng.random_range(-1.0..1.0));
        (&g * theta, g)
    }

    #[test]
    fn first_pair_is_stored() {
        let mut s = ParamHistoryStack::new(4, 1e-6, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (f, g) = random_pair(&mut rng, &DVector::from_vec(vec![1.0, 2.0, 3.0]));
        assert!(s.maybe_record(f, g).unwrap());
        assert_eq!(s.len(), 1);
        assert!(!s.is_full_rank());
    }

    #[test]
    fn replacement_never_lowers_lambda_min_and_bookkeeping_is_consistent() {
        let theta = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let mut s = ParamHistoryStack::new(5, 1e-6, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut last = 0.0;
        for step in 0..200 {
            let (f, g) = random_pair(&mut rng, &theta);
            s.maybe_record(f, g).unwrap();
            if step >= 5 {
                assert!(s.lambda_min() >= last);
            }
            last = s.lambda_min();
        }
        assert!(s.is_full_rank());
        let (gram, cross) = s.recomputed();
        assert!((gram - s.gram()).amax() < 1e-9);
        assert!((cross - s.cross()).amax() < 1e-9);
        for (f, g) in s.entries() {
            assert!((f - g * &theta).amax() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut s = ParamHistoryStack::new(2, 1e-6, 3).unwrap();
        assert!(s.maybe_record(DVector::zeros(2), DMatrix::zeros(2, 4)).is_err());
        assert!(ParamHistoryStack::new(0, 1e-6, 3).is_err());
        assert!(ParamHistoryStack::new(2, 0.0, 3).is_err());
    }
}
