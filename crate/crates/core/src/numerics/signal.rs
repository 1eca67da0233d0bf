use std::collections::VecDeque;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Fraction of a sample period within which a time is considered on-grid.
const GRID_TOL: f64 = 1e-6;

/// Uniformly sampled vector signal with a bounded retention window.
///
/// Sample `k` (counted from the first push, including samples already
/// dropped) sits at `t0 + k * dt`, so spacing never drifts. Samples older
/// than `retention` seconds behind the newest one are discarded; lookups
/// inside the window always succeed and lookups outside it fail rather than
/// extrapolate.
#[derive(Debug, Clone)]
pub struct SampledSignal {
    dt: f64,
    dim: usize,
    retention: f64,
    t0: f64,
    first: usize,
    samples: VecDeque<DVector<f64>>,
}

impl SampledSignal {
    /// `retention` is in seconds; pass `f64::INFINITY` to keep everything.
    pub fn new(dt: f64, dim: usize, retention: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("sample period must be positive, got {dt}")));
        }
        if !(retention >= 0.0) {
            return Err(Error::Domain(format!("retention must be nonnegative, got {retention}")));
        }
        Ok(Self { dt, dim, retention, t0: 0.0, first: 0, samples: VecDeque::new() })
    }

    pub fn unbounded(dt: f64, dim: usize) -> Result<Self> {
        Self::new(dt, dim, f64::INFINITY)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn retention(&self) -> f64 {
        self.retention
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn time_of(&self, global: usize) -> f64 {
        self.t0 + global as f64 * self.dt
    }

    /// Time of the next sample `push` expects.
    pub fn next_time(&self) -> f64 {
        self.time_of(self.first + self.samples.len())
    }

    pub fn oldest_time(&self) -> Option<f64> {
        (!self.samples.is_empty()).then(|| self.time_of(self.first))
    }

    pub fn newest_time(&self) -> Option<f64> {
        (!self.samples.is_empty()).then(|| self.time_of(self.first + self.samples.len() - 1))
    }

    pub fn latest(&self) -> Option<&DVector<f64>> {
        self.samples.back()
    }

    /// Appends the sample at time `t`, which must be the next grid point.
    pub fn push(&mut self, t: f64, value: DVector<f64>) -> Result<()> {
        if value.len() != self.dim {
            return Err(Error::dims("SampledSignal::push", self.dim, value.len()));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow("SampledSignal::push"));
        }
        if self.samples.is_empty() && self.first == 0 {
            self.t0 = t;
        } else {
            let expected = self.next_time();
            if (t - expected).abs() > GRID_TOL * self.dt {
                return Err(Error::OffGrid { expected, found: t });
            }
        }
        self.samples.push_back(value);

        let newest = self.time_of(self.first + self.samples.len() - 1);
        while self.samples.len() > 1 && newest - self.time_of(self.first + 1) >= self.retention - GRID_TOL * self.dt {
            self.samples.pop_front();
            self.first += 1;
        }
        Ok(())
    }

    /// Iterates over retained `(t, value)` pairs, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = (f64, &DVector<f64>)> + '_ {
        self.samples.iter().enumerate().map(move |(i, v)| (self.time_of(self.first + i), v))
    }

    fn check_window(&self, t: f64) -> Result<f64> {
        let (oldest, newest) = match (self.oldest_time(), self.newest_time()) {
            (Some(o), Some(n)) => (o, n),
            _ => return Err(Error::WindowUnderflow { requested: t, oldest: f64::NAN, newest: f64::NAN }),
        };
        let tol = GRID_TOL * self.dt;
        if t < oldest - tol || t > newest + tol {
            return Err(Error::WindowUnderflow { requested: t, oldest, newest });
        }
        // fractional position relative to the first retained sample
        let pos = (t - oldest) / self.dt;
        let snapped = pos.round();
        let pos = if (pos - snapped).abs() < GRID_TOL { snapped } else { pos };
        Ok(pos.clamp(0.0, (self.samples.len() - 1) as f64))
    }

    /// Value at a retained grid sample index `i` (0 = oldest retained).
    pub fn get(&self, i: usize) -> Option<&DVector<f64>> {
        self.samples.get(i)
    }

    /// Index (relative to the oldest retained sample) of the grid point at `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let pos = self.check_window(t)?;
        if pos.fract() != 0.0 {
            let expected = self.oldest_time().unwrap_or(0.0) + pos.round() * self.dt;
            return Err(Error::OffGrid { expected, found: t });
        }
        Ok(pos as usize)
    }

    /// Linearly interpolated value at `t`.
    pub fn at(&self, t: f64) -> Result<DVector<f64>> {
        let pos = self.check_window(t)?;
        Ok(self.at_pos(pos))
    }

    fn at_pos(&self, pos: f64) -> DVector<f64> {
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        if frac == 0.0 || i + 1 >= self.samples.len() {
            return self.samples[i].clone();
        }
        &self.samples[i] * (1.0 - frac) + &self.samples[i + 1] * frac
    }

    /// Composite trapezoid rule over `[a, b]`; off-grid endpoints are
    /// linearly interpolated.
    pub fn trapezoid(&self, a: f64, b: f64) -> Result<DVector<f64>> {
        if a > b {
            return Err(Error::Domain(format!("trapezoid bounds reversed: a = {a}, b = {b}")));
        }
        let pa = self.check_window(a)?;
        let pb = self.check_window(b)?;
        let mut acc = DVector::zeros(self.dim);
        if pb <= pa {
            return Ok(acc);
        }
        let ia = pa.ceil() as usize;
        let ib = pb.floor() as usize;
        let h = self.dt;

        if (ia as f64) > pb {
            // both endpoints inside one grid interval
            let va = self.at_pos(pa);
            let vb = self.at_pos(pb);
            acc += (va + vb) * (0.5 * (pb - pa) * h);
            return Ok(acc);
        }
        if (ia as f64) > pa {
            let va = self.at_pos(pa);
            acc += (va + &self.samples[ia]) * (0.5 * (ia as f64 - pa) * h);
        }
        for k in ia..ib {
            acc += (&self.samples[k] + &self.samples[k + 1]) * (0.5 * h);
        }
        if pb > ib as f64 {
            let vb = self.at_pos(pb);
            acc += (&self.samples[ib] + vb) * (0.5 * (pb - ib as f64) * h);
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(dt: f64, n: usize) -> SampledSignal {
        let mut s = SampledSignal::unbounded(dt, 1).unwrap();
        for k in 0..=n {
            let t = k as f64 * dt;
            s.push(t, DVector::from_element(1, t)).unwrap();
        }
        s
    }

    #[test]
    fn constant_integrates_to_length() {
        let mut s = SampledSignal::unbounded(0.01, 2).unwrap();
        for k in 0..=200 {
            s.push(k as f64 * 0.01, DVector::from_vec(vec![3.0, -1.5])).unwrap();
        }
        let v = s.trapezoid(0.0, 2.0).unwrap();
        assert!((v[0] - 6.0).abs() < 1e-12);
        assert!((v[1] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_interval_is_zero() {
        let s = ramp(0.01, 100);
        assert_eq!(s.trapezoid(0.37, 0.37).unwrap()[0], 0.0);
    }

    #[test]
    fn ramp_integral() {
        let s = ramp(1e-3, 1000);
        assert!((s.trapezoid(0.0, 1.0).unwrap()[0] - 0.5).abs() < 1e-6);
        // off-grid endpoints
        let v = s.trapezoid(0.1234, 0.98765).unwrap()[0];
        let exact = 0.5 * (0.98765f64.powi(2) - 0.1234f64.powi(2));
        assert!((v - exact).abs() < 1e-12);
        let v = s.trapezoid(0.12341, 0.12349).unwrap()[0];
        let exact = 0.5 * (0.12349f64.powi(2) - 0.12341f64.powi(2));
        assert!((v - exact).abs() < 1e-15);
    }

    #[test]
    fn retention_drops_old_samples_and_errors() {
        let mut s = SampledSignal::new(0.1, 1, 1.0).unwrap();
        for k in 0..50 {
            s.push(k as f64 * 0.1, DVector::from_element(1, 1.0)).unwrap();
        }
        let oldest = s.oldest_time().unwrap();
        let newest = s.newest_time().unwrap();
        assert!(newest - oldest >= 1.0 - 1e-9);
        assert!(newest - oldest < 1.1 + 1e-9);
        assert!(s.at(newest - 1.0).is_ok());
        assert!(matches!(s.at(0.5), Err(Error::WindowUnderflow { .. })));
        assert!(matches!(s.trapezoid(0.5, 4.0), Err(Error::WindowUnderflow { .. })));
    }

    #[test]
    fn rejects_off_grid_push_and_non_finite() {
        let mut s = SampledSignal::unbounded(0.1, 1).unwrap();
        s.push(0.0, DVector::from_element(1, 0.0)).unwrap();
        assert!(matches!(s.push(0.25, DVector::from_element(1, 0.0)), Err(Error::OffGrid { .. })));
        assert!(matches!(s.push(0.1, DVector::from_element(1, f64::NAN)), Err(Error::NumericOverflow(_))));
        assert!(s.push(0.1, DVector::from_element(2, 0.0)).is_err());
    }

    #[test]
    fn interpolation_between_samples() {
        let s = ramp(0.1, 10);
        assert!((s.at(0.35).unwrap()[0] - 0.35).abs() < 1e-14);
        assert_eq!(s.index_of(0.3).unwrap(), 3);
        assert!(s.index_of(0.35).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn trapezoid_is_additive(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0,
                                     f in -3.0f64..3.0) {
                let mut s = SampledSignal::unbounded(1e-2, 1).unwrap();
                for k in 0..=100 {
                    let t = k as f64 * 1e-2;
                    s.push(t, DVector::from_element(1, (f * t).sin() + t * t)).unwrap();
                }
                let mut v = [a, b, c];
                v.sort_by(|x, y| x.partial_cmp(y).unwrap());
                let [a, b, c] = v;
                let lhs = s.trapezoid(a, b).unwrap()[0] + s.trapezoid(b, c).unwrap()[0];
                let rhs = s.trapezoid(a, c).unwrap()[0];
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }
}
