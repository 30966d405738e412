//! Time-indexed macroscopic observables with run metadata.

use crate::scalar::{lit, Real};
use serde::Serialize;

/// A time-indexed sequence of macroscopic values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "R: Serialize")]
pub struct Curve<R: Real> {
    times: Vec<R>,
    values: Vec<R>,
    pub meta: CurveMeta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Default)]
pub struct CurveMeta {
    pub model: String,
    pub params: Vec<(String, f64)>,
    pub seed: Option<u64>,
}

impl CurveMeta {
    pub fn new(model: &str) -> Self {
        CurveMeta {
            model: model.to_string(),
            params: Vec::new(),
            seed: None,
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.params.push((name.to_string(), value));
        self
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

impl<R: Real> Curve<R> {
    /// Values must lie in `[0, 1]` and match the time grid in length.
    pub fn new(times: Vec<R>, values: Vec<R>, meta: CurveMeta) -> Self {
        assert_eq!(times.len(), values.len());
        assert!(
            values.iter().all(|v| *v >= R::zero() && *v <= R::one()),
            "curve value outside [0, 1]"
        );
        Curve { times, values, meta }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn times(&self) -> &[R] {
        &self.times
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn points(&self) -> impl Iterator<Item = (R, R)> + '_ {
        self.times
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// The curve read backwards in time on the same grid: value at `t`
    /// becomes the value at `tau - t`. Requires a symmetric grid.
    pub fn reversed(&self) -> Curve<R> {
        let n = self.len();
        assert!(n >= 1);
        let tau = self.times[n - 1] + self.times[0];
        let tol = lit::<R>(1e-9);
        for i in 0..n {
            assert!(
                (self.times[i] + self.times[n - 1 - i] - tau).abs() <= tol,
                "time grid not symmetric; reversal undefined"
            );
        }
        let mut meta = self.meta.clone();
        meta.model = format!("{}-reversed", meta.model);
        Curve {
            times: self.times.clone(),
            values: self.values.iter().rev().copied().collect(),
            meta,
        }
    }
}
