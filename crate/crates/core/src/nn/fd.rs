//! Central finite differences for verifying analytic gradients.

use super::params::{Grads, ParamId, ParamStore};

pub const FD_STEP: f64 = 1e-5;

/// Denominator floor of [`relative_error`], so that gradients that are zero
/// up to rounding compare by absolute error.
pub const REL_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

impl FdReport {
    fn new() -> Self {
        FdReport { max_rel_error: 0.0, worst: None, checked: 0 }
    }

    fn observe(&mut self, name: &str, index: usize, analytic: f64, numeric: f64) {
        let e = relative_error(analytic, numeric);
        self.checked += 1;
        if e > self.max_rel_error || self.worst.is_none() {
            self.max_rel_error = self.max_rel_error.max(e);
            self.worst = Some((name.to_string(), index));
        }
    }

    pub fn merge(mut self, other: FdReport) -> FdReport {
        if other.max_rel_error > self.max_rel_error || self.worst.is_none() {
            self.max_rel_error = other.max_rel_error;
            self.worst = other.worst;
        }
        self.checked += other.checked;
        self
    }
}

/// Checks every scalar of `ids` against central differences of `loss`.
/// The store is restored afterwards.
pub fn check_params(
    store: &mut ParamStore,
    ids: &[ParamId],
    analytic: &Grads,
    mut loss: impl FnMut(&ParamStore) -> f64,
) -> FdReport {
    let mut report = FdReport::new();
    for &id in ids {
        for k in 0..store.get(id).len() {
            let orig = store.get(id)[k];
            store.get_mut(id)[k] = orig + FD_STEP;
            let up = loss(store);
            store.get_mut(id)[k] = orig - FD_STEP;
            let down = loss(store);
            store.get_mut(id)[k] = orig;
            let name = store.name(id).to_string();
            report.observe(&name, k, analytic.get(id)[k], (up - down) / (2.0 * FD_STEP));
        }
    }
    report
}

/// Same check for a plain input vector.
pub fn check_vector(x: &mut [f64], analytic: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> FdReport {
    let mut report = FdReport::new();
    for k in 0..x.len() {
        let orig = x[k];
        x[k] = orig + FD_STEP;
        let up = loss(x);
        x[k] = orig - FD_STEP;
        let down = loss(x);
        x[k] = orig;
        report.observe("input", k, analytic[k], (up - down) / (2.0 * FD_STEP));
    }
    report
}
