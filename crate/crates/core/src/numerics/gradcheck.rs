use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::Result;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Denominator floor for relative errors, so that entries whose true
/// gradient is near zero are judged on absolute error instead.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub entries: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub params: Vec<ParamCheck>,
}

impl GradReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err() <= tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn evaluate<F>(f: &F, store: &ParamStore) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    Ok(tape.value(loss)[[0, 0]])
}

/// Analytic gradient of the scalar produced by `f`.
pub fn analytic_grads<F>(f: &F, store: &mut ParamStore) -> Result<()>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    store.zero_grads();
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    tape.backward(loss, store)
}

/// Compares the recorded gradient of `f` with central finite differences
/// for every entry of every parameter. `f` must be deterministic.
pub fn gradcheck<F>(f: F, store: &mut ParamStore) -> Result<GradReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    analytic_grads(&f, store)?;
    let ids: Vec<ParamId> = store.ids().collect();
    let mut params = Vec::with_capacity(ids.len());
    for id in ids {
        let analytic = store.grad(id).clone();
        let mut check = ParamCheck {
            name: store.name(id).to_string(),
            entries: analytic.len(),
            max_abs_err: 0.0,
            max_rel_err: 0.0,
        };
        for (idx, &a) in analytic.indexed_iter() {
            let orig = store.value(id)[idx];
            store.value_mut(id)[idx] = orig + FD_STEP;
            let plus = evaluate(&f, store);
            store.value_mut(id)[idx] = orig - FD_STEP;
            let minus = evaluate(&f, store);
            store.value_mut(id)[idx] = orig;
            let numeric = (plus? - minus?) / (2.0 * FD_STEP);
            check.max_abs_err = check.max_abs_err.max((a - numeric).abs());
            check.max_rel_err = check.max_rel_err.max(relative_error(a, numeric));
        }
        params.push(check);
    }
    Ok(GradReport { params })
}
