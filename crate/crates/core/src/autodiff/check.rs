use super::{DiffGraph, Var};
use crate::error::Result;

/// Compares the analytic gradient of `loss` w.r.t. the leaf `wrt` with a
/// central-difference estimate, coordinate by coordinate.
///
/// Returns `max |analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
/// The graph is replayed for every perturbation, so any structure fixed
/// at recording time (sampled neighbors, for instance) stays fixed. The
/// leaf is restored and the graph re-evaluated before returning.
pub fn finite_difference_check(g: &mut DiffGraph, loss: Var, wrt: Var, epsilon: f64) -> Result<f64> {
    let analytic = g.backward(loss)?.get(wrt);
    let original = g.value(wrt).clone();
    let mut worst = 0.0f64;

    for idx in 0..original.len() {
        let (r, c) = (idx / original.ncols(), idx % original.ncols());
        let mut probe = original.clone();

        probe[[r, c]] = original[[r, c]] + epsilon;
        g.set_input(wrt, probe.clone())?;
        g.evaluate()?;
        let plus = g.scalar(loss);

        probe[[r, c]] = original[[r, c]] - epsilon;
        g.set_input(wrt, probe)?;
        g.evaluate()?;
        let minus = g.scalar(loss);

        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic[[r, c]];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }

    g.set_input(wrt, original)?;
    g.evaluate()?;
    Ok(worst)
}
