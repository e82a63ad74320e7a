use bnsim_core::BeliefTable;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("belief tables have different shapes")]
pub struct ShapeMismatch;

/// Root mean squared error over every (node, state) cell.
///
/// An undefined estimate holds zeros, so each of its cells is charged the
/// full exact value.
pub fn rmse(estimate: &BeliefTable, exact: &BeliefTable) -> Result<f64, ShapeMismatch> {
    if !estimate.same_shape(exact) {
        return Err(ShapeMismatch);
    }
    let mut sum = 0.0;
    let mut cells = 0usize;
    for (a, b) in estimate.rows().iter().zip(exact.rows()) {
        for (x, y) in a.iter().zip(b) {
            sum += (x - y) * (x - y);
            cells += 1;
        }
    }
    Ok(if cells == 0 { 0.0 } else { (sum / cells as f64).sqrt() })
}
