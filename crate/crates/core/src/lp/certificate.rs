//! Dual witness for tight solutions.

use serde::Serialize;

use super::{loose_vertex_mask, vertex_sums, Alpha, LpInstance};
use crate::error::{Error, Result};
use crate::fixed::Fixed;

#[derive(Clone, Debug, Serialize)]
pub struct DualCertificate {
    pub y: Vec<bool>,
    pub z: Vec<bool>,
    /// `sum_v b_v y_v + sum_e r_e z_e`, an upper bound on the LP optimum.
    pub dual_value: Fixed,
    pub primal_value: Fixed,
}

/// `y_v = 1` for tight vertices, `z_e = 1` for tight edges. Checks dual
/// feasibility and `sum x >= (alpha / 3) * dual value`.
pub fn dual_certificate(inst: &LpInstance, x: &[Fixed], alpha: Alpha) -> Result<DualCertificate> {
    if alpha.num == 0 {
        return Err(Error::Precondition("alpha must be positive".into()));
    }
    let g = inst.graph;
    let sums = vertex_sums(g, x);
    let y: Vec<bool> = loose_vertex_mask(inst, &sums, alpha).into_iter().map(|l| !l).collect();
    let z: Vec<bool> = (0..g.m()).map(|e| x[e].ge_scaled(alpha.den as u128, inst.cap(e), alpha.num as u128)).collect();
    for e in 0..g.m() {
        let (u, v) = g.endpoints(e);
        if !(y[u] || y[v] || z[e]) {
            return Err(Error::NotTight {
                alpha: alpha.to_string(),
                detail: format!("edge {e} = ({u}, {v}) is uncovered"),
            });
        }
    }
    let dual_value = (0..g.n()).filter(|&v| y[v]).map(|v| inst.b[v]).sum::<Fixed>()
        + (0..g.m()).filter(|&e| z[e]).map(|e| inst.cap(e)).sum::<Fixed>();
    let primal_value: Fixed = x.iter().sum();
    if primal_value.lt_scaled(3 * alpha.den as u128, dual_value, alpha.num as u128) {
        return Err(Error::NotTight {
            alpha: alpha.to_string(),
            detail: format!("primal {primal_value} below alpha/3 of dual {dual_value}"),
        });
    }
    Ok(DualCertificate { y, z, dual_value, primal_value })
}
