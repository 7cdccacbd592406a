//! Scalar transport by sorting: the optimal coupling for a convex cost on
//! the line is the monotone rearrangement of cumulative masses.

use nalgebra::DMatrix;

use super::plan::TransportPlan;
use crate::ensemble::WeightVector;
use crate::error::{ensure_dims, Error, Result};

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

/// Calls `visit(source, target, mass)` for every nonzero cell of the
/// monotone coupling.
fn monotone_coupling(values: &[f64], w: &[f64], mut visit: impl FnMut(usize, usize, f64)) {
    let m = w.len();
    let order = sorted_order(values);
    let inv_m = 1.0 / m as f64;

    // cumulative source mass in sorted order; the last boundary is exactly 1
    let mut src_hi = Vec::with_capacity(m);
    let mut acc = 0.0;
    for &i in &order {
        acc += w[i];
        src_hi.push(acc);
    }
    src_hi[m - 1] = 1.0;

    let (mut a, mut b) = (0usize, 0usize);
    let mut src_lo: f64 = 0.0;
    while a < m && b < m {
        let tgt_lo = b as f64 * inv_m;
        let tgt_hi = if b + 1 == m { 1.0 } else { (b + 1) as f64 * inv_m };
        let lo = src_lo.max(tgt_lo);
        let hi = src_hi[a].min(tgt_hi);
        if hi > lo {
            visit(order[a], order[b], hi - lo);
        }
        if src_hi[a] <= tgt_hi {
            src_lo = src_hi[a];
            a += 1;
        } else {
            b += 1;
        }
    }
}

fn check(values: &[f64], w: &WeightVector) -> Result<()> {
    ensure_dims(values.len() == w.len(), || format!("{} values for {} weights", values.len(), w.len()))?;
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in scalar transport".into()));
    }
    Ok(())
}

/// Optimal plan for the squared-difference cost of scalar values, in
/// `O(M log M)` (plus the dense output).
pub fn solve_ot_1d(values: &[f64], w: &WeightVector) -> Result<TransportPlan> {
    check(values, w)?;
    let m = w.len();
    let mut entries = DMatrix::zeros(m, m);
    monotone_coupling(values, w.as_slice(), |i, j, mass| entries[(i, j)] += mass);
    Ok(TransportPlan::from_parts(entries, w.as_slice().to_vec()))
}

/// Transformed scalar ensemble `ṽ_j = M Σ_i v_i s_ij` under the monotone
/// plan, without materializing the plan.
pub fn transform_1d(values: &[f64], w: &WeightVector) -> Result<Vec<f64>> {
    check(values, w)?;
    let m = w.len();
    let mut out = vec![0.0; m];
    monotone_coupling(values, w.as_slice(), |i, j, mass| out[j] += mass * values[i]);
    let scale = m as f64;
    out.iter_mut().for_each(|x| *x *= scale);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_identity() {
        let vals = [0.3, -1.0, 2.5, 0.0];
        let plan = solve_ot_1d(&vals, &WeightVector::uniform(4)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 0.25 } else { 0.0 };
                assert!((plan.entries()[(i, j)] - expect).abs() < 1e-15);
            }
        }
        assert_eq!(transform_1d(&vals, &WeightVector::uniform(4)).unwrap(), vals.to_vec());
    }

    #[test]
    fn ties_keep_marginals() {
        let vals = [1.0, 1.0, 0.0, 1.0, 0.0];
        let w = WeightVector::new(vec![0.1, 0.3, 0.05, 0.5, 0.05]).unwrap();
        let plan = solve_ot_1d(&vals, &w).unwrap();
        assert!(plan.marginal_error() < 1e-15);
    }

    #[test]
    fn transform_matches_dense_plan() {
        let vals = [0.5, -0.2, 1.7, 0.9, 0.1, -3.0];
        let w = WeightVector::new(vec![0.05, 0.2, 0.3, 0.15, 0.25, 0.05]).unwrap();
        let plan = solve_ot_1d(&vals, &w).unwrap();
        let dense = crate::transport::transform(&DMatrix::from_row_slice(1, 6, &vals), &plan).unwrap();
        let fast = transform_1d(&vals, &w).unwrap();
        for j in 0..6 {
            assert!((dense[(0, j)] - fast[j]).abs() < 1e-14);
        }
        let wmean: f64 = vals.iter().zip(w.as_slice()).map(|(v, w)| v * w).sum();
        let omean: f64 = fast.iter().sum::<f64>() / 6.0;
        assert!((wmean - omean).abs() < 1e-14);
    }
}
