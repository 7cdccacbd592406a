use std::f64::consts::PI;

use super::ForwardModel;
use crate::error::{ensure_dims, Result};

/// Peak location `2π/3` of the toy response.
pub const TOY_CENTER: f64 = 2.0 * PI / 3.0;

/// `g(u, q) = q exp(1 - 4.5 (u - 2π/3)^2)`, applied componentwise.
pub fn toy_forward(u: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    ensure_dims(u.len() == q.len(), || format!("u has {} entries, q has {}", u.len(), q.len()))?;
    Ok(u.iter()
        .zip(q)
        .map(|(u, q)| {
            let s = u - TOY_CENTER;
            q * (1.0 - 4.5 * s * s).exp()
        })
        .collect())
}

/// Two-component toy problem with multiplicative model error.
#[derive(Debug, Clone, Copy, Default)]
pub struct ToyModel;

impl ForwardModel for ToyModel {
    fn param_dim(&self) -> usize {
        2
    }
    fn error_dim(&self) -> usize {
        2
    }
    fn obs_dim(&self) -> usize {
        2
    }
    fn evaluate(&self, u: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        toy_forward(u, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        let g = toy_forward(&[TOY_CENTER], &[1.0]).unwrap();
        assert!((g[0] - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(toy_forward(&[0.3, 9.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        // 2π/3 = 2.0943951023931953; (2.4 - 2π/3)^2 = 0.0933945...
        let s: f64 = 2.4 - 2.094_395_102_393_195_3;
        let expect = (1.0 - 4.5 * s * s).exp();
        assert!((toy_forward(&[2.4], &[1.0]).unwrap()[0] - expect).abs() < 1e-15);
        // independent evaluation: 1.7855480689173318
        assert!((expect - 1.785_548_068_917_331_8).abs() < 1e-14);
    }

    #[test]
    fn even_about_center() {
        for k in 0..50 {
            let s = 0.037 * k as f64;
            let a = toy_forward(&[TOY_CENTER + s], &[1.3]).unwrap()[0];
            let b = toy_forward(&[TOY_CENTER - s], &[1.3]).unwrap()[0];
            assert!((a - b).abs() <= 1e-13 * a.abs().max(1e-300));
        }
    }
}
