use crate::ensemble::tempered_ess;
use crate::error::{Error, Result};

/// Smallest temperature increment the bisection resolves.
pub const MIN_INCREMENT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureStep {
    pub phi: f64,
    /// ESS criterion value at the chosen increment.
    pub ess: f64,
    /// The threshold could not be met even at the minimum increment.
    pub stalled: bool,
}

/// Largest `φ` in `(φ_prev, 1]` whose bridging weights keep
/// `ESS >= m_thresh`.
pub fn select_temperature(misfits: &[f64], phi_prev: f64, m_thresh: f64) -> Result<TemperatureStep> {
    let size = misfits.len() as f64;
    if !(m_thresh > 1.0 && m_thresh < size) {
        return Err(Error::InvalidInput(format!("ESS threshold {m_thresh} outside (1, {size})")));
    }
    select_temperature_by(|dphi| tempered_ess(misfits, dphi), phi_prev, m_thresh)
}

/// Same search for an arbitrary ESS criterion `ess(Δφ)`, assumed
/// non-increasing in the increment.
pub fn select_temperature_by<F>(ess: F, phi_prev: f64, m_thresh: f64) -> Result<TemperatureStep>
where
    F: Fn(f64) -> f64,
{
    if !(0.0..1.0).contains(&phi_prev) {
        return Err(Error::InvalidInput(format!("previous temperature {phi_prev} outside [0, 1)")));
    }
    let remaining = 1.0 - phi_prev;
    let full = ess(remaining);
    if full >= m_thresh {
        return Ok(TemperatureStep { phi: 1.0, ess: full, stalled: false });
    }
    let floor = MIN_INCREMENT.min(remaining);
    let at_floor = ess(floor);
    if at_floor < m_thresh {
        let phi = if phi_prev + floor >= 1.0 { 1.0 } else { phi_prev + floor };
        return Ok(TemperatureStep { phi, ess: at_floor, stalled: true });
    }
    let (mut lo, mut hi, mut ess_lo) = (floor, remaining, at_floor);
    while hi - lo > MIN_INCREMENT {
        let mid = 0.5 * (lo + hi);
        let e = ess(mid);
        if e >= m_thresh {
            lo = mid;
            ess_lo = e;
        } else {
            hi = mid;
        }
    }
    let phi = (phi_prev + lo).min(1.0);
    Ok(TemperatureStep { phi, ess: ess_lo, stalled: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_misfits_jump_to_one() {
        let s = select_temperature(&[3.0; 10], 0.0, 5.0).unwrap();
        assert_eq!(s.phi, 1.0);
        assert!(!s.stalled);
    }

    #[test]
    fn cap_at_one() {
        let s = select_temperature(&[0.0, 0.1, 0.2, 0.05], 0.4, 2.0).unwrap();
        assert_eq!(s.phi, 1.0);
    }

    #[test]
    fn two_member_root() {
        // ESS(Δ) = (1 + e^{-Δc/2})^2 / (1 + e^{-Δc}); solve ESS = 1.5 in closed form.
        // With x = e^{-Δc/2}: (1+x)^2 = 1.5 (1 + x^2)  =>  0.5 x^2 - 2x + 0.5 = 0.
        let c = 40.0;
        let x = 2.0 - 3f64.sqrt();
        let root = -2.0 * x.ln() / c;
        let s = select_temperature(&[0.0, c], 0.0, 1.5).unwrap();
        assert!((s.phi - root).abs() < 2e-8, "{} vs {root}", s.phi);
        assert!(s.ess >= 1.5);
    }

    #[test]
    fn stall_is_flagged() {
        let s = select_temperature(&[0.0, 1e12, 1e12], 0.2, 2.5).unwrap();
        assert!(s.stalled);
        assert!((s.phi - (0.2 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_threshold() {
        assert!(select_temperature(&[0.0, 1.0], 0.0, 2.0).is_err());
        assert!(select_temperature(&[0.0, 1.0, 2.0], 0.0, 1.0).is_err());
        assert!(select_temperature(&[0.0, 1.0, 2.0], 1.0, 1.5).is_err());
    }
}
