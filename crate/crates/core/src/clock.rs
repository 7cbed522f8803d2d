//! Two-state atomic clock deviation model.
//!
//! State is `[phase deviation (s), fractional frequency deviation]`, driven by
//! white frequency noise (σ₁²) and random-walk frequency noise (σ₂²):
//!
//! ```text
//! x[k+1] = [[1, τ], [0, 1]] x[k] + [τ, 1]ᵀ u[k] + v[k],   E[v vᵀ] = Q_s(τ)
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{psd_factor, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockParams {
    /// White frequency noise variance.
    pub sigma1_sq: f64,
    /// Random-walk frequency noise variance.
    pub sigma2_sq: f64,
}

impl ClockParams {
    pub const fn new(sigma1_sq: f64, sigma2_sq: f64) -> Self {
        Self {
            sigma1_sq,
            sigma2_sq,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1_sq >= 0.0 && self.sigma2_sq >= 0.0)
            || !self.sigma1_sq.is_finite()
            || !self.sigma2_sq.is_finite()
        {
            return Err(Error::Config(format!(
                "clock noise variances must be finite and >= 0, got ({}, {})",
                self.sigma1_sq, self.sigma2_sq
            )));
        }
        Ok(())
    }

    pub fn is_deterministic(&self) -> bool {
        self.sigma1_sq == 0.0 && self.sigma2_sq == 0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClockState {
    pub phase_dev: f64,
    pub freq_dev: f64,
}

impl ClockState {
    pub const fn new(phase_dev: f64, freq_dev: f64) -> Self {
        Self {
            phase_dev,
            freq_dev,
        }
    }
}

/// Clock embedded in a GNSS receiver: noise parameters plus the mean initial
/// phase offset Θ with respect to GNSS time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnssClockParams {
    pub params: ClockParams,
    pub theta0: f64,
}

/// State transition `A = [[1, τ], [0, 1]]`.
pub fn transition(tau: f64) -> Matrix {
    Matrix::from_row_slice(2, 2, &[1.0, tau, 0.0, 1.0])
}

/// Input matrix `B = [τ, 1]ᵀ`.
pub fn input(tau: f64) -> Matrix {
    Matrix::from_row_slice(2, 1, &[tau, 1.0])
}

/// Phase readout `C = [1, 0]`.
pub fn readout() -> Matrix {
    Matrix::from_row_slice(1, 2, &[1.0, 0.0])
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTau(tau))
    }
}

/// Per-step process noise covariance `Q_s(τ)`.
pub fn process_noise_cov(params: &ClockParams, tau: f64) -> Result<Matrix> {
    check_tau(tau)?;
    let (s1, s2) = (params.sigma1_sq, params.sigma2_sq);
    let cross = tau * tau * s2 / 2.0;
    Ok(Matrix::from_row_slice(
        2,
        2,
        &[tau * s1 + tau.powi(3) * s2 / 3.0, cross, cross, tau * s2],
    ))
}

/// One step of the deviation model with control `u` and noise `v`.
pub fn step_clock(state: ClockState, u: f64, v: [f64; 2], tau: f64) -> ClockState {
    ClockState {
        phase_dev: state.phase_dev + tau * state.freq_dev + tau * u + v[0],
        freq_dev: state.freq_dev + u + v[1],
    }
}

/// Draws one `v ~ N(0, Q_s(τ))` as `L ξ` with `L Lᵀ = Q_s` and `ξ` standard
/// normal. Always consumes exactly two normals from `rng`.
pub fn sample_process_noise<R: Rng + ?Sized>(
    params: &ClockParams,
    tau: f64,
    rng: &mut R,
) -> Result<[f64; 2]> {
    let l = psd_factor(&process_noise_cov(params, tau)?)?;
    let xi: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
    Ok([
        l[(0, 0)] * xi[0] + l[(0, 1)] * xi[1],
        l[(1, 0)] * xi[0] + l[(1, 1)] * xi[1],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn process_noise_examples() {
        let q = process_noise_cov(&ClockParams::new(1.0, 0.0), 1.0).unwrap();
        assert_eq!(q, Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));

        let q = process_noise_cov(&ClockParams::new(0.0, 3.0), 1.0).unwrap();
        assert_eq!(q, Matrix::from_row_slice(2, 2, &[1.0, 1.5, 1.5, 3.0]));

        let clock1 = ClockParams::new(0.0289e-18, 0.0227e-24);
        let q = process_noise_cov(&clock1, 1.0).unwrap();
        assert!(close(q[(0, 0)], 0.0289e-18 + 0.0227e-24 / 3.0, 1e-15));
        assert!(close(q[(0, 1)], 0.01135e-24, 1e-15));
        assert!(close(q[(1, 0)], 0.01135e-24, 1e-15));
        assert!(close(q[(1, 1)], 0.0227e-24, 1e-15));
    }

    #[test]
    fn process_noise_rejects_bad_tau() {
        let p = ClockParams::new(1.0, 1.0);
        assert_eq!(process_noise_cov(&p, 0.0), Err(Error::InvalidTau(0.0)));
        assert_eq!(process_noise_cov(&p, -1.0), Err(Error::InvalidTau(-1.0)));
    }

    #[test]
    fn step_examples() {
        let zero = ClockState::default();
        assert_eq!(step_clock(zero, 0.0, [0.0; 2], 1.0), zero);
        assert_eq!(
            step_clock(ClockState::new(0.0, 1e-12), 0.0, [0.0; 2], 1.0),
            ClockState::new(1e-12, 1e-12)
        );
        assert_eq!(
            step_clock(zero, 2e-13, [0.0; 2], 1.0),
            ClockState::new(2e-13, 2e-13)
        );
    }

    #[test]
    fn deterministic_clock_has_no_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let v = sample_process_noise(&ClockParams::new(0.0, 0.0), 1.0, &mut rng).unwrap();
            assert_eq!(v, [0.0, 0.0]);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = ClockParams::new(0.0289e-18, 0.0227e-24);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..32)
                .map(|_| sample_process_noise(&p, 1.0, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn sample_covariance_matches_qs() {
        // Monte Carlo oracle: 10^6 draws, 1% relative on entries >= 0.1 max.
        let p = ClockParams::new(0.3, 1.2);
        let tau = 1.0;
        let q = process_noise_cov(&p, tau).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000;
        let mut acc = [0.0_f64; 3];
        for _ in 0..n {
            let v = sample_process_noise(&p, tau, &mut rng).unwrap();
            acc[0] += v[0] * v[0];
            acc[1] += v[0] * v[1];
            acc[2] += v[1] * v[1];
        }
        let est = [acc[0] / n as f64, acc[1] / n as f64, acc[2] / n as f64];
        let truth = [q[(0, 0)], q[(0, 1)], q[(1, 1)]];
        let max = truth.iter().cloned().fold(0.0, f64::max);
        for (e, t) in est.iter().zip(truth) {
            if t.abs() >= 0.1 * max {
                assert!(close(*e, t, 0.01), "estimate {e} vs {t}");
            }
        }
    }

    #[test]
    fn qs_is_psd_over_parameter_grid() {
        for &s1 in &[0.0, 1e-20, 1.0, 7.0] {
            for &s2 in &[0.0, 1e-26, 0.5, 3.0] {
                for &tau in &[1e-3, 1.0, 10.0, 1000.0] {
                    let q = process_noise_cov(&ClockParams::new(s1, s2), tau).unwrap();
                    let det = q[(0, 0)] * q[(1, 1)] - q[(0, 1)] * q[(1, 0)];
                    let closed = tau.powi(2) * s1 * s2 + tau.powi(4) * s2 * s2 / 12.0;
                    // the 2x2 determinant cancels down from q00 q11
                    let scale = q[(0, 0)] * q[(1, 1)];
                    assert!(closed >= 0.0);
                    assert!((det - closed).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE));
                    assert!(psd_factor(&q).is_ok());
                }
            }
        }
    }
}
