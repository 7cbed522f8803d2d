//! Allan variance: closed forms for free-running clocks and ensemble means,
//! and the fully overlapping estimator on phase series.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::clock::ClockParams;
use crate::error::{Error, Result};

/// `σ₁²/τ + τσ₂²/3`.
pub fn avar_analytical(params: &ClockParams, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidTau(tau));
    }
    Ok(params.sigma1_sq / tau + tau * params.sigma2_sq / 3.0)
}

/// `(1/τ²) qᵀ Γ(τ) q` with `Γ = τ Σ₁ + (τ³/3) Σ₂` for independent clocks.
pub fn avar_ensemble_mean(params: &[ClockParams], tau: f64, q: &[f64]) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidTau(tau));
    }
    if params.len() != q.len() {
        return Err(Error::DimensionMismatch(format!("{} clocks, {} weights", params.len(), q.len())));
    }
    let sum: f64 = q.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::WeightsNotNormalized(sum));
    }
    let gamma: f64 = params
        .iter()
        .zip(q)
        .map(|(p, w)| w * w * (tau * p.sigma1_sq + tau.powi(3) / 3.0 * p.sigma2_sq))
        .sum();
    Ok(gamma / (tau * tau))
}

/// Fully overlapping estimate at averaging time `w·τ`:
/// `1/(T−2w) Σ_k (d[k+2w] − 2d[k+w] + d[k])² / (2(wτ)²)`.
pub fn avar_statistical(d: &[f64], tau: f64, w: usize) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidTau(tau));
    }
    let len = d.len();
    if w == 0 || len <= 2 * w {
        return Err(Error::SeriesTooShort { len, w });
    }
    let terms = len - 2 * w;
    let sum: f64 = (0..terms)
        .map(|k| {
            let dd = d[k + 2 * w] - 2.0 * d[k + w] + d[k];
            dd * dd
        })
        .sum();
    let wt = w as f64 * tau;
    Ok(sum / terms as f64 / (2.0 * wt * wt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvarKind {
    AnalyticalFree,
    AnalyticalMean,
    Statistical,
}

impl AvarKind {
    pub fn name(self) -> &'static str {
        match self {
            AvarKind::AnalyticalFree => "analytical_free",
            AvarKind::AnalyticalMean => "analytical_mean",
            AvarKind::Statistical => "statistical",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [AvarKind::AnalyticalFree, AvarKind::AnalyticalMean, AvarKind::Statistical]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown AVAR kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvarCurve {
    pub entity: String,
    pub kind: AvarKind,
    /// `(τ, AVAR)` with strictly increasing τ.
    pub points: Vec<(f64, f64)>,
}

fn check_taus(taus: &[f64]) -> Result<()> {
    if taus.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("averaging times must be strictly increasing".into()));
    }
    Ok(())
}

pub fn analytical_curve(entity: &str, params: &ClockParams, taus: &[f64]) -> Result<AvarCurve> {
    check_taus(taus)?;
    Ok(AvarCurve {
        entity: entity.to_string(),
        kind: AvarKind::AnalyticalFree,
        points: taus
            .iter()
            .map(|&t| Ok((t, avar_analytical(params, t)?)))
            .collect::<Result<_>>()?,
    })
}

pub fn ensemble_mean_curve(entity: &str, params: &[ClockParams], q: &[f64], taus: &[f64]) -> Result<AvarCurve> {
    check_taus(taus)?;
    Ok(AvarCurve {
        entity: entity.to_string(),
        kind: AvarKind::AnalyticalMean,
        points: taus
            .iter()
            .map(|&t| Ok((t, avar_ensemble_mean(params, t, q)?)))
            .collect::<Result<_>>()?,
    })
}

/// Window count for averaging time `tau` on a series sampled every
/// `sample_interval`.
pub fn window_for(tau: f64, sample_interval: f64) -> Result<usize> {
    let ratio = tau / sample_interval;
    let w = ratio.round();
    if !(w >= 1.0) || (ratio - w).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::NonIntegerWindow { tau, sample: sample_interval });
    }
    Ok(w as usize)
}

pub fn statistical_curve(entity: &str, series: &[f64], sample_interval: f64, taus: &[f64]) -> Result<AvarCurve> {
    check_taus(taus)?;
    Ok(AvarCurve {
        entity: entity.to_string(),
        kind: AvarKind::Statistical,
        points: taus
            .iter()
            .map(|&t| {
                let w = window_for(t, sample_interval)?;
                Ok((t, avar_statistical(series, sample_interval, w)?))
            })
            .collect::<Result<_>>()?,
    })
}

/// Pointwise mean of curves sharing the same τ grid.
pub fn mean_curve(entity: &str, curves: &[AvarCurve]) -> Result<AvarCurve> {
    let first = curves.first().ok_or_else(|| Error::Config("no curves to average".into()))?;
    if curves.iter().any(|c| c.points.len() != first.points.len()) {
        return Err(Error::DimensionMismatch("curves have different τ grids".into()));
    }
    let points = (0..first.points.len())
        .map(|p| {
            let tau = first.points[p].0;
            if curves.iter().any(|c| c.points[p].0 != tau) {
                return Err(Error::DimensionMismatch("curves have different τ grids".into()));
            }
            Ok((tau, curves.iter().map(|c| c.points[p].1).sum::<f64>() / curves.len() as f64))
        })
        .collect::<Result<_>>()?;
    Ok(AvarCurve {
        entity: entity.to_string(),
        kind: first.kind,
        points,
    })
}

pub const CSV_HEADER: &str = "tau_s,avar,entity,kind";

/// Writes `tau_s,avar,entity,kind` rows with 17 significant digits.
pub fn write_csv<W: Write>(curves: &[AvarCurve], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for c in curves {
        for &(tau, v) in &c.points {
            writeln!(w, "{:.16e},{:.16e},{},{}", tau, v, c.entity, c.kind.name())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::TABLE_I;

    #[test]
    fn analytical_examples() {
        assert_eq!(avar_analytical(&ClockParams::new(1.0, 0.0), 1.0).unwrap(), 1.0);
        let c1 = avar_analytical(&TABLE_I[0], 1.0).unwrap();
        assert!((c1 - (0.0289e-18 + 0.0227e-24 / 3.0)).abs() < 1e-32);
        assert!((c1 - 2.8901e-20).abs() < 1e-24);
        assert!((avar_analytical(&ClockParams::new(0.0, 3.0), 2.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(avar_analytical(&TABLE_I[0], 0.0), Err(Error::InvalidTau(0.0)));
    }

    #[test]
    fn ensemble_mean_examples() {
        let p = ClockParams::new(2.0, 0.5);
        let single = avar_analytical(&p, 3.0).unwrap();
        let mean = avar_ensemble_mean(&[p; 4], 3.0, &[0.25; 4]).unwrap();
        assert!((mean - single / 4.0).abs() < 1e-15);
        assert!((avar_ensemble_mean(&[p], 3.0, &[1.0]).unwrap() - single).abs() < 1e-15);

        let by_hand: f64 = TABLE_I.iter().map(|c| c.sigma1_sq + c.sigma2_sq / 3.0).sum::<f64>() / 9.0;
        let m = avar_ensemble_mean(&TABLE_I, 1.0, &[1.0 / 3.0; 3]).unwrap();
        assert!((m - by_hand).abs() <= 1e-14 * by_hand);

        assert!(matches!(
            avar_ensemble_mean(&TABLE_I, 1.0, &[0.5, 0.5, 0.5]),
            Err(Error::WeightsNotNormalized(_))
        ));
    }

    #[test]
    fn ensemble_mean_below_worst_clock() {
        for &tau in &[1.0, 10.0, 1e3, 1e5, 1e7] {
            let m = avar_ensemble_mean(&TABLE_I, tau, &[1.0 / 3.0; 3]).unwrap();
            let worst = TABLE_I
                .iter()
                .map(|c| avar_analytical(c, tau).unwrap())
                .fold(0.0, f64::max);
            assert!(m <= worst);
        }
    }

    #[test]
    fn statistical_examples() {
        assert_eq!(avar_statistical(&[3.0; 10], 1.0, 2).unwrap(), 0.0);
        let ramp: Vec<f64> = (0..20).map(|k| 0.5 * k as f64).collect();
        assert_eq!(avar_statistical(&ramp, 1.0, 3).unwrap(), 0.0);
        let sq: Vec<f64> = (0..30).map(|k| (k * k) as f64).collect();
        assert_eq!(avar_statistical(&sq, 1.0, 1).unwrap(), 2.0);
        assert_eq!(avar_statistical(&[0.0; 4], 1.0, 2), Err(Error::SeriesTooShort { len: 4, w: 2 }));
    }

    #[test]
    fn curves() {
        let c = statistical_curve("c", &[1.0; 5], 1.0, &[1.0]).unwrap();
        assert_eq!(c.points, vec![(1.0, 0.0)]);
        let taus = [1.0, 10.0, 100.0, 1000.0];
        let a = analytical_curve("clock1", &TABLE_I[0], &taus).unwrap();
        for (t, v) in &a.points {
            assert_eq!(*v, avar_analytical(&TABLE_I[0], *t).unwrap());
        }
        assert!(matches!(
            statistical_curve("c", &[1.0; 50], 2.0, &[3.0]),
            Err(Error::NonIntegerWindow { .. })
        ));
        assert!(statistical_curve("c", &[1.0; 50], 1.0, &[4.0, 2.0]).is_err());
        assert_eq!(window_for(800.0, 1.0).unwrap(), 800);
    }

    #[test]
    fn csv_format() {
        let c = AvarCurve {
            entity: "mac1".into(),
            kind: AvarKind::Statistical,
            points: vec![(1.0, 2.8901e-20)],
        };
        let mut buf = Vec::new();
        write_csv(&[c], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "tau_s,avar,entity,kind\n1.0000000000000000e0,2.8901000000000002e-20,mac1,statistical\n"
        );
    }
}
