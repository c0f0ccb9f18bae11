//! Seed aggregation: mean, standard deviation and a Student-t 95% interval.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Result, RtgError};

/// Two-sided 95% Student-t critical values `t_{0.975, df}` for df = 1..=30.
const T975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
    2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
];

/// `t_{0.975, df}`: tabulated up to 30 degrees of freedom, computed beyond.
pub fn t_quantile_975(df: usize) -> f64 {
    match df {
        0 => f64::NAN,
        1..=30 => T975[df - 1],
        _ => StudentsT::new(0.0, 1.0, df as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdConvention {
    /// Divisor `s`; `ci95 = t * std / sqrt(s - 1)`.
    #[default]
    Population,
    /// Divisor `s - 1`; `ci95 = t * std / sqrt(s)`.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub ci95: f64,
}

/// Both conventions yield the same interval half-width; only `std` differs.
pub fn aggregate(values: &[f64], convention: StdConvention) -> Result<Aggregate> {
    let s = values.len();
    if s < 2 {
        return Err(RtgError::TooFewValues(s));
    }
    let n = s as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let t = t_quantile_975(s - 1);
    let (std, ci95) = match convention {
        StdConvention::Population => {
            let std = (ss / n).sqrt();
            (std, t * std / (n - 1.0).sqrt())
        }
        StdConvention::Sample => {
            let std = (ss / (n - 1.0)).sqrt();
            (std, t * std / n.sqrt())
        }
    };
    Ok(Aggregate { mean, std, ci95 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_to_five() {
        let a = aggregate(&[1.0, 2.0, 3.0, 4.0, 5.0], StdConvention::Population).unwrap();
        assert_eq!(a.mean, 3.0);
        assert!((a.std - 2f64.sqrt()).abs() < 1e-12);
        // 2.776 * sqrt(2) / 2
        assert!((a.ci95 - 1.962_90).abs() < 1e-4);
    }

    #[test]
    fn constant_values() {
        let a = aggregate(&[7.0; 5], StdConvention::Population).unwrap();
        assert_eq!((a.mean, a.std, a.ci95), (7.0, 0.0, 0.0));
    }

    #[test]
    fn ratio_for_five_values() {
        // Five values: ci95 / std = t_4 / 2.
        let a = aggregate(&[11.0, 20.0, 15.5, 15.5, 15.5], StdConvention::Population).unwrap();
        assert!((a.ci95 / a.std - 1.388).abs() < 1e-3);
    }

    #[test]
    fn conventions_share_interval() {
        let v = [0.3, 1.7, 2.2, 0.9, 5.0, 3.3];
        let p = aggregate(&v, StdConvention::Population).unwrap();
        let s = aggregate(&v, StdConvention::Sample).unwrap();
        assert!((p.ci95 - s.ci95).abs() < 1e-12);
        assert!(s.std > p.std);
    }

    #[test]
    fn too_few_values() {
        assert!(matches!(
            aggregate(&[1.0], StdConvention::Population),
            Err(RtgError::TooFewValues(1))
        ));
    }

    #[test]
    fn table_agrees_with_distribution() {
        for df in 1..=30 {
            let exact = StudentsT::new(0.0, 1.0, df as f64).unwrap().inverse_cdf(0.975);
            assert!((t_quantile_975(df) - exact).abs() < 1e-3, "df {df}");
        }
        assert!((t_quantile_975(1000) - 1.962).abs() < 1e-3);
    }
}
