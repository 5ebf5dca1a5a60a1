//! Summary statistics and Student-t intervals for Monte Carlo estimates.

use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    /// Two-sided confidence level of `ci_low..ci_high`.
    pub level: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Summary {
    /// Mean, sample standard deviation and a two-sided Student-t interval.
    /// With fewer than two samples the interval collapses onto the mean.
    pub fn from_samples(samples: &[f64], level: f64) -> Self {
        assert!(level > 0.0 && level < 1.0, "confidence level must be in (0, 1)");
        let n = samples.len();
        if n == 0 {
            return Self {
                n,
                mean: f64::NAN,
                std_dev: f64::NAN,
                std_error: f64::NAN,
                level,
                ci_low: f64::NAN,
                ci_high: f64::NAN,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Self {
                n,
                mean,
                std_dev: 0.0,
                std_error: 0.0,
                level,
                ci_low: mean,
                ci_high: mean,
            };
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std_dev = var.sqrt();
        let std_error = std_dev / (n as f64).sqrt();
        let half = t_quantile(level, n - 1) * std_error;
        Self {
            n,
            mean,
            std_dev,
            std_error,
            level,
            ci_low: mean - half,
            ci_high: mean + half,
        }
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    /// True when the two intervals do not overlap and `self` lies above.
    pub fn separated_above(&self, other: &Summary) -> bool {
        self.ci_low > other.ci_high
    }

    pub fn overlaps(&self, other: &Summary) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Two-sided Student-t critical value `t_{(1+level)/2, dof}`.
pub fn t_quantile(level: f64, dof: usize) -> f64 {
    let t = StudentsT::new(0.0, 1.0, dof as f64).expect("dof >= 1");
    t.inverse_cdf(0.5 + level / 2.0)
}

/// Two-sided p-value of Welch's unequal-variance t-test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> f64 {
    let sa = Summary::from_samples(a, 0.95);
    let sb = Summary::from_samples(b, 0.95);
    let va = sa.std_dev.powi(2) / a.len() as f64;
    let vb = sb.std_dev.powi(2) / b.len() as f64;
    let se = (va + vb).sqrt();
    if se == 0.0 {
        return if sa.mean == sb.mean { 1.0 } else { 0.0 };
    }
    let t = (sa.mean - sb.mean) / se;
    let dof = (va + vb).powi(2)
        / (va.powi(2) / (a.len() - 1) as f64 + vb.powi(2) / (b.len() - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
    2.0 * (1.0 - dist.cdf(t.abs()))
}
