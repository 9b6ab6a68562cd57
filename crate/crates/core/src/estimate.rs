use serde::{Deserialize, Serialize};

/// A Monte Carlo statistic with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub ci_level: f64,
}

pub const DEFAULT_CI_LEVEL: f64 = 0.95;

impl Estimate {
    /// From exact integer moments `sum x` and `sum x^2` over `n` samples.
    ///
    /// Integer accumulation keeps the result independent of reduction order.
    pub fn from_integer_moments(sum: i128, sum_sq: u128, n: u64) -> Estimate {
        let nf = n as f64;
        let mean = sum as f64 / nf;
        let var = if n > 1 {
            // n*sum_sq - sum^2 is exact in 128-bit for the ranges used here
            let num = (n as u128).checked_mul(sum_sq).and_then(|a| a.checked_sub((sum * sum) as u128));
            match num {
                Some(num) => num as f64 / (nf * (nf - 1.0)),
                None => ((sum_sq as f64 / nf) - mean * mean).max(0.0) * nf / (nf - 1.0),
            }
        } else {
            0.0
        };
        Estimate {
            value: mean,
            std_error: (var / nf).sqrt(),
            n_samples: n,
            ci_level: DEFAULT_CI_LEVEL,
        }
    }

    /// Bernoulli proportion `hits / n`.
    pub fn proportion(hits: u64, n: u64) -> Estimate {
        Self::from_integer_moments(hits as i128, hits as u128, n)
    }

    /// From real samples, summed in the given order.
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Estimate {
            value: mean,
            std_error: (var / n).sqrt(),
            n_samples: xs.len() as u64,
            ci_level: DEFAULT_CI_LEVEL,
        }
    }

    pub fn exact(value: f64) -> Estimate {
        Estimate {
            value,
            std_error: 0.0,
            n_samples: 1,
            ci_level: DEFAULT_CI_LEVEL,
        }
    }

    /// Normal-approximation interval at `ci_level`.
    pub fn confidence_interval(&self) -> (f64, f64) {
        let z = normal_quantile(0.5 + self.ci_level / 2.0);
        (self.value - z * self.std_error, self.value + z * self.std_error)
    }

    /// `(self - reference) / std_error`; infinite when the error is zero and the values differ.
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = self.value - reference;
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Acklam's rational approximation to the standard normal quantile.
fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let lo = 0.02425;
    if p < lo {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - lo {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_float_route() {
        let xs = [3i64, 0, 7, 2, 2, 9, 1];
        let sum: i128 = xs.iter().map(|&x| x as i128).sum();
        let sq: u128 = xs.iter().map(|&x| (x * x) as u128).sum();
        let a = Estimate::from_integer_moments(sum, sq, xs.len() as u64);
        let b = Estimate::from_samples(&xs.iter().map(|&x| x as f64).collect::<Vec<_>>());
        assert!((a.value - b.value).abs() < 1e-14);
        assert!((a.std_error - b.std_error).abs() < 1e-14);
    }

    #[test]
    fn proportion_error() {
        let e = Estimate::proportion(25, 100);
        let expect = (0.25f64 * 0.75 / 99.0).sqrt();
        assert!((e.std_error - expect).abs() < 1e-15);
    }

    #[test]
    fn interval_uses_196() {
        let e = Estimate { value: 0.0, std_error: 1.0, n_samples: 10, ci_level: 0.95 };
        let (lo, hi) = e.confidence_interval();
        assert!((hi - 1.959964).abs() < 1e-5 && (lo + 1.959964).abs() < 1e-5);
    }
}
