//! Characteristic-function evaluation of `P(X_{sigma_n} = 0)` and series
//! diagnostics for the return criterion: the walk is recurrent exactly when
//! `sum_n P(X_{sigma_n} = 0)` diverges.
//!
//! A horizontal burst has law `P(xi = k) = p q^k` with `p = 2/3`, `q = 1/3`,
//! so `E exp(i theta xi) = chi(theta) = p / (1 - q e^{i theta})`. Writing
//! `chi = r e^{i alpha}` and `f(s) = 1 - sqrt(1 - s^2)` for the generating
//! function of the first return time of the skeleton:
//!
//! ```text
//! alternate:  E exp(i theta X_{sigma_n}) = f(r)^n
//! half-plane: E exp(i theta X_{sigma_n}) = g(theta)^n,
//!             g = (1/2) e^{i alpha} [f(chi) e^{-i alpha} + f(conj chi) e^{i alpha}]
//! ```
//!
//! and `P(X_{sigma_n} = 0)` is the zeroth Fourier coefficient.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::Estimate;
use crate::lattice::EnvironmentSpec;
use crate::parallel;
use crate::quadrature::{geometric_breakpoints, integrate};
use crate::skeleton::{estimate_x_sigma_zero, SigmaZeroEstimate};

pub const P: f64 = 2.0 / 3.0;
pub const Q: f64 = 1.0 / 3.0;

/// Absolute quadrature tolerance per series term.
pub const TERM_TOLERANCE: f64 = 1e-10;
/// Largest tolerated imaginary part of a half-plane term.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

const MAX_INTERVALS: usize = 50_000;
/// Panels at `pi 2^{-k}`; integrands vary on the scale `1/n` near 0.
const BREAKPOINT_LEVELS: u32 = 48;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharFunctionValue {
    pub theta: f64,
    pub chi: Complex64,
    pub r: f64,
    pub alpha: f64,
}

pub fn chi(theta: f64) -> CharFunctionValue {
    let denom = Complex64::new(1.0 - Q * theta.cos(), -Q * theta.sin());
    let chi = Complex64::new(P, 0.0) / denom;
    // |1 - q e^{i theta}| >= 1 - q > 0, so alpha stays in (-pi/2, pi/2)
    let r = P / (1.0 + Q * Q - 2.0 * Q * theta.cos()).sqrt();
    let alpha = (Q * theta.sin()).atan2(1.0 - Q * theta.cos());
    CharFunctionValue { theta, chi, r, alpha }
}

/// `1 - r(theta)^2` without cancellation near `theta = 0`.
pub fn one_minus_r_squared(theta: f64) -> f64 {
    let s = (0.5 * theta).sin();
    let num = 4.0 * Q * s * s;
    num / ((1.0 - Q) * (1.0 - Q) + num)
}

/// `E s^{sigma_1} = 1 - sqrt(1 - s^2)` for the simple symmetric walk.
pub fn first_return_gf(s: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&s));
    1.0 - (1.0 - s * s).max(0.0).sqrt()
}

fn f_of_r(theta: f64) -> f64 {
    1.0 - one_minus_r_squared(theta).sqrt()
}

/// `1 - chi(theta)^2 = q (1 - e) (1 + p - q e) / (1 - q e)^2`, `e = e^{i theta}`.
fn one_minus_chi_squared(theta: f64) -> Complex64 {
    let e = Complex64::from_polar(1.0, theta);
    let one = Complex64::new(1.0, 0.0);
    let d = one - e * Q;
    (one - e) * (one * (1.0 + P) - e * Q) * Q / (d * d)
}

/// Characteristic function of `X_{sigma_1}` on the half-plane lattice.
pub fn g_h(theta: f64) -> Complex64 {
    let c = chi(theta);
    let w = one_minus_chi_squared(theta);
    let one = Complex64::new(1.0, 0.0);
    let f_chi = one - w.sqrt();
    let f_conj = one - w.conj().sqrt();
    let rot = Complex64::from_polar(1.0, c.alpha);
    0.5 * rot * (f_chi * rot.conj() + f_conj * rot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermValue {
    pub n: u64,
    pub value: f64,
    pub quad_error: f64,
}

/// `P(X_{sigma_n} = 0)` on the alternate lattice.
pub fn prob_x_sigma_zero_l(n: u64) -> Result<TermValue> {
    prob_x_sigma_zero_l_tol(n, TERM_TOLERANCE)
}

pub fn prob_x_sigma_zero_l_tol(n: u64, tol: f64) -> Result<TermValue> {
    check_index(n)?;
    let exp = n as i32;
    let pts = geometric_breakpoints(std::f64::consts::PI, BREAKPOINT_LEVELS);
    // even integrand: (1/2pi) int_{-pi}^{pi} = (1/pi) int_0^pi
    let res = integrate(|t| f_of_r(t).powi(exp), &pts, tol * std::f64::consts::PI, MAX_INTERVALS)?;
    Ok(TermValue {
        n,
        value: res.value / std::f64::consts::PI,
        quad_error: res.error / std::f64::consts::PI,
    })
}

/// `P(X_{sigma_n} = 0)` on the half-plane lattice.
///
/// Integrates `g(theta)^n + g(-theta)^n` over `[0, pi]` with both halves
/// evaluated directly, so the vanishing imaginary part is a genuine check.
pub fn prob_x_sigma_zero_h(n: u64) -> Result<TermValue> {
    prob_x_sigma_zero_h_tol(n, TERM_TOLERANCE)
}

pub fn prob_x_sigma_zero_h_tol(n: u64, tol: f64) -> Result<TermValue> {
    check_index(n)?;
    let exp = n as u32;
    let pts = geometric_breakpoints(std::f64::consts::PI, BREAKPOINT_LEVELS);
    let two_pi = 2.0 * std::f64::consts::PI;
    let res = integrate(
        |t| g_h(t).powu(exp) + g_h(-t).powu(exp),
        &pts,
        tol * two_pi,
        MAX_INTERVALS,
    )?;
    let value = res.value / two_pi;
    if value.im.abs() > IMAGINARY_TOLERANCE {
        return Err(Error::Contract(format!(
            "half-plane term {n} has imaginary part {:e}",
            value.im
        )));
    }
    Ok(TermValue { n, value: value.re, quad_error: res.error / two_pi })
}

fn check_index(n: u64) -> Result<()> {
    if n == 0 || n > i32::MAX as u64 {
        return Err(Error::InvalidArgument(format!("term index {n} out of range")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesKind {
    Alternate,
    HalfPlane,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Increment {
    /// `S_{2N} - S_N` for this `N`.
    pub n: u64,
    pub increment: f64,
    /// Summed quadrature error of terms `N+1..=2N`.
    pub quad_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDiagnostic {
    pub kind: SeriesKind,
    pub tolerance: f64,
    pub terms: Vec<TermValue>,
    /// Index `N - 1` holds `S_N`.
    pub partial_sums: Vec<f64>,
    pub total_quad_error: f64,
    /// Dyadic `N` with `2N` within range.
    pub increments: Vec<Increment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceVerdict {
    pub holds: bool,
    pub min_increment: f64,
    pub max_increment: f64,
    /// `(max - min) / min` over the tested increments.
    pub relative_spread: f64,
}

impl SeriesDiagnostic {
    pub fn partial_sum(&self, n: u64) -> f64 {
        self.partial_sums[n as usize - 1]
    }

    pub fn increments_in(&self, lo: u64, hi: u64) -> impl Iterator<Item = &Increment> {
        self.increments.iter().filter(move |i| i.n >= lo && i.n <= hi)
    }

    /// Increments over dyadic `N` in `[lo, hi]` all at least `min_increment`
    /// and within `max_spread` of one another.
    pub fn divergence_verdict(&self, lo: u64, hi: u64, min_increment: f64, max_spread: f64) -> DivergenceVerdict {
        let incs: Vec<f64> = self.increments_in(lo, hi).map(|i| i.increment).collect();
        let min = incs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = incs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let spread = (max - min) / min;
        DivergenceVerdict {
            holds: !incs.is_empty() && min >= min_increment && spread <= max_spread,
            min_increment: min,
            max_increment: max,
            relative_spread: spread,
        }
    }

    /// Smallest dyadic `N` from which every computed `|S_{2N} - S_N|` is below `tol`.
    pub fn cauchy_threshold(&self, tol: f64) -> Option<u64> {
        let mut found = None;
        for inc in self.increments.iter().rev() {
            if inc.increment.abs() < tol {
                found = Some(inc.n);
            } else {
                break;
            }
        }
        found
    }

    /// `2 S_{2N} - S_N` at the largest available dyadic `N`: exact for terms `c / n^2`
    /// up to `O(N^{-2})`.
    pub fn richardson_limit(&self) -> Option<f64> {
        let last = self.increments.last()?;
        Some(self.partial_sum(2 * last.n) + last.increment)
    }
}

pub fn partial_sum_l(n_max: u64) -> Result<SeriesDiagnostic> {
    partial_sum(SeriesKind::Alternate, n_max, TERM_TOLERANCE)
}

pub fn partial_sum_h(n_max: u64) -> Result<SeriesDiagnostic> {
    partial_sum(SeriesKind::HalfPlane, n_max, TERM_TOLERANCE)
}

/// Terms `1..=n_max` evaluated in parallel and summed in index order.
pub fn partial_sum(kind: SeriesKind, n_max: u64, tol: f64) -> Result<SeriesDiagnostic> {
    if n_max < 2 {
        return Err(Error::InvalidArgument("need at least two terms".into()));
    }
    let terms = parallel::try_map_indexed(n_max, |i| match kind {
        SeriesKind::Alternate => prob_x_sigma_zero_l_tol(i + 1, tol),
        SeriesKind::HalfPlane => prob_x_sigma_zero_h_tol(i + 1, tol),
    })?;
    let mut partial_sums = Vec::with_capacity(terms.len());
    let mut acc = 0.0;
    for t in &terms {
        acc += t.value;
        partial_sums.push(acc);
    }
    let mut increments = Vec::new();
    let mut n = 1u64;
    while 2 * n <= n_max {
        let err = terms[n as usize..2 * n as usize].iter().map(|t| t.quad_error).sum();
        increments.push(Increment {
            n,
            increment: partial_sums[2 * n as usize - 1] - partial_sums[n as usize - 1],
            quad_error: err,
        });
        n *= 2;
    }
    Ok(SeriesDiagnostic {
        kind,
        tolerance: tol,
        total_quad_error: terms.iter().map(|t| t.quad_error).sum(),
        terms,
        partial_sums,
        increments,
    })
}

/// Monte Carlo series over several environments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSeries {
    pub n_terms: usize,
    pub samples_per_env: u64,
    pub cap: u64,
    /// Averages over environments; the standard error reflects the spread
    /// between environments when there is more than one.
    pub terms: Vec<Estimate>,
    pub partial_sums: Vec<Estimate>,
    /// Mean censoring rate per term.
    pub censoring: Vec<f64>,
    pub per_env: Vec<SigmaZeroEstimate>,
}

/// Largest tolerated per-environment censoring rate.
pub const MAX_CENSORING: f64 = 0.5;

/// Estimates `P(X_{sigma_n} = 0)` for `n = 1..=n_terms` in each environment.
///
/// Environment `j` uses stream group `j`. Fails with
/// [`Error::ExcessCensoring`] if any environment censors more than half of
/// its samples at any term.
pub fn mc_series_o(
    envs: &[EnvironmentSpec],
    n_terms: usize,
    samples_per_env: u64,
    cap: u64,
    master_seed: u64,
) -> Result<McSeries> {
    if envs.is_empty() {
        return Err(Error::InvalidArgument("no environments given".into()));
    }
    let mut per_env = Vec::with_capacity(envs.len());
    for (j, env) in envs.iter().enumerate() {
        let est = estimate_x_sigma_zero(env, n_terms, samples_per_env, cap, master_seed, j as u32)?;
        for n in 1..=n_terms {
            let rate = est.censoring_rate(n);
            if rate > MAX_CENSORING {
                return Err(Error::ExcessCensoring { rate, limit: MAX_CENSORING });
            }
        }
        per_env.push(est);
    }
    let combine = |pick: &dyn Fn(&SigmaZeroEstimate) -> Estimate| -> Estimate {
        if per_env.len() == 1 {
            pick(&per_env[0])
        } else {
            let mut e = Estimate::from_samples(&per_env.iter().map(|p| pick(p).value).collect::<Vec<_>>());
            e.n_samples = samples_per_env * per_env.len() as u64;
            e
        }
    };
    let terms = (0..n_terms).map(|i| combine(&|p| p.terms[i])).collect();
    let partial_sums = (0..n_terms).map(|i| combine(&|p| p.partial_sums[i])).collect();
    let censoring = (1..=n_terms)
        .map(|n| per_env.iter().map(|p| p.censoring_rate(n)).sum::<f64>() / per_env.len() as f64)
        .collect();
    Ok(McSeries { n_terms, samples_per_env, cap, terms, partial_sums, censoring, per_env })
}
