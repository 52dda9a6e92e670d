//! Statistical machinery and analytic oracles.
//!
//! The exit-time series oracle is the reference law for every conformal-radius
//! test in the crate: for a Brownian motion started at `x` in `(0, L)`,
//!
//! ```text
//! P(T > t) = sum_{k odd} (4/(k*pi)) * sin(k*pi*x/L) * exp(-k^2 pi^2 t / (2 L^2))
//! ```
//!
//! The eigenfunction series is tail-dominated; truncation error is below
//! 1e-10 once `t >= 0.01 * L^2`. Below that regime the series still
//! alternates into agreement but needs the full `series_terms` budget.

use crate::error::{Error, Result};
use crate::scalar::{flt, to_f64, Scalar};

/// Monte Carlo summary of a scalar sample.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<T: Scalar> {
    pub mean: T,
    pub stderr: T,
    pub n: usize,
}

impl<T: Scalar> Estimate<T> {
    pub fn from_samples(samples: &[T]) -> Self {
        let n = samples.len();
        assert!(n >= 2, "estimate needs at least two samples");
        let nf = flt::<T>(n as f64);
        let mean = samples.iter().copied().sum::<T>() / nf;
        let var = samples
            .iter()
            .map(|&x| (x - mean) * (x - mean))
            .sum::<T>()
            / (nf - T::one());
        Estimate {
            mean,
            stderr: (var / nf).sqrt(),
            n,
        }
    }

    /// |mean - reference| in units of the standard error.
    pub fn sigmas_from(&self, reference: T) -> T {
        if self.stderr == T::zero() {
            return if self.mean == reference {
                T::zero()
            } else {
                T::infinity()
            };
        }
        ((self.mean - reference) / self.stderr).abs()
    }
}

/// Binomial proportion estimate with its normal-approximation stderr.
pub fn proportion_estimate<T: Scalar>(hits: usize, n: usize) -> Estimate<T> {
    let p = flt::<T>(hits as f64 / n as f64);
    let nf = flt::<T>(n as f64);
    let stderr = (p * (T::one() - p) / nf).sqrt();
    Estimate { mean: p, stderr, n }
}

/// Interval-exit law oracle for Brownian motion started inside `(lower, upper)`.
#[derive(Debug, Clone)]
pub struct ExitLawOracle<T: Scalar> {
    pub lower: T,
    pub upper: T,
    pub start: T,
    pub series_terms: usize,
}

impl<T: Scalar> ExitLawOracle<T> {
    pub fn new(lower: T, upper: T, start: T) -> Result<Self> {
        if !(lower < start && start < upper) {
            return Err(Error::invalid_argument(format!(
                "start {start} not inside ({lower}, {upper})"
            )));
        }
        Ok(ExitLawOracle {
            lower,
            upper,
            start,
            series_terms: 4001,
        })
    }

    pub fn symmetric(half_width: T) -> Result<Self> {
        Self::new(-half_width, half_width, T::zero())
    }

    fn length(&self) -> T {
        self.upper - self.lower
    }

    /// P(T > t), eigenfunction series.
    pub fn survival(&self, t: T) -> T {
        if t <= T::zero() {
            return T::one();
        }
        let l = self.length();
        let x = self.start - self.lower;
        let pi = T::PI();
        let four = flt::<T>(4.0);
        let rate = pi * pi / (flt::<T>(2.0) * l * l);
        let mut acc = T::zero();
        let mut k = 1usize;
        while k <= 2 * self.series_terms {
            let kf = flt::<T>(k as f64);
            let term = four / (kf * pi) * (kf * pi * x / l).sin() * (-kf * kf * rate * t).exp();
            acc = acc + term;
            if term.abs() < flt::<T>(1e-16) && k > 5 {
                break;
            }
            k += 2;
        }
        acc.max(T::zero()).min(T::one())
    }

    /// CDF of the exit time.
    pub fn cdf(&self, t: T) -> T {
        T::one() - self.survival(t)
    }

    /// Decay rate of the survival tail, `pi^2 / (2 L^2)`.
    pub fn tail_rate(&self) -> T {
        let l = self.length();
        T::PI() * T::PI() / (flt::<T>(2.0) * l * l)
    }

    /// Mean exit time `(x - lower)(upper - x)` (optional-stopping identity).
    pub fn mean(&self) -> T {
        (self.start - self.lower) * (self.upper - self.start)
    }

    /// Probability of exiting through the lower endpoint.
    pub fn lower_exit_probability(&self) -> T {
        (self.upper - self.start) / self.length()
    }

    /// Quantile by bisection on the CDF.
    pub fn quantile(&self, p: T) -> T {
        assert!(p > T::zero() && p < T::one());
        let mut lo = T::zero();
        let mut hi = self.mean() * flt::<T>(4.0) + self.length() * self.length();
        while self.cdf(hi) < p {
            hi = hi * flt::<T>(2.0);
        }
        for _ in 0..200 {
            let mid = (lo + hi) / flt::<T>(2.0);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) / flt::<T>(2.0)
    }

    /// E[exp(-theta T)] by integrating the survival function:
    /// `E[e^{-theta T}] = 1 - theta * int_0^inf e^{-theta t} P(T > t) dt`.
    pub fn laplace(&self, theta: T) -> T {
        // Simpson rule on a grid fine enough for 1e-8, plus the analytic tail
        // of the leading series mode beyond the grid.
        let rate = self.tail_rate();
        let t_max = flt::<T>(40.0) / (rate + theta);
        let n = 20_000usize;
        let h = t_max / flt::<T>(n as f64);
        let f = |t: T| (-theta * t).exp() * self.survival(t);
        let mut s = f(T::zero()) + f(t_max);
        for i in 1..n {
            let t = h * flt::<T>(i as f64);
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s = s + flt::<T>(w) * f(t);
        }
        let integral = s * h / flt::<T>(3.0);
        T::one() - theta * integral
    }
}

/// One-sample Kolmogorov-Smirnov test against an analytic CDF.
///
/// Unsorted input is tolerated; the p-value uses the asymptotic Kolmogorov
/// distribution with the finite-n Stephens correction.
pub fn ks_test<T: Scalar, F: Fn(T) -> T>(samples: &[T], cdf: F) -> Result<(T, T)> {
    if samples.len() < 20 {
        return Err(Error::invalid_argument(format!(
            "KS test needs n >= 20, got {}",
            samples.len()
        )));
    }
    let mut xs: Vec<T> = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = to_f64(cdf(x));
        let lo = (f - i as f64 / nf).abs();
        let hi = ((i + 1) as f64 / nf - f).abs();
        d = d.max(lo).max(hi);
    }
    let sqrt_n = nf.sqrt();
    let lam = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    Ok((flt(d), flt(kolmogorov_q(lam))))
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_test_two_sample<T: Scalar>(xs: &[T], ys: &[T]) -> Result<(T, T)> {
    if xs.len() < 20 || ys.len() < 20 {
        return Err(Error::invalid_argument("two-sample KS needs n >= 20"));
    }
    let mut a: Vec<T> = xs.to_vec();
    let mut b: Vec<T> = ys.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).unwrap());
    b.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let xi = a[i];
        let yj = b[j];
        if xi <= yj {
            i += 1;
        }
        if yj <= xi {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(diff);
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let sq = ne.sqrt();
    let lam = (sq + 0.12 + 0.11 / sq) * d;
    Ok((flt(d), flt(kolmogorov_q(lam))))
}

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2),
/// truncated at 1e-12.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut q = 0.0;
    let a = -2.0 * lambda * lambda;
    for j in 1..200 {
        let jf = j as f64;
        let term = 2.0 * (a * jf * jf).exp() * if j % 2 == 1 { 1.0 } else { -1.0 };
        q += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    q.clamp(0.0, 1.0)
}

/// Weighted least-squares fit of `log p` against `log r`; the slope is the
/// decay exponent. Zero probabilities are dropped (with a count returned).
pub fn exponent_fit<T: Scalar>(
    r_values: &[T],
    probabilities: &[T],
    weights: Option<&[T]>,
) -> Result<ExponentFit<T>> {
    if r_values.len() != probabilities.len() {
        return Err(Error::invalid_argument("r/p length mismatch"));
    }
    let mut pts: Vec<(f64, f64, f64)> = Vec::new();
    let mut dropped = 0usize;
    for (i, (&r, &p)) in r_values.iter().zip(probabilities.iter()).enumerate() {
        if p <= T::zero() {
            dropped += 1;
            continue;
        }
        let w = weights.map(|w| to_f64(w[i])).unwrap_or(1.0);
        pts.push((to_f64(r).ln(), to_f64(p).ln(), w));
    }
    if pts.len() < 3 {
        return Err(Error::invalid_argument(
            "exponent fit needs at least 3 positive points",
        ));
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx: f64 = pts.iter().map(|p| p.0 * p.2).sum::<f64>() / sw;
    let my: f64 = pts.iter().map(|p| p.1 * p.2).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // residual-based slope stderr
    let dof = (pts.len() as f64 - 2.0).max(1.0);
    let s2: f64 = pts
        .iter()
        .map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / dof;
    let stderr = (s2 / sxx).sqrt();
    Ok(ExponentFit {
        slope: flt(slope),
        intercept: flt(intercept),
        stderr: flt(stderr),
        dropped,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ExponentFit<T: Scalar> {
    pub slope: T,
    pub intercept: T,
    pub stderr: T,
    pub dropped: usize,
}

/// Occupied-box counts over the given scales and the dimension estimate
/// (minus the slope of log counts against log scale).
pub fn box_count<T: Scalar>(points: &[(T, T)], scales: &[T]) -> Result<BoxCount<T>> {
    if scales.len() < 3 {
        return Err(Error::invalid_argument("box counting needs >= 3 scales"));
    }
    if points.is_empty() {
        return Err(Error::invalid_argument("no points"));
    }
    let mut counts = Vec::with_capacity(scales.len());
    for &s in scales {
        let sf = to_f64(s);
        let mut cells = std::collections::HashSet::new();
        for &(x, y) in points {
            let cx = (to_f64(x) / sf).floor() as i64;
            let cy = (to_f64(y) / sf).floor() as i64;
            cells.insert((cx, cy));
        }
        counts.push(cells.len());
    }
    let logs: Vec<T> = scales.to_vec();
    let ps: Vec<T> = counts.iter().map(|&c| flt(c as f64)).collect();
    let fit = exponent_fit(&logs, &ps, None)?;
    Ok(BoxCount {
        counts,
        dimension: -fit.slope,
        stderr: fit.stderr,
    })
}

#[derive(Debug, Clone)]
pub struct BoxCount<T: Scalar> {
    pub counts: Vec<usize>,
    pub dimension: T,
    pub stderr: T,
}

/// Chi-square CDF, for the independence and goodness-of-fit tests.
pub fn chi_square_cdf(x: f64, dof: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    if x <= 0.0 {
        return 0.0;
    }
    ChiSquared::new(dof).map(|d| d.cdf(x)).unwrap_or(0.0)
}

/// 2x2 contingency chi-square test of independence; returns the p-value.
pub fn chi_square_independence_2x2(table: [[usize; 2]; 2]) -> f64 {
    let n: f64 = table.iter().flatten().map(|&c| c as f64).sum();
    let r0 = (table[0][0] + table[0][1]) as f64;
    let r1 = (table[1][0] + table[1][1]) as f64;
    let c0 = (table[0][0] + table[1][0]) as f64;
    let c1 = (table[0][1] + table[1][1]) as f64;
    if r0 == 0.0 || r1 == 0.0 || c0 == 0.0 || c1 == 0.0 {
        return 1.0;
    }
    let mut chi2 = 0.0;
    for (i, row) in [r0, r1].iter().enumerate() {
        for (j, col) in [c0, c1].iter().enumerate() {
            let expected = row * col / n;
            let obs = table[i][j] as f64;
            chi2 += (obs - expected).powi(2) / expected;
        }
    }
    1.0 - chi_square_cdf(chi2, 1.0)
}
