//! Brownian path generation, first-exit sampling with Brownian-bridge
//! crossing correction, excursion decomposition away from the lattice
//! `pi*Z`, and the regularized cotangent integral that drives the radial
//! exploration process.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::{flt, Scalar};
use crate::seed::Seed;

/// Discretized Brownian trajectory on the grid `k * step`.
#[derive(Debug, Clone)]
pub struct BrownianPath<T: Scalar> {
    pub step: T,
    pub values: Vec<T>,
    pub start: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitSide {
    Lower,
    Upper,
}

/// First-exit outcome of an interval.
#[derive(Debug, Clone, Copy)]
pub struct ExitResult<T: Scalar> {
    pub exit_time: T,
    pub side: ExitSide,
    pub exit_value: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Jump {
    Zero,
    PlusPi,
    MinusPi,
}

/// Excursion of the path away from `pi*Z`.
#[derive(Debug, Clone, Copy)]
pub struct Excursion<T: Scalar> {
    pub t0: T,
    pub t1: T,
    /// lattice level at the start, as an integer multiple of pi
    pub base_level: i64,
    pub jump: Jump,
}

/// Cumulative regularized integral of `cot(B)` (increments suppressed within
/// `epsilon` of the lattice).
#[derive(Debug, Clone)]
pub struct RegularizedIntegral<T: Scalar> {
    pub epsilon: T,
    pub values: Vec<T>,
}

#[inline]
pub(crate) fn standard_normal<T: Scalar, R: Rng>(rng: &mut R) -> T {
    flt(rng.sample::<f64, _>(StandardNormal))
}

/// Sample a Brownian path with `ceil(horizon/step)+1` grid values.
pub fn sample_brownian<T: Scalar>(
    seed: Seed,
    step: T,
    horizon: T,
    start: T,
) -> Result<BrownianPath<T>> {
    if step <= T::zero() {
        return Err(Error::invalid_argument("step must be positive"));
    }
    if horizon < step {
        return Err(Error::invalid_argument("horizon must be at least one step"));
    }
    let n = (horizon / step).ceil().to_usize().unwrap_or(0);
    let mut rng = seed.rng();
    let sd = step.sqrt();
    let mut values = Vec::with_capacity(n + 1);
    let mut x = start;
    values.push(x);
    for _ in 0..n {
        x = x + sd * standard_normal::<T, _>(&mut rng);
        values.push(x);
    }
    Ok(BrownianPath {
        step,
        values,
        start,
    })
}

impl<T: Scalar> BrownianPath<T> {
    pub fn horizon(&self) -> T {
        self.step * flt::<T>((self.values.len() - 1) as f64)
    }

    /// Refine onto the half grid, preserving the coarse values: midpoints are
    /// drawn from the Brownian bridge, `N((x_k + x_{k+1})/2, step/4)`.
    pub fn refine_half(&self, seed: Seed) -> BrownianPath<T> {
        let mut rng = seed.rng();
        let half = self.step / flt::<T>(2.0);
        let sd = (self.step / flt::<T>(4.0)).sqrt();
        let mut values = Vec::with_capacity(self.values.len() * 2 - 1);
        for k in 0..self.values.len() - 1 {
            let a = self.values[k];
            let b = self.values[k + 1];
            values.push(a);
            values.push((a + b) / flt::<T>(2.0) + sd * standard_normal::<T, _>(&mut rng));
        }
        values.push(*self.values.last().unwrap());
        BrownianPath {
            step: half,
            values,
            start: self.start,
        }
    }
}

/// Probability that a Brownian bridge from `x0` to `x1` over `dt` crosses a
/// barrier both endpoints are on one side of.
#[inline]
fn bridge_crossing_probability<T: Scalar>(d0: T, d1: T, dt: T) -> T {
    // d0, d1 = distances to the barrier, both positive
    (-flt::<T>(2.0) * d0 * d1 / dt).exp()
}

/// First exit of `(-a, b)` by a Brownian motion, bridge-corrected.
///
/// The exit time is the first grid time the (corrected) path is outside the
/// interval; the exit value is clamped to the crossed endpoint.
pub fn first_exit<T: Scalar>(
    seed: Seed,
    step: T,
    interval: (T, T),
    start: T,
) -> Result<ExitResult<T>> {
    let mut rng = seed.rng();
    first_exit_with_rng(&mut rng, step, interval, start)
}

/// Same as [`first_exit`] but drawing from a caller-provided RNG, so that
/// composite constructions can continue one underlying path.
pub fn first_exit_with_rng<T: Scalar, R: Rng>(
    rng: &mut R,
    step: T,
    interval: (T, T),
    start: T,
) -> Result<ExitResult<T>> {
    let (neg_a, b) = interval;
    if neg_a >= T::zero() || b <= T::zero() {
        return Err(Error::invalid_argument(
            "interval must be of the form (-a, b) with a, b > 0",
        ));
    }
    if !(start > neg_a && start < b) {
        return Err(Error::invalid_argument("start not strictly inside interval"));
    }
    let sd = step.sqrt();
    let mut x = start;
    let mut k: u64 = 0;
    loop {
        let x_next = x + sd * standard_normal::<T, _>(rng);
        k += 1;
        let t = step * flt::<T>(k as f64);
        if x_next >= b {
            return Ok(ExitResult {
                exit_time: t,
                side: ExitSide::Upper,
                exit_value: b,
            });
        }
        if x_next <= neg_a {
            return Ok(ExitResult {
                exit_time: t,
                side: ExitSide::Lower,
                exit_value: neg_a,
            });
        }
        // Both endpoints inside: the bridge may still have crossed.
        let p_up = bridge_crossing_probability(b - x, b - x_next, step);
        let p_lo = bridge_crossing_probability(x - neg_a, x_next - neg_a, step);
        let u: T = flt(rng.gen::<f64>());
        if u < p_up {
            return Ok(ExitResult {
                exit_time: t,
                side: ExitSide::Upper,
                exit_value: b,
            });
        }
        if u > T::one() - p_lo {
            return Ok(ExitResult {
                exit_time: t,
                side: ExitSide::Lower,
                exit_value: neg_a,
            });
        }
        x = x_next;
    }
}

/// Excursion decomposition of a path away from `pi*Z`.
///
/// Lattice visits are detected by level crossings (the cell index
/// `floor(B/pi)` changing across a grid interval), merged into clusters;
/// crossings are value-based, so they survive grid refinement exactly, which
/// keeps the decomposition stable when a path is refined in place. A grid
/// point within `2*sqrt(step)` of the lattice that is adjacent to a crossing
/// extends its cluster. Reported excursions are the gaps of duration
/// `>= min_duration` between clusters.
pub fn excursions<T: Scalar>(path: &BrownianPath<T>, min_duration: T) -> Vec<Excursion<T>> {
    let pi = T::PI();
    let tol = flt::<T>(2.0) * path.step.sqrt();
    let n = path.values.len();
    if n == 0 {
        return Vec::new();
    }
    // touched[k]: grid point k belongs to a lattice visit. Crossings compare
    // cell indices; exact lattice values (clamped exit endpoints) count as
    // visits on their own, since floor-based cells miss a value sitting on
    // the lower cell edge.
    let mut touched = vec![false; n];
    let exact = flt::<T>(1e-9);
    for k in 0..n {
        let v = path.values[k];
        if (v - (v / pi).round() * pi).abs() <= exact {
            touched[k] = true;
        }
    }
    for k in 0..n - 1 {
        let f0 = (path.values[k] / pi).floor();
        let f1 = (path.values[k + 1] / pi).floor();
        if f0 != f1 {
            touched[k] = true;
            touched[k + 1] = true;
        }
    }
    // the start of the path is a visit whenever it begins on the lattice;
    // everywhere else only crossings count, because they are value-based and
    // the refined grid shares the coarse values
    let v0 = path.values[0];
    if (v0 - (v0 / pi).round() * pi).abs() <= tol {
        touched[0] = true;
    }
    // clusters of consecutive touched indices; gaps shorter than
    // min_duration are lattice-visit noise and merge into one visit
    let merge_gap = (min_duration / path.step)
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k < n {
        if touched[k] {
            let s = k;
            while k + 1 < n && touched[k + 1] {
                k += 1;
            }
            if let Some(last) = clusters.last_mut() {
                if s - last.1 <= merge_gap {
                    last.1 = k;
                    k += 1;
                    continue;
                }
            }
            clusters.push((s, k));
        }
        k += 1;
    }
    let mut out = Vec::new();
    for w in clusters.windows(2) {
        let (_, e0) = w[0];
        let (s1, _) = w[1];
        let t0 = path.step * flt::<T>(e0 as f64);
        let t1 = path.step * flt::<T>(s1 as f64);
        if t1 - t0 < min_duration {
            continue;
        }
        let lvl0 = (path.values[e0] / pi).round().to_i64().unwrap_or(0);
        let lvl1 = (path.values[s1] / pi).round().to_i64().unwrap_or(0);
        let jump = match lvl1 - lvl0 {
            0 => Jump::Zero,
            d if d > 0 => Jump::PlusPi,
            _ => Jump::MinusPi,
        };
        out.push(Excursion {
            t0,
            t1,
            base_level: lvl0,
            jump,
        });
    }
    out
}

/// Cotangent with the argument reduced to `(-pi/2, pi/2]` first. The
/// round-based reduction is symmetric, so `cot_reduced(-x) = -cot_reduced(x)`
/// holds exactly in floating point.
#[inline]
pub fn cot_reduced<T: Scalar>(x: T) -> T {
    let pi = T::PI();
    let r = x - pi * (x / pi).round();
    r.cos() / r.sin()
}

/// Riemann sum of `step * cot(B_k) * 1{dist(B_k, pi*Z) >= epsilon}` on the
/// path grid (left endpoints), so `values[0] = 0`.
pub fn regularized_cot_integral<T: Scalar>(
    path: &BrownianPath<T>,
    epsilon: T,
) -> Result<RegularizedIntegral<T>> {
    if epsilon <= T::zero() {
        return Err(Error::invalid_argument("epsilon must be positive"));
    }
    let pi = T::PI();
    let mut values = Vec::with_capacity(path.values.len());
    let mut acc = T::zero();
    values.push(acc);
    for k in 0..path.values.len() - 1 {
        let v = path.values[k];
        let dist = (v - (v / pi).round() * pi).abs();
        if dist >= epsilon {
            acc = acc + path.step * cot_reduced(v);
        }
        values.push(acc);
    }
    Ok(RegularizedIntegral { epsilon, values })
}
