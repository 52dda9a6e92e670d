//! Driving-function generators: the symmetric radial exploration process
//! (kappa = 4, rho = -2) built from a Brownian motion and its regularized
//! cotangent drift, and chordal SLE_4(rho) drivers for level lines.
//!
//! Sign conventions. With the radial ODE `dg = g (xi+g)/(xi-g) dt` used by
//! [`crate::loewner`], boundary prime ends flow with `d(arg) = -cot((arg -
//! arg xi)/2) dt`. Requiring the marked point `O_t = exp(i U_t)` to follow
//! that flow while the angle gap to the driver is twice a standard Brownian
//! motion forces
//!
//! ```text
//! U_t = -int_0^t cot(B_s) ds,    W_t = 2 B_t + U_t,    xi_t = exp(i W_t).
//! ```
//!
//! Loops close exactly when `B` returns to `pi*Z`, and the harmonic-measure
//! reading `|B^z|/pi` of the arc between `O_t` and `xi_t` holds pathwise.
//! The opposite drift sign (which appears with the mirrored Loewner
//! orientation) produces the same laws through `B -> -B` but breaks those
//! pathwise identities, so the flow-consistent sign is used here.

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::loewner::{poisson_kernel, swallow_tolerance, RadialChain};
use crate::paths::{
    excursions, standard_normal, BrownianPath, Jump, RegularizedIntegral,
};
use crate::scalar::{flt, Scalar};
use crate::seed::Seed;

/// How long to run a radial driver.
#[derive(Debug, Clone, Copy)]
pub enum HorizonRule<T: Scalar> {
    Fixed(T),
    /// run until `B` exits `(-m pi, m pi)` (bridge-corrected, terminal value
    /// clamped to the barrier)
    UntilBExits { m: u32 },
}

/// Radial exploration driver: `W = 2B + U`, `xi = exp(iW)`, marked point at
/// `exp(iU)`.
#[derive(Debug, Clone)]
pub struct RadialSle42Driver<T: Scalar> {
    pub b: BrownianPath<T>,
    /// drift integral actually entering `W`; equals minus the regularized
    /// cotangent integral of `b`
    pub u: Vec<T>,
    pub w: Vec<T>,
    pub xi: Vec<Complex<T>>,
    pub epsilon_used: T,
}

/// Chordal SLE_kappa(rho) driver at kappa = 4.
#[derive(Debug, Clone)]
pub struct ChordalSleRhoDriver<T: Scalar> {
    pub step: T,
    pub w: Vec<T>,
    /// per force point trajectories, same grid as `w`
    pub v: Vec<Vec<T>>,
    pub rho: Vec<T>,
}

/// Quasi-loop interval of a radial driver with its orientation mark.
#[derive(Debug, Clone, Copy)]
pub struct QuasiLoop<T: Scalar> {
    pub t0: T,
    pub t1: T,
    /// -1, 0, +1 per the Brownian increment over the excursion
    pub mark: i8,
    pub surrounds_target: bool,
}

/// Default cotangent regularization scale.
pub fn default_epsilon<T: Scalar>(step: T) -> T {
    flt::<T>(10.0) * step.sqrt()
}

/// Build the radial driver.
pub fn radial_sle42<T: Scalar>(
    seed: Seed,
    step: T,
    epsilon: T,
    horizon: HorizonRule<T>,
) -> Result<RadialSle42Driver<T>> {
    if step <= T::zero() || epsilon <= T::zero() {
        return Err(Error::invalid_argument("step and epsilon must be positive"));
    }
    let b = match horizon {
        HorizonRule::Fixed(t) => crate::paths::sample_brownian(seed, step, t, T::zero())?,
        HorizonRule::UntilBExits { m } => {
            let barrier = T::PI() * flt::<T>(m as f64);
            sample_until_exit(seed, step, barrier)?
        }
    };
    let cot = crate::paths::regularized_cot_integral(&b, epsilon)?;
    Ok(driver_from_parts(b, cot, epsilon))
}

fn driver_from_parts<T: Scalar>(
    b: BrownianPath<T>,
    cot: RegularizedIntegral<T>,
    epsilon: T,
) -> RadialSle42Driver<T> {
    let u: Vec<T> = cot.values.iter().map(|&v| -v).collect();
    let w: Vec<T> = b
        .values
        .iter()
        .zip(u.iter())
        .map(|(&bk, &uk)| flt::<T>(2.0) * bk + uk)
        .collect();
    let xi: Vec<Complex<T>> = w
        .iter()
        .map(|&wk| Complex::new(wk.cos(), wk.sin()))
        .collect();
    RadialSle42Driver {
        b,
        u,
        w,
        xi,
        epsilon_used: epsilon,
    }
}

/// Brownian path stopped (and clamped) at the bridge-corrected exit of the
/// symmetric interval.
fn sample_until_exit<T: Scalar>(seed: Seed, step: T, barrier: T) -> Result<BrownianPath<T>> {
    let mut rng = seed.rng();
    let sd = step.sqrt();
    let mut values = vec![T::zero()];
    let mut x = T::zero();
    loop {
        let x_next = x + sd * standard_normal::<T, _>(&mut rng);
        if x_next >= barrier {
            values.push(barrier);
            break;
        }
        if x_next <= -barrier {
            values.push(-barrier);
            break;
        }
        let p_up = (-flt::<T>(2.0) * (barrier - x) * (barrier - x_next) / step).exp();
        let p_lo = (-flt::<T>(2.0) * (x + barrier) * (x_next + barrier) / step).exp();
        let uu: T = flt(rng.gen::<f64>());
        if uu < p_up {
            values.push(barrier);
            break;
        }
        if uu > T::one() - p_lo {
            values.push(-barrier);
            break;
        }
        values.push(x_next);
        x = x_next;
    }
    Ok(BrownianPath {
        step,
        values,
        start: T::zero(),
    })
}

impl<T: Scalar> RadialSle42Driver<T> {
    pub fn step(&self) -> T {
        self.b.step
    }

    pub fn horizon(&self) -> T {
        self.b.horizon()
    }

    /// Chain built from this driver.
    pub fn chain(&self) -> Result<RadialChain<T>> {
        crate::loewner::evolve_radial(&self.xi, self.b.step)
    }
}

/// Quasi-loops from the excursions of the driving Brownian motion away from
/// `pi*Z`; marks are read from the Brownian increments, not the geometry.
pub fn extract_quasi_loops<T: Scalar>(
    driver: &RadialSle42Driver<T>,
    min_duration: T,
) -> Vec<QuasiLoop<T>> {
    excursions(&driver.b, min_duration)
        .into_iter()
        .map(|e| {
            let mark = match e.jump {
                Jump::Zero => 0i8,
                Jump::PlusPi => 1,
                Jump::MinusPi => -1,
            };
            QuasiLoop {
                t0: e.t0,
                t1: e.t1,
                mark,
                surrounds_target: mark != 0,
            }
        })
        .collect()
}

/// Chordal SLE_4(rho) driver by Euler-Maruyama:
/// `dW = 2 dB + sum_i rho_i dt/(W - V^i)`, `dV^i = 2 dt/(V^i - W)`,
/// with ordering preserved by projection. With empty `rho` the driver is
/// exactly `2B` for the seed's path.
pub fn chordal_sle_rho<T: Scalar>(
    seed: Seed,
    step: T,
    rho: &[T],
    v0: &[crate::loewner::ForceStart<T>],
    horizon: T,
) -> Result<ChordalSleRhoDriver<T>> {
    use crate::loewner::ForceStart;
    if rho.len() != v0.len() {
        return Err(Error::invalid_argument("rho/v0 length mismatch"));
    }
    if step <= T::zero() || horizon < step {
        return Err(Error::invalid_argument("bad step/horizon"));
    }
    let n = (horizon / step).ceil().to_usize().unwrap_or(0);
    let mut rng = seed.rng();
    let sd = step.sqrt();
    let delta = sd; // started-from-driver offset
    let guard = flt::<T>(0.5) * sd; // minimal driver/force-point gap

    let mut w = T::zero();
    let mut v: Vec<T> = v0
        .iter()
        .map(|fs| match fs {
            ForceStart::At(x) => Ok(*x),
            ForceStart::DriverLeft => Ok(-delta),
            ForceStart::DriverRight => Ok(delta),
        })
        .collect::<Result<_>>()?;
    for (i, &vi) in v.iter().enumerate() {
        if vi == T::zero() {
            return Err(Error::invalid_argument(format!(
                "force point {i} coincides with W_0 = 0"
            )));
        }
    }
    let side: Vec<T> = v.iter().map(|&vi| vi.signum()).collect();

    let mut w_path = Vec::with_capacity(n + 1);
    let mut v_paths: Vec<Vec<T>> = v.iter().map(|&x| {
        let mut p = Vec::with_capacity(n + 1);
        p.push(x);
        p
    }).collect();
    w_path.push(w);

    // The driver/force-point gaps are Bessel-like: `dg = +-2dB + (rho+2)/g dt
    // + smooth`, singular exactly where naive Euler-Maruyama with an ordering
    // projection picks up an arbitrary-tolerance drift bias. An implicit
    // (positivity-preserving) root for each gap plus reconstruction of W from
    // the gaps keeps the ordering for free and the bias at O(step).
    let two = flt::<T>(2.0);
    let four = flt::<T>(4.0);
    for _ in 0..n {
        let db = sd * standard_normal::<T, _>(&mut rng);
        if v.is_empty() {
            w = w + two * db;
            w_path.push(w);
            continue;
        }
        let gaps: Vec<T> = v
            .iter()
            .zip(side.iter())
            .map(|(&vi, &s)| s * (vi - w))
            .collect();
        let mut w_estimates = T::zero();
        let mut new_v = Vec::with_capacity(v.len());
        let mut new_gaps = Vec::with_capacity(v.len());
        for i in 0..v.len() {
            // smooth drift from the other force points
            let mut other = T::zero();
            for j in 0..v.len() {
                if j != i {
                    other = other + rho[j] / (w - v[j]);
                }
            }
            // gap SDE: dg = -side*(2dB + other*dt) + (rho_i + 2)/g dt
            let b = gaps[i] - side[i] * (two * db + other * step);
            let disc = (b * b + four * (rho[i] + two) * step).max(T::zero());
            let g_new = (b + disc.sqrt()) / two;
            let v_new = v[i] + two * step / (v[i] - w);
            new_gaps.push(g_new);
            new_v.push(v_new);
            w_estimates = w_estimates + (v_new - side[i] * g_new);
        }
        let w_next = w_estimates / flt::<T>(v.len() as f64);
        for i in 0..v.len() {
            // re-anchor the force points on the reconstructed driver so the
            // sampled gaps are preserved exactly
            let nv = w_next + side[i] * new_gaps[i].max(guard);
            v[i] = nv;
            v_paths[i].push(nv);
        }
        w = w_next;
        w_path.push(w);
    }
    Ok(ChordalSleRhoDriver {
        step,
        w: w_path,
        v: v_paths,
        rho: rho.to_vec(),
    })
}

/// Target re-rooting time change: the cumulative stochastic integral
/// `B^z_t = int_0^t 2 pi P(g_s(z); xi_s) dB_s` on the driver grid.
///
/// Errors when the target is swallowed before the end of the grid; use
/// [`retarget_time_change_stopped`] for the optional-stopping variant.
pub fn retarget_time_change<T: Scalar>(
    driver: &RadialSle42Driver<T>,
    chain: &RadialChain<T>,
    z: Complex<T>,
) -> Result<Vec<T>> {
    let (values, swallowed) = retarget_time_change_stopped(driver, chain, z)?;
    if let Some(ts) = swallowed {
        return Err(Error::InvalidState(format!("target swallowed at t = {ts}")));
    }
    Ok(values)
}

/// Like [`retarget_time_change`] but stops accumulating at the swallowing
/// time and reports it, so stopped-martingale statistics stay unbiased.
pub fn retarget_time_change_stopped<T: Scalar>(
    driver: &RadialSle42Driver<T>,
    chain: &RadialChain<T>,
    z: Complex<T>,
) -> Result<(Vec<T>, Option<T>)> {
    if z.norm() >= T::one() {
        return Err(Error::invalid_argument("target not in the open disc"));
    }
    let n = chain.driving.len();
    let delta = swallow_tolerance(chain.step);
    let two_pi = flt::<T>(2.0) * T::PI();
    let mut out = Vec::with_capacity(n);
    let mut g = z;
    let mut acc = T::zero();
    out.push(acc);
    for k in 0..n - 1 {
        let xi = chain.driving[k];
        let t_k = chain.step * flt::<T>(k as f64);
        if (g - xi).norm() < delta {
            return Ok((out, Some(t_k)));
        }
        let p = poisson_kernel(g, xi);
        let db = driver.b.values[k + 1] - driver.b.values[k];
        acc = acc + two_pi * p * db;
        out.push(acc);
        g = match crate::loewner::radial_step(g / xi, chain.step) {
            Some(u1) => u1 * xi,
            None => return Ok((out, Some(t_k))),
        };
    }
    Ok((out, None))
}

/// Integrals `int 4 pi^2 P(g_s(z)) P(g_s(w)) ds` on the driver grid (the
/// predictable bracket of the retargeted martingales).
pub fn poisson_bracket_integral<T: Scalar>(
    chain: &RadialChain<T>,
    z: Complex<T>,
    w: Complex<T>,
    n_steps: usize,
) -> Result<T> {
    let delta = swallow_tolerance(chain.step);
    let four_pi2 = flt::<T>(4.0) * T::PI() * T::PI();
    let mut gz = z;
    let mut gw = w;
    let mut acc = T::zero();
    for k in 0..n_steps.min(chain.driving.len() - 1) {
        let xi = chain.driving[k];
        if (gz - xi).norm() < delta || (gw - xi).norm() < delta {
            return Err(Error::InvalidState("point swallowed".into()));
        }
        acc = acc + four_pi2 * poisson_kernel(gz, xi) * poisson_kernel(gw, xi) * chain.step;
        gz = crate::loewner::radial_step(gz / xi, chain.step)
            .ok_or_else(|| Error::InvalidState("point swallowed".into()))?
            * xi;
        gw = crate::loewner::radial_step(gw / xi, chain.step)
            .ok_or_else(|| Error::InvalidState("point swallowed".into()))?
            * xi;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{self, Estimate};
    use crate::loewner::{disc_green, ForceStart, PointState};
    use crate::seed::{Seed, Stream};
    use rayon::prelude::*;
    use std::f64::consts::PI;

    type C = Complex<f64>;

    #[test]
    fn driver_initial_conditions_and_invariants() {
        let d = radial_sle42::<f64>(
            Seed(1),
            1e-3,
            default_epsilon(1e-3),
            HorizonRule::Fixed(1.0),
        )
        .unwrap();
        assert_eq!(d.w[0], 0.0);
        assert_eq!(d.xi[0], C::new(1.0, 0.0));
        for k in 0..d.w.len() {
            assert_eq!(d.w[k], 2.0 * d.b.values[k] + d.u[k], "W = 2B + U exactly");
            assert!((d.xi[k] - C::new(d.w[k].cos(), d.w[k].sin())).norm() < 1e-12);
        }
    }

    #[test]
    fn driver_until_exit_terminal_value() {
        for seed in 0..20u64 {
            let d = radial_sle42::<f64>(
                Seed(100 + seed),
                1e-3,
                default_epsilon(1e-3),
                HorizonRule::UntilBExits { m: 1 },
            )
            .unwrap();
            let last = *d.b.values.last().unwrap();
            assert!(
                (last.abs() - PI).abs() < 1e-12,
                "terminal |B| = {} not clamped to pi",
                last.abs()
            );
        }
    }

    #[test]
    fn driver_until_exit_mean_time() {
        let n = 10_000u64;
        let times: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| {
                let d = radial_sle42::<f64>(
                    Seed(200).derive(Stream::Sle, k),
                    1e-2,
                    default_epsilon(1e-2),
                    HorizonRule::UntilBExits { m: 1 },
                )
                .unwrap();
                d.horizon()
            })
            .collect();
        let est = Estimate::from_samples(&times);
        assert!(
            est.sigmas_from(PI * PI) < 3.0,
            "mean exit {} vs {}",
            est.mean,
            PI * PI
        );
    }

    #[test]
    fn quasi_loop_marks() {
        // synthetic monotone 0 -> pi driver: single loop, mark +1
        let step = 1e-3;
        let n = 2000;
        let mut values: Vec<f64> = (0..=n).map(|i| PI * i as f64 / n as f64).collect();
        values.extend(std::iter::repeat(PI).take(5));
        let b = BrownianPath {
            step,
            values,
            start: 0.0,
        };
        let cot = crate::paths::regularized_cot_integral(&b, default_epsilon(step)).unwrap();
        let d = driver_from_parts(b, cot, default_epsilon(step));
        let loops = extract_quasi_loops(&d, 10.0 * step);
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].mark, 1);
        assert!(loops[0].surrounds_target);
    }

    #[test]
    fn final_loop_mark_symmetric() {
        let n = 10_000u64;
        let (plus, total) = (0..n)
            .into_par_iter()
            .map(|k| {
                let d = radial_sle42::<f64>(
                    Seed(300).derive(Stream::Sle, k),
                    1e-2,
                    default_epsilon(1e-2),
                    HorizonRule::UntilBExits { m: 1 },
                )
                .unwrap();
                let loops = extract_quasi_loops(&d, 0.05);
                match loops.last() {
                    Some(l) if l.mark != 0 => ((l.mark == 1) as usize, 1usize),
                    _ => (0, 0),
                }
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        assert!(total > n as usize / 3, "too few final loops: {total}");
        let est = harness::proportion_estimate::<f64>(plus, total);
        assert!(est.sigmas_from(0.5) < 3.0, "P(mark=+1) = {}", est.mean);
    }

    #[test]
    fn chordal_empty_rho_is_twice_brownian() {
        let seed = Seed(42);
        let d = chordal_sle_rho::<f64>(seed, 1e-3, &[], &[], 1.0).unwrap();
        let b = crate::paths::sample_brownian::<f64>(seed, 1e-3, 1.0, 0.0).unwrap();
        for (w, bv) in d.w.iter().zip(b.values.iter()) {
            assert_eq!(*w, 2.0 * bv);
        }
    }

    #[test]
    fn chordal_rho_ordering_preserved() {
        let d = chordal_sle_rho::<f64>(
            Seed(43),
            1e-3,
            &[-1.0, -1.0],
            &[ForceStart::DriverLeft, ForceStart::DriverRight],
            2.0,
        )
        .unwrap();
        for k in 0..d.w.len() {
            assert!(d.v[0][k] <= d.w[k], "left force point crossed at {k}");
            assert!(d.v[1][k] >= d.w[k], "right force point crossed at {k}");
        }
    }

    #[test]
    fn chordal_rho_variance_step_refinement() {
        let n = 10_000u64;
        let var_at = |step: f64, salt: u64| -> (f64, f64) {
            let ws: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|k| {
                    let d = chordal_sle_rho::<f64>(
                        Seed(44).derive(Stream::Sle, k).split(salt),
                        step,
                        &[-1.0, -1.0],
                        &[ForceStart::DriverLeft, ForceStart::DriverRight],
                        1.0,
                    )
                    .unwrap();
                    *d.w.last().unwrap()
                })
                .collect();
            let mean = ws.iter().sum::<f64>() / ws.len() as f64;
            let var = ws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (ws.len() - 1) as f64;
            (var, var * (2.0 / ws.len() as f64).sqrt())
        };
        let (v1, s1) = var_at(1e-3, 1);
        let (v2, s2) = var_at(1e-4, 2);
        assert!(v1.is_finite() && v2.is_finite());
        let sigma = (s1 * s1 + s2 * s2).sqrt();
        assert!(
            (v1 - v2).abs() < 3.0 * sigma,
            "variance not step-stable: {v1} vs {v2} (sigma {sigma})"
        );
    }

    #[test]
    fn retarget_at_origin_recovers_brownian() {
        let d = radial_sle42::<f64>(
            Seed(45),
            1e-3,
            default_epsilon(1e-3),
            HorizonRule::Fixed(0.5),
        )
        .unwrap();
        let chain = d.chain().unwrap();
        let bz = retarget_time_change(&d, &chain, C::new(0.0, 0.0)).unwrap();
        for (x, b) in bz.iter().zip(d.b.values.iter()) {
            assert!((x - b).abs() < 1e-12, "B^0 != B");
        }
    }

    #[test]
    fn retarget_quadratic_variation_matches_bracket() {
        let step = 1e-4;
        let d = radial_sle42::<f64>(
            Seed(46),
            step,
            default_epsilon(step),
            HorizonRule::Fixed(1.0),
        )
        .unwrap();
        let chain = d.chain().unwrap();
        let z = C::new(0.3, 0.2);
        let bz = retarget_time_change(&d, &chain, z).unwrap();
        let qv: f64 = bz.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        let bracket = poisson_bracket_integral(&chain, z, z, bz.len() - 1).unwrap();
        let rel = ((qv - bracket) / bracket).abs();
        assert!(rel < 0.02, "QV {qv} vs bracket {bracket}, rel {rel}");
    }

    #[test]
    fn retarget_cross_variation_and_green_decrement() {
        let step = 1e-4;
        let d = radial_sle42::<f64>(
            Seed(47),
            step,
            default_epsilon(step),
            HorizonRule::Fixed(0.4),
        )
        .unwrap();
        let chain = d.chain().unwrap();
        let z = C::new(0.3, 0.2);
        let w = C::new(-0.4, 0.1);
        let bz = retarget_time_change(&d, &chain, z).unwrap();
        let bw = retarget_time_change(&d, &chain, w).unwrap();
        let cross: f64 = bz
            .windows(2)
            .zip(bw.windows(2))
            .map(|(a, b)| (a[1] - a[0]) * (b[1] - b[0]))
            .sum();
        let n = bz.len() - 1;
        let bracket = poisson_bracket_integral(&chain, z, w, n).unwrap();
        let rel = ((cross - bracket) / bracket).abs();
        assert!(rel < 0.02, "cross {cross} vs bracket {bracket}: rel {rel}");

        let t = chain.step * n as f64;
        let gz = match chain.map_point(z, t).unwrap() {
            PointState::Alive(p) => p,
            _ => panic!(),
        };
        let gw = match chain.map_point(w, t).unwrap() {
            PointState::Alive(p) => p,
            _ => panic!(),
        };
        let g0 = disc_green(z, w);
        let gt = disc_green(gz, gw);
        let expected = 2.0 * PI * (g0 - gt);
        let rel2 = ((cross - expected) / expected).abs();
        assert!(
            rel2 < 0.05,
            "cross {cross} vs -2 pi dG {expected}: rel {rel2}"
        );
    }

    #[test]
    fn retarget_martingale_mean_zero() {
        // stopped at swallowing, so optional stopping keeps the mean exact
        let n = 10_000u64;
        let t = 0.3;
        let step = 1e-3;
        let z = C::new(0.25, -0.35);
        let finals: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| {
                let d = radial_sle42::<f64>(
                    Seed(48).derive(Stream::Sle, k),
                    step,
                    default_epsilon(step),
                    HorizonRule::Fixed(t),
                )
                .unwrap();
                let chain = d.chain().unwrap();
                let (bz, _) = retarget_time_change_stopped(&d, &chain, z).unwrap();
                let lambda = crate::lambda::<f64>();
                2.0 * lambda / PI * bz.last().copied().unwrap()
            })
            .collect();
        let est = Estimate::from_samples(&finals);
        assert!(est.sigmas_from(0.0) < 3.0, "mean h_t(z) = {}", est.mean);
    }

    /// Walk-on-spheres estimate of the harmonic measure, from `w`, of the
    /// boundary arc swept from angle `alpha` by `delta` (signed).
    fn wos_arc_measure(w: C, alpha: f64, delta: f64, n_walks: usize, seed: Seed) -> (f64, f64) {
        use rand::Rng;
        let mut rng = seed.rng();
        let mut hits = 0usize;
        for _ in 0..n_walks {
            let mut p = w;
            while 1.0 - p.norm() > 1e-4 {
                let r = 1.0 - p.norm();
                let th = rng.gen_range(0.0..2.0 * PI);
                p += C::new(r * th.cos(), r * th.sin());
            }
            let mut rel = (p.arg() - alpha).rem_euclid(2.0 * PI);
            let inside = if delta >= 0.0 {
                rel <= delta
            } else {
                if rel > 0.0 {
                    rel -= 2.0 * PI;
                }
                rel >= delta
            };
            if inside {
                hits += 1;
            }
        }
        let p = hits as f64 / n_walks as f64;
        (p, (p * (1.0 - p) / n_walks as f64).sqrt().max(1e-4))
    }

    /// |B^z|/pi equals the harmonic measure, from g_t(z), of the arc between
    /// the marked point exp(iU) and the driver exp(iW).
    #[test]
    fn retarget_harmonic_measure_reading() {
        // fine step and tight cot regularization: the marked-point angle
        // enters the arc directly, so the driver must be well resolved
        let step = 2e-5;
        let z = C::new(0.3, 0.2);
        let mut checked = 0usize;
        for seed in [49u64, 149, 249] {
            let d = radial_sle42::<f64>(
                Seed(seed),
                step,
                step.sqrt(),
                HorizonRule::Fixed(0.5),
            )
            .unwrap();
            let chain = d.chain().unwrap();
            let (bz, _) = retarget_time_change_stopped(&d, &chain, z).unwrap();
            // |B^z|/pi within discretization tolerance of [0, 1] while alive
            for (k, x) in bz.iter().enumerate() {
                assert!(
                    x.abs() / PI <= 1.0 + 0.02,
                    "|B^z|/pi = {} out of range at step {k}",
                    x.abs() / PI
                );
            }
            for k in [10_000usize, 17_000, 24_000] {
                if k >= bz.len() {
                    continue;
                }
                let t = k as f64 * step;
                let w = match chain.map_point(z, t).unwrap() {
                    PointState::Alive(p) => p,
                    _ => continue,
                };
                let claimed = bz[k] / PI; // signed
                let (est, sigma) = wos_arc_measure(
                    w,
                    d.u[k],
                    2.0 * d.b.values[k],
                    20_000,
                    Seed(500 + seed + k as u64),
                );
                assert!(
                    (claimed.abs() - est).abs() < 3.0 * sigma + 0.01,
                    "hm mismatch at t={t}: |B^z|/pi = {} vs walk {est} (sigma {sigma})",
                    claimed.abs()
                );
                checked += 1;
            }
        }
        assert!(checked >= 4, "too few harmonic-measure checkpoints: {checked}");
    }
}
