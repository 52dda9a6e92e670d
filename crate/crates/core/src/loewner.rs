//! Radial and chordal Loewner-chain engines.
//!
//! Chains are discrete zippers: each step is the exact solution of the
//! Loewner ODE with the driver frozen, so the composition is unconditionally
//! stable and half-plane capacity / conformal radius are exact by
//! construction.
//!
//! Radial ODE (disc, capacity parametrization, `g_t'(0) = e^t`):
//! `dg = g (xi + g)/(xi - g) dt`. With `u = g/xi` the one-step flow conserves
//! `u/(1+u)^2 * e^{-t}`, which gives the closed-form incremental map used
//! here. Chordal ODE: `dg = 2/(g - W) dt`, one-step map
//! `g -> W + sqrt((g-W)^2 + 4 dt)`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{flt, Scalar};

/// State of a tracked point under a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointState<T: Scalar> {
    Alive(Complex<T>),
    Swallowed(T),
}

impl<T: Scalar> PointState<T> {
    pub fn is_alive(&self) -> bool {
        matches!(self, PointState::Alive(_))
    }
}

/// Radial Loewner chain driven by unit-modulus `xi` samples on a uniform
/// capacity grid.
#[derive(Debug, Clone)]
pub struct RadialChain<T: Scalar> {
    pub step: T,
    pub driving: Vec<Complex<T>>,
}

/// Chordal Loewner chain with real driving and evolved force points.
#[derive(Debug, Clone)]
pub struct ChordalChain<T: Scalar> {
    pub step: T,
    pub driving: Vec<T>,
    /// per force point: trajectory on the same grid as `driving`
    pub force_points: Vec<Vec<T>>,
}

/// Swallowing tolerance `10 sqrt(step)`: the ODE is singular at the driver and
/// the driver itself fluctuates by ~2 sqrt(step) per step.
#[inline]
pub fn swallow_tolerance<T: Scalar>(step: T) -> T {
    flt::<T>(10.0) * step.sqrt()
}

/// One explicit radial step in driver coordinates `u = g/xi`.
///
/// Returns `None` when the point is absorbed during the step (the conserved
/// quantity crosses the `[1/4, inf)` branch cut).
#[inline]
pub fn radial_step<T: Scalar>(u: Complex<T>, dt: T) -> Option<Complex<T>> {
    let one = Complex::new(T::one(), T::zero());
    let denom = (one + u) * (one + u);
    let q = u * dt.exp() / denom;
    solve_radial_quadratic(q)
}

/// Inverse of [`radial_step`]: pull a point back through one slit map.
#[inline]
pub fn radial_step_inverse<T: Scalar>(u: Complex<T>, dt: T) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    let denom = (one + u) * (one + u);
    let q = u * (-dt).exp() / denom;
    // Pull-backs always stay in the closed disc; the branch cut is never hit
    // from inside.
    solve_radial_quadratic_unchecked(q)
}

/// Smaller root of `q u^2 + (2q - 1) u + q = 0`, the branch mapping into the
/// unit disc. `None` when `1 - 4q` lands on the negative real axis within
/// tolerance (the swallowing branch cut) for points that were strictly inside.
#[inline]
fn solve_radial_quadratic<T: Scalar>(q: Complex<T>) -> Option<Complex<T>> {
    let one = Complex::new(T::one(), T::zero());
    let four = flt::<T>(4.0);
    let disc = one - q * four;
    if disc.re <= T::zero() && disc.im.abs() < flt::<T>(1e-14) {
        return None;
    }
    Some(solve_radial_quadratic_unchecked(q))
}

#[inline]
fn solve_radial_quadratic_unchecked<T: Scalar>(q: Complex<T>) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    let two = flt::<T>(2.0);
    let four = flt::<T>(4.0);
    let disc = (one - q * four).sqrt();
    q * two / (one - q * two + disc)
}

/// Derivative of the one-step radial map `u0 -> u1`:
/// `e^{dt} (1-u0)(1+u1)^3 / ((1+u0)^3 (1-u1))`.
#[inline]
fn radial_step_derivative<T: Scalar>(u0: Complex<T>, u1: Complex<T>, dt: T) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    let a = (one - u0) / ((one + u0) * (one + u0) * (one + u0));
    let b = ((one + u1) * (one + u1) * (one + u1)) / (one - u1);
    a * b * dt.exp()
}

/// Exact boundary-angle action of one radial step: the relative angle
/// `psi = arg(g) - arg(xi)` in `(0, 2 pi)` satisfies
/// `cos(psi'/2) = e^{-dt/2} cos(psi/2)`.
#[inline]
pub fn radial_boundary_step<T: Scalar>(psi: T, dt: T) -> T {
    let half = psi / flt::<T>(2.0);
    let c = (-dt / flt::<T>(2.0)).exp() * half.cos();
    flt::<T>(2.0) * c.min(T::one()).max(-T::one()).acos()
}

/// Build a radial chain, validating unit-modulus driving.
pub fn evolve_radial<T: Scalar>(driving: &[Complex<T>], step: T) -> Result<RadialChain<T>> {
    if driving.is_empty() {
        return Err(Error::invalid_argument("empty driving function"));
    }
    if step <= T::zero() {
        return Err(Error::invalid_argument("step must be positive"));
    }
    let unit_tol = flt::<T>(1e-9).max(T::epsilon() * flt::<T>(100.0));
    for (k, xi) in driving.iter().enumerate() {
        if (xi.norm() - T::one()).abs() > unit_tol {
            return Err(Error::invalid_argument(format!(
                "driving[{k}] has modulus {} != 1",
                xi.norm()
            )));
        }
    }
    Ok(RadialChain {
        step,
        driving: driving.to_vec(),
    })
}

impl<T: Scalar> RadialChain<T> {
    pub fn horizon(&self) -> T {
        self.step * flt::<T>((self.driving.len() - 1) as f64)
    }

    fn steps_for(&self, t: T) -> Result<usize> {
        if t < T::zero() || t > self.horizon() + self.step * flt::<T>(0.5) {
            return Err(Error::OutOfRange(format!(
                "t = {t} beyond chain horizon {}",
                self.horizon()
            )));
        }
        Ok((t / self.step).round().to_usize().unwrap_or(0))
    }

    /// Forward map `g_t(z)` with swallowing detection.
    pub fn map_point(&self, z: Complex<T>, t: T) -> Result<PointState<T>> {
        Ok(self.map_point_with_derivative(z, t)?.0)
    }

    /// Forward map and the derivative `g_t'(z)` accumulated alongside.
    pub fn map_point_with_derivative(
        &self,
        z: Complex<T>,
        t: T,
    ) -> Result<(PointState<T>, Complex<T>)> {
        if z.norm() >= T::one() {
            return Err(Error::invalid_argument("point not in the open unit disc"));
        }
        let n = self.steps_for(t)?;
        let delta = swallow_tolerance(self.step);
        let mut g = z;
        let mut deriv = Complex::new(T::one(), T::zero());
        for k in 0..n {
            let xi = self.driving[k];
            if (g - xi).norm() < delta {
                return Ok((PointState::Swallowed(self.step * flt::<T>(k as f64)), deriv));
            }
            let u0 = g / xi;
            match radial_step(u0, self.step) {
                Some(u1) => {
                    deriv = deriv * radial_step_derivative(u0, u1, self.step);
                    g = u1 * xi;
                }
                None => {
                    return Ok((PointState::Swallowed(self.step * flt::<T>(k as f64)), deriv));
                }
            }
        }
        Ok((PointState::Alive(g), deriv))
    }

    /// March a whole batch of points step-synchronously; much cheaper than
    /// calling `map_point` per point for rasters.
    pub fn map_points_batch(&self, points: &[Complex<T>], t: T) -> Result<Vec<PointState<T>>> {
        let n = self.steps_for(t)?;
        let delta = swallow_tolerance(self.step);
        let mut states: Vec<PointState<T>> =
            points.iter().map(|&z| PointState::Alive(z)).collect();
        for k in 0..n {
            let xi = self.driving[k];
            let t_k = self.step * flt::<T>(k as f64);
            for s in states.iter_mut() {
                if let PointState::Alive(g) = *s {
                    if (g - xi).norm() < delta {
                        *s = PointState::Swallowed(t_k);
                        continue;
                    }
                    match radial_step(g / xi, self.step) {
                        Some(u1) => *s = PointState::Alive(u1 * xi),
                        None => *s = PointState::Swallowed(t_k),
                    }
                }
            }
        }
        Ok(states)
    }

    /// Conformal radius of `D_t` seen from `z`:
    /// `(1 - |g_t(z)|^2) / |g_t'(z)|`.
    pub fn conformal_radius(&self, z: Complex<T>, t: T) -> Result<T> {
        match self.map_point_with_derivative(z, t)? {
            (PointState::Alive(w), deriv) => {
                Ok((T::one() - w.norm_sqr()) / deriv.norm())
            }
            (PointState::Swallowed(ts), _) => Err(Error::InvalidState(format!(
                "point swallowed at t = {ts}"
            ))),
        }
    }

    /// Pull a point of the current disc back to the original domain,
    /// `f_t = g_t^{-1}`.
    pub fn inverse_map(&self, w: Complex<T>, t: T) -> Result<Complex<T>> {
        let n = self.steps_for(t)?;
        let mut g = w;
        for k in (0..n).rev() {
            let xi = self.driving[k];
            g = radial_step_inverse(g / xi, self.step) * xi;
        }
        Ok(g)
    }
}

/// Koebe quarter-theorem bounds: `crad/4 <= d(z, boundary) <= crad`.
pub fn koebe_distance_bounds<T: Scalar>(crad: T) -> (T, T) {
    (crad / flt::<T>(4.0), crad)
}

/// Poisson kernel of the unit disc seen from `w`, targeted at the boundary
/// point `xi`: `(1 - |w|^2) / (2 pi |xi - w|^2)`. Normalized to integrate to
/// one over arclength.
pub fn poisson_kernel<T: Scalar>(w: Complex<T>, xi: Complex<T>) -> T {
    (T::one() - w.norm_sqr()) / (flt::<T>(2.0) * T::PI() * (xi - w).norm_sqr())
}

/// Dirichlet Green's function of the unit disc,
/// `G(z, w) = log|(1 - z conj(w)) / (z - w)| / (2 pi)`.
pub fn disc_green<T: Scalar>(z: Complex<T>, w: Complex<T>) -> T {
    let one = Complex::new(T::one(), T::zero());
    ((one - z * w.conj()) / (z - w)).norm().ln() / (flt::<T>(2.0) * T::PI())
}

/// Marked boundary point specification for chordal chains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForceStart<T: Scalar> {
    /// explicit position, must differ from the driver start
    At(T),
    /// started-from-the-driver convention, at `W_0 - sqrt(step)`
    DriverLeft,
    /// at `W_0 + sqrt(step)`
    DriverRight,
}

/// Build a chordal chain from real driving samples, evolving the marked
/// points by the same ODE, with ordering enforced by projection.
pub fn evolve_chordal<T: Scalar>(
    driving: &[T],
    force_starts: &[ForceStart<T>],
    step: T,
) -> Result<ChordalChain<T>> {
    if driving.is_empty() {
        return Err(Error::invalid_argument("empty driving function"));
    }
    if step <= T::zero() {
        return Err(Error::invalid_argument("step must be positive"));
    }
    let w0 = driving[0];
    let delta = step.sqrt();
    let mut positions: Vec<T> = Vec::with_capacity(force_starts.len());
    for fs in force_starts {
        let v = match fs {
            ForceStart::At(v) => {
                if (*v - w0).abs() < flt::<T>(1e-12) {
                    return Err(Error::invalid_argument(
                        "force point coincides with the driving start; use the \
                         started-from-driver convention",
                    ));
                }
                *v
            }
            ForceStart::DriverLeft => w0 - delta,
            ForceStart::DriverRight => w0 + delta,
        };
        positions.push(v);
    }
    let n = driving.len();
    let mut trajectories: Vec<Vec<T>> = positions.iter().map(|&v| vec![v]).collect();
    for k in 0..n - 1 {
        let w = driving[k];
        for (i, v) in positions.iter_mut().enumerate() {
            let d = *v - w;
            // exact one-step flow along the real axis
            let mut nv = w + d.signum() * (d * d + flt::<T>(4.0) * step).sqrt();
            // ordering projection against the next driver value
            let w_next = driving[k + 1];
            if d > T::zero() && nv < w_next {
                nv = w_next + flt::<T>(1e-12).max(delta * flt::<T>(1e-6));
            }
            if d < T::zero() && nv > w_next {
                nv = w_next - flt::<T>(1e-12).max(delta * flt::<T>(1e-6));
            }
            *v = nv;
            trajectories[i].push(nv);
        }
    }
    Ok(ChordalChain {
        step,
        driving: driving.to_vec(),
        force_points: trajectories,
    })
}

/// Complex square root with nonnegative imaginary part (half-plane branch).
#[inline]
fn sqrt_upper<T: Scalar>(z: Complex<T>) -> Complex<T> {
    let r = z.sqrt();
    if r.im < T::zero() {
        -r
    } else {
        r
    }
}

impl<T: Scalar> ChordalChain<T> {
    pub fn horizon(&self) -> T {
        self.step * flt::<T>((self.driving.len() - 1) as f64)
    }

    fn steps_for(&self, t: T) -> Result<usize> {
        if t < T::zero() || t > self.horizon() + self.step * flt::<T>(0.5) {
            return Err(Error::OutOfRange(format!(
                "t = {t} beyond chain horizon {}",
                self.horizon()
            )));
        }
        Ok((t / self.step).round().to_usize().unwrap_or(0))
    }

    pub fn map_point(&self, z: Complex<T>, t: T) -> Result<PointState<T>> {
        if z.im <= T::zero() {
            return Err(Error::invalid_argument("point not in the upper half-plane"));
        }
        let n = self.steps_for(t)?;
        let delta = swallow_tolerance(self.step);
        let four = flt::<T>(4.0);
        let mut g = z;
        for k in 0..n {
            let w = self.driving[k];
            let d = g - Complex::new(w, T::zero());
            if d.norm() < delta {
                return Ok(PointState::Swallowed(self.step * flt::<T>(k as f64)));
            }
            g = Complex::new(w, T::zero()) + sqrt_upper(d * d + Complex::new(four * self.step, T::zero()));
        }
        Ok(PointState::Alive(g))
    }

    /// Pull a point of the image half-plane back to the original domain,
    /// `f_t = g_t^{-1}` (nested radicals of the inverse incremental maps).
    pub fn inverse_map(&self, w: Complex<T>, t: T) -> Result<Complex<T>> {
        let n = self.steps_for(t)?;
        let four = flt::<T>(4.0);
        let mut z = w;
        for j in (0..n).rev() {
            let wj = Complex::new(self.driving[j], T::zero());
            let d = z - wj;
            z = wj + sqrt_upper(d * d - Complex::new(four * self.step, T::zero()));
        }
        Ok(z)
    }

    /// Trace point `gamma(t) = f_t(W_t)` via the inverse incremental maps.
    pub fn trace_point(&self, k: usize) -> Complex<T> {
        let four = flt::<T>(4.0);
        let mut z = Complex::new(self.driving[k.min(self.driving.len() - 1)], T::zero());
        for j in (0..k).rev() {
            let w = self.driving[j];
            let d = z - Complex::new(w, T::zero());
            z = Complex::new(w, T::zero()) + sqrt_upper(d * d - Complex::new(four * self.step, T::zero()));
        }
        z
    }

    /// The full trace polyline, decimated by `every`.
    pub fn trace(&self, every: usize) -> Vec<Complex<T>> {
        let every = every.max(1);
        (0..self.driving.len())
            .step_by(every)
            .map(|k| self.trace_point(k))
            .collect()
    }

    /// Half-plane capacity estimate from the far-field expansion
    /// `g_t(z) ~ z + 2t/z`, evaluated at `z = i Y`; equals `2t` up to
    /// `O(1/Y^2)` under the standard normalization.
    pub fn hcap_far_field(&self, t: T, y: T) -> Result<T> {
        let z = Complex::new(T::zero(), y);
        match self.map_point(z, t)? {
            PointState::Alive(g) => Ok(((g - z) * z).re),
            PointState::Swallowed(_) => Err(Error::InvalidState("far-field point swallowed".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::Seed;
    use rand::Rng;
    use std::f64::consts::PI;

    type C = Complex<f64>;

    fn constant_driver(n: usize) -> Vec<C> {
        vec![C::new(1.0, 0.0); n]
    }

    /// Direct RK4 integration of the radial ODE, used as the oracle for the
    /// closed-form incremental map.
    fn rk4_radial(z: C, xi: C, t: f64, steps: usize) -> C {
        let f = |g: C| g * (xi + g) / (xi - g);
        let h = t / steps as f64;
        let mut g = z;
        for _ in 0..steps {
            let k1 = f(g);
            let k2 = f(g + 0.5 * h * k1);
            let k3 = f(g + 0.5 * h * k2);
            let k4 = f(g + h * k3);
            g += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        g
    }

    #[test]
    fn radial_rejects_bad_driving() {
        let bad = vec![C::new(1.1, 0.0); 4];
        assert!(evolve_radial(&bad, 1e-3).is_err());
        assert!(evolve_radial::<f64>(&[], 1e-3).is_err());
    }

    #[test]
    fn radial_identity_at_time_zero() {
        let chain = evolve_radial(&constant_driver(10), 1e-3).unwrap();
        for z in [C::new(0.3, 0.2), C::new(-0.5, 0.1), C::new(0.0, -0.7)] {
            match chain.map_point(z, 0.0).unwrap() {
                PointState::Alive(w) => assert!((w - z).norm() < 1e-15),
                _ => panic!("swallowed at t=0"),
            }
        }
    }

    #[test]
    fn radial_conformal_radius_capacity() {
        let chain = evolve_radial(&constant_driver(2001), 1e-3).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let crad = chain.conformal_radius(C::new(0.0, 0.0), t).unwrap();
            assert!(
                (crad - (-t).exp()).abs() < 1e-3,
                "crad {} vs e^-t {}",
                crad,
                (-t).exp()
            );
        }
        // t=0, general z: crad = 1 - |z|^2 exactly
        let z = C::new(0.4, -0.3);
        let c0 = chain.conformal_radius(z, 0.0).unwrap();
        assert!((c0 - (1.0 - z.norm_sqr())).abs() < 1e-15);
    }

    #[test]
    fn radial_step_matches_ode_oracle() {
        let xi = C::new(1.0, 0.0);
        for z in [C::new(-0.5, 0.0), C::new(0.2, 0.4), C::new(-0.1, -0.6)] {
            let t = 0.5;
            let chain = evolve_radial(&constant_driver(5001), 1e-4).unwrap();
            let got = match chain.map_point(z, t).unwrap() {
                PointState::Alive(w) => w,
                _ => panic!("unexpected swallow"),
            };
            let oracle = rk4_radial(z, xi, t, 50_000);
            assert!(
                (got - oracle).norm() < 1e-3,
                "map mismatch at {z}: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn radial_slit_swallows_near_base_point() {
        // z = 0.99 sits essentially at the slit base and is absorbed
        // immediately; the 1-d conserved-quantity oracle gives
        // t_s = ln(1/(4 q_0)) with q_0 = 0.99/1.99^2.
        let chain = evolve_radial(&constant_driver(3001), 1e-5).unwrap();
        let q0: f64 = 0.99 / (1.99f64 * 1.99);
        let oracle = (1.0 / (4.0 * q0)).ln();
        match chain.map_point(C::new(0.99, 0.0), 0.03).unwrap() {
            PointState::Swallowed(ts) => {
                assert!((ts - oracle).abs() < 1e-2, "swallow {ts} vs oracle {oracle}")
            }
            PointState::Alive(_) => panic!("0.99 should be swallowed"),
        }
        // while the opposite point survives long
        let far = chain.map_point(C::new(-0.9, 0.0), 0.03).unwrap();
        assert!(far.is_alive());
    }

    #[test]
    fn radial_minus_one_alive_under_constant_driving() {
        let chain = evolve_radial(&constant_driver(3001), 1e-3).unwrap();
        assert!(chain.map_point(C::new(-0.999, 0.0), 3.0).unwrap().is_alive());
    }

    #[test]
    fn radial_origin_never_swallowed() {
        let mut rng = Seed(77).rng();
        let mut w = 0.0f64;
        let driving: Vec<C> = (0..4000)
            .map(|_| {
                w += 0.05 * rng.gen_range(-1.0..1.0f64);
                C::new(w.cos(), w.sin())
            })
            .collect();
        let chain = evolve_radial(&driving, 1e-3).unwrap();
        let state = chain.map_point(C::new(0.0, 0.0), chain.horizon()).unwrap();
        assert!(state.is_alive());
    }

    #[test]
    fn radial_slit_crad_matches_oracle() {
        let chain = evolve_radial(&constant_driver(5001), 1e-4).unwrap();
        let z = C::new(-0.5, 0.0);
        let t = 0.5;
        let crad = chain.conformal_radius(z, t).unwrap();
        // oracle: derivative by central finite difference of the RK4 map
        let h = 1e-6;
        let gp = rk4_radial(C::new(-0.5 + h, 0.0), C::new(1.0, 0.0), t, 50_000);
        let gm = rk4_radial(C::new(-0.5 - h, 0.0), C::new(1.0, 0.0), t, 50_000);
        let g = rk4_radial(z, C::new(1.0, 0.0), t, 50_000);
        let deriv = ((gp - gm) / (2.0 * h)).norm();
        let oracle = (1.0 - g.norm_sqr()) / deriv;
        assert!((crad - oracle).abs() < 1e-3, "crad {crad} vs {oracle}");
    }

    #[test]
    fn radial_semigroup_property() {
        let mut rng = Seed(78).rng();
        let mut w = 0.0f64;
        let driving: Vec<C> = (0..1000)
            .map(|_| {
                w += 0.05 * rng.gen_range(-1.0..1.0f64);
                C::new(w.cos(), w.sin())
            })
            .collect();
        let step = 1e-3;
        let full = evolve_radial(&driving, step).unwrap();
        let t1 = 0.4;
        let t2 = 0.9;
        let k1 = (t1 / step).round() as usize;
        // evolve to t1, then continue with the tail driver
        let head = evolve_radial(&driving[..=k1], step).unwrap();
        let tail = evolve_radial(&driving[k1..], step).unwrap();
        for z in [C::new(0.3, 0.1), C::new(-0.2, -0.4), C::new(0.05, 0.55)] {
            let direct = match full.map_point(z, t2).unwrap() {
                PointState::Alive(w) => w,
                _ => continue,
            };
            let mid = match head.map_point(z, t1).unwrap() {
                PointState::Alive(w) => w,
                _ => continue,
            };
            let composed = match tail.map_point(mid, t2 - t1).unwrap() {
                PointState::Alive(w) => w,
                _ => continue,
            };
            assert!(
                (direct - composed).norm() < 1e-6,
                "semigroup violated at {z}: {direct} vs {composed}"
            );
        }
    }

    #[test]
    fn radial_crad_monotone_in_time() {
        let mut rng = Seed(79).rng();
        let mut w = 0.0f64;
        let driving: Vec<C> = (0..500)
            .map(|_| {
                w += 0.1 * rng.gen_range(-1.0..1.0f64);
                C::new(w.cos(), w.sin())
            })
            .collect();
        let chain = evolve_radial(&driving, 1e-3).unwrap();
        let z = C::new(0.2, -0.3);
        let mut prev = f64::INFINITY;
        for k in 0..=499 {
            let t = k as f64 * 1e-3;
            match chain.conformal_radius(z, t) {
                Ok(c) => {
                    assert!(c <= prev + 1e-9, "crad increased at t={t}");
                    prev = c;
                }
                Err(_) => break,
            }
        }
    }

    #[test]
    fn radial_inverse_round_trip() {
        let chain = evolve_radial(&constant_driver(1001), 1e-3).unwrap();
        let z = C::new(0.3, -0.25);
        let t = 0.8;
        if let PointState::Alive(w) = chain.map_point(z, t).unwrap() {
            let back = chain.inverse_map(w, t).unwrap();
            assert!((back - z).norm() < 1e-9, "round trip {back} vs {z}");
        } else {
            panic!("point swallowed");
        }
    }

    #[test]
    fn radial_step_halving_first_order() {
        // deterministic smooth driver xi(t) = exp(i sin t)
        let make = |step: f64, n: usize| -> RadialChain<f64> {
            let driving: Vec<C> = (0..n)
                .map(|k| {
                    let w = (k as f64 * step).sin();
                    C::new(w.cos(), w.sin())
                })
                .collect();
            evolve_radial(&driving, step).unwrap()
        };
        let z = C::new(0.25, 0.4);
        let t = 1.0;
        let exact = match make(1e-5, 100_001).map_point(z, t).unwrap() {
            PointState::Alive(w) => w,
            _ => panic!(),
        };
        let mut errs = Vec::new();
        for &step in &[4e-3, 2e-3, 1e-3] {
            let n = (t / step) as usize + 1;
            let got = match make(step, n).map_point(z, t).unwrap() {
                PointState::Alive(w) => w,
                _ => panic!(),
            };
            errs.push((got - exact).norm());
        }
        // order >= 1: error ratio under halving at least ~1.8
        assert!(errs[0] / errs[1] > 1.8, "errors {errs:?}");
        assert!(errs[1] / errs[2] > 1.8, "errors {errs:?}");
    }

    /// Finite-difference Hadamard check: along any radial chain
    /// dG(z,w)/dt = -2 pi P(g z) P(g w).
    #[test]
    fn hadamard_formula_finite_difference() {
        let mut rng = Seed(80).rng();
        let step = 1e-4f64;
        let mut w = 0.0f64;
        let driving: Vec<C> = (0..2001)
            .map(|_| {
                w += 2.0 * step.sqrt() * rng.gen_range(-1.0..1.0f64);
                C::new(w.cos(), w.sin())
            })
            .collect();
        let chain = evolve_radial(&driving, step).unwrap();
        let z = C::new(0.3, 0.2);
        let zz = C::new(-0.4, 0.1);
        for k in [500usize, 1000, 1500] {
            let t = k as f64 * step;
            let g = |tt: f64, p: C| -> C {
                match chain.map_point(p, tt).unwrap() {
                    PointState::Alive(w) => w,
                    _ => panic!("swallowed"),
                }
            };
            let green = |tt: f64| disc_green(g(tt, z), g(tt, zz));
            let dgdt = (green(t + step) - green(t - step)) / (2.0 * step);
            let xi = driving[k];
            let rhs = -2.0 * PI * poisson_kernel(g(t, z), xi) * poisson_kernel(g(t, zz), xi);
            let rel = ((dgdt - rhs) / rhs).abs();
            assert!(rel < 1e-2, "Hadamard mismatch at t={t}: rel err {rel}");
        }
    }

    #[test]
    fn koebe_bounds_basic() {
        assert_eq!(koebe_distance_bounds(1.0f64), (0.25, 1.0));
        // full disc from 0: true distance 1 within [0.25, 1]
        let (lo, hi) = koebe_distance_bounds(1.0f64);
        assert!(lo <= 1.0 && 1.0 <= hi);
    }

    #[test]
    fn koebe_bounds_slit_domain() {
        // constant driving at time 0.5: distance from 0 to the slit tip
        let step = 1e-4f64;
        let chain = evolve_radial(&constant_driver(5001), step).unwrap();
        let t = 0.5;
        let crad = chain.conformal_radius(C::new(0.0, 0.0), t).unwrap();
        // the slit tip is the pull-back of the driver
        let tip = chain.inverse_map(C::new(1.0, 0.0), t).unwrap();
        let dist = tip.norm().min(1.0);
        let (lo, hi) = koebe_distance_bounds(crad);
        assert!(
            lo <= dist * 1.001 && dist <= hi * 1.001,
            "distance {dist} outside [{lo}, {hi}]"
        );
    }

    // ---- chordal ----

    #[test]
    fn chordal_vertical_slit_oracle() {
        let step = 1e-4f64;
        let driving = vec![0.0f64; 10_001];
        let chain = evolve_chordal(&driving, &[], step).unwrap();
        for t in [0.25, 0.5, 1.0] {
            for y in [2.5, 3.0, 4.0] {
                // forward map: g_t(iy) = i sqrt(y^2 - 4t); the nested
                // radicals compose exactly for constant driving
                let got = match chain.map_point(C::new(0.0, y), t).unwrap() {
                    PointState::Alive(w) => w,
                    _ => panic!("swallowed"),
                };
                let fwd = C::new(0.0, (y * y - 4.0 * t).sqrt());
                assert!((got - fwd).norm() < 1e-9, "forward slit: {got} vs {fwd}");
                // inverse map: f_t(iy) = i sqrt(y^2 + 4t)
                let back = chain.inverse_map(C::new(0.0, y), t).unwrap();
                let inv = C::new(0.0, (y * y + 4.0 * t).sqrt());
                assert!((back - inv).norm() < 1e-4, "inverse slit: {back} vs {inv}");
            }
        }
    }

    #[test]
    fn chordal_identity_at_zero_and_hcap() {
        let mut rng = Seed(81).rng();
        let step = 1e-4f64;
        let mut w = 0.0f64;
        let driving: Vec<f64> = (0..5001)
            .map(|_| {
                w += 2.0 * step.sqrt() * rng.gen_range(-1.0..1.0f64);
                w
            })
            .collect();
        let chain = evolve_chordal(&driving, &[], step).unwrap();
        let z = C::new(0.3, 0.7);
        match chain.map_point(z, 0.0).unwrap() {
            PointState::Alive(g) => assert!((g - z).norm() < 1e-15),
            _ => panic!(),
        }
        let t = 0.4;
        let hcap = chain.hcap_far_field(t, 200.0).unwrap();
        assert!((hcap - 2.0 * t).abs() < 1e-3, "hcap {hcap} vs {}", 2.0 * t);
    }

    #[test]
    fn chordal_rejects_coincident_force_point() {
        let driving = vec![0.0f64; 10];
        assert!(evolve_chordal(&driving, &[ForceStart::At(0.0)], 1e-3).is_err());
        assert!(evolve_chordal(&driving, &[ForceStart::At(1.0)], 1e-3).is_ok());
    }

    #[test]
    fn chordal_trace_starts_at_origin_and_stays_upper() {
        let step = 1e-3;
        let driving = vec![0.0f64; 501];
        let chain = evolve_chordal(&driving, &[], step).unwrap();
        let trace = chain.trace(10);
        assert!((trace[0] - C::new(0.0, 0.0)).norm() < 1e-12);
        for p in &trace[1..] {
            assert!(p.im >= 0.0);
        }
        // vertical slit: the trace is the segment [0, 2 i sqrt(t)]
        let last = trace.last().unwrap();
        let t = chain.horizon();
        assert!((last.re).abs() < 1e-9);
        assert!((last.im - 2.0 * t.sqrt()).abs() < 2e-2, "tip {last}");
    }
}
