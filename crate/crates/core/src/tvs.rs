//! Two-valued sets `A_{-a,b}`: existence validation, reduced-mode sampling of
//! `(label, log-conformal-radius drop)`, the geometric construction by
//! iterated level lines, and coupled nested sampling.
//!
//! Geometric route. Every level line is traced in target-centred radial
//! coordinates: the chain is normalized at the tracked point, so the domain
//! of the chain *is* the target's component and the uniformizer of the next
//! component is the accumulated composition itself. A chordal SLE_4(rho_L;
//! rho_R) from x to y re-rooted at an interior point is the radial chain with
//! boundary force points at (x-, rho_L), (x+, rho_R) and (y, kappa - 6 -
//! rho_L - rho_R); with the radial ODE of [`crate::loewner`] the driver angle
//! obeys
//!
//! ```text
//! d theta = 2 dB + sum_j (rho_j / 2) cot((theta - beta_j)/2) dt,
//! ```
//!
//! while every other marked angle flows by the exact one-step boundary
//! action. Boundary data is stored as arcs with exact offset bookkeeping; a
//! line deposits `level - lambda` on its left (clockwise) side and
//! `level + lambda` on its right side. The construction runs in stages: at
//! running offset `v` it traces the level `v + c` with `c` chosen so that the
//! stage interval `(v + c - lambda, v + c + lambda)` stays inside `[-a, b]`
//! and is flush against a boundary value whenever `v` is within `lambda` of
//! it. Concatenating stages, the target's offset is absorbed exactly at `-a`
//! or `b`, and the total capacity time is the log-radius drop.

use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::harness::ExponentFit;
use crate::loewner::{radial_boundary_step, radial_step_inverse};
use crate::paths::{first_exit_with_rng, standard_normal, ExitSide};
use crate::scalar::{flt, Scalar};
use crate::seed::Seed;

/// Validated parameter pair for a two-valued set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoValuedSpec<T: Scalar> {
    a: T,
    b: T,
    trivial: bool,
}

/// Label and radius-drop outcome seen from one target point.
#[derive(Debug, Clone, Copy)]
pub struct ValueOutcome<T: Scalar> {
    /// `-a` or `b`
    pub label: T,
    pub log_crad_drop: T,
}

impl<T: Scalar> TwoValuedSpec<T> {
    pub fn a(&self) -> T {
        self.a
    }
    pub fn b(&self) -> T {
        self.b
    }
    /// The empty-set degenerate case (`a = 0` or `b = 0`).
    pub fn is_trivial(&self) -> bool {
        self.trivial
    }
    /// Exit interval of the value process in Brownian units,
    /// `(-a pi / (2 lambda), b pi / (2 lambda))`.
    pub fn exit_interval(&self) -> (T, T) {
        let scale = T::PI() / (flt::<T>(2.0) * crate::lambda::<T>());
        (-self.a * scale, self.b * scale)
    }
    /// Tail exponent `2 lambda^2 / (a + b)^2`.
    pub fn tail_exponent(&self) -> T {
        let l = crate::lambda::<T>();
        flt::<T>(2.0) * l * l / ((self.a + self.b) * (self.a + self.b))
    }
}

/// Accepts `(a, b)` iff `a, b > 0` and `a + b >= 2 lambda`, or the degenerate
/// empty-set case `a = 0` / `b = 0`.
pub fn validate<T: Scalar>(a: T, b: T) -> Result<TwoValuedSpec<T>> {
    if a < T::zero() || b < T::zero() {
        return Err(Error::invalid_argument("a and b must be nonnegative"));
    }
    if a.is_zero() || b.is_zero() {
        return Ok(TwoValuedSpec {
            a,
            b,
            trivial: true,
        });
    }
    let threshold = flt::<T>(2.0) * crate::lambda::<T>();
    if a + b < threshold - flt::<T>(1e-12) {
        return Err(Error::NoSuchBtls {
            a: crate::scalar::to_f64(a),
            b: crate::scalar::to_f64(b),
            threshold: crate::scalar::to_f64(threshold),
        });
    }
    Ok(TwoValuedSpec {
        a,
        b,
        trivial: false,
    })
}

/// Reduced-mode sample: first exit of `(-a pi/(2 lambda), b pi/(2 lambda))`.
pub fn sample_value<T: Scalar>(seed: Seed, spec: &TwoValuedSpec<T>, step: T) -> Result<ValueOutcome<T>> {
    let mut rng = seed.rng();
    sample_value_with_rng(&mut rng, spec, step)
}

pub fn sample_value_with_rng<T: Scalar, R: Rng>(
    rng: &mut R,
    spec: &TwoValuedSpec<T>,
    step: T,
) -> Result<ValueOutcome<T>> {
    if spec.trivial {
        return Ok(ValueOutcome {
            label: T::zero(),
            log_crad_drop: T::zero(),
        });
    }
    let interval = spec.exit_interval();
    let exit = first_exit_with_rng(rng, step, interval, T::zero())?;
    let label = match exit.side {
        ExitSide::Lower => -spec.a,
        ExitSide::Upper => spec.b,
    };
    Ok(ValueOutcome {
        label,
        log_crad_drop: exit.exit_time,
    })
}

/// Coupled nested sample: the same Brownian path is continued past the inner
/// exit until the outer exit, so the inner drop never exceeds the outer one.
pub fn nested_sample<T: Scalar>(
    seed: Seed,
    inner: &TwoValuedSpec<T>,
    outer: &TwoValuedSpec<T>,
    step: T,
) -> Result<(ValueOutcome<T>, ValueOutcome<T>)> {
    if inner.trivial || outer.trivial {
        return Err(Error::invalid_argument("nested sampling needs non-trivial specs"));
    }
    if inner.a > outer.a || inner.b > outer.b {
        return Err(Error::invalid_argument(
            "inner interval must be contained in the outer interval",
        ));
    }
    let mut rng = seed.rng();
    let (ilo, ihi) = inner.exit_interval();
    let (olo, ohi) = outer.exit_interval();
    let first = first_exit_with_rng(&mut rng, step, (ilo, ihi), T::zero())?;
    let inner_outcome = ValueOutcome {
        label: match first.side {
            ExitSide::Lower => -inner.a,
            ExitSide::Upper => inner.b,
        },
        log_crad_drop: first.exit_time,
    };
    // continue the same walk from the inner exit value
    let (outer_label, outer_time) = if first.exit_value <= olo || first.exit_value >= ohi {
        // inner and outer barriers coincide on this side
        let label = if first.exit_value <= olo { -outer.a } else { outer.b };
        (label, first.exit_time)
    } else {
        let cont = first_exit_with_rng(&mut rng, step, (olo, ohi), first.exit_value)?;
        let label = match cont.side {
            ExitSide::Lower => -outer.a,
            ExitSide::Upper => outer.b,
        };
        (label, first.exit_time + cont.exit_time)
    };
    Ok((
        inner_outcome,
        ValueOutcome {
            label: outer_label,
            log_crad_drop: outer_time,
        },
    ))
}

/// Reduced-mode decay-exponent experiment on the set's exit interval.
pub fn decay_exponent<T: Scalar>(
    seed: Seed,
    spec: &TwoValuedSpec<T>,
    r_grid: &[T],
    n: usize,
    step: T,
) -> Result<crate::cle::DecayEstimate<T>> {
    crate::cle::decay_from_exit_tail(seed, spec.exit_interval(), r_grid, n, step)
}

/// Analytic fit on the series-oracle tail, for cross-checks.
pub fn oracle_decay_exponent<T: Scalar>(
    spec: &TwoValuedSpec<T>,
    r_grid: &[T],
) -> Result<ExponentFit<T>> {
    let (lo, hi) = spec.exit_interval();
    let oracle = crate::harness::ExitLawOracle::new(lo, hi, T::zero())?;
    let ps: Vec<T> = r_grid
        .iter()
        .map(|&r| oracle.survival((T::one() / r).ln()))
        .collect();
    crate::harness::exponent_fit(r_grid, &ps, None)
}

// ---------------------------------------------------------------------------
// geometric construction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag {
    Domain,
    Lo,
    Hi,
}

/// Status of the tracked component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentStatus<T: Scalar> {
    Open { current_offset: T },
    Closed { label: T },
    Truncated { current_offset: T },
}

/// Composed conformal map from the current component onto the reference disc
/// (target at the origin): the log of all incremental radial steps.
#[derive(Debug, Clone, Default)]
pub struct Uniformizer<T: Scalar> {
    /// per step: driver angle and capacity increment
    pub steps: Vec<(T, T)>,
}

impl<T: Scalar> Uniformizer<T> {
    pub fn capacity(&self) -> T {
        self.steps.iter().map(|&(_, dt)| dt).sum()
    }

    /// Pull a point of the current disc back to the root disc.
    pub fn pull_back(&self, w: Complex<T>, upto: usize) -> Complex<T> {
        let mut z = w;
        for k in (0..upto.min(self.steps.len())).rev() {
            let (theta, dt) = self.steps[k];
            let xi = Complex::new(theta.cos(), theta.sin());
            z = radial_step_inverse(z / xi, dt) * xi;
        }
        z
    }

    /// Trace point of step `k` in root coordinates: the pull-back of the
    /// driver position.
    pub fn trace_point(&self, k: usize) -> Complex<T> {
        let (theta, _) = self.steps[k.min(self.steps.len() - 1)];
        self.pull_back(Complex::new(theta.cos(), theta.sin()), k)
    }
}

/// Tracked component of the target.
#[derive(Debug, Clone)]
pub struct ComponentNode<T: Scalar> {
    /// number of level lines traced so far
    pub depth: usize,
    /// piecewise-constant boundary offsets: (start angle, end angle, value),
    /// counterclockwise in the current uniformized disc
    pub boundary_data: Vec<(T, T, T)>,
    pub uniformizer: Uniformizer<T>,
    pub status: ComponentStatus<T>,
}

/// Per-line record, for the value-process diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct LineRecord<T: Scalar> {
    /// capacity time consumed by this line
    pub capacity: T,
    /// harmonic value at the target before/after the line
    pub h_before: T,
    pub h_after: T,
    /// deposits of this line (left, right); always `2 lambda` apart
    pub deposit_lo: T,
    pub deposit_hi: T,
}

/// Result of one geometric build.
#[derive(Debug, Clone)]
pub struct GeometricBuild<T: Scalar> {
    pub node: ComponentNode<T>,
    pub lines: Vec<LineRecord<T>>,
    /// outcome when closed
    pub outcome: Option<ValueOutcome<T>>,
    pub truncated: bool,
}

struct LineState<T: Scalar> {
    /// relative marked angles, increasing, in (0, 2 pi): first entry is the
    /// counterclockwise curve base, last the clockwise curve base
    markers: Vec<T>,
    tags: Vec<Tag>,
    y_index: usize,
    rho_cw: T,
    rho_ccw: T,
    rho_y: T,
}

/// Exact transition of the driver-to-base gap: near zero the half-gap is a
/// Bessel process of dimension `delta = 1 + (rho + 2)/2`, and its square
/// decomposes as `X' = (sqrt(X) - dB)^2 + h * chi^2_{delta - 1}` with the
/// SAME Brownian increment that moves the driver. Sharing `dB` keeps the
/// driver/gap coupling consistent, so the derived driver move carries the
/// full noise plus the correct singular attraction.
fn bessel_gap_step<T: Scalar, R: Rng>(rng: &mut R, gap: T, rho: T, h: T, db: T) -> T {
    let extra_dof = crate::scalar::to_f64((rho + flt::<T>(2.0)) / flt::<T>(2.0)).max(1e-6);
    let r = gap / flt::<T>(2.0) - db;
    let chi2 = Gamma::new(extra_dof / 2.0, 2.0)
        .map(|d| d.sample(rng))
        .unwrap_or(0.0);
    let x_new = r * r + h * flt::<T>(chi2);
    flt::<T>(2.0) * x_new.sqrt()
}

enum LineEnd<T: Scalar> {
    /// kept arcs as (tag, relative start, relative end) about the final
    /// driver angle, counterclockwise and covering the full circle, plus the
    /// vanished side's spans
    Completed {
        arcs: Vec<(Tag, T, T)>,
        lost: Vec<(Tag, T)>,
        capacity: T,
        theta: T,
    },
    Overflow,
}

/// Trace one level line, evolving the global uniformizer log.
fn run_line<T: Scalar>(
    rng: &mut ChaCha8Rng,
    mut st: LineState<T>,
    dt: T,
    max_steps: usize,
    log: &mut Uniformizer<T>,
    theta_abs: T,
) -> LineEnd<T> {
    let two_pi = flt::<T>(2.0) * T::PI();
    let delta_end = flt::<T>(2.0) * dt.sqrt();
    // below this gap the driver-base pair is resolved by the exact Bessel
    // transition instead of Euler-Maruyama
    let glue_zone = flt::<T>(4.0) * dt.sqrt();
    let sd = dt.sqrt();
    let guard = flt::<T>(0.5) * sd;
    let move_cap = flt::<T>(4.0) * sd;
    let mut theta = theta_abs;
    let mut capacity = T::zero();
    for _ in 0..max_steps {
        // completion: the end marker collapsed onto the tip from either side
        let rel_y = st.markers[st.y_index];
        if rel_y < delta_end || two_pi - rel_y < delta_end {
            let (arcs, lost) = assemble_sides(&st);
            return LineEnd::Completed {
                arcs,
                lost,
                capacity,
                theta,
            };
        }
        let gap_ccw = st.markers[0];
        let gap_cw = two_pi - st.markers[st.markers.len() - 1];

        // drift terms of the driver, excluding (when glued) the base that
        // the exact gap transition will absorb
        let glued_side = if gap_ccw.min(gap_cw) < glue_zone {
            if gap_ccw <= gap_cw {
                Some(0usize)
            } else {
                Some(1usize)
            }
        } else {
            None
        };
        let mut drift = T::zero();
        for (side, rho, idx) in [
            (Some(0usize), st.rho_ccw, 0usize),
            (Some(1usize), st.rho_cw, st.markers.len() - 1),
            (None, st.rho_y, st.y_index),
        ] {
            if rho.is_zero() || (side.is_some() && side == glued_side) {
                continue;
            }
            // cot((theta - beta)/2) = -cot(psi/2)
            let psi = st.markers[idx];
            drift = drift - rho / flt::<T>(2.0) * (psi / flt::<T>(2.0)).tan().recip();
        }

        // flow everything, then pick the driver move
        for psi in st.markers.iter_mut() {
            *psi = radial_boundary_step(*psi, dt);
        }
        log.steps.push((theta, dt));
        capacity = capacity + dt;

        // Near a base the pathwise identity `int ds/gap = (gap change +- dw)/2`
        // eliminates the singular attraction integral from the driver's move:
        // with the exact gap transition this balances the value-process
        // martingale identically, while plain Euler-Maruyama would bias the
        // boundary-eating rate at every touch.
        let db = sd * standard_normal::<T, _>(rng);
        let two = flt::<T>(2.0);
        let rho_floor = -two + flt::<T>(0.05);
        let (dw, glued_override): (T, Option<(usize, T)>) = match glued_side {
            Some(0) => {
                let rho = st.rho_ccw.max(rho_floor);
                let new_gap = bessel_gap_step(rng, gap_ccw, rho, dt, db);
                let dw = (two * db - rho / two * (new_gap - gap_ccw) + drift * dt)
                    / (T::one() + rho / two);
                let final_gap = (new_gap - drift * dt).max(flt::<T>(1e-12));
                (dw, Some((0, final_gap)))
            }
            Some(1) => {
                let rho = st.rho_cw.max(rho_floor);
                let new_gap = bessel_gap_step(rng, gap_cw, rho, dt, -db);
                let dw = (two * db + rho / two * (new_gap - gap_cw) + drift * dt)
                    / (T::one() + rho / two);
                let final_gap = (new_gap + drift * dt).max(flt::<T>(1e-12));
                (dw, Some((st.markers.len() - 1, two_pi - final_gap)))
            }
            _ => (
                two * db + (drift * dt).max(-move_cap).min(move_cap),
                None,
            ),
        };
        let dw = dw.max(-T::PI() / two).min(T::PI() / two);
        for psi in st.markers.iter_mut() {
            *psi = *psi - dw;
        }
        if let Some((idx, value)) = glued_override {
            st.markers[idx] = value;
        }
        theta = theta + dw;

        // crossings at the counterclockwise end
        loop {
            if st.markers[0] <= guard {
                if st.markers.len() > 1 && st.markers[1] <= guard {
                    // a junction was overrun: its leading span is gone
                    if st.y_index == 1 {
                        let (arcs, lost) = assemble_sides(&st);
                        return LineEnd::Completed {
                            arcs,
                            lost,
                            capacity,
                            theta,
                        };
                    }
                    st.markers.remove(1);
                    st.tags.remove(0);
                    st.y_index -= 1;
                    continue;
                }
                st.markers[0] = guard;
            }
            break;
        }
        // crossings at the clockwise end
        loop {
            let last = st.markers.len() - 1;
            if st.markers[last] >= two_pi - guard {
                if last >= 1 && st.markers[last - 1] >= two_pi - guard {
                    if st.y_index == last - 1 {
                        let (arcs, lost) = assemble_sides(&st);
                        return LineEnd::Completed {
                            arcs,
                            lost,
                            capacity,
                            theta,
                        };
                    }
                    st.markers.remove(last - 1);
                    st.tags.remove(st.tags.len() - 1);
                    continue;
                }
                st.markers[last] = two_pi - guard;
            }
            break;
        }
    }
    LineEnd::Overflow
}

/// Keep the side of the completed crosscut that retains the target: compare
/// total widths on the two sides of the end marker and return that side,
/// counterclockwise, with the unresolved sliver of the vanished side absorbed
/// into the adjacent curve arc so the circle stays covered at true angles.
/// Also reports the spans of the vanished side, for the value-process
/// capacity accounting of the absorption.
fn assemble_sides<T: Scalar>(st: &LineState<T>) -> (Vec<(Tag, T, T)>, Vec<(Tag, T)>) {
    let two_pi = flt::<T>(2.0) * T::PI();
    let rel_y = st.markers[st.y_index];
    // side A: ccw curve arc [0, m0] + spans up to y, total width rel_y
    // side B: spans y..end + cw curve arc [m_last, 2 pi], width 2 pi - rel_y
    if rel_y >= two_pi - rel_y {
        // keep side A; the collapsed remainder (rel_y, 2 pi) merges into the
        // ccw curve arc across the wrap
        let mut out: Vec<(Tag, T, T)> = vec![(Tag::Hi, rel_y - two_pi, st.markers[0])];
        for i in 0..st.y_index {
            out.push((st.tags[i], st.markers[i], st.markers[i + 1]));
        }
        let mut lost: Vec<(Tag, T)> = Vec::new();
        for i in st.y_index..st.tags.len() {
            lost.push((st.tags[i], st.markers[i + 1] - st.markers[i]));
        }
        lost.push((Tag::Lo, two_pi - st.markers[st.markers.len() - 1]));
        (out, lost)
    } else {
        let mut out: Vec<(Tag, T, T)> = Vec::new();
        for i in st.y_index..st.tags.len() {
            out.push((st.tags[i], st.markers[i], st.markers[i + 1]));
        }
        // cw curve arc extended across the wrap to cover (0, rel_y)
        out.push((Tag::Lo, st.markers[st.markers.len() - 1], two_pi + rel_y));
        let mut lost: Vec<(Tag, T)> = vec![(Tag::Hi, st.markers[0])];
        for i in 0..st.y_index {
            lost.push((st.tags[i], st.markers[i + 1] - st.markers[i]));
        }
        (out, lost)
    }
}

/// Stage alignment: level shift `c` for running offset `v`, flush against an
/// absorbing value within `lambda` of it.
fn stage_shift<T: Scalar>(v: T, a: T, b: T, lambda: T) -> T {
    let up = b - v;
    let down = v + a;
    let tol = flt::<T>(1e-9);
    if up < lambda - tol {
        up - lambda
    } else if down < lambda - tol {
        lambda - down
    } else {
        T::zero()
    }
}

/// Build the two-valued set geometrically for the target at the origin of the
/// unit disc, down to conformal-radius resolution `delta`.
pub fn build_geometric<T: Scalar>(
    seed: Seed,
    spec: &TwoValuedSpec<T>,
    delta: T,
    step: T,
) -> Result<GeometricBuild<T>> {
    if spec.trivial {
        return Ok(GeometricBuild {
            node: ComponentNode {
                depth: 0,
                boundary_data: vec![(T::zero(), flt::<T>(2.0) * T::PI(), T::zero())],
                uniformizer: Uniformizer::default(),
                status: ComponentStatus::Closed { label: T::zero() },
            },
            lines: Vec::new(),
            outcome: Some(ValueOutcome {
                label: T::zero(),
                log_crad_drop: T::zero(),
            }),
            truncated: false,
        });
    }
    if delta <= T::zero() || delta >= T::one() {
        return Err(Error::invalid_argument("delta must be in (0, 1)"));
    }
    if step <= T::zero() {
        return Err(Error::invalid_argument("step must be positive"));
    }
    let lambda = crate::lambda::<T>();
    let two_pi = flt::<T>(2.0) * T::PI();
    let t_max = (T::one() / delta).ln();
    let max_steps_per_line = 2_000_000usize;
    let max_lines = 10_000usize;
    let close_tol = flt::<T>(1e-9);
    let (a, b) = (spec.a, spec.b);

    let mut rng = seed.rng();
    let mut log = Uniformizer::default();
    let mut lines: Vec<LineRecord<T>> = Vec::new();
    let mut v = T::zero();
    let mut depth = 0usize;
    // capacity credited for below-resolution absorptions, outside the maps
    let mut extra_capacity = T::zero();

    'stages: loop {
        let c = stage_shift(v, a, b, lambda);
        let level = v + c;
        let (lo_val, hi_val) = (level - lambda, level + lambda);
        // stage root: constant data v on the whole circle; the line setup
        // injects the marked points at -pi/2 and pi/2
        let mut arcs: Vec<(T, T, T)> = vec![(T::zero(), two_pi, v)];
        loop {
            // truncation check before each new line
            if log.capacity() + extra_capacity > t_max {
                return Ok(finish(
                    log, lines, depth, arcs, None,
                    ComponentStatus::Truncated { current_offset: v },
                ));
            }
            if depth >= max_lines {
                return Ok(finish(
                    log, lines, depth, arcs, None,
                    ComponentStatus::Truncated { current_offset: v },
                ));
            }
            // set up the line from the current component arcs
            let (state, start_abs) = match line_setup(&arcs, v, level, lambda, step) {
                Some(x) => x,
                None => {
                    // component already constant at a deposit value
                    let val = arcs[0].2;
                    v = val;
                    break;
                }
            };
            let h_before = harmonic_value(&arcs);
            depth += 1;
            let end = run_line(&mut rng, state, step, max_steps_per_line, &mut log, start_abs);
            let (kept, lost, cap, theta_end) = match end {
                LineEnd::Completed {
                    arcs: k,
                    lost,
                    capacity,
                    theta,
                } => (k, lost, capacity, theta),
                LineEnd::Overflow => {
                    return Ok(finish(
                        log, lines, depth, arcs, None,
                        ComponentStatus::Truncated { current_offset: v },
                    ));
                }
            };
            let value_of = |tag: Tag| match tag {
                Tag::Domain => v,
                Tag::Lo => lo_val,
                Tag::Hi => hi_val,
            };
            // Every absorption of boundary width into a differently-valued
            // arc cuts the value walk short by a known mean exit time
            // (optional stopping); credit that capacity so the radius drop
            // stays unbiased at the grid resolution.
            let two_lambda = flt::<T>(2.0) * lambda;
            let two_pi_t = two_pi;
            let mut cap_credit = T::zero();
            let mut credit = |width: T, from: T, into: T| {
                let dh = (into - from).abs() * width / two_pi_t;
                if dh > T::zero() {
                    cap_credit = cap_credit
                        + dh * (two_lambda - dh).max(T::zero())
                            * (T::PI() / two_lambda) * (T::PI() / two_lambda);
                }
            };
            // vanished side absorbed into the kept curve arc
            let kept_curve_val = value_of(kept[0].0);
            for &(tag, w) in &lost {
                credit(w, value_of(tag), kept_curve_val);
            }
            // materialize at true angles: slivers below resolution merge into
            // their predecessor so the circle stays covered
            let min_width = flt::<T>(0.5) * step.sqrt();
            let base = theta_end + kept[0].1;
            let mut new_arcs: Vec<(T, T, T)> = Vec::new();
            let mut acc = base;
            for &(tag, rs, re) in &kept {
                let val = value_of(tag);
                let w = re - rs;
                if w >= min_width {
                    if let Some(last) = new_arcs.last_mut() {
                        if (last.2 - val).abs() < close_tol {
                            last.1 = acc + w;
                            acc = acc + w;
                            continue;
                        }
                    }
                    new_arcs.push((acc, acc + w, val));
                } else {
                    if let Some(last) = new_arcs.last_mut() {
                        credit(w, val, last.2);
                        last.1 = acc + w;
                    }
                }
                acc = acc + w;
            }
            if new_arcs.is_empty() {
                return Ok(finish(
                    log, lines, depth, arcs, None,
                    ComponentStatus::Truncated { current_offset: v },
                ));
            }
            // absorb any leading sliver and cyclic duplicate values
            new_arcs.first_mut().unwrap().0 = base;
            if new_arcs.len() > 1 {
                let first_val = new_arcs[0].2;
                let last = new_arcs.last().unwrap();
                if (last.2 - first_val).abs() < close_tol {
                    let shift = last.1 - last.0;
                    new_arcs.first_mut().unwrap().0 = new_arcs[0].0 - shift;
                    new_arcs.pop();
                }
            }
            arcs = new_arcs;
            extra_capacity = extra_capacity + cap_credit;
            let h_after = harmonic_value(&arcs);
            lines.push(LineRecord {
                capacity: cap + cap_credit,
                h_before,
                h_after,
                deposit_lo: lo_val,
                deposit_hi: hi_val,
            });
            // closed within the stage?
            if arcs.len() == 1 {
                let val = arcs[0].2;
                if (val - lo_val).abs() < close_tol || (val - hi_val).abs() < close_tol {
                    v = val;
                    break;
                }
                if (val - v).abs() < close_tol {
                    // degenerate: the whole deposit side vanished, retry the
                    // stage root in the remaining component
                    continue;
                }
            }
        }
        // stage closed at offset v
        if (v + a).abs() < close_tol || (v - b).abs() < close_tol {
            let label = if (v + a).abs() < close_tol { -a } else { b };
            let drop = log.capacity() + extra_capacity;
            let arcs_final = vec![(T::zero(), two_pi, label)];
            return Ok(finish(
                log,
                lines,
                depth,
                arcs_final,
                Some(ValueOutcome {
                    label,
                    log_crad_drop: drop,
                }),
                ComponentStatus::Closed { label },
            ));
        }
        continue 'stages;
    }
}

fn finish<T: Scalar>(
    log: Uniformizer<T>,
    lines: Vec<LineRecord<T>>,
    depth: usize,
    arcs: Vec<(T, T, T)>,
    outcome: Option<ValueOutcome<T>>,
    status: ComponentStatus<T>,
) -> GeometricBuild<T> {
    let truncated = matches!(status, ComponentStatus::Truncated { .. });
    GeometricBuild {
        node: ComponentNode {
            depth,
            boundary_data: arcs,
            uniformizer: log,
            status,
        },
        lines,
        outcome,
        truncated,
    }
}

/// Harmonic value at the origin: data weighted by arc width over 2 pi.
fn harmonic_value<T: Scalar>(arcs: &[(T, T, T)]) -> T {
    let two_pi = flt::<T>(2.0) * T::PI();
    arcs.iter().map(|&(s, e, u)| (e - s) * u).sum::<T>() / two_pi
}

/// Pick the start junction and initial marker layout for the next line in a
/// component given by `arcs` (absolute angles, ccw, covering the circle).
///
/// Returns `None` when the component is already single-valued at a deposit.
fn line_setup<T: Scalar>(
    arcs: &[(T, T, T)],
    v: T,
    level: T,
    lambda: T,
    step: T,
) -> Option<(LineState<T>, T)> {
    let two_pi = flt::<T>(2.0) * T::PI();
    let delta_start = step.sqrt();
    let close_tol = flt::<T>(1e-9);
    let lo_val = level - lambda;
    let hi_val = level + lambda;
    let rho_left = |u: T| -T::one() - (u - level) / lambda;
    let rho_right = |u: T| -T::one() + (u - level) / lambda;

    if arcs.len() == 1 {
        let u = arcs[0].2;
        if (u - lo_val).abs() < close_tol || (u - hi_val).abs() < close_tol {
            return None;
        }
        // constant-v root: start at 3 pi/2, end at pi/2
        let start = flt::<T>(1.5) * T::PI();
        let markers = vec![delta_start, T::PI(), two_pi - delta_start];
        let tags = vec![Tag::Domain, Tag::Domain];
        return Some((
            LineState {
                markers,
                tags,
                y_index: 1,
                rho_cw: rho_left(u),
                rho_ccw: rho_right(u),
                rho_y: -flt::<T>(2.0) - rho_left(u) - rho_right(u),
            },
            start,
        ));
    }
    if arcs.len() == 2 {
        let val0 = arcs[0].2;
        let val1 = arcs[1].2;
        let is_dom = |u: T| (u - v).abs() < close_tol;
        let is_lo_val = |u: T| (u - lo_val).abs() < close_tol;
        if is_dom(val0) || is_dom(val1) {
            // one domain arc and one deposit arc
            let dep_idx = if is_dom(val0) { 1usize } else { 0usize };
            let dep_val = arcs[dep_idx].2;
            let is_lo = is_lo_val(dep_val);
            // Lo deposits sit on the curve's clockwise (left) side: start at
            // the junction whose clockwise neighbour is the Lo arc, i.e. the
            // ccw end of the Lo arc. For Hi, mirror: the ccw start of the Hi
            // arc.
            let start = if is_lo {
                arcs[dep_idx].1
            } else {
                arcs[dep_idx].0
            };
            let end = if is_lo { arcs[dep_idx].0 } else { arcs[dep_idx].1 };
            let rel_y = wrap_2pi(end - start, two_pi);
            let (tags, rho_cw, rho_ccw) = if is_lo {
                // ccw from start: domain span then the Lo arc
                (
                    vec![Tag::Domain, Tag::Lo],
                    rho_left(lo_val), // = 0
                    rho_right(v),
                )
            } else {
                (
                    vec![Tag::Hi, Tag::Domain],
                    rho_left(v),
                    rho_right(hi_val), // = 0
                )
            };
            let markers = vec![delta_start, rel_y, two_pi - delta_start];
            let rho_y = -flt::<T>(2.0) - rho_cw - rho_ccw;
            return Some((
                LineState {
                    markers,
                    tags,
                    y_index: 1,
                    rho_cw,
                    rho_ccw,
                    rho_y,
                },
                start,
            ));
        }
        // two deposit arcs: a plain crossing line splits them for good; the
        // start junction is the one with the Lo arc clockwise-adjacent
        let lo_idx = if is_lo_val(val0) { 0usize } else { 1usize };
        let start = arcs[lo_idx].1;
        let end = arcs[lo_idx].0;
        let rel_y = wrap_2pi(end - start, two_pi);
        return Some((
            LineState {
                markers: vec![delta_start, rel_y, two_pi - delta_start],
                tags: vec![Tag::Hi, Tag::Lo],
                y_index: 1,
                rho_cw: T::zero(),
                rho_ccw: T::zero(),
                rho_y: -flt::<T>(2.0),
            },
            start,
        ));
    }
    // more than two arcs: start at the first junction between the domain
    // value and a deposit, end at the next junction
    let n = arcs.len();
    for i in 0..n {
        let cur = arcs[i].2;
        let nxt = arcs[(i + 1) % n].2;
        if (cur - lo_val).abs() < close_tol && (nxt - v).abs() < close_tol {
            // junction at end of a Lo arc
            let start = arcs[i].1;
            let end = arcs[i].0;
            let rel_y = wrap_2pi(end - start, two_pi);
            let mut markers = vec![delta_start];
            let mut tags = Vec::new();
            // walk ccw listing junctions until back at the Lo arc start
            let mut angle = start;
            let mut idx = (i + 1) % n;
            loop {
                let w = wrap_2pi(arcs[idx].1 - arcs[idx].0, two_pi);
                angle = angle + w;
                let rel = wrap_2pi(angle - start, two_pi);
                tags.push(if (arcs[idx].2 - v).abs() < close_tol {
                    Tag::Domain
                } else if (arcs[idx].2 - lo_val).abs() < close_tol {
                    Tag::Lo
                } else {
                    Tag::Hi
                });
                if idx == i {
                    break;
                }
                markers.push(rel.min(rel_y.max(rel)));
                idx = (idx + 1) % n;
            }
            markers.push(two_pi - delta_start);
            let y_index = markers
                .iter()
                .enumerate()
                .min_by(|(_, x), (_, y)| {
                    ((**x) - rel_y)
                        .abs()
                        .partial_cmp(&((**y) - rel_y).abs())
                        .unwrap()
                })
                .map(|(k, _)| k)
                .unwrap_or(1);
            let rho_cw = rho_left(lo_val);
            let rho_ccw = rho_right(nxt);
            return Some((
                LineState {
                    markers,
                    tags,
                    y_index,
                    rho_cw,
                    rho_ccw,
                    rho_y: -flt::<T>(2.0) - rho_cw - rho_ccw,
                },
                start,
            ));
        }
    }
    // fall back: treat as root in the dominant value
    None
}

#[inline]
fn wrap_2pi<T: Scalar>(x: T, two_pi: T) -> T {
    let mut r = x % two_pi;
    if r < T::zero() {
        r = r + two_pi;
    }
    if r.is_zero() {
        two_pi
    } else {
        r
    }
}
