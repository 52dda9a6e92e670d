//! Per-point conformal loop ensemble records at level gap `2*lambda*M`,
//! nested-label walks, one-point decay-exponent experiments, and a carpet
//! raster for figures.
//!
//! Reduced mode uses the interval-exit reduction: the log-conformal-radius
//! drop seen from the target is the first-exit time of a Brownian motion from
//! `(-M pi, M pi)`, and the label sign is the exit side. Geometric mode runs
//! the radial exploration driver until that same exit and reads the radius
//! drop off the evolved maps; the two agree in law, which is exactly what the
//! mode-agreement tests check.

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::harness::{exponent_fit, ExitLawOracle, ExponentFit};
use crate::loewner::PointState;
use crate::paths::{first_exit_with_rng, ExitSide};
use crate::scalar::{flt, to_f64, Scalar};
use crate::seed::Seed;
use crate::sle::{default_epsilon, radial_sle42, HorizonRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Reduced,
    Geometric,
}

/// Outcome of one per-point construction.
#[derive(Debug, Clone)]
pub struct TargetRecord<T: Scalar> {
    pub z: Complex<T>,
    pub m: u32,
    pub log_crad_drop: T,
    /// `+-2 lambda M`
    pub label: T,
    /// nested label walk `Upsilon_1 .. Upsilon_k`, stopped at `|Upsilon| = M`
    pub nested_labels: Vec<i64>,
    pub mode: Mode,
}

/// Per-point sample of the level-`M` ensemble.
///
/// Off-center targets are handled by the Moebius automorphism moving the
/// target to the origin; the radius drop is invariant under that re-rooting,
/// so the engine always targets `0`.
pub fn sample_cle_point<T: Scalar>(
    seed: Seed,
    z: Complex<T>,
    m: u32,
    mode: Mode,
    step: T,
) -> Result<TargetRecord<T>> {
    if z.norm() >= T::one() {
        return Err(Error::invalid_argument("target not in the open unit disc"));
    }
    if m == 0 {
        return Err(Error::invalid_argument("level M must be >= 1"));
    }
    match mode {
        Mode::Reduced => sample_reduced(seed, z, m, step),
        Mode::Geometric => sample_geometric(seed, z, m, step),
    }
}

/// Level-by-level reduced construction: each level is an exit of `(-pi, pi)`
/// restarted at the center, the label walk is the running sum of exit signs,
/// and the total radius drop is the summed exit time. By the strong Markov
/// property this is the same law as one exit of `(-M pi, M pi)`.
fn sample_reduced<T: Scalar>(
    seed: Seed,
    z: Complex<T>,
    m: u32,
    step: T,
) -> Result<TargetRecord<T>> {
    let mut rng = seed.rng();
    let pi = T::PI();
    let mut upsilon: i64 = 0;
    let mut nested = Vec::new();
    let mut total = T::zero();
    loop {
        let exit = first_exit_with_rng(&mut rng, step, (-pi, pi), T::zero())?;
        total = total + exit.exit_time;
        upsilon += match exit.side {
            ExitSide::Upper => 1,
            ExitSide::Lower => -1,
        };
        nested.push(upsilon);
        if upsilon.unsigned_abs() as u32 >= m {
            break;
        }
    }
    let two_lambda_m = flt::<T>(2.0) * crate::lambda::<T>() * flt::<T>(m as f64);
    let label = if upsilon > 0 {
        two_lambda_m
    } else {
        -two_lambda_m
    };
    Ok(TargetRecord {
        z,
        m,
        log_crad_drop: total,
        label,
        nested_labels: nested,
        mode: Mode::Reduced,
    })
}

fn sample_geometric<T: Scalar>(
    seed: Seed,
    z: Complex<T>,
    m: u32,
    step: T,
) -> Result<TargetRecord<T>> {
    let driver = radial_sle42(
        seed,
        step,
        default_epsilon(step),
        HorizonRule::UntilBExits { m },
    )?;
    let chain = driver.chain()?;
    let t = chain.horizon();
    // radius drop read off the evolved maps at the stopping time
    let crad = chain.conformal_radius(Complex::new(T::zero(), T::zero()), t)?;
    let log_drop = -crad.ln();
    let terminal = *driver.b.values.last().unwrap();
    let two_lambda_m = flt::<T>(2.0) * crate::lambda::<T>() * flt::<T>(m as f64);
    let label = if terminal > T::zero() {
        two_lambda_m
    } else {
        -two_lambda_m
    };
    let nested = level_walk(&driver.b.values, m);
    Ok(TargetRecord {
        z,
        m,
        log_crad_drop: log_drop,
        label,
        nested_labels: nested,
        mode: Mode::Geometric,
    })
}

/// Nested-label walk read from a Brownian path: successive first passages to
/// neighbouring multiples of pi, stopped at `|Upsilon| = m`.
fn level_walk<T: Scalar>(values: &[T], m: u32) -> Vec<i64> {
    let pi = T::PI();
    let mut level: i64 = 0;
    let mut out = Vec::new();
    for &v in values {
        let up = flt::<T>((level + 1) as f64) * pi;
        let down = flt::<T>((level - 1) as f64) * pi;
        if v >= up {
            level += 1;
            out.push(level);
        } else if v <= down {
            level -= 1;
            out.push(level);
        }
        if level.unsigned_abs() as u32 >= m {
            break;
        }
    }
    out
}

/// Independent nested labels: a fair +-1 walk of length `n`.
///
/// Labels of disjoint nesting levels are independent fair signs, so the
/// reduced-mode draw per level is a single coin.
pub fn nested_labels(seed: Seed, n: usize) -> Result<Vec<i64>> {
    if n < 1 {
        return Err(Error::invalid_argument("n must be >= 1"));
    }
    let mut rng = seed.rng();
    let mut acc = 0i64;
    Ok((0..n)
        .map(|_| {
            acc += if rng.gen::<bool>() { 1 } else { -1 };
            acc
        })
        .collect())
}

/// One-point decay experiment: estimates `P(crad drop > log(1/r))` per grid
/// radius in reduced mode and fits the log-log slope.
#[derive(Debug, Clone)]
pub struct DecayEstimate<T: Scalar> {
    pub r_values: Vec<T>,
    pub probabilities: Vec<T>,
    pub fit: ExponentFit<T>,
}

pub fn one_point_decay<T: Scalar>(
    seed: Seed,
    m: u32,
    r_grid: &[T],
    n: usize,
    step: T,
) -> Result<DecayEstimate<T>> {
    let pi = T::PI();
    let barrier = pi * flt::<T>(m as f64);
    decay_from_exit_tail(seed, (-barrier, barrier), r_grid, n, step)
}

/// Shared tail estimator: simulate first exits of `interval`, censored at the
/// largest needed time, and convert tail hits `T > log(1/r)` into per-radius
/// probabilities.
pub(crate) fn decay_from_exit_tail<T: Scalar>(
    seed: Seed,
    interval: (T, T),
    r_grid: &[T],
    n: usize,
    step: T,
) -> Result<DecayEstimate<T>> {
    if r_grid.len() < 3 {
        return Err(Error::invalid_argument("need at least 3 grid radii"));
    }
    for w in r_grid.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::invalid_argument("r grid must be decreasing"));
        }
    }
    if *r_grid.first().unwrap() >= flt::<T>(0.25) {
        return Err(Error::invalid_argument("r grid must lie in (0, 1/4)"));
    }
    let thresholds: Vec<T> = r_grid.iter().map(|&r| (T::one() / r).ln()).collect();
    let t_max = *thresholds.last().unwrap();
    use rayon::prelude::*;
    let hits: Vec<usize> = (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed.derive(crate::seed::Stream::Cle, k).rng();
            let mut hit = vec![0usize; r_grid.len()];
            let t = censored_exit_time(&mut rng, step, interval, t_max);
            for (i, &thr) in thresholds.iter().enumerate() {
                if t > thr {
                    hit[i] = 1;
                }
            }
            hit
        })
        .reduce(
            || vec![0usize; r_grid.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b.iter()) {
                    *x += y;
                }
                a
            },
        );
    let nf = flt::<T>(n as f64);
    let probabilities: Vec<T> = hits.iter().map(|&h| flt::<T>(h as f64) / nf).collect();
    let weights: Vec<T> = probabilities
        .iter()
        .map(|&p| {
            if p > T::zero() && p < T::one() {
                // weight = 1/var(log p) = p n / (1 - p)
                p * nf / (T::one() - p)
            } else {
                T::zero()
            }
        })
        .collect();
    let fit = exponent_fit(r_grid, &probabilities, Some(&weights))?;
    Ok(DecayEstimate {
        r_values: r_grid.to_vec(),
        probabilities,
        fit,
    })
}

/// Exit time capped just past `t_max` (censored values count as tail hits for
/// every threshold at or below the cap).
fn censored_exit_time<T: Scalar, R: Rng>(rng: &mut R, step: T, interval: (T, T), t_max: T) -> T {
    let (lo, hi) = interval;
    let sd = step.sqrt();
    let mut x = T::zero();
    let mut t = T::zero();
    let cap = t_max + step;
    loop {
        let x_next = x + sd * crate::paths::standard_normal::<T, _>(rng);
        t = t + step;
        if x_next >= hi || x_next <= lo {
            return t;
        }
        let p_up = (-flt::<T>(2.0) * (hi - x) * (hi - x_next) / step).exp();
        let p_lo = (-flt::<T>(2.0) * (x - lo) * (x_next - lo) / step).exp();
        let u: T = flt(rng.gen::<f64>());
        if u < p_up || u > T::one() - p_lo {
            return t;
        }
        if t > cap {
            return t;
        }
        x = x_next;
    }
}

/// Analytic cross-check for [`one_point_decay`]: exponent fitted on the
/// series-oracle tail itself.
pub fn oracle_decay_exponent<T: Scalar>(m: u32, r_grid: &[T]) -> Result<ExponentFit<T>> {
    let pi = T::PI();
    let barrier = pi * flt::<T>(m as f64);
    let oracle = ExitLawOracle::symmetric(barrier)?;
    let ps: Vec<T> = r_grid
        .iter()
        .map(|&r| oracle.survival((T::one() / r).ln()))
        .collect();
    exponent_fit(r_grid, &ps, None)
}

/// Raster of the exploration state at a fixed capacity time.
#[derive(Debug, Clone)]
pub struct CarpetRaster {
    pub resolution: usize,
    /// row-major over the bounding square of the disc
    pub in_hull: Vec<bool>,
    pub alive: Vec<bool>,
    /// conformal radius for alive cells, 0 for hull cells, NaN outside the
    /// sampled disc
    pub crad: Vec<f64>,
    pub branches: Vec<BranchRecord>,
}

/// Branch bookkeeping for a secondary target: the common driver is shared up
/// to the disconnection time (detected by swallowing in the common chain) and
/// a fresh derived seed continues the branch afterwards.
#[derive(Debug, Clone)]
pub struct BranchRecord {
    pub target: (f64, f64),
    /// steps of the common driver shared before disconnection (whole driver
    /// if never disconnected)
    pub shared_steps: usize,
    pub continuation_seed: Seed,
}

/// Rasterize one exploration run at a fixed capacity time (one unit, or the
/// driver's exit if that comes first); `n_branch_points` targets get branch
/// records with disconnections detected against the full driver.
pub fn carpet_raster<T: Scalar>(
    seed: Seed,
    m: u32,
    resolution: usize,
    n_branch_points: usize,
    step: T,
) -> Result<CarpetRaster> {
    if resolution < 32 {
        return Err(Error::invalid_argument("resolution must be >= 32"));
    }
    let driver = radial_sle42::<T>(
        seed,
        step,
        default_epsilon(step),
        HorizonRule::UntilBExits { m },
    )?;
    let chain = driver.chain()?;
    let t = chain.horizon().min(T::one());
    let n_steps = driver.xi.len() - 1;

    let mut cells = Vec::new();
    let mut cell_index = Vec::new();
    for j in 0..resolution {
        for i in 0..resolution {
            let x = -1.0 + 2.0 * (i as f64 + 0.5) / resolution as f64;
            let y = -1.0 + 2.0 * (j as f64 + 0.5) / resolution as f64;
            if x * x + y * y < 0.96 {
                cell_index.push(cells.len());
                cells.push(Complex::new(flt::<T>(x), flt::<T>(y)));
            } else {
                cell_index.push(usize::MAX);
            }
        }
    }
    let states = chain.map_points_batch(&cells, t)?;

    let total = resolution * resolution;
    let mut in_hull = vec![false; total];
    let mut alive = vec![false; total];
    let mut crad = vec![f64::NAN; total];
    for (flat, &ci) in cell_index.iter().enumerate() {
        if ci == usize::MAX {
            continue;
        }
        match states[ci] {
            PointState::Swallowed(_) => {
                in_hull[flat] = true;
                crad[flat] = 0.0;
            }
            PointState::Alive(_) => {
                alive[flat] = true;
                if let Ok(c) = chain.conformal_radius(cells[ci], t) {
                    crad[flat] = to_f64(c);
                }
            }
        }
    }

    // branch bookkeeping toward a coarse sublattice of targets
    let mut branches = Vec::new();
    if n_branch_points > 0 {
        let per_side = (n_branch_points as f64).sqrt().ceil() as usize;
        'outer: for j in 0..per_side {
            for i in 0..per_side {
                if branches.len() >= n_branch_points {
                    break 'outer;
                }
                let x = -0.6 + 1.2 * (i as f64 + 0.5) / per_side as f64;
                let y = -0.6 + 1.2 * (j as f64 + 0.5) / per_side as f64;
                let target = Complex::new(flt::<T>(x), flt::<T>(y));
                let shared = match chain.map_point(target, chain.horizon())? {
                    PointState::Swallowed(ts) => (to_f64(ts) / to_f64(step)).round() as usize,
                    PointState::Alive(_) => n_steps,
                };
                branches.push(BranchRecord {
                    target: (x, y),
                    shared_steps: shared,
                    continuation_seed: seed.derive(crate::seed::Stream::Cle, branches.len() as u64),
                });
            }
        }
    }

    Ok(CarpetRaster {
        resolution,
        in_hull,
        alive,
        crad,
        branches,
    })
}

impl CarpetRaster {
    pub fn in_hull_fraction(&self) -> f64 {
        let mut disc = 0usize;
        let mut hull = 0usize;
        for k in 0..self.in_hull.len() {
            if self.crad[k].is_nan() && !self.in_hull[k] {
                continue;
            }
            disc += 1;
            if self.in_hull[k] {
                hull += 1;
            }
        }
        hull as f64 / disc as f64
    }

    /// Fraction of disc cells sitting on the hull boundary at this
    /// resolution: alive cells with a swallowed neighbour. Its decay with
    /// resolution reflects a boundary dimension below 2.
    pub fn near_boundary_fraction(&self) -> f64 {
        let res = self.resolution;
        let mut disc = 0usize;
        let mut near = 0usize;
        for j in 0..res {
            for i in 0..res {
                let k = j * res + i;
                if self.crad[k].is_nan() && !self.in_hull[k] {
                    continue;
                }
                disc += 1;
                if self.in_hull[k] {
                    continue;
                }
                let mut touches_hull = false;
                'nbhd: for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let (ni, nj) = (i as i64 + di, j as i64 + dj);
                        if ni < 0 || nj < 0 || ni >= res as i64 || nj >= res as i64 {
                            continue;
                        }
                        if self.in_hull[nj as usize * res + ni as usize] {
                            touches_hull = true;
                            break 'nbhd;
                        }
                    }
                }
                if touches_hull {
                    near += 1;
                }
            }
        }
        near as f64 / disc as f64
    }

    /// Plain-text PGM (P2): hull black, everything else white, with alive
    /// cells shaded by how much room the exploration left around them.
    pub fn to_pgm(&self) -> String {
        let mut s = format!("P2\n{} {}\n255\n", self.resolution, self.resolution);
        for j in 0..self.resolution {
            for i in 0..self.resolution {
                let k = j * self.resolution + i;
                let v = if self.crad[k].is_nan() && !self.in_hull[k] {
                    255
                } else if self.in_hull[k] {
                    0
                } else {
                    let shade = (self.crad[k].clamp(0.0, 1.0) * 159.0) as i32 + 96;
                    shade.min(255)
                };
                s.push_str(&format!("{v} "));
            }
            s.push('\n');
        }
        s
    }
}
