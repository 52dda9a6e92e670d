//! Suite implementations. Each suite runs its experiment, appends verdicts
//! and estimates to the report, writes CSV artifacts into the output
//! directory, and saves report.json last.

use num_complex::Complex;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use localsets::cle::{self, Mode};
use localsets::harness::{self, Estimate, ExitLawOracle};
use localsets::lambda;
use localsets::loewner::{self, PointState};
use localsets::paths::{self, ExitSide};
use localsets::seed::{Seed, Stream};
use localsets::sle::{self, default_epsilon, HorizonRule};
use localsets::tvs;

use crate::report::RunReport;
use crate::{Config, FigureArgs, FigureKind, Suite};

type R<T> = Result<T, String>;

fn write_file(dir: &Path, name: &str, contents: &str) -> R<String> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(name.to_string())
}

pub fn run(suite: Suite, config: &Config, out: &Path) -> R<RunReport> {
    std::fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    let started = std::time::Instant::now();
    let mut report = RunReport::new(config.clone());
    match suite {
        Suite::ExitLaws => exit_laws(config, out, &mut report)?,
        Suite::ClePoint => cle_point(config, out, &mut report)?,
        Suite::CleDecay => cle_decay(config, out, &mut report)?,
        Suite::TvsLaws => tvs_laws(config, out, &mut report)?,
        Suite::TvsGeometric => tvs_geometric(config, out, &mut report)?,
        Suite::CouplingIdentities => coupling_identities(config, out, &mut report)?,
        Suite::DgffChecks => dgff_checks(config, out, &mut report)?,
        Suite::Carpet => carpet(config, out, &mut report)?,
    }
    report.runtime_secs = started.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    std::fs::write(out.join("report.json"), json).map_err(|e| e.to_string())?;
    Ok(report)
}

fn seed_for(config: &Config, suite_tag: u64, replica: u64) -> Seed {
    Seed(config.master_seed)
        .split(suite_tag)
        .derive(Stream::Cli, replica)
}

/// Validate the two-valued parameters, mapping the threshold violation to a
/// usage error naming the constraint.
fn validated_spec(config: &Config) -> R<tvs::TwoValuedSpec<f64>> {
    let l = lambda::<f64>();
    tvs::validate::<f64>(config.a * l, config.b * l).map_err(|e| match e {
        localsets::Error::NoSuchBtls { .. } => format!(
            "usage error: no two-valued set exists for a={}, b={} (in lambda units): \
             a+b >= 2*lambda required",
            config.a, config.b
        ),
        other => other.to_string(),
    })
}

fn exit_laws(config: &Config, out: &Path, report: &mut RunReport) -> R<()> {
    let n = config.n_replicas;
    let mut csv = String::from("replica,interval,exit_time,side\n");
    for (name, half) in [("pi", PI), ("pi_over_2", PI / 2.0)] {
        let results: Vec<(f64, ExitSide)> = (0..n as u64)
            .into_par_iter()
            .map(|k| {
                let r = paths::first_exit::<f64>(
                    seed_for(config, 1, k),
                    config.step,
                    (-half, half),
                    0.0,
                )
                .unwrap();
                (r.exit_time, r.side)
            })
            .collect();
        for (k, (t, side)) in results.iter().enumerate() {
            csv.push_str(&format!(
                "{k},{name},{t},{}\n",
                if *side == ExitSide::Upper { "upper" } else { "lower" }
            ));
        }
        let times: Vec<f64> = results.iter().map(|r| r.0).collect();
        let oracle = ExitLawOracle::symmetric(half).unwrap();
        let (d, p) = harness::ks_test(&times, |t| oracle.cdf(t)).unwrap();
        report.verdict_p(
            &format!("exit_law_ks_{name}"),
            d,
            p,
            0.01,
            format!("interval (-{half:.4}, {half:.4}), N={n}"),
        );
        let est = Estimate::from_samples(&times);
        report.estimate(&format!("mean_exit_{name}"), est);
        let upper = results.iter().filter(|r| r.1 == ExitSide::Upper).count();
        let prop = harness::proportion_estimate::<f64>(upper, n);
        report.verdict_sigma(
            &format!("exit_side_symmetry_{name}"),
            prop.mean,
            prop.sigmas_from(0.5),
            "P(upper exit) against 1/2".into(),
        );
        // Laplace-transform points
        for theta in [0.5, 1.0, 2.0] {
            let transformed: Vec<f64> = times.iter().map(|t| (-theta * t).exp()).collect();
            let est = Estimate::from_samples(&transformed);
            let exact = 1.0 / (half * (2.0 * theta).sqrt()).cosh();
            report.verdict_sigma(
                &format!("laplace_{name}_theta_{theta}"),
                est.mean,
                est.sigmas_from(exact),
                format!("E[exp(-{theta} T)] against 1/cosh"),
            );
        }
    }
    report.artifacts.push(write_file(out, "exit_samples.csv", &csv)?);
    if config.dump_paths {
        let path = paths::sample_brownian::<f64>(seed_for(config, 1, 0), config.step, 1.0, 0.0)
            .map_err(|e| e.to_string())?;
        let mut pcsv = String::from("time,value\n");
        for (k, v) in path.values.iter().enumerate() {
            pcsv.push_str(&format!("{},{v}\n", k as f64 * path.step));
        }
        report.artifacts.push(write_file(out, "path.csv", &pcsv)?);
    }
    Ok(())
}

fn cle_point(config: &Config, out: &Path, report: &mut RunReport) -> R<()> {
    let n = config.n_replicas;
    let m = config.m;
    let records: Vec<cle::TargetRecord<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|k| {
            cle::sample_cle_point::<f64>(
                seed_for(config, 2, k),
                Complex::new(0.0, 0.0),
                m,
                Mode::Reduced,
                config.step,
            )
            .unwrap()
        })
        .collect();
    let mut csv = String::from("replica,m,label,log_crad_drop\n");
    for (k, r) in records.iter().enumerate() {
        csv.push_str(&format!("{k},{m},{},{}\n", r.label, r.log_crad_drop));
    }
    report.artifacts.push(write_file(out, "cle_samples.csv", &csv)?);

    let drops: Vec<f64> = records.iter().map(|r| r.log_crad_drop).collect();
    let oracle = ExitLawOracle::symmetric(m as f64 * PI).unwrap();
    let (d, p) = harness::ks_test(&drops, |t| oracle.cdf(t)).unwrap();
    report.verdict_p(
        "crad_exit_law_ks",
        d,
        p,
        0.01,
        format!("reduced mode vs series oracle, M={m}, N={n}"),
    );
    let est = Estimate::from_samples(&drops);
    report.verdict_sigma(
        "mean_log_crad_drop",
        est.mean,
        est.sigmas_from((m as f64 * PI).powi(2)),
        format!("against (M pi)^2 = {:.4}", (m as f64 * PI).powi(2)),
    );
    report.estimate("log_crad_drop", est);
    let plus = records.iter().filter(|r| r.label > 0.0).count();
    let prop = harness::proportion_estimate::<f64>(plus, n);
    report.verdict_sigma(
        "label_fair_coin",
        prop.mean,
        prop.sigmas_from(0.5),
        "P(label = +2 lambda M) against 1/2".into(),
    );

    // mode agreement at a smaller budget
    let n_geo = 500usize;
    let geo: Vec<f64> = (0..n_geo as u64)
        .into_par_iter()
        .map(|k| {
            cle::sample_cle_point::<f64>(
                seed_for(config, 3, k),
                Complex::new(0.0, 0.0),
                m,
                Mode::Geometric,
                config.step,
            )
            .unwrap()
            .log_crad_drop
        })
        .collect();
    let (d2, p2) = harness::ks_test_two_sample(&geo, &drops[..n_geo.min(drops.len())]).unwrap();
    report.verdict_p(
        "mode_agreement_ks",
        d2,
        p2,
        0.01,
        format!("geometric vs reduced, N={n_geo} per arm"),
    );
    if config.dump_paths {
        let driver = sle::radial_sle42::<f64>(
            seed_for(config, 3, 0),
            config.step,
            default_epsilon(config.step),
            HorizonRule::UntilBExits { m },
        )
        .map_err(|e| e.to_string())?;
        let mut dcsv = String::from("t,b,u,w\n");
        for k in 0..driver.w.len() {
            dcsv.push_str(&format!(
                "{},{},{},{}\n",
                k as f64 * config.step,
                driver.b.values[k],
                driver.u[k],
                driver.w[k]
            ));
        }
        report.artifacts.push(write_file(out, "driver.csv", &dcsv)?);
    }
    Ok(())
}

fn cle_decay(config: &Config, out: &Path, report: &mut RunReport) -> R<()> {
    let m = config.m;
    // tail-dominated grid: deeper as the rate shrinks with M^2
    let k_lo = 4 * m * m;
    let grid: Vec<f64> = (k_lo..=k_lo + 8).map(|k| 2f64.powi(-(k as i32))).collect();
    let est = cle::one_point_decay::<f64>(
        Seed(config.master_seed).split(4),
        m,
        &grid,
        config.n_replicas,
        config.step,
    )
    .map_err(|e| e.to_string())?;
    let mut csv = String::from("r,probability\n");
    for (r, p) in est.r_values.iter().zip(est.probabilities.iter()) {
        csv.push_str(&format!("{r},{p}\n"));
    }
    report.artifacts.push(write_file(out, "decay.csv", &csv)?);
    let expect = 1.0 / (8.0 * (m as f64).powi(2));
    let tol = if m == 1 { 0.02 } else { 0.01 };
    report.verdict_bool(
        "decay_exponent",
        est.fit.slope,
        (est.fit.slope - expect).abs() < tol,
        format!(
            "fitted {:.5} vs {expect:.5} (+-{tol}), stderr {:.5}, M={m}",
            est.fit.slope, est.fit.stderr
        ),
    );
    Ok(())
}

fn tvs_laws(config: &Config, out: &Path, report: &mut RunReport) -> R<()> {
    let spec = validated_spec(config)?;
    let n = config.n_replicas;
    let outcomes: Vec<tvs::ValueOutcome<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|k| tvs::sample_value(seed_for(config, 5, k), &spec, config.step).unwrap())
        .collect();
    let mut csv = String::from("replica,a,b,mode,label,log_crad_drop,truncated\n");
    for (k, o) in outcomes.iter().enumerate() {
        csv.push_str(&format!(
            "{k},{},{},reduced,{},{},false\n",
            spec.a(),
            spec.b(),
            o.label,
            o.log_crad_drop
        ));
    }
    report.artifacts.push(write_file(out, "tvs_samples.csv", &csv)?);

    let lower = outcomes.iter().filter(|o| o.label < 0.0).count();
    let prop = harness::proportion_estimate::<f64>(lower, n);
    let expect = spec.b() / (spec.a() + spec.b());
    report.verdict_sigma(
        "label_law",
        prop.mean,
        prop.sigmas_from(expect),
        format!("P(label = -a) against b/(a+b) = {expect:.4}"),
    );
    // zero-mean consistency of the estimated label distribution
    let labels: Vec<f64> = outcomes.iter().map(|o| o.label).collect();
    let lest = Estimate::from_samples(&labels);
    report.verdict_sigma(
        "zero_mean_labels",
        lest.mean,
        lest.sigmas_from(0.0),
        "mean label against 0".into(),
    );
    let drops: Vec<f64> = outcomes.iter().map(|o| o.log_crad_drop).collect();
    let (lo, hi) = spec.exit_interval();
    let oracle = ExitLawOracle::new(lo, hi, 0.0).unwrap();
    let (d, p) = harness::ks_test(&drops, |t| oracle.cdf(t)).unwrap();
    report.verdict_p("crad_exit_law_ks", d, p, 0.01, format!("N={n}"));
    report.estimate("log_crad_drop", Estimate::from_samples(&drops));

    // nested monotone coupling against the doubled spec
    let l = lambda::<f64>();
    let outer = tvs::validate::<f64>(spec.a() + l, spec.b() + l).map_err(|e| e.to_string())?;
    let coupled: Vec<(f64, f64, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let (i, o) =
                tvs::nested_sample(seed_for(config, 6, k), &spec, &outer, config.step).unwrap();
            (i.log_crad_drop, o.log_crad_drop, o.label)
        })
        .collect();
    let violations = coupled.iter().filter(|r| r.0 > r.1).count();
    report.verdict_bool(
        "nested_containment",
        violations as f64,
        violations == 0,
        format!("inner drop <= outer drop in {}/{n} replicas", n - violations),
    );
    let outer_lower = coupled.iter().filter(|r| r.2 < 0.0).count();
    let oprop = harness::proportion_estimate::<f64>(outer_lower, n);
    let oexpect = outer.b() / (outer.a() + outer.b());
    report.verdict_sigma(
        "nested_outer_marginal",
        oprop.mean,
        oprop.sigmas_from(oexpect),
        format!("coupled outer P(-a') against {oexpect:.4}"),
    );
    Ok(())
}

fn tvs_geometric(config: &Config, out: &Path, report: &mut RunReport) -> R<()> {
    let spec = validated_spec(config)?;
    let n = config.n_replicas.min(2000);
    let builds: Vec<tvs::GeometricBuild<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|k| {
            tvs::build_geometric(seed_for(config, 7, k), &spec, config.delta, config.step).unwrap()
        })
        .collect();
    let mut csv = String::from("replica,a,b,mode,label,log_crad_drop,truncated\n");
    for (k, bld) in builds.iter().enumerate() {
        match bld.outcome {
            Some(o) => csv.push_str(&format!(
                "{k},{},{},geometric,{},{},false\n",
                spec.a(),
                spec.b(),
                o.label,
                o.log_crad_drop
            )),
            None => csv.push_str(&format!(
                "{k},{},{},geometric,,,true\n",
                spec.a(),
                spec.b()
            )),
        }
    }
    report
        .artifacts
        .push(write_file(out, "tvs_geometric_samples.csv", &csv)?);

    let truncated = builds.iter().filter(|b| b.truncated).count();
    let frac = truncated as f64 / n as f64;
    report.verdict_bool(
        "truncation_fraction",
        frac,
        frac < 0.02,
        format!("{truncated}/{n} builds truncated at delta = {}", config.delta),
    );
    let geo: Vec<f64> = builds
        .iter()
        .filter_map(|b| b.outcome.map(|o| o.log_crad_drop))
        .collect();
    let red: Vec<f64> = (0..geo.len() as u64)
        .into_par_iter()
        .map(|k| {
            tvs::sample_value(seed_for(config, 8, k), &spec, config.step)
                .unwrap()
                .log_crad_drop
        })
        .collect();
    let (d, p) = harness::ks_test_two_sample(&geo, &red).unwrap();
    report.verdict_p(
        "geometric_reduced_ks",
        d,
        p,
        0.01,
        format!("two-sample, N={} per arm", geo.len()),
    );
    let lower = builds
        .iter()
        .filter_map(|b| b.outcome)
        .filter(|o| o.label < 0.0)
        .count();
    let prop = harness::proportion_estimate::<f64>(lower, geo.len());
    let expect = spec.b() / (spec.a() + spec.b());
    report.verdict_sigma(
        "geometric_label_law",
        prop.mean,
        prop.sigmas_from(expect),
        format!("geometric P(label = -a) against {expect:.4}"),
    );
    Ok(())
}

fn coupling_identities(config: &Config, out: &Path, report: &mut RunReport) -> R<()> {
    let step = config.step.min(1e-4);
    // Hadamard on a bounded random driver
    let mut rng = seed_for(config, 9, 0).rng();
    let mut wv = 0.0f64;
    let driving: Vec<Complex<f64>> = (0..3001)
        .map(|_| {
            use rand::Rng;
            wv += 2.0 * step.sqrt() * rng.gen_range(-1.0..1.0f64);
            Complex::new(wv.cos(), wv.sin())
        })
        .collect();
    let chain = loewner::evolve_radial(&driving, step).map_err(|e| e.to_string())?;
    let z = Complex::new(0.3, 0.2);
    let w = Complex::new(-0.4, 0.1);
    let mut worst: f64 = 0.0;
    for k in [1000usize, 1500, 2000] {
        let t = k as f64 * step;
        let g_at = |tt: f64, pt: Complex<f64>| -> Complex<f64> {
            match chain.map_point(pt, tt).unwrap() {
                PointState::Alive(q) => q,
                _ => panic!("probe point swallowed"),
            }
        };
        let green = |tt: f64| loewner::disc_green(g_at(tt, z), g_at(tt, w));
        let dgdt = (green(t + step) - green(t - step)) / (2.0 * step);
        let xi = chain.driving[k];
        let rhs = -2.0
            * PI
            * loewner::poisson_kernel(g_at(t, z), xi)
            * loewner::poisson_kernel(g_at(t, w), xi);
        worst = worst.max(((dgdt - rhs) / rhs).abs());
    }
    report.verdict_bool(
        "hadamard_finite_difference",
        worst,
        worst < 1e-2,
        format!("worst relative error {worst:.5} at step {step}"),
    );
    // driver dump for figures
    let mut csv = String::from("t,re_xi,im_xi\n");
    for (k, xi) in driving.iter().enumerate().step_by(10) {
        csv.push_str(&format!("{},{},{}\n", k as f64 * step, xi.re, xi.im));
    }
    report.artifacts.push(write_file(out, "driver_xi.csv", &csv)?);

    // cross-variation identities on an exploration driver
    let d = sle::radial_sle42::<f64>(
        seed_for(config, 10, 0),
        step,
        default_epsilon(step),
        HorizonRule::Fixed(0.4),
    )
    .map_err(|e| e.to_string())?;
    let chain2 = d.chain().map_err(|e| e.to_string())?;
    let bz = sle::retarget_time_change(&d, &chain2, z).map_err(|e| e.to_string())?;
    let bw = sle::retarget_time_change(&d, &chain2, w).map_err(|e| e.to_string())?;
    let cross: f64 = bz
        .windows(2)
        .zip(bw.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[1] - y[0]))
        .sum();
    let bracket =
        sle::poisson_bracket_integral(&chain2, z, w, bz.len() - 1).map_err(|e| e.to_string())?;
    let rel1 = ((cross - bracket) / bracket).abs();
    report.verdict_bool(
        "cross_variation_bracket",
        rel1,
        rel1 < 0.02,
        format!("<B^z,B^w> = {cross:.6} vs bracket {bracket:.6}"),
    );
    let t = (bz.len() - 1) as f64 * step;
    let gz = match chain2.map_point(z, t).unwrap() {
        PointState::Alive(p) => p,
        _ => return Err("probe z swallowed".into()),
    };
    let gw = match chain2.map_point(w, t).unwrap() {
        PointState::Alive(p) => p,
        _ => return Err("probe w swallowed".into()),
    };
    let dg = 2.0 * PI * (loewner::disc_green(z, w) - loewner::disc_green(gz, gw));
    let rel2 = ((cross - dg) / dg).abs();
    report.verdict_bool(
        "cross_variation_green",
        rel2,
        rel2 < 0.05,
        format!("against the Green decrement {dg:.6}"),
    );
    Ok(())
}

fn dgff_checks(config: &Config, out: &Path, report: &mut RunReport) -> R<()> {
    use localsets::dgff;
    let size = config.lattice;
    let domain = dgff::LatticeDomain::<f64>::square(size, 1.0).map_err(|e| e.to_string())?;
    let mid = size as i32 / 2;
    let span = (size as i32 / 3).max(1);
    let mut cross = Vec::new();
    for k in (mid - span / 2)..(mid + span / 2) {
        cross.push((k, mid));
        cross.push((mid, k));
    }
    cross.dedup();
    let verdict = dgff::local_set_decomposition_check(
        seed_for(config, 11, 0),
        &domain,
        &cross,
        config.n_replicas.min(10_000),
    )
    .map_err(|e| e.to_string())?;
    report.verdict_bool(
        "local_set_decomposition_identity",
        verdict.max_identity_error,
        verdict.max_identity_error < 1e-10,
        format!("max |G - G_sub - H| on {size}x{size} with a cross-shaped set"),
    );
    report.verdict_bool(
        "local_set_conditional_covariance",
        verdict.max_covariance_sigmas,
        verdict.max_covariance_sigmas < 4.0,
        "worst probed-pair deviation in sigmas".into(),
    );

    let small = dgff::LatticeDomain::<f64>::square(8, 1.0).map_err(|e| e.to_string())?;
    let green = dgff::green_operator(&small).map_err(|e| e.to_string())?;
    let nsm = small.n_interior();
    let mut shift: Vec<f64> = (0..nsm)
        .map(|k| {
            let (i, j) = small.interior()[k];
            (PI * (i as f64 + 0.5) / 8.0).sin() * (PI * (j as f64 + 0.5) / 8.0).sin()
        })
        .collect();
    let e = green.dirichlet_pairing(&shift, &shift);
    let scale = (0.5 / e).sqrt();
    shift.iter_mut().for_each(|x| *x *= scale);
    let phi: Vec<f64> = (0..nsm).map(|k| ((k % 5) as f64 - 2.0) / 5.0).collect();
    let cm = dgff::cameron_martin_check(
        seed_for(config, 12, 0),
        &small,
        &shift,
        &phi,
        config.n_replicas.min(10_000),
    )
    .map_err(|e| e.to_string())?;
    report.verdict_bool(
        "cameron_martin_three_way",
        cm.reweighted - cm.analytic,
        cm.pass,
        format!(
            "direct {:.4}, reweighted {:.4}, analytic {:.4}, ESS {:.0}",
            cm.direct, cm.reweighted, cm.analytic, cm.effective_sample_size
        ),
    );

    // one field dump
    let field = green.sample(seed_for(config, 13, 0));
    let mut csv = String::from("i,j,value\n");
    for (k, &(i, j)) in small.interior().iter().enumerate() {
        csv.push_str(&format!("{i},{j},{}\n", field.values[k]));
    }
    report.artifacts.push(write_file(out, "field.csv", &csv)?);
    Ok(())
}

fn carpet(config: &Config, out: &Path, report: &mut RunReport) -> R<()> {
    let raster = cle::carpet_raster::<f64>(
        seed_for(config, 14, 0),
        config.m,
        config.resolution,
        9,
        config.step,
    )
    .map_err(|e| e.to_string())?;
    let frac = raster.in_hull_fraction();
    report.verdict_bool(
        "carpet_nondegenerate",
        frac,
        frac > 0.0 && frac < 1.0,
        format!("in-hull fraction at resolution {}", config.resolution),
    );
    report.artifacts.push(write_file(out, "carpet.pgm", &raster.to_pgm())?);
    let mut csv = String::from("cell,in_hull,alive,crad\n");
    for k in 0..raster.in_hull.len() {
        csv.push_str(&format!(
            "{k},{},{},{}\n",
            raster.in_hull[k] as u8, raster.alive[k] as u8, raster.crad[k]
        ));
    }
    report.artifacts.push(write_file(out, "carpet.csv", &csv)?);
    let mut bcsv = String::from("target_x,target_y,shared_steps\n");
    for b in &raster.branches {
        bcsv.push_str(&format!("{},{},{}\n", b.target.0, b.target.1, b.shared_steps));
    }
    report.artifacts.push(write_file(out, "branches.csv", &bcsv)?);
    Ok(())
}

pub fn emit_figure_data(args: &FigureArgs) -> R<PathBuf> {
    let dir = args
        .report
        .parent()
        .ok_or_else(|| "report has no parent directory".to_string())?;
    let text = std::fs::read_to_string(&args.report).map_err(|e| e.to_string())?;
    let report: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let artifacts: Vec<String> = report["artifacts"]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
        .unwrap_or_default();
    let find = |name: &str| -> R<PathBuf> {
        if artifacts.iter().any(|a| a == name) {
            Ok(dir.join(name))
        } else {
            Err(format!("artifact {name} not found in report"))
        }
    };
    match args.kind {
        FigureKind::LoglogDecay => {
            let src = find("decay.csv")?;
            let data = std::fs::read_to_string(src).map_err(|e| e.to_string())?;
            let mut outtxt = String::from("# log_r log_p\n");
            for line in data.lines().skip(1) {
                let mut parts = line.split(',');
                let r: f64 = parts.next().unwrap_or("0").parse().unwrap_or(0.0);
                let p: f64 = parts.next().unwrap_or("0").parse().unwrap_or(0.0);
                if r > 0.0 && p > 0.0 {
                    outtxt.push_str(&format!("{} {}\n", r.ln(), p.ln()));
                }
            }
            let path = args
                .out
                .clone()
                .unwrap_or_else(|| dir.join("loglog_decay.dat"));
            std::fs::write(&path, outtxt).map_err(|e| e.to_string())?;
            Ok(path)
        }
        FigureKind::CarpetRaster => {
            let src = find("carpet.pgm")?;
            let path = args.out.clone().unwrap_or_else(|| dir.join("carpet_figure.pgm"));
            std::fs::copy(&src, &path).map_err(|e| e.to_string())?;
            Ok(path)
        }
        FigureKind::ExitHistogram => {
            let src = find("exit_samples.csv")?;
            let data = std::fs::read_to_string(src).map_err(|e| e.to_string())?;
            let times: Vec<f64> = data
                .lines()
                .skip(1)
                .filter_map(|l| l.split(',').nth(2).and_then(|s| s.parse().ok()))
                .collect();
            if times.is_empty() {
                return Err("no exit samples".into());
            }
            let max = times.iter().cloned().fold(0.0f64, f64::max);
            let bins = 50usize;
            let mut counts = vec![0usize; bins];
            for &t in &times {
                let b = ((t / max * bins as f64) as usize).min(bins - 1);
                counts[b] += 1;
            }
            let mut outtxt = String::from("# bin_center count\n");
            for (b, c) in counts.iter().enumerate() {
                outtxt.push_str(&format!("{} {c}\n", (b as f64 + 0.5) * max / bins as f64));
            }
            let path = args
                .out
                .clone()
                .unwrap_or_else(|| dir.join("exit_histogram.dat"));
            std::fs::write(&path, outtxt).map_err(|e| e.to_string())?;
            Ok(path)
        }
    }
}
