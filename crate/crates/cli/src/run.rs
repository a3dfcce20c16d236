//! Executes a [`ScenarioConfig`] and writes its artifacts.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use multilink_core::analysis::{
    classify_fixed_point, enumerate_fixed_points, follow_manifold, manifold_linearization, random_params,
    run_speedup_observed, Classification, EnvelopeTracker, FixedPoint, SpeedupReport, SpeedupSettings, StabilityKind,
};
use multilink_core::dynamics::{
    attachment_positions, constraint_residuals, energy, max_abs, simulate, FullSystem, ManifoldSign, ManifoldSystem,
    PoseState, ReducedState, Trajectory,
};
use multilink_core::integrator::{integrate, IntegratorOptions};
use multilink_core::model::{RotorProfile, Vehicle};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{Format, RandomSuite, Scenario, ScenarioConfig};
use crate::csv::TrajectoryTable;
use crate::svg::{Marker, Plot, Series};

/// What a run produced.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub artifacts: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub report: String,
}

struct Sink<'a> {
    dir: &'a Path,
    cfg: &'a ScenarioConfig,
    out: RunOutput,
}

impl Sink<'_> {
    fn write(&mut self, format: Format, name: &str, contents: &str) -> Result<()> {
        if !self.cfg.outputs.wants(format) {
            return Ok(());
        }
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.out.artifacts.push(path);
        Ok(())
    }

    fn warn(&mut self, msg: impl Into<String>) {
        self.out.warnings.push(msg.into());
    }
}

/// Runs the scenario; `dir_override` replaces `outputs.directory`.
pub fn run_scenario(cfg: &ScenarioConfig, dir_override: Option<&Path>) -> Result<RunOutput> {
    let dir = dir_override.unwrap_or(&cfg.outputs.directory);
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let vehicle = Vehicle::new(cfg.vehicle.clone())?;
    let mut sink = Sink { dir, cfg, out: RunOutput::default() };
    let report = match &cfg.scenario {
        Scenario::Inertial => inertial(&vehicle, &mut sink)?,
        Scenario::Manifold { sign, portrait_grid } => manifold(&vehicle, *sign, *portrait_grid, &mut sink)?,
        Scenario::Speedup { window, samples_per_period } => speedup(&vehicle, *window, *samples_per_period, &mut sink)?,
        Scenario::FixedPoints { suite } => fixed_points(&vehicle, *suite, cfg.seed, &mut sink)?,
    };
    sink.write(Format::Report, "report.txt", &report.text)?;
    let json = serde_json::to_string_pretty(&report.json)?;
    sink.write(Format::Report, "report.json", &(json + "\n"))?;
    sink.out.report = report.text;
    Ok(sink.out)
}

struct Report {
    text: String,
    json: serde_json::Value,
}

fn header_lines(vehicle: &Vehicle, cfg: &ScenarioConfig) -> String {
    let d = &vehicle.derived;
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", cfg.scenario.name());
    let _ = writeln!(s, "trailer platforms N = {}", vehicle.links());
    let _ = writeln!(
        s,
        "J = {:.6}  m = {:.6}  b = {:.6}  mu = {:?}",
        d.inertia, d.total_mass, d.static_moment, d.mu
    );
    s
}

fn row(vehicle: &Vehicle, rotor: &RotorProfile, t: f64, s: &ReducedState, p: &PoseState) -> Result<Vec<f64>> {
    let mut r = Vec::with_capacity(s.links() + 9);
    r.extend([t, s.v1, s.omega]);
    r.extend(&s.phi);
    r.extend([p.x, p.y, p.psi]);
    r.push(energy(vehicle, s)?);
    r.push(max_abs(&constraint_residuals(vehicle, p, s)));
    r.push(rotor.momentum(t).0);
    Ok(r)
}

fn table_from(traj: &Trajectory) -> TrajectoryTable {
    let mut table = TrajectoryTable::new(traj.links());
    for i in 0..traj.len() {
        let (s, p) = (&traj.states[i], &traj.poses[i]);
        let mut r = vec![traj.times[i], s.v1, s.omega];
        r.extend(&s.phi);
        r.extend([p.x, p.y, p.psi, traj.energy[i], traj.residual_max[i], traj.rotor_momentum[i]]);
        table.rows.push(r);
    }
    table
}

fn series_of(table: &TrajectoryTable, col: &str) -> Vec<(f64, f64)> {
    let t = table.column("t").unwrap_or_default();
    let v = table.column(col).unwrap_or_default();
    t.into_iter().zip(v).collect()
}

fn attachment_plot(vehicle: &Vehicle, table: &TrajectoryTable) -> Plot {
    let n = table.links;
    let mut paths = vec![Vec::with_capacity(table.rows.len()); n + 1];
    for r in &table.rows {
        let pose = PoseState { x: r[3 + n], y: r[4 + n], psi: r[5 + n] };
        for (k, pt) in attachment_positions(&pose, &r[3..3 + n], &vehicle.params).into_iter().enumerate() {
            paths[k].push((pt[0], pt[1]));
        }
    }
    Plot {
        title: "Wheel-pair paths".into(),
        x_label: "x".into(),
        y_label: "y".into(),
        series: paths
            .into_iter()
            .enumerate()
            .map(|(k, p)| Series::line(if k == 0 { "C (sleigh)".to_string() } else { format!("C{k}") }, p))
            .collect(),
        equal_aspect: true,
        ..Plot::default()
    }
}

fn write_trajectory_artifacts(vehicle: &Vehicle, table: &TrajectoryTable, sink: &mut Sink) -> Result<()> {
    sink.write(Format::Csv, "trajectory.csv", &table.to_csv())?;
    if !sink.cfg.outputs.wants(Format::Svg) {
        return Ok(());
    }
    let velocities = Plot {
        title: "Velocities".into(),
        x_label: "t".into(),
        y_label: "v1, omega".into(),
        series: vec![Series::line("v1", series_of(table, "v1")), Series::line("omega", series_of(table, "omega"))],
        ..Plot::default()
    };
    sink.write(Format::Svg, "velocities.svg", &velocities.render())?;
    let hinges = Plot {
        title: "Hinge angles".into(),
        x_label: "t".into(),
        y_label: "phi_i".into(),
        series: (1..=table.links)
            .map(|i| Series::line(format!("phi_{i}"), series_of(table, &format!("phi_{i}"))))
            .collect(),
        ..Plot::default()
    };
    sink.write(Format::Svg, "hinge_angles.svg", &hinges.render())?;
    sink.write(Format::Svg, "attachment_paths.svg", &attachment_plot(vehicle, table).render())
}

fn trajectory_summary(table: &TrajectoryTable, rotor_at_rest: bool) -> (String, serde_json::Value) {
    let e = table.column("energy").unwrap_or_default();
    let res = table.column("residual_max").unwrap_or_default();
    let e0 = e.first().copied().unwrap_or(0.0);
    let drift = e.iter().map(|x| ((x - e0) / e0).abs()).fold(0.0, f64::max);
    let worst = res.iter().copied().fold(0.0, f64::max);
    let last = table.rows.last().cloned().unwrap_or_default();
    let mut s = String::new();
    let _ = writeln!(s, "samples: {}", table.rows.len());
    if rotor_at_rest {
        let _ = writeln!(s, "energy E(0) = {e0:.12}, max relative drift = {drift:.3e}");
    }
    let _ = writeln!(s, "max constraint residual = {worst:.3e}");
    let _ = writeln!(s, "final sample: {}", fmt_row(&last));
    let j = json!({
        "samples": table.rows.len(),
        "energy_initial": e0,
        "energy_max_relative_drift": drift,
        "residual_max": worst,
        "final": last,
    });
    (s, j)
}

fn fmt_row(r: &[f64]) -> String {
    r.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>().join(" ")
}

fn inertial(vehicle: &Vehicle, sink: &mut Sink) -> Result<Report> {
    let cfg = sink.cfg;
    let traj = simulate(vehicle, cfg.rotor, &cfg.initial, &cfg.pose, &cfg.integrator).context("integration failed")?;
    let table = table_from(&traj);
    write_trajectory_artifacts(vehicle, &table, sink)?;
    let (summary, json) = trajectory_summary(&table, cfg.rotor.is_constant());
    Ok(Report {
        text: header_lines(vehicle, cfg) + &summary,
        json: json!({ "scenario": "inertial", "trajectory": json }),
    })
}

/// Splits a path on the torus wherever a coordinate wraps.
fn torus_segments(path: &[Vec<f64>]) -> Vec<Vec<(f64, f64)>> {
    let mut segs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
    let mut prev: Option<(f64, f64)> = None;
    for p in path {
        let q = (p[0].rem_euclid(TAU), p[1].rem_euclid(TAU));
        if let Some(pr) = prev {
            if (q.0 - pr.0).abs() > std::f64::consts::PI || (q.1 - pr.1).abs() > std::f64::consts::PI {
                segs.push(Vec::new());
            }
        }
        segs.last_mut().expect("never empty").push(q);
        prev = Some(q);
    }
    segs.retain(|s| s.len() > 1);
    segs
}

fn manifold_kind(a: &nalgebra::DMatrix<f64>) -> StabilityKind {
    let d: Vec<f64> = a.diagonal().iter().copied().collect();
    if d.iter().all(|&e| e < 0.0) {
        StabilityKind::StableNode
    } else if d.iter().all(|&e| e > 0.0) {
        StabilityKind::UnstableNode
    } else {
        StabilityKind::Saddle
    }
}

fn manifold(vehicle: &Vehicle, sign: ManifoldSign, grid: usize, sink: &mut Sink) -> Result<Report> {
    let cfg = sink.cfg;
    let n = vehicle.links();
    let traj = simulate(vehicle, RotorProfile::at_rest(), &cfg.initial, &cfg.pose, &cfg.integrator)
        .context("integration failed")?;
    let table = table_from(&traj);
    write_trajectory_artifacts(vehicle, &table, sink)?;

    let sigma0 = if sign == ManifoldSign::Plus { 1 } else { -1 };
    let family: Vec<(FixedPoint, StabilityKind)> = enumerate_fixed_points(n)
        .into_iter()
        .filter(|fp| fp.sigma0 == sigma0)
        .map(|fp| {
            let kind = manifold_kind(&manifold_linearization(&fp, vehicle));
            (fp, kind)
        })
        .collect();
    let tau_end = cfg.integrator.t_end;
    let main = follow_manifold(&vehicle.params, sign, &cfg.initial.phi, tau_end, 0.05, 1e-6)?;

    let mut text = header_lines(vehicle, cfg);
    let _ = writeln!(text, "manifold: {}", if sigma0 > 0 { "M+ (vartheta = 0)" } else { "M- (vartheta = pi)" });
    let _ = writeln!(text, "equilibria on the manifold (hinge-angle flow):");
    for (fp, kind) in &family {
        let _ = writeln!(text, "  {:<14} {kind}", fp.label());
    }
    let _ = writeln!(text, "trajectory from phi = {:?} over tau in [0, {tau_end}]:", cfg.initial.phi);
    for (label, dist) in &main.visits {
        let _ = writeln!(text, "  comes within {dist:.3e} of {label}");
    }
    match main.converged_at {
        Some(tau) => {
            let _ = writeln!(text, "  within 1e-6 of phi = 0 from tau = {tau:.3}");
        }
        None => {
            let _ = writeln!(text, "  does not reach phi = 0 within 1e-6");
        }
    }
    let (summary, traj_json) = trajectory_summary(&table, true);
    text.push_str(&summary);

    if n == 2 {
        let system = ManifoldSystem { params: &vehicle.params, sign };
        let opts = IntegratorOptions::adaptive(tau_end, 1e-9, 1e-11).with_interval(0.02);
        let mut series = Vec::new();
        for i in 0..grid {
            for k in 0..grid {
                let start = [TAU * (i as f64 + 0.5) / grid as f64, TAU * (k as f64 + 0.5) / grid as f64];
                let sol = integrate(&system, &start, &opts)?;
                series.extend(torus_segments(&sol.states).into_iter().map(|seg| Series::line("", seg)));
            }
        }
        series.extend(
            torus_segments(&main.path)
                .into_iter()
                .enumerate()
                .map(|(k, seg)| Series::line(if k == 0 { "from initial phi" } else { "" }, seg)),
        );
        let markers = family
            .iter()
            .map(|(fp, kind)| Marker {
                at: (fp.phi[0], fp.phi[1]),
                label: format!("{} {kind}", fp.label()),
                filled: *kind == StabilityKind::StableNode,
            })
            .collect();
        let portrait = Plot {
            title: format!("Hinge-angle flow on M{}", if sigma0 > 0 { "+" } else { "-" }),
            x_label: "phi_1".into(),
            y_label: "phi_2".into(),
            series,
            markers,
            x_range: Some((-0.2, TAU + 0.2)),
            y_range: Some((-0.2, TAU + 0.2)),
            equal_aspect: true,
        };
        sink.write(Format::Svg, "phase_portrait.svg", &portrait.render())?;
    } else {
        sink.warn(format!("phase portrait needs N = 2 trailer platforms (have {n}); skipped"));
    }

    let json = json!({
        "scenario": "manifold",
        "sign": if sigma0 > 0 { "plus" } else { "minus" },
        "equilibria": family.iter().map(|(fp, kind)| json!({"label": fp.label(), "phi": fp.phi, "kind": kind.to_string()})).collect::<Vec<_>>(),
        "visits": main.visits.iter().map(|(l, d)| json!({"label": l, "distance": d})).collect::<Vec<_>>(),
        "converged_at": main.converged_at,
        "trajectory": traj_json,
    });
    Ok(Report { text, json })
}

fn speedup(vehicle: &Vehicle, window: (f64, f64), samples_per_period: usize, sink: &mut Sink) -> Result<Report> {
    let cfg = sink.cfg;
    let rotor = cfg.rotor;
    let period = rotor.period().context("speedup needs a periodic rotor")?;
    let settings = SpeedupSettings {
        t_end: cfg.integrator.t_end,
        window,
        rtol: cfg.integrator.rtol,
        atol: cfg.integrator.atol,
        samples_per_period,
    };
    let dense = period / samples_per_period as f64;
    let interval = cfg.integrator.sample_interval.unwrap_or(10.0 * period);
    let stride = ((interval / dense).round() as usize).max(1);
    let n = vehicle.links();
    let mut table = TrajectoryTable::new(n);
    let mut omega_env = EnvelopeTracker::new(period);
    let mut phi_env: Vec<EnvelopeTracker> = (0..n).map(|_| EnvelopeTracker::new(period)).collect();
    let mut count = 0usize;
    let mut row_err = None;
    let mut last = None;
    let report = run_speedup_observed(vehicle, &rotor, &cfg.initial, &cfg.pose, &settings, |t, y| {
        let (s, p) = FullSystem::unpack(y);
        if count.is_multiple_of(stride) {
            match row(vehicle, &rotor, t, &s, &p) {
                Ok(r) => table.rows.push(r),
                Err(e) => row_err = Some(e),
            }
            last = None;
        } else {
            last = Some((t, s.clone(), p));
        }
        if t >= period {
            omega_env.push(t, s.omega);
            for (tr, phi) in phi_env.iter_mut().zip(&s.phi) {
                tr.push(t, *phi);
            }
        }
        count += 1;
    })
    .context("speedup integration failed")?;
    if let Some(e) = row_err {
        return Err(e);
    }
    if let Some((t, s, p)) = last {
        table.rows.push(row(vehicle, &rotor, t, &s, &p)?);
    }
    sink.write(Format::Csv, "trajectory.csv", &table.to_csv())?;

    let pred = &report.prediction;
    if cfg.outputs.wants(Format::Svg) {
        let scaled = |pts: Vec<(f64, f64)>, e: f64| -> Vec<(f64, f64)> {
            pts.into_iter().filter(|(t, _)| *t > 0.0).map(|(t, v)| (t, v.abs() * t.powf(-e))).collect()
        };
        let t_end = report.final_time;
        let flat = |c: f64| vec![(period, c), (t_end, c)];
        let v1_plot = Plot {
            title: "Speedup: v1 t^(-1/3)".into(),
            x_label: "t".into(),
            y_label: "v1 t^(-1/3)".into(),
            series: vec![
                Series::line("simulation", scaled(series_of(&table, "v1"), 1.0 / 3.0)),
                Series::dashed("Delta^(1/3)", flat(pred.v1_coeff)),
            ],
            ..Plot::default()
        };
        sink.write(Format::Svg, "speedup_v1.svg", &v1_plot.render())?;
        let (ot, ov) = omega_env.finish();
        let omega_plot = Plot {
            title: "Speedup: per-period max |omega| t^(1/3)".into(),
            x_label: "t".into(),
            y_label: "max|omega| t^(1/3)".into(),
            series: vec![
                Series::line("simulation", scaled(ot.into_iter().zip(ov).collect(), -1.0 / 3.0)),
                Series::dashed("predicted envelope", flat(pred.omega_env)),
            ],
            ..Plot::default()
        };
        sink.write(Format::Svg, "speedup_omega.svg", &omega_plot.render())?;
        let mut series = Vec::new();
        for (i, tr) in phi_env.into_iter().enumerate() {
            let (t, v) = tr.finish();
            series.push(Series::line(format!("phi_{}", i + 1), scaled(t.into_iter().zip(v).collect(), -2.0 / 3.0)));
            series.push(Series::dashed(format!("predicted phi_{}", i + 1), flat(pred.phi_env[i])));
        }
        let phi_plot = Plot {
            title: "Speedup: per-period max |phi_i| t^(2/3)".into(),
            x_label: "t".into(),
            y_label: "max|phi_i| t^(2/3)".into(),
            series,
            ..Plot::default()
        };
        sink.write(Format::Svg, "speedup_hinges.svg", &phi_plot.render())?;
        sink.write(Format::Svg, "attachment_paths.svg", &attachment_plot(vehicle, &table).render())?;
    }

    let text = header_lines(vehicle, cfg) + &speedup_text(&report, window, &rotor);
    let json = json!({
        "scenario": "speedup",
        "window": [window.0, window.1],
        "delta": pred.delta,
        "predicted": {
            "v1_coeff": pred.v1_coeff, "omega_env": pred.omega_env,
            "theta_env": pred.theta_env, "phi_env": pred.phi_env,
        },
        "fitted": {
            "v1_exponent": report.v1_fit.exponent, "v1_prefactor_free": report.v1_fit.prefactor,
            "v1_prefactor": report.v1_prefactor, "v1_r_squared": report.v1_fit.r_squared,
            "omega_exponent": report.omega_fit.exponent, "omega_prefactor": report.omega_prefactor,
            "phi_exponents": report.phi_fits.iter().map(|f| f.exponent).collect::<Vec<_>>(),
            "phi_prefactors": report.phi_prefactors,
            "theta_exponents": report.theta_fits.iter().map(|f| f.exponent).collect::<Vec<_>>(),
            "omega_tracking_error": report.omega_tracking_error,
            "theta_correlations": report.theta_correlations,
        },
        "final": { "t": report.final_time, "v1": report.final_state.v1, "omega": report.final_state.omega, "phi": report.final_state.phi },
    });
    Ok(Report { text, json })
}

fn speedup_text(r: &SpeedupReport, window: (f64, f64), rotor: &RotorProfile) -> String {
    let p = &r.prediction;
    let mut s = String::new();
    let _ = writeln!(s, "<kdot^2> = {:.6e}  max|kdot| = {:.6e}", rotor.mean_square_rate(), rotor.max_abs_rate());
    let _ = writeln!(s, "Delta = {:.6e}  Delta^(1/3) = {:.6}", p.delta, p.v1_coeff);
    let _ = writeln!(s, "fit window [{:e}, {:e}]", window.0, window.1);
    let _ = writeln!(s, "{:<18}{:>12}{:>12}{:>14}{:>14}", "quantity", "exponent", "predicted", "coefficient", "predicted");
    let mut line = |name: &str, e: f64, pe: f64, c: Option<f64>, pc: f64| {
        let c = c.map_or("-".to_string(), |c| format!("{c:.5}"));
        let _ = writeln!(s, "{name:<18}{e:>12.4}{pe:>12.4}{c:>14}{pc:>14.5}");
    };
    line("v1", r.v1_fit.exponent, 1.0 / 3.0, Some(r.v1_prefactor), p.v1_coeff);
    line("omega envelope", r.omega_fit.exponent, -1.0 / 3.0, Some(r.omega_prefactor), p.omega_env);
    for (i, f) in r.phi_fits.iter().enumerate() {
        line(&format!("phi_{} envelope", i + 1), f.exponent, -2.0 / 3.0, Some(r.phi_prefactors[i]), p.phi_env[i]);
    }
    for (i, f) in r.theta_fits.iter().enumerate() {
        line(&format!("theta_{} envelope", i + 1), f.exponent, -2.0 / 3.0, None, p.theta_env[i]);
    }
    let _ = writeln!(s, "coefficients use the predicted exponent; v1 free-fit prefactor {:.5} (r^2 {:.4})", r.v1_fit.prefactor, r.v1_fit.r_squared);
    let _ = writeln!(s, "omega tracking error (last decade) = {:.4}", r.omega_tracking_error);
    let _ = writeln!(s, "corr(theta_i, (-1)^(i+1) kdot) = {:?}", r.theta_correlations);
    let _ = writeln!(
        s,
        "final t = {}  v1 = {:.6}  v1 / (Delta t)^(1/3) = {:.4}",
        r.final_time,
        r.final_state.v1,
        r.final_state.v1 / (p.delta * r.final_time).cbrt()
    );
    s
}

/// Checks the classification pattern on random draws for every `N` up to
/// `max_links`; one thread per `N`.
fn random_suite(suite: RandomSuite, seed: u64) -> Result<Vec<(usize, usize)>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = (1..=suite.max_links)
            .map(|n| {
                scope.spawn(move || -> Result<(usize, usize)> {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                    let mut ok = 0;
                    for _ in 0..suite.draws {
                        let v = Vehicle::new(random_params(n, &mut rng))?;
                        let kinds = enumerate_fixed_points(n)
                            .iter()
                            .map(|fp| classify_fixed_point(fp, &v).map(|c| (fp.clone(), c.kind)))
                            .collect::<multilink_core::Result<Vec<_>>>()?;
                        let pattern = kinds.iter().all(|(fp, k)| {
                            *k == match (fp.sigma0, fp.is_straight()) {
                                (1, true) => StabilityKind::StableNode,
                                (-1, true) => StabilityKind::UnstableNode,
                                _ => StabilityKind::Saddle,
                            }
                        });
                        ok += usize::from(pattern);
                    }
                    Ok((n, ok))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("suite worker panicked")).collect()
    })
}

pub fn classification_table(vehicle: &Vehicle) -> Result<Vec<(FixedPoint, Classification)>> {
    enumerate_fixed_points(vehicle.links())
        .into_iter()
        .map(|fp| {
            let c = classify_fixed_point(&fp, vehicle)?;
            Ok((fp, c))
        })
        .collect()
}

fn fixed_points(vehicle: &Vehicle, suite: Option<RandomSuite>, seed: u64, sink: &mut Sink) -> Result<Report> {
    let n = vehicle.links();
    let table = classification_table(vehicle)?;
    let mut text = header_lines(vehicle, sink.cfg);
    let _ = writeln!(text, "{} equilibria:", table.len());
    let _ = writeln!(text, "{:<16}{:<14}eigenvalues", "point", "kind");
    let mut csv = String::from("label,vartheta");
    for i in 1..=n {
        let _ = write!(csv, ",phi_{i}");
    }
    csv.push_str(",kind");
    for i in 0..=n {
        let _ = write!(csv, ",lambda_{i}");
    }
    csv.push('\n');
    for (fp, c) in &table {
        let eig: Vec<String> = c.eigenvalues.iter().map(|e| format!("{e:.6}")).collect();
        let _ = writeln!(text, "{:<16}{:<14}{}", fp.label(), c.kind.to_string(), eig.join(" "));
        let _ = write!(csv, "{},{:.16e}", fp.label(), fp.vartheta);
        for p in &fp.phi {
            let _ = write!(csv, ",{p:.16e}");
        }
        let _ = write!(csv, ",{}", c.kind);
        for e in &c.eigenvalues {
            let _ = write!(csv, ",{e:.16e}");
        }
        csv.push('\n');
    }
    let count = |k: StabilityKind| table.iter().filter(|(_, c)| c.kind == k).count();
    let (sn, un, sa) = (count(StabilityKind::StableNode), count(StabilityKind::UnstableNode), count(StabilityKind::Saddle));
    let _ = writeln!(text, "StableNode: {sn}  UnstableNode: {un}  Saddle: {sa}");
    sink.write(Format::Csv, "fixed_points.csv", &csv)?;

    let mut suite_json = serde_json::Value::Null;
    if let Some(s) = suite {
        let results = random_suite(s, seed)?;
        let _ = writeln!(text, "random parameter suite (seed {seed}, {} draws per N):", s.draws);
        for (n, ok) in &results {
            let _ = writeln!(text, "  N = {n}: {ok}/{} draws with the expected node/saddle pattern", s.draws);
        }
        suite_json = json!({
            "seed": seed,
            "draws": s.draws,
            "passing": results.iter().map(|(n, ok)| json!({"links": n, "passing": ok})).collect::<Vec<_>>(),
        });
    }
    let json = json!({
        "scenario": "fixed_points",
        "points": table.iter().map(|(fp, c)| json!({
            "label": fp.label(), "vartheta": fp.vartheta, "phi": fp.phi,
            "kind": c.kind.to_string(), "eigenvalues": c.eigenvalues,
        })).collect::<Vec<_>>(),
        "counts": {"stable_node": sn, "unstable_node": un, "saddle": sa},
        "random_suite": suite_json,
    });
    Ok(Report { text, json })
}
