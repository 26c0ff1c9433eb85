use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use dwlab_core::grid::Spectral;
use dwlab_core::linear::{decay_fit, expected_exponent, linear_trajectory, log_times, LinearPropagator};
use dwlab_core::modulus::{classify_dini, condition_report, DiniSettings, DiniVerdict, ModulusSpec};
use dwlab_core::semilinear::{evolve, Forcing};
use dwlab_core::testfunction::{blowup_certificate, functional_y, CutoffProfile};
use dwlab_core::trajectory::SeriesName;
use dwlab_core::{Dim, NormRecord, Nonlinearity, Outcome, Trajectory, WaveState};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{ForcingSpec, Horizon, LoadedConfig, RunConfig};
use crate::manifest::{Manifest, Report};
use crate::{Cli, CliError};

pub struct Context {
    pub loaded: LoadedConfig,
    pub out: PathBuf,
    pub workers: usize,
}

impl Context {
    pub fn new(cli: &Cli, workers: usize) -> Result<Self, CliError> {
        let mut loaded = LoadedConfig::from_path(cli.config.as_deref())?;
        if let Some(seed) = cli.seed {
            loaded.config.seed = seed;
        }
        Ok(Self {
            loaded,
            out: cli.out.clone(),
            workers,
        })
    }

    fn config(&self) -> &RunConfig {
        &self.loaded.config
    }

    /// `<out>/<command>-<first 12 hex digits of the config hash>`.
    fn run_dir(&self, command: &str, key: &str) -> Result<PathBuf, CliError> {
        let dir = self.out.join(format!("{command}-{}", &key[..12]));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn finish(&self, dir: &Path, command: &str, config: &RunConfig, mut report: Report, start: Instant) -> Result<(), CliError> {
        report.wall_time_s = start.elapsed().as_secs_f64();
        Manifest::new(command, config, self.workers, report).write(dir)?;
        println!("output: {}", dir.display());
        Ok(())
    }
}

fn write_file(dir: &Path, name: &str, text: &str, report: &mut Report) -> Result<(), CliError> {
    std::fs::write(dir.join(name), text)?;
    report.files.push(name.to_string());
    Ok(())
}

fn write_trajectory(dir: &Path, name: &str, traj: &Trajectory, report: &mut Report) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    traj.write_csv(&mut w)?;
    w.flush()?;
    report.files.push(name.to_string());
    Ok(())
}

fn fmt_f(v: f64) -> String {
    format!("{v:e}")
}

pub fn classify(ctx: &Context, spec: &str, dim: usize) -> Result<(), CliError> {
    let start = Instant::now();
    let parsed: ModulusSpec = spec.parse()?;
    let dim = Dim::from_usize(dim)?;
    let base = std::env::current_dir().ok();
    let modulus = parsed.build_in(base.as_deref())?;
    let nl = Nonlinearity::new(modulus, dim);
    let rep = condition_report(&nl, &DiniSettings::default())?;
    let dini = &rep.dini;
    let [r1, r2] = rep.max_ratio();

    println!("modulus: {}", nl.modulus());
    println!("slow variation: max s|mu'|/mu = {r1:.6e}, max s^2|mu''|/mu = {r2:.6e}");
    println!(
        "dini: {} (level {}, exponent {:.4}, drift {:.2e})",
        dini.verdict,
        dini.level.map_or("-".to_string(), |l| l.to_string()),
        dini.exponent,
        dini.drift
    );
    let oracle = dini.analytic_label.map_or("none".to_string(), |l| l.to_string());
    println!("oracle: {oracle}");
    println!("convexity min: {:.6e}", rep.convexity_min());

    let key = hex::encode(Sha256::digest(format!("{}|{}", parsed, dim).as_bytes()));
    let dir = ctx.run_dir("classify", &key)?;
    let mut report = Report {
        status: "ok".into(),
        ..Report::default()
    };
    report.set("slow_variation_1", r1);
    report.set("slow_variation_2", r2);
    report.set("convexity_min", rep.convexity_min());
    report.set("dini_exponent", dini.exponent);
    if let Some(total) = dini.total_estimate {
        report.set("dini_total", total);
    }
    report.notes.push(format!("modulus {parsed}, dimension {dim}"));
    report.notes.push(format!("dini verdict {}, oracle {oracle}", dini.verdict));
    report.notes.push(dini.diagnostic.clone());

    let mut csv = String::from("shell,S_k,cumulative\n");
    for (k, (s, c)) in dini.partial_sums.iter().zip(dini.cumulative()).enumerate() {
        let _ = writeln!(csv, "{k},{},{}", fmt_f(*s), fmt_f(c));
    }
    write_file(&dir, "dini.csv", &csv, &mut report)?;
    let sv = &rep.slow_variation;
    let mut csv = String::from("s,ratio1,ratio2\n");
    for (i, s) in sv.grid.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{}", fmt_f(*s), fmt_f(sv.ratios[0][i]), fmt_f(sv.ratios[1][i]));
    }
    write_file(&dir, "slow_variation.csv", &csv, &mut report)?;

    let status = match (dini.verdict, dini.matches_label()) {
        (DiniVerdict::Inconclusive, _) => Err(CliError::Inconclusive(format!("no stable fit for {parsed}"))),
        (_, Some(false)) => Err(CliError::Mismatch(format!(
            "verdict {} disagrees with the analytic label {oracle}",
            dini.verdict
        ))),
        _ => Ok(()),
    };
    if let Err(e) = &status {
        report.status = e.to_string();
    }
    ctx.finish(&dir, "classify", ctx.config(), report, start)?;
    status
}

pub fn linear(ctx: &Context) -> Result<(), CliError> {
    let start = Instant::now();
    ctx.loaded.validate(Horizon::Linear)?;
    let cfg = ctx.config();
    let spec = cfg.grid_spec()?;
    let prop = LinearPropagator::new(spec);
    let init = cfg.data_spec()?.build(prop.spectral())?;
    let times = log_times(cfg.linear.t_max, cfg.linear.samples);
    let traj = linear_trajectory(&prop, &init, &times, false)?;

    let dir = ctx.run_dir("linear", &cfg.hash())?;
    let mut report = Report {
        status: "ok".into(),
        ..Report::default()
    };
    write_trajectory(&dir, "norms.csv", &traj, &mut report)?;

    let mass = init.u.integral() + init.v.integral();
    let size = init.u.l1()? + init.v.l1()?;
    report.set("data_mean", mass);
    let window = (cfg.linear.window[0], cfg.linear.window[1]);
    let mut fits = String::from("norm,exponent,expected,residual,samples\n");
    let mut mismatches = Vec::new();
    let mut slopes = Vec::new();
    if size == 0.0 {
        report.notes.push("zero data: the solution vanishes identically".into());
    } else {
        // the predicted rates assume data with nonzero mean
        let check = mass.abs() > 1e-8 * size;
        if !check {
            report.notes.push("zero-mean data: exponents reported, not checked".into());
        }
        for norm in [SeriesName::Linf, SeriesName::L2, SeriesName::H1dot] {
            let fit = decay_fit(&traj, norm, window)?;
            let expected = expected_exponent(spec.dim(), norm).expect("rate known");
            report.set(&format!("exponent_{norm}"), fit.exponent);
            let _ = writeln!(
                fits,
                "{norm},{},{},{},{}",
                fmt_f(fit.exponent),
                fmt_f(expected),
                fmt_f(fit.residual),
                fit.samples
            );
            println!("{norm}: exponent {:.4} (predicted {expected})", fit.exponent);
            if check {
                slopes.push((norm.as_str(), expected));
                if (fit.exponent - expected).abs() > cfg.linear.tolerance {
                    mismatches.push(format!("{norm} exponent {:.4} vs {expected}", fit.exponent));
                }
            }
        }
    }
    write_file(&dir, "fits.csv", &fits, &mut report)?;
    write_file(&dir, "plot_decay.py", &crate::plot::decay_script("norms.csv", &slopes), &mut report)?;

    let status = if mismatches.is_empty() {
        Ok(())
    } else {
        Err(CliError::Mismatch(mismatches.join("; ")))
    };
    if let Err(e) = &status {
        report.status = e.to_string();
    }
    ctx.finish(&dir, "linear", cfg, report, start)?;
    status
}

/// One semilinear evolution written into `dir`.
fn run_into(loaded: &LoadedConfig, cfg: &RunConfig, dir: &Path, keep_states: bool) -> Result<(Trajectory, Report), CliError> {
    let forcing = ForcingSpec::build(&cfg.forcing_spec()?, cfg.dim()?, loaded.base_dir.as_deref())?;
    let prop = LinearPropagator::new(cfg.grid_spec()?);
    let init = cfg.data_spec()?.build(prop.spectral())?;
    let ecfg = cfg.evolve_config(forcing, keep_states || cfg.run.save_states)?;
    let traj = evolve(&prop, &init, &ecfg)?;

    let mut report = Report {
        status: "ok".into(),
        outcome: Some(traj.outcome.name().to_string()),
        t_est: Some(traj.outcome.t_est()),
        steps: Some(traj.steps),
        ..Report::default()
    };
    report.set("xnorm", traj.xnorm());
    report.set("forcing_integral", traj.forcing_integral(f64::INFINITY));
    report.set("final_time", traj.last_time());
    report.set("final_linf", traj.last_norms().map_or(0.0, |n| n.linf));
    if traj.outcome == Outcome::CompletedHorizon {
        let w = cfg.run.fit_window;
        match decay_fit(&traj, SeriesName::Linf, (w[0], w[1])) {
            Ok(fit) => report.set("exponent_Linf", fit.exponent),
            Err(e) => report.notes.push(format!("no decay fit: {e}")),
        }
    }
    write_trajectory(dir, "trajectory.csv", &traj, &mut report)?;
    write_file(dir, "plot_run.py", &crate::plot::run_script("trajectory.csv"), &mut report)?;
    if cfg.run.save_states {
        let states = dir.join("states");
        std::fs::create_dir_all(&states)?;
        for (k, s) in traj.states().enumerate() {
            s.save(&states.join(format!("state_{k:05}")))?;
        }
        report.files.push("states/".into());
    }
    Ok((traj, report))
}

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let start = Instant::now();
    ctx.loaded.validate(Horizon::Run)?;
    let cfg = ctx.config();
    let dir = ctx.run_dir("run", &cfg.hash())?;
    let (traj, report) = run_into(&ctx.loaded, cfg, &dir, false)?;
    println!("{}: {} after {} steps", cfg.run.forcing, traj.outcome, traj.steps);
    ctx.finish(&dir, "run", cfg, report, start)
}

fn forcing_class(spec: &ForcingSpec, loaded: &LoadedConfig) -> String {
    match spec {
        ForcingSpec::Zero => "linear".into(),
        ForcingSpec::Power(_) => "power".into(),
        ForcingSpec::Critical(m) => m
            .build_in(loaded.base_dir.as_deref())
            .and_then(|m| classify_dini(&m, &DiniSettings::default()))
            .map_or_else(|e| format!("unclassified ({e})"), |r| r.verdict.to_string()),
    }
}

struct SweepRow {
    index: usize,
    forcing: String,
    epsilon: f64,
    report: Report,
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = ctx.config();
    let s = &cfg.sweep;
    if s.forcings.is_empty() || s.epsilons.is_empty() {
        return Err(CliError::Usage("sweep needs non-empty sweep.forcings and sweep.epsilons".into()));
    }
    if let Some(e) = s.epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(CliError::Usage(format!("sweep amplitudes must be positive, got {e}")));
    }
    let forcings = s
        .forcings
        .iter()
        .map(|f| f.parse::<ForcingSpec>())
        .collect::<Result<Vec<_>, _>>()?;
    let mut jobs = Vec::new();
    for f in &forcings {
        for &eps in &s.epsilons {
            let mut c = cfg.clone();
            c.run.forcing = f.to_string();
            c.data.epsilon = eps;
            c.sweep = Default::default();
            c.validate(Horizon::Run, ctx.loaded.base_dir.as_deref())?;
            jobs.push(c);
        }
    }
    let dir = ctx.run_dir("sweep", &cfg.hash())?;

    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .enumerate()
        .map(|(index, c)| {
            let sub = dir.join(format!("run_{index:03}"));
            let t0 = Instant::now();
            let result = std::fs::create_dir_all(&sub).map_err(CliError::from).and_then(|_| {
                catch_unwind(AssertUnwindSafe(|| run_into(&ctx.loaded, c, &sub, false)))
                    .unwrap_or_else(|_| Err(CliError::Usage("run panicked".into())))
            });
            let mut report = match result {
                Ok((_, r)) => r,
                Err(e) => Report {
                    status: format!("failed: {e}"),
                    ..Report::default()
                },
            };
            report.wall_time_s = t0.elapsed().as_secs_f64();
            let _ = Manifest::new("run", c, ctx.workers, report.clone()).write(&sub);
            SweepRow {
                index,
                forcing: c.run.forcing.clone(),
                epsilon: c.data.epsilon,
                report,
            }
        })
        .collect();

    let classes: Vec<(String, String)> = forcings
        .iter()
        .map(|f| (f.to_string(), forcing_class(f, &ctx.loaded)))
        .collect();
    let class_of = |f: &str| classes.iter().find(|(k, _)| k == f).map_or("", |(_, c)| c.as_str());

    let mut report = Report {
        status: "ok".into(),
        ..Report::default()
    };
    let mut csv = String::from("index,forcing,class,epsilon,outcome,t_est,forcing_integral,final_linf,xnorm,status\n");
    let mut failed = 0;
    for r in &rows {
        let v = |k: &str| r.report.values.get(k).copied().unwrap_or(f64::NAN);
        let ok = r.report.status == "ok";
        if !ok {
            failed += 1;
        }
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            r.index,
            r.forcing,
            class_of(&r.forcing),
            fmt_f(r.epsilon),
            r.report.outcome.as_deref().unwrap_or(""),
            fmt_f(r.report.t_est.unwrap_or(f64::NAN)),
            fmt_f(v("forcing_integral")),
            fmt_f(v("final_linf")),
            fmt_f(v("xnorm")),
            if ok { "ok".to_string() } else { r.report.status.replace(',', ";") }
        );
    }
    write_file(&dir, "summary.csv", &csv, &mut report)?;

    let mut table = String::from("forcing                        class          completed  blown_up  failed  t_est_monotone\n");
    for (f, class) in &classes {
        let mine: Vec<&SweepRow> = rows.iter().filter(|r| &r.forcing == f).collect();
        let count = |o: &str| mine.iter().filter(|r| r.report.outcome.as_deref() == Some(o)).count();
        let bad = mine.iter().filter(|r| r.report.status != "ok").count();
        let mut by_eps: Vec<(f64, f64)> = mine
            .iter()
            .filter(|r| r.report.status == "ok")
            .map(|r| (r.epsilon, r.report.t_est.unwrap_or(f64::NAN)))
            .collect();
        by_eps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let monotone = by_eps.windows(2).all(|w| w[1].1 <= w[0].1);
        let _ = writeln!(
            table,
            "{f:<30} {class:<14} {:>9} {:>9} {bad:>7}  {monotone}",
            count("CompletedHorizon"),
            count("BlewUpAt") + count("StepCollapse"),
        );
    }
    print!("{table}");
    write_file(&dir, "dichotomy.txt", &table, &mut report)?;
    write_file(&dir, "plot_sweep.py", &crate::plot::sweep_script(), &mut report)?;
    report.set("runs", rows.len() as f64);
    report.set("failed", failed as f64);
    if failed > 0 {
        report.notes.push(format!("{failed} of {} runs failed; see summary.csv", rows.len()));
        eprintln!("dwlab: {failed} of {} runs failed", rows.len());
    }
    ctx.finish(&dir, "sweep", cfg, report, start)
}

/// Reads every `*.hdr`/`*.bin` pair in `dir`, ordered by time.
pub fn load_states(dir: &Path, forcing: &Forcing) -> Result<Trajectory, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("cannot read states directory {}: {e}", dir.display())))?;
    let mut stems = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if path.extension().is_some_and(|x| x == "hdr") {
            stems.push(path.with_extension(""));
        }
    }
    if stems.is_empty() {
        return Err(CliError::Usage(format!("no state files in {}", dir.display())));
    }
    let mut states = stems
        .iter()
        .map(|s| WaveState::load(s).map_err(|e| CliError::Usage(format!("{}: {e}", s.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    states.sort_by(|a, b| a.t.total_cmp(&b.t));
    let spec = *states[0].spec();
    if states.iter().any(|s| *s.spec() != spec) {
        return Err(CliError::Usage("saved states live on different grids".into()));
    }
    let spectral = Spectral::new(spec);
    let mut traj = Trajectory::new(spec.dim());
    for s in states {
        let norms = NormRecord::measure(&s, &spectral, forcing.l1(&s.u))?;
        traj.push(norms, Some(s))?;
    }
    Ok(traj)
}

pub fn certificate(ctx: &Context) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = ctx.config();
    let c = &cfg.certificate;
    let forcing_spec = cfg.forcing_spec()?;
    if !matches!(forcing_spec, ForcingSpec::Critical(_)) {
        return Err(CliError::Usage(format!(
            "the certificate needs a modulus forcing, got `{forcing_spec}`"
        )));
    }
    if c.r_grid.is_empty() {
        return Err(CliError::Usage("certificate.r_grid is empty".into()));
    }
    if c.r_grid.iter().chain(&c.extend).any(|&r| !(r >= c.r0)) {
        return Err(CliError::Usage(format!("certificate scales must be >= r0 = {}", c.r0)));
    }
    if c.r0_sweep.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(CliError::Usage("certificate.r0_sweep entries must be positive".into()));
    }
    let r_max = c.r_grid.iter().chain(&c.r0_sweep).copied().fold(c.r0, f64::max);
    let dir = ctx.run_dir("certificate", &cfg.hash())?;
    let mut report = Report {
        status: "ok".into(),
        ..Report::default()
    };

    let traj = match &c.states {
        Some(path) => {
            let mut p = PathBuf::from(path);
            if let (Some(base), true) = (&ctx.loaded.base_dir, p.is_relative()) {
                p = base.join(p);
            }
            let dim = cfg.dim()?;
            let forcing = forcing_spec.build(dim, ctx.loaded.base_dir.as_deref())?;
            let traj = load_states(&p, &forcing)?;
            if traj.dim() != dim {
                return Err(CliError::Usage("saved states do not match grid.dim".into()));
            }
            report.notes.push(format!("loaded {} states from {path}", traj.len()));
            traj
        }
        None => {
            ctx.loaded.validate(Horizon::Run)?;
            if cfg.run.t_max < r_max {
                return Err(CliError::Usage(format!(
                    "run.t_max = {} is shorter than the largest scale {r_max}",
                    cfg.run.t_max
                )));
            }
            let (traj, run_report) = run_into(&ctx.loaded, cfg, &dir, true)?;
            report.outcome = run_report.outcome;
            report.t_est = run_report.t_est;
            report.files = run_report.files;
            traj
        }
    };

    let dim = traj.dim();
    let nl = match forcing_spec.build(dim, ctx.loaded.base_dir.as_deref())? {
        Forcing::Critical(nl) => nl,
        _ => unreachable!("checked above"),
    };
    let profile = CutoffProfile::new(dim, c.r0)?;
    let f = functional_y(&traj, &nl, &profile, &c.r_grid)?;
    let mut scales: Vec<f64> = c.r_grid.iter().chain(&c.extend).copied().collect();
    scales.sort_by(f64::total_cmp);
    scales.dedup();
    let cert = blowup_certificate(&traj, &nl, &profile, &scales)?;

    let mut csv = String::from("R,I_R,y,Y,log2_I_R,Q_R\n");
    for i in 0..f.r_grid.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt_f(f.r_grid[i]),
            fmt_f(f.i_r[i]),
            fmt_f(f.y[i]),
            fmt_f(f.big_y[i]),
            fmt_f(std::f64::consts::LN_2 * f.i_r[i]),
            fmt_f(f.q_measure[i])
        );
    }
    write_file(&dir, "functionals.csv", &csv, &mut report)?;

    let mut text = String::new();
    let _ = writeln!(text, "modulus = {}", nl.modulus());
    let _ = writeln!(text, "dim = {dim}");
    let _ = writeln!(text, "R0 = {}", fmt_f(cert.r0));
    let _ = writeln!(text, "Y(R0) = {}", fmt_f(cert.y_r0));
    let _ = writeln!(text, "C = {}", fmt_f(cert.c));
    let _ = writeln!(text, "kappa = {}", fmt_f(cert.kappa));
    let _ = writeln!(text, "c1 = {}", fmt_f(cert.c1));
    let _ = writeln!(text, "c2 = {}", fmt_f(cert.c2));
    let _ = writeln!(text, "data_term = {}", fmt_f(cert.data_term));
    let _ = writeln!(text, "rhs = {}", fmt_f(cert.rhs));
    let _ = writeln!(text, "lhs_limit = {}", fmt_f(cert.lhs_limit));
    let _ = writeln!(text, "bound Y <= log2 I_R holds = {}", f.bound_holds());
    let _ = writeln!(text, "Y monotone = {}", f.y_monotone());
    let _ = writeln!(text, "\nR lhs");
    for (r, l) in cert.r_grid.iter().zip(&cert.lhs) {
        let _ = writeln!(text, "{} {}", fmt_f(*r), fmt_f(*l));
    }
    let _ = writeln!(text, "\nverdict: {}", cert.verdict());
    write_file(&dir, "certificate.txt", &text, &mut report)?;
    write_file(&dir, "plot_certificate.py", &crate::plot::certificate_script(), &mut report)?;

    let mut sens = String::from("r0,C,Y_R0,rhs,lhs_limit,witness_levels,witness_value\n");
    for &r0 in &c.r0_sweep {
        let row = CutoffProfile::new(dim, r0).and_then(|p| {
            let mut sc: Vec<f64> = scales.iter().copied().filter(|&r| r >= r0).collect();
            if sc.is_empty() {
                sc.push(r0);
            }
            blowup_certificate(&traj, &nl, &p, &sc)
        });
        match row {
            Ok(k) => {
                let (levels, value) = k.witness.map_or((f64::NAN, f64::NAN), |w| (w.levels as f64, w.value));
                let _ = writeln!(
                    sens,
                    "{},{},{},{},{},{},{}",
                    fmt_f(r0),
                    fmt_f(k.c),
                    fmt_f(k.y_r0),
                    fmt_f(k.rhs),
                    fmt_f(k.lhs_limit),
                    fmt_f(levels),
                    fmt_f(value)
                );
            }
            Err(e) => report.notes.push(format!("R0 = {r0}: {e}")),
        }
    }
    write_file(&dir, "r0_sensitivity.csv", &sens, &mut report)?;
    println!("{}", cert.verdict());

    report.set("Y_R0", cert.y_r0);
    report.set("rhs", cert.rhs);
    report.set("lhs_limit", cert.lhs_limit);
    report.set("data_term", cert.data_term);
    report.set("max_bound_ratio", f.max_bound_ratio());
    if let Some(w) = cert.witness {
        report.set("witness_levels", w.levels as f64);
        report.set("witness_value", w.value);
        if let Some(l) = w.ln_r {
            report.set("witness_ln_r", l);
        }
    }
    report.notes.push(cert.verdict());
    ctx.finish(&dir, "certificate", cfg, report, start)
}
