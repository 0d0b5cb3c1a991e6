//! The `grwlab` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime or
//! statistics error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};
use grwlab_core::collapse::{effective_reduction_rate, grw_trajectory, CollapseParams};
use grwlab_core::exclusion::allowed_region;
use grwlab_core::experiments::{
    born_ensemble, decoherence_scan, heating_experiment, visibility_experiment, DecoherenceConfig, HeatingConfig,
    MeasurementConfig, VisibilityConfig,
};
use grwlab_core::propagator::evolve_sampled;
use grwlab_core::qstate::gaussian_packet;
use grwlab_core::rates::{self, Dims};
use grwlab_core::{Complex64, Grid1D, Observables, Potential, RngStream, WaveFunction, NUCLEON_MASS_KG};
use serde_json::json;

use crate::bounds::{default_bounds, load_bounds};
use crate::config::{ConfigFile, Default as D, Kind as K, Param, Settings};
use crate::error::IoError;
use crate::exec::{RayonExecutor, Threads};
use crate::output::{fmt_f64, Cell, OutputDir};
use crate::snapshot::{encode, read_snapshot};

pub const DEFAULT_OUT: &str = "grwlab-out";

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<grwlab_core::Error> for Failure {
    fn from(e: grwlab_core::Error) -> Self {
        use grwlab_core::Error as E;
        match e {
            E::Config(_) | E::Domain(_) | E::StepSize { .. } | E::Shape(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Config(_) | IoError::Csv { .. } => Failure::Config(e.to_string()),
            IoError::Core(c) => c.into(),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

const UNITS: [Param; 2] = [
    Param::new("length_unit_m", K::Real, D::Unset, "internal length unit in meters (default 1e-7)"),
    Param::new("mass_unit_kg", K::Real, D::Unset, "internal mass unit in kg (default: nucleon mass)"),
];

const fn grid(n: u64, dx: f64) -> [Param; 3] {
    [
        Param::new("n_points", K::Count, D::Count(n), "grid points (power of two)"),
        Param::new("dx", K::Length, D::Internal(dx), "grid spacing"),
        Param::new("x_min", K::Length, D::Unset, "left grid edge (default: grid centered on 0)"),
    ]
}

const fn collapse(lambda: D, r_c: f64) -> [Param; 4] {
    [
        Param::new("lambda", K::Rate, lambda, "collapse rate per nucleon"),
        Param::new("r_c", K::Length, D::Internal(r_c), "localization length"),
        Param::new("n_nucleons", K::Real, D::Real(1.0), "nucleons in the collapsing body"),
        Param::new("mass_scaling", K::Flag, D::Flag(false), "scale the rate by mass instead of nucleon count"),
    ]
}

const PACKET: [Param; 8] = [
    Param::new("initial", K::Text, D::Unset, "QSL1 snapshot used as the initial state instead of a packet"),
    Param::new("x0", K::Length, D::Internal(0.0), "packet centre"),
    Param::new("p0", K::Momentum, D::Internal(0.0), "packet mean momentum"),
    Param::new("sigma", K::Length, D::Internal(1.0), "packet position spread"),
    Param::new("mass", K::Mass, D::Internal(1.0), "particle mass"),
    Param::new("potential", K::Text, D::Text("free"), "free or harmonic"),
    Param::new("omega", K::Frequency, D::Internal(1.0), "harmonic angular frequency"),
    Param::new("sample_every", K::Count, D::Count(100), "steps between observable samples"),
];

const TIMING: [Param; 2] = [
    Param::new("dt", K::Time, D::Internal(1e-3), "time step"),
    Param::new("t_total", K::Time, D::Internal(1.0), "total evolution time"),
];

fn cat(groups: &[&[Param]]) -> Vec<Param> {
    groups.iter().flat_map(|g| g.iter().copied()).collect()
}

struct Sub {
    name: &'static str,
    about: &'static str,
    params: Vec<Param>,
}

fn subcommands() -> Vec<Sub> {
    vec![
        Sub {
            name: "evolve",
            about: "Schrödinger evolution of a packet",
            params: cat(&[&UNITS, &grid(1024, 0.05), &PACKET, &TIMING]),
        },
        Sub {
            name: "trajectory",
            about: "One collapse trajectory",
            params: cat(&[&UNITS, &grid(1024, 0.05), &PACKET, &TIMING, &collapse(D::Si(1e-16), 1.0)]),
        },
        Sub {
            name: "born",
            about: "Measurement ensemble: outcome frequencies against |c_up|²",
            params: cat(&[
                &UNITS,
                &grid(1024, 0.05),
                &collapse(D::Si(1e-16), 1.0),
                &[
                    Param::new("p_up", K::Real, D::Real(0.5), "|c_up|²"),
                    Param::new("pointer_n_nucleons", K::Real, D::Real(1e23), "nucleons in the pointer"),
                    Param::new("pointer_separation", K::Length, D::Internal(10.0), "pointer displacement between outcomes"),
                    Param::new("pointer_sigma", K::Length, D::Internal(0.5), "pointer packet width"),
                    Param::new("decision_epsilon", K::Real, D::Real(1e-6), "branch weight declaring an outcome"),
                    Param::new("dt", K::Time, D::Unset, "time step (default 5e-4 / pointer rate)"),
                    Param::new("t_budget", K::Time, D::Unset, "time allowed for a decision (default 20 / pointer rate)"),
                    Param::new("n_trajectories", K::Count, D::Count(10_000), "ensemble size"),
                ],
            ]),
        },
        Sub {
            name: "decohere",
            about: "Coherence decay rate against branch separation",
            params: cat(&[
                &UNITS,
                &grid(1024, 0.05),
                &collapse(D::Internal(1.0), 1.0),
                &[
                    Param::new("separations", K::LengthList, D::InternalList(&[0.5, 2.0, 10.0]), "branch separations"),
                    Param::new("mass", K::Mass, D::Internal(1e6), "particle mass"),
                    Param::new("sigma", K::Length, D::Internal(0.5), "packet width"),
                    Param::new("dt", K::Time, D::Internal(1e-2), "largest time step"),
                    Param::new("n_samples", K::Count, D::Count(20), "coherence samples per run"),
                    Param::new("e_foldings", K::Real, D::Real(2.5), "run length in units of 1/Γ"),
                    Param::new("n_trajectories", K::Count, D::Count(2000), "ensemble size per separation"),
                ],
            ]),
        },
        Sub {
            name: "visibility",
            about: "Fringe visibility after free flight",
            params: cat(&[
                &UNITS,
                &grid(4096, 0.5),
                &collapse(D::Internal(1.0 / 400.0), 4.0),
                &[
                    Param::new("separation", K::Length, D::Internal(400.0), "path separation"),
                    Param::new("t_flight", K::Time, D::Internal(400.0), "flight time to the screen"),
                    Param::new("mass", K::Mass, D::Internal(1.0), "particle mass"),
                    Param::new("sigma0", K::Length, D::Internal(1.0), "initial packet width"),
                    Param::new("dt", K::Time, D::Internal(0.1), "largest time step"),
                    Param::new("n_trajectories", K::Count, D::Count(10_000), "ensemble size"),
                ],
            ]),
        },
        Sub {
            name: "heating",
            about: "Energy growth and momentum diffusion of a free particle",
            params: cat(&[
                &UNITS,
                &grid(1024, 0.05),
                &collapse(D::Internal(20.0), 1.0),
                &[
                    Param::new("t_total", K::Time, D::Internal(1.0), "run length"),
                    Param::new("mass", K::Mass, D::Internal(1.0), "particle mass"),
                    Param::new("sigma0", K::Length, D::Internal(1.0), "initial packet width"),
                    Param::new("dt", K::Time, D::Internal(4e-5), "largest time step"),
                    Param::new("n_samples", K::Count, D::Count(10), "samples per run"),
                    Param::new("n_trajectories", K::Count, D::Count(10_000), "ensemble size"),
                ],
            ]),
        },
        Sub {
            name: "exclusion",
            about: "Allowed region of the (λ, r_c) plane",
            params: vec![
                Param::new("bounds", K::Text, D::Text("default"), "bounds CSV path, or \"default\""),
                Param::new("log10_lambda_min_si", K::Real, D::Real(-20.0), "λ axis start, log10 s⁻¹"),
                Param::new("log10_lambda_max_si", K::Real, D::Real(-2.0), "λ axis end, log10 s⁻¹"),
                Param::new("log10_rc_min_m", K::Real, D::Real(-10.0), "r_c axis start, log10 m"),
                Param::new("log10_rc_max_m", K::Real, D::Real(-4.0), "r_c axis end, log10 m"),
                Param::new("per_decade", K::Count, D::Count(20), "raster cells per decade"),
            ],
        },
        Sub {
            name: "rates",
            about: "Closed-form rates",
            params: cat(&[
                &UNITS,
                &[
                    Param::new("n", K::Real, D::Real(1.0), "nucleons in an entangled body"),
                    Param::new("lambda", K::Rate, D::Si(1e-16), "collapse rate per nucleon"),
                    Param::new("mass", K::Mass, D::Internal(1.0), "particle mass for heating"),
                    Param::new("r_c", K::Length, D::Si(1e-7), "localization length"),
                    Param::new("dims", K::Count, D::Count(1), "1 or 3 dimensions for heating"),
                    Param::new("separation", K::Length, D::Unset, "branch separation for the reduction rate"),
                    Param::new("t_flight", K::Time, D::Unset, "time for survival and visibility"),
                ],
            ]),
        },
        Sub {
            name: "snapshot",
            about: "Inspect or convert a QSL1 snapshot",
            params: vec![
                Param::new("input", K::Text, D::Required, "QSL1 file"),
                Param::new("csv", K::Text, D::Unset, "also write amplitudes to this CSV file name"),
            ],
        },
    ]
}

fn kebab(key: &str) -> String {
    key.replace('_', "-")
}

pub fn command() -> Command {
    let mut root = Command::new("grwlab")
        .about("Spontaneous-localization trajectory simulator")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(Arg::new("config").long("config").global(true).value_name("PATH").help("TOML config file"))
        .arg(Arg::new("seed").long("seed").global(true).value_name("U64").help("master seed"))
        .arg(Arg::new("out").long("out").global(true).value_name("DIR").help("output directory"))
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_name("N|auto")
                .help("worker threads (default: GRWLAB_THREADS, else auto)"),
        );
    for sub in subcommands() {
        let mut c = Command::new(sub.name).about(sub.about);
        for p in &sub.params {
            for key in p.keys() {
                c = c.arg(
                    Arg::new(key.clone())
                        .long(kebab(&key))
                        .help(p.help)
                        .allow_negative_numbers(true)
                        .action(ArgAction::Set),
                );
            }
        }
        root = root.subcommand(c);
    }
    root
}

struct Run {
    settings: Settings,
    seed: u64,
    threads: usize,
    out: PathBuf,
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&matches) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{f}");
            f.code()
        }
    }
}

fn setup(name: &str, m: &ArgMatches, params: &[Param]) -> Result<Run, Failure> {
    let names: Vec<&str> = subcommands().iter().map(|s| s.name).collect();
    let file = match m.get_one::<String>("config") {
        Some(p) => ConfigFile::load(Path::new(p), &names)?,
        None => ConfigFile::default(),
    };
    let mut flags = Vec::new();
    for p in params {
        for key in p.keys() {
            if let Some(v) = m.get_one::<String>(&key) {
                flags.push((key, v.clone()));
            }
        }
    }
    let settings = Settings::resolve(params, name, file.section(name), &flags)?;
    let seed = match m.get_one::<String>("seed") {
        Some(s) => s
            .parse::<u64>()
            .map_err(|_| Failure::Config(format!("--seed expects an unsigned 64-bit integer, got {s:?}")))?,
        None => file.seed.unwrap_or(0),
    };
    let threads_flag = m.get_one::<String>("threads").cloned().or(file.threads.clone());
    let threads = Threads::resolve(threads_flag.as_deref())?.count();
    let out = m
        .get_one::<String>("out")
        .cloned()
        .or(file.out.clone())
        .unwrap_or_else(|| DEFAULT_OUT.to_string());
    Ok(Run {
        settings,
        seed,
        threads,
        out: PathBuf::from(out),
    })
}

fn dispatch(m: &ArgMatches) -> Outcome {
    let (name, sub_m) = m.subcommand().expect("subcommand is required");
    let sub = subcommands()
        .into_iter()
        .find(|s| s.name == name)
        .expect("clap only accepts declared subcommands");
    // global flags are visible from the subcommand matches
    let run = setup(name, sub_m, &sub.params)?;
    let mut out = OutputDir::create(&run.out)?;
    match name {
        "evolve" => evolve(&run, &mut out)?,
        "trajectory" => trajectory(&run, &mut out)?,
        "born" => born(&run, &mut out)?,
        "decohere" => decohere(&run, &mut out)?,
        "visibility" => visibility(&run, &mut out)?,
        "heating" => heating(&run, &mut out)?,
        "exclusion" => exclusion(&run, &mut out)?,
        "rates" => rates_table(&run, &mut out)?,
        "snapshot" => snapshot(&run, &mut out)?,
        _ => unreachable!("unhandled subcommand {name}"),
    }
    out.write_manifest(name, &run.settings.echo(), run.seed, run.threads)?;
    Ok(())
}

fn build_grid(s: &Settings) -> Result<Grid1D, Failure> {
    let n = s.count("n_points")?;
    let dx = s.phys("dx")?;
    Ok(match s.opt_phys("x_min")? {
        Some(x0) => Grid1D::new(n, x0, dx)?,
        None => Grid1D::centered(n, dx)?,
    })
}

fn build_params(s: &Settings) -> Result<CollapseParams, Failure> {
    Ok(CollapseParams::new(
        s.rate_si("lambda")?,
        s.phys("r_c")?,
        s.real("n_nucleons")?,
        s.flag("mass_scaling")?,
    )?)
}

fn build_potential(s: &Settings) -> Result<Potential, Failure> {
    match s.text("potential")?.as_str() {
        "free" => Ok(Potential::Free),
        "harmonic" => Ok(Potential::Harmonic { omega: s.phys("omega")? }),
        other => Err(Failure::Config(format!("potential must be free or harmonic, got {other:?}"))),
    }
}

fn initial_state(s: &Settings) -> Result<WaveFunction, Failure> {
    if let Some(path) = s.opt_text("initial")? {
        return Ok(read_snapshot(Path::new(&path))?.psi);
    }
    let grid = build_grid(s)?;
    Ok(gaussian_packet(grid, s.phys("x0")?, s.phys("p0")?, s.phys("sigma")?, s.phys("mass")?)?)
}

fn observables_csv(out: &mut OutputDir, times: &[f64], obs: &[Observables]) -> Result<(), Failure> {
    let rows: Vec<Vec<Cell>> = times
        .iter()
        .zip(obs)
        .map(|(&t, o)| {
            vec![
                Cell::F(t),
                Cell::F(o.norm2),
                Cell::F(o.mean_x),
                Cell::F(o.var_x),
                Cell::F(o.mean_p),
                Cell::F(o.var_p),
                Cell::F(o.energy),
            ]
        })
        .collect();
    out.write_csv(
        "observables.csv",
        &["t_internal", "norm2", "mean_x", "var_x", "mean_p", "var_p", "energy"],
        &rows,
    )?;
    Ok(())
}

fn steps(t_total: f64, dt: f64) -> Result<usize, Failure> {
    if !(t_total > 0.0 && dt > 0.0) {
        return Err(Failure::Config("t_total and dt must be positive".into()));
    }
    Ok((((t_total / dt) - 1e-9).ceil() as usize).max(1))
}

fn evolve(run: &Run, out: &mut OutputDir) -> Outcome {
    let s = &run.settings;
    let psi = initial_state(s)?;
    let v = build_potential(s)?;
    let dt = s.phys("dt")?;
    let n = steps(s.phys("t_total")?, dt)?;
    let (fin, samples) = evolve_sampled(&psi, &v, dt, n, s.count("sample_every")?)?;
    let (times, obs): (Vec<f64>, Vec<Observables>) = samples.into_iter().unzip();
    observables_csv(out, &times, &obs)?;
    out.write_bytes("final.qsl1", &encode(&fin, &s.units))?;
    println!("evolved {n} steps; final norm² = {}", fmt_f64(fin.norm2()));
    Ok(())
}

fn trajectory(run: &Run, out: &mut OutputDir) -> Outcome {
    let s = &run.settings;
    let psi = initial_state(s)?;
    let v = build_potential(s)?;
    let params = build_params(s)?;
    let mut rng = RngStream::new(run.seed, 0);
    let rec = grw_trajectory(
        &psi,
        &v,
        &params,
        &s.units,
        s.phys("t_total")?,
        s.phys("dt")?,
        s.count("sample_every")?,
        &mut rng,
    )?;
    observables_csv(out, &rec.sample_times, &rec.observables_at_samples)?;
    let rows: Vec<Vec<Cell>> = rec
        .events
        .iter()
        .map(|e| vec![Cell::F(e.t), Cell::F(e.center), Cell::F(e.branch_weight)])
        .collect();
    out.write_csv("events.csv", &["t_internal", "center_internal", "branch_weight"], &rows)?;
    out.write_bytes("final.qsl1", &encode(&rec.final_state, &s.units))?;
    out.write_json(
        "trajectory.json",
        &json!({
            "seed": rec.seed,
            "stream": rec.stream,
            "params": params,
            "units": s.units,
            "events": rec.events,
            "sample_times": rec.sample_times,
            "observables": rec.observables_at_samples,
        }),
    )?;
    println!("{} hits", rec.events.len());
    Ok(())
}

fn born(run: &Run, out: &mut OutputDir) -> Outcome {
    let s = &run.settings;
    let params = build_params(s)?;
    let p_up = s.real("p_up")?;
    if !(0.0..=1.0).contains(&p_up) {
        return Err(Failure::Config(format!("p_up must lie in [0, 1], got {p_up}")));
    }
    let n_pointer = s.real("pointer_n_nucleons")?;
    let rate = CollapseParams::new(params.lambda_si, params.r_c, n_pointer, false)?.total_rate_internal(n_pointer, &s.units)?;
    if !(rate > 0.0) {
        return Err(Failure::Config("born needs a positive collapse rate".into()));
    }
    let cfg = MeasurementConfig {
        c_up: Complex64::new(p_up.sqrt(), 0.0),
        c_down: Complex64::new((1.0 - p_up).sqrt(), 0.0),
        pointer_n_nucleons: n_pointer,
        pointer_separation: s.phys("pointer_separation")?,
        pointer_sigma: s.phys("pointer_sigma")?,
        decision_epsilon: s.real("decision_epsilon")?,
        grid: build_grid(s)?,
        dt: s.opt_phys("dt")?.unwrap_or(5e-4 / rate),
        t_budget: s.opt_phys("t_budget")?.unwrap_or(20.0 / rate),
        units: s.units,
    };
    let exec = RayonExecutor::new(run.threads)?;
    let (report, trials) = born_ensemble(&cfg, &params, s.count("n_trajectories")?, run.seed, &exec)?;
    let rows: Vec<Vec<Cell>> = trials
        .iter()
        .enumerate()
        .map(|(i, t)| {
            vec![
                Cell::I(i as u64),
                Cell::S(t.outcome.as_str()),
                Cell::F(t.decision_time),
                Cell::I(t.hits as u64),
            ]
        })
        .collect();
    out.write_csv("born_trials.csv", &["trial", "outcome", "decision_time_internal", "hits"], &rows)?;
    out.write_json("born_report.json", &report)?;
    println!(
        "p_up = {p_up}: frequency {} ± {} (χ² p = {})",
        report.estimate, report.stderr, report.fit_diagnostics["p_value"]
    );
    Ok(())
}

fn decohere(run: &Run, out: &mut OutputDir) -> Outcome {
    let s = &run.settings;
    let params = build_params(s)?;
    let mut cfg = DecoherenceConfig::new(build_grid(s)?, s.phys("mass")?, s.phys("sigma")?, s.units);
    cfg.dt = s.phys("dt")?;
    cfg.n_samples = s.count("n_samples")?;
    cfg.e_foldings = s.real("e_foldings")?;
    let exec = RayonExecutor::new(run.threads)?;
    let results = decoherence_scan(
        &s.phys_list("separations")?,
        &params,
        s.count("n_trajectories")?,
        &cfg,
        run.seed,
        &exec,
    )?;
    let summary: Vec<Vec<Cell>> = results
        .iter()
        .map(|r| {
            vec![
                Cell::F(r.separation),
                Cell::F(r.gamma_fit),
                Cell::F(r.gamma_analytic),
                Cell::F(r.report.stderr),
                Cell::F(r.report.fit_diagnostics["r2"]),
            ]
        })
        .collect();
    out.write_csv(
        "decoherence.csv",
        &["separation_internal", "gamma_fit_internal", "gamma_analytic_internal", "stderr", "r2"],
        &summary,
    )?;
    let curves: Vec<Vec<Cell>> = results
        .iter()
        .flat_map(|r| {
            r.times
                .iter()
                .zip(&r.coherence)
                .map(|(&t, &c)| vec![Cell::F(r.separation), Cell::F(t), Cell::F(c)])
        })
        .collect();
    out.write_csv("decoherence_curves.csv", &["separation_internal", "t_internal", "coherence"], &curves)?;
    let reports: Vec<_> = results.iter().map(|r| &r.report).collect();
    out.write_json("decoherence_report.json", &reports)?;
    for r in &results {
        println!(
            "d = {}: Γ = {} ± {} (predicted {})",
            r.separation, r.gamma_fit, r.report.stderr, r.gamma_analytic
        );
    }
    Ok(())
}

fn visibility(run: &Run, out: &mut OutputDir) -> Outcome {
    let s = &run.settings;
    let params = build_params(s)?;
    let cfg = VisibilityConfig {
        grid: build_grid(s)?,
        mass: s.phys("mass")?,
        sigma0: s.phys("sigma0")?,
        dt: s.phys("dt")?,
        units: s.units,
    };
    let exec = RayonExecutor::new(run.threads)?;
    let r = visibility_experiment(
        s.phys("separation")?,
        &params,
        s.phys("t_flight")?,
        s.count("n_trajectories")?,
        &cfg,
        run.seed,
        &exec,
    )?;
    out.write_json("visibility.json", &r)?;
    println!(
        "V/V_ideal = {} ± {} (analytic {} at Γt = {})",
        r.ratio, r.stderr, r.v_analytic, r.gamma_t
    );
    Ok(())
}

fn heating(run: &Run, out: &mut OutputDir) -> Outcome {
    let s = &run.settings;
    let params = build_params(s)?;
    let cfg = HeatingConfig {
        grid: build_grid(s)?,
        mass: s.phys("mass")?,
        sigma0: s.phys("sigma0")?,
        dt: s.phys("dt")?,
        n_samples: s.count("n_samples")?,
        units: s.units,
    };
    let exec = RayonExecutor::new(run.threads)?;
    let r = heating_experiment(&params, s.phys("t_total")?, s.count("n_trajectories")?, &cfg, run.seed, &exec)?;
    let rows: Vec<Vec<Cell>> = r
        .times
        .iter()
        .zip(&r.mean_energy)
        .zip(&r.var_p)
        .map(|((&t, &e), &v)| vec![Cell::F(t), Cell::F(e), Cell::F(v)])
        .collect();
    out.write_csv("heating_curve.csv", &["t_internal", "mean_energy", "var_p"], &rows)?;
    out.write_json("heating.json", &r)?;
    println!(
        "dE/dt = {} ± {} (predicted {}); dVar(p)/dt = {} ± {} (predicted {})",
        r.slope_measured, r.stderr, r.slope_analytic, r.var_p_slope, r.var_p_stderr, r.var_p_slope_analytic
    );
    Ok(())
}

fn exclusion(run: &Run, out: &mut OutputDir) -> Outcome {
    let s = &run.settings;
    let which = s.text("bounds")?;
    let curves = if which == "default" {
        default_bounds()
    } else {
        let path = Path::new(&which);
        let file = std::fs::File::open(path).map_err(|e| Failure::Config(format!("{which}: {e}")))?;
        let loaded = load_bounds(file)?;
        for w in &loaded.warnings {
            eprintln!("warning: {w}");
        }
        loaded.curves
    };
    let raster = allowed_region(
        &curves,
        (s.real("log10_lambda_min_si")?, s.real("log10_lambda_max_si")?),
        (s.real("log10_rc_min_m")?, s.real("log10_rc_max_m")?),
        s.count("per_decade")?,
    )?;
    let mut rows = Vec::with_capacity(raster.allowed.len());
    for (il, &ll) in raster.log10_lambda_axis.iter().enumerate() {
        for (ir, &lr) in raster.log10_rc_axis.iter().enumerate() {
            rows.push(vec![Cell::F(lr), Cell::F(ll), Cell::I(raster.is_allowed(ir, il) as u64)]);
        }
    }
    out.write_csv("raster.csv", &["log10_rc", "log10_lambda", "allowed"], &rows)?;
    let boundary: Vec<Vec<Cell>> = raster
        .boundary
        .iter()
        .map(|b| vec![Cell::F(b.log10_rc), Cell::F(b.log10_lambda_min), Cell::F(b.log10_lambda_max)])
        .collect();
    out.write_csv("boundary.csv", &["log10_rc", "log10_lambda_min", "log10_lambda_max"], &boundary)?;
    let summary = json!({
        "span_lambda_decades": raster.span_lambda_decades,
        "span_rc_decades": raster.span_rc_decades,
        "closed": raster.closed,
        "empty": raster.empty,
        "open": raster.open,
        "allowed_cells": raster.allowed_count(),
        "curves": curves,
    });
    out.write_json("exclusion_summary.json", &summary)?;
    println!(
        "span {} decades in λ, {} in r_c; closed = {}",
        raster.span_lambda_decades, raster.span_rc_decades, raster.closed
    );
    Ok(())
}

/// Shortest rendering after rounding to 15 significant digits, so that
/// `1e23 × 1e-16` prints as `1e7`.
pub fn fmt_rate(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:e}");
    }
    let rounded: f64 = format!("{v:.14e}").parse().expect("formatted float parses");
    format!("{rounded:e}")
}

fn rates_table(run: &Run, out: &mut OutputDir) -> Outcome {
    let s = &run.settings;
    let n = s.real("n")?;
    let lambda = s.rate_si("lambda")?;
    let mass = s.phys("mass")?;
    let r_c = s.phys("r_c")?;
    let r_c_m = s.units.length_to_si(r_c);
    let dims = Dims::from_count(s.count("dims")? as u32)
        .ok_or_else(|| Failure::Config("dims must be 1 or 3".into()))?;
    let amplified = rates::amplified_rate(n, lambda);
    let mut table: Vec<(&str, f64)> = vec![
        ("amplified_rate_si", amplified),
        ("mean_collapse_time_s", rates::mean_collapse_time(amplified)),
        ("mass_rate_si", rates::mass_rate(mass * s.units.mass_unit_kg / NUCLEON_MASS_KG, lambda)),
        (
            "heating_power_w",
            rates::heating_rate(lambda, mass * s.units.mass_unit_kg / NUCLEON_MASS_KG, r_c_m, dims),
        ),
        ("momentum_diffusion_si", rates::momentum_diffusion_rate(lambda, r_c_m)),
    ];
    let params = CollapseParams::new(lambda, r_c, n, false)?;
    let t = s.opt_phys("t_flight")?.map(|t| s.units.time_to_si(t));
    if let Some(d) = s.opt_phys("separation")? {
        let gamma = effective_reduction_rate(d, &params)?;
        table.push(("reduction_rate_si", gamma));
        if let Some(t) = t {
            table.push(("visibility", (-gamma * t).exp()));
        }
    }
    if let Some(t) = t {
        table.push(("survival_probability", rates::survival_probability(amplified, t)));
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for (name, v) in &table {
        writeln!(lock, "{name} {}", fmt_rate(*v)).map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let rows: Vec<Vec<Cell>> = table.iter().map(|(k, v)| vec![Cell::S(k), Cell::F(*v)]).collect();
    out.write_csv("rates.csv", &["quantity", "value"], &rows)?;
    Ok(())
}

fn snapshot(run: &Run, out: &mut OutputDir) -> Outcome {
    let s = &run.settings;
    let snap = read_snapshot(Path::new(&s.text("input")?))?;
    let g = snap.psi.grid();
    let header = json!({
        "n_points": g.n_points(),
        "x_min": g.x_min(),
        "dx": g.dx(),
        "mass": snap.psi.mass(),
        "length_unit_m": snap.units.length_unit_m,
        "mass_unit_kg": snap.units.mass_unit_kg,
        "norm2": snap.psi.norm2(),
    });
    out.write_json("snapshot_header.json", &header)?;
    if let Some(name) = s.opt_text("csv")? {
        let rows: Vec<Vec<Cell>> = snap
            .psi
            .amps()
            .iter()
            .enumerate()
            .map(|(i, z)| vec![Cell::F(g.x(i)), Cell::F(z.re), Cell::F(z.im)])
            .collect();
        out.write_csv(&name, &["x_internal", "re", "im"], &rows)?;
    }
    println!("{}", serde_json::to_string_pretty(&header).map_err(IoError::from)?);
    Ok(())
}
