//! The `zakai` command line: configuration, presets and subcommands.
//!
//! Configuration is a flat TOML table. A preset supplies defaults, a config
//! file overlays them, and `--set key=value` pairs overlay both. Every run
//! writes its effective configuration and a manifest next to its outputs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::harness::{self, ConstantProblem, HestonProblem, InitialKind, Manifest};
use crate::model::{Grid2D, ModelParams, TimeGrid};
use crate::schemes::{ConstantStepper, HestonSpdeParams, ImplicitSolve, SchemeKind, SpdeModel, Stepper};
use crate::solvers::default_max_iter;
use crate::stability;
use crate::stochastic::{draw_path_indexed, sub_step_count, SubPath};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const PRESETS: [&str; 2] = ["paper-sec5", "paper-sec6"];

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoConvergence { .. } | Error::Singular { .. } => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "zakai", version, about = "Finite-difference solvers and experiments for 2-D Zakai-type SPDEs")]
pub struct Args {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Named parameter set applied before the config file.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Master seed; overrides the config value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Config override as `key=value` (value in TOML syntax); repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Evolve one path and write the final field.
    Solve,
    /// Parameter inequalities, explicit CFL bounds, margins and a region sweep.
    Stability,
    /// Convergence in h or k, against the exact solution or as coupled proxies.
    Converge,
    /// Spatial refinement in x at fixed h_y along one path.
    Diverge,
    /// Wall time per path under k/4, h/2 refinement.
    Cost,
    /// Levy-area identity and moment audit.
    LevyCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Stability => "stability",
            Command::Converge => "converge",
            Command::Diverge => "diverge",
            Command::Cost => "cost",
            Command::LevyCheck => "levy-check",
        }
    }
}

/// Every recognised configuration key.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scheme: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,

    pub mu_x: Option<f64>,
    pub mu_y: Option<f64>,
    pub rho_x: Option<f64>,
    pub rho_y: Option<f64>,
    pub rho_xy: Option<f64>,

    pub kappa: Option<f64>,
    pub theta: Option<f64>,
    pub xi: Option<f64>,
    pub r: Option<f64>,
    pub rho_11: Option<f64>,
    pub rho_21: Option<f64>,
    pub rho_3: Option<f64>,

    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub y_min: Option<f64>,
    pub y_max: Option<f64>,
    pub h_x: Option<f64>,
    pub h_y: Option<f64>,
    pub x0: Option<f64>,
    pub y0: Option<f64>,
    pub horizon: Option<f64>,
    pub k: Option<f64>,
    pub steps: Option<usize>,
    pub initial: Option<String>,

    /// `auto`, `separable` or `krylov`.
    pub solver: Option<String>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,

    pub paths: Option<usize>,
    pub levels: Option<usize>,
    /// `h`, `k`, `proxy-h` or `proxy-k`.
    pub mode: Option<String>,
    pub k_ratio: Option<usize>,
    pub schemes: Option<Vec<String>>,

    pub lattice: Option<usize>,
    pub sweep: Option<usize>,
    pub c0: Option<f64>,
    pub beta_exp: Option<f64>,

    pub samples: Option<usize>,
    pub m_sub: Option<usize>,
}

fn preset_table(name: &str) -> CliResult<toml::Table> {
    let text = match name {
        "paper-sec5" => {
            r#"
            scheme = "adi-milstein"
            mu_x = 0.0809
            mu_y = 0.0809
            rho_x = 0.2
            rho_y = 0.2
            rho_xy = 0.45
            x_min = -8.0
            x_max = 12.0
            y_min = -8.0
            y_max = 12.0
            h_x = 0.5
            h_y = 0.5
            x0 = 2.0
            y0 = 2.0
            horizon = 1.0
            k = 0.00390625
            initial = "dirac"
            paths = 20
            levels = 4
            "#
        }
        "paper-sec6" => {
            r#"
            scheme = "heston-milstein"
            kappa = 2.0
            theta = 0.4
            xi = 0.5
            r = 0.05
            rho_11 = 0.3
            rho_21 = 0.2
            rho_3 = 0.5
            x_min = -3.0
            x_max = 7.0
            y_min = 0.0
            y_max = 1.5
            h_x = 0.625
            h_y = 0.025
            x0 = 2.0
            y0 = 1.4
            horizon = 1.0
            k = 0.25
            paths = 10
            levels = 4
            "#
        }
        other => {
            return Err(CliError::config(format!(
                "unknown preset `{other}` (known: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(text.parse().expect("preset tables are valid TOML"))
}

/// Merges preset, file and overrides, then checks every key and type.
pub fn load_config(
    preset: Option<&str>,
    file: Option<&Path>,
    overrides: &[String],
) -> CliResult<Config> {
    let mut table = match preset {
        Some(p) => preset_table(p)?,
        None => toml::Table::new(),
    };
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let t: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::config(format!("{}: {}", path.display(), e.message())))?;
        table.extend(t);
    }
    for o in overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("override `{o}` is not of the form key=value")))?;
        let key = key.trim();
        let parsed: toml::Table = format!("v = {}", value.trim())
            .parse()
            .or_else(|_| format!("v = {:?}", value.trim()).parse())
            .map_err(|e: toml::de::Error| CliError::config(format!("override `{key}`: {}", e.message())))?;
        table.insert(key.to_string(), parsed["v"].clone());
    }
    let text = toml::to_string(&table).map_err(|e| CliError::config(e.to_string()))?;
    toml::from_str(&text).map_err(|e| CliError::config(describe_toml_error(&e, &table)))
}

/// Names the offending key even when the parser only reports a position.
fn describe_toml_error(e: &toml::de::Error, table: &toml::Table) -> String {
    let msg = e.message().to_string();
    if msg.contains('`') {
        return format!("config: {msg}");
    }
    // a type error: find the first key whose value alone fails
    for (key, value) in table {
        let mut one = toml::Table::new();
        one.insert(key.clone(), value.clone());
        let text = toml::to_string(&one).unwrap_or_default();
        if toml::from_str::<Config>(&text).is_err() {
            return format!("config key `{key}`: {msg}");
        }
    }
    format!("config: {msg}")
}

fn need<T: Copy>(v: Option<T>, key: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::config(format!("missing config key `{key}`")))
}

impl Config {
    fn scheme(&self) -> CliResult<SchemeKind> {
        let s = self.scheme.as_deref().ok_or_else(|| CliError::config("missing config key `scheme`"))?;
        s.parse()
            .map_err(|_| CliError::config(format!("config key `scheme`: unknown scheme `{s}`")))
    }

    fn params(&self) -> CliResult<ModelParams> {
        Ok(ModelParams::new(
            self.mu_x.unwrap_or(0.0),
            self.mu_y.unwrap_or(0.0),
            self.rho_x.unwrap_or(0.0),
            self.rho_y.unwrap_or(0.0),
            self.rho_xy.unwrap_or(0.0),
        )?)
    }

    fn heston(&self) -> CliResult<HestonSpdeParams> {
        let hp = HestonSpdeParams {
            kappa1: need(self.kappa, "kappa")?,
            theta1: need(self.theta, "theta")?,
            xi1: need(self.xi, "xi")?,
            r1: need(self.r, "r")?,
            rho_11: need(self.rho_11, "rho_11")?,
            rho_21: need(self.rho_21, "rho_21")?,
            rho_3: need(self.rho_3, "rho_3")?,
        };
        hp.validate()?;
        Ok(hp)
    }

    fn initial(&self) -> CliResult<InitialKind> {
        match self.initial.as_deref() {
            None => Ok(InitialKind::Dirac),
            Some(s) => s
                .parse()
                .map_err(|_| CliError::config(format!("config key `initial`: unknown initial datum `{s}`"))),
        }
    }

    fn horizon(&self) -> CliResult<f64> {
        need(self.horizon, "horizon")
    }

    fn constant_problem(&self) -> CliResult<ConstantProblem> {
        Ok(ConstantProblem {
            params: self.params()?,
            x_min: need(self.x_min, "x_min")?,
            x_max: need(self.x_max, "x_max")?,
            y_min: need(self.y_min, "y_min")?,
            y_max: need(self.y_max, "y_max")?,
            x0: need(self.x0, "x0")?,
            y0: need(self.y0, "y0")?,
            horizon: self.horizon()?,
            initial: self.initial()?,
        })
    }

    fn heston_problem(&self) -> CliResult<HestonProblem> {
        Ok(HestonProblem {
            params: self.heston()?,
            x_min: need(self.x_min, "x_min")?,
            x_max: need(self.x_max, "x_max")?,
            y_min: need(self.y_min, "y_min")?,
            y_max: need(self.y_max, "y_max")?,
            x0: need(self.x0, "x0")?,
            y0: need(self.y0, "y0")?,
            horizon: self.horizon()?,
        })
    }

    fn time_grid(&self) -> CliResult<TimeGrid> {
        let t = self.horizon()?;
        Ok(match (self.steps, self.k) {
            (Some(n), _) => TimeGrid::new(t, n)?,
            (None, Some(k)) => TimeGrid::with_step(t, k)?,
            (None, None) => return Err(CliError::config("missing config key `k` (or `steps`)")),
        })
    }

    fn h(&self) -> CliResult<(f64, f64)> {
        Ok((need(self.h_x, "h_x")?, need(self.h_y, "h_y")?))
    }

    fn paths(&self) -> CliResult<usize> {
        match self.paths.unwrap_or(1) {
            0 => Err(CliError::config("config key `paths` must be positive")),
            n => Ok(n),
        }
    }

    fn levels(&self, default: usize) -> CliResult<usize> {
        match self.levels.unwrap_or(default) {
            n if n < 2 => Err(CliError::config("config key `levels` must be at least 2")),
            n => Ok(n),
        }
    }
}

struct Run<'a> {
    command: Command,
    config: &'a Config,
    seed: u64,
    threads: usize,
    out: &'a Path,
    outputs: Vec<String>,
}

impl Run<'_> {
    fn create(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.out.join(name);
        let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let path = self.out.join(name);
        let w = self.create(name)?;
        serde_json::to_writer_pretty(w, value).map_err(|e| CliError::io(&path, e))
    }

    fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(BufWriter<File>) -> std::io::Result<()>,
    ) -> CliResult<()> {
        let path = self.out.join(name);
        let w = self.create(name)?;
        f(w).map_err(|e| CliError::io(&path, e))
    }

    /// Effective configuration plus manifest; called last.
    fn finish(mut self) -> CliResult<()> {
        let mut cfg = self.config.clone();
        cfg.seed = Some(self.seed);
        let toml_text = toml::to_string(&cfg).map_err(|e| CliError::config(e.to_string()))?;
        let cfg_path = self.out.join("config.toml");
        std::fs::write(&cfg_path, toml_text).map_err(|e| CliError::io(&cfg_path, e))?;
        self.outputs.push("config.toml".into());
        let mut m = Manifest::new(self.command.name(), self.seed, self.threads, cfg);
        m.outputs = self.outputs.clone();
        let path = self.out.join("manifest.json");
        let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        m.write_json(BufWriter::new(f)).map_err(|e| CliError::io(&path, e))
    }
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match execute(&args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(args: &Args) -> CliResult<()> {
    let config = load_config(args.preset.as_deref(), args.config.as_deref(), &args.overrides)?;
    let seed = args
        .seed
        .or(config.seed)
        .ok_or_else(|| CliError::config("no seed: pass --seed or set `seed` in the config"))?;
    let threads = args.threads.or(config.threads).unwrap_or(0);
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::config(format!("threads: {e}")))?;
    let mut run = Run {
        command: args.command,
        config: &config,
        seed,
        threads: pool.current_num_threads(),
        out: &args.out,
        outputs: Vec::new(),
    };
    let result = pool.install(|| match args.command {
        Command::Solve => cmd_solve(&mut run),
        Command::Stability => cmd_stability(&mut run),
        Command::Converge => cmd_converge(&mut run),
        Command::Diverge => cmd_diverge(&mut run),
        Command::Cost => cmd_cost(&mut run),
        Command::LevyCheck => cmd_levy_check(&mut run),
    });
    // a failed audit still leaves a complete record behind
    if result.is_ok() || !run.outputs.is_empty() {
        run.finish()?;
    }
    result
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    scheme: SchemeKind,
    n_x: usize,
    n_y: usize,
    steps: usize,
    k: f64,
    mass: f64,
    min: f64,
    max: f64,
    argmax: [f64; 2],
    l2_norm: f64,
    /// L2 distance to the exact solution, constant-coefficient runs only.
    exact_l2_error: Option<f64>,
}

fn constant_stepper(cfg: &Config, kind: SchemeKind, p: ModelParams, grid: &Grid2D, k: f64) -> CliResult<Stepper> {
    let solve = match cfg.solver.as_deref().unwrap_or("auto") {
        "auto" => return Ok(Stepper::Constant(ConstantStepper::new(kind, p, grid, k)?)),
        "separable" => ImplicitSolve::Separable,
        "krylov" => ImplicitSolve::Krylov {
            tol: cfg.tol.unwrap_or(1e-10),
            max_iter: cfg.max_iter.unwrap_or_else(|| default_max_iter(grid)),
        },
        other => return Err(CliError::config(format!("config key `solver`: unknown solver `{other}`"))),
    };
    Ok(Stepper::Constant(ConstantStepper::with_solver(kind, p, grid, k, solve)?))
}

fn cmd_solve(run: &mut Run) -> CliResult<()> {
    let cfg = run.config;
    let kind = run.config.scheme()?;
    let (hx, hy) = cfg.h()?;
    let tg = cfg.time_grid()?;
    let (field, exact_err) = if kind.is_constant() {
        let prob = cfg.constant_problem()?;
        let grid = prob.grid(hx, hy)?;
        let stepper = constant_stepper(cfg, kind, prob.params, &grid, tg.k())?;
        let path = draw_path_indexed(tg.steps(), tg.k(), prob.params.rho_xy, run.seed, 0)?;
        let v = stepper.evolve(&prob.initial_field(&grid)?, &path, tg.steps())?;
        let (mx, my) = path.terminal(tg.steps());
        let err = harness::l2_error(&v, &prob.exact(&grid, mx, my)?)?;
        (v, Some(err))
    } else if kind.is_heston() {
        let prob = cfg.heston_problem()?;
        let grid = prob.grid(hx, hy)?;
        let sub = SubPath::draw(tg.steps(), tg.k(), sub_step_count(tg.k()), prob.params.rho_3, run.seed, 0)?;
        let (init, _) = crate::model::dirac_initial(&grid, prob.x0, prob.y0)?;
        let stepper = Stepper::new(kind, &SpdeModel::Heston(prob.params), &grid, tg.k())?;
        (stepper.evolve(&init, &sub.to_path(), tg.steps())?, None)
    } else {
        return Err(CliError::config(format!(
            "config key `scheme`: {kind} needs node-wise coefficients and is only available through the library"
        )));
    };
    let s = field.summary();
    let summary = SolveSummary {
        scheme: kind,
        n_x: field.grid.n_x,
        n_y: field.grid.n_y,
        steps: tg.steps(),
        k: tg.k(),
        mass: s.mass,
        min: s.min,
        max: s.max,
        argmax: s.argmax,
        l2_norm: field.l2_norm(),
        exact_l2_error: exact_err,
    };
    run.write_with("field.csv", |w| field.write_csv(w))?;
    run.write_json("summary.json", &summary)
}

#[derive(Debug, Serialize)]
struct StabilityReport {
    assumption: stability::AssumptionCheck,
    explicit_cfl_bounds: (f64, f64),
    margins: Option<stability::StabilityMargins>,
    advisory_timestep: Option<f64>,
    sup_moment2: Vec<(SchemeKind, stability::AmplificationReport)>,
}

fn cmd_stability(run: &mut Run) -> CliResult<()> {
    let cfg = run.config;
    let p = cfg.params()?;
    let (hx, hy) = cfg.h()?;
    let k = need(cfg.k, "k")?;
    let lattice = cfg.lattice.unwrap_or(101);
    let kind = match cfg.scheme()? {
        k if k.is_constant() => k,
        other => return Err(CliError::config(format!("config key `scheme`: {other} has no closed-form moment"))),
    };
    let margins = stability::margins(&p).ok();
    let advisory = match margins {
        Some(_) => Some(stability::advisory_timestep(
            &p,
            cfg.horizon.unwrap_or(1.0),
            hx.min(hy),
            cfg.c0.unwrap_or(1.0),
            cfg.beta_exp.unwrap_or(1.0),
        )?),
        None => None,
    };
    let sup = [
        SchemeKind::ExplicitMilstein,
        SchemeKind::ImplicitMilstein,
        SchemeKind::AdiMilstein,
        SchemeKind::SemiImplicitEuler,
    ]
    .into_iter()
    .map(|kd| Ok((kd, stability::sup_moment2(&p, k, hx, hy, kd, lattice)?)))
    .collect::<CliResult<Vec<_>>>()?;
    let report = StabilityReport {
        assumption: stability::check_assumption(&p),
        explicit_cfl_bounds: stability::explicit_cfl_bounds(&p),
        margins,
        advisory_timestep: advisory,
        sup_moment2: sup,
    };
    // rho_x = rho_y on [0, 0.95] against rho_xy on [-1, 1]
    let n = cfg.sweep.unwrap_or(21).max(2);
    let cells: Vec<(f64, f64, f64)> = (0..n)
        .flat_map(|i| {
            let r = 0.95 * i as f64 / (n - 1) as f64;
            (0..n).map(move |j| (r, r, -1.0 + 2.0 * j as f64 / (n - 1) as f64))
        })
        .collect();
    let region = stability::stability_region_sweep(&cells, (p.mu_x, p.mu_y), k, hx, kind, lattice.min(41))?;
    run.write_with("stability.csv", |w| stability::write_region_csv(&region, w))?;
    run.write_json("stability.json", &report)
}

fn cmd_converge(run: &mut Run) -> CliResult<()> {
    let cfg = run.config;
    let kind = cfg.scheme()?;
    let levels = cfg.levels(4)?;
    let paths = cfg.paths()?;
    let (hx, hy) = cfg.h()?;
    let k = need(cfg.k, "k")?;
    let ratio = cfg.k_ratio.unwrap_or(4).max(2) as f64;
    let halve = |h: f64| (0..levels).map(|i| h / 2f64.powi(i as i32)).collect::<Vec<_>>();
    let ks: Vec<f64> = (0..levels).map(|i| k / ratio.powi(i as i32)).collect();
    let default_mode = if kind.is_heston() { "proxy-h" } else { "h" };
    let mode = cfg.mode.as_deref().unwrap_or(default_mode);
    let result = match (mode, kind.is_heston()) {
        ("h", false) => harness::convergence_in_h(kind, &cfg.constant_problem()?, k, &halve(hx), paths, run.seed)?,
        ("k", false) => harness::convergence_in_k(kind, &cfg.constant_problem()?, hx, &ks, paths, run.seed)?,
        ("proxy-h", true) => {
            let hs: Vec<(f64, f64)> = halve(hx).into_iter().zip(halve(hy)).collect();
            harness::proxy_convergence_h(kind, &cfg.heston_problem()?, k, &hs, paths, run.seed)?
        }
        ("proxy-k", true) => harness::proxy_convergence_k(kind, &cfg.heston_problem()?, (hx, hy), &ks, paths, run.seed)?,
        (m, _) => {
            return Err(CliError::config(format!(
                "config key `mode`: `{m}` does not apply to {kind} (constant schemes: h, k; stochastic-volatility schemes: proxy-h, proxy-k)"
            )))
        }
    };
    run.write_with("converge.csv", |w| harness::write_levels_csv(&result.levels, w))?;
    run.write_json("converge.json", &result)
}

fn cmd_diverge(run: &mut Run) -> CliResult<()> {
    let cfg = run.config;
    let kind = cfg.scheme()?;
    if !kind.is_constant() {
        return Err(CliError::config(format!("config key `scheme`: {kind} has no exact solution")));
    }
    let (hx, hy) = cfg.h()?;
    let levels = cfg.levels(5)?;
    let hxs: Vec<f64> = (0..levels).map(|i| hx / 2f64.powi(i as i32)).collect();
    let result = harness::divergence_study(kind, &cfg.constant_problem()?, need(cfg.k, "k")?, &hxs, hy, run.seed)?;
    run.write_with("diverge.csv", |w| harness::write_levels_csv(&result.levels, w))?;
    run.write_json("diverge.json", &result)
}

#[derive(Debug, Serialize)]
struct CostReport {
    rows: Vec<harness::CostRow>,
    /// Time ratio between consecutive levels, per scheme.
    ratios: Vec<(SchemeKind, Vec<f64>)>,
}

fn cmd_cost(run: &mut Run) -> CliResult<()> {
    let cfg = run.config;
    let kinds = match &cfg.schemes {
        Some(list) => list
            .iter()
            .map(|s| {
                s.parse::<SchemeKind>()
                    .map_err(|_| CliError::config(format!("config key `schemes`: unknown scheme `{s}`")))
            })
            .collect::<CliResult<Vec<_>>>()?,
        None => vec![
            SchemeKind::AdiEulerHeston,
            SchemeKind::AdiMilsteinHeston,
            SchemeKind::AdiMilsteinHestonModified,
        ],
    };
    if let Some(bad) = kinds.iter().find(|k| !k.is_heston()) {
        return Err(CliError::config(format!(
            "config key `schemes`: {bad} is not a stochastic-volatility scheme"
        )));
    }
    let (hx, hy) = cfg.h()?;
    let levels = cfg.levels(4)?;
    let rows = harness::cost_study(&kinds, &cfg.heston_problem()?, (hx, hy, need(cfg.k, "k")?), levels, run.seed)?;
    let ratios = kinds
        .iter()
        .map(|&kd| {
            let t: Vec<f64> = rows.iter().filter(|r| r.scheme == kd).map(|r| r.seconds).collect();
            (kd, t.windows(2).map(|w| w[1] / w[0]).collect())
        })
        .collect();
    run.write_with("cost.csv", |w| harness::write_rows_csv(&rows, w))?;
    run.write_json("cost.json", &CostReport { rows, ratios })
}

#[derive(Debug, Serialize)]
struct LevyCheckRow {
    check: &'static str,
    value: f64,
    target: f64,
    pass: bool,
}

fn cmd_levy_check(run: &mut Run) -> CliResult<()> {
    let cfg = run.config;
    let audit = harness::levy_audit(
        cfg.samples.unwrap_or(10_000),
        cfg.k.unwrap_or(0.0625),
        cfg.m_sub.unwrap_or(64),
        cfg.rho_xy.unwrap_or(0.0),
        run.seed,
    )?;
    let rows = [
        LevyCheckRow {
            check: "abel_identity_max_rel",
            value: audit.abel_max_rel,
            target: 1e-12,
            pass: audit.abel_ok(),
        },
        LevyCheckRow {
            check: "mean_over_stderr",
            value: audit.mean_a_xy / audit.mean_stderr,
            target: 4.0,
            pass: audit.mean_ok(),
        },
        LevyCheckRow {
            check: "variance_ratio",
            value: audit.var_a_xy / audit.var_oracle,
            target: 1.0,
            pass: audit.variance_ok(),
        },
    ];
    run.write_with("levy.csv", |w| harness::write_rows_csv(&rows, w))?;
    run.write_json("levy.json", &audit)?;
    if audit.pass() {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_NUMERICAL,
            message: "Levy-area audit failed; see levy.csv".into(),
        })
    }
}
