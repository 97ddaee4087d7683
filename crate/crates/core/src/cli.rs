//! Command-line front end: configuration, subcommands and output files.
//!
//! Exit codes: 0 on success, 1 when the computation or the network is
//! rejected, 2 for unreadable or malformed input and configuration.

use crate::energy::energy_report;
use crate::error::{Error, Result};
use crate::flow::{evolve, Evolution, FlowControls, FlowState, SingularityReport};
use crate::geometry::{is_regular, DiscreteNetwork, NetworkFile, RegularityReport, FLOW_ANGLE_TOL};
use crate::rescale::{
    blowup_uniqueness_experiment, parabolic_rescale_at, rescaled_trajectory, tau_of, BlowupConfig,
};
use crate::shapes;
use crate::stability::{find_shrinker, loja_fit, shrinker_spectrum, LojaConfig, ShrinkerControls};
use crate::topology::validate_topology;
use crate::vec2::Vec2;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "junctionflow", version, about = "Curvature flow of planar triple-junction networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a network file for topological validity and regularity.
    Validate {
        network: PathBuf,
        #[arg(long, default_value_t = FLOW_ANGLE_TOL)]
        angle_tol: f64,
    },
    /// Run the flow and write the trajectory, snapshots and singularity report.
    Simulate(RunArgs),
    /// Simulate, then write Huisken and parabolic rescalings.
    Rescale(RunArgs),
    /// Run the blowup uniqueness experiment.
    Blowup(RunArgs),
    /// Second-variation spectrum at a shrinker.
    Spectrum(RunArgs),
    /// Łojasiewicz exponent fit at a shrinker.
    Loja(RunArgs),
    /// Search for a shrinker near the initial network.
    Shrinker(RunArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub snapshot_stride: Option<usize>,
    /// Initial network JSON file (overrides the configured network).
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub dt_init: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Comma-separated μ values.
    #[arg(long, value_delimiter = ',')]
    pub mu: Option<Vec<f64>>,
    /// Either `start:stop:step` or a comma-separated list.
    #[arg(long)]
    pub tau_grid: Option<String>,
    /// Center as `x,y`.
    #[arg(long, value_parser = parse_point)]
    pub x0: Option<Vec2>,
    #[arg(long = "T")]
    pub big_t: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Circle,
    PerturbedCircle,
    Steiner,
    Theta,
}

/// Initial network: a file or a preset with its shape parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    pub file: Option<PathBuf>,
    pub preset: Preset,
    pub samples: Option<usize>,
    pub radius: f64,
    pub amplitude: f64,
    pub mode: u32,
    /// Half distance between the two junctions of the theta preset.
    pub half_width: f64,
    pub arm_length: f64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            file: None,
            preset: Preset::Circle,
            samples: None,
            radius: 1.0,
            amplitude: 0.05,
            mode: 2,
            half_width: 0.3,
            arm_length: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RescaleConfig {
    pub x0: Option<Vec2>,
    #[serde(rename = "T")]
    pub big_t: Option<f64>,
    /// Empty means nine points spaced 0.25 from `τ(0) + 0.25`.
    pub tau_grid: Vec<f64>,
    pub mu: Vec<f64>,
}

impl Default for RescaleConfig {
    fn default() -> Self {
        Self {
            x0: None,
            big_t: None,
            tau_grid: Vec::new(),
            mu: vec![2.0, 5.0, 10.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub modes: usize,
    pub id: Option<String>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { modes: 7, id: None }
    }
}

/// Everything a run needs; the resolved copy is written next to the outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub snapshot_stride: usize,
    pub t_end: f64,
    pub network: NetworkSpec,
    pub flow: FlowControls,
    pub rescale: RescaleConfig,
    pub blowup: BlowupConfig,
    pub spectrum: SpectrumConfig,
    pub loja: LojaConfig,
    pub shrinker: ShrinkerControls,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            snapshot_stride: 10,
            t_end: 10.0,
            network: NetworkSpec::default(),
            flow: FlowControls::default(),
            rescale: RescaleConfig::default(),
            blowup: BlowupConfig::default(),
            spectrum: SpectrumConfig::default(),
            loja: LojaConfig::default(),
            shrinker: ShrinkerControls::default(),
        }
    }
}

fn parse_point(s: &str) -> std::result::Result<Vec2, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [x, y] = parts.as_slice() else {
        return Err(format!("expected `x,y`, got {s:?}"));
    };
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad number {v:?}"));
    Ok(Vec2::new(num(x)?, num(y)?))
}

fn parse_tau_grid(s: &str) -> Result<Vec<f64>> {
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("bad number {v:?} in τ grid")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0) {
            return Err(Error::Config("τ grid step must be positive".into()));
        }
        let n = ((b - a) / h + 1e-9).floor();
        if !(n >= 0.0) {
            return Err(Error::Config("τ grid stop precedes start".into()));
        }
        return Ok((0..=n as usize).map(|k| a + k as f64 * h).collect());
    }
    s.split(',').filter(|v| !v.trim().is_empty()).map(num).collect()
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Applies command-line overrides.
    pub fn apply(&mut self, args: &RunArgs) -> Result<()> {
        if let Some(s) = args.seed {
            self.seed = s;
        }
        if let Some(s) = args.snapshot_stride {
            self.snapshot_stride = s;
        }
        if let Some(p) = &args.network {
            self.network.file = Some(p.clone());
        }
        if let Some(p) = args.preset {
            self.network.preset = p;
            if args.network.is_none() {
                self.network.file = None;
            }
        }
        if let Some(v) = args.dt_init {
            self.flow.dt_init = v;
            self.blowup.flow.dt_init = v;
        }
        if let Some(v) = args.t_end {
            self.t_end = v;
            self.blowup.t_end = v;
        }
        if let Some(v) = &args.mu {
            self.rescale.mu = v.clone();
        }
        if let Some(g) = &args.tau_grid {
            self.rescale.tau_grid = parse_tau_grid(g)?;
        }
        if let Some(x0) = args.x0 {
            self.rescale.x0 = Some(x0);
            self.blowup.x0 = Some(x0);
        }
        if let Some(t) = args.big_t {
            self.rescale.big_t = Some(t);
            self.blowup.big_t = Some(t);
        }
        self.flow.snapshot_stride = self.snapshot_stride;
        self.loja.seed = self.seed;
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t_end", self.t_end),
            ("flow.dt_init", self.flow.dt_init),
            ("flow.dt_min", self.flow.dt_min),
            ("flow.dt_max", self.flow.dt_max),
            ("flow.cfl", self.flow.cfl),
            ("flow.angle_tol", self.flow.angle_tol),
            ("flow.thresholds.edge_collapse_rel", self.flow.thresholds.edge_collapse_rel),
            ("flow.thresholds.curvature_max", self.flow.thresholds.curvature_max),
            ("blowup.tolerance", self.blowup.tolerance),
            ("blowup.tau_step", self.blowup.tau_step),
            ("blowup.tau_offset", self.blowup.tau_offset),
            ("shrinker.tol", self.shrinker.tol),
            ("loja.amplitude_min", self.loja.amplitude_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Config("snapshot_stride must be at least 1".into()));
        }
        if self.rescale.tau_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("τ grid must be strictly increasing".into()));
        }
        if self.rescale.mu.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::Config("μ values must be positive".into()));
        }
        Ok(())
    }

    pub fn initial_network(&self) -> Result<DiscreteNetwork> {
        let s = &self.network;
        if let Some(path) = &s.file {
            return read_network(path)?;
        }
        Ok(match s.preset {
            Preset::Circle => shapes::circle(s.radius, s.samples.unwrap_or(257)),
            Preset::PerturbedCircle => shapes::perturbed_circle(s.radius, s.amplitude, s.mode, s.samples.unwrap_or(257)),
            Preset::Steiner => shapes::steiner_triod(s.arm_length, s.samples.unwrap_or(33)),
            Preset::Theta => shapes::symmetric_theta(s.half_width, s.samples.unwrap_or(81)),
        })
    }
}

/// Reads a network file. The outer error covers unreadable or malformed
/// files, the inner one networks that parse but are invalid.
pub fn read_network(path: &Path) -> Result<Result<DiscreteNetwork>> {
    let text = fs::read_to_string(path)?;
    let file: NetworkFile =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(validate_topology(&file.topology).and_then(|topo| DiscreteNetwork::new(topo, file.edges)))
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Config(_) => 2,
        _ => 1,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn prepare(args: &RunArgs) -> Result<(ExperimentConfig, DiscreteNetwork)> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(args)?;
    fs::create_dir_all(&args.out)?;
    let resolved = toml::to_string(&cfg).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(args.out.join("config.resolved.toml"), resolved)?;
    let net = cfg.initial_network()?;
    write_json(&args.out.join("initial.json"), &net)?;
    Ok((cfg, net))
}

#[derive(Serialize)]
struct ValidationReport {
    valid: bool,
    regular: bool,
    error: Option<String>,
    n_edges: Option<usize>,
    n_junctions: Option<usize>,
    regularity: Option<RegularityReport>,
}

fn cmd_validate(path: &Path, angle_tol: f64) -> Result<i32> {
    let parsed = read_network(path)?;
    let mut report = ValidationReport {
        valid: false,
        regular: false,
        error: None,
        n_edges: None,
        n_junctions: None,
        regularity: None,
    };
    match parsed {
        Err(e) => report.error = Some(format!("{e:?}")),
        Ok(net) => {
            report.valid = true;
            report.n_edges = Some(net.n_edges());
            report.n_junctions = Some(net.topology().n_junctions());
            match is_regular(&net, angle_tol) {
                Ok(r) => {
                    report.regular = r.regular;
                    report.regularity = Some(r);
                }
                Err(e) => report.error = Some(format!("{e:?}")),
            }
        }
    }
    if report.valid && report.regular {
        println!("{}: valid regular network", path.display());
    } else {
        println!(
            "{}: rejected ({})",
            path.display(),
            report.error.as_deref().unwrap_or("not regular")
        );
    }
    println!("{}", serde_json::to_string(&report).map_err(|e| Error::Io(e.to_string()))?);
    Ok(if report.valid && report.regular { 0 } else { 1 })
}

fn simulate(cfg: &ExperimentConfig, net: DiscreteNetwork, out: &Path) -> Result<Evolution> {
    let ev = evolve(FlowState::new(net)?, cfg.t_end, &cfg.flow)?;
    let mut csv = fs::File::create(out.join("trajectory.csv"))?;
    ev.trajectory.write_csv(&mut csv)?;
    csv.flush()?;
    let dir = out.join("snapshots");
    fs::create_dir_all(&dir)?;
    for (i, s) in ev.trajectory.snapshots.iter().enumerate() {
        write_json(&dir.join(format!("snapshot_{i:05}.json")), s)?;
    }
    write_json(&out.join("final.json"), &ev.final_state.net)?;
    write_json(&out.join("singularity.json"), &ev.report)?;
    Ok(ev)
}

fn describe(report: &SingularityReport) -> String {
    if report.detected {
        format!("singularity at t ≈ {} ({:?})", report.t_est, report.cause)
    } else {
        format!("no singularity up to t = {}", report.t_est)
    }
}

#[derive(Serialize)]
struct IdentityCheck {
    mu: f64,
    tau: f64,
    max_difference: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct RescaleReport {
    #[serde(rename = "T")]
    big_t: f64,
    x0: Vec2,
    tau_grid: Vec<f64>,
    identity: Vec<IdentityCheck>,
}

fn cmd_rescale(cfg: &ExperimentConfig, net: DiscreteNetwork, out: &Path) -> Result<i32> {
    let ev = simulate(cfg, net, out)?;
    println!("{}", describe(&ev.report));
    let traj = &ev.trajectory;
    let big_t = match cfg.rescale.big_t {
        Some(t) => t,
        None if ev.report.detected => ev.report.t_est,
        None => return Err(Error::NoSingularity),
    };
    let x0 = match cfg.rescale.x0 {
        Some(x) => x,
        None => crate::rescale::max_curvature_point(&traj.snapshots.last().expect("nonempty").net)?,
    };
    let taus = if cfg.rescale.tau_grid.is_empty() {
        let t0 = tau_of(traj.t_range().map_or(0.0, |r| r.0), big_t);
        (1..=9).map(|k| t0 + 0.25 * k as f64).collect()
    } else {
        cfg.rescale.tau_grid.clone()
    };
    let states = rescaled_trajectory(traj, x0, big_t, &taus)?;
    let dir = out.join("rescaled");
    fs::create_dir_all(&dir)?;
    let mut csv = fs::File::create(out.join("rescaled.csv"))?;
    writeln!(csv, "tau,energy,gradient_norm,length,max_residual")?;
    for (i, s) in states.iter().enumerate() {
        let r = energy_report(&s.net)?;
        writeln!(csv, "{},{},{},{},{}", s.tau, r.energy, r.gradient_norm, r.length, r.max_residual)?;
        write_json(&dir.join(format!("rescaled_{i:03}.json")), s)?;
    }
    let identity = cfg
        .rescale
        .mu
        .iter()
        .map(|&mu| {
            let tau = (mu * 2f64.sqrt()).ln();
            let check = parabolic_rescale_at(traj, -0.5, mu, x0, big_t).and_then(|p| {
                let h = rescaled_trajectory(traj, x0, big_t, &[tau])?;
                write_json(&out.join(format!("parabolic_mu_{mu}.json")), &p.net)?;
                p.net.c0_distance(&h[0].net)
            });
            match check {
                Ok(d) => IdentityCheck {
                    mu,
                    tau,
                    max_difference: Some(d),
                    error: None,
                },
                Err(e) => IdentityCheck {
                    mu,
                    tau,
                    max_difference: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    write_json(
        &out.join("rescale.json"),
        &RescaleReport {
            big_t,
            x0,
            tau_grid: taus,
            identity,
        },
    )?;
    Ok(0)
}

fn cmd_blowup(cfg: &ExperimentConfig, net: DiscreteNetwork, out: &Path) -> Result<i32> {
    let mut bcfg = cfg.blowup.clone();
    bcfg.flow.snapshot_stride = cfg.snapshot_stride.min(bcfg.flow.snapshot_stride);
    let report = blowup_uniqueness_experiment(&net, &bcfg)?;
    let mut csv = fs::File::create(out.join("energy_trace.csv"))?;
    writeln!(csv, "sequence,tau,energy,gradient_norm")?;
    for s in &report.energy_trace {
        writeln!(csv, "{},{},{},{}", s.sequence, s.tau, s.energy, s.gradient_norm)?;
    }
    write_json(&out.join("uniqueness.json"), &report)?;
    println!("T ≈ {}, verdict: {}", report.t_est, report.verdict);
    Ok(0)
}

fn cmd_spectrum(cfg: &ExperimentConfig, net: DiscreteNetwork, out: &Path) -> Result<i32> {
    let id = cfg
        .spectrum
        .id
        .clone()
        .unwrap_or_else(|| format!("{:?}", cfg.network.preset).to_lowercase());
    let report = shrinker_spectrum(&net, cfg.spectrum.modes, &id)?;
    write_json(&out.join("spectrum.json"), &report)?;
    println!("eigenvalues: {:?}", report.eigenvalues);
    Ok(0)
}

fn cmd_loja(cfg: &ExperimentConfig, net: DiscreteNetwork, out: &Path) -> Result<i32> {
    let fit = loja_fit(&net, &cfg.loja)?;
    let mut csv = fs::File::create(out.join("loja_samples.csv"))?;
    writeln!(csv, "direction,amplitude,delta_energy,gradient_norm")?;
    for s in &fit.samples {
        writeln!(csv, "{},{},{},{}", s.direction, s.amplitude, s.delta_energy, s.gradient_norm)?;
    }
    write_json(&out.join("loja.json"), &fit)?;
    println!("θ ≈ {} (R² = {})", fit.theta, fit.r_squared);
    Ok(0)
}

fn cmd_shrinker(cfg: &ExperimentConfig, net: DiscreteNetwork, out: &Path) -> Result<i32> {
    let search = find_shrinker(&net, &cfg.shrinker)?;
    let mut csv = fs::File::create(out.join("shrinker_history.csv"))?;
    writeln!(csv, "iteration,gradient_norm")?;
    for (i, g) in search.history.iter().enumerate() {
        writeln!(csv, "{i},{g}")?;
    }
    write_json(&out.join("shrinker.json"), &search)?;
    println!(
        "{} after {} iterations, gradient norm {:e}",
        if search.converged { "converged" } else { "not converged" },
        search.iterations,
        search.history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(if search.converged { 0 } else { 1 })
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Validate { network, angle_tol } => cmd_validate(&network, angle_tol),
        Command::Simulate(args) => {
            let (cfg, net) = prepare(&args)?;
            let ev = simulate(&cfg, net, &args.out)?;
            println!("{}", describe(&ev.report));
            Ok(0)
        }
        Command::Rescale(args) => {
            let (cfg, net) = prepare(&args)?;
            cmd_rescale(&cfg, net, &args.out)
        }
        Command::Blowup(args) => {
            let (cfg, net) = prepare(&args)?;
            cmd_blowup(&cfg, net, &args.out)
        }
        Command::Spectrum(args) => {
            let (cfg, net) = prepare(&args)?;
            cmd_spectrum(&cfg, net, &args.out)
        }
        Command::Loja(args) => {
            let (cfg, net) = prepare(&args)?;
            cmd_loja(&cfg, net, &args.out)
        }
        Command::Shrinker(args) => {
            let (cfg, net) = prepare(&args)?;
            cmd_shrinker(&cfg, net, &args.out)
        }
    }
}
