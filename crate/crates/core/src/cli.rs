//! The `mimqnd` command-line frontend.
//!
//! Exit codes: 0 success, 1 invalid input (bad flags, config, CSV or
//! parameter values), 2 numerical failure (fit did not converge, singular
//! formula, infeasible optimization). Errors go to stderr.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cavity::{self, Membrane};
use crate::cooling::{fit_psd, PsdFit, PsdFitConfig};
use crate::error::{domain, Error, Result};
use crate::jumpsim::{self, DetectionStats, DwellStats, ReadoutModel, ReadoutTrace};
use crate::mechanics::{self, OscillatorParams};
use crate::output::{self, Metadata};
use crate::params::{load_config, ExperimentParams, MembraneSpec, ParamName, DEFAULT_CAVITY_LENGTH};
use crate::qnd::{self, ConsistencyRatios, GeneralSnr, QndBudget};
use crate::sweep::{self, Scale, SweepAxis};

/// Wavelength used when neither a config nor `--lambda` is given, m.
const DEFAULT_WAVELENGTH: f64 = 1.064e-6;

#[derive(Debug, Parser)]
#[command(
    name = "mimqnd",
    version,
    about = "Membrane-in-the-middle cavity optomechanics toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dispersive cavity bands versus membrane displacement (CSV).
    Bandstructure(BandArgs),
    /// Transfer-matrix transmission versus detuning and displacement (CSV).
    TransmissionMap(MapArgs),
    /// Fit an optical ringdown trace with columns t_s,power (JSON).
    RingdownFit(RingdownArgs),
    /// Fit a mechanical amplitude ringdown with columns t_s,amplitude (JSON).
    MechRingdownFit(MechArgs),
    /// Fit a displacement PSD with columns freq_hz,psd_m2_per_hz (JSON).
    CoolFit(CoolArgs),
    /// QND phonon-jump budget for a parameter file (JSON).
    QndBudget(BudgetArgs),
    /// Simulate one phonon-number trajectory, optionally with readout (CSV).
    JumpSim(JumpSimArgs),
    /// Ensemble statistics of simulated jumps against the budget (JSON).
    JumpStats(JumpStatsArgs),
    /// Grid sweep and SNR maximization over 1 to 3 parameters (CSV, JSON).
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct OpticsArgs {
    /// Parameter file supplying r_c, L, lambda and F.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Membrane field reflectivity (overrides the config).
    #[arg(long)]
    rc: Option<f64>,
    /// Cavity length, m.
    #[arg(long)]
    length: Option<f64>,
    /// Laser wavelength, m.
    #[arg(long)]
    lambda: Option<f64>,
}

struct Optics {
    r_c: Option<f64>,
    length: f64,
    wavelength: f64,
    finesse: Option<f64>,
    params: Option<ExperimentParams>,
}

impl OpticsArgs {
    fn resolve(&self) -> Result<Optics> {
        let params = self.config.as_ref().map(load_config).transpose()?;
        Ok(Optics {
            r_c: self.rc.or(params.map(|p| p.r_c)),
            length: self
                .length
                .or(params.map(|p| p.length))
                .unwrap_or(DEFAULT_CAVITY_LENGTH),
            wavelength: self
                .lambda
                .or(params.map(|p| p.wavelength))
                .unwrap_or(DEFAULT_WAVELENGTH),
            finesse: params.map(|p| p.finesse),
            params,
        })
    }
}

impl Optics {
    fn metadata(&self, command: &str) -> Metadata {
        let mut meta = Metadata::new(command);
        if let Some(p) = &self.params {
            meta = meta.with_params(p);
        }
        if let Some(r) = self.r_c {
            meta.set_f64("r_c", r);
        }
        meta.set_f64("L", self.length);
        meta.set_f64("lambda", self.wavelength);
        meta
    }
}

#[derive(Debug, Args)]
struct BandArgs {
    #[command(flatten)]
    optics: OpticsArgs,
    /// Start of the displacement range, m.
    #[arg(long, default_value_t = 0.0)]
    x_min: f64,
    /// End of the displacement range, m [default: lambda].
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long, default_value_t = 201)]
    samples: usize,
    #[arg(long, default_value_t = 4)]
    bands: usize,
    /// Output file [default: stdout].
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MapArgs {
    #[command(flatten)]
    optics: OpticsArgs,
    /// Cavity finesse (overrides the config).
    #[arg(long)]
    finesse: Option<f64>,
    /// Model the membrane as a dielectric slab of this index.
    #[arg(long, requires = "membrane_thickness")]
    membrane_index: Option<f64>,
    /// Slab thickness, m.
    #[arg(long, requires = "membrane_index")]
    membrane_thickness: Option<f64>,
    /// Detuning range start, rad/s [default: 0].
    #[arg(long, default_value_t = 0.0)]
    det_min: f64,
    /// Detuning range end, rad/s [default: two free spectral ranges].
    #[arg(long)]
    det_max: Option<f64>,
    #[arg(long, default_value_t = 401)]
    det_count: usize,
    #[arg(long, default_value_t = 0.0)]
    x_min: f64,
    /// Displacement range end, m [default: lambda/2].
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long, default_value_t = 101)]
    x_count: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RingdownArgs {
    /// CSV with columns t_s,power.
    #[arg(long)]
    input: PathBuf,
    /// Ignore samples before this time, s.
    #[arg(long)]
    switch_off: Option<f64>,
    /// Cavity length used to convert the fitted time to a finesse, m.
    #[arg(long, default_value_t = DEFAULT_CAVITY_LENGTH)]
    length: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MechArgs {
    /// CSV with columns t_s,amplitude.
    #[arg(long)]
    input: PathBuf,
    /// Mechanical angular frequency, rad/s.
    #[arg(long)]
    omega_m: f64,
    /// Motional mass, kg; adds the spring constant to the report.
    #[arg(long)]
    mass: Option<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CoolArgs {
    /// CSV with columns freq_hz,psd_m2_per_hz.
    #[arg(long)]
    input: PathBuf,
    /// Parameter file supplying m, omega_m, Q and T.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    omega_m: Option<f64>,
    /// Intrinsic mechanical quality factor.
    #[arg(long)]
    q: Option<f64>,
    /// Bath temperature, K.
    #[arg(long)]
    t_bath: Option<f64>,
    /// Exclude a band LO:HI (Hz) from the fit; repeatable.
    #[arg(long, value_parser = parse_mask)]
    mask: Vec<(f64, f64)>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BudgetArgs {
    #[arg(long)]
    config: PathBuf,
    /// Also report the thermal-only SNR for a jump out of level N.
    #[arg(long)]
    general_n: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct JumpSimArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simulated time, s.
    #[arg(long)]
    duration: f64,
    /// Leave out the measurement-induced 0→2 and 0→1 channels.
    #[arg(long)]
    thermal_only: bool,
    /// Stop after this many events; the output is then marked truncated.
    #[arg(long, default_value_t = 1_000_000)]
    max_events: usize,
    /// Readout bin width, s; enables the readout CSV.
    #[arg(long, requires = "readout")]
    bin_width: Option<f64>,
    /// Readout CSV path.
    #[arg(long, requires = "bin_width")]
    readout: Option<PathBuf>,
    /// Seed of the readout noise [default: seed + 1].
    #[arg(long)]
    readout_seed: Option<u64>,
    /// Trajectory CSV [default: stdout].
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct JumpStatsArgs {
    #[arg(long)]
    config: PathBuf,
    /// Base seed; trajectory i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    trajectories: usize,
    /// Length of each ground-state-prepared window, in units of τ^(0).
    #[arg(long, default_value_t = 5.0)]
    window: f64,
    #[arg(long)]
    thermal_only: bool,
    /// Readout bin width, s; with --threshold adds detection statistics.
    #[arg(long, requires = "threshold")]
    bin_width: Option<f64>,
    /// Detection threshold, rad/s, between the n=0 and n=1 levels.
    #[arg(long, requires = "bin_width")]
    threshold: Option<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// PARAM:MIN:MAX:COUNT[:lin|log], optionally followed by co-set
    /// parameters ",PARAM:START:END[:lin|log]". Repeat for up to 3 axes.
    #[arg(long, required = true)]
    axis: Vec<String>,
    /// Refine the best grid point by coordinate-wise golden-section search.
    #[arg(long)]
    maximize: bool,
    #[arg(long, default_value_t = 20)]
    refine_iters: usize,
    /// Best-point JSON path.
    #[arg(long)]
    best: Option<PathBuf>,
    /// Sweep CSV [default: stdout].
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_mask(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad number '{lo}'"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad number '{hi}'"))?;
    if !(lo < hi) {
        return Err("mask needs LO < HI".into());
    }
    Ok((lo, hi))
}

fn parse_param(key: &str) -> Result<ParamName> {
    ParamName::from_key(key.trim()).ok_or_else(|| domain(format!("unknown parameter '{key}'")))
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| domain(format!("cannot parse '{s}' as a number")))
}

fn parse_scale(s: Option<&&str>) -> Result<Scale> {
    match s {
        None => Ok(Scale::Linear),
        Some(s) => Scale::parse(s.trim()).ok_or_else(|| domain(format!("unknown scale '{s}'"))),
    }
}

/// Parses `PARAM:MIN:MAX:COUNT[:scale][,PARAM:START:END[:scale]]...`.
pub fn parse_axis(spec: &str) -> Result<SweepAxis> {
    let mut parts = spec.split(',');
    let head: Vec<&str> = parts.next().unwrap_or_default().split(':').collect();
    if !(4..=5).contains(&head.len()) {
        return Err(domain(format!(
            "axis '{spec}': expected PARAM:MIN:MAX:COUNT[:lin|log]"
        )));
    }
    let count: usize = head[3]
        .trim()
        .parse()
        .map_err(|_| domain(format!("axis '{spec}': bad count '{}'", head[3])))?;
    let mut axis = SweepAxis::new(
        parse_param(head[0])?,
        parse_num(head[1])?,
        parse_num(head[2])?,
        count,
        parse_scale(head.get(4))?,
    )?;
    for link in parts {
        let f: Vec<&str> = link.split(':').collect();
        if !(3..=4).contains(&f.len()) {
            return Err(domain(format!(
                "linked parameter '{link}': expected PARAM:START:END[:lin|log]"
            )));
        }
        axis = axis.with_link(
            parse_param(f[0])?,
            parse_num(f[1])?,
            parse_num(f[2])?,
            parse_scale(f.get(3))?,
        )?;
    }
    Ok(axis)
}

fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Runs the tool on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Bandstructure(a) => bandstructure(a),
        Command::TransmissionMap(a) => transmission_map(a),
        Command::RingdownFit(a) => ringdown_fit(a),
        Command::MechRingdownFit(a) => mech_ringdown_fit(a),
        Command::CoolFit(a) => cool_fit(a),
        Command::QndBudget(a) => qnd_budget(a),
        Command::JumpSim(a) => jump_sim(a),
        Command::JumpStats(a) => jump_stats(a),
        Command::Sweep(a) => sweep_cmd(a),
    }
}

fn bandstructure(a: BandArgs) -> Result<()> {
    let optics = a.optics.resolve()?;
    let r_c = optics
        .r_c
        .ok_or_else(|| domain("bandstructure needs --rc or --config"))?;
    let x_max = a.x_max.unwrap_or(optics.wavelength);
    let bands = cavity::band_structure(
        r_c,
        optics.length,
        optics.wavelength,
        (a.x_min, x_max),
        a.samples,
        a.bands,
    )?;
    let mut meta = optics.metadata("bandstructure");
    meta.set_f64("x_min", a.x_min);
    meta.set_f64("x_max", x_max);
    meta.set_f64("omega_fsr", bands.omega_fsr);
    write_output(a.output.as_deref(), &output::band_structure_csv(&bands, &meta))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(domain("grid needs at least one point"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect())
}

fn transmission_map(a: MapArgs) -> Result<()> {
    let optics = a.optics.resolve()?;
    let finesse = a
        .finesse
        .or(optics.finesse)
        .ok_or_else(|| domain("transmission-map needs --finesse or --config"))?;
    let membrane = match (a.membrane_index, a.membrane_thickness) {
        (Some(n_index), Some(thickness)) => {
            let spec = MembraneSpec { n_index, thickness };
            spec.validate().map_err(Error::Domain)?;
            Membrane::Slab(spec)
        }
        _ => Membrane::Sheet {
            r_c: optics
                .r_c
                .ok_or_else(|| domain("transmission-map needs --rc, --config or a membrane slab"))?,
        },
    };
    let fsr = cavity::free_spectral_range(optics.length);
    let det = linspace(a.det_min, a.det_max.unwrap_or(2.0 * fsr), a.det_count)?;
    let xs = linspace(a.x_min, a.x_max.unwrap_or(optics.wavelength / 2.0), a.x_count)?;
    let map = cavity::transmission_map(membrane, finesse, optics.length, optics.wavelength, &det, &xs)?;
    let mut meta = optics.metadata("transmission-map");
    meta.set_f64("F", finesse);
    match membrane {
        Membrane::Sheet { .. } => meta.set("membrane", "sheet"),
        Membrane::Slab(s) => {
            meta.set("membrane", "slab");
            meta.set_f64("n_index", s.n_index);
            meta.set_f64("thickness", s.thickness);
        }
    }
    write_output(a.output.as_deref(), &output::transmission_map_csv(&map, &meta))
}

#[derive(Serialize)]
struct RingdownReport {
    tau: f64,
    amplitude: f64,
    offset: f64,
    residual_rms: f64,
    finesse: f64,
    samples_used: usize,
}

fn ringdown_fit(a: RingdownArgs) -> Result<()> {
    let cols = output::read_columns(&a.input, &["t_s", "power"])?;
    let fit = cavity::fit_ringdown(&cols[0], &cols[1], a.switch_off)?;
    let finesse = cavity::finesse_ringdown(fit.fitted_tau, cavity::Conversion::TauToFinesse, a.length)?;
    let mut meta = Metadata::new("ringdown-fit");
    meta.set("input", a.input.display());
    meta.set_f64("L", a.length);
    if let Some(t0) = a.switch_off {
        meta.set_f64("switch_off", t0);
    }
    let report = RingdownReport {
        tau: fit.fitted_tau,
        amplitude: fit.fitted_amplitude,
        offset: fit.fitted_offset,
        residual_rms: fit.residual_rms,
        finesse,
        samples_used: fit.t_samples.len(),
    };
    write_output(a.output.as_deref(), &output::json_report(&meta, &report)?)
}

#[derive(Serialize)]
struct MechReport {
    tau: f64,
    amplitude: f64,
    residual_rms: f64,
    q: f64,
    spring_constant: Option<f64>,
}

fn mech_ringdown_fit(a: MechArgs) -> Result<()> {
    if !(a.omega_m > 0.0) {
        return Err(domain("--omega-m must be > 0"));
    }
    let cols = output::read_columns(&a.input, &["t_s", "amplitude"])?;
    let fit = mechanics::fit_mech_ringdown(&cols[0], &cols[1])?;
    let mut meta = Metadata::new("mech-ringdown-fit");
    meta.set("input", a.input.display());
    meta.set_f64("omega_m", a.omega_m);
    let report = MechReport {
        tau: fit.tau,
        amplitude: fit.amplitude,
        residual_rms: fit.residual_rms,
        q: mechanics::q_from_ringdown(fit.tau, a.omega_m),
        spring_constant: a.mass.map(|m| mechanics::spring_constant(m, a.omega_m)),
    };
    write_output(a.output.as_deref(), &output::json_report(&meta, &report)?)
}

fn cool_fit(a: CoolArgs) -> Result<()> {
    let params = a.config.as_ref().map(load_config).transpose()?;
    let need = |flag: Option<f64>, from: Option<f64>, name: &str| {
        flag.or(from)
            .ok_or_else(|| domain(format!("cool-fit needs --{name} or --config")))
    };
    let mass = need(a.mass, params.map(|p| p.mass), "mass")?;
    let omega_m = need(a.omega_m, params.map(|p| p.omega_m), "omega-m")?;
    let q = need(a.q, params.map(|p| p.q), "q")?;
    let t_bath = need(a.t_bath, params.map(|p| p.temperature), "t-bath")?;
    let cfg = PsdFitConfig {
        oscillator: OscillatorParams::new(mass, omega_m, q)?,
        t_bath,
        masks: a.mask.clone(),
    };
    let cols = output::read_columns(&a.input, &["freq_hz", "psd_m2_per_hz"])?;
    let trace = fit_psd(&cols[0], &cols[1], &cfg)?;
    let fit: PsdFit = trace
        .fit
        .ok_or_else(|| Error::Estimation("fit produced no result".into()))?;
    let mut meta = Metadata::new("cool-fit");
    meta.set("input", a.input.display());
    meta.set_f64("m", mass);
    meta.set_f64("omega_m", omega_m);
    meta.set_f64("Q", q);
    meta.set_f64("T", t_bath);
    for (lo, hi) in &a.mask {
        meta.set(
            "mask_hz",
            format!("{}:{}", output::fmt_f64(*lo), output::fmt_f64(*hi)),
        );
    }
    write_output(a.output.as_deref(), &output::json_report(&meta, &fit)?)
}

#[derive(Serialize)]
struct BudgetReport {
    input: ExperimentParams,
    #[serde(flatten)]
    budget: QndBudget,
    all_flags: bool,
    consistency: ConsistencyRatios,
    #[serde(skip_serializing_if = "Option::is_none")]
    general_n: Option<GeneralSnr>,
}

fn qnd_budget(a: BudgetArgs) -> Result<()> {
    let p = load_config(&a.config)?;
    let budget = qnd::jump_budget(&p)?;
    let report = BudgetReport {
        input: p,
        budget,
        all_flags: budget.flags.all(),
        consistency: qnd::consistency_ratios(&p)?,
        general_n: a.general_n.map(|n| qnd::snr_general_n(n, &p)).transpose()?,
    };
    let meta = Metadata::new("qnd-budget").with_params(&p);
    write_output(a.output.as_deref(), &output::json_report(&meta, &report)?)
}

fn jump_sim(a: JumpSimArgs) -> Result<()> {
    let p = load_config(&a.config)?;
    let channels = !a.thermal_only;
    let traj = jumpsim::simulate_trajectory_capped(&p, a.duration, a.seed, channels, a.max_events)?;
    let mut meta = Metadata::new("jump-sim").with_params(&p).with_seed(a.seed);
    meta.set("rng", jumpsim::RNG_ALGORITHM);
    meta.set("measurement_channels", channels);
    meta.set_f64("duration_requested", a.duration);
    meta.set_f64("duration_simulated", traj.duration);
    meta.set("truncated", traj.truncated);
    if traj.truncated {
        eprintln!(
            "warning: stopped after {} events at t = {} s (see --max-events)",
            traj.events.len(),
            traj.duration
        );
    }
    write_output(a.output.as_deref(), &output::trajectory_csv(&traj, &meta))?;
    if let (Some(bin), Some(path)) = (a.bin_width, a.readout.as_deref()) {
        let readout_seed = a.readout_seed.unwrap_or(a.seed.wrapping_add(1));
        let model = ReadoutModel::from_params(&p)?;
        let trace = jumpsim::binned_readout(&traj, &model, bin, readout_seed)?;
        if trace.short_bins {
            eprintln!(
                "warning: bin_width·omega_m < {}; secular readout model is marginal",
                jumpsim::MIN_BIN_PHASE
            );
        }
        meta.set("readout_seed", readout_seed);
        meta.set_f64("bin_width", bin);
        meta.set_f64("delta_omega", model.delta_omega);
        meta.set_f64("s_omega", model.s_omega);
        meta.set("short_bins", trace.short_bins);
        write_output(Some(path), &output::readout_csv(&trace, &meta))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct JumpStatsReport {
    trajectories: usize,
    window_s: f64,
    tau_total: f64,
    dwell_ground: DwellStats,
    /// Empirical mean dwell over τ^(0).
    dwell_ratio: Option<f64>,
    /// (empirical rate − 1/τ^(0)) in standard errors.
    rate_z_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detection: Option<DetectionStats>,
}

fn jump_stats(a: JumpStatsArgs) -> Result<()> {
    let p = load_config(&a.config)?;
    if !(a.window > 0.0) || a.trajectories == 0 {
        return Err(domain("--window must be > 0 and --trajectories >= 1"));
    }
    let channels = !a.thermal_only;
    let rates = jumpsim::JumpRates::from_params(&p, channels)?;
    let tau_total = 1.0 / rates.total_out(0);
    let window = a.window * tau_total;
    let ens = jumpsim::simulate_ensemble(&p, window, a.seed, a.trajectories, channels)?;
    let dwell = jumpsim::dwell_stats(&ens, 0);
    let detection = match (a.bin_width, a.threshold) {
        (Some(bin), Some(threshold)) => {
            let model = ReadoutModel::from_params(&p)?;
            let mut freq = Vec::new();
            let mut true_n = Vec::new();
            for (i, traj) in ens.iter().enumerate() {
                // readout noise streams are offset from the trajectory seeds
                let seed = jumpsim::ensemble_seed(a.seed, (a.trajectories + i) as u64);
                let t = jumpsim::binned_readout(traj, &model, bin, seed)?;
                freq.extend(t.freq_estimates);
                true_n.extend(t.true_n_per_bin);
            }
            let pooled = ReadoutTrace {
                bin_width: bin,
                bin_centers: Vec::new(),
                freq_estimates: freq,
                true_n_per_bin: true_n,
                model,
                seed: a.seed,
                short_bins: bin * model.omega_m < jumpsim::MIN_BIN_PHASE,
            };
            Some(jumpsim::jump_detection_stats(&pooled, threshold)?)
        }
        _ => None,
    };
    let report = JumpStatsReport {
        trajectories: a.trajectories,
        window_s: window,
        tau_total,
        dwell_ratio: dwell.mean_dwell.map(|d| d / tau_total),
        rate_z_score: dwell
            .exit_rate()
            .zip(dwell.rate_std_error)
            .map(|(r, se)| (r - 1.0 / tau_total) / se),
        dwell_ground: dwell,
        detection,
    };
    let mut meta = Metadata::new("jump-stats").with_params(&p).with_seed(a.seed);
    meta.set("rng", jumpsim::RNG_ALGORITHM);
    meta.set("measurement_channels", channels);
    write_output(a.output.as_deref(), &output::json_report(&meta, &report)?)
}

#[derive(Serialize)]
struct BestReport {
    refined: bool,
    params: ExperimentParams,
    budget: QndBudget,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_index: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    position: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coarse_snr: Option<f64>,
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    let p = load_config(&a.config)?;
    let axes = a.axis.iter().map(|s| parse_axis(s)).collect::<Result<Vec<_>>>()?;
    let grid = sweep::grid_sweep(&p, &axes)?;
    let mut meta = Metadata::new("sweep").with_params(&p);
    for (k, spec) in a.axis.iter().enumerate() {
        meta.set(&format!("axis_{k}"), spec);
    }
    write_output(a.output.as_deref(), &output::sweep_csv(&grid, &meta))?;
    let best = if a.maximize {
        let opt = sweep::maximize_snr(&p, &axes, a.refine_iters)?;
        Some(BestReport {
            refined: true,
            params: opt.params,
            budget: opt.budget,
            grid_index: None,
            position: Some(opt.position),
            coarse_snr: Some(opt.coarse_snr),
        })
    } else {
        grid.best_point().map(|pt| BestReport {
            refined: false,
            params: pt.params,
            budget: pt.budget.expect("best point has a budget"),
            grid_index: Some(pt.index.clone()),
            position: None,
            coarse_snr: None,
        })
    };
    if let Some(path) = a.best.as_deref() {
        let best =
            best.ok_or_else(|| Error::Infeasible("no grid point satisfies every validity flag".into()))?;
        meta.set("refine_iters", a.refine_iters);
        write_output(Some(path), &output::json_report(&meta, &best)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn axis_spec_parsing() {
        let a = parse_axis("F:3e5:6e5:2:log,P_in:1e-5:1e-6:log,r_c:0.999:0.9999").unwrap();
        assert_eq!(a.param, ParamName::Finesse);
        assert_eq!(a.count, 2);
        assert_eq!(a.scale, Scale::Log);
        assert_eq!(a.linked.len(), 2);
        assert_eq!(a.linked[1].scale, Scale::Linear);
        assert!(parse_axis("F:3e5:6e5").is_err());
        assert!(parse_axis("nope:1:2:3").is_err());
        assert!(parse_axis("F:1:2:3:cubic").is_err());
        assert!(parse_axis("F:1:2:x").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["mimqnd", "no-such-command"]), 1);
        assert_eq!(run(["mimqnd", "qnd-budget", "--config", "x", "--bogus"]), 1);
        assert_eq!(run(["mimqnd", "--version"]), 0);
    }

    #[test]
    fn mask_parsing() {
        assert_eq!(parse_mask("1:2").unwrap(), (1.0, 2.0));
        assert!(parse_mask("2:1").is_err());
        assert!(parse_mask("2").is_err());
    }
}
