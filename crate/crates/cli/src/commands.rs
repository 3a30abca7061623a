use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use reflector_core::actuator::ReflectorState;
use reflector_core::analysis::{self, prototype_reference as reference, AnalysisError};
use reflector_core::config::{self, ConfigError};
use reflector_core::controller::{self, ControllerConfig, ControllerError};
use reflector_core::io::{self as rio, IoError};
use reflector_core::linkbudget::{self, LinkError};
use reflector_core::simulator::{self, Experiment, Mode, SimError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: config, data files, arguments.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Internal(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Read { .. } | ConfigError::Parse(_) | ConfigError::Invalid { .. } => CliError::Usage(e.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io(_) => CliError::Internal(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ControllerError> for CliError {
    fn from(e: ControllerError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<LinkError> for CliError {
    fn from(e: LinkError) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub struct RunConfig {
    pub scenario_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub thresholds_db: Option<Vec<f64>>,
}

fn open_input(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", dir.display())))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Internal(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

pub fn cmd_run(cfg: &RunConfig) -> Result<(), CliError> {
    let mut loaded = match &cfg.scenario_path {
        Some(p) => config::load_scenario(p)?,
        None => config::ScenarioFile::default_file().resolve()?,
    };
    if let Some(seed) = cfg.seed_override {
        loaded.scenario.seed = seed;
    }
    if let Some(t) = &cfg.thresholds_db {
        if t.is_empty() || t.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Usage("--thresholds must be a non-empty list of finite dB values".into()));
        }
    }
    let scenario = &loaded.scenario;
    let exp = simulator::run_experiment(scenario, &loaded.modes)?;
    if exp.far_field_warning {
        eprintln!(
            "warning: geometry is inside the plate's far-field distance ({:.1} m); reflected powers use the {:?} near-field model",
            scenario.link.far_field_distance_m(),
            scenario.near_field
        );
    }

    let thresholds = cfg
        .thresholds_db
        .clone()
        .unwrap_or_else(|| analysis::threshold_grid(&exp.traces, 1.0));

    create_dir(&cfg.output_dir)?;
    for trace in &exp.traces {
        let name = trace.mode.as_str();
        write_file(&cfg.output_dir.join(format!("trace_{name}.csv")), |w| Ok(rio::write_trace(w, trace)?))?;
        let curve = analysis::ccdf(&trace.powers(), &thresholds)?;
        write_file(&cfg.output_dir.join(format!("ccdf_{name}.csv")), |w| Ok(rio::write_outage_curve(w, &curve)?))?;
    }
    if !exp.decisions.is_empty() {
        write_file(&cfg.output_dir.join("decisions.csv"), |w| Ok(rio::write_decisions(w, &exp.decisions)?))?;
        write_file(&cfg.output_dir.join("observations.csv"), |w| Ok(rio::write_observations(w, &exp.frames)?))?;
    }

    let rows = gain_rows(&exp)?;
    write_file(&cfg.output_dir.join("summary.csv"), |w| {
        writeln!(w, "mode_a,mode_b,mean_gain_db,max_gain_db").map_err(internal)?;
        for (a, b, mean, max) in &rows {
            writeln!(w, "{a},{b},{mean},{max}").map_err(internal)?;
        }
        Ok(())
    })?;
    let text = summary_text(&loaded, &exp, &rows)?;
    write_file(&cfg.output_dir.join("summary.txt"), |w| w.write_all(text.as_bytes()).map_err(internal))?;
    print!("{text}");
    Ok(())
}

type GainRow = (Mode, Mode, f64, f64);

fn gain_rows(exp: &Experiment) -> Result<Vec<GainRow>, CliError> {
    let mut rows = Vec::new();
    for a in &exp.traces {
        for b in &exp.traces {
            if a.mode != b.mode {
                rows.push((a.mode, b.mode, analysis::average_gain(a, b)?, analysis::max_gain(a, b)?));
            }
        }
    }
    Ok(rows)
}

fn summary_text(loaded: &config::LoadedScenario, exp: &Experiment, rows: &[GainRow]) -> Result<String, CliError> {
    let scenario = &loaded.scenario;
    let mut s = String::new();
    let _ = writeln!(s, "positions: {}", scenario.position_count());
    let _ = writeln!(s, "seed: {}", scenario.seed);
    let _ = writeln!(
        s,
        "quantization loss bound: {:.6} dB",
        simulator::quantization_loss_bound_db(scenario)?
    );
    let _ = writeln!(s, "\nmean received power (dBm):");
    for t in &exp.traces {
        let p = t.powers();
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        let _ = writeln!(s, "  {:<17} {mean:9.3}", t.mode.as_str());
    }
    let _ = writeln!(s, "\ngain a - b (dB): mean / max");
    for (a, b, mean, max) in rows {
        let _ = writeln!(s, "  {:<17} vs {:<17} {mean:9.3} / {max:9.3}", a.as_str(), b.as_str());
    }
    if !exp.decisions.is_empty() {
        let active = exp
            .decisions
            .iter()
            .filter(|d| d.mode == controller::DecisionMode::Active)
            .count();
        let _ = writeln!(s, "\ncontroller: {active} active, {} static fallback", exp.decisions.len() - active);
    }
    if let Some(los) = exp.trace(Mode::Los) {
        if let Some((a, b, unit)) = &loaded.reference_fit {
            let scale = if unit == "ft" { 1.0 / reflector_core::geometry::METERS_PER_FOOT } else { 1.0 };
            let samples: Vec<(f64, f64)> = los
                .samples
                .iter()
                .map(|p| (p.rx_position.distance_to(scenario.scene0.tx) * scale, p.power_db))
                .collect();
            match linkbudget::fit_log_distance(&samples) {
                Ok(fit) => {
                    let _ = writeln!(
                        s,
                        "\nLoS log-distance fit (d in {unit}): a = {:.3} dB, b = {:.3} dB/decade, n = {:.3}, R^2 = {:.4}",
                        fit.a, fit.b, fit.n, fit.r_squared
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "\nLoS log-distance fit unavailable: {e}");
                }
            }
            let _ = writeln!(s, "reference fit from config: a = {a} dB, b = {b} dB/decade, n = {:.3}", -b / 10.0);
        }
    }
    let _ = writeln!(s, "\nprototype measurements (hardware, relative dB; not reproduced by this model):");
    let _ = writeln!(
        s,
        "  availability at {} dB: LoS {}%, manual reflector ~{}%, vision-guided ~{}%, no reflector ~{}% (+/-{} pts)",
        reference::AVAILABILITY_THRESHOLD_DB,
        reference::AVAILABILITY_LOS_PCT,
        reference::AVAILABILITY_STATIC_PCT,
        reference::AVAILABILITY_VISION_PCT,
        reference::AVAILABILITY_BARE_PCT,
        reference::AVAILABILITY_TOLERANCE_PCT
    );
    let _ = writeln!(
        s,
        "  vision-guided over no reflector: mean ~{} dB, max {} dB",
        reference::VISION_OVER_BARE_MEAN_GAIN_DB,
        reference::VISION_OVER_BARE_MAX_GAIN_DB
    );
    Ok(s)
}

pub fn cmd_replay_aoa(table: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let rows = match table {
        Some(p) => rio::read_aoa_table(open_input(p)?)?,
        None => rio::read_aoa_table(analysis::BUNDLED_AOA_TABLE_CSV.as_bytes())?,
    };
    let stats = analysis::aoa_error_stats(&rows)?;
    let report = analysis::verify_table_consistency(&rows)?;
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    rio::write_error_stats(&mut lock, &stats)?;
    write!(lock, "{}", report.summary()).map_err(internal)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("error_stats.csv"), |w| Ok(rio::write_error_stats(w, &stats)?))?;
    }
    Ok(())
}

pub fn cmd_fit(samples_path: &Path, out: &Path) -> Result<(), CliError> {
    let samples = rio::read_fit_samples(open_input(samples_path)?)?;
    let fit = linkbudget::fit_log_distance(&samples)?;
    println!("a,b,n,r_squared");
    println!("{},{},{},{}", fit.a, fit.b, fit.n, fit.r_squared);
    create_dir(out)?;
    let points = rio::fitted_line(&samples, &fit);
    write_file(&out.join("fit_line.csv"), |w| Ok(rio::write_fitted_line(w, &points)?))
}

pub fn cmd_controller_trace(
    observations: &Path,
    scenario: Option<&Path>,
    calibrate: Option<f64>,
    out: &Path,
) -> Result<(), CliError> {
    let Some(reference_deg) = calibrate else {
        return Err(CliError::Usage(
            "the reflector starts uncalibrated; pass --calibrate <deg> with the manually aligned orientation".into(),
        ));
    };
    if !reference_deg.is_finite() {
        return Err(CliError::Usage("--calibrate must be finite".into()));
    }
    let cfg: ControllerConfig = match scenario {
        Some(p) => config::load_scenario(p)?.scenario.controller,
        None => ControllerConfig::default(),
    };
    let frames = rio::read_observations(open_input(observations)?)?;
    let decisions = controller::run_loop(&frames, &ReflectorState::calibrated_at(reference_deg), &cfg)?;
    create_dir(out)?;
    write_file(&out.join("decisions.csv"), |w| Ok(rio::write_decisions(w, &decisions)?))
}
