//! Scenario configuration: `key = value` lines, `#` comments, dotted keys.
//!
//! Values are scalars (`dims.M = 100`), lists (`kappa = 1, 2, 5`) or
//! inclusive ranges `start:step:stop` (`snr_db = -10:5:30`). Unknown keys are
//! errors. Every key and its default is listed in [`KEY_HELP`].

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::array_channel::{ScatteringMode, SystemDims};
use crate::impairments::{BeamErrorModel, CsiErrorScale};
use crate::pilot_equalization::PilotFamily;
use crate::simlab::trial::AnglePolicy;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Normalized MSE of the equivalent-channel estimate versus array size.
    MseSweep,
    /// Hybrid and fully digital rates and bounds versus SNR.
    RateVsSnr,
    /// Hybrid-to-digital bound gap versus Rician factor.
    RateVsKappa,
    /// Ideal versus impaired hardware under CSI errors, versus SNR.
    Impairments,
    /// Rate under CSI errors versus base-station array size.
    AntennaSweep,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::MseSweep,
        Scenario::RateVsSnr,
        Scenario::RateVsKappa,
        Scenario::Impairments,
        Scenario::AntennaSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::MseSweep => "mse-sweep",
            Scenario::RateVsSnr => "rate-vs-snr",
            Scenario::RateVsKappa => "rate-vs-kappa",
            Scenario::Impairments => "impairments",
            Scenario::AntennaSweep => "antenna-sweep",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_ascii_lowercase();
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name().replace('-', "") == norm)
            .ok_or_else(|| {
                let names: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
                Error::config("scenario", format!("unknown scenario `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// Power-loss rule used for `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XiMode {
    HalfPower,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpairmentSettings {
    pub a_deg: f64,
    pub b_deg: f64,
    /// `None` means half the beamwidth, `1.782 / (2 M)`.
    pub var_aoa_bs: Option<f64>,
    pub var_aoa_ms: f64,
    pub delta2: f64,
    pub xi_mode: XiMode,
    pub beam_model: BeamErrorModel,
    pub csi_scale: CsiErrorScale,
    pub xi_draws: usize,
}

impl Default for ImpairmentSettings {
    fn default() -> Self {
        ImpairmentSettings {
            a_deg: 3.0,
            b_deg: 3.0,
            var_aoa_bs: None,
            var_aoa_ms: 0.0,
            delta2: 0.005,
            xi_mode: XiMode::HalfPower,
            beam_model: BeamErrorModel::AngularOffset,
            csi_scale: CsiErrorScale::Absolute,
            xi_draws: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub dims: SystemDims,
    pub kappa: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub pilot_snr_db: f64,
    pub tone_snr_db: f64,
    pub trials: usize,
    pub seed: u64,
    pub angles: AnglePolicy,
    /// Minimum cosine-domain separation of users at the base station, in
    /// units of `1/M`.
    pub angle_sep: f64,
    pub scattering: ScatteringMode,
    pub pilots: PilotFamily,
    pub fresh_noise: bool,
    /// Base-station array sizes for the sweep scenarios.
    pub sweep_m: Vec<usize>,
    pub impair: ImpairmentSettings,
    pub out_path: Option<PathBuf>,
    pub gnuplot: bool,
    pub threads: Option<usize>,
}

/// `(key, default, meaning)` for every recognised key.
pub const KEY_HELP: &[(&str, &str, &str)] = &[
    ("scenario", "(command line)", "mse-sweep | rate-vs-snr | rate-vs-kappa | impairments | antenna-sweep"),
    ("dims.M", "100", "base-station antennas"),
    ("dims.P", "16 (8 for impairments)", "antennas per user"),
    ("dims.N", "per scenario", "users"),
    ("dims.N_RF", "= dims.N", "base-station RF chains"),
    ("dims.spacing", "0.5", "antenna spacing over wavelength"),
    ("kappa", "2 (rate-vs-kappa: 1,2,5,10,20,50,100)", "Rician factor(s); `inf` for pure LOS"),
    ("snr_db", "per scenario", "downlink SNR sweep in dB"),
    ("pilot_snr_db", "10 (mse-sweep) / inf", "pilot SNR E_P/sigma^2 in dB; `inf` for noiseless pilots"),
    ("tone_snr_db", "20", "training-tone SNR in dB; `inf` for noiseless training"),
    ("trials", "per scenario", "Monte-Carlo trials per sweep point"),
    ("seed", "1", "64-bit master seed"),
    ("angles", "grid", "grid | uniform: how LOS angles are drawn"),
    ("angle_sep", "2", "minimum cosine separation between users, in units of 1/M"),
    ("scattering", "iid", "iid | clustered"),
    ("clusters", "4,4,4", "paths per cluster (clustered scattering)"),
    ("pilots", "dft", "dft | hadamard"),
    ("fresh_noise", "false", "fresh noise per grid correlation during training"),
    ("sweep.m", "per scenario", "base-station array sizes for the sweep scenarios"),
    ("impair.a_deg", "3", "max user phase error, degrees"),
    ("impair.b_deg", "3", "max base-station phase error, degrees"),
    ("impair.var_aoa_bs", "1.782/(2M)", "base-station AoA error variance, rad^2"),
    ("impair.var_aoa_ms", "0", "user AoA error variance, rad^2"),
    ("impair.delta2", "0.005", "CSI error variance"),
    ("impair.xi_mode", "half-power", "half-power | monte-carlo"),
    ("impair.xi_draws", "100000", "draws for the Monte-Carlo power loss"),
    ("impair.beam_model", "offset", "offset | literal beam-error ramp"),
    ("impair.csi_scale", "absolute", "absolute | normalized (variance times M P)"),
    ("out", "stdout", "CSV output path"),
    ("gnuplot", "false", "also write a gnuplot data file next to the CSV"),
    ("threads", "all cores", "worker threads"),
];

impl ScenarioConfig {
    /// Defaults for a scenario, taken from the standard figure set-ups.
    pub fn defaults(scenario: Scenario) -> Self {
        let dims = |m, p, n| SystemDims::new(m, p, n).expect("valid default dimensions");
        let mut c = ScenarioConfig {
            scenario,
            dims: dims(100, 16, 10),
            kappa: vec![2.0],
            snr_db: (0..=6).map(|i| -10.0 + 5.0 * i as f64).collect(),
            pilot_snr_db: f64::INFINITY,
            tone_snr_db: 20.0,
            trials: 1000,
            seed: 1,
            angles: AnglePolicy::Grid,
            angle_sep: 2.0,
            scattering: ScatteringMode::IidGaussian,
            pilots: PilotFamily::Dft,
            fresh_noise: false,
            sweep_m: vec![],
            impair: ImpairmentSettings::default(),
            out_path: None,
            gnuplot: false,
            threads: None,
        };
        match scenario {
            Scenario::MseSweep => {
                c.dims = dims(100, 16, 4);
                c.pilot_snr_db = 10.0;
                c.trials = 2000;
                c.sweep_m = vec![40, 64, 100, 128, 160, 200, 256];
            }
            Scenario::RateVsSnr => {}
            Scenario::RateVsKappa => {
                c.dims = dims(100, 16, 4);
                c.kappa = vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
                c.snr_db = vec![20.0];
                c.trials = 500;
            }
            Scenario::Impairments => {
                c.dims = dims(100, 8, 8);
                c.snr_db = (0..=10).map(|i| -10.0 + 5.0 * i as f64).collect();
                c.trials = 2000;
            }
            Scenario::AntennaSweep => {
                c.dims = dims(100, 8, 8);
                c.snr_db = vec![30.0];
                c.trials = 500;
                c.sweep_m = vec![16, 32, 64, 100, 128, 200, 256];
            }
        }
        c
    }

    /// Applies one `key = value` assignment.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "scenario" => {
                let s: Scenario = v.parse()?;
                if s != self.scenario {
                    return Err(Error::config(key, format!("file is for `{s}`, not `{}`", self.scenario)));
                }
            }
            "dims.M" => self.dims.bs_antennas = parse_count(key, v)?,
            "dims.P" => self.dims.ue_antennas = parse_count(key, v)?,
            "dims.N" => {
                let n = parse_count(key, v)?;
                if self.dims.rf_chains == self.dims.users {
                    self.dims.rf_chains = n;
                }
                self.dims.users = n;
            }
            "dims.N_RF" => self.dims.rf_chains = parse_count(key, v)?,
            "dims.spacing" => self.dims.spacing_ratio = parse_positive(key, v)?,
            "kappa" => {
                let k = parse_sweep(key, v)?;
                if k.iter().any(|x| !(*x >= 0.0)) {
                    return Err(Error::config(key, "Rician factors must be >= 0"));
                }
                self.kappa = k;
            }
            "snr_db" => self.snr_db = parse_sweep(key, v)?,
            "pilot_snr_db" => self.pilot_snr_db = parse_f64(key, v)?,
            "tone_snr_db" => self.tone_snr_db = parse_f64(key, v)?,
            "trials" => self.trials = parse_count(key, v)?,
            "seed" => self.seed = v.parse().map_err(|_| Error::config(key, format!("`{v}` is not a 64-bit unsigned integer")))?,
            "angles" => {
                self.angles = match v {
                    "grid" => AnglePolicy::Grid,
                    "uniform" => AnglePolicy::Uniform,
                    _ => return Err(Error::config(key, format!("expected grid or uniform, got `{v}`"))),
                }
            }
            "angle_sep" => {
                let s = parse_f64(key, v)?;
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(Error::config(key, "must be finite and >= 0"));
                }
                self.angle_sep = s;
            }
            "scattering" => {
                self.scattering = match v {
                    "iid" => ScatteringMode::IidGaussian,
                    "clustered" => match &self.scattering {
                        ScatteringMode::Clustered { .. } => self.scattering.clone(),
                        ScatteringMode::IidGaussian => ScatteringMode::Clustered { paths_per_cluster: vec![4, 4, 4] },
                    },
                    _ => return Err(Error::config(key, format!("expected iid or clustered, got `{v}`"))),
                }
            }
            "clusters" => {
                let paths = parse_list(key, v)?
                    .into_iter()
                    .map(|x| to_count(key, x))
                    .collect::<Result<Vec<_>>>()?;
                self.scattering = ScatteringMode::Clustered { paths_per_cluster: paths };
            }
            "pilots" => {
                self.pilots = match v {
                    "dft" => PilotFamily::Dft,
                    "hadamard" => PilotFamily::Hadamard,
                    _ => return Err(Error::config(key, format!("expected dft or hadamard, got `{v}`"))),
                }
            }
            "fresh_noise" => self.fresh_noise = parse_bool(key, v)?,
            "sweep.m" => {
                let m = parse_sweep(key, v)?
                    .into_iter()
                    .map(|x| to_count(key, x))
                    .collect::<Result<Vec<_>>>()?;
                self.sweep_m = m;
            }
            "impair.a_deg" => self.impair.a_deg = parse_nonneg(key, v)?,
            "impair.b_deg" => self.impair.b_deg = parse_nonneg(key, v)?,
            "impair.var_aoa_bs" => self.impair.var_aoa_bs = Some(parse_nonneg(key, v)?),
            "impair.var_aoa_ms" => self.impair.var_aoa_ms = parse_nonneg(key, v)?,
            "impair.delta2" => self.impair.delta2 = parse_nonneg(key, v)?,
            "impair.xi_mode" => {
                self.impair.xi_mode = match v {
                    "half-power" | "half_power" => XiMode::HalfPower,
                    "monte-carlo" | "monte_carlo" => XiMode::MonteCarlo,
                    _ => return Err(Error::config(key, format!("expected half-power or monte-carlo, got `{v}`"))),
                }
            }
            "impair.xi_draws" => self.impair.xi_draws = parse_count(key, v)?,
            "impair.beam_model" => {
                self.impair.beam_model = match v {
                    "offset" => BeamErrorModel::AngularOffset,
                    "literal" => BeamErrorModel::Literal,
                    _ => return Err(Error::config(key, format!("expected offset or literal, got `{v}`"))),
                }
            }
            "impair.csi_scale" => {
                self.impair.csi_scale = match v {
                    "absolute" => CsiErrorScale::Absolute,
                    "normalized" => CsiErrorScale::Normalized,
                    _ => return Err(Error::config(key, format!("expected absolute or normalized, got `{v}`"))),
                }
            }
            "out" => self.out_path = Some(PathBuf::from(v)),
            "gnuplot" => self.gnuplot = parse_bool(key, v)?,
            "threads" => self.threads = Some(parse_count(key, v)?),
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Applies every assignment in `source` (see [`parse_assignments`]).
    pub fn apply_source(&mut self, source: &str) -> Result<()> {
        for (key, value) in parse_assignments(source)? {
            self.apply(&key, &value)?;
        }
        Ok(())
    }

    /// Checks cross-key invariants, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        if d.users > d.rf_chains {
            return Err(Error::config("dims.N", format!("{} users exceed {} RF chains", d.users, d.rf_chains)));
        }
        if d.rf_chains > d.bs_antennas {
            return Err(Error::config("dims.N_RF", format!("{} RF chains exceed {} antennas", d.rf_chains, d.bs_antennas)));
        }
        if self.kappa.is_empty() {
            return Err(Error::config("kappa", "empty"));
        }
        if self.snr_db.is_empty() {
            return Err(Error::config("snr_db", "empty"));
        }
        if self.pilot_snr_db.is_nan() {
            return Err(Error::config("pilot_snr_db", "not a number"));
        }
        if self.tone_snr_db.is_nan() {
            return Err(Error::config("tone_snr_db", "not a number"));
        }
        if let ScatteringMode::Clustered { paths_per_cluster } = &self.scattering {
            if paths_per_cluster.is_empty() {
                return Err(Error::config("clusters", "needs at least one cluster"));
            }
        }
        if self.pilots == PilotFamily::Hadamard && !d.users.is_power_of_two() {
            return Err(Error::config("pilots", "Hadamard pilots need a power-of-two user count"));
        }
        if matches!(self.scenario, Scenario::MseSweep | Scenario::AntennaSweep) {
            if self.sweep_m.is_empty() {
                return Err(Error::config("sweep.m", "empty"));
            }
            if let Some(&m) = self.sweep_m.iter().find(|&&m| m < d.rf_chains.max(d.users).max(2)) {
                return Err(Error::config("sweep.m", format!("{m} antennas cannot serve {} users", d.users)));
            }
        }
        if self.scenario == Scenario::AntennaSweep && self.kappa.len() != 1 {
            return Err(Error::config("kappa", "antenna-sweep takes a single Rician factor"));
        }
        if matches!(self.scenario, Scenario::Impairments | Scenario::AntennaSweep) && self.kappa.contains(&0.0) {
            return Err(Error::config("kappa", "closed forms need a positive Rician factor"));
        }
        Ok(())
    }
}

/// Splits `source` into `(key, value)` pairs, dropping blank lines and `#`
/// comments. Errors carry the line number.
pub fn parse_assignments(source: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}", i + 1), format!("expected `key = value`, got `{line}`")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::config(format!("line {}", i + 1), "missing key"));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Parses a complete config; the `scenario` key is required.
pub fn parse_config(source: &str) -> Result<ScenarioConfig> {
    let pairs = parse_assignments(source)?;
    let scenario = pairs
        .iter()
        .find(|(k, _)| k == "scenario")
        .ok_or_else(|| Error::config("scenario", "missing required key"))?
        .1
        .parse()?;
    let mut cfg = ScenarioConfig::defaults(scenario);
    for (k, v) in &pairs {
        cfg.apply(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    match v.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => v
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::config(key, format!("`{v}` is not a number"))),
    }
}

fn parse_nonneg(key: &str, v: &str) -> Result<f64> {
    let x = parse_f64(key, v)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::config(key, format!("must be finite and >= 0, got {v}")));
    }
    Ok(x)
}

fn parse_positive(key: &str, v: &str) -> Result<f64> {
    let x = parse_f64(key, v)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::config(key, format!("must be positive, got {v}")));
    }
    Ok(x)
}

fn parse_count(key: &str, v: &str) -> Result<usize> {
    match v.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(Error::config(key, format!("expected a positive integer, got `{v}`"))),
    }
}

fn to_count(key: &str, x: f64) -> Result<usize> {
    if x >= 1.0 && x.fract() == 0.0 && x < 1e9 {
        Ok(x as usize)
    } else {
        Err(Error::config(key, format!("expected positive integers, got {x}")))
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got `{v}`"))),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    let items: Vec<f64> = v
        .split(',')
        .map(|s| parse_f64(key, s.trim()))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::config(key, "empty list"));
    }
    Ok(items)
}

/// `start:step:stop` (inclusive), a comma list, or a single value. Lists
/// must be strictly monotone.
pub fn parse_sweep(key: &str, v: &str) -> Result<Vec<f64>> {
    if v.contains(':') {
        let parts: Vec<&str> = v.split(':').map(str::trim).collect();
        let [start, step, stop] = parts.as_slice() else {
            return Err(Error::config(key, format!("range must be start:step:stop, got `{v}`")));
        };
        let (start, step, stop) = (parse_f64(key, start)?, parse_f64(key, step)?, parse_f64(key, stop)?);
        if !(start.is_finite() && step.is_finite() && stop.is_finite()) {
            return Err(Error::config(key, "range bounds must be finite"));
        }
        if step == 0.0 || (stop - start) * step < 0.0 {
            return Err(Error::config(key, format!("step {step} never reaches {stop} from {start}")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > 1_000_000 {
            return Err(Error::config(key, "range has too many points"));
        }
        return Ok((0..count).map(|i| start + step * i as f64).collect());
    }
    let items = parse_list(key, v)?;
    let up = items.windows(2).all(|w| w[1] > w[0]);
    let down = items.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::config(key, "list must be strictly monotone"));
    }
    Ok(items)
}
