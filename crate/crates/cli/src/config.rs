//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are an
//! error so that typos do not silently fall back to defaults. `to_text`
//! writes every key, and floats use Rust's shortest round-trip form, so a
//! written file parses back to an identical config.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Raster,
}

impl FromStr for Format {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "raster" => Ok(Format::Raster),
            _ => Err(bad(format!("unknown format '{s}' (csv, json, raster)"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Raster => "raster",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Reduced,
    Full,
}

impl FromStr for MapKind {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "reduced" => Ok(MapKind::Reduced),
            "full" => Ok(MapKind::Full),
            _ => Err(bad(format!("unknown map '{s}' (reduced, full)"))),
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapKind::Reduced => "reduced",
            MapKind::Full => "full",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilySel {
    All,
    Q,
    P,
}

impl FromStr for FamilySel {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "all" => Ok(FamilySel::All),
            "q" => Ok(FamilySel::Q),
            "p" => Ok(FamilySel::P),
            _ => Err(bad(format!("unknown family '{s}' (all, q, p)"))),
        }
    }
}

impl fmt::Display for FamilySel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilySel::All => "all",
            FamilySel::Q => "q",
            FamilySel::P => "p",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lambda: f64,
    pub seed: u64,
    /// 0 means one worker per core.
    pub threads: usize,
    /// Empty means standard output.
    pub out: Option<PathBuf>,
    pub format: Format,
    pub report_timing: bool,

    pub orbit_s: f64,
    pub orbit_theta: f64,
    pub orbit_steps: usize,
    pub orbit_map: MapKind,

    pub grid_n_s: usize,
    pub grid_n_theta: usize,
    pub grid_s_min: f64,
    pub grid_s_max: f64,
    pub grid_theta_min: f64,
    pub grid_theta_max: f64,
    pub basin_n_iter: u32,

    pub attractor_n_initial: usize,
    pub attractor_n_iter: usize,
    pub attractor_transient: usize,
    pub attractor_stride: usize,

    pub manifolds_n_points: usize,
    pub manifolds_depth: usize,
    pub manifolds_singular_iterates: usize,
    pub manifolds_q_max: usize,

    pub constants_n_max: usize,
    pub constants_lambda0: bool,

    pub lambda0_low: f64,
    pub lambda0_high: f64,
    pub lambda0_n_s: usize,
    pub lambda0_n_theta: usize,
    pub lambda0_n_iter: u32,
    pub lambda0_threshold: f64,
    pub lambda0_width: f64,
    pub lambda0_leak_check: bool,

    pub scan_from: f64,
    pub scan_to: f64,
    pub scan_step: f64,
    pub scan_n_max: usize,
    /// Threshold used to label regimes in a scan; estimating it per scan
    /// would dominate the run time.
    pub scan_lambda0: f64,
    pub scan_n_s: usize,
    pub scan_n_theta: usize,
    pub scan_n_iter: u32,
    pub scan_attractor_initial: usize,
    pub scan_attractor_iter: usize,
    pub scan_attractor_transient: usize,

    pub periodic_family: FamilySel,
    pub periodic_n_max: usize,

    pub tol_sing: f64,
    pub tol_fix: f64,
    pub tol_eig: f64,
    pub tol_series: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lambda: 0.75,
            seed: 0,
            threads: 0,
            out: None,
            format: Format::Csv,
            report_timing: false,

            orbit_s: 0.3,
            orbit_theta: 0.5,
            orbit_steps: 1000,
            orbit_map: MapKind::Reduced,

            grid_n_s: 400,
            grid_n_theta: 400,
            grid_s_min: 0.0,
            grid_s_max: 1.0,
            grid_theta_min: 0.0,
            grid_theta_max: FRAC_PI_2,
            basin_n_iter: 10_000,

            attractor_n_initial: 500,
            attractor_n_iter: 10_000,
            attractor_transient: 1_000,
            attractor_stride: 10,

            manifolds_n_points: 512,
            manifolds_depth: 8,
            manifolds_singular_iterates: 3,
            manifolds_q_max: 5,

            constants_n_max: 40,
            constants_lambda0: false,

            lambda0_low: 0.55,
            lambda0_high: 0.62,
            lambda0_n_s: 400,
            lambda0_n_theta: 400,
            lambda0_n_iter: 10_000,
            lambda0_threshold: 1e-3,
            lambda0_width: 1e-3,
            lambda0_leak_check: true,

            scan_from: 0.55,
            scan_to: 0.95,
            scan_step: 0.005,
            scan_n_max: 20,
            scan_lambda0: 0.6104,
            scan_n_s: 100,
            scan_n_theta: 100,
            scan_n_iter: 2000,
            scan_attractor_initial: 100,
            scan_attractor_iter: 2000,
            scan_attractor_transient: 500,

            periodic_family: FamilySel::All,
            periodic_n_max: 10,

            tol_sing: 1e-12,
            tol_fix: 1e-11,
            tol_eig: 1e-9,
            tol_series: 1e-13,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| bad(format!("{key}: cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(format!("{key}: expected true or false, got '{value}'"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "lambda" => self.lambda = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            "out" => self.out = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "format" => self.format = v.parse()?,
            "report_timing" => self.report_timing = parse_bool(key, v)?,

            "orbit.s" => self.orbit_s = parse(key, v)?,
            "orbit.theta" => self.orbit_theta = parse(key, v)?,
            "orbit.steps" => self.orbit_steps = parse(key, v)?,
            "orbit.map" => self.orbit_map = v.parse()?,

            "grid.n_s" => self.grid_n_s = parse(key, v)?,
            "grid.n_theta" => self.grid_n_theta = parse(key, v)?,
            "grid.s_min" => self.grid_s_min = parse(key, v)?,
            "grid.s_max" => self.grid_s_max = parse(key, v)?,
            "grid.theta_min" => self.grid_theta_min = parse(key, v)?,
            "grid.theta_max" => self.grid_theta_max = parse(key, v)?,
            "basin.n_iter" => self.basin_n_iter = parse(key, v)?,

            "attractor.n_initial" => self.attractor_n_initial = parse(key, v)?,
            "attractor.n_iter" => self.attractor_n_iter = parse(key, v)?,
            "attractor.transient" => self.attractor_transient = parse(key, v)?,
            "attractor.stride" => self.attractor_stride = parse(key, v)?,

            "manifolds.n_points" => self.manifolds_n_points = parse(key, v)?,
            "manifolds.depth" => self.manifolds_depth = parse(key, v)?,
            "manifolds.singular_iterates" => self.manifolds_singular_iterates = parse(key, v)?,
            "manifolds.q_max" => self.manifolds_q_max = parse(key, v)?,

            "constants.n_max" => self.constants_n_max = parse(key, v)?,
            "constants.lambda0" => self.constants_lambda0 = parse_bool(key, v)?,

            "lambda0.low" => self.lambda0_low = parse(key, v)?,
            "lambda0.high" => self.lambda0_high = parse(key, v)?,
            "lambda0.n_s" => self.lambda0_n_s = parse(key, v)?,
            "lambda0.n_theta" => self.lambda0_n_theta = parse(key, v)?,
            "lambda0.n_iter" => self.lambda0_n_iter = parse(key, v)?,
            "lambda0.threshold" => self.lambda0_threshold = parse(key, v)?,
            "lambda0.width" => self.lambda0_width = parse(key, v)?,
            "lambda0.leak_check" => self.lambda0_leak_check = parse_bool(key, v)?,

            "scan.from" => self.scan_from = parse(key, v)?,
            "scan.to" => self.scan_to = parse(key, v)?,
            "scan.step" => self.scan_step = parse(key, v)?,
            "scan.n_max" => self.scan_n_max = parse(key, v)?,
            "scan.lambda0" => self.scan_lambda0 = parse(key, v)?,
            "scan.n_s" => self.scan_n_s = parse(key, v)?,
            "scan.n_theta" => self.scan_n_theta = parse(key, v)?,
            "scan.n_iter" => self.scan_n_iter = parse(key, v)?,
            "scan.attractor_initial" => self.scan_attractor_initial = parse(key, v)?,
            "scan.attractor_iter" => self.scan_attractor_iter = parse(key, v)?,
            "scan.attractor_transient" => self.scan_attractor_transient = parse(key, v)?,

            "periodic.family" => self.periodic_family = v.parse()?,
            "periodic.n_max" => self.periodic_n_max = parse(key, v)?,

            "tol.sing" => self.tol_sing = parse(key, v)?,
            "tol.fix" => self.tol_fix = parse(key, v)?,
            "tol.eig" => self.tol_eig = parse(key, v)?,
            "tol.series" => self.tol_series = parse(key, v)?,
            _ => return Err(bad(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let out = self.out.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        vec![
            ("lambda", self.lambda.to_string()),
            ("seed", self.seed.to_string()),
            ("threads", self.threads.to_string()),
            ("out", out),
            ("format", self.format.to_string()),
            ("report_timing", self.report_timing.to_string()),
            ("orbit.s", self.orbit_s.to_string()),
            ("orbit.theta", self.orbit_theta.to_string()),
            ("orbit.steps", self.orbit_steps.to_string()),
            ("orbit.map", self.orbit_map.to_string()),
            ("grid.n_s", self.grid_n_s.to_string()),
            ("grid.n_theta", self.grid_n_theta.to_string()),
            ("grid.s_min", self.grid_s_min.to_string()),
            ("grid.s_max", self.grid_s_max.to_string()),
            ("grid.theta_min", self.grid_theta_min.to_string()),
            ("grid.theta_max", self.grid_theta_max.to_string()),
            ("basin.n_iter", self.basin_n_iter.to_string()),
            ("attractor.n_initial", self.attractor_n_initial.to_string()),
            ("attractor.n_iter", self.attractor_n_iter.to_string()),
            ("attractor.transient", self.attractor_transient.to_string()),
            ("attractor.stride", self.attractor_stride.to_string()),
            ("manifolds.n_points", self.manifolds_n_points.to_string()),
            ("manifolds.depth", self.manifolds_depth.to_string()),
            ("manifolds.singular_iterates", self.manifolds_singular_iterates.to_string()),
            ("manifolds.q_max", self.manifolds_q_max.to_string()),
            ("constants.n_max", self.constants_n_max.to_string()),
            ("constants.lambda0", self.constants_lambda0.to_string()),
            ("lambda0.low", self.lambda0_low.to_string()),
            ("lambda0.high", self.lambda0_high.to_string()),
            ("lambda0.n_s", self.lambda0_n_s.to_string()),
            ("lambda0.n_theta", self.lambda0_n_theta.to_string()),
            ("lambda0.n_iter", self.lambda0_n_iter.to_string()),
            ("lambda0.threshold", self.lambda0_threshold.to_string()),
            ("lambda0.width", self.lambda0_width.to_string()),
            ("lambda0.leak_check", self.lambda0_leak_check.to_string()),
            ("scan.from", self.scan_from.to_string()),
            ("scan.to", self.scan_to.to_string()),
            ("scan.step", self.scan_step.to_string()),
            ("scan.n_max", self.scan_n_max.to_string()),
            ("scan.lambda0", self.scan_lambda0.to_string()),
            ("scan.n_s", self.scan_n_s.to_string()),
            ("scan.n_theta", self.scan_n_theta.to_string()),
            ("scan.n_iter", self.scan_n_iter.to_string()),
            ("scan.attractor_initial", self.scan_attractor_initial.to_string()),
            ("scan.attractor_iter", self.scan_attractor_iter.to_string()),
            ("scan.attractor_transient", self.scan_attractor_transient.to_string()),
            ("periodic.family", self.periodic_family.to_string()),
            ("periodic.n_max", self.periodic_n_max.to_string()),
            ("tol.sing", self.tol_sing.to_string()),
            ("tol.fix", self.tol_fix.to_string()),
            ("tol.eig", self.tol_eig.to_string()),
            ("tol.series", self.tol_series.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    /// Applies the lines of a config file on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected 'key = value'", no + 1)))?;
            self.set(k.trim(), v).map_err(|e| bad(format!("line {}: {}", no + 1, e.0)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(bad(format!("lambda must lie in (0, 1), got {}", self.lambda)));
        }
        for (name, v) in [
            ("tol.sing", self.tol_sing),
            ("tol.fix", self.tol_fix),
            ("tol.eig", self.tol_eig),
            ("tol.series", self.tol_series),
            ("lambda0.threshold", self.lambda0_threshold),
            ("lambda0.width", self.lambda0_width),
            ("scan.step", self.scan_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("orbit.steps", self.orbit_steps),
            ("grid.n_s", self.grid_n_s),
            ("grid.n_theta", self.grid_n_theta),
            ("basin.n_iter", self.basin_n_iter as usize),
            ("attractor.n_initial", self.attractor_n_initial),
            ("attractor.n_iter", self.attractor_n_iter),
            ("attractor.stride", self.attractor_stride),
            ("manifolds.n_points", self.manifolds_n_points),
            ("constants.n_max", self.constants_n_max),
            ("lambda0.n_s", self.lambda0_n_s),
            ("lambda0.n_theta", self.lambda0_n_theta),
            ("lambda0.n_iter", self.lambda0_n_iter as usize),
            ("scan.n_s", self.scan_n_s),
            ("scan.n_theta", self.scan_n_theta),
            ("scan.n_iter", self.scan_n_iter as usize),
            ("scan.attractor_initial", self.scan_attractor_initial),
            ("scan.attractor_iter", self.scan_attractor_iter),
            ("periodic.n_max", self.periodic_n_max),
        ] {
            if v == 0 {
                return Err(bad(format!("{name} must be at least 1")));
            }
        }
        if self.attractor_transient >= self.attractor_n_iter {
            return Err(bad("attractor.transient must be below attractor.n_iter"));
        }
        if self.scan_attractor_transient >= self.scan_attractor_iter {
            return Err(bad("scan.attractor_transient must be below scan.attractor_iter"));
        }
        if !(self.scan_from > 0.0 && self.scan_from <= self.scan_to && self.scan_to < 1.0) {
            return Err(bad("scan range must satisfy 0 < from <= to < 1"));
        }
        if !(0.0 < self.lambda0_low && self.lambda0_low < self.lambda0_high && self.lambda0_high < 1.0) {
            return Err(bad("lambda0 bracket must satisfy 0 < low < high < 1"));
        }
        if !(self.grid_s_min >= 0.0 && self.grid_s_min < self.grid_s_max && self.grid_s_max <= 1.0) {
            return Err(bad("grid s-range must lie in [0, 1]"));
        }
        if !(self.grid_theta_min >= 0.0 && self.grid_theta_min < self.grid_theta_max && self.grid_theta_max <= FRAC_PI_2) {
            return Err(bad("grid theta-range must lie in [0, pi/2]"));
        }
        if self.manifolds_depth > sqbilliard::manifolds::MAX_DEPTH {
            return Err(bad(format!("manifolds.depth is capped at {}", sqbilliard::manifolds::MAX_DEPTH)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn odd_values_round_trip() {
        let mut c = RunConfig::default();
        c.lambda = 0.1 + 0.2;
        c.tol_fix = 3.3e-14;
        c.out = Some(PathBuf::from("a dir/file.csv"));
        c.format = Format::Raster;
        c.periodic_family = FamilySel::P;
        assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
    }

    proptest::proptest! {
        #[test]
        fn any_values_round_trip(
            lambda in proptest::num::f64::NORMAL,
            seed: u64,
            tol in 1e-300..1.0f64,
            steps: usize,
            timing: bool,
            name in "[a-z0-9_ ./-]{1,20}",
        ) {
            let mut c = RunConfig::default();
            c.lambda = lambda;
            c.seed = seed;
            c.tol_series = tol;
            c.orbit_steps = steps;
            c.report_timing = timing;
            c.out = Some(PathBuf::from(name.trim()));
            proptest::prop_assume!(!name.trim().is_empty());
            proptest::prop_assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
        }
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(RunConfig::from_text("lamda = 0.5").is_err());
        assert!(RunConfig::from_text("lambda 0.5").is_err());
        assert!(RunConfig::from_text("seed = -1").is_err());
        let c = RunConfig::from_text("# note\n\nlambda = 1.5\n").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_text("tol.fix = 0").unwrap();
        assert!(c.validate().is_err());
    }
}
