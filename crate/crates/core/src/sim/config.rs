//! Monte Carlo experiment description and its flat `key = value` file format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;

use crate::bootstrap::QuantileGrid;
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::weights::WeightScheme;

/// How the dimension is chosen for a given sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DRule {
    Fixed(usize),
    /// `d = max(1, round(n^p))`, rounding half up.
    Power { num: u32, den: u32 },
}

impl DRule {
    pub const POWERS: [(u32, u32); 5] = [(1, 5), (1, 4), (1, 3), (1, 2), (3, 4)];

    pub fn exponent(&self) -> Option<f64> {
        match self {
            DRule::Fixed(_) => None,
            DRule::Power { num, den } => Some(*num as f64 / *den as f64),
        }
    }
}

impl fmt::Display for DRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DRule::Fixed(d) => write!(f, "fixed:{d}"),
            DRule::Power { num, den } => write!(f, "power:{num}/{den}"),
        }
    }
}

impl FromStr for DRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad d_rule '{s}' (expected fixed:D or power:P/Q)"));
        let (kind, arg) = s.trim().split_once(':').ok_or_else(bad)?;
        match kind.trim() {
            "fixed" => {
                let d: usize = arg.trim().parse().map_err(|_| bad())?;
                if d == 0 {
                    return Err(Error::Config("fixed dimension must be >= 1".into()));
                }
                Ok(DRule::Fixed(d))
            }
            "power" => {
                let (num, den) = arg.trim().split_once('/').ok_or_else(bad)?;
                let num: u32 = num.trim().parse().map_err(|_| bad())?;
                let den: u32 = den.trim().parse().map_err(|_| bad())?;
                if den == 0 || num == 0 || num > den {
                    return Err(Error::Config(format!("power exponent {num}/{den} must lie in (0, 1]")));
                }
                Ok(DRule::Power { num, den })
            }
            _ => Err(bad()),
        }
    }
}

/// `fixed(d) -> d`, `power(p) -> max(1, floor(n^p + 1/2))`.
pub fn derive_d(rule: &DRule, n: usize) -> usize {
    match rule {
        DRule::Fixed(d) => *d,
        DRule::Power { num, den } => {
            let x = (n as f64).powf(*num as f64 / *den as f64);
            ((x + 0.5).floor() as usize).max(1)
        }
    }
}

/// Population covariance `V` of the simulated observations.
#[derive(Debug, Clone, PartialEq)]
pub enum VSpec {
    Identity,
    /// `(1 + eps / sqrt(n)) I`.
    Inflate(f64),
    User(SymMatrix),
}

impl fmt::Display for VSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VSpec::Identity => f.write_str("identity"),
            VSpec::Inflate(eps) => write!(f, "inflate:{eps}"),
            VSpec::User(m) => {
                f.write_str("user:")?;
                let d = m.dim();
                for i in 0..d {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    let row: Vec<String> = (0..d).map(|j| m.get(i, j).to_string()).collect();
                    f.write_str(&row.join(","))?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for VSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "identity" {
            return Ok(VSpec::Identity);
        }
        if let Some(eps) = s.strip_prefix("inflate:") {
            let eps: f64 = eps
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad inflation '{eps}'")))?;
            if !(eps >= 0.0) || !eps.is_finite() {
                return Err(Error::Config(format!("inflation must be >= 0, got {eps}")));
            }
            return Ok(VSpec::Inflate(eps));
        }
        if let Some(body) = s.strip_prefix("user:") {
            let rows: Vec<Vec<f64>> = body
                .split(';')
                .map(|r| {
                    r.split(',')
                        .map(|v| {
                            v.trim()
                                .parse::<f64>()
                                .map_err(|_| Error::Config(format!("bad matrix entry '{v}'")))
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            let d = rows.len();
            if rows.iter().any(|r| r.len() != d) {
                return Err(Error::Config("user matrix must be square".into()));
            }
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            let m = SymMatrix::new(Array2::from_shape_vec((d, d), flat).expect("square"))?;
            return Ok(VSpec::User(m));
        }
        Err(Error::Config(format!(
            "bad v spec '{s}' (expected identity, inflate:EPS or user:ROWS)"
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub d_rule: DRule,
    pub v_spec: VSpec,
    pub scheme: WeightScheme,
    pub mc_reps: usize,
    pub boot_reps: usize,
    pub seed: u64,
    pub levels: QuantileGrid,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 500,
            d_rule: DRule::Fixed(3),
            v_spec: VSpec::Identity,
            scheme: WeightScheme::Gaussian,
            mc_reps: 500,
            boot_reps: 500,
            seed: 42,
            levels: QuantileGrid::default(),
        }
    }
}

impl SimConfig {
    pub fn d(&self) -> usize {
        derive_d(&self.d_rule, self.n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be >= 1".into()));
        }
        if self.mc_reps == 0 || self.boot_reps == 0 {
            return Err(Error::Config("mc_reps and boot_reps must be >= 1".into()));
        }
        if let VSpec::User(m) = &self.v_spec {
            if m.dim() != self.d() {
                return Err(Error::Config(format!(
                    "user V is {0}x{0} but the d rule gives d = {1}",
                    m.dim(),
                    self.d()
                )));
            }
        }
        Ok(())
    }

    /// Parses the flat `key = value` format. Blank lines and `#` comments
    /// are ignored; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
            let int = |v: &str| -> Result<u64> {
                v.parse()
                    .map_err(|_| Error::Config(format!("line {}: '{key}' needs an integer", lineno + 1)))
            };
            match key {
                "n" => cfg.n = int(value)? as usize,
                "d_rule" => cfg.d_rule = value.parse()?,
                "v" => cfg.v_spec = value.parse()?,
                "scheme" => cfg.scheme = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
                "mc_reps" => cfg.mc_reps = int(value)? as usize,
                "boot_reps" => cfg.boot_reps = int(value)? as usize,
                "seed" => cfg.seed = int(value)?,
                "levels" => {
                    cfg.levels = QuantileGrid::parse(value).map_err(|e| Error::Config(e.to_string()))?
                }
                other => {
                    return Err(Error::Config(format!("line {}: unknown key '{other}'", lineno + 1)));
                }
            }
            seen.push(key.to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Inverse of [`SimConfig::parse`].
    pub fn to_config_string(&self) -> String {
        let levels: Vec<String> = self.levels.levels().iter().map(|a| a.to_string()).collect();
        format!(
            "n = {}\nd_rule = {}\nv = {}\nscheme = {}\nmc_reps = {}\nboot_reps = {}\nseed = {}\nlevels = {}\n",
            self.n,
            self.d_rule,
            self.v_spec,
            self.scheme,
            self.mc_reps,
            self.boot_reps,
            self.seed,
            levels.join(",")
        )
    }
}
