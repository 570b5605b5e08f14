//! Run parameters, the flat `key = value` config format and run manifests.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::learn::{BcdOptions, LearnConfig};
use crate::pipeline::GREY_RANGE;
use crate::types::{SolverId, SolverSettings, MAX_ITERS_CAP};

pub const DEFAULT_N_PATCHES: usize = 2000;
pub const DEFAULT_MAX_ITERS: usize = 50_000;
pub const DEFAULT_ATOMS: usize = 256;
pub const DEFAULT_PATCH: usize = 8;
pub const DEFAULT_STRIDE: usize = 2;
pub const DEFAULT_MU: f64 = 0.0625;
pub const MANIFEST_NAME: &str = "manifest.txt";

/// Keys that a manifest records but a config does not set.
const INFORMATIONAL_KEYS: [&str; 3] = ["command", "version", "outputs"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Learn,
    Reconstruct,
    Analyze,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Learn => "learn",
            Command::Reconstruct => "reconstruct",
            Command::Analyze => "analyze",
            Command::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "learn" => Ok(Command::Learn),
            "reconstruct" => Ok(Command::Reconstruct),
            "analyze" => Ok(Command::Analyze),
            "sweep" => Ok(Command::Sweep),
            other => Err(Error::Usage(format!("unknown command `{other}`"))),
        }
    }
}

/// Fully resolved parameters of one command invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: Command,
    /// Training images for `learn` and `sweep`; inputs to `reconstruct` and
    /// `analyze`.
    pub images: Vec<PathBuf>,
    /// Held-out images reconstructed by `sweep`.
    pub test_images: Vec<PathBuf>,
    pub dict: Option<PathBuf>,
    /// Coefficient artifacts for `analyze`.
    pub codes: Vec<PathBuf>,
    pub solvers: Vec<SolverId>,
    pub mus: Vec<f64>,
    /// Patch sides; `None` lets `reconstruct` and `analyze` take the side
    /// from the dictionary.
    pub patches: Option<Vec<usize>>,
    pub stride: usize,
    pub atoms: usize,
    pub n_patches: usize,
    pub seed: u64,
    /// Solver tolerance while learning; `None` uses the solver default.
    pub eps1: Option<f64>,
    /// Per-patch tolerance while reconstructing; `None` uses the solver
    /// default.
    pub eps2: Option<f64>,
    pub max_iters: usize,
    pub out: PathBuf,
    /// Upper end of the working tonal domain.
    pub tonal_range: f64,
    pub kappa: f64,
    pub bins: usize,
    /// Dictionary-update sweep cap and column-change tolerance.
    pub bcd: BcdOptions,
}

impl ExperimentSpec {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            images: Vec::new(),
            test_images: Vec::new(),
            dict: None,
            codes: Vec::new(),
            solvers: vec![SolverId::FpcBb],
            mus: vec![DEFAULT_MU],
            patches: None,
            stride: DEFAULT_STRIDE,
            atoms: DEFAULT_ATOMS,
            n_patches: DEFAULT_N_PATCHES,
            seed: 0,
            eps1: None,
            eps2: None,
            max_iters: DEFAULT_MAX_ITERS,
            out: PathBuf::from("out"),
            tonal_range: GREY_RANGE,
            kappa: crate::analysis::DEFAULT_KAPPA,
            bins: crate::analysis::DEFAULT_BINS,
            bcd: BcdOptions::default(),
        }
    }

    /// Spec for `command` with `config` applied on top of the defaults and
    /// `overrides` on top of that.
    pub fn resolve(command: Command, config: Option<&Path>, overrides: &[(String, Vec<String>)]) -> Result<Self> {
        let mut spec = Self::new(command);
        if let Some(path) = config {
            if !path.exists() {
                return Err(Error::MissingPath(path.to_path_buf()));
            }
            let text = fs::read_to_string(path).map_err(Error::at_path(path))?;
            for (key, values) in parse_config(&text)? {
                spec.set(&key, &values)?;
            }
        }
        for (key, values) in overrides {
            spec.set(key, values)?;
        }
        Ok(spec)
    }

    /// Sets one parameter. List keys take every value; scalar keys exactly
    /// one.
    pub fn set(&mut self, key: &str, values: &[String]) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let single = || -> Result<&str> {
            match values {
                [v] => Ok(v.trim()),
                _ => Err(Error::Usage(format!("`{key}` takes exactly one value"))),
            }
        };
        let paths = || values.iter().map(|v| PathBuf::from(v.trim())).collect::<Vec<_>>();
        match key.as_str() {
            k if INFORMATIONAL_KEYS.contains(&k) => {}
            "images" => self.images = paths(),
            "test" => self.test_images = paths(),
            "codes" => self.codes = paths(),
            "dict" => self.dict = Some(PathBuf::from(single()?)),
            "out" => self.out = PathBuf::from(single()?),
            "solver" => {
                self.solvers = values
                    .iter()
                    .map(|v| v.parse::<SolverId>().map_err(|e| Error::Usage(e.to_string())))
                    .collect::<Result<_>>()?
            }
            "mu" => self.mus = values.iter().map(|v| parse_mu(v)).collect::<Result<_>>()?,
            "patch" => self.patches = Some(values.iter().map(|v| parse_num(&key, v)).collect::<Result<_>>()?),
            "stride" => self.stride = parse_num(&key, single()?)?,
            "atoms" => self.atoms = parse_num(&key, single()?)?,
            "n-patches" => self.n_patches = parse_num(&key, single()?)?,
            "seed" => self.seed = parse_num(&key, single()?)?,
            "eps1" => self.eps1 = Some(parse_num(&key, single()?)?),
            "eps2" => self.eps2 = Some(parse_num(&key, single()?)?),
            "max-iters" => self.max_iters = parse_num(&key, single()?)?,
            "tonal-range" => self.tonal_range = parse_num(&key, single()?)?,
            "kappa" => self.kappa = parse_num(&key, single()?)?,
            "bins" => self.bins = parse_num(&key, single()?)?,
            "bcd-sweeps" => self.bcd.max_sweeps = parse_num(&key, single()?)?,
            "bcd-tol" => self.bcd.tol = parse_num(&key, single()?)?,
            other => return Err(Error::Usage(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverId {
        self.solvers[0]
    }

    pub fn patch_sides(&self) -> Vec<usize> {
        self.patches.clone().unwrap_or_else(|| vec![DEFAULT_PATCH])
    }

    pub fn learn_settings(&self, solver: SolverId, mu: f64) -> SolverSettings {
        let s = SolverSettings::new(solver, mu).with_max_iters(self.max_iters);
        self.eps1.map_or(s, |e| s.with_eps(e))
    }

    pub fn learn_config(&self, solver: SolverId, mu: f64) -> LearnConfig {
        let mut cfg = LearnConfig::new(self.n_patches, self.learn_settings(solver, mu), self.seed);
        cfg.bcd = self.bcd;
        cfg
    }

    pub fn reconstruct_settings(&self, solver: SolverId, mu: f64) -> SolverSettings {
        let s = SolverSettings::new(solver, mu).with_max_iters(self.max_iters);
        self.eps2.map_or(s, |e| s.with_eps(e))
    }

    /// Checks parameter ranges and the inputs the command needs, before any
    /// work starts.
    pub fn validate(&self) -> Result<()> {
        let usage = |msg: &str| Err(Error::Usage(msg.to_string()));
        if self.mus.is_empty() {
            return usage("at least one --mu is required");
        }
        if self.mus.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return usage("--mu values must be positive");
        }
        if self.solvers.is_empty() {
            return usage("at least one --solver is required");
        }
        if let Some(p) = &self.patches {
            if p.is_empty() || p.iter().any(|&s| s < 2) {
                return usage("--patch values must be at least 2");
            }
        }
        if self.stride == 0 {
            return usage("--stride must be positive");
        }
        if self.atoms == 0 {
            return usage("--atoms must be positive");
        }
        if self.max_iters == 0 || self.max_iters > MAX_ITERS_CAP {
            return Err(Error::Usage(format!("--max-iters must be in 1..={MAX_ITERS_CAP}")));
        }
        for eps in [self.eps1, self.eps2].into_iter().flatten() {
            if !(eps > 0.0 && eps.is_finite()) {
                return usage("--eps1 and --eps2 must be positive");
            }
        }
        if !(self.tonal_range > 0.0 && self.tonal_range.is_finite()) {
            return usage("tonal-range must be positive");
        }
        if !(self.kappa > 0.0) || self.bins == 0 {
            return usage("kappa and bins must be positive");
        }
        if self.bcd.max_sweeps == 0 || !(self.bcd.tol >= 0.0) {
            return usage("bcd-sweeps must be positive and bcd-tol nonnegative");
        }

        let single_solver = |what: &str| {
            if self.solvers.len() > 1 {
                Err(Error::Usage(format!("{what} takes a single --solver")))
            } else {
                Ok(())
            }
        };
        match self.command {
            Command::Learn => {
                single_solver("learn")?;
                if self.images.is_empty() {
                    return usage("learn needs --images");
                }
                if self.mus.len() != 1 || self.patch_sides().len() != 1 {
                    return usage("learn takes a single --mu and --patch");
                }
                if self.n_patches == 0 {
                    return usage("--n-patches must be positive");
                }
            }
            Command::Reconstruct => {
                single_solver("reconstruct")?;
                if self.images.is_empty() || self.dict.is_none() {
                    return usage("reconstruct needs --images and --dict");
                }
            }
            Command::Analyze => {
                single_solver("analyze")?;
                if self.codes.is_empty() && (self.images.is_empty() || self.dict.is_none()) {
                    return usage("analyze needs --codes, or --images and --dict");
                }
                if !self.codes.is_empty() && self.images.len() > 1 {
                    return usage("analyze with --codes takes at most one image");
                }
            }
            Command::Sweep => {
                if self.images.is_empty() && self.n_patches > 0 {
                    return usage("sweep needs training --images (or --n-patches 0)");
                }
                if self.test_images.is_empty() {
                    return usage("sweep needs --test images");
                }
            }
        }
        for path in self.input_paths() {
            if !path.exists() {
                return Err(Error::MissingPath(path.to_path_buf()));
            }
        }
        Ok(())
    }

    fn input_paths(&self) -> impl Iterator<Item = &Path> {
        self.images
            .iter()
            .chain(&self.test_images)
            .chain(&self.codes)
            .chain(&self.dict)
            .map(PathBuf::as_path)
    }

    /// The spec in config syntax, with the command, toolkit version and
    /// produced files as informational keys. Feeding a manifest back through
    /// `--config` repeats the run.
    pub fn manifest(&self, outputs: &[String]) -> String {
        let mut s = String::from("# sparsedict run manifest\n");
        let join_paths = |v: &[PathBuf]| v.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ");
        let join = |v: Vec<String>| v.join(", ");
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("command", self.command.to_string());
        line("version", env!("CARGO_PKG_VERSION").to_string());
        line("images", join_paths(&self.images));
        line("test", join_paths(&self.test_images));
        if let Some(d) = &self.dict {
            line("dict", d.display().to_string());
        }
        line("codes", join_paths(&self.codes));
        line("solver", join(self.solvers.iter().map(|s| s.to_string()).collect()));
        line("mu", join(self.mus.iter().map(|m| m.to_string()).collect()));
        if let Some(p) = &self.patches {
            line("patch", join(p.iter().map(|v| v.to_string()).collect()));
        }
        line("stride", self.stride.to_string());
        line("atoms", self.atoms.to_string());
        line("n-patches", self.n_patches.to_string());
        line("seed", self.seed.to_string());
        if let Some(e) = self.eps1 {
            line("eps1", e.to_string());
        }
        if let Some(e) = self.eps2 {
            line("eps2", e.to_string());
        }
        line("max-iters", self.max_iters.to_string());
        line("out", self.out.display().to_string());
        line("tonal-range", self.tonal_range.to_string());
        line("kappa", self.kappa.to_string());
        line("bins", self.bins.to_string());
        line("bcd-sweeps", self.bcd.max_sweeps.to_string());
        line("bcd-tol", self.bcd.tol.to_string());
        line("outputs", join(outputs.to_vec()));
        s
    }
}

/// Parses `key = value` lines. `#` starts a comment, blank lines are
/// skipped, and a value may list several items separated by commas. An
/// empty value gives an empty list.
pub fn parse_config(text: &str) -> Result<Vec<(String, Vec<String>)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Usage(format!("config line {}: expected `key = value`", n + 1)));
        };
        let values: Vec<String> = value
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        out.push((key.trim().to_string(), values));
    }
    Ok(out)
}

/// Accepts plain decimals as well as powers of two written `2^-4`.
pub fn parse_mu(text: &str) -> Result<f64> {
    let t = text.trim();
    let value = match t.strip_prefix("2^") {
        Some(exp) => exp.parse::<i32>().map(|e| 2f64.powi(e)).ok(),
        None => t.parse::<f64>().ok(),
    };
    value.ok_or_else(|| Error::Usage(format!("cannot parse mu `{t}`")))
}

fn parse_num<T: FromStr>(key: &str, text: &str) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| Error::Usage(format!("cannot parse `{text}` for `{key}`")))
}

/// File-name fragment for a penalty value, e.g. `mu0.0625`.
pub fn mu_tag(mu: f64) -> String {
    format!("mu{mu}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(k: &str, v: &[&str]) -> (String, Vec<String>) {
        (k.to_string(), v.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn config_syntax() {
        let parsed = parse_config("# header\nmu = 2^-4, 0.5 # two values\n\nseed=7\nimages =\n").unwrap();
        assert_eq!(parsed, vec![kv("mu", &["2^-4", "0.5"]), kv("seed", &["7"]), kv("images", &[])]);
        assert!(parse_config("no equals sign").is_err());
    }

    #[test]
    fn mu_notation() {
        assert_eq!(parse_mu("2^-8").unwrap(), 0.00390625);
        assert_eq!(parse_mu(" 0.5 ").unwrap(), 0.5);
        assert!(parse_mu("half").is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "seed = 3\nmu = 0.5\natoms = 128\n").unwrap();
        let spec = ExperimentSpec::resolve(Command::Learn, Some(&cfg), &[kv("seed", &["9"])]).unwrap();
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.mus, vec![0.5]);
        assert_eq!(spec.atoms, 128);
    }

    #[test]
    fn manifest_round_trips() {
        let mut spec = ExperimentSpec::new(Command::Sweep);
        spec.images = vec!["a.pgm".into(), "b.png".into()];
        spec.test_images = vec!["c.pgm".into()];
        spec.solvers = vec![SolverId::Ista, SolverId::FpcBb];
        spec.mus = vec![2f64.powi(-8), 0.1];
        spec.patches = Some(vec![4, 8]);
        spec.eps2 = Some(1e-6);
        spec.seed = 42;
        spec.bcd.max_sweeps = 3;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_NAME);
        fs::write(&path, spec.manifest(&["sweep.csv".into()])).unwrap();
        let back = ExperimentSpec::resolve(Command::Sweep, Some(&path), &[]).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn validation_failures() {
        let mut spec = ExperimentSpec::new(Command::Learn);
        assert!(matches!(spec.validate(), Err(Error::Usage(_))));
        spec.images = vec!["/definitely/not/here.pgm".into()];
        let err = spec.validate().unwrap_err();
        assert!(matches!(err, Error::MissingPath(_)));
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("/definitely/not/here.pgm"));
        spec.mus.clear();
        assert!(matches!(spec.validate(), Err(Error::Usage(_))));
        assert!(ExperimentSpec::new(Command::Learn).set("bogus", &["1".into()]).is_err());
    }
}
