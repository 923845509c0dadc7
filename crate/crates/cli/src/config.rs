//! Experiment configuration: a TOML file with global settings and one
//! `[[experiments]]` table per run. See `docs/config.md` for the schema.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use quantcurv::bargmann::FockTruncation;
use quantcurv::numerics::OdeStepper;
use quantcurv::schrodinger::MAX_TIME;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Levels above this take longer than a desk-scale run should.
pub const MAX_LEVEL: u32 = 128;
pub const MAX_TRANSPORT_LEVEL: u32 = 64;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    pub experiments: Vec<Experiment>,
}

// Unknown keys are rejected by the per-kind parameter tables; serde cannot
// deny them on a struct that flattens another.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct Experiment {
    /// Identifier echoed in every CSV row; defaults to `<kind>-<index>`.
    #[serde(default)]
    pub name: Option<String>,
    /// CSV path, relative to the config file.
    pub output: PathBuf,
    #[serde(flatten)]
    pub params: Params,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Params {
    BargmannCurvature(BargmannParams),
    SphereConvergence(SphereParams),
    SchrodingerIntertwine(TransportParams),
    TeichmullerSymbol(SliceParams),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BargmannParams {
    pub n: usize,
    pub level: u32,
    #[serde(default = "defaults::degree")]
    pub degree: usize,
    #[serde(default = "defaults::curvature_tolerance")]
    pub tolerance: f64,
    /// Random `p`-pairs for the scalar-curvature check; 0 disables it.
    #[serde(default)]
    pub random_pairs: usize,
    #[serde(default = "defaults::random_pair_tolerance")]
    pub random_pair_tolerance: f64,
    #[serde(default = "defaults::ratio_tolerance")]
    pub ratio_tolerance: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SphereParams {
    pub levels: Vec<u32>,
    #[serde(default = "defaults::max_ratio")]
    pub max_ratio: f64,
    #[serde(default = "defaults::trace_tolerance")]
    pub trace_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedHamiltonian {
    Rotation,
    Twist,
    PairFirst,
    PairSecond,
}

impl NamedHamiltonian {
    pub fn label(self) -> &'static str {
        match self {
            NamedHamiltonian::Rotation => "rotation",
            NamedHamiltonian::Twist => "twist",
            NamedHamiltonian::PairFirst => "pair-first",
            NamedHamiltonian::PairSecond => "pair-second",
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TransportParams {
    pub level: u32,
    pub dt: f64,
    pub t_end: f64,
    pub hamiltonians: Vec<NamedHamiltonian>,
    #[serde(default = "defaults::intertwine_tolerance")]
    pub tolerance: f64,
    #[serde(default = "defaults::residual_tolerance")]
    pub residual_tolerance: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SliceParams {
    #[serde(default = "defaults::samples")]
    pub samples: usize,
    #[serde(default = "defaults::pairing_tolerance")]
    pub tolerance: f64,
    #[serde(default = "defaults::structure_tolerance")]
    pub structure_tolerance: f64,
    #[serde(default = "defaults::reduction_tolerance")]
    pub reduction_tolerance: f64,
}

mod defaults {
    pub fn degree() -> usize {
        12
    }
    pub fn curvature_tolerance() -> f64 {
        1e-10
    }
    pub fn random_pair_tolerance() -> f64 {
        1e-8
    }
    pub fn ratio_tolerance() -> f64 {
        1e-6
    }
    pub fn max_ratio() -> f64 {
        0.7
    }
    pub fn trace_tolerance() -> f64 {
        0.1
    }
    pub fn intertwine_tolerance() -> f64 {
        1e-3
    }
    pub fn residual_tolerance() -> f64 {
        1e-5
    }
    pub fn samples() -> usize {
        1000
    }
    pub fn pairing_tolerance() -> f64 {
        1e-10
    }
    pub fn structure_tolerance() -> f64 {
        1e-9
    }
    pub fn reduction_tolerance() -> f64 {
        1e-12
    }
}

impl Params {
    pub fn kind(&self) -> &'static str {
        match self {
            Params::BargmannCurvature(_) => "bargmann-curvature",
            Params::SphereConvergence(_) => "sphere-convergence",
            Params::SchrodingerIntertwine(_) => "schrodinger-intertwine",
            Params::TeichmullerSymbol(_) => "teichmuller-symbol",
        }
    }
}

/// A validated experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Job {
    pub index: usize,
    pub name: String,
    pub output: PathBuf,
    pub seed: u64,
    pub hash: String,
    pub params: Params,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Checks every experiment against the preconditions of the module it
    /// drives and resolves names, outputs and hashes. Nothing is computed
    /// unless the whole file is valid.
    pub fn jobs(&self, base: &Path) -> Result<Vec<Job>, CliError> {
        if self.experiments.is_empty() {
            return Err(CliError::Config("config lists no experiments".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        let mut names = HashSet::new();
        let mut outputs = HashSet::new();
        let mut jobs = Vec::with_capacity(self.experiments.len());
        for (index, e) in self.experiments.iter().enumerate() {
            let name = e.name.clone().unwrap_or_else(|| format!("{}-{index}", e.params.kind()));
            let fail = |msg: String| CliError::Config(format!("experiment {name} ({}): {msg}", e.params.kind()));
            validate(&e.params).map_err(fail)?;
            if !names.insert(name.clone()) {
                return Err(fail("duplicate experiment name".into()));
            }
            let output = base.join(&e.output);
            if !outputs.insert(output.clone()) {
                return Err(fail(format!("output {} is used twice", output.display())));
            }
            jobs.push(Job {
                index,
                hash: config_hash(self.seed, e),
                name,
                output,
                seed: self.seed,
                params: e.params.clone(),
            });
        }
        Ok(jobs)
    }
}

/// First 16 hex digits of SHA-256 over the seed and the canonical TOML
/// form of the experiment.
fn config_hash(seed: u64, e: &Experiment) -> String {
    let body = toml::to_string(e).expect("experiment tables serialize");
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(body.as_bytes())
        .finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(format!("{name} must be positive and finite, got {v}"))
    }
}

fn validate(params: &Params) -> Result<(), String> {
    match params {
        Params::BargmannCurvature(p) => {
            if p.n == 0 || p.n > 3 {
                return Err(format!("n must be in 1..=3, got {}", p.n));
            }
            if p.degree < 4 || p.degree > 16 {
                return Err(format!("degree must be in 4..=16, got {}", p.degree));
            }
            FockTruncation::new(p.n, p.level, p.degree).map_err(|e| e.to_string())?;
            positive("tolerance", p.tolerance)?;
            positive("random_pair_tolerance", p.random_pair_tolerance)?;
            positive("ratio_tolerance", p.ratio_tolerance)
        }
        Params::SphereConvergence(p) => {
            if p.levels.is_empty() {
                return Err("levels must not be empty".into());
            }
            if p.levels.windows(2).any(|w| w[1] <= w[0]) {
                return Err("levels must be strictly increasing".into());
            }
            if let Some(&bad) = p.levels.iter().find(|&&l| l == 0 || l > MAX_LEVEL) {
                return Err(format!("levels must be in 1..={MAX_LEVEL}, got {bad}"));
            }
            positive("max_ratio", p.max_ratio)?;
            positive("trace_tolerance", p.trace_tolerance)
        }
        Params::SchrodingerIntertwine(p) => {
            if p.level == 0 || p.level > MAX_TRANSPORT_LEVEL {
                return Err(format!("level must be in 1..={MAX_TRANSPORT_LEVEL}, got {}", p.level));
            }
            let stepper = OdeStepper::new(p.dt).map_err(|e| e.to_string())?;
            if !(p.t_end > 0.0 && p.t_end <= MAX_TIME) {
                return Err(format!("t_end must be in (0, {MAX_TIME}], got {}", p.t_end));
            }
            if stepper.steps_for(0.0, p.t_end) < 20 {
                return Err("t_end/dt must allow at least 20 steps".into());
            }
            if p.hamiltonians.is_empty() {
                return Err("hamiltonians must not be empty".into());
            }
            positive("tolerance", p.tolerance)?;
            positive("residual_tolerance", p.residual_tolerance)
        }
        Params::TeichmullerSymbol(p) => {
            if p.samples == 0 {
                return Err("samples must be at least 1".into());
            }
            positive("tolerance", p.tolerance)?;
            positive("structure_tolerance", p.structure_tolerance)?;
            positive("reduction_tolerance", p.reduction_tolerance)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Config {
        toml::from_str(text).unwrap()
    }

    const SLICE: &str = "seed = 5\n[[experiments]]\nkind = \"teichmuller-symbol\"\noutput = \"a.csv\"\n";

    #[test]
    fn defaults_fill_in() {
        let jobs = parse(SLICE).jobs(Path::new("/base")).unwrap();
        assert_eq!(jobs[0].name, "teichmuller-symbol-0");
        assert_eq!(jobs[0].output, Path::new("/base/a.csv"));
        match &jobs[0].params {
            Params::TeichmullerSymbol(p) => {
                assert_eq!(p.samples, 1000);
                assert_eq!(p.reduction_tolerance, 1e-12);
            }
            other => panic!("parsed as {}", other.kind()),
        }
    }

    #[test]
    fn hash_depends_on_seed_and_parameters() {
        let a = parse(SLICE).jobs(Path::new(".")).unwrap()[0].hash.clone();
        let again = parse(SLICE).jobs(Path::new(".")).unwrap()[0].hash.clone();
        let seed = parse(&SLICE.replace("seed = 5", "seed = 6")).jobs(Path::new(".")).unwrap()[0].hash.clone();
        let samples = parse(&format!("{SLICE}samples = 10\n")).jobs(Path::new(".")).unwrap()[0].hash.clone();
        assert_eq!(a, again);
        assert_eq!(a.len(), 16);
        assert_ne!(a, seed);
        assert_ne!(a, samples);
    }

    #[test]
    fn duplicates_are_rejected() {
        let twice = format!("{SLICE}{}", SLICE.replace("seed = 5", "").replace("a.csv", "b.csv"));
        assert!(parse(&twice).jobs(Path::new(".")).is_ok());
        let entry = "[[experiments]]\nkind = \"teichmuller-symbol\"\nname = \"other\"\noutput = \"a.csv\"\n";
        let same_output = format!("{SLICE}{entry}");
        let err = parse(&same_output).jobs(Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("used twice"), "{err}");
        let same_name = format!("{SLICE}name = \"x\"\n{}", entry.replace("other", "x").replace("a.csv", "b.csv"));
        let err = parse(&same_name).jobs(Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn preconditions_name_the_module() {
        let bad = "seed = 1\n[[experiments]]\nkind = \"bargmann-curvature\"\noutput = \"a.csv\"\nn = 1\nlevel = 0\n";
        let err = parse(bad).jobs(Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("bargmann"), "{err}");
        let dt = "seed = 1\n[[experiments]]\nkind = \"schrodinger-intertwine\"\noutput = \"a.csv\"\nlevel = 4\ndt = -1.0\nt_end = 1.0\nhamiltonians = [\"twist\"]\n";
        assert!(parse(dt).jobs(Path::new(".")).is_err());
        let empty = "seed = 1\nexperiments = []\n";
        assert!(parse(empty).jobs(Path::new(".")).is_err());
    }
}
