use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use urbanscope::eval::BenchmarkSpec;
use urbanscope::harness::ModelEndpoint;
use urbanscope::nav::NavSuiteConfig;
use urbanscope::swft::DEFAULT_RATIO_QUANTILE;

use crate::error::CliError;

/// Everything a pipeline run needs. Loaded from one JSON file, then
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Canonical map JSONL; commands fall back to `<out>/map.jsonl`.
    pub map: Option<PathBuf>,
    /// Optional taxonomy JSON (`{"categories": [{"name", "function"}]}`).
    pub taxonomy: Option<PathBuf>,
    /// Required by every command that samples anything.
    pub seed: Option<u64>,
    pub out: PathBuf,
    /// Worker threads for data generation; the default uses every core.
    pub workers: Option<usize>,
    /// `import-map` builds a seeded synthetic city of this many entities
    /// when no map file is given.
    pub synthetic_entities: Option<usize>,
    pub synth: SynthCounts,
    pub benchmark: BenchmarkSpec,
    pub nav: NavSuiteConfig,
    pub endpoint: ModelEndpoint,
    pub shots: usize,
    pub inputs: Inputs,
    pub swft: SwftSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            map: None,
            taxonomy: None,
            seed: None,
            out: PathBuf::from("out"),
            workers: None,
            synthetic_entities: None,
            synth: SynthCounts::default(),
            benchmark: BenchmarkSpec::default(),
            nav: NavSuiteConfig::default(),
            endpoint: ModelEndpoint::default(),
            shots: 0,
            inputs: Inputs::default(),
            swft: SwftSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthCounts {
    pub cityqa: usize,
    pub citywalk: usize,
    pub cityreasoning: usize,
    /// Synthetic one-day trajectories (and matching agendas) for the
    /// mobility tasks; 0 skips them.
    pub trajectories: usize,
    pub two_round_fraction: f64,
    pub min_route_m: f64,
    pub max_route_m: f64,
    /// Template JSON replacing the bundled set.
    pub templates: Option<PathBuf>,
}

impl Default for SynthCounts {
    fn default() -> Self {
        Self {
            cityqa: 48_551,
            citywalk: 30_000,
            cityreasoning: 7_992,
            trajectories: 500,
            two_round_fraction: 0.13,
            min_route_m: 500.0,
            max_route_m: 5000.0,
            templates: None,
        }
    }
}

/// Files consumed by later stages. Unset entries default to the matching
/// artifact in the output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// Instruction datasets checked for leakage by `gen-eval`.
    pub training: Vec<PathBuf>,
    pub benchmark: Option<PathBuf>,
    pub exemplars: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
    pub agendas: Option<PathBuf>,
    pub nav_tasks: Option<PathBuf>,
    pub losses: Option<PathBuf>,
    /// Dataset to export with SWFT weights attached.
    pub dataset: Option<PathBuf>,
    pub results: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwftSettings {
    pub ratio_quantile: f64,
}

impl Default for SwftSettings {
    fn default() -> Self {
        Self { ratio_quantile: DEFAULT_RATIO_QUANTILE }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub map: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub endpoint_url: Option<String>,
    pub model: Option<String>,
    pub shots: Option<usize>,
    pub max_in_flight: Option<usize>,
}

impl RunConfig {
    /// Read `path` (if any), resolve its relative paths against the file's
    /// directory, apply the overrides and validate.
    pub fn load(path: Option<&Path>, flags: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                let mut cfg: RunConfig = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(""));
                cfg.rebase(base);
                cfg
            }
            None => RunConfig::default(),
        };
        if let Some(m) = &flags.map {
            cfg.map = Some(m.clone());
        }
        if let Some(s) = flags.seed {
            cfg.seed = Some(s);
        }
        if let Some(o) = &flags.out {
            cfg.out = o.clone();
        }
        if let Some(u) = &flags.endpoint_url {
            cfg.endpoint.base_url = u.clone();
        }
        if let Some(m) = &flags.model {
            cfg.endpoint.model = m.clone();
        }
        if let Some(s) = flags.shots {
            cfg.shots = s;
        }
        if let Some(k) = flags.max_in_flight {
            cfg.endpoint.max_in_flight = k;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.map, &mut self.taxonomy, &mut self.synth.templates].into_iter().flatten() {
            fix(p);
        }
        fix(&mut self.out);
        let i = &mut self.inputs;
        for p in [&mut i.benchmark, &mut i.exemplars, &mut i.trajectories, &mut i.agendas, &mut i.nav_tasks, &mut i.losses, &mut i.dataset]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        i.training.iter_mut().chain(i.results.iter_mut()).for_each(fix);
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let field = |name: &str, msg: &str| Err(CliError::Config(format!("{name}: {msg}")));
        if self.shots > 0 && !matches!(self.shots, 1 | 5) {
            return field("shots", "must be 0, 1 or 5");
        }
        if self.endpoint.max_in_flight == 0 {
            return field("endpoint.max_in_flight", "must be at least 1");
        }
        if self.workers == Some(0) {
            return field("workers", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.synth.two_round_fraction) {
            return field("synth.two_round_fraction", "must lie in [0, 1]");
        }
        if !(self.synth.min_route_m > 0.0 && self.synth.min_route_m <= self.synth.max_route_m) {
            return field("synth.min_route_m", "route window must satisfy 0 < min_route_m <= max_route_m");
        }
        if !(0.0..=1.0).contains(&self.swft.ratio_quantile) {
            return field("swft.ratio_quantile", "must lie in [0, 1]");
        }
        if self.nav.count == 0 || self.nav.max_min_steps == 0 {
            return field("nav", "count and max_min_steps must be positive");
        }
        self.benchmark.validate().map_err(|e| CliError::Config(format!("benchmark: {e}")))?;
        for (name, p) in [("map", &self.map), ("taxonomy", &self.taxonomy), ("synth.templates", &self.synth.templates)] {
            if let Some(p) = p {
                if !p.exists() {
                    return field(name, &format!("{} does not exist", p.display()));
                }
            }
        }
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Config("seed: required (set \"seed\" in the config or pass --seed)".into()))
    }

    pub fn map_path(&self) -> PathBuf {
        self.map.clone().unwrap_or_else(|| self.out.join("map.jsonl"))
    }

    pub fn input(&self, configured: &Option<PathBuf>, default_name: &str) -> PathBuf {
        configured.clone().unwrap_or_else(|| self.out.join(default_name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_reported_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 1, "synth": {"citywalks": 3}}"#).unwrap();
        let err = RunConfig::load(Some(&p), &Overrides::default()).unwrap_err().to_string();
        assert!(err.contains("citywalks"), "{err}");
    }

    #[test]
    fn flags_override_the_file_and_paths_are_rebased() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 1, "out": "o", "shots": 1, "endpoint": {"model": "m"}}"#).unwrap();
        let flags = Overrides { seed: Some(9), shots: Some(5), ..Overrides::default() };
        let cfg = RunConfig::load(Some(&p), &flags).unwrap();
        assert_eq!((cfg.seed, cfg.shots, cfg.endpoint.model.as_str()), (Some(9), 5, "m"));
        assert_eq!(cfg.out, dir.path().join("o"));
        assert_eq!(cfg.synth.citywalk, 30_000);
    }

    #[test]
    fn invalid_values_fail_validation() {
        let flags = Overrides { shots: Some(3), ..Overrides::default() };
        assert!(matches!(RunConfig::load(None, &flags), Err(CliError::Config(_))));
        assert!(RunConfig::load(None, &Overrides::default()).unwrap().require_seed().is_err());
    }
}
