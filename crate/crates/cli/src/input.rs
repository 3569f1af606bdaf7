//! Problem and experiment files.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use scenario_cert::canonical::CanonicalForm;
use scenario_cert::cascade::SecondStageSpec;
use scenario_cert::sampling::DistributionSpec;
use scenario_cert::scenario::ScenarioProblem;
use scenario_cert::validate::Method;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_N_FRESH: usize = 100_000;
pub const DEFAULT_CI_LEVEL: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: u32,
    pub problem: ScenarioProblem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_stage: Option<SecondStageSpec>,
    pub distribution: DistributionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_tag: Option<CanonicalForm>,
}

impl ProblemFile {
    pub fn canonical(form: CanonicalForm) -> Self {
        ProblemFile {
            schema_version: SCHEMA_VERSION,
            problem: form.problem(),
            second_stage: form.second_stage(),
            distribution: DistributionSpec::uniform_unit(1),
            canonical_tag: Some(form),
        }
    }

    /// Cross-checks that serde cannot express.
    pub fn check(&self) -> Result<(), CliError> {
        check_version(self.schema_version)?;
        check_parts(&self.problem, self.second_stage.as_ref(), &self.distribution, self.canonical_tag)
    }

    pub fn second_stage(&self) -> Result<&SecondStageSpec, CliError> {
        self.second_stage
            .as_ref()
            .ok_or_else(|| CliError::Usage("this command needs a `second_stage` in the problem file".into()))
    }
}

fn check_version(v: u32) -> Result<(), CliError> {
    if v != SCHEMA_VERSION {
        return Err(CliError::Schema {
            path: "schema_version".into(),
            message: format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
        });
    }
    Ok(())
}

fn check_parts(
    problem: &ScenarioProblem,
    second_stage: Option<&SecondStageSpec>,
    distribution: &DistributionSpec,
    tag: Option<CanonicalForm>,
) -> Result<(), CliError> {
    let schema = |path: &str, e: scenario_cert::Error| CliError::Schema {
        path: path.into(),
        message: e.to_string(),
    };
    problem.validate().map_err(|e| schema("problem", e))?;
    distribution.validate().map_err(|e| schema("distribution", e))?;
    if distribution.dim() != problem.n_delta {
        return Err(CliError::Schema {
            path: "distribution".into(),
            message: format!(
                "distribution has dimension {}, problem.n_delta is {}",
                distribution.dim(),
                problem.n_delta
            ),
        });
    }
    if let Some(stage) = second_stage {
        stage.validate(problem).map_err(|e| schema("second_stage", e))?;
    }
    if let Some(form) = tag {
        if !form.matches(problem, second_stage) {
            return Err(CliError::Schema {
                path: "canonical_tag".into(),
                message: format!("problem is not the registered `{}` form", form.name()),
            });
        }
    }
    Ok(())
}

/// A sweep over `m × epsilon × method`, each cell run with the same seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub schema_version: u32,
    pub problem: ScenarioProblem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_stage: Option<SecondStageSpec>,
    pub distribution: DistributionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_tag: Option<CanonicalForm>,
    pub m: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub method: Vec<Method>,
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_fresh: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_level: Option<f64>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl ExperimentGrid {
    pub fn check(&self) -> Result<(), CliError> {
        check_version(self.schema_version)?;
        check_parts(&self.problem, self.second_stage.as_ref(), &self.distribution, self.canonical_tag)?;
        for (name, empty) in [("m", self.m.is_empty()), ("epsilon", self.epsilon.is_empty()), ("method", self.method.is_empty())] {
            if empty {
                return Err(CliError::Schema {
                    path: name.into(),
                    message: "sweep axis is empty".into(),
                });
            }
        }
        Ok(())
    }
}

/// Parses JSON, reporting the field path of the first schema error.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Schema {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    parse(&text)
}
