//! TOML run configurations, one document per command. Unknown keys are
//! errors. Relative paths inside a config file are resolved against the
//! file's directory; paths given as flags are used as they are.

use std::path::{Path, PathBuf};

use genbayes_core::misspec::{ProxyFamily, TrueDensity};
use genbayes_core::LogPrior;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DEFAULT_SEED: u64 = 1;

/// A scalar broadcast to every coordinate, or one value per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn expand(&self, len: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            OneOrMany::One(x) => Ok(vec![*x; len]),
            OneOrMany::Many(v) if v.len() == len => Ok(v.clone()),
            OneOrMany::Many(v) => Err(CliError::config(format!("{what} has {} entries, expected {len}", v.len()))),
        }
    }
}

/// Loss for the generic fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LossSpec {
    Squared,
    Absolute,
    Pinball {
        tau: f64,
    },
    Huber {
        k: f64,
    },
    /// Lower quartile, median and upper quartile jointly.
    Quartiles,
    /// Negative log-density of a normal with known `sd` (location or regression).
    Normal {
        sd: f64,
    },
    NormalLocationScale,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorSpec {
    Normal { means: OneOrMany, variances: OneOrMany },
    OrderedNormal { means: OneOrMany, variances: OneOrMany },
    Uniform { lower: OneOrMany, upper: OneOrMany },
}

impl PriorSpec {
    pub fn build(&self, dim: usize) -> Result<LogPrior> {
        Ok(match self {
            PriorSpec::Normal { means, variances } => {
                LogPrior::normal(means.expand(dim, "prior means")?, variances.expand(dim, "prior variances")?)?
            }
            PriorSpec::OrderedNormal { means, variances } => {
                LogPrior::ordered_normal(means.expand(dim, "prior means")?, variances.expand(dim, "prior variances")?)?
            }
            PriorSpec::Uniform { lower, upper } => {
                LogPrior::uniform(lower.expand(dim, "prior lower bounds")?, upper.expand(dim, "prior upper bounds")?)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSpec {
    Fixed {
        value: f64,
    },
    UnitInformation {
        mc_draws: Option<usize>,
    },
    /// `w` sampled jointly with flat prior on `(0, w_max)`.
    Hierarchical {
        xi: f64,
        w_max: Option<f64>,
    },
    Operational {
        alpha: f64,
        grid: Vec<f64>,
        replications: usize,
        coordinate: Option<usize>,
        iterations: Option<usize>,
        burn_in: Option<usize>,
    },
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Fixed { value: 1.0 }
    }
}

pub const DEFAULT_MC_DRAWS: usize = 10_000;
pub const DEFAULT_W_MAX: f64 = 1e3;

/// Data-generating densities for `misspec` and `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensitySpec {
    Normal { mean: f64, var: f64 },
    Mixture { weights: [f64; 2], means: [f64; 2], vars: [f64; 2] },
    Exponential { rate: f64 },
}

impl DensitySpec {
    pub fn build(&self) -> Result<TrueDensity> {
        Ok(match *self {
            DensitySpec::Normal { mean, var } => TrueDensity::normal(mean, var)?,
            DensitySpec::Mixture { weights, means, vars } => TrueDensity::mixture(weights, means, vars)?,
            DensitySpec::Exponential { rate } => TrueDensity::exponential(rate)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    NormalLocation { var: f64 },
    NormalLocationScale,
}

impl FamilySpec {
    pub fn build(&self) -> Result<ProxyFamily> {
        match *self {
            FamilySpec::NormalLocation { var } if var > 0.0 && var.is_finite() => Ok(ProxyFamily::NormalLocation { var }),
            FamilySpec::NormalLocation { .. } => Err(CliError::config("family variance must be positive")),
            FamilySpec::NormalLocationScale => Ok(ProxyFamily::NormalLocationScale),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub level: Option<f64>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub loss: Option<LossSpec>,
    pub prior: Option<PriorSpec>,
    pub weight: Option<WeightSpec>,
    pub step_scales: Option<Vec<f64>>,
    pub start: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoxBfConfig {
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Slab variance per marker.
    pub v: Option<OneOrMany>,
    pub methods: Option<Vec<String>>,
    pub is_draws: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoxSelectConfig {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub v: Option<OneOrMany>,
    /// Prior inclusion probability per marker; defaults to `1/p`.
    pub a: Option<OneOrMany>,
    pub model_cap: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxplotConfigFile {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub level: Option<f64>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub prior_means: Option<[f64; 3]>,
    pub prior_variances: Option<OneOrMany>,
    pub weight: Option<WeightSpec>,
    pub step_scales: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MisspecConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub truth: Option<DensitySpec>,
    pub family: Option<FamilySpec>,
    pub prior: Option<PriorSpec>,
    pub schedule: Option<Vec<usize>>,
    pub eps: Option<OneOrMany>,
    pub n_seeds: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub label: String,
    pub n: usize,
    pub distribution: DensitySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Cox {
        n: usize,
        beta: Vec<f64>,
        baseline_hazard: f64,
        /// Target censored fraction.
        censoring: f64,
        /// Minor-allele frequency per marker.
        maf: OneOrMany,
    },
    Grouped {
        groups: Vec<GroupSpec>,
    },
    Scalar {
        n: usize,
        distribution: DensitySpec,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
}

/// Parses `path` as a config of type `T` and resolves its relative paths.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<(T, PathBuf)> {
    let Some(path) = path else {
        return Ok((T::default(), PathBuf::new()));
    };
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let config = toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, base))
}

/// A config-file path made relative to the config's directory.
pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<CoxBfConfig>("seed = 1\nv = 0.5\n").is_ok());
        assert!(toml::from_str::<CoxBfConfig>("seed = 1\nbogus = 2\n").is_err());
        assert!(toml::from_str::<FitConfig>("[loss]\nkind = \"pinball\"\ntau = 0.3\nextra = 1\n").is_err());
        assert!(toml::from_str::<FitConfig>("[weight]\nrule = \"fixed\"\nvalue = 2.0\n").is_ok());
    }

    #[test]
    fn scalars_broadcast() {
        let c: CoxSelectConfig = toml::from_str("v = 0.5\na = [0.1, 0.2]\n").unwrap();
        assert_eq!(c.v.unwrap().expand(3, "v").unwrap(), vec![0.5; 3]);
        assert!(c.a.unwrap().expand(3, "a").is_err());
    }

    #[test]
    fn simulate_config_round_trips() {
        let c = SimulateConfig {
            seed: Some(9),
            out: Some("x.csv".into()),
            generator: Some(GeneratorSpec::Cox {
                n: 10,
                beta: vec![0.5, 0.0],
                baseline_hazard: 1.0,
                censoring: 0.3,
                maf: OneOrMany::One(0.25),
            }),
        };
        let text = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<SimulateConfig>(&text).unwrap(), c);
    }
}
