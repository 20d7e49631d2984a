//! JSON fit configuration: datasets with their models, ranks, weights and
//! per-mode regularizers, an optional coupling block and solver settings.
//!
//! ```json
//! {
//!   "datasets": [
//!     {"name": "X", "model": "parafac2", "path": "X", "rank": 3, "weight": 0.5,
//!      "regularizers": {"A": {"type": "nonneg"}, "C": [{"type": "ridge", "lambda": 1e-4}]}},
//!     {"name": "Y", "model": "matrix", "path": "Y.csv", "rank": 3}
//!   ],
//!   "coupling": {"participants": [{"dataset": "X"}, {"dataset": "Y", "columns": [0, 1, null]}],
//!                "delta_cols": 3},
//!   "solver": {"initializations": 3, "seed": 7}
//! }
//! ```
//!
//! Relative data paths are resolved against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use crate::coupling::CouplingSpec;
use crate::error::{CmtfError, Result};
use crate::io::{read_data, DataKind};
use crate::prox::Regularizer;
use crate::solver::{Dataset, ProblemSpec, SolverConfig};

const DEFAULT_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Parafac2,
    Cp,
    Matrix,
}

impl ModelKind {
    pub fn data_kind(self) -> DataKind {
        match self {
            ModelKind::Parafac2 => DataKind::Ragged,
            ModelKind::Cp => DataKind::Dense,
            ModelKind::Matrix => DataKind::Matrix,
        }
    }

    pub fn mode_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Parafac2 => &["A", "B", "C"],
            ModelKind::Cp => &["E", "F", "G"],
            ModelKind::Matrix => &["E", "F"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegularizerConfig {
    None,
    Nonneg,
    Ridge { lambda: f64 },
    L2ball,
    NonnegL2ball,
    Smoothness { strength: f64 },
}

impl RegularizerConfig {
    pub fn build(&self) -> Result<Regularizer> {
        Ok(match self {
            RegularizerConfig::None => Regularizer::None,
            RegularizerConfig::Nonneg => Regularizer::NonNegativity,
            RegularizerConfig::Ridge { lambda } => Regularizer::ridge(*lambda)?,
            RegularizerConfig::L2ball => Regularizer::UnitBallL2,
            RegularizerConfig::NonnegL2ball => Regularizer::NonNegUnitBallL2,
            RegularizerConfig::Smoothness { strength } => Regularizer::path_smoothness(*strength)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub model: ModelKind,
    pub path: PathBuf,
    pub rank: usize,
    #[serde(default = "default_weight")]
    pub weight: f64,
    /// Either a list with one entry per mode or an object keyed by mode
    /// name (`A`, `B`, ...) or index; each entry is one regularizer or a list.
    #[serde(default)]
    pub regularizers: Value,
}

fn default_weight() -> f64 {
    DEFAULT_WEIGHT
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantConfig {
    pub dataset: String,
    /// `"all"` (the default) or one dictionary column index or `null` per factor column.
    #[serde(default)]
    pub columns: Value,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub participants: Vec<ParticipantConfig>,
    pub delta_cols: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub coupling: Option<CouplingConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn config_error(path: &str, msg: impl std::fmt::Display) -> CmtfError {
    CmtfError::Config(format!("{path}: {msg}"))
}

impl FitConfig {
    /// Parses a config document. Errors name the offending field and, for
    /// syntax or type errors, the line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: FitConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                CmtfError::Config(inner.to_string())
            } else {
                config_error(&path, inner)
            }
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CmtfError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CmtfError::Config(msg) => CmtfError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn check(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(config_error("datasets", "at least one dataset is required"));
        }
        for (i, ds) in self.datasets.iter().enumerate() {
            if self.datasets[..i].iter().any(|d| d.name == ds.name) {
                return Err(config_error(&format!("datasets[{i}].name"), format!("duplicate name {:?}", ds.name)));
            }
            self.regularizers(i)?;
        }
        if let Some(c) = &self.coupling {
            self.coupling_spec(c)?;
        }
        Ok(())
    }

    fn dataset_index(&self, name: &str) -> Option<usize> {
        self.datasets.iter().position(|d| d.name == name)
    }

    /// Per-mode regularizer lists of dataset `i`.
    pub fn regularizers(&self, i: usize) -> Result<Vec<Vec<Regularizer>>> {
        let ds = &self.datasets[i];
        let names = ds.model.mode_names();
        let field = format!("datasets[{i}].regularizers");
        let mut out = vec![Vec::new(); names.len()];
        let mut assign = |mode: usize, value: &Value, at: String| -> Result<()> {
            out[mode] = parse_mode_regularizers(value, &at)?;
            Ok(())
        };
        match &ds.regularizers {
            Value::Null => {}
            Value::Array(modes) => {
                if modes.len() != names.len() {
                    return Err(config_error(
                        &field,
                        format!("{} entries for a {} mode model", modes.len(), names.len()),
                    ));
                }
                for (m, v) in modes.iter().enumerate() {
                    assign(m, v, format!("{field}[{m}]"))?;
                }
            }
            Value::Object(map) => {
                for (key, v) in map {
                    let mode = names
                        .iter()
                        .position(|n| n == key)
                        .or_else(|| key.parse::<usize>().ok().filter(|&m| m < names.len()))
                        .ok_or_else(|| {
                            config_error(&field, format!("unknown mode {key:?}, expected one of {names:?}"))
                        })?;
                    assign(mode, v, format!("{field}.{key}"))?;
                }
            }
            _ => return Err(config_error(&field, "expected a list or an object")),
        }
        Ok(out)
    }

    fn coupling_spec(&self, c: &CouplingConfig) -> Result<CouplingSpec> {
        let mut participants = Vec::with_capacity(c.participants.len());
        let mut selectors = Vec::with_capacity(c.participants.len());
        let mut all_exact = true;
        for (p, part) in c.participants.iter().enumerate() {
            let at = format!("coupling.participants[{p}]");
            let d = self
                .dataset_index(&part.dataset)
                .ok_or_else(|| config_error(&format!("{at}.dataset"), format!("no dataset named {:?}", part.dataset)))?;
            participants.push(d);
            let rank = self.datasets[d].rank;
            let sel = match &part.columns {
                Value::Null => None,
                Value::String(s) if s == "all" => None,
                Value::Array(cols) => {
                    let mut sel = Vec::with_capacity(cols.len());
                    for (j, v) in cols.iter().enumerate() {
                        sel.push(match v {
                            Value::Null => None,
                            v => Some(v.as_u64().ok_or_else(|| {
                                config_error(&format!("{at}.columns[{j}]"), "expected a column index or null")
                            })? as usize),
                        });
                    }
                    Some(sel)
                }
                _ => return Err(config_error(&format!("{at}.columns"), "expected \"all\" or a list")),
            };
            all_exact &= sel.is_none();
            selectors.push(sel.unwrap_or_else(|| (0..rank).map(Some).collect()));
        }
        let implied = selectors.iter().flatten().flatten().map(|&c| c + 1).max().unwrap_or(0);
        let delta_cols = c.delta_cols.unwrap_or(implied);
        let spec = if all_exact {
            CouplingSpec::exact(participants, delta_cols)
        } else {
            CouplingSpec::column_selection(participants, selectors, delta_cols)
        };
        spec.map_err(|e| config_error("coupling", e))
    }

    /// Reads every dataset (relative paths against `base`) and assembles the problem.
    pub fn build_problem(&self, base: &Path) -> Result<ProblemSpec> {
        let mut datasets = Vec::with_capacity(self.datasets.len());
        for (i, dc) in self.datasets.iter().enumerate() {
            let path = if dc.path.is_absolute() {
                dc.path.clone()
            } else {
                base.join(&dc.path)
            };
            let data = read_data(&path, dc.model.data_kind())?;
            let mut ds = Dataset::new(dc.name.clone(), data, dc.rank, dc.weight);
            ds.regularizers = self.regularizers(i)?;
            datasets.push(ds);
        }
        let coupling = self.coupling.as_ref().map(|c| self.coupling_spec(c)).transpose()?;
        let problem = ProblemSpec { datasets, coupling };
        problem.validate()?;
        Ok(problem)
    }
}

fn parse_mode_regularizers(value: &Value, at: &str) -> Result<Vec<Regularizer>> {
    let one = |v: &Value, at: &str| -> Result<Regularizer> {
        let cfg: RegularizerConfig = serde_json::from_value(v.clone()).map_err(|e| config_error(at, e))?;
        cfg.build().map_err(|e| config_error(at, e))
    };
    match value {
        Value::Null => Ok(Vec::new()),
        Value::Array(items) => items
            .iter()
            .enumerate()
            .map(|(j, v)| one(v, &format!("{at}[{j}]")))
            .collect(),
        v => Ok(vec![one(v, at)?]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"{
        "datasets": [
            {"name": "X", "model": "parafac2", "path": "X", "rank": 3,
             "regularizers": {"A": {"type": "nonneg"}, "C": [{"type": "ridge", "lambda": 0.1}, {"type": "nonneg"}]}},
            {"name": "Y", "model": "matrix", "path": "Y.csv", "rank": 3, "weight": 0.25,
             "regularizers": [null, {"type": "smoothness", "strength": 2}]}
        ],
        "coupling": {"participants": [{"dataset": "X"}, {"dataset": "Y", "columns": "all"}]},
        "solver": {"initializations": 2, "seed": 11}
    }"#;

    #[test]
    fn parses_regularizers_and_defaults() {
        let cfg = FitConfig::parse(BASIC).unwrap();
        assert_eq!(cfg.datasets[0].weight, 0.5);
        assert_eq!(cfg.datasets[1].weight, 0.25);
        assert_eq!(cfg.solver.initializations, 2);
        assert_eq!(cfg.solver.max_outer_iterations, 2000);
        let regs = cfg.regularizers(0).unwrap();
        assert_eq!(regs[0], vec![Regularizer::NonNegativity]);
        assert!(regs[1].is_empty());
        assert_eq!(regs[2], vec![Regularizer::Ridge { lambda: 0.1 }, Regularizer::NonNegativity]);
        let regs = cfg.regularizers(1).unwrap();
        assert_eq!(regs[1], vec![Regularizer::path_smoothness(2.0).unwrap()]);
        let spec = cfg.coupling_spec(cfg.coupling.as_ref().unwrap()).unwrap();
        assert_eq!(spec.kind(), &crate::coupling::CouplingKind::Exact);
        assert_eq!(spec.delta_cols(), 3);
    }

    #[test]
    fn column_selection_infers_dictionary_width() {
        let text = BASIC.replace(r#""columns": "all""#, r#""columns": [0, 3, null]"#);
        let cfg = FitConfig::parse(&text).unwrap();
        let spec = cfg.coupling_spec(cfg.coupling.as_ref().unwrap()).unwrap();
        assert_eq!(spec.delta_cols(), 4);
        assert_eq!(spec.selector(1), vec![Some(0), Some(3), None]);
    }

    #[test]
    fn errors_name_the_field() {
        let bad_type = BASIC.replace(r#""type": "nonneg"}, "C""#, r#""type": "sparse"}, "C""#);
        let msg = FitConfig::parse(&bad_type).unwrap_err().to_string();
        assert!(msg.contains("datasets[0].regularizers.A"), "{msg}");

        let bad_rank = BASIC.replace(r#""rank": 3,
             "regularizers": {"A""#, r#""rank": "three",
             "regularizers": {"A""#);
        let msg = FitConfig::parse(&bad_rank).unwrap_err().to_string();
        assert!(msg.contains("datasets[0].rank") && msg.contains("line 3"), "{msg}");

        let msg = FitConfig::parse(&BASIC.replace(r#""dataset": "Y""#, r#""dataset": "Z""#))
            .unwrap_err()
            .to_string();
        assert!(msg.contains("coupling.participants[1].dataset"), "{msg}");

        let msg = FitConfig::parse(&BASIC.replace(r#""seed": 11"#, r#""sede": 11"#))
            .unwrap_err()
            .to_string();
        assert!(msg.contains("solver") && msg.contains("sede"), "{msg}");

        let msg = FitConfig::parse(&BASIC.replace(r#""A": {"#, r#""Q": {"#)).unwrap_err().to_string();
        assert!(msg.contains("unknown mode \"Q\""), "{msg}");

        assert!(FitConfig::parse("{\"datasets\": [").unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn missing_data_file_reports_the_path() {
        let cfg = FitConfig::parse(BASIC).unwrap();
        let err = cfg.build_problem(Path::new("/nonexistent-dir")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/X"), "{err}");
        assert!(!err.is_solver_failure());
    }
}
