//! Experiment configurations: TOML files and the built-in experiments.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsi_core::{Domain, ObjectiveMode, ParamNodeSet, Smoother, SolveSettings};

use crate::error::{HarnessError, Result};
use crate::fixture::Fixture;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub fixture: FixtureSpec,
    pub domain: DomainSpec,
    pub params: ParamSpec,
    pub solve: SolveSpec,
    #[serde(default = "default_objective")]
    pub objective: String,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(rename = "variant")]
    pub variants: Vec<VariantSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSpec {
    /// A fixture name, or `custom` for grid functions read from CSV files.
    pub kind: String,
    /// Custom fixtures: one file per snapshot node, training parameter and
    /// evaluation parameter, relative to the config file.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot_files: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub training_files: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eval_files: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    /// Snapshot nodes.
    pub snapshots: Vec<f64>,
    /// Transport-field nodes; variants may override them.
    pub field: Vec<f64>,
    pub training: Vec<f64>,
    /// Parameters at which reconstructions and transforms are reported.
    pub eval: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSpec {
    pub iterations: usize,
    #[serde(default)]
    pub scalings: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Two-dimensional runs: curve seed points on the exact boundary.
    pub seed_points: usize,
    /// Samples per exported curve.
    pub curve_samples: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { seed_points: 9, curve_samples: 41 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub label: String,
    /// `highres` or `lowres`.
    pub transform: String,
    pub smoother: String,
    pub step: f64,
    pub steps: usize,
    /// Field levels of the multilevel smoother.
    #[serde(default = "one")]
    pub levels: usize,
    /// Low-resolution polynomial degree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    /// Low-resolution transforms keep the boundary anchors fixed.
    #[serde(default = "yes")]
    pub frozen_boundary: bool,
    /// High-resolution fields satisfy the slip condition.
    #[serde(default = "yes")]
    pub slip: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_nodes: Option<Vec<f64>>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_objective() -> String {
    "sum".into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformKind {
    HighRes,
    LowRes,
}

impl VariantSpec {
    pub fn transform_kind(&self) -> Result<TransformKind> {
        match self.transform.as_str() {
            "highres" => Ok(TransformKind::HighRes),
            "lowres" => Ok(TransformKind::LowRes),
            t => Err(HarnessError::Config(format!(
                "variant {}: unknown transform {t:?} (expected highres or lowres)",
                self.label
            ))),
        }
    }

    pub fn smoother_kind(&self) -> Result<Smoother> {
        self.smoother
            .parse()
            .map_err(|e: tsi_core::Error| HarnessError::Config(format!("variant {}: {e}", self.label)))
    }
}

/// Where snapshots and targets come from.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Analytic(Fixture),
    Custom,
}

fn config_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn source(&self) -> Result<Source> {
        if self.fixture.kind == "custom" {
            Ok(Source::Custom)
        } else {
            self.fixture
                .kind
                .parse()
                .map(Source::Analytic)
                .map_err(|e: String| HarnessError::Config(format!("{e}, custom")))
        }
    }

    pub fn domain(&self) -> Result<Domain> {
        let d = &self.domain;
        match (d.lower.len(), d.upper.len(), d.cells.len()) {
            (1, 1, 1) => Domain::interval(d.lower[0], d.upper[0], d.cells[0]).map_err(config_err),
            (2, 2, 2) => Domain::rectangle([d.lower[0], d.lower[1]], [d.upper[0], d.upper[1]], [d.cells[0], d.cells[1]])
                .map_err(config_err),
            _ => Err(HarnessError::Config("domain needs matching lower, upper and cells of length 1 or 2".into())),
        }
    }

    pub fn snapshot_nodes(&self) -> Result<ParamNodeSet> {
        ParamNodeSet::new(self.params.snapshots.clone()).map_err(config_err)
    }

    pub fn training_params(&self) -> Result<ParamNodeSet> {
        ParamNodeSet::new(self.params.training.clone()).map_err(config_err)
    }

    pub fn field_nodes(&self, variant: &VariantSpec) -> Result<ParamNodeSet> {
        ParamNodeSet::new(variant.field_nodes.clone().unwrap_or_else(|| self.params.field.clone())).map_err(config_err)
    }

    pub fn solve_settings(&self) -> Result<SolveSettings> {
        SolveSettings::new(self.solve.iterations, self.solve.scalings.clone()).map_err(config_err)
    }

    pub fn objective_mode(&self) -> Result<ObjectiveMode> {
        match self.objective.as_str() {
            "sum" => Ok(ObjectiveMode::Sum),
            "sup" => Ok(ObjectiveMode::Sup),
            o => Err(HarnessError::Config(format!("unknown objective {o:?} (expected sum or sup)"))),
        }
    }

    /// Checks everything that can be checked without sampling data.
    pub fn validate(&self) -> Result<()> {
        let dom = self.domain()?;
        let source = self.source()?;
        self.snapshot_nodes()?;
        self.training_params()?;
        self.solve_settings()?;
        self.objective_mode()?;
        if self.params.eval.iter().any(|v| !v.is_finite()) {
            return Err(HarnessError::Config("evaluation parameters must be finite".into()));
        }
        match source {
            Source::Analytic(f) => {
                if f.dim() != dom.dim() {
                    return Err(HarnessError::Config(format!("fixture {f} is {}-dimensional", f.dim())));
                }
                let (lo, hi) = f.domain_bounds();
                if lo != self.domain.lower || hi != self.domain.upper {
                    return Err(HarnessError::Config(format!(
                        "fixture {f} is defined on {lo:?} .. {hi:?}"
                    )));
                }
            }
            Source::Custom => {
                let counts = [
                    ("snapshot_files", self.fixture.snapshot_files.len(), self.params.snapshots.len()),
                    ("training_files", self.fixture.training_files.len(), self.params.training.len()),
                    ("eval_files", self.fixture.eval_files.len(), self.params.eval.len()),
                ];
                for (key, have, want) in counts {
                    if have != want {
                        return Err(HarnessError::Config(format!("fixture.{key}: {have} files for {want} parameters")));
                    }
                }
            }
        }
        if self.variants.is_empty() {
            return Err(HarnessError::Config("at least one [[variant]]".into()));
        }
        let mut labels: Vec<&str> = self.variants.iter().map(|v| v.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(HarnessError::Config("variant labels must be unique".into()));
        }
        for v in &self.variants {
            if v.label.is_empty() || !v.label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(HarnessError::Config(format!("variant label {:?}: use [A-Za-z0-9_-]", v.label)));
            }
            let smoother = v.smoother_kind()?;
            self.field_nodes(v)?;
            match v.transform_kind()? {
                TransformKind::LowRes => {
                    if smoother != Smoother::Plain {
                        return Err(HarnessError::Config(format!(
                            "variant {}: low-resolution transforms use the plain smoother",
                            v.label
                        )));
                    }
                    if v.degree.unwrap_or(0) < 1 {
                        return Err(HarnessError::Config(format!("variant {}: lowres needs degree >= 1", v.label)));
                    }
                }
                TransformKind::HighRes => {
                    if smoother == Smoother::Multilevel {
                        tsi_core::optim::level_domains(&dom, v.levels)
                            .map_err(|e| HarnessError::Config(format!("variant {}: {e}", v.label)))?;
                    } else if v.levels != 1 {
                        return Err(HarnessError::Config(format!(
                            "variant {}: levels only apply to the multilevel smoother",
                            v.label
                        )));
                    }
                }
            }
            let settings = tsi_core::DescentSettings {
                step: v.step,
                steps: v.steps,
                smoother,
                levels: v.levels,
            };
            settings.validate().map_err(|e| HarnessError::Config(format!("variant {}: {e}", v.label)))?;
        }
        Ok(())
    }

    /// Reads a TOML config; relative fixture paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for list in [&mut cfg.fixture.snapshot_files, &mut cfg.fixture.training_files, &mut cfg.fixture.eval_files] {
            for p in list.iter_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
                if let Ok(abs) = p.canonicalize() {
                    *p = abs;
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    /// Applies command-line overrides. `smoother` keeps only the variants
    /// using it.
    pub fn with_overrides(
        mut self,
        steps: Option<usize>,
        step: Option<f64>,
        smoother: Option<&str>,
        objective: Option<&str>,
    ) -> Result<Self> {
        if let Some(s) = smoother {
            s.parse::<Smoother>().map_err(config_err)?;
            self.variants.retain(|v| v.smoother == s);
            if self.variants.is_empty() {
                return Err(HarnessError::Config(format!("no variant uses the {s} smoother")));
            }
        }
        for v in &mut self.variants {
            if let Some(n) = steps {
                v.steps = n;
            }
            if let Some(a) = step {
                v.step = a;
            }
        }
        if let Some(o) = objective {
            self.objective = o.to_string();
        }
        self.validate()?;
        Ok(self)
    }
}

pub const BUILTINS: [&str; 5] = ["step_7_1", "collision_3", "ramps_7_2", "parabola_7_3", "ellipse_7_4"];

fn highres(label: &str, smoother: &str, step: f64, steps: usize, levels: usize) -> VariantSpec {
    VariantSpec {
        label: label.into(),
        transform: "highres".into(),
        smoother: smoother.into(),
        step,
        steps,
        levels,
        degree: None,
        frozen_boundary: true,
        slip: true,
        field_nodes: None,
    }
}

fn lowres(degree: usize, step: f64, steps: usize) -> VariantSpec {
    VariantSpec {
        label: "interpol".into(),
        transform: "lowres".into(),
        smoother: "plain".into(),
        step,
        steps,
        levels: 1,
        degree: Some(degree),
        frozen_boundary: true,
        slip: true,
        field_nodes: None,
    }
}

fn base(name: &str, cells: Vec<usize>, params: ParamSpec, solve: SolveSpec, variants: Vec<VariantSpec>) -> ExperimentConfig {
    let fixture: Fixture = name.parse().expect("builtin fixture");
    let (lower, upper) = fixture.domain_bounds();
    ExperimentConfig {
        name: name.into(),
        fixture: FixtureSpec {
            kind: name.into(),
            snapshot_files: vec![],
            training_files: vec![],
            eval_files: vec![],
        },
        domain: DomainSpec { lower, upper, cells },
        params,
        solve,
        objective: default_objective(),
        output: OutputSpec::default(),
        variants,
    }
}

/// The built-in experiments. Step sizes and counts are not part of the
/// experiment descriptions they follow and were tuned once.
pub fn builtin_config(name: &str) -> Result<ExperimentConfig> {
    let scalings_3 = vec![0.343, 0.49, 0.7, 1.0];
    let cfg = match name {
        "step_7_1" => base(
            name,
            vec![32],
            ParamSpec {
                snapshots: vec![-0.2, 0.2],
                field: vec![-0.2, 0.2],
                training: vec![0.0],
                eval: vec![0.0],
            },
            SolveSpec { iterations: 5, scalings: vec![] },
            vec![
                highres("plain", "plain", 0.5, 200, 1),
                highres("laplace", "laplace", 0.1, 200, 1),
                highres("multilevel", "multilevel", 1.0, 200, 4),
                lowres(2, 0.02, 200),
            ],
        ),
        "collision_3" => base(
            name,
            vec![60],
            ParamSpec {
                snapshots: vec![-0.2, 0.2],
                field: vec![-0.2, 0.2],
                training: vec![0.0],
                eval: vec![0.0],
            },
            SolveSpec { iterations: 5, scalings: vec![] },
            vec![highres("laplace", "laplace", 0.3, 200, 1), lowres(2, 0.1, 200)],
        ),
        "ramps_7_2" => base(
            name,
            vec![128],
            ParamSpec { snapshots: vec![0.6], field: vec![0.6], training: vec![0.9], eval: vec![0.9] },
            SolveSpec { iterations: 3, scalings: scalings_3 },
            vec![
                lowres(3, 0.01, 300),
                highres("laplace", "laplace", 0.1, 300, 1),
                highres("multilevel", "multilevel", 0.04, 300, 6),
            ],
        ),
        "parabola_7_3" => {
            let mut order1 = highres("order1", "laplace", 0.02, 300, 1);
            order1.field_nodes = Some(vec![0.6]);
            let mut order2 = highres("order2", "laplace", 0.02, 300, 1);
            order2.field_nodes = Some(vec![0.6, 0.7]);
            base(
                name,
                vec![128],
                ParamSpec {
                    snapshots: vec![0.6],
                    field: vec![0.6, 0.7],
                    training: vec![0.8, 0.96],
                    eval: vec![0.86],
                },
                SolveSpec { iterations: 3, scalings: scalings_3 },
                vec![order1, order2],
            )
        }
        "ellipse_7_4" => base(
            name,
            vec![64, 64],
            ParamSpec {
                snapshots: vec![0.2, 0.095],
                field: vec![0.2],
                training: vec![0.14, 0.05],
                eval: vec![0.0875],
            },
            SolveSpec { iterations: 3, scalings: vec![0.49, 0.7, 1.0] },
            vec![highres("laplace", "laplace", 5.0, 100, 1)],
        ),
        _ => {
            return Err(HarnessError::Config(format!(
                "unknown builtin {name:?}, known: {}",
                BUILTINS.join(", ")
            )))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

/// A builtin name or a path to a TOML file.
pub fn resolve(name_or_path: &str) -> Result<ExperimentConfig> {
    if BUILTINS.contains(&name_or_path) {
        builtin_config(name_or_path)
    } else {
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(HarnessError::Config(format!(
                "{name_or_path:?} is neither a file nor a builtin ({})",
                BUILTINS.join(", ")
            )));
        }
        ExperimentConfig::load(path)
    }
}
