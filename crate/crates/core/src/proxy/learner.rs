use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dataset::TrainingRow;
use super::features::LearnerInput;
use super::forest::{Forest, ForestSettings};
use super::ProxyError;
use crate::nn::{Activation, EpochLog, ScaledMlp, TrainOptions};
use crate::rng::Stream;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Pricing,
    Relocation,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Pricing => "pricing",
            Task::Relocation => "relocation",
        }
    }

    pub fn outputs_per_zone(self) -> usize {
        match self {
            Task::Pricing => 1,
            Task::Relocation => 2,
        }
    }

    fn activation(self) -> Activation {
        match self {
            Task::Pricing => Activation::Relu,
            Task::Relocation => Activation::Tanh,
        }
    }

    pub fn input(self, row: &TrainingRow) -> &LearnerInput {
        match self {
            Task::Pricing => &row.pricing_input,
            Task::Relocation => &row.relocation_input,
        }
    }

    pub fn label(self, row: &TrainingRow) -> &[f64] {
        match self {
            Task::Pricing => &row.pricing_label,
            Task::Relocation => &row.relocation_label,
        }
    }
}

/// Which model family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    /// One network over the whole flattened instance; tied to a zone count.
    Flat,
    /// One network applied to each zone's own features.
    ZoneShared,
    /// Random forest over each zone's own features.
    Forest,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Flat => "flat",
            Self::ZoneShared => "zone-shared",
            Self::Forest => "forest",
        }
    }
}

impl FromStr for LearnerKind {
    type Err = ProxyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::Flat, Self::ZoneShared, Self::Forest]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ProxyError::Settings(format!("unknown learner kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerSettings {
    pub hidden: Vec<usize>,
    pub train: TrainOptions,
    pub forest: ForestSettings,
}

impl Default for LearnerSettings {
    fn default() -> Self {
        Self {
            hidden: vec![64, 128],
            train: TrainOptions { epochs: 60, batch_size: 32, learning_rate: 1e-3, l1: 0.0 },
            forest: ForestSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Model {
    Net(ScaledMlp),
    Forest(Forest),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    pub schema_version: u32,
    pub task: Task,
    pub kind: LearnerKind,
    /// Zone count the flat model was fitted on.
    pub zones: Option<usize>,
    model: Model,
}

fn zone_rows(task: Task, rows: &[TrainingRow]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = task.outputs_per_zone();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for row in rows {
        let input = task.input(row);
        let label = task.label(row);
        for i in 0..input.zones() {
            xs.push(input.zone.row(i).to_vec());
            ys.push(label[i * m..(i + 1) * m].to_vec());
        }
    }
    (xs, ys)
}

impl Learner {
    pub fn train(
        kind: LearnerKind,
        task: Task,
        rows: &[TrainingRow],
        settings: &LearnerSettings,
        rng: &mut Stream,
    ) -> Result<(Self, Vec<EpochLog>), ProxyError> {
        let Some(first) = rows.first() else { return Err(ProxyError::EmptyTrainingSet) };
        let zones = task.input(first).zones();
        let (model, log, fitted_zones) = match kind {
            LearnerKind::Flat => {
                if rows.iter().any(|r| task.input(r).zones() != zones) {
                    return Err(ProxyError::Shape("flat learner needs one zone count across rows".into()));
                }
                let xs: Vec<Vec<f64>> = rows.iter().map(|r| task.input(r).flat.clone()).collect();
                let ys: Vec<Vec<f64>> = rows.iter().map(|r| task.label(r).to_vec()).collect();
                let (net, log) = ScaledMlp::fit(&xs, &ys, &settings.hidden, task.activation(), &settings.train, rng);
                (Model::Net(net), log, Some(zones))
            }
            LearnerKind::ZoneShared => {
                let (xs, ys) = zone_rows(task, rows);
                let (net, log) = ScaledMlp::fit(&xs, &ys, &settings.hidden, task.activation(), &settings.train, rng);
                (Model::Net(net), log, None)
            }
            LearnerKind::Forest => {
                let (xs, ys) = zone_rows(task, rows);
                (Model::Forest(Forest::fit(&xs, &ys, settings.forest, rng)), Vec::new(), None)
            }
        };
        Ok((Self { schema_version: CHECKPOINT_SCHEMA_VERSION, task, kind, zones: fitted_zones, model }, log))
    }

    /// Zone-major outputs, `outputs_per_zone` per zone.
    pub fn predict(&self, input: &LearnerInput) -> Result<Vec<f64>, ProxyError> {
        match (&self.model, self.kind) {
            (Model::Net(net), LearnerKind::Flat) => {
                if input.flat.len() != net.net.input_dim() || Some(input.zones()) != self.zones {
                    return Err(ProxyError::Shape(format!(
                        "flat learner expects {} inputs, got {}",
                        net.net.input_dim(),
                        input.flat.len()
                    )));
                }
                Ok(net.predict(&input.flat))
            }
            (model, _) => {
                let width = match model {
                    Model::Net(net) => net.net.input_dim(),
                    Model::Forest(f) => f.inputs,
                };
                if input.zone.ncols() != width {
                    return Err(ProxyError::Shape(format!("zone learner expects {width} features, got {}", input.zone.ncols())));
                }
                let mut out = Vec::with_capacity(input.zones() * self.task.outputs_per_zone());
                for row in input.zone.rows() {
                    let x = row.to_vec();
                    out.extend(match model {
                        Model::Net(net) => net.predict(&x),
                        Model::Forest(f) => f.predict(&x),
                    });
                }
                Ok(out)
            }
        }
    }

    pub fn to_json(&self) -> Result<String, ProxyError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ProxyError> {
        let l: Self = serde_json::from_str(text)?;
        if l.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(ProxyError::Checkpoint(format!("unsupported checkpoint schema_version {}", l.schema_version)));
        }
        Ok(l)
    }

    pub fn save(&self, path: &Path) -> Result<(), ProxyError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ProxyError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
