//! One configuration tree for a whole experiment.

use serde::{Deserialize, Serialize};

use crate::encoder::TrainConfig;
use crate::error::Result;
use crate::eval::EvalConfig;
use crate::labeling::LabelingConfig;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    pub labeling: LabelingConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.labeling.validate()?;
        self.train.validate()?;
        self.eval.validate()
    }
}
