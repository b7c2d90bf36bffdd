use std::path::Path;

use super::model::{ModelConfig, SegNet};
use super::train::{OptimizerState, TrainHyper, TrainState};
use crate::error::{Error, Result};
use crate::weights::WeightFile;

const FORMAT: &str = "lexseg-segnet-checkpoint-1";

/// Writes weights, optimizer moments, the model config, the step count and the loss
/// history into one safetensors file (f64, so reloads are exact).
pub fn save_checkpoint(
    path: &Path,
    model: &SegNet,
    state: &TrainState,
    hyper: Option<&TrainHyper>,
) -> Result<()> {
    let mut w = WeightFile::default();
    for ((name, shape, data), (m, v)) in model
        .params()
        .into_iter()
        .zip(state.optimizer.first.iter().zip(&state.optimizer.second))
    {
        w.insert(format!("optim.first.{name}"), shape.clone(), m.clone());
        w.insert(format!("optim.second.{name}"), shape.clone(), v.clone());
        w.insert(name, shape, data.to_vec());
    }
    w.metadata.insert("format".into(), FORMAT.into());
    w.metadata
        .insert("config".into(), serde_json::to_string(model.config())?);
    w.metadata.insert("step".into(), state.step.to_string());
    w.metadata.insert(
        "loss_history".into(),
        serde_json::to_string(&state.loss_history)?,
    );
    if let Some(h) = hyper {
        w.metadata.insert("train".into(), serde_json::to_string(h)?);
    }
    w.save(path, false)
}

/// A loaded checkpoint.
pub struct Checkpoint {
    pub model: SegNet,
    pub state: TrainState,
    pub hyper: Option<TrainHyper>,
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let w = WeightFile::load(path, "segmentation checkpoint not found; run `lexseg train` first")?;
    if w.metadata.get("format").map(String::as_str) != Some(FORMAT) {
        return Err(Error::parse(
            path.display().to_string(),
            "not a segmentation checkpoint",
        ));
    }
    let meta = |k: &str| {
        w.metadata
            .get(k)
            .ok_or_else(|| Error::parse(path.display().to_string(), format!("missing {k}")))
    };
    let config: ModelConfig = serde_json::from_str(meta("config")?)?;
    let step: usize = meta("step")?
        .parse()
        .map_err(|e: std::num::ParseIntError| Error::parse("checkpoint step", e.to_string()))?;
    let loss_history: Vec<f64> = serde_json::from_str(meta("loss_history")?)?;
    let hyper = match w.metadata.get("train") {
        Some(s) => Some(serde_json::from_str(s)?),
        None => None,
    };
    let mut model = SegNet::build_uninitialized(&config, &w)?;
    model.load_params(&w)?;
    let names: Vec<String> = model.params().into_iter().map(|p| p.0).collect();
    let mut optimizer = OptimizerState::new(&model);
    for (i, name) in names.iter().enumerate() {
        optimizer.first[i] = w.get(&format!("optim.first.{name}"))?.data.clone();
        optimizer.second[i] = w.get(&format!("optim.second.{name}"))?.data.clone();
    }
    Ok(Checkpoint {
        model,
        state: TrainState {
            step,
            optimizer,
            loss_history,
            checkpoint_path: Some(path.to_path_buf()),
        },
        hyper,
    })
}
