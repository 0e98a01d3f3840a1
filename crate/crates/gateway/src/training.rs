//! Dataset → labelled tensors → trained checkpoint.

use gesture_cell::net::{
    evaluate, featurize, train, Architecture, Checkpoint, EpochLog, EvalReport, LabeledSet, NetError, Normalization,
    TrainConfig, TrainOutcome,
};
use gesture_cell::radar::FrameDetections;
use gesture_cell::synth::{DatasetManifest, Split};

pub struct Splits {
    pub train: LabeledSet,
    pub val: LabeledSet,
    pub test: LabeledSet,
    /// Fitted on the training split only.
    pub normalization: Normalization,
}

pub fn labeled_splits(manifest: &DatasetManifest, frames: &[Vec<FrameDetections>]) -> Splits {
    let normalization =
        Normalization::fit(manifest.ids(Split::Train).into_iter().map(|id| frames[id].as_slice()));
    let mut splits =
        Splits { train: LabeledSet::default(), val: LabeledSet::default(), test: LabeledSet::default(), normalization };
    for entry in &manifest.samples {
        let x = featurize(&frames[entry.id], &normalization).into_values();
        let set = match entry.split {
            Split::Train => &mut splits.train,
            Split::Val => &mut splits.val,
            Split::Test => &mut splits.test,
        };
        set.push(x, entry.class.code());
    }
    splits
}

pub fn train_checkpoint(
    splits: &Splits,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<(Checkpoint, TrainOutcome), NetError> {
    let outcome = train(Architecture::DEFAULT, &splits.train, &splits.val, cfg, on_epoch)?;
    let ckpt = Checkpoint { network: outcome.network.clone(), normalization: splits.normalization };
    Ok((ckpt, outcome))
}

/// Test-split metrics of a checkpoint, featurised with its own
/// normalisation.
pub fn evaluate_checkpoint(
    ckpt: &Checkpoint,
    manifest: &DatasetManifest,
    frames: &[Vec<FrameDetections>],
) -> Result<EvalReport, NetError> {
    let ids = manifest.ids(Split::Test);
    let inputs: Vec<Vec<f32>> =
        ids.iter().map(|&id| featurize(&frames[id], &ckpt.normalization).into_values()).collect();
    let views: Vec<&[f32]> = inputs.iter().map(Vec::as_slice).collect();
    let labels: Vec<usize> = ids.iter().map(|&id| manifest.samples[id].class.code()).collect();
    evaluate(&ckpt.network, &views, &labels)
}
