//! TOML model files.
//!
//! ```toml
//! states = 2
//! rewards = [0.0, 1.0]
//! points = [[0.6], [0.4]]
//! switching_cost = 1.0          # optional
//!
//! [[arm]]
//! group = 1                     # one-based
//! index = 1                     # one-based within the group
//! kernels = [[[0.4, 0.6], [0.4, 0.6]], [[0.6, 0.4], [0.6, 0.4]]]
//! initial = [[0.4, 0.6], [0.6, 0.4]]
//! atom = { states = [0, 1], alpha = 0.8, phi = [0.5, 0.5] }   # optional
//! drift = { v = [1.0, 1.0], b_bar = 0.5, b = 0.5 }            # optional
//! ```
//!
//! Kernels and initial distributions are listed per parameter point, in point
//! order. State indices inside `atom.states` are zero-based.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::markov::{ArmId, ArmSpec, Atom, Drift, Kernel, ModelError, StateSpace};
use crate::model::Model;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed model file: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("cannot serialize model: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("{0}")]
    Structure(String),
    #[error("arm {arm}: {source}")]
    Arm { arm: ArmId, source: ModelError },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileModel {
    states: usize,
    rewards: Vec<f64>,
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    switching_cost: Option<f64>,
    arm: Vec<FileArm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileArm {
    group: usize,
    index: usize,
    kernels: Vec<Vec<Vec<f64>>>,
    initial: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    atom: Option<FileAtom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    drift: Option<FileDrift>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileAtom {
    states: Vec<usize>,
    alpha: f64,
    phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDrift {
    v: Vec<f64>,
    b_bar: f64,
    b: f64,
}

pub fn parse_model(text: &str) -> Result<Model, ModelFileError> {
    let file: FileModel = toml::from_str(text)?;
    if file.rewards.len() != file.states {
        return Err(ModelFileError::Structure(format!("{} rewards for {} states", file.rewards.len(), file.states)));
    }
    let space = StateSpace::new(file.rewards)?;
    let mut groups: Vec<Vec<Option<ArmSpec>>> = Vec::new();
    for a in file.arm {
        if a.group == 0 || a.index == 0 {
            return Err(ModelFileError::Structure("arm group and index are one-based".into()));
        }
        let id = ArmId::new(a.group - 1, a.index - 1);
        let wrap = |source| ModelFileError::Arm { arm: id, source };
        let kernels = a.kernels.into_iter().map(Kernel::new).collect::<Result<Vec<_>, _>>().map_err(wrap)?;
        let atom = a.atom.map(|t| Atom::new(t.states, t.alpha, t.phi, file.states)).transpose().map_err(wrap)?;
        let drift = a.drift.map(|d| Drift::new(d.v, d.b_bar, d.b, file.states)).transpose().map_err(wrap)?;
        let spec = ArmSpec::new(id, kernels, a.initial, atom, drift).map_err(wrap)?;
        if groups.len() <= id.group {
            groups.resize_with(id.group + 1, Vec::new);
        }
        let g = &mut groups[id.group];
        if g.len() <= id.arm {
            g.resize_with(id.arm + 1, || None);
        }
        if g[id.arm].replace(spec).is_some() {
            return Err(ModelFileError::Structure(format!("arm {id} declared twice")));
        }
    }
    let mut full = Vec::with_capacity(groups.len());
    for (i, g) in groups.into_iter().enumerate() {
        if g.is_empty() {
            return Err(ModelFileError::Structure(format!("group {} has no arms", i + 1)));
        }
        let mut arms = Vec::with_capacity(g.len());
        for (j, a) in g.into_iter().enumerate() {
            arms.push(a.ok_or_else(|| ModelFileError::Structure(format!("arm {} is missing", ArmId::new(i, j))))?);
        }
        full.push(arms);
    }
    Ok(Model::new(space, file.points, full, file.switching_cost)?)
}

pub fn read_model(path: &Path) -> Result<Model, ModelFileError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ModelFileError::Io { path: path.display().to_string(), source })?;
    parse_model(&text)
}

pub fn write_model(model: &Model) -> Result<String, ModelFileError> {
    let file = FileModel {
        states: model.space.size(),
        rewards: model.space.rewards().to_vec(),
        points: model.points.clone(),
        switching_cost: model.switching_cost,
        arm: model
            .arms()
            .map(|a| FileArm {
                group: a.id.group + 1,
                index: a.id.arm + 1,
                kernels: a.kernels().iter().map(Kernel::to_rows).collect(),
                initial: a.initials().to_vec(),
                atom: a.atom().map(|t| FileAtom {
                    states: t.states().to_vec(),
                    alpha: t.alpha(),
                    phi: t.phi_on_states(),
                }),
                drift: a.drift().map(|d| FileDrift { v: d.v.clone(), b_bar: d.b_bar, b: d.b }),
            })
            .collect(),
    };
    Ok(toml::to_string(&file)?)
}
