//! JSON run configuration and input loading.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use semnet_core::dataset::generate_dataset;
use semnet_core::engine::{prepare_inputs, RunInputs, SimConfig};
use semnet_core::mobility::generate_trace;
use semnet_core::NodeId;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::format;

/// External files replacing the generated trace or dataset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputFiles {
    pub trace: Option<PathBuf>,
    pub items: Option<PathBuf>,
    pub assignment: Option<PathBuf>,
}

impl InputFiles {
    pub fn is_empty(&self) -> bool {
        self.trace.is_none() && self.items.is_none() && self.assignment.is_none()
    }

    fn rebase(&mut self, dir: &Path) {
        for p in [&mut self.trace, &mut self.items, &mut self.assignment]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
}

/// On-disk config: the five [`SimConfig`] sections plus optional `inputs`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    #[serde(flatten)]
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "InputFiles::is_empty")]
    pub inputs: InputFiles,
}

/// Reads a config file. Relative input paths are taken relative to the
/// file's directory.
pub fn load_config(path: &Path) -> Result<ConfigFile, Error> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut cfg: ConfigFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    if let Some(dir) = path.parent() {
        cfg.inputs.rebase(dir);
    }
    Ok(cfg)
}

fn open(path: &Path) -> Result<BufReader<File>, Error> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn with_path<T>(path: &Path, r: Result<T, format::FormatError>) -> Result<T, Error> {
    r.map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

/// Builds run inputs, reading whichever of trace and dataset are given as
/// files and generating the rest from the config's root seed.
pub fn load_inputs(cfg: &SimConfig, files: &InputFiles) -> Result<RunInputs, Error> {
    cfg.validate()?;
    if files.items.is_some() != files.assignment.is_some() {
        return Err(Error::Validation(
            "inputs: items and assignment files must be given together".into(),
        ));
    }
    if files.is_empty() {
        return Ok(prepare_inputs(cfg)?);
    }
    let resolved = cfg.resolved();
    let m = &resolved.mobility;
    let (contacts, communities) = match &files.trace {
        Some(path) => {
            let events = with_path(path, format::read_trace(open(path)?))?;
            let communities = (0..m.num_nodes).map(|i| m.community_of(NodeId(i))).collect();
            (events, communities)
        }
        None => {
            let trace = generate_trace(m)?;
            (trace.contacts, trace.communities)
        }
    };
    let dataset = match (&files.items, &files.assignment) {
        (Some(items), Some(assignment)) => {
            let ds = format::dataset_from_files(open(items)?, open(assignment)?);
            with_path(items, ds)?
        }
        _ => {
            let clusters: Vec<u32> = communities
                .iter()
                .enumerate()
                .map(|(i, &c)| resolved.dataset.cluster_of(NodeId(i as u32), c, m.num_communities))
                .collect();
            generate_dataset(&resolved.dataset, &clusters)?
        }
    };
    Ok(RunInputs {
        num_nodes: m.num_nodes as usize,
        communities,
        contacts,
        dataset,
    })
}
