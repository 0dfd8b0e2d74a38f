//! JSON-lines persistence for offline datasets.
//!
//! Line 1 is a header object `{env_id, n_unconstrained, n_constrained, augmented}`
//! (plus `n_augmented_costs` on augmented data); every following line is one
//! trajectory `{transitions: [{s, a, s2, r, c}, ...], pref}`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::dataset::{OfflineDataset, Trajectory};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Header {
    env_id: String,
    n_unconstrained: usize,
    n_constrained: usize,
    augmented: bool,
    #[serde(default, skip_serializing_if = "is_zero")]
    n_augmented_costs: usize,
}

fn is_zero(x: &usize) -> bool {
    *x == 0
}

pub fn write_dataset<W: Write>(ds: &OfflineDataset, mut out: W) -> Result<()> {
    let header = Header {
        env_id: ds.env_id.clone(),
        n_unconstrained: ds.n_unconstrained,
        n_constrained: ds.n_constrained,
        augmented: ds.augmented,
        n_augmented_costs: ds.n_augmented_costs,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for traj in &ds.trajectories {
        serde_json::to_writer(&mut out, traj)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<OfflineDataset> {
    let mut lines = input.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Format("missing dataset header line".into()))??;
    let header: Header = serde_json::from_str(&header_line)?;
    let mut trajectories = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let traj: Trajectory = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("trajectory line {}: {e}", i + 2)))?;
        trajectories.push(traj);
    }
    let ds = OfflineDataset {
        env_id: header.env_id,
        n_unconstrained: header.n_unconstrained,
        n_constrained: header.n_constrained,
        augmented: header.augmented,
        n_augmented_costs: header.n_augmented_costs,
        trajectories,
    };
    ds.validate()?;
    Ok(ds)
}

pub fn dataset_to_string(ds: &OfflineDataset) -> Result<String> {
    let mut buf = Vec::new();
    write_dataset(ds, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

pub fn dataset_from_str(s: &str) -> Result<OfflineDataset> {
    read_dataset(s.as_bytes())
}
