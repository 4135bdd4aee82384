//! Graph serialization.
//!
//! One JSON document per project graph. The layout is plain and versioned by
//! field names only: a `project` string plus flat `types`, `members`, and
//! `edges` arrays. Unknown fields are rejected rather than ignored so that a
//! typo in a hand-edited file fails loudly instead of silently dropping data.
//! Loading always re-validates and rebuilds the derived indices; a document
//! that decodes but violates a graph invariant is refused.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::asg::{Asg, Edge, Member, TypeNode};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AsgFile {
    project: String,
    types: Vec<TypeNode>,
    members: Vec<Member>,
    edges: Vec<Edge>,
}

/// Serializes a graph to pretty-printed JSON. Output is deterministic:
/// equal graphs produce byte-identical documents.
pub fn asg_to_json(asg: &Asg) -> String {
    let file = AsgFile {
        project: asg.project().to_string(),
        types: asg.types().to_vec(),
        members: asg.members().to_vec(),
        edges: asg.edges().to_vec(),
    };
    // Serialization of plain structs and enums cannot fail.
    serde_json::to_string_pretty(&file).expect("asg serialization")
}

/// Parses and validates a graph from a JSON string.
pub fn asg_from_json(text: &str) -> Result<Asg> {
    let file: AsgFile =
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("asg document: {e}")))?;
    Asg::from_parts(file.project, file.types, file.members, file.edges)
}

pub fn save_asg(asg: &Asg, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(asg_to_json(asg).as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_asg(path: &Path) -> Result<Asg> {
    let text = fs::read_to_string(path)?;
    asg_from_json(&text)
}
