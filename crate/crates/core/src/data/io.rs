//! Dataset files: JSON Lines sequences, OBJ meshes, instruction groups and
//! loss curves.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::synth::{group_records, SyntheticRecord};
use crate::error::{ChainError, Result};
use crate::geometry::obj::{load_obj, to_obj};
use crate::geometry::TriangleMesh;
use crate::repr::{ContactLabels, HoiSequence, DEFAULT_CONTACT_THRESHOLD};
use crate::skeleton::SkeletonSpec;

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const GROUPS_FILE: &str = "groups.json";
pub const MESH_DIR: &str = "meshes";

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceRecord {
    pub id: String,
    pub text: String,
    pub object_id: String,
    pub fps: f64,
    pub frames: Vec<Vec<Vec<f64>>>,
    pub contact_labels: Vec<Vec<u8>>,
}

impl SequenceRecord {
    pub fn from_sequence(id: &str, text: &str, object_id: &str, seq: &HoiSequence, labels: &ContactLabels) -> SequenceRecord {
        SequenceRecord {
            id: id.to_string(),
            text: text.to_string(),
            object_id: object_id.to_string(),
            fps: seq.fps,
            frames: seq.to_nested(),
            contact_labels: labels.to_rows(),
        }
    }

    pub fn sequence(&self) -> Result<HoiSequence> {
        HoiSequence::from_nested(&self.frames, self.fps)
    }

    pub fn labels(&self) -> Result<ContactLabels> {
        let labels = ContactLabels::from_rows(&self.contact_labels, DEFAULT_CONTACT_THRESHOLD)?;
        if labels.len() != self.frames.len() {
            return Err(ChainError::InvalidSequence(format!(
                "{}: {} label rows for {} frames",
                self.id,
                labels.len(),
                self.frames.len()
            )));
        }
        Ok(labels)
    }
}

impl From<&SyntheticRecord> for SequenceRecord {
    fn from(r: &SyntheticRecord) -> Self {
        SequenceRecord::from_sequence(&r.id, &r.text, &r.object_id, &r.sequence, &r.labels)
    }
}

pub fn read_jsonl(path: &Path) -> Result<Vec<SequenceRecord>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: SequenceRecord = serde_json::from_str(line).map_err(|e| ChainError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl(path: &Path, records: &[SequenceRecord]) -> Result<()> {
    let mut s = String::new();
    for r in records {
        s += &serde_json::to_string(r)?;
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub id: String,
    pub members: Vec<String>,
}

/// Sets of sequence ids that share one instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionGroups {
    #[serde(default)]
    pub provenance: String,
    pub groups: Vec<Group>,
}

impl InstructionGroups {
    pub fn load(path: &Path) -> Result<InstructionGroups> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| ChainError::Parse {
            path: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Every member must name a known sequence and no group may be empty.
    pub fn validate<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let known: HashSet<&str> = ids.into_iter().collect();
        for g in &self.groups {
            if g.members.is_empty() {
                return Err(ChainError::EmptyGroup(g.id.clone()));
            }
            if let Some(m) = g.members.iter().find(|m| !known.contains(m.as_str())) {
                return Err(ChainError::Dataset(format!("group {} references unknown sequence {}", g.id, m)));
            }
        }
        Ok(())
    }

    /// Group id of every member sequence.
    pub fn membership(&self) -> HashMap<String, String> {
        let mut out = HashMap::new();
        for g in &self.groups {
            for m in &g.members {
                out.insert(m.clone(), g.id.clone());
            }
        }
        out
    }

    pub fn get(&self, id: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.id == id)
    }
}

/// Rule-based groups for synthetic records.
pub fn synthetic_groups(records: &[SyntheticRecord], spec: &SkeletonSpec) -> InstructionGroups {
    let groups: BTreeMap<String, Vec<String>> = group_records(records, spec);
    InstructionGroups {
        provenance: "rule-based: records sharing template, object primitive and contacting joints".into(),
        groups: groups.into_iter().map(|(id, members)| Group { id, members }).collect(),
    }
}

/// Writes `dataset.jsonl`, `groups.json` and one OBJ per object into `dir`.
pub fn write_dataset(dir: &Path, records: &[SyntheticRecord], spec: &SkeletonSpec) -> Result<()> {
    fs::create_dir_all(dir.join(MESH_DIR))?;
    let lines: Vec<SequenceRecord> = records.iter().map(SequenceRecord::from).collect();
    write_jsonl(&dir.join(DATASET_FILE), &lines)?;
    for r in records {
        fs::write(mesh_path(dir, &r.object_id), to_obj(&r.mesh))?;
    }
    synthetic_groups(records, spec).save(&dir.join(GROUPS_FILE))
}

pub fn mesh_path(dataset_dir: &Path, object_id: &str) -> PathBuf {
    dataset_dir.join(MESH_DIR).join(format!("{}.obj", object_id))
}

/// Sequence records and their object meshes, loaded from a directory laid
/// out by [`write_dataset`] (or a JSONL file plus a mesh directory).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<SequenceRecord>,
    pub meshes: HashMap<String, Arc<TriangleMesh>>,
}

impl Dataset {
    pub fn load_dir(dir: &Path) -> Result<Dataset> {
        Dataset::load(&dir.join(DATASET_FILE), &dir.join(MESH_DIR))
    }

    pub fn load(jsonl: &Path, mesh_dir: &Path) -> Result<Dataset> {
        let records = read_jsonl(jsonl)?;
        if records.is_empty() {
            return Err(ChainError::Dataset(format!("{} holds no sequences", jsonl.display())));
        }
        let mut meshes = HashMap::new();
        for r in &records {
            if !meshes.contains_key(&r.object_id) {
                let path = mesh_dir.join(format!("{}.obj", r.object_id));
                meshes.insert(r.object_id.clone(), Arc::new(load_obj(&path)?));
            }
        }
        Ok(Dataset { records, meshes })
    }

    pub fn mesh(&self, object_id: &str) -> Result<&Arc<TriangleMesh>> {
        self.meshes
            .get(object_id)
            .ok_or_else(|| ChainError::Dataset(format!("no mesh for object {}", object_id)))
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.text.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub epoch: usize,
    pub l_diff: f64,
    pub l_h: f64,
    pub l_o: f64,
    pub total: f64,
}

pub fn loss_csv(rows: &[LossRow]) -> String {
    let mut s = String::from("epoch,l_diff,l_h,l_o,total\n");
    for r in rows {
        writeln!(s, "{},{},{},{},{}", r.epoch, r.l_diff, r.l_h, r.l_o, r.total).unwrap();
    }
    s
}
