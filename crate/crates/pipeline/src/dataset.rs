//! In-memory datasets of preprocessed samples and their on-disk form: a
//! directory with one clip file per video modality, one CSV per skeleton, a
//! manifest mapping clip ids to those files plus labels, and a provenance
//! sidecar.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use mmkit_data::{Clip, Sample, SkeletonSequence, ACTION_CLASSES};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::synth::ACTION_NAMES;

/// Where a dataset's media came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Synthetic,
}

/// A labeled collection of samples. Per-class counts are computed at
/// construction, after every sample passes its shape contract, so they are
/// consistent with the sample list by construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    samples: Vec<Sample>,
    provenance: Provenance,
    class_counts: [usize; ACTION_CLASSES],
    asd_counts: [usize; 2],
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, provenance: Provenance) -> Result<Self> {
        let mut class_counts = [0usize; ACTION_CLASSES];
        let mut asd_counts = [0usize; 2];
        for (i, sample) in samples.iter().enumerate() {
            sample.validate().map_err(|e| {
                PipelineError::input("dataset", format!("sample {i}: {e}"))
            })?;
            class_counts[sample.action_label] += 1;
            asd_counts[sample.asd_label] += 1;
        }
        Ok(Dataset { samples, provenance, class_counts, asd_counts })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn class_counts(&self) -> &[usize; ACTION_CLASSES] {
        &self.class_counts
    }

    pub fn asd_counts(&self) -> &[usize; 2] {
        &self.asd_counts
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    provenance: Provenance,
}

const META_FILE: &str = "meta.json";
const MANIFEST_FILE: &str = "manifest.csv";
const MANIFEST_HEADER: [&str; 6] = ["clip_id", "flow", "mesh", "skeleton", "action_label", "asd_label"];

struct ManifestRow {
    clip_id: String,
    flow: String,
    mesh: String,
    skeleton: String,
    action_label: usize,
    asd_label: usize,
}

fn modality_files(clip_id: &str) -> (String, String, String) {
    (
        format!("samples/{clip_id}.flow.mmc"),
        format!("samples/{clip_id}.mesh.mmc"),
        format!("samples/{clip_id}.skel.csv"),
    )
}

fn write_manifest(dir: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut out = String::from("clip_id,flow,mesh,skeleton,action_label,asd_label\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.clip_id, row.flow, row.mesh, row.skeleton, row.action_label, row.asd_label
        ));
    }
    fs::write(dir.join(MANIFEST_FILE), out)?;
    Ok(())
}

fn read_manifest(dir: &Path) -> Result<Vec<ManifestRow>> {
    let path = dir.join(MANIFEST_FILE);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&path)
        .map_err(|e| PipelineError::format(path.display(), e.to_string()))?;
    let headers = reader.headers().map_err(|e| PipelineError::format(path.display(), e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(PipelineError::format(
            path.display(),
            format!("header {:?}, expected {}", headers.iter().collect::<Vec<_>>(), MANIFEST_HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| PipelineError::format(path.display(), e.to_string()))?;
        let line = i + 2;
        if record.len() != MANIFEST_HEADER.len() {
            return Err(PipelineError::format(
                path.display(),
                format!("line {line}: {} fields, expected {}", record.len(), MANIFEST_HEADER.len()),
            ));
        }
        let parse = |field: &str, name: &str| -> Result<usize> {
            field.trim().parse().map_err(|_| {
                PipelineError::format(path.display(), format!("line {line}: {name} '{field}' is not a non-negative integer"))
            })
        };
        rows.push(ManifestRow {
            clip_id: record[0].to_string(),
            flow: record[1].to_string(),
            mesh: record[2].to_string(),
            skeleton: record[3].to_string(),
            action_label: parse(&record[4], "action_label")?,
            asd_label: parse(&record[5], "asd_label")?,
        });
    }
    Ok(rows)
}

/// Clip ids for a dataset written as a whole: the action name plus the
/// sample's ordinal within its class, in dataset order.
fn dataset_ids(ds: &Dataset) -> Vec<String> {
    let mut per_class = [0usize; ACTION_CLASSES];
    ds.samples()
        .iter()
        .map(|s| {
            let ordinal = per_class[s.action_label];
            per_class[s.action_label] += 1;
            format!("{}_{ordinal:04}", ACTION_NAMES[s.action_label])
        })
        .collect()
}

fn write_sample_files(dir: &Path, clip_id: &str, sample: &Sample) -> Result<ManifestRow> {
    let (flow, mesh, skeleton) = modality_files(clip_id);
    sample.flow_clip.write(&dir.join(&flow))?;
    sample.mesh_clip.write(&dir.join(&mesh))?;
    sample.skeleton.write_csv(&dir.join(&skeleton))?;
    Ok(ManifestRow {
        clip_id: clip_id.to_string(),
        flow,
        mesh,
        skeleton,
        action_label: sample.action_label,
        asd_label: sample.asd_label,
    })
}

/// Write a dataset to a directory: modality files under samples/, a manifest
/// CSV, and a provenance sidecar. Rewrites the directory contents, so the
/// same dataset always produces byte-identical files.
pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    fs::create_dir_all(dir.join("samples"))?;
    let ids = dataset_ids(ds);
    // The manifest is canonically sorted by clip id, matching append_sample.
    let mut ordered: Vec<(&String, &Sample)> = ids.iter().zip(ds.samples()).collect();
    ordered.sort_by(|a, b| a.0.cmp(b.0));
    let mut rows = Vec::with_capacity(ds.len());
    for (id, sample) in ordered {
        rows.push(write_sample_files(dir, id, sample)?);
    }
    write_manifest(dir, &rows)?;
    let meta = serde_json::to_string_pretty(&DatasetMeta { provenance: ds.provenance() })
        .expect("provenance serializes");
    fs::write(dir.join(META_FILE), meta)?;
    Ok(())
}

/// Add one sample to a dataset directory (creating it if needed), keyed by
/// clip id. An existing row with the same id is replaced; the manifest stays
/// sorted by clip id so repeated runs produce identical bytes.
pub fn append_sample(dir: &Path, clip_id: &str, sample: &Sample, provenance: Provenance) -> Result<()> {
    sample.validate()?;
    if clip_id.is_empty() || clip_id.contains(['/', '\\', ',']) {
        return Err(PipelineError::input(
            "append_sample",
            format!("clip id '{clip_id}' must be non-empty and free of path separators and commas"),
        ));
    }
    fs::create_dir_all(dir.join("samples"))?;
    let mut rows: BTreeMap<String, ManifestRow> = if dir.join(MANIFEST_FILE).exists() {
        read_manifest(dir)?.into_iter().map(|r| (r.clip_id.clone(), r)).collect()
    } else {
        BTreeMap::new()
    };
    let row = write_sample_files(dir, clip_id, sample)?;
    rows.insert(clip_id.to_string(), row);
    write_manifest(dir, &rows.into_values().collect::<Vec<_>>())?;
    let meta = serde_json::to_string_pretty(&DatasetMeta { provenance }).expect("provenance serializes");
    fs::write(dir.join(META_FILE), meta)?;
    Ok(())
}

/// Read a dataset directory written by [`write_dataset`] or assembled with
/// [`append_sample`]. Samples come back in manifest order and every one is
/// revalidated against the shape contract.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let meta_path = dir.join(META_FILE);
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| PipelineError::format(meta_path.display(), e.to_string()))?;
    let mut samples = Vec::new();
    for row in read_manifest(dir)? {
        let flow_clip = Clip::read(&dir.join(&row.flow))?;
        let mesh_clip = Clip::read(&dir.join(&row.mesh))?;
        let skeleton = SkeletonSequence::read_csv(&dir.join(&row.skeleton))?;
        let sample = Sample {
            flow_clip,
            mesh_clip,
            skeleton,
            action_label: row.action_label,
            asd_label: row.asd_label,
        };
        sample.validate().map_err(|e| {
            PipelineError::input("read_dataset", format!("clip {}: {e}", row.clip_id))
        })?;
        samples.push(sample);
    }
    Dataset::new(samples, meta.provenance)
}

/// Clip ids in the order [`read_dataset`] returns samples, without loading
/// the media.
pub fn dataset_clip_ids(dir: &Path) -> Result<Vec<String>> {
    Ok(read_manifest(dir)?.into_iter().map(|r| r.clip_id).collect())
}

/// The provenance recorded in a dataset directory's sidecar, without loading
/// any media.
pub fn dataset_provenance(dir: &Path) -> Result<Provenance> {
    let meta_path = dir.join(META_FILE);
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| PipelineError::format(meta_path.display(), e.to_string()))?;
    Ok(meta.provenance)
}

/// Load a single sample from a dataset directory by clip id, leaving the rest
/// of the dataset on disk.
pub fn read_sample(dir: &Path, clip_id: &str) -> Result<Sample> {
    let row = read_manifest(dir)?
        .into_iter()
        .find(|r| r.clip_id == clip_id)
        .ok_or_else(|| {
            PipelineError::input("read_sample", format!("clip id '{clip_id}' is not in the manifest"))
        })?;
    let sample = Sample {
        flow_clip: Clip::read(&dir.join(&row.flow))?,
        mesh_clip: Clip::read(&dir.join(&row.mesh))?,
        skeleton: SkeletonSequence::read_csv(&dir.join(&row.skeleton))?,
        action_label: row.action_label,
        asd_label: row.asd_label,
    };
    sample
        .validate()
        .map_err(|e| PipelineError::input("read_sample", format!("clip {clip_id}: {e}")))?;
    Ok(sample)
}
