//! On-disk dataset conventions: sequence JSON plus template JSON (and an
//! OBJ mirror of the mesh) per sequence.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use worldgrip_core::json::{deserialize_sequence, serialize_sequence};
use worldgrip_core::{ObjectTemplate, SequenceBundle};
use worldgrip_geometry::bps::{bps_encode, BPS_DEFAULT_K};
use worldgrip_geometry::mesh::TriMesh;
use worldgrip_prior::train::{TrainSet, TrainWindow};

pub fn sequence_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("seq_{index:03}.json"))
}

pub fn template_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("seq_{index:03}.template.json"))
}

pub fn save_sequence(path: &Path, bundle: &SequenceBundle) -> Result<()> {
    let bytes = serialize_sequence(bundle).context("serializing sequence")?;
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn load_sequence(path: &Path) -> Result<SequenceBundle> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    deserialize_sequence(&bytes).with_context(|| format!("parsing {}", path.display()))
}

pub fn save_template(path: &Path, template: &ObjectTemplate) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(template)?)?;
    // Mirror the mesh as ASCII OBJ next to the JSON for external tools.
    let mesh = TriMesh::from_template(template).context("template mesh")?;
    std::fs::write(path.with_extension("obj"), mesh.to_obj())?;
    Ok(())
}

/// Loads a template from JSON, or from an ASCII OBJ (v/f subset) with the
/// BPS computed on the fly from `bps_seed`.
pub fn load_template(path: &Path, bps_seed: u64) -> Result<ObjectTemplate> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().and_then(|e| e.to_str()) == Some("obj") {
        let mesh = TriMesh::parse_obj(&text).context("parsing OBJ")?;
        let bps = bps_encode(&mesh, bps_seed, BPS_DEFAULT_K).context("encoding BPS")?;
        Ok(ObjectTemplate {
            vertices: mesh.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
            faces: mesh.faces,
            bps,
            bps_basis_seed: bps_seed,
        })
    } else {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// All `(sequence, template)` pairs in a directory, by index order.
pub fn load_dataset_dir(dir: &Path) -> Result<Vec<(SequenceBundle, ObjectTemplate)>> {
    let mut out = Vec::new();
    let mut index = 0usize;
    loop {
        let seq_path = sequence_path(dir, index);
        if !seq_path.exists() {
            break;
        }
        let bundle = load_sequence(&seq_path)?;
        let template = load_template(&template_path(dir, index), 0)?;
        out.push((bundle, template));
        index += 1;
    }
    anyhow::ensure!(!out.is_empty(), "no seq_*.json found in {}", dir.display());
    Ok(out)
}

/// Canonicalized training windows for every sequence in the directory.
pub fn training_set_from_dir(dir: &Path, window: usize, stride: usize) -> Result<TrainSet> {
    let pairs = load_dataset_dir(dir)?;
    let mut windows = Vec::new();
    for (bundle, template) in &pairs {
        let (splits, _plan) = worldgrip_core::window_split(bundle, window, stride)
            .map_err(|e| anyhow::anyhow!("window split: {e}"))?;
        for w in splits {
            let (canonical, _cam, _frame) =
                worldgrip_geometry::canonical::canonicalize_window(&w, &bundle.camera)
                    .map_err(|e| anyhow::anyhow!("canonicalize: {e}"))?;
            windows.push(TrainWindow {
                hands: canonical.hands,
                object: canonical.object,
                contact: canonical.contact,
                template: template.clone(),
            });
        }
    }
    Ok(TrainSet { windows })
}
