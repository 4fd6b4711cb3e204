//! Subjects, datasets and the on-disk dataset directory.
//!
//! Layout:
//!
//! ```text
//! subject_<id>_struct.csv   dense NxN structural weights
//! subject_<id>_func.csv     dense NxN functional weights
//! labels.csv                `<id>,<label>` per line
//! meta.json                 {"n_nodes", "n_classes", "planted"?}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate, BrainGraph, GraphError, Modality};
use crate::io;

pub const LABELS_FILE: &str = "labels.csv";
pub const META_FILE: &str = "meta.json";

fn struct_file(id: &str) -> String {
    format!("subject_{id}_struct.csv")
}

fn func_file(id: &str) -> String {
    format!("subject_{id}_func.csv")
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub structural: BrainGraph,
    pub functional: BrainGraph,
    pub label: usize,
}

impl SubjectRecord {
    pub fn n_nodes(&self) -> usize {
        self.structural.n_nodes()
    }
}

/// Contents of `meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub n_nodes: usize,
    pub n_classes: usize,
    /// Planted class-discriminative node sets, one per class (synthetic data).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted: Option<Vec<Vec<usize>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    subjects: Vec<SubjectRecord>,
    n_classes: usize,
    n_nodes: usize,
    planted: Option<Vec<Vec<usize>>>,
}

fn is_safe_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '.')
}

impl Dataset {
    /// Checks every dataset invariant, including per-graph validation.
    pub fn new(subjects: Vec<SubjectRecord>, n_classes: usize) -> Result<Self, GraphError> {
        let bad = |msg: String| Err(GraphError::Inconsistent(msg));
        let Some(first) = subjects.first() else {
            return bad("dataset has no subjects".into());
        };
        let n_nodes = first.n_nodes();
        if n_nodes == 0 {
            return bad("graphs must have at least one node".into());
        }
        let mut seen_ids = BTreeSet::new();
        let mut class_counts = vec![0usize; n_classes];
        for s in &subjects {
            if !is_safe_id(&s.subject_id) {
                return bad(format!(
                    "subject id `{}` is not filename-safe",
                    s.subject_id
                ));
            }
            if !seen_ids.insert(s.subject_id.as_str()) {
                return bad(format!("duplicate subject id `{}`", s.subject_id));
            }
            let (ns, nf) = (s.structural.n_nodes(), s.functional.n_nodes());
            if ns != nf {
                return Err(GraphError::DimensionMismatch {
                    id: s.subject_id.clone(),
                    structural: ns,
                    functional: nf,
                });
            }
            if ns != n_nodes {
                return bad(format!(
                    "subject {} has {ns} nodes, expected {n_nodes}",
                    s.subject_id
                ));
            }
            if s.label >= n_classes {
                return bad(format!(
                    "subject {} has label {} but the dataset declares {n_classes} classes",
                    s.subject_id, s.label
                ));
            }
            class_counts[s.label] += 1;
            validate(&s.structural, Modality::Structural).map_err(GraphError::Invalid)?;
            validate(&s.functional, Modality::Functional).map_err(GraphError::Invalid)?;
        }
        if let Some(c) = class_counts.iter().position(|&n| n == 0) {
            return bad(format!("class {c} has no subjects"));
        }
        Ok(Self {
            subjects,
            n_classes,
            n_nodes,
            planted: None,
        })
    }

    /// Attaches planted node sets (one per class).
    pub fn with_planted(mut self, planted: Vec<Vec<usize>>) -> Result<Self, GraphError> {
        if planted.len() != self.n_classes {
            return Err(GraphError::Inconsistent(format!(
                "{} planted sets for {} classes",
                planted.len(),
                self.n_classes
            )));
        }
        if let Some(&node) = planted.iter().flatten().find(|&&v| v >= self.n_nodes) {
            return Err(GraphError::NodeOutOfRange {
                node,
                n_nodes: self.n_nodes,
            });
        }
        self.planted = Some(planted);
        Ok(self)
    }

    pub fn subjects(&self) -> &[SubjectRecord] {
        &self.subjects
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.subjects.iter().map(|s| s.label).collect()
    }

    pub fn planted(&self) -> Option<&[Vec<usize>]> {
        self.planted.as_deref()
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            n_nodes: self.n_nodes,
            n_classes: self.n_classes,
            planted: self.planted.clone(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GraphError + '_ {
    move |source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<(), GraphError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(io_err(&path))
    };
    let mut labels = String::new();
    for s in &dataset.subjects {
        write(
            &struct_file(&s.subject_id),
            &io::matrix_to_csv(s.structural.weights()),
        )?;
        write(
            &func_file(&s.subject_id),
            &io::matrix_to_csv(s.functional.weights()),
        )?;
        labels.push_str(&format!("{},{}\n", s.subject_id, s.label));
    }
    write(LABELS_FILE, &labels)?;
    let mut meta = serde_json::to_string_pretty(&dataset.meta()).expect("meta serializes");
    meta.push('\n');
    write(META_FILE, &meta)
}

fn read_graph(path: &Path) -> Result<BrainGraph, GraphError> {
    if !path.is_file() {
        return Err(GraphError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let m = io::matrix_from_csv(&text, &path.display().to_string())
        .map_err(|e| GraphError::Malformed(e.to_string()))?;
    BrainGraph::new(m).map_err(|e| GraphError::Malformed(format!("{}: {e}", path.display())))
}

/// Loads a dataset directory. Subjects appear in `labels.csv` order.
pub fn load_dataset(dir: &Path) -> Result<Dataset, GraphError> {
    let labels_path = dir.join(LABELS_FILE);
    if !labels_path.is_file() {
        return Err(GraphError::LabelsNotFound(labels_path));
    }
    let text = std::fs::read_to_string(&labels_path).map_err(io_err(&labels_path))?;
    let mut entries: Vec<(String, usize)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = line
            .split_once(',')
            .and_then(|(id, label)| Some((id.trim().to_owned(), label.trim().parse().ok()?)));
        match parsed {
            Some(entry) => entries.push(entry),
            None => {
                return Err(GraphError::Malformed(format!(
                    "{}: malformed row {}",
                    labels_path.display(),
                    n + 1
                )))
            }
        }
    }

    let listed: BTreeSet<&str> = entries.iter().map(|(id, _)| id.as_str()).collect();
    if listed.len() != entries.len() {
        return Err(GraphError::LabelMismatch(
            "duplicate subject id in labels file".into(),
        ));
    }
    let mut on_disk: BTreeMap<String, usize> = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let name = entry.map_err(io_err(dir))?.file_name();
        let name = name.to_string_lossy();
        let id = name.strip_prefix("subject_").and_then(|r| {
            r.strip_suffix("_struct.csv")
                .or_else(|| r.strip_suffix("_func.csv"))
        });
        if let Some(id) = id {
            *on_disk.entry(id.to_owned()).or_default() += 1;
        }
    }
    if let Some(extra) = on_disk.keys().find(|id| !listed.contains(id.as_str())) {
        return Err(GraphError::LabelMismatch(format!(
            "subject {extra} has files but no label"
        )));
    }

    let meta_path = dir.join(META_FILE);
    let meta: Option<DatasetMeta> = if meta_path.is_file() {
        let text = std::fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
        Some(
            serde_json::from_str(&text)
                .map_err(|e| GraphError::Malformed(format!("{}: {e}", meta_path.display())))?,
        )
    } else {
        None
    };

    let mut subjects = Vec::with_capacity(entries.len());
    for (id, label) in entries {
        let structural = read_graph(&dir.join(struct_file(&id)))?;
        let functional = read_graph(&dir.join(func_file(&id)))?;
        if structural.n_nodes() != functional.n_nodes() {
            return Err(GraphError::DimensionMismatch {
                id,
                structural: structural.n_nodes(),
                functional: functional.n_nodes(),
            });
        }
        subjects.push(SubjectRecord {
            subject_id: id,
            structural,
            functional,
            label,
        });
    }

    let n_classes = match &meta {
        Some(m) => m.n_classes,
        None => subjects.iter().map(|s| s.label + 1).max().unwrap_or(0),
    };
    let dataset = Dataset::new(subjects, n_classes)?;
    match meta {
        Some(m) => {
            if m.n_nodes != dataset.n_nodes() {
                return Err(GraphError::Inconsistent(format!(
                    "meta.json declares {} nodes, subject files have {}",
                    m.n_nodes,
                    dataset.n_nodes()
                )));
            }
            match m.planted {
                Some(p) => dataset.with_planted(p),
                None => Ok(dataset),
            }
        }
        None => Ok(dataset),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Matrix;

    fn subject(id: &str, n: usize, label: usize, w: f64) -> SubjectRecord {
        let structural = Matrix::from_fn(n, n, |i, j| {
            if i != j {
                w / (1.0 + (i + j) as f64)
            } else {
                0.0
            }
        });
        let functional = Matrix::from_fn(n, n, |i, j| {
            if i != j {
                -w / 3.0 + 0.01 * (i * j) as f64
            } else {
                0.0
            }
        });
        SubjectRecord {
            subject_id: id.into(),
            structural: BrainGraph::new(structural).unwrap(),
            functional: BrainGraph::new(functional).unwrap(),
            label,
        }
    }

    fn three() -> Dataset {
        Dataset::new(
            vec![
                subject("a", 4, 0, 0.3),
                subject("b", 4, 1, 0.7),
                subject("c", 4, 0, 0.123456789),
            ],
            2,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = three().with_planted(vec![vec![0], vec![3]]).unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    }

    #[test]
    fn missing_labels_file() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&three(), dir.path()).unwrap();
        std::fs::remove_file(dir.path().join(LABELS_FILE)).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("labels file not found"), "{err}");
    }

    #[test]
    fn pair_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&three(), dir.path()).unwrap();
        let five = subject("x", 5, 0, 0.5);
        std::fs::write(
            dir.path().join(func_file("b")),
            io::matrix_to_csv(five.functional.weights()),
        )
        .unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(
            matches!(err, GraphError::DimensionMismatch { ref id, structural: 4, functional: 5 } if id == "b"),
            "{err}"
        );
    }

    #[test]
    fn malformed_row_and_label_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&three(), dir.path()).unwrap();
        std::fs::write(dir.path().join(struct_file("a")), "0,0.1\n0.1\n").unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(GraphError::Malformed(_))
        ));

        let dir = tempfile::tempdir().unwrap();
        save_dataset(&three(), dir.path()).unwrap();
        std::fs::write(dir.path().join(LABELS_FILE), "a,0\nb,1\n").unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(GraphError::LabelMismatch(_))
        ));

        let dir = tempfile::tempdir().unwrap();
        save_dataset(&three(), dir.path()).unwrap();
        std::fs::remove_file(dir.path().join(func_file("c"))).unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(GraphError::MissingFile(_))
        ));
    }

    #[test]
    fn dataset_invariants() {
        assert!(Dataset::new(vec![subject("a", 4, 0, 0.3)], 2).is_err());
        assert!(Dataset::new(vec![subject("a", 4, 2, 0.3), subject("b", 4, 0, 0.3)], 2).is_err());
        assert!(Dataset::new(vec![subject("a", 4, 0, 0.3), subject("a", 4, 1, 0.3)], 2).is_err());
        assert!(Dataset::new(vec![subject("a", 4, 0, 0.3), subject("b", 3, 1, 0.3)], 2).is_err());
        let mut bad = subject("a", 4, 0, 0.3);
        bad.structural = BrainGraph::new(Matrix::filled(4, 4, 0.5)).unwrap();
        assert!(matches!(
            Dataset::new(vec![bad], 1),
            Err(GraphError::Invalid(_))
        ));
    }
}
