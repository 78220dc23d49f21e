//! CSV persistence for datasets and feature files.
//!
//! Dataset directory layout: `labels_{train|val|test}.csv` with a single
//! `label` column, and `modality{k}_{train|val|test}.csv` with header
//! `f0,...,f{d-1}`, one sample per row. Feature (embedding) files carry the
//! label inline: header `label,f0,...,f{d-1}`. All files are UTF-8 with
//! `\n` newlines; floats are written in shortest round-trip form, so a
//! save/load cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{MultimodalDataset, Split};

const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn feature_header(dim: usize) -> String {
    let mut h = String::new();
    for d in 0..dim {
        if d > 0 {
            h.push(',');
        }
        let _ = write!(h, "f{d}");
    }
    h
}

fn format_row(values: &[f64]) -> String {
    let mut line = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        let _ = write!(line, "{v}");
    }
    line
}

/// Lines of `text` without a trailing empty line, paired with 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
}

fn parse_label(path: &Path, line_no: usize, column: usize, token: &str) -> Result<usize> {
    token.trim().parse::<usize>().map_err(|_| {
        Error::parse(
            path,
            line_no,
            column,
            format!("expected a non-negative integer label, found '{token}'"),
        )
    })
}

fn parse_value(path: &Path, line_no: usize, column: usize, token: &str) -> Result<f64> {
    let v: f64 = token.trim().parse().map_err(|_| {
        Error::parse(
            path,
            line_no,
            column,
            format!("expected a decimal real, found '{token}'"),
        )
    })?;
    if !v.is_finite() {
        return Err(Error::parse(
            path,
            line_no,
            column,
            format!("non-finite value '{token}'"),
        ));
    }
    Ok(v)
}

/// Writes the dataset directory layout under `dir`, creating it if needed.
pub fn save_dataset(ds: &MultimodalDataset, dir: &Path) -> Result<()> {
    ds.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (split, name) in [&ds.train, &ds.val, &ds.test].into_iter().zip(SPLIT_NAMES) {
        let mut labels = String::from("label\n");
        for &y in &split.labels {
            let _ = writeln!(labels, "{y}");
        }
        write_file(&dir.join(format!("labels_{name}.csv")), &labels)?;
        for (k, feats) in split.modalities.iter().enumerate() {
            let mut text = feature_header(feats.cols());
            text.push('\n');
            for r in 0..feats.rows() {
                text.push_str(&format_row(feats.row(r)));
                text.push('\n');
            }
            write_file(&dir.join(format!("modality{k}_{name}.csv")), &text)?;
        }
    }
    Ok(())
}

fn load_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read_file(path)?;
    let mut it = lines(&text);
    match it.next() {
        Some((_, h)) if h.trim() == "label" => {}
        Some((_, h)) => {
            return Err(Error::parse(path, 1, 1, format!("expected header 'label', found '{h}'")))
        }
        None => return Err(Error::parse(path, 1, 1, "empty file".to_string())),
    }
    let mut labels = Vec::new();
    for (line_no, line) in it {
        if line.is_empty() {
            continue;
        }
        labels.push(parse_label(path, line_no, 1, line)?);
    }
    Ok(labels)
}

/// Parses a headerless-label feature matrix file with header `f0,...`.
fn load_matrix(path: &Path) -> Result<Matrix> {
    let text = read_file(path)?;
    let mut it = lines(&text);
    let dim = match it.next() {
        Some((_, h)) => {
            let fields: Vec<&str> = h.split(',').collect();
            for (i, f) in fields.iter().enumerate() {
                if f.trim() != format!("f{i}") {
                    return Err(Error::parse(
                        path,
                        1,
                        i + 1,
                        format!("expected header field 'f{i}', found '{f}'"),
                    ));
                }
            }
            fields.len()
        }
        None => return Err(Error::parse(path, 1, 1, "empty file".to_string())),
    };
    let mut rows: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (line_no, line) in it {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim {
            return Err(Error::parse(
                path,
                line_no,
                fields.len().min(dim) + 1,
                format!("row has {} fields, expected {dim}", fields.len()),
            ));
        }
        for (i, f) in fields.iter().enumerate() {
            rows.push(parse_value(path, line_no, i + 1, f)?);
        }
        n += 1;
    }
    Matrix::from_vec(n, dim, rows)
}

fn load_split(dir: &Path, name: &str, num_modalities: usize) -> Result<Split> {
    let labels_path = dir.join(format!("labels_{name}.csv"));
    let labels = load_labels(&labels_path)?;
    let mut modalities = Vec::with_capacity(num_modalities);
    for k in 0..num_modalities {
        let path = dir.join(format!("modality{k}_{name}.csv"));
        let m = load_matrix(&path)?;
        if m.rows() != labels.len() {
            return Err(Error::parse(
                path,
                m.rows() + 1,
                1,
                format!(
                    "feature row count {} does not match label count {}",
                    m.rows(),
                    labels.len()
                ),
            ));
        }
        modalities.push(m);
    }
    Ok(Split { labels, modalities })
}

/// Loads a dataset directory written by [`save_dataset`] (or produced
/// externally in the same layout). The class count is inferred from the
/// largest label present.
pub fn load_dataset(dir: &Path) -> Result<MultimodalDataset> {
    let mut num_modalities = 0usize;
    while dir.join(format!("modality{num_modalities}_train.csv")).exists() {
        num_modalities += 1;
    }
    if num_modalities == 0 {
        return Err(Error::input(format!(
            "no modality0_train.csv found in {}",
            dir.display()
        )));
    }
    let train = load_split(dir, "train", num_modalities)?;
    let val = load_split(dir, "val", num_modalities)?;
    let test = load_split(dir, "test", num_modalities)?;
    let num_classes = train
        .labels
        .iter()
        .chain(&val.labels)
        .chain(&test.labels)
        .max()
        .map_or(0, |&m| m + 1);
    let ds = MultimodalDataset {
        num_classes,
        train,
        val,
        test,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes a feature (embedding) file: header `label,f0,...,f{d-1}`.
pub fn save_features(path: &Path, labels: &[usize], features: &Matrix) -> Result<()> {
    if labels.len() != features.rows() {
        return Err(Error::input(format!(
            "{} labels but {} feature rows",
            labels.len(),
            features.rows()
        )));
    }
    let mut text = String::from("label");
    for d in 0..features.cols() {
        let _ = write!(text, ",f{d}");
    }
    text.push('\n');
    for (i, &y) in labels.iter().enumerate() {
        let _ = write!(text, "{y},");
        text.push_str(&format_row(features.row(i)));
        text.push('\n');
    }
    write_file(path, &text)
}

/// Reads a feature (embedding) file written by [`save_features`].
///
/// The data section must be non-empty: clustering is undefined on zero
/// samples.
pub fn load_features(path: &Path) -> Result<(Vec<usize>, Matrix)> {
    let text = read_file(path)?;
    let mut it = lines(&text);
    let dim = match it.next() {
        Some((_, h)) => {
            let fields: Vec<&str> = h.split(',').collect();
            if fields.first().map(|f| f.trim()) != Some("label") {
                return Err(Error::parse(
                    path,
                    1,
                    1,
                    format!("expected header to start with 'label', found '{h}'"),
                ));
            }
            for (i, f) in fields[1..].iter().enumerate() {
                if f.trim() != format!("f{i}") {
                    return Err(Error::parse(
                        path,
                        1,
                        i + 2,
                        format!("expected header field 'f{i}', found '{f}'"),
                    ));
                }
            }
            fields.len() - 1
        }
        None => return Err(Error::parse(path, 1, 1, "empty file".to_string())),
    };
    if dim == 0 {
        return Err(Error::parse(
            path,
            1,
            2,
            "header names no feature columns".to_string(),
        ));
    }
    let mut labels = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (line_no, line) in it {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::parse(
                path,
                line_no,
                fields.len().min(dim + 1) + 1,
                format!("row has {} fields, expected {}", fields.len(), dim + 1),
            ));
        }
        labels.push(parse_label(path, line_no, 1, fields[0])?);
        for (i, f) in fields[1..].iter().enumerate() {
            values.push(parse_value(path, line_no, i + 2, f)?);
        }
    }
    if labels.is_empty() {
        return Err(Error::input(format!(
            "{} has no data rows; clustering is undefined on 0 samples",
            path.display()
        )));
    }
    let features = Matrix::from_vec(labels.len(), dim, values)?;
    Ok((labels, features))
}

/// Convenience: the dataset file names for `k` modalities, used by callers
/// that enumerate outputs.
pub fn dataset_file_names(num_modalities: usize) -> Vec<PathBuf> {
    let mut names = Vec::new();
    for name in SPLIT_NAMES {
        names.push(PathBuf::from(format!("labels_{name}.csv")));
        for k in 0..num_modalities {
            names.push(PathBuf::from(format!("modality{k}_{name}.csv")));
        }
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, DatasetSpec, ModalitySpec};

    fn small_spec(seed: u64) -> DatasetSpec {
        DatasetSpec {
            num_classes: 2,
            modalities: vec![
                ModalitySpec {
                    dim: 3,
                    class_separation: 1.5,
                    noise_sigma: 0.4,
                    informative_fraction: 1.0,
                },
                ModalitySpec {
                    dim: 2,
                    class_separation: 0.5,
                    noise_sigma: 0.8,
                    informative_fraction: 0.5,
                },
            ],
            n_train: 10,
            n_val: 6,
            n_test: 4,
            seed,
        }
    }

    #[test]
    fn dataset_roundtrip_is_bit_exact() {
        let ds = generate(&small_spec(9)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(ds, loaded);
    }

    #[test]
    fn same_seed_writes_identical_bytes() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        save_dataset(&generate(&small_spec(4)).unwrap(), dir_a.path()).unwrap();
        save_dataset(&generate(&small_spec(4)).unwrap(), dir_b.path()).unwrap();
        for name in dataset_file_names(2) {
            let a = std::fs::read(dir_a.path().join(&name)).unwrap();
            let b = std::fs::read(dir_b.path().join(&name)).unwrap();
            assert_eq!(a, b, "{name:?} differs");
        }
    }

    #[test]
    fn label_count_mismatch_is_parse_error() {
        let ds = generate(&small_spec(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        // Drop one data line from a modality file.
        let path = dir.path().join("modality0_train.csv");
        let text = std::fs::read_to_string(&path).unwrap();
        let shorter: Vec<&str> = text.lines().take(text.lines().count() - 1).collect();
        std::fs::write(&path, shorter.join("\n") + "\n").unwrap();
        match load_dataset(dir.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 10),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_token_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.csv");
        std::fs::write(&path, "label,f0,f1\n0,1.0,2.0\n1,oops,4.0\n").unwrap();
        match load_features(&path) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, 2);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn load_features_reads_two_row_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.csv");
        std::fs::write(&path, "label,f0,f1\n0,1.0,2.0\n1,3.0,4.0\n").unwrap();
        let (labels, feats) = load_features(&path).unwrap();
        assert_eq!(labels, vec![0, 1]);
        assert_eq!(feats.rows(), 2);
        assert_eq!(feats.cols(), 2);
        assert_eq!(feats.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn empty_data_section_is_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.csv");
        std::fs::write(&path, "label,f0\n").unwrap();
        assert!(matches!(load_features(&path), Err(Error::Input(_))));
    }

    #[test]
    fn single_feature_column_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.csv");
        std::fs::write(&path, "label,f0\n0,1.5\n1,-2.5\n").unwrap();
        let (labels, feats) = load_features(&path).unwrap();
        assert_eq!(labels.len(), 2);
        assert_eq!(feats.cols(), 1);
    }

    #[test]
    fn ragged_row_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.csv");
        std::fs::write(&path, "label,f0,f1\n0,1.0\n").unwrap();
        assert!(matches!(load_features(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn features_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.csv");
        let labels = vec![0usize, 1, 1];
        let feats = Matrix::from_vec(3, 2, vec![0.25, -1.75, 1e-9, 3.5, -0.0625, 7.0]).unwrap();
        save_features(&path, &labels, &feats).unwrap();
        let (l2, f2) = load_features(&path).unwrap();
        assert_eq!(labels, l2);
        assert_eq!(feats, f2);
    }
}
