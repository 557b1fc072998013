//! Binary feature files and CSV label tables.
//!
//! Feature file layout (little-endian):
//!
//! ```text
//! "BOFF"  u16 version=1  u32 h  u32 count  count*h f32 (feature-major)
//! ```
//!
//! The image id is the file stem. Label tables are UTF-8 CSV with header
//! `image_id,label` and one row per (image, label) pair.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::dataset::{FeatureVector, ImageFeatures, LabelMatrix, LabelVocabulary, LabeledDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FEATURE_MAGIC: [u8; 4] = *b"BOFF";
pub const FEATURE_VERSION: u16 = 1;
pub const FEATURE_EXTENSION: &str = "boff";
const HEADER_LEN: usize = 4 + 2 + 4 + 4;

pub fn encode_features<T: Scalar>(img: &ImageFeatures<T>, dim: usize) -> Result<Vec<u8>> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    if let Some(d) = img.dim() {
        if d != dim {
            return Err(Error::DimensionMismatch { left: dim, right: d });
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + img.len() * dim * 4);
    out.extend_from_slice(&FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(img.len() as u32).to_le_bytes());
    for f in img.features() {
        for &v in f.as_slice() {
            let v = v.to_f32().unwrap_or(f32::NAN);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses a feature file body. Returns the image and its declared dimension
/// (meaningful even when the file holds no features).
pub fn decode_features<T: Scalar>(id: &str, bytes: &[u8]) -> Result<(ImageFeatures<T>, usize)> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != FEATURE_MAGIC {
        return Err(Error::BadMagic {
            expected: FEATURE_MAGIC,
            found: magic,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != FEATURE_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    let expected = HEADER_LEN + count * dim * 4;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes(bytes.len() - expected));
    }
    let payload = &bytes[HEADER_LEN..];
    let features = payload
        .chunks_exact(dim * 4)
        .map(|chunk| {
            let values = chunk
                .chunks_exact(4)
                .map(|b| T::narrow(f32::from_le_bytes(b.try_into().unwrap()) as f64))
                .collect();
            FeatureVector::new(values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ImageFeatures::new(id, features)?, dim))
}

pub fn write_feature_file<T: Scalar>(path: &Path, img: &ImageFeatures<T>, dim: usize) -> Result<()> {
    let bytes = encode_features(img, dim)?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads a feature file; the image id is the file stem.
pub fn read_feature_file<T: Scalar>(path: &Path) -> Result<(ImageFeatures<T>, usize)> {
    let bytes = fs::read(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_features(&id, &bytes)
}

/// Parsed label table: vocabulary in first-appearance order, labeled ids in
/// first-appearance order, and one matrix row per labeled id.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTable {
    pub vocab: LabelVocabulary,
    pub matrix: LabelMatrix,
    pub labeled_ids: Vec<String>,
}

pub fn read_label_table<R: Read>(reader: R, known: &dyn Fn(&str) -> bool) -> Result<LabelTable> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).from_reader(reader);
    let mut labels: Vec<String> = Vec::new();
    let mut label_index: HashMap<String, usize> = HashMap::new();
    let mut ids: Vec<String> = Vec::new();
    let mut id_index: HashMap<String, usize> = HashMap::new();
    let mut pairs: HashSet<(usize, usize)> = HashSet::new();

    for record in csv.records() {
        let record = record?;
        let id = record.get(0).unwrap_or("").trim();
        let label = record.get(1).unwrap_or("").trim();
        if !known(id) {
            return Err(Error::UnknownImage(id.to_string()));
        }
        if label.is_empty() {
            return Err(Error::UnlabeledImage(id.to_string()));
        }
        let row = *id_index.entry(id.to_string()).or_insert_with(|| {
            ids.push(id.to_string());
            ids.len() - 1
        });
        let col = *label_index.entry(label.to_string()).or_insert_with(|| {
            labels.push(label.to_string());
            labels.len() - 1
        });
        pairs.insert((row, col));
    }
    if ids.is_empty() {
        return Err(Error::EmptyLabelTable);
    }
    let vocab = LabelVocabulary::new(labels)?;
    let mut matrix = LabelMatrix::zeros(ids.len(), vocab.len());
    for (r, c) in pairs {
        matrix.set(r, c, true);
    }
    Ok(LabelTable {
        vocab,
        matrix,
        labeled_ids: ids,
    })
}

pub fn write_label_table<W: Write>(
    writer: W,
    vocab: &LabelVocabulary,
    matrix: &LabelMatrix,
    ids: &[&str],
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["image_id", "label"])?;
    for (row, id) in ids.iter().enumerate() {
        for c in matrix.labels_of(row) {
            csv.write_record([*id, vocab.name(c)])?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// Feature files in `dir`, sorted by file name.
pub fn list_feature_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == FEATURE_EXTENSION))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Loads every feature file of `feature_dir` (sorted by name) and the label
/// table at `labels_csv`.
pub fn load_dataset<T: Scalar>(feature_dir: &Path, labels_csv: &Path) -> Result<LabeledDataset<T>> {
    let mut images = Vec::new();
    for path in list_feature_files(feature_dir)? {
        let (img, _) = read_feature_file(&path)?;
        images.push(img);
    }
    let ids: HashSet<String> = images.iter().map(|i| i.id().to_string()).collect();
    let table = read_label_table(fs::File::open(labels_csv)?, &|id| ids.contains(id))?;
    LabeledDataset::new(images, &table.labeled_ids, table.matrix, table.vocab)
}

/// Writes `features/<id>.boff` for every image plus `labels.csv` into `dir`.
pub fn save_dataset<T: Scalar>(dir: &Path, dataset: &LabeledDataset<T>) -> Result<()> {
    let feature_dir = dir.join("features");
    fs::create_dir_all(&feature_dir)?;
    let dim = dataset.dim().ok_or(Error::ZeroDimension)?;
    for img in dataset.images() {
        let path = feature_dir.join(format!("{}.{FEATURE_EXTENSION}", img.id()));
        write_feature_file(&path, img, dim)?;
    }
    let ids: Vec<&str> = dataset.labeled_ids().collect();
    write_label_table(
        fs::File::create(dir.join("labels.csv"))?,
        dataset.label_vocab(),
        dataset.label_matrix(),
        &ids,
    )
}
