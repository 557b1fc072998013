use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use semvoc::encoding::{encode_dataset, read_encoding, write_encoding, BoFVector};
use semvoc::features::io::{save_dataset, write_feature_file, FEATURE_EXTENSION};
use semvoc::features::{SamplingConfig, DESCRIPTOR_DIM};
use semvoc::filtering::{write_filter_report, FilterParams};
use semvoc::synthgen::generate;
use semvoc::vocabulary::{
    build, build_filtered_dedicated_with_report, read_vocabulary, write_vocabulary, Strategy,
};
use semvoc::{Dataset, Vocabulary};

use crate::config::ExperimentConfig;
use crate::experiment::{evaluate_encoding, write_results, Cell, Prepared};

/// Describes every image of `images_dir` into `out_dir/<stem>.boff`.
/// Returns the number of feature files written.
pub fn cmd_extract(images_dir: &Path, sampling: &SamplingConfig, out_dir: &Path) -> Result<usize> {
    sampling.validate()?;
    let images = crate::data::extract_dir(images_dir, sampling)?;
    fs::create_dir_all(out_dir)?;
    for img in &images {
        let path = out_dir.join(format!("{}.{FEATURE_EXTENSION}", img.id()));
        write_feature_file(&path, img, DESCRIPTOR_DIM)?;
    }
    Ok(images.len())
}

/// Writes a synthetic dataset: `features/`, `labels.csv` and
/// `ground_truth.csv`.
pub fn cmd_synth(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Dataset> {
    let synth = cfg.synth_config();
    synth.validate()?;
    let (ds, gt): (Dataset, _) = generate(&synth)?;
    save_dataset(out_dir, &ds)?;
    let mut w = BufWriter::new(fs::File::create(out_dir.join("ground_truth.csv"))?);
    w.write_all(cfg.header_comment().as_bytes())?;
    let ids: Vec<&str> = ds.images().iter().map(|i| i.id()).collect();
    gt.write_csv(&mut w, &ids, ds.label_vocab())?;
    w.flush()?;
    Ok(ds)
}

fn construction_params(cfg: &ExperimentConfig) -> (semvoc::clustering::KMeansParams, FilterParams) {
    (
        cfg.kmeans.with_seed(cfg.seed.derive_indexed("construction", 0)),
        FilterParams {
            seed: cfg.seed.derive_indexed("filter", 0),
            ..cfg.filter
        },
    )
}

/// Builds one vocabulary from the labeled images of the configured dataset.
/// The filtered strategy also writes `<out>.filter.csv`.
pub fn cmd_vocab(cfg: &ExperimentConfig, strategy: Strategy, m: usize, out: &Path) -> Result<Vocabulary> {
    cfg.validate()?;
    let (ds, _) = crate::data::load(cfg)?;
    let (kmeans, filter) = construction_params(cfg);
    let vocab = if strategy == Strategy::FiltModel {
        let (vocab, outcome) = build_filtered_dedicated_with_report(m, &ds, &filter, &kmeans)?;
        let report = out.with_extension("filter.csv");
        let mut w = fs::File::create(&report)?;
        w.write_all(cfg.header_comment().as_bytes())?;
        write_filter_report(w, &outcome.report)?;
        vocab
    } else {
        build(strategy, m, &ds, &kmeans, &filter)?
    };
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    write_vocabulary(BufWriter::new(fs::File::create(out)?), &vocab)?;
    Ok(vocab)
}

/// Encodes every image of the configured dataset against a vocabulary file.
pub fn cmd_encode(cfg: &ExperimentConfig, vocab_path: &Path, out: &Path) -> Result<Vec<BoFVector>> {
    cfg.validate()?;
    let (ds, _) = crate::data::load(cfg)?;
    let vocab: Vocabulary = read_vocabulary(BufReader::new(
        fs::File::open(vocab_path).with_context(|| format!("opening {}", vocab_path.display()))?,
    ))?;
    let encoded = encode_dataset(&ds, &vocab)?;
    let mut w = BufWriter::new(fs::File::create(out)?);
    w.write_all(cfg.header_comment().as_bytes())?;
    write_encoding(&mut w, &encoded)?;
    w.flush()?;
    Ok(encoded)
}

/// Scores an existing encoding with every configured protocol and split
/// repetition; rows are tagged with `strategy`.
pub fn cmd_eval(cfg: &ExperimentConfig, encoding: &Path, strategy: Strategy, out_dir: &Path) -> Result<usize> {
    cfg.validate()?;
    let (ds, _) = crate::data::load(cfg)?;
    let data = Prepared::new(ds)?;
    let vectors = read_encoding(BufReader::new(
        fs::File::open(encoding).with_context(|| format!("opening {}", encoding.display()))?,
    ))?;
    let mut ordered: Vec<Option<BoFVector>> = vec![None; data.dataset.images().len()];
    for v in vectors {
        match data.dataset.position_of(&v.image_id) {
            Some(i) => ordered[i] = Some(v),
            None => bail!("encoding has unknown image {:?}", v.image_id),
        }
    }
    let ordered: Vec<BoFVector> = ordered
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.with_context(|| format!("encoding lacks image {:?}", data.dataset.images()[i].id())))
        .collect::<Result<_>>()?;
    let m = ordered.first().map_or(0, |v| v.weights.len());

    let mut done = Vec::new();
    for &protocol in &cfg.protocols {
        for repetition in 0..cfg.eval.construction_repeats {
            let cell = Cell {
                strategy,
                vocab_size: m,
                protocol,
                repetition,
                alpha: None,
            };
            done.push((cell, evaluate_encoding(cfg, &data, &ordered, protocol, repetition)?));
        }
    }
    fs::create_dir_all(out_dir)?;
    write_results(out_dir, &cfg.header_comment(), &done)?;
    Ok(done.iter().map(|(_, o)| o.rows.len()).sum())
}
