//! `decode`: rank candidates for a file of test inputs with a trained bundle.
//!
//! The candidate coordinates and all kernel columns are computed once for
//! the batch; each test point then pays only the reduced scoring cost. The
//! output table has one row per (test point, rank) pair, ascending by the
//! candidate-independent part of the squared kernel distance.

use std::path::Path;

use iokr::kernels::gram_cross;
use iokr::structpred::{
    decode_fullrank_with_alpha, decode_reduced_with_alpha, project_candidates,
};
use iokr::{CandidateSet, DecodeVariant};

use crate::config::DecodeConfig;
use crate::errors::{CliError, Result};
use crate::io;

pub fn run(cfg: &DecodeConfig, out: &Path) -> Result<()> {
    if cfg.variant == DecodeVariant::FullRank && cfg.p.is_some() {
        return Err(CliError::usage(
            "a rank override applies to reduced decoding only",
        ));
    }
    if cfg.top_k == Some(0) {
        return Err(CliError::data("top_k must be at least 1"));
    }
    let bundle = io::load_bundle(&cfg.bundle)?;
    let train_inputs = bundle.model.train_inputs.as_ref().ok_or_else(|| {
        CliError::data("bundle does not store training inputs; cannot evaluate kernel columns")
    })?;
    let x_test = io::read_dense_csv(&cfg.test_inputs)?;
    if x_test.ncols() != train_inputs.ncols() {
        return Err(CliError::Data(format!(
            "test inputs have {} columns but the model was trained on {}",
            x_test.ncols(),
            train_inputs.ncols()
        )));
    }
    let candidates = match &cfg.candidates {
        Some(path) => io::read_dense_csv(path)?,
        None => bundle.train_outputs.clone(),
    };
    if candidates.ncols() != bundle.train_outputs.ncols() {
        return Err(CliError::Data(format!(
            "candidates have {} columns but training outputs have {}",
            candidates.ncols(),
            bundle.train_outputs.ncols()
        )));
    }
    let n_test = x_test.nrows();
    eprintln!(
        "decode: {} test points against {} candidates",
        n_test,
        candidates.nrows()
    );

    let cand = CandidateSet::new(bundle.output_kernel, candidates, None)?;
    let k_z_tr_c = cand.cross_gram(bundle.train_outputs.view())?;
    let k_x_cross = gram_cross(&bundle.model.kernel, train_inputs.view(), x_test.view())?;
    let alphas = bundle.model.predict_coefficients_batch(k_x_cross.entries.view())?;
    let k = cfg.top_k.unwrap_or(cand.len()).min(cand.len());

    let mut results = Vec::with_capacity(n_test);
    match cfg.variant {
        DecodeVariant::Reduced => {
            let projection = match cfg.p {
                Some(p) => {
                    if p > bundle.projection.rank_p {
                        eprintln!(
                            "decode: rank override {} exceeds stored rank {}; using the stored rank",
                            p, bundle.projection.rank_p
                        );
                    }
                    bundle.projection.truncated(p)
                }
                None => bundle.projection.clone(),
            };
            let uy_c = project_candidates(&projection, k_z_tr_c.view())?;
            for j in 0..n_test {
                results.push(decode_reduced_with_alpha(
                    &projection,
                    uy_c.view(),
                    alphas.column(j),
                    &cand,
                    k,
                )?);
            }
        }
        DecodeVariant::FullRank => {
            for j in 0..n_test {
                results.push(decode_fullrank_with_alpha(
                    k_z_tr_c.view(),
                    alphas.column(j),
                    &cand,
                    k,
                )?);
            }
        }
    }
    io::write_decode_csv(&out.join("decode.csv"), &results)?;
    eprintln!("decode: wrote {} rows", n_test * k);
    Ok(())
}
