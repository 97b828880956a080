//! `train`: fit the two-stage estimator on a dataset and persist it.
//!
//! Stage one fits the ridge smoother at `lambda1` and uses it to estimate the
//! supervised output subspace at the requested rank; stage two fits the
//! prediction-stage ridge at `lambda2` (tied to `lambda1` by default). The
//! resulting bundle holds everything `decode` needs, so decoding can run as a
//! separate invocation without retraining.

use std::path::Path;

use serde::Serialize;

use iokr::kernels::gram;
use iokr::regression::fit_krr_with_eig;
use iokr::spectral::eigh;
use iokr::subspace::fit_supervised_projection;

use crate::config::TrainConfig;
use crate::errors::Result;
use crate::io::{self, ModelBundle, BUNDLE_VERSION};

pub fn run(cfg: &TrainConfig, out: &Path) -> Result<()> {
    cfg.input_kernel.validate()?;
    cfg.output_kernel.validate()?;
    let (x, y, label_names) = io::load_dataset(&cfg.dataset)?;
    let lambda2 = cfg.lambda2.unwrap_or(cfg.lambda1);
    eprintln!(
        "train: {} examples, d_x = {}, d_y = {}",
        x.nrows(),
        x.ncols(),
        y.ncols()
    );

    let k_x = gram(&cfg.input_kernel, x.view())?;
    let k_z = gram(&cfg.output_kernel, y.view())?;
    let dec = eigh(k_x.entries.view())?;
    let smoother = fit_krr_with_eig(&dec, cfg.input_kernel, cfg.lambda1)?;
    eprintln!("train: fitting projection at rank {}", cfg.p);
    let projection =
        fit_supervised_projection(&smoother, k_x.entries.view(), k_z.entries.view(), cfg.p)?;
    if projection.rank_p < cfg.p {
        eprintln!(
            "train: kept {} of {} requested modes (rank-deficient smoothed output Gram)",
            projection.rank_p, cfg.p
        );
    }
    let mut model = if lambda2 == cfg.lambda1 {
        smoother
    } else {
        fit_krr_with_eig(&dec, cfg.input_kernel, lambda2)?
    };
    model.train_inputs = Some(x);

    #[derive(Serialize)]
    struct Summary<'a> {
        n: usize,
        d_x: usize,
        d_y: usize,
        lambda1: f64,
        lambda2: f64,
        requested_rank: usize,
        rank_p: usize,
        label_names: Option<&'a [String]>,
    }
    let summary = Summary {
        n: model.n,
        d_x: model.train_inputs.as_ref().map_or(0, |m| m.ncols()),
        d_y: y.ncols(),
        lambda1: cfg.lambda1,
        lambda2,
        requested_rank: cfg.p,
        rank_p: projection.rank_p,
        label_names: label_names.as_deref(),
    };
    io::write_json(&out.join("train_summary.json"), &summary)?;

    let bundle = ModelBundle {
        version: BUNDLE_VERSION,
        model,
        projection,
        train_outputs: y,
        output_kernel: cfg.output_kernel,
        lambda1: cfg.lambda1,
        lambda2,
    };
    io::save_bundle(&out.join("model.bundle"), &bundle)?;
    eprintln!("train: wrote model.bundle");
    Ok(())
}
