//! `bench-decode`: time reduced against full-rank decoding.
//!
//! Measures the per-test-point scoring cost at a base size for both decode
//! variants, then walks two doubling ladders (candidate count and projection
//! rank) with the reduced variant and fits log-log slopes to check that its
//! cost stays at most about linear in each.

use std::path::Path;

use ndarray::Array1;
use serde::Serialize;

use iokr::spectral::fit_loglog_slope;
use iokr::structpred::timing_probe;
use iokr::{DecodeVariant, TimingRow};

use crate::config::BenchConfig;
use crate::errors::{CliError, Result};
use crate::io;

fn variant_name(v: DecodeVariant) -> &'static str {
    match v {
        DecodeVariant::Reduced => "reduced",
        DecodeVariant::FullRank => "full_rank",
    }
}

/// Log-log slope of median time against a size ladder.
fn ladder_slope(rows: &[TimingRow], sizes: impl Iterator<Item = usize>) -> Result<f64> {
    let x = Array1::from_iter(sizes.map(|s| s as f64));
    let y = Array1::from_iter(rows.iter().map(|r| (r.median_ns.max(1)) as f64));
    let fit = fit_loglog_slope(x.view(), y.view(), Some((0.0, 1.0)))?;
    Ok(fit.slope)
}

pub fn run(cfg: &BenchConfig, out: &Path) -> Result<()> {
    if cfg.ladder_points < 2 {
        return Err(CliError::data("ladder_points must be at least 2"));
    }
    let base = [(cfg.n, cfg.n_c, cfg.p)];
    let nc_ladder: Vec<_> = (0..cfg.ladder_points)
        .map(|i| (cfg.n, cfg.n_c << i, cfg.p))
        .collect();
    let p_ladder: Vec<_> = (0..cfg.ladder_points)
        .map(|i| (cfg.n, cfg.n_c, cfg.p << i))
        .collect();

    eprintln!(
        "bench-decode: base n = {}, n_c = {}, p = {}, {} reps",
        cfg.n, cfg.n_c, cfg.p, cfg.reps
    );
    let full = timing_probe::<f64>(DecodeVariant::FullRank, &base, cfg.reps, cfg.seed)?;
    eprintln!("bench-decode: walking candidate ladder");
    let red_nc = timing_probe::<f64>(DecodeVariant::Reduced, &nc_ladder, cfg.reps, cfg.seed)?;
    eprintln!("bench-decode: walking rank ladder");
    let red_p = timing_probe::<f64>(DecodeVariant::Reduced, &p_ladder, cfg.reps, cfg.seed)?;

    // Timing is inherently machine-dependent, so it lives in JSON rather
    // than in the CSV record that is required to be reproducible.
    #[derive(Serialize)]
    struct TimingEntry {
        variant: &'static str,
        n: usize,
        n_c: usize,
        p: usize,
        reps: usize,
        median_ns: u64,
    }
    let entries: Vec<TimingEntry> = full
        .iter()
        .chain(red_nc.iter())
        .chain(red_p.iter())
        .map(|row| TimingEntry {
            variant: variant_name(row.variant),
            n: row.n,
            n_c: row.n_c,
            p: row.p,
            reps: row.reps,
            median_ns: row.median_ns,
        })
        .collect();
    io::write_json(&out.join("timings.json"), &entries)?;

    let speedup = full[0].median_ns as f64 / (red_nc[0].median_ns.max(1)) as f64;
    let candidate_slope = ladder_slope(&red_nc, (0..cfg.ladder_points).map(|i| cfg.n_c << i))?;
    let rank_slope = ladder_slope(&red_p, (0..cfg.ladder_points).map(|i| cfg.p << i))?;
    eprintln!(
        "bench-decode: speedup {:.1}x, ladder slopes {:.3} (candidates), {:.3} (rank)",
        speedup, candidate_slope, rank_slope
    );

    #[derive(Serialize)]
    struct Summary {
        speedup_fullrank_over_reduced: f64,
        candidate_ladder_slope: f64,
        rank_ladder_slope: f64,
    }
    io::write_json(
        &out.join("summary.json"),
        &Summary {
            speedup_fullrank_over_reduced: speedup,
            candidate_ladder_slope: candidate_slope,
            rank_ladder_slope: rank_slope,
        },
    )?;
    Ok(())
}
