//! Estimating a large-scale gain from single-tone training.
//!
//! `mu` users share `mu` orthonormal training tuples. The target user sends
//! tuple 0, the others the remaining tuples. Correlating the received block
//! with tuple 0 leaves `sqrt(rho_r mu beta) h + noise`, whose normalised
//! energy, minus the known noise contribution, is an unbiased estimate of
//! `beta`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::norm_sqr;
use crate::error::{Error, Result};
use crate::rng::{complex_normal, derive_seed, stream_rng, SimRng};
use crate::stats::{log_log_slope, mean_estimate, Estimate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaEstimate {
    /// `max(raw, 0)`
    pub beta_hat: f64,
    /// `y^H y / (M rho_r mu) - 1 / (rho_r mu)`
    pub raw: f64,
    pub antennas: usize,
    pub mu: usize,
    pub rho_r: f64,
}

/// Orthonormal DFT tones, one per column.
pub fn training_tones(mu: usize) -> DMatrix<Complex64> {
    let s = 1.0 / (mu as f64).sqrt();
    DMatrix::from_fn(mu, mu, |t, k| Complex64::from_polar(s, 2.0 * PI * (k * t) as f64 / mu as f64))
}

fn check(gains: &[f64], target: usize, antennas: usize) -> Result<()> {
    if gains.is_empty() {
        return Err(Error::Config("need at least one training tuple".into()));
    }
    if target >= gains.len() {
        return Err(Error::Config(format!("target {target} out of range for mu = {}", gains.len())));
    }
    if antennas == 0 {
        return Err(Error::Config("M must be at least 1".into()));
    }
    if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::Config("gains must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Despread observation `Y v^[target]` and the target's small-scale vector.
fn observe(
    gains: &[f64],
    target: usize,
    antennas: usize,
    rho_r: f64,
    noise: bool,
    rng: &mut SimRng,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let mu = gains.len();
    let v = training_tones(mu);
    // user k uses tone column (k - target) mod mu, so the target is on column 0
    let tone = |k: usize| (k + mu - target) % mu;
    // columns of H are sqrt(rho_r mu beta_k) h_k; tones permuted so the target sits on column 0
    let mut h = DMatrix::<Complex64>::zeros(antennas, mu);
    for k in 0..mu {
        let a = (rho_r * mu as f64 * gains[k]).sqrt();
        for x in h.column_mut(k).iter_mut() {
            *x = complex_normal(rng) * a;
        }
    }
    let tones = DMatrix::from_fn(mu, mu, |t, k| v[(t, tone(k))]);
    // Y = sum_k (scaled h_k) v_k^H
    let mut y_block = &h * tones.adjoint();
    if noise {
        for x in y_block.iter_mut() {
            *x += complex_normal(rng);
        }
    }
    let y = (&y_block * v.column(0)).iter().copied().collect();
    let a = (rho_r * mu as f64 * gains[target]).sqrt();
    let h_target = h.column(target).iter().map(|x| if a > 0.0 { x / a } else { *x }).collect();
    (y, h_target)
}

/// One estimate of `gains[target]` with all `mu` users transmitting.
pub fn estimate_beta(gains: &[f64], target: usize, antennas: usize, rho_r: f64, seed: u64) -> Result<BetaEstimate> {
    check(gains, target, antennas)?;
    let mut rng = stream_rng(derive_seed(seed, 0xBE7A), 0);
    Ok(estimate_with(gains, target, antennas, rho_r, true, &mut rng))
}

fn estimate_with(
    gains: &[f64],
    target: usize,
    antennas: usize,
    rho_r: f64,
    noise: bool,
    rng: &mut SimRng,
) -> BetaEstimate {
    let mu = gains.len();
    let (y, _) = observe(gains, target, antennas, rho_r, noise, rng);
    let scale = rho_r * mu as f64;
    let bias = if noise { 1.0 / scale } else { 0.0 };
    let raw = norm_sqr(&y) / (antennas as f64 * scale) - bias;
    BetaEstimate { beta_hat: raw.max(0.0), raw, antennas, mu, rho_r }
}

/// Spread and bias of the raw estimate at one antenna count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaStudyRow {
    pub antennas: usize,
    pub trials: usize,
    /// Mean of the raw estimate with its standard error.
    pub mean: Estimate,
    /// Standard deviation of the raw estimate across trials.
    pub spread: f64,
}

pub fn beta_convergence_study(
    gains: &[f64],
    target: usize,
    rho_r: f64,
    antenna_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<BetaStudyRow>> {
    for &m in antenna_grid {
        check(gains, target, m)?;
    }
    Ok(antenna_grid
        .iter()
        .enumerate()
        .map(|(gi, &m)| {
            let base = derive_seed(seed, gi as u64);
            let raw: Vec<f64> = (0..trials as u64)
                .into_par_iter()
                .map(|t| estimate_with(gains, target, m, rho_r, true, &mut stream_rng(base, t)).raw)
                .collect();
            let mean = mean_estimate(&raw);
            BetaStudyRow { antennas: m, trials, mean, spread: mean.stderr * (trials as f64).sqrt() }
        })
        .collect())
}

/// Log-log slope of the estimate spread against `M`.
pub fn convergence_slope(rows: &[BetaStudyRow]) -> f64 {
    let m: Vec<f64> = rows.iter().map(|r| r.antennas as f64).collect();
    let s: Vec<f64> = rows.iter().map(|r| r.spread).collect();
    log_log_slope(&m, &s)
}

/// Number of cells that can each train `users` users on distinct tuples
/// when `tones` subcarriers each carry `mu` orthogonal tuples.
pub fn supportable_cells(tones: usize, mu: usize, users: usize) -> usize {
    tones * mu / users
}
