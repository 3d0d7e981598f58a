//! Monte-Carlo simulation of the physical protocol.
//!
//! Each trial draws fresh small-scale fading, runs the pilot phase, forms
//! MMSE estimates and then pushes random QPSK symbols through the actual
//! downlink (conjugate beamforming after large-scale precoding) or uplink
//! (matched filtering followed by large-scale decoding). The received signal
//! is computed twice: once literally from the transmitted vectors, and once
//! as the sum of its labelled terms
//!
//! * downlink `y = T0 + ... + T5`: mean gain, gain uncertainty, pilot
//!   contamination, other pilots, estimation error, noise;
//! * uplink `x_hat = Q0 + ... + Q5`, the same split for the decoder output.
//!
//! Batches run trial `t` on random stream `t`, in parallel, and keep results
//! in trial order so every statistic is independent of the thread count.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analytic::{finite_m_downlink_sinr, finite_m_uplink_sinr};
use crate::channel::{
    draw_realization_with, inner, mmse_estimate, pilot_denominator, simulate_pilot_phase_with, ChannelEstimates,
    VectorTensor,
};
use crate::error::{Error, Result};
use crate::network::LargeScaleFading;
use crate::precoding::{mu, Decoding, Precoding};
use crate::rng::{complex_normal, complex_normal_vec, qpsk, qpsk_decide, stream_rng, SimRng};
use crate::stats::{
    complex_covariance_estimate, complex_mean_estimate, complex_variance_estimate, log_log_slope, ComplexEstimate,
    Estimate,
};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Operating point shared by every trial of a batch.
#[derive(Debug, Clone)]
pub struct OracleSetup {
    pub fading: LargeScaleFading,
    pub rho_f: f64,
    pub rho_r: f64,
    pub tau: usize,
    pub antennas: usize,
}

impl OracleSetup {
    fn cells(&self) -> usize {
        self.fading.cells()
    }

    fn users(&self) -> usize {
        self.fading.users()
    }

    fn rt(&self) -> f64 {
        self.rho_r * self.tau as f64
    }

    /// Per-component variance of `g_hat_j^{kl}`: `rho_r tau beta^2 / D_j^k`.
    fn est_var(&self, j: usize, k: usize, l: usize) -> f64 {
        self.rt() * self.fading.get(j, k, l).powi(2) / pilot_denominator(&self.fading, self.rho_r, self.tau, j, k)
    }

    /// `E[g_hat_j^{kj H} g_hat_j^{kl}] = M rho_r tau beta^{kj} beta^{kl} / D_j^k`
    fn cross_mean(&self, j: usize, k: usize, l: usize) -> f64 {
        self.antennas as f64 * self.rt() * self.fading.get(j, k, l) * mu(&self.fading, self.rho_r, self.tau, j, k)
    }
}

/// One user's received sample in one trial, with its decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermRecord {
    /// Received signal (`y` downlink, `x_hat` uplink), computed literally.
    pub signal: Complex64,
    /// The user's own transmitted symbol.
    pub symbol: Complex64,
    pub terms: [Complex64; 6],
}

impl TermRecord {
    pub fn residual(&self) -> f64 {
        let sum: Complex64 = self.terms.iter().sum();
        (sum - self.signal).norm() / self.signal.norm().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Downlink,
    Uplink,
}

/// All trial records of one batch: `records[t][k * L + l]`.
#[derive(Debug, Clone)]
pub struct TrialBatch {
    pub link: Link,
    pub seed: u64,
    pub cells: usize,
    pub users: usize,
    pub records: Vec<Vec<TermRecord>>,
}

impl TrialBatch {
    pub fn trials(&self) -> usize {
        self.records.len()
    }

    fn series(&self, k: usize, l: usize, f: impl Fn(&TermRecord) -> Complex64) -> Vec<Complex64> {
        let i = k * self.cells + l;
        self.records.iter().map(|r| f(&r[i])).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.records.iter().flatten().map(TermRecord::residual).fold(0.0, f64::max)
    }
}

struct TrialChannels {
    est: ChannelEstimates,
    g_tilde: VectorTensor,
    g: VectorTensor,
}

fn draw_trial(setup: &OracleSetup, rng: &mut SimRng) -> Result<TrialChannels> {
    let real = draw_realization_with(&setup.fading, setup.antennas, rng);
    let obs = simulate_pilot_phase_with(&real, setup.rho_r, setup.tau, Some(rng))?;
    let est = mmse_estimate(&obs, &setup.fading, setup.rho_r, setup.tau)?.with_error(&real);
    let g_tilde = est.g_tilde.clone().ok_or_else(|| Error::Dimension("missing estimation error".into()))?;
    Ok(TrialChannels { est, g_tilde, g: real.g })
}

fn check_matrices(setup: &OracleSetup, ms: &[nalgebra::DMatrix<f64>]) -> Result<()> {
    let n = setup.cells();
    if ms.len() != setup.users() || ms.iter().any(|m| m.nrows() != n || m.ncols() != n) {
        return Err(Error::Dimension(format!("need {} matrices of size {n}x{n}", setup.users())));
    }
    Ok(())
}

/// One downlink trial on its own random stream. Returns `[k * L + l]`.
pub fn simulate_downlink_trial(
    setup: &OracleSetup,
    precoding: &Precoding,
    seed: u64,
    trial: u64,
) -> Result<Vec<TermRecord>> {
    let p = precoding.to_absorbed(&setup.fading, setup.rho_r, setup.tau, setup.antennas);
    check_matrices(setup, &p.phi)?;
    downlink_trial_absorbed(setup, &p, &mut stream_rng(seed, trial))
}

fn downlink_trial_absorbed(setup: &OracleSetup, p: &Precoding, rng: &mut SimRng) -> Result<Vec<TermRecord>> {
    let (n, kk, m) = (setup.cells(), setup.users(), setup.antennas);
    let ch = draw_trial(setup, rng)?;
    let gh = &ch.est.g_hat;
    let sf = setup.rho_f.sqrt();

    // s[nn * L + v], c[j][nn] = sum_v phi_j^{nn v} s^{nn v}
    let s: Vec<Complex64> = (0..kk * n).map(|_| qpsk(rng)).collect();
    let c: Vec<Vec<Complex64>> =
        (0..n).map(|j| (0..kk).map(|nn| (0..n).map(|v| s[nn * n + v] * p.phi[nn][(j, v)]).sum()).collect()).collect();

    // x_j = sqrt(rho_f) sum_n conj(g_hat_j^{nj}) c_j^n
    let x: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            let mut xj = vec![ZERO; m];
            for nn in 0..kk {
                for (xi, g) in xj.iter_mut().zip(gh.get(j, nn, j)) {
                    *xi += g.conj() * c[j][nn] * sf;
                }
            }
            xj
        })
        .collect();

    let mut out = Vec::with_capacity(kk * n);
    for k in 0..kk {
        for l in 0..n {
            let w = complex_normal(rng);
            // literal: y = sum_j g_j^{kl T} x_j + w
            let y: Complex64 = (0..n)
                .map(|j| ch.g.get(j, k, l).iter().zip(&x[j]).map(|(g, x)| g * x).sum::<Complex64>())
                .sum::<Complex64>()
                + w;

            let mut t = [ZERO; 6];
            for j in 0..n {
                let own = inner(gh.get(j, k, j), gh.get(j, k, l));
                let mean = setup.cross_mean(j, k, l);
                t[0] += s[k * n + l] * sf * p.phi[k][(j, l)] * mean;
                t[1] += s[k * n + l] * sf * p.phi[k][(j, l)] * (own - mean);
                for v in (0..n).filter(|&v| v != l) {
                    t[2] += s[k * n + v] * sf * p.phi[k][(j, v)] * own;
                }
                for nn in (0..kk).filter(|&nn| nn != k) {
                    t[3] += c[j][nn] * sf * inner(gh.get(j, nn, j), gh.get(j, k, l));
                }
                for nn in 0..kk {
                    t[4] += c[j][nn] * sf * inner(gh.get(j, nn, j), ch.g_tilde.get(j, k, l));
                }
            }
            t[5] = w;
            out.push(TermRecord { signal: y, symbol: s[k * n + l], terms: t });
        }
    }
    Ok(out)
}

/// One uplink trial; decoding weights are used in direct form.
pub fn simulate_uplink_trial(
    setup: &OracleSetup,
    decoding: &Decoding,
    seed: u64,
    trial: u64,
) -> Result<Vec<TermRecord>> {
    let d = decoding.to_direct(&setup.fading, setup.rho_r, setup.tau, setup.antennas);
    check_matrices(setup, &d.omega)?;
    uplink_trial_direct(setup, &d, &mut stream_rng(seed, trial))
}

fn uplink_trial_direct(setup: &OracleSetup, d: &Decoding, rng: &mut SimRng) -> Result<Vec<TermRecord>> {
    let (n, kk, m) = (setup.cells(), setup.users(), setup.antennas);
    let ch = draw_trial(setup, rng)?;
    let gh = &ch.est.g_hat;
    let sr = setup.rho_r.sqrt();

    // x[nn * L + j]: symbol of user nn in cell j
    let x: Vec<Complex64> = (0..kk * n).map(|_| qpsk(rng)).collect();
    let noise: Vec<Vec<Complex64>> = (0..n).map(|_| complex_normal_vec(rng, m)).collect();

    // literal receive: y_v = sqrt(rho_r) sum_j sum_n g_v^{nj} x^{nj} + w_v
    let y: Vec<Vec<Complex64>> = (0..n)
        .map(|v| {
            let mut yv = noise[v].clone();
            for j in 0..n {
                for nn in 0..kk {
                    for (yi, g) in yv.iter_mut().zip(ch.g.get(v, nn, j)) {
                        *yi += g * x[nn * n + j] * sr;
                    }
                }
            }
            yv
        })
        .collect();
    // matched filter outputs z[v][k] = g_hat_v^{kv H} y_v
    let z: Vec<Vec<Complex64>> = (0..n).map(|v| (0..kk).map(|k| inner(gh.get(v, k, v), &y[v])).collect()).collect();

    let mut out = Vec::with_capacity(kk * n);
    for k in 0..kk {
        for l in 0..n {
            let w = &d.omega[k];
            let x_hat: Complex64 = (0..n).map(|v| z[v][k] * w[(l, v)]).sum();
            let mut q = [ZERO; 6];
            for v in 0..n {
                let wv = w[(l, v)];
                let a = gh.get(v, k, v);
                let mean = setup.cross_mean(v, k, l);
                let own = inner(a, gh.get(v, k, l));
                q[0] += x[k * n + l] * sr * wv * mean;
                q[1] += x[k * n + l] * sr * wv * (own - mean);
                for j in (0..n).filter(|&j| j != l) {
                    q[2] += x[k * n + j] * sr * wv * inner(a, gh.get(v, k, j));
                }
                for j in 0..n {
                    for nn in (0..kk).filter(|&nn| nn != k) {
                        q[3] += x[nn * n + j] * sr * wv * inner(a, gh.get(v, nn, j));
                    }
                    for nn in 0..kk {
                        q[4] += x[nn * n + j] * sr * wv * inner(a, ch.g_tilde.get(v, nn, j));
                    }
                }
                q[5] += wv * inner(a, &noise[v]);
            }
            out.push(TermRecord { signal: x_hat, symbol: x[k * n + l], terms: q });
        }
    }
    Ok(out)
}

/// `trials` downlink trials on streams `0..trials` of `seed`, in parallel.
pub fn run_downlink_batch(setup: &OracleSetup, precoding: &Precoding, trials: usize, seed: u64) -> Result<TrialBatch> {
    let p = precoding.to_absorbed(&setup.fading, setup.rho_r, setup.tau, setup.antennas);
    check_matrices(setup, &p.phi)?;
    let records = (0..trials as u64)
        .into_par_iter()
        .map(|t| downlink_trial_absorbed(setup, &p, &mut stream_rng(seed, t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialBatch { link: Link::Downlink, seed, cells: setup.cells(), users: setup.users(), records })
}

pub fn run_uplink_batch(setup: &OracleSetup, decoding: &Decoding, trials: usize, seed: u64) -> Result<TrialBatch> {
    let d = decoding.to_direct(&setup.fading, setup.rho_r, setup.tau, setup.antennas);
    check_matrices(setup, &d.omega)?;
    let records = (0..trials as u64)
        .into_par_iter()
        .map(|t| uplink_trial_direct(setup, &d, &mut stream_rng(seed, t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialBatch { link: Link::Uplink, seed, cells: setup.cells(), users: setup.users(), records })
}

/// Closed-form moments of one user's terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    /// Mean gain on the user's own symbol (`T0 / s` or `Q0 / x`).
    pub gain: f64,
    /// `var[i]` is the variance of term `i`; `var[0]` is 0.
    pub var: [f64; 6],
}

impl ClosedForm {
    pub fn sinr(&self) -> f64 {
        self.gain * self.gain / self.var[1..].iter().sum::<f64>()
    }
}

/// Variances of `T1..T5` for user `k` in cell `l`.
pub fn downlink_closed_form(setup: &OracleSetup, precoding: &Precoding, k: usize, l: usize) -> ClosedForm {
    let p = precoding.to_absorbed(&setup.fading, setup.rho_r, setup.tau, setup.antennas);
    let phi = &p.phi;
    let (n, kk) = (setup.cells(), setup.users());
    let (m, rf) = (setup.antennas as f64, setup.rho_f);
    let b = |j: usize, nn: usize, c: usize| setup.fading.get(j, nn, c);
    let row_pow = |j: usize, nn: usize| phi[nn].row(j).norm_squared();

    let gain = rf.sqrt() * (0..n).map(|j| phi[k][(j, l)] * setup.cross_mean(j, k, l)).sum::<f64>();
    let t1 =
        rf * m * (0..n).map(|j| phi[k][(j, l)].powi(2) * setup.est_var(j, k, l) * setup.est_var(j, k, j)).sum::<f64>();
    let t2 = rf
        * (0..n)
            .filter(|&v| v != l)
            .map(|v| {
                let coherent: f64 = (0..n).map(|j| setup.cross_mean(j, k, l) * phi[k][(j, v)]).sum();
                let spread: f64 =
                    (0..n).map(|j| m * setup.est_var(j, k, l) * setup.est_var(j, k, j) * phi[k][(j, v)].powi(2)).sum();
                coherent * coherent + spread
            })
            .sum::<f64>();
    let mut t3 = 0.0;
    let mut t4 = 0.0;
    for j in 0..n {
        for nn in 0..kk {
            let own = setup.est_var(j, nn, j) * row_pow(j, nn);
            if nn != k {
                t3 += own * setup.est_var(j, k, l);
            }
            t4 += own * (b(j, k, l) - setup.est_var(j, k, l));
        }
    }
    ClosedForm { gain, var: [0.0, t1, t2, rf * m * t3, rf * m * t4, 1.0] }
}

/// Variances of `Q1..Q5` for user `k` in cell `l` with direct-form weights.
pub fn uplink_closed_form(setup: &OracleSetup, decoding: &Decoding, k: usize, l: usize) -> ClosedForm {
    let d = decoding.to_direct(&setup.fading, setup.rho_r, setup.tau, setup.antennas);
    let w = &d.omega[k];
    let (n, kk) = (setup.cells(), setup.users());
    let (m, rr) = (setup.antennas as f64, setup.rho_r);
    let b = |v: usize, nn: usize, j: usize| setup.fading.get(v, nn, j);
    // |w|^2 sigma^2_kv per base station
    let weight: Vec<f64> = (0..n).map(|v| w[(l, v)].powi(2) * setup.est_var(v, k, v)).collect();

    let gain = rr.sqrt() * (0..n).map(|v| w[(l, v)] * setup.cross_mean(v, k, l)).sum::<f64>();
    let q1 = rr * m * (0..n).map(|v| weight[v] * setup.est_var(v, k, l)).sum::<f64>();
    let q2 = rr
        * (0..n)
            .filter(|&j| j != l)
            .map(|j| {
                let coherent: f64 = (0..n).map(|v| setup.cross_mean(v, k, j) * w[(l, v)]).sum();
                let spread: f64 = (0..n).map(|v| m * setup.est_var(v, k, j) * weight[v]).sum();
                coherent * coherent + spread
            })
            .sum::<f64>();
    let mut q3 = 0.0;
    let mut q4 = 0.0;
    for v in 0..n {
        for j in 0..n {
            for nn in 0..kk {
                if nn != k {
                    q3 += weight[v] * setup.est_var(v, nn, j);
                }
                q4 += weight[v] * (b(v, nn, j) - setup.est_var(v, nn, j));
            }
        }
    }
    let q5 = m * weight.iter().sum::<f64>();
    ClosedForm { gain, var: [0.0, q1, q2, rr * m * q3, rr * m * q4, q5] }
}

/// Empirical moments of one user's terms.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTerms {
    /// `E[signal * conj(symbol)]`: the mean gain on the user's own symbol.
    pub gain: ComplexEstimate,
    /// `var[i]` for terms 1..5 (`var[0]` unused, zero).
    pub var: [Estimate; 6],
    /// Centered covariances `(i, j, cov)` for `1 <= i < j <= 5`.
    pub cov: Vec<(usize, usize, ComplexEstimate)>,
}

pub fn empirical_terms(batch: &TrialBatch, k: usize, l: usize) -> EmpiricalTerms {
    let gain_samples = batch.series(k, l, |r| r.signal * r.symbol.conj());
    let gain = complex_mean_estimate(&gain_samples);
    let series: Vec<Vec<Complex64>> = (0..6).map(|i| batch.series(k, l, |r| r.terms[i])).collect();
    let mut var = [Estimate { value: 0.0, stderr: 0.0 }; 6];
    for i in 1..6 {
        var[i] = complex_variance_estimate(&series[i]);
    }
    let mut cov = Vec::new();
    for i in 1..6 {
        for j in i + 1..6 {
            cov.push((i, j, complex_covariance_estimate(&series[i], &series[j])));
        }
    }
    EmpiricalTerms { gain, var, cov }
}

pub fn empirical_variances_downlink(batch: &TrialBatch, k: usize, l: usize) -> Result<EmpiricalTerms> {
    expect_link(batch, Link::Downlink)?;
    Ok(empirical_terms(batch, k, l))
}

pub fn empirical_variances_uplink(batch: &TrialBatch, k: usize, l: usize) -> Result<EmpiricalTerms> {
    expect_link(batch, Link::Uplink)?;
    Ok(empirical_terms(batch, k, l))
}

fn expect_link(batch: &TrialBatch, link: Link) -> Result<()> {
    if batch.link != link {
        return Err(Error::Config(format!("expected a {link:?} batch, got {:?}", batch.link)));
    }
    Ok(())
}

/// `|E[signal conj(s)]|^2 / Var[signal - E[..] s]`: the SINR a receiver that
/// knows only the mean gain sees.
pub fn empirical_sinr(batch: &TrialBatch, k: usize, l: usize) -> f64 {
    let gain = batch.series(k, l, |r| r.signal * r.symbol.conj());
    let g = complex_mean_estimate(&gain).value;
    let resid = batch.series(k, l, |r| r.signal - g * r.symbol);
    let v = complex_variance_estimate(&resid).value;
    if g.norm_sqr() == 0.0 {
        0.0
    } else {
        g.norm_sqr() / v
    }
}

/// One line of an oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub term: String,
    pub closed_form: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub z_score: f64,
}

impl OracleRow {
    fn new(term: String, closed_form: f64, e: Estimate) -> Self {
        Self { term, closed_form, empirical: e.value, stderr: e.stderr, z_score: e.z_score(closed_form) }
    }
}

/// Closed form versus empirical for every variance, the mean gain and every
/// cross-covariance (whose closed form is 0) of user `(k, l)`.
pub fn oracle_rows(batch: &TrialBatch, closed: &ClosedForm, k: usize, l: usize) -> Vec<OracleRow> {
    let e = empirical_terms(batch, k, l);
    let name = match batch.link {
        Link::Downlink => "T",
        Link::Uplink => "Q",
    };
    let mut rows = vec![OracleRow::new(
        format!("gain[{k},{l}]"),
        closed.gain,
        Estimate { value: e.gain.value.re, stderr: e.gain.stderr },
    )];
    for i in 1..6 {
        rows.push(OracleRow::new(format!("var {name}{i}[{k},{l}]"), closed.var[i], e.var[i]));
    }
    for (i, j, c) in &e.cov {
        rows.push(OracleRow::new(
            format!("|cov {name}{i},{name}{j}|[{k},{l}]"),
            0.0,
            Estimate { value: c.value.norm(), stderr: c.stderr },
        ));
    }
    rows
}

/// CSV with header `term,closed_form,empirical,stderr,z_score`.
pub fn oracle_csv(rows: &[OracleRow]) -> String {
    let mut out = String::from("term,closed_form,empirical,stderr,z_score\n");
    for r in rows {
        let _ = writeln!(out, "{},{:e},{:e},{:e},{:.4}", r.term, r.closed_form, r.empirical, r.stderr, r.z_score);
    }
    out
}

/// Closed-form SINRs of the analytic module for one user, as a cross-check
/// target for [`empirical_sinr`].
pub fn analytic_sinr(
    setup: &OracleSetup,
    link: Link,
    precoding: &Precoding,
    decoding: &Decoding,
    k: usize,
    l: usize,
) -> Result<f64> {
    Ok(match link {
        Link::Downlink => {
            finite_m_downlink_sinr(&setup.fading, precoding, setup.rho_f, setup.rho_r, setup.tau, setup.antennas, k, l)?
                .sinr
        }
        Link::Uplink => {
            finite_m_uplink_sinr(&setup.fading, decoding, setup.rho_r, setup.tau, setup.antennas, k, l)?.sinr
        }
    })
}

/// Scaled symbol estimate under η-weighted zero-forcing precoding:
/// `y / sqrt(M rho_f rho_r rho_a tau)`.
pub fn zf_lsfp_detect(y: Complex64, antennas: usize, rho_f: f64, rho_r: f64, rho_a: f64, tau: usize) -> Complex64 {
    y / (antennas as f64 * rho_f * rho_r * rho_a * tau as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerPoint {
    pub antennas: usize,
    pub symbols: usize,
    pub errors: usize,
}

impl SerPoint {
    pub fn ser(&self) -> f64 {
        self.errors as f64 / self.symbols as f64
    }
}

/// QPSK symbol-error rate of the scaled detector under η-weighted
/// zero-forcing precoding, for each antenna count. `precoding` must be the
/// raw-form η variant.
#[allow(clippy::too_many_arguments)]
pub fn zf_ser_study(
    fading: &LargeScaleFading,
    precoding: &Precoding,
    rho_f: f64,
    rho_r: f64,
    tau: usize,
    antenna_grid: &[usize],
    min_symbols: usize,
    seed: u64,
) -> Result<Vec<SerPoint>> {
    let per_trial = fading.cells() * fading.users();
    let trials = min_symbols.div_ceil(per_trial);
    antenna_grid
        .iter()
        .map(|&m| {
            let setup = OracleSetup { fading: fading.clone(), rho_f, rho_r, tau, antennas: m };
            let p = precoding.to_absorbed(fading, rho_r, tau, m);
            let errors: usize = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let recs = downlink_trial_absorbed(&setup, &p, &mut stream_rng(seed, t))?;
                    Ok(recs
                        .iter()
                        .filter(|r| {
                            qpsk_decide(zf_lsfp_detect(r.signal, m, rho_f, rho_r, precoding.rho_a, tau)) != r.symbol
                        })
                        .count())
                })
                .collect::<Result<Vec<usize>>>()?
                .into_iter()
                .sum();
            Ok(SerPoint { antennas: m, symbols: trials * per_trial, errors })
        })
        .collect()
}

/// Law-of-large-numbers probe for two independent `CN(0, nu I_M)` vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlnRow {
    pub antennas: usize,
    /// `x^H x / M`, which tends to `nu`.
    pub self_term: Estimate,
    /// `x^H y / M`, which tends to 0.
    pub cross_term: ComplexEstimate,
    /// Standard deviation of `x^H x / M` across trials.
    pub self_spread: f64,
}

pub fn lln_probe(nu: f64, antenna_grid: &[usize], trials: usize, seed: u64) -> Vec<LlnRow> {
    let amp = nu.sqrt();
    antenna_grid
        .iter()
        .enumerate()
        .map(|(gi, &m)| {
            let pairs: Vec<(f64, Complex64)> = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = stream_rng(seed ^ ((gi as u64) << 40), t);
                    let x: Vec<Complex64> = complex_normal_vec(&mut rng, m).into_iter().map(|z| z * amp).collect();
                    let y: Vec<Complex64> = complex_normal_vec(&mut rng, m).into_iter().map(|z| z * amp).collect();
                    let mf = m as f64;
                    (inner(&x, &x).re / mf, inner(&x, &y) / mf)
                })
                .collect();
            let selfs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let cross: Vec<Complex64> = pairs.iter().map(|p| p.1).collect();
            let self_term = crate::stats::mean_estimate(&selfs);
            LlnRow {
                antennas: m,
                self_term,
                cross_term: complex_mean_estimate(&cross),
                self_spread: self_term.stderr * (trials as f64).sqrt(),
            }
        })
        .collect()
}

/// Log-log slope of the spread of `x^H x / M` against `M`.
pub fn lln_slope(rows: &[LlnRow]) -> f64 {
    let m: Vec<f64> = rows.iter().map(|r| r.antennas as f64).collect();
    let s: Vec<f64> = rows.iter().map(|r| r.self_spread).collect();
    log_log_slope(&m, &s)
}
