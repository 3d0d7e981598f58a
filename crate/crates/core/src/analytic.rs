//! Closed-form SINR expressions.
//!
//! Finite-M downlink (conjugate beamforming after large-scale precoding):
//!
//! ```text
//! SINR_D = rho_f M^2 (rho_r tau)^2 |sum_j beta_j^{kl} mu_j^k phi_j^{kl}|^2 / (M^2 I1 + M I2 + 1)
//! I1 = rho_f (rho_r tau)^2 sum_{v != l} |sum_j beta_j^{kl} mu_j^k phi_j^{kv}|^2
//! I2 = rho_f rho_r tau sum_j sum_n beta_j^{kl} beta_j^{nj} mu_j^n sum_v |phi_j^{nv}|^2
//! ```
//!
//! with `phi` in absorbed form and `mu_j^k = beta_j^{kj} / D_j^k`,
//! `D_j^k = 1 + rho_r tau sum_s beta_j^{ks}`.
//!
//! Finite-M uplink (matched filter followed by large-scale decoding):
//!
//! ```text
//! SINR_U = M^2 rho_r^3 tau^2 |sum_v beta_v^{kl} mu_v^k omega_l^{kv}|^2 / (M^2 I1 + M I2)
//! I1 = rho_r^3 tau^2 sum_{j != l} |sum_v beta_v^{kj} mu_v^k omega_l^{kv}|^2
//! I2 = sum_v |omega_l^{kv}|^2 rho_r tau beta_v^{kv} mu_v^k (1 + rho_r sum_j sum_n beta_v^{nj})
//! ```
//!
//! Both have equivalent rescaled forms (`alpha` and `omega*`) that are also
//! provided; the two forms agree to rounding.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::channel::pilot_denominator;
use crate::error::{Error, Result};
use crate::network::LargeScaleFading;
use crate::precoding::{Decoding, LsfMatrices, Precoding};

/// One user's SINR with its denominator split into parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrEntry {
    pub sinr: f64,
    pub signal: f64,
    /// `M^2 I1`, pilot contamination.
    pub i1: f64,
    /// `M I2`, estimation error and non-coherent interference.
    pub i2: f64,
    /// Receiver noise term: 1 on the downlink, absent (0) on the uplink.
    pub noise: f64,
    /// Zero decoding weights: the ratio is 0/0 and `sinr` is reported as 0.
    pub degenerate: bool,
}

impl SinrEntry {
    fn new(signal: f64, i1: f64, i2: f64, noise: f64) -> Self {
        let den = i1 + i2 + noise;
        if den == 0.0 && signal == 0.0 {
            return Self { sinr: 0.0, signal, i1, i2, noise, degenerate: true };
        }
        Self { sinr: signal / den, signal, i1, i2, noise, degenerate: false }
    }

    pub fn denominator(&self) -> f64 {
        self.i1 + self.i2 + self.noise
    }
}

pub fn rate_from_sinr(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn check_user(fading: &LargeScaleFading, k: usize, cell: usize) -> Result<()> {
    if k >= fading.users() || cell >= fading.cells() {
        return Err(Error::Dimension(format!(
            "user ({k}, {cell}) outside K = {}, L = {}",
            fading.users(),
            fading.cells()
        )));
    }
    Ok(())
}

fn check_powers(fading: &LargeScaleFading, powers: Option<&[f64]>) -> Result<()> {
    if let Some(p) = powers {
        if p.len() != fading.users() * fading.cells() {
            return Err(Error::Dimension(format!(
                "{} per-user powers for K*L = {}",
                p.len(),
                fading.users() * fading.cells()
            )));
        }
    }
    Ok(())
}

/// Infinite-antenna downlink SINR of user `k` in cell `j` without
/// large-scale precoding. `powers[k * L + l]` optionally gives per-user
/// forward powers; uniform powers cancel.
pub fn asymptotic_downlink_sinr(
    fading: &LargeScaleFading,
    rho_r: f64,
    tau: usize,
    k: usize,
    j: usize,
    powers: Option<&[f64]>,
) -> Result<f64> {
    check_user(fading, k, j)?;
    check_powers(fading, powers)?;
    let n = fading.cells();
    let p = |l: usize| powers.map_or(1.0, |p| p[k * n + l]);
    let term = |l: usize| fading.get(l, k, j).powi(2) / pilot_denominator(fading, rho_r, tau, l, k);
    let den: f64 = (0..n).filter(|&l| l != j).map(|l| p(l) * term(l)).sum();
    Ok(ratio_or_inf(p(j) * term(j), den))
}

/// Infinite-antenna uplink SINR of user `k` in cell `j` with plain matched
/// filtering. `powers[k * L + l]` optionally gives per-user reverse powers.
pub fn asymptotic_uplink_sinr(fading: &LargeScaleFading, k: usize, j: usize, powers: Option<&[f64]>) -> Result<f64> {
    check_user(fading, k, j)?;
    check_powers(fading, powers)?;
    let n = fading.cells();
    let p = |l: usize| powers.map_or(1.0, |p| p[k * n + l]);
    let den: f64 = (0..n).filter(|&l| l != j).map(|l| p(l) * fading.get(j, k, l).powi(2)).sum();
    Ok(ratio_or_inf(p(j) * fading.get(j, k, j).powi(2), den))
}

fn ratio_or_inf(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Finite-M downlink SINR of user `k` in cell `l`. Raw coefficients are
/// converted to absorbed form for `antennas` first.
#[allow(clippy::too_many_arguments)]
pub fn finite_m_downlink_sinr(
    fading: &LargeScaleFading,
    precoding: &Precoding,
    rho_f: f64,
    rho_r: f64,
    tau: usize,
    antennas: usize,
    k: usize,
    l: usize,
) -> Result<SinrEntry> {
    check_user(fading, k, l)?;
    let abs = precoding.to_absorbed(fading, rho_r, tau, antennas);
    Ok(downlink_entry(fading, &Tables::new(fading, rho_r, tau), &abs.phi, rho_f, rho_r * tau as f64, antennas, k, l))
}

/// `mu_j^n` for every base station and pilot, `[j * K + n]`.
struct Tables {
    users: usize,
    mu: Vec<f64>,
}

impl Tables {
    fn new(fading: &LargeScaleFading, rho_r: f64, tau: usize) -> Self {
        let (n, kk) = (fading.cells(), fading.users());
        let mut mu = Vec::with_capacity(n * kk);
        for j in 0..n {
            for k in 0..kk {
                mu.push(fading.get(j, k, j) / pilot_denominator(fading, rho_r, tau, j, k));
            }
        }
        Self { users: kk, mu }
    }

    #[inline]
    fn mu(&self, j: usize, k: usize) -> f64 {
        self.mu[j * self.users + k]
    }
}

#[allow(clippy::too_many_arguments)]
fn downlink_entry(
    fading: &LargeScaleFading,
    t: &Tables,
    phi: &[DMatrix<f64>],
    rho_f: f64,
    rt: f64,
    antennas: usize,
    k: usize,
    l: usize,
) -> SinrEntry {
    let n = fading.cells();
    let m = antennas as f64;
    // a[j] = beta_j^{kl} mu_j^k, c(v) = sum_j a[j] phi_j^{kv}
    let a: Vec<f64> = (0..n).map(|j| fading.get(j, k, l) * t.mu(j, k)).collect();
    let c = |v: usize| -> f64 { (0..n).map(|j| a[j] * phi[k][(j, v)]).sum() };
    let signal = rho_f * m * m * rt * rt * c(l).powi(2);
    let i1 = rho_f * rt * rt * (0..n).filter(|&v| v != l).map(|v| c(v).powi(2)).sum::<f64>();
    let mut i2 = 0.0;
    for j in 0..n {
        let mut load = 0.0;
        for (nn, phi_n) in phi.iter().enumerate() {
            load += fading.get(j, nn, j) * t.mu(j, nn) * phi_n.row(j).norm_squared();
        }
        i2 += fading.get(j, k, l) * load;
    }
    let i2 = rho_f * rt * i2;
    SinrEntry::new(signal, m * m * i1, m * i2, 1.0)
}

/// Same SINR written in terms of `alpha_j^{kl} = sqrt(rho_r tau) mu_j^k phi_j^{kl}`:
/// `M rho_f rho_r tau |sum_j beta_j^{kl} alpha_j^{kl}|^2 / (M J1 + J2 + 1/M)`.
#[allow(clippy::too_many_arguments)]
pub fn finite_m_downlink_sinr_alpha(
    fading: &LargeScaleFading,
    alpha: &[DMatrix<f64>],
    rho_f: f64,
    rho_r: f64,
    tau: usize,
    antennas: usize,
    k: usize,
    l: usize,
) -> Result<f64> {
    check_user(fading, k, l)?;
    let n = fading.cells();
    let m = antennas as f64;
    let rt = rho_r * tau as f64;
    let c = |v: usize| -> f64 { (0..n).map(|j| fading.get(j, k, l) * alpha[k][(j, v)]).sum() };
    let num = m * rho_f * rt * c(l).powi(2);
    let j1 = rho_f * rt * (0..n).filter(|&v| v != l).map(|v| c(v).powi(2)).sum::<f64>();
    let mut j2 = 0.0;
    for j in 0..n {
        for (nn, a) in alpha.iter().enumerate() {
            j2 += fading.get(j, k, l) * pilot_denominator(fading, rho_r, tau, j, nn) * a.row(j).norm_squared();
        }
    }
    let j2 = rho_f * j2;
    Ok(num / (m * j1 + j2 + 1.0 / m))
}

/// Infinite-antenna downlink SINR of user `k` in cell `l` with plain
/// conjugate beamforming, taken from the finite-M expression: with absorbed
/// coefficients proportional to `1/sqrt(M)`, both the signal and `M^2 I1`
/// grow linearly in M while `M I2` and the noise stay bounded.
pub fn no_lsfp_downlink_limit(fading: &LargeScaleFading, rho_r: f64, tau: usize, k: usize, l: usize) -> Result<f64> {
    let p = crate::precoding::no_lsfp(fading, rho_r, tau, 1).precoding;
    let e = finite_m_downlink_sinr(fading, &p, 1.0, rho_r, tau, 1, k, l)?;
    Ok(ratio_or_inf(e.signal, e.i1))
}

/// Finite-M uplink SINR of user `k` in cell `l`. Star-form weights are
/// converted to direct form for `antennas` first.
pub fn finite_m_uplink_sinr(
    fading: &LargeScaleFading,
    decoding: &Decoding,
    rho_r: f64,
    tau: usize,
    antennas: usize,
    k: usize,
    l: usize,
) -> Result<SinrEntry> {
    check_user(fading, k, l)?;
    let dir = decoding.to_direct(fading, rho_r, tau, antennas);
    let t = Tables::new(fading, rho_r, tau);
    Ok(uplink_entry(fading, &t, &received_totals(fading), &dir.omega, rho_r, tau, antennas, k, l))
}

/// `sum_j sum_n beta_v^{nj}` for every base station `v`.
fn received_totals(fading: &LargeScaleFading) -> Vec<f64> {
    let n = fading.cells();
    (0..n).map(|v| (0..fading.users()).map(|nn| (0..n).map(|j| fading.get(v, nn, j)).sum::<f64>()).sum()).collect()
}

#[allow(clippy::too_many_arguments)]
fn uplink_entry(
    fading: &LargeScaleFading,
    t: &Tables,
    total: &[f64],
    omega: &[DMatrix<f64>],
    rho_r: f64,
    tau: usize,
    antennas: usize,
    k: usize,
    l: usize,
) -> SinrEntry {
    let w = &omega[k];
    let n = fading.cells();
    let m = antennas as f64;
    let rt = rho_r * tau as f64;
    let r3t2 = rho_r.powi(3) * (tau * tau) as f64;
    // c(j) = sum_v beta_v^{kj} mu_v^k omega_l^{kv}
    let c = |j: usize| -> f64 { (0..n).map(|v| fading.get(v, k, j) * t.mu(v, k) * w[(l, v)]).sum() };
    let signal = m * m * r3t2 * c(l).powi(2);
    let i1 = r3t2 * (0..n).filter(|&j| j != l).map(|j| c(j).powi(2)).sum::<f64>();
    let i2: f64 =
        (0..n).map(|v| w[(l, v)].powi(2) * rt * fading.get(v, k, v) * t.mu(v, k) * (1.0 + rho_r * total[v])).sum();
    SinrEntry::new(signal, m * m * i1, m * i2, 0.0)
}

/// Uplink SINR in terms of star-form weights:
/// `M rho_r^2 tau |sum_v beta_v^{kl} w*|^2 / (M J1 + J2)`.
#[allow(clippy::too_many_arguments)]
pub fn finite_m_uplink_sinr_simplified(
    fading: &LargeScaleFading,
    omega_star: &[DMatrix<f64>],
    rho_r: f64,
    tau: usize,
    antennas: usize,
    k: usize,
    l: usize,
) -> Result<f64> {
    check_user(fading, k, l)?;
    let w = &omega_star[k];
    let n = fading.cells();
    let m = antennas as f64;
    let c = |j: usize| -> f64 { (0..n).map(|v| fading.get(v, k, j) * w[(l, v)]).sum() };
    let num = m * rho_r * rho_r * tau as f64 * c(l).powi(2);
    let j1 = rho_r * rho_r * tau as f64 * (0..n).filter(|&j| j != l).map(|j| c(j).powi(2)).sum::<f64>();
    let mut j2 = 0.0;
    for v in 0..n {
        let total: f64 = (0..n).map(|j| (0..fading.users()).map(|nn| fading.get(v, nn, j)).sum::<f64>()).sum();
        j2 += w[(l, v)].powi(2) * pilot_denominator(fading, rho_r, tau, v, k) * (1.0 + rho_r * total);
    }
    let den = m * j1 + j2;
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

fn check_shapes(fading: &LargeScaleFading, ms: &[DMatrix<f64>]) -> Result<()> {
    let n = fading.cells();
    if ms.len() != fading.users() || ms.iter().any(|m| m.nrows() != n || m.ncols() != n) {
        return Err(Error::Dimension(format!("need {} matrices of size {n}x{n}", fading.users())));
    }
    Ok(())
}

/// Downlink entries of every user, `[k * L + l]`.
pub fn downlink_sinrs(
    fading: &LargeScaleFading,
    precoding: &Precoding,
    rho_f: f64,
    rho_r: f64,
    tau: usize,
    antennas: usize,
) -> Result<Vec<SinrEntry>> {
    let phi = precoding.to_absorbed(fading, rho_r, tau, antennas).phi;
    check_shapes(fading, &phi)?;
    let t = Tables::new(fading, rho_r, tau);
    let (n, kk) = (fading.cells(), fading.users());
    let rt = rho_r * tau as f64;
    Ok((0..kk * n).map(|i| downlink_entry(fading, &t, &phi, rho_f, rt, antennas, i / n, i % n)).collect())
}

/// Per-user downlink and uplink SINRs and rate bounds for one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrReport {
    pub cells: usize,
    pub users: usize,
    /// `[k * L + l]`
    pub downlink: Vec<SinrEntry>,
    pub uplink: Vec<SinrEntry>,
}

impl SinrReport {
    pub fn compute(
        fading: &LargeScaleFading,
        lsf: &LsfMatrices,
        rho_f: f64,
        rho_r: f64,
        tau: usize,
        antennas: usize,
    ) -> Result<Self> {
        let (n, kk) = (fading.cells(), fading.users());
        let downlink = downlink_sinrs(fading, &lsf.precoding, rho_f, rho_r, tau, antennas)?;
        let t = Tables::new(fading, rho_r, tau);
        let total = received_totals(fading);
        let omega = lsf.decoding.to_direct(fading, rho_r, tau, antennas).omega;
        check_shapes(fading, &omega)?;
        let mut uplink = Vec::with_capacity(n * kk);
        for k in 0..kk {
            for l in 0..n {
                uplink.push(uplink_entry(fading, &t, &total, &omega, rho_r, tau, antennas, k, l));
            }
        }
        Ok(Self { cells: n, users: kk, downlink, uplink })
    }

    pub fn sinr_dl(&self, k: usize, l: usize) -> f64 {
        self.downlink[k * self.cells + l].sinr
    }

    pub fn sinr_ul(&self, k: usize, l: usize) -> f64 {
        self.uplink[k * self.cells + l].sinr
    }

    pub fn rate_dl(&self, k: usize, l: usize) -> f64 {
        rate_from_sinr(self.sinr_dl(k, l))
    }

    pub fn rate_ul(&self, k: usize, l: usize) -> f64 {
        rate_from_sinr(self.sinr_ul(k, l))
    }

    /// CSV with header `k,l,sinr_dl,sinr_ul,rate_dl,rate_ul,i1,i2,noise`;
    /// the breakdown columns are the downlink terms `M^2 I1`, `M I2`, 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,l,sinr_dl,sinr_ul,rate_dl,rate_ul,i1,i2,noise\n");
        for k in 0..self.users {
            for l in 0..self.cells {
                let d = &self.downlink[k * self.cells + l];
                let _ = writeln!(
                    out,
                    "{k},{l},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                    d.sinr,
                    self.sinr_ul(k, l),
                    self.rate_dl(k, l),
                    self.rate_ul(k, l),
                    d.i1,
                    d.i2,
                    d.noise
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{random_fading, symmetric_fading};
    use crate::precoding::{no_lsfp, phi_to_alpha, zf_lsfd, zf_lsfp, LsfMode, OmegaForm, PhiForm, ZfVariant};
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn rates() {
        assert_eq!(rate_from_sinr(0.0), 0.0);
        assert_eq!(rate_from_sinr(1.0), 1.0);
        assert_eq!(rate_from_sinr(3.0), 2.0);
    }

    #[test]
    fn asymptotic_trivial_cases() {
        let f = symmetric_fading(1, 2, 0.3).unwrap();
        assert_eq!(asymptotic_downlink_sinr(&f, 1.0, 2, 0, 0, None).unwrap(), f64::INFINITY);
        assert_eq!(asymptotic_uplink_sinr(&f, 1, 0, None).unwrap(), f64::INFINITY);
        let f = symmetric_fading(2, 1, 0.7).unwrap();
        assert!((asymptotic_downlink_sinr(&f, 1.0, 1, 0, 1, None).unwrap() - 1.0).abs() < 1e-15);
        let f = symmetric_fading(3, 2, 0.7).unwrap();
        assert!((asymptotic_uplink_sinr(&f, 1, 2, None).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn asymptotic_three_cell_by_hand() {
        // one pilot, three cells, rho_r tau = 1
        let b = [[1.0, 0.2, 0.1], [0.3, 0.8, 0.05], [0.15, 0.25, 0.6]]; // b[j][l]
        let f = LargeScaleFading::from_fn(3, 1, |j, _, l| b[j][l]).unwrap();
        let eta2: Vec<f64> = (0..3).map(|j| 1.0 + b[j].iter().sum::<f64>()).collect();
        for cell in 0..3 {
            let num = b[cell][cell].powi(2) / eta2[cell];
            let den: f64 = (0..3).filter(|&l| l != cell).map(|l| b[l][cell].powi(2) / eta2[l]).sum();
            let got = asymptotic_downlink_sinr(&f, 1.0, 1, 0, cell, None).unwrap();
            assert!(rel(got, num / den) < 1e-14);

            let num = b[cell][cell].powi(2);
            let den: f64 = (0..3).filter(|&l| l != cell).map(|l| b[cell][l].powi(2)).sum();
            assert!(rel(asymptotic_uplink_sinr(&f, 0, cell, None).unwrap(), num / den) < 1e-14);
        }
        // uniform powers cancel, a boosted user gains linearly
        let uniform = vec![4.0; 3];
        let base = asymptotic_uplink_sinr(&f, 0, 1, None).unwrap();
        assert!(rel(asymptotic_uplink_sinr(&f, 0, 1, Some(&uniform)).unwrap(), base) < 1e-14);
        let boost = [1.0, 2.0, 1.0];
        assert!(rel(asymptotic_uplink_sinr(&f, 0, 1, Some(&boost)).unwrap(), 2.0 * base) < 1e-14);
        let base = asymptotic_downlink_sinr(&f, 1.0, 1, 0, 2, None).unwrap();
        assert!(rel(asymptotic_downlink_sinr(&f, 1.0, 1, 0, 2, Some(&uniform)).unwrap(), base) < 1e-14);
        let boost = [1.0, 1.0, 3.0];
        assert!(rel(asymptotic_downlink_sinr(&f, 1.0, 1, 0, 2, Some(&boost)).unwrap(), 3.0 * base) < 1e-14);
    }

    #[test]
    fn zero_coefficients() {
        let f = random_fading(3, 2, 3).unwrap();
        let p =
            Precoding { phi: vec![DMatrix::zeros(3, 3); 2], rho_a: 1.0, mode: LsfMode::None, form: PhiForm::Absorbed };
        let e = finite_m_downlink_sinr(&f, &p, 1.0, 1.0, 2, 16, 1, 2).unwrap();
        assert_eq!(e.sinr, 0.0);
        assert!(!e.degenerate);
        let a = vec![DMatrix::zeros(3, 3); 2];
        assert_eq!(finite_m_downlink_sinr_alpha(&f, &a, 1.0, 1.0, 2, 16, 1, 2).unwrap(), 0.0);

        let d = Decoding { omega: vec![DMatrix::zeros(3, 3); 2], mode: LsfMode::None, form: OmegaForm::Direct };
        let e = finite_m_uplink_sinr(&f, &d, 1.0, 2, 16, 0, 0).unwrap();
        assert_eq!(e.sinr, 0.0);
        assert!(e.degenerate);
        assert_eq!(finite_m_uplink_sinr_simplified(&f, &d.omega, 1.0, 2, 16, 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn zf_downlink_has_no_pilot_contamination() {
        let f = random_fading(4, 3, 12).unwrap();
        let (rho_f, rho_r, tau, m) = (2.0, 1.5, 3, 256);
        let p = zf_lsfp(&f, rho_r, tau, ZfVariant::Mu).unwrap();
        for k in 0..3 {
            for l in 0..4 {
                let e = finite_m_downlink_sinr(&f, &p, rho_f, rho_r, tau, m, k, l).unwrap();
                assert!(e.i1.abs() < 1e-20, "I1 = {}", e.i1);
                let expect = rho_f * (m as f64).powi(2) * (rho_r * tau as f64).powi(2) * p.rho_a;
                assert!(rel(e.signal, expect) < 1e-10);
            }
        }
        let p = zf_lsfp(&f, rho_r, tau, ZfVariant::Eta).unwrap();
        let e = finite_m_downlink_sinr(&f, &p, rho_f, rho_r, tau, m, 2, 1).unwrap();
        assert!(e.i1 / e.signal < 1e-20);
    }

    #[test]
    fn zf_uplink_has_no_pilot_contamination() {
        let f = random_fading(4, 2, 13).unwrap();
        let d = zf_lsfd(&f).unwrap();
        for k in 0..2 {
            for l in 0..4 {
                let e = finite_m_uplink_sinr(&f, &d, 1.0, 2, 128, k, l).unwrap();
                assert!(e.i1 / e.signal < 1e-20);
            }
        }
    }

    #[test]
    fn breakdown_sums_to_denominator() {
        let f = random_fading(3, 2, 1).unwrap();
        let lsf = no_lsfp(&f, 1.0, 2, 64);
        let r = SinrReport::compute(&f, &lsf, 3.0, 1.0, 2, 64).unwrap();
        for e in r.downlink.iter().chain(&r.uplink) {
            assert!(rel(e.signal / e.denominator(), e.sinr) < 1e-15);
            assert!(e.sinr >= 0.0);
        }
        for k in 0..2 {
            for l in 0..3 {
                assert_eq!(r.rate_dl(k, l), (1.0 + r.sinr_dl(k, l)).log2());
            }
        }
        let csv = r.to_csv();
        assert!(csv.starts_with("k,l,sinr_dl,sinr_ul,rate_dl,rate_ul,i1,i2,noise\n"));
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn no_lsfp_limit_matches_infinite_antenna_formula() {
        let f = symmetric_fading(2, 1, 0.4).unwrap();
        assert!((no_lsfp_downlink_limit(&f, 1.0, 1, 0, 0).unwrap() - 1.0).abs() < 1e-12);
        for seed in 0..50 {
            let f = random_fading(3, 2, seed).unwrap();
            for k in 0..2 {
                for l in 0..3 {
                    let a = no_lsfp_downlink_limit(&f, 1.0, 2, k, l).unwrap();
                    let b = asymptotic_downlink_sinr(&f, 1.0, 2, k, l, None).unwrap();
                    assert!(rel(a, b) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn no_lsfp_finite_m_is_increasing_and_converges() {
        let f = random_fading(3, 2, 4).unwrap();
        let limit = no_lsfp_downlink_limit(&f, 1.0, 2, 1, 1).unwrap();
        let sinr = |m: usize| {
            let p = no_lsfp(&f, 1.0, 2, m).precoding;
            finite_m_downlink_sinr(&f, &p, 1.0, 1.0, 2, m, 1, 1).unwrap().sinr
        };
        let mut prev = 0.0;
        for e in 0..=8 {
            let s = sinr(10usize.pow(e));
            assert!(s > prev && s < limit);
            prev = s;
        }
        assert!(rel(prev, limit) < 1e-3);
    }

    #[test]
    fn no_lsfp_uplink_tends_to_infinite_antenna_formula() {
        let f = random_fading(3, 2, 6).unwrap();
        let d = no_lsfp(&f, 1.0, 2, 1).decoding;
        let e = finite_m_uplink_sinr(&f, &d, 1.0, 2, 100_000_000, 0, 2).unwrap();
        let limit = asymptotic_uplink_sinr(&f, 0, 2, None).unwrap();
        assert!(rel(e.sinr, limit) < 1e-3);
    }

    #[test]
    fn simplified_uplink_symmetric_by_hand() {
        // L=2, K=1, beta=1, rho=tau=1, M=10, omega* row l = e_l:
        // numerator 10, J1 = 1, J2 = D (1 + 2) = 9
        let f = symmetric_fading(2, 1, 1.0).unwrap();
        let w = vec![DMatrix::identity(2, 2)];
        let s = finite_m_uplink_sinr_simplified(&f, &w, 1.0, 1, 10, 0, 0).unwrap();
        assert!((s - 10.0 / 19.0).abs() < 1e-15);
    }

    #[test]
    fn no_lsfp_alpha_matches_direct_no_lsfp_terms() {
        // with plain conjugate beamforming, alpha_j^{kv} = delta_jv / (eta_j sqrt(M)),
        // giving signal rho_f M rho tau beta^2/D, M^2 I1 = rho_f M rho tau sum_{v!=l} beta^2/D
        // and M I2 = rho_f K sum_j beta_j^{kl}
        let f = random_fading(3, 2, 8).unwrap();
        let (rho_f, rho, tau, m) = (2.0, 1.5, 2, 50);
        let rt = rho * tau as f64;
        let p = no_lsfp(&f, rho, tau, m).precoding;
        let alpha = phi_to_alpha(&p, &f, rho, tau).unwrap();
        let (k, l) = (1, 0);
        let d = |j: usize, n: usize| pilot_denominator(&f, rho, tau, j, n);
        let signal = rho_f * m as f64 * rt * f.get(l, k, l).powi(2) / d(l, k);
        let i1m2 = rho_f * m as f64 * rt * (1..3).map(|v| f.get(v, k, l).powi(2) / d(v, k)).sum::<f64>();
        // every base station radiates total power K, seen through beta_j^{kl}
        let i2m = rho_f * 2.0 * (0..3).map(|j| f.get(j, k, l)).sum::<f64>();
        let expect = signal / (i1m2 + i2m + 1.0);
        let got = finite_m_downlink_sinr_alpha(&f, &alpha, rho_f, rho, tau, m, k, l).unwrap();
        assert!(rel(got, expect) < 1e-12, "{got} vs {expect}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn downlink_forms_agree(seed in 0u64..100_000, m in 1usize..100_000, rho_f in 0.01f64..100.0, rho_r in 0.01f64..100.0) {
            let f = random_fading(3, 2, seed).unwrap();
            let p = match zf_lsfp(&f, rho_r, 2, ZfVariant::Mu) {
                Ok(p) => p,
                Err(_) => no_lsfp(&f, rho_r, 2, m).precoding,
            };
            let alpha = phi_to_alpha(&p, &f, rho_r, 2).unwrap();
            for (k, l) in [(0, 0), (1, 2)] {
                let a = finite_m_downlink_sinr(&f, &p, rho_f, rho_r, 2, m, k, l).unwrap().sinr;
                let b = finite_m_downlink_sinr_alpha(&f, &alpha, rho_f, rho_r, 2, m, k, l).unwrap();
                prop_assert!(rel(a, b) < 1e-12, "{a} vs {b}");
            }
        }

        #[test]
        fn uplink_forms_agree(seed in 0u64..100_000, m in 1usize..100_000, rho_r in 0.01f64..100.0) {
            let f = random_fading(3, 2, seed).unwrap();
            let d = zf_lsfd(&f).unwrap();
            let star = d.to_star(&f, rho_r, 2, m);
            for (k, l) in [(0, 1), (1, 0)] {
                let a = finite_m_uplink_sinr(&f, &d, rho_r, 2, m, k, l).unwrap().sinr;
                let b = finite_m_uplink_sinr_simplified(&f, &star.omega, rho_r, 2, m, k, l).unwrap();
                prop_assert!(rel(a, b) < 1e-12, "{a} vs {b}");
            }
        }

        #[test]
        fn uplink_depends_only_on_row_scale_free(seed in 0u64..10_000, scale in 0.01f64..100.0) {
            let f = random_fading(3, 1, seed).unwrap();
            let d = zf_lsfd(&f).unwrap();
            let mut scaled = d.clone();
            scaled.omega[0].row_mut(1).scale_mut(scale);
            let a = finite_m_uplink_sinr(&f, &d, 1.0, 1, 64, 0, 1).unwrap().sinr;
            let b = finite_m_uplink_sinr(&f, &scaled, 1.0, 1, 64, 0, 1).unwrap().sinr;
            prop_assert!(rel(a, b) < 1e-12);
        }

        #[test]
        fn zf_downlink_grows_tenfold(seed in 0u64..5_000) {
            let f = random_fading(3, 2, seed).unwrap();
            if let Ok(p) = zf_lsfp(&f, 1.0, 2, ZfVariant::Eta) {
                let s = |m: usize| finite_m_downlink_sinr(&f, &p, 1.0, 1.0, 2, m, 0, 1).unwrap().sinr;
                let r = s(1_000_000) / s(100_000);
                prop_assert!((9.0..=10.0 * (1.0 + 1e-12)).contains(&r), "ratio {r}");
            }
        }

        #[test]
        fn zf_uplink_grows_tenfold(seed in 0u64..5_000) {
            let f = random_fading(3, 2, seed).unwrap();
            if let Ok(d) = zf_lsfd(&f) {
                let s = |m: usize| finite_m_uplink_sinr(&f, &d, 1.0, 2, m, 1, 2).unwrap().sinr;
                let r = s(1_000_000) / s(100_000);
                prop_assert!((9.0..=10.0 * (1.0 + 1e-12)).contains(&r), "ratio {r}");
            }
        }
    }
}
