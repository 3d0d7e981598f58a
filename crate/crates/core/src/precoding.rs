//! Large-scale fading precoding (downlink) and decoding (uplink) matrices.
//!
//! For every pilot index `k` there is one L x L precoding matrix `Phi[k]` and
//! one decoding matrix `Omega[k]`.
//!
//! * `Phi[k][(j, l)] = phi_j^{kl}`: weight base station `j` gives to the
//!   symbol of user `k` in cell `l`. Row `j` is base station `j`'s load.
//! * `Omega[k][(l, v)] = omega_l^{kv}`: weight the decoder for user `k` of
//!   cell `l` gives to base station `v`'s matched-filter output.
//!
//! Precoding coefficients come in two scalings, tagged by [`PhiForm`]:
//! `Raw` multiplies the normalised conjugate beam `conj(g_hat) / lambda`, and
//! `Absorbed` multiplies `conj(g_hat)` directly, so
//! `absorbed(j, l) = raw(j, l) / lambda_j^{kj}`. Decoding weights likewise
//! come as `Direct` (applied to the matched-filter outputs) or `Star`, the
//! rescaled form in which zero-forcing is exact.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::pilot_denominator;
use crate::error::{Error, Result};
use crate::linalg::checked_inverse;
use crate::network::LargeScaleFading;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsfMode {
    None,
    ZeroForcing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiForm {
    Raw,
    Absorbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaForm {
    Direct,
    Star,
}

/// Which matrix zero-forcing inverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZfVariant {
    /// `B_D`, entries `beta_j^{kl} / eta_j^k`; yields raw coefficients.
    Eta,
    /// `B_mu`, entries `beta_j^{kl} mu_j^k`; yields absorbed coefficients.
    Mu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Precoding {
    pub phi: Vec<DMatrix<f64>>,
    pub rho_a: f64,
    pub mode: LsfMode,
    pub form: PhiForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoding {
    pub omega: Vec<DMatrix<f64>>,
    pub mode: LsfMode,
    pub form: OmegaForm,
}

/// Downlink and uplink matrices of one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct LsfMatrices {
    pub precoding: Precoding,
    pub decoding: Decoding,
}

/// `eta_j^k = sqrt(1 + rho_r tau sum_s beta_j^{ks})`
pub fn eta(fading: &LargeScaleFading, rho_r: f64, tau: usize, j: usize, k: usize) -> f64 {
    pilot_denominator(fading, rho_r, tau, j, k).sqrt()
}

/// `mu_j^k = beta_j^{kj} / (1 + rho_r tau sum_s beta_j^{ks})`
pub fn mu(fading: &LargeScaleFading, rho_r: f64, tau: usize, j: usize, k: usize) -> f64 {
    fading.get(j, k, j) / pilot_denominator(fading, rho_r, tau, j, k)
}

/// `lambda_j^{kj} = sqrt(M rho_r tau) beta_j^{kj} / eta_j^k`
pub fn lambda(fading: &LargeScaleFading, rho_r: f64, tau: usize, antennas: usize, j: usize, k: usize) -> f64 {
    (antennas as f64 * rho_r * tau as f64).sqrt() * fading.get(j, k, j) / eta(fading, rho_r, tau, j, k)
}

fn check_k(fading: &LargeScaleFading, k: usize) -> Result<()> {
    if k >= fading.users() {
        return Err(Error::Dimension(format!("pilot index {k} out of range for K = {}", fading.users())));
    }
    Ok(())
}

/// Entry `(l, j) = beta_j^{kl} / eta_j^k`.
pub fn build_bd(fading: &LargeScaleFading, rho_r: f64, tau: usize, k: usize) -> Result<DMatrix<f64>> {
    check_k(fading, k)?;
    let n = fading.cells();
    let eta: Vec<f64> = (0..n).map(|j| eta(fading, rho_r, tau, j, k)).collect();
    Ok(DMatrix::from_fn(n, n, |l, j| fading.get(j, k, l) / eta[j]))
}

/// Entry `(l, j) = beta_j^{kl} mu_j^k`.
pub fn build_b_mu(fading: &LargeScaleFading, rho_r: f64, tau: usize, k: usize) -> Result<DMatrix<f64>> {
    check_k(fading, k)?;
    let n = fading.cells();
    let mu: Vec<f64> = (0..n).map(|j| mu(fading, rho_r, tau, j, k)).collect();
    Ok(DMatrix::from_fn(n, n, |l, j| fading.get(j, k, l) * mu[j]))
}

/// Entry `(l, j) = beta_l^{kj}`.
pub fn build_bu(fading: &LargeScaleFading, k: usize) -> Result<DMatrix<f64>> {
    check_k(fading, k)?;
    let n = fading.cells();
    Ok(DMatrix::from_fn(n, n, |l, j| fading.get(l, k, j)))
}

fn max_row_norm_sqr(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max)
}

/// `Phi[k] = sqrt(rho_a) B[k]^-1` with one global `rho_a` chosen so the
/// heaviest row over all `k` has unit norm.
pub fn zf_lsfp(fading: &LargeScaleFading, rho_r: f64, tau: usize, variant: ZfVariant) -> Result<Precoding> {
    let mut inv = Vec::with_capacity(fading.users());
    for k in 0..fading.users() {
        let b = match variant {
            ZfVariant::Eta => build_bd(fading, rho_r, tau, k)?,
            ZfVariant::Mu => build_b_mu(fading, rho_r, tau, k)?,
        };
        inv.push(checked_inverse(&b, k)?);
    }
    let worst = inv.iter().map(max_row_norm_sqr).fold(0.0, f64::max);
    let rho_a = 1.0 / worst;
    let s = rho_a.sqrt();
    let phi = inv.into_iter().map(|m| m * s).collect();
    let form = match variant {
        ZfVariant::Eta => PhiForm::Raw,
        ZfVariant::Mu => PhiForm::Absorbed,
    };
    Ok(Precoding { phi, rho_a, mode: LsfMode::ZeroForcing, form })
}

/// Plain conjugate beamforming expressed as LSF matrices: `Phi[k]` diagonal
/// with `eta_j^k / (sqrt(M rho_r tau) beta_j^{kj})` (absorbed form), and
/// `Omega[k] = I`.
pub fn no_lsfp(fading: &LargeScaleFading, rho_r: f64, tau: usize, antennas: usize) -> LsfMatrices {
    let n = fading.cells();
    let phi = (0..fading.users())
        .map(|k| {
            DMatrix::from_fn(n, n, |j, l| if j == l { 1.0 / lambda(fading, rho_r, tau, antennas, j, k) } else { 0.0 })
        })
        .collect();
    let omega = (0..fading.users()).map(|_| DMatrix::identity(n, n)).collect();
    LsfMatrices {
        precoding: Precoding { phi, rho_a: 1.0, mode: LsfMode::None, form: PhiForm::Absorbed },
        decoding: Decoding { omega, mode: LsfMode::None, form: OmegaForm::Direct },
    }
}

/// `Omega[k] = B_U[k]^-1`, in star form.
pub fn zf_lsfd(fading: &LargeScaleFading) -> Result<Decoding> {
    let omega = (0..fading.users()).map(|k| checked_inverse(&build_bu(fading, k)?, k)).collect::<Result<Vec<_>>>()?;
    Ok(Decoding { omega, mode: LsfMode::ZeroForcing, form: OmegaForm::Star })
}

/// `c = Phi[k] s`: per-base-station combination of the `k`-th symbols.
pub fn lsfp_combine(phi_k: &DMatrix<f64>, s: &[Complex64]) -> Result<Vec<Complex64>> {
    if phi_k.ncols() != s.len() {
        return Err(Error::Dimension(format!("{} symbols for a {}-column matrix", s.len(), phi_k.ncols())));
    }
    Ok((0..phi_k.nrows()).map(|j| (0..phi_k.ncols()).map(|l| s[l] * phi_k[(j, l)]).sum()).collect())
}

impl Precoding {
    /// Same coefficients in absorbed form for an `M`-antenna array.
    pub fn to_absorbed(&self, fading: &LargeScaleFading, rho_r: f64, tau: usize, antennas: usize) -> Precoding {
        self.rescale_rows(PhiForm::Absorbed, |j, k| 1.0 / lambda(fading, rho_r, tau, antennas, j, k))
    }

    pub fn to_raw(&self, fading: &LargeScaleFading, rho_r: f64, tau: usize, antennas: usize) -> Precoding {
        self.rescale_rows(PhiForm::Raw, |j, k| lambda(fading, rho_r, tau, antennas, j, k))
    }

    fn rescale_rows(&self, target: PhiForm, f: impl Fn(usize, usize) -> f64) -> Precoding {
        if self.form == target {
            return self.clone();
        }
        let phi = self
            .phi
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let mut m = m.clone();
                for (j, mut row) in m.row_iter_mut().enumerate() {
                    row *= f(j, k);
                }
                m
            })
            .collect();
        Precoding { phi, rho_a: self.rho_a, mode: self.mode, form: target }
    }

    pub fn max_row_norm_sqr(&self) -> f64 {
        self.phi.iter().map(max_row_norm_sqr).fold(0.0, f64::max)
    }

    /// CSV with header `k,row,col,value`.
    pub fn to_csv(&self) -> String {
        matrices_csv(&self.phi)
    }
}

impl Decoding {
    /// `omega* = sqrt(rho_r tau M) beta_v^{kv} / D_v^k * omega`, column-wise.
    pub fn to_star(&self, fading: &LargeScaleFading, rho_r: f64, tau: usize, antennas: usize) -> Decoding {
        self.rescale_cols(OmegaForm::Star, |v, k| omega_star_scale(fading, rho_r, tau, antennas, v, k))
    }

    pub fn to_direct(&self, fading: &LargeScaleFading, rho_r: f64, tau: usize, antennas: usize) -> Decoding {
        self.rescale_cols(OmegaForm::Direct, |v, k| 1.0 / omega_star_scale(fading, rho_r, tau, antennas, v, k))
    }

    fn rescale_cols(&self, target: OmegaForm, f: impl Fn(usize, usize) -> f64) -> Decoding {
        if self.form == target {
            return self.clone();
        }
        let omega = self
            .omega
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let mut m = m.clone();
                for (v, mut col) in m.column_iter_mut().enumerate() {
                    col *= f(v, k);
                }
                m
            })
            .collect();
        Decoding { omega, mode: self.mode, form: target }
    }

    pub fn to_csv(&self) -> String {
        matrices_csv(&self.omega)
    }
}

fn omega_star_scale(fading: &LargeScaleFading, rho_r: f64, tau: usize, antennas: usize, v: usize, k: usize) -> f64 {
    (rho_r * tau as f64 * antennas as f64).sqrt() * mu(fading, rho_r, tau, v, k)
}

fn matrices_csv(ms: &[DMatrix<f64>]) -> String {
    let mut out = String::from("k,row,col,value\n");
    for (k, m) in ms.iter().enumerate() {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let _ = writeln!(out, "{k},{r},{c},{:e}", m[(r, c)]);
            }
        }
    }
    out
}

/// `alpha_j^{kl} = sqrt(rho_r tau) mu_j^k phi_j^{kl}` from absorbed coefficients.
pub fn phi_to_alpha(
    precoding: &Precoding,
    fading: &LargeScaleFading,
    rho_r: f64,
    tau: usize,
) -> Result<Vec<DMatrix<f64>>> {
    if precoding.form != PhiForm::Absorbed {
        return Err(Error::Config("alpha substitution needs absorbed coefficients".into()));
    }
    let s = (rho_r * tau as f64).sqrt();
    Ok(precoding
        .phi
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let mut m = m.clone();
            for (j, mut row) in m.row_iter_mut().enumerate() {
                row *= s * mu(fading, rho_r, tau, j, k);
            }
            m
        })
        .collect())
}

/// Inverse of [`phi_to_alpha`]; the result is in absorbed form.
pub fn alpha_to_phi(alpha: &[DMatrix<f64>], fading: &LargeScaleFading, rho_r: f64, tau: usize) -> Precoding {
    let s = (rho_r * tau as f64).sqrt();
    let phi = alpha
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let mut m = m.clone();
            for (j, mut row) in m.row_iter_mut().enumerate() {
                row /= s * mu(fading, rho_r, tau, j, k);
            }
            m
        })
        .collect();
    Precoding { phi, rho_a: 1.0, mode: LsfMode::ZeroForcing, form: PhiForm::Absorbed }
}

/// Expected effective gain each user is told to expect:
/// `eps[k][l] = sqrt(rho_f) M rho_r tau sum_j beta_j^{kl} mu_j^k phi_j^{kl}`,
/// returned as `eps[k * L + l]`. Raw coefficients are converted first.
pub fn epsilon_feedback(
    fading: &LargeScaleFading,
    precoding: &Precoding,
    rho_f: f64,
    rho_r: f64,
    tau: usize,
    antennas: usize,
) -> Vec<f64> {
    let abs = precoding.to_absorbed(fading, rho_r, tau, antennas);
    let n = fading.cells();
    let c = rho_f.sqrt() * antennas as f64 * rho_r * tau as f64;
    let mut eps = Vec::with_capacity(fading.users() * n);
    for k in 0..fading.users() {
        for l in 0..n {
            let s: f64 = (0..n).map(|j| fading.get(j, k, l) * mu(fading, rho_r, tau, j, k) * abs.phi[k][(j, l)]).sum();
            eps.push(c * s);
        }
    }
    eps
}

/// Average transmit power of base station `j` (in units of `rho_f`):
/// `gamma_j = M sum_k D_j^k sum_v |alpha_j^{kv}|^2`.
pub fn bs_power_gamma(
    fading: &LargeScaleFading,
    alpha: &[DMatrix<f64>],
    rho_r: f64,
    tau: usize,
    antennas: usize,
    j: usize,
) -> f64 {
    antennas as f64
        * alpha
            .iter()
            .enumerate()
            .map(|(k, a)| pilot_denominator(fading, rho_r, tau, j, k) * a.row(j).norm_squared())
            .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_realization_with, inner, mmse_estimate, norm_sqr, simulate_pilot_phase_with};
    use crate::linalg::relative_frobenius_error;
    use crate::network::{random_fading, symmetric_fading};
    use crate::rng::{qpsk, stream_rng};
    use crate::stats::mean_estimate;
    use proptest::prelude::*;

    fn two_cell() -> LargeScaleFading {
        // beta_1^{k1}=1, beta_2^{k1}=0.2, beta_1^{k2}=0.3, beta_2^{k2}=1 (one-based)
        LargeScaleFading::from_fn(2, 1, |j, _, l| [[1.0, 0.3], [0.2, 1.0]][j][l]).unwrap()
    }

    #[test]
    fn bd_entries() {
        let f = symmetric_fading(1, 1, 0.5).unwrap();
        let b = build_bd(&f, 2.0, 1, 0).unwrap();
        assert!((b[(0, 0)] - 0.5 / 2f64.sqrt()).abs() < 1e-15);

        let b = build_bd(&two_cell(), 1.0, 1, 0).unwrap();
        // (l, j) = beta_j^{kl} / sqrt(1 + beta_j^{k1} + beta_j^{k2})
        let e1 = (1.0f64 + 1.0 + 0.3).sqrt();
        let e2 = (1.0f64 + 0.2 + 1.0).sqrt();
        let expect = [[1.0 / e1, 0.2 / e2], [0.3 / e1, 1.0 / e2]];
        for l in 0..2 {
            for j in 0..2 {
                assert!((b[(l, j)] - expect[l][j]).abs() < 1e-15, "({l},{j})");
            }
        }

        let b = build_bd(&symmetric_fading(3, 1, 0.4).unwrap(), 1.0, 2, 0).unwrap();
        assert!(b.iter().all(|x| (x - b[(0, 0)]).abs() < 1e-15));
    }

    #[test]
    fn b_mu_entries() {
        let b = build_b_mu(&symmetric_fading(1, 1, 1.0).unwrap(), 1.0, 1, 0).unwrap();
        assert!((b[(0, 0)] - 0.5).abs() < 1e-15);

        let f = two_cell();
        let b = build_b_mu(&f, 0.0, 1, 0).unwrap();
        for l in 0..2 {
            for j in 0..2 {
                assert!((b[(l, j)] - f.get(j, 0, l) * f.get(j, 0, j)).abs() < 1e-15);
            }
        }

        let b = build_b_mu(&symmetric_fading(3, 2, 0.5).unwrap(), 2.0, 2, 1).unwrap();
        let expect = 0.25 / (1.0 + 3.0 * 4.0 * 0.5);
        assert!(b.iter().all(|x| (x - expect).abs() < 1e-15));
    }

    #[test]
    fn bu_entries() {
        assert_eq!(build_bu(&symmetric_fading(1, 1, 0.7).unwrap(), 0).unwrap()[(0, 0)], 0.7);
        let f = two_cell();
        let b = build_bu(&f, 0).unwrap();
        assert_eq!(b[(0, 1)], f.get(0, 0, 1));
        assert_eq!(b[(1, 0)], f.get(1, 0, 0));
        assert_eq!((b[(0, 1)], b[(1, 0)]), (0.3, 0.2));
        assert!(build_bu(&f, 1).is_err());
    }

    #[test]
    fn zf_symmetric_is_singular() {
        let f = symmetric_fading(2, 2, 1.0).unwrap();
        for v in [ZfVariant::Eta, ZfVariant::Mu] {
            assert!(matches!(zf_lsfp(&f, 1.0, 2, v), Err(Error::SingularMatrix { k: 0, .. })));
        }
        assert!(matches!(zf_lsfd(&f), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn zf_single_cell() {
        let f = symmetric_fading(1, 1, 0.8).unwrap();
        let p = zf_lsfp(&f, 1.0, 1, ZfVariant::Eta).unwrap();
        let b = build_bd(&f, 1.0, 1, 0).unwrap()[(0, 0)];
        assert!((p.phi[0][(0, 0)] - 1.0).abs() < 1e-15);
        assert!((p.rho_a - b * b).abs() < 1e-15);
        let d = zf_lsfd(&f).unwrap();
        assert!((d.omega[0][(0, 0)] - 1.0 / 0.8).abs() < 1e-15);
    }

    #[test]
    fn zf_identities() {
        let f = random_fading(3, 4, 5).unwrap();
        for v in [ZfVariant::Eta, ZfVariant::Mu] {
            let p = zf_lsfp(&f, 2.0, 4, v).unwrap();
            assert!((p.max_row_norm_sqr() - 1.0).abs() < 1e-12);
            for k in 0..4 {
                let b = match v {
                    ZfVariant::Eta => build_bd(&f, 2.0, 4, k).unwrap(),
                    ZfVariant::Mu => build_b_mu(&f, 2.0, 4, k).unwrap(),
                };
                let target = DMatrix::identity(3, 3) * p.rho_a.sqrt();
                assert!(relative_frobenius_error(&(&p.phi[k] * &b), &target) < 1e-10);
            }
        }
        let d = zf_lsfd(&f).unwrap();
        for k in 0..4 {
            let prod = &d.omega[k] * build_bu(&f, k).unwrap();
            assert!(relative_frobenius_error(&prod, &DMatrix::identity(3, 3)) < 1e-10);
        }
    }

    #[test]
    fn no_lsfp_values() {
        let f = symmetric_fading(1, 1, 1.0).unwrap();
        let m = no_lsfp(&f, 1.0, 1, 4);
        assert!((m.precoding.phi[0][(0, 0)] - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(m.decoding.omega[0], DMatrix::identity(1, 1));

        let f = random_fading(3, 2, 1).unwrap();
        let m = no_lsfp(&f, 1.0, 2, 16);
        for phi in &m.precoding.phi {
            for j in 0..3 {
                for l in 0..3 {
                    if j != l {
                        assert_eq!(phi[(j, l)], 0.0);
                    }
                }
            }
        }
        // raw form is the identity
        let raw = m.precoding.to_raw(&f, 1.0, 2, 16);
        for phi in &raw.phi {
            assert!((phi - DMatrix::identity(3, 3)).norm() < 1e-12);
        }
    }

    #[test]
    fn epsilon_examples() {
        let f = symmetric_fading(1, 1, 1.0).unwrap();
        let m = no_lsfp(&f, 1.0, 1, 4);
        let e = epsilon_feedback(&f, &m.precoding, 1.0, 1.0, 1, 4);
        assert!((e[0] - 2f64.sqrt()).abs() < 1e-14);
        let e = epsilon_feedback(&f, &m.precoding, 0.0, 1.0, 1, 4);
        assert_eq!(e[0], 0.0);
    }

    #[test]
    fn combine_examples() {
        let s = vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25)];
        assert_eq!(lsfp_combine(&DMatrix::identity(2, 2), &s).unwrap(), s);
        let zero = vec![Complex64::new(0.0, 0.0); 2];
        let phi = DMatrix::from_row_slice(2, 2, &[0.3, -0.7, 0.1, 0.9]);
        assert_eq!(lsfp_combine(&phi, &zero).unwrap(), zero);
        let c = lsfp_combine(&phi, &s).unwrap();
        let expect0 = s[0] * 0.3 + s[1] * -0.7;
        let expect1 = s[0] * 0.1 + s[1] * 0.9;
        assert!((c[0] - expect0).norm() < 1e-15 && (c[1] - expect1).norm() < 1e-15);
        assert!(lsfp_combine(&phi, &s[..1]).is_err());
    }

    #[test]
    fn gamma_basics() {
        let f = random_fading(2, 3, 2).unwrap();
        let zero = vec![DMatrix::zeros(2, 2); 3];
        assert_eq!(bs_power_gamma(&f, &zero, 1.0, 3, 8, 0), 0.0);
        let p = zf_lsfp(&f, 1.0, 3, ZfVariant::Mu).unwrap();
        let a = phi_to_alpha(&p, &f, 1.0, 3).unwrap();
        let g = bs_power_gamma(&f, &a, 1.0, 3, 8, 1);
        let a3: Vec<_> = a.iter().map(|m| m * 3.0).collect();
        assert!((bs_power_gamma(&f, &a3, 1.0, 3, 8, 1) - 9.0 * g).abs() < 1e-12 * g);
    }

    #[test]
    fn csv_layout() {
        let p = Precoding { phi: vec![DMatrix::identity(2, 2)], rho_a: 1.0, mode: LsfMode::None, form: PhiForm::Raw };
        let text = p.to_csv();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,row,col,value");
        assert_eq!(lines.len(), 5);
        assert!(lines[2].starts_with("0,0,1,"));
    }

    // Monte-Carlo: conjugate beam normalised by the absorbed coefficient has unit power,
    // and the network-wide transmit power matches gamma.
    #[test]
    fn no_lsfp_unit_beam_power_and_gamma() {
        let f = random_fading(2, 2, 6).unwrap();
        let (rho, tau, m, trials) = (1.0, 2, 64, 4000);
        let lsf = no_lsfp(&f, rho, tau, m);
        let alpha = phi_to_alpha(&lsf.precoding, &f, rho, tau).unwrap();
        let mut beam = Vec::with_capacity(trials);
        let mut power = Vec::with_capacity(trials);
        for t in 0..trials {
            let mut rng = stream_rng(71, t as u64);
            let real = draw_realization_with(&f, m, &mut rng);
            let obs = simulate_pilot_phase_with(&real, rho, tau, Some(&mut rng)).unwrap();
            let est = mmse_estimate(&obs, &f, rho, tau).unwrap();
            let phi = lsf.precoding.phi[1][(0, 0)];
            beam.push(norm_sqr(est.g_hat.get(0, 1, 0)) * phi * phi);
            // x_0 = sum_k conj(g_hat_0^{k0}) c_0^k
            let mut x = vec![Complex64::new(0.0, 0.0); m];
            for k in 0..2 {
                let s: Vec<Complex64> = (0..2).map(|_| qpsk(&mut rng)).collect();
                let c = lsfp_combine(&lsf.precoding.phi[k], &s).unwrap();
                for (xi, g) in x.iter_mut().zip(est.g_hat.get(0, k, 0)) {
                    *xi += g.conj() * c[0];
                }
            }
            power.push(norm_sqr(&x));
        }
        let b = mean_estimate(&beam);
        assert!((b.value - 1.0).abs() < 0.03, "beam power {}", b.value);
        let gamma = bs_power_gamma(&f, &alpha, rho, tau, m, 0);
        assert!((gamma - 2.0).abs() < 1e-12);
        let p = mean_estimate(&power);
        assert!((p.value / gamma - 1.0).abs() < 0.03, "{} vs {gamma}", p.value);
    }

    // Monte-Carlo: the feedback quantity is the mean effective downlink gain.
    #[test]
    fn epsilon_matches_effective_gain() {
        let f = random_fading(3, 1, 17).unwrap();
        let (rho, tau, m, trials, rho_f) = (1.0, 1, 128, 3000, 2.0);
        for v in [ZfVariant::Eta, ZfVariant::Mu] {
            let p = zf_lsfp(&f, rho, tau, v).unwrap();
            let abs = p.to_absorbed(&f, rho, tau, m);
            let eps = epsilon_feedback(&f, &p, rho_f, rho, tau, m);
            let l = 1;
            let mut gain = Vec::with_capacity(trials);
            for t in 0..trials {
                let mut rng = stream_rng(5, t as u64);
                let real = draw_realization_with(&f, m, &mut rng);
                let obs = simulate_pilot_phase_with(&real, rho, tau, Some(&mut rng)).unwrap();
                let est = mmse_estimate(&obs, &f, rho, tau).unwrap();
                let z: Complex64 =
                    (0..3).map(|j| inner(est.g_hat.get(j, 0, j), real.g.get(j, 0, l)) * abs.phi[0][(j, l)]).sum();
                gain.push(z.re * rho_f.sqrt());
            }
            let e = mean_estimate(&gain);
            assert!((e.value / eps[l] - 1.0).abs() < 0.03, "{v:?}: {} vs {}", e.value, eps[l]);
        }
    }

    proptest! {
        #[test]
        fn alpha_round_trip(seed in 0u64..500, rho in 0.1f64..10.0, tau in 2usize..5) {
            let f = random_fading(3, 2, seed).unwrap();
            let p = no_lsfp(&f, rho, tau, 32).precoding;
            let back = alpha_to_phi(&phi_to_alpha(&p, &f, rho, tau).unwrap(), &f, rho, tau);
            for (a, b) in p.phi.iter().zip(&back.phi) {
                prop_assert!((a - b).norm() <= 1e-12 * a.norm());
            }
        }

        #[test]
        fn form_conversions_round_trip(seed in 0u64..500, m in 1usize..1000) {
            let f = random_fading(3, 2, seed).unwrap();
            let p = zf_lsfp(&f, 1.0, 2, ZfVariant::Eta).unwrap();
            let back = p.to_absorbed(&f, 1.0, 2, m).to_raw(&f, 1.0, 2, m);
            for (a, b) in p.phi.iter().zip(&back.phi) {
                prop_assert!((a - b).norm() <= 1e-12 * a.norm());
            }
            let d = zf_lsfd(&f).unwrap();
            let back = d.to_direct(&f, 1.0, 2, m).to_star(&f, 1.0, 2, m);
            for (a, b) in d.omega.iter().zip(&back.omega) {
                prop_assert!((a - b).norm() <= 1e-12 * a.norm());
            }
        }

        #[test]
        fn zf_rows_within_budget(seed in 0u64..2000, rho in 0.1f64..20.0) {
            let f = random_fading(4, 3, seed).unwrap();
            for v in [ZfVariant::Eta, ZfVariant::Mu] {
                if let Ok(p) = zf_lsfp(&f, rho, 3, v) {
                    prop_assert!(p.max_row_norm_sqr() <= 1.0 + 1e-12);
                }
            }
        }

        #[test]
        fn combine_matches_matrix_product(seed in 0u64..500) {
            use rand::Rng;
            let mut rng = stream_rng(seed, 0);
            let phi = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.5);
            let s: Vec<Complex64> = (0..3).map(|_| qpsk(&mut rng)).collect();
            let c = lsfp_combine(&phi, &s).unwrap();
            let oracle = phi.map(|x| Complex64::new(x, 0.0)) * nalgebra::DVector::from_vec(s);
            for (a, b) in c.iter().zip(oracle.iter()) {
                prop_assert!((a - b).norm() < 1e-14);
            }
        }
    }
}
