//! Small-scale fading, the uplink pilot phase and MMSE channel estimation.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::network::LargeScaleFading;
use crate::rng::{complex_normal, derive_seed, stream_rng, SimRng};

/// Tensor of M-dimensional complex vectors indexed `[j][k][l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTensor {
    cells: usize,
    users: usize,
    antennas: usize,
    data: Vec<Complex64>,
}

impl VectorTensor {
    pub fn zeros(cells: usize, users: usize, antennas: usize) -> Self {
        Self { cells, users, antennas, data: vec![Complex64::new(0.0, 0.0); cells * users * cells * antennas] }
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.cells, self.users, self.cells)
    }

    #[inline]
    fn offset(&self, j: usize, k: usize, l: usize) -> usize {
        ((j * self.users + k) * self.cells + l) * self.antennas
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize, l: usize) -> &[Complex64] {
        let o = self.offset(j, k, l);
        &self.data[o..o + self.antennas]
    }

    #[inline]
    pub fn get_mut(&mut self, j: usize, k: usize, l: usize) -> &mut [Complex64] {
        let o = self.offset(j, k, l);
        &mut self.data[o..o + self.antennas]
    }
}

/// `a^H b`
#[inline]
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// One coherence block: `h` has CN(0,1) entries, `g = sqrt(beta) * h`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: VectorTensor,
    pub g: VectorTensor,
}

impl ChannelRealization {
    pub fn antennas(&self) -> usize {
        self.h.antennas
    }

    pub fn cells(&self) -> usize {
        self.h.cells
    }

    pub fn users(&self) -> usize {
        self.h.users
    }
}

pub fn draw_realization(fading: &LargeScaleFading, antennas: usize, seed: u64) -> Result<ChannelRealization> {
    if antennas == 0 {
        return Err(Error::Config("M must be at least 1".into()));
    }
    let mut rng = stream_rng(derive_seed(seed, 0xC4A7), 0);
    Ok(draw_realization_with(fading, antennas, &mut rng))
}

/// Same as [`draw_realization`] but consuming a caller-owned stream.
pub fn draw_realization_with(fading: &LargeScaleFading, antennas: usize, rng: &mut SimRng) -> ChannelRealization {
    let (l_count, k_count, _) = fading.dims();
    let mut h = VectorTensor::zeros(l_count, k_count, antennas);
    let mut g = VectorTensor::zeros(l_count, k_count, antennas);
    for j in 0..l_count {
        for k in 0..k_count {
            for l in 0..l_count {
                let amp = fading.get(j, k, l).sqrt();
                let hv = h.get_mut(j, k, l);
                for x in hv.iter_mut() {
                    *x = complex_normal(rng);
                }
                let hv = h.get(j, k, l).to_vec();
                for (gx, hx) in g.get_mut(j, k, l).iter_mut().zip(hv) {
                    *gx = hx * amp;
                }
            }
        }
    }
    ChannelRealization { h, g }
}

/// `1 + rho_r * tau * sum_s beta[j][k][s]`, the MMSE denominator.
#[inline]
pub fn pilot_denominator(fading: &LargeScaleFading, rho_r: f64, tau: usize, j: usize, k: usize) -> f64 {
    1.0 + rho_r * tau as f64 * fading.pilot_sum(j, k)
}

/// Real tensor indexed `[j][k][l]`, same layout as [`LargeScaleFading`].
#[derive(Debug, Clone, PartialEq)]
pub struct RealTensor {
    cells: usize,
    users: usize,
    data: Vec<f64>,
}

impl RealTensor {
    #[inline]
    pub fn get(&self, j: usize, k: usize, l: usize) -> f64 {
        self.data[(j * self.users + k) * self.cells + l]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub fn compute_theta(fading: &LargeScaleFading, rho_r: f64, tau: usize) -> RealTensor {
    let (l_count, k_count, _) = fading.dims();
    let s = (rho_r * tau as f64).sqrt();
    let mut data = Vec::with_capacity(l_count * k_count * l_count);
    for j in 0..l_count {
        for k in 0..k_count {
            let d = pilot_denominator(fading, rho_r, tau, j, k);
            for l in 0..l_count {
                data.push(s * fading.get(j, k, l) / d);
            }
        }
    }
    RealTensor { cells: l_count, users: k_count, data }
}

/// Pilot `k` is column `k` of the tau x tau identity.
pub fn pilot_matrix(users: usize, tau: usize) -> Result<DMatrix<Complex64>> {
    if tau < users {
        return Err(Error::Dimension(format!("tau = {tau} is shorter than K = {users}")));
    }
    Ok(DMatrix::from_fn(tau, users, |r, c| if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }))
}

/// Received training matrices `Y_j` (M x tau), one per base station.
#[derive(Debug, Clone)]
pub struct PilotObservation {
    pub tau: usize,
    pub y: Vec<DMatrix<Complex64>>,
}

impl PilotObservation {
    /// `Y_j r^[k]`; with identity pilots this is column `k`.
    pub fn despread(&self, j: usize, k: usize) -> Vec<Complex64> {
        self.y[j].column(k).iter().copied().collect()
    }
}

/// Pilot phase with fresh CN(0,1) noise drawn from `seed`, or noiseless for `None`.
pub fn simulate_pilot_phase(
    realization: &ChannelRealization,
    rho_r: f64,
    tau: usize,
    noise_seed: Option<u64>,
) -> Result<PilotObservation> {
    match noise_seed {
        Some(seed) => {
            let mut rng = stream_rng(derive_seed(seed, 0x9107), 0);
            simulate_pilot_phase_with(realization, rho_r, tau, Some(&mut rng))
        }
        None => simulate_pilot_phase_with(realization, rho_r, tau, None),
    }
}

pub fn simulate_pilot_phase_with(
    realization: &ChannelRealization,
    rho_r: f64,
    tau: usize,
    noise: Option<&mut SimRng>,
) -> Result<PilotObservation> {
    let (l_count, k_count, m) = (realization.cells(), realization.users(), realization.antennas());
    let r = pilot_matrix(k_count, tau)?;
    let amp = (rho_r * tau as f64).sqrt();
    let mut y = Vec::with_capacity(l_count);
    for j in 0..l_count {
        let mut yj = DMatrix::<Complex64>::zeros(m, tau);
        for k in 0..k_count {
            let mut sum = vec![Complex64::new(0.0, 0.0); m];
            for l in 0..l_count {
                for (s, g) in sum.iter_mut().zip(realization.g.get(j, k, l)) {
                    *s += g;
                }
            }
            // sqrt(rho tau) * (sum_l g) r^H
            for c in 0..tau {
                let rc = r[(c, k)].conj();
                if rc != Complex64::new(0.0, 0.0) {
                    for (row, s) in sum.iter().enumerate() {
                        yj[(row, c)] += amp * s * rc;
                    }
                }
            }
        }
        y.push(yj);
    }
    if let Some(rng) = noise {
        for yj in &mut y {
            for x in yj.iter_mut() {
                *x += complex_normal(rng);
            }
        }
    }
    Ok(PilotObservation { tau, y })
}

#[derive(Debug, Clone)]
pub struct ChannelEstimates {
    pub g_hat: VectorTensor,
    pub theta: RealTensor,
    /// `lambda_sq[j * K + k] = M rho_r tau beta[j][k][j]^2 / D[j][k]`
    pub lambda_sq: Vec<f64>,
    /// `g - g_hat`, present once attached with [`ChannelEstimates::with_error`].
    pub g_tilde: Option<VectorTensor>,
}

impl ChannelEstimates {
    pub fn lambda_sq(&self, j: usize, k: usize) -> f64 {
        self.lambda_sq[j * self.g_hat.users + k]
    }

    pub fn with_error(mut self, realization: &ChannelRealization) -> Self {
        let mut e = realization.g.clone();
        for (x, h) in e.data.iter_mut().zip(&self.g_hat.data) {
            *x -= h;
        }
        self.g_tilde = Some(e);
        self
    }
}

pub fn mmse_estimate(
    obs: &PilotObservation,
    fading: &LargeScaleFading,
    rho_r: f64,
    tau: usize,
) -> Result<ChannelEstimates> {
    let (l_count, k_count, _) = fading.dims();
    if obs.y.len() != l_count {
        return Err(Error::Dimension(format!("{} observations for L = {l_count}", obs.y.len())));
    }
    if obs.tau != tau || tau < k_count {
        return Err(Error::Dimension(format!("observation tau {} vs tau {tau}, K = {k_count}", obs.tau)));
    }
    let m = obs.y[0].nrows();
    let theta = compute_theta(fading, rho_r, tau);
    let mut g_hat = VectorTensor::zeros(l_count, k_count, m);
    let mut lambda_sq = Vec::with_capacity(l_count * k_count);
    for j in 0..l_count {
        for k in 0..k_count {
            let z = obs.despread(j, k);
            for l in 0..l_count {
                let t = theta.get(j, k, l);
                for (dst, src) in g_hat.get_mut(j, k, l).iter_mut().zip(&z) {
                    *dst = src * t;
                }
            }
            let d = pilot_denominator(fading, rho_r, tau, j, k);
            let b = fading.get(j, k, j);
            lambda_sq.push(m as f64 * rho_r * tau as f64 * b * b / d);
        }
    }
    Ok(ChannelEstimates { g_hat, theta, lambda_sq, g_tilde: None })
}
