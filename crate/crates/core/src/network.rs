//! Network geometry and the large-scale fading tensor.
//!
//! Cells are flat-topped hexagons of circumradius `cell_radius` laid out as a
//! hexagonal cluster of 1, 7 or 19 cells. Distances wrap around: the cluster
//! tiles the plane, and each base station is seen through whichever of its
//! seven images (itself plus six shifted copies of the cluster) is closest.
//!
//! Gains follow a log-distance law referenced to the cell radius with
//! independent log-normal shadowing per (base station, user) pair:
//! `beta = (d / R)^(-exponent) * 10^(X / 10)`, `X ~ N(0, sigma_db^2)`.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

/// Users are never placed closer than this fraction of the radius to their BS.
pub const EXCLUSION_FRACTION: f64 = 0.1;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Number of cells L.
    pub cells: usize,
    /// Users per cell K.
    pub users: usize,
    /// Base-station antennas M.
    pub antennas: usize,
    /// Pilot length in symbols.
    pub tau: usize,
    /// Forward-link transmit power (linear).
    pub rho_f: f64,
    /// Reverse-link transmit power (linear).
    pub rho_r: f64,
    /// Hexagon circumradius in meters.
    pub cell_radius: f64,
    pub pathloss_exponent: f64,
    pub shadow_sigma_db: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            cells: 7,
            users: 10,
            antennas: 100,
            tau: 10,
            rho_f: 10.0,
            rho_r: 10.0,
            cell_radius: 1000.0,
            pathloss_exponent: 3.8,
            shadow_sigma_db: 8.0,
            seed: 1,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells == 0 || self.users == 0 || self.antennas == 0 {
            return Err(Error::Config("L, K and M must all be at least 1".into()));
        }
        if self.users > self.tau {
            return Err(Error::Config(format!(
                "K = {} users need at least as many pilot symbols, tau = {}",
                self.users, self.tau
            )));
        }
        for (name, p) in [("rho_f", self.rho_f), ("rho_r", self.rho_r)] {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {p}")));
            }
        }
        if !(self.cell_radius.is_finite() && self.cell_radius > 0.0) {
            return Err(Error::Config("cell_radius must be positive".into()));
        }
        if !self.pathloss_exponent.is_finite() {
            return Err(Error::Config("pathloss_exponent must be finite".into()));
        }
        if !(self.shadow_sigma_db.is_finite() && self.shadow_sigma_db >= 0.0) {
            return Err(Error::Config("shadow_sigma_db must be >= 0".into()));
        }
        Ok(())
    }
}

/// `beta[j][k][l]`: power gain between base station `j` and user `k` of cell `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleFading {
    cells: usize,
    users: usize,
    beta: Vec<f64>,
}

impl LargeScaleFading {
    /// Builds a tensor from a flat `[j][k][l]`-ordered vector.
    pub fn new(cells: usize, users: usize, beta: Vec<f64>) -> Result<Self> {
        if cells == 0 || users == 0 {
            return Err(Error::Dimension("L and K must be at least 1".into()));
        }
        if beta.len() != cells * users * cells {
            return Err(Error::Dimension(format!(
                "expected {} gains for L={cells}, K={users}, got {}",
                cells * users * cells,
                beta.len()
            )));
        }
        if let Some(bad) = beta.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::Config(format!("large-scale gains must be positive and finite, got {bad}")));
        }
        Ok(Self { cells, users, beta })
    }

    pub fn from_fn(cells: usize, users: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut beta = Vec::with_capacity(cells * users * cells);
        for j in 0..cells {
            for k in 0..users {
                for l in 0..cells {
                    beta.push(f(j, k, l));
                }
            }
        }
        Self::new(cells, users, beta)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// (L, K, L)
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.cells, self.users, self.cells)
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize, l: usize) -> f64 {
        self.beta[(j * self.users + k) * self.cells + l]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.beta
    }

    /// Sum over cells `s` of `beta[j][k][s]`.
    pub fn pilot_sum(&self, j: usize, k: usize) -> f64 {
        (0..self.cells).map(|s| self.get(j, k, s)).sum()
    }

    /// CSV with header `j,k,l,beta`, zero-based indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,k,l,beta\n");
        for j in 0..self.cells {
            for k in 0..self.users {
                for l in 0..self.cells {
                    let _ = writeln!(out, "{j},{k},{l},{:e}", self.get(j, k, l));
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("j,k,l,beta") => {}
            other => return Err(Error::Parse(format!("bad header {other:?}"))),
        }
        for (n, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 fields", n + 2)));
            }
            let idx = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("line {}: {e}", n + 2)));
            let v = f[3].trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", n + 2)))?;
            rows.push((idx(f[0])?, idx(f[1])?, idx(f[2])?, v));
        }
        let cells = rows.iter().map(|r| r.0.max(r.2)).max().map_or(0, |m| m + 1);
        let users = rows.iter().map(|r| r.1).max().map_or(0, |m| m + 1);
        let mut beta = vec![f64::NAN; cells * users * cells];
        for (j, k, l, v) in rows {
            beta[(j * users + k) * cells + l] = v;
        }
        Self::new(cells, users, beta)
    }
}

/// Every entry equal to `b`.
pub fn symmetric_fading(cells: usize, users: usize, b: f64) -> Result<LargeScaleFading> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::Config(format!("symmetric gain must be positive, got {b}")));
    }
    LargeScaleFading::new(cells, users, vec![b; cells * users * cells])
}

/// Random, well-conditioned test network for any `L`: own-cell gains
/// log-uniform in [0.3, 1], cross-cell gains log-uniform in [0.01, 0.3].
pub fn random_fading(cells: usize, users: usize, seed: u64) -> Result<LargeScaleFading> {
    let mut rng = stream_rng(seed, 0);
    LargeScaleFading::from_fn(cells, users, |j, _k, l| {
        let (lo, hi): (f64, f64) = if j == l { (0.3, 1.0) } else { (0.01, 0.3) };
        let u: f64 = rng.random();
        (lo.ln() + u * (hi.ln() - lo.ln())).exp()
    })
}

pub type Point = [f64; 2];

/// Hexagonal cluster with wrap-around images.
#[derive(Debug, Clone)]
pub struct HexLayout {
    radius: f64,
    centers: Vec<Point>,
    shifts: Vec<Point>,
}

impl HexLayout {
    /// Supported cell counts are the centred hexagonal numbers 1, 7 and 19.
    pub fn new(cells: usize, radius: f64) -> Result<Self> {
        let rings: i64 = match cells {
            1 => 0,
            7 => 1,
            19 => 2,
            other => {
                return Err(Error::Config(format!("wrap-around hex layout supports L in {{1, 7, 19}}, got {other}")))
            }
        };
        let mut axial = Vec::new();
        for q in -rings..=rings {
            for r in (-rings).max(-q - rings)..=rings.min(-q + rings) {
                axial.push((q, r));
            }
        }
        // centre cell first, then by ring and angle, so cell 0 is in the middle
        axial.sort_by_key(|&(q, r)| {
            let ring = q.abs().max(r.abs()).max((q + r).abs());
            (ring, q, r)
        });
        let to_xy =
            |(q, r): (i64, i64)| -> Point { [radius * 1.5 * q as f64, radius * SQRT3 * (r as f64 + q as f64 / 2.0)] };
        let centers = axial.iter().copied().map(to_xy).collect();

        // cluster translation (2n+1, -n) and its rotations by 60 degrees
        let mut shifts = vec![[0.0, 0.0]];
        if cells > 1 {
            let mut v = (2 * rings + 1, -rings);
            for _ in 0..6 {
                shifts.push(to_xy(v));
                v = (-v.1, v.0 + v.1);
            }
        }
        Ok(Self { radius, centers, shifts })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }

    pub fn center(&self, cell: usize) -> Point {
        self.centers[cell]
    }

    /// Distance from `p` to the nearest image of base station `j`.
    pub fn wrap_distance(&self, p: Point, j: usize) -> f64 {
        let c = self.centers[j];
        self.shifts
            .iter()
            .map(|s| ((p[0] - c[0] - s[0]).powi(2) + (p[1] - c[1] - s[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    }

    /// Uniform point in the hexagon of `cell`, outside the exclusion disc.
    pub fn sample_user<R: Rng + ?Sized>(&self, cell: usize, rng: &mut R) -> Point {
        let r = self.radius;
        let h = SQRT3 / 2.0 * r;
        loop {
            let x = (rng.random::<f64>() * 2.0 - 1.0) * r;
            let y = (rng.random::<f64>() * 2.0 - 1.0) * h;
            let inside = y.abs() <= h && SQRT3 * x.abs() + y.abs() <= SQRT3 * r;
            if inside && x.hypot(y) >= EXCLUSION_FRACTION * r {
                let c = self.centers[cell];
                return [c[0] + x, c[1] + y];
            }
        }
    }
}

/// Deterministic distance-dependent gain `(d / d0)^(-exponent)`.
pub fn pathloss_gain(distance: f64, reference: f64, exponent: f64) -> f64 {
    (distance / reference).powf(-exponent)
}

/// One realisation of the geometry together with the resulting gains.
#[derive(Debug, Clone)]
pub struct NetworkDraw {
    pub fading: LargeScaleFading,
    /// user positions, `[l][k]`
    pub users: Vec<Vec<Point>>,
    /// wrap-around distances, `[j][k][l]` flat like the gain tensor
    pub distance: Vec<f64>,
    /// shadowing in dB, `[j][k][l]` flat
    pub shadow_db: Vec<f64>,
}

/// Gains for users at fixed positions. `shadow_db` is `[j][k][l]` flat, or
/// `None` for no shadowing.
pub fn fading_from_positions(
    layout: &HexLayout,
    users: &[Vec<Point>],
    exponent: f64,
    shadow_db: Option<&[f64]>,
) -> Result<LargeScaleFading> {
    let cells = layout.cells();
    if users.len() != cells {
        return Err(Error::Dimension(format!("{} cells of users for L={cells}", users.len())));
    }
    let k_count = users[0].len();
    if users.iter().any(|u| u.len() != k_count) {
        return Err(Error::Dimension("every cell needs the same number of users".into()));
    }
    LargeScaleFading::from_fn(cells, k_count, |j, k, l| {
        let d = layout.wrap_distance(users[l][k], j);
        let x = shadow_db.map_or(0.0, |s| s[(j * k_count + k) * cells + l]);
        pathloss_gain(d, layout.radius(), exponent) * 10f64.powf(x / 10.0)
    })
}

/// Full draw (positions, distances, shadowing) for `config.seed`.
pub fn generate_network_draw(config: &NetworkConfig) -> Result<NetworkDraw> {
    config.validate()?;
    let layout = HexLayout::new(config.cells, config.cell_radius)?;
    let (l_count, k_count) = (config.cells, config.users);

    let mut place_rng = stream_rng(derive_seed(config.seed, 1), 0);
    let users: Vec<Vec<Point>> =
        (0..l_count).map(|l| (0..k_count).map(|_| layout.sample_user(l, &mut place_rng)).collect()).collect();

    let mut shadow_rng = stream_rng(derive_seed(config.seed, 2), 0);
    let n = l_count * k_count * l_count;
    let shadow_db: Vec<f64> = if config.shadow_sigma_db > 0.0 {
        let normal = Normal::new(0.0, config.shadow_sigma_db).map_err(|e| Error::Config(e.to_string()))?;
        (0..n).map(|_| normal.sample(&mut shadow_rng)).collect()
    } else {
        vec![0.0; n]
    };

    let mut distance = Vec::with_capacity(n);
    for j in 0..l_count {
        for k in 0..k_count {
            for l in 0..l_count {
                distance.push(layout.wrap_distance(users[l][k], j));
            }
        }
    }
    let fading = fading_from_positions(&layout, &users, config.pathloss_exponent, Some(&shadow_db))?;
    Ok(NetworkDraw { fading, users, distance, shadow_db })
}

/// Large-scale fading tensor for `config` (deterministic in `config.seed`).
pub fn generate_network(config: &NetworkConfig) -> Result<LargeScaleFading> {
    generate_network_draw(config).map(|d| d.fading)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(cells: usize, users: usize) -> NetworkConfig {
        NetworkConfig { cells, users, tau: users, ..NetworkConfig::default() }
    }

    #[test]
    fn user_at_reference_distance_has_unit_gain() {
        let layout = HexLayout::new(1, 250.0).unwrap();
        let users = vec![vec![[250.0, 0.0]]];
        let f = fading_from_positions(&layout, &users, 3.8, None).unwrap();
        assert_eq!(f.dims(), (1, 1, 1));
        assert!((f.get(0, 0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_tensor() {
        let c = cfg(7, 10);
        let a = generate_network(&c).unwrap();
        let b = generate_network(&c).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let other = generate_network(&NetworkConfig { seed: 2, ..c }).unwrap();
        assert_ne!(a.as_slice(), other.as_slice());
    }

    #[test]
    fn unsupported_cell_counts_rejected() {
        for l in [2, 3, 6, 8, 20] {
            assert!(matches!(generate_network(&cfg(l, 1)), Err(Error::Config(_))), "L={l}");
        }
        for l in [1, 7, 19] {
            let f = generate_network(&cfg(l, 2)).unwrap();
            assert_eq!(f.dims(), (l, 2, l));
            assert!(f.as_slice().iter().all(|b| *b > 0.0 && b.is_finite()));
        }
    }

    #[test]
    fn shadowing_is_zero_mean_in_db() {
        // 205 draws x 490 pairs ~ 1e5 samples; SE = 8 / sqrt(1e5) ~ 0.025 dB
        let mut all = Vec::new();
        for seed in 0..205 {
            let d = generate_network_draw(&NetworkConfig { seed, ..cfg(7, 10) }).unwrap();
            all.extend(d.shadow_db);
        }
        assert!(all.len() >= 100_000);
        let m = crate::stats::mean(&all);
        assert!(m.abs() < 0.1, "mean shadowing {m} dB");
        // and the tensor really carries it: beta / pathloss recovers X
        let d = generate_network_draw(&cfg(7, 10)).unwrap();
        for (i, (&dist, &x)) in d.distance.iter().zip(&d.shadow_db).enumerate() {
            let expect = pathloss_gain(dist, 1000.0, 3.8) * 10f64.powf(x / 10.0);
            assert!((d.fading.as_slice()[i] / expect - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn users_lie_in_their_hexagon() {
        let layout = HexLayout::new(19, 100.0).unwrap();
        let mut rng = stream_rng(3, 0);
        for cell in 0..19 {
            for _ in 0..50 {
                let p = layout.sample_user(cell, &mut rng);
                let own = layout.wrap_distance(p, cell);
                assert!((10.0 - 1e-9..=100.0 + 1e-9).contains(&own));
                // the serving base station is the nearest one
                for j in 0..19 {
                    assert!(layout.wrap_distance(p, j) >= own - 1e-9, "cell {cell} bs {j}");
                }
            }
        }
    }

    #[test]
    fn wrap_around_is_symmetric_for_seven_cells() {
        let layout = HexLayout::new(7, 1.0).unwrap();
        // every BS sees every other BS at exactly one inter-site distance
        for a in 0..7 {
            for b in 0..7 {
                let d = layout.wrap_distance(layout.center(a), b);
                let expect = if a == b { 0.0 } else { SQRT3 };
                assert!((d - expect).abs() < 1e-12, "{a}->{b}: {d}");
            }
        }
    }

    #[test]
    fn symmetric_fixture() {
        let f = symmetric_fading(2, 1, 1.0).unwrap();
        assert_eq!(f.dims(), (2, 1, 2));
        assert!(f.as_slice().iter().all(|b| *b == 1.0));
        let f = symmetric_fading(3, 2, 0.5).unwrap();
        assert!(f.as_slice().iter().all(|b| *b == 0.5));
        assert!(symmetric_fading(2, 2, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let f = random_fading(3, 2, 9).unwrap();
        let text = f.to_csv();
        assert!(text.starts_with("j,k,l,beta\n"));
        let back = LargeScaleFading::from_csv(&text).unwrap();
        assert_eq!(back.dims(), f.dims());
        for (a, b) in back.as_slice().iter().zip(f.as_slice()) {
            assert!((a / b - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_k_above_tau() {
        let c = NetworkConfig { users: 5, tau: 4, ..NetworkConfig::default() };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn pathloss_is_decreasing(d1 in 1.0f64..5000.0, d2 in 1.0f64..5000.0, e in 2.0f64..5.0) {
            prop_assume!(d1 < d2);
            prop_assert!(pathloss_gain(d1, 1000.0, e) > pathloss_gain(d2, 1000.0, e));
        }

        #[test]
        fn unshadowed_gain_decreases_with_distance(seed in 0u64..200) {
            let c = NetworkConfig { shadow_sigma_db: 0.0, seed, ..cfg(7, 3) };
            let d = generate_network_draw(&c).unwrap();
            let n = d.distance.len();
            for a in 0..n {
                for b in 0..n {
                    if d.distance[a] < d.distance[b] {
                        prop_assert!(d.fading.as_slice()[a] > d.fading.as_slice()[b]);
                    }
                }
            }
        }
    }
}
