//! Order-stable reductions and empirical distribution helpers.

use num_complex::Complex64;

const PAIRWISE_BLOCK: usize = 64;

/// Pairwise (cascade) summation. The result depends only on the order of
/// `xs`, never on how the values were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

pub fn pairwise_sum_complex(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= PAIRWISE_BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum_complex(&xs[..mid]) + pairwise_sum_complex(&xs[mid..])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    /// (value - reference) / stderr; infinite when stderr is zero and the
    /// values differ.
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = self.value - reference;
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

pub fn mean_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    Estimate { value: m, stderr: (var / n).sqrt() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEstimate {
    pub value: Complex64,
    /// Standard error of the complex mean, sqrt(E|z - mean|^2 / n).
    pub stderr: f64,
}

pub fn complex_mean_estimate(zs: &[Complex64]) -> ComplexEstimate {
    let n = zs.len() as f64;
    let m = pairwise_sum_complex(zs) / n;
    let dev: Vec<f64> = zs.iter().map(|z| (z - m).norm_sqr()).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    ComplexEstimate { value: m, stderr: (var / n).sqrt() }
}

/// Sample variance E|z - mean|^2 of complex samples with the standard error
/// of that variance estimate (from the fourth central moment).
pub fn complex_variance_estimate(zs: &[Complex64]) -> Estimate {
    let n = zs.len() as f64;
    let m = pairwise_sum_complex(zs) / n;
    let sq: Vec<f64> = zs.iter().map(|z| (z - m).norm_sqr()).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    let fourth: Vec<f64> = sq.iter().map(|s| (s - var) * (s - var)).collect();
    let var_of_sq = pairwise_sum(&fourth) / (n - 1.0);
    Estimate { value: var, stderr: (var_of_sq / n).sqrt() }
}

/// Centered sample covariance E[(a - ā)^* (b - b̄)].
pub fn complex_covariance_estimate(a: &[Complex64], b: &[Complex64]) -> ComplexEstimate {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = pairwise_sum_complex(a) / n;
    let mb = pairwise_sum_complex(b) / n;
    let prods: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| (x - ma).conj() * (y - mb)).collect();
    complex_mean_estimate(&prods)
}

/// Least-squares slope of log10(y) against log10(x).
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let lx: Vec<f64> = xs.iter().map(|x| x.log10()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.log10()).collect();
    let mx = mean(&lx);
    let my = mean(&ly);
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Empirical CDF over a sorted copy of the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self { sorted }
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of samples <= x.
    pub fn eval(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        let count = self.sorted.partition_point(|s| *s <= x);
        count as f64 / self.sorted.len() as f64
    }

    /// Nearest-rank percentile: the smallest sample whose rank is at least
    /// ceil(p/100 * n). `p` in (0, 100].
    pub fn percentile(&self, p: f64) -> f64 {
        nearest_rank(&self.sorted, p)
    }

    /// True when this distribution first-order dominates `other`, i.e. its
    /// CDF is nowhere above the other one.
    pub fn dominates(&self, other: &EmpiricalCdf) -> bool {
        self.max_excess(other) <= 0.0
    }

    /// Largest amount by which this CDF exceeds `other` at any sample point.
    /// Zero or negative means dominance.
    pub fn max_excess(&self, other: &EmpiricalCdf) -> f64 {
        self.sorted
            .iter()
            .chain(other.sorted.iter())
            .map(|&x| self.eval(x) - other.eval(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Nearest-rank percentile of already sorted data.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty sample");
    assert!(p > 0.0 && p <= 100.0, "percentile {p} out of (0, 100]");
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}
