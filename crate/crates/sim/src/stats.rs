//! Rank statistics: Friedman test, Nemenyi post-hoc, mean rankings.
//!
//! Everything is generic over [`Real`]; the crate root re-exports `f64`
//! aliases. Ties are rejected: every row must be a permutation of `1..=k`.

use std::fmt;
use std::path::Path;

use num_traits::{Float, FromPrimitive};

/// Scalar used by the statistics.
pub trait Real: Float + FromPrimitive + fmt::Debug + fmt::Display + fmt::LowerExp {}

impl<T: Float + FromPrimitive + fmt::Debug + fmt::Display + fmt::LowerExp> Real for T {}

fn c<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant fits the scalar")
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("need at least 2 evaluators, got {0}")]
    TooFewRows(usize),
    #[error("need at least 3 conditions, got {0}")]
    TooFewConditions(usize),
    #[error("row {row} has {got} entries, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("row {row} is not a permutation of 1..={k} (ties are not supported): {values:?}")]
    NotPermutation { row: usize, k: usize, values: Vec<u32> },
    #[error("reading rankings: {0}")]
    Read(String),
}

/// Rows are evaluators, columns are conditions, entries are ranks `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingDataset {
    labels: Vec<String>,
    rows: Vec<Vec<u32>>,
}

impl RankingDataset {
    pub fn new(labels: Vec<String>, rows: Vec<Vec<u32>>) -> Result<Self, StatsError> {
        let k = labels.len();
        if rows.len() < 2 {
            return Err(StatsError::TooFewRows(rows.len()));
        }
        if k < 3 {
            return Err(StatsError::TooFewConditions(k));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(StatsError::Ragged { row: i, got: row.len(), expected: k });
            }
            let mut seen = vec![false; k];
            for &r in row {
                let slot = (r as usize).checked_sub(1).and_then(|j| seen.get_mut(j));
                match slot {
                    Some(s) if !*s => *s = true,
                    _ => return Err(StatsError::NotPermutation { row: i, k, values: row.clone() }),
                }
            }
        }
        Ok(Self { labels, rows })
    }

    /// Conditions labelled `C1..Ck`.
    pub fn unlabeled(rows: Vec<Vec<u32>>) -> Result<Self, StatsError> {
        let k = rows.first().map_or(0, Vec::len);
        Self::new((1..=k).map(|i| format!("C{i}")).collect(), rows)
    }

    /// CSV with a header row of condition labels and one evaluator per line.
    pub fn from_csv(text: &str) -> Result<Self, StatsError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let labels: Vec<String> = rdr.headers().map_err(|e| StatsError::Read(e.to_string()))?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| StatsError::Read(e.to_string()))?;
            let row = rec
                .iter()
                .map(|v| v.parse::<u32>().map_err(|_| StatsError::Read(format!("row {i}: {v:?} is not a rank"))))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != labels.len() {
                return Err(StatsError::Ragged { row: i, got: row.len(), expected: labels.len() });
            }
            rows.push(row);
        }
        Self::new(labels, rows)
    }

    pub fn load(path: &Path) -> Result<Self, StatsError> {
        let text = std::fs::read_to_string(path).map_err(|e| StatsError::Read(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    /// Evaluators.
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Conditions.
    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn rank_sums(&self) -> Vec<u64> {
        (0..self.k()).map(|j| self.rows.iter().map(|r| r[j] as u64).sum()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Friedman<T> {
    pub chi_square: T,
    pub df: usize,
    pub p_value: T,
}

pub fn friedman_test<T: Real>(data: &RankingDataset) -> Friedman<T> {
    let (n, k) = (data.n() as i128, data.k() as i128);
    // Same formula over a common denominator in integers, so a single rounding.
    let sq: i128 = data.rank_sums().iter().map(|&r| (r as i128) * (r as i128)).sum();
    let num = 12 * sq - 3 * n * n * k * (k + 1) * (k + 1);
    let chi: T = c::<T>(num as f64) / c((n * k * (k + 1)) as f64);
    let df = data.k() - 1;
    Friedman { chi_square: chi, df, p_value: chi_square_sf(chi, c(df as f64)) }
}

pub fn mean_rankings<T: Real>(data: &RankingDataset) -> Vec<T> {
    data.rank_sums().iter().map(|&s| c::<T>(s as f64) / c(data.n() as f64)).collect()
}

/// Pairwise p-values from the studentized range over mean-rank differences.
/// Symmetric with a unit diagonal.
pub fn nemenyi_posthoc<T: Real>(data: &RankingDataset) -> Vec<Vec<T>> {
    let k = data.k();
    let means = mean_rankings::<T>(data);
    let se = (c::<T>((k * (k + 1)) as f64) / c((6 * data.n()) as f64)).sqrt();
    let mut out = vec![vec![T::one(); k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let q = (means[i] - means[j]).abs() / se * c(std::f64::consts::SQRT_2);
            let p = T::one() - ptukey(q, k);
            out[i][j] = p;
            out[j][i] = p;
        }
    }
    out
}

/// Critical difference of mean ranks at level `alpha`.
pub fn critical_difference<T: Real>(alpha: T, k: usize, n: usize) -> T {
    let q = qtukey(T::one() - alpha, k);
    q * (c::<T>((k * (k + 1)) as f64) / c((12 * n) as f64)).sqrt()
}

// Special functions.

const EPS: f64 = 1e-15;
const MAX_ITER: usize = 500;

fn ln_gamma<T: Real>(x: T) -> T {
    // Lanczos, g = 7.
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < c(0.5) {
        let pi: T = c(std::f64::consts::PI);
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut a: T = c(COEF[0]);
    let t = x + c(7.5);
    for (i, &co) in COEF.iter().enumerate().skip(1) {
        a = a + c::<T>(co) / (x + c(i as f64));
    }
    c::<T>(0.5 * (2.0 * std::f64::consts::PI).ln()) + (x + c(0.5)) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p<T: Real>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x < a + T::one() {
        let mut sum = T::one() / a;
        let mut term = sum;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap = ap + T::one();
            term = term * x / ap;
            sum = sum + term;
            if term.abs() < sum.abs() * c(EPS) {
                break;
            }
        }
        sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        T::one() - gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn gamma_q<T: Real>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::one();
    }
    if x < a + T::one() {
        T::one() - gamma_p(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

// Lentz's continued fraction.
fn gamma_q_cf<T: Real>(a: T, x: T) -> T {
    let tiny: T = c(1e-300);
    let mut b = x + T::one() - a;
    let mut cc = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -c::<T>(i as f64) * (c::<T>(i as f64) - a);
        b = b + c(2.0);
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        cc = b + an / cc;
        if cc.abs() < tiny {
            cc = tiny;
        }
        d = T::one() / d;
        let delta = d * cc;
        h = h * delta;
        if (delta - T::one()).abs() < c(EPS) {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf<T: Real>(x: T, df: T) -> T {
    gamma_q(df / c(2.0), x / c(2.0))
}

/// Standard normal CDF.
pub fn normal_cdf<T: Real>(z: T) -> T {
    let half: T = c(0.5);
    let p = gamma_p(half, z * z * half);
    if z >= T::zero() {
        half + half * p
    } else {
        half - half * p
    }
}

/// CDF of the studentized range with `k` groups and infinite degrees of freedom:
/// `k ∫ φ(z) [Φ(z) - Φ(z - q)]^(k-1) dz`, by composite Simpson over [-8, 8].
pub fn ptukey<T: Real>(q: T, k: usize) -> T {
    if q <= T::zero() {
        return T::zero();
    }
    const STEPS: usize = 1_600;
    let (lo, hi) = (-8.0, 8.0);
    let h = (hi - lo) / STEPS as f64;
    let norm: T = c(1.0 / (2.0 * std::f64::consts::PI).sqrt());
    let f = |z: T| {
        let phi = norm * (-(z * z) / c(2.0)).exp();
        phi * (normal_cdf(z) - normal_cdf(z - q)).powi(k as i32 - 1)
    };
    let mut sum = f(c(lo)) + f(c(hi));
    for i in 1..STEPS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum = sum + c::<T>(w) * f(c(lo + i as f64 * h));
    }
    let v = c::<T>(k as f64) * sum * c(h / 3.0);
    v.min(T::one())
}

/// Inverse of [`ptukey`] by bisection.
pub fn qtukey<T: Real>(p: T, k: usize) -> T {
    let (mut lo, mut hi) = (T::zero(), c::<T>(20.0));
    for _ in 0..100 {
        let mid = (lo + hi) / c(2.0);
        if ptukey(mid, k) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / c(2.0)
}

// Reports.

/// One line per condition, best mean rank first.
pub fn format_means<T: Real>(data: &RankingDataset) -> String {
    let means = mean_rankings::<T>(data);
    let mut order: Vec<usize> = (0..data.k()).collect();
    order.sort_by(|&a, &b| means[a].partial_cmp(&means[b]).unwrap_or(std::cmp::Ordering::Equal));
    order.iter().map(|&j| format!("{}: {:.2}\n", data.labels[j], means[j])).collect()
}

pub fn format_friedman<T: Real>(data: &RankingDataset) -> String {
    let f = friedman_test::<T>(data);
    format!("Friedman chi2({}) = {:.2}, p = {:.3e}, N = {}, k = {}\n", f.df, f.chi_square, f.p_value, data.n(), data.k())
}

fn fmt_p<T: Real>(p: T) -> String {
    if p < c(0.01) {
        "**< 0.01**".to_string()
    } else {
        format!("{p:.2}")
    }
}

/// Markdown pairwise matrix: column heads carry the mean
/// rank, only the upper triangle is filled, and `< 0.01` is bold.
pub fn format_nemenyi<T: Real>(data: &RankingDataset) -> String {
    let means = mean_rankings::<T>(data);
    let p = nemenyi_posthoc::<T>(data);
    let head: Vec<String> = data.labels.iter().zip(&means).map(|(l, m)| format!("**{l} (μ={m:.2})**")).collect();
    let mut out = format!("| | {} |\n|{}\n", head.join(" | "), "---|".repeat(head.len() + 1));
    for i in 0..data.k() {
        let cells: Vec<String> = (0..data.k()).map(|j| if j > i { fmt_p(p[i][j]) } else { "-".to_string() }).collect();
        out += &format!("| **{}** | {} |\n", data.labels[i], cells.join(" | "));
    }
    out
}
