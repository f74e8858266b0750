//! Correlation between node features and the sensitive attribute.
//!
//! p-values are two-sided Student-t tests with `n - 2` degrees of freedom,
//! for both Pearson and Spearman coefficients. For a sample correlation `r`
//! the two-sided tail mass equals `I_{1-r^2}((n-2)/2, 1/2)`, which is what
//! [`correlation_p_value`] evaluates.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
}

impl std::fmt::Display for CorrelationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CorrelationMethod::Pearson => "pearson",
            CorrelationMethod::Spearman => "spearman",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    pub p_value: f64,
    /// Zero variance in either input; `r = 0` and `p_value = 1` by convention.
    pub degenerate: bool,
}

impl Correlation {
    const DEGENERATE: Correlation = Correlation {
        r: 0.0,
        p_value: 1.0,
        degenerate: true,
    };
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
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
    if x < 0.5 {
        // Reflection keeps the series in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (k, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + k as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=100_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of a Student-t statistic with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Two-sided p-value of a sample correlation `r` over `n` observations.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    let r2 = r * r;
    if r2 >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    regularized_incomplete_beta(df / 2.0, 0.5, 1.0 - r2).clamp(0.0, 1.0)
}

fn check_inputs(x: ArrayView1<'_, f64>, s: ArrayView1<'_, f64>) -> Result<()> {
    if x.len() != s.len() {
        return Err(Error::Validation(format!(
            "correlation inputs differ in length ({} vs {})",
            x.len(),
            s.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Validation(format!(
            "correlation needs at least 3 samples, got {}",
            x.len()
        )));
    }
    Ok(())
}

fn is_constant(x: ArrayView1<'_, f64>) -> bool {
    x.iter().all(|&v| v == x[0])
}

fn pearson_unchecked(x: ArrayView1<'_, f64>, s: ArrayView1<'_, f64>) -> Correlation {
    if is_constant(x) || is_constant(s) {
        return Correlation::DEGENERATE;
    }
    let n = x.len() as f64;
    let mx = x.sum() / n;
    let ms = s.sum() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(s.iter()) {
        let (da, db) = (a - mx, b - ms);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    Correlation {
        r,
        p_value: correlation_p_value(r, x.len()),
        degenerate: false,
    }
}

pub fn pearson(x: ArrayView1<'_, f64>, s: ArrayView1<'_, f64>) -> Result<Correlation> {
    check_inputs(x, s)?;
    Ok(pearson_unchecked(x, s))
}

/// 1-based ranks with ties replaced by their average rank.
pub fn mid_ranks(x: ArrayView1<'_, f64>) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

pub fn spearman(x: ArrayView1<'_, f64>, s: ArrayView1<'_, f64>) -> Result<Correlation> {
    check_inputs(x, s)?;
    let rx = ndarray::Array1::from(mid_ranks(x));
    let rs = ndarray::Array1::from(mid_ranks(s));
    Ok(pearson_unchecked(rx.view(), rs.view()))
}

pub fn correlate(
    method: CorrelationMethod,
    x: ArrayView1<'_, f64>,
    s: ArrayView1<'_, f64>,
) -> Result<Correlation> {
    match method {
        CorrelationMethod::Pearson => pearson(x, s),
        CorrelationMethod::Spearman => spearman(x, s),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub method: CorrelationMethod,
    pub r: Vec<f64>,
    pub p_uncorr: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub n_samples: usize,
}

impl CorrelationReport {
    pub fn n_features(&self) -> usize {
        self.r.len()
    }
}

pub fn correlation_report(
    x: &Array2<f64>,
    s: ArrayView1<'_, f64>,
    method: CorrelationMethod,
) -> Result<CorrelationReport> {
    check_len(x.nrows(), s.len())?;
    let cols: Vec<Correlation> = (0..x.ncols())
        .into_par_iter()
        .map(|c| correlate(method, x.column(c), s))
        .collect::<Result<_>>()?;
    Ok(CorrelationReport {
        method,
        r: cols.iter().map(|c| c.r).collect(),
        p_uncorr: cols.iter().map(|c| c.p_value).collect(),
        degenerate: cols.iter().map(|c| c.degenerate).collect(),
        n_samples: x.nrows(),
    })
}

fn check_len(n: usize, s: usize) -> Result<()> {
    if n != s || n < 3 {
        return Err(Error::Validation(format!(
            "correlation needs matching lengths of at least 3 (got {n} and {s})"
        )));
    }
    Ok(())
}

pub fn sensitive_as_f64(g: &Graph) -> ndarray::Array1<f64> {
    g.sensitive().iter().map(|&v| f64::from(v)).collect()
}

pub fn feature_correlation_report(g: &Graph, method: CorrelationMethod) -> Result<CorrelationReport> {
    correlation_report(g.features(), sensitive_as_f64(g).view(), method)
}

/// `ρ = Σ_i |r_i|` with Pearson coefficients; degenerate columns add 0.
pub fn total_correlation(x: &Array2<f64>, s: ArrayView1<'_, f64>) -> Result<f64> {
    let report = correlation_report(x, s, CorrelationMethod::Pearson)?;
    Ok(report.r.iter().map(|r| r.abs()).sum())
}
