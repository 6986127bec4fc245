use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorrelationKind {
    #[serde(rename = "pearson_r")]
    Pearson,
    #[serde(rename = "spearman_rho")]
    Spearman,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub kind: CorrelationKind,
    pub value: f64,
    /// Two-sided.
    pub p_value: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorrelationError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{0} complete pairs; at least 3 are required")]
    TooFew(usize),
    #[error("zero variance; correlation is undefined")]
    ZeroVariance,
}

/// `*` below 0.05, `**` below 0.01. No multiple-testing correction.
pub fn significance_stars(p: Option<f64>) -> &'static str {
    match p {
        Some(p) if p < 0.01 => "**",
        Some(p) if p < 0.05 => "*",
        _ => "",
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pearson_r(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn t_test_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

fn check(x: &[f64], y: &[f64]) -> Result<(), CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(CorrelationError::TooFew(x.len()));
    }
    Ok(())
}

/// Sample Pearson r with a t-approximation p-value on n-2 degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, CorrelationError> {
    check(x, y)?;
    let r = pearson_r(x, y).ok_or(CorrelationError::ZeroVariance)?;
    Ok(CorrelationResult {
        kind: CorrelationKind::Pearson,
        value: r,
        p_value: Some(t_test_p(r, x.len())),
        n: x.len(),
    })
}

/// Fractional ranks, 1-based; ties take the mean of their positions.
pub(crate) fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rho without the sample-size precondition; `None` on zero rank
/// variance.
pub(crate) fn rank_rho(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson_r(&average_ranks(x), &average_ranks(y))
}

const EXACT_MAX_N: usize = 8;

/// Share of permutations of `ry` whose |rho| reaches the observed |rho|.
fn permutation_p(rx: &[f64], ry: &[f64], observed: f64) -> f64 {
    let target = observed.abs() - 1e-12;
    let mut perm = ry.to_vec();
    let n = perm.len();
    let mut c = vec![0usize; n];
    let mut total = 1u64;
    let mut hits = u64::from(pearson_r(rx, &perm).is_some_and(|r| r.abs() >= target));
    // Heap's algorithm.
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            total += 1;
            hits += u64::from(pearson_r(rx, &perm).is_some_and(|r| r.abs() >= target));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

/// Pearson r of average ranks. The p-value is exact by permutation for
/// n <= 8 and a t-approximation otherwise.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult, CorrelationError> {
    check(x, y)?;
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let rho = pearson_r(&rx, &ry).ok_or(CorrelationError::ZeroVariance)?;
    let p = if x.len() <= EXACT_MAX_N {
        permutation_p(&rx, &ry, rho)
    } else {
        t_test_p(rho, x.len())
    };
    Ok(CorrelationResult {
        kind: CorrelationKind::Spearman,
        value: rho,
        p_value: Some(p),
        n: x.len(),
    })
}

/// Correlation over pairwise-complete observations.
pub fn correlate(
    kind: CorrelationKind,
    x: &[Option<f64>],
    y: &[Option<f64>],
) -> Result<CorrelationResult, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch(x.len(), y.len()));
    }
    let (a, b): (Vec<f64>, Vec<f64>) = x.iter().zip(y).filter_map(|(a, b)| Some(((*a)?, (*b)?))).unzip();
    match kind {
        CorrelationKind::Pearson => pearson(&a, &b),
        CorrelationKind::Spearman => spearman(&a, &b),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// `cells[i][j]` is `None` where the correlation is undefined.
    pub cells: Vec<Vec<Option<CorrelationResult>>>,
}

/// Symmetric matrix of pairwise correlations. Columns are aligned by index.
/// The diagonal is 1 with no p-value.
pub fn correlation_matrix(columns: &[(String, Vec<Option<f64>>)], kind: CorrelationKind) -> CorrelationMatrix {
    let k = columns.len();
    let mut cells = vec![vec![None; k]; k];
    for i in 0..k {
        let defined = columns[i].1.iter().flatten().count();
        cells[i][i] = Some(CorrelationResult {
            kind,
            value: 1.0,
            p_value: None,
            n: defined,
        });
        for j in i + 1..k {
            let cell = correlate(kind, &columns[i].1, &columns[j].1).ok();
            cells[i][j] = cell;
            cells[j][i] = cell;
        }
    }
    CorrelationMatrix {
        names: columns.iter().map(|(n, _)| n.clone()).collect(),
        cells,
    }
}

/// Sorted distinct values with the fraction of `values` at or below each.
pub fn ecdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = frac,
            _ => out.push((*x, frac)),
        }
    }
    out
}

/// Fraction of `values` at or below `q`.
pub fn ecdf_at(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v <= q).count() as f64 / values.len() as f64
}
