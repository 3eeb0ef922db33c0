//! Contingency-table tests, rank tests and agreement statistics.
//!
//! Special functions are implemented here rather than pulled from a
//! statistics crate so that every number in a report is pinned to one
//! well-defined routine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("contingency table needs at least 2 rows and 2 columns, got {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },
    #[error("rows have inconsistent widths")]
    Ragged,
    #[error("{axis} `{label}` has a zero total")]
    ZeroMargin { axis: &'static str, label: String },
    #[error("sample `{0}` is empty")]
    EmptySample(&'static str),
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("kappa undefined: expected agreement is 1 (degenerate marginals: rater A {a_pos}/{total} positive, rater B {b_pos}/{total} positive)")]
    DegenerateMarginals { a_pos: u64, b_pos: u64, total: u64 },
    #[error("confusion matrix is empty")]
    EmptyConfusion,
}

/// Observed counts, one row per group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    /// Positive/Negative table from `(label, positives, negatives)` rows.
    pub fn binary<S: Into<String>>(rows: impl IntoIterator<Item = (S, u64, u64)>) -> Self {
        let mut labels = Vec::new();
        let mut counts = Vec::new();
        for (label, pos, neg) in rows {
            labels.push(label.into());
            counts.push(vec![pos, neg]);
        }
        ContingencyTable {
            rows: labels,
            columns: vec!["Positive".into(), "Negative".into()],
            counts,
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        let rows = (0..counts.len()).map(|i| format!("row{}", i + 1)).collect();
        let cols = counts.first().map_or(0, Vec::len);
        ContingencyTable {
            rows,
            columns: (0..cols).map(|j| format!("col{}", j + 1)).collect(),
            counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn validate(&self) -> Result<(Vec<u64>, Vec<u64>), StatsError> {
        let r = self.counts.len();
        let c = self.counts.first().map_or(0, Vec::len);
        if self.counts.iter().any(|row| row.len() != c) {
            return Err(StatsError::Ragged);
        }
        if r < 2 || c < 2 {
            return Err(StatsError::TooSmall { rows: r, cols: c });
        }
        let row_totals: Vec<u64> = self.counts.iter().map(|row| row.iter().sum()).collect();
        let col_totals: Vec<u64> = (0..c).map(|j| self.counts.iter().map(|row| row[j]).sum()).collect();
        if let Some(i) = row_totals.iter().position(|&t| t == 0) {
            return Err(StatsError::ZeroMargin {
                axis: "row",
                label: self.rows.get(i).cloned().unwrap_or_else(|| i.to_string()),
            });
        }
        if let Some(j) = col_totals.iter().position(|&t| t == 0) {
            return Err(StatsError::ZeroMargin {
                axis: "column",
                label: self.columns.get(j).cloned().unwrap_or_else(|| j.to_string()),
            });
        }
        Ok((row_totals, col_totals))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectSizeKind {
    CramersV,
    RankBiserial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub kind: EffectSizeKind,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub statistic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees_of_freedom: Option<usize>,
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect_size: Option<EffectSize>,
    pub n: u64,
}

/// Pearson's χ² without continuity correction, with Cramér's V attached.
pub fn chi_square(table: &ContingencyTable) -> Result<StatResult, StatsError> {
    let (row_totals, col_totals) = table.validate()?;
    let n = table.total() as f64;
    let mut stat = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &observed) in row.iter().enumerate() {
            let expected = row_totals[i] as f64 * col_totals[j] as f64 / n;
            let d = observed as f64 - expected;
            stat += d * d / expected;
        }
    }
    let r = row_totals.len();
    let c = col_totals.len();
    let df = (r - 1) * (c - 1);
    let v = (stat / (n * (r.min(c) - 1) as f64)).sqrt();
    Ok(StatResult {
        statistic: stat,
        degrees_of_freedom: Some(df),
        p_value: chi_square_sf(stat, df as f64),
        effect_size: Some(EffectSize {
            kind: EffectSizeKind::CramersV,
            value: v,
        }),
        n: table.total(),
    })
}

pub fn cramers_v(table: &ContingencyTable) -> Result<f64, StatsError> {
    let res = chi_square(table)?;
    Ok(res.effect_size.map(|e| e.value).unwrap_or(0.0))
}

/// Two-sided Mann–Whitney U with the min-U convention and midranks.
///
/// When `n_a + n_b <= 12` the p-value is exact: the share of all
/// `C(n, n_a)` assignments of the pooled midranks to group A whose min-U is
/// at most the observed one. Larger samples use the normal approximation
/// with tie and continuity corrections.
pub fn mann_whitney_u(sample_a: &[f64], sample_b: &[f64]) -> Result<StatResult, StatsError> {
    if sample_a.is_empty() {
        return Err(StatsError::EmptySample("a"));
    }
    if sample_b.is_empty() {
        return Err(StatsError::EmptySample("b"));
    }
    if sample_a.iter().chain(sample_b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let na = sample_a.len();
    let nb = sample_b.len();
    let n = na + nb;
    let pooled: Vec<f64> = sample_a.iter().chain(sample_b).copied().collect();
    let (ranks, tie_sizes) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let u_a = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let nanb = (na * nb) as f64;
    let u = u_a.min(nanb - u_a);

    let p = if n <= EXACT_LIMIT {
        exact_p(&ranks, na, u)
    } else {
        let mean = nanb / 2.0;
        let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum();
        let nf = n as f64;
        let var = nanb / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
        if var <= 0.0 {
            1.0
        } else {
            let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
            (2.0 * normal_sf(z)).min(1.0)
        }
    };
    Ok(StatResult {
        statistic: u,
        degrees_of_freedom: None,
        p_value: p,
        effect_size: Some(EffectSize {
            kind: EffectSizeKind::RankBiserial,
            value: 1.0 - 2.0 * u / nanb,
        }),
        n: n as u64,
    })
}

pub const EXACT_LIMIT: usize = 12;

/// Midranks (1-based) and the sizes of tie groups.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

fn exact_p(ranks: &[f64], na: usize, u_obs: f64) -> f64 {
    let n = ranks.len();
    let nanb = (na * (n - na)) as f64;
    let offset = (na * (na + 1)) as f64 / 2.0;
    let mut hits = 0u64;
    let mut total = 0u64;
    let mut chosen = Vec::with_capacity(na);
    fn recurse(
        ranks: &[f64],
        start: usize,
        need: usize,
        sum: f64,
        chosen: &mut Vec<usize>,
        visit: &mut dyn FnMut(f64),
    ) {
        if need == 0 {
            visit(sum);
            return;
        }
        for i in start..=ranks.len() - need {
            chosen.push(i);
            recurse(ranks, i + 1, need - 1, sum + ranks[i], chosen, visit);
            chosen.pop();
        }
    }
    recurse(ranks, 0, na, 0.0, &mut chosen, &mut |rank_sum| {
        let u = rank_sum - offset;
        let u_min = u.min(nanb - u);
        total += 1;
        if u_min <= u_obs + 1e-9 {
            hits += 1;
        }
    });
    hits as f64 / total as f64
}

/// 2×2 agreement table: rows are rater A (Positive, Negative), columns rater B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub both_positive: u64,
    pub a_positive_b_negative: u64,
    pub a_negative_b_positive: u64,
    pub both_negative: u64,
}

impl Confusion {
    pub fn new(matrix: [[u64; 2]; 2]) -> Self {
        Confusion {
            both_positive: matrix[0][0],
            a_positive_b_negative: matrix[0][1],
            a_negative_b_positive: matrix[1][0],
            both_negative: matrix[1][1],
        }
    }

    pub fn matrix(&self) -> [[u64; 2]; 2] {
        [
            [self.both_positive, self.a_positive_b_negative],
            [self.a_negative_b_positive, self.both_negative],
        ]
    }

    pub fn total(&self) -> u64 {
        self.both_positive + self.a_positive_b_negative + self.a_negative_b_positive + self.both_negative
    }

    pub fn agreements(&self) -> u64 {
        self.both_positive + self.both_negative
    }

    pub fn percent_agreement(&self) -> f64 {
        self.agreements() as f64 / self.total() as f64
    }

    pub fn swapped(&self) -> Self {
        Confusion {
            both_positive: self.both_positive,
            a_positive_b_negative: self.a_negative_b_positive,
            a_negative_b_positive: self.a_positive_b_negative,
            both_negative: self.both_negative,
        }
    }
}

/// Cohen's κ = (p_o − p_e) / (1 − p_e) with marginal-product p_e.
pub fn cohens_kappa(confusion: &Confusion) -> Result<f64, StatsError> {
    let total = confusion.total();
    if total == 0 {
        return Err(StatsError::EmptyConfusion);
    }
    let n = total as f64;
    let a_pos = confusion.both_positive + confusion.a_positive_b_negative;
    let b_pos = confusion.both_positive + confusion.a_negative_b_positive;
    let pa = a_pos as f64 / n;
    let pb = b_pos as f64 / n;
    let p_o = confusion.agreements() as f64 / n;
    let p_e = pa * pb + (1.0 - pa) * (1.0 - pb);
    // p_e reaches 1 only when both raters use a single, identical class.
    let degenerate = (a_pos == 0 || a_pos == total) && a_pos == b_pos;
    if degenerate || 1.0 - p_e <= f64::EPSILON {
        return Err(StatsError::DegenerateMarginals { a_pos, b_pos, total });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

// ---------------------------------------------------------------------------
// Special functions

const GAMMA_EPS: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 10_000;

/// ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
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
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Survival function of the χ² distribution.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    gamma_q(df / 2.0, x / 2.0).clamp(0.0, 1.0)
}

/// erfc(x) via Q(1/2, x²).
pub fn erfc(x: f64) -> f64 {
    if x >= 0.0 {
        gamma_q(0.5, x * x)
    } else {
        2.0 - gamma_q(0.5, x * x)
    }
}

/// Upper tail of the standard normal.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}
