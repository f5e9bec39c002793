//! Cross-brand statistics: Pearson correlation, two-sample t-tests and
//! boxplot summaries, plus the Student-t tail they rely on.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("a sample has zero variance")]
    ZeroVariance,
    #[error("|r| = 1, the correlation p-value is degenerate")]
    DegenerateCorrelation,
    #[error("degrees of freedom must be >= 1, got {0}")]
    InvalidDof(f64),
    #[error("need at least 2 brands, got {0}")]
    TooFewBrands(usize),
}

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 10_000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
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

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Upper tail P(T > t) of Student's t with `dof` degrees of freedom.
pub fn student_t_sf(t: f64, dof: f64) -> Result<f64, StatsError> {
    if !dof.is_finite() || dof < 1.0 {
        return Err(StatsError::InvalidDof(dof));
    }
    if t == 0.0 {
        return Ok(0.5);
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 0.0 } else { 1.0 });
    }
    let x = dof / (dof + t * t);
    let tail = 0.5 * regularized_incomplete_beta(x, dof / 2.0, 0.5);
    Ok(if t > 0.0 { tail } else { 1.0 - tail })
}

fn two_sided_p(t: f64, dof: f64) -> Result<f64, StatsError> {
    Ok((2.0 * student_t_sf(t.abs(), dof)?).min(1.0))
}

// ---------------------------------------------------------------------------
// Correlation and t-tests
// ---------------------------------------------------------------------------

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sum_sq_dev(v: &[f64], m: f64) -> f64 {
    v.iter().map(|x| (x - m) * (x - m)).sum()
}

/// Pearson correlation coefficient, clamped to `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewSamples { needed: 3, got: x.len() });
    }
    let (mx, my) = (mean(x), mean(y));
    let (sxx, syy) = (sum_sq_dev(x, mx), sum_sq_dev(y, my));
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value of a correlation `r` over `m` pairs, through
/// `t = r sqrt((m - 2) / (1 - r^2))` with `m - 2` degrees of freedom.
pub fn pearson_pvalue(r: f64, m: usize) -> Result<f64, StatsError> {
    if m < 3 {
        return Err(StatsError::TooFewSamples { needed: 3, got: m });
    }
    if r.abs() >= 1.0 {
        return Err(StatsError::DegenerateCorrelation);
    }
    let dof = (m - 2) as f64;
    let t = r * (dof / (1.0 - r * r)).sqrt();
    two_sided_p(t, dof)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestMode {
    /// Pooled-variance two-sample t with `2m - 2` degrees of freedom.
    #[default]
    Standard,
    /// `(mean_x - mean_y) / sqrt(Sxx * Syy / m)` with `Sxx`, `Syy` the
    /// summed squared deviations. Non-standard; statistic only.
    Literal,
}

impl fmt::Display for TTestMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TTestMode::Standard => f.write_str("standard"),
            TTestMode::Literal => f.write_str("literal"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub statistic: f64,
    pub dof: Option<f64>,
    pub p_value: Option<f64>,
    pub mode: TTestMode,
}

/// Two-sample t-test. The standard mode accepts unequal group sizes
/// (pooled variance, `n1 + n2 - 2` dof); the literal mode needs equal sizes.
pub fn ttest(x: &[f64], y: &[f64], mode: TTestMode) -> Result<TTest, StatsError> {
    if mode == TTestMode::Literal && x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let smallest = x.len().min(y.len());
    if smallest < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: smallest });
    }
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (mx, my) = (mean(x), mean(y));
    let (sxx, syy) = (sum_sq_dev(x, mx), sum_sq_dev(y, my));
    let diff = mx - my;
    let dof = nx + ny - 2.0;
    let denom = match mode {
        TTestMode::Standard => ((sxx + syy) / dof * (1.0 / nx + 1.0 / ny)).sqrt(),
        TTestMode::Literal => (sxx * syy / nx).sqrt(),
    };
    let statistic = if denom == 0.0 {
        if diff == 0.0 {
            return Err(StatsError::ZeroVariance);
        }
        diff.signum() * f64::INFINITY
    } else {
        diff / denom
    };
    Ok(match mode {
        TTestMode::Standard => TTest {
            statistic,
            dof: Some(dof),
            p_value: Some(two_sided_p(statistic, dof)?),
            mode,
        },
        TTestMode::Literal => TTest {
            statistic,
            dof: None,
            p_value: None,
            mode,
        },
    })
}

// ---------------------------------------------------------------------------
// Boxplots
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

/// Quantile of sorted data by linear interpolation between order
/// statistics (`h = (n - 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quartiles, 1.5 IQR fences, whiskers and outliers.
pub fn boxplot_summary(values: &[f64]) -> Result<BoxplotSummary, StatsError> {
    if values.len() < 4 {
        return Err(StatsError::TooFewSamples { needed: 4, got: values.len() });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = |v: &&f64| (lo_fence..=hi_fence).contains(*v);
    let lower_whisker = *sorted.iter().find(inside).expect("quartiles lie inside the fences");
    let upper_whisker = *sorted.iter().rev().find(inside).expect("quartiles lie inside the fences");
    let outliers = sorted.iter().copied().filter(|v| !inside(&v)).collect();
    Ok(BoxplotSummary {
        n: sorted.len(),
        q1,
        median,
        q3,
        iqr,
        lower_whisker,
        upper_whisker,
        outliers,
    })
}

// ---------------------------------------------------------------------------
// Study
// ---------------------------------------------------------------------------

/// Per-video measurements of one lens brand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrandSample {
    pub brand: String,
    /// Unfolding delay in seconds.
    pub unfolding: Vec<f64>,
    pub instability: Vec<f64>,
    /// Rotation in degrees.
    pub rotation: Vec<f64>,
}

impl BrandSample {
    pub fn len(&self) -> usize {
        self.unfolding.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unfolding.is_empty()
    }

    fn check(&self) -> Result<(), StatsError> {
        let m = self.unfolding.len();
        for other in [self.instability.len(), self.rotation.len()] {
            if other != m {
                return Err(StatsError::LengthMismatch(m, other));
            }
        }
        if m < 3 {
            return Err(StatsError::TooFewSamples { needed: 3, got: m });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Unfolding,
    Instability,
    Rotation,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Unfolding, Metric::Instability, Metric::Rotation];

    fn of(self, s: &BrandSample) -> &[f64] {
        match self {
            Metric::Unfolding => &s.unfolding,
            Metric::Instability => &s.instability,
            Metric::Rotation => &s.rotation,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Unfolding => "unfolding",
            Metric::Instability => "instability",
            Metric::Rotation => "rotation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrandBoxplots {
    pub brand: String,
    pub unfolding: Option<BoxplotSummary>,
    pub instability: Option<BoxplotSummary>,
    pub rotation: Option<BoxplotSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearsonEntry {
    pub brand: String,
    pub r: Option<f64>,
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Brand-by-brand matrix. The diagonal is `None` (not applicable);
/// off-diagonal `None` marks a test that could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTable {
    pub metric: Metric,
    pub brands: Vec<String>,
    /// Antisymmetric: `statistic[i][j] == -statistic[j][i]`.
    pub statistic: Vec<Vec<Option<f64>>>,
    /// Symmetric.
    pub p_value: Vec<Vec<Option<f64>>>,
}

impl PairTable {
    pub fn p(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.brands.iter().position(|x| x == a)?;
        let j = self.brands.iter().position(|x| x == b)?;
        self.p_value[i][j]
    }

    /// Plain-text rendering with `N/A` on the diagonal.
    pub fn render(&self) -> String {
        let width = self.brands.iter().map(String::len).max().unwrap_or(0).max(10) + 2;
        let mut out = format!("{:width$}", format!("{} p", self.metric));
        for b in &self.brands {
            let _ = write!(out, "{b:>width$}");
        }
        out.push('\n');
        for (i, a) in self.brands.iter().enumerate() {
            let _ = write!(out, "{a:width$}");
            for j in 0..self.brands.len() {
                let cell = match (i == j, self.p_value[i][j]) {
                    (true, _) => "N/A".to_string(),
                    (false, Some(p)) if p < 1e-3 => format!("{p:.2e}"),
                    (false, Some(p)) => format!("{p:.4}"),
                    (false, None) => "-".to_string(),
                };
                let _ = write!(out, "{cell:>width$}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub brands: Vec<String>,
    pub ttest_mode: TTestMode,
    pub quantile_method: String,
    pub pearson_pvalue_method: String,
    pub boxplots: Vec<BrandBoxplots>,
    pub pearson: Vec<PearsonEntry>,
    pub ttests: Vec<PairTable>,
}

impl StudyResult {
    pub fn ttest_table(&self, metric: Metric) -> &PairTable {
        self.ttests
            .iter()
            .find(|t| t.metric == metric)
            .expect("every metric has a table")
    }
}

fn pair_table(samples: &[&BrandSample], metric: Metric, mode: TTestMode) -> PairTable {
    let k = samples.len();
    let mut statistic = vec![vec![None; k]; k];
    let mut p_value = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            if let Ok(t) = ttest(metric.of(samples[i]), metric.of(samples[j]), mode) {
                statistic[i][j] = Some(t.statistic);
                statistic[j][i] = Some(-t.statistic);
                p_value[i][j] = t.p_value;
                p_value[j][i] = t.p_value;
            }
        }
    }
    PairTable {
        metric,
        brands: samples.iter().map(|s| s.brand.clone()).collect(),
        statistic,
        p_value,
    }
}

/// Boxplots per brand, unfolding/rotation correlation per brand and
/// pairwise t-tests for every metric. Brands are ordered by name.
pub fn run_study(samples: &[BrandSample], mode: TTestMode) -> Result<StudyResult, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewBrands(samples.len()));
    }
    for s in samples {
        s.check()?;
    }
    let mut ordered: Vec<&BrandSample> = samples.iter().collect();
    ordered.sort_by(|a, b| a.brand.cmp(&b.brand));

    let boxplots = ordered
        .iter()
        .map(|s| BrandBoxplots {
            brand: s.brand.clone(),
            unfolding: boxplot_summary(&s.unfolding).ok(),
            instability: boxplot_summary(&s.instability).ok(),
            rotation: boxplot_summary(&s.rotation).ok(),
        })
        .collect();

    let pearson_entries = ordered
        .iter()
        .map(|s| {
            let mut entry = PearsonEntry {
                brand: s.brand.clone(),
                r: None,
                p_value: None,
                note: None,
            };
            match pearson(&s.unfolding, &s.rotation) {
                Ok(r) => {
                    entry.r = Some(r);
                    match pearson_pvalue(r, s.len()) {
                        Ok(p) => entry.p_value = Some(p),
                        Err(StatsError::DegenerateCorrelation) => {
                            entry.p_value = Some(0.0);
                            entry.note = Some("|r| = 1".into());
                        }
                        Err(e) => entry.note = Some(e.to_string()),
                    }
                }
                Err(e) => entry.note = Some(e.to_string()),
            }
            entry
        })
        .collect();

    let ttests = [Metric::Rotation, Metric::Unfolding, Metric::Instability]
        .into_iter()
        .map(|metric| pair_table(&ordered, metric, mode))
        .collect();

    Ok(StudyResult {
        brands: ordered.iter().map(|s| s.brand.clone()).collect(),
        ttest_mode: mode,
        quantile_method: "linear interpolation of order statistics (type 7)".into(),
        pearson_pvalue_method: "two-sided t = r*sqrt((m-2)/(1-r^2)), m-2 dof".into(),
        boxplots,
        pearson: pearson_entries,
        ttests,
    })
}

/// Boxplot summaries as CSV, one row per brand and metric.
pub fn boxplots_csv(result: &StudyResult) -> String {
    let mut out =
        String::from("brand,metric,n,q1,median,q3,iqr,lower_whisker,upper_whisker,outliers\n");
    for b in &result.boxplots {
        for (metric, summary) in [
            (Metric::Unfolding, &b.unfolding),
            (Metric::Instability, &b.instability),
            (Metric::Rotation, &b.rotation),
        ] {
            let Some(s) = summary else { continue };
            let outliers: Vec<String> = s.outliers.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                b.brand,
                metric,
                s.n,
                s.q1,
                s.median,
                s.q3,
                s.iqr,
                s.lower_whisker,
                s.upper_whisker,
                outliers.join(";")
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(0.1) - 2.252_712_651_734_206).abs() < 1e-13);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x; I_x(a, 1) = x^a.
        for &x in &[0.1, 0.5, 0.9] {
            assert!((regularized_incomplete_beta(x, 1.0, 1.0) - x).abs() < 1e-14);
            assert!((regularized_incomplete_beta(x, 3.0, 1.0) - x.powi(3)).abs() < 1e-14);
        }
        assert_eq!(regularized_incomplete_beta(0.0, 2.0, 3.0), 0.0);
        assert_eq!(regularized_incomplete_beta(1.0, 2.0, 3.0), 1.0);
    }

    #[test]
    fn student_t_examples() {
        for dof in [1.0, 2.0, 7.5, 100.0] {
            assert_eq!(student_t_sf(0.0, dof).unwrap(), 0.5);
        }
        assert!((student_t_sf(1.0, 1.0).unwrap() - 0.25).abs() < 1e-12);
        // Cauchy: sf(t) = 1/2 - atan(t)/pi.
        for &t in &[-3.0, 0.3, 2.0, 40.0] {
            let exact = 0.5 - f64::atan(t) / PI;
            assert!((student_t_sf(t, 1.0).unwrap() - exact).abs() < 1e-12);
        }
        // dof = 2: sf(t) = 1/2 - t / (2 sqrt(t^2 + 2)).
        for &t in &[-1.5, 0.7, 5.0] {
            let exact = 0.5 - t / (2.0 * (t * t + 2.0f64).sqrt());
            assert!((student_t_sf(t, 2.0).unwrap() - exact).abs() < 1e-12);
        }
        assert!((student_t_sf(1.96, 200.0).unwrap() - 0.025).abs() < 2e-3);
        assert_eq!(student_t_sf(1.0, 0.5), Err(StatsError::InvalidDof(0.5)));
    }

    #[test]
    fn student_t_symmetry_and_monotonicity() {
        let mut prev = 1.0;
        for i in -50..=50 {
            let t = i as f64 * 0.37;
            let sf = student_t_sf(t, 9.0).unwrap();
            assert!(sf <= prev);
            assert!((sf + student_t_sf(-t, 9.0).unwrap() - 1.0).abs() < 1e-14);
            prev = sf;
        }
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::ZeroVariance));
        assert_eq!(pearson(&[1.0, 2.0], &[1.0, 2.0, 3.0]), Err(StatsError::LengthMismatch(2, 3)));
    }

    #[test]
    fn pearson_pvalue_examples() {
        assert_eq!(pearson_pvalue(0.0, 10).unwrap(), 1.0);
        assert_eq!(pearson_pvalue(0.0, 94).unwrap(), 1.0);
        assert_eq!(pearson_pvalue(1.0, 10), Err(StatsError::DegenerateCorrelation));
        let p = pearson_pvalue(0.3592, 94).unwrap();
        assert!((p - 0.0004).abs() < 0.5e-4, "p = {p}");
    }

    #[test]
    fn ttest_examples() {
        let x = [1.0, 2.0, 3.0];
        let t = ttest(&x, &x, TTestMode::Standard).unwrap();
        assert_eq!((t.statistic, t.p_value), (0.0, Some(1.0)));
        let t = ttest(&x, &[4.0, 5.0, 6.0], TTestMode::Standard).unwrap();
        assert!((t.statistic + 3.674_234_614_174_767).abs() < 1e-12);
        assert_eq!(t.dof, Some(4.0));
        assert!((t.p_value.unwrap() - 0.021_311_641_128_756_4).abs() < 1e-6);
        assert_eq!(
            ttest(&[2.0, 2.0], &[2.0, 2.0], TTestMode::Standard),
            Err(StatsError::ZeroVariance)
        );
        let t = ttest(&[2.0, 2.0], &[1.0, 1.0], TTestMode::Standard).unwrap();
        assert_eq!((t.statistic, t.p_value), (f64::INFINITY, Some(0.0)));
    }

    #[test]
    fn literal_ttest_matches_formula() {
        let (x, y) = ([1.0, 2.0, 3.0, 6.0], [2.0, 2.5, 5.0, 9.0]);
        let t = ttest(&x, &y, TTestMode::Literal).unwrap();
        // means 3 and 4.625; Sxx = 14, Syy = 30.6875.
        let expected = (3.0 - 4.625) / (14.0f64 * 30.6875 / 4.0).sqrt();
        assert!((t.statistic - expected).abs() < 1e-12);
        assert_eq!(t.p_value, None);
        assert_eq!(
            ttest(&x, &y[..3], TTestMode::Literal),
            Err(StatsError::LengthMismatch(4, 3))
        );
    }

    #[test]
    fn pooled_ttest_unequal_sizes() {
        // means 2 and 6; Sxx = 2, Syy = 8; sp^2 = 10 / 4; se^2 = sp^2 * (1/3 + 1/3).
        let t = ttest(&[1.0, 2.0, 3.0], &[4.0, 6.0, 8.0], TTestMode::Standard).unwrap();
        assert!((t.statistic + 4.0 / (2.5f64 * 2.0 / 3.0).sqrt()).abs() < 1e-12);
        let t = ttest(&[1.0, 2.0, 3.0], &[4.0, 8.0], TTestMode::Standard).unwrap();
        // means 2 and 6; Sxx = 2, Syy = 8; sp^2 = 10 / 3; se^2 = sp^2 * (1/3 + 1/2).
        let expected = -4.0 / (10.0f64 / 3.0 * (1.0 / 3.0 + 0.5)).sqrt();
        assert!((t.statistic - expected).abs() < 1e-12);
        assert_eq!(t.dof, Some(3.0));
    }

    #[test]
    fn boxplot_examples() {
        let b = boxplot_summary(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3, b.iqr), (2.0, 3.0, 4.0, 2.0));
        assert_eq!((b.lower_whisker, b.upper_whisker), (1.0, 5.0));
        assert!(b.outliers.is_empty());
        let b = boxplot_summary(&[7.0; 6]).unwrap();
        assert_eq!((b.iqr, b.lower_whisker, b.upper_whisker), (0.0, 7.0, 7.0));
        assert!(b.outliers.is_empty());
        let b = boxplot_summary(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!(b.upper_whisker, 4.0);
        assert!(boxplot_summary(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn boxplot_interpolates() {
        let b = boxplot_summary(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (1.75, 2.5, 3.25));
    }

    fn brand(name: &str, rot: &[f64]) -> BrandSample {
        BrandSample {
            brand: name.into(),
            unfolding: (0..rot.len()).map(|i| i as f64).collect(),
            instability: rot.iter().map(|r| r * 2.0 + 1.0).collect(),
            rotation: rot.to_vec(),
        }
    }

    #[test]
    fn study_tables_are_symmetric() {
        let samples = vec![
            brand("D", &[1.0, 2.0, 4.0, 3.0, 5.0]),
            brand("A", &[2.0, 3.0, 1.0, 5.0, 4.0]),
            brand("C", &[9.0, 8.0, 7.0, 9.5, 8.5]),
            brand("B", &[0.5, 0.7, 0.2, 0.9, 1.0]),
        ];
        let result = run_study(&samples, TTestMode::Standard).unwrap();
        assert_eq!(result.brands, vec!["A", "B", "C", "D"]);
        for table in &result.ttests {
            for i in 0..4 {
                assert_eq!(table.p_value[i][i], None);
                assert_eq!(table.statistic[i][i], None);
                for j in 0..4 {
                    if i != j {
                        assert_eq!(table.p_value[i][j], table.p_value[j][i]);
                        assert_eq!(table.statistic[i][j].map(|t| -t), table.statistic[j][i]);
                    }
                }
            }
        }
        let rot = result.ttest_table(Metric::Rotation);
        assert!(rot.p("C", "B").unwrap() < 1e-6);
        assert!(rot.render().contains("N/A"));
        let csv = boxplots_csv(&result);
        assert_eq!(csv.lines().count(), 1 + 4 * 3);
        assert_eq!(result.pearson.len(), 4);
    }

    #[test]
    fn study_needs_two_brands() {
        assert_eq!(
            run_study(&[brand("A", &[1.0, 2.0, 3.0])], TTestMode::Standard),
            Err(StatsError::TooFewBrands(1))
        );
    }
}
