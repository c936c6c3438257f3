//! Run summaries, two-sample t-tests and comparison tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean and sample standard deviation of repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub metric: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample (n - 1) standard deviation; 0 for a single run.
    pub std: f64,
    pub n_runs: usize,
}

impl RunSummary {
    /// True when the spread is undefined because there was only one run.
    pub fn single_run(&self) -> bool {
        self.n_runs == 1
    }
}

pub fn aggregate_runs(values: &[f64], metric: impl Into<String>) -> Result<RunSummary> {
    if values.is_empty() {
        return Err(Error::Empty("no run values to aggregate"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(RunSummary {
        metric: metric.into(),
        values: values.to_vec(),
        mean,
        std,
        n_runs: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TTestVariant {
    /// Equal-variance test with `n_a + n_b - 2` degrees of freedom.
    #[default]
    Pooled,
    /// Unequal variances, Welch-Satterthwaite degrees of freedom.
    Welch,
}

impl std::str::FromStr for TTestVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(TTestVariant::Pooled),
            "welch" => Ok(TTestVariant::Welch),
            other => Err(Error::Config(format!(
                "unknown t-test variant `{other}` (expected pooled or welch)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub variant: TTestVariant,
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Two-sample t-test of equal means.
pub fn t_test(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<TTestResult> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(Error::TooFewSamples {
                need: 2,
                have: s.len(),
            });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (se2, df) = match variant {
        TTestVariant::Pooled => {
            let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
            (sp2 * (1.0 / na + 1.0 / nb), na + nb - 2.0)
        }
        TTestVariant::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let df = if qa + qb > 0.0 {
                (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0))
            } else {
                na + nb - 2.0
            };
            (qa + qb, df)
        }
    };
    let diff = ma - mb;
    let t = if diff == 0.0 {
        0.0
    } else if se2 == 0.0 {
        diff.signum() * f64::INFINITY
    } else {
        diff / se2.sqrt()
    };
    Ok(TTestResult {
        variant,
        t,
        df,
        p: student_t_two_sided_p(t, df),
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Student-t distribution function.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * student_t_two_sided_p(t, df);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    #[allow(clippy::excessive_precision)]
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut s = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        s += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + s.ln()
}

/// `I_x(a, b)` by Lentz's continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_fraction(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_fraction(1.0 - x, b, a) / b
    }
}

fn beta_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        for num in [
            m * (b - m) * x / ((a + m2 - 1.0) * (a + m2)),
            -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0)),
        ] {
            d = 1.0 + num * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + num / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            h *= d * c;
        }
        if (d * c - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n_runs: usize,
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonTable {
    pub rows: Vec<TableRow>,
}

/// Rows for searched models followed by baselines, then stably sorted by mean
/// (best first).
pub fn comparison_table(
    summaries: &[(String, RunSummary)],
    baselines: &[(String, RunSummary)],
    higher_is_better: bool,
) -> ComparisonTable {
    let row = |(name, s): &(String, RunSummary), baseline: bool| TableRow {
        model: name.clone(),
        metric: s.metric.clone(),
        mean: s.mean,
        std: s.std,
        n_runs: s.n_runs,
        baseline,
    };
    let mut rows: Vec<TableRow> = summaries
        .iter()
        .map(|s| row(s, false))
        .chain(baselines.iter().map(|s| row(s, true)))
        .collect();
    rows.sort_by(|a, b| {
        let o = a.mean.total_cmp(&b.mean);
        if higher_is_better {
            o.reverse()
        } else {
            o
        }
    });
    ComparisonTable { rows }
}

impl ComparisonTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
        }
        if self.rows.is_empty() {
            w.write_record(["model", "metric", "mean", "std", "n_runs", "baseline"])
                .map_err(|e| Error::Data(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r
            .deserialize()
            .enumerate()
            .map(|(i, row)| {
                row.map_err(|e| Error::Cell {
                    row: i + 2,
                    column: "*".into(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<TableRow>>>()?;
        Ok(Self { rows })
    }

    /// Fixed-width text rendering.
    pub fn to_text(&self) -> String {
        let cells: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                let name = if r.baseline {
                    format!("{} (baseline)", r.model)
                } else {
                    r.model.clone()
                };
                [
                    name,
                    format!("{:.4}", r.mean),
                    format!("{:.4}", r.std),
                    r.n_runs.to_string(),
                ]
            })
            .collect();
        let metric = self.rows.first().map_or("mean", |r| r.metric.as_str());
        let header = [
            "model".to_string(),
            metric.to_string(),
            "std".into(),
            "runs".into(),
        ];
        let mut width = [0usize; 4];
        for row in std::iter::once(&header).chain(&cells) {
            for (w, c) in width.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        for row in std::iter::once(&header).chain(&cells) {
            let line = format!(
                "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
                row[0],
                row[1],
                row[2],
                row[3],
                w0 = width[0],
                w1 = width[1],
                w2 = width[2],
                w3 = width[3]
            );
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}
