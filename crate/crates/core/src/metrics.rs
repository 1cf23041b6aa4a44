//! Success rate, goal condition and procedure deviation, plus table output.

use std::fmt::Write as _;

use thiserror::Error;

/// Rendering of an undefined cell.
pub const ABSENT: &str = "−";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("metric is undefined on an empty outcome list")]
    Empty,
    #[error("task {task}: {reason}")]
    InvalidOutcome { task: String, reason: String },
    #[error("lambda must be a non-negative number, got {0}")]
    Lambda(f64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskOutcome {
    pub task_id: String,
    pub subtasks_total: usize,
    pub subtasks_achieved: usize,
    pub success: bool,
    pub demo_sequence: Vec<String>,
    pub adapted_sequence: Vec<String>,
}

impl TaskOutcome {
    pub fn new(
        task_id: impl Into<String>,
        subtasks_total: usize,
        subtasks_achieved: usize,
        success: bool,
        demo_sequence: Vec<String>,
        adapted_sequence: Vec<String>,
    ) -> Result<Self, MetricsError> {
        let o = TaskOutcome {
            task_id: task_id.into(),
            subtasks_total,
            subtasks_achieved,
            success,
            demo_sequence,
            adapted_sequence,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        let bad = |reason: &str| {
            Err(MetricsError::InvalidOutcome {
                task: self.task_id.clone(),
                reason: reason.into(),
            })
        };
        if self.subtasks_total == 0 {
            return bad("a task needs at least one subtask");
        }
        if self.subtasks_achieved > self.subtasks_total {
            return bad("more subtasks achieved than exist");
        }
        if self.success && self.subtasks_achieved != self.subtasks_total {
            return bad("a successful task must achieve every subtask");
        }
        Ok(())
    }

    /// Length-normalized edit distance between the two sequences.
    pub fn deviation(&self) -> f64 {
        let longest = self.demo_sequence.len().max(self.adapted_sequence.len());
        if longest == 0 {
            return 0.0;
        }
        edit_distance(&self.adapted_sequence, &self.demo_sequence) as f64 / longest as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    lambda: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { lambda: 0.0 }
    }
}

impl MetricsConfig {
    pub fn new(lambda: f64) -> Result<Self, MetricsError> {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(MetricsError::Lambda(lambda));
        }
        Ok(MetricsConfig { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

fn checked(outcomes: &[TaskOutcome]) -> Result<(), MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::Empty);
    }
    outcomes.iter().try_for_each(TaskOutcome::validate)
}

pub fn success_rate(outcomes: &[TaskOutcome]) -> Result<f64, MetricsError> {
    checked(outcomes)?;
    Ok(outcomes.iter().filter(|o| o.success).count() as f64 / outcomes.len() as f64)
}

pub fn goal_condition(outcomes: &[TaskOutcome]) -> Result<f64, MetricsError> {
    checked(outcomes)?;
    let sum: f64 = outcomes
        .iter()
        .map(|o| o.subtasks_achieved as f64 / o.subtasks_total as f64)
        .sum();
    Ok(sum / outcomes.len() as f64)
}

/// Levenshtein distance with unit costs over arbitrary sequences.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let a: Vec<&T> = a.iter().collect();
    let b: Vec<&T> = b.iter().collect();
    strsim::generic_levenshtein(&a, &b)
}

/// Mean deviation over successful tasks; `None` when no task succeeded.
pub fn procedure_deviation(outcomes: &[TaskOutcome]) -> Result<Option<f64>, MetricsError> {
    checked(outcomes)?;
    let devs: Vec<f64> = outcomes.iter().filter(|o| o.success).map(TaskOutcome::deviation).collect();
    if devs.is_empty() {
        return Ok(None);
    }
    Ok(Some(devs.iter().sum::<f64>() / devs.len() as f64))
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Estimate> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Some(Estimate { mean, se, n })
    }

    fn pct(&self) -> String {
        format!("{:.2} ± {:.2}", self.mean * 100.0, self.se * 100.0)
    }
}

/// Aggregates of one (factor, complexity) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub factor: String,
    pub complexity: String,
    pub tasks: usize,
    pub sr: Estimate,
    pub gc: Estimate,
    pub pd: Option<Estimate>,
    /// `SR - lambda * PD`; absent with PD.
    pub composite: Option<f64>,
}

impl CellSummary {
    pub fn from_outcomes(
        factor: impl Into<String>,
        complexity: impl Into<String>,
        outcomes: &[TaskOutcome],
        config: MetricsConfig,
    ) -> Result<Self, MetricsError> {
        checked(outcomes)?;
        let sr: Vec<f64> = outcomes.iter().map(|o| if o.success { 1.0 } else { 0.0 }).collect();
        let gc: Vec<f64> = outcomes
            .iter()
            .map(|o| o.subtasks_achieved as f64 / o.subtasks_total as f64)
            .collect();
        let pd: Vec<f64> = outcomes.iter().filter(|o| o.success).map(TaskOutcome::deviation).collect();
        let sr = Estimate::of(&sr).expect("non-empty");
        let pd = Estimate::of(&pd);
        Ok(CellSummary {
            factor: factor.into(),
            complexity: complexity.into(),
            tasks: outcomes.len(),
            composite: pd.map(|p| sr.mean - config.lambda * p.mean),
            sr,
            gc: Estimate::of(&gc).expect("non-empty"),
            pd,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTable {
    pub cells: Vec<CellSummary>,
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map(f).unwrap_or_else(|| ABSENT.to_string())
}

impl MetricsTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "factor,complexity,tasks,sr,sr_se,sr_pct,gc,gc_se,gc_pct,pd,pd_se,pd_pct,sr_minus_lambda_pd\n",
        );
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.2},{:.6},{:.6},{:.2},{},{},{},{}",
                c.factor,
                c.complexity,
                c.tasks,
                c.sr.mean,
                c.sr.se,
                c.sr.mean * 100.0,
                c.gc.mean,
                c.gc.se,
                c.gc.mean * 100.0,
                opt(c.pd.map(|p| p.mean), |v| format!("{v:.6}")),
                opt(c.pd.map(|p| p.se), |v| format!("{v:.6}")),
                opt(c.pd.map(|p| p.mean), |v| format!("{:.2}", v * 100.0)),
                opt(c.composite, |v| format!("{v:.6}")),
            );
        }
        out
    }

    /// Aligned plain text with percentages as `mean ± se`.
    pub fn to_text(&self) -> String {
        let header = ["Factor", "Complexity", "N", "SR", "GC", "PD", "SR-λ·PD"];
        let rows: Vec<[String; 7]> = self
            .cells
            .iter()
            .map(|c| {
                [
                    c.factor.clone(),
                    c.complexity.clone(),
                    c.tasks.to_string(),
                    c.sr.pct(),
                    c.gc.pct(),
                    c.pd.map_or_else(|| ABSENT.to_string(), |p| p.pct()),
                    opt(c.composite, |v| format!("{:.2}", v * 100.0)),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
        for r in &rows {
            for (w, cell) in widths.iter_mut().zip(r) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                let pad = w - cell.chars().count();
                if i < 2 {
                    s.push_str(cell);
                    s.extend(std::iter::repeat(' ').take(pad));
                } else {
                    s.extend(std::iter::repeat(' ').take(pad));
                    s.push_str(cell);
                }
            }
            s.trim_end().to_string() + "\n"
        };
        let mut out = line(&header.map(String::from));
        for r in &rows {
            out.push_str(&line(r));
        }
        out
    }
}
