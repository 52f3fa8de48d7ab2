//! Report types and emission: one CSV per estimator variant, a baseline CSV,
//! and a JSON summary. Numbers are written with Rust's shortest round-trip
//! float formatting, so identical runs produce identical bytes (except for
//! the wall-clock timing column, which is inherently noisy).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scenario::{mean_width, ScenarioConfig};

/// One estimation step of one variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub hull_lower: Vec<f64>,
    pub hull_upper: Vec<f64>,
    pub radius: f64,
    pub x_true: Vec<f64>,
    pub contained: bool,
    pub step_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantSummary {
    pub containment_rate: f64,
    pub mean_radius: f64,
    pub mean_hull_width: f64,
    pub mean_step_ms: f64,
}

impl VariantSummary {
    pub fn from_steps(steps: &[StepRecord]) -> Self {
        let n = steps.len().max(1) as f64;
        Self {
            containment_rate: steps.iter().filter(|s| s.contained).count() as f64 / n,
            mean_radius: steps.iter().map(|s| s.radius).sum::<f64>() / n,
            mean_hull_width: steps.iter().map(mean_width).sum::<f64>() / n,
            mean_step_ms: steps.iter().map(|s| s.step_ms).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: String,
    pub description: String,
    pub steps: Vec<StepRecord>,
    pub summary: VariantSummary,
}

/// Kalman-filter baseline step: mean and 3-sigma ellipse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub k: usize,
    pub mean: Vec<f64>,
    pub sigma3_axes: Vec<f64>,
    pub angle_rad: f64,
}

/// Everything one scenario run produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    /// Learned model enclosure, row-major bounds.
    pub model_lower: Vec<Vec<f64>>,
    pub model_upper: Vec<Vec<f64>>,
    pub model_warnings: Vec<String>,
    /// How the baseline derives its noise covariances from the set bounds.
    pub baseline_noise_model: String,
    pub variants: Vec<VariantReport>,
    pub baseline: Vec<BaselineRecord>,
}

impl RunReport {
    pub fn containment_ok(&self) -> bool {
        self.variants
            .iter()
            .all(|v| v.steps.iter().all(|s| s.contained))
    }

    /// Write `<variant>.csv` for each variant, `baseline.csv`, and
    /// `summary.json` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for variant in &self.variants {
            let mut file = fs::File::create(dir.join(format!("{}.csv", variant.variant)))?;
            file.write_all(variant_csv(variant).as_bytes())?;
        }
        let mut file = fs::File::create(dir.join("baseline.csv"))?;
        file.write_all(baseline_csv(&self.baseline).as_bytes())?;
        let mut file = fs::File::create(dir.join("summary.json"))?;
        file.write_all(serde_json::to_string_pretty(&self.summary_json())?.as_bytes())?;
        Ok(())
    }

    /// Compact summary for `summary.json` (the full report serializes too,
    /// but the summary is what humans read).
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.config.seed,
            "steps": self.config.steps,
            "train_len": self.config.train_len,
            "model_lower": self.model_lower,
            "model_upper": self.model_upper,
            "model_warnings": self.model_warnings,
            "baseline_noise_model": self.baseline_noise_model,
            "variants": self.variants.iter().map(|v| serde_json::json!({
                "variant": v.variant,
                "description": v.description,
                "summary": v.summary,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Per-variant CSV: `k, x1_lo, x1_hi, ..., radius, x1_true, ..., contained,
/// step_ms`.
pub fn variant_csv(report: &VariantReport) -> String {
    let n = report
        .steps
        .first()
        .map(|s| s.hull_lower.len())
        .unwrap_or(0);
    let mut out = String::from("k");
    for i in 1..=n {
        out.push_str(&format!(",x{i}_lo,x{i}_hi"));
    }
    out.push_str(",radius");
    for i in 1..=n {
        out.push_str(&format!(",x{i}_true"));
    }
    out.push_str(",contained,step_ms\n");
    for s in &report.steps {
        out.push_str(&s.k.to_string());
        for i in 0..n {
            out.push_str(&format!(",{},{}", s.hull_lower[i], s.hull_upper[i]));
        }
        out.push_str(&format!(",{}", s.radius));
        for i in 0..n {
            out.push_str(&format!(",{}", s.x_true[i]));
        }
        out.push_str(&format!(",{},{}\n", s.contained, s.step_ms));
    }
    out
}

/// Baseline CSV: `k, mean1, ..., sigma3_axis1, ..., angle_rad`.
pub fn baseline_csv(records: &[BaselineRecord]) -> String {
    let n = records.first().map(|r| r.mean.len()).unwrap_or(0);
    let mut out = String::from("k");
    for i in 1..=n {
        out.push_str(&format!(",mean{i}"));
    }
    for i in 1..=n {
        out.push_str(&format!(",sigma3_axis{i}"));
    }
    out.push_str(",angle_rad\n");
    for r in records {
        out.push_str(&r.k.to_string());
        for v in &r.mean {
            out.push_str(&format!(",{v}"));
        }
        for v in &r.sigma3_axes {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{}\n", r.angle_rad));
    }
    out
}

/// Side-by-side widths of every variant against the filter's 3-sigma axes.
pub fn compare_csv(report: &RunReport) -> String {
    let mut out = String::from("k");
    for v in &report.variants {
        let n = v.steps.first().map(|s| s.hull_lower.len()).unwrap_or(0);
        for i in 1..=n {
            out.push_str(&format!(",{}_width{i}", v.variant));
        }
    }
    let n = report.baseline.first().map(|r| r.mean.len()).unwrap_or(0);
    for i in 1..=n {
        out.push_str(&format!(",kf_sigma3_axis{i}"));
    }
    out.push('\n');
    let steps = report
        .variants
        .first()
        .map(|v| v.steps.len())
        .unwrap_or(0);
    for idx in 0..steps {
        out.push_str(&(idx + 1).to_string());
        for v in &report.variants {
            let s = &v.steps[idx];
            for i in 0..s.hull_lower.len() {
                out.push_str(&format!(",{}", s.hull_upper[i] - s.hull_lower[i]));
            }
        }
        if let Some(b) = report.baseline.get(idx) {
            for v in &b.sigma3_axes {
                out.push_str(&format!(",{v}"));
            }
        }
        out.push('\n');
    }
    out
}

/// Monte-Carlo aggregate over seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub runs: usize,
    pub base_seed: u64,
    pub variants: Vec<VariantAggregate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantAggregate {
    pub variant: String,
    pub steps: usize,
    pub containment_rate: f64,
    pub mean_radius: f64,
    pub radius_p50: f64,
    pub radius_p90: f64,
    pub radius_max: f64,
    pub mean_hull_width: f64,
    pub mean_step_ms: f64,
}

impl MonteCarloReport {
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut file = fs::File::create(dir.join("montecarlo.json"))?;
        file.write_all(serde_json::to_string_pretty(self)?.as_bytes())?;
        let mut csv = String::from(
            "variant,steps,containment_rate,mean_radius,radius_p50,radius_p90,radius_max,mean_hull_width,mean_step_ms\n",
        );
        for v in &self.variants {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                v.variant,
                v.steps,
                v.containment_rate,
                v.mean_radius,
                v.radius_p50,
                v.radius_p90,
                v.radius_max,
                v.mean_hull_width,
                v.mean_step_ms
            ));
        }
        let mut file = fs::File::create(dir.join("montecarlo.csv"))?;
        file.write_all(csv.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(k: usize, contained: bool) -> StepRecord {
        StepRecord {
            k,
            hull_lower: vec![-1.0, -2.0],
            hull_upper: vec![1.0, 2.0],
            radius: 1.5,
            x_true: vec![0.1, 0.2],
            contained,
            step_ms: 0.25,
        }
    }

    #[test]
    fn variant_csv_schema() {
        let report = VariantReport {
            variant: "z1".into(),
            description: "zonotope / reverse-mapping".into(),
            steps: vec![record(1, true), record(2, false)],
            summary: VariantSummary::from_steps(&[record(1, true), record(2, false)]),
        };
        let csv = variant_csv(&report);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,x1_lo,x1_hi,x2_lo,x2_hi,radius,x1_true,x2_true,contained,step_ms"
        );
        assert_eq!(lines.next().unwrap(), "1,-1,1,-2,2,1.5,0.1,0.2,true,0.25");
        assert_eq!(lines.next().unwrap(), "2,-1,1,-2,2,1.5,0.1,0.2,false,0.25");
    }

    #[test]
    fn baseline_csv_schema() {
        let rec = BaselineRecord {
            k: 1,
            mean: vec![0.5, -0.5],
            sigma3_axes: vec![3.0, 1.5],
            angle_rad: 0.25,
        };
        let csv = baseline_csv(&[rec]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,mean1,mean2,sigma3_axis1,sigma3_axis2,angle_rad"
        );
        assert_eq!(lines.next().unwrap(), "1,0.5,-0.5,3,1.5,0.25");
    }

    #[test]
    fn summary_counts_containment() {
        let steps = vec![record(1, true), record(2, true), record(3, false)];
        let summary = VariantSummary::from_steps(&steps);
        assert!((summary.containment_rate - 2.0 / 3.0).abs() < 1e-12);
    }
}
