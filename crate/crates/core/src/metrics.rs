//! Grasp quality metrics and their aggregation.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::ContactMap;
use crate::error::{Error, Result};
use crate::hand::{HandModel, HandParams};
use crate::mesh::TriMesh;
use crate::spatial::{intersection_volume_sdf, SignedDistance, SurfaceIndex};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Half-width (mm) of the band around a surface that counts as contact.
    pub contact_band: f64,
    /// Ground-truth contact values at or above this are positives.
    pub contact_threshold: f64,
    /// Voxel edge (mm) for intersection volume.
    pub voxel_size: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            contact_band: 2.0,
            contact_threshold: 0.4,
            voxel_size: 1.0,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.contact_band, self.contact_threshold, self.voxel_size]
            .iter()
            .any(|v| !v.is_finite() || *v <= 0.0)
        {
            return Err(Error::InvalidConfig(format!("metric settings must be positive, got {self:?}")));
        }
        Ok(())
    }
}

/// Mean Euclidean distance between corresponding joints.
pub fn mpjpe(pred: &[Vec3], truth: &[Vec3]) -> Result<f64> {
    Error::check_len("joint count", truth.len(), pred.len())?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(pred.iter().zip(truth).map(|(a, b)| (a - b).norm()).sum::<f64>() / pred.len() as f64)
}

/// Percentage of hand vertices whose signed distance to the object lies in
/// `[-band, band]`.
pub fn contact_coverage(hand: &TriMesh, object: &SignedDistance, cfg: &MetricsConfig) -> f64 {
    if hand.is_empty() {
        return 0.0;
    }
    let inside = hand
        .vertices
        .par_iter()
        .filter(|v| object.eval(v).abs() <= cfg.contact_band)
        .count();
    100.0 * inside as f64 / hand.len() as f64
}

/// Precision and recall (percent) of `predicted` against `truth`.
/// Precision is 100 when nothing is predicted, recall is 100 when nothing is
/// true.
pub fn precision_recall(predicted: &[bool], truth: &[bool]) -> Result<(f64, f64)> {
    Error::check_len("binary contact map", truth.len(), predicted.len())?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 {
        log::debug!("no predicted contact; precision defined as 100");
        100.0
    } else {
        100.0 * tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        log::debug!("no ground-truth contact; recall defined as 100");
        100.0
    } else {
        100.0 * tp as f64 / (tp + fn_) as f64
    };
    Ok((precision, recall))
}

/// Object vertices within `band` of the hand surface (unsigned).
pub fn predicted_object_contact(hand: &TriMesh, object: &TriMesh, cfg: &MetricsConfig) -> Vec<bool> {
    let surface = SurfaceIndex::new(hand);
    object
        .vertices
        .par_iter()
        .map(|v| surface.distance(v) <= cfg.contact_band)
        .collect()
}

/// Precision and recall of the object vertices near the hand against the
/// thresholded ground-truth object contact.
pub fn contact_precision_recall(
    hand: &TriMesh,
    object: &TriMesh,
    truth: &ContactMap,
    cfg: &MetricsConfig,
) -> Result<(f64, f64)> {
    Error::check_len("ground-truth object contact", object.len(), truth.len())?;
    let predicted = predicted_object_contact(hand, object, cfg);
    let positives: Vec<bool> = truth.values.iter().map(|&v| v >= cfg.contact_threshold).collect();
    precision_recall(&predicted, &positives)
}

/// Metrics of one hand pose against its ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub intersection_volume_cm3: f64,
    pub mpjpe_mm: f64,
    pub coverage_pct: f64,
    pub precision_pct: f64,
    pub recall_pct: f64,
}

/// One evaluation case: an object, the true pose and contact, and the pose
/// after refinement with optionally the pose before it.
#[derive(Debug, Clone, Copy)]
pub struct EvalCase<'a> {
    pub object: &'a TriMesh,
    pub truth: &'a HandParams,
    pub truth_contact: &'a ContactMap,
    pub before: Option<&'a HandParams>,
    pub after: &'a HandParams,
}

pub fn sample_metrics(
    model: &HandModel,
    object: &TriMesh,
    object_sdf: &SignedDistance,
    truth_joints: &[Vec3],
    truth_contact: &ContactMap,
    params: &HandParams,
    cfg: &MetricsConfig,
) -> Result<SampleMetrics> {
    let posed = model.pose(params)?;
    let hand_sdf = SignedDistance::new(&posed.mesh)?;
    let (precision_pct, recall_pct) = contact_precision_recall(&posed.mesh, object, truth_contact, cfg)?;
    Ok(SampleMetrics {
        intersection_volume_cm3: intersection_volume_sdf(&hand_sdf, object_sdf, cfg.voxel_size),
        mpjpe_mm: mpjpe(&posed.joints, truth_joints)?,
        coverage_pct: contact_coverage(&posed.mesh, object_sdf, cfg),
        precision_pct,
        recall_pct,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub before: Option<SampleMetrics>,
    pub after: SampleMetrics,
}

pub fn evaluate_case(model: &HandModel, case: &EvalCase, cfg: &MetricsConfig) -> Result<CaseMetrics> {
    let object_sdf = SignedDistance::new(case.object)?;
    let truth_joints = model.pose(case.truth)?.joints;
    let eval = |p: &HandParams| sample_metrics(model, case.object, &object_sdf, &truth_joints, case.truth_contact, p, cfg);
    Ok(CaseMetrics {
        before: case.before.map(eval).transpose()?,
        after: eval(case.after)?,
    })
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Stat {
        let values: Vec<f64> = values.into_iter().collect();
        if values.is_empty() {
            return Stat { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Stat { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_samples: usize,
    pub intersection_volume_cm3: Stat,
    pub mpjpe_mm: Stat,
    pub coverage_pct: Stat,
    pub precision_pct: Stat,
    pub recall_pct: Stat,
}

impl MetricsReport {
    pub fn summarize(samples: &[SampleMetrics]) -> Self {
        let stat = |f: fn(&SampleMetrics) -> f64| Stat::of(samples.iter().map(f));
        MetricsReport {
            n_samples: samples.len(),
            intersection_volume_cm3: stat(|s| s.intersection_volume_cm3),
            mpjpe_mm: stat(|s| s.mpjpe_mm),
            coverage_pct: stat(|s| s.coverage_pct),
            precision_pct: stat(|s| s.precision_pct),
            recall_pct: stat(|s| s.recall_pct),
        }
    }
}

/// Aggregates over a batch, with before/after rows when every case has a
/// `before` pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub before: Option<MetricsReport>,
    pub after: MetricsReport,
    pub per_sample: Vec<CaseMetrics>,
}

pub fn evaluate_batch(model: &HandModel, cases: &[EvalCase], cfg: &MetricsConfig) -> Result<BatchReport> {
    cfg.validate()?;
    let per_sample: Vec<CaseMetrics> = cases
        .par_iter()
        .map(|c| evaluate_case(model, c, cfg))
        .collect::<Result<_>>()?;
    Ok(BatchReport::from_cases(per_sample))
}

impl BatchReport {
    pub fn from_cases(per_sample: Vec<CaseMetrics>) -> Self {
        let after: Vec<SampleMetrics> = per_sample.iter().map(|c| c.after).collect();
        let before: Option<Vec<SampleMetrics>> = per_sample.iter().map(|c| c.before).collect();
        BatchReport {
            before: before
                .filter(|b| !b.is_empty())
                .map(|b| MetricsReport::summarize(&b)),
            after: MetricsReport::summarize(&after),
            per_sample,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Table with one row per stage, `mean ± std` cells.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| Stage | Samples | Intersection volume (cm³) | MPJPE (mm) | Coverage (%) | Precision (%) | Recall (%) |\n\
             |---|---|---|---|---|---|---|\n",
        );
        let cell = |s: &Stat| format!("{:.2} ± {:.2}", s.mean, s.std);
        let mut row = |name: &str, r: &MetricsReport| {
            writeln!(
                out,
                "| {name} | {} | {} | {} | {} | {} | {} |",
                r.n_samples,
                cell(&r.intersection_volume_cm3),
                cell(&r.mpjpe_mm),
                cell(&r.coverage_pct),
                cell(&r.precision_pct),
                cell(&r.recall_pct)
            )
            .unwrap();
        };
        if let Some(before) = &self.before {
            row("before", before);
        }
        row("after", &self.after);
        out
    }

    /// Per-sample rows `sample,stage,<metrics>` with fixed six-decimal values.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("sample,stage,intersection_volume_cm3,mpjpe_mm,coverage_pct,precision_pct,recall_pct\n");
        let mut row = |k: usize, stage: &str, m: &SampleMetrics| {
            writeln!(
                out,
                "{k},{stage},{:.6},{:.6},{:.6},{:.6},{:.6}",
                m.intersection_volume_cm3, m.mpjpe_mm, m.coverage_pct, m.precision_pct, m.recall_pct
            )
            .unwrap();
        };
        for (k, c) in self.per_sample.iter().enumerate() {
            if let Some(b) = &c.before {
                row(k, "before", b);
            }
            row(k, "after", &c.after);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::{cube, grid_patch};

    #[test]
    fn mpjpe_examples() {
        let a = vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-4.0, 0.0, 1.0)];
        assert_eq!(mpjpe(&a, &a).unwrap(), 0.0);
        let b: Vec<Vec3> = a.iter().map(|p| p + Vec3::new(3.0, 4.0, 0.0)).collect();
        assert!((mpjpe(&a, &b).unwrap() - 5.0).abs() < 1e-12);
        assert!(mpjpe(&a, &b[..1]).is_err());
    }

    #[test]
    fn precision_recall_examples() {
        let truth = [true, false, true, false];
        assert_eq!(precision_recall(&truth, &truth).unwrap(), (100.0, 100.0));
        assert_eq!(precision_recall(&[true; 4], &truth).unwrap(), (50.0, 100.0));
        assert_eq!(precision_recall(&[false; 4], &truth).unwrap(), (100.0, 0.0));
        assert_eq!(precision_recall(&[false; 4], &[false; 4]).unwrap(), (100.0, 100.0));
    }

    #[test]
    fn coverage_of_far_and_surface_hands() {
        let object = cube(10.0);
        let sdf = SignedDistance::new(&object).unwrap();
        let cfg = MetricsConfig::default();
        let far = grid_patch(5.0, 3).transformed(|p| p + Vec3::new(0.0, 0.0, 110.0)).unwrap();
        assert_eq!(contact_coverage(&far, &sdf, &cfg), 0.0);
        let on = grid_patch(5.0, 3).transformed(|p| p + Vec3::new(0.0, 0.0, 10.0)).unwrap();
        assert_eq!(contact_coverage(&on, &sdf, &cfg), 100.0);
    }

    #[test]
    fn stats_use_population_std() {
        let s = Stat::of([1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(Stat::of([4.0; 10]).std, 0.0);
    }

    #[test]
    fn report_layouts() {
        let m = SampleMetrics {
            intersection_volume_cm3: 1.0,
            mpjpe_mm: 2.0,
            coverage_pct: 3.0,
            precision_pct: 4.0,
            recall_pct: 5.0,
        };
        let report = BatchReport::from_cases(vec![CaseMetrics {
            before: Some(m),
            after: m,
        }]);
        assert_eq!(report.before.unwrap().mpjpe_mm.mean, 2.0);
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.contains("0,after,1.000000,2.000000,3.000000,4.000000,5.000000"));
        assert!(report.to_markdown().contains("| after | 1 | 1.00 ± 0.00 |"));
        let only_after = BatchReport::from_cases(vec![CaseMetrics { before: None, after: m }]);
        assert!(only_after.before.is_none());
    }
}
