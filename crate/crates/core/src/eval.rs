//! Detection scoring: one-to-one greedy IOU matching per class, precision,
//! recall, F1 and the count fraction `N_pred / N_gt`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detection::{Detection, ObjectClass, Schema};
use crate::error::{Error, Result};
use crate::geometry::{iou, Polygon};
use crate::synth::GroundTruthSet;

pub const DEFAULT_IOU_THRESH: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub iou_thresh: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            iou_thresh: DEFAULT_IOU_THRESH,
        }
    }
}

impl MatchConfig {
    pub fn new(iou_thresh: f64) -> Result<Self> {
        if !(iou_thresh > 0.0 && iou_thresh <= 1.0) {
            return Err(Error::field(
                "iou_thresh",
                format!("must be in (0, 1], got {iou_thresh}"),
            ));
        }
        Ok(MatchConfig { iou_thresh })
    }
}

/// Anything scoreable: an id, a class and a footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub id: u32,
    pub class: ObjectClass,
    pub footprint: Polygon,
}

impl Scored {
    pub fn from_detections(dets: &[Detection], schema: Schema) -> Vec<Scored> {
        dets.iter()
            .filter_map(|d| {
                schema.scoring_class(d.class).map(|class| Scored {
                    id: d.id,
                    class,
                    footprint: d.footprint.clone(),
                })
            })
            .collect()
    }

    /// In-frame truth records under the schema's class mapping.
    pub fn from_truth(truth: &GroundTruthSet, schema: Schema) -> Vec<Scored> {
        truth
            .records
            .iter()
            .filter(|r| !r.out_of_frame)
            .filter_map(|r| {
                schema.scoring_class(r.class).map(|class| Scored {
                    id: r.id,
                    class,
                    footprint: r.footprint.clone(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub class: ObjectClass,
    pub pred_id: u32,
    pub gt_id: u32,
    pub iou: f64,
}

/// Within each class, pairs at or above the threshold are taken in
/// descending IOU (ties by pred id, then gt id), each side used once.
pub fn match_greedy(pred: &[Scored], gt: &[Scored], cfg: &MatchConfig) -> Vec<MatchedPair> {
    let mut candidates: Vec<MatchedPair> = Vec::new();
    for p in pred {
        for g in gt.iter().filter(|g| g.class == p.class) {
            let v = iou(&p.footprint, &g.footprint);
            if v >= cfg.iou_thresh {
                candidates.push(MatchedPair {
                    class: p.class,
                    pred_id: p.id,
                    gt_id: g.id,
                    iou: v,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then(a.pred_id.cmp(&b.pred_id))
            .then(a.gt_id.cmp(&b.gt_id))
    });
    let mut used_pred: BTreeMap<(ObjectClass, u32), ()> = BTreeMap::new();
    let mut used_gt: BTreeMap<(ObjectClass, u32), ()> = BTreeMap::new();
    let mut out = Vec::new();
    for c in candidates {
        if used_pred.contains_key(&(c.class, c.pred_id)) || used_gt.contains_key(&(c.class, c.gt_id)) {
            continue;
        }
        used_pred.insert((c.class, c.pred_id), ());
        used_gt.insert((c.class, c.gt_id), ());
        out.push(c);
    }
    out
}

/// Raw tallies for one class; every ratio derives from these.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub n_pred: usize,
    pub n_gt: usize,
    pub tp: usize,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.n_pred += o.n_pred;
        self.n_gt += o.n_gt;
        self.tp += o.tp;
    }
}

fn ratio_or_zero(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio_or_zero(self.tp, self.n_pred)
    }

    pub fn recall(&self) -> f64 {
        ratio_or_zero(self.tp, self.n_gt)
    }

    /// `2PR / (P + R)`, 0 when both are 0. Evaluated in its reduced form
    /// `2 tp / (N_pred + N_gt)`, which rounds only once.
    pub fn f1(&self) -> f64 {
        ratio_or_zero(2 * self.tp, self.n_pred + self.n_gt)
    }

    /// `N_pred / N_gt`; `None` when there is no truth.
    pub fn count_frac(&self) -> Option<f64> {
        count_fraction(self.n_pred, self.n_gt)
    }
}

/// `N_pred / N_gt`, undefined (`None`) for empty truth.
pub fn count_fraction(n_pred: usize, n_gt: usize) -> Option<f64> {
    (n_gt > 0).then(|| n_pred as f64 / n_gt as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_thresh: f64,
    pub counts: BTreeMap<ObjectClass, Counts>,
    pub pairs: Vec<MatchedPair>,
}

/// One row of the rendered report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_pred: usize,
    pub n_gt: usize,
    pub count_frac: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub iou_thresh: f64,
    pub classes: Vec<ReportRow>,
    pub mean: ReportRow,
    pub pairs: Vec<MatchedPair>,
}

impl EvalReport {
    pub fn score(pred: &[Scored], gt: &[Scored], cfg: &MatchConfig) -> EvalReport {
        let pairs = match_greedy(pred, gt, cfg);
        let mut counts: BTreeMap<ObjectClass, Counts> = BTreeMap::new();
        for p in pred {
            counts.entry(p.class).or_default().n_pred += 1;
        }
        for g in gt {
            counts.entry(g.class).or_default().n_gt += 1;
        }
        for m in &pairs {
            counts.entry(m.class).or_default().tp += 1;
        }
        EvalReport {
            iou_thresh: cfg.iou_thresh,
            counts,
            pairs,
        }
    }

    pub fn for_scene(pred: &[Detection], truth: &GroundTruthSet, schema: Schema, cfg: &MatchConfig) -> EvalReport {
        Self::score(
            &Scored::from_detections(pred, schema),
            &Scored::from_truth(truth, schema),
            cfg,
        )
    }

    /// Sums counts so ratios are computed over the pooled tallies.
    pub fn empty(iou_thresh: f64) -> EvalReport {
        EvalReport {
            iou_thresh,
            counts: BTreeMap::new(),
            pairs: Vec::new(),
        }
    }

    /// Sums counts. Pairs name ids that are only unique within a scene, so
    /// the merged report keeps none.
    pub fn merge(&mut self, other: EvalReport) {
        for (class, c) in other.counts {
            *self.counts.entry(class).or_default() += c;
        }
        self.pairs.clear();
    }

    pub fn total(&self) -> Counts {
        let mut t = Counts::default();
        for c in self.counts.values() {
            t += *c;
        }
        t
    }

    /// Unweighted means over the classes present; the count fraction is the
    /// pooled `N_pred / N_gt`.
    pub fn mean_row(&self) -> ReportRow {
        let n = self.counts.len();
        let mean = |f: fn(&Counts) -> f64| {
            if n == 0 {
                0.0
            } else {
                self.counts.values().map(f).sum::<f64>() / n as f64
            }
        };
        let total = self.total();
        ReportRow {
            class: "Mean".into(),
            precision: mean(Counts::precision),
            recall: mean(Counts::recall),
            f1: mean(Counts::f1),
            n_pred: total.n_pred,
            n_gt: total.n_gt,
            count_frac: total.count_frac(),
        }
    }

    pub fn mean_f1(&self) -> f64 {
        self.mean_row().f1
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        self.counts
            .iter()
            .map(|(class, c)| ReportRow {
                class: class.as_str().into(),
                precision: c.precision(),
                recall: c.recall(),
                f1: c.f1(),
                n_pred: c.n_pred,
                n_gt: c.n_gt,
                count_frac: c.count_frac(),
            })
            .collect()
    }

    pub fn to_json(&self) -> ReportJson {
        ReportJson {
            iou_thresh: self.iou_thresh,
            classes: self.rows(),
            mean: self.mean_row(),
            pairs: self.pairs.clone(),
        }
    }

    /// Aligned text table: class, F1 and count fraction first.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>10} {:>9} {:>6} {:>6} {:>6}",
            "Class", "F1", "count_frac", "precision", "recall", "N_pred", "N_gt"
        );
        let mut rows = self.rows();
        rows.push(self.mean_row());
        for r in rows {
            let cf = r
                .count_frac
                .map_or_else(|| "undefined".to_string(), |v| format!("{v:.2}"));
            let _ = writeln!(
                out,
                "{:<14} {:>6.2} {:>10} {:>9.2} {:>6.2} {:>6} {:>6}",
                r.class, r.f1, cf, r.precision, r.recall, r.n_pred, r.n_gt
            );
        }
        let _ = writeln!(out, "IOU threshold {}", self.iou_thresh);
        out
    }
}
