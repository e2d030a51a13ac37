//! Evaluation report: JSON keyed by sequence and subset, plus a CSV summary
//! mirroring the standard hand/object/interaction table columns.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SubsetMetrics {
    pub add_auc: f64,
    pub adds_auc: f64,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SequenceMetrics {
    pub wa_mpjpe_cm: f64,
    pub w_mpjpe_cm: f64,
    pub pa_mpjpe_mm: f64,
    pub acc_norm_mm: f64,
    pub object_add_auc: f64,
    pub object_adds_auc: f64,
    /// Mean object translation acceleration error, millimeters per frame
    /// squared.
    pub object_acc_mm: f64,
    pub interaction_add_auc: f64,
    pub interaction_adds_auc: f64,
    pub subsets: BTreeMap<String, SubsetMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EvalReport {
    pub sequences: BTreeMap<String, SequenceMetrics>,
}

impl EvalReport {
    pub fn mean(&self) -> SequenceMetrics {
        let n = self.sequences.len().max(1) as f64;
        let mut out = SequenceMetrics::default();
        for m in self.sequences.values() {
            out.wa_mpjpe_cm += m.wa_mpjpe_cm / n;
            out.w_mpjpe_cm += m.w_mpjpe_cm / n;
            out.pa_mpjpe_mm += m.pa_mpjpe_mm / n;
            out.acc_norm_mm += m.acc_norm_mm / n;
            out.object_add_auc += m.object_add_auc / n;
            out.object_adds_auc += m.object_adds_auc / n;
            out.object_acc_mm += m.object_acc_mm / n;
            out.interaction_add_auc += m.interaction_add_auc / n;
            out.interaction_adds_auc += m.interaction_adds_auc / n;
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// CSV with one row per sequence plus a mean row; columns follow the
    /// hand / object / interaction table layout.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "sequence,WA-MPJPE_cm,W-MPJPE_cm,PA-MPJPE_mm,ACC-NORM_mm,\
             ADD_AUC,ADD-S_AUC,OBJ-ACC_mm,HOI_ADD_AUC,HOI_ADD-S_AUC,\
             ADD_AUC_contact,ADD-S_AUC_contact,ADD_AUC_truncated,ADD-S_AUC_truncated,\
             ADD_AUC_out_of_view,ADD-S_AUC_out_of_view\n",
        );
        let subset = |m: &SequenceMetrics, name: &str| -> (f64, f64) {
            m.subsets
                .get(name)
                .map(|s| (s.add_auc, s.adds_auc))
                .unwrap_or((f64::NAN, f64::NAN))
        };
        let mut write_row = |name: &str, m: &SequenceMetrics| {
            let (ca, cs) = subset(m, "contact");
            let (ta, ts) = subset(m, "truncated");
            let (oa, os) = subset(m, "out_of_view");
            out.push_str(&format!(
                "{name},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
                m.wa_mpjpe_cm,
                m.w_mpjpe_cm,
                m.pa_mpjpe_mm,
                m.acc_norm_mm,
                m.object_add_auc,
                m.object_adds_auc,
                m.object_acc_mm,
                m.interaction_add_auc,
                m.interaction_adds_auc,
                ca, cs, ta, ts, oa, os,
            ));
        };
        for (name, metrics) in &self.sequences {
            write_row(name, metrics);
        }
        write_row("mean", &self.mean());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_sequences_and_mean_row() {
        let mut report = EvalReport::default();
        let mut m = SequenceMetrics {
            wa_mpjpe_cm: 1.0,
            ..Default::default()
        };
        m.subsets.insert(
            "contact".into(),
            SubsetMetrics {
                add_auc: 0.5,
                adds_auc: 0.6,
                frames: 10,
            },
        );
        report.sequences.insert("seq0".into(), m);
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("sequence,WA-MPJPE_cm"));
        assert!(lines[1].starts_with("seq0,1.0000"));
        assert!(lines[2].starts_with("mean,1.0000"));
    }
}
