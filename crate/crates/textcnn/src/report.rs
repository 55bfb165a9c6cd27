//! CSV and SVG outputs: training history and ROC curves.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use textcnn_core::training::EpochRecord;

use crate::error::{AppError, AppResult};

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

/// `epoch,train_loss,val_loss,val_accuracy`; validation columns are empty
/// when there is no validation split.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "train_loss", "val_loss", "val_accuracy"]).expect("in-memory write");
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            fixed(r.train_loss),
            r.val_loss.map(fixed).unwrap_or_default(),
            r.val_accuracy.map(fixed).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn roc_csv(points: &[(f64, f64)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["fpr", "tpr"]).expect("in-memory write");
    for &(fpr, tpr) in points {
        w.write_record([fixed(fpr), fixed(tpr)]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Standalone SVG plot of the curve with the chance diagonal.
pub fn roc_svg(points: &[(f64, f64)], auc: f64) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 50.0;
    let x = |v: f64| PAD + v * SIZE;
    let y = |v: f64| PAD + (1.0 - v) * SIZE;
    let full = SIZE + 2.0 * PAD;
    let mut path = String::new();
    for (i, &(fpr, tpr)) in points.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(path, "{cmd}{:.2},{:.2} ", x(fpr), y(tpr));
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}">"#
    );
    let _ = writeln!(s, r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="white" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="6,4"/>"#,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    );
    let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, path.trim_end());
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">false positive rate</text>"#, x(0.5), full - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">true positive rate</text>"#,
        y(0.5),
        y(0.5)
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">AUC = {auc:.4}</text>"#, x(1.0) - 8.0, y(0.0) - 8.0);
    s.push_str("</svg>\n");
    s
}

pub fn write_text(path: &Path, contents: &str) -> AppResult<()> {
    fs::write(path, contents).map_err(|e| AppError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_layout() {
        let rows = [
            EpochRecord {
                epoch: 1,
                train_loss: 0.5,
                train_accuracy: 0.5,
                val_loss: Some(0.25),
                val_accuracy: Some(1.0),
            },
            EpochRecord { epoch: 2, train_loss: 1.0 / 3.0, train_accuracy: 0.7, val_loss: None, val_accuracy: None },
        ];
        assert_eq!(
            history_csv(&rows),
            "epoch,train_loss,val_loss,val_accuracy\n1,0.500000,0.250000,1.000000\n2,0.333333,,\n"
        );
    }

    #[test]
    fn roc_outputs() {
        let pts = [(0.0, 0.0), (0.0, 0.5), (1.0, 1.0)];
        assert_eq!(roc_csv(&pts), "fpr,tpr\n0.000000,0.000000\n0.000000,0.500000\n1.000000,1.000000\n");
        let svg = roc_svg(&pts, 0.75);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<line x1=\"50\" y1=\"450\" x2=\"450\" y2=\"50\""));
        assert!(svg.contains("AUC = 0.7500"));
    }
}
