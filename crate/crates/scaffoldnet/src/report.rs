//! Evaluation artifacts: a ROC-point CSV with a summary block, and a
//! self-contained SVG plot of the per-class, micro and macro curves.

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::metrics::{EvalReport, MulticlassRoc, RocCurve};
use crate::model::CLASS_COUNT;

fn curves_in_order(roc: &MulticlassRoc) -> Vec<(String, &RocCurve)> {
    let mut out = Vec::new();
    for (c, curve) in roc.per_class.iter().enumerate() {
        if let Some(curve) = curve {
            out.push((format!("class_{c}"), curve));
        }
    }
    out.push(("micro".to_string(), &roc.micro));
    if let Some(m) = &roc.macro_curve {
        out.push(("macro".to_string(), m));
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v}"),
        None => "degenerate".to_string(),
    }
}

/// CSV: header, one row per ROC point, then `summary,<name>,<value>` rows.
/// Thresholds are empty on averaged (macro) curves.
pub fn roc_csv_string(report: &EvalReport, roc: &MulticlassRoc) -> String {
    let mut out = String::from("curve_id,fpr,tpr,threshold\n");
    for (id, curve) in curves_in_order(roc) {
        for p in &curve.points {
            let threshold = if p.threshold.is_nan() {
                String::new()
            } else {
                format!("{}", p.threshold)
            };
            out.push_str(&format!("{id},{},{},{threshold}\n", p.fpr, p.tpr));
        }
    }
    out.push_str(&format!("summary,accuracy,{}\n", report.accuracy));
    out.push_str(&format!("summary,cross_entropy,{}\n", report.cross_entropy));
    out.push_str(&format!("summary,mae,{}\n", report.mae));
    for c in 0..CLASS_COUNT {
        out.push_str(&format!(
            "summary,auc_class_{c},{}\n",
            fmt_opt(report.per_class_auc[c])
        ));
    }
    out.push_str(&format!("summary,auc_micro,{}\n", report.micro_auc));
    out.push_str(&format!(
        "summary,auc_macro,{}\n",
        fmt_opt(report.macro_auc)
    ));
    for t in 0..CLASS_COUNT {
        for p in 0..CLASS_COUNT {
            out.push_str(&format!(
                "summary,confusion_{t}_{p},{}\n",
                report.confusion[t][p]
            ));
        }
    }
    out
}

const PLOT_X0: f64 = 80.0;
const PLOT_Y0: f64 = 40.0;
const PLOT_W: f64 = 660.0;
const PLOT_H: f64 = 500.0;

fn to_px(fpr: f64, tpr: f64) -> (f64, f64) {
    (PLOT_X0 + fpr * PLOT_W, PLOT_Y0 + (1.0 - tpr) * PLOT_H)
}

/// 800x600 SVG with one polyline per curve, a dashed diagonal, axis ticks,
/// and an AUC legend. No external resources.
pub fn roc_svg_string(report: &EvalReport, roc: &MulticlassRoc) -> String {
    let palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];
    let mut body = String::new();

    body.push_str(&format!(
        "<rect x=\"{PLOT_X0}\" y=\"{PLOT_Y0}\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" \
         fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n"
    ));
    let (dx0, dy0) = to_px(0.0, 0.0);
    let (dx1, dy1) = to_px(1.0, 1.0);
    body.push_str(&format!(
        "<line x1=\"{dx0}\" y1=\"{dy0}\" x2=\"{dx1}\" y2=\"{dy1}\" \
         stroke=\"#999\" stroke-width=\"1\" stroke-dasharray=\"6,4\"/>\n"
    ));
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (tx, _) = to_px(f, 0.0);
        let (_, ty) = to_px(0.0, f);
        body.push_str(&format!(
            "<text x=\"{tx}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{f:.1}</text>\n",
            PLOT_Y0 + PLOT_H + 18.0
        ));
        body.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{f:.1}</text>\n",
            PLOT_X0 - 8.0,
            ty + 4.0
        ));
    }
    body.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">False positive rate</text>\n",
        PLOT_X0 + PLOT_W / 2.0,
        PLOT_Y0 + PLOT_H + 44.0
    ));
    body.push_str(&format!(
        "<text x=\"20\" y=\"{}\" font-size=\"14\" transform=\"rotate(-90 20 {})\" \
         text-anchor=\"middle\">True positive rate</text>\n",
        PLOT_Y0 + PLOT_H / 2.0,
        PLOT_Y0 + PLOT_H / 2.0
    ));

    let curves = curves_in_order(roc);
    for (i, (id, curve)) in curves.iter().enumerate() {
        let color = palette[i % palette.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|p| {
                let (x, y) = to_px(p.fpr, p.tpr);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            pts.join(" ")
        ));
        let ly = PLOT_Y0 + 20.0 + 18.0 * i as f64;
        body.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
            PLOT_X0 + PLOT_W - 200.0,
            ly - 4.0,
            PLOT_X0 + PLOT_W - 172.0,
            ly - 4.0
        ));
        body.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">{id} AUC={:.4}</text>\n",
            PLOT_X0 + PLOT_W - 164.0,
            ly,
            curve.auc
        ));
    }
    body.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">\
         ROC — accuracy {:.4}, cross-entropy {:.4}, MAE {:.4}</text>\n",
        PLOT_X0 + PLOT_W / 2.0,
        report.accuracy,
        report.cross_entropy,
        report.mae
    ));

    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 600\" \
         width=\"800\" height=\"600\">\n<rect width=\"800\" height=\"600\" fill=\"white\"/>\n\
         {body}</svg>\n"
    )
}

/// Write both artifacts.
pub fn emit_report(
    report: &EvalReport,
    roc: &MulticlassRoc,
    csv_path: &Path,
    svg_path: &Path,
) -> Result<()> {
    fs::write(csv_path, roc_csv_string(report, roc))?;
    fs::write(svg_path, roc_svg_string(report, roc))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::build_report;

    fn sample_report() -> (EvalReport, MulticlassRoc) {
        let labels = vec![0usize, 1, 2, 0, 1, 2, 2, 0];
        let probs: Vec<[f32; 3]> = vec![
            [0.7, 0.2, 0.1],
            [0.15, 0.7, 0.15],
            [0.1, 0.25, 0.65],
            [0.5, 0.3, 0.2],
            [0.3, 0.45, 0.25],
            [0.2, 0.2, 0.6],
            [0.3, 0.4, 0.3],
            [0.6, 0.3, 0.1],
        ];
        build_report(&probs, &labels).unwrap()
    }

    #[test]
    fn csv_roundtrips_curve_points() {
        let (report, roc) = sample_report();
        let csv = roc_csv_string(&report, &roc);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "curve_id,fpr,tpr,threshold");

        let mut parsed: Vec<(String, f64, f64, f64)> = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields[0] == "summary" {
                continue;
            }
            let threshold = if fields[3].is_empty() {
                f64::NAN
            } else {
                fields[3].parse().unwrap()
            };
            parsed.push((
                fields[0].to_string(),
                fields[1].parse().unwrap(),
                fields[2].parse().unwrap(),
                threshold,
            ));
        }

        let mut expected = Vec::new();
        for (c, curve) in roc.per_class.iter().enumerate() {
            for p in &curve.as_ref().unwrap().points {
                expected.push((format!("class_{c}"), p.fpr, p.tpr, p.threshold));
            }
        }
        for p in &roc.micro.points {
            expected.push(("micro".to_string(), p.fpr, p.tpr, p.threshold));
        }
        for p in &roc.macro_curve.as_ref().unwrap().points {
            expected.push(("macro".to_string(), p.fpr, p.tpr, p.threshold));
        }
        assert_eq!(parsed.len(), expected.len());
        for (got, want) in parsed.iter().zip(&expected) {
            assert_eq!(got.0, want.0);
            assert_eq!(got.1, want.1, "fpr must round-trip exactly");
            assert_eq!(got.2, want.2, "tpr must round-trip exactly");
            assert!(got.3 == want.3 || (got.3.is_nan() && want.3.is_nan()));
        }
    }

    #[test]
    fn csv_summary_matches_report_fields() {
        let (report, roc) = sample_report();
        let csv = roc_csv_string(&report, &roc);
        let find = |key: &str| -> String {
            csv.lines()
                .find(|l| l.starts_with(&format!("summary,{key},")))
                .unwrap_or_else(|| panic!("missing summary key {key}"))
                .split(',')
                .nth(2)
                .unwrap()
                .to_string()
        };
        assert_eq!(find("accuracy").parse::<f64>().unwrap(), report.accuracy);
        assert_eq!(
            find("cross_entropy").parse::<f64>().unwrap(),
            report.cross_entropy
        );
        assert_eq!(find("mae").parse::<f64>().unwrap(), report.mae);
        assert_eq!(find("auc_micro").parse::<f64>().unwrap(), report.micro_auc);
    }

    #[test]
    fn svg_is_structurally_sound() {
        let (report, roc) = sample_report();
        let svg = roc_svg_string(&report, &roc);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        // one polyline per curve: 3 per-class + micro + macro
        let polylines = svg.matches("<polyline").count();
        assert_eq!(polylines, 5);
        assert!(svg.contains("viewBox=\"0 0 800 600\""));
        assert!(!svg.contains("http://") || svg.contains("xmlns=\"http://www.w3.org/2000/svg\""));
        // balanced text tags
        assert_eq!(svg.matches("<text").count(), svg.matches("</text>").count());
    }
}
