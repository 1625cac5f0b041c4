//! CSV and plain-text renderings of a [`MetricsReport`].
//!
//! One row per image, then `micro` and `macro` footer rows. Footer rows carry
//! the pooled counts.

use std::fmt::Write as _;

use crate::metrics::{AggregateMetrics, ConfusionCounts, MetricsReport, Scores};

pub const CSV_HEADER: [&str; 9] = [
    "image_id",
    "tp",
    "fp",
    "fn",
    "tn",
    "precision",
    "recall",
    "f1_standard",
    "f1_paper",
];

/// Which F1 columns the text table shows. CSV always carries both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum F1Columns {
    #[default]
    Standard,
    Paper,
    Both,
}

fn row(id: &str, c: &ConfusionCounts, s: &Scores) -> [String; 9] {
    [
        id.to_string(),
        c.tp.to_string(),
        c.fp.to_string(),
        c.fn_.to_string(),
        c.tn.to_string(),
        s.precision.to_string(),
        s.recall.to_string(),
        s.f1_standard.to_string(),
        s.f1_paper.to_string(),
    ]
}

fn footers(report: &MetricsReport) -> impl Iterator<Item = (&'static str, &AggregateMetrics)> {
    [("micro", report.micro.as_ref()), ("macro", report.macro_.as_ref())]
        .into_iter()
        .filter_map(|(name, a)| a.map(|a| (name, a)))
}

pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut write = |fields: &[String]| w.write_record(fields).expect("in-memory CSV write");
    write(&CSV_HEADER.map(String::from));
    for m in &report.per_image {
        write(&row(&m.image_id, &m.counts, &m.scores));
    }
    for (name, a) in footers(report) {
        write(&row(name, &a.counts, &a.scores));
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

pub fn metrics_table(report: &MetricsReport, f1: F1Columns) -> String {
    let mut header = vec!["image_id", "TP", "FP", "FN", "TN", "Precision", "Recall"];
    match f1 {
        F1Columns::Standard => header.push("F1"),
        F1Columns::Paper => header.push("F1 (PR/(P+R))"),
        F1Columns::Both => header.extend(["F1", "F1 (PR/(P+R))"]),
    }
    let cells = |id: &str, c: &ConfusionCounts, s: &Scores| -> Vec<String> {
        let mut v = vec![
            id.to_string(),
            c.tp.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            c.tn.to_string(),
            format!("{:.4}", s.precision),
            format!("{:.4}", s.recall),
        ];
        match f1 {
            F1Columns::Standard => v.push(format!("{:.4}", s.f1_standard)),
            F1Columns::Paper => v.push(format!("{:.4}", s.f1_paper)),
            F1Columns::Both => {
                v.push(format!("{:.4}", s.f1_standard));
                v.push(format!("{:.4}", s.f1_paper));
            }
        }
        v
    };

    let body: Vec<Vec<String>> = report
        .per_image
        .iter()
        .map(|m| cells(&m.image_id, &m.counts, &m.scores))
        .collect();
    let foot: Vec<Vec<String>> = footers(report)
        .map(|(name, a)| cells(name, &a.counts, &a.scores))
        .collect();

    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in body.iter().chain(&foot) {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |out: &mut String, r: &[String]| {
        for (i, (c, w)) in r.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(out, "{c:<w$}");
            } else {
                let _ = write!(out, "  {c:>w$}");
            }
        }
        out.push('\n');
    };
    let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));

    let mut out = String::new();
    line(&mut out, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    out.push_str(&rule);
    out.push('\n');
    for r in &body {
        line(&mut out, r);
    }
    if !foot.is_empty() {
        out.push_str(&rule);
        out.push('\n');
        for r in &foot {
            line(&mut out, r);
        }
    }
    let _ = writeln!(out, "{}", report.aggregation_note);
    out
}
