//! Rendering of analysis results as JSON, CSV or a plain-text table.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use super::{ChurnReport, CoverageReport, FiveNumber, LengthReport, PerUserReport};
use crate::numeric::round_to;
use crate::Association;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Table,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Table => "txt",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            other => Err(format!("unknown format `{other}` (expected json, csv or table)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Coverage,
    Precision,
    Churn,
    Length,
    PerUser,
}

impl ReportKind {
    pub const ALL: [ReportKind; 5] = [
        ReportKind::Coverage,
        ReportKind::Precision,
        ReportKind::Churn,
        ReportKind::Length,
        ReportKind::PerUser,
    ];

    pub fn stem(self) -> &'static str {
        match self {
            ReportKind::Coverage => "coverage",
            ReportKind::Precision => "precision",
            ReportKind::Churn => "churn",
            ReportKind::Length => "length",
            ReportKind::PerUser => "per_user",
        }
    }

    pub fn file_name(self, format: ReportFormat) -> String {
        format!("{}.{}", self.stem(), format.extension())
    }
}

impl FromStr for ReportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReportKind::ALL
            .into_iter()
            .find(|k| k.stem() == s || (s == "per-user" && *k == ReportKind::PerUser))
            .ok_or_else(|| format!("unknown report `{s}`"))
    }
}

pub(crate) fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{}", round_to(x, 6))
    } else {
        x.to_string()
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// A report renders to a header plus rows; CSV and the text table share them.
pub trait Report: Serialize {
    fn kind(&self) -> ReportKind;
    fn rows(&self) -> (Vec<&'static str>, Vec<Vec<String>>);

    fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    fn to_csv(&self) -> String {
        let (header, rows) = self.rows();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header).expect("in-memory write");
        for r in &rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    fn to_table(&self) -> String {
        let (header, rows) = self.rows();
        text_table(&header, &rows)
    }

    fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Table => self.to_table(),
        }
    }
}

/// Left-aligned columns separated by two spaces, with a dashed rule under
/// the header.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let padded: Vec<String> = cells.zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&mut header.iter().copied());
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut rule.iter().map(String::as_str));
    for r in rows {
        line(&mut r.iter().map(String::as_str));
    }
    out
}

fn metric(name: &str, value: String) -> Vec<String> {
    vec![name.to_string(), value]
}

impl Report for CoverageReport {
    fn kind(&self) -> ReportKind {
        ReportKind::Coverage
    }

    fn rows(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let mut rows = vec![
            metric("total_user_turns", self.total_user_turns.to_string()),
            metric("qualifying_turns", self.qualifying_turns.to_string()),
            metric("non_qualifying_turns", self.non_qualifying_turns.to_string()),
            metric("assessed_turns", self.assessed_turns.to_string()),
            metric("unscored_turns", self.unscored_turns.to_string()),
            metric("qualifying_fraction", num(self.qualifying_fraction)),
        ];
        for (label, p) in &self.turn_label_proportions {
            rows.push(vec![format!("proportion_{}", label.as_str()), num(*p)]);
        }
        rows.extend([
            metric("conversations_total", self.conversations_total.to_string()),
            metric("conversations_assessed", self.conversations_assessed.to_string()),
            metric("conversations_assessed_fraction", num(self.conversations_assessed_fraction)),
            metric("explicit_feedback_turns", self.explicit_feedback_turns.to_string()),
            metric("explicit_feedback_conversations", self.explicit_feedback_conversations.to_string()),
            metric("explicit_feedback_turn_fraction", num(self.explicit_feedback_turn_fraction)),
            metric(
                "explicit_feedback_conversation_fraction",
                num(self.explicit_feedback_conversation_fraction),
            ),
        ]);
        (vec!["metric", "value"], rows)
    }
}

impl Report for Association {
    fn kind(&self) -> ReportKind {
        ReportKind::Precision
    }

    fn rows(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let t = self.table;
        let rows = vec![
            metric("up_positive", t[0][0].to_string()),
            metric("up_negative", t[0][1].to_string()),
            metric("down_positive", t[1][0].to_string()),
            metric("down_negative", t[1][1].to_string()),
            metric("n", self.n.to_string()),
            metric("chi2", num(self.chi2)),
            metric("dof", self.dof.to_string()),
            metric("p_value", num(self.p_value)),
            metric("yates", self.yates.to_string()),
        ];
        (vec!["metric", "value"], rows)
    }
}

impl Report for ChurnReport {
    fn kind(&self) -> ReportKind {
        ReportKind::Churn
    }

    fn rows(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let rows = self
            .per_user
            .iter()
            .map(|u| vec![u.user_id.clone(), num(u.initial_mean_score), u.did_return.to_string()])
            .collect();
        (vec!["user_id", "initial_mean_score", "did_return"], rows)
    }

    fn to_table(&self) -> String {
        let c = &self.correlation;
        let mut out = format!(
            "point-biserial r = {}  t = {}  p = {}  n = {}\n\n",
            num(c.r),
            num(c.t_stat),
            num(c.p_value),
            c.n
        );
        let summary = |name: &str, s: &Option<FiveNumber>| match s {
            Some(s) => vec![
                name.to_string(),
                s.n.to_string(),
                num(s.mean),
                num(s.min),
                num(s.q1),
                num(s.median),
                num(s.q3),
                num(s.max),
            ],
            None => vec![name.to_string(), "0".into()],
        };
        out.push_str(&text_table(
            &["group", "n", "mean", "min", "q1", "median", "q3", "max"],
            &[
                summary("returning", &self.returning),
                summary("non_returning", &self.non_returning),
            ],
        ));
        out
    }
}

impl Report for LengthReport {
    fn kind(&self) -> ReportKind {
        ReportKind::Length
    }

    fn rows(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let rows = self
            .groups
            .iter()
            .map(|(g, l)| {
                let s = &l.summary;
                vec![
                    g.as_str().to_string(),
                    l.n_conversations.to_string(),
                    num(l.mean_turns),
                    num(s.min),
                    num(s.q1),
                    num(s.median),
                    num(s.q3),
                    num(s.max),
                ]
            })
            .collect();
        (
            vec!["group", "n_conversations", "mean_turns", "min", "q1", "median", "q3", "max"],
            rows,
        )
    }
}

impl Report for PerUserReport {
    fn kind(&self) -> ReportKind {
        ReportKind::PerUser
    }

    fn rows(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let rows = self
            .users
            .iter()
            .map(|u| vec![u.user_id.clone(), num(u.mean_score), u.n_assessed_turns.to_string()])
            .collect();
        (vec!["user_id", "mean_score", "n_assessed_turns"], rows)
    }

    fn to_table(&self) -> String {
        let (header, rows) = self.rows();
        let mut out = text_table(&header, &rows);
        let _ = writeln!(out, "\nmean of user means: {}", opt_num(self.mean_of_means));
        out
    }
}
