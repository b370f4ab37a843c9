use std::collections::HashSet;
use std::fmt::Write as _;
use std::time::Duration;

use thermoform::io::format_number;

/// How much a numeric result can be trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    CertifiedBound,
    PointEstimate,
    Heuristic,
}

impl Kind {
    pub fn label(self) -> &'static str {
        match self {
            Kind::CertifiedBound => "certified-bound",
            Kind::PointEstimate => "point-estimate",
            Kind::Heuristic => "heuristic",
        }
    }
}

#[derive(Debug, Clone)]
struct Record {
    key: String,
    value: String,
    kind: Option<Kind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Records,
}

/// Command, parameters, labeled results, notes and an optional exported document.
#[derive(Debug, Clone)]
pub struct RunReport {
    command: String,
    parameters: Vec<(String, String)>,
    results: Vec<Record>,
    notes: Vec<String>,
    document: Option<String>,
    appendix: String,
    pub wall_time: Duration,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        RunReport {
            command: command.to_string(),
            parameters: Vec::new(),
            results: Vec::new(),
            notes: Vec::new(),
            document: None,
            appendix: String::new(),
            wall_time: Duration::ZERO,
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.parameters.push((key.to_string(), value.to_string()));
    }

    pub fn number(&mut self, key: impl Into<String>, x: f64, kind: Kind) {
        self.results.push(Record {
            key: key.into(),
            value: format_number(x),
            kind: Some(kind),
        });
    }

    pub fn count(&mut self, key: impl Into<String>, x: impl ToString, kind: Kind) {
        self.results.push(Record {
            key: key.into(),
            value: x.to_string(),
            kind: Some(kind),
        });
    }

    pub fn text(&mut self, key: impl Into<String>, value: impl ToString) {
        self.results.push(Record {
            key: key.into(),
            value: value.to_string(),
            kind: None,
        });
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn document(&mut self, text: String) {
        self.document = Some(text);
    }

    /// Free-form text printed after the results.
    pub fn append(&mut self, text: &str) {
        self.appendix.push_str(text);
    }

    pub fn has_document(&self) -> bool {
        self.document.is_some()
    }

    /// Exported documents are written verbatim; other reports as aligned lines.
    pub fn render_text(&self) -> String {
        if let Some(doc) = &self.document {
            return doc.clone();
        }
        let mut out = String::new();
        let _ = writeln!(out, "command: {}", self.command);
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "  {k} = {v}");
        }
        let width = self.results.iter().map(|r| r.key.len()).max().unwrap_or(0);
        if !self.results.is_empty() {
            out.push_str("results:\n");
        }
        for r in &self.results {
            let _ = match r.kind {
                Some(kind) => writeln!(out, "  {:width$}  {}  [{}]", r.key, r.value, kind.label()),
                None => writeln!(out, "  {:width$}  {}", r.key, r.value),
            };
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out.push_str(&self.appendix);
        let _ = writeln!(out, "wall time: {:.3} s", self.wall_time.as_secs_f64());
        out
    }

    /// `key<TAB>value` lines with unique keys; wall time is left to the caller.
    pub fn render_records(&self) -> String {
        let mut lines: Vec<(String, String)> = vec![("command".into(), self.command.clone())];
        for (k, v) in &self.parameters {
            lines.push((format!("param.{k}"), v.clone()));
        }
        for r in &self.results {
            lines.push((r.key.clone(), r.value.clone()));
            if let Some(kind) = r.kind {
                lines.push((format!("{}.kind", r.key), kind.label().into()));
            }
        }
        for (i, n) in self.notes.iter().enumerate() {
            lines.push((format!("note.{}", i + 1), n.clone()));
        }
        for (name, text) in [("appendix", &self.appendix), ("document", self.document.as_ref().unwrap_or(&String::new()))] {
            for (i, l) in text.lines().enumerate() {
                lines.push((format!("{name}.{}", i + 1), l.to_string()));
            }
        }
        let mut seen = HashSet::new();
        let mut out = String::new();
        for (k, v) in lines {
            assert!(seen.insert(k.clone()), "duplicate record key {k}");
            let _ = writeln!(out, "{k}\t{}", v.replace(['\t', '\n'], " "));
        }
        out
    }
}
