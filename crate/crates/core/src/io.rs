//! Text formats: system-description files, matrices and subspace classes.
//!
//! A system file is line-oriented. Blank lines and text after `#` are ignored.
//!
//! ```text
//! alphabet 2
//! factors 2
//! factor 1 dim 2 beta 1
//! matrix 1 1
//! 2 0
//! 0 1
//! matrix 1 2
//! 0 1
//! 1 0
//! factor 2 dim 2 beta 1
//! ...
//! seed-subspace 1 dim 1
//! 1 0
//! translations
//! 0 0
//! ```
//!
//! Matrix rows hold `d` numbers, decimal or `p/q`. A `seed-subspace j dim l`
//! block lists `l` spanning vectors of factor `j`, one per row. A
//! `translations` block runs to the next keyword and is ignored.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::classes::{Subspace, SubspaceClass};
use crate::error::{Error, Result};
use crate::multilinear::LinearMap;
use crate::potentials::{Factor, MatrixSystem};

/// Parses a decimal or `p/q` number. Rationals come back with a conversion
/// note.
pub fn parse_number(text: &str) -> Result<(f64, Option<String>)> {
    let bad = || Error::invalid(format!("not a number: {text:?}"));
    let value = if let Some((p, q)) = text.split_once('/') {
        let p: f64 = p.trim().parse().map_err(|_| bad())?;
        let q: f64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0.0 {
            return Err(Error::invalid(format!("zero denominator in {text:?}")));
        }
        let v = p / q;
        return finite(v, text).map(|v| (v, Some(format!("{text} converted to {v}"))));
    } else {
        text.parse::<f64>().map_err(|_| bad())?
    };
    finite(value, text).map(|v| (v, None))
}

fn finite(v: f64, text: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("non-finite number {text:?}")))
    }
}

/// A parsed system file.
#[derive(Debug, Clone)]
pub struct SystemFile {
    pub system: MatrixSystem,
    /// `(factor index, subspace)` with 1-based factor indices.
    pub seed_subspaces: Vec<(usize, Subspace)>,
    /// Conversion notes and warnings, in input order.
    pub notes: Vec<String>,
}

struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("")))
            .filter(|(_, l)| !l.trim().is_empty())
            .collect();
        Lines { lines, pos: 0 }
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let l = self.peek();
        self.pos += 1;
        l
    }

    fn last_line(&self) -> usize {
        self.lines.last().map_or(1, |l| l.0)
    }
}

/// Whitespace-separated tokens with their 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn expect_keyword<'a>(
    lines: &mut Lines<'a>,
    keyword: &str,
    args: usize,
) -> Result<(usize, Vec<(usize, &'a str)>)> {
    let end = lines.last_line();
    let (ln, text) = lines
        .next()
        .ok_or_else(|| perr(end, 1, format!("expected `{keyword}`, found end of input")))?;
    let toks = tokens(text);
    if toks[0].1 != keyword {
        return Err(perr(ln, toks[0].0, format!("expected `{keyword}`, found `{}`", toks[0].1)));
    }
    if toks.len() != args + 1 {
        return Err(perr(
            ln,
            toks.last().map_or(1, |t| t.0),
            format!("`{keyword}` takes {args} argument(s)"),
        ));
    }
    Ok((ln, toks[1..].to_vec()))
}

fn int_token(ln: usize, tok: (usize, &str), what: &str) -> Result<usize> {
    tok.1
        .parse()
        .map_err(|_| perr(ln, tok.0, format!("{what} must be a non-negative integer, got `{}`", tok.1)))
}

fn number_rows(lines: &mut Lines<'_>, rows: usize, cols: usize, notes: &mut Vec<String>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let end = lines.last_line();
        let (ln, text) = lines
            .next()
            .ok_or_else(|| perr(end, 1, format!("expected a row of {cols} numbers, found end of input")))?;
        let toks = tokens(text);
        if toks.len() != cols {
            return Err(perr(ln, 1, format!("expected {cols} numbers, found {}", toks.len())));
        }
        for (col, t) in toks {
            let (v, note) = parse_number(t).map_err(|e| perr(ln, col, e.to_string()))?;
            if let Some(n) = note {
                notes.push(format!("line {ln}: {n}"));
            }
            out.push(v);
        }
    }
    Ok(out)
}

/// Parses a system-description document.
pub fn parse_system(text: &str) -> Result<SystemFile> {
    let mut lines = Lines::new(text);
    let mut notes = Vec::new();
    let (ln, a) = expect_keyword(&mut lines, "alphabet", 1)?;
    let n = int_token(ln, a[0], "alphabet size")?;
    if n < 2 {
        return Err(perr(ln, a[0].0, "alphabet size must be at least 2"));
    }
    let (ln, a) = expect_keyword(&mut lines, "factors", 1)?;
    let k = int_token(ln, a[0], "factor count")?;
    if k < 1 {
        return Err(perr(ln, a[0].0, "factor count must be at least 1"));
    }
    let mut factors = Vec::with_capacity(k);
    for j in 1..=k {
        let (ln, a) = expect_keyword(&mut lines, "factor", 5)?;
        if int_token(ln, a[0], "factor index")? != j {
            return Err(perr(ln, a[0].0, format!("expected factor {j}")));
        }
        if a[1].1 != "dim" {
            return Err(perr(ln, a[1].0, "expected `dim`"));
        }
        let d = int_token(ln, a[2], "dimension")?;
        if d < 1 {
            return Err(perr(ln, a[2].0, "dimension must be at least 1"));
        }
        if a[3].1 != "beta" {
            return Err(perr(ln, a[3].0, "expected `beta`"));
        }
        let (beta, note) = parse_number(a[4].1).map_err(|e| perr(ln, a[4].0, e.to_string()))?;
        if let Some(note) = note {
            notes.push(format!("line {ln}: {note}"));
        }
        if beta <= 0.0 {
            return Err(perr(ln, a[4].0, "beta must be positive"));
        }
        let mut gens = Vec::with_capacity(n);
        for i in 1..=n {
            let (ln, a) = expect_keyword(&mut lines, "matrix", 2)?;
            if int_token(ln, a[0], "factor index")? != j {
                return Err(perr(ln, a[0].0, format!("expected matrix {j} {i}")));
            }
            if int_token(ln, a[1], "generator index")? != i {
                return Err(perr(ln, a[1].0, format!("expected matrix {j} {i}")));
            }
            let entries = number_rows(&mut lines, d, d, &mut notes)?;
            gens.push(LinearMap::from_row_major(d, &entries)?);
        }
        factors.push(Factor::new(gens, beta)?);
    }
    let system = MatrixSystem::new(factors)?;
    let dims = system.dims();
    let mut seed_subspaces = Vec::new();
    while let Some((ln, text)) = lines.next() {
        let toks = tokens(text);
        match toks[0].1 {
            "seed-subspace" => {
                if toks.len() != 4 || toks[2].1 != "dim" {
                    return Err(perr(ln, toks[0].0, "expected `seed-subspace j dim l`"));
                }
                let j = int_token(ln, toks[1], "factor index")?;
                if j < 1 || j > k {
                    return Err(perr(ln, toks[1].0, format!("factor index must be in 1..={k}")));
                }
                let d = dims[j - 1];
                let l = int_token(ln, toks[3], "subspace dimension")?;
                if l < 1 || l > d {
                    return Err(perr(ln, toks[3].0, format!("subspace dimension must be in 1..={d}")));
                }
                let rows = number_rows(&mut lines, l, d, &mut notes)?;
                let basis = DMatrix::from_row_slice(l, d, &rows).transpose();
                let s = Subspace::new(basis).map_err(|e| perr(ln, 1, e.to_string()))?;
                seed_subspaces.push((j, s));
            }
            "translations" => {
                notes.push(format!("line {ln}: translations are ignored"));
                while let Some((_, t)) = lines.peek() {
                    let first = tokens(t)[0].1;
                    if first == "seed-subspace" || first == "translations" {
                        break;
                    }
                    lines.next();
                }
            }
            other => return Err(perr(ln, toks[0].0, format!("unexpected `{other}`"))),
        }
    }
    Ok(SystemFile {
        system,
        seed_subspaces,
        notes,
    })
}

/// Shortest decimal that parses back to exactly `x`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() < 1e-5 || x.abs() >= 1e16 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn format_matrix(a: &LinearMap, out: &mut String) {
    for r in 0..a.dim() {
        let row: Vec<String> = (0..a.dim()).map(|c| format_number(a.get(r, c))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

/// Serialises a system in the format read by [`parse_system`].
pub fn export_system(sys: &MatrixSystem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "alphabet {}", sys.alphabet().size());
    let _ = writeln!(out, "factors {}", sys.factors().len());
    for (j, f) in sys.factors().iter().enumerate() {
        let _ = writeln!(out, "factor {} dim {} beta {}", j + 1, f.dim(), format_number(f.beta()));
        for (i, g) in f.generators().iter().enumerate() {
            let _ = writeln!(out, "matrix {} {}", j + 1, i + 1);
            format_matrix(g, &mut out);
        }
    }
    out
}

/// Member count, then per member and factor an `ℓ × d` block of basis
/// vectors, then the adjacency matrix as 0/1 rows.
pub fn export_class(class: &SubspaceClass) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "members {}", class.len());
    for (r, m) in class.members().iter().enumerate() {
        for (j, s) in m.iter().enumerate() {
            let _ = writeln!(out, "member {} factor {} dim {}", r + 1, j + 1, s.dim());
            for c in 0..s.dim() {
                let row: Vec<String> = s.basis().column(c).iter().map(|&x| format_number(x)).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
    }
    out.push_str("adjacency\n");
    for row in class.adjacency() {
        let row: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
