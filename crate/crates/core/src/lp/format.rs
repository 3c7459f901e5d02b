//! CPLEX-style LP text export and import.
//!
//! Numbers are written with `f64`'s `Display`, which yields the shortest
//! string that parses back to the identical value, so export followed by
//! parse reproduces the problem bit for bit. Every variable is listed in the
//! `Bounds` section, which also fixes the column order on import.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Bounds, LPProblem, LpError, Relation, Row, Sense};

const WRAP: usize = 100;

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn export_lp(p: &LPProblem, comment: &str) -> Result<String, LpError> {
    p.validate()?;
    let mut seen = std::collections::HashSet::new();
    for name in &p.var_names {
        if !valid_name(name) || !seen.insert(name.as_str()) {
            return Err(LpError::InvalidName(name.clone()));
        }
    }

    let mut out = String::new();
    for line in comment.lines() {
        let _ = writeln!(out, "\\ {line}");
    }
    out.push_str(match p.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    write_expression(&mut out, "obj:", &p.cost, &p.var_names, None);
    out.push_str("Subject To\n");
    for (r, row) in p.rows.iter().enumerate() {
        let label = format!("c{}:", r + 1);
        write_expression(&mut out, &label, &row.coeffs, &p.var_names, Some((row.relation, row.rhs)));
    }
    out.push_str("Bounds\n");
    for (b, name) in p.bounds.iter().zip(&p.var_names) {
        let line = match (b.lower.is_finite(), b.upper.is_finite()) {
            (true, false) => format!(" {name} >= {}", b.lower),
            (true, true) => format!(" {} <= {name} <= {}", b.lower, b.upper),
            (false, true) => format!(" -inf <= {name} <= {}", b.upper),
            (false, false) => format!(" {name} free"),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("End\n");
    Ok(out)
}

fn write_expression(
    out: &mut String,
    label: &str,
    coeffs: &[f64],
    names: &[String],
    tail: Option<(Relation, f64)>,
) {
    let mut tokens: Vec<String> = Vec::new();
    for (&a, name) in coeffs.iter().zip(names) {
        if a == 0.0 {
            continue;
        }
        if tokens.is_empty() {
            tokens.push(format!("{a}"));
        } else if a < 0.0 {
            tokens.push("-".into());
            tokens.push(format!("{}", -a));
        } else {
            tokens.push("+".into());
            tokens.push(format!("{a}"));
        }
        tokens.push(name.clone());
    }
    if tokens.is_empty() {
        if let Some(name) = names.first() {
            tokens.push("0".into());
            tokens.push(name.clone());
        }
    }
    if let Some((rel, rhs)) = tail {
        tokens.push(rel.to_string());
        tokens.push(format!("{rhs}"));
    }

    let mut line = format!(" {label}");
    for t in tokens {
        if line.len() + 1 + t.len() > WRAP {
            out.push_str(&line);
            out.push('\n');
            line = String::from("  ");
        }
        line.push(' ');
        line.push_str(&t);
    }
    out.push_str(&line);
    out.push('\n');
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    End,
}

fn section_header(line: &str) -> Option<Section> {
    match line.trim().to_ascii_lowercase().as_str() {
        "minimize" | "minimise" | "min" | "maximize" | "maximise" | "max" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" => Some(Section::Bounds),
        "end" => Some(Section::End),
        _ => None,
    }
}

fn parse_number(tok: &str) -> Option<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => {
            let first = tok.chars().next()?;
            if first.is_ascii_digit() || matches!(first, '.' | '-' | '+') {
                tok.parse().ok()
            } else {
                None
            }
        }
    }
}

fn parse_relation(tok: &str) -> Option<Relation> {
    match tok {
        "<=" | "=<" | "<" => Some(Relation::Le),
        ">=" | "=>" | ">" => Some(Relation::Ge),
        "=" => Some(Relation::Eq),
        _ => None,
    }
}

/// A linear expression as parsed: (name, coefficient) pairs in order of appearance.
type Terms = Vec<(String, f64)>;

fn parse_terms(tokens: &[(usize, String)]) -> Result<Terms, LpError> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for (line, tok) in tokens {
        match tok.as_str() {
            "+" => {}
            "-" => sign = -sign,
            _ => {
                if let Some(v) = parse_number(tok) {
                    if coef.is_some() {
                        return Err(LpError::Parse { line: *line, message: format!("unexpected number {tok}") });
                    }
                    coef = Some(v);
                } else if valid_name(tok) {
                    terms.push((tok.clone(), sign * coef.unwrap_or(1.0)));
                    sign = 1.0;
                    coef = None;
                } else {
                    return Err(LpError::Parse { line: *line, message: format!("unexpected token {tok:?}") });
                }
            }
        }
    }
    if coef.is_some() {
        let line = tokens.last().map_or(0, |t| t.0);
        return Err(LpError::Parse { line, message: "coefficient without a variable".into() });
    }
    Ok(terms)
}

struct PendingRow {
    line: usize,
    terms: Terms,
    relation: Relation,
    rhs: f64,
}

fn parse_row(tokens: &[(usize, String)]) -> Result<PendingRow, LpError> {
    let line = tokens[0].0;
    let rel_at = tokens
        .iter()
        .position(|(_, t)| parse_relation(t).is_some())
        .ok_or_else(|| LpError::Parse { line, message: "constraint without relation".into() })?;
    let relation = parse_relation(&tokens[rel_at].1).unwrap();
    let rest = &tokens[rel_at + 1..];
    let rhs = match rest {
        [(_, t)] => parse_number(t),
        [(_, s), (_, t)] if s == "-" => parse_number(t).map(|v| -v),
        [(_, s), (_, t)] if s == "+" => parse_number(t),
        _ => None,
    }
    .filter(|v| v.is_finite())
    .ok_or_else(|| LpError::Parse { line, message: "expected a finite right-hand side".into() })?;
    Ok(PendingRow { line, terms: parse_terms(&tokens[..rel_at])?, relation, rhs })
}

fn parse_bound(line: usize, text: &str) -> Result<(String, Bounds), LpError> {
    let err = |message: &str| LpError::Parse { line, message: message.to_string() };
    let toks: Vec<&str> = text.split_whitespace().collect();
    let num = |t: &str| parse_number(t).ok_or_else(|| err(&format!("expected a number, found {t:?}")));
    match toks.as_slice() {
        [name, kw] if kw.eq_ignore_ascii_case("free") => Ok((name.to_string(), Bounds::FREE)),
        [name, rel, v] if valid_name(name) => {
            let v = num(v)?;
            match parse_relation(rel) {
                Some(Relation::Ge) => Ok((name.to_string(), Bounds::new(v, f64::INFINITY))),
                Some(Relation::Le) => Ok((name.to_string(), Bounds::new(0.0, v))),
                Some(Relation::Eq) => Ok((name.to_string(), Bounds::new(v, v))),
                None => Err(err("expected a relation")),
            }
        }
        [lo, r1, name, r2, hi] if valid_name(name) => {
            if parse_relation(r1) != Some(Relation::Le) || parse_relation(r2) != Some(Relation::Le) {
                return Err(err("double bound must read `lower <= name <= upper`"));
            }
            Ok((name.to_string(), Bounds::new(num(lo)?, num(hi)?)))
        }
        _ => Err(err("unrecognised bound")),
    }
}

/// Parse LP text produced by [`export_lp`] (or hand-written in the same dialect).
///
/// Variables listed in `Bounds` come first, in that order; any further
/// variables are appended in order of first appearance with nonnegative bounds.
pub fn parse_lp(text: &str) -> Result<LPProblem, LpError> {
    let mut section = Section::Preamble;
    let mut sense = None;
    let mut objective_tokens: Vec<(usize, String)> = Vec::new();
    let mut row_chunks: Vec<Vec<(usize, String)>> = Vec::new();
    let mut bound_lines: Vec<(usize, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(next) = section_header(line) {
            if next == Section::Objective {
                if sense.is_some() {
                    return Err(LpError::Parse { line: line_no, message: "second objective section".into() });
                }
                let lower = line.trim().to_ascii_lowercase();
                sense = Some(if lower.starts_with("min") { Sense::Minimize } else { Sense::Maximize });
            }
            section = next;
            continue;
        }
        match section {
            Section::Preamble => {
                return Err(LpError::Parse { line: line_no, message: "expected Minimize or Maximize".into() })
            }
            Section::End => return Err(LpError::Parse { line: line_no, message: "content after End".into() }),
            Section::Objective => {
                for tok in line.split_whitespace() {
                    if !tok.ends_with(':') {
                        objective_tokens.push((line_no, tok.to_string()));
                    }
                }
            }
            Section::Constraints => {
                for tok in line.split_whitespace() {
                    if tok.ends_with(':') {
                        row_chunks.push(Vec::new());
                    } else {
                        if row_chunks.is_empty() {
                            row_chunks.push(Vec::new());
                        }
                        row_chunks.last_mut().unwrap().push((line_no, tok.to_string()));
                    }
                }
            }
            Section::Bounds => bound_lines.push((line_no, line.to_string())),
        }
    }
    let sense = sense.ok_or(LpError::Parse { line: 0, message: "missing objective section".into() })?;

    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut bounds: Vec<Bounds> = Vec::new();
    for (line, text) in &bound_lines {
        let (name, b) = parse_bound(*line, text)?;
        if index.contains_key(&name) {
            return Err(LpError::InvalidName(name));
        }
        index.insert(name.clone(), names.len());
        names.push(name);
        bounds.push(b);
    }

    let objective = parse_terms(&objective_tokens)?;
    let rows = row_chunks
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| parse_row(c))
        .collect::<Result<Vec<_>, _>>()?;

    let mut intern = |name: &str| -> usize {
        if let Some(&j) = index.get(name) {
            return j;
        }
        index.insert(name.to_string(), names.len());
        names.push(name.to_string());
        bounds.push(Bounds::NONNEGATIVE);
        names.len() - 1
    };
    let objective: Vec<(usize, f64)> = objective.iter().map(|(n, a)| (intern(n), *a)).collect();
    let rows: Vec<(PendingRow, Vec<(usize, f64)>)> = rows
        .into_iter()
        .map(|r| {
            let cols = r.terms.iter().map(|(n, a)| (intern(n), *a)).collect();
            (r, cols)
        })
        .collect();

    let n = names.len();
    let mut cost = vec![0.0; n];
    for (j, a) in objective {
        cost[j] += a;
    }
    let mut problem = LPProblem::new(sense, cost);
    problem.var_names = names;
    problem.bounds = bounds;
    for (r, cols) in rows {
        let mut coeffs = vec![0.0; n];
        for (j, a) in cols {
            coeffs[j] += a;
        }
        if coeffs.iter().any(|a| !a.is_finite()) {
            return Err(LpError::Parse { line: r.line, message: "non-finite coefficient".into() });
        }
        problem.rows.push(Row::new(coeffs, r.relation, r.rhs));
    }
    problem.validate()?;
    Ok(problem)
}
