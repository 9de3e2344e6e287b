//! Line-oriented instance text format.
//!
//! ```text
//! # comment
//! instance queens-4
//! var x1 : 1 2 3
//! var t aux : 0 1
//! alldiff x1 x2 x3
//! diseq x1 t
//! table allowed (x1 t) ; 1,0 ; 2,1
//! ```
//!
//! The `instance` line is optional. Variables may be referenced before they
//! are declared; scopes are resolved once the whole file has been read.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Constraint, ConstraintKind, CspInstance, ModelError, Polarity, Variable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("constraint {index}: unknown variable `{name}`")]
    UnknownVariable { index: usize, name: String },
    #[error("constraint {index}: tuple {tuple} has arity {found}, expected {expected}")]
    ArityMismatch {
        index: usize,
        tuple: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Model(ModelError),
}

impl From<ModelError> for ParseError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::ArityMismatch {
                index,
                tuple,
                expected,
                found,
            } => ParseError::ArityMismatch {
                index,
                tuple,
                expected,
                found,
            },
            other => ParseError::Model(other),
        }
    }
}

struct RawConstraint {
    kind: RawKind,
    scope: Vec<String>,
}

enum RawKind {
    AllDiff,
    Diseq,
    Table(Polarity, Vec<Vec<i64>>),
}

struct Line<'a> {
    number: usize,
    text: &'a str,
}

impl<'a> Line<'a> {
    fn err(&self, at: &str, message: impl Into<String>) -> ParseError {
        // `at` is always a subslice of `text`.
        let offset = at.as_ptr() as usize - self.text.as_ptr() as usize;
        ParseError::Syntax {
            line: self.number,
            column: self.text[..offset].chars().count() + 1,
            message: message.into(),
        }
    }

    fn err_at_end(&self, message: impl Into<String>) -> ParseError {
        self.err(&self.text[self.text.len()..], message)
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || "():;,#".contains(c))
}

fn parse_int<'a>(line: &Line<'a>, tok: &'a str) -> Result<i64, ParseError> {
    tok.parse::<i64>()
        .map_err(|_| line.err(tok, format!("expected an integer, found `{tok}`")))
}

pub fn parse_instance(text: &str) -> Result<CspInstance, ParseError> {
    let mut name: Option<String> = None;
    let mut variables = Vec::new();
    let mut raw = Vec::new();

    for (i, full) in text.lines().enumerate() {
        let content = match full.find('#') {
            Some(pos) => &full[..pos],
            None => full,
        };
        let line = Line {
            number: i + 1,
            text: full,
        };
        let trimmed = content.trim_start();
        if trimmed.trim().is_empty() {
            continue;
        }
        let keyword = trimmed.split_whitespace().next().unwrap_or_default();
        let rest = &trimmed[keyword.len()..];
        match keyword {
            "instance" => {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                match toks.as_slice() {
                    [n] if valid_name(n) => name = Some((*n).to_string()),
                    _ => return Err(line.err(keyword, "expected `instance <name>`")),
                }
            }
            "var" => variables.push(parse_var(&line, rest)?),
            "alldiff" | "diseq" => {
                let scope: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
                if let Some(bad) = rest.split_whitespace().find(|t| !valid_name(t)) {
                    return Err(line.err(bad, format!("invalid variable name `{bad}`")));
                }
                let kind = if keyword == "alldiff" {
                    if scope.len() < 2 {
                        return Err(line.err_at_end("alldiff needs at least two variables"));
                    }
                    RawKind::AllDiff
                } else {
                    if scope.len() != 2 {
                        return Err(line.err(keyword, "diseq takes exactly two variables"));
                    }
                    RawKind::Diseq
                };
                raw.push(RawConstraint { kind, scope });
            }
            "table" => raw.push(parse_table(&line, rest)?),
            other => return Err(line.err(other, format!("unknown directive `{other}`"))),
        }
    }

    let instance = CspInstance::new(name.unwrap_or_else(|| "unnamed".into()), variables, vec![])?;
    let lookup = instance.name_lookup();
    let mut constraints = Vec::with_capacity(raw.len());
    for (index, rc) in raw.into_iter().enumerate() {
        let mut scope = Vec::with_capacity(rc.scope.len());
        for n in &rc.scope {
            match lookup.get(n.as_str()) {
                Some(&v) => scope.push(v),
                None => return Err(ParseError::UnknownVariable { index, name: n.clone() }),
            }
        }
        constraints.push(match rc.kind {
            RawKind::AllDiff => Constraint::all_different(scope),
            RawKind::Diseq => Constraint::disequality(scope[0], scope[1]),
            RawKind::Table(p, tuples) => Constraint::table(scope, p, tuples),
        });
    }
    let CspInstance { name, variables, .. } = instance;
    Ok(CspInstance::new(name, variables, constraints)?)
}

fn parse_var<'a>(line: &Line<'a>, rest: &'a str) -> Result<Variable, ParseError> {
    let Some(colon) = rest.find(':') else {
        return Err(line.err_at_end("expected `:` before the domain"));
    };
    let head: Vec<&str> = rest[..colon].split_whitespace().collect();
    let (name, auxiliary) = match head.as_slice() {
        [n] => (*n, false),
        [n, "aux"] => (*n, true),
        [_, flag] => return Err(line.err(flag, format!("unknown variable flag `{flag}`"))),
        _ => return Err(line.err(rest, "expected `var <name> [aux] : values`")),
    };
    if !valid_name(name) {
        return Err(line.err(name, format!("invalid variable name `{name}`")));
    }
    let domain = rest[colon + 1..]
        .split_whitespace()
        .map(|t| parse_int(line, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Variable {
        name: name.to_string(),
        domain,
        auxiliary,
    })
}

fn parse_table<'a>(line: &Line<'a>, rest: &'a str) -> Result<RawConstraint, ParseError> {
    let body = rest.trim_start();
    let polarity_tok = body.split(|c: char| c.is_whitespace() || c == '(').next().unwrap_or("");
    let polarity = match polarity_tok {
        "allowed" => Polarity::Allowed,
        "disallowed" => Polarity::Disallowed,
        _ => return Err(line.err(body, "expected `allowed` or `disallowed`")),
    };
    let after = body[polarity_tok.len()..].trim_start();
    if !after.starts_with('(') {
        return Err(line.err(after, "expected `(` opening the scope"));
    }
    let Some(close) = after.find(')') else {
        return Err(line.err_at_end("unterminated scope, expected `)`"));
    };
    let scope_text = &after[1..close];
    if let Some(bad) = scope_text.split_whitespace().find(|t| !valid_name(t)) {
        return Err(line.err(bad, format!("invalid variable name `{bad}`")));
    }
    let scope: Vec<String> = scope_text.split_whitespace().map(str::to_string).collect();
    if scope.is_empty() {
        return Err(line.err(scope_text, "table scope is empty"));
    }
    let tail = after[close + 1..].trim_start();
    let mut tuples = Vec::new();
    if !tail.trim().is_empty() {
        if !tail.starts_with(';') {
            return Err(line.err(tail, "expected `;` before the first tuple"));
        }
        for chunk in tail[1..].split(';') {
            if chunk.trim().is_empty() {
                return Err(line.err(chunk, "empty tuple"));
            }
            let tuple = chunk
                .split(',')
                .map(|t| {
                    let t = t.trim();
                    parse_int(line, t)
                })
                .collect::<Result<Vec<_>, _>>()?;
            tuples.push(tuple);
        }
    }
    Ok(RawConstraint {
        kind: RawKind::Table(polarity, tuples),
        scope,
    })
}

/// Writes an instance in the text format. `parse_instance` reads it back to an
/// equal instance.
pub fn serialize_instance(instance: &CspInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "instance {}", instance.name());
    for v in instance.variables() {
        out.push_str("var ");
        out.push_str(&v.name);
        if v.auxiliary {
            out.push_str(" aux");
        }
        out.push_str(" :");
        for x in &v.domain {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    let names = |scope: &[usize]| -> String {
        scope
            .iter()
            .map(|&i| instance.variables()[i].name.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    };
    for c in instance.constraints() {
        match &c.kind {
            ConstraintKind::AllDifferent => {
                let _ = writeln!(out, "alldiff {}", names(&c.scope));
            }
            ConstraintKind::Disequality => {
                let _ = writeln!(out, "diseq {}", names(&c.scope));
            }
            ConstraintKind::Table(t) => {
                let _ = write!(out, "table {} ({})", t.polarity.as_str(), names(&c.scope));
                for tuple in &t.tuples {
                    let parts: Vec<String> = tuple.iter().map(i64::to_string).collect();
                    let _ = write!(out, " ; {}", parts.join(","));
                }
                out.push('\n');
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_three_variable_alldiff() {
        let inst = parse_instance("# tiny\nvar x1 : 1 2 3\nvar x2 : 1 2 3\nvar x3: 1 2 3\nalldiff x1 x2 x3\n").unwrap();
        assert_eq!(inst.num_variables(), 3);
        assert_eq!(inst.constraints().len(), 1);
        assert_eq!(inst.constraints()[0].kind, ConstraintKind::AllDifferent);
        assert_eq!(inst.name(), "unnamed");
    }

    #[test]
    fn unknown_variable_is_named() {
        let err = parse_instance("var x : 1 2\ndiseq x y\n").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownVariable {
                index: 0,
                name: "y".into()
            }
        );
        assert!(err.to_string().contains("`y`"));
    }

    #[test]
    fn table_arity_mismatch() {
        let err = parse_instance("var a : 1 2\nvar b : 1 2\ntable allowed (a b) ; 1,2 ; 1,2,3\n").unwrap_err();
        assert!(matches!(
            err,
            ParseError::ArityMismatch {
                index: 0,
                tuple: 1,
                expected: 2,
                found: 3
            }
        ));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_instance("var a : 1 2\nvar b : 1 x\n").unwrap_err();
        assert_eq!(
            err,
            ParseError::Syntax {
                line: 2,
                column: 11,
                message: "expected an integer, found `x`".into()
            }
        );
        let err = parse_instance("var a : 1\nfrobnicate a\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, column: 1, .. }));
    }

    #[test]
    fn preserves_orders_and_flags() {
        let text = "instance t\nvar b aux : 3 1 2\nvar a : 2 1\ntable disallowed (a b) ; 1,3 ; 2,2\ntable allowed (b)\ndiseq a b\n";
        let inst = parse_instance(text).unwrap();
        assert_eq!(inst.variables()[0].domain, vec![3, 1, 2]);
        assert!(inst.variables()[0].auxiliary);
        assert_eq!(inst.constraints()[0].scope, vec![1, 0]);
        assert_eq!(serialize_instance(&inst), text);
    }

    #[test]
    fn forward_references_resolve() {
        let inst = parse_instance("diseq a b\nvar a : 1\nvar b : 2\n").unwrap();
        assert_eq!(inst.constraints()[0].scope, vec![0, 1]);
    }
}
