//! Program text format: UTF-8, LF line endings, 2-space indents, one
//! statement per line. `render` omits the exit line; `parse` appends it.

use thiserror::Error;

use super::{AugOp, Cmp, Cond, Line, LineKind, Program, Var, MAX_INDENT, MAX_INIT};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}, col {col}: {msg}")]
pub struct ParseError {
    /// 1-based source line.
    pub line: usize,
    /// 1-based column.
    pub col: usize,
    pub msg: String,
}

fn err(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        line,
        col,
        msg: msg.into(),
    }
}

/// Renders one line (without indentation or newline).
pub fn render_line(kind: &LineKind) -> String {
    match kind {
        LineKind::Assign { var, value } => format!("{var} = {value}"),
        LineKind::AugAssign { op, var, operand } => {
            format!("{var} {} {operand}", op.symbol())
        }
        LineKind::While { var, operand } => format!("while {var} > {operand}:"),
        LineKind::If { cond } => format!("if v0 % 10 {} {}:", cond.cmp.symbol(), cond.operand),
        LineKind::Else => "else:".to_string(),
        LineKind::Break => "break".to_string(),
        LineKind::Continue => "continue".to_string(),
        LineKind::Pass => "pass".to_string(),
        LineKind::Exit => "<exit>".to_string(),
    }
}

/// Renders a desugared program back to source text. The exit line is not
/// part of the surface syntax and is skipped.
pub fn render(p: &Program) -> String {
    let mut out = String::new();
    for line in &p.lines {
        if line.kind == LineKind::Exit {
            continue;
        }
        for _ in 0..line.indent {
            out.push_str("  ");
        }
        out.push_str(&render_line(&line.kind));
        out.push('\n');
    }
    out
}

struct RawLine<'a> {
    num: usize,
    indent: usize,
    body: &'a str,
    /// 1-based column where the statement text begins.
    col: usize,
}

/// Parses program text into a desugared [`Program`], appending the exit line.
pub fn parse(text: &str) -> Result<Program, ParseError> {
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let num = i + 1;
        if line.trim().is_empty() {
            return Err(err(num, 1, "blank lines are not allowed"));
        }
        let mut spaces = 0;
        for (j, ch) in line.char_indices() {
            match ch {
                ' ' => spaces += 1,
                '\t' => return Err(err(num, j + 1, "indentation must use spaces, found tab")),
                _ => break,
            }
        }
        if spaces % 2 != 0 {
            return Err(err(
                num,
                spaces,
                format!("indentation of {spaces} spaces is not a multiple of 2"),
            ));
        }
        let indent = spaces / 2;
        if indent > MAX_INDENT {
            return Err(err(
                num,
                1,
                format!("indent level {indent} exceeds the maximum of {MAX_INDENT}"),
            ));
        }
        raw.push(RawLine {
            num,
            indent,
            body: &line[spaces..],
            col: spaces + 1,
        });
    }
    if raw.is_empty() {
        return Err(err(1, 1, "program must begin with v0 = M"));
    }

    let mut lines = Vec::with_capacity(raw.len() + 1);
    // Stack of open block headers as (indent of header, kind).
    #[derive(PartialEq)]
    enum Block {
        While,
        If,
        Else,
    }
    let mut stack: Vec<(usize, Block)> = Vec::new();
    // Set when an if-block at the given indent just closed and may accept
    // an `else:`.
    let mut else_ok_at: Option<usize> = None;

    for (i, rl) in raw.iter().enumerate() {
        let kind = parse_statement(rl)?;

        if i == 0 {
            if rl.indent != 0 {
                return Err(err(rl.num, 1, "first line must not be indented"));
            }
            match kind {
                LineKind::Assign { var: Var(0), value } if value <= MAX_INIT => {}
                _ => return Err(err(rl.num, rl.col, "program must begin with v0 = M")),
            }
        } else {
            let prev = &raw[i - 1];
            let prev_is_header = matches!(
                lines.last().map(|l: &Line| l.kind),
                Some(LineKind::While { .. } | LineKind::If { .. } | LineKind::Else)
            );
            if prev_is_header {
                if rl.indent != prev.indent + 1 {
                    return Err(err(
                        rl.num,
                        rl.col,
                        "block body must be indented one level past its header",
                    ));
                }
            } else if rl.indent > prev.indent {
                return Err(err(rl.num, rl.col, "unexpected indent"));
            }
        }

        // Close blocks we have dedented out of.
        while let Some((hdr_indent, _)) = stack.last() {
            if rl.indent > *hdr_indent {
                break;
            }
            let (hdr_indent, block) = stack.pop().unwrap();
            if hdr_indent == rl.indent && block == Block::If {
                else_ok_at = Some(hdr_indent);
            } else if hdr_indent == rl.indent {
                else_ok_at = None;
            }
        }

        match kind {
            LineKind::Else => {
                if else_ok_at != Some(rl.indent) {
                    return Err(err(
                        rl.num,
                        rl.col,
                        "else: has no matching if at this indent level",
                    ));
                }
                else_ok_at = None;
                stack.push((rl.indent, Block::Else));
            }
            LineKind::While { .. } => {
                else_ok_at = None;
                stack.push((rl.indent, Block::While));
            }
            LineKind::If { .. } => {
                else_ok_at = None;
                stack.push((rl.indent, Block::If));
            }
            LineKind::Break | LineKind::Continue => {
                else_ok_at = None;
                if !stack.iter().any(|(_, b)| *b == Block::While) {
                    let what = if kind == LineKind::Break {
                        "break"
                    } else {
                        "continue"
                    };
                    return Err(err(rl.num, rl.col, format!("{what} outside of a loop")));
                }
            }
            _ => {
                else_ok_at = None;
            }
        }

        lines.push(Line {
            indent: rl.indent as u8,
            kind,
        });
    }

    // A header as the final line has an empty body.
    if matches!(
        lines.last().map(|l| l.kind),
        Some(LineKind::While { .. } | LineKind::If { .. } | LineKind::Else)
    ) {
        let last = raw.last().unwrap();
        return Err(err(last.num, last.col, "block header has an empty body"));
    }

    lines.push(Line {
        indent: 0,
        kind: LineKind::Exit,
    });
    Ok(Program { lines })
}

fn parse_statement(rl: &RawLine) -> Result<LineKind, ParseError> {
    let s = rl.body;
    match s {
        "pass" => return Ok(LineKind::Pass),
        "break" => return Ok(LineKind::Break),
        "continue" => return Ok(LineKind::Continue),
        "else:" => return Ok(LineKind::Else),
        _ => {}
    }
    if let Some(rest) = s.strip_prefix("while ") {
        return parse_while(rl, rest);
    }
    if let Some(rest) = s.strip_prefix("if ") {
        return parse_if(rl, rest);
    }
    parse_assignment(rl, s)
}

fn parse_var(rl: &RawLine, tok: &str, offset: usize) -> Result<Var, ParseError> {
    let col = rl.col + offset;
    let digits = tok
        .strip_prefix('v')
        .ok_or_else(|| err(rl.num, col, format!("expected a variable, found `{tok}`")))?;
    match digits.parse::<u8>() {
        Ok(d) if d <= 9 && digits.len() == 1 => Ok(Var(d)),
        _ => Err(err(
            rl.num,
            col,
            format!("variable must be one of v0..v9, found `{tok}`"),
        )),
    }
}

fn parse_operand(rl: &RawLine, tok: &str, offset: usize, max: u16) -> Result<u16, ParseError> {
    let col = rl.col + offset;
    match tok.parse::<u16>() {
        Ok(v) if v <= max && !tok.is_empty() && (tok == "0" || !tok.starts_with('0')) => Ok(v),
        _ => Err(err(
            rl.num,
            col,
            format!("expected an integer in 0..={max}, found `{tok}`"),
        )),
    }
}

fn parse_while(rl: &RawLine, rest: &str) -> Result<LineKind, ParseError> {
    // while vK > N:
    let body = rest.strip_suffix(':').ok_or_else(|| {
        err(
            rl.num,
            rl.col + rl.body.len(),
            "while statement must end with `:`",
        )
    })?;
    let parts: Vec<&str> = body.split(' ').collect();
    if parts.len() != 3 || parts[1] != ">" {
        return Err(err(
            rl.num,
            rl.col,
            "while condition must have the form `while vK > N:`",
        ));
    }
    let var = parse_var(rl, parts[0], 6)?;
    let operand = parse_operand(rl, parts[2], 6 + parts[0].len() + 3, MAX_INIT)?;
    Ok(LineKind::While { var, operand })
}

fn parse_if(rl: &RawLine, rest: &str) -> Result<LineKind, ParseError> {
    // if v0 % 10 O N:
    let body = rest.strip_suffix(':').ok_or_else(|| {
        err(
            rl.num,
            rl.col + rl.body.len(),
            "if statement must end with `:`",
        )
    })?;
    let parts: Vec<&str> = body.split(' ').collect();
    if parts.len() != 5 || parts[0] != "v0" || parts[1] != "%" || parts[2] != "10" {
        return Err(err(
            rl.num,
            rl.col,
            "if condition must have the form `if v0 % 10 O N:`",
        ));
    }
    let cmp = match parts[3] {
        ">" => Cmp::Gt,
        "<" => Cmp::Lt,
        ">=" => Cmp::Ge,
        "<=" => Cmp::Le,
        other => {
            return Err(err(
                rl.num,
                rl.col + 11,
                format!("comparator must be one of > < >= <=, found `{other}`"),
            ))
        }
    };
    let operand = parse_operand(rl, parts[4], 12 + parts[3].len(), MAX_INIT)?;
    Ok(LineKind::If {
        cond: Cond { cmp, operand },
    })
}

fn parse_assignment(rl: &RawLine, s: &str) -> Result<LineKind, ParseError> {
    let parts: Vec<&str> = s.split(' ').collect();
    if parts.len() != 3 {
        return Err(err(
            rl.num,
            rl.col,
            format!("unrecognized statement `{s}`"),
        ));
    }
    let var = parse_var(rl, parts[0], 0)?;
    let operand_off = parts[0].len() + parts[1].len() + 2;
    match parts[1] {
        "=" => {
            let value = parse_operand(rl, parts[2], operand_off, MAX_INIT)?;
            Ok(LineKind::Assign { var, value })
        }
        "+=" | "-=" | "*=" => {
            let op = match parts[1] {
                "+=" => AugOp::Add,
                "-=" => AugOp::Sub,
                _ => AugOp::Mul,
            };
            let operand = parse_operand(rl, parts[2], operand_off, MAX_INIT)?;
            Ok(LineKind::AugAssign { op, var, operand })
        }
        other => Err(err(
            rl.num,
            rl.col + parts[0].len() + 1,
            format!("unknown operator `{other}`"),
        )),
    }
}
