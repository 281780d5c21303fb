//! Edge-list and budget file formats.
//!
//! Edge list: a header line `n m`, then `m` lines `u v w` with 0-based ids and
//! a non-negative decimal weight. Budgets: `n` lines `v b_v`.

use std::io::{BufRead, Write};

use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::graph::{BudgetVector, Graph, Weight};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Exact parse of `123`, `0.25`, `7.` style decimals.
pub fn parse_decimal(s: &str) -> Option<Weight> {
    let (int, frac) = match s.split_once('.') {
        Some((a, b)) => (a, b),
        None => (s, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.bytes().all(|c| c.is_ascii_digit()) || !frac.bytes().all(|c| c.is_ascii_digit()) {
        return None;
    }
    if frac.len() > 18 {
        return None;
    }
    let den = 10i64.checked_pow(frac.len() as u32)?;
    let int_val: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let frac_val: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    let num = int_val.checked_mul(den)?.checked_add(frac_val)?;
    Some(Weight::new(num, den))
}

/// Exact decimal rendering; `None` if the expansion does not terminate.
pub fn format_decimal(w: &Weight) -> Option<String> {
    if w.is_integer() {
        return Some(w.to_integer().to_string());
    }
    let mut den = *w.denom();
    let mut digits = 0u32;
    while den % 10 == 0 {
        den /= 10;
        digits += 1;
    }
    while den % 2 == 0 || den % 5 == 0 {
        if den % 2 == 0 {
            den /= 2;
        } else {
            den /= 5;
        }
        digits += 1;
    }
    if den != 1 || digits > 18 {
        return None;
    }
    let scaled = (*w * Weight::from_integer(10i64.pow(digits))).to_integer();
    let s = format!("{:0>width$}", scaled.abs(), width = digits as usize + 1);
    let (a, b) = s.split_at(s.len() - digits as usize);
    let b = b.trim_end_matches('0');
    let sign = if scaled < 0 { "-" } else { "" };
    Some(if b.is_empty() { format!("{sign}{a}") } else { format!("{sign}{a}.{b}") })
}

fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
}

pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Graph> {
    let mut lines = content_lines(reader);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing `n m` header"))?;
    let (n, m) = parse_header(&header?, hline)?;
    let mut edges = Vec::with_capacity(m);
    for (lno, line) in lines {
        edges.push(parse_edge_line(&line?, lno, n)?);
        if edges.len() > m {
            return Err(parse_err(lno, format!("more than the declared {m} edges")));
        }
    }
    if edges.len() != m {
        return Err(Error::Dimension { expected: m, found: edges.len() });
    }
    Graph::with_weights(n, edges)
}

/// Non-blank lines with their 1-based line numbers.
pub fn numbered_lines<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    content_lines(reader)
}

/// `n m` header line.
pub fn parse_header(line: &str, lno: usize) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace();
    let n: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(lno, "expected vertex count"))?;
    let m: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(lno, "expected edge count"))?;
    if it.next().is_some() {
        return Err(parse_err(lno, "header has trailing fields"));
    }
    Ok((n, m))
}

/// `u v w` edge line.
pub fn parse_edge_line(line: &str, lno: usize, n: usize) -> Result<(usize, usize, Weight)> {
    let mut f = line.split_whitespace();
    let u: usize = f
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(lno, "expected endpoint u"))?;
    let v: usize = f
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(lno, "expected endpoint v"))?;
    let w = f
        .next()
        .ok_or_else(|| parse_err(lno, "expected weight"))
        .and_then(|t| parse_decimal(t).ok_or_else(|| parse_err(lno, format!("bad weight `{t}`"))))?;
    if f.next().is_some() {
        return Err(parse_err(lno, "trailing fields"));
    }
    if u >= n || v >= n {
        return Err(parse_err(lno, format!("vertex id out of range 0..{n}")));
    }
    if u == v {
        return Err(parse_err(lno, "self-loop"));
    }
    Ok((u, v, w))
}

pub fn write_edge_list<W: Write>(g: &Graph, mut out: W) -> Result<()> {
    writeln!(out, "{} {}", g.n(), g.m())?;
    for e in 0..g.m() {
        let (u, v) = g.endpoints(e);
        let w = g.weight(e);
        let ws = format_decimal(&w)
            .ok_or_else(|| Error::Graph(format!("weight {w} has no finite decimal form")))?;
        writeln!(out, "{u} {v} {ws}")?;
    }
    Ok(())
}

pub fn read_budgets<R: BufRead>(reader: R, n: usize) -> Result<BudgetVector> {
    let mut b: Vec<Option<u32>> = vec![None; n];
    let mut last_line = 0;
    for (lno, line) in content_lines(reader) {
        last_line = lno;
        let line = line?;
        let mut f = line.split_whitespace();
        let v: usize = f
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(lno, "expected vertex id"))?;
        let bv: u32 = f
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(lno, "expected positive integer budget"))?;
        if f.next().is_some() {
            return Err(parse_err(lno, "trailing fields"));
        }
        if v >= n {
            return Err(Error::Dimension { expected: n, found: v + 1 });
        }
        if bv == 0 {
            return Err(parse_err(lno, "budget must be at least 1"));
        }
        if b[v].replace(bv).is_some() {
            return Err(parse_err(lno, format!("vertex {v} listed twice")));
        }
    }
    let found = b.iter().filter(|x| x.is_some()).count();
    if found != n {
        let _ = last_line;
        return Err(Error::Dimension { expected: n, found });
    }
    BudgetVector::new(b.into_iter().map(|x| x.unwrap()).collect())
}

pub fn write_budgets<W: Write>(b: &BudgetVector, mut out: W) -> Result<()> {
    for (v, x) in b.as_slice().iter().enumerate() {
        writeln!(out, "{v} {x}")?;
    }
    Ok(())
}

/// Lossy float view of a weight, for reports.
pub fn weight_f64(w: &Weight) -> f64 {
    if w.is_zero() {
        0.0
    } else {
        w.numer().to_f64().unwrap_or(f64::NAN) / w.denom().to_f64().unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_roundtrip() {
        for s in ["0", "3", "0.25", "12.5", "7.125"] {
            let w = parse_decimal(s).unwrap();
            assert_eq!(format_decimal(&w).unwrap(), s);
        }
        assert_eq!(parse_decimal("7."), Some(Weight::from_integer(7)));
        assert!(parse_decimal("-1").is_none());
        assert!(parse_decimal("1e3").is_none());
        assert!(format_decimal(&Weight::new(1, 3)).is_none());
    }

    #[test]
    fn edge_list_roundtrip() {
        let text = "3 2\n0 1 1.5\n2 1 4\n";
        let g = read_edge_list(text.as_bytes()).unwrap();
        assert_eq!(g.m(), 2);
        assert_eq!(g.weight(1), Weight::from_integer(4));
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "3 2\n0 1 1.5\n1 2 4\n");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = read_edge_list("2 1\n0 x 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = read_edge_list("2 2\n0 1 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 2, found: 1 }));
        let err = read_budgets("0 1\n1 zero\n".as_bytes(), 2).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn budget_mismatch_is_a_dimension_error() {
        assert!(matches!(read_budgets("0 1\n".as_bytes(), 2), Err(Error::Dimension { .. })));
        assert!(matches!(read_budgets("0 1\n5 1\n".as_bytes(), 2), Err(Error::Dimension { .. })));
        let b = read_budgets("1 2\n0 1\n".as_bytes(), 2).unwrap();
        assert_eq!(b.as_slice(), &[1, 2]);
    }
}
