//! SDPA sparse format (`.dat-s`) reader and writer, plus the CSV report.
//!
//! Objective and constraint matrices are taken exactly as stored: the file's
//! `F_0` becomes `C` and `F_i` becomes `A_i`.

use std::fmt::Write as _;

use crate::error::ParseError;
use crate::model::{Block, CoeffMatrix, SdpProblem, SPARSITY_THRESHOLD};

/// One `matno blkno i j value` record (1-based block and indices).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpaEntry {
    pub matno: usize,
    pub blkno: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

fn is_comment(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with('"') || t.starts_with('*')
}

fn is_separator(c: char) -> bool {
    c.is_whitespace() || matches!(c, ',' | '{' | '}' | '(' | ')')
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64, ParseError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| ParseError::new(line, format!("malformed number '{tok}' in {what}")))?;
    if !v.is_finite() {
        return Err(ParseError::new(line, format!("non-finite value '{tok}' in {what}")));
    }
    Ok(v)
}

fn parse_int(tok: &str, line: usize, what: &str) -> Result<i64, ParseError> {
    tok.parse()
        .map_err(|_| ParseError::new(line, format!("malformed integer '{tok}' for {what}")))
}

/// Header lines carry trailing annotations such as `=mdim`; only the leading
/// numeric tokens count.
fn numeric_tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(is_separator)
        .filter(|t| !t.is_empty())
        .take_while(|t| !t.starts_with('=') && !t.starts_with('"') && !t.starts_with('*'))
}

pub fn parse_sdpa(text: &str) -> Result<SdpProblem, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !is_comment(l));

    let mut next_header = |what: &str| {
        lines
            .next()
            .ok_or_else(|| ParseError::new(text.lines().count() + 1, format!("missing {what} line")))
    };

    let (ln, l) = next_header("constraint count")?;
    let tok = numeric_tokens(l)
        .next()
        .ok_or_else(|| ParseError::new(ln, "missing constraint count"))?;
    let m = parse_int(tok, ln, "constraint count")?;
    if m < 0 {
        return Err(ParseError::new(ln, "negative constraint count"));
    }
    let m = m as usize;

    let (ln, l) = next_header("block count")?;
    let tok = numeric_tokens(l)
        .next()
        .ok_or_else(|| ParseError::new(ln, "missing block count"))?;
    let nblocks = parse_int(tok, ln, "block count")?;
    if nblocks <= 0 {
        return Err(ParseError::new(ln, "block count must be positive"));
    }
    let nblocks = nblocks as usize;

    let (ln, l) = next_header("block sizes")?;
    let sizes: Vec<&str> = numeric_tokens(l).collect();
    if sizes.len() != nblocks {
        return Err(ParseError::new(
            ln,
            format!("expected {nblocks} block sizes, found {}", sizes.len()),
        ));
    }
    let mut blocks = Vec::with_capacity(nblocks);
    for s in sizes {
        let v = parse_int(s, ln, "block size")?;
        blocks.push(match v {
            0 => return Err(ParseError::new(ln, "block size 0")),
            v if v > 0 => Block::Sdp(v as usize),
            v => Block::Diag(v.unsigned_abs() as usize),
        });
    }

    let (ln, l) = next_header("right-hand side")?;
    let b_toks: Vec<&str> = numeric_tokens(l).collect();
    if b_toks.len() != m {
        return Err(ParseError::new(
            ln,
            format!("expected {m} right-hand side entries, found {}", b_toks.len()),
        ));
    }
    let b = b_toks
        .iter()
        .map(|t| parse_f64(t, ln, "right-hand side"))
        .collect::<Result<Vec<_>, _>>()?;

    // triplets[matno][blk]
    let mut triplets: Vec<Vec<Vec<(usize, usize, f64)>>> = vec![vec![Vec::new(); nblocks]; m + 1];
    for (ln, l) in lines {
        let toks: Vec<&str> = l.split(is_separator).filter(|t| !t.is_empty()).collect();
        if toks.len() < 5 {
            return Err(ParseError::new(ln, format!("expected 5 fields, found {}", toks.len())));
        }
        let e = parse_entry(&toks[..5], ln)?;
        if e.matno > m {
            return Err(ParseError::new(ln, format!("matrix number {} exceeds {m}", e.matno)));
        }
        if e.blkno == 0 || e.blkno > nblocks {
            return Err(ParseError::new(ln, format!("block number {} out of range", e.blkno)));
        }
        let blk = blocks[e.blkno - 1];
        let n = blk.order();
        if e.i == 0 || e.j == 0 || e.i > n || e.j > n {
            return Err(ParseError::new(
                ln,
                format!("index ({}, {}) outside block of order {n}", e.i, e.j),
            ));
        }
        if matches!(blk, Block::Diag(_)) && e.i != e.j {
            return Err(ParseError::new(ln, "off-diagonal entry in a diagonal block"));
        }
        triplets[e.matno][e.blkno - 1].push((e.i - 1, e.j - 1, e.value));
    }

    let build = |k: usize, t: &[(usize, usize, f64)]| {
        let cm = CoeffMatrix::from_triplets(blocks[k].order(), t);
        match blocks[k] {
            Block::Sdp(_) => cm.with_storage(SPARSITY_THRESHOLD),
            Block::Diag(_) => cm,
        }
    };
    let mut rows = triplets.into_iter();
    let c: Vec<CoeffMatrix> = rows
        .next()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(k, t)| build(k, t))
        .collect();
    let a: Vec<Vec<CoeffMatrix>> = rows
        .map(|r| r.iter().enumerate().map(|(k, t)| build(k, t)).collect())
        .collect();
    SdpProblem::new(blocks, c, a, b).map_err(|e| ParseError::new(0, e.to_string()))
}

fn parse_entry(toks: &[&str], ln: usize) -> Result<SdpaEntry, ParseError> {
    let idx = |t: &str, what: &str| -> Result<usize, ParseError> {
        let v = parse_int(t, ln, what)?;
        usize::try_from(v).map_err(|_| ParseError::new(ln, format!("negative {what} {v}")))
    };
    Ok(SdpaEntry {
        matno: idx(toks[0], "matrix number")?,
        blkno: idx(toks[1], "block number")?,
        i: idx(toks[2], "row index")?,
        j: idx(toks[3], "column index")?,
        value: parse_f64(toks[4], ln, "entry value")?,
    })
}

/// 17 significant digits, exact under re-parsing.
fn fmt_exact(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_sdpa(problem: &SdpProblem) -> String {
    let mut out = String::new();
    let m = problem.m();
    writeln!(out, "{m}").unwrap();
    writeln!(out, "{}", problem.nblocks()).unwrap();
    let sizes: Vec<String> = problem.blocks.iter().map(|b| b.signed_order().to_string()).collect();
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    let b: Vec<String> = problem.b.iter().map(|&v| fmt_exact(v)).collect();
    writeln!(out, "{}", b.join(" ")).unwrap();
    let mut emit = |matno: usize, coeffs: &[CoeffMatrix]| {
        for (k, c) in coeffs.iter().enumerate() {
            for (i, j, v) in c.upper_entries() {
                writeln!(out, "{matno} {} {} {} {}", k + 1, i + 1, j + 1, fmt_exact(v)).unwrap();
            }
        }
    };
    emit(0, &problem.c);
    for (i, row) in problem.a.iter().enumerate() {
        emit(i + 1, row);
    }
    out
}

/// One line of the per-instance report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub instance: String,
    pub errors: [f64; 6],
    pub time_seconds: f64,
    pub status: String,
}

pub const REPORT_HEADER: &str = "instance,err1,err2,err3,err4,err5,err6,time_seconds,status";

/// C-style `%.{digits}e`, e.g. `2.79e-07`.
pub fn fmt_sci(v: f64, digits: usize) -> String {
    let s = format!("{v:.digits$e}");
    match s.split_once('e') {
        Some((mant, exp)) => {
            let (sign, num) = match exp.strip_prefix('-') {
                Some(n) => ('-', n),
                None => ('+', exp),
            };
            format!("{mant}e{sign}{num:0>2}")
        }
        None => s,
    }
}

pub fn write_report(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        let errs: Vec<String> = r.errors.iter().map(|&e| fmt_sci(e, 2)).collect();
        writeln!(
            out,
            "{},{},{:.3},{}",
            r.instance,
            errs.join(","),
            r.time_seconds,
            r.status
        )
        .unwrap();
    }
    out
}
