//! Line-oriented cost traces.
//!
//! ```text
//! olvc-trace v1 d=2 n=2 T=2 rewards=1
//! t=1 1,0;0.5 0,1;0
//! t=2 1,0;0.5 0,1;0
//! ```
//!
//! Each step line holds `n` space-separated columns `c_1,…,c_d[;r]`. Numbers
//! are written in the shortest form that parses back to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use olvc_core::environment::CostMatrix;

use crate::{read_file, HarnessError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub d: usize,
    pub n: usize,
    pub steps: Vec<CostMatrix>,
}

impl Trace {
    pub fn has_rewards(&self) -> bool {
        self.steps.first().is_some_and(|s| s.rewards().is_some())
    }
}

pub fn format_trace(d: usize, n: usize, steps: &[CostMatrix]) -> String {
    let rewards = steps.first().is_some_and(|s| s.rewards().is_some());
    let mut out = format!("olvc-trace v1 d={d} n={n} T={} rewards={}\n", steps.len(), u8::from(rewards));
    for (t, s) in steps.iter().enumerate() {
        write!(out, "t={}", t + 1).unwrap();
        for i in 0..n {
            out.push(' ');
            for (j, c) in s.column(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{c}").unwrap();
            }
            if let Some(r) = s.rewards() {
                write!(out, ";{}", r[i]).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

fn header_field<'a>(token: Option<&'a str>, key: &str) -> std::result::Result<&'a str, String> {
    let token = token.ok_or_else(|| format!("missing `{key}=` in header"))?;
    token.strip_prefix(key).and_then(|v| v.strip_prefix('=')).ok_or_else(|| format!("expected `{key}=`, found `{token}`"))
}

fn parse_number<T: std::str::FromStr>(s: &str, what: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("invalid {what} `{s}`"))
}

pub fn parse_trace(text: &str) -> std::result::Result<Trace, (usize, String)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or((1, "empty trace file".to_string()))?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("olvc-trace") || tok.next() != Some("v1") {
        return Err((1, "expected header `olvc-trace v1 …`".into()));
    }
    let head = |e: String| (1, e);
    let d: usize = parse_number(header_field(tok.next(), "d").map_err(head)?, "d").map_err(head)?;
    let n: usize = parse_number(header_field(tok.next(), "n").map_err(head)?, "n").map_err(head)?;
    let horizon: usize = parse_number(header_field(tok.next(), "T").map_err(head)?, "T").map_err(head)?;
    let rewards = match header_field(tok.next(), "rewards").map_err(head)? {
        "0" => false,
        "1" => true,
        other => return Err((1, format!("rewards must be 0 or 1, found `{other}`"))),
    };
    if d == 0 || n == 0 {
        return Err((1, "d and n must be positive".into()));
    }

    let mut steps = Vec::with_capacity(horizon);
    for (idx, line) in lines {
        let lineno = idx + 1;
        let at = |e: String| (lineno, e);
        let mut tok = line.split_whitespace();
        let t: usize = parse_number(header_field(tok.next(), "t").map_err(at)?, "step index").map_err(at)?;
        if t != steps.len() + 1 {
            return Err((lineno, format!("expected step {}, found t={t}", steps.len() + 1)));
        }
        let mut entries = Vec::with_capacity(d * n);
        let mut rw = Vec::with_capacity(n);
        let mut columns = 0;
        for col in tok {
            columns += 1;
            let (costs, reward) = match col.split_once(';') {
                Some((c, r)) => (c, Some(r)),
                None => (col, None),
            };
            if reward.is_some() != rewards {
                return Err((lineno, format!("column {columns}: reward presence does not match the header")));
            }
            let before = entries.len();
            for v in costs.split(',') {
                entries.push(parse_number::<f64>(v, "cost").map_err(at)?);
            }
            if entries.len() - before != d {
                return Err((lineno, format!("column {columns} has {} entries, expected {d}", entries.len() - before)));
            }
            if let Some(r) = reward {
                rw.push(parse_number::<f64>(r, "reward").map_err(at)?);
            }
        }
        if columns != n {
            return Err((lineno, format!("found {columns} columns, expected {n}")));
        }
        let m = CostMatrix::new(d, n, entries, rewards.then_some(rw)).map_err(|e| (lineno, e.to_string()))?;
        steps.push(m);
    }
    if steps.len() != horizon {
        return Err((text.lines().count().max(1), format!("header promises T={horizon} steps, found {}", steps.len())));
    }
    Ok(Trace { d, n, steps })
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let text = read_file(path)?;
    parse_trace(&text).map_err(|(line, message)| HarnessError::TraceFormat { path: path.to_path_buf(), line, message })
}

pub fn write_trace(path: &Path, d: usize, n: usize, steps: &[CostMatrix]) -> Result<()> {
    std::fs::write(path, format_trace(d, n, steps)).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}
