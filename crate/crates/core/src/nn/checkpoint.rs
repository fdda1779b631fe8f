//! The DCNN1 checkpoint format: a header line `DCNN1 <C_x> <C_h>`
//! followed by named parameter blocks, each introduced by
//! `param <name> <len>` and holding `len` whitespace-separated decimals
//! with 17 significant digits. Round trips are bit-exact.

use super::NnError;
use crate::numfmt::{fmt_f64, parse_f64};
use std::fs;
use std::path::Path;

pub struct ParamBlock<'a> {
    pub name: &'a str,
    pub data: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub c_input: usize,
    pub c_hidden: usize,
    pub params: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    pub fn take(&mut self, name: &str) -> Result<Vec<f64>, NnError> {
        let pos = self
            .params
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| NnError::MalformedCheckpoint(format!("missing block `{name}`")))?;
        Ok(self.params.remove(pos).1)
    }
}

pub fn write_checkpoint(
    path: &Path,
    c_input: usize,
    c_hidden: usize,
    blocks: &[ParamBlock],
) -> Result<(), NnError> {
    let mut out = format!("DCNN1 {c_input} {c_hidden}\n");
    for block in blocks {
        out.push_str(&format!("param {} {}\n", block.name, block.data.len()));
        for row in block.data.chunks(8) {
            let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| NnError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, NnError> {
    let text = fs::read_to_string(path).map_err(|e| NnError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_checkpoint(&text)
}

fn parse_checkpoint(text: &str) -> Result<Checkpoint, NnError> {
    let bad = |what: String| NnError::MalformedCheckpoint(what);
    let mut tokens = text.split_whitespace();
    if tokens.next() != Some("DCNN1") {
        return Err(bad("expected DCNN1 magic".into()));
    }
    let c_input: usize = tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad input channel count".into()))?;
    let c_hidden: usize = tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad hidden channel count".into()))?;

    let mut params = Vec::new();
    while let Some(tok) = tokens.next() {
        if tok != "param" {
            return Err(bad(format!("expected `param`, got `{tok}`")));
        }
        let name = tokens
            .next()
            .ok_or_else(|| bad("missing parameter name".into()))?
            .to_string();
        let len: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(format!("bad length for `{name}`")))?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let tok = tokens
                .next()
                .ok_or_else(|| bad(format!("`{name}` ends early")))?;
            let v = parse_f64(tok)
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("bad value `{tok}` in `{name}`")))?;
            data.push(v);
        }
        params.push((name, data));
    }
    Ok(Checkpoint {
        c_input,
        c_hidden,
        params,
    })
}
