//! GBT1, the text serialization of a per-cell tree ensemble:
//!
//! ```text
//! GBT1 <H> <W> <p> <spatial 0|1>
//! cell <row> <col> <base> <shrinkage> <n_trees>
//! node <feature> <threshold>     // preorder: node, left subtree, right
//! leaf <value>
//! ...
//! ```
//!
//! Valid cells appear in row-major order; masked cells are simply absent.
//! Numbers carry 17 significant digits so reloads are bit-exact.

use super::boost::{GbtModel, GridGbt};
use super::tree::{RegressionTree, TreeNode};
use super::GbtError;
use crate::numfmt::{fmt_f64, parse_f64};
use std::fs;
use std::path::Path;

fn write_node(out: &mut String, node: &TreeNode) {
    match node {
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            out.push_str(&format!("node {} {}\n", feature, fmt_f64(*threshold)));
            write_node(out, left);
            write_node(out, right);
        }
        TreeNode::Leaf { value } => {
            out.push_str(&format!("leaf {}\n", fmt_f64(*value)));
        }
    }
}

pub fn save_grid_gbt(model: &GridGbt, path: &Path) -> Result<(), GbtError> {
    let mut out = format!(
        "GBT1 {} {} {} {}\n",
        model.height,
        model.width,
        model.lags,
        if model.spatial { 1 } else { 0 }
    );
    for row in 0..model.height {
        for col in 0..model.width {
            let Some(cell) = &model.models[row * model.width + col] else {
                continue;
            };
            out.push_str(&format!(
                "cell {} {} {} {} {}\n",
                row,
                col,
                fmt_f64(cell.base),
                fmt_f64(cell.shrinkage),
                cell.trees.len()
            ));
            for tree in &cell.trees {
                write_node(&mut out, &tree.root);
            }
        }
    }
    fs::write(path, out).map_err(|e| GbtError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

struct Lines<'a> {
    inner: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Lines<'a> {
    fn next_nonempty(&mut self) -> Option<(usize, &'a str)> {
        loop {
            let line = self.inner.next()?;
            self.line_no += 1;
            if !line.trim().is_empty() {
                return Some((self.line_no, line.trim()));
            }
        }
    }
}

fn read_node(lines: &mut Lines) -> Result<TreeNode, GbtError> {
    let bad = |line: usize, what: String| GbtError::MalformedModel(format!("line {line}: {what}"));
    let (line_no, line) = lines
        .next_nonempty()
        .ok_or_else(|| GbtError::MalformedModel("tree ends early".into()))?;
    let fields: Vec<&str> = line.split_whitespace().collect();
    match fields.first() {
        Some(&"node") if fields.len() == 3 => {
            let feature: usize = fields[1]
                .parse()
                .map_err(|_| bad(line_no, format!("bad feature `{}`", fields[1])))?;
            let threshold = parse_f64(fields[2])
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(line_no, format!("bad threshold `{}`", fields[2])))?;
            let left = Box::new(read_node(lines)?);
            let right = Box::new(read_node(lines)?);
            Ok(TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            })
        }
        Some(&"leaf") if fields.len() == 2 => {
            let value = parse_f64(fields[1])
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(line_no, format!("bad leaf `{}`", fields[1])))?;
            Ok(TreeNode::Leaf { value })
        }
        _ => Err(bad(line_no, format!("expected node or leaf, got `{line}`"))),
    }
}

pub fn load_grid_gbt(path: &Path) -> Result<GridGbt, GbtError> {
    let text = fs::read_to_string(path).map_err(|e| GbtError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_grid_gbt(&text)
}

fn parse_grid_gbt(text: &str) -> Result<GridGbt, GbtError> {
    let bad = |what: String| GbtError::MalformedModel(what);
    let mut lines = Lines {
        inner: text.lines(),
        line_no: 0,
    };
    let (_, header) = lines
        .next_nonempty()
        .ok_or_else(|| bad("empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "GBT1" {
        return Err(bad(format!(
            "expected `GBT1 <H> <W> <p> <spatial>`, got `{header}`"
        )));
    }
    let height: usize = fields[1].parse().map_err(|_| bad("bad H".into()))?;
    let width: usize = fields[2].parse().map_err(|_| bad("bad W".into()))?;
    let lags: usize = fields[3].parse().map_err(|_| bad("bad p".into()))?;
    let spatial = match fields[4] {
        "0" => false,
        "1" => true,
        other => return Err(bad(format!("bad spatial flag `{other}`"))),
    };
    let n_features = if spatial { 9 * lags } else { lags };

    let mut models: Vec<Option<GbtModel>> = vec![None; height * width];
    while let Some((line_no, line)) = lines.next_nonempty() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "cell" {
            return Err(bad(format!("line {line_no}: expected `cell`, got `{line}`")));
        }
        let row: usize = fields[1]
            .parse()
            .map_err(|_| bad(format!("line {line_no}: bad row")))?;
        let col: usize = fields[2]
            .parse()
            .map_err(|_| bad(format!("line {line_no}: bad col")))?;
        if row >= height || col >= width {
            return Err(bad(format!("line {line_no}: cell ({row}, {col}) out of grid")));
        }
        let base = parse_f64(fields[3])
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(format!("line {line_no}: bad base")))?;
        let shrinkage = parse_f64(fields[4])
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(format!("line {line_no}: bad shrinkage")))?;
        let n_trees: usize = fields[5]
            .parse()
            .map_err(|_| bad(format!("line {line_no}: bad tree count")))?;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            trees.push(RegressionTree {
                root: read_node(&mut lines)?,
            });
        }
        models[row * width + col] = Some(GbtModel {
            base,
            shrinkage,
            trees,
            n_features,
        });
    }
    Ok(GridGbt {
        height,
        width,
        lags,
        spatial,
        models,
    })
}
