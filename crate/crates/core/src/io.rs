//! Instance parsing and model serialization.
//!
//! Graph instances use the common text layout: a header line
//! `<n_nodes> <n_edges>` followed by one `<i> <j> <w>` line per edge with
//! 1-based node indices. Knapsack instances use `<n> <capacity>` followed by
//! `n` lines of `<value> <weight>`, all integers. Comment lines starting
//! with `%` or `#` and blank lines are tolerated (knapsack: lenient mode
//! only). Ising/QUBO models serialize as JSON.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoders::{EncodeError, KnapsackInstance, MaxCutInstance};
use crate::ising::{IsingModel, ModelError, QuboError, QuboModel};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("header declares {declared} edges, found {found}")]
    EdgeCountMismatch { declared: usize, found: usize },
    #[error("header declares {declared} items, found {found}")]
    ItemCountMismatch { declared: usize, found: usize },
    #[error("empty input")]
    Empty,
    #[error("invalid instance: {0}")]
    Instance(#[from] EncodeError),
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
    #[error("invalid quadratic model: {0}")]
    Qubo(#[from] QuboError),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParserMode {
    /// Tolerates comments, blank lines, and flexible whitespace.
    #[default]
    Lenient,
    /// Exactly the declared lines, no comments.
    Strict,
}

fn is_comment(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with('%') || t.starts_with('#')
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    mode: ParserMode,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, mode: ParserMode) -> Self {
        Self {
            inner: text.lines().enumerate(),
            mode,
        }
    }
}

impl<'a> Iterator for Lines<'a> {
    /// (1-based line number, content)
    type Item = (usize, &'a str);

    fn next(&mut self) -> Option<Self::Item> {
        for (idx, line) in self.inner.by_ref() {
            match self.mode {
                ParserMode::Lenient => {
                    if line.trim().is_empty() || is_comment(line) {
                        continue;
                    }
                }
                ParserMode::Strict => {}
            }
            return Some((idx + 1, line));
        }
        None
    }
}

fn fields(line: &str) -> Vec<&str> {
    line.split_whitespace().collect()
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T, ParseError> {
    s.parse().map_err(|_| ParseError::Malformed {
        line,
        msg: format!("cannot parse {what} from {s:?}"),
    })
}

/// Parses a weighted-graph instance in the header + edge-list layout.
pub fn parse_gset(text: &str) -> Result<MaxCutInstance, ParseError> {
    let mut lines = Lines::new(text, ParserMode::Lenient);
    let (lno, header) = lines.next().ok_or(ParseError::Empty)?;
    let f = fields(header);
    if f.len() != 2 {
        return Err(ParseError::Malformed {
            line: lno,
            msg: "header must be \"<n_nodes> <n_edges>\"".into(),
        });
    }
    let n: usize = parse_num(f[0], lno, "node count")?;
    let m: usize = parse_num(f[1], lno, "edge count")?;

    let mut edges = Vec::with_capacity(m);
    for (lno, line) in lines {
        let f = fields(line);
        if f.len() != 3 {
            return Err(ParseError::Malformed {
                line: lno,
                msg: "edge lines must be \"<i> <j> <w>\"".into(),
            });
        }
        let i: usize = parse_num(f[0], lno, "node index")?;
        let j: usize = parse_num(f[1], lno, "node index")?;
        let w: f64 = parse_num(f[2], lno, "edge weight")?;
        if i < 1 || j < 1 || i > n || j > n {
            return Err(ParseError::Malformed {
                line: lno,
                msg: format!("node index out of range 1..={n}"),
            });
        }
        edges.push((i - 1, j - 1, w));
    }
    if edges.len() != m {
        return Err(ParseError::EdgeCountMismatch {
            declared: m,
            found: edges.len(),
        });
    }
    Ok(MaxCutInstance::new(n, edges)?)
}

/// Serializes an instance back to the header + edge-list layout.
pub fn write_gset(inst: &MaxCutInstance) -> String {
    let mut out = format!("{} {}\n", inst.n(), inst.edges().len());
    for &(i, j, w) in inst.edges() {
        out.push_str(&format!("{} {} {}\n", i + 1, j + 1, w));
    }
    out
}

/// Parses a knapsack instance: `<n> <capacity>` then `n` lines of
/// `<value> <weight>`. Integer fields are enforced in both modes.
pub fn parse_knapsack(text: &str, mode: ParserMode) -> Result<KnapsackInstance, ParseError> {
    let mut lines = Lines::new(text, mode);
    let (lno, header) = lines.next().ok_or(ParseError::Empty)?;
    if mode == ParserMode::Strict && (header.trim().is_empty() || is_comment(header)) {
        return Err(ParseError::Malformed {
            line: lno,
            msg: "strict mode forbids comments and blank lines".into(),
        });
    }
    let f = fields(header);
    if f.len() != 2 {
        return Err(ParseError::Malformed {
            line: lno,
            msg: "header must be \"<n> <capacity>\"".into(),
        });
    }
    let n: usize = parse_num(f[0], lno, "item count")?;
    let capacity: u64 = parse_num(f[1], lno, "capacity")?;

    let mut values = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (lno, line) in lines {
        if mode == ParserMode::Strict && (line.trim().is_empty() || is_comment(line)) {
            return Err(ParseError::Malformed {
                line: lno,
                msg: "strict mode forbids comments and blank lines".into(),
            });
        }
        if values.len() == n {
            return Err(ParseError::ItemCountMismatch {
                declared: n,
                found: values.len() + 1,
            });
        }
        let f = fields(line);
        if f.len() != 2 {
            return Err(ParseError::Malformed {
                line: lno,
                msg: "item lines must be \"<value> <weight>\"".into(),
            });
        }
        let value: u64 = parse_num(f[0], lno, "integer value")?;
        let weight: u64 = parse_num(f[1], lno, "integer weight")?;
        values.push(value as f64);
        weights.push(weight);
    }
    if values.len() != n {
        return Err(ParseError::ItemCountMismatch {
            declared: n,
            found: values.len(),
        });
    }
    Ok(KnapsackInstance::new(values, weights, capacity)?)
}

pub fn write_knapsack(inst: &KnapsackInstance) -> String {
    let mut out = format!("{} {}\n", inst.n(), inst.capacity());
    for (v, w) in inst.values().iter().zip(inst.weights()) {
        out.push_str(&format!("{} {}\n", v, w));
    }
    out
}

/// JSON layout for an Ising model: nested coupling rows for readability.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    pub j: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
}

pub fn model_to_json(model: &IsingModel) -> String {
    let file = ModelFile {
        n: model.n(),
        j: (0..model.n())
            .map(|i| model.coupling_row(i).to_vec())
            .collect(),
        h: model.field().to_vec(),
        offset: model.offset(),
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

pub fn model_from_json(text: &str) -> Result<IsingModel, ParseError> {
    let file: ModelFile = serde_json::from_str(text)?;
    let flat: Vec<f64> = file.j.into_iter().flatten().collect();
    Ok(IsingModel::new(file.n, flat, file.h, file.offset)?)
}

/// JSON layout for a QUBO model.
#[derive(Debug, Serialize, Deserialize)]
pub struct QuboFile {
    pub n: usize,
    pub q: Vec<Vec<f64>>,
    #[serde(default)]
    pub offset: f64,
}

pub fn qubo_to_json(model: &QuboModel) -> String {
    let n = model.n();
    let file = QuboFile {
        n,
        q: (0..n)
            .map(|i| model.matrix()[i * n..(i + 1) * n].to_vec())
            .collect(),
        offset: model.offset(),
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

pub fn qubo_from_json(text: &str) -> Result<QuboModel, ParseError> {
    let file: QuboFile = serde_json::from_str(text)?;
    let flat: Vec<f64> = file.q.into_iter().flatten().collect();
    Ok(QuboModel::new(file.n, flat, file.offset)?)
}
