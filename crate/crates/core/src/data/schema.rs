use std::collections::HashSet;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Decimal places ordinal columns are rounded to unless the schema says otherwise.
pub const DEFAULT_ORDINAL_DECIMALS: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    /// Treated as continuous in training, rounded at synthesis.
    Ordinal {
        decimals: u32,
    },
    Discrete {
        levels: Vec<String>,
    },
}

impl ColumnKind {
    pub fn is_discrete(&self) -> bool {
        matches!(self, ColumnKind::Discrete { .. })
    }

    fn keyword(&self) -> &'static str {
        match self {
            ColumnKind::Continuous => "continuous",
            ColumnKind::Ordinal { .. } => "ordinal",
            ColumnKind::Discrete { .. } => "discrete",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    /// Number of levels for discrete columns, `None` otherwise.
    pub fn levels(&self) -> Option<&[String]> {
        match &self.kind {
            ColumnKind::Discrete { levels } => Some(levels),
            _ => None,
        }
    }
}

/// Where a column lives in the encoded `n x D` matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub column: usize,
    pub offset: usize,
    pub width: usize,
    pub discrete: bool,
}

/// Ordered, validated column list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TabularSchema {
    columns: Vec<Column>,
}

fn schema_err(column: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        column: column.to_string(),
        message: message.into(),
    }
}

impl TabularSchema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        if columns.is_empty() {
            return Err(schema_err("", "schema declares no columns"));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if c.name.is_empty() {
                return Err(schema_err("", "empty column name"));
            }
            if c.name.contains([',', '|', '\n', '\r']) {
                return Err(schema_err(&c.name, "name contains a reserved character"));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(schema_err(&c.name, "duplicate column name"));
            }
            if let ColumnKind::Discrete { levels } = &c.kind {
                if levels.len() < 2 {
                    return Err(schema_err(
                        &c.name,
                        format!(
                            "discrete column needs at least 2 levels, got {}",
                            levels.len()
                        ),
                    ));
                }
                let mut lv = HashSet::new();
                for l in levels {
                    if l.is_empty() || l.contains([',', '|', '\n', '\r']) {
                        return Err(schema_err(&c.name, format!("invalid level label `{l}`")));
                    }
                    if !lv.insert(l.as_str()) {
                        return Err(schema_err(&c.name, format!("duplicate level `{l}`")));
                    }
                }
            }
        }
        Ok(Self { columns })
    }

    /// Parse the line format `name,kind[,extra]`. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut columns = Vec::new();
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let name = fields[0];
            let kind = match (fields.get(1).copied(), fields.len()) {
                (Some("continuous"), 2) => ColumnKind::Continuous,
                (Some("ordinal"), 2) => ColumnKind::Ordinal {
                    decimals: DEFAULT_ORDINAL_DECIMALS,
                },
                (Some("ordinal"), 3) => ColumnKind::Ordinal {
                    decimals: fields[2]
                        .parse()
                        .map_err(|_| schema_err(name, format!("bad decimals `{}`", fields[2])))?,
                },
                (Some("discrete"), 3) => ColumnKind::Discrete {
                    levels: fields[2].split('|').map(|l| l.trim().to_string()).collect(),
                },
                (Some(k @ ("continuous" | "ordinal" | "discrete")), n) => {
                    return Err(schema_err(
                        name,
                        format!("kind `{k}` does not take {n} fields"),
                    ))
                }
                (Some(k), _) => return Err(schema_err(name, format!("unknown kind `{k}`"))),
                (None, _) => return Err(schema_err(name, "missing kind")),
            };
            columns.push(Column {
                name: name.to_string(),
                kind,
            });
        }
        Self::new(columns)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text)
    }

    /// One line per column, no comments, ordinal decimals spelled out.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for c in &self.columns {
            out.push_str(&c.name);
            out.push(',');
            out.push_str(c.kind.keyword());
            match &c.kind {
                ColumnKind::Continuous => {}
                ColumnKind::Ordinal { decimals } => out.push_str(&format!(",{decimals}")),
                ColumnKind::Discrete { levels } => {
                    out.push(',');
                    out.push_str(&levels.join("|"));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Hex SHA-256 of [`Self::canonical_text`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_text().as_bytes()))
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Indices of continuous and ordinal columns.
    pub fn continuous_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| !self.columns[j].kind.is_discrete())
            .collect()
    }

    pub fn discrete_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| self.columns[j].kind.is_discrete())
            .collect()
    }

    /// Encoded width `D = |I_c| + sum_j T_j`.
    pub fn encoded_width(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.levels().map_or(1, <[String]>::len))
            .sum()
    }

    /// Column blocks of the encoded matrix, in schema order.
    pub fn layout(&self) -> Vec<Block> {
        let mut offset = 0;
        self.columns
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let width = c.levels().map_or(1, <[String]>::len);
                let b = Block {
                    column: j,
                    offset,
                    width,
                    discrete: c.kind.is_discrete(),
                };
                offset += width;
                b
            })
            .collect()
    }
}
