//! LibSVM text-format parser producing dense datasets.
//!
//! Grammar per line: `<label> <idx>:<val> <idx>:<val> ...` with 1-based,
//! strictly increasing indices. `#` starts a comment to end of line.

use std::io::BufRead;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::problems::Dataset;

#[derive(Debug, Clone)]
pub struct LibsvmOptions {
    /// Force the feature dimension instead of using the max index seen.
    pub dim_override: Option<usize>,
    /// Remap {0,1} labels to {-1,+1} when the file is binary-0/1 encoded.
    pub remap_01_labels: bool,
    pub name: String,
}

impl Default for LibsvmOptions {
    fn default() -> Self {
        Self {
            dim_override: None,
            remap_01_labels: true,
            name: "libsvm".into(),
        }
    }
}

struct RawRow {
    label: f64,
    entries: Vec<(usize, f64)>,
}

/// Parses a LibSVM stream into a dense `Dataset`.
pub fn parse_libsvm<R: BufRead>(reader: R, options: &LibsvmOptions) -> Result<Dataset> {
    let mut rows: Vec<RawRow> = Vec::new();
    let mut max_index = 0usize;

    for (line_idx, line) in reader.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            column: 0,
            message: format!("read error: {e}"),
        })?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        if content.trim().is_empty() {
            continue;
        }

        let mut entries = Vec::new();
        let mut label = None;
        let mut prev_index = 0usize;
        for (tok_start, token) in token_spans(content) {
            let column = tok_start + 1;
            if label.is_none() {
                let l: f64 = token.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    column,
                    message: format!("invalid label token `{token}`"),
                })?;
                label = Some(l);
                continue;
            }
            let (idx_str, val_str) = token.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                column,
                message: format!("expected `<idx>:<val>`, got `{token}`"),
            })?;
            let index: usize = idx_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                column,
                message: format!("invalid feature index `{idx_str}`"),
            })?;
            if index == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    column,
                    message: "feature indices are 1-based".into(),
                });
            }
            if index <= prev_index {
                return Err(Error::Parse {
                    line: line_no,
                    column,
                    message: format!("indices must be strictly increasing ({prev_index} then {index})"),
                });
            }
            let value: f64 = val_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                column: column + idx_str.len() + 1,
                message: format!("invalid feature value `{val_str}`"),
            })?;
            prev_index = index;
            max_index = max_index.max(index);
            entries.push((index, value));
        }
        if let Some(label) = label {
            rows.push(RawRow { label, entries });
        }
    }

    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let dim = options.dim_override.unwrap_or(max_index);
    if dim == 0 {
        return Err(Error::EmptyDataset);
    }
    for row in &rows {
        if let Some(&(index, _)) = row.entries.iter().find(|&&(index, _)| index > dim) {
            return Err(Error::Parse {
                line: 0,
                column: 0,
                message: format!("feature index {index} exceeds dimension override {dim}"),
            });
        }
    }

    let n = rows.len();
    let mut features = Matrix::zeros(n, dim);
    let mut labels = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        for &(index, value) in &row.entries {
            features[(i, index - 1)] = value;
        }
        labels.push(row.label);
    }

    // Remap binary 0/1 labels to -1/+1 when that encoding is detected.
    if options.remap_01_labels
        && labels.iter().all(|&l| l == 0.0 || l == 1.0)
        && labels.contains(&0.0)
    {
        for l in &mut labels {
            *l = if *l == 0.0 { -1.0 } else { 1.0 };
        }
    }

    Ok(Dataset {
        features,
        labels,
        name: options.name.clone(),
    })
}

/// Whitespace-separated tokens with their byte offsets.
fn token_spans(s: &str) -> impl Iterator<Item = (usize, &str)> {
    s.split_whitespace().map(move |tok| {
        let start = tok.as_ptr() as usize - s.as_ptr() as usize;
        (start, tok)
    })
}
