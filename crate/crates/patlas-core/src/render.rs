//! Feature map rendering.
//!
//! Three formats: an aligned text grid that survives a round trip (every
//! cell id readable back), and two heatmaps (PGM and SVG) for eyeballing.
//! Heatmaps draw empty cells mid-gray and spread nonzero ids over a
//! gradient, so structure pops out even when ids are small integers.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::frn::FeatureMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Text,
    Pgm,
    Svg,
}

impl FromStr for RenderFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(RenderFormat::Text),
            "pgm" => Ok(RenderFormat::Pgm),
            "svg" => Ok(RenderFormat::Svg),
            other => Err(Error::Schema(format!(
                "unsupported render format {other:?}; expected text, pgm, or svg"
            ))),
        }
    }
}

pub fn render(fm: &FeatureMap, format: RenderFormat) -> String {
    match format {
        RenderFormat::Text => render_text(fm),
        RenderFormat::Pgm => render_pgm(fm),
        RenderFormat::Svg => render_svg(fm),
    }
}

/// Aligned grid: header lines, then one line per row with the row label,
/// a `|` separator, and right-aligned cell ids.
pub fn render_text(fm: &FeatureMap) -> String {
    let label_width = fm.row_labels.iter().map(String::len).max().unwrap_or(0);
    let col_widths: Vec<usize> = (0..fm.cols)
        .map(|j| {
            (0..fm.rows)
                .map(|i| fm.cell(i, j).to_string().len())
                .chain([fm.col_labels[j].len()])
                .max()
                .unwrap()
        })
        .collect();

    let mut out = String::new();
    let _ = writeln!(
        out,
        "feature map: {} ({}x{})",
        fm.pattern, fm.rows, fm.cols
    );
    let bindings: Vec<String> = fm
        .candidate
        .role_bindings()
        .map(|(role, id)| format!("{role}={}", id.0))
        .collect();
    let _ = writeln!(out, "candidate: {}", bindings.join(";"));
    let _ = writeln!(
        out,
        "label: {}",
        match fm.label {
            Some(true) => "positive",
            Some(false) => "negative",
            None => "unlabeled",
        }
    );
    let _ = write!(out, "{:label_width$} |", "");
    for (j, label) in fm.col_labels.iter().enumerate() {
        let _ = write!(out, " {label:>width$}", width = col_widths[j]);
    }
    out.push('\n');
    for i in 0..fm.rows {
        let _ = write!(out, "{:label_width$} |", fm.row_labels[i]);
        for (j, width) in col_widths.iter().enumerate() {
            let _ = write!(out, " {:>width$}", fm.cell(i, j), width = width);
        }
        out.push('\n');
    }
    out
}

/// Cell matrix recovered from a text rendering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextGrid {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub rows: usize,
    pub cols: usize,
    /// Row-major, like [`FeatureMap::cells`].
    pub cells: Vec<u32>,
}

/// Parses a grid produced by [`render_text`].
pub fn parse_text(text: &str) -> Result<TextGrid> {
    let mut col_labels: Option<Vec<String>> = None;
    let mut row_labels = Vec::new();
    let mut cells = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let fail = |msg: String| Error::FeatureMap(format!("text grid line {}: {msg}", lineno + 1));
        let Some((left, right)) = line.split_once('|') else {
            continue;
        };
        let label = left.trim();
        let fields: Vec<&str> = right.split_whitespace().collect();
        match &col_labels {
            None => {
                if !label.is_empty() {
                    return Err(fail("expected blank label on the column header".into()));
                }
                col_labels = Some(fields.iter().map(|f| f.to_string()).collect());
            }
            Some(cols) => {
                if fields.len() != cols.len() {
                    return Err(fail(format!(
                        "expected {} cells, found {}",
                        cols.len(),
                        fields.len()
                    )));
                }
                row_labels.push(label.to_string());
                for f in fields {
                    cells.push(
                        f.parse::<u32>()
                            .map_err(|e| fail(format!("bad cell {f:?}: {e}")))?,
                    );
                }
            }
        }
    }
    let col_labels =
        col_labels.ok_or_else(|| Error::FeatureMap("text grid has no header row".into()))?;
    Ok(TextGrid {
        rows: row_labels.len(),
        cols: col_labels.len(),
        row_labels,
        col_labels,
        cells,
    })
}

fn max_id(fm: &FeatureMap) -> u32 {
    fm.cells.iter().copied().max().unwrap_or(0)
}

/// Plain PGM (P2): one pixel per cell, 128 for empty cells, nonzero ids
/// spread over the full 0..=255 ramp.
pub fn render_pgm(fm: &FeatureMap) -> String {
    let top = max_id(fm);
    let mut out = String::new();
    let _ = writeln!(out, "P2");
    let _ = writeln!(out, "# {} feature map heatmap", fm.pattern);
    let _ = writeln!(out, "{} {}", fm.cols, fm.rows);
    let _ = writeln!(out, "255");
    for i in 0..fm.rows {
        let line: Vec<String> = (0..fm.cols)
            .map(|j| {
                let v = fm.cell(i, j);
                let pixel = if v == 0 {
                    128
                } else {
                    (u64::from(v) * 255 / u64::from(top)) as u32
                };
                pixel.to_string()
            })
            .collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

fn cell_color(v: u32, top: u32) -> String {
    if v == 0 {
        return "#808080".to_string();
    }
    // Hue sweep keeps nearby ids distinguishable where a gray ramp would
    // wash them together.
    let hue = (u64::from(v - 1) * 300 / u64::from(top.max(1))) as u32;
    format!("hsl({hue},70%,50%)")
}

const SVG_CELL: usize = 24;
const SVG_LEFT: usize = 160;
const SVG_TOP: usize = 40;

/// SVG heatmap with row and column labels.
pub fn render_svg(fm: &FeatureMap) -> String {
    let top = max_id(fm);
    let width = SVG_LEFT + fm.cols * SVG_CELL + 8;
    let height = SVG_TOP + fm.rows * SVG_CELL + 8;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         font-family=\"monospace\" font-size=\"11\">"
    );
    for (j, label) in fm.col_labels.iter().enumerate() {
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{label}</text>",
            SVG_LEFT + j * SVG_CELL + SVG_CELL / 2,
            SVG_TOP - 8
        );
    }
    for (i, label) in fm.row_labels.iter().enumerate() {
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{label}</text>",
            SVG_LEFT - 8,
            SVG_TOP + i * SVG_CELL + SVG_CELL / 2 + 4
        );
    }
    for i in 0..fm.rows {
        for j in 0..fm.cols {
            let v = fm.cell(i, j);
            let _ = writeln!(
                out,
                "  <rect x=\"{}\" y=\"{}\" width=\"{SVG_CELL}\" height=\"{SVG_CELL}\" \
                 fill=\"{}\" stroke=\"white\"><title>{}[{}] = {v}</title></rect>",
                SVG_LEFT + j * SVG_CELL,
                SVG_TOP + i * SVG_CELL,
                cell_color(v, top),
                fm.row_labels[i],
                fm.col_labels[j],
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
