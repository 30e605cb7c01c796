//! Numeric core for spatially aligned view tokens: a cosine-alignment loss
//! with its closed-form gradient, sinusoidal positional encodings, and
//! rasterized passage masks.
//!
//! The loss couples an action term with an alignment term that pulls each
//! visual token toward its position-augmented spatial token:
//!
//! ```text
//! total = action + alpha * (1/N) * sum_t (1 - cos(V[t], S[t] + P[t]))
//! ```
//!
//! All inputs are dense row-major matrices; rows are tokens.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Alignment weight used when a caller does not override it.
pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("empty token matrix")]
    Empty,
    #[error("row {row} has {got} columns, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("{a_rows}x{a_cols} and {b_rows}x{b_cols} matrices do not share a shape")]
    ShapeMismatch { a_rows: usize, a_cols: usize, b_rows: usize, b_cols: usize },
    #[error("row {row} of {matrix} has zero norm")]
    ZeroNormRow { matrix: &'static str, row: usize },
    #[error("positional encoding needs an even dimension, got {0}")]
    OddDimension(usize),
    #[error("region {index} does not fit a {width}x{height} mask")]
    RegionOutOfBounds { index: usize, width: usize, height: usize },
    #[error("region {index} is a polygon with {got} vertices, need at least 3")]
    DegeneratePolygon { index: usize, got: usize },
}

/// Dense row-major matrix of token vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TokenMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LossError> {
        let n = rows.len();
        if n == 0 {
            return Err(LossError::Empty);
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(LossError::Empty);
        }
        let mut data = Vec::with_capacity(n * cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(LossError::RaggedRow { row: r, got: row.len(), expected: cols });
            }
            for (c, &x) in row.iter().enumerate() {
                if !x.is_finite() {
                    return Err(LossError::NonFinite { row: r, column: c });
                }
                data.push(x);
            }
        }
        Ok(TokenMatrix { rows: n, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Loss value split into its components. `total` is reconstructed from the
/// parts, so `total == action_term + alpha * alignment_term` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub action_term: f64,
    pub alignment_term: f64,
    pub alpha: f64,
}

fn check_shapes(v: &TokenMatrix, s: &TokenMatrix, p: &TokenMatrix) -> Result<(), LossError> {
    for other in [s, p] {
        if v.rows != other.rows || v.cols != other.cols {
            return Err(LossError::ShapeMismatch {
                a_rows: v.rows,
                a_cols: v.cols,
                b_rows: other.rows,
                b_cols: other.cols,
            });
        }
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Mean misalignment `(1/N) sum_t (1 - cos(V[t], S[t] + P[t]))` plus the
/// action term, weighted by `alpha`. Cosines are clamped to `[-1, 1]` so
/// rounding can never push a term negative.
pub fn se_loss(
    v: &TokenMatrix,
    s: &TokenMatrix,
    p: &TokenMatrix,
    alpha: f64,
    l_action: f64,
) -> Result<LossBreakdown, LossError> {
    check_shapes(v, s, p)?;
    let n = v.rows;
    let mut acc = 0.0;
    for t in 0..n {
        let vt = v.row(t);
        let ut: Vec<f64> = s.row(t).iter().zip(p.row(t)).map(|(a, b)| a + b).collect();
        let nv = norm(vt);
        if nv == 0.0 {
            return Err(LossError::ZeroNormRow { matrix: "V", row: t });
        }
        let nu = norm(&ut);
        if nu == 0.0 {
            return Err(LossError::ZeroNormRow { matrix: "S+P", row: t });
        }
        let cos = (dot(vt, &ut) / (nv * nu)).clamp(-1.0, 1.0);
        acc += 1.0 - cos;
    }
    let alignment_term = acc / n as f64;
    Ok(LossBreakdown {
        total: l_action + alpha * alignment_term,
        action_term: l_action,
        alignment_term,
        alpha,
    })
}

/// Gradient of the loss with respect to `V`, row by row:
///
/// ```text
/// d/dV[t] = -(alpha/N) * (U[t] / (|V[t]| |U[t]|) - cos * V[t] / |V[t]|^2)
/// ```
///
/// where `U = S + P`. The action term does not depend on `V`.
pub fn se_loss_grad(
    v: &TokenMatrix,
    s: &TokenMatrix,
    p: &TokenMatrix,
    alpha: f64,
) -> Result<TokenMatrix, LossError> {
    check_shapes(v, s, p)?;
    let n = v.rows;
    let scale = alpha / n as f64;
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let vt = v.row(t);
        let ut: Vec<f64> = s.row(t).iter().zip(p.row(t)).map(|(a, b)| a + b).collect();
        let nv = norm(vt);
        if nv == 0.0 {
            return Err(LossError::ZeroNormRow { matrix: "V", row: t });
        }
        let nu = norm(&ut);
        if nu == 0.0 {
            return Err(LossError::ZeroNormRow { matrix: "S+P", row: t });
        }
        let cos = (dot(vt, &ut) / (nv * nu)).clamp(-1.0, 1.0);
        let row: Vec<f64> = vt
            .iter()
            .zip(&ut)
            .map(|(&vi, &ui)| -scale * (ui / (nv * nu) - cos * vi / (nv * nv)))
            .collect();
        out.push(row);
    }
    TokenMatrix::from_rows(&out)
}

/// Sinusoidal positional encoding: `n` rows of dimension `d`, with
/// `P[t][2i] = sin(t / 10000^(2i/d))` and `P[t][2i+1]` the matching cosine.
pub fn sinusoidal_pos(n: usize, d: usize) -> Result<TokenMatrix, LossError> {
    if n == 0 || d == 0 {
        return Err(LossError::Empty);
    }
    if d % 2 != 0 {
        return Err(LossError::OddDimension(d));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|t| {
            let mut row = Vec::with_capacity(d);
            for i in 0..d / 2 {
                let rate = 10000f64.powf(2.0 * i as f64 / d as f64);
                let angle = t as f64 / rate;
                row.push(angle.sin());
                row.push(angle.cos());
            }
            row
        })
        .collect();
    TokenMatrix::from_rows(&rows)
}

/// A region contributing to a passage mask, in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    /// Axis-aligned rectangle covering pixels `[x, x+width) x [y, y+height)`.
    Rect { x: usize, y: usize, width: usize, height: usize },
    /// Simple polygon; a pixel is inside when its center passes an even-odd
    /// crossing test against the vertex loop.
    Polygon { vertices: Vec<(f64, f64)> },
}

/// Binary mask over a pixel grid, row-major, 1 marking passable pixels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassageMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl PassageMask {
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b == 1).count()
    }
}

fn polygon_contains(vertices: &[(f64, f64)], px: f64, py: f64) -> bool {
    let mut inside = false;
    let n = vertices.len();
    for i in 0..n {
        let (x1, y1) = vertices[i];
        let (x2, y2) = vertices[(i + 1) % n];
        // Count edges crossing the horizontal ray to the right of the point.
        if (y1 > py) != (y2 > py) {
            let x_cross = x1 + (py - y1) / (y2 - y1) * (x2 - x1);
            if px < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Rasterizes regions into a `width x height` mask. Regions accumulate with
/// OR; rectangles must fit the mask, polygon vertices must lie within it.
pub fn passage_mask_encode(
    regions: &[Region],
    width: usize,
    height: usize,
) -> Result<PassageMask, LossError> {
    let mut data = vec![0u8; width * height];
    for (index, region) in regions.iter().enumerate() {
        match region {
            Region::Rect { x, y, width: w, height: h } => {
                if x + w > width || y + h > height {
                    return Err(LossError::RegionOutOfBounds { index, width, height });
                }
                for yy in *y..y + h {
                    for xx in *x..x + w {
                        data[yy * width + xx] = 1;
                    }
                }
            }
            Region::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(LossError::DegeneratePolygon { index, got: vertices.len() });
                }
                for &(vx, vy) in vertices {
                    if !(0.0..=width as f64).contains(&vx) || !(0.0..=height as f64).contains(&vy) {
                        return Err(LossError::RegionOutOfBounds { index, width, height });
                    }
                }
                for yy in 0..height {
                    for xx in 0..width {
                        if polygon_contains(vertices, xx as f64 + 0.5, yy as f64 + 0.5) {
                            data[yy * width + xx] = 1;
                        }
                    }
                }
            }
        }
    }
    Ok(PassageMask { width, height, data })
}
