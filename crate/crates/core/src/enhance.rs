//! Derivative-feature cascade over a dense base matrix.
//!
//! For row `i` of the base matrix the cascade concatenates
//!
//! | block      | width       | content                                        |
//! |------------|-------------|------------------------------------------------|
//! | `base`     | `d`         | the base row itself                            |
//! | `gradient` | `2d`        | `gx ++ gy`, gradients of row `i` and row `j`   |
//! | `vorticity`| `d`         | `dgy[k] - dgx[k]`, forward differences          |
//! | `poly`     | `1 + d_raw` | `[1] ++ raw row i` (degree-1 expansion)        |
//!
//! where `j = (i + offset) % modulus` is the loop-modulus partner row.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::FeatureMatrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnhanceError {
    #[error("modulus must be positive")]
    ZeroModulus,
    #[error("gradient lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("only degree-1 polynomial features are supported, got {0}")]
    UnsupportedDegree(u32),
    #[error("base has {base} rows but raw has {raw}")]
    RowMismatch { base: usize, raw: usize },
}

/// How the partner-row offset is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetMode {
    /// `offset = modulus = n_rows`; the partner of row `i` is `i` itself.
    #[default]
    RowCount,
    /// `offset = 1`; row `i` is paired with row `i + 1` (wrapping).
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModulusConfig {
    pub offset: usize,
    pub modulus: usize,
}

impl ModulusConfig {
    /// Offset and modulus for a gradient array of `n_rows` rows.
    pub fn for_rows(mode: OffsetMode, n_rows: usize) -> Self {
        match mode {
            OffsetMode::RowCount => Self {
                offset: n_rows,
                modulus: n_rows,
            },
            OffsetMode::Shifted => Self {
                offset: 1,
                modulus: n_rows,
            },
        }
    }
}

/// `(i + offset) mod modulus`, computed without overflow.
pub fn loop_modulus_index(i: usize, offset: usize, modulus: usize) -> Result<usize, EnhanceError> {
    if modulus == 0 {
        return Err(EnhanceError::ZeroModulus);
    }
    let sum = (i % modulus) as u128 + (offset % modulus) as u128;
    Ok((sum % modulus as u128) as usize)
}

/// Discrete 1-D gradient with unit spacing: central differences inside,
/// one-sided differences at both ends. A single element has gradient 0.
pub fn row_gradient(row: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; row.len()];
    gradient_into(row, &mut out);
    out
}

fn gradient_into(row: &[f64], out: &mut [f64]) {
    let d = row.len();
    if d < 2 {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    out[0] = row[1] - row[0];
    out[d - 1] = row[d - 1] - row[d - 2];
    for k in 1..d - 1 {
        out[k] = (row[k + 1] - row[k - 1]) / 2.0;
    }
}

fn vorticity_into(gx: &[f64], gy: &[f64], out: &mut [f64]) {
    let d = gx.len();
    for k in 0..d {
        out[k] = if k + 1 < d {
            (gy[k + 1] - gy[k]) - (gx[k + 1] - gx[k])
        } else {
            0.0
        };
    }
}

/// Returns `(gx ++ gy, vorticity)` with
/// `vorticity[k] = (gy[k+1] - gy[k]) - (gx[k+1] - gx[k])` and a zero in the
/// last position.
pub fn curl_feature(gx: &[f64], gy: &[f64]) -> Result<(Vec<f64>, Vec<f64>), EnhanceError> {
    if gx.len() != gy.len() {
        return Err(EnhanceError::LengthMismatch(gx.len(), gy.len()));
    }
    let grad_con = gx.iter().chain(gy).copied().collect();
    let mut vort = vec![0.0; gx.len()];
    vorticity_into(gx, gy, &mut vort);
    Ok((grad_con, vort))
}

/// Degree-1 polynomial expansion with bias: `[1] ++ row`.
pub fn poly_features(row: &[f64], degree: u32) -> Result<Vec<f64>, EnhanceError> {
    if degree != 1 {
        return Err(EnhanceError::UnsupportedDegree(degree));
    }
    let mut out = Vec::with_capacity(row.len() + 1);
    out.push(1.0);
    out.extend_from_slice(row);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Base,
    Gradient,
    Vorticity,
    Poly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpan {
    pub kind: BlockKind,
    pub offset: usize,
    pub width: usize,
}

/// Column layout of a cascade; the spans partition `[0, total)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeLayout {
    pub base_width: usize,
    pub raw_width: usize,
    pub total: usize,
    pub blocks: Vec<BlockSpan>,
}

impl CascadeLayout {
    pub fn new(base_width: usize, raw_width: usize) -> Self {
        let widths = [
            (BlockKind::Base, base_width),
            (BlockKind::Gradient, 2 * base_width),
            (BlockKind::Vorticity, base_width),
            (BlockKind::Poly, 1 + raw_width),
        ];
        let mut offset = 0;
        let blocks = widths
            .into_iter()
            .map(|(kind, width)| {
                let span = BlockSpan { kind, offset, width };
                offset += width;
                span
            })
            .collect();
        Self {
            base_width,
            raw_width,
            total: offset,
            blocks,
        }
    }

    pub fn span(&self, kind: BlockKind) -> &BlockSpan {
        self.blocks.iter().find(|b| b.kind == kind).expect("every block kind is present")
    }

    pub fn column_names(&self) -> Vec<String> {
        let d = self.base_width;
        let mut names = Vec::with_capacity(self.total);
        names.extend((0..d).map(|k| format!("base_{k}")));
        names.extend((0..d).map(|k| format!("grad_x_{k}")));
        names.extend((0..d).map(|k| format!("grad_y_{k}")));
        names.extend((0..d).map(|k| format!("vort_{k}")));
        names.push("poly_bias".into());
        names.extend((0..self.raw_width).map(|k| format!("poly_{k}")));
        names
    }
}

/// Cascade matrix plus its block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedFeatures {
    pub matrix: FeatureMatrix,
    pub layout: CascadeLayout,
    pub modulus: ModulusConfig,
}

impl EnhancedFeatures {
    pub fn block(&self, kind: BlockKind) -> FeatureMatrix {
        let span = self.layout.span(kind);
        self.matrix.column_slice(span.offset, span.offset + span.width)
    }

    /// Writes the matrix to `csv_path` and the layout to `<csv_path>.layout.json`.
    pub fn export(&self, csv_path: &Path) -> std::io::Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(csv_path)?);
        self.matrix.write_csv(file, &self.layout.column_names())?;
        let mut sidecar = csv_path.as_os_str().to_owned();
        sidecar.push(".layout.json");
        let mut out = std::fs::File::create(sidecar)?;
        let doc = serde_json::json!({
            "rows": self.matrix.n_rows(),
            "layout": self.layout,
            "modulus": self.modulus,
        });
        out.write_all(serde_json::to_string_pretty(&doc)?.as_bytes())?;
        out.write_all(b"\n")
    }
}

/// Builds the cascade for every row of `base`, taking the polynomial block
/// from the matching row of `raw`.
pub fn cascade(base: &FeatureMatrix, raw: &FeatureMatrix, cfg: ModulusConfig) -> Result<EnhancedFeatures, EnhanceError> {
    if base.n_rows() != raw.n_rows() {
        return Err(EnhanceError::RowMismatch {
            base: base.n_rows(),
            raw: raw.n_rows(),
        });
    }
    let n = base.n_rows();
    let d = base.n_cols();
    let layout = CascadeLayout::new(d, raw.n_cols());
    if n > 0 && cfg.modulus == 0 {
        return Err(EnhanceError::ZeroModulus);
    }
    let gradients = FeatureMatrix::from_fn_rows(n, d, |i, out| gradient_into(base.row(i), out));
    let partners = (0..n)
        .map(|i| loop_modulus_index(i, cfg.offset, cfg.modulus))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(&j) = partners.iter().find(|&&j| j >= n) {
        return Err(EnhanceError::RowMismatch { base: n, raw: j + 1 });
    }

    let matrix = FeatureMatrix::from_fn_rows(n, layout.total, |i, out| {
        let gx = gradients.row(i);
        let gy = gradients.row(partners[i]);
        let (head, rest) = out.split_at_mut(d);
        head.copy_from_slice(base.row(i));
        let (grad, rest) = rest.split_at_mut(2 * d);
        grad[..d].copy_from_slice(gx);
        grad[d..].copy_from_slice(gy);
        let (vort, poly) = rest.split_at_mut(d);
        vorticity_into(gx, gy, vort);
        poly[0] = 1.0;
        poly[1..].copy_from_slice(raw.row(i));
    });
    Ok(EnhancedFeatures {
        matrix,
        layout,
        modulus: cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn modulus_examples() {
        assert_eq!(loop_modulus_index(4, 5, 3), Ok(0));
        assert_eq!(loop_modulus_index(2, 5, 5), Ok(2));
        assert_eq!(loop_modulus_index(1, 1, 0), Err(EnhanceError::ZeroModulus));
        assert_eq!(loop_modulus_index(usize::MAX, usize::MAX, 7), Ok(((u128::from(u64::MAX) * 2) % 7) as usize));
    }

    #[test]
    fn row_count_mode_is_identity() {
        let n = 37;
        let cfg = ModulusConfig::for_rows(OffsetMode::RowCount, n);
        for i in 0..n {
            assert_eq!(loop_modulus_index(i, cfg.offset, cfg.modulus), Ok(i));
        }
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(row_gradient(&[5.0, 5.0, 5.0]), [0.0, 0.0, 0.0]);
        assert_eq!(row_gradient(&[0.0, 1.0, 2.0, 3.0]), [1.0, 1.0, 1.0, 1.0]);
        assert_eq!(row_gradient(&[7.0]), [0.0]);
        assert_eq!(row_gradient(&[1.0, 4.0, 9.0]), [3.0, 4.0, 5.0]);
    }

    #[test]
    fn curl_examples() {
        let (con, vort) = curl_feature(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(con, [0.0, 1.0, 1.0, 0.0]);
        assert_eq!(vort, [-2.0, 0.0]);
        let g = [0.3, -1.0, 2.0];
        assert_eq!(curl_feature(&g, &g).unwrap().1, [0.0, 0.0, 0.0]);
        assert_eq!(curl_feature(&[1.0], &[]), Err(EnhanceError::LengthMismatch(1, 0)));
    }

    #[test]
    fn poly_examples() {
        assert_eq!(poly_features(&[2.0, 3.0], 1).unwrap(), [1.0, 2.0, 3.0]);
        assert_eq!(poly_features(&[], 1).unwrap(), [1.0]);
        assert_eq!(poly_features(&[1.0], 2), Err(EnhanceError::UnsupportedDegree(2)));
    }

    #[test]
    fn cascade_width_for_four_classes() {
        let base = FeatureMatrix::zeros(2, 400);
        let raw = FeatureMatrix::zeros(2, 2500);
        let e = cascade(&base, &raw, ModulusConfig::for_rows(OffsetMode::RowCount, 2)).unwrap();
        assert_eq!(e.matrix.n_cols(), 4101);
        assert_eq!(e.layout.total, 4101);
        assert_eq!(e.layout.column_names().len(), 4101);
    }

    #[test]
    fn single_row_cascade() {
        let base = FeatureMatrix::from_rows(&[[1.0, 3.0]]).unwrap();
        let raw = FeatureMatrix::from_rows(&[[0.5]]).unwrap();
        let e = cascade(&base, &raw, ModulusConfig::for_rows(OffsetMode::Shifted, 1)).unwrap();
        assert_eq!(e.matrix.n_rows(), 1);
        assert_eq!(e.matrix.row(0), &[1.0, 3.0, 2.0, 2.0, 2.0, 2.0, 0.0, 0.0, 1.0, 0.5]);
    }

    #[test]
    fn shifted_mode_pairs_next_row() {
        let base = FeatureMatrix::from_rows(&[[0.0, 1.0, 2.0], [0.0, 2.0, 6.0]]).unwrap();
        let raw = FeatureMatrix::zeros(2, 1);
        let e = cascade(&base, &raw, ModulusConfig::for_rows(OffsetMode::Shifted, 2)).unwrap();
        let grad = e.block(BlockKind::Gradient);
        assert_eq!(grad.row(0), &[1.0, 1.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(grad.row(1), &[2.0, 3.0, 4.0, 1.0, 1.0, 1.0]);
        let vort = e.block(BlockKind::Vorticity);
        assert_eq!(vort.row(0), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn row_mismatch() {
        let err = cascade(&FeatureMatrix::zeros(2, 1), &FeatureMatrix::zeros(3, 1), ModulusConfig { offset: 2, modulus: 2 });
        assert_eq!(err.unwrap_err(), EnhanceError::RowMismatch { base: 2, raw: 3 });
    }

    #[test]
    fn export_writes_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let base = FeatureMatrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let e = cascade(&base, &base, ModulusConfig::for_rows(OffsetMode::RowCount, 2)).unwrap();
        let path = dir.path().join("fe.csv");
        e.export(&path).unwrap();
        let csv = std::fs::read_to_string(&path).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "base_0,grad_x_0,grad_y_0,vort_0,poly_bias,poly_0");
        assert_eq!(csv.lines().count(), 3);
        let sidecar = std::fs::read_to_string(dir.path().join("fe.csv.layout.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
        assert_eq!(v["layout"]["total"], 6);
    }

    fn arb_matrix() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>)> {
        (1usize..6, 1usize..6, 0usize..4).prop_flat_map(|(n, d, dr)| {
            (
                Just(n),
                Just(d),
                prop::collection::vec(-5.0f64..5.0, n * d),
                prop::collection::vec(-5.0f64..5.0, n * dr),
            )
        })
    }

    proptest! {
        #[test]
        fn modulus_in_range(i in 0usize..100_000, offset in 0usize..100_000, modulus in 1usize..5_000) {
            let j = loop_modulus_index(i, offset, modulus).unwrap();
            prop_assert!(j < modulus);
            prop_assert_eq!(j, (i + offset) % modulus);
        }

        #[test]
        fn affine_rows_have_constant_gradient(a in -10.0f64..10.0, b in -10.0f64..10.0, d in 2usize..40) {
            let row: Vec<f64> = (0..d).map(|k| a * k as f64 + b).collect();
            for g in row_gradient(&row) {
                prop_assert!((g - a).abs() <= 1e-9 * (1.0 + b.abs() + d as f64 * a.abs()));
            }
        }

        #[test]
        fn self_vorticity_is_zero(g in prop::collection::vec(-1e3f64..1e3, 0..30)) {
            let (_, v) = curl_feature(&g, &g).unwrap();
            prop_assert!(v.iter().all(|x| *x == 0.0));
        }

        #[test]
        fn blocks_reassemble_exactly((n, d, base, raw) in arb_matrix(), shifted in any::<bool>()) {
            let dr = raw.len() / n;
            let base = FeatureMatrix::from_vec(n, d, base).unwrap();
            let raw = FeatureMatrix::from_vec(n, dr, raw).unwrap();
            let mode = if shifted { OffsetMode::Shifted } else { OffsetMode::RowCount };
            let e = cascade(&base, &raw, ModulusConfig::for_rows(mode, n)).unwrap();
            prop_assert_eq!(e.matrix.n_cols(), d + 2 * d + d + 1 + dr);
            let spans = &e.layout.blocks;
            prop_assert_eq!(spans[0].offset, 0);
            for w in spans.windows(2) {
                prop_assert_eq!(w[0].offset + w[0].width, w[1].offset);
            }
            let parts: Vec<FeatureMatrix> = spans.iter().map(|s| e.block(s.kind)).collect();
            let refs: Vec<&FeatureMatrix> = parts.iter().collect();
            prop_assert_eq!(&FeatureMatrix::hstack(&refs).unwrap(), &e.matrix);
            prop_assert_eq!(&parts[0], &base);
            for i in 0..n {
                let j = loop_modulus_index(i, e.modulus.offset, e.modulus.modulus).unwrap();
                let (con, vort) = curl_feature(&row_gradient(base.row(i)), &row_gradient(base.row(j))).unwrap();
                prop_assert_eq!(parts[1].row(i), &con[..]);
                prop_assert_eq!(parts[2].row(i), &vort[..]);
                prop_assert_eq!(parts[3].row(i), &poly_features(raw.row(i), 1).unwrap()[..]);
            }
        }
    }
}
