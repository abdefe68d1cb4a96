//! Dense matrices and the dissimilarity-matrix type.
//!
//! [`DenseMatrix`] is a minimal row-major container of finite 64-bit reals.
//! [`DissimilarityMatrix`] wraps one as the M×N table of costs `d[i][j]` of
//! letting source element `i` stand in for target element `j`, together with
//! an optional observation mask (for partially known dissimilarities) and the
//! scale factor recorded by [`DissimilarityMatrix::normalize`].

use crate::error::{Error, Result};

/// Which row norm the row-sparsity penalty uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormP {
    /// Euclidean row norm.
    P2,
    /// Maximum-magnitude row norm.
    PInf,
}

/// Row-major dense matrix of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// All-zero matrix. Dimensions must be positive.
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok(Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        })
    }

    /// Builds from a row-major buffer, checking shape and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                rows,
                cols,
                got: data.len(),
            });
        }
        for (idx, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: idx / cols,
                    col: idx % cols,
                    value: v,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if nrows == 0 || ncols == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            if row.len() != ncols {
                return Err(Error::ShapeMismatch {
                    rows: nrows,
                    cols: ncols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(nrows, ncols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry accessor.
    ///
    /// # Panics
    /// Panics when the index is out of range, like slice indexing.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        self.data[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        self.data[i * self.cols + j] = v;
    }

    /// Contiguous view of row `i`.
    ///
    /// # Panics
    /// Panics when `i` is out of range.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        assert!(i < self.rows, "row {i} out of range for {} rows", self.rows);
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Strided, copy-free view of column `j`.
    ///
    /// # Panics
    /// Panics when `j` is out of range.
    pub fn col(&self, j: usize) -> ColView<'_> {
        assert!(j < self.cols, "column {j} out of range for {} cols", self.cols);
        ColView {
            data: &self.data[j..],
            stride: self.cols,
            len: self.rows,
        }
    }

    /// Flat row-major view of the underlying buffer.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Largest absolute entry (0 for the all-zero matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute elementwise difference against `other`.
    ///
    /// # Panics
    /// Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shape mismatch in max_abs_diff"
        );
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Read-only strided view of one matrix column.
#[derive(Debug, Clone, Copy)]
pub struct ColView<'a> {
    data: &'a [f64],
    stride: usize,
    len: usize,
}

impl<'a> ColView<'a> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Element `k` of the column.
    ///
    /// # Panics
    /// Panics when `k` is out of range.
    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        assert!(k < self.len, "column element {k} out of range");
        self.data[k * self.stride]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + 'a {
        self.data.iter().step_by(self.stride).copied()
    }
}

/// M×N table of dissimilarities from M source elements to N target elements,
/// with an optional observation mask and the normalization scale factor.
///
/// Unobserved entries are stored as `0.0` internally; the mask (row-major,
/// `true` = observed) is the source of truth for observedness. Every column
/// must keep at least one observed entry, otherwise that target could not be
/// represented by anything.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    values: DenseMatrix,
    mask: Option<Vec<bool>>,
    scale_factor: f64,
}

impl DissimilarityMatrix {
    /// Fully observed dissimilarities.
    pub fn new(values: DenseMatrix) -> Self {
        Self {
            values,
            mask: None,
            scale_factor: 1.0,
        }
    }

    /// Partially observed dissimilarities; `mask` is row-major, `true` =
    /// observed. Unobserved positions are forced to `0.0` in storage.
    pub fn with_mask(mut values: DenseMatrix, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != values.rows() * values.cols() {
            return Err(Error::ShapeMismatch {
                rows: values.rows(),
                cols: values.cols(),
                got: mask.len(),
            });
        }
        let cols = values.cols();
        for j in 0..cols {
            if !(0..values.rows()).any(|i| mask[i * cols + j]) {
                return Err(Error::UnobservedColumn { col: j });
            }
        }
        for (idx, observed) in mask.iter().enumerate() {
            if !observed {
                values.data[idx] = 0.0;
            }
        }
        // A mask with no holes is the same as no mask at all.
        let mask = if mask.iter().all(|&o| o) { None } else { Some(mask) };
        Ok(Self {
            values,
            mask,
            scale_factor: 1.0,
        })
    }

    pub(crate) fn from_parts(
        values: DenseMatrix,
        mask: Option<Vec<bool>>,
        scale_factor: f64,
    ) -> Result<Self> {
        let mut d = match mask {
            Some(m) => Self::with_mask(values, m)?,
            None => Self::new(values),
        };
        d.scale_factor = scale_factor;
        Ok(d)
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    /// The stored values; unobserved positions read as `0.0`.
    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    /// Row-major observation mask, or `None` when fully observed.
    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        match &self.mask {
            Some(m) => m[i * self.values.cols() + j],
            None => true,
        }
    }

    /// Entry accessor; `0.0` for unobserved entries.
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    /// The cumulative divisor applied by [`Self::normalize`] (1 if never
    /// normalized or the matrix was all zeros).
    pub fn scale_factor(&self) -> f64 {
        self.scale_factor
    }

    /// Smallest observed dissimilarity in column `j` with the row achieving
    /// it (lowest row index on ties). The column-coverage invariant
    /// guarantees at least one observed entry.
    pub fn col_min_observed(&self, j: usize) -> (usize, f64) {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows() {
            if !self.is_observed(i, j) {
                continue;
            }
            let v = self.value(i, j);
            match best {
                Some((_, b)) if v >= b => {}
                _ => best = Some((i, v)),
            }
        }
        best.expect("column coverage invariant violated")
    }

    /// Scales all observed entries so the largest absolute observed value
    /// becomes 1 (no-op for an all-zero matrix). The divisor is accumulated
    /// into `scale_factor`, which makes the operation idempotent including
    /// its metadata.
    pub fn normalize(mut self) -> Self {
        let max_abs = self.values.max_abs();
        if max_abs > 0.0 {
            for v in self.values.data.iter_mut() {
                *v /= max_abs;
            }
            self.scale_factor *= max_abs;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_matrix_rejects_bad_shapes_and_values() {
        assert!(matches!(DenseMatrix::zeros(0, 3), Err(Error::EmptyMatrix)));
        assert!(matches!(
            DenseMatrix::from_vec(2, 2, vec![1.0; 3]),
            Err(Error::ShapeMismatch { got: 3, .. })
        ));
        let err = DenseMatrix::from_vec(2, 2, vec![0.0, 1.0, f64::NAN, 3.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, col: 0, .. }));
    }

    #[test]
    fn row_and_column_views_are_copy_free_and_consistent() {
        let m = DenseMatrix::from_vec(2, 3, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0, 5.0]);
        let col = m.col(2);
        assert_eq!(col.len(), 2);
        assert_eq!(col.get(0), 2.0);
        assert_eq!(col.iter().collect::<Vec<_>>(), vec![2.0, 5.0]);
        assert_eq!(m.get(1, 2), 5.0);
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn out_of_range_row_panics() {
        let m = DenseMatrix::zeros(2, 2).unwrap();
        let _ = m.row(2);
    }

    #[test]
    fn normalize_divides_by_max_entry() {
        let d = DissimilarityMatrix::new(
            DenseMatrix::from_vec(2, 2, vec![0.0, 2.0, 4.0, 2.0]).unwrap(),
        )
        .normalize();
        assert_eq!(d.values().as_slice(), &[0.0, 0.5, 1.0, 0.5]);
        assert_eq!(d.scale_factor(), 4.0);
    }

    #[test]
    fn normalize_leaves_all_zero_matrix_alone() {
        let d = DissimilarityMatrix::new(DenseMatrix::zeros(2, 2).unwrap()).normalize();
        assert_eq!(d.values().as_slice(), &[0.0; 4]);
        assert_eq!(d.scale_factor(), 1.0);
    }

    #[test]
    fn normalize_uses_absolute_value_for_negative_entries() {
        // Similarity-converted inputs can be negative; the divisor is the
        // largest magnitude so everything lands in [-1, 1].
        let d = DissimilarityMatrix::new(
            DenseMatrix::from_vec(1, 2, vec![-1.0, 3.0]).unwrap(),
        )
        .normalize();
        assert_eq!(d.values().as_slice(), &[-1.0 / 3.0, 1.0]);
        assert_eq!(d.scale_factor(), 3.0);
    }

    #[test]
    fn normalize_is_idempotent_including_scale_factor() {
        let d = DissimilarityMatrix::new(
            DenseMatrix::from_vec(2, 2, vec![0.0, 2.0, 4.0, 2.0]).unwrap(),
        )
        .normalize();
        let twice = d.clone().normalize();
        assert_eq!(d, twice);
    }

    #[test]
    fn mask_requires_column_coverage_and_zeroes_hidden_entries() {
        let values = DenseMatrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let err =
            DissimilarityMatrix::with_mask(values.clone(), vec![true, false, true, false])
                .unwrap_err();
        assert!(matches!(err, Error::UnobservedColumn { col: 1 }));

        let d = DissimilarityMatrix::with_mask(values, vec![true, false, true, true]).unwrap();
        assert_eq!(d.value(0, 1), 0.0);
        assert!(!d.is_observed(0, 1));
        assert!(d.is_observed(1, 1));
    }

    #[test]
    fn full_mask_collapses_to_none() {
        let values = DenseMatrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        let d = DissimilarityMatrix::with_mask(values, vec![true, true]).unwrap();
        assert!(d.mask().is_none());
    }

    #[test]
    fn col_min_observed_skips_masked_entries_and_breaks_ties_low() {
        let values = DenseMatrix::from_vec(3, 1, vec![0.1, 5.0, 5.0]).unwrap();
        let d = DissimilarityMatrix::with_mask(values, vec![false, true, true]).unwrap();
        assert_eq!(d.col_min_observed(0), (1, 5.0));
    }

    #[test]
    fn normalize_preserves_column_argmin() {
        let d = DissimilarityMatrix::new(
            DenseMatrix::from_vec(3, 2, vec![0.5, 9.0, 0.25, 3.0, 4.0, 7.0]).unwrap(),
        );
        let argmins = |d: &DissimilarityMatrix| {
            (0..d.cols()).map(|j| d.col_min_observed(j).0).collect::<Vec<_>>()
        };
        let before = argmins(&d);
        let after = argmins(&d.normalize());
        assert_eq!(before, after);
    }
}
