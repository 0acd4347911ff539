//! Block-boundary bookkeeping for stacked trajectory vectors and operators.
//!
//! Trajectory-level matrices are stored dense; this module carries the
//! metadata needed to address them by (time block, subsystem block) and to
//! copy sub-blocks around without off-by-one index arithmetic at every
//! call site.

use nalgebra::{DMatrix, DMatrixView, DVector};

/// A partition of a contiguous index range into named blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        Self { sizes, offsets }
    }

    /// Layout with `reps` repetitions of the same inner partition, e.g. the
    /// per-time-step subsystem partition repeated over the horizon.
    pub fn repeated(inner: &[usize], reps: usize) -> Self {
        let mut sizes = Vec::with_capacity(inner.len() * reps);
        for _ in 0..reps {
            sizes.extend_from_slice(inner);
        }
        Self::new(sizes)
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn size(&self, b: usize) -> usize {
        self.sizes[b]
    }

    pub fn offset(&self, b: usize) -> usize {
        self.offsets[b]
    }

    /// Scalar index range covered by block `b`.
    pub fn range(&self, b: usize) -> std::ops::Range<usize> {
        self.offsets[b]..self.offsets[b + 1]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
}

/// Copy `src` into `dst` at block position (`row_block`, `col_block`).
pub fn set_block(
    dst: &mut DMatrix<f64>,
    rows: &BlockLayout,
    cols: &BlockLayout,
    row_block: usize,
    col_block: usize,
    src: DMatrixView<'_, f64>,
) {
    debug_assert_eq!(src.nrows(), rows.size(row_block));
    debug_assert_eq!(src.ncols(), cols.size(col_block));
    dst.view_mut(
        (rows.offset(row_block), cols.offset(col_block)),
        (src.nrows(), src.ncols()),
    )
    .copy_from(&src);
}

/// View of block (`row_block`, `col_block`) of `m`.
pub fn get_block<'a>(
    m: &'a DMatrix<f64>,
    rows: &BlockLayout,
    cols: &BlockLayout,
    row_block: usize,
    col_block: usize,
) -> DMatrixView<'a, f64> {
    m.view(
        (rows.offset(row_block), cols.offset(col_block)),
        (rows.size(row_block), cols.size(col_block)),
    )
}

/// Extract the sub-vector for block `b` of `v`.
pub fn get_vec_block(v: &DVector<f64>, layout: &BlockLayout, b: usize) -> DVector<f64> {
    v.rows(layout.offset(b), layout.size(b)).into_owned()
}

/// Write `src` into block `b` of `v`.
pub fn set_vec_block(v: &mut DVector<f64>, layout: &BlockLayout, b: usize, src: &DVector<f64>) {
    debug_assert_eq!(src.len(), layout.size(b));
    v.rows_mut(layout.offset(b), layout.size(b)).copy_from(src);
}
