//! Operators on tensor products of finite-dimensional mode spaces.
//!
//! A [`SpaceLayout`] records the ordered factor dimensions of a tensor
//! product space; slot 0 is the slowest-varying index in the row-major basis
//! enumeration. [`OperatorMatrix`] is a dense matrix tagged with the layout
//! it acts on, which keeps embeddings, partial traces and products honest
//! about which space they live in.

use ndarray::linalg::kron;
use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{self, LinalgError};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("space layout needs at least one factor")]
    EmptyLayout,
    #[error("factor {index} has dimension {dim}; every factor must be at least 2")]
    FactorTooSmall { index: usize, dim: usize },
    #[error("slot {slot} out of range for layout with {slots} factors")]
    SlotOutOfRange { slot: usize, slots: usize },
    #[error("operator is {got}x{got} but slot {slot} has dimension {want}")]
    LocalDimensionMismatch { slot: usize, want: usize, got: usize },
    #[error("matrix is {rows}x{cols} but the layout dimension is {want}")]
    ShapeMismatch { rows: usize, cols: usize, want: usize },
    #[error(
        "matrix is not Hermitian: max |M - M^dag| = {deviation:.3e} exceeds {tolerance:.3e}"
    )]
    NotHermitian { deviation: f64, tolerance: f64 },
    #[error(transparent)]
    Numerical(#[from] LinalgError),
}

/// Ordered factor dimensions of a tensor product space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceLayout {
    factors: Vec<usize>,
}

impl SpaceLayout {
    pub fn new(factors: Vec<usize>) -> Result<Self, OperatorError> {
        if factors.is_empty() {
            return Err(OperatorError::EmptyLayout);
        }
        for (index, &dim) in factors.iter().enumerate() {
            if dim < 2 {
                return Err(OperatorError::FactorTooSmall { index, dim });
            }
        }
        Ok(Self { factors })
    }

    pub fn single(dim: usize) -> Result<Self, OperatorError> {
        Self::new(vec![dim])
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn num_slots(&self) -> usize {
        self.factors.len()
    }

    /// Total dimension, the product of all factors.
    pub fn dim(&self) -> usize {
        self.factors.iter().product()
    }

    /// Layout of `self` followed by `other`, used to adjoin carrier spaces.
    pub fn join(&self, other: &SpaceLayout) -> SpaceLayout {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        SpaceLayout { factors }
    }

    fn check_slot(&self, slot: usize) -> Result<(), OperatorError> {
        if slot >= self.factors.len() {
            return Err(OperatorError::SlotOutOfRange {
                slot,
                slots: self.factors.len(),
            });
        }
        Ok(())
    }
}

/// Dense operator on the space described by a [`SpaceLayout`].
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    layout: SpaceLayout,
    matrix: Array2<Complex64>,
}

impl OperatorMatrix {
    pub fn from_array(
        layout: SpaceLayout,
        matrix: Array2<Complex64>,
    ) -> Result<Self, OperatorError> {
        let want = layout.dim();
        let (rows, cols) = matrix.dim();
        if rows != want || cols != want {
            return Err(OperatorError::ShapeMismatch { rows, cols, want });
        }
        Ok(Self { layout, matrix })
    }

    pub fn zeros(layout: SpaceLayout) -> Self {
        let n = layout.dim();
        Self {
            layout,
            matrix: Array2::zeros((n, n)),
        }
    }

    pub fn identity(layout: SpaceLayout) -> Self {
        let n = layout.dim();
        Self {
            layout,
            matrix: Array2::eye(n),
        }
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn array(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn into_array(self) -> Array2<Complex64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn assert_same_layout(&self, other: &OperatorMatrix, what: &str) {
        assert_eq!(
            self.layout, other.layout,
            "layout mismatch in {what}: {:?} vs {:?}",
            self.layout.factors, other.layout.factors
        );
    }

    pub fn dagger(&self) -> OperatorMatrix {
        OperatorMatrix {
            layout: self.layout.clone(),
            matrix: linalg::dagger(&self.matrix),
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.diag().sum()
    }

    pub fn scaled(&self, z: Complex64) -> OperatorMatrix {
        OperatorMatrix {
            layout: self.layout.clone(),
            matrix: self.matrix.mapv(|m| m * z),
        }
    }

    pub fn dot(&self, other: &OperatorMatrix) -> OperatorMatrix {
        self.assert_same_layout(other, "product");
        OperatorMatrix {
            layout: self.layout.clone(),
            matrix: self.matrix.dot(&other.matrix),
        }
    }

    pub fn add(&self, other: &OperatorMatrix) -> OperatorMatrix {
        self.assert_same_layout(other, "sum");
        OperatorMatrix {
            layout: self.layout.clone(),
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn sub(&self, other: &OperatorMatrix) -> OperatorMatrix {
        self.assert_same_layout(other, "difference");
        OperatorMatrix {
            layout: self.layout.clone(),
            matrix: &self.matrix - &other.matrix,
        }
    }

    pub fn add_assign(&mut self, other: &OperatorMatrix) {
        self.assert_same_layout(other, "sum");
        self.matrix = &self.matrix + &other.matrix;
    }

    pub fn commutator(&self, other: &OperatorMatrix) -> OperatorMatrix {
        self.dot(other).sub(&other.dot(self))
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.matrix)
    }

    /// Trace out the listed slots, returning the reduced operator on the
    /// remaining factors in their original order.
    pub fn partial_trace(&self, traced_slots: &[usize]) -> Result<OperatorMatrix, OperatorError> {
        for &slot in traced_slots {
            self.layout.check_slot(slot)?;
        }
        let dims = self.layout.factors();
        let slots = dims.len();
        let mut is_traced = vec![false; slots];
        for &slot in traced_slots {
            is_traced[slot] = true;
        }
        let kept: Vec<usize> = (0..slots).filter(|&s| !is_traced[s]).collect();
        assert!(
            !kept.is_empty(),
            "partial trace must keep at least one factor; use trace() for the full trace"
        );

        // Row-major strides, slot 0 slowest.
        let mut strides = vec![1usize; slots];
        for s in (0..slots.saturating_sub(1)).rev() {
            strides[s] = strides[s + 1] * dims[s + 1];
        }

        let kept_dims: Vec<usize> = kept.iter().map(|&s| dims[s]).collect();
        let traced: Vec<usize> = (0..slots).filter(|&s| is_traced[s]).collect();
        let traced_dims: Vec<usize> = traced.iter().map(|&s| dims[s]).collect();
        let kept_total: usize = kept_dims.iter().product();
        let traced_total: usize = traced_dims.iter().product();

        // Base offsets contributed by kept (row, col) and traced diagonal parts.
        let offsets = |flat: usize, sel: &[usize], sel_dims: &[usize]| -> usize {
            let mut rem = flat;
            let mut off = 0;
            for k in (0..sel.len()).rev() {
                let digit = rem % sel_dims[k];
                rem /= sel_dims[k];
                off += digit * strides[sel[k]];
            }
            off
        };

        let traced_offsets: Vec<usize> = (0..traced_total)
            .map(|t| offsets(t, &traced, &traced_dims))
            .collect();
        let mut reduced = Array2::<Complex64>::zeros((kept_total, kept_total));
        for r in 0..kept_total {
            let row_base = offsets(r, &kept, &kept_dims);
            for c in 0..kept_total {
                let col_base = offsets(c, &kept, &kept_dims);
                let mut acc = Complex64::new(0.0, 0.0);
                for &t in &traced_offsets {
                    acc += self.matrix[[row_base + t, col_base + t]];
                }
                reduced[[r, c]] = acc;
            }
        }
        let layout = SpaceLayout::new(kept_dims)?;
        Ok(OperatorMatrix {
            layout,
            matrix: reduced,
        })
    }
}

/// Truncated bosonic annihilation operator, `a[n-1, n] = sqrt(n)`.
pub fn annihilation(dim: usize) -> Array2<Complex64> {
    assert!(dim >= 2, "annihilation needs dimension >= 2, got {dim}");
    let mut a = Array2::zeros((dim, dim));
    for n in 1..dim {
        a[[n - 1, n]] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Number operator `a^dag a` on a truncated mode space.
pub fn number_operator(dim: usize) -> Array2<Complex64> {
    let mut n = Array2::zeros((dim, dim));
    for k in 0..dim {
        n[[k, k]] = Complex64::new(k as f64, 0.0);
    }
    n
}

/// Embed a single-factor operator into the full space at `slot`, tensoring
/// identities on every other factor. This is an algebra homomorphism: the
/// embedding of a product equals the product of the embeddings.
pub fn embed(
    layout: &SpaceLayout,
    slot: usize,
    local: &Array2<Complex64>,
) -> Result<OperatorMatrix, OperatorError> {
    layout.check_slot(slot)?;
    let want = layout.factors()[slot];
    let (rows, cols) = local.dim();
    if rows != want || cols != want {
        return Err(OperatorError::LocalDimensionMismatch {
            slot,
            want,
            got: rows.max(cols),
        });
    }
    let mut full = Array2::eye(1);
    for (s, &dim) in layout.factors().iter().enumerate() {
        if s == slot {
            full = kron(&full, local);
        } else {
            full = kron(&full, &Array2::eye(dim));
        }
    }
    OperatorMatrix::from_array(layout.clone(), full)
}

/// Matrix exponential `exp(scale * M)`. Relative accuracy is 1e-12 or better
/// whenever `||scale * M||_1 <= 10`.
pub fn matrix_exponential(
    scale: Complex64,
    m: &OperatorMatrix,
) -> Result<OperatorMatrix, OperatorError> {
    let scaled = m.array().mapv(|z| z * scale);
    let e = linalg::expm(&scaled)?;
    Ok(OperatorMatrix {
        layout: m.layout().clone(),
        matrix: e,
    })
}

/// Eigendecomposition of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Unitary whose columns are the matching eigenvectors.
    pub vectors: Array2<Complex64>,
}

impl HermitianEigen {
    /// Rebuild `V diag(values) V^dag`, mainly for accuracy checks.
    pub fn reconstruct(&self) -> Array2<Complex64> {
        let n = self.values.len();
        let mut d = Array2::<Complex64>::zeros((n, n));
        for (i, &v) in self.values.iter().enumerate() {
            d[[i, i]] = Complex64::new(v, 0.0);
        }
        self.vectors.dot(&d).dot(&linalg::dagger(&self.vectors))
    }
}

/// Diagonalize a Hermitian operator. Rejects inputs whose Hermiticity
/// deviation exceeds `1e-9 * max|M|`; the reconstruction error of the result
/// stays below `1e-10 * max|M|` and the eigenvector matrix is unitary to
/// 1e-10.
pub fn hermitian_eigen(m: &OperatorMatrix) -> Result<HermitianEigen, OperatorError> {
    hermitian_eigen_array(m.array())
}

/// Same as [`hermitian_eigen`] for a raw matrix.
pub fn hermitian_eigen_array(m: &Array2<Complex64>) -> Result<HermitianEigen, OperatorError> {
    let scale = linalg::max_abs(m);
    let deviation = linalg::hermiticity_deviation(m);
    let tolerance = 1e-9 * scale.max(f64::MIN_POSITIVE);
    if deviation > tolerance {
        return Err(OperatorError::NotHermitian {
            deviation,
            tolerance,
        });
    }
    let (values, vectors) = linalg::hermitian_eigen_raw(m)?;
    Ok(HermitianEigen { values, vectors })
}

/// Trace distance `0.5 * ||rho - sigma||_1` between Hermitian matrices.
pub fn trace_distance(
    rho: &Array2<Complex64>,
    sigma: &Array2<Complex64>,
) -> Result<f64, OperatorError> {
    let diff = rho - sigma;
    let eigen = hermitian_eigen_array(&diff)?;
    Ok(0.5 * eigen.values.iter().map(|v| v.abs()).sum::<f64>())
}
