//! Dense linear algebra over truncated multimode Fock spaces: tensor
//! structure, partial trace and transpose, ladder operators, trace norm and
//! fidelities.
//!
//! Index convention: flat indices are row-major over modes with mode 0
//! slowest, i.e. for dims `[d0, d1, d2]` the occupation `(n0, n1, n2)` maps
//! to `n0*d1*d2 + n1*d2 + n2`. Every multi-index map in the crate goes
//! through [`ModeShape`] so there is a single bijection to get wrong.

use ndarray::{Array1, Array2};
use num_complex::Complex;

use crate::error::{FockError, Result};
use crate::linalg;
use crate::scalar::{c, cr, phase_factor, Real, C};

/// Norm tolerance used by `normalize` checks.
pub const NORM_TOL: f64 = 1e-12;
/// Constructors must keep at least `1 - TRUNCATION_BUDGET` of their norm
/// below the Fock cutoff; silently truncated tails corrupt entanglement and
/// fidelity figures downstream.
pub const TRUNCATION_BUDGET: f64 = 1e-6;

/// Per-mode Fock cutoffs. Dimension `d` means levels `0..d-1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeShape {
    dims: Vec<usize>,
}

impl ModeShape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(FockError::Invalid("shape needs at least one mode".into()));
        }
        for &d in &dims {
            if d < 2 {
                return Err(FockError::DimTooSmall { dim: d, min: 2 });
            }
        }
        Ok(Self { dims })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn num_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode]
    }

    /// Total Hilbert-space dimension, the product of all cutoffs.
    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims }
    }

    /// Stride of each mode in the flat index.
    pub(crate) fn strides(&self) -> Vec<usize> {
        let n = self.dims.len();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        strides
    }

    pub fn flat_index(&self, occupation: &[usize]) -> usize {
        debug_assert_eq!(occupation.len(), self.dims.len());
        let strides = self.strides();
        occupation
            .iter()
            .zip(&strides)
            .map(|(&n, &s)| n * s)
            .sum()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let strides = self.strides();
        let mut occ = Vec::with_capacity(self.dims.len());
        for &s in &strides {
            occ.push(flat / s);
            flat %= s;
        }
        occ
    }

    pub(crate) fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.dims.len() {
            return Err(FockError::ModeOutOfRange {
                mode,
                modes: self.dims.len(),
            });
        }
        Ok(())
    }

    /// Shape with the listed modes removed (indices into `self`).
    pub fn without(&self, drop: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.dims.len()];
        for &m in drop {
            self.check_mode(m)?;
            if seen[m] {
                return Err(FockError::DuplicateMode { mode: m });
            }
            seen[m] = true;
        }
        let dims: Vec<usize> = self
            .dims
            .iter()
            .enumerate()
            .filter(|(i, _)| !seen[*i])
            .map(|(_, &d)| d)
            .collect();
        if dims.is_empty() {
            return Err(FockError::DiscardAll);
        }
        Ok(Self { dims })
    }

    fn describe(&self) -> String {
        format!("{:?}", self.dims)
    }
}

fn check_same_shape(a: &ModeShape, b: &ModeShape) -> Result<()> {
    if a != b {
        return Err(FockError::ShapeMismatch {
            left: a.describe(),
            right: b.describe(),
        });
    }
    Ok(())
}

/// Offsets of every flat index of `sub` inside `full`, for the given mode
/// subset. Summing one offset from each complementary subset reconstructs a
/// full flat index.
pub(crate) fn subset_offsets(full: &ModeShape, modes: &[usize]) -> Vec<usize> {
    let strides = full.strides();
    let dims: Vec<usize> = modes.iter().map(|&m| full.dim(m)).collect();
    let total: usize = dims.iter().product();
    let mut offsets = Vec::with_capacity(total);
    for mut flat in 0..total {
        let mut off = 0;
        for i in (0..dims.len()).rev() {
            off += (flat % dims[i]) * strides[modes[i]];
            flat /= dims[i];
        }
        offsets.push(off);
    }
    offsets
}

/// Pure state on a truncated multimode Fock space.
#[derive(Clone, Debug)]
pub struct StateVector<T: Real> {
    shape: ModeShape,
    amps: Array1<C<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn new(shape: ModeShape, amps: Array1<C<T>>) -> Result<Self> {
        if amps.len() != shape.total() {
            return Err(FockError::Invalid(format!(
                "amplitude vector has length {}, shape needs {}",
                amps.len(),
                shape.total()
            )));
        }
        Ok(Self { shape, amps })
    }

    /// `|n0, n1, ...>` basis state.
    pub fn basis(shape: ModeShape, occupation: &[usize]) -> Result<Self> {
        if occupation.len() != shape.num_modes() {
            return Err(FockError::Invalid(format!(
                "occupation list has {} entries for {} modes",
                occupation.len(),
                shape.num_modes()
            )));
        }
        for (m, (&n, &d)) in occupation.iter().zip(shape.dims()).enumerate() {
            if n >= d {
                return Err(FockError::Invalid(format!(
                    "occupation {n} exceeds cutoff {d} on mode {m}"
                )));
            }
        }
        let mut amps = Array1::from_elem(shape.total(), c(0.0, 0.0));
        let idx = shape.flat_index(occupation);
        amps[idx] = c(1.0, 0.0);
        Ok(Self { shape, amps })
    }

    pub fn vacuum(shape: ModeShape) -> Self {
        let occ = vec![0usize; shape.num_modes()];
        Self::basis(shape, &occ).expect("vacuum always representable")
    }

    pub fn shape(&self) -> &ModeShape {
        &self.shape
    }

    pub fn amps(&self) -> &Array1<C<T>> {
        &self.amps
    }

    pub fn amp(&self, occupation: &[usize]) -> C<T> {
        self.amps[self.shape.flat_index(occupation)]
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(mut self) -> Result<Self> {
        let n = self.norm();
        if n <= T::lit(1e-150) {
            return Err(FockError::ZeroProbability);
        }
        let inv = cr(T::one() / n);
        self.amps.mapv_inplace(|z| z * inv);
        Ok(self)
    }

    pub fn scale(mut self, factor: C<T>) -> Self {
        self.amps.mapv_inplace(|z| z * factor);
        self
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<C<T>> {
        check_same_shape(&self.shape, &other.shape)?;
        Ok(self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * *b)
            .fold(c(0.0, 0.0), |acc, z| acc + z))
    }

    /// Squared overlap `|<self|other>|^2`.
    pub fn overlap(&self, other: &Self) -> Result<T> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Kronecker product; `self`'s modes come first in the result.
    pub fn tensor(&self, other: &Self) -> Self {
        let shape = self.shape.concat(&other.shape);
        let n = other.amps.len();
        let mut amps = Array1::from_elem(shape.total(), c(0.0, 0.0));
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() == T::zero() {
                continue;
            }
            for (j, b) in other.amps.iter().enumerate() {
                amps[i * n + j] = *a * *b;
            }
        }
        Self { shape, amps }
    }

    /// Rank-one density operator `|psi><psi|`.
    pub fn density(&self) -> ModeOperator<T> {
        ModeOperator {
            shape: self.shape.clone(),
            matrix: linalg::outer(&self.amps, &self.amps),
            hermitian: true,
        }
    }

    /// Reduced density operator on `keep` (in the given order), tracing out
    /// everything else.
    pub fn reduced_density(&self, keep: &[usize]) -> Result<ModeOperator<T>> {
        if keep.is_empty() {
            return Err(FockError::DiscardAll);
        }
        let mut is_kept = vec![false; self.shape.num_modes()];
        for &m in keep {
            self.shape.check_mode(m)?;
            if is_kept[m] {
                return Err(FockError::DuplicateMode { mode: m });
            }
            is_kept[m] = true;
        }
        let dropped: Vec<usize> = (0..self.shape.num_modes())
            .filter(|m| !is_kept[*m])
            .collect();
        let keep_dims: Vec<usize> = keep.iter().map(|&m| self.shape.dim(m)).collect();
        let out_shape = ModeShape::new(keep_dims)?;
        let keep_offsets = subset_offsets(&self.shape, keep);
        let drop_offsets = if dropped.is_empty() {
            vec![0]
        } else {
            subset_offsets(&self.shape, &dropped)
        };
        let nk = keep_offsets.len();
        let mut matrix = Array2::from_elem((nk, nk), c(0.0, 0.0));
        for (i, &oi) in keep_offsets.iter().enumerate() {
            for (j, &oj) in keep_offsets.iter().enumerate() {
                let mut acc = c::<T>(0.0, 0.0);
                for &od in &drop_offsets {
                    acc += self.amps[oi + od] * self.amps[oj + od].conj();
                }
                matrix[[i, j]] = acc;
            }
        }
        Ok(ModeOperator {
            shape: out_shape,
            matrix,
            hermitian: true,
        })
    }

    /// Apply a single-mode matrix (`d x d` for that mode's cutoff) in place
    /// on `mode`, leaving the other modes untouched.
    pub fn apply_single_mode(&self, matrix: &Array2<C<T>>, mode: usize) -> Result<Self> {
        self.shape.check_mode(mode)?;
        let d = self.shape.dim(mode);
        if matrix.dim() != (d, d) {
            return Err(FockError::Invalid(format!(
                "matrix is {:?}, mode {mode} has dimension {d}",
                matrix.dim()
            )));
        }
        let others: Vec<usize> = (0..self.shape.num_modes()).filter(|&m| m != mode).collect();
        let other_offsets = if others.is_empty() {
            vec![0]
        } else {
            subset_offsets(&self.shape, &others)
        };
        let stride = self.shape.strides()[mode];
        let mut amps = Array1::from_elem(self.amps.len(), c(0.0, 0.0));
        let mut column = vec![c::<T>(0.0, 0.0); d];
        for &base in &other_offsets {
            for (n, slot) in column.iter_mut().enumerate() {
                *slot = self.amps[base + n * stride];
            }
            for i in 0..d {
                let mut acc = c::<T>(0.0, 0.0);
                for (n, &amp) in column.iter().enumerate() {
                    acc += matrix[[i, n]] * amp;
                }
                amps[base + i * stride] = acc;
            }
        }
        Ok(Self {
            shape: self.shape.clone(),
            amps,
        })
    }

    /// Apply a joint matrix on two modes (dimension `d1*d2`, row-major over
    /// `(mode_a, mode_b)`).
    pub fn apply_two_mode(
        &self,
        matrix: &Array2<C<T>>,
        mode_a: usize,
        mode_b: usize,
    ) -> Result<Self> {
        self.shape.check_mode(mode_a)?;
        self.shape.check_mode(mode_b)?;
        if mode_a == mode_b {
            return Err(FockError::DuplicateMode { mode: mode_a });
        }
        let da = self.shape.dim(mode_a);
        let db = self.shape.dim(mode_b);
        let joint = da * db;
        if matrix.dim() != (joint, joint) {
            return Err(FockError::Invalid(format!(
                "matrix is {:?}, modes ({mode_a},{mode_b}) need {joint}x{joint}",
                matrix.dim()
            )));
        }
        let others: Vec<usize> = (0..self.shape.num_modes())
            .filter(|&m| m != mode_a && m != mode_b)
            .collect();
        let other_offsets = if others.is_empty() {
            vec![0]
        } else {
            subset_offsets(&self.shape, &others)
        };
        let strides = self.shape.strides();
        let (sa, sb) = (strides[mode_a], strides[mode_b]);
        let mut amps = Array1::from_elem(self.amps.len(), c(0.0, 0.0));
        let mut column = vec![c::<T>(0.0, 0.0); joint];
        for &base in &other_offsets {
            for na in 0..da {
                for nb in 0..db {
                    column[na * db + nb] = self.amps[base + na * sa + nb * sb];
                }
            }
            for ia in 0..da {
                for ib in 0..db {
                    let row = ia * db + ib;
                    let mut acc = c::<T>(0.0, 0.0);
                    for (col, &amp) in column.iter().enumerate() {
                        acc += matrix[[row, col]] * amp;
                    }
                    amps[base + ia * sa + ib * sb] = acc;
                }
            }
        }
        Ok(Self {
            shape: self.shape.clone(),
            amps,
        })
    }

    /// Multiply the amplitudes of mode `mode` at occupation `n` by
    /// `exp(i n theta)`.
    pub fn phase_rotate(&self, mode: usize, theta: T) -> Result<Self> {
        self.shape.check_mode(mode)?;
        let d = self.shape.dim(mode);
        let mut diag = Array2::from_elem((d, d), c(0.0, 0.0));
        for n in 0..d {
            diag[[n, n]] = phase_factor(theta * T::from_usize(n).unwrap());
        }
        self.apply_single_mode(&diag, mode)
    }

    /// `<psi| op |psi>`.
    pub fn expectation(&self, op: &ModeOperator<T>) -> Result<C<T>> {
        check_same_shape(&self.shape, &op.shape)?;
        let applied = op.matrix.dot(&self.amps);
        Ok(self
            .amps
            .iter()
            .zip(applied.iter())
            .map(|(a, b)| a.conj() * *b)
            .fold(c(0.0, 0.0), |acc, z| acc + z))
    }

    /// Mean photon number of one mode.
    pub fn mean_photon(&self, mode: usize) -> Result<T> {
        self.shape.check_mode(mode)?;
        let stride = self.shape.strides()[mode];
        let d = self.shape.dim(mode);
        let mut acc = T::zero();
        for (flat, amp) in self.amps.iter().enumerate() {
            let n = (flat / stride) % d;
            acc += T::from_usize(n).unwrap() * amp.norm_sqr();
        }
        Ok(acc)
    }
}

/// Dense operator on a truncated multimode Fock space.
///
/// Density operators are the Hermitian, unit-trace, PSD special case;
/// non-Hermitian instances carry reduced blocks such as `<k|rho|l>` with
/// `k != l`. The `hermitian` flag is set by construction and propagated by
/// the structural operations.
#[derive(Clone, Debug)]
pub struct ModeOperator<T: Real> {
    shape: ModeShape,
    matrix: Array2<C<T>>,
    hermitian: bool,
}

impl<T: Real> ModeOperator<T> {
    pub fn from_matrix(shape: ModeShape, matrix: Array2<C<T>>, hermitian: bool) -> Result<Self> {
        let n = shape.total();
        if matrix.dim() != (n, n) {
            return Err(FockError::Invalid(format!(
                "matrix is {:?}, shape needs {n}x{n}",
                matrix.dim()
            )));
        }
        Ok(Self {
            shape,
            matrix,
            hermitian,
        })
    }

    pub fn identity(shape: ModeShape) -> Self {
        let n = shape.total();
        let matrix = Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        Self {
            shape,
            matrix,
            hermitian: true,
        }
    }

    pub fn zeros(shape: ModeShape) -> Self {
        let n = shape.total();
        Self {
            shape: shape.clone(),
            matrix: Array2::from_elem((n, n), c(0.0, 0.0)),
            hermitian: true,
        }
    }

    pub fn shape(&self) -> &ModeShape {
        &self.shape
    }

    pub fn matrix(&self) -> &Array2<C<T>> {
        &self.matrix
    }

    pub fn hermitian_flag(&self) -> bool {
        self.hermitian
    }

    pub fn entry(&self, bra: &[usize], ket: &[usize]) -> C<T> {
        self.matrix[[self.shape.flat_index(bra), self.shape.flat_index(ket)]]
    }

    pub fn trace(&self) -> C<T> {
        (0..self.shape.total())
            .map(|i| self.matrix[[i, i]])
            .fold(c(0.0, 0.0), |acc, z| acc + z)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            matrix: linalg::adjoint(&self.matrix),
            hermitian: self.hermitian,
        }
    }

    pub fn scale(mut self, factor: C<T>) -> Self {
        self.matrix.mapv_inplace(|z| z * factor);
        self.hermitian = self.hermitian && factor.im == T::zero();
        self
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_shape(&self.shape, &other.shape)?;
        Ok(Self {
            shape: self.shape.clone(),
            matrix: &self.matrix + &other.matrix,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_same_shape(&self.shape, &other.shape)?;
        Ok(Self {
            shape: self.shape.clone(),
            matrix: self.matrix.dot(&other.matrix),
            hermitian: false,
        })
    }

    pub fn apply_state(&self, state: &StateVector<T>) -> Result<StateVector<T>> {
        check_same_shape(&self.shape, &state.shape)?;
        Ok(StateVector {
            shape: state.shape.clone(),
            amps: self.matrix.dot(&state.amps),
        })
    }

    /// Kronecker product; `self`'s modes come first.
    pub fn tensor(&self, other: &Self) -> Self {
        let shape = self.shape.concat(&other.shape);
        let (n1, n2) = (self.matrix.nrows(), other.matrix.nrows());
        let mut matrix = Array2::from_elem((n1 * n2, n1 * n2), c(0.0, 0.0));
        for i1 in 0..n1 {
            for j1 in 0..n1 {
                let a = self.matrix[[i1, j1]];
                if a.norm_sqr() == T::zero() {
                    continue;
                }
                for i2 in 0..n2 {
                    for j2 in 0..n2 {
                        matrix[[i1 * n2 + i2, j1 * n2 + j2]] = a * other.matrix[[i2, j2]];
                    }
                }
            }
        }
        Self {
            shape,
            matrix,
            hermitian: self.hermitian && other.hermitian,
        }
    }

    /// Trace out the listed modes. Preserves the total trace and
    /// Hermiticity; discarding every mode is rejected.
    pub fn partial_trace(&self, discard: &[usize]) -> Result<Self> {
        if discard.is_empty() {
            return Ok(self.clone());
        }
        let out_shape = self.shape.without(discard)?;
        let mut dropped = discard.to_vec();
        dropped.sort_unstable();
        let kept: Vec<usize> = (0..self.shape.num_modes())
            .filter(|m| !dropped.contains(m))
            .collect();
        let keep_offsets = subset_offsets(&self.shape, &kept);
        let drop_offsets = subset_offsets(&self.shape, &dropped);
        let nk = keep_offsets.len();
        let mut matrix = Array2::from_elem((nk, nk), c(0.0, 0.0));
        for (i, &oi) in keep_offsets.iter().enumerate() {
            for (j, &oj) in keep_offsets.iter().enumerate() {
                let mut acc = c::<T>(0.0, 0.0);
                for &od in &drop_offsets {
                    acc += self.matrix[[oi + od, oj + od]];
                }
                matrix[[i, j]] = acc;
            }
        }
        Ok(Self {
            shape: out_shape,
            matrix,
            hermitian: self.hermitian,
        })
    }

    /// Transpose the bra/ket indices of one mode. Applying it twice is the
    /// identity; single-mode operators are rejected (use `transpose` on the
    /// full matrix instead).
    pub fn partial_transpose(&self, mode: usize) -> Result<Self> {
        if self.shape.num_modes() < 2 {
            return Err(FockError::SingleMode);
        }
        self.shape.check_mode(mode)?;
        let stride = self.shape.strides()[mode];
        let d = self.shape.dim(mode);
        let n = self.shape.total();
        let mut matrix = Array2::from_elem((n, n), c(0.0, 0.0));
        for i in 0..n {
            let ni = (i / stride) % d;
            for j in 0..n {
                let nj = (j / stride) % d;
                let swapped_i = (i - ni * stride) + nj * stride;
                let swapped_j = (j - nj * stride) + ni * stride;
                matrix[[i, j]] = self.matrix[[swapped_i, swapped_j]];
            }
        }
        Ok(Self {
            shape: self.shape.clone(),
            matrix,
            hermitian: self.hermitian,
        })
    }

    /// Sum of singular values. For Hermitian operators this is the sum of
    /// absolute eigenvalues.
    pub fn trace_norm(&self) -> T {
        linalg::singular_value_sum(&self.matrix)
    }

    /// Eigenvalues, ascending. Meaningful for Hermitian operators.
    pub fn eigenvalues(&self) -> Vec<T> {
        linalg::eigvalsh(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues()
            .into_iter()
            .fold(T::infinity(), T::min)
    }

    /// Replace the matrix by its Hermitian part and set the flag.
    pub fn hermitized(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            matrix: linalg::hermitize(&self.matrix),
            hermitian: true,
        }
    }

    /// Divide by the trace.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr.norm() <= T::lit(1e-150) {
            return Err(FockError::ZeroProbability);
        }
        let inv = cr::<T>(T::one()) / tr;
        Ok(self.clone().scale(inv))
    }

    /// Check the density-operator contract: Hermitian within `1e-10`,
    /// unit trace within `1e-10`, smallest eigenvalue at least `-1e-9`.
    pub fn validate_density(&self) -> Result<()> {
        let herm_dev = linalg::frobenius_norm(&(&self.matrix - &linalg::adjoint(&self.matrix)));
        if herm_dev > T::lit(1e-10) {
            return Err(FockError::NotDensity {
                reason: format!("Hermiticity deviation {herm_dev:.3e}"),
            });
        }
        let tr = self.trace();
        if (tr.re - T::one()).abs() > T::lit(1e-10) || tr.im.abs() > T::lit(1e-10) {
            return Err(FockError::NotDensity {
                reason: format!("trace {tr}"),
            });
        }
        let min = self.min_eigenvalue();
        if min < T::lit(-1e-9) {
            return Err(FockError::NotDensity {
                reason: format!("eigenvalue {min:.3e}"),
            });
        }
        Ok(())
    }

    /// `(<bra|_mode ⊗ I) rho (|ket>_mode ⊗ I)`: contracts one mode against
    /// the given bra/ket vectors and removes it from the shape.
    pub fn project_mode(&self, mode: usize, bra: &[C<T>], ket: &[C<T>]) -> Result<Self> {
        self.shape.check_mode(mode)?;
        if self.shape.num_modes() < 2 {
            return Err(FockError::SingleMode);
        }
        let d = self.shape.dim(mode);
        if bra.len() != d || ket.len() != d {
            return Err(FockError::Invalid(format!(
                "projection vectors need length {d}"
            )));
        }
        let out_shape = self.shape.without(&[mode])?;
        let others: Vec<usize> = (0..self.shape.num_modes()).filter(|&m| m != mode).collect();
        let offsets = subset_offsets(&self.shape, &others);
        let stride = self.shape.strides()[mode];
        let n = offsets.len();
        let mut matrix = Array2::from_elem((n, n), c(0.0, 0.0));
        for (i, &oi) in offsets.iter().enumerate() {
            for (j, &oj) in offsets.iter().enumerate() {
                let mut acc = c::<T>(0.0, 0.0);
                for (a, &ba) in bra.iter().enumerate() {
                    if ba.norm_sqr() == T::zero() {
                        continue;
                    }
                    for (b, &kb) in ket.iter().enumerate() {
                        if kb.norm_sqr() == T::zero() {
                            continue;
                        }
                        acc += ba.conj() * kb * self.matrix[[oi + a * stride, oj + b * stride]];
                    }
                }
                matrix[[i, j]] = acc;
            }
        }
        Ok(Self {
            shape: out_shape,
            matrix,
            hermitian: false,
        })
    }

    /// Embed a single-mode matrix into the full space (identity elsewhere).
    pub fn embed_single(shape: &ModeShape, mode: usize, matrix: &Array2<C<T>>) -> Result<Self> {
        shape.check_mode(mode)?;
        let d = shape.dim(mode);
        if matrix.dim() != (d, d) {
            return Err(FockError::Invalid(format!(
                "matrix is {:?}, mode {mode} has dimension {d}",
                matrix.dim()
            )));
        }
        let others: Vec<usize> = (0..shape.num_modes()).filter(|&m| m != mode).collect();
        let offsets = if others.is_empty() {
            vec![0]
        } else {
            subset_offsets(shape, &others)
        };
        let stride = shape.strides()[mode];
        let n = shape.total();
        let mut full = Array2::from_elem((n, n), c(0.0, 0.0));
        for &base in &offsets {
            for i in 0..d {
                for j in 0..d {
                    full[[base + i * stride, base + j * stride]] = matrix[[i, j]];
                }
            }
        }
        Ok(Self {
            shape: shape.clone(),
            matrix: full,
            hermitian: linalg::is_hermitian(matrix, T::lit(1e-14)),
        })
    }

    /// Diagonal of the operator as a vector.
    pub fn diagonal(&self) -> Vec<C<T>> {
        (0..self.shape.total())
            .map(|i| self.matrix[[i, i]])
            .collect()
    }

    /// Truncate to smaller per-mode cutoffs and renormalize the trace.
    /// Used to move a state into a smaller reconstruction space.
    pub fn truncated(&self, dims: &[usize]) -> Result<Self> {
        if dims.len() != self.shape.num_modes() {
            return Err(FockError::Invalid(
                "truncation needs one cutoff per mode".into(),
            ));
        }
        for (m, (&new, &old)) in dims.iter().zip(self.shape.dims()).enumerate() {
            if new > old {
                return Err(FockError::Invalid(format!(
                    "mode {m}: cannot grow cutoff {old} to {new}"
                )));
            }
        }
        let out_shape = ModeShape::new(dims.to_vec())?;
        let n = out_shape.total();
        let mut matrix = Array2::from_elem((n, n), c(0.0, 0.0));
        for i in 0..n {
            let oi = self.shape.flat_index(&out_shape.multi_index(i));
            for j in 0..n {
                let oj = self.shape.flat_index(&out_shape.multi_index(j));
                matrix[[i, j]] = self.matrix[[oi, oj]];
            }
        }
        let out = Self {
            shape: out_shape,
            matrix,
            hermitian: self.hermitian,
        };
        out.normalized()
    }
}

/// Annihilation operator on a single mode: `a |n> = sqrt(n) |n-1>`.
pub fn annihilation<T: Real>(dim: usize) -> Result<ModeOperator<T>> {
    if dim < 2 {
        return Err(FockError::DimTooSmall { dim, min: 2 });
    }
    let mut matrix = Array2::from_elem((dim, dim), c(0.0, 0.0));
    for n in 1..dim {
        matrix[[n - 1, n]] = cr(T::from_usize(n).unwrap().sqrt());
    }
    ModeOperator::from_matrix(ModeShape::single(dim)?, matrix, false)
}

/// Creation operator `a†`.
pub fn creation<T: Real>(dim: usize) -> Result<ModeOperator<T>> {
    Ok(annihilation::<T>(dim)?.adjoint())
}

/// Number operator `a†a`.
pub fn number_operator<T: Real>(dim: usize) -> Result<ModeOperator<T>> {
    if dim < 2 {
        return Err(FockError::DimTooSmall { dim, min: 2 });
    }
    let mut matrix = Array2::from_elem((dim, dim), c(0.0, 0.0));
    for n in 0..dim {
        matrix[[n, n]] = cr(T::from_usize(n).unwrap());
    }
    ModeOperator::from_matrix(ModeShape::single(dim)?, matrix, true)
}

/// Quadrature operator `x_theta = (a e^{-i theta} + a† e^{i theta}) / sqrt(2)`.
///
/// Convention: `x_0 = (a + a†)/sqrt(2)`, so the vacuum variance is 1/2 and a
/// "3 dB below shot noise" squeezed quadrature has variance 1/4. Homodyne
/// sampling and all phase-space code share this normalization.
pub fn quadrature_operator<T: Real>(dim: usize, theta: T) -> Result<ModeOperator<T>> {
    let a = annihilation::<T>(dim)?;
    let sqrt_half = cr(T::lit(0.5).sqrt());
    let fwd = phase_factor(-theta) * sqrt_half;
    let bwd = phase_factor(theta) * sqrt_half;
    let matrix = a.matrix().mapv(|z| z * fwd) + linalg::adjoint(a.matrix()).mapv(|z| z * bwd);
    ModeOperator::from_matrix(ModeShape::single(dim)?, matrix, true)
}

/// `<psi| rho |psi>` for a pure reference state. Values are clamped to
/// `[0, 1 + 1e-9]` only in the sense that the tiny imaginary part from
/// rounding is dropped.
pub fn fidelity<T: Real>(pure: &StateVector<T>, rho: &ModeOperator<T>) -> Result<T> {
    check_same_shape(pure.shape(), rho.shape())?;
    let applied = rho.matrix.dot(&pure.amps);
    let value = pure
        .amps
        .iter()
        .zip(applied.iter())
        .map(|(a, b)| a.conj() * *b)
        .fold(c(0.0, 0.0), |acc, z| acc + z);
    Ok(value.re)
}

/// Uhlmann fidelity `(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2` between two
/// density operators.
pub fn fidelity_mixed<T: Real>(rho: &ModeOperator<T>, sigma: &ModeOperator<T>) -> Result<T> {
    check_same_shape(rho.shape(), sigma.shape())?;
    let root = linalg::sqrtm_psd(&rho.matrix);
    let inner = root.dot(&sigma.matrix).dot(&root);
    let sum: T = linalg::eigvalsh(&inner)
        .into_iter()
        .map(|v| v.max(T::zero()).sqrt())
        .sum();
    Ok(sum * sum)
}
