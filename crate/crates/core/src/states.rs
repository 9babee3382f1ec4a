//! Constructors for the named states of the experiment, with analytic
//! Fock-basis amplitude formulas and an explicit truncation policy: every
//! constructor must place at least `1 - 1e-6` of its norm below the cutoff
//! or fail, because silently truncated tails corrupt negativity and
//! fidelity figures.

use ndarray::Array1;

use crate::error::{FockError, Result};
use crate::fock::{fidelity, ModeOperator, ModeShape, StateVector, TRUNCATION_BUDGET};
use crate::scalar::{c, cr, phase_factor, Real, C};

/// Single-mode squeezing strength.
///
/// Stored as the dimensionless parameter `r >= 0`; the squeezed quadrature
/// is `x_0` with variance `e^{-2r}/2` (see `quadrature_operator` for the
/// shot-noise normalization). In decibel form the noise power ratio is
/// `10 log10(e^{-2r})`, so "3 dB below shot noise" means `r ~ 0.3454`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezingSpec<T: Real> {
    r: T,
}

impl<T: Real> SqueezingSpec<T> {
    pub fn from_r(r: T) -> Result<Self> {
        if !r.is_finite() {
            return Err(FockError::NonFinite { name: "r" });
        }
        if r < T::zero() {
            return Err(FockError::ParamRange {
                name: "r",
                value: r.as_f64(),
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(Self { r })
    }

    /// Build from a noise reduction quoted as a positive "dB below shot
    /// noise" figure.
    pub fn from_noise_reduction_db(db: T) -> Result<Self> {
        if !db.is_finite() {
            return Err(FockError::NonFinite { name: "squeeze_db" });
        }
        if db < T::zero() {
            return Err(FockError::ParamRange {
                name: "squeeze_db",
                value: db.as_f64(),
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        let r = db * T::lit(10.0).ln() / T::lit(20.0);
        Ok(Self { r })
    }

    pub fn r(self) -> T {
        self.r
    }

    /// Signed noise power in dB, `10 log10(e^{-2r})` (negative for
    /// squeezing).
    pub fn db(self) -> T {
        T::lit(10.0) * (-(self.r + self.r)).exp().log10()
    }

    /// Positive dB-below-shot-noise figure; inverse of
    /// [`Self::from_noise_reduction_db`].
    pub fn noise_reduction_db(self) -> T {
        -self.db()
    }

    /// Squeezed-quadrature variance relative to the vacuum value 1/2.
    pub fn variance_ratio(self) -> T {
        (-(self.r + self.r)).exp()
    }
}

/// Photon-number parity of a cat state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Qubit basis used when building the two-mode target state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QubitBasis {
    /// `sqrt(1-w) |0>|cat-> + sqrt(w) e^{i phi} |1>|cat+>` with normalized
    /// cat branches.
    Number,
    /// Coherent-branch form, equal to the number-basis state up to the cat
    /// normalization factors: in the twisted basis
    /// `|u±> = (|0> ± e^{i phi}|1>)/sqrt(2)` it reads
    /// `sqrt(1-w) |u+>|alpha> - sqrt(w) |u->|-alpha>`, which is exactly
    /// normalized because the qubit factors are orthogonal.
    Rotated,
}

/// Two-mode target state specification: qubit mode first, cat mode second.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HybridTargetSpec<T: Real> {
    pub alpha: T,
    pub phi: T,
    pub basis: QubitBasis,
    /// Population of the `|1>` / `|cat+>` branch; 0.5 is the
    /// maximally entangled balanced case.
    pub weight: T,
}

impl<T: Real> HybridTargetSpec<T> {
    pub fn balanced(alpha: T, phi: T, basis: QubitBasis) -> Self {
        Self {
            alpha,
            phi,
            basis,
            weight: T::lit(0.5),
        }
    }
}

fn check_tail<T: Real>(kept: T, full: T) -> Result<()> {
    let tail = ((full - kept) / full).max(T::zero()).as_f64();
    if tail > TRUNCATION_BUDGET {
        return Err(FockError::Truncation {
            mass: tail,
            budget: TRUNCATION_BUDGET,
        });
    }
    Ok(())
}

/// Coherent state `|alpha>` with mean photon number `|alpha|^2`:
/// amplitudes `e^{-|alpha|^2/2} alpha^n / sqrt(n!)`, renormalized after
/// truncation.
pub fn coherent<T: Real>(alpha: C<T>, dim: usize) -> Result<StateVector<T>> {
    let (state, kept) = coherent_truncated(alpha, dim)?;
    check_tail(kept, T::one())?;
    state.normalize()
}

fn coherent_truncated<T: Real>(alpha: C<T>, dim: usize) -> Result<(StateVector<T>, T)> {
    let shape = ModeShape::single(dim)?;
    let mut amps = Array1::from_elem(dim, c(0.0, 0.0));
    let mut amp = cr((-alpha.norm_sqr() / T::lit(2.0)).exp());
    let mut kept = T::zero();
    for (n, slot) in amps.iter_mut().enumerate() {
        *slot = amp;
        kept += amp.norm_sqr();
        amp = amp * alpha / cr(T::from_usize(n + 1).unwrap().sqrt());
    }
    Ok((StateVector::new(shape, amps)?, kept))
}

/// Single-mode squeezed vacuum, squeezed along `x_0`: even amplitudes
/// proportional to `(-tanh r)^m sqrt((2m)!) / (2^m m!) / sqrt(cosh r)`,
/// odd amplitudes identically zero.
pub fn squeezed_vacuum<T: Real>(spec: SqueezingSpec<T>, dim: usize) -> Result<StateVector<T>> {
    let shape = ModeShape::single(dim)?;
    let r = spec.r();
    let tanh = r.tanh();
    let mut amps = Array1::from_elem(dim, c(0.0, 0.0));
    let mut amp = cr(T::one() / r.cosh().sqrt());
    let mut kept = T::zero();
    let mut m = 0usize;
    loop {
        let n = 2 * m;
        if n >= dim {
            break;
        }
        amps[n] = amp;
        kept += amp.norm_sqr();
        let num = T::from_usize((n + 1) * (n + 2)).unwrap().sqrt();
        let den = T::from_usize(2 * (m + 1)).unwrap();
        amp = amp * cr(-tanh * num / den);
        m += 1;
    }
    check_tail(kept, T::one())?;
    StateVector::new(shape, amps)?.normalize()
}

/// Two-mode squeezed vacuum `sqrt(1-lambda^2) sum lambda^n |n,n>`.
pub fn two_mode_squeezed<T: Real>(lambda: T, dims: (usize, usize)) -> Result<StateVector<T>> {
    if !lambda.is_finite() {
        return Err(FockError::NonFinite { name: "lambda" });
    }
    if lambda < T::zero() || lambda >= T::one() {
        return Err(FockError::ParamRange {
            name: "lambda",
            value: lambda.as_f64(),
            lo: 0.0,
            hi: 1.0,
        });
    }
    let shape = ModeShape::new(vec![dims.0, dims.1])?;
    let nmax = dims.0.min(dims.1);
    let norm = (T::one() - lambda * lambda).sqrt();
    let mut amps = Array1::from_elem(shape.total(), c(0.0, 0.0));
    let mut amp = cr(norm);
    let mut kept = T::zero();
    for n in 0..nmax {
        amps[shape.flat_index(&[n, n])] = amp;
        kept += amp.norm_sqr();
        amp = amp * cr(lambda);
    }
    check_tail(kept, T::one())?;
    StateVector::new(shape, amps)?.normalize()
}

/// Cat state `|alpha> ± |-alpha>` (even/odd photon-number parity), with
/// the exact pre-normalization `2 (1 ± e^{-2 alpha^2})`.
pub fn cat<T: Real>(alpha: T, parity: Parity, dim: usize) -> Result<StateVector<T>> {
    let (state, kept, full) = cat_truncated(alpha, parity, dim)?;
    check_tail(kept, full)?;
    state.normalize()
}

/// Cat constructor without the tail-mass policy, for fitting scans where
/// the amplitude is pushed beyond what the cutoff can hold exactly.
pub(crate) fn cat_unchecked<T: Real>(
    alpha: T,
    parity: Parity,
    dim: usize,
) -> Result<StateVector<T>> {
    let (state, _, _) = cat_truncated(alpha, parity, dim)?;
    state.normalize()
}

fn cat_truncated<T: Real>(
    alpha: T,
    parity: Parity,
    dim: usize,
) -> Result<(StateVector<T>, T, T)> {
    if !alpha.is_finite() {
        return Err(FockError::NonFinite { name: "alpha" });
    }
    if alpha < T::zero() {
        return Err(FockError::ParamRange {
            name: "alpha",
            value: alpha.as_f64(),
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let two = T::lit(2.0);
    let overlap = (-two * alpha * alpha).exp();
    let full = match parity {
        Parity::Even => two * (T::one() + overlap),
        Parity::Odd => two * (T::one() - overlap),
    };
    if full <= T::lit(1e-30) {
        // alpha = 0 with odd parity: the superposition vanishes.
        return Err(FockError::ZeroProbability);
    }
    let shape = ModeShape::single(dim)?;
    let mut amps = Array1::from_elem(dim, c(0.0, 0.0));
    // Unnormalized amplitude of |alpha> ± |-alpha| at n is
    // (1 ± (-1)^n) e^{-alpha^2/2} alpha^n / sqrt(n!).
    let mut base = (-alpha * alpha / two).exp();
    let mut kept = T::zero();
    for (n, slot) in amps.iter_mut().enumerate() {
        let keep = match parity {
            Parity::Even => n % 2 == 0,
            Parity::Odd => n % 2 == 1,
        };
        if keep {
            let a = two * base;
            *slot = cr(a);
            kept += a * a;
        }
        base = base * alpha / T::from_usize(n + 1).unwrap().sqrt();
    }
    Ok((StateVector::new(shape, amps)?, kept, full))
}

/// Two-mode entangled target state; mode 0 is the qubit, mode 1 the cat.
pub fn hybrid_target<T: Real>(
    spec: &HybridTargetSpec<T>,
    dims: (usize, usize),
) -> Result<StateVector<T>> {
    let (dim_qubit, dim_cat) = dims;
    if dim_qubit < 2 {
        return Err(FockError::DimTooSmall {
            dim: dim_qubit,
            min: 2,
        });
    }
    if spec.weight < T::zero() || spec.weight > T::one() {
        return Err(FockError::ParamRange {
            name: "weight",
            value: spec.weight.as_f64(),
            lo: 0.0,
            hi: 1.0,
        });
    }
    let qubit_shape = ModeShape::single(dim_qubit)?;
    let zero = StateVector::<T>::basis(qubit_shape.clone(), &[0])?;
    let one = StateVector::<T>::basis(qubit_shape, &[1])?;
    let w0 = cr((T::one() - spec.weight).sqrt());
    let w1 = cr(spec.weight.sqrt());
    let phase = phase_factor(spec.phi);

    let joint = match spec.basis {
        QubitBasis::Number => {
            let odd = cat(spec.alpha, Parity::Odd, dim_cat)?;
            let even = cat(spec.alpha, Parity::Even, dim_cat)?;
            let branch0 = zero.tensor(&odd).scale(w0);
            let branch1 = one.tensor(&even).scale(w1 * phase);
            add_states(&branch0, &branch1)?
        }
        QubitBasis::Rotated => {
            let plus_branch = coherent(cr(spec.alpha), dim_cat)?;
            let minus_branch = coherent(cr(-spec.alpha), dim_cat)?;
            let inv_sqrt2 = cr(T::lit(0.5).sqrt());
            let u_plus = add_states(&zero.clone().scale(inv_sqrt2), &one.clone().scale(phase * inv_sqrt2))?;
            let u_minus = add_states(&zero.scale(inv_sqrt2), &one.scale(-phase * inv_sqrt2))?;
            let branch_p = u_plus.tensor(&plus_branch).scale(w0);
            let branch_m = u_minus.tensor(&minus_branch).scale(-w1);
            add_states(&branch_p, &branch_m)?
        }
    };
    joint.normalize()
}

fn add_states<T: Real>(a: &StateVector<T>, b: &StateVector<T>) -> Result<StateVector<T>> {
    if a.shape() != b.shape() {
        return Err(FockError::ShapeMismatch {
            left: format!("{:?}", a.shape().dims()),
            right: format!("{:?}", b.shape().dims()),
        });
    }
    StateVector::new(a.shape().clone(), a.amps() + b.amps())
}

/// Result of fitting a cat amplitude to a single-mode operator.
#[derive(Clone, Copy, Debug)]
pub struct CatFit<T: Real> {
    pub alpha: T,
    pub fidelity: T,
    pub parity: Parity,
    /// The optimum sits at the lower edge of the scanned interval
    /// (alpha -> 0), where the even cat degenerates to the vacuum.
    pub at_lower_bound: bool,
}

/// Fidelity-maximizing cat amplitude over `alpha` in (0, 2], by coarse grid
/// scan followed by golden-section refinement.
pub fn best_cat_amplitude<T: Real>(op: &ModeOperator<T>, parity: Parity) -> Result<CatFit<T>> {
    if op.shape().num_modes() != 1 {
        return Err(FockError::Invalid(
            "cat fitting needs a single-mode operator".into(),
        ));
    }
    let dim = op.shape().dim(0);
    let eval = |alpha: T| -> Result<T> {
        let trial = cat_unchecked(alpha, parity, dim)?;
        fidelity(&trial, op)
    };
    let lo_edge = T::lit(0.02);
    let hi_edge = T::lit(2.0);
    let steps = 100usize;
    let mut best_idx = 0usize;
    let mut best_val = T::neg_infinity();
    let mut grid = Vec::with_capacity(steps);
    for i in 0..steps {
        let a = lo_edge
            + (hi_edge - lo_edge) * T::from_usize(i).unwrap() / T::from_usize(steps - 1).unwrap();
        let f = eval(a)?;
        if f > best_val {
            best_val = f;
            best_idx = i;
        }
        grid.push(a);
    }
    let at_lower_bound = best_idx == 0;
    let lo = grid[best_idx.saturating_sub(1)];
    let hi = grid[(best_idx + 1).min(steps - 1)];
    let (alpha, fid) = golden_max(lo, hi, |a| eval(a).unwrap_or(T::neg_infinity()));
    Ok(CatFit {
        alpha,
        fidelity: fid,
        parity,
        at_lower_bound,
    })
}

fn golden_max<T: Real>(mut lo: T, mut hi: T, f: impl Fn(T) -> T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let mut x1 = hi - (hi - lo) * inv_phi;
    let mut x2 = lo + (hi - lo) * inv_phi;
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + (hi - lo) * inv_phi;
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - (hi - lo) * inv_phi;
            f1 = f(x1);
        }
    }
    let mid = (lo + hi) / T::lit(2.0);
    (mid, f(mid))
}
