//! Phase-space analysis: Wigner functions of single-mode operators
//! (including the non-Hermitian reduced blocks `<k|rho|l>`),
//! partial-transpose negativity, and the scalar metrics report.

use ndarray::Array2;
use num_complex::Complex;

use crate::channels::ln_factorials;
use crate::error::{FockError, Result};
use crate::fock::{fidelity, ModeOperator};
use crate::scalar::{c, cr, Real, C};
use crate::states::{hybrid_target, HybridTargetSpec};

/// Scaling of reported Wigner values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WignerConvention {
    /// Rescaled so the vacuum gives `W(0,0) = +1` and an odd cat `-1`;
    /// the origin value is then the photon-number parity expectation.
    NormalizedParity,
    /// Textbook normalization with `integral W dx dp = tr(op)`; the vacuum
    /// peaks at `1/pi`.
    OneOverPi,
}

impl WignerConvention {
    pub fn label(&self) -> &'static str {
        match self {
            WignerConvention::NormalizedParity => "normalized_parity",
            WignerConvention::OneOverPi => "one_over_pi",
        }
    }
}

/// Wigner function sampled on a rectangular `x` x `p` grid.
/// `values[[i, j]]` belongs to `(x[i], p[j])`.
#[derive(Clone, Debug)]
pub struct WignerGrid<T: Real> {
    pub x: Vec<T>,
    pub p: Vec<T>,
    pub values: Array2<C<T>>,
    pub convention: WignerConvention,
}

impl<T: Real> WignerGrid<T> {
    /// Largest absolute imaginary part over the grid; zero up to rounding
    /// for Hermitian inputs.
    pub fn max_imag(&self) -> T {
        self.values
            .iter()
            .map(|z| z.im.abs())
            .fold(T::zero(), T::max)
    }

    /// Riemann sum `sum W dx dp` over the (uniform) grid.
    pub fn riemann_sum(&self) -> C<T> {
        if self.x.len() < 2 || self.p.len() < 2 {
            return c(0.0, 0.0);
        }
        let dx = self.x[1] - self.x[0];
        let dp = self.p[1] - self.p[0];
        let scale = cr(dx * dp);
        self.values
            .iter()
            .fold(c::<T>(0.0, 0.0), |acc, z| acc + *z)
            * scale
    }

    /// CSV serialization: header `x,p,re,im`, row-major over `x` then `p`,
    /// 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.x.len() * self.p.len() * 64);
        out.push_str("x,p,re,im\n");
        for (i, &x) in self.x.iter().enumerate() {
            for (j, &p) in self.p.iter().enumerate() {
                let v = self.values[[i, j]];
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_g17(x),
                    fmt_g17(p),
                    fmt_g17(v.re),
                    fmt_g17(v.im)
                ));
            }
        }
        out
    }

    /// JSON serialization with the same layout and digit contract as the
    /// CSV form: values are `[re, im]` pairs, row-major over `x` then `p`.
    pub fn to_json(&self) -> String {
        let join = |vals: &[T]| {
            vals.iter()
                .map(|v| fmt_g17(*v))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut values = String::new();
        let mut first = true;
        for i in 0..self.x.len() {
            for j in 0..self.p.len() {
                if !first {
                    values.push(',');
                }
                first = false;
                let v = self.values[[i, j]];
                values.push_str(&format!("[{},{}]", fmt_g17(v.re), fmt_g17(v.im)));
            }
        }
        format!(
            "{{\"convention\":\"{}\",\"x\":[{}],\"p\":[{}],\"values\":[{}]}}",
            self.convention.label(),
            join(&self.x),
            join(&self.p),
            values
        )
    }
}

/// 17-significant-digit decimal formatting shared by all emitted files.
pub fn fmt_g17<T: Real>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

const MAX_GRID_SPACING: f64 = 0.5;

/// Evaluate the Wigner function of a single-mode operator on a grid.
///
/// Fock-basis kernels in Laguerre form: with `z = sqrt(2) (x + i p)` and
/// `y = |z|^2`, the contribution of `|m><n|` for `n >= m` is
/// `(1/pi) (-1)^m sqrt(m!/n!) z^{n-m} e^{-y/2} L_m^{(n-m)}(y)`; the
/// transposed element contributes the conjugate. Factorial ratios are
/// carried in log space so cutoffs beyond `n = 20` stay finite.
pub fn wigner<T: Real>(
    op: &ModeOperator<T>,
    xs: &[T],
    ps: &[T],
    convention: WignerConvention,
) -> Result<WignerGrid<T>> {
    if op.shape().num_modes() != 1 {
        return Err(FockError::Invalid(
            "Wigner evaluation needs a single-mode operator".into(),
        ));
    }
    if xs.is_empty() || ps.is_empty() {
        return Err(FockError::Invalid("empty phase-space grid".into()));
    }
    for axis in [xs, ps] {
        for pair in axis.windows(2) {
            let spacing = (pair[1] - pair[0]).abs().as_f64();
            if spacing > MAX_GRID_SPACING {
                return Err(FockError::GridTooCoarse {
                    spacing,
                    max: MAX_GRID_SPACING,
                });
            }
        }
    }

    let dim = op.shape().dim(0);
    let ln_fact = ln_factorials::<T>(dim);
    let matrix = op.matrix();
    let scale = match convention {
        WignerConvention::NormalizedParity => T::one(),
        WignerConvention::OneOverPi => T::one() / T::PI(),
    };

    let mut values = Array2::from_elem((xs.len(), ps.len()), c(0.0, 0.0));
    let mut laguerre = vec![T::zero(); dim];
    for (i, &x) in xs.iter().enumerate() {
        for (j, &p) in ps.iter().enumerate() {
            let z = Complex::new(x, p) * cr(T::lit(2.0).sqrt());
            let y = z.norm_sqr();
            let damp = (-y / T::lit(2.0)).exp();
            let mut z_pow = Complex::new(T::one(), T::zero());
            let mut acc = c::<T>(0.0, 0.0);
            for delta in 0..dim {
                let terms = dim - delta;
                laguerre_sequence(&mut laguerre[..terms], delta, y);
                for (m, lag) in laguerre[..terms].iter().enumerate() {
                    let n = m + delta;
                    let sign = if m % 2 == 0 { T::one() } else { -T::one() };
                    let ratio = (T::lit(0.5) * (ln_fact[m] - ln_fact[n])).exp();
                    let kernel = z_pow * cr(sign * ratio * damp * *lag);
                    acc += matrix[[m, n]] * kernel;
                    if delta > 0 {
                        acc += matrix[[n, m]] * kernel.conj();
                    }
                }
                z_pow = z_pow * z;
            }
            values[[i, j]] = acc * cr(scale);
        }
    }
    Ok(WignerGrid {
        x: xs.to_vec(),
        p: ps.to_vec(),
        values,
        convention,
    })
}

/// Generalized Laguerre values `L_m^{(k)}(y)` for `m = 0..out.len()-1`.
fn laguerre_sequence<T: Real>(out: &mut [T], k: usize, y: T) {
    if out.is_empty() {
        return;
    }
    let kf = T::from_usize(k).unwrap();
    out[0] = T::one();
    if out.len() == 1 {
        return;
    }
    out[1] = T::one() + kf - y;
    for m in 1..out.len() - 1 {
        let mf = T::from_usize(m).unwrap();
        out[m + 1] = ((T::lit(2.0) * mf + kf + T::one() - y) * out[m] - (mf + kf) * out[m - 1])
            / (mf + T::one());
    }
}

/// Wigner value at the phase-space origin in the normalized-parity scale:
/// the photon-number parity `sum (-1)^n op_nn`, divided by the trace when
/// the operator has one (density operators and diagonal blocks), so the
/// ideal odd cat reads exactly -1.
pub fn wigner_origin<T: Real>(op: &ModeOperator<T>) -> Result<C<T>> {
    if op.shape().num_modes() != 1 {
        return Err(FockError::Invalid(
            "Wigner origin needs a single-mode operator".into(),
        ));
    }
    let mut parity = c::<T>(0.0, 0.0);
    let mut trace = c::<T>(0.0, 0.0);
    for (n, v) in op.diagonal().into_iter().enumerate() {
        let sign = if n % 2 == 0 { T::one() } else { -T::one() };
        parity += v * cr(sign);
        trace += v;
    }
    if trace.norm() > T::lit(1e-6) {
        Ok(parity / trace)
    } else {
        Ok(parity)
    }
}

/// Entanglement negativity `(||rho^{T_A}||_1 - 1)/2`.
#[derive(Clone, Copy, Debug)]
pub struct Negativity<T: Real> {
    /// Clamped at zero; 0.5 for a maximally entangled qubit pair.
    pub value: T,
    /// Unclamped value; slightly negative raw values witness rounding, not
    /// entanglement.
    pub raw: T,
}

pub fn negativity<T: Real>(rho: &ModeOperator<T>, mode_a: usize) -> Result<Negativity<T>> {
    let pt = rho.partial_transpose(mode_a)?;
    let raw = (pt.trace_norm() - T::one()) / T::lit(2.0);
    Ok(Negativity {
        value: raw.max(T::zero()),
        raw,
    })
}

/// Scalar diagnostics of a heralded two-mode state against a target
/// specification.
#[derive(Clone, Debug)]
pub struct MetricsReport<T: Real> {
    pub fidelity: T,
    pub negativity: T,
    pub negativity_raw: T,
    /// Normalized-parity Wigner origin of each reduced block
    /// `<k|rho|l>` in the number basis, `k, l < min(3, dim_A)`.
    pub w0_blocks: Vec<(usize, usize, C<T>)>,
    /// Population of qubit-mode Fock levels 2 and above.
    pub qubit_leakage: T,
}

pub fn report_metrics<T: Real>(
    rho_ab: &ModeOperator<T>,
    target: &HybridTargetSpec<T>,
) -> Result<MetricsReport<T>> {
    if rho_ab.shape().num_modes() != 2 {
        return Err(FockError::Invalid(
            "metrics need a two-mode state (qubit, cat)".into(),
        ));
    }
    let dims = (rho_ab.shape().dim(0), rho_ab.shape().dim(1));
    let target_state = hybrid_target(target, dims)?;
    let fid = fidelity(&target_state, rho_ab)?;
    let neg = negativity(rho_ab, 0)?;

    let kmax = dims.0.min(3);
    let mut w0_blocks = Vec::with_capacity(kmax * kmax);
    for k in 0..kmax {
        for l in 0..kmax {
            let mut bra = vec![c::<T>(0.0, 0.0); dims.0];
            let mut ket = vec![c::<T>(0.0, 0.0); dims.0];
            bra[k] = c(1.0, 0.0);
            ket[l] = c(1.0, 0.0);
            let block = rho_ab.project_mode(0, &bra, &ket)?;
            w0_blocks.push((k, l, wigner_origin(&block)?));
        }
    }

    let qubit = rho_ab.partial_trace(&[1])?;
    let leakage = qubit
        .diagonal()
        .into_iter()
        .enumerate()
        .filter(|(n, _)| *n >= 2)
        .map(|(_, v)| v.re)
        .sum();

    Ok(MetricsReport {
        fidelity: fid,
        negativity: neg.value,
        negativity_raw: neg.raw,
        w0_blocks,
        qubit_leakage: leakage,
    })
}
