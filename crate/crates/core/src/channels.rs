//! Unitary beamsplitter and phase operations, photon-loss channels, and
//! conditional (heralded) measurement maps.

use ndarray::Array2;

use crate::error::{FockError, Result};
use crate::fock::{annihilation, ModeOperator, ModeShape, StateVector};
use crate::linalg;
use crate::scalar::{c, cr, phase_factor, Real, C};

/// Relative mass a beamsplitter may push above the Fock cutoffs before the
/// operation is rejected.
const OVERFLOW_BUDGET: f64 = 1e-6;

/// Lossless two-port beamsplitter.
///
/// `transmissivity` is the power transmission `t`; `phase` is attached to
/// the reflected arm. The creation operators transform as
///
/// ```text
/// a† -> sqrt(t) a† + sqrt(1-t) e^{+i phase} b†
/// b† -> sqrt(t) b† - sqrt(1-t) e^{-i phase} a†
/// ```
///
/// so a single photon `|1,0>` at `t = 1/2`, `phase = 0` becomes
/// `(|1,0> + |0,1>)/sqrt 2`, and two photons `|1,1>` interfere to
/// `(|0,2> - |2,0>)/sqrt 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamsplitterSpec<T: Real> {
    pub transmissivity: T,
    pub phase: T,
}

impl<T: Real> BeamsplitterSpec<T> {
    pub fn new(transmissivity: T, phase: T) -> Result<Self> {
        if !transmissivity.is_finite() {
            return Err(FockError::NonFinite {
                name: "transmissivity",
            });
        }
        if transmissivity < T::zero() || transmissivity > T::one() {
            return Err(FockError::ParamRange {
                name: "transmissivity",
                value: transmissivity.as_f64(),
                lo: 0.0,
                hi: 1.0,
            });
        }
        if !phase.is_finite() {
            return Err(FockError::NonFinite { name: "phase" });
        }
        Ok(Self {
            transmissivity,
            phase,
        })
    }

    pub fn balanced() -> Self {
        Self {
            transmissivity: T::lit(0.5),
            phase: T::zero(),
        }
    }

    /// Joint matrix on the truncated two-mode space, row-major over
    /// `(mode_a, mode_b)`. Columns whose image would exceed the cutoffs are
    /// sub-normalized; the apply functions account for that mass.
    pub fn matrix(&self, dim_a: usize, dim_b: usize) -> Array2<C<T>> {
        let t = self.transmissivity;
        let r = T::one() - t;
        let sq_t = t.sqrt();
        let sq_r = r.sqrt();
        let e_plus = phase_factor(self.phase);
        let e_minus = phase_factor(-self.phase);

        let ln_fact = ln_factorials::<T>(dim_a + dim_b);
        let joint = dim_a * dim_b;
        let mut matrix = Array2::from_elem((joint, joint), c(0.0, 0.0));
        for n1 in 0..dim_a {
            for n2 in 0..dim_b {
                let col = n1 * dim_b + n2;
                // Expand (sqrt t a† + sqrt r e^{i ph} b†)^{n1}
                //        (sqrt t b† - sqrt r e^{-i ph} a†)^{n2} |0,0>.
                for j in 0..=n1 {
                    for k in 0..=n2 {
                        let m1 = j + k;
                        let m2 = n1 + n2 - m1;
                        if m1 >= dim_a || m2 >= dim_b {
                            continue;
                        }
                        let binom = binomial::<T>(n1, j) * binomial::<T>(n2, k);
                        let powers = sq_t.powi(j as i32) * sq_r.powi((n1 - j) as i32)
                            * sq_t.powi((n2 - k) as i32)
                            * sq_r.powi(k as i32);
                        let sign = if k % 2 == 0 { T::one() } else { -T::one() };
                        let phase_pow = (n1 - j) as i32 - k as i32;
                        let phase = if phase_pow >= 0 {
                            e_plus.powi(phase_pow)
                        } else {
                            e_minus.powi(-phase_pow)
                        };
                        let norm = (T::lit(0.5)
                            * (ln_fact[m1] + ln_fact[m2] - ln_fact[n1] - ln_fact[n2]))
                        .exp();
                        let row = m1 * dim_b + m2;
                        matrix[[row, col]] += phase * cr(binom * powers * sign * norm);
                    }
                }
            }
        }
        matrix
    }
}

pub(crate) fn ln_factorials<T: Real>(up_to: usize) -> Vec<T> {
    let mut table = Vec::with_capacity(up_to + 1);
    let mut acc = T::zero();
    table.push(acc);
    for n in 1..=up_to {
        acc += T::from_usize(n).unwrap().ln();
        table.push(acc);
    }
    table
}

fn binomial<T: Real>(n: usize, k: usize) -> T {
    let mut value = T::one();
    for i in 0..k {
        value = value * T::from_usize(n - i).unwrap() / T::from_usize(i + 1).unwrap();
    }
    value
}

/// Apply a beamsplitter to two modes of a pure state. Total photon number
/// is conserved; if more than `1e-6` of the squared norm would land above
/// the cutoffs, the operation fails instead of silently truncating.
pub fn apply_beamsplitter<T: Real>(
    state: &StateVector<T>,
    mode_a: usize,
    mode_b: usize,
    spec: &BeamsplitterSpec<T>,
) -> Result<StateVector<T>> {
    let da = state.shape().dim(mode_a);
    let db = state.shape().dim(mode_b);
    let matrix = spec.matrix(da, db);
    let norm_in = state.norm_sqr();
    let out = state.apply_two_mode(&matrix, mode_a, mode_b)?;
    let lost = ((norm_in - out.norm_sqr()) / norm_in).max(T::zero()).as_f64();
    if lost > OVERFLOW_BUDGET {
        return Err(FockError::CutoffOverflow { mass: lost });
    }
    Ok(out)
}

/// Beamsplitter acting on a density operator by conjugation.
pub fn apply_beamsplitter_op<T: Real>(
    rho: &ModeOperator<T>,
    mode_a: usize,
    mode_b: usize,
    spec: &BeamsplitterSpec<T>,
) -> Result<ModeOperator<T>> {
    let da = rho.shape().dim(mode_a);
    let db = rho.shape().dim(mode_b);
    let joint = spec.matrix(da, db);
    let full = embed_two_mode(rho.shape(), mode_a, mode_b, &joint)?;
    let trace_in = rho.trace().re;
    let conjugated = full.matrix().dot(rho.matrix()).dot(&linalg::adjoint(full.matrix()));
    let out = ModeOperator::from_matrix(rho.shape().clone(), conjugated, rho.hermitian_flag())?;
    let lost = ((trace_in - out.trace().re) / trace_in).max(T::zero()).as_f64();
    if lost > OVERFLOW_BUDGET {
        return Err(FockError::CutoffOverflow { mass: lost });
    }
    Ok(out)
}

/// Embed a joint two-mode matrix into the full space (identity elsewhere).
fn embed_two_mode<T: Real>(
    shape: &ModeShape,
    mode_a: usize,
    mode_b: usize,
    joint: &Array2<C<T>>,
) -> Result<ModeOperator<T>> {
    shape.check_mode(mode_a)?;
    shape.check_mode(mode_b)?;
    if mode_a == mode_b {
        return Err(FockError::DuplicateMode { mode: mode_a });
    }
    let da = shape.dim(mode_a);
    let db = shape.dim(mode_b);
    let n = shape.total();
    let strides = shape.strides();
    let (sa, sb) = (strides[mode_a], strides[mode_b]);
    let others: Vec<usize> = (0..shape.num_modes())
        .filter(|&m| m != mode_a && m != mode_b)
        .collect();
    let offsets = if others.is_empty() {
        vec![0]
    } else {
        crate::fock::subset_offsets(shape, &others)
    };
    let mut full = Array2::from_elem((n, n), c(0.0, 0.0));
    for &base in &offsets {
        for ia in 0..da {
            for ib in 0..db {
                let row_joint = ia * db + ib;
                let row = base + ia * sa + ib * sb;
                for ja in 0..da {
                    for jb in 0..db {
                        let col_joint = ja * db + jb;
                        let v = joint[[row_joint, col_joint]];
                        if v.norm_sqr() == T::zero() {
                            continue;
                        }
                        full[[row, base + ja * sa + jb * sb]] = v;
                    }
                }
            }
        }
    }
    ModeOperator::from_matrix(shape.clone(), full, false)
}

/// Phase rotation `e^{i theta n}` on one mode of a pure state.
pub fn phase_shift<T: Real>(
    state: &StateVector<T>,
    mode: usize,
    theta: T,
) -> Result<StateVector<T>> {
    state.phase_rotate(mode, theta)
}

/// Phase rotation on one mode of an operator.
pub fn phase_shift_op<T: Real>(
    rho: &ModeOperator<T>,
    mode: usize,
    theta: T,
) -> Result<ModeOperator<T>> {
    let d = rho.shape().dim(mode);
    let mut diag = Array2::from_elem((d, d), c(0.0, 0.0));
    for n in 0..d {
        diag[[n, n]] = phase_factor(theta * T::from_usize(n).unwrap());
    }
    let full = ModeOperator::embed_single(rho.shape(), mode, &diag)?;
    let conjugated = full
        .matrix()
        .dot(rho.matrix())
        .dot(&linalg::adjoint(full.matrix()));
    ModeOperator::from_matrix(rho.shape().clone(), conjugated, rho.hermitian_flag())
}

/// Single-mode Kraus operators of the photon-loss (generalized Bernoulli)
/// channel with survival probability `eta`:
/// `K_k = sum_n sqrt(C(n,k) eta^{n-k} (1-eta)^k) |n-k><n|`.
fn loss_kraus<T: Real>(dim: usize, eta: T) -> Vec<Array2<C<T>>> {
    let mut ops = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut m = Array2::from_elem((dim, dim), c(0.0, 0.0));
        for n in k..dim {
            let coeff = binomial::<T>(n, k)
                * eta.powi((n - k) as i32)
                * (T::one() - eta).powi(k as i32);
            m[[n - k, n]] = cr(coeff.max(T::zero()).sqrt());
        }
        ops.push(m);
    }
    ops
}

/// Photon-loss channel with transmission `eta` on one mode of a density
/// operator. Trace-preserving and positivity-preserving; `eta = 1` is the
/// identity.
pub fn loss_channel<T: Real>(
    rho: &ModeOperator<T>,
    mode: usize,
    eta: T,
) -> Result<ModeOperator<T>> {
    rho.shape().check_mode(mode)?;
    if !eta.is_finite() {
        return Err(FockError::NonFinite { name: "eta" });
    }
    if eta < T::zero() || eta > T::one() {
        return Err(FockError::ParamRange {
            name: "eta",
            value: eta.as_f64(),
            lo: 0.0,
            hi: 1.0,
        });
    }
    if eta == T::one() {
        return Ok(rho.clone());
    }
    let dim = rho.shape().dim(mode);
    let mut acc = ModeOperator::zeros(rho.shape().clone());
    for kraus in loss_kraus(dim, eta) {
        let embedded = ModeOperator::embed_single(rho.shape(), mode, &kraus)?;
        let term = embedded
            .matrix()
            .dot(rho.matrix())
            .dot(&linalg::adjoint(embedded.matrix()));
        acc = acc.add(&ModeOperator::from_matrix(
            rho.shape().clone(),
            term,
            false,
        )?)?;
    }
    ModeOperator::from_matrix(rho.shape().clone(), acc.matrix().clone(), rho.hermitian_flag())
}

/// Loss channel realized as a beamsplitter of transmissivity `eta` onto a
/// vacuum ancilla that is then traced out. Mathematically identical to
/// [`loss_channel`]; kept as an independent route so the two can be checked
/// against each other.
pub fn loss_channel_via_ancilla<T: Real>(
    rho: &ModeOperator<T>,
    mode: usize,
    eta: T,
) -> Result<ModeOperator<T>> {
    rho.shape().check_mode(mode)?;
    if eta < T::zero() || eta > T::one() {
        return Err(FockError::ParamRange {
            name: "eta",
            value: eta.as_f64(),
            lo: 0.0,
            hi: 1.0,
        });
    }
    let dim = rho.shape().dim(mode);
    let vac = StateVector::<T>::vacuum(ModeShape::single(dim)?).density();
    let joint = rho.tensor(&vac);
    let ancilla = rho.shape().num_modes();
    let spec = BeamsplitterSpec::new(eta, T::zero())?;
    let mixed = apply_beamsplitter_op(&joint, mode, ancilla, &spec)?;
    mixed.partial_trace(&[ancilla])
}

/// Detector model for the heralding measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeraldModel {
    /// Ideal single-photon projector `|1><1|`.
    Projector1,
    /// Click/no-click bucket detector `I - |0><0|`.
    OnOff,
}

impl HeraldModel {
    fn accepted_levels(&self, dim: usize) -> std::ops::Range<usize> {
        match self {
            HeraldModel::Projector1 => 1..2.min(dim),
            HeraldModel::OnOff => 1..dim,
        }
    }
}

/// Condition a pure state on a single-photon detection in `mode`
/// (projector model). Returns the normalized pure conditional state on the
/// remaining modes and the outcome probability.
pub fn herald_pure<T: Real>(
    state: &StateVector<T>,
    mode: usize,
) -> Result<(StateVector<T>, T)> {
    let (vectors, p) = herald_components(state, mode, HeraldModel::Projector1)?;
    let v = vectors.into_iter().next().expect("one accepted level");
    Ok((v.normalize()?, p))
}

/// Condition a pure state on a detection event in `mode`. The conditional
/// state on the remaining modes is mixed for the on/off model, so the
/// general return type is an operator.
pub fn herald_state<T: Real>(
    state: &StateVector<T>,
    mode: usize,
    model: HeraldModel,
) -> Result<(ModeOperator<T>, T)> {
    let (vectors, p) = herald_components(state, mode, model)?;
    let shape = vectors[0].shape().clone();
    let mut acc = ModeOperator::zeros(shape);
    for v in &vectors {
        acc = acc.add(&v.density())?;
    }
    Ok((acc.scale(cr(T::one() / p)), p))
}

fn herald_components<T: Real>(
    state: &StateVector<T>,
    mode: usize,
    model: HeraldModel,
) -> Result<(Vec<StateVector<T>>, T)> {
    state.shape().check_mode(mode)?;
    if state.shape().num_modes() < 2 {
        return Err(FockError::SingleMode);
    }
    let d = state.shape().dim(mode);
    let remaining = state.shape().without(&[mode])?;
    let others: Vec<usize> = (0..state.shape().num_modes()).filter(|&m| m != mode).collect();
    let offsets = crate::fock::subset_offsets(state.shape(), &others);
    let stride = state.shape().strides()[mode];
    let mut vectors = Vec::new();
    let mut p = T::zero();
    for level in model.accepted_levels(d) {
        let mut amps = ndarray::Array1::from_elem(remaining.total(), c(0.0, 0.0));
        let mut mass = T::zero();
        for (i, &base) in offsets.iter().enumerate() {
            let a = state.amps()[base + level * stride];
            amps[i] = a;
            mass += a.norm_sqr();
        }
        p += mass;
        if mass > T::zero() {
            vectors.push(StateVector::new(remaining.clone(), amps)?);
        }
    }
    if p <= T::lit(1e-150) || vectors.is_empty() {
        return Err(FockError::ZeroProbability);
    }
    Ok((vectors, p))
}

/// Condition a density operator on a detection event in `mode`; the
/// detector mode is removed from the result.
pub fn herald_op<T: Real>(
    rho: &ModeOperator<T>,
    mode: usize,
    model: HeraldModel,
) -> Result<(ModeOperator<T>, T)> {
    rho.shape().check_mode(mode)?;
    if rho.shape().num_modes() < 2 {
        return Err(FockError::SingleMode);
    }
    let d = rho.shape().dim(mode);
    let mut acc: Option<ModeOperator<T>> = None;
    for level in model.accepted_levels(d) {
        let mut basis = vec![c::<T>(0.0, 0.0); d];
        basis[level] = c(1.0, 0.0);
        let block = rho.project_mode(mode, &basis, &basis)?;
        acc = Some(match acc {
            Some(prev) => prev.add(&block)?,
            None => block,
        });
    }
    let acc = acc.expect("accepted level set non-empty");
    let p = acc.trace().re;
    if p <= T::lit(1e-150) {
        return Err(FockError::ZeroProbability);
    }
    let conditional = ModeOperator::from_matrix(
        acc.shape().clone(),
        acc.matrix().mapv(|z| z / cr(p)),
        rho.hermitian_flag(),
    )?;
    Ok((conditional, p))
}

/// Annihilate one photon on `mode` of a pure state and renormalize.
/// The success weight equals the mode's mean photon number.
pub fn photon_subtract_state<T: Real>(
    state: &StateVector<T>,
    mode: usize,
) -> Result<(StateVector<T>, T)> {
    let d = state.shape().dim(mode);
    let a = annihilation::<T>(d)?;
    let lowered = state.apply_single_mode(a.matrix(), mode)?;
    let weight = lowered.norm_sqr();
    if weight <= T::lit(1e-150) {
        return Err(FockError::VacuumInput);
    }
    Ok((lowered.normalize()?, weight))
}

/// Annihilate one photon on `mode` of a density operator and renormalize.
pub fn photon_subtract_op<T: Real>(
    rho: &ModeOperator<T>,
    mode: usize,
) -> Result<(ModeOperator<T>, T)> {
    let d = rho.shape().dim(mode);
    let a = annihilation::<T>(d)?;
    let embedded = ModeOperator::embed_single(rho.shape(), mode, a.matrix())?;
    let lowered = embedded
        .matrix()
        .dot(rho.matrix())
        .dot(&linalg::adjoint(embedded.matrix()));
    let out = ModeOperator::from_matrix(rho.shape().clone(), lowered, rho.hermitian_flag())?;
    let weight = out.trace().re;
    if weight <= T::lit(1e-150) {
        return Err(FockError::VacuumInput);
    }
    Ok((out.normalized()?, weight))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{fidelity, number_operator};
    use crate::states::{cat, coherent, squeezed_vacuum, two_mode_squeezed, Parity, SqueezingSpec};

    fn sqrt_half() -> f64 {
        0.5f64.sqrt()
    }

    #[test]
    fn single_photon_splits_evenly() {
        let shape = ModeShape::new(vec![3, 3]).unwrap();
        let input = StateVector::<f64>::basis(shape, &[1, 0]).unwrap();
        let out = apply_beamsplitter(&input, 0, 1, &BeamsplitterSpec::balanced()).unwrap();
        assert!((out.amp(&[1, 0]).re - sqrt_half()).abs() < 1e-12);
        assert!((out.amp(&[0, 1]).re - sqrt_half()).abs() < 1e-12);
    }

    #[test]
    fn hong_ou_mandel_bunching() {
        let shape = ModeShape::new(vec![4, 4]).unwrap();
        let input = StateVector::<f64>::basis(shape, &[1, 1]).unwrap();
        let out = apply_beamsplitter(&input, 0, 1, &BeamsplitterSpec::balanced()).unwrap();
        assert!(out.amp(&[1, 1]).norm() < 1e-12);
        assert!((out.amp(&[0, 2]).re - sqrt_half()).abs() < 1e-12);
        assert!((out.amp(&[2, 0]).re + sqrt_half()).abs() < 1e-12);
    }

    #[test]
    fn coherent_state_splits_into_coherent_product() {
        let alpha = 0.8;
        let (t, theta) = (0.7, 0.4);
        let dim = 12;
        let input = coherent::<f64>(c(alpha, 0.0), dim)
            .unwrap()
            .tensor(&StateVector::vacuum(ModeShape::single(dim).unwrap()));
        let out =
            apply_beamsplitter(&input, 0, 1, &BeamsplitterSpec::new(t, theta).unwrap()).unwrap();
        let expect_a = coherent::<f64>(c(t.sqrt() * alpha, 0.0), dim).unwrap();
        let refl = phase_factor::<f64>(theta) * cr((1.0 - t).sqrt() * alpha);
        let expect_b = coherent::<f64>(refl, dim).unwrap();
        let expected = expect_a.tensor(&expect_b);
        let f = out.overlap(&expected).unwrap();
        assert!((f - 1.0).abs() < 1e-9, "overlap {f}");
    }

    #[test]
    fn beamsplitter_conserves_photon_number() {
        let shape = ModeShape::new(vec![5, 5]).unwrap();
        let mut amps = ndarray::Array1::from_elem(25, c(0.0, 0.0));
        amps[shape.flat_index(&[0, 0])] = c(0.6, 0.1);
        amps[shape.flat_index(&[1, 2])] = c(0.5, -0.2);
        amps[shape.flat_index(&[2, 1])] = c(0.3, 0.4);
        let input = StateVector::new(shape, amps).unwrap().normalize().unwrap();
        let spec = BeamsplitterSpec::new(0.37, 1.1).unwrap();
        let out = apply_beamsplitter(&input, 0, 1, &spec).unwrap();
        assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
        let total_in = input.mean_photon(0).unwrap() + input.mean_photon(1).unwrap();
        let total_out = out.mean_photon(0).unwrap() + out.mean_photon(1).unwrap();
        assert!((total_in - total_out).abs() < 1e-10);
    }

    #[test]
    fn beamsplitter_overflow_is_detected() {
        let shape = ModeShape::new(vec![3, 3]).unwrap();
        let input = StateVector::<f64>::basis(shape, &[2, 2]).unwrap();
        let err = apply_beamsplitter(&input, 0, 1, &BeamsplitterSpec::balanced()).unwrap_err();
        assert!(matches!(err, FockError::CutoffOverflow { .. }));
    }

    #[test]
    fn loss_identity_and_single_photon() {
        let one = StateVector::<f64>::basis(ModeShape::single(4).unwrap(), &[1])
            .unwrap()
            .density();
        let same = loss_channel(&one, 0, 1.0).unwrap();
        assert!(linalg::frobenius_norm(&(same.matrix() - one.matrix())) < 1e-14);

        let eta = 0.37;
        let lossy = loss_channel(&one, 0, eta).unwrap();
        assert!((lossy.entry(&[1], &[1]).re - eta).abs() < 1e-13);
        assert!((lossy.entry(&[0], &[0]).re - (1.0 - eta)).abs() < 1e-13);
        assert!((lossy.trace().re - 1.0).abs() < 1e-13);
    }

    #[test]
    fn loss_keeps_coherent_states_coherent() {
        let alpha = 0.9;
        let eta = 0.71;
        let dim = 15;
        let rho = coherent::<f64>(c(alpha, 0.0), dim).unwrap().density();
        let lossy = loss_channel(&rho, 0, eta).unwrap();
        let expected = coherent::<f64>(c(eta.sqrt() * alpha, 0.0), dim).unwrap();
        let f = fidelity(&expected, &lossy).unwrap();
        assert!((f - 1.0).abs() < 1e-9, "fidelity {f}");
    }

    #[test]
    fn loss_composition_law() {
        let dim = 10;
        let rho = cat::<f64>(0.9, Parity::Odd, dim).unwrap().density();
        let once = loss_channel(&loss_channel(&rho, 0, 0.9).unwrap(), 0, 0.8).unwrap();
        let direct = loss_channel(&rho, 0, 0.9 * 0.8).unwrap();
        assert!(linalg::frobenius_norm(&(once.matrix() - direct.matrix())) < 1e-10);
    }

    #[test]
    fn loss_kraus_matches_ancilla_route() {
        let dim = 8;
        let rho = cat::<f64>(0.8, Parity::Even, dim).unwrap().density();
        for eta in [0.0, 0.3, 0.85, 1.0] {
            let kraus = loss_channel(&rho, 0, eta).unwrap();
            let ancilla = loss_channel_via_ancilla(&rho, 0, eta).unwrap();
            let diff = linalg::frobenius_norm(&(kraus.matrix() - ancilla.matrix()));
            assert!(diff < 1e-12, "eta {eta}: {diff}");
        }
    }

    #[test]
    fn loss_preserves_trace_and_positivity() {
        let dim = 9;
        let rho = squeezed_vacuum(SqueezingSpec::<f64>::from_r(0.3).unwrap(), dim)
            .unwrap()
            .density();
        let lossy = loss_channel(&rho, 0, 0.55).unwrap();
        assert!((lossy.trace().re - 1.0).abs() < 1e-10);
        assert!(lossy.min_eigenvalue() > -1e-9);
    }

    #[test]
    fn herald_on_tmsv_projects_single_photon() {
        let lambda = 0.2;
        let state = two_mode_squeezed::<f64>(lambda, (5, 5)).unwrap();
        let (rho, p) = herald_state(&state, 1, HeraldModel::Projector1).unwrap();
        let expected_p = (1.0 - lambda * lambda) * lambda * lambda;
        assert!((p - expected_p).abs() < 1e-12);
        assert!((rho.entry(&[1], &[1]).re - 1.0).abs() < 1e-12);

        // Bucket detector admits the O(lambda^2) multi-photon admixture.
        let (rho, p) = herald_state(&state, 1, HeraldModel::OnOff).unwrap();
        assert!(p > expected_p);
        let one_pop = rho.entry(&[1], &[1]).re;
        assert!((one_pop - (1.0 - lambda * lambda)).abs() < 1e-6);
    }

    #[test]
    fn herald_on_vacuum_fails() {
        let vac = StateVector::<f64>::vacuum(ModeShape::new(vec![3, 3]).unwrap());
        assert!(matches!(
            herald_state(&vac, 1, HeraldModel::Projector1),
            Err(FockError::ZeroProbability)
        ));
    }

    #[test]
    fn herald_factorizes_product_states() {
        let a = coherent::<f64>(c(0.4, 0.0), 8).unwrap();
        let b = coherent::<f64>(c(0.6, 0.2), 8).unwrap();
        let joint = a.tensor(&b);
        let (rho, _) = herald_state(&joint, 0, HeraldModel::Projector1).unwrap();
        let f = fidelity(&b, &rho).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tap_herald_flips_parity() {
        // A faint tap off an even cat, heralded on one photon, leaves the
        // kept mode odd-dominated.
        let dim = 14;
        let even = cat::<f64>(1.0, Parity::Even, dim).unwrap();
        let joint = even.tensor(&StateVector::vacuum(ModeShape::single(6).unwrap()));
        let tap = BeamsplitterSpec::new(0.97, 0.0).unwrap();
        let tapped = apply_beamsplitter(&joint, 0, 1, &tap).unwrap();
        let (kept, _p) = herald_state(&tapped, 1, HeraldModel::Projector1).unwrap();
        let parity: f64 = (0..dim)
            .map(|n| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign * kept.entry(&[n], &[n]).re
            })
            .sum();
        assert!(parity < 0.0, "parity expectation {parity}");
    }

    #[test]
    fn herald_op_agrees_with_state_route() {
        let lambda = 0.25;
        let state = two_mode_squeezed::<f64>(lambda, (5, 5)).unwrap();
        for model in [HeraldModel::Projector1, HeraldModel::OnOff] {
            let (from_state, p1) = herald_state(&state, 1, model).unwrap();
            let (from_op, p2) = herald_op(&state.density(), 1, model).unwrap();
            assert!((p1 - p2).abs() < 1e-13);
            assert!(
                linalg::frobenius_norm(&(from_state.matrix() - from_op.matrix())) < 1e-12
            );
        }
    }

    #[test]
    fn subtraction_turns_even_cat_odd() {
        let dim = 16;
        let even = cat::<f64>(0.9, Parity::Even, dim).unwrap();
        let (subtracted, weight) = photon_subtract_state(&even, 0).unwrap();
        let odd = cat::<f64>(0.9, Parity::Odd, dim).unwrap();
        let f = subtracted.overlap(&odd).unwrap();
        assert!((f - 1.0).abs() < 1e-9, "fidelity {f}");
        let n_op = number_operator::<f64>(dim).unwrap();
        let mean_n = even.expectation(&n_op).unwrap().re;
        assert!((weight - mean_n).abs() < 1e-12);
    }

    #[test]
    fn subtracting_single_photon_gives_vacuum() {
        let one = StateVector::<f64>::basis(ModeShape::single(3).unwrap(), &[1]).unwrap();
        let (out, weight) = photon_subtract_state(&one, 0).unwrap();
        assert!((out.amp(&[0]).re - 1.0).abs() < 1e-14);
        assert!((weight - 1.0).abs() < 1e-14);
        let vac = StateVector::<f64>::vacuum(ModeShape::single(3).unwrap());
        assert!(matches!(
            photon_subtract_state(&vac, 0),
            Err(FockError::VacuumInput)
        ));
    }

    #[test]
    fn subtracted_squeezed_vacuum_fits_odd_cat() {
        // Fit in the aligned frame (cat lobes on the x axis), as used by
        // the protocol: rotate the x-squeezed state by -pi/2 first.
        let spec = SqueezingSpec::<f64>::from_noise_reduction_db(3.0).unwrap();
        let state = squeezed_vacuum(spec, 16)
            .unwrap()
            .phase_rotate(0, -std::f64::consts::FRAC_PI_2)
            .unwrap();
        let (subtracted, _) = photon_subtract_state(&state, 0).unwrap();
        let fit = crate::states::best_cat_amplitude(&subtracted.density(), Parity::Odd).unwrap();
        assert!(
            fit.alpha >= 0.8 && fit.alpha <= 1.1,
            "alpha* = {}",
            fit.alpha
        );
        assert!(fit.fidelity > 0.95);
    }

    #[test]
    fn photon_subtract_op_matches_state_route() {
        let dim = 12;
        let state = cat::<f64>(0.8, Parity::Even, dim).unwrap();
        let (s, w1) = photon_subtract_state(&state, 0).unwrap();
        let (o, w2) = photon_subtract_op(&state.density(), 0).unwrap();
        assert!((w1 - w2).abs() < 1e-12);
        assert!(linalg::frobenius_norm(&(s.density().matrix() - o.matrix())) < 1e-12);
    }

    #[test]
    fn phase_shift_routes_agree() {
        let dim = 6;
        let state = coherent::<f64>(c(0.7, 0.1), dim).unwrap();
        let theta = 0.9;
        let shifted = phase_shift(&state, 0, theta).unwrap();
        let op_route = phase_shift_op(&state.density(), 0, theta).unwrap();
        assert!(
            linalg::frobenius_norm(&(shifted.density().matrix() - op_route.matrix())) < 1e-12
        );
        // A coherent state picks up the phase on its amplitude.
        let rotated = coherent::<f64>(c(0.7, 0.1) * phase_factor(theta), dim).unwrap();
        assert!((shifted.overlap(&rotated).unwrap() - 1.0).abs() < 1e-10);
    }
}
