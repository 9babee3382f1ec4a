//! Truncated Fock-space toolkit for heralded hybrid discrete/continuous
//! variable entanglement.
//!
//! The crate simulates an optical circuit in which a weak two-mode squeezer
//! (the discrete-variable node) and a squeezed-vacuum cat-state source (the
//! continuous-variable node) each send a faint beam to a central station.
//! A single-photon detection behind a tunable beamsplitter heralds an
//! entangled two-mode state of the form
//! `|0>|cat-> + e^{i phi} |1>|cat+>`, which the analysis layer characterizes
//! through Wigner functions, partial-transpose negativity and fidelities,
//! and which the tomography layer reconstructs from simulated two-mode
//! homodyne records via iterative maximum likelihood.
//!
//! Everything is generic over the floating-point scalar (`f32`/`f64`)
//! through the [`Real`] trait; the `*64` aliases below pin the default
//! double-precision instantiation used by the CLI and the test suites.

pub mod analysis;
pub mod channels;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod protocol;
pub mod scalar;
pub mod states;
pub mod tomography;

pub use error::{FockError, Result};
pub use scalar::{Real, C};

pub use analysis::{
    negativity, report_metrics, wigner, wigner_origin, MetricsReport, Negativity,
    WignerConvention, WignerGrid,
};
pub use channels::{
    apply_beamsplitter, apply_beamsplitter_op, herald_op, herald_pure, herald_state,
    loss_channel, loss_channel_via_ancilla, phase_shift, phase_shift_op, photon_subtract_op,
    photon_subtract_state, BeamsplitterSpec, HeraldModel,
};
pub use fock::{
    annihilation, creation, fidelity, fidelity_mixed, number_operator, quadrature_operator,
    ModeOperator, ModeShape, StateVector,
};
pub use protocol::{
    balance_router, reduced_block, run_protocol, sweep_router, BlockBasis, ExperimentConfig,
    HeraldResult, PathwayDiagnostics, SweepPoint,
};
pub use states::{
    best_cat_amplitude, cat, coherent, hybrid_target, squeezed_vacuum, two_mode_squeezed, CatFit,
    HybridTargetSpec, Parity, QubitBasis, SqueezingSpec,
};
pub use tomography::{
    homodyne_pdf, mle_reconstruct, quad_wavefunctions, sample_records, MleOptions,
    MleReconstruction, QuadratureRecord, TomographySchedule,
};

/// Double-precision complex amplitude.
pub type C64 = num_complex::Complex<f64>;
/// Single-precision complex amplitude.
pub type C32 = num_complex::Complex<f32>;

pub type StateVector64 = fock::StateVector<f64>;
pub type ModeOperator64 = fock::ModeOperator<f64>;
pub type ExperimentConfig64 = protocol::ExperimentConfig<f64>;
pub type HeraldResult64 = protocol::HeraldResult<f64>;
pub type WignerGrid64 = analysis::WignerGrid<f64>;
pub type TomographySchedule64 = tomography::TomographySchedule<f64>;
pub type MleOptions64 = tomography::MleOptions<f64>;
