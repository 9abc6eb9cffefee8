//! Exact diagonalization and quench dynamics of the open transverse-field
//! Ising chain `H₀ = −J Σ σᶻσᶻ − g Σ σˣ`, centered on its zero-energy edge
//! mode and the pseudospin it defines on each degenerate pair of levels.
//!
//! Operators are sums of bitmask Pauli strings ([`OperatorSum`]); dense
//! matrices are only formed for diagonalization. Site `s` (1-based) of an
//! `N`-site chain is bit `N − s` of a basis index and bit value 0 is spin up.

pub mod dynamics;
pub mod error;
pub mod hamiltonians;
pub mod linalg;
pub mod oracle;
pub mod pauli;
pub mod spectral;
pub mod thermal;

pub use faer::c64;

pub use dynamics::{
    average_le, average_le_closed_form, evolve, evolve_schedule, gate_fidelity, le_closed_form,
    loschmidt_echo, pulse_string_check, EchoSeries, EvolutionPlan, GateReport, Quench, TimeGrid,
    Unitary2,
};
pub use error::{Error, Result};
pub use hamiltonians::{
    build_d, build_d_with, build_h0, build_h_prime, build_h_prime_with, build_h_simplified,
    build_parity, build_pulse, build_y_perturbed, tau_equivalent_h0, tau_operators,
    EdgeNormalization, HamiltonianPreset, KappaVector, ModelParams, PulseSchedule, PulseSegment,
};
pub use linalg::Eigenbasis;
pub use oracle::{bdg_solve, many_body_spectrum, BdgSolution};
pub use pauli::{
    commutator_norm, operator_norm, Axis, OperatorSum, PauliString, Phase, StateVector,
    DENSE_SITE_CAP, MAX_SITES,
};
pub use spectral::{
    diagonalize, fix_gauge, gauge_pair, level_split_scan, pseudospin_block, sector_diagonalize,
    sector_diagonalize_with, GaugedPair, LevelPair, Parity, PseudospinBlock, ScanRow,
    SpectrumResult,
};
pub use thermal::{
    build_ensemble, thermal_experiment, uhlmann_echo, DensityMatrix, EnsembleKind, EnsembleSpec,
    PostQuench, ThermalCurve, ThermalExperiment,
};
