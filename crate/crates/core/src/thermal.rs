//! Mixed states built over the degenerate pairs and their Uhlmann-fidelity
//! echoes.

use std::f64::consts::PI;
use std::str::FromStr;

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EchoSeries, EvolutionPlan, TimeGrid};
use crate::error::{Error, Result};
use crate::hamiltonians::{build_d, build_h0, ModelParams};
use crate::linalg::{eigh_complex, eigvalsh_complex, hermitian_defect};
use crate::pauli::{Axis, OperatorSum, PauliString, StateVector};
use crate::spectral::{degeneracy_tolerance, fix_gauge, sector_diagonalize_with, SpectrumResult};

/// Negative eigenvalues of a PSD product above this magnitude are an error.
pub const PSD_CLIP: f64 = 1e-12;

/// Density matrix held in spectral form `Σ_k w_k |u_k⟩⟨u_k|` with
/// orthonormal columns `u_k`.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    n_sites: usize,
    weights: Vec<f64>,
    vectors: Mat<c64>,
}

impl DensityMatrix {
    /// Normalizes the weights; vectors must be orthonormal.
    pub fn from_mixture(n_sites: usize, weights: Vec<f64>, vectors: Mat<c64>) -> Result<Self> {
        let dim = 1usize << n_sites;
        if vectors.nrows() != dim || vectors.ncols() != weights.len() {
            return Err(Error::InvalidDensityMatrix(format!(
                "expected {dim} x {} vectors, got {} x {}",
                weights.len(),
                vectors.nrows(),
                vectors.ncols()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDensityMatrix(
                "negative or non-finite weight".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::InvalidDensityMatrix("zero total weight".into()));
        }
        let keep: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
        let w: Vec<f64> = keep.iter().map(|&k| weights[k] / total).collect();
        let v = Mat::<c64>::from_fn(dim, keep.len(), |i, j| vectors[(i, keep[j])]);
        let rho = Self {
            n_sites,
            weights: w,
            vectors: v,
        };
        rho.check_orthonormal()?;
        Ok(rho)
    }

    pub fn pure(state: &StateVector) -> Result<Self> {
        state.check_normalized(1e-10)?;
        let v = Mat::<c64>::from_fn(state.dim(), 1, |i, _| state.amplitudes[i]);
        Self::from_mixture(state.n_sites, vec![1.0], v)
    }

    /// Validates trace, Hermiticity and positivity, then diagonalizes.
    pub fn from_dense(n_sites: usize, m: &Mat<c64>) -> Result<Self> {
        let dim = 1usize << n_sites;
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::InvalidDensityMatrix(format!(
                "expected {dim} x {dim}"
            )));
        }
        let herm = hermitian_defect(m);
        if herm > 1e-12 {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian ({herm:.3e})"
            )));
        }
        let tr: f64 = (0..dim).map(|i| m[(i, i)].re).sum();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let (vals, vecs) = eigh_complex(m)?;
        if vals[0] < -1e-10 {
            return Err(Error::InvalidDensityMatrix(format!(
                "eigenvalue {}",
                vals[0]
            )));
        }
        let w = vals.into_iter().map(|v| v.max(0.0)).collect();
        Self::from_mixture(n_sites, w, vecs)
    }

    fn check_orthonormal(&self) -> Result<()> {
        let r = self.rank();
        if r > 64 {
            // Spot-check a few columns; large mixtures come from eigensolvers.
            for &(a, b) in &[(0, 0), (0, r - 1), (r / 2, r / 2), (r / 3, r - 2)] {
                self.check_pair(a, b)?;
            }
            return Ok(());
        }
        for a in 0..r {
            for b in a..r {
                self.check_pair(a, b)?;
            }
        }
        Ok(())
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        let ov: c64 = self
            .vectors
            .col_as_slice(a)
            .iter()
            .zip(self.vectors.col_as_slice(b))
            .map(|(x, y)| x.conj() * y)
            .sum();
        let want = if a == b { 1.0 } else { 0.0 };
        if (ov - c64::new(want, 0.0)).norm() > 1e-8 {
            return Err(Error::InvalidDensityMatrix(format!(
                "columns {a}, {b} not orthonormal"
            )));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn vectors(&self) -> &Mat<c64> {
        &self.vectors
    }

    pub fn trace(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let scaled = Mat::<c64>::from_fn(self.vectors.nrows(), self.rank(), |i, k| {
            self.vectors[(i, k)] * self.weights[k]
        });
        &scaled * self.vectors.adjoint()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    RandomPhase,
    FixedParity,
    Canonical,
}

impl EnsembleKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::RandomPhase => "random_phase",
            Self::FixedParity => "fixed_parity",
            Self::Canonical => "canonical",
        }
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_phase" => Ok(Self::RandomPhase),
            "fixed_parity" => Ok(Self::FixedParity),
            "canonical" => Ok(Self::Canonical),
            other => Err(Error::InvalidParameter(format!(
                "unknown ensemble `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub beta: f64,
    pub seed: u64,
}

/// Pair angles `(θ_n, φ_n)` in ascending pair order.
///
/// The stream is ChaCha20 seeded with `seed_from_u64(seed)`, one `f64` draw
/// per pair: `θ_n = π·u` for random phases (`φ_n = 2θ_n`), `φ_n = 2π·u` for
/// fixed parity (`θ_n = π`).
pub fn sample_angles(kind: EnsembleKind, seed: u64, pairs: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..pairs)
        .map(|_| {
            let u: f64 = rng.random();
            match kind {
                EnsembleKind::RandomPhase => (PI * u, 2.0 * PI * u),
                EnsembleKind::FixedParity => (PI, 2.0 * PI * u),
                EnsembleKind::Canonical => (0.0, 0.0),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub rho: DensityMatrix,
    pub angles: Vec<(f64, f64)>,
    /// Pairs whose gauge was undefined and kept their solver phases.
    pub ungauged: Vec<usize>,
}

/// Mixed state over the spectrum of `H₀`. Structured kinds need the
/// sector-resolved spectrum of an ordered chain.
pub fn build_ensemble(
    spec_h0: &SpectrumResult,
    ens: &EnsembleSpec,
    params: &ModelParams,
) -> Result<Ensemble> {
    if !(ens.beta >= 0.0 && ens.beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "β must be >= 0, got {}",
            ens.beta
        )));
    }
    let dim = 1usize << spec_h0.n_sites;
    if ens.kind == EnsembleKind::Canonical {
        let e0 = spec_h0.eigenvalues[0];
        let w = spec_h0
            .eigenvalues
            .iter()
            .map(|e| (-ens.beta * (e - e0)).exp())
            .collect();
        let mut v = Mat::<c64>::zeros(dim, spec_h0.len());
        for k in 0..spec_h0.len() {
            v.col_as_slice_mut(k)
                .copy_from_slice(&spec_h0.basis.vector(k));
        }
        let rho = DensityMatrix::from_mixture(spec_h0.n_sites, w, v)?;
        return Ok(Ensemble {
            rho,
            angles: Vec::new(),
            ungauged: Vec::new(),
        });
    }
    let pairs = match (&spec_h0.pairs, params.is_ordered()) {
        (Some(p), true) => p,
        _ => return Err(Error::DisorderedPhase),
    };
    let d = build_d(params)?;
    let reference = d.adjoint() + d;
    let angles = sample_angles(ens.kind, ens.seed, pairs.len());
    let e_min = pairs
        .iter()
        .map(|p| 0.5 * (spec_h0.eigenvalues[p.plus] + spec_h0.eigenvalues[p.minus]))
        .fold(f64::INFINITY, f64::min);
    let mut weights = Vec::with_capacity(pairs.len());
    let mut v = Mat::<c64>::zeros(dim, pairs.len());
    let mut ungauged = Vec::new();
    for (k, (pair, &(theta, phi))) in pairs.iter().zip(&angles).enumerate() {
        let plus = spec_h0.eigenvector(pair.plus);
        let minus = spec_h0.eigenvector(pair.minus);
        let (plus, minus) = match fix_gauge(&plus, &minus, &reference) {
            Ok(p) => p,
            Err(Error::GaugeUndefined { .. }) => {
                ungauged.push(pair.n);
                (plus, minus)
            }
            Err(e) => return Err(e),
        };
        let a = c64::new((theta / 2.0).sin(), 0.0);
        let b = -c64::cis(phi) * (theta / 2.0).cos();
        let phi_n = plus.combine(a, &minus, b);
        v.col_as_slice_mut(k).copy_from_slice(&phi_n.amplitudes);
        let e_n = 0.5 * (spec_h0.eigenvalues[pair.plus] + spec_h0.eigenvalues[pair.minus]);
        weights.push((-ens.beta * (e_n - e_min)).exp());
    }
    let rho = DensityMatrix::from_mixture(spec_h0.n_sites, weights, v)?;
    Ok(Ensemble {
        rho,
        angles,
        ungauged,
    })
}

/// `[Tr √(√ρ₀ ρ(t) √ρ₀)]²` with `ρ(t) = e^{−iHt} ρ₀ e^{iHt}`.
///
/// With `√ρ₀ = W S W†` (rank `r`) the trace equals the sum of the square
/// roots of the eigenvalues of `M M†`, `M = S (Y† e^{−iEt} Y) S`, where
/// `Y = V† W` is computed once from the eigenvectors `V` of `H`.
pub fn uhlmann_echo(
    rho0: &DensityMatrix,
    h_pos: &OperatorSum,
    grid: &TimeGrid,
) -> Result<EchoSeries> {
    if h_pos.n_sites() != rho0.n_sites {
        return Err(Error::DimensionMismatch {
            left: rho0.n_sites,
            right: h_pos.n_sites(),
        });
    }
    if (rho0.trace() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidDensityMatrix(format!(
            "trace {}",
            rho0.trace()
        )));
    }
    let plan = EvolutionPlan::new(h_pos)?;
    uhlmann_echo_with(rho0, &plan, grid)
}

pub fn uhlmann_echo_with(
    rho0: &DensityMatrix,
    plan: &EvolutionPlan,
    grid: &TimeGrid,
) -> Result<EchoSeries> {
    let dim = 1usize << rho0.n_sites;
    let r = rho0.rank();
    let mut y = Mat::<c64>::zeros(dim, r);
    for k in 0..r {
        let c = plan.spectrum().basis.project(rho0.vectors.col_as_slice(k));
        y.col_as_slice_mut(k).copy_from_slice(&c);
    }
    let s: Vec<f64> = rho0.weights.iter().map(|w| w.sqrt()).collect();
    let energies = &plan.spectrum().eigenvalues;
    let values = grid
        .times()
        .par_iter()
        .map(|&t| {
            let phases: Vec<c64> = energies.iter().map(|&e| c64::cis(-e * t)).collect();
            let z = Mat::<c64>::from_fn(dim, r, |i, j| phases[i] * y[(i, j)]);
            let x = y.adjoint() * &z;
            let m = Mat::<c64>::from_fn(r, r, |i, j| x[(i, j)] * (s[i] * s[j]));
            let k = &m * m.adjoint();
            let mut tr = 0.0;
            for l in eigvalsh_complex(&k)? {
                if l < -PSD_CLIP {
                    return Err(Error::Numerical(format!(
                        "PSD product has eigenvalue {l:.3e}"
                    )));
                }
                tr += l.max(0.0).sqrt();
            }
            Ok(tr * tr)
        })
        .collect::<Result<Vec<f64>>>()?;
    EchoSeries::from_raw(grid.times().to_vec(), values)
}

/// `cos²(κx t) + sin²(κx t) sin²θ cos²φ`.
pub fn overlap_formula(theta: f64, phi: f64, kappa_x: f64, t: f64) -> f64 {
    let (s, c) = (kappa_x * t).sin_cos();
    c * c + s * s * theta.sin().powi(2) * phi.cos().powi(2)
}

/// Continuum-averaged echo for the structured ensembles.
pub fn analytic_case_le(kind: EnsembleKind, kappa_x: f64, t: f64) -> Result<f64> {
    let c2 = (kappa_x * t).cos().powi(2);
    match kind {
        EnsembleKind::RandomPhase => Ok(0.25 + 0.75 * c2),
        EnsembleKind::FixedParity => Ok(c2),
        EnsembleKind::Canonical => Err(Error::InvalidParameter(
            "no closed form for the canonical ensemble".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostQuench {
    /// `H₀ + κx (D† + D)`; ordered phase only.
    ExactEdge,
    /// `H₀ + κx σˣ_1`.
    Local,
}

impl FromStr for PostQuench {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact_edge" | "exact_d" => Ok(Self::ExactEdge),
            "local" => Ok(Self::Local),
            other => Err(Error::InvalidParameter(format!(
                "unknown postquench `{other}`"
            ))),
        }
    }
}

pub fn post_quench_hamiltonian(
    params: &ModelParams,
    choice: PostQuench,
    kappa_x: f64,
) -> Result<OperatorSum> {
    let h0 = build_h0(params)?;
    let v = match choice {
        PostQuench::ExactEdge => {
            let d = build_d(params)?;
            d.adjoint() + d
        }
        PostQuench::Local => {
            OperatorSum::from_string(PauliString::single_site(params.n_sites, 1, Axis::X)?)
        }
    };
    Ok(h0 + v.scale(c64::new(kappa_x, 0.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalCurve {
    pub kind: EnsembleKind,
    pub beta: f64,
    pub g: f64,
    pub seed: u64,
    pub series: EchoSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalExperiment {
    pub n_sites: usize,
    pub kappa_x: f64,
    pub kinds: Vec<EnsembleKind>,
    pub betas: Vec<f64>,
    pub g_values: Vec<f64>,
    pub post_quench: PostQuench,
    pub seed: u64,
}

/// Every (g, kind, β) curve, in that nesting order. The same seed is used
/// for every β so structured ensembles share their angles.
pub fn thermal_experiment(exp: &ThermalExperiment, grid: &TimeGrid) -> Result<Vec<ThermalCurve>> {
    let mut out = Vec::new();
    for &g in &exp.g_values {
        let params = ModelParams::new(exp.n_sites, g)?;
        let h0 = build_h0(&params)?;
        let spec = sector_diagonalize_with(&h0, degeneracy_tolerance(&params))?;
        let plan = EvolutionPlan::new(&post_quench_hamiltonian(
            &params,
            exp.post_quench,
            exp.kappa_x,
        )?)?;
        for &kind in &exp.kinds {
            for &beta in &exp.betas {
                let ens = EnsembleSpec {
                    kind,
                    beta,
                    seed: exp.seed,
                };
                let rho = build_ensemble(&spec, &ens, &params)?.rho;
                let series = uhlmann_echo_with(&rho, &plan, grid)?;
                out.push(ThermalCurve {
                    kind,
                    beta,
                    g,
                    seed: exp.seed,
                    series,
                });
            }
        }
    }
    Ok(out)
}
