//! Exact diagonalization with parity sectors, degenerate-pair matching and
//! gauge-fixed 2×2 pseudospin blocks.

use faer::{c64, Mat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{build_h0, build_h_simplified, KappaVector, ModelParams};
use crate::linalg::{eigh_complex, eigh_real, EigenBlock, EigenVectors, Eigenbasis};
use crate::pauli::{basis_parity, OperatorSum, StateVector, DENSE_SITE_CAP};

/// Allowed imaginary part of a coefficient before an operator counts as
/// non-Hermitian.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;
/// Smallest reference matrix element that still defines a gauge.
pub const GAUGE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    fn of_basis(n_sites: usize, index: usize) -> Self {
        if basis_parity(n_sites, index as u64) > 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Level `plus` of the even sector matched with level `minus` of the odd
/// sector (global indices into the spectrum).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelPair {
    pub n: usize,
    pub plus: usize,
    pub minus: usize,
    pub gap: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub n_sites: usize,
    pub eigenvalues: Vec<f64>,
    pub basis: Eigenbasis,
    pub parity_labels: Vec<Option<Parity>>,
    pub pairs: Option<Vec<LevelPair>>,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvector(&self, k: usize) -> StateVector {
        StateVector {
            n_sites: self.n_sites,
            amplitudes: self.basis.vector(k),
        }
    }

    pub fn pair(&self, n: usize) -> Option<&LevelPair> {
        self.pairs.as_ref().and_then(|p| p.get(n))
    }

    /// Largest `‖H v − λ v‖` over all levels.
    pub fn max_residual(&self, h: &OperatorSum) -> Result<f64> {
        let mut worst = 0.0f64;
        for k in 0..self.len() {
            let v = self.eigenvector(k);
            let hv = h.apply(&v)?;
            let lam = self.eigenvalues[k];
            let r: f64 = hv
                .amplitudes
                .iter()
                .zip(&v.amplitudes)
                .map(|(a, b)| (a - b * lam).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
        }
        Ok(worst)
    }
}

fn check_hermitian(h: &OperatorSum) -> Result<()> {
    let d = h.hermiticity_defect();
    if d > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian { deviation: d });
    }
    if h.n_sites() > DENSE_SITE_CAP {
        return Err(Error::SizeCap {
            n_sites: h.n_sites(),
            cap: DENSE_SITE_CAP,
        });
    }
    Ok(())
}

/// Hermitian part with sub-tolerance imaginary noise removed.
fn hermitian_part(h: &OperatorSum) -> OperatorSum {
    h.try_add(&h.adjoint())
        .expect("same chain")
        .scale(c64::new(0.5, 0.0))
}

/// Dense block of `h` restricted to `support`; `h` must map the support to
/// itself.
fn block_eigen(h: &OperatorSum, support: Vec<usize>) -> Result<EigenBlock> {
    let dim = 1usize << h.n_sites();
    let m = support.len();
    let mut pos = vec![usize::MAX; dim];
    for (k, &i) in support.iter().enumerate() {
        pos[i] = k;
    }
    let terms: Vec<(u64, u64, c64)> = h
        .terms()
        .map(|(c, p)| (p.x, p.z, c * p.phase.to_complex()))
        .collect();
    if h.is_real() {
        let mut a = Mat::<f64>::zeros(m, m);
        for &(x, z, v) in &terms {
            for (col, &i) in support.iter().enumerate() {
                let i = i as u64;
                let s = if (z & i).count_ones() % 2 == 0 {
                    v.re
                } else {
                    -v.re
                };
                a[(pos[(i ^ x) as usize], col)] += s;
            }
        }
        let (values, vecs) = eigh_real(&a)?;
        Ok(EigenBlock {
            support,
            values,
            vectors: EigenVectors::Real(vecs),
        })
    } else {
        let mut a = Mat::<c64>::zeros(m, m);
        for &(x, z, v) in &terms {
            for (col, &i) in support.iter().enumerate() {
                let i = i as u64;
                let s = if (z & i).count_ones() % 2 == 0 { v } else { -v };
                a[(pos[(i ^ x) as usize], col)] += s;
            }
        }
        let (values, vecs) = eigh_complex(&a)?;
        Ok(EigenBlock {
            support,
            values,
            vectors: EigenVectors::Complex(vecs),
        })
    }
}

fn sector_support(n_sites: usize, parity: Parity) -> Vec<usize> {
    (0..1usize << n_sites)
        .filter(|&i| Parity::of_basis(n_sites, i) == parity)
        .collect()
}

/// Full eigensystem, ascending. Parity-conserving operators are solved per
/// parity sector and come back labelled; pairs are not assigned.
pub fn diagonalize(h: &OperatorSum) -> Result<SpectrumResult> {
    check_hermitian(h)?;
    let h = hermitian_part(h);
    let n = h.n_sites();
    if h.conserves_parity() {
        return sector_solve(&h);
    }
    let support: Vec<usize> = (0..1usize << n).collect();
    let basis = Eigenbasis::new(1 << n, vec![block_eigen(&h, support)?]);
    Ok(SpectrumResult {
        n_sites: n,
        eigenvalues: basis.values(),
        parity_labels: vec![None; basis.len()],
        basis,
        pairs: None,
    })
}

fn sector_solve(h: &OperatorSum) -> Result<SpectrumResult> {
    let n = h.n_sites();
    let blocks = [Parity::Even, Parity::Odd]
        .into_iter()
        .map(|p| block_eigen(h, sector_support(n, p)))
        .collect::<Result<Vec<_>>>()?;
    let basis = Eigenbasis::new(1 << n, blocks);
    let parity_labels = (0..basis.len())
        .map(|k| {
            Some(if basis.locate(k).0 == 0 {
                Parity::Even
            } else {
                Parity::Odd
            })
        })
        .collect();
    Ok(SpectrumResult {
        n_sites: n,
        eigenvalues: basis.values(),
        basis,
        parity_labels,
        pairs: None,
    })
}

/// `max(1e−8, 10·(g/J)^N)`.
pub fn degeneracy_tolerance(params: &ModelParams) -> f64 {
    let r = params.ratio().abs();
    (10.0 * r.powi(params.n_sites as i32)).max(1e-8)
}

/// Sector-resolved spectrum with rank-matched pairs, flagged degenerate
/// below `1e−8`.
pub fn sector_diagonalize(h: &OperatorSum) -> Result<SpectrumResult> {
    sector_diagonalize_with(h, 1e-8)
}

pub fn sector_diagonalize_with(h: &OperatorSum, tolerance: f64) -> Result<SpectrumResult> {
    check_hermitian(h)?;
    if !h.conserves_parity() {
        return Err(Error::ParityNotConserved);
    }
    let mut spec = sector_solve(&hermitian_part(h))?;
    let half = spec.len() / 2;
    let mut plus = Vec::with_capacity(half);
    let mut minus = Vec::with_capacity(half);
    for k in 0..spec.len() {
        if spec.basis.locate(k).0 == 0 {
            plus.push(k);
        } else {
            minus.push(k);
        }
    }
    let pairs = plus
        .into_iter()
        .zip(minus)
        .enumerate()
        .map(|(n, (p, m))| {
            let gap = (spec.eigenvalues[p] - spec.eigenvalues[m]).abs();
            LevelPair {
                n,
                plus: p,
                minus: m,
                gap,
                degenerate: gap < tolerance,
            }
        })
        .collect();
    spec.pairs = Some(pairs);
    Ok(spec)
}

/// A degenerate pair with a fixed relative phase.
#[derive(Debug, Clone)]
pub struct GaugedPair {
    pub n: usize,
    pub plus: StateVector,
    pub minus: StateVector,
    /// Mean unperturbed energy of the pair.
    pub epsilon: f64,
    pub gap: f64,
    pub degenerate: bool,
}

/// Rephase `minus` so that `⟨plus|reference|minus⟩` is real and positive.
pub fn fix_gauge(
    plus: &StateVector,
    minus: &StateVector,
    reference: &OperatorSum,
) -> Result<(StateVector, StateVector)> {
    let m = reference.matrix_element(plus, minus)?;
    if m.norm() < GAUGE_THRESHOLD {
        return Err(Error::GaugeUndefined {
            pair: usize::MAX,
            element: m.norm(),
        });
    }
    let phase = m.conj() / m.norm();
    Ok((plus.clone(), minus.scaled(phase)))
}

/// Gauge-fixed pair `n` of a sector-resolved spectrum.
pub fn gauge_pair(spec: &SpectrumResult, n: usize, reference: &OperatorSum) -> Result<GaugedPair> {
    let pair = *spec
        .pair(n)
        .ok_or_else(|| Error::InvalidParameter(format!("no pair {n} in this spectrum")))?;
    let (plus, minus) = fix_gauge(
        &spec.eigenvector(pair.plus),
        &spec.eigenvector(pair.minus),
        reference,
    )
    .map_err(|e| match e {
        Error::GaugeUndefined { element, .. } => Error::GaugeUndefined { pair: n, element },
        other => other,
    })?;
    Ok(GaugedPair {
        n,
        plus,
        minus,
        epsilon: 0.5 * (spec.eigenvalues[pair.plus] + spec.eigenvalues[pair.minus]),
        gap: pair.gap,
        degenerate: pair.degenerate,
    })
}

/// `B·σ + ε_n I₂` in the basis `(plus, minus)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudospinBlock {
    pub n: usize,
    pub epsilon_n: f64,
    pub b: KappaVector,
    pub block: [[c64; 2]; 2],
    /// False when the underlying pair was not degenerate within tolerance.
    pub degenerate: bool,
}

impl PseudospinBlock {
    pub fn eigenvalues(&self) -> (f64, f64) {
        let r = self.b.norm();
        (self.epsilon_n - r, self.epsilon_n + r)
    }
}

/// Project a Hermitian perturbation onto a gauged pair.
pub fn pseudospin_block(pair: &GaugedPair, perturbation: &OperatorSum) -> Result<PseudospinBlock> {
    if perturbation.hermiticity_defect() > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian {
            deviation: perturbation.hermiticity_defect(),
        });
    }
    let vp = perturbation.apply(&pair.plus)?;
    let vm = perturbation.apply(&pair.minus)?;
    let b11 = pair.plus.inner(&vp).re;
    let b22 = pair.minus.inner(&vm).re;
    let b12 = pair.plus.inner(&vm);
    let b = KappaVector::new(b12.re, -b12.im, 0.5 * (b11 - b22));
    let epsilon_n = pair.epsilon + 0.5 * (b11 + b22);
    let block = [
        [c64::new(epsilon_n + b.z, 0.0), c64::new(b.x, -b.y)],
        [c64::new(b.x, b.y), c64::new(epsilon_n - b.z, 0.0)],
    ];
    Ok(PseudospinBlock {
        n: pair.n,
        epsilon_n,
        b,
        block,
        degenerate: pair.degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub g: f64,
    pub n: usize,
    pub epsilon_n: f64,
    pub split_n: f64,
    /// True when levels were paired within parity sectors, false when the
    /// perturbation mixes parities and consecutive levels are paired.
    pub parity_resolved: bool,
}

/// Splits of the lowest `n_pairs` pairs of `H₀ + H′_S` over a field grid.
pub fn level_split_scan(
    g_grid: &[f64],
    kappa: &KappaVector,
    n_sites: usize,
    n_pairs: usize,
) -> Result<Vec<ScanRow>> {
    if let Some(&g) = g_grid.iter().find(|&&g| !(g > 0.0 && g <= 2.0)) {
        return Err(Error::InvalidParameter(format!(
            "scan field {g} outside (0, 2]"
        )));
    }
    let hs = build_h_simplified(n_sites, kappa)?;
    let per_g: Vec<Result<Vec<ScanRow>>> = g_grid
        .par_iter()
        .map(|&g| {
            let h = build_h0(&ModelParams::new(n_sites, g)?)? + hs.clone();
            split_rows(g, &h, n_pairs)
        })
        .collect();
    let mut out = Vec::new();
    for rows in per_g {
        out.extend(rows?);
    }
    Ok(out)
}

fn split_rows(g: f64, h: &OperatorSum, n_pairs: usize) -> Result<Vec<ScanRow>> {
    if h.conserves_parity() {
        let spec = sector_diagonalize(h)?;
        let pairs = spec.pairs.as_deref().unwrap_or_default();
        Ok(pairs
            .iter()
            .take(n_pairs)
            .map(|p| {
                let (a, b) = (spec.eigenvalues[p.plus], spec.eigenvalues[p.minus]);
                ScanRow {
                    g,
                    n: p.n,
                    epsilon_n: 0.5 * (a + b),
                    split_n: p.gap,
                    parity_resolved: true,
                }
            })
            .collect())
    } else {
        let ev = diagonalize(h)?.eigenvalues;
        Ok((0..n_pairs.min(ev.len() / 2))
            .map(|n| {
                let (a, b) = (ev[2 * n], ev[2 * n + 1]);
                ScanRow {
                    g,
                    n,
                    epsilon_n: 0.5 * (a + b),
                    split_n: b - a,
                    parity_resolved: false,
                }
            })
            .collect())
    }
}
