//! Free-fermion solution of the open chain after the Jordan–Wigner map.
//!
//! With Majoranas ordered `(a_1, b_1, a_2, b_2, …)` the chain is
//! `H₀ = (i/4) Σ A_mn γ_m γ_n` where `A_{a_j b_j} = −2g` and
//! `A_{b_j a_{j+1}} = −2J`. The spectrum of `iA` is `±ε_k`, so
//! `H₀ = Σ ε_k (n_k − ½)`.

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::hamiltonians::ModelParams;
use crate::linalg::eigh_complex;

pub const OCCUPATION_SITE_CAP: usize = 16;

#[derive(Debug, Clone)]
pub struct BdgSolution {
    pub n_sites: usize,
    /// Quasiparticle energies `ε_k ≥ 0`, ascending.
    pub single_particle_energies: Vec<f64>,
    /// `−½ Σ ε_k`.
    pub ground_energy: f64,
    /// Eigenvector of `iA` for `+ε_k`, one per mode, in Majorana order.
    pub mode_vectors: Vec<Vec<c64>>,
    /// All `2N` eigenvalues of `iA`, ascending.
    pub bdg_spectrum: Vec<f64>,
}

impl BdgSolution {
    /// Weight `|u_{a_j}|² + |u_{b_j}|²` of mode `k` on each site.
    pub fn site_weights(&self, k: usize) -> Vec<f64> {
        self.mode_vectors[k]
            .chunks(2)
            .map(|c| c[0].norm_sqr() + c[1].norm_sqr())
            .collect()
    }
}

fn majorana_matrix(params: &ModelParams) -> Mat<f64> {
    let n = params.n_sites;
    let mut a = Mat::<f64>::zeros(2 * n, 2 * n);
    for j in 0..n {
        a[(2 * j, 2 * j + 1)] = -2.0 * params.g;
        a[(2 * j + 1, 2 * j)] = 2.0 * params.g;
        if j + 1 < n {
            a[(2 * j + 1, 2 * j + 2)] = -2.0 * params.j;
            a[(2 * j + 2, 2 * j + 1)] = 2.0 * params.j;
        }
    }
    a
}

pub fn bdg_solve(params: &ModelParams) -> Result<BdgSolution> {
    params.validate()?;
    let n = params.n_sites;
    let a = majorana_matrix(params);
    let ia = Mat::<c64>::from_fn(2 * n, 2 * n, |i, j| c64::new(0.0, a[(i, j)]));
    let (vals, vecs) = eigh_complex(&ia)?;

    // Energies from the singular values of the a–b coupling block, which keep
    // full relative accuracy for the exponentially small edge mode.
    let t = Mat::<f64>::from_fn(n, n, |i, j| a[(2 * i, 2 * j + 1)]);
    let mut eps = t
        .singular_values()
        .map_err(|e| Error::Numerical(format!("{e:?}")))?;
    eps.sort_by(f64::total_cmp);

    let mode_vectors = (n..2 * n).map(|k| vecs.col_as_slice(k).to_vec()).collect();
    let ground_energy = -0.5 * eps.iter().sum::<f64>();
    Ok(BdgSolution {
        n_sites: n,
        single_particle_energies: eps,
        ground_energy,
        mode_vectors,
        bdg_spectrum: vals,
    })
}

/// Many-body level with the parity of its quasiparticle occupation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManyBodyLevel {
    pub energy: f64,
    pub occupation: u64,
    pub odd: bool,
}

/// Every occupation pattern, ascending in energy.
pub fn many_body_levels(sol: &BdgSolution) -> Result<Vec<ManyBodyLevel>> {
    let n = sol.n_sites;
    if n > OCCUPATION_SITE_CAP {
        return Err(Error::SizeCap {
            n_sites: n,
            cap: OCCUPATION_SITE_CAP,
        });
    }
    let mut levels: Vec<ManyBodyLevel> = (0..1u64 << n)
        .map(|occ| {
            let e: f64 = (0..n)
                .filter(|k| occ >> k & 1 == 1)
                .map(|k| sol.single_particle_energies[k])
                .sum();
            ManyBodyLevel {
                energy: sol.ground_energy + e,
                occupation: occ,
                odd: occ.count_ones() % 2 == 1,
            }
        })
        .collect();
    levels.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.occupation.cmp(&b.occupation))
    });
    Ok(levels)
}

/// Lowest `k_levels` many-body energies.
pub fn many_body_spectrum(sol: &BdgSolution, k_levels: usize) -> Result<Vec<f64>> {
    let dim = 1usize << sol.n_sites.min(63);
    if k_levels > dim {
        return Err(Error::InvalidParameter(format!(
            "k_levels {k_levels} exceeds 2^N = {dim}"
        )));
    }
    Ok(many_body_levels(sol)?
        .into_iter()
        .take(k_levels)
        .map(|l| l.energy)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_site_is_field() {
        let sol = bdg_solve(&ModelParams::new(1, 0.3).unwrap()).unwrap();
        let ev = many_body_spectrum(&sol, 2).unwrap();
        assert!((ev[0] + 0.3).abs() < 1e-14 && (ev[1] - 0.3).abs() < 1e-14);
    }

    #[test]
    fn bdg_spectrum_is_particle_hole_symmetric() {
        let sol = bdg_solve(&ModelParams::new(7, 0.8).unwrap()).unwrap();
        let s = &sol.bdg_spectrum;
        for k in 0..7 {
            assert!((s[k] + s[13 - k]).abs() < 1e-12);
            assert!((s[7 + k] - sol.single_particle_energies[k]).abs() < 1e-12);
        }
        assert!(sol.single_particle_energies.iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn edge_mode_near_zero_in_ordered_phase() {
        let sol = bdg_solve(&ModelParams::new(12, 0.5).unwrap()).unwrap();
        assert!(sol.single_particle_energies[0] <= 10.0 * 0.5f64.powi(12));
        let sol = bdg_solve(&ModelParams::new(12, 1.5).unwrap()).unwrap();
        assert!(sol.single_particle_energies[0] > 0.1);
    }

    #[test]
    fn edge_mode_localized_with_ratio_g() {
        let g = 0.4;
        let sol = bdg_solve(&ModelParams::new(12, g).unwrap()).unwrap();
        let w = sol.site_weights(0);
        // Amplitude ratio between neighbouring sites near the left end.
        let r = (w[2] / w[1]).sqrt();
        assert!((r - g).abs() < 1e-3, "{r}");
        let r = (w[9] / w[10]).sqrt();
        assert!((r - g).abs() < 1e-3, "{r}");
    }

    #[test]
    fn doublets_pair_opposite_occupation_parity() {
        let sol = bdg_solve(&ModelParams::new(8, 0.5).unwrap()).unwrap();
        let levels = many_body_levels(&sol).unwrap();
        for pair in levels.chunks(2).take(8) {
            assert_ne!(pair[0].odd, pair[1].odd);
            assert!(
                (pair[1].energy - pair[0].energy - sol.single_particle_energies[0]).abs() < 1e-12
            );
        }
    }

    #[test]
    fn caps() {
        let sol = bdg_solve(&ModelParams::new(4, 0.5).unwrap()).unwrap();
        assert!(many_body_spectrum(&sol, 17).is_err());
        let big = bdg_solve(&ModelParams::new(17, 0.5).unwrap()).unwrap();
        assert!(matches!(many_body_levels(&big), Err(Error::SizeCap { .. })));
    }
}
