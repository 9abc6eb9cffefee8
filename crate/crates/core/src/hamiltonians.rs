//! Operator builders for the open transverse-field Ising chain and its
//! edge-mode perturbations.

use std::f64::consts::PI;
use std::str::FromStr;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{full_mask, site_bit, Axis, OperatorSum, PauliString, Phase};

fn re(v: f64) -> c64 {
    c64::new(v, 0.0)
}

/// Chain length, bond coupling `j` and transverse field `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_sites: usize,
    #[serde(default = "default_coupling")]
    pub j: f64,
    pub g: f64,
}

fn default_coupling() -> f64 {
    1.0
}

impl ModelParams {
    /// `J = 1`.
    pub fn new(n_sites: usize, g: f64) -> Result<Self> {
        Self::with_coupling(n_sites, 1.0, g)
    }

    pub fn with_coupling(n_sites: usize, j: f64, g: f64) -> Result<Self> {
        let p = Self { n_sites, j, g };
        p.validate()?;
        Ok(p)
    }

    /// `g = 0` is accepted as the classical limit.
    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 || self.n_sites > crate::pauli::MAX_SITES {
            return Err(Error::InvalidParameter(format!(
                "n_sites = {}",
                self.n_sites
            )));
        }
        if !self.j.is_finite() {
            return Err(Error::InvalidParameter(format!("J = {}", self.j)));
        }
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "g must be >= 0, got {}",
                self.g
            )));
        }
        Ok(())
    }

    /// `g/J`, the decay ratio of the edge modes.
    pub fn ratio(&self) -> f64 {
        self.g / self.j
    }

    pub fn is_ordered(&self) -> bool {
        self.j > 0.0 && self.ratio() < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KappaVector {
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub z: f64,
}

impl KappaVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }
}

/// Piecewise-constant extra term added on top of a base Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSegment {
    pub duration: f64,
    pub hamiltonian: OperatorSum,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseSchedule {
    segments: Vec<PulseSegment>,
}

impl PulseSchedule {
    pub fn new(segments: Vec<PulseSegment>) -> Result<Self> {
        let mut s = Self::default();
        for seg in segments {
            s.push(seg)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, seg: PulseSegment) -> Result<()> {
        if !(seg.duration.is_finite() && seg.duration > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "segment duration must be positive, got {}",
                seg.duration
            )));
        }
        if let Some(first) = self.segments.first() {
            let (a, b) = (first.hamiltonian.n_sites(), seg.hamiltonian.n_sites());
            if a != b {
                return Err(Error::DimensionMismatch { left: a, right: b });
            }
        }
        self.segments.push(seg);
        Ok(())
    }

    pub fn segments(&self) -> &[PulseSegment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// `−J Σ σˣ_j σˣ_{j+1} + g Σ σᶻ_j`.
pub fn build_h0(params: &ModelParams) -> Result<OperatorSum> {
    params.validate()?;
    let n = params.n_sites;
    let mut h = OperatorSum::zero(n)?;
    for s in 1..n {
        let bond = PauliString::from_masks(n, site_bit(n, s) | site_bit(n, s + 1), 0, Phase::ONE)?;
        h.push_term(re(-params.j), &bond)?;
    }
    for s in 1..=n {
        h.push_term(re(params.g), &PauliString::single_site(n, s, Axis::Z)?)?;
    }
    Ok(h)
}

/// `∏_j (−σᶻ_j)`.
pub fn build_parity(n_sites: usize) -> Result<PauliString> {
    let phase = if n_sites % 2 == 0 {
        Phase::ONE
    } else {
        Phase::MINUS_ONE
    };
    PauliString::from_masks(n_sites, 0, full_mask(n_sites), phase)
}

/// `a_j = ∏_{l<j}(−σᶻ_l) σˣ_j`.
pub fn majorana_a(n_sites: usize, site: usize) -> Result<PauliString> {
    let x = PauliString::single_site(n_sites, site, Axis::X)?;
    Ok(jw_string(n_sites, site)?.mul_unchecked(&x))
}

/// `b_j = ∏_{l<j}(−σᶻ_l) σʸ_j`.
pub fn majorana_b(n_sites: usize, site: usize) -> Result<PauliString> {
    let y = PauliString::single_site(n_sites, site, Axis::Y)?;
    Ok(jw_string(n_sites, site)?.mul_unchecked(&y))
}

fn jw_string(n_sites: usize, site: usize) -> Result<PauliString> {
    let z = (1..site).fold(0u64, |m, l| m | site_bit(n_sites, l));
    let phase = if (site - 1) % 2 == 0 {
        Phase::ONE
    } else {
        Phase::MINUS_ONE
    };
    PauliString::from_masks(n_sites, 0, z, phase)
}

/// Prefactor convention for the edge operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeNormalization {
    /// `½√((1−r²)/(1−r^{2N}))`: `{D, D†} = 1` exactly at every N.
    #[default]
    FiniteChain,
    /// `½√(1−r²)`: `{D, D†} = (1 − r^{2N})`, the infinite-chain prefactor.
    Asymptotic,
}

/// Edge operator `D = ½c Σ_j r^{j−1} (a_j − i b_{N−j+1})` with `r = g/J`.
pub fn build_d(params: &ModelParams) -> Result<OperatorSum> {
    build_d_with(params, EdgeNormalization::FiniteChain)
}

pub fn build_d_with(params: &ModelParams, norm: EdgeNormalization) -> Result<OperatorSum> {
    params.validate()?;
    let r = params.ratio();
    if !(params.j > 0.0 && r > 0.0 && r < 1.0) {
        return Err(Error::OutsideOrderedPhase { ratio: r });
    }
    let n = params.n_sites;
    let c = match norm {
        EdgeNormalization::FiniteChain => ((1.0 - r * r) / (1.0 - r.powi(2 * n as i32))).sqrt(),
        EdgeNormalization::Asymptotic => (1.0 - r * r).sqrt(),
    };
    let mut d = OperatorSum::zero(n)?;
    for j in 1..=n {
        let w = 0.5 * c * r.powi(j as i32 - 1);
        d.push_term(re(w), &majorana_a(n, j)?)?;
        d.push_term(c64::new(0.0, -w), &majorana_b(n, n - j + 1)?)?;
    }
    Ok(d)
}

/// `κx(D†+D) + iκy(D†−D) + κz p`.
pub fn build_h_prime(params: &ModelParams, kappa: &KappaVector) -> Result<OperatorSum> {
    build_h_prime_with(params, kappa, EdgeNormalization::FiniteChain)
}

pub fn build_h_prime_with(
    params: &ModelParams,
    kappa: &KappaVector,
    norm: EdgeNormalization,
) -> Result<OperatorSum> {
    let d = build_d_with(params, norm)?;
    let dd = d.adjoint();
    let sum = dd.try_add(&d)?;
    let diff = dd.try_add(&d.scale(re(-1.0)))?;
    let p = OperatorSum::from_string(build_parity(params.n_sites)?);
    Ok(sum.scale(re(kappa.x)) + diff.scale(c64::new(0.0, kappa.y)) + p.scale(re(kappa.z)))
}

/// `κx σˣ_1 − iκy p σˣ_N + κz p`.
pub fn build_h_simplified(n_sites: usize, kappa: &KappaVector) -> Result<OperatorSum> {
    if n_sites < 2 {
        return Err(Error::InvalidParameter(format!(
            "n_sites must be >= 2, got {n_sites}"
        )));
    }
    let p = build_parity(n_sites)?;
    let x1 = PauliString::single_site(n_sites, 1, Axis::X)?;
    let p_xn = p.mul_unchecked(&PauliString::single_site(n_sites, n_sites, Axis::X)?);
    OperatorSum::from_terms(
        n_sites,
        [
            (re(kappa.x), x1),
            (c64::new(0.0, -kappa.y), p_xn),
            (re(kappa.z), p),
        ],
    )
}

/// `H₀ + Σ γ_j σʸ_j`.
pub fn build_y_perturbed(params: &ModelParams, gamma: &[f64]) -> Result<OperatorSum> {
    let n = params.n_sites;
    if gamma.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: gamma.len(),
        });
    }
    let mut h = build_h0(params)?;
    for (s, &gm) in (1..=n).zip(gamma) {
        h.push_term(re(gm), &PauliString::single_site(n, s, Axis::Y)?)?;
    }
    Ok(h)
}

/// Rotated single-site operators `(τˣ, τʸ, τᶻ)` with
/// `η⁺ = 1/√(1+γ²)`, `η⁻ = γ/√(1+γ²)`.
pub fn tau_operators(
    n_sites: usize,
    site: usize,
    gamma: f64,
) -> Result<(OperatorSum, OperatorSum, OperatorSum)> {
    let s = |a| PauliString::single_site(n_sites, site, a);
    let norm = (1.0 + gamma * gamma).sqrt();
    let (ep, em) = (1.0 / norm, gamma / norm);
    let tx = OperatorSum::from_string(s(Axis::X)?);
    let ty = OperatorSum::from_terms(n_sites, [(re(ep), s(Axis::Y)?), (re(-em), s(Axis::Z)?)])?;
    let tz = OperatorSum::from_terms(n_sites, [(re(ep), s(Axis::Z)?), (re(em), s(Axis::Y)?)])?;
    Ok((tx, ty, tz))
}

/// `−J Σ τˣ_j τˣ_{j+1} + Σ √(g²+γ_j²) τᶻ_j` written in σ operators.
pub fn tau_equivalent_h0(params: &ModelParams, gamma: &[f64]) -> Result<OperatorSum> {
    params.validate()?;
    let n = params.n_sites;
    if gamma.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: gamma.len(),
        });
    }
    let mut h = OperatorSum::zero(n)?;
    for s in 1..n {
        let bond = PauliString::from_masks(n, site_bit(n, s) | site_bit(n, s + 1), 0, Phase::ONE)?;
        h.push_term(re(-params.j), &bond)?;
    }
    for (s, &gm) in (1..=n).zip(gamma) {
        let (_, _, tz) = tau_operators(n, s, gm)?;
        h = h + tz.scale(re((params.g * params.g + gm * gm).sqrt()));
    }
    Ok(h)
}

/// Single segment of length `delta` carrying `(π/2Δ) Σ σᶻ_l`.
pub fn build_pulse(n_sites: usize, delta: f64) -> Result<PulseSchedule> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pulse width must be positive, got {delta}"
        )));
    }
    let mut h = OperatorSum::zero(n_sites)?;
    for s in 1..=n_sites {
        h.push_term(
            re(PI / (2.0 * delta)),
            &PauliString::single_site(n_sites, s, Axis::Z)?,
        )?;
    }
    PulseSchedule::new(vec![PulseSegment {
        duration: delta,
        hamiltonian: h,
    }])
}

/// Named Hamiltonians reachable from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HamiltonianPreset {
    #[serde(rename = "h0")]
    H0,
    #[serde(rename = "h_prime")]
    HPrime,
    #[serde(rename = "h_simplified")]
    HSimplified,
    #[serde(rename = "h0+pulse")]
    H0PlusPulse,
    #[serde(rename = "y_perturbed")]
    YPerturbed,
}

impl HamiltonianPreset {
    pub const ALL: [HamiltonianPreset; 5] = [
        Self::H0,
        Self::HPrime,
        Self::HSimplified,
        Self::H0PlusPulse,
        Self::YPerturbed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::H0 => "h0",
            Self::HPrime => "h_prime",
            Self::HSimplified => "h_simplified",
            Self::H0PlusPulse => "h0+pulse",
            Self::YPerturbed => "y_perturbed",
        }
    }

    /// Static operator for this preset. `h_prime` and `h_simplified` are
    /// returned added to `H₀`; `h0+pulse` is the Hamiltonian while the pulse
    /// is on.
    pub fn build(
        self,
        params: &ModelParams,
        kappa: &KappaVector,
        gamma: &[f64],
        delta: f64,
    ) -> Result<OperatorSum> {
        let h0 = build_h0(params)?;
        Ok(match self {
            Self::H0 => h0,
            Self::HPrime => h0 + build_h_prime(params, kappa)?,
            Self::HSimplified => h0 + build_h_simplified(params.n_sites, kappa)?,
            Self::H0PlusPulse => {
                let pulse = build_pulse(params.n_sites, delta)?;
                h0 + pulse.segments()[0].hamiltonian.clone()
            }
            Self::YPerturbed => build_y_perturbed(params, gamma)?,
        })
    }
}

impl FromStr for HamiltonianPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown Hamiltonian preset `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigvalsh_complex, hermitian_defect};
    use crate::pauli::commutator_norm;
    use faer::Mat;

    fn params(n: usize, g: f64) -> ModelParams {
        ModelParams::new(n, g).unwrap()
    }

    fn spectrum(h: &OperatorSum) -> Vec<f64> {
        eigvalsh_complex(&h.to_dense().unwrap()).unwrap()
    }

    fn max_abs(m: &Mat<c64>) -> f64 {
        let mut d = 0.0f64;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                d = d.max(m[(i, j)].norm());
            }
        }
        d
    }

    fn identity_defect(m: &Mat<c64>) -> f64 {
        let mut d = 0.0f64;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let want = if i == j { 1.0 } else { 0.0 };
                d = d.max((m[(i, j)] - c64::new(want, 0.0)).norm());
            }
        }
        d
    }

    #[test]
    fn h0_single_site_and_classical_limit() {
        let h = build_h0(&ModelParams::new(1, 0.7).unwrap()).unwrap();
        let ev = spectrum(&h);
        assert!((ev[0] + 0.7).abs() < 1e-14 && (ev[1] - 0.7).abs() < 1e-14);

        let h = build_h0(&ModelParams::new(2, 0.0).unwrap()).unwrap();
        let ev = spectrum(&h);
        for (a, b) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn h0_two_sites_matches_closed_form() {
        // Even sector {|00>,|11>}: ±√(4g²+1); odd sector: ±1.
        let g = 0.5f64;
        let ev = spectrum(&build_h0(&params(2, g)).unwrap());
        let r = (4.0 * g * g + 1.0).sqrt();
        let mut want = [-r, -1.0, 1.0, r];
        want.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn h0_term_count() {
        assert_eq!(build_h0(&params(10, 0.3)).unwrap().len(), 19);
    }

    #[test]
    fn parity_eigenvalues_and_symmetry() {
        let p2 = OperatorSum::from_string(build_parity(2).unwrap());
        let up = crate::pauli::StateVector::basis(2, 0).unwrap();
        assert!((p2.expectation(&up).unwrap().re - 1.0).abs() < 1e-15);
        let p3 = OperatorSum::from_string(build_parity(3).unwrap());
        let up = crate::pauli::StateVector::basis(3, 0).unwrap();
        assert!((p3.expectation(&up).unwrap().re + 1.0).abs() < 1e-15);

        for n in [3, 6] {
            let p = OperatorSum::from_string(build_parity(n).unwrap());
            let h = build_h0(&params(n, 0.37)).unwrap();
            assert!(commutator_norm(&p, &h).unwrap() < 1e-13);
        }
    }

    #[test]
    fn majoranas_anticommute() {
        let n = 4;
        let mut ms = Vec::new();
        for j in 1..=n {
            ms.push(majorana_a(n, j).unwrap());
            ms.push(majorana_b(n, j).unwrap());
        }
        for (i, a) in ms.iter().enumerate() {
            assert!(a.is_hermitian());
            for (k, b) in ms.iter().enumerate() {
                if i != k {
                    assert!(!a.commutes_with(b));
                }
            }
        }
    }

    #[test]
    fn d_algebra() {
        for (n, g) in [(6, 0.2), (8, 0.3), (6, 0.8)] {
            let d = build_d(&params(n, g)).unwrap();
            assert_eq!(d.len(), 2 * n);
            let dd = d.adjoint();
            let anti = d.anticommutator(&dd).unwrap().to_dense().unwrap();
            assert!(identity_defect(&anti) < 1e-10);
            let sq = d.product(&d).unwrap();
            assert!(sq.is_empty() || max_abs(&sq.to_dense().unwrap()) < 1e-12);
        }
    }

    #[test]
    fn asymptotic_normalization_misses_identity_by_r_pow_2n() {
        let (n, g) = (6, 0.8f64);
        let d = build_d_with(&params(n, g), EdgeNormalization::Asymptotic).unwrap();
        let anti = d.anticommutator(&d.adjoint()).unwrap();
        let want = 1.0 - g.powi(2 * n as i32);
        let (c, p) = anti.terms().next().unwrap();
        assert_eq!(anti.len(), 1);
        assert!(p.is_identity());
        assert!((c.re - want).abs() < 1e-12);
    }

    #[test]
    fn d_rejects_disordered_phase() {
        assert!(matches!(
            build_d(&params(4, 1.0)),
            Err(Error::OutsideOrderedPhase { .. })
        ));
        assert!(matches!(
            build_d(&params(4, 1.5)),
            Err(Error::OutsideOrderedPhase { .. })
        ));
        assert!(build_h_prime(&params(4, 1.2), &KappaVector::new(0.1, 0.0, 0.0)).is_err());
    }

    #[test]
    fn d_commutator_with_h0_decays() {
        let mut last = f64::INFINITY;
        for n in [4, 6, 8] {
            let p = params(n, 0.5);
            let c = commutator_norm(&build_d(&p).unwrap(), &build_h0(&p).unwrap()).unwrap();
            assert!(c < last * 0.5, "n = {n}: {c} vs {last}");
            assert!(c <= 10.0 * 0.5f64.powi(n as i32));
            last = c;
        }
    }

    #[test]
    fn h_prime_special_cases() {
        let p = params(6, 0.4);
        assert!(build_h_prime(&p, &KappaVector::default())
            .unwrap()
            .is_empty());

        let hz = build_h_prime(&p, &KappaVector::new(0.0, 0.0, 0.5)).unwrap();
        let want = OperatorSum::from_string(build_parity(6).unwrap()).scale(re(0.5));
        assert_eq!(hz, want);

        let h = build_h_prime(&params(8, 0.4), &KappaVector::new(0.1, 0.2, 0.3)).unwrap();
        assert!(h.is_hermitian());
        assert!(hermitian_defect(&h.to_dense().unwrap()) < 1e-13);
    }

    #[test]
    fn h_simplified_terms() {
        let h = build_h_simplified(6, &KappaVector::new(0.1, 0.0, 0.0)).unwrap();
        assert_eq!(h.len(), 1);
        let (c, s) = h.terms().next().unwrap();
        assert_eq!(s, PauliString::single_site(6, 1, Axis::X).unwrap());
        assert!((c.re - 0.1).abs() < 1e-16);

        // Middle term is −κy b_N.
        let n = 6;
        let h = build_h_simplified(n, &KappaVector::new(0.0, 0.3, 0.0)).unwrap();
        let want = OperatorSum::from_terms(n, [(re(-0.3), majorana_b(n, n).unwrap())]).unwrap();
        assert_eq!(h, want);

        let h = build_h_simplified(n, &KappaVector::new(0.1, 0.2, 0.3)).unwrap();
        assert_eq!(h.len(), 3);
        assert!(hermitian_defect(&h.to_dense().unwrap()) < 1e-14);
    }

    #[test]
    fn h_prime_reduces_to_simplified_at_leading_order() {
        // The r⁰ strings of D are exactly the strings of the simplified form.
        let n = 6;
        let kappa = KappaVector::new(0.1, 0.2, 0.3);
        let hp =
            build_h_prime_with(&params(n, 0.3), &kappa, EdgeNormalization::Asymptotic).unwrap();
        let hs = build_h_simplified(n, &kappa).unwrap();
        let c = (1.0 - 0.09f64).sqrt();
        for (cs, s) in hs.terms() {
            let cp = hp.coefficient(s.x, s.z);
            let scale = if s.x == 0 { 1.0 } else { c };
            assert!((cp - cs * scale).norm() < 1e-14, "{s}: {cp} vs {cs}");
        }
    }

    #[test]
    fn y_perturbation() {
        let p = params(5, 0.5);
        assert_eq!(
            build_y_perturbed(&p, &[0.0; 5]).unwrap(),
            build_h0(&p).unwrap()
        );
        assert!(matches!(
            build_y_perturbed(&p, &[0.1; 4]),
            Err(Error::LengthMismatch {
                expected: 5,
                got: 4
            })
        ));
        let h = build_y_perturbed(&p, &[0.1, -0.05, 0.0, 0.02, 0.1]).unwrap();
        assert!(h.is_hermitian());
        assert!(hermitian_defect(&h.to_dense().unwrap()) < 1e-14);
        assert_eq!(
            tau_equivalent_h0(&p, &[0.0; 5]).unwrap(),
            build_h0(&p).unwrap()
        );
    }

    #[test]
    fn tau_operators_obey_su2() {
        let (tx, ty, tz) = tau_operators(3, 2, 0.37).unwrap();
        let two_i = c64::new(0.0, 2.0);
        for (a, b, c) in [(&tx, &ty, &tz), (&ty, &tz, &tx), (&tz, &tx, &ty)] {
            let lhs = a.commutator(b).unwrap().to_dense().unwrap();
            let rhs = c.scale(two_i).to_dense().unwrap();
            let diff = &lhs - &rhs;
            assert!(max_abs(&diff) < 1e-14);
        }
    }

    #[test]
    fn pulse_coefficients() {
        let s = build_pulse(12, 0.1).unwrap();
        assert_eq!(s.segments().len(), 1);
        let seg = &s.segments()[0];
        assert_eq!(seg.duration, 0.1);
        assert_eq!(seg.hamiltonian.len(), 12);
        for (c, _) in seg.hamiltonian.terms() {
            assert!((c.re - PI / 0.2).abs() < 1e-12);
        }
        assert!(build_pulse(4, 0.0).is_err());
        assert!(build_pulse(4, -1.0).is_err());
    }

    #[test]
    fn preset_names_round_trip() {
        for p in HamiltonianPreset::ALL {
            assert_eq!(p.name().parse::<HamiltonianPreset>().unwrap(), p);
        }
        assert!("h1".parse::<HamiltonianPreset>().is_err());
    }
}
