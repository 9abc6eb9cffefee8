//! Pauli strings on up to 64 sites, encoded as (x, z) bit masks with an
//! exact quarter phase, and weighted sums of them.
//!
//! Basis convention: site `s` (1-based) of an `n`-site chain is bit `n - s`,
//! so site 1 is the most significant bit. A clear bit is spin up (σᶻ = +1).
//! A string with masks `(x, z)` and phase `i^k` is the operator
//! `i^k ∏_s X_s^{x_s} Z_s^{z_s}` with the X factor to the left at each site.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use faer::{c64, Mat};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MAX_SITES: usize = 64;
/// Largest chain that may be materialized as a dense matrix.
pub const DENSE_SITE_CAP: usize = 14;
/// Coefficients below this magnitude are dropped when terms merge.
pub const MERGE_TOLERANCE: f64 = 1e-14;

/// Bit of `site` (1-based) in an `n_sites` chain.
#[inline]
pub fn site_bit(n_sites: usize, site: usize) -> u64 {
    1u64 << (n_sites - site)
}

#[inline]
pub(crate) fn full_mask(n_sites: usize) -> u64 {
    if n_sites == 64 {
        u64::MAX
    } else {
        (1u64 << n_sites) - 1
    }
}

/// A fourth root of unity `i^k`, stored as `k mod 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_quadrant(k: u32) -> Self {
        Phase((k % 4) as u8)
    }

    pub fn quadrant(self) -> u8 {
        self.0
    }

    pub fn conj(self) -> Self {
        Phase((4 - self.0) % 4)
    }

    pub fn to_complex(self) -> c64 {
        match self.0 {
            0 => c64::new(1.0, 0.0),
            1 => c64::new(0.0, 1.0),
            2 => c64::new(-1.0, 0.0),
            _ => c64::new(0.0, -1.0),
        }
    }
}

impl Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl std::str::FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidParameter(format!("unknown axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    pub n_sites: usize,
    pub x: u64,
    pub z: u64,
    pub phase: Phase,
}

fn check_sites(n_sites: usize) -> Result<()> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::InvalidParameter(format!(
            "n_sites must be in 1..={MAX_SITES}, got {n_sites}"
        )));
    }
    Ok(())
}

impl PauliString {
    pub fn identity(n_sites: usize) -> Result<Self> {
        check_sites(n_sites)?;
        Ok(Self {
            n_sites,
            x: 0,
            z: 0,
            phase: Phase::ONE,
        })
    }

    pub fn from_masks(n_sites: usize, x: u64, z: u64, phase: Phase) -> Result<Self> {
        check_sites(n_sites)?;
        let m = full_mask(n_sites);
        if x & !m != 0 || z & !m != 0 {
            return Err(Error::InvalidParameter(format!(
                "masks {x:#x}/{z:#x} have bits beyond {n_sites} sites"
            )));
        }
        Ok(Self {
            n_sites,
            x,
            z,
            phase,
        })
    }

    /// σ^axis on one site; Y is stored as `i·XZ`.
    pub fn single_site(n_sites: usize, site: usize, axis: Axis) -> Result<Self> {
        check_sites(n_sites)?;
        if site == 0 || site > n_sites {
            return Err(Error::SiteOutOfRange { site, n_sites });
        }
        let b = site_bit(n_sites, site);
        Ok(match axis {
            Axis::X => Self {
                n_sites,
                x: b,
                z: 0,
                phase: Phase::ONE,
            },
            Axis::Z => Self {
                n_sites,
                x: 0,
                z: b,
                phase: Phase::ONE,
            },
            Axis::Y => Self {
                n_sites,
                x: b,
                z: b,
                phase: Phase::I,
            },
        })
    }

    /// Phase that makes the bare product `X^x Z^z` Hermitian.
    pub fn canonical_phase(x: u64, z: u64) -> Phase {
        Phase::from_quadrant((x & z).count_ones())
    }

    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        if self.n_sites != other.n_sites {
            return Err(Error::DimensionMismatch {
                left: self.n_sites,
                right: other.n_sites,
            });
        }
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &PauliString) -> PauliString {
        // Z^{z1} X^{x2} = (-1)^{|z1 & x2|} X^{x2} Z^{z1}
        let sign = Phase::from_quadrant(2 * (self.z & other.x).count_ones());
        PauliString {
            n_sites: self.n_sites,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            phase: self.phase * other.phase * sign,
        }
    }

    pub fn adjoint(&self) -> PauliString {
        // (X^x Z^z)† = Z^z X^x = (-1)^{|x & z|} X^x Z^z
        let sign = Phase::from_quadrant(2 * (self.x & self.z).count_ones());
        PauliString {
            phase: self.phase.conj() * sign,
            ..*self
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase == Self::canonical_phase(self.x, self.z)
            || self.phase == Self::canonical_phase(self.x, self.z) * Phase::MINUS_ONE
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z) ^ (self.z & other.x)).count_ones() % 2 == 0
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Image of basis state `index`: returns `(new_index, amplitude)`.
    #[inline]
    pub fn act(&self, index: u64) -> (u64, c64) {
        let mut ph = self.phase;
        if (self.z & index).count_ones() % 2 == 1 {
            ph = ph * Phase::MINUS_ONE;
        }
        (index ^ self.x, ph.to_complex())
    }

    pub fn to_dense(&self) -> Result<Mat<c64>> {
        OperatorSum::from_string(*self).to_dense()
    }

    pub fn label(&self) -> String {
        let mut s = String::with_capacity(self.n_sites);
        for site in 1..=self.n_sites {
            let b = site_bit(self.n_sites, site);
            s.push(match (self.x & b != 0, self.z & b != 0) {
                (false, false) => 'I',
                (true, false) => 'X',
                (false, true) => 'Z',
                (true, true) => 'Y',
            });
        }
        s
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Y sites absorb one factor of i each, so report the residual phase.
        let residual = self.phase * Self::canonical_phase(self.x, self.z).conj();
        let p = ["+", "+i", "-", "-i"][residual.quadrant() as usize];
        write!(f, "{p}{}", self.label())
    }
}

/// Complex-weighted sum of Pauli strings sharing a chain length.
///
/// Coefficients are stored relative to the Hermitian representative
/// `i^{|x&z|} X^x Z^z` of each mask pair, so a sum is Hermitian exactly when
/// every coefficient is real.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSum {
    n_sites: usize,
    terms: BTreeMap<(u64, u64), c64>,
}

impl OperatorSum {
    pub fn zero(n_sites: usize) -> Result<Self> {
        check_sites(n_sites)?;
        Ok(Self {
            n_sites,
            terms: BTreeMap::new(),
        })
    }

    pub fn identity(n_sites: usize) -> Result<Self> {
        Ok(Self::from_string(PauliString::identity(n_sites)?))
    }

    pub fn from_string(p: PauliString) -> Self {
        let mut s = Self {
            n_sites: p.n_sites,
            terms: BTreeMap::new(),
        };
        s.push_term_unchecked(c64::new(1.0, 0.0), &p);
        s
    }

    pub fn from_terms<I>(n_sites: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (c64, PauliString)>,
    {
        let mut s = Self::zero(n_sites)?;
        for (c, p) in terms {
            s.push_term(c, &p)?;
        }
        Ok(s)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms as (coefficient, Hermitian-phased string), in mask order.
    pub fn terms(&self) -> impl Iterator<Item = (c64, PauliString)> + '_ {
        self.terms.iter().map(move |(&(x, z), &c)| {
            let phase = PauliString::canonical_phase(x, z);
            (
                c,
                PauliString {
                    n_sites: self.n_sites,
                    x,
                    z,
                    phase,
                },
            )
        })
    }

    /// Coefficient of the Hermitian-phased string with these masks.
    pub fn coefficient(&self, x: u64, z: u64) -> c64 {
        self.terms.get(&(x, z)).copied().unwrap_or_default()
    }

    pub fn push_term(&mut self, coeff: c64, p: &PauliString) -> Result<()> {
        if p.n_sites != self.n_sites {
            return Err(Error::DimensionMismatch {
                left: self.n_sites,
                right: p.n_sites,
            });
        }
        self.push_term_unchecked(coeff, p);
        Ok(())
    }

    fn push_term_unchecked(&mut self, coeff: c64, p: &PauliString) {
        let rel = p.phase * PauliString::canonical_phase(p.x, p.z).conj();
        self.add_canonical(p.x, p.z, coeff * rel.to_complex());
    }

    fn add_canonical(&mut self, x: u64, z: u64, c: c64) {
        let entry = self.terms.entry((x, z)).or_default();
        *entry += c;
        if entry.norm() < MERGE_TOLERANCE {
            self.terms.remove(&(x, z));
        }
    }

    fn check_same(&self, other: &OperatorSum) -> Result<()> {
        if self.n_sites != other.n_sites {
            return Err(Error::DimensionMismatch {
                left: self.n_sites,
                right: other.n_sites,
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &OperatorSum) -> Result<OperatorSum> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (&(x, z), &c) in &other.terms {
            out.add_canonical(x, z, c);
        }
        Ok(out)
    }

    pub fn scale(&self, factor: c64) -> OperatorSum {
        let mut out = Self {
            n_sites: self.n_sites,
            terms: BTreeMap::new(),
        };
        for (&(x, z), &c) in &self.terms {
            out.add_canonical(x, z, c * factor);
        }
        out
    }

    pub fn product(&self, other: &OperatorSum) -> Result<OperatorSum> {
        self.check_same(other)?;
        let mut out = Self {
            n_sites: self.n_sites,
            terms: BTreeMap::new(),
        };
        for (ca, a) in self.terms() {
            for (cb, b) in other.terms() {
                let p = a.mul_unchecked(&b);
                out.push_term_unchecked(ca * cb, &p);
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> OperatorSum {
        let terms = self.terms.iter().map(|(&k, &c)| (k, c.conj())).collect();
        Self {
            n_sites: self.n_sites,
            terms,
        }
    }

    pub fn commutator(&self, other: &OperatorSum) -> Result<OperatorSum> {
        let ab = self.product(other)?;
        let ba = other.product(self)?;
        ab.try_add(&ba.scale(c64::new(-1.0, 0.0)))
    }

    pub fn anticommutator(&self, other: &OperatorSum) -> Result<OperatorSum> {
        self.product(other)?.try_add(&other.product(self)?)
    }

    /// Largest imaginary part among coefficients; zero for a Hermitian sum.
    pub fn hermiticity_defect(&self) -> f64 {
        self.terms.values().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= 1e-12
    }

    /// True when every dense matrix element is real.
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|(&(x, z), c)| {
            if (x & z).count_ones() % 2 == 0 {
                c.im.abs() <= MERGE_TOLERANCE
            } else {
                c.re.abs() <= MERGE_TOLERANCE
            }
        })
    }

    /// Every term flips an even number of spins, so the sum commutes with
    /// the parity string.
    pub fn conserves_parity(&self) -> bool {
        self.terms.keys().all(|&(x, _)| x.count_ones() % 2 == 0)
    }

    /// Terms as (x, z, real matrix-element sign factor) when `is_real`.
    fn real_terms(&self) -> Vec<(u64, u64, f64)> {
        self.terms
            .iter()
            .map(|(&(x, z), c)| {
                let v = c * PauliString::canonical_phase(x, z).to_complex();
                (x, z, v.re)
            })
            .collect()
    }

    fn dim_checked(&self) -> Result<usize> {
        if self.n_sites > DENSE_SITE_CAP {
            return Err(Error::SizeCap {
                n_sites: self.n_sites,
                cap: DENSE_SITE_CAP,
            });
        }
        Ok(1usize << self.n_sites)
    }

    pub fn to_dense(&self) -> Result<Mat<c64>> {
        let dim = self.dim_checked()?;
        let mut m = Mat::<c64>::zeros(dim, dim);
        for (&(x, z), &c) in &self.terms {
            let v = c * PauliString::canonical_phase(x, z).to_complex();
            for i in 0..dim as u64 {
                let s = if (z & i).count_ones() % 2 == 0 { v } else { -v };
                m[((i ^ x) as usize, i as usize)] += s;
            }
        }
        Ok(m)
    }

    /// Real dense matrix; fails unless `is_real`.
    pub fn to_dense_real(&self) -> Result<Mat<f64>> {
        if !self.is_real() {
            return Err(Error::InvalidParameter(
                "operator has complex matrix elements".into(),
            ));
        }
        let dim = self.dim_checked()?;
        let mut m = Mat::<f64>::zeros(dim, dim);
        for (x, z, v) in self.real_terms() {
            for i in 0..dim as u64 {
                let s = if (z & i).count_ones() % 2 == 0 { v } else { -v };
                m[((i ^ x) as usize, i as usize)] += s;
            }
        }
        Ok(m)
    }

    /// Matrix-free `op · v`.
    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.n_sites != self.n_sites {
            return Err(Error::DimensionMismatch {
                left: self.n_sites,
                right: v.n_sites,
            });
        }
        let mut out = vec![c64::default(); v.amplitudes.len()];
        self.apply_slice(&v.amplitudes, &mut out);
        Ok(StateVector {
            n_sites: self.n_sites,
            amplitudes: out,
        })
    }

    /// `out += op · v` on raw amplitude slices of length `2^n_sites`.
    pub fn apply_slice(&self, v: &[c64], out: &mut [c64]) {
        for (&(x, z), &c) in &self.terms {
            let val = c * PauliString::canonical_phase(x, z).to_complex();
            for (i, &a) in v.iter().enumerate() {
                let i = i as u64;
                let s = if (z & i).count_ones() % 2 == 0 {
                    val
                } else {
                    -val
                };
                out[(i ^ x) as usize] += s * a;
            }
        }
    }

    /// `⟨v|op|v⟩`.
    pub fn expectation(&self, v: &StateVector) -> Result<c64> {
        let w = self.apply(v)?;
        Ok(v.inner(&w))
    }

    /// `⟨u|op|v⟩`.
    pub fn matrix_element(&self, u: &StateVector, v: &StateVector) -> Result<c64> {
        if u.n_sites != v.n_sites {
            return Err(Error::DimensionMismatch {
                left: u.n_sites,
                right: v.n_sites,
            });
        }
        let w = self.apply(v)?;
        Ok(u.inner(&w))
    }
}

impl Add for &OperatorSum {
    type Output = OperatorSum;
    /// Panics on a chain-length mismatch; use `try_add` to handle it.
    fn add(self, rhs: &OperatorSum) -> OperatorSum {
        self.try_add(rhs)
            .expect("operator sums on different chain lengths")
    }
}

impl Add for OperatorSum {
    type Output = OperatorSum;
    fn add(self, rhs: OperatorSum) -> OperatorSum {
        &self + &rhs
    }
}

impl Sub for &OperatorSum {
    type Output = OperatorSum;
    fn sub(self, rhs: &OperatorSum) -> OperatorSum {
        self + &rhs.scale(c64::new(-1.0, 0.0))
    }
}

impl Sub for OperatorSum {
    type Output = OperatorSum;
    fn sub(self, rhs: OperatorSum) -> OperatorSum {
        &self - &rhs
    }
}

impl Neg for OperatorSum {
    type Output = OperatorSum;
    fn neg(self) -> OperatorSum {
        self.scale(c64::new(-1.0, 0.0))
    }
}

impl Mul for &OperatorSum {
    type Output = OperatorSum;
    fn mul(self, rhs: &OperatorSum) -> OperatorSum {
        self.product(rhs)
            .expect("operator sums on different chain lengths")
    }
}

impl Mul<f64> for OperatorSum {
    type Output = OperatorSum;
    fn mul(self, rhs: f64) -> OperatorSum {
        self.scale(c64::new(rhs, 0.0))
    }
}

impl Mul<c64> for OperatorSum {
    type Output = OperatorSum;
    fn mul(self, rhs: c64) -> OperatorSum {
        self.scale(rhs)
    }
}

#[derive(Serialize, Deserialize)]
struct TermRecord {
    re: f64,
    im: f64,
    x_mask_hex: String,
    z_mask_hex: String,
    phase_quadrant: u8,
}

#[derive(Serialize, Deserialize)]
struct SumRecord {
    n_sites: usize,
    terms: Vec<TermRecord>,
}

impl Serialize for OperatorSum {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let terms = self
            .terms()
            .map(|(c, p)| TermRecord {
                re: c.re,
                im: c.im,
                x_mask_hex: format!("{:x}", p.x),
                z_mask_hex: format!("{:x}", p.z),
                phase_quadrant: p.phase.quadrant(),
            })
            .collect();
        SumRecord {
            n_sites: self.n_sites,
            terms,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for OperatorSum {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = SumRecord::deserialize(deserializer)?;
        let mut out = OperatorSum::zero(rec.n_sites).map_err(D::Error::custom)?;
        for t in rec.terms {
            let parse = |s: &str| {
                u64::from_str_radix(s.trim_start_matches("0x"), 16).map_err(D::Error::custom)
            };
            let p = PauliString::from_masks(
                rec.n_sites,
                parse(&t.x_mask_hex)?,
                parse(&t.z_mask_hex)?,
                Phase::from_quadrant(t.phase_quadrant as u32),
            )
            .map_err(D::Error::custom)?;
            out.push_term_unchecked(c64::new(t.re, t.im), &p);
        }
        Ok(out)
    }
}

/// Amplitudes in the computational z basis, length `2^n_sites`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub n_sites: usize,
    pub amplitudes: Vec<c64>,
}

impl StateVector {
    pub fn new(n_sites: usize, amplitudes: Vec<c64>) -> Result<Self> {
        check_sites(n_sites)?;
        if n_sites >= usize::BITS as usize || amplitudes.len() != 1usize << n_sites {
            return Err(Error::LengthMismatch {
                expected: 1usize.checked_shl(n_sites as u32).unwrap_or(0),
                got: amplitudes.len(),
            });
        }
        Ok(Self {
            n_sites,
            amplitudes,
        })
    }

    pub fn basis(n_sites: usize, index: usize) -> Result<Self> {
        check_sites(n_sites)?;
        let dim = 1usize.checked_shl(n_sites as u32).unwrap_or(0);
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} >= {dim}"
            )));
        }
        let mut a = vec![c64::default(); dim];
        a[index] = c64::new(1.0, 0.0);
        Self::new(n_sites, a)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized { norm: n });
        }
        self.amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(self)
    }

    /// Errors unless the norm is within `tol` of one.
    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > tol {
            return Err(Error::NotNormalized { norm: n });
        }
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> c64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scaled(&self, c: c64) -> StateVector {
        let amplitudes = self.amplitudes.iter().map(|a| a * c).collect();
        StateVector {
            n_sites: self.n_sites,
            amplitudes,
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: c64, other: &StateVector, b: c64) -> StateVector {
        let amplitudes = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(u, v)| a * u + b * v)
            .collect();
        StateVector {
            n_sites: self.n_sites,
            amplitudes,
        }
    }
}

/// Parity `(-1)^{N + popcount(i)}` of basis state `i`.
#[inline]
pub fn basis_parity(n_sites: usize, index: u64) -> i8 {
    if (n_sites as u32 + index.count_ones()) % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Spectral norm of `[a, b]`.
pub fn commutator_norm(a: &OperatorSum, b: &OperatorSum) -> Result<f64> {
    let c = a.commutator(b)?;
    if c.is_empty() {
        return Ok(0.0);
    }
    operator_norm(&c)
}

/// Spectral norm of a Pauli sum. Dense up to 2^10 states, a Lanczos estimate
/// on `C†C` above that.
pub fn operator_norm(c: &OperatorSum) -> Result<f64> {
    c.dim_checked()?;
    if c.n_sites <= 10 {
        let sv = if c.is_real() {
            c.to_dense_real()?
                .singular_values()
                .map_err(|e| Error::Numerical(format!("{e:?}")))?
        } else {
            c.to_dense()?
                .singular_values()
                .map_err(|e| Error::Numerical(format!("{e:?}")))?
        };
        return Ok(sv.into_iter().fold(0.0, f64::max));
    }
    lanczos_norm(c)
}

fn lanczos_norm(c: &OperatorSum) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let dim = 1usize << c.n_sites;
    let cd = c.adjoint();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q: Vec<c64> = (0..dim)
        .map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let n0 = q.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    q.iter_mut().for_each(|a| *a /= n0);

    let steps = 80.min(dim);
    let mut basis: Vec<Vec<c64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut tmp = vec![c64::default(); dim];
    for _ in 0..steps {
        tmp.iter_mut().for_each(|a| *a = c64::default());
        c.apply_slice(&q, &mut tmp);
        let mut w = vec![c64::default(); dim];
        cd.apply_slice(&tmp, &mut w);
        let a: f64 = q.iter().zip(&w).map(|(u, v)| (u.conj() * v).re).sum();
        alpha.push(a);
        basis.push(q.clone());
        // Full reorthogonalization, twice for stability.
        for _ in 0..2 {
            for b in &basis {
                let ov: c64 = b.iter().zip(&w).map(|(u, v)| u.conj() * v).sum();
                w.iter_mut().zip(b).for_each(|(x, u)| *x -= ov * u);
            }
        }
        let nb = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if nb < 1e-12 * a.abs().max(1.0) {
            break;
        }
        beta.push(nb);
        q = w.into_iter().map(|x| x / nb).collect();
    }
    let k = alpha.len();
    let t = Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j || j + 1 == i {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    let ev = t
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("{e:?}")))?;
    Ok(ev.into_iter().fold(0.0, f64::max).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn kron(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
        let (ra, ca) = (a.nrows(), a.ncols());
        let (rb, cb) = (b.nrows(), b.ncols());
        Mat::from_fn(ra * rb, ca * cb, |i, j| {
            a[(i / rb, j / cb)] * b[(i % rb, j % cb)]
        })
    }

    fn sigma(axis: Option<Axis>) -> Mat<c64> {
        let o = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        let e = match axis {
            None => [one, o, o, one],
            Some(Axis::X) => [o, one, one, o],
            Some(Axis::Y) => [o, -i, i, o],
            Some(Axis::Z) => [one, o, o, -one],
        };
        Mat::from_fn(2, 2, |r, k| e[2 * r + k])
    }

    /// Kronecker-product reference, site 1 leftmost.
    fn reference(p: &PauliString) -> Mat<c64> {
        let mut m = Mat::from_fn(1, 1, |_, _| p.phase.to_complex());
        for site in 1..=p.n_sites {
            let b = site_bit(p.n_sites, site);
            let f = match (p.x & b != 0, p.z & b != 0) {
                (false, false) => sigma(None),
                (true, false) => sigma(Some(Axis::X)),
                (false, true) => sigma(Some(Axis::Z)),
                (true, true) => {
                    // X·Z = -i σʸ
                    let mut y = sigma(Some(Axis::Y));
                    for r in 0..2 {
                        for k in 0..2 {
                            y[(r, k)] *= c(0.0, -1.0);
                        }
                    }
                    y
                }
            };
            m = kron(&m, &f);
        }
        m
    }

    fn max_diff(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
        let mut d = 0.0f64;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                d = d.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        d
    }

    fn matmul(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
        a * b
    }

    #[test]
    fn single_site_matrices() {
        let x1 = PauliString::single_site(2, 1, Axis::X).unwrap();
        let want = kron(&sigma(Some(Axis::X)), &sigma(None));
        assert!(max_diff(&x1.to_dense().unwrap(), &want) < 1e-15);

        let y2 = PauliString::single_site(2, 2, Axis::Y).unwrap();
        let m = y2.to_dense().unwrap();
        assert!(max_diff(&m, &kron(&sigma(None), &sigma(Some(Axis::Y)))) < 1e-15);
        assert_eq!(m[(0, 1)], c(0.0, -1.0));
        assert_eq!(m[(1, 0)], c(0.0, 1.0));

        assert_eq!(
            PauliString::single_site(3, 4, Axis::Z),
            Err(Error::SiteOutOfRange {
                site: 4,
                n_sites: 3
            })
        );
    }

    #[test]
    fn xy_is_iz() {
        let x = PauliString::single_site(1, 1, Axis::X).unwrap();
        let y = PauliString::single_site(1, 1, Axis::Y).unwrap();
        let p = x.multiply(&y).unwrap();
        assert_eq!((p.x, p.z), (0, 1));
        assert_eq!(p.to_string(), "+iZ");
    }

    #[test]
    fn parity_squares_to_identity() {
        let n = 5;
        let p = PauliString::from_masks(n, 0, full_mask(n), Phase::MINUS_ONE).unwrap();
        let pp = p.multiply(&p).unwrap();
        assert!(pp.is_identity());
        assert_eq!(pp.phase, Phase::ONE);
    }

    #[test]
    fn multiply_rejects_mismatch() {
        let a = PauliString::identity(2).unwrap();
        let b = PauliString::identity(3).unwrap();
        assert!(matches!(
            a.multiply(&b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn merge_drops_cancelled_terms() {
        let x = PauliString::single_site(3, 2, Axis::X).unwrap();
        let mut s = OperatorSum::zero(3).unwrap();
        s.push_term(c(0.5, 0.0), &x).unwrap();
        s.push_term(c(-0.5, 0.0), &x).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn identity_apply_is_noop() {
        let id = OperatorSum::identity(4).unwrap();
        let v = StateVector::new(4, (0..16).map(|k| c(k as f64, -(k as f64))).collect()).unwrap();
        assert_eq!(id.apply(&v).unwrap(), v);
    }

    #[test]
    fn parity_of_all_up_state() {
        assert_eq!(basis_parity(10, 0), 1);
        assert_eq!(basis_parity(3, 0), -1);
        let n = 10;
        let p = OperatorSum::from_string(
            PauliString::from_masks(n, 0, full_mask(n), Phase::ONE).unwrap(),
        );
        let v = StateVector::basis(n, 0).unwrap();
        assert_eq!(p.apply(&v).unwrap(), v);
    }

    #[test]
    fn dense_cap_enforced() {
        let s = OperatorSum::identity(15).unwrap();
        assert_eq!(
            s.to_dense().unwrap_err(),
            Error::SizeCap {
                n_sites: 15,
                cap: 14
            }
        );
    }

    #[test]
    fn json_round_trip_and_wire_format() {
        let y = PauliString::single_site(3, 2, Axis::Y).unwrap();
        let x = PauliString::single_site(3, 1, Axis::X).unwrap();
        let s = OperatorSum::from_terms(3, [(c(0.25, 0.0), y), (c(0.0, -1.5), x)]).unwrap();
        let js = serde_json::to_value(&s).unwrap();
        assert_eq!(js["n_sites"], 3);
        let t = &js["terms"][0];
        assert_eq!(t["x_mask_hex"], "2");
        assert_eq!(t["z_mask_hex"], "2");
        assert_eq!(t["phase_quadrant"], 1);
        let back: OperatorSum = serde_json::from_value(js).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn commutator_norm_of_self_is_zero() {
        let x = OperatorSum::from_string(PauliString::single_site(2, 1, Axis::X).unwrap());
        assert_eq!(commutator_norm(&x, &x).unwrap(), 0.0);
        let z = OperatorSum::from_string(PauliString::single_site(2, 1, Axis::Z).unwrap());
        // [X, Z] = -2iY, norm 2
        assert!((commutator_norm(&x, &z).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let n = 8;
        let mut s = OperatorSum::zero(n).unwrap();
        for site in 1..n {
            let a = PauliString::single_site(n, site, Axis::X).unwrap();
            let b = PauliString::single_site(n, site + 1, Axis::Y).unwrap();
            s.push_term(c(0.3 + site as f64 * 0.1, 0.2), &a.multiply(&b).unwrap())
                .unwrap();
            s.push_term(
                c(0.7, 0.0),
                &PauliString::single_site(n, site, Axis::Z).unwrap(),
            )
            .unwrap();
        }
        let dense = operator_norm(&s).unwrap();
        let lz = lanczos_norm(&s).unwrap();
        assert!((dense - lz).abs() < 1e-8 * dense, "{dense} vs {lz}");
    }

    fn arb_string(n: usize) -> impl Strategy<Value = PauliString> {
        let m = full_mask(n);
        (0..=m, 0..=m, 0u32..4).prop_map(move |(x, z, k)| PauliString {
            n_sites: n,
            x,
            z,
            phase: Phase::from_quadrant(k),
        })
    }

    proptest! {
        #[test]
        fn dense_product_matches_reference(a in arb_string(4), b in arb_string(4)) {
            let ab = a.multiply(&b).unwrap();
            prop_assert!(max_diff(&reference(&a), &a.to_dense().unwrap()) < 1e-15);
            let want = matmul(&reference(&a), &reference(&b));
            prop_assert!(max_diff(&ab.to_dense().unwrap(), &want) < 1e-14);
        }

        #[test]
        fn product_is_associative(a in arb_string(5), b in arb_string(5), c in arb_string(5)) {
            let l = a.multiply(&b).unwrap().multiply(&c).unwrap();
            let r = a.multiply(&b.multiply(&c).unwrap()).unwrap();
            prop_assert_eq!(l, r);
        }

        #[test]
        fn square_is_plus_minus_identity(a in arb_string(5)) {
            let sq = a.multiply(&a).unwrap();
            prop_assert!(sq.is_identity());
            let herm = a.is_hermitian();
            prop_assert_eq!(sq.phase == Phase::ONE, herm);
            prop_assert_eq!(a.multiply(&a.adjoint()).unwrap().phase, Phase::ONE);
        }

        #[test]
        fn commutation_matches_dense(a in arb_string(3), b in arb_string(3)) {
            let ab = a.multiply(&b).unwrap();
            let ba = b.multiply(&a).unwrap();
            prop_assert_eq!(a.commutes_with(&b), ab == ba);
        }

        #[test]
        fn apply_matches_dense(
            coeffs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6),
            strings in proptest::collection::vec(arb_string(6), 6),
            amps in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64),
        ) {
            let op = OperatorSum::from_terms(
                6,
                coeffs.iter().zip(&strings).map(|(&(re, im), p)| (c(re, im), *p)),
            ).unwrap();
            let v = StateVector::new(6, amps.iter().map(|&(re, im)| c(re, im)).collect()).unwrap();
            let w = op.apply(&v).unwrap();
            let m = op.to_dense().unwrap();
            for i in 0..64 {
                let mut acc = c64::default();
                for j in 0..64 {
                    acc += m[(i, j)] * v.amplitudes[j];
                }
                prop_assert!((acc - w.amplitudes[i]).norm() < 1e-12);
            }
        }

        #[test]
        fn real_coefficients_give_hermitian_dense(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 5),
            strings in proptest::collection::vec(arb_string(4), 5),
        ) {
            let op = OperatorSum::from_terms(
                4,
                coeffs.iter().zip(&strings).map(|(&r, p)| {
                    // Hermitian-phase each string first.
                    let h = PauliString { phase: PauliString::canonical_phase(p.x, p.z), ..*p };
                    (c(r, 0.0), h)
                }),
            ).unwrap();
            prop_assert!(op.is_hermitian());
            let m = op.to_dense().unwrap();
            let mut d = 0.0f64;
            for i in 0..16 {
                for j in 0..16 {
                    d = d.max((m[(i, j)] - m[(j, i)].conj()).norm());
                }
            }
            prop_assert!(d < 1e-13);
            if op.is_real() {
                let r = op.to_dense_real().unwrap();
                for i in 0..16 {
                    for j in 0..16 {
                        prop_assert!((r[(i, j)] - m[(i, j)].re).abs() < 1e-15);
                        prop_assert!(m[(i, j)].im.abs() < 1e-15);
                    }
                }
            }
        }

        #[test]
        fn adjoint_matches_dense(a in arb_string(3)) {
            let m = a.to_dense().unwrap();
            let md = a.adjoint().to_dense().unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    prop_assert!((md[(i, j)] - m[(j, i)].conj()).norm() < 1e-15);
                }
            }
        }
    }
}
