//! Time evolution through cached eigendecompositions, Loschmidt echoes and
//! gates acting inside a degenerate pair.

use std::f64::consts::PI;

use faer::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{
    build_d, build_h0, build_h_prime, build_pulse, KappaVector, ModelParams, PulseSchedule,
};
use crate::pauli::{Axis, OperatorSum, PauliString, StateVector};
use crate::spectral::{
    degeneracy_tolerance, diagonalize, gauge_pair, sector_diagonalize_with, PseudospinBlock,
    SpectrumResult,
};

/// Overshoot above one tolerated before an echo value is clipped.
pub const ECHO_OVERSHOOT: f64 = 1e-9;
const NORM_TOLERANCE: f64 = 1e-10;

/// Strictly increasing, nonnegative sample times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidParameter("empty time grid".into()));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidParameter(
                "time grid must be finite and nonnegative".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "time grid must be strictly increasing".into(),
            ));
        }
        Ok(Self { times })
    }

    /// `points` equally spaced samples over `[0, t_max]`, both ends included.
    pub fn uniform(t_max: f64, points: usize) -> Result<Self> {
        if points < 2 || t_max.is_nan() || t_max <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "uniform grid needs t_max > 0 and >= 2 points, got {t_max}, {points}"
            )));
        }
        let step = t_max / (points - 1) as f64;
        Self::new(
            (0..points)
                .map(|k| {
                    if k + 1 == points {
                        t_max
                    } else {
                        k as f64 * step
                    }
                })
                .collect(),
        )
    }

    /// 1000 points over three periods `π/√(κx²+κy²)`.
    pub fn default_for(kappa_x: f64, kappa_y: f64) -> Result<Self> {
        let w = (kappa_x * kappa_x + kappa_y * kappa_y).sqrt();
        if w == 0.0 {
            return Err(Error::InvalidParameter("κx and κy both zero".into()));
        }
        Self::uniform(3.0 * PI / w, 1000)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_step(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl EchoSeries {
    /// Clips into `[0, 1]` after checking that nothing leaves
    /// `[−1e−9, 1 + 1e−9]`.
    pub fn from_raw(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: times.len(),
                got: values.len(),
            });
        }
        if let Some(v) = values
            .iter()
            .find(|v| !v.is_finite() || **v > 1.0 + ECHO_OVERSHOOT || **v < -ECHO_OVERSHOOT)
        {
            return Err(Error::Numerical(format!("echo value {v} outside [0, 1]")));
        }
        let values = values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Interior local minima, refined by a parabola through the three
    /// neighbouring samples: `(time, value)`.
    pub fn local_minima(&self) -> Vec<(f64, f64)> {
        let (t, v) = (&self.times, &self.values);
        let mut out = Vec::new();
        for k in 1..v.len().saturating_sub(1) {
            if v[k] < v[k - 1] && v[k] <= v[k + 1] {
                let (h0, h1) = (t[k] - t[k - 1], t[k + 1] - t[k]);
                // Non-uniform three-point parabola.
                let d1 = (v[k] - v[k - 1]) / h0;
                let d2 = (v[k + 1] - v[k]) / h1;
                let a = (d2 - d1) / (h0 + h1);
                if a > 0.0 {
                    let slope_mid = d1 + a * h0;
                    let dt = -slope_mid / (2.0 * a);
                    let tm = t[k] + dt;
                    let vm = v[k] + slope_mid * dt + a * dt * dt;
                    out.push((tm, vm));
                } else {
                    out.push((t[k], v[k]));
                }
            }
        }
        out
    }

    /// Mean spacing of local minima deeper than the midpoint between the
    /// global minimum and maximum.
    pub fn oscillation_period(&self) -> Option<f64> {
        let mid = 0.5 * (self.min() + self.max());
        let minima: Vec<f64> = self
            .local_minima()
            .into_iter()
            .filter(|&(_, v)| v < mid)
            .map(|(t, _)| t)
            .collect();
        if minima.len() < 2 {
            return None;
        }
        Some((minima[minima.len() - 1] - minima[0]) / (minima.len() - 1) as f64)
    }
}

/// Cached eigendecomposition of a static Hamiltonian.
#[derive(Debug, Clone)]
pub struct EvolutionPlan {
    spectrum: SpectrumResult,
}

impl EvolutionPlan {
    pub fn new(h: &OperatorSum) -> Result<Self> {
        Ok(Self {
            spectrum: diagonalize(h)?,
        })
    }

    pub fn from_spectrum(spectrum: SpectrumResult) -> Self {
        Self { spectrum }
    }

    pub fn spectrum(&self) -> &SpectrumResult {
        &self.spectrum
    }

    pub fn n_sites(&self) -> usize {
        self.spectrum.n_sites
    }

    fn check(&self, state: &StateVector) -> Result<()> {
        if state.n_sites != self.n_sites() {
            return Err(Error::DimensionMismatch {
                left: self.n_sites(),
                right: state.n_sites,
            });
        }
        Ok(())
    }

    /// `⟨k|ψ⟩` in ascending energy order.
    pub fn coefficients(&self, state: &StateVector) -> Result<Vec<c64>> {
        self.check(state)?;
        Ok(self.spectrum.basis.project(&state.amplitudes))
    }

    pub fn evolve_coefficients(&self, coeffs: &[c64], t: f64) -> StateVector {
        let phased: Vec<c64> = coeffs
            .iter()
            .zip(&self.spectrum.eigenvalues)
            .map(|(c, &e)| c * c64::cis(-e * t))
            .collect();
        StateVector {
            n_sites: self.n_sites(),
            amplitudes: self.spectrum.basis.combine(&phased),
        }
    }

    /// `e^{−iHt} ψ`.
    pub fn evolve(&self, state: &StateVector, t: f64) -> Result<StateVector> {
        if !t.is_finite() {
            return Err(Error::InvalidParameter(format!("time {t}")));
        }
        let c = self.coefficients(state)?;
        Ok(self.evolve_coefficients(&c, t))
    }

    /// `⟨bra| e^{−iH(t − t0)} |ket⟩` for every `t` in `times`, given
    /// `bra_c = ⟨k|bra⟩` and `ket_c = ⟨k|ket⟩`.
    pub fn transition_amplitudes(
        &self,
        bra_c: &[c64],
        ket_c: &[c64],
        times: &[f64],
        t0: f64,
    ) -> Vec<c64> {
        let w: Vec<c64> = bra_c.iter().zip(ket_c).map(|(b, k)| b.conj() * k).collect();
        let e = &self.spectrum.eigenvalues;
        times
            .par_iter()
            .map(|&t| {
                let tau = t - t0;
                w.iter()
                    .zip(e)
                    .map(|(wk, &ek)| wk * c64::cis(-ek * tau))
                    .sum()
            })
            .collect()
    }

    /// `⟨ψ|e^{−iHt}|ψ⟩` over a grid.
    pub fn return_amplitudes(&self, state: &StateVector, times: &[f64]) -> Result<Vec<c64>> {
        let c = self.coefficients(state)?;
        Ok(self.transition_amplitudes(&c, &c, times, 0.0))
    }
}

pub fn evolve(state: &StateVector, h: &OperatorSum, t: f64) -> Result<StateVector> {
    EvolutionPlan::new(h)?.evolve(state, t)
}

/// Time-ordered product of `base + segment` propagators.
pub fn evolve_schedule(
    state: &StateVector,
    base: &OperatorSum,
    schedule: &PulseSchedule,
) -> Result<StateVector> {
    let mut psi = state.clone();
    for seg in schedule.segments() {
        let h = base.try_add(&seg.hamiltonian)?;
        psi = EvolutionPlan::new(&h)?.evolve(&psi, seg.duration)?;
    }
    Ok(psi)
}

/// Postquench dynamics: a static Hamiltonian, or a schedule on top of a base
/// Hamiltonian that stays on after the schedule ends.
#[derive(Debug, Clone, Copy)]
pub enum Quench<'a> {
    Static(&'a OperatorSum),
    Scheduled {
        base: &'a OperatorSum,
        schedule: &'a PulseSchedule,
    },
}

/// True when `‖Hψ − ⟨H⟩ψ‖ ≤ tol`.
pub fn is_eigenstate(h: &OperatorSum, state: &StateVector, tol: f64) -> Result<bool> {
    let hv = h.apply(state)?;
    let e = state.inner(&hv);
    let r: f64 = hv
        .amplitudes
        .iter()
        .zip(&state.amplitudes)
        .map(|(a, b)| (a - b * e).norm_sqr())
        .sum();
    Ok(r.sqrt() <= tol)
}

/// `⟨Φ0|U_pos(t)|Φ0⟩` over the grid.
fn pos_amplitudes(state0: &StateVector, quench: Quench<'_>, times: &[f64]) -> Result<Vec<c64>> {
    let (base, schedule) = match quench {
        Quench::Static(h) => return EvolutionPlan::new(h)?.return_amplitudes(state0, times),
        Quench::Scheduled { base, schedule } => (base, schedule),
    };
    let mut out = vec![c64::default(); times.len()];
    let mut start = 0.0;
    let mut psi = state0.clone();
    let last_time = times.last().copied().unwrap_or(0.0);
    let mut segments: Vec<(OperatorSum, f64)> = schedule
        .segments()
        .iter()
        .map(|s| Ok((base.try_add(&s.hamiltonian)?, s.duration)))
        .collect::<Result<_>>()?;
    segments.push((base.clone(), f64::INFINITY));
    for (h, duration) in segments {
        if start > last_time {
            break;
        }
        let end = start + duration;
        let idx: Vec<usize> = (0..times.len())
            .filter(|&k| times[k] >= start && times[k] < end)
            .collect();
        let plan = EvolutionPlan::new(&h)?;
        let bra = plan.coefficients(state0)?;
        let ket = plan.coefficients(&psi)?;
        let ts: Vec<f64> = idx.iter().map(|&k| times[k]).collect();
        for (&k, a) in idx
            .iter()
            .zip(plan.transition_amplitudes(&bra, &ket, &ts, start))
        {
            out[k] = a;
        }
        if duration.is_finite() {
            psi = plan.evolve_coefficients(&ket, duration);
        }
        start = end;
    }
    Ok(out)
}

/// Loschmidt echo `|⟨Φ0|e^{iH_pos t} e^{−iH_pre t}|Φ0⟩|²`.
///
/// When `state0` is an eigenstate of `h_pre` only the postquench spectrum is
/// needed.
pub fn loschmidt_echo(
    state0: &StateVector,
    h_pre: &OperatorSum,
    quench: Quench<'_>,
    grid: &TimeGrid,
) -> Result<EchoSeries> {
    state0.check_normalized(NORM_TOLERANCE)?;
    let times = grid.times();
    if is_eigenstate(h_pre, state0, 1e-8)? {
        let amps = pos_amplitudes(state0, quench, times)?;
        return EchoSeries::from_raw(times.to_vec(), amps.iter().map(|a| a.norm_sqr()).collect());
    }
    let pre = EvolutionPlan::new(h_pre)?;
    let c_pre = pre.coefficients(state0)?;
    let values = match quench {
        Quench::Static(h) => {
            let pos = EvolutionPlan::new(h)?;
            let c_pos = pos.coefficients(state0)?;
            times
                .iter()
                .map(|&t| {
                    let a = pre.evolve_coefficients(&c_pre, t);
                    let b = pos.evolve_coefficients(&c_pos, t);
                    b.inner(&a).norm_sqr()
                })
                .collect()
        }
        Quench::Scheduled { base, schedule } => times
            .iter()
            .map(|&t| {
                let a = pre.evolve_coefficients(&c_pre, t);
                let b = evolve_timeline(state0, base, schedule, t)?;
                Ok(b.inner(&a).norm_sqr())
            })
            .collect::<Result<Vec<f64>>>()?,
    };
    EchoSeries::from_raw(times.to_vec(), values)
}

fn evolve_timeline(
    state: &StateVector,
    base: &OperatorSum,
    schedule: &PulseSchedule,
    t: f64,
) -> Result<StateVector> {
    let mut psi = state.clone();
    let mut left = t;
    for seg in schedule.segments() {
        if left <= 0.0 {
            return Ok(psi);
        }
        let dt = seg.duration.min(left);
        psi = EvolutionPlan::new(&base.try_add(&seg.hamiltonian)?)?.evolve(&psi, dt)?;
        left -= dt;
    }
    if left > 0.0 {
        psi = EvolutionPlan::new(base)?.evolve(&psi, left)?;
    }
    Ok(psi)
}

/// `(2κx² + κy² + κy² cos(2√(κx²+κy²) t)) / (2(κx²+κy²))`.
pub fn le_closed_form(kappa_x: f64, kappa_y: f64, t: f64) -> Result<f64> {
    let w2 = kappa_x * kappa_x + kappa_y * kappa_y;
    if w2 == 0.0 {
        return Err(Error::InvalidParameter("κx and κy both zero".into()));
    }
    let ky2 = kappa_y * kappa_y;
    Ok((2.0 * kappa_x * kappa_x + ky2 + ky2 * (2.0 * w2.sqrt() * t).cos()) / (2.0 * w2))
}

/// Long-time mean of [`le_closed_form`].
pub fn average_le_closed_form(kappa_x: f64, kappa_y: f64) -> Result<f64> {
    let w2 = kappa_x * kappa_x + kappa_y * kappa_y;
    if w2 == 0.0 {
        return Err(Error::InvalidParameter("κx and κy both zero".into()));
    }
    Ok((2.0 * kappa_x * kappa_x + kappa_y * kappa_y) / (2.0 * w2))
}

/// Trapezoidal `(1/T) ∫₀ᵀ L dt`. With a known `period` the grid step must
/// not exceed `period/50`.
pub fn average_le(series: &EchoSeries, t_total: f64, period: Option<f64>) -> Result<f64> {
    if t_total.is_nan() || t_total <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "T must be positive, got {t_total}"
        )));
    }
    let t = &series.times;
    let v = &series.values;
    if t.len() < 2 || t[0].abs() > 1e-12 || (t[t.len() - 1] - t_total).abs() > 1e-9 * t_total {
        return Err(Error::InvalidParameter(format!(
            "grid must span [0, {t_total}]"
        )));
    }
    let step = t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if let Some(p) = period {
        if step > p / 50.0 {
            return Err(Error::InsufficientResolution {
                step,
                required: p / 50.0,
            });
        }
    }
    let integral: f64 = t
        .windows(2)
        .zip(v.windows(2))
        .map(|(tw, vw)| 0.5 * (tw[1] - tw[0]) * (vw[0] + vw[1]))
        .sum();
    Ok(integral / t_total)
}

/// A 2×2 complex matrix, row-major.
pub type Unitary2 = [[c64; 2]; 2];

pub fn identity2() -> Unitary2 {
    let (o, z) = (c64::new(1.0, 0.0), c64::default());
    [[o, z], [z, o]]
}

pub fn hadamard() -> Unitary2 {
    let s = c64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[s, s], [s, -s]]
}

pub fn phase_gate(angle: f64) -> Unitary2 {
    [
        [c64::new(1.0, 0.0), c64::default()],
        [c64::default(), c64::cis(angle)],
    ]
}

/// `tr(a† b)`.
pub fn trace_inner(a: &Unitary2, b: &Unitary2) -> c64 {
    let mut s = c64::default();
    for i in 0..2 {
        for j in 0..2 {
            s += a[i][j].conj() * b[i][j];
        }
    }
    s
}

/// `u` times the global phase that makes `tr(target† u)` real positive.
pub fn phase_aligned(u: &Unitary2, target: &Unitary2) -> Unitary2 {
    let tr = trace_inner(target, u);
    let ph = if tr.norm() > 0.0 {
        tr.conj() / tr.norm()
    } else {
        c64::new(1.0, 0.0)
    };
    [[u[0][0] * ph, u[0][1] * ph], [u[1][0] * ph, u[1][1] * ph]]
}

/// `e^{−iε t}[cos(|B|t) − i (B·σ/|B|) sin(|B|t)]`.
pub fn subspace_gate(block: &PseudospinBlock, t: f64) -> Result<Unitary2> {
    let r = block.b.norm();
    if r == 0.0 {
        return Err(Error::InvalidParameter(
            "pseudospin field |B| is zero".into(),
        ));
    }
    let (bx, by, bz) = (block.b.x / r, block.b.y / r, block.b.z / r);
    let (c, s) = ((r * t).cos(), (r * t).sin());
    let g = c64::cis(-block.epsilon_n * t);
    let mi = c64::new(0.0, -s);
    Ok([
        [g * (c + mi * bz), g * mi * c64::new(bx, -by)],
        [g * mi * c64::new(bx, by), g * (c - mi * bz)],
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    /// `|tr(U_target† U)|/2` on the pair subspace.
    pub fidelity: f64,
    /// Largest weight lost from the pair by one basis state.
    pub leakage: f64,
}

/// Evolve the gauged pair `n` of `H₀` under `H₀ + H′(κ)` for `t` and compare
/// the projected 2×2 propagator with `target`.
pub fn gate_fidelity(
    target: &Unitary2,
    params: &ModelParams,
    kappa: &KappaVector,
    n: usize,
    t: f64,
) -> Result<GateReport> {
    let h0 = build_h0(params)?;
    let spec = sector_diagonalize_with(&h0, degeneracy_tolerance(params))?;
    let d = build_d(params)?;
    let pair = gauge_pair(&spec, n, &(d.adjoint() + d))?;
    let h = h0 + build_h_prime(params, kappa)?;
    let plan = EvolutionPlan::new(&h)?;
    let basis = [&pair.plus, &pair.minus];
    let mut u = identity2();
    let mut leakage = 0.0f64;
    for b in 0..2 {
        let psi = plan.evolve(basis[b], t)?;
        let mut kept = 0.0;
        for a in 0..2 {
            u[a][b] = basis[a].inner(&psi);
            kept += u[a][b].norm_sqr();
        }
        leakage = leakage.max(1.0 - kept);
    }
    Ok(GateReport {
        fidelity: trace_inner(target, &u).norm() / 2.0,
        leakage,
    })
}

/// Ground state of `H₀ + κx σˣ_1` quenched into `H₀ + H_p(t)` (then `H₀`).
pub fn pulse_string_check(
    params: &ModelParams,
    kappa_x: f64,
    delta: f64,
    grid: &TimeGrid,
) -> Result<EchoSeries> {
    let n = params.n_sites;
    let h0 = build_h0(params)?;
    let x1 = OperatorSum::from_string(PauliString::single_site(n, 1, Axis::X)?);
    let h_pre = h0.clone() + x1.scale(c64::new(kappa_x, 0.0));
    let spec = diagonalize(&h_pre)?;
    let phi0 = spec.eigenvector(0);
    let schedule = build_pulse(n, delta)?;
    loschmidt_echo(
        &phi0,
        &h_pre,
        Quench::Scheduled {
            base: &h0,
            schedule: &schedule,
        },
        grid,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{build_h_simplified, build_parity};
    use crate::spectral::{pseudospin_block, sector_diagonalize};
    use faer::Mat;

    fn close(a: &Unitary2, b: &Unitary2, tol: f64) -> bool {
        (0..2).all(|i| (0..2).all(|j| (a[i][j] - b[i][j]).norm() < tol))
    }

    fn random_state(n: usize, seed: u64) -> StateVector {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = (0..1 << n)
            .map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        StateVector::new(n, a).unwrap().normalized().unwrap()
    }

    /// Scaling-and-squaring Taylor exponential of `−iHt`.
    fn expm_oracle(h: &OperatorSum, t: f64) -> Mat<c64> {
        let m = h.to_dense().unwrap();
        let dim = m.nrows();
        let norm: f64 = (0..dim)
            .map(|j| (0..dim).map(|i| m[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let s = ((norm * t.abs()).log2().ceil().max(0.0) as i32) + 4;
        let scale = c64::new(0.0, -t / 2f64.powi(s));
        let a = Mat::<c64>::from_fn(dim, dim, |i, j| m[(i, j)] * scale);
        let mut term = Mat::<c64>::identity(dim, dim);
        let mut sum = Mat::<c64>::identity(dim, dim);
        for k in 1..30 {
            term = &term * &a;
            let f = c64::new(1.0 / k as f64, 0.0);
            term = Mat::from_fn(dim, dim, |i, j| term[(i, j)] * f);
            sum = &sum + &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn evolution_matches_taylor_oracle() {
        let p = ModelParams::new(6, 0.45).unwrap();
        let h = build_h0(&p).unwrap()
            + build_h_simplified(6, &KappaVector::new(0.3, -0.2, 0.1)).unwrap();
        let psi = random_state(6, 3);
        let t = 2.7;
        let got = evolve(&psi, &h, t).unwrap();
        let u = expm_oracle(&h, t);
        for i in 0..64 {
            let want: c64 = (0..64).map(|j| u[(i, j)] * psi.amplitudes[j]).sum();
            assert!((want - got.amplitudes[i]).norm() < 1e-9);
        }
    }

    #[test]
    fn evolution_identity_composition_and_norm() {
        let p = ModelParams::new(6, 0.7).unwrap();
        let h = build_h0(&p).unwrap()
            + build_h_simplified(6, &KappaVector::new(0.1, 0.2, 0.0)).unwrap();
        let plan = EvolutionPlan::new(&h).unwrap();
        let psi = random_state(6, 11);
        let same = plan.evolve(&psi, 0.0).unwrap();
        assert!(same
            .amplitudes
            .iter()
            .zip(&psi.amplitudes)
            .all(|(a, b)| (a - b).norm() < 1e-12));
        let ab = plan.evolve(&plan.evolve(&psi, 1.3).unwrap(), 2.1).unwrap();
        let direct = plan.evolve(&psi, 3.4).unwrap();
        assert!(ab
            .amplitudes
            .iter()
            .zip(&direct.amplitudes)
            .all(|(a, b)| (a - b).norm() < 1e-10));
        let c = plan.coefficients(&psi).unwrap();
        for k in 0..10_000 {
            let phi = plan.evolve_coefficients(&c, k as f64 * 0.37);
            assert!((phi.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn parity_term_flips_relative_phase() {
        let n = 4;
        let kz = 0.3;
        let p = OperatorSum::from_string(build_parity(n).unwrap());
        let h = p.scale(c64::new(kz, 0.0));
        // |0000> is even, |0001> is odd.
        let mut a = vec![c64::default(); 16];
        a[0] = c64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        a[1] = a[0];
        let psi = StateVector::new(n, a).unwrap();
        let out = evolve(&psi, &h, PI / (2.0 * kz)).unwrap();
        let ratio = out.amplitudes[1] / out.amplitudes[0];
        assert!((ratio - c64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn empty_schedule_is_identity_and_pulse_alone_is_string_action() {
        let n = 5;
        let psi = random_state(n, 1);
        let zero = OperatorSum::zero(n).unwrap();
        let out = evolve_schedule(&psi, &zero, &PulseSchedule::default()).unwrap();
        assert_eq!(out, psi);

        let sched = build_pulse(n, 0.37).unwrap();
        let out = evolve_schedule(&psi, &zero, &sched).unwrap();
        // i^N ∏(−σᶻ) = i^N · p
        let p = OperatorSum::from_string(build_parity(n).unwrap());
        let want = p
            .apply(&psi)
            .unwrap()
            .scaled(c64::new(0.0, 1.0).powu(n as u32));
        assert!(out
            .amplitudes
            .iter()
            .zip(&want.amplitudes)
            .all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn echo_identical_hamiltonians_is_one() {
        let p = ModelParams::new(6, 0.5).unwrap();
        let h = build_h0(&p).unwrap()
            + build_h_simplified(6, &KappaVector::new(0.1, 0.0, 0.0)).unwrap();
        let psi = random_state(6, 2);
        let grid = TimeGrid::uniform(20.0, 41).unwrap();
        let e = loschmidt_echo(&psi, &h, Quench::Static(&h), &grid).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn echo_general_path_matches_eigenstate_path() {
        let p = ModelParams::new(6, 0.4).unwrap();
        let pre = build_h0(&p).unwrap()
            + build_h_simplified(6, &KappaVector::new(0.1, 0.0, 0.0)).unwrap();
        let pos = build_h0(&p).unwrap()
            + build_h_simplified(6, &KappaVector::new(0.1, 0.2, 0.0)).unwrap();
        let phi = diagonalize(&pre).unwrap().eigenvector(0);
        let grid = TimeGrid::uniform(30.0, 31).unwrap();
        let fast = loschmidt_echo(&phi, &pre, Quench::Static(&pos), &grid).unwrap();
        let pre_plan = EvolutionPlan::new(&pre).unwrap();
        let pos_plan = EvolutionPlan::new(&pos).unwrap();
        for (k, &t) in grid.times().iter().enumerate() {
            let a = pre_plan.evolve(&phi, t).unwrap();
            let b = pos_plan.evolve(&phi, t).unwrap();
            assert!((b.inner(&a).norm_sqr() - fast.values[k]).abs() < 1e-10);
        }
        assert!(loschmidt_echo(
            &phi.scaled(c64::new(2.0, 0.0)),
            &pre,
            Quench::Static(&pos),
            &grid
        )
        .is_err());
    }

    #[test]
    fn scheduled_echo_matches_direct_propagation() {
        let n = 5;
        let p = ModelParams::new(n, 0.5).unwrap();
        let h0 = build_h0(&p).unwrap();
        let pre = h0.clone() + build_h_simplified(n, &KappaVector::new(0.1, 0.0, 0.0)).unwrap();
        let phi = diagonalize(&pre).unwrap().eigenvector(0);
        let sched = build_pulse(n, 0.2).unwrap();
        let grid = TimeGrid::new(vec![0.0, 0.05, 0.2, 0.3, 1.0]).unwrap();
        let fast = loschmidt_echo(
            &phi,
            &pre,
            Quench::Scheduled {
                base: &h0,
                schedule: &sched,
            },
            &grid,
        )
        .unwrap();
        for (k, &t) in grid.times().iter().enumerate() {
            let b = evolve_timeline(&phi, &h0, &sched, t).unwrap();
            assert!(
                (phi.inner(&b).norm_sqr() - fast.values[k]).abs() < 1e-10,
                "t = {t}"
            );
        }
        // Non-eigenstate path agrees too.
        let psi = random_state(n, 5);
        let slow = loschmidt_echo(
            &psi,
            &h0,
            Quench::Scheduled {
                base: &h0,
                schedule: &sched,
            },
            &grid,
        )
        .unwrap();
        assert!((slow.values[0] - 1.0).abs() < 1e-12);
        assert!(slow.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn closed_form_values() {
        assert!((le_closed_form(0.05, 0.1, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let t = PI / (2.0 * 0.0125f64.sqrt());
        assert!((le_closed_form(0.05, 0.1, t).unwrap() - 0.2).abs() < 1e-12);
        assert!((le_closed_form(0.05, 0.0, 7.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(le_closed_form(0.0, 0.0, 1.0).is_err());
        assert!((average_le_closed_form(0.05, 0.1).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn average_le_quadrature() {
        let grid = TimeGrid::uniform(500.0, 20_001).unwrap();
        let ones = EchoSeries::from_raw(grid.times().to_vec(), vec![1.0; 20_001]).unwrap();
        assert!((average_le(&ones, 500.0, None).unwrap() - 1.0).abs() < 1e-14);

        let vals = grid
            .times()
            .iter()
            .map(|&t| le_closed_form(0.05, 0.1, t).unwrap())
            .collect();
        let s = EchoSeries::from_raw(grid.times().to_vec(), vals).unwrap();
        let period = PI / 0.0125f64.sqrt();
        assert!((average_le(&s, 500.0, Some(period)).unwrap() - 0.6).abs() < 0.01);

        let coarse = TimeGrid::uniform(500.0, 101).unwrap();
        let s = EchoSeries::from_raw(coarse.times().to_vec(), vec![1.0; 101]).unwrap();
        assert!(matches!(
            average_le(&s, 500.0, Some(period)),
            Err(Error::InsufficientResolution { .. })
        ));
    }

    #[test]
    fn echo_clipping_guard() {
        assert!(EchoSeries::from_raw(vec![0.0], vec![1.0 + 5e-10]).is_ok());
        assert!(EchoSeries::from_raw(vec![0.0], vec![1.0 + 1e-8]).is_err());
        assert_eq!(
            EchoSeries::from_raw(vec![0.0], vec![-1e-12])
                .unwrap()
                .values[0],
            0.0
        );
    }

    #[test]
    fn period_from_closed_form_series() {
        let grid = TimeGrid::default_for(0.05, 0.1).unwrap();
        let vals = grid
            .times()
            .iter()
            .map(|&t| le_closed_form(0.05, 0.1, t).unwrap())
            .collect();
        let s = EchoSeries::from_raw(grid.times().to_vec(), vals).unwrap();
        let p = s.oscillation_period().unwrap();
        assert!((p - PI / 0.0125f64.sqrt()).abs() < 1e-3, "{p}");
        let (_, vmin) = s.local_minima()[0];
        assert!((vmin - 0.2).abs() < 1e-6);
    }

    fn block(eps: f64, b: KappaVector) -> PseudospinBlock {
        PseudospinBlock {
            n: 0,
            epsilon_n: eps,
            b,
            block: identity2(),
            degenerate: true,
        }
    }

    #[test]
    fn subspace_gates() {
        let kz = 0.05;
        let t = 7.3;
        let u = subspace_gate(&block(-3.0, KappaVector::new(0.0, 0.0, kz)), t).unwrap();
        let target = phase_gate(2.0 * kz * t);
        assert!(close(&phase_aligned(&u, &target), &target, 1e-12));

        let k = 0.05;
        let b = KappaVector::new(k, 0.0, k);
        let u = subspace_gate(&block(-1.0, b), PI / (2.0 * b.norm())).unwrap();
        assert!(close(&phase_aligned(&u, &hadamard()), &hadamard(), 1e-12));

        let u = subspace_gate(&block(2.0, b), 0.0).unwrap();
        assert!(close(&u, &identity2(), 1e-15));
        assert!(subspace_gate(&block(0.0, KappaVector::default()), 1.0).is_err());

        // Unitarity.
        let u = subspace_gate(&block(0.3, KappaVector::new(0.1, -0.2, 0.05)), 4.1).unwrap();
        let uu = trace_inner(&u, &u);
        assert!((uu - c64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn gate_fidelity_small_chain() {
        let p = ModelParams::new(8, 0.3).unwrap();
        let r =
            gate_fidelity(&identity2(), &p, &KappaVector::new(0.05, 0.0, 0.05), 0, 0.0).unwrap();
        assert!((r.fidelity - 1.0).abs() < 1e-12);
        let b = KappaVector::new(0.05, 0.0, 0.05);
        let r = gate_fidelity(&hadamard(), &p, &b, 0, PI / (2.0 * b.norm())).unwrap();
        assert!(r.fidelity > 0.99, "{r:?}");
        assert!(r.leakage < 1e-3);
    }

    #[test]
    fn block_gate_matches_full_evolution() {
        let p = ModelParams::new(8, 0.3).unwrap();
        let h0 = build_h0(&p).unwrap();
        let spec = sector_diagonalize(&h0).unwrap();
        let d = build_d(&p).unwrap();
        let pair = gauge_pair(&spec, 0, &(d.adjoint() + d)).unwrap();
        let k = KappaVector::new(0.04, 0.03, 0.02);
        let hp = build_h_prime(&p, &k).unwrap();
        let blk = pseudospin_block(&pair, &hp).unwrap();
        let t = 11.0;
        let u_block = subspace_gate(&blk, t).unwrap();
        let r = gate_fidelity(&u_block, &p, &k, 0, t).unwrap();
        assert!(r.fidelity > 0.999, "{r:?}");
    }

    #[test]
    fn pulse_ideal_limit_in_ordered_phase() {
        let p = ModelParams::new(8, 0.3).unwrap();
        let grid = TimeGrid::new(vec![0.0, 0.001]).unwrap();
        let e = pulse_string_check(&p, 0.05, 0.001, &grid).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!(e.values[1] < 0.01, "{:?}", e.values);
    }
}
