//! One runner per experiment. Each returns the tables for its files;
//! grid cells are computed in parallel and assembled in grid order.

use std::f64::consts::PI;

use edgespin::dynamics::{hadamard, phase_gate};
use edgespin::oracle::many_body_levels;
use edgespin::thermal::analytic_case_le;
use edgespin::{
    average_le, bdg_solve, build_h0, build_h_prime, build_h_simplified, diagonalize, gate_fidelity,
    le_closed_form, pulse_string_check, thermal_experiment, EchoSeries, EnsembleKind,
    EvolutionPlan, KappaVector, ModelParams, OperatorSum, Parity, ThermalExperiment, TimeGrid,
};
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig, Perturbation, TimeSpec};
use crate::error::{CliError, Result};
use crate::output::{Cell, Table};

pub fn run(config: &ExperimentConfig) -> Result<Vec<Table>> {
    let c = config.resolve()?;
    match c.experiment()? {
        Experiment::Fig1 => fig1(&c),
        Experiment::Fig2a => fig2a(&c),
        Experiment::Fig2b => fig2b(&c),
        Experiment::Fig2c => fig2c(&c),
        Experiment::Fig3a | Experiment::Fig3b | Experiment::FigTemp => thermal(&c),
        Experiment::OracleCheck => oracle_check(&c),
        Experiment::Gates => gates(&c),
    }
}

fn params(c: &ExperimentConfig, n: usize, g: f64) -> Result<ModelParams> {
    Ok(ModelParams::with_coupling(n, c.j.unwrap_or(1.0), g)?)
}

fn grid(t: TimeSpec) -> Result<TimeGrid> {
    Ok(TimeGrid::uniform(t.t_max, t.points)?)
}

fn g_values(c: &ExperimentConfig) -> Vec<f64> {
    c.g_values.as_ref().map(|g| g.values()).unwrap_or_default()
}

fn collect<T: Send>(cells: Vec<Result<T>>) -> Result<Vec<T>> {
    cells.into_iter().collect()
}

fn fig1(c: &ExperimentConfig) -> Result<Vec<Table>> {
    let n = c.n_sites.unwrap();
    let levels = c.levels.unwrap().min(1 << n);
    let gs = g_values(c);
    let mut tables = Vec::new();
    for (k, kappa) in c.kappa_panels.as_ref().unwrap().iter().enumerate() {
        let hs = build_h_simplified(n, kappa)?;
        let cells = gs
            .par_iter()
            .map(|&g| {
                let h = build_h0(&params(c, n, g)?)? + hs.clone();
                Ok(diagonalize(&h)?)
            })
            .collect::<Vec<Result<_>>>();
        let letter = (b'a' + k as u8) as char;
        let mut t = Table::new(
            format!("fig1_{letter}"),
            &["g", "level", "energy", "energy_above_ground", "parity"],
        );
        for (g, spec) in gs.iter().zip(collect(cells)?) {
            let e0 = spec.eigenvalues[0];
            for l in 0..levels {
                let parity: i64 = match spec.parity_labels[l] {
                    Some(Parity::Even) => 1,
                    Some(Parity::Odd) => -1,
                    None => 0,
                };
                let e = spec.eigenvalues[l];
                t.push(vec![
                    (*g).into(),
                    l.into(),
                    e.into(),
                    (e - e0).into(),
                    parity.into(),
                ]);
            }
        }
        tables.push(t);
    }
    Ok(tables)
}

fn fig2a(c: &ExperimentConfig) -> Result<Vec<Table>> {
    let n = c.n_sites.unwrap();
    let kx = c.kappa.unwrap().x;
    let delta = c.delta.unwrap();
    // Include Δ itself so the string-action value is sampled exactly.
    let mut times = grid(c.time.unwrap())?.times().to_vec();
    if !times.iter().any(|t| (t - delta).abs() < 1e-12) {
        times.push(delta);
        times.sort_by(f64::total_cmp);
    }
    let tg = TimeGrid::new(times)?;
    let gs = g_values(c);
    let cells: Vec<Result<EchoSeries>> = gs
        .par_iter()
        .map(|&g| Ok(pulse_string_check(&params(c, n, g)?, kx, delta, &tg)?))
        .collect();
    let mut curves = Table::new("fig2a", &["g", "t", "le"]);
    let mut summary = Table::new("fig2a_summary", &["g", "delta", "le_at_delta"]);
    for (g, s) in gs.iter().zip(collect(cells)?) {
        for (t, v) in s.times.iter().zip(&s.values) {
            curves.push(vec![(*g).into(), (*t).into(), (*v).into()]);
        }
        let k = s
            .times
            .iter()
            .position(|t| (t - delta).abs() < 1e-12)
            .unwrap();
        summary.push(vec![(*g).into(), delta.into(), s.values[k].into()]);
    }
    Ok(vec![curves, summary])
}

pub fn perturbation(
    p: &ModelParams,
    kappa: &KappaVector,
    kind: Perturbation,
) -> Result<OperatorSum> {
    Ok(match kind {
        Perturbation::Simplified => build_h_simplified(p.n_sites, kappa)?,
        Perturbation::Exact => build_h_prime(p, kappa)?,
    })
}

/// Echoes of the lower member of each requested pair of `H₀ + H′(κ_pre)`
/// quenched into `H₀ + H′(κ_pos)`.
pub fn quench_echoes(
    p: &ModelParams,
    kappa_pre: &KappaVector,
    kappa_pos: &KappaVector,
    kind: Perturbation,
    pairs: &[usize],
    grid: &TimeGrid,
) -> Result<Vec<EchoSeries>> {
    let h0 = build_h0(p)?;
    let h_pre = h0.clone() + perturbation(p, kappa_pre, kind)?;
    let h_pos = h0 + perturbation(p, kappa_pos, kind)?;
    let pre = diagonalize(&h_pre)?;
    let plan = EvolutionPlan::new(&h_pos)?;
    pairs
        .iter()
        .map(|&n| {
            if 2 * n >= pre.eigenvalues.len() {
                return Err(CliError::validation(format!("pair {n} out of range")));
            }
            let amps = plan.return_amplitudes(&pre.eigenvector(2 * n), grid.times())?;
            Ok(EchoSeries::from_raw(
                grid.times().to_vec(),
                amps.iter().map(|a| a.norm_sqr()).collect(),
            )?)
        })
        .collect()
}

fn fig2b(c: &ExperimentConfig) -> Result<Vec<Table>> {
    let n = c.n_sites.unwrap();
    let (kpre, kpos) = (c.kappa_pre.unwrap(), c.kappa.unwrap());
    let pairs = c.pairs.clone().unwrap();
    let tg = grid(c.time.unwrap())?;
    let gs = g_values(c);
    let kind = c.perturbation.unwrap();
    let cells: Vec<Result<Vec<EchoSeries>>> = gs
        .par_iter()
        .map(|&g| quench_echoes(&params(c, n, g)?, &kpre, &kpos, kind, &pairs, &tg))
        .collect();
    let mut curves = Table::new("fig2b", &["g", "pair", "t", "le", "le_closed_form"]);
    let mut summary = Table::new(
        "fig2b_summary",
        &["g", "pair", "le_min", "period", "closed_form_min"],
    );
    let closed_min = kpos.x.powi(2) / (kpos.x.powi(2) + kpos.y.powi(2));
    for (g, series) in gs.iter().zip(collect(cells)?) {
        for (pair, s) in pairs.iter().zip(series) {
            for (t, v) in s.times.iter().zip(&s.values) {
                let cf = le_closed_form(kpos.x, kpos.y, *t)?;
                curves.push(vec![
                    (*g).into(),
                    (*pair).into(),
                    (*t).into(),
                    (*v).into(),
                    cf.into(),
                ]);
            }
            let period = s.oscillation_period().unwrap_or(f64::NAN);
            summary.push(vec![
                (*g).into(),
                (*pair).into(),
                s.min().into(),
                period.into(),
                closed_min.into(),
            ]);
        }
    }
    Ok(vec![curves, summary])
}

/// Closed-form oscillation period `π/√(κx²+κy²)` of the ordered-phase echo.
pub fn closed_form_period(kappa: &KappaVector) -> f64 {
    PI / kappa.x.hypot(kappa.y)
}

/// Ground-state echo averaged over `[0, T]` on `points` uniform samples.
pub fn average_le_cell(
    p: &ModelParams,
    kappa_pre: &KappaVector,
    kappa_pos: &KappaVector,
    kind: Perturbation,
    t_total: f64,
    points: usize,
) -> Result<f64> {
    let tg = TimeGrid::uniform(t_total, points)?;
    let s = quench_echoes(p, kappa_pre, kappa_pos, kind, &[0], &tg)?;
    Ok(average_le(
        &s[0],
        t_total,
        Some(closed_form_period(kappa_pos)),
    )?)
}

fn fig2c(c: &ExperimentConfig) -> Result<Vec<Table>> {
    let (kpre, kpos) = (c.kappa_pre.unwrap(), c.kappa.unwrap());
    let kind = c.perturbation.unwrap();
    let t_total = c.t_total.unwrap();
    let gs = g_values(c);
    let sizes = c.n_sites_list.clone().unwrap();
    let cells: Vec<(usize, f64)> = sizes
        .iter()
        .flat_map(|&n| gs.iter().map(move |&g| (n, g)))
        .collect();
    let ideal = (2.0 * kpos.x.powi(2) + kpos.y.powi(2)) / (2.0 * (kpos.x.powi(2) + kpos.y.powi(2)));
    let points = c.time.unwrap().points;
    let results: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(n, g)| average_le_cell(&params(c, n, g)?, &kpre, &kpos, kind, t_total, points))
        .collect();
    let mut t = Table::new("fig2c", &["n_sites", "g", "average_le", "average_le_ideal"]);
    for ((n, g), avg) in cells.iter().zip(collect(results)?) {
        t.push(vec![(*n).into(), (*g).into(), avg.into(), ideal.into()]);
    }
    Ok(vec![t])
}

fn thermal(c: &ExperimentConfig) -> Result<Vec<Table>> {
    let exp = ThermalExperiment {
        n_sites: c.n_sites.unwrap(),
        kappa_x: c.kappa.unwrap().x,
        kinds: c.ensembles.clone().unwrap(),
        betas: c.betas.clone().unwrap(),
        g_values: g_values(c),
        post_quench: c.post_quench.unwrap(),
        seed: c.seed.unwrap(),
    };
    if c.j.unwrap() != 1.0 {
        return Err(CliError::validation("thermal experiments use J = 1"));
    }
    let tg = grid(c.time.unwrap())?;
    let curves = thermal_experiment(&exp, &tg)?;
    let name = c.experiment()?.name();
    let mut columns = vec!["t".to_string()];
    columns.extend(
        curves
            .iter()
            .map(|cv| format!("{}_beta{}_g{}", cv.kind.name(), cv.beta, cv.g)),
    );
    let structured: Vec<EnsembleKind> = exp
        .kinds
        .iter()
        .copied()
        .filter(|k| *k != EnsembleKind::Canonical)
        .collect();
    columns.extend(
        structured
            .iter()
            .map(|k| format!("closed_form_{}", k.name())),
    );
    let mut wide = Table::with_columns(name, columns);
    for (i, &t) in tg.times().iter().enumerate() {
        let mut row: Vec<Cell> = vec![t.into()];
        row.extend(curves.iter().map(|cv| Cell::from(cv.series.values[i])));
        for k in &structured {
            row.push(analytic_case_le(*k, exp.kappa_x, t)?.into());
        }
        wide.push(row);
    }
    let mut summary = Table::new(
        format!("{name}_summary"),
        &["ensemble", "beta", "g", "seed", "le_min", "le_max"],
    );
    for cv in &curves {
        let min = cv
            .series
            .local_minima()
            .iter()
            .map(|m| m.1)
            .fold(cv.series.min(), f64::min);
        summary.push(vec![
            cv.kind.name().into(),
            cv.beta.into(),
            cv.g.into(),
            Cell::Int(cv.seed as i64),
            min.into(),
            cv.series.max().into(),
        ]);
    }
    Ok(vec![wide, summary])
}

fn oracle_check(c: &ExperimentConfig) -> Result<Vec<Table>> {
    let gs = g_values(c);
    let cells: Vec<(usize, f64)> = c
        .n_sites_list
        .as_ref()
        .unwrap()
        .iter()
        .flat_map(|&n| gs.iter().map(move |&g| (n, g)))
        .collect();
    let results: Vec<Result<(Vec<f64>, Vec<f64>)>> = cells
        .par_iter()
        .map(|&(n, g)| {
            let p = params(c, n, g)?;
            let ed = diagonalize(&build_h0(&p)?)?.eigenvalues;
            let ff = many_body_levels(&bdg_solve(&p)?)?
                .iter()
                .map(|l| l.energy)
                .collect();
            Ok((ed, ff))
        })
        .collect();
    let mut levels = Table::new(
        "oracle_check",
        &[
            "n_sites",
            "g",
            "level",
            "ed_energy",
            "free_fermion_energy",
            "abs_diff",
        ],
    );
    let mut summary = Table::new("oracle_check_summary", &["n_sites", "g", "max_abs_diff"]);
    for ((n, g), r) in cells.iter().zip(collect(results)?) {
        let (ed, ff) = r;
        let mut worst = 0.0f64;
        for (l, (a, b)) in ed.iter().zip(&ff).enumerate() {
            worst = worst.max((a - b).abs());
            levels.push(vec![
                (*n).into(),
                (*g).into(),
                l.into(),
                (*a).into(),
                (*b).into(),
                (a - b).abs().into(),
            ]);
        }
        summary.push(vec![(*n).into(), (*g).into(), worst.into()]);
    }
    Ok(vec![levels, summary])
}

/// Hadamard under `B = κ` for `t = π/(2|B|)`, phase gate under
/// `B = (0, 0, κz)` for `t = π/(4κz)`.
pub fn gate_cases(kappa: &KappaVector) -> Vec<(&'static str, KappaVector, f64)> {
    let kz = if kappa.z != 0.0 {
        kappa.z
    } else {
        kappa.norm()
    };
    let z = KappaVector::new(0.0, 0.0, kz);
    vec![
        ("hadamard", *kappa, PI / (2.0 * kappa.norm())),
        ("phase", z, PI / (4.0 * kz.abs())),
    ]
}

fn gates(c: &ExperimentConfig) -> Result<Vec<Table>> {
    let n = c.n_sites.unwrap();
    let kappa = c.kappa.unwrap();
    if kappa.is_zero() {
        return Err(CliError::validation("gates need a nonzero κ"));
    }
    let mut cases = Vec::new();
    for &g in &g_values(c) {
        for &pair in c.pairs.as_ref().unwrap() {
            for (name, k, t) in gate_cases(&kappa) {
                cases.push((g, pair, name, k, t));
            }
        }
    }
    let results: Vec<Result<_>> = cases
        .par_iter()
        .map(|&(g, pair, name, k, t)| {
            let target = if name == "hadamard" {
                hadamard()
            } else {
                phase_gate(2.0 * k.z * t)
            };
            Ok(gate_fidelity(&target, &params(c, n, g)?, &k, pair, t)?)
        })
        .collect();
    let mut table = Table::new(
        "gates",
        &[
            "gate", "n_sites", "g", "pair", "kappa_x", "kappa_y", "kappa_z", "t", "fidelity",
            "leakage",
        ],
    );
    for ((g, pair, name, k, t), r) in cases.iter().zip(collect(results)?) {
        table.push(vec![
            (*name).into(),
            n.into(),
            (*g).into(),
            (*pair).into(),
            k.x.into(),
            k.y.into(),
            k.z.into(),
            (*t).into(),
            r.fidelity.into(),
            r.leakage.into(),
        ]);
    }
    Ok(vec![table])
}
