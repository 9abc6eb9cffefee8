use edgespin::oracle::many_body_levels;
use edgespin::spectral::sector_diagonalize;
use edgespin::{bdg_solve, build_h0, diagonalize, ModelParams};

const G_VALUES: [f64; 6] = [0.1, 0.4, 0.7, 1.0, 1.3, 1.9];

#[test]
fn exact_spectrum_matches_free_fermions() {
    for n in [4, 6, 8, 10] {
        for g in G_VALUES {
            let p = ModelParams::new(n, g).unwrap();
            let ed = diagonalize(&build_h0(&p).unwrap()).unwrap().eigenvalues;
            let ff: Vec<f64> = many_body_levels(&bdg_solve(&p).unwrap())
                .unwrap()
                .iter()
                .map(|l| l.energy)
                .collect();
            let worst = ed
                .iter()
                .zip(&ff)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-9, "N={n} g={g}: {worst:.3e}");
        }
    }
}

#[test]
fn coupling_scale_enters_through_the_ratio() {
    let p = ModelParams::with_coupling(6, 2.0, 0.8).unwrap();
    let ed = diagonalize(&build_h0(&p).unwrap()).unwrap().eigenvalues;
    let ff: Vec<f64> = many_body_levels(&bdg_solve(&p).unwrap())
        .unwrap()
        .iter()
        .map(|l| l.energy)
        .collect();
    for (a, b) in ed.iter().zip(&ff) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn sector_spectra_match_occupation_parity() {
    // Each parity sector of the chain carries one occupation parity.
    let p = ModelParams::new(8, 0.6).unwrap();
    let spec = sector_diagonalize(&build_h0(&p).unwrap()).unwrap();
    let levels = many_body_levels(&bdg_solve(&p).unwrap()).unwrap();
    let mut even: Vec<f64> = levels.iter().filter(|l| !l.odd).map(|l| l.energy).collect();
    let mut odd: Vec<f64> = levels.iter().filter(|l| l.odd).map(|l| l.energy).collect();
    even.sort_by(f64::total_cmp);
    odd.sort_by(f64::total_cmp);
    let mut by_label = [Vec::new(), Vec::new()];
    for (e, label) in spec.eigenvalues.iter().zip(&spec.parity_labels) {
        let idx = match label.unwrap() {
            edgespin::Parity::Even => 0,
            edgespin::Parity::Odd => 1,
        };
        by_label[idx].push(*e);
    }
    let matches = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9);
    let direct = matches(&by_label[0], &even) && matches(&by_label[1], &odd);
    let swapped = matches(&by_label[0], &odd) && matches(&by_label[1], &even);
    assert!(direct || swapped);
}
