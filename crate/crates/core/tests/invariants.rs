use cavity_polariton::coupled::{apply_coupled, solve_coupled, CoupledHamiltonianConfig, CouplingForm};
use cavity_polariton::eigensolver::dense_eigen;
use cavity_polariton::electronic::{matter_elements, solve_electronic, ElectronicBasis};
use cavity_polariton::grid::{apply_hamiltonian, potential_on_grid, Grid2D, MexicanHatParams};
use cavity_polariton::observables::{density_from_coupled, density_from_polariton, ModeOccupation};
use cavity_polariton::photon::{build_coupling_table, PhotonMode};
use cavity_polariton::polariton::{polariton_occupation, solve_polariton, PolaritonBasisSpec, PolaritonState};
use cavity_polariton::spp::{polariton_gap, spp_levels_with, RabiConvention, SppInputs};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn coarse_ring() -> (Grid2D, Vec<f64>) {
    let g = Grid2D::centered(41, 41, 0.25).unwrap();
    let v = potential_on_grid(&g, &MexicanHatParams::gaas_ring());
    (g, v)
}

fn polariton_run(basis: &ElectronicBasis, lambda: f64) -> Vec<PolaritonState> {
    let omega = basis.energies[1] - basis.energies[0];
    let table = build_coupling_table(&[PhotonMode::diagonal(omega, lambda, 3).unwrap()]);
    solve_polariton(basis, &table, &PolaritonBasisSpec::new(basis.count - 1, 3), 4).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rotating_the_degenerate_pair_changes_nothing(angle in 0.0..std::f64::consts::TAU, lambda in 0.01..0.5f64) {
        let (g, v) = coarse_ring();
        let basis = solve_electronic(&g, &v, 6, 1e-11).unwrap();
        prop_assert!(basis.multiplets()[1] == (1..3));
        let mut turned = basis.clone();
        turned.rotate_pair(1, 2, angle).unwrap();
        let a = matter_elements(basis, [1.0, 1.0]).unwrap();
        let b = matter_elements(turned, [1.0, 1.0]).unwrap();
        let (sa, sb) = (polariton_run(&a, lambda), polariton_run(&b, lambda));
        for (x, y) in sa.iter().zip(&sb) {
            prop_assert!((x.energy - y.energy).abs() <= 1e-10);
        }
        prop_assert!((polariton_occupation(&sa[0], 0) - polariton_occupation(&sb[0], 0)).abs() <= 1e-10);
        let da = density_from_polariton(&sa[0], &a).unwrap();
        let db = density_from_polariton(&sb[0], &b).unwrap();
        let dev = da.iter().zip(&db).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(dev <= 1e-10, "density deviation {dev:e}");
    }
}

#[test]
fn fourth_order_convergence_on_harmonic_trap() {
    let err = |dx: f64| {
        let g = Grid2D::square_box(7.0, dx).unwrap();
        let v = potential_on_grid(&g, &MexicanHatParams::harmonic(1.0));
        (solve_electronic(&g, &v, 1, 1e-11).unwrap().energies[0] - 1.0).abs()
    };
    let (coarse, fine) = (err(0.4), err(0.2));
    assert!(coarse / fine >= 8.0, "ratio {}", coarse / fine);
}

#[test]
fn fock_cutoff_convergence_is_monotone() {
    let (g, v) = coarse_ring();
    let omega = {
        let b = solve_electronic(&g, &v, 2, 1e-11).unwrap();
        b.energies[1] - b.energies[0]
    };
    for lambda in [0.005, 0.4] {
        let e: Vec<f64> = [10, 20, 40]
            .iter()
            .map(|&c| {
                let mode = PhotonMode::diagonal(omega, lambda, c).unwrap();
                let cfg = CoupledHamiltonianConfig::new(g.clone(), v.clone(), vec![mode], CouplingForm::Length).unwrap();
                solve_coupled(&cfg, 1).unwrap()[0].energy
            })
            .collect();
        // a larger cutoff contains the smaller space, so the energy cannot rise
        assert!(e[1] <= e[0] + 1e-12 && e[2] <= e[1] + 1e-12, "{lambda}: {e:?}");
        assert!((e[2] - e[1]).abs() <= (e[1] - e[0]).abs() + 1e-12, "{lambda}: {e:?}");
    }
}

#[test]
fn weak_coupling_forms_agree() {
    let (g, v) = coarse_ring();
    let b = solve_electronic(&g, &v, 2, 1e-11).unwrap();
    let mode = PhotonMode::diagonal(b.energies[1] - b.energies[0], 0.005, 39).unwrap();
    let e = |form| {
        let cfg = CoupledHamiltonianConfig::new(g.clone(), v.clone(), vec![mode.clone()], form).unwrap();
        solve_coupled(&cfg, 1).unwrap()[0].energy
    };
    assert!((e(CouplingForm::Length) - e(CouplingForm::Momentum)).abs() <= 1e-6);
}

#[test]
fn swap_parity_of_nondegenerate_states() {
    let (g, v) = coarse_ring();
    let omega = {
        let b = solve_electronic(&g, &v, 2, 1e-11).unwrap();
        b.energies[1] - b.energies[0]
    };
    let swap = |x: &[f64]| -> Vec<f64> {
        let n = g.nx;
        let mut y = vec![0.0; x.len()];
        for (f, block) in x.chunks(n * n).enumerate() {
            for iy in 0..n {
                for ix in 0..n {
                    y[f * n * n + ix * n + iy] = block[iy * n + ix];
                }
            }
        }
        y
    };
    for form in [CouplingForm::Length, CouplingForm::Momentum] {
        let mode = PhotonMode::diagonal(omega, 0.2, 6).unwrap();
        let cfg = CoupledHamiltonianConfig::new(g.clone(), v.clone(), vec![mode], form).unwrap();
        let states = solve_coupled(&cfg, 6).unwrap();
        for (i, s) in states.iter().enumerate() {
            let isolated = states.iter().enumerate().all(|(j, t)| j == i || (t.energy - s.energy).abs() > 1e-6);
            if !isolated {
                continue;
            }
            let p = swap(&s.amplitudes);
            let plus = g.dot(&p, &s.amplitudes).signum();
            let dev = p.iter().zip(&s.amplitudes).map(|(a, b)| a - plus * b).map(|d| d * d).sum::<f64>();
            assert!((dev * g.weight()).sqrt() <= 1e-8, "{form:?} state {i}: {dev:e}");
        }
    }
}

fn complete_line_basis(g: &Grid2D, v: &[f64]) -> ElectronicBasis {
    let n = g.len();
    let mut m = DMatrix::zeros(n, n);
    let mut x = vec![0.0; n];
    for j in 0..n {
        x[j] = 1.0;
        m.column_mut(j).copy_from_slice(&apply_hamiltonian(g, v, &x).unwrap());
        x[j] = 0.0;
    }
    let eig = dense_eigen(&m).unwrap();
    let s = 1.0 / g.weight().sqrt();
    let orbitals = eig.vectors.iter().map(|u| u.iter().map(|a| a * s).collect()).collect();
    ElectronicBasis::from_parts(g.clone(), eig.values, orbitals).unwrap()
}

#[test]
fn full_basis_occupation_matches_momentum_form() {
    let g = Grid2D::line(32, 0.3).unwrap();
    let v = potential_on_grid(&g, &MexicanHatParams::new(1.0, 2.0, 0.8).unwrap());
    let basis = matter_elements(complete_line_basis(&g, &v), [1.0, 0.0]).unwrap();
    let mode = PhotonMode::new(0.7, [0.4, 0.0], 4).unwrap();
    let table = build_coupling_table(&[mode.clone()]);
    let pol = solve_polariton(&basis, &table, &PolaritonBasisSpec::new(31, 4), 1).unwrap();
    let cfg = CoupledHamiltonianConfig::new(g, v, vec![mode], CouplingForm::Momentum).unwrap();
    let exact = solve_coupled(&cfg, 1).unwrap();
    assert!((pol[0].energy - exact[0].energy).abs() < 1e-10);
    assert!((pol[0].mode_occupation(0) - exact[0].mode_occupation(0)).abs() < 1e-10);
    // densities agree too
    let dp = density_from_polariton(&pol[0], &basis).unwrap();
    let de = density_from_coupled(&exact[0]);
    assert!(dp.iter().zip(&de).all(|(a, b)| (a - b).abs() < 1e-9));
    // and the matrix-free operator reproduces the energy as a Rayleigh quotient
    let hx = apply_coupled(&cfg, &exact[0].amplitudes).unwrap();
    let rq = cfg.grid.dot(&hx, &exact[0].amplitudes);
    assert!((rq - exact[0].energy).abs() < 1e-10);
}

/// Two electronic states and at most one photon is the single-photon model
/// with the momentum-element coupling.
#[test]
fn spp_is_the_two_state_one_photon_polariton() {
    let (g, v) = coarse_ring();
    let full = matter_elements(solve_electronic(&g, &v, 3, 1e-11).unwrap(), [1.0, 1.0]).unwrap();
    for lambda in [0.005, 0.05, 0.3] {
        for detune in [0.0, 0.02, -0.03] {
            let omega = full.energies[1] - full.energies[0] + detune;
            let s = SppInputs::from_basis(&full, omega, [lambda, lambda], 1.0).unwrap();
            let bright = (1..3).find(|&n| full.energies[n] == s.e1 && {
                let el = full.elements().unwrap();
                el.dipole[0][(0, n)] == s.r01[0]
            });
            let n = bright.unwrap();
            let pair = ElectronicBasis::from_parts(
                g.clone(),
                vec![full.energies[0], full.energies[n]],
                vec![full.orbitals[0].clone(), full.orbitals[n].clone()],
            )
            .unwrap();
            let pair = matter_elements(pair, [1.0, 1.0]).unwrap();
            let table = build_coupling_table(&[PhotonMode::diagonal(omega, lambda, 1).unwrap()]);
            let pol = solve_polariton(&pair, &table, &PolaritonBasisSpec::new(1, 1), 4).unwrap();
            let model = spp_levels_with(&s, RabiConvention::Momentum).unwrap().levels();
            let mut model: Vec<f64> = model.iter().map(|e| e + 0.5 * omega).collect();
            model.sort_by(f64::total_cmp);
            for (a, b) in pol.iter().zip(&model) {
                assert!((a.energy - b).abs() < 1e-10, "{lambda} {detune}: {} vs {b}", a.energy);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    /// Larger dipoles raise the Rabi frequency and leave `L` alone.
    #[test]
    fn spp_gap_shrinks_with_rabi_frequency(
        e0 in -2.0..2.0f64, de in 0.01..1.0f64, omega in 0.02..1.0f64,
        lam in 0.001..1.0f64, r in 0.1..3.0f64, log_n in 0.0..6.0f64,
    ) {
        let at = |r: f64| polariton_gap(&SppInputs::new(e0, e0 + de, omega, [lam, 0.0], [r, 0.0], 10f64.powf(log_n)).unwrap());
        let (g1, g2) = (at(r), at(2.0 * r));
        prop_assert!(g1 > 0.0 && g2 > 0.0);
        prop_assert!(g2 < g1);
        // far out the gap falls like 1/Ω̃
        prop_assert!(at(1e12 * r) < 0.2 * at(1e11 * r));
    }

    #[test]
    fn spp_levels_are_ordered(
        e0 in -2.0..2.0f64, de in 0.01..1.0f64, omega in 0.02..1.0f64,
        lam in 0.0..1.0f64, r in -3.0..3.0f64, n_e in 1.0..1e4f64,
    ) {
        let s = SppInputs::new(e0, e0 + de, omega, [lam, lam], [r, -0.5 * r], n_e).unwrap();
        let l = spp_levels_with(&s, RabiConvention::Dipole).unwrap().levels();
        prop_assert!(l[0] <= l[1] && l[1] <= l[2] && l[2] <= l[3]);
    }
}

/// At fixed λ the gap falls with `N_e` only while `N_e λ²` is small; the
/// collective shift grows like `N_e` and the Rabi frequency like `√N_e`, so
/// the gap climbs back to `ΔE` for many emitters.
#[test]
fn spp_gap_along_emitter_count() {
    let s = SppInputs::new(0.0, 0.125, 0.125, [0.005, 0.005], [2.5, 2.5], 1.0).unwrap();
    let gaps: Vec<f64> = (0..=7).map(|k| polariton_gap(&SppInputs { n_e: 10f64.powi(k), ..s })).collect();
    assert!(gaps.iter().all(|&g| g > 0.0));
    assert!(gaps[..4].windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[4..].windows(2).all(|w| w[1] > w[0]), "{gaps:?}");
    assert!((gaps[7] - 0.125).abs() < 1e-3);
}

#[test]
fn ring_matched_splitting_is_near_exact() {
    let g = Grid2D::centered(201, 201, 0.1).unwrap();
    let v = potential_on_grid(&g, &MexicanHatParams::gaas_ring());
    let b = matter_elements(solve_electronic(&g, &v, 2, 1e-10).unwrap(), [1.0, 1.0]).unwrap();
    let omega = b.energies[1] - b.energies[0];
    let s = SppInputs::from_basis(&b, omega, [0.005, 0.005], 1.0).unwrap();
    let (_, _, split) = cavity_polariton::spp::rabi_splitting(&s);
    // exact weak-coupling ΔE_{1→3}
    assert!((split - 0.0054355).abs() < 0.1 * 0.0054355, "{split}");
}

#[test]
fn parallel_degenerate_modes_act_as_one_bright_mode() {
    // a photon-mode rotation leaves one mode with λ = √(λa² + λb²) and one
    // free mode carrying only ω/2
    let (g, v) = coarse_ring();
    let omega = 0.12;
    for form in [CouplingForm::Length, CouplingForm::Momentum] {
        let e = |modes: Vec<PhotonMode>| {
            let cfg = CoupledHamiltonianConfig::new(g.clone(), v.clone(), modes, form).unwrap();
            solve_coupled(&cfg, 1).unwrap()[0].energy
        };
        let two = e(vec![
            PhotonMode::new(omega, [0.03, 0.03], 14).unwrap(),
            PhotonMode::new(omega, [0.04, 0.04], 14).unwrap(),
        ]);
        let one = e(vec![PhotonMode::new(omega, [0.05, 0.05], 14).unwrap()]);
        assert!((two - one - omega / 2.0).abs() < 1e-8, "{form:?}: {two} vs {one}");
    }
}
