//! Property tests of the generators, the propagator and the observables.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use fracbloch::model::{
    build_fock_hamiltonian, build_single_particle_hamiltonian, center_site, Kappa1Rule, ModelParams, SiteIndex2D,
};
use fracbloch::observables::{diagonal_confinement, site_population, PopulationTrace};
use fracbloch::photonics::{curvature_to_force, ArrayShape, ForceCalibration, ForceMode, WaveguideArraySpec};
use fracbloch::propagator::{z_grid, PropagationPlan, StateVector};
use fracbloch::reference::enumerate_fock_bonds;
use num_complex::Complex64;

fn rate() -> impl Strategy<Value = f64> {
    (0i32..=200).prop_map(|x| f64::from(x) / 100.0)
}

fn signed() -> impl Strategy<Value = f64> {
    (-600i32..=600).prop_map(|x| f64::from(x) / 100.0)
}

fn rule() -> impl Strategy<Value = Kappa1Rule> {
    prop_oneof![
        Just(Kappa1Rule::MainDiagonalIncident),
        Just(Kappa1Rule::ThreeDiagonalIncident)
    ]
}

prop_compose! {
    fn fock_params()(
        n in 2usize..=7,
        kappa in rate(),
        kappa1 in rate(),
        rho in signed(),
        u0 in signed(),
        fd in rate(),
        defect in proptest::option::of(signed()),
        rule in rule(),
    ) -> ModelParams {
        let mut p = ModelParams::photonic(kappa, rho, u0, fd, n);
        p.kappa1 = kappa1;
        p.near_diagonal_defect = defect;
        p.kappa1_rule = rule;
        p
    }
}

fn swap_index(i: usize, n: usize) -> usize {
    SiteIndex2D::unflatten(i, n).swapped().flatten(n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fock_operator_is_symmetric_and_matches_enumerator(p in fock_params()) {
        let h = build_fock_hamiltonian(&p).unwrap();
        let m = h.matrix();
        prop_assert_eq!(m, &m.transpose());
        prop_assert_eq!(&enumerate_fock_bonds(&p).unwrap().to_matrix(), m);
    }

    #[test]
    fn fock_operator_commutes_with_particle_swap(p in fock_params()) {
        let h = build_fock_hamiltonian(&p).unwrap();
        let n = p.n_sites;
        for i in 0..n * n {
            for j in 0..n * n {
                prop_assert_eq!(h.matrix()[(i, j)], h.matrix()[(swap_index(i, n), swap_index(j, n))]);
            }
        }
    }

    #[test]
    fn tilt_only_changes_the_diagonal(p in fock_params(), fd in rate()) {
        let a = build_fock_hamiltonian(&p).unwrap();
        let b = build_fock_hamiltonian(&p.clone().with_fd(fd)).unwrap();
        let diff = a.matrix() - b.matrix();
        for i in 0..diff.nrows() {
            for j in 0..diff.ncols() {
                if i != j {
                    prop_assert_eq!(diff[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn noninteracting_lattice_is_a_kronecker_sum(n in 2usize..=6, kappa in rate(), fd in rate()) {
        let h2 = build_fock_hamiltonian(&ModelParams::photonic(kappa, 0.0, 0.0, fd, n)).unwrap();
        let h1 = build_single_particle_hamiltonian(n, kappa, fd).unwrap();
        let id = nalgebra::DMatrix::<f64>::identity(n, n);
        let sum = h1.matrix().kronecker(&id) + id.kronecker(h1.matrix());
        prop_assert!((h2.matrix() - sum).amax() < 1e-12);
    }

    #[test]
    fn evolution_is_unitary_and_composes(p in fock_params(), z1 in 0.0f64..4.0, z2 in 0.0f64..4.0) {
        let h = build_fock_hamiltonian(&p).unwrap();
        let plan = PropagationPlan::new(&h).unwrap();
        let n = p.n_sites;
        let psi0 = StateVector::basis(n * n, SiteIndex2D::new(center_site(n), center_site(n)).flatten(n)).unwrap();
        let a = plan.state_at(&psi0, z1).unwrap();
        prop_assert!((a.norm_sqr() - 1.0).abs() <= 1e-12);
        let ab = plan.state_at(&a, z2).unwrap();
        let direct = plan.state_at(&psi0, z1 + z2).unwrap();
        for (x, y) in ab.amplitudes().iter().zip(direct.amplitudes()) {
            prop_assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn swap_symmetric_states_stay_symmetric(p in fock_params(), a in 0usize..7, b in 0usize..7, z in 0.0f64..8.0) {
        let n = p.n_sites;
        let (a, b) = (a % n, b % n);
        let h = build_fock_hamiltonian(&p).unwrap();
        let sites = if a == b {
            vec![SiteIndex2D::new(a, a).flatten(n)]
        } else {
            vec![SiteIndex2D::new(a, b).flatten(n), SiteIndex2D::new(b, a).flatten(n)]
        };
        let psi0 = StateVector::superposition(n * n, &sites).unwrap();
        let psi = PropagationPlan::new(&h).unwrap().state_at(&psi0, z).unwrap();
        let amps = psi.amplitudes();
        for i in 0..n * n {
            prop_assert!((amps[i] - amps[swap_index(i, n)]).norm() <= 1e-10);
        }
    }

    #[test]
    fn confinement_and_off_diagonal_weight_sum_to_one(p in fock_params(), dz in 0.05f64..0.5) {
        let h = build_fock_hamiltonian(&p).unwrap();
        let n = p.n_sites;
        let psi0 = StateVector::basis(n * n, SiteIndex2D::new(0, n - 1).flatten(n)).unwrap();
        let traj = PropagationPlan::new(&h).unwrap().evolve(&psi0, &z_grid(2.0, dz).unwrap()).unwrap();
        let conf = diagonal_confinement(&traj, n).unwrap();
        for (state, c) in traj.states.iter().zip(&conf.values) {
            let off: f64 = state
                .populations()
                .iter()
                .enumerate()
                .filter(|(i, _)| !SiteIndex2D::unflatten(*i, n).is_diagonal())
                .map(|(_, p)| p)
                .sum();
            prop_assert!((c + off - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn resampling_does_not_change_states(n in 3usize..=9, kappa in rate(), fd in rate(), k in 1usize..20) {
        let h = build_single_particle_hamiltonian(n, kappa, fd).unwrap();
        let plan = PropagationPlan::new(&h).unwrap();
        let psi0 = StateVector::basis(n, center_site(n)).unwrap();
        let coarse = plan.evolve(&psi0, &z_grid(2.0, 0.1).unwrap()).unwrap();
        let fine = plan.evolve(&psi0, &z_grid(2.0, 0.05).unwrap()).unwrap();
        let k = k.min(coarse.len() - 1);
        for (x, y) in coarse.states[k].amplitudes().iter().zip(fine.states[2 * k].amplitudes()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn calibrated_force_scales_inversely_with_radius(r in 50.0f64..5000.0, scale in 0.1f64..10.0) {
        let spec = |radius: f64| WaveguideArraySpec {
            shape: ArrayShape::Square(15),
            spacing_um: 19.0,
            bend_radius_cm: radius,
            length_cm: 8.5,
            detuning: -4.0,
            wavelength_nm: 633.0,
            n_eff: 1.45,
        };
        let cal = ForceMode::Calibrated(ForceCalibration { l_foc_cm: 6.5, bend_radius_cm: 400.0, spacing_um: 19.0 });
        for mode in [cal, ForceMode::FirstPrinciples] {
            let f1 = curvature_to_force(&spec(r), &mode).unwrap();
            let f2 = curvature_to_force(&spec(r * scale), &mode).unwrap();
            prop_assert!((f1 / f2 - scale).abs() < 1e-9 * scale);
        }
    }
}

#[test]
fn noninteracting_pair_factorizes() {
    let (n, kappa, fd) = (11, 0.95, 0.4833);
    let single = build_single_particle_hamiltonian(n, kappa, fd).unwrap();
    let pair = build_fock_hamiltonian(&ModelParams::photonic(kappa, 0.0, 0.0, fd, n)).unwrap();
    let c = center_site(n);
    let z = z_grid(6.0, 0.25).unwrap();
    let a = PropagationPlan::new(&single)
        .unwrap()
        .evolve(&StateVector::basis(n, c).unwrap(), &z)
        .unwrap();
    let psi0 = StateVector::basis(n * n, SiteIndex2D::new(c, c).flatten(n)).unwrap();
    let b = PropagationPlan::new(&pair).unwrap().evolve(&psi0, &z).unwrap();
    for (sa, sb) in a.states.iter().zip(&b.states) {
        for i in 0..n * n {
            let s = SiteIndex2D::unflatten(i, n);
            let product: Complex64 = sa.amplitudes()[s.n] * sa.amplitudes()[s.m];
            assert!((sb.amplitudes()[i] - product).norm() <= 1e-8);
        }
    }

    let r1 = site_population(&a, c).unwrap();
    let r2 = site_population(&b, SiteIndex2D::new(c, c).flatten(n)).unwrap();
    for (x, y) in r1.values.iter().zip(&r2.values) {
        assert_abs_diff_eq!(x * x, *y, epsilon = 1e-10);
    }
}

#[test]
fn population_trace_round_trips_trajectory() {
    let h = build_single_particle_hamiltonian(5, 1.0, 0.3).unwrap();
    let traj = PropagationPlan::new(&h)
        .unwrap()
        .evolve(&StateVector::basis(5, 2).unwrap(), &z_grid(1.0, 0.25).unwrap())
        .unwrap();
    let trace = PopulationTrace::from_trajectory(&traj);
    assert_eq!(trace.rows().len(), 5);
    assert_eq!(
        site_population(&trace, 2).unwrap().values,
        site_population(&traj, 2).unwrap().values
    );
}
