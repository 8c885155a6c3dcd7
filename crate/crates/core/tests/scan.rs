use qfi_rixs::angular::{dipole_matrix, OrbitalBasis};
use qfi_rixs::bounds::{k_producible_bound, PolChannel, TMatrixSet};
use qfi_rixs::geometry::BeamGeometry;
use qfi_rixs::manybody::{self, LatticeSpec, ManyBodyState};
use qfi_rixs::rixssim::*;
use qfi_rixs::scattering::optimal_phase;

#[test]
#[ignore]
fn scan_for_violation() {
    // orbital-exchange-dominated ring: spins polarized, orbitals AFM-like
    for n_sites in [3usize, 4] {
        for j_so in [0.6, 1.0] {
            let lattice = LatticeSpec::chain(n_sites, 2).unwrap();
            let model = ClusterModel::new(
                lattice.clone(),
                ValenceParams { j_spin: -1.0, delta_cf: vec![0.0, 0.0], j_so, zeeman: -0.4, periodic: true },
                CoreParams { l_core: 1, edge_energy: 15.0, xi_soc: 0.8, u_core: 0.6 },
                10.0,
            ).unwrap();
            let solved = SolvedModel::solve(&model).unwrap();
            let gap = solved.ground_gap();
            let basis = OrbitalBasis::atomic_with_valence_ms(2, 1, 3, 2, &[-1, 0]).unwrap();
            let ground = ManyBodyState::new(solved.ground_state(), lattice.clone()).unwrap();
            for (gi, (ti, ts)) in [(0.3, 1.2), (0.785, 0.785), (0.1, 0.5), (1.4, 1.4)].iter().enumerate() {
                let geom = BeamGeometry::new(*ti, *ts, 0.0).unwrap();
                let set = TMatrixSet::from_geometry(&geom, &basis, 1.0).unwrap();
                for q_mult in 1..n_sites {
                    let q = std::f64::consts::TAU * q_mult as f64 / n_sites as f64;
                    for (ci, (channel, t)) in set.iter().enumerate() {
                        let tsq = manybody::t_sq_expectation(&ground, t, q).unwrap();
                        let phase = optimal_phase(tsq);
                        let f = manybody::qfi_pure(&ground, t, q, phase).unwrap();
                        let b1 = k_producible_bound(t, q, lattice.site_positions(), phase, 1).unwrap().value;
                        if f > b1 * 1.02 {
                            println!("VIOLATION n={n_sites} j_so={j_so} gap={gap:.3} geom#{gi} q_mult={q_mult} ch={channel} F={f:.4} b1={b1:.4} ratio={:.3}", f/b1);
                        }
                        let _ = ci;
                    }
                }
            }
        }
    }
}
