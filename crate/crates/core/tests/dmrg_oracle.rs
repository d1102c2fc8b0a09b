//! DMRG ground states against exact diagonalization.

use kzqfi::model::pauli_z;
use kzqfi::oracles::dense_ground_state;
use kzqfi::{ground_state, DmrgConfig, ModelParams};

#[test]
fn energies_match_exact_diagonalization() {
    for n in [8, 10, 12] {
        let params = ModelParams::open(n);
        for g in [1.0, 2.0, 5.0] {
            let (psi, e, _) = ground_state(&params, g, &DmrgConfig::default()).unwrap();
            let (_, exact) = dense_ground_state(&params, g).unwrap();
            assert!(e >= exact - 1e-10, "N={n} g={g}: {e} below exact {exact}");
            assert!(e - exact < 1e-8, "N={n} g={g}: {e} vs {exact}");
            let mz = psi.expectation_profile(pauli_z().view()).unwrap();
            assert!(mz.iter().all(|m| m.abs() < 1e-8), "N={n} g={g}: {mz:?}");
        }
    }
}

#[test]
fn seeds_give_identical_energies() {
    let params = ModelParams::open(10);
    let cfg = DmrgConfig {
        seed: 17,
        ..Default::default()
    };
    let (_, a, _) = ground_state(&params, 1.0, &cfg).unwrap();
    let (_, b, _) = ground_state(&params, 1.0, &cfg).unwrap();
    assert!((a - b).abs() < 1e-12);
}
