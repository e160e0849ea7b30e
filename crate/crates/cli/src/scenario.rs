//! Ground-truth POVMs and probe ensembles for each scenario.

use qmt_core::povm::{
    computational_basis_set, pauli_projector_set, photon_counting_povm, photon_detection_povm, random_povm_set,
    PauliBasis,
};
use qmt_core::probe::{coherent_probe_grid, dv_probe_ensemble};
use qmt_core::rng;
use qmt_core::{PovmSet, ProbeEnsemble};
use rand::Rng;

use crate::config::Scenario;
use crate::error::CliError;

pub struct Instance {
    pub truth: PovmSet,
    pub probes: ProbeEnsemble,
}

/// Builds the true POVM and the probes. `seed` only matters for scenarios
/// with random ingredients.
pub fn build_instance(scenario: &Scenario, seed: u64) -> Result<Instance, CliError> {
    scenario.validate()?;
    let (truth, probes) = match scenario {
        Scenario::RandomPovm { n_qubits, k } => {
            let d = 1usize << n_qubits;
            (random_povm_set(*k, d, seed)?, dv_probe_ensemble(*n_qubits)?)
        }
        Scenario::PauliProjective { n_qubits, pauli } => {
            let string = match pauli {
                Some(p) => p.clone(),
                None => random_pauli_string(*n_qubits, seed),
            };
            (pauli_projector_set(&string, *n_qubits)?, dv_probe_ensemble(*n_qubits)?)
        }
        Scenario::ComputationalBasis { n_qubits } => {
            (computational_basis_set(*n_qubits)?, dv_probe_ensemble(*n_qubits)?)
        }
        Scenario::PhotonDetection { dim, alpha_max, grid_points } => (
            photon_detection_povm(*dim)?,
            coherent_probe_grid(*alpha_max, *grid_points, *dim)?,
        ),
        Scenario::PhotonCounting { dim, alpha_max, grid_points } => (
            photon_counting_povm(*dim)?,
            coherent_probe_grid(*alpha_max, *grid_points, *dim)?,
        ),
    };
    Ok(Instance { truth, probes })
}

pub fn random_pauli_string(n_qubits: usize, seed: u64) -> String {
    let mut r = rng::seeded(seed);
    (0..n_qubits)
        .map(|_| [PauliBasis::X, PauliBasis::Y, PauliBasis::Z][r.gen_range(0..3)].as_char())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let inst = build_instance(&Scenario::RandomPovm { n_qubits: 2, k: 8 }, 3).unwrap();
        assert_eq!((inst.truth.k(), inst.truth.dim(), inst.probes.len()), (8, 4, 16));
        let inst = build_instance(&Scenario::PhotonDetection { dim: 8, alpha_max: 2.0, grid_points: 4 }, 0).unwrap();
        assert_eq!((inst.truth.k(), inst.probes.len()), (2, 16));
        let inst = build_instance(&Scenario::PauliProjective { n_qubits: 3, pauli: None }, 5).unwrap();
        assert_eq!(inst.truth.k(), 8);
    }

    #[test]
    fn pauli_strings_are_seeded() {
        assert_eq!(random_pauli_string(5, 1), random_pauli_string(5, 1));
        assert!(random_pauli_string(4, 2).chars().all(|c| "XYZ".contains(c)));
    }
}
