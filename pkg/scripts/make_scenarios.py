"""Regenerate the JSON scenario files under scenarios/."""

from pathlib import Path

import numpy as np

from catbench.qstate import DensityMatrix, HermitianOperator
from catbench.sampling import random_density_matrix, random_hamiltonian
from catbench.scenario_io import ScenarioSpec, dumps

OUT = Path(__file__).resolve().parent.parent / "scenarios"
SZ = HermitianOperator(np.diag([1.0, -1.0]))
PLUS = DensityMatrix.from_vector([1.0, 1.0])


def write(name, spec):
    OUT.mkdir(exist_ok=True)
    (OUT / f"{name}.json").write_text(dumps(spec.to_json()))


def main():
    # k = 1 two-level battery: fully excited under h_B sigma_z
    write("two_level_k1", ScenarioSpec(DensityMatrix(np.diag([1.0, 0.0])), SZ, PLUS, SZ, "energy-invariant"))
    write("two_level_k05", ScenarioSpec(DensityMatrix(np.diag([0.75, 0.25])), SZ, DensityMatrix.from_vector(
        [np.sqrt(0.75), np.sqrt(0.25)]), SZ, "energy-invariant"))
    # shared input for the contrast between catalyst kinds
    write("contrast", ScenarioSpec(DensityMatrix(np.eye(2) / 2), SZ, PLUS, SZ, "energy-invariant",
                                   options={"budget": 40, "seed": 0}))
    write("ground_battery", ScenarioSpec(DensityMatrix(np.diag([0.0, 1.0])), SZ, PLUS, SZ, "energy-invariant"))
    rng = np.random.default_rng(7)
    write("random_qubit", ScenarioSpec(random_density_matrix(2, rng), random_hamiltonian(2, rng),
                                       random_density_matrix(2, rng), random_hamiltonian(2, rng), "correlated", seed=7))
    rng = np.random.default_rng(11)
    write("qutrit_catalyst", ScenarioSpec(DensityMatrix(np.diag([0.4, 0.6])), SZ,
                                          random_density_matrix(3, rng), random_hamiltonian(3, rng), "correlated", seed=11))
    rng = np.random.default_rng(13)
    write("qutrit_battery", ScenarioSpec(random_density_matrix(3, rng), random_hamiltonian(3, rng),
                                         random_density_matrix(2, rng), random_hamiltonian(2, rng), "uncorrelated", seed=13))


if __name__ == "__main__":
    main()
