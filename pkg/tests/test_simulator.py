import math
import unittest

import numpy as np
from scipy.stats import chisquare

from mbqc_crosscheck.errors import InsufficientShots, ShapeMismatch, TooManyWires, UnsupportedGate, ValidationError
from mbqc_crosscheck.graphs import builtin_graph, flow_by_name
from mbqc_crosscheck.models import AngleSet, Circuit, Gate, NoiseModel, OutcomeDistribution, RandomizationBits
from mbqc_crosscheck.patterns import compile_to_circuit, conditioned_angles, random_instance, rewrite_angles
from mbqc_crosscheck.simulator import (
    apply_noise,
    calibrate_depolarizing,
    exact_distribution,
    fix_distributions,
    j_matrix,
    pattern_distribution,
    sample,
)

PI = math.pi
WORKED_ANGLES = AngleSet({1: 3 * PI / 4, 2: 7 * PI / 3, 3: PI / 3, 4: 0.0, 5: 2 * PI / 3, 6: PI})
WORKED_BITS = RandomizationBits(k={1: 1, 2: 0, 3: 0, 4: 0, 5: 1, 6: 0}, r={2: 0, 5: 1, 6: 1})
C_A_TABLE = [0.207, 0.393, 0.043, 0.357]
C_B_TABLE = [0.179, 0.021, 0.196, 0.104, 0.060, 0.064, 0.065, 0.311]


def h6():
    g, flows = builtin_graph("H6")
    return g, flow_by_name(flows, "a"), flow_by_name(flows, "b")


def point(n_bits, index):
    probs = np.zeros(2 ** n_bits)
    probs[index] = 1.0
    return OutcomeDistribution(n_bits, probs)


class TestExactDistribution(unittest.TestCase):
    def test_j_matrix_is_unitary(self):
        for angle in (0.0, 0.3, PI / 2, 2.0):
            j = j_matrix(angle)
            self.assertTrue(np.allclose(j.conj().T @ j, np.eye(2)))

    def test_worked_example_flow_a(self):
        g, a, _ = h6()
        dist = exact_distribution(compile_to_circuit(g, a, WORKED_ANGLES))
        self.assertEqual(dist.labels, (5, 6))
        for got, want in zip(dist.probs, C_A_TABLE):
            self.assertAlmostEqual(got, want, delta=5e-4)

    def test_worked_example_flow_b_rewritten(self):
        g, _, b = h6()
        rewritten = rewrite_angles(g, b, WORKED_ANGLES, WORKED_BITS)
        dist = exact_distribution(compile_to_circuit(g, b, rewritten))
        self.assertEqual(dist.labels, (2, 5, 6))
        for got, want in zip(dist.probs, C_B_TABLE):
            self.assertAlmostEqual(got, want, delta=5e-4)

    def test_zero_angles_are_deterministic(self):
        g, a, _ = h6()
        dist = exact_distribution(compile_to_circuit(g, a, AngleSet({v: 0.0 for v in g.vertices})))
        self.assertAlmostEqual(dist.prob("00"), 1.0, places=12)

    def test_too_many_wires(self):
        circuit = Circuit(wires=tuple(range(13)), gates=())
        with self.assertRaises(TooManyWires):
            exact_distribution(circuit)

    def test_unsupported_gate(self):
        circuit = Circuit(wires=(0,), gates=(Gate("T", (0,)),))
        with self.assertRaises(UnsupportedGate):
            exact_distribution(circuit)

    def test_conditioning_matches_angle_shift(self):
        g, a, _ = h6()
        fixed = pattern_distribution(g, a, WORKED_ANGLES, {2: 1})
        shifted = pattern_distribution(g, a, conditioned_angles(WORKED_ANGLES, {2: 1}))
        self.assertTrue(np.allclose(fixed.probs, shifted.probs))

    def test_fix_distributions_keys(self):
        g, a, _ = h6()
        dists = fix_distributions(g, a, WORKED_ANGLES, (2, 3))
        self.assertEqual(sorted(dists), ["00", "01", "10", "11"])
        self.assertTrue(np.allclose(dists["00"].probs, pattern_distribution(g, a, WORKED_ANGLES).probs))


class TestNoise(unittest.TestCase):
    def test_full_depolarization_is_uniform(self):
        noisy = apply_noise(point(3, 5), NoiseModel(depolarizing_strength=1.0))
        self.assertTrue(np.allclose(noisy.probs, 1 / 8))
        self.assertAlmostEqual(noisy.purity(), 2 ** -3, places=12)

    def test_ideal_noise_is_identity(self):
        dist = point(2, 1)
        self.assertIs(apply_noise(dist, NoiseModel.ideal()), dist)
        self.assertIs(apply_noise(dist, None), dist)

    def test_symmetric_readout_flip(self):
        noisy = apply_noise(point(2, 0), NoiseModel(readout_flip=(0.1,)))
        self.assertTrue(np.allclose(noisy.probs, [0.81, 0.09, 0.09, 0.01]))

    def test_per_wire_readout_flip(self):
        noisy = apply_noise(point(2, 0), NoiseModel.preset("ibmqx2"))
        self.assertAlmostEqual(noisy.prob("00"), 0.965 * 0.985, places=12)
        self.assertAlmostEqual(noisy.prob("10"), 0.035 * 0.985, places=12)

    def test_readout_list_too_short(self):
        with self.assertRaises(ShapeMismatch):
            apply_noise(point(3, 0), NoiseModel(readout_flip=(0.1, 0.2)))

    def test_full_depolarization_distance_over_grid(self):
        # squared: (E⟨Z5⟩² + E⟨Z6⟩² + E⟨Z5Z6⟩²) / 4 = 53/256; the norm itself averages ~0.43
        g, a, _ = h6()
        squared = []
        for seed in range(200):
            p = pattern_distribution(g, a, random_instance(g, seed=seed)).probs
            q = apply_noise(OutcomeDistribution(2, p), NoiseModel.preset("depolarized")).probs
            squared.append(np.sum((p - q) ** 2))
        self.assertAlmostEqual(float(np.mean(np.sqrt(squared))), 0.428, delta=0.05)
        self.assertAlmostEqual(float(np.mean(squared)), 53 / 256, delta=0.05)

    def test_depolarizing_shrinks_l2_quadratically(self):
        g, a, _ = h6()
        p = exact_distribution(compile_to_circuit(g, a, WORKED_ANGLES)).probs
        base = np.sum((p - 0.25) ** 2)
        for lam in (0.0, 0.3, 0.7, 1.0):
            q = apply_noise(OutcomeDistribution(2, p), NoiseModel(depolarizing_strength=lam)).probs
            self.assertAlmostEqual(np.sum((p - q) ** 2), lam ** 2 * base, places=12)


class TestSampling(unittest.TestCase):
    def test_deterministic_circuit(self):
        g, a, _ = h6()
        circuit = compile_to_circuit(g, a, AngleSet({v: 0.0 for v in g.vertices}))
        table = sample(circuit, 500, seed=3)
        self.assertEqual(dict(table.counts), {"00": 500})

    def test_same_seed_same_table(self):
        g, _, b = h6()
        circuit = compile_to_circuit(g, b, random_instance(g, seed=2))
        self.assertEqual(sample(circuit, 1000, seed=9).to_dict(), sample(circuit, 1000, seed=9).to_dict())

    def test_shots_preserved(self):
        g, a, _ = h6()
        table = sample(compile_to_circuit(g, a, WORKED_ANGLES), 1234, noise=NoiseModel.preset("rigetti19q"), seed=1)
        self.assertEqual(table.shots, 1234)
        self.assertEqual(table.labels, (5, 6))

    def test_no_shots(self):
        g, a, _ = h6()
        with self.assertRaises(InsufficientShots):
            sample(compile_to_circuit(g, a, WORKED_ANGLES), 0)

    def test_worked_example_frequencies(self):
        g, a, _ = h6()
        circuit = compile_to_circuit(g, a, WORKED_ANGLES)
        shots = 100_000
        table = sample(circuit, shots, seed=2024)
        p = exact_distribution(circuit).probs
        freq = table.frequencies()
        for f, q in zip(freq, p):
            self.assertLessEqual(abs(f - q), 4 * math.sqrt(q * (1 - q) / shots) + 1e-12)
        _, pvalue = chisquare(table.as_array(), p * shots)
        self.assertGreater(pvalue, 1e-3)


class TestCalibration(unittest.TestCase):
    def test_hits_target(self):
        g, a, _ = h6()
        vecs = [pattern_distribution(g, a, random_instance(g, seed=s)).probs for s in range(10)]
        lam = calibrate_depolarizing(0.033, vecs)
        base = np.mean([np.sum((p - 1 / p.size) ** 2) for p in vecs])
        self.assertAlmostEqual(lam ** 2 * base, 0.033, places=9)
        self.assertTrue(0.0 < lam <= 1.0)

    def test_full_strength_target(self):
        vecs = [np.array([0.7, 0.1, 0.1, 0.1]), np.array([0.4, 0.4, 0.1, 0.1])]
        base = np.mean([np.sum((p - 0.25) ** 2) for p in vecs])
        self.assertAlmostEqual(calibrate_depolarizing(base, vecs), 1.0, places=12)
        self.assertAlmostEqual(calibrate_depolarizing(base / 4, vecs), 0.5, places=12)

    def test_zero_target(self):
        self.assertEqual(calibrate_depolarizing(0.0, [np.array([1.0, 0.0])]), 0.0)

    def test_unreachable(self):
        with self.assertRaises(ValidationError):
            calibrate_depolarizing(0.5, [np.full(4, 0.25) + np.array([0.01, -0.01, 0.0, 0.0])])


if __name__ == "__main__":
    unittest.main()
