import math
import tempfile
import unittest
from pathlib import Path

import numpy as np

from mbqc_crosscheck.errors import ShapeMismatch, UnknownName, ValidationError
from mbqc_crosscheck.models import (
    AngleSet,
    Circuit,
    CountsTable,
    FlowSpec,
    Gate,
    NoiseModel,
    OpenGraph,
    OutcomeDistribution,
    RandomizationBits,
    all_bitstrings,
    wrap_angle,
    xor_bits,
)


class TestModels(unittest.TestCase):
    def test_graph_validation(self):
        with self.assertRaises(ValidationError):
            OpenGraph(vertices=(1, 1), edges=(), inputs=(1,), outputs=(1,))  # repeated vertex
        with self.assertRaises(ValidationError):
            OpenGraph(vertices=(1, 2), edges=((1, 2),), inputs=(1, 1), outputs=(2, 2))

        g = OpenGraph(vertices=(2, 1), edges=((2, 1),), inputs=(1,), outputs=(2,))
        self.assertEqual(g.to_dict()["vertices"], [1, 2])
        self.assertTrue(g.has_edge(1, 2))
        self.assertEqual(OpenGraph.from_dict(g.to_dict()).to_dict(), g.to_dict())

    def test_flow_outputs_and_inputs(self):
        g = OpenGraph(vertices=(1, 2, 3), edges=((1, 2), (2, 3)), inputs=(1,), outputs=(3,))
        f = FlowSpec(successor={"1": 2, 2: 3}, order=(1, 2), name="line")
        self.assertEqual(f.outputs(g), (3,))
        self.assertEqual(f.inputs(g), (1,))
        self.assertEqual(FlowSpec.from_dict(f.to_dict()).successor, f.successor)

    def test_angles_wrap(self):
        self.assertAlmostEqual(wrap_angle(-math.pi / 2), 3 * math.pi / 2, places=12)
        self.assertEqual(wrap_angle(2 * math.pi), 0.0)
        angles = AngleSet({1: 5 * math.pi, 2: 0.25})
        self.assertAlmostEqual(angles[1], math.pi, places=12)
        self.assertTrue(angles.isclose(AngleSet({1: -math.pi, 2: 0.25 + 2 * math.pi})))
        self.assertFalse(angles.isclose(AngleSet({1: math.pi})))

    def test_randomization_bits(self):
        with self.assertRaises(ValidationError):
            RandomizationBits(k={1: 2}, r={})
        bits = RandomizationBits.zeros([1, 2, 3], [3])
        self.assertTrue(bits.is_zero())
        self.assertEqual(RandomizationBits.from_dict(bits.to_dict()), bits)

    def test_circuit_wires(self):
        with self.assertRaises(ValidationError):
            Circuit(wires=(0,), gates=(Gate("CZ", (0, 1)),))
        c = Circuit(wires=(0, 1), gates=(Gate("J", (0,), angle=-math.pi, vertex=1),), wire_to_vertex={0: 5, 1: 6})
        self.assertEqual(c.output_labels(), (5, 6))
        self.assertAlmostEqual(c.gates[0].angle, math.pi, places=12)
        self.assertEqual(Circuit.from_dict(c.to_dict()).output_labels(), (5, 6))

    def test_bitstrings(self):
        self.assertEqual(all_bitstrings(2), ["00", "01", "10", "11"])
        self.assertEqual(xor_bits("0110", "0011"), "0101")
        with self.assertRaises(ShapeMismatch):
            xor_bits("01", "1")

    def test_distribution_validation(self):
        with self.assertRaises(ShapeMismatch):
            OutcomeDistribution(2, [0.5, 0.5])
        with self.assertRaises(ValidationError):
            OutcomeDistribution(1, [0.7, 0.7])
        d = OutcomeDistribution(2, [0.1, 0.2, 0.3, 0.4], labels=(5, 6))
        self.assertAlmostEqual(d.prob("10"), 0.3, places=12)
        self.assertAlmostEqual(d.purity(), 0.3, places=12)
        self.assertEqual(list(d.to_frame()["bitstring"]), ["00", "01", "10", "11"])
        self.assertTrue(np.allclose(OutcomeDistribution.from_dict(d.to_dict()).probs, d.probs))

    def test_counts_table(self):
        with self.assertRaises(ValidationError):
            CountsTable(n_bits=2, counts={"00": 3}, shots=4)
        with self.assertRaises(ShapeMismatch):
            CountsTable(n_bits=2, counts={"0": 3}, shots=3)

        t = CountsTable.from_array([5, 0, 2, 3], 2, labels=(5, 6))
        self.assertEqual(t.shots, 10)
        self.assertEqual(dict(t.counts), {"00": 5, "10": 2, "11": 3})
        self.assertEqual(dict(t.relabel("01").counts), {"01": 5, "11": 2, "10": 3})
        self.assertTrue(np.allclose(t.frequencies(), [0.5, 0.0, 0.2, 0.3]))

        with tempfile.TemporaryDirectory() as tmp:
            fixed = t.with_fixes({2: 1})
            loaded = CountsTable.load(fixed.save(Path(tmp) / "job.json"))
        self.assertEqual(loaded, fixed)

    def test_noise_model(self):
        with self.assertRaises(ValidationError):
            NoiseModel(depolarizing_strength=1.5)
        with self.assertRaises(UnknownName):
            NoiseModel.preset("sycamore")
        self.assertTrue(NoiseModel.ideal().is_ideal())
        ibm = NoiseModel.preset("ibmqx2")
        self.assertTrue(np.allclose(ibm.flips_for(2), [0.035, 0.015]))
        with self.assertRaises(ShapeMismatch):
            ibm.flips_for(4)
        self.assertTrue(np.allclose(NoiseModel(readout_flip=0.02).flips_for(3), 0.02))
        tweaked = NoiseModel.from_dict({"preset": "rigetti19q", "depolarizing_strength": 0.1})
        self.assertEqual(tweaked.readout_flip, (0.03, 0.053, 0.079))
        self.assertEqual(tweaked.depolarizing_strength, 0.1)


if __name__ == "__main__":
    unittest.main()
