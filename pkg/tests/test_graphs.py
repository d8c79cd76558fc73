import tempfile
import unittest
from pathlib import Path

from mbqc_crosscheck.errors import (
    Disconnected,
    DuplicateEdge,
    SelfLoop,
    UnequalIOSize,
    UnknownName,
    UnknownVertex,
    ValidationError,
)
from mbqc_crosscheck.graphs import (
    BUILTIN_NAMES,
    build_graph,
    builtin_graph,
    flow_by_name,
    graph_from_circuit,
    graph_state_expectation,
    is_isomorphic,
    load_graph,
    measurement_order,
    paths,
    save_graph,
    stabilizer_generator,
    validate_flow,
)
from mbqc_crosscheck.models import FlowSpec
from mbqc_crosscheck.patterns import compile_to_circuit, random_instance


class TestBuildGraph(unittest.TestCase):
    def test_rejects_bad_structure(self):
        with self.assertRaises(SelfLoop):
            build_graph([1, 2], [(1, 1), (1, 2)], [1], [2])
        with self.assertRaises(DuplicateEdge):
            build_graph([1, 2], [(1, 2), (2, 1)], [1], [2])
        with self.assertRaises(UnknownVertex):
            build_graph([1, 2], [(1, 3)], [1], [2])
        with self.assertRaises(Disconnected):
            build_graph([1, 2, 3, 4], [(1, 2), (3, 4)], [1, 3], [2, 4])
        with self.assertRaises(UnequalIOSize):
            build_graph([1, 2, 3], [(1, 2), (2, 3)], [1], [2, 3])

    def test_error_family(self):
        # every input problem is a ValueError subclass
        with self.assertRaises(ValueError):
            build_graph([1], [(1, 1)], [1], [1])

    def test_h6_shape(self):
        g, flows = builtin_graph("H6")
        self.assertEqual(g.n, 6)
        self.assertEqual(len(g.edges), 5)
        self.assertEqual(sorted(g.neighbors(3)), [1, 4, 5])
        self.assertEqual([f.name for f in flows], ["a", "b"])

    def test_unknown_builtin(self):
        with self.assertRaises(UnknownName):
            builtin_graph("H7")


class TestFlows(unittest.TestCase):
    def test_builtin_flows_are_valid(self):
        for name in BUILTIN_NAMES:
            g, flows = builtin_graph(name)
            for f in flows:
                report = validate_flow(g, f)
                self.assertTrue(report.valid, f"{name}/{f.name}: {report.kinds()}")

    def test_output_counts(self):
        expected = {"H6": (2, 3), "BOX_2x4": (2, 4), "BOX_2x5": (2, 5)}
        for name, widths in expected.items():
            g, flows = builtin_graph(name)
            self.assertEqual(tuple(len(f.outputs(g)) for f in flows), widths)

    def test_h6_flow_b_outputs(self):
        g, flows = builtin_graph("H6")
        b = flow_by_name(flows, "b")
        self.assertEqual(b.outputs(g), (2, 5, 6))
        self.assertEqual(b.inputs(g), (1, 2, 5))
        self.assertEqual(paths(g, b), [(2,), (5,), (1, 3, 4, 6)])

    def test_deleting_a_flow_edge_breaks_the_flow(self):
        checked = 0
        for name in BUILTIN_NAMES:
            g, flows = builtin_graph(name)
            for f in flows:
                for u, w in f.successor.items():
                    edges = [e for e in g.edges if set(e) != {u, w}]
                    try:
                        mutated = build_graph(g.vertices, edges, g.inputs, g.outputs)
                    except Disconnected:
                        continue
                    self.assertIn("non-neighbor", validate_flow(mutated, f).kinds())
                    checked += 1
        self.assertGreater(checked, 0)

    def test_order_violation_reported(self):
        g, _ = builtin_graph("H6")
        # 3 is measured before 2, but 2's successor 4 neighbors 3
        bad = FlowSpec(successor={1: 3, 2: 4, 3: 5, 4: 6}, order=(1, 3, 2, 4), name="bad")
        report = validate_flow(g, bad)
        self.assertFalse(report.valid)
        self.assertIn("order-violation", report.kinds())

    def test_reversed_order_reported(self):
        g, flows = builtin_graph("H6")
        a = flow_by_name(flows, "a")
        reversed_a = FlowSpec(successor=dict(a.successor), order=(4, 3, 2, 1), name="a-reversed")
        report = validate_flow(g, reversed_a)
        self.assertFalse(report.valid)
        self.assertIn("order-violation", report.kinds())

    def test_non_injective_and_incomplete(self):
        g, _ = builtin_graph("H6")
        bad = FlowSpec(successor={1: 3, 4: 3}, order=(1,), name="bad")
        kinds = validate_flow(g, bad).kinds()
        self.assertIn("non-injective", kinds)
        self.assertIn("order-incomplete", kinds)

    def test_unknown_vertex_is_data_not_exception(self):
        g, _ = builtin_graph("H6")
        report = validate_flow(g, FlowSpec(successor={1: 9}, order=(1,)))
        self.assertEqual(report.kinds(), ["unknown-vertex"])
        self.assertFalse(report)

    def test_measurement_order_puts_outputs_last(self):
        g, flows = builtin_graph("H6")
        self.assertEqual(measurement_order(g, flows[1]), (1, 3, 4, 2, 5, 6))


class TestCircuitRoundTrip(unittest.TestCase):
    def test_rebuilt_graph_is_isomorphic(self):
        for name in BUILTIN_NAMES:
            g, flows = builtin_graph(name)
            for f in flows:
                circuit = compile_to_circuit(g, f, random_instance(g, seed=3))
                rebuilt, rebuilt_flow = graph_from_circuit(circuit)
                self.assertTrue(is_isomorphic(g, rebuilt), f"{name}/{f.name}")
                self.assertTrue(validate_flow(rebuilt, rebuilt_flow).valid)

    def test_vertex_count_conventions(self):
        g, flows = builtin_graph("H6")
        circuit = compile_to_circuit(g, flows[0], random_instance(g, seed=1))
        n_j = sum(1 for gate in circuit.gates if gate.kind == "J")
        merged, _ = graph_from_circuit(circuit, "merged")
        separate, _ = graph_from_circuit(circuit, "separate")
        self.assertEqual(merged.n, n_j)
        self.assertEqual(separate.n, n_j + circuit.n_wires)

    def test_unknown_convention(self):
        g, flows = builtin_graph("H6")
        circuit = compile_to_circuit(g, flows[0], random_instance(g, seed=1))
        with self.assertRaises(UnknownName):
            graph_from_circuit(circuit, "fused")


class TestFiles(unittest.TestCase):
    def test_save_and_load(self):
        g, flows = builtin_graph("BOX_2x4")
        with tempfile.TemporaryDirectory() as tmp:
            path = save_graph(g, Path(tmp) / "box.json", flows)
            loaded, loaded_flows = load_graph(path)
        self.assertEqual(loaded.edges, g.edges)
        self.assertEqual([f.name for f in loaded_flows], [f.name for f in flows])
        self.assertEqual(dict(loaded_flows[1].successor), dict(flows[1].successor))

    def test_missing_file(self):
        with self.assertRaises(ValidationError):
            load_graph("no/such/graph.json")


class TestStabilizers(unittest.TestCase):
    def test_generators_have_unit_expectation(self):
        g, _ = builtin_graph("H6")
        for v in g.vertices:
            self.assertAlmostEqual(graph_state_expectation(g, stabilizer_generator(g, v)), 1.0, places=12)

    def test_single_z_vanishes(self):
        g, _ = builtin_graph("H6")
        self.assertAlmostEqual(graph_state_expectation(g, "ZIIIII"), 0.0, places=12)

    def test_bad_pauli_string(self):
        g, _ = builtin_graph("H6")
        with self.assertRaises(ValidationError):
            graph_state_expectation(g, "XQ")


if __name__ == "__main__":
    unittest.main()
