import tempfile
import unittest
from pathlib import Path

import pandas as pd

from mbqc_crosscheck.analysis import draw_flow, emit_plots, scatter_rows
from mbqc_crosscheck.devices import LocalSimulatorDevice
from mbqc_crosscheck.errors import MissingDistributions
from mbqc_crosscheck.graphs import builtin_graph
from mbqc_crosscheck.harness import CrossCheckReport, ExperimentPlan, run_experiment
from mbqc_crosscheck.models import NoiseModel
from mbqc_crosscheck.patterns import random_instance, relate_outcomes
from mbqc_crosscheck.simulator import pattern_distribution
from mbqc_crosscheck.store import RunStore


class TestAnalysis(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()
        self.store = RunStore(Path(self.tmpdir.name) / "run").init()
        plan = ExperimentPlan(
            graph="H6",
            flows={"ibm": "a", "rigetti": "b"},
            instance_count=6,
            comparison_subset=5,
            shots=1000,
            master_seed=3,
            subsample_trials=10,
        )
        devices = [
            LocalSimulatorDevice("ibm", NoiseModel.preset("ibmqx2")),
            LocalSimulatorDevice("rigetti", NoiseModel.preset("rigetti19q")),
        ]
        self.report = run_experiment(plan, devices, store=self.store)

    def tearDown(self):
        self.tmpdir.cleanup()

    def test_reports_create_files(self):
        out_dir = Path(self.tmpdir.name) / "plots"
        paths = emit_plots(CrossCheckReport.load(self.store), out_dir)
        names = {p.name for p in paths.all}
        for expected in ("scatter_ibm__rigetti.csv", "scatter_ibm__rigetti.png", "regression.csv",
                         "bars.csv", "bars.png", "subsample.csv", "flow_H6_a.png", "flow_H6_b.png"):
            self.assertIn(expected, names)
        for p in paths.all:
            self.assertTrue(p.exists(), p)

        scatter = pd.read_csv(out_dir / "scatter_ibm__rigetti.csv")
        self.assertEqual(len(scatter), 5 * 4)
        self.assertTrue((scatter["y_err"] > 0).any())
        bars = pd.read_csv(out_dir / "bars.csv")
        self.assertEqual(list(bars["device"]), ["ibm", "rigetti"])

    def test_report_without_distributions(self):
        data = dict(self.report.data, distributions={})
        with self.assertRaises(MissingDistributions):
            emit_plots(data, Path(self.tmpdir.name) / "empty")

    def test_scatter_rows_on_ideal_vectors(self):
        g, flows = builtin_graph("H6")
        rel = relate_outcomes(g, flows[0], flows[1], reference_bits={2: 1})
        angles = random_instance(g, seed=5)
        pa = pattern_distribution(g, flows[0], angles, {2: 1})
        pb = pattern_distribution(g, flows[1], angles)
        rows = scatter_rows(pa, pb.probs, rel)
        self.assertEqual([r["b"] for r in rows], ["100", "101", "110", "111"])
        for r in rows:
            self.assertAlmostEqual(r["x"], r["y"], places=12)

    def test_draw_flow(self):
        g, flows = builtin_graph("BOX_2x4")
        path = draw_flow(g, flows[1], Path(self.tmpdir.name) / "flow.png")
        self.assertTrue(path.exists())


if __name__ == "__main__":
    unittest.main()
