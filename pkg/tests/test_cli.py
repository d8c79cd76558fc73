import io
import json
import math
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

from mbqc_crosscheck.cli import EXIT_DEVICE, EXIT_INCOMPLETE, EXIT_OK, EXIT_PLAN, main
from mbqc_crosscheck.harness import ExperimentPlan
from mbqc_crosscheck.models import AngleSet, RandomizationBits
from mbqc_crosscheck.patterns import Instance, save_instance

SMALL = ["--instances", "3", "--subset", "3", "--shots", "300", "--seed", "5"]


def quiet(argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue()


class TestCli(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()
        self.root = Path(self.tmpdir.name)
        self.registry = self.root / "devices.json"
        self.registry.write_text(json.dumps({"devices": [
            {"id": "sim1", "backend": "local", "flow": "a"},
            {"id": "sim2", "backend": "local", "noise": {"preset": "rigetti19q"}, "flow": "b"},
        ]}), encoding="utf-8")

    def tearDown(self):
        self.tmpdir.cleanup()

    def test_plan_command(self):
        out = self.root / "plan.json"
        code, _ = quiet(["plan", "--flow", "x=a", "--flow", "y=b", "--reference", "2=1", "--out", str(out)] + SMALL)
        self.assertEqual(code, EXIT_OK)
        plan = ExperimentPlan.load(out)
        self.assertEqual(plan.flows, {"x": "a", "y": "b"})
        self.assertEqual(plan.reference_bits, {2: 1})
        self.assertEqual(plan.shots, 300)

    def test_plan_from_registry(self):
        out = self.root / "plan.json"
        code, _ = quiet(["plan", "--devices", str(self.registry), "--out", str(out)])
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(ExperimentPlan.load(out).flows, {"sim1": "a", "sim2": "b"})

    def test_invalid_plan_exit_code(self):
        code, _ = quiet(["plan", "--flow", "x=a", "--out", str(self.root / "plan.json")])
        self.assertEqual(code, EXIT_PLAN)
        code, _ = quiet(["plan", "--flow", "x", "--out", str(self.root / "plan.json")])
        self.assertEqual(code, EXIT_PLAN)

    def test_run_report_and_plots(self):
        run_dir = self.root / "run"
        code, printed = quiet(["run", "--devices", str(self.registry), "--out", str(run_dir), "--workers", "2"] + SMALL)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("sim1 vs sim2", printed)
        original = (run_dir / "report.json").read_text(encoding="utf-8")

        code, _ = quiet(["report", "--out", str(run_dir), "--csv", str(self.root / "csv")])
        self.assertEqual(code, EXIT_OK)
        self.assertEqual((run_dir / "report.json").read_text(encoding="utf-8"), original)
        self.assertTrue((self.root / "csv" / "pair_instances.csv").exists())

        code, printed = quiet(["plots", "--out", str(run_dir)])
        self.assertEqual(code, EXIT_OK)
        self.assertTrue((run_dir / "plots" / "bars.png").exists())

    def test_device_failure_exit_code(self):
        registry = self.root / "broken.json"
        registry.write_text(json.dumps({"devices": [
            {"id": "sim1", "backend": "local", "flow": "a"},
            {"id": "lab", "backend": "replay", "directory": "nowhere", "flow": "b"},
        ]}), encoding="utf-8")
        code, _ = quiet(["run", "--devices", str(registry), "--out", str(self.root / "run")] + SMALL)
        self.assertEqual(code, EXIT_DEVICE)

    def test_missing_run_exit_code(self):
        code, _ = quiet(["report", "--out", str(self.root / "no-such-run")])
        self.assertEqual(code, EXIT_INCOMPLETE)

    def test_self_verify(self):
        code, printed = quiet(["self-verify", "--devices", str(self.registry), "--device", "sim2",
                               "--out", str(self.root / "sv")] + SMALL)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("sim2@a vs sim2@b", printed)

    def test_oracle(self):
        angles = AngleSet({1: 3 * math.pi / 4, 2: 7 * math.pi / 3, 3: math.pi / 3, 4: 0.0, 5: 2 * math.pi / 3,
                           6: math.pi})
        bits = RandomizationBits(k={1: 1, 2: 0, 3: 0, 4: 0, 5: 1, 6: 0}, r={2: 0, 5: 1, 6: 1})
        path = save_instance(Instance(graph="H6", flow_id="a", angles=angles, seed=1), self.root / "inst.json")
        out = self.root / "oracle.json"
        code, _ = quiet(["oracle", str(path), "--out", str(out)])
        self.assertEqual(code, EXIT_OK)
        result = json.loads(out.read_text(encoding="utf-8"))
        self.assertEqual(result["labels"], [5, 6])
        self.assertAlmostEqual(result["probs"]["00"], 0.207, delta=5e-4)
        self.assertNotIn("masks", result)

        path = save_instance(Instance(graph="H6", flow_id="b", angles=angles, bits=bits, seed=1), self.root / "b.json")
        code, printed = quiet(["oracle", str(path)])
        self.assertEqual(code, EXIT_OK)
        self.assertIn("011", json.loads(printed)["masks"])


if __name__ == "__main__":
    unittest.main()
