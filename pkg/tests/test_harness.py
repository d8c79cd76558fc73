import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

from mbqc_crosscheck.devices import ExternalDevice, LocalSimulatorDevice, ReplayDevice
from mbqc_crosscheck.errors import DeviceFailure, PlanInvalid
from mbqc_crosscheck.graphs import load_graph
from mbqc_crosscheck.harness import (
    CrossCheckReport,
    ExperimentPlan,
    comparison_subset,
    instance_angles,
    job_id,
    plan_jobs,
    plan_pairs,
    recompute_report,
    run_experiment,
    self_verify,
)
from mbqc_crosscheck.models import NoiseModel
from mbqc_crosscheck.simulator import calibrate_depolarizing, exact_distribution, pattern_distribution
from mbqc_crosscheck.store import RunStore


def small_plan(**overrides):
    settings = dict(
        graph="H6",
        flows={"ideal": "a", "noisy": "b"},
        instance_count=8,
        comparison_subset=8,
        shots=2000,
        master_seed=7,
        subsample_trials=20,
    )
    settings.update(overrides)
    return ExperimentPlan(**settings)


def ideal_devices():
    return [LocalSimulatorDevice("ideal"), LocalSimulatorDevice("noisy")]


class TestPlan(unittest.TestCase):
    def test_resolve(self):
        graph, flows = small_plan().resolve()
        self.assertEqual(graph.name, "H6")
        self.assertEqual({d: f.name for d, f in flows.items()}, {"ideal": "a", "noisy": "b"})

    def test_invalid_settings_are_collected(self):
        with self.assertRaises(PlanInvalid) as ctx:
            small_plan(flows={"ideal": "a"}, shots=2, comparison_subset=20).resolve()
        message = str(ctx.exception)
        self.assertIn("двух устройств", message)
        self.assertIn("трёх запусков", message)
        with self.assertRaises(PlanInvalid):
            small_plan(flows={"ideal": "a", "noisy": "zigzag"}).resolve()
        with self.assertRaises(PlanInvalid):
            small_plan(graph="H9").resolve()

    def test_file_round_trip(self):
        plan = small_plan(reference_bits={2: 1})
        with tempfile.TemporaryDirectory() as tmp:
            loaded = ExperimentPlan.load(plan.save(Path(tmp) / "plan.json"))
        self.assertEqual(loaded, plan)
        with self.assertRaises(PlanInvalid):
            ExperimentPlan.from_dict({"graph": "H6", "colour": "red"})


class TestJobs(unittest.TestCase):
    def test_job_ids(self):
        self.assertEqual(job_id(3, "dev"), "i0003-dev-ref")
        self.assertEqual(job_id(3, "dev", (2, 5, 6), 2), "i0003-dev-v2.5.6-j02")

    def test_job_layout(self):
        plan = small_plan(instance_count=3, comparison_subset=3)
        graph, flows = plan.resolve()
        specs = plan_jobs(plan, graph, flows, plan_pairs(plan, graph, flows))
        self.assertEqual(len(specs), 3 * 2 * (1 + plan.jobs_per_instance))
        for spec in specs:
            if spec.is_reference:
                self.assertEqual(dict(spec.fixes), {})
            elif spec.device_id == "ideal":
                self.assertEqual(set(spec.fixes), {2})
            else:
                self.assertEqual(dict(spec.fixes), {})
        self.assertEqual(len({s.job.job_id for s in specs}), len(specs))

    def test_masks_undo_rewrites(self):
        plan = small_plan(instance_count=4, comparison_subset=4)
        graph, flows = plan.resolve()
        specs = plan_jobs(plan, graph, flows, plan_pairs(plan, graph, flows))
        self.assertTrue(any(int(s.mask, 2) for s in specs))
        for spec in specs:
            angles = instance_angles(plan, graph, spec.instance)
            original = pattern_distribution(graph, flows[spec.device_id], angles, spec.fixes).probs
            rewritten = exact_distribution(spec.job.circuit).probs
            index = np.arange(rewritten.size)
            self.assertTrue(np.allclose(rewritten[index ^ int(spec.mask, 2)], original, atol=1e-12), spec.job.job_id)

    def test_comparison_subset(self):
        plan = small_plan(instance_count=20, comparison_subset=5)
        chosen = comparison_subset(plan, [])
        self.assertEqual(len(chosen), 5)
        self.assertEqual(chosen, sorted(chosen))
        self.assertEqual(comparison_subset(plan, chosen[:2]), chosen[2:])


class TestRunExperiment(unittest.TestCase):
    def test_ideal_devices_agree(self):
        report = run_experiment(small_plan(instance_count=12, comparison_subset=12), ideal_devices())
        pair = report.pair("ideal", "noisy")
        self.assertTrue(pair["in_table"])
        self.assertFalse(pair["same_width"])
        self.assertEqual(pair["relation"]["scale"], "2")
        covered = sum(1 for r in pair["per_instance"] if abs(r["l2"]["value"]) <= 4 * r["l2"]["err"])
        self.assertGreaterEqual(covered, 9)
        agg = pair["aggregate"]
        self.assertEqual(agg["n"], 12)
        self.assertLess(abs(agg["mean_l2"]), 4 * agg["err"])
        self.assertTrue(all(abs(v) < 1e-12 for v in report.exact["ideal|noisy"].values()))
        self.assertEqual(report.pair_table(), report.pairs)

    def test_calibrated_depolarizing_pair(self):
        plan = small_plan(instance_count=10, comparison_subset=10, shots=4000)
        graph, flows = plan.resolve()
        vectors = [
            pattern_distribution(graph, flows["noisy"], instance_angles(plan, graph, i)).probs
            for i in comparison_subset(plan, [])
        ]
        lam = calibrate_depolarizing(0.033, vectors)
        devices = [LocalSimulatorDevice("ideal"), LocalSimulatorDevice("noisy", NoiseModel(depolarizing_strength=lam))]
        report = run_experiment(plan, devices)
        exact = report.exact["ideal|noisy"]
        exact_mean = np.mean([exact[str(i)] for i in report.data["comparison_instances"]])
        self.assertAlmostEqual(float(exact_mean), 0.033, places=9)
        agg = report.pair("ideal", "noisy")["aggregate"]
        self.assertLess(abs(agg["mean_l2"] - 0.033), 4 * agg["err"])
        self.assertGreater(report.data["device_means"]["noisy"]["theory_l2"],
                           report.data["device_means"]["ideal"]["theory_l2"])

    def test_report_is_deterministic(self):
        plan = small_plan(instance_count=4, comparison_subset=3)
        first = run_experiment(plan, ideal_devices(), workers=1)
        second = run_experiment(plan, ideal_devices(), workers=4)
        self.assertEqual(first.to_json(), second.to_json())
        self.assertNotEqual(first.to_json(), run_experiment(small_plan(instance_count=4, comparison_subset=3,
                                                                       master_seed=8), ideal_devices()).to_json())

    def test_report_sections(self):
        report = run_experiment(small_plan(instance_count=6, comparison_subset=4), ideal_devices())
        data = report.data
        self.assertEqual(len(data["comparison_instances"]), 4)
        self.assertEqual(sorted(data["distributions"]["ideal"]), sorted(str(i) for i in data["comparison_instances"]))
        self.assertEqual(data["sanity"]["noisy"]["n_outputs"], 3)
        self.assertFalse(data["device_means"]["ideal"]["theory_scalable"])
        self.assertEqual(data["pairs"][0]["subsample"][0]["size"], 5)
        self.assertIn("slope", data["pairs"][0]["regression"])
        self.assertEqual(data["audit"], [])

    def test_device_ids_must_match_plan(self):
        with self.assertRaises(PlanInvalid):
            run_experiment(small_plan(), [LocalSimulatorDevice("ideal"), LocalSimulatorDevice("other")])
        with self.assertRaises(PlanInvalid):
            run_experiment(small_plan(), [LocalSimulatorDevice("ideal")])


class TestFailures(unittest.TestCase):
    def test_strict_device_aborts(self):
        with tempfile.TemporaryDirectory() as tmp:
            devices = [LocalSimulatorDevice("ideal"), ReplayDevice("noisy", Path(tmp) / "empty")]
            with self.assertRaises(DeviceFailure) as ctx:
                run_experiment(small_plan(instance_count=2, comparison_subset=2), devices)
        self.assertEqual(ctx.exception.device_id, "noisy")

    def test_external_failures_are_audited(self):
        failing = ExternalDevice("noisy", [sys.executable, "-c", "import sys; sys.exit(1)"], attempts=1)
        plan = small_plan(instance_count=3, comparison_subset=3, shots=50)
        with tempfile.TemporaryDirectory() as tmp:
            store = RunStore(tmp).init()
            report = run_experiment(plan, [LocalSimulatorDevice("ideal"), failing], store=store)
            self.assertTrue((Path(tmp) / "audit.json").exists())
        self.assertEqual(report.data["excluded_instances"], [0, 1, 2])
        self.assertEqual(len(report.data["audit"]), 3 * (1 + plan.jobs_per_instance))
        self.assertTrue(all(r["device_id"] == "noisy" for r in report.data["audit"]))
        self.assertIsNone(report.pairs[0]["aggregate"]["mean_l2"])


class TestReplay(unittest.TestCase):
    def test_recomputed_report_is_identical(self):
        plan = small_plan(instance_count=4, comparison_subset=4)
        with tempfile.TemporaryDirectory() as tmp:
            store = RunStore(tmp).init()
            original = run_experiment(plan, ideal_devices(), store=store)
            replayed = recompute_report(store)
            self.assertEqual(replayed.to_json(), original.to_json())
            self.assertEqual(CrossCheckReport.load(store).data, original.data)

            written = store.export_csv(Path(tmp) / "csv")
            self.assertEqual([p.name for p in written], ["pair_instances.csv", "device_means.csv"])
            rows = written[0].read_text(encoding="utf-8").splitlines()
            self.assertEqual(len(rows), 1 + 4)

    def test_audited_run_is_recomputed(self):
        failing = ExternalDevice("noisy", [sys.executable, "-c", "import sys; sys.exit(1)"], attempts=1)
        plan = small_plan(instance_count=2, comparison_subset=2, shots=50)
        with tempfile.TemporaryDirectory() as tmp:
            store = RunStore(tmp).init()
            original = run_experiment(plan, [LocalSimulatorDevice("ideal"), failing], store=store)
            self.assertEqual(len(store.load_audit()), len(original.data["audit"]))
            replayed = recompute_report(store)
        self.assertEqual(replayed.data["excluded_instances"], [0, 1])
        self.assertEqual(replayed.to_json(), original.to_json())

    def test_missing_counts_file(self):
        plan = small_plan(instance_count=2, comparison_subset=2)
        with tempfile.TemporaryDirectory() as tmp:
            store = RunStore(tmp).init()
            run_experiment(plan, ideal_devices(), store=store)
            store.counts_path("noisy", job_id(1, "noisy")).unlink()
            with self.assertRaises(DeviceFailure) as ctx:
                recompute_report(store)
        self.assertEqual(ctx.exception.job_id, job_id(1, "noisy"))


class TestSelfVerify(unittest.TestCase):
    def test_two_flows_on_one_device(self):
        plan = small_plan(flows={}, instance_count=3, comparison_subset=3)
        report = self_verify(plan, LocalSimulatorDevice("sim"))
        self.assertEqual(report.pairs[0]["pair"], ["sim@a", "sim@b"])
        self.assertTrue(all(abs(v) < 1e-12 for v in report.exact["sim@a|sim@b"].values()))

    def test_needs_two_distinct_flows(self):
        with self.assertRaises(PlanInvalid):
            self_verify(small_plan(), LocalSimulatorDevice("sim"), flows=["a", "a"])

    def test_explicit_flows(self):
        _, flows = load_graph("BOX_2x4")
        names = [flows[1].name, flows[0].name]
        plan = small_plan(graph="BOX_2x4", flows={}, instance_count=2, comparison_subset=2, shots=500)
        report = self_verify(plan, LocalSimulatorDevice("sim", NoiseModel(readout_flip=0.02)), flows=names)
        self.assertEqual(sorted(report.data["devices"]), sorted(f"sim@{n}" for n in names))
        self.assertEqual(report.pairs[0]["relation"]["scale"], "4")


if __name__ == "__main__":
    unittest.main()
