"""
mbqc_crosscheck.store
=====================

File storage of one run + export (CSV/JSON).

Layout
------
plan.json                       experiment plan
counts/<device>/<job_id>.json   raw counts as returned by the device
report.json                     cross-check report (deterministic)
run_meta.json                   timestamps and timings
audit.json                      failed jobs and excluded instances

Every job owns its own file, so concurrent jobs never share a writer.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from .errors import MissingDistributions
from .models import CountsTable

logger = logging.getLogger(__name__)


def _dump(data: Any) -> str:
    return json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


class RunStore:
    """Directory of one experiment run."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def init(self) -> "RunStore":
        """Create the directory layout if needed."""
        (self.root / "counts").mkdir(parents=True, exist_ok=True)
        return self

    # -------------------- Plan --------------------

    @property
    def plan_path(self) -> Path:
        return self.root / "plan.json"

    def save_plan(self, plan: Dict[str, Any]) -> Path:
        self.init()
        self.plan_path.write_text(_dump(plan), encoding="utf-8")
        return self.plan_path

    def load_plan(self) -> Dict[str, Any]:
        if not self.plan_path.exists():
            raise MissingDistributions(f"В каталоге {self.root} нет plan.json.")
        return json.loads(self.plan_path.read_text(encoding="utf-8"))

    # -------------------- Counts --------------------

    def counts_dir(self, device_id: str) -> Path:
        return self.root / "counts" / device_id

    def counts_path(self, device_id: str, job_id: str) -> Path:
        return self.counts_dir(device_id) / f"{job_id}.json"

    def save_counts(self, device_id: str, job_id: str, table: CountsTable) -> Path:
        return table.save(self.counts_path(device_id, job_id))

    def load_counts(self, device_id: str, job_id: str) -> CountsTable:
        return CountsTable.load(self.counts_path(device_id, job_id))

    def device_ids(self) -> List[str]:
        base = self.root / "counts"
        return sorted(p.name for p in base.iterdir() if p.is_dir()) if base.exists() else []

    # -------------------- Report --------------------

    @property
    def report_path(self) -> Path:
        return self.root / "report.json"

    def save_report(self, report: Dict[str, Any]) -> Path:
        self.init()
        self.report_path.write_text(_dump(report), encoding="utf-8")
        return self.report_path

    def load_report(self) -> Dict[str, Any]:
        if not self.report_path.exists():
            raise MissingDistributions(f"В каталоге {self.root} нет report.json.")
        return json.loads(self.report_path.read_text(encoding="utf-8"))

    def save_meta(self, meta: Dict[str, Any]) -> Path:
        p = self.root / "run_meta.json"
        p.write_text(_dump(meta), encoding="utf-8")
        return p

    def save_audit(self, records: List[Dict[str, Any]]) -> Optional[Path]:
        if not records:
            return None
        p = self.root / "audit.json"
        p.write_text(_dump(records), encoding="utf-8")
        logger.warning("%d audit record(s) written to %s", len(records), p)
        return p

    def load_audit(self) -> List[Dict[str, Any]]:
        p = self.root / "audit.json"
        if not p.exists():
            return []
        return json.loads(p.read_text(encoding="utf-8"))

    # -------------------- Export --------------------

    def export_json(self, path: str | Path) -> Path:
        """Plan and report in one JSON file."""
        data = {"plan": self.load_plan(), "report": self.load_report()}
        p = Path(path)
        p.write_text(_dump(data), encoding="utf-8")
        return p

    def export_csv(self, folder: str | Path) -> List[Path]:
        """Per-instance pair distances and device means as CSV files inside folder."""
        folder = Path(folder)
        folder.mkdir(parents=True, exist_ok=True)
        report = self.load_report()
        written: List[Path] = []

        def write_csv(filename: str, rows: List[Dict[str, Any]], fieldnames: List[str]) -> None:
            with (folder / filename).open("w", newline="", encoding="utf-8") as f:
                w = csv.DictWriter(f, fieldnames=fieldnames)
                w.writeheader()
                for r in rows:
                    w.writerow(r)
            written.append(folder / filename)

        exact_path = self.root / "exact.json"
        exact = json.loads(exact_path.read_text(encoding="utf-8")) if exact_path.exists() else {}
        instances = []
        for pair in report.get("pairs", []):
            pair_exact = exact.get("|".join(pair["pair"]), {})
            for row in pair.get("per_instance", []):
                instances.append({
                    "device_a": pair["pair"][0],
                    "device_b": pair["pair"][1],
                    "instance_id": row["instance_id"],
                    "l2": row["l2"]["value"],
                    "err": row["l2"]["err"],
                    "exact": pair_exact.get(str(row["instance_id"])),
                    "in_subset": row.get("in_subset"),
                })
        means = [
            {"device": d, "mean_l2": m["mean_l2"], "err": m["err"], "theory_l2": m.get("theory_l2"),
             "theory_err": m.get("theory_err")}
            for d, m in sorted(report.get("device_means", {}).items())
        ]
        write_csv("pair_instances.csv", instances,
                  ["device_a", "device_b", "instance_id", "l2", "err", "exact", "in_subset"])
        write_csv("device_means.csv", means, ["device", "mean_l2", "err", "theory_l2", "theory_err"])
        return written
