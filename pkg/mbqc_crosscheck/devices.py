"""
mbqc_crosscheck.devices
=======================

Devices turn a job (circuit, shots, seed) into a counts table.

Backends
--------
local      statevector simulator with an output-level noise model
replay     counts stored as ``<directory>/<job_id>.json``
external   a spawned command speaking one JSON line in, one JSON line out

The device only ever sees the (possibly rewritten) circuit; output masks
and fix bits stay with the harness.
"""

from __future__ import annotations

import json
import logging
import re
import subprocess
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from .errors import DeviceFailure, UnknownName, ValidationError
from .models import Circuit, CountsTable, NoiseModel, OutcomeDistribution
from .simulator import apply_noise, exact_distribution, sample

logger = logging.getLogger(__name__)

DEVICE_ID_RE = re.compile(r"^[A-Za-z0-9_.@-]+$")
EXTERNAL_ATTEMPTS = 3
EXTERNAL_TIMEOUT = 600.0


def check_device_id(device_id: str) -> str:
    device_id = (device_id or "").strip()
    if not DEVICE_ID_RE.match(device_id):
        raise ValidationError(f"Некорректный идентификатор устройства {device_id!r}.")
    return device_id


@dataclass(frozen=True)
class Job:
    """What a device receives."""
    job_id: str
    circuit: Circuit
    shots: int
    seed: int

    def to_dict(self) -> Dict[str, Any]:
        return {"job_id": self.job_id, "circuit": self.circuit.to_dict(), "shots": self.shots, "seed": self.seed}


class Device(ABC):
    """
    A sampling backend.

    ``strict`` devices abort the run on failure; non-strict ones lose the
    affected instance, which is excluded from averages and audited.
    """
    backend = ""
    strict = True

    def __init__(self, device_id: str) -> None:
        self.device_id = check_device_id(device_id)

    @abstractmethod
    def run(self, job: Job) -> CountsTable:
        """Counts for ``job``; raises :class:`DeviceFailure`."""

    def describe(self) -> Dict[str, Any]:
        return {"id": self.device_id, "backend": self.backend}

    def _checked(self, job: Job, table: CountsTable) -> CountsTable:
        if table.shots != job.shots or table.n_bits != job.circuit.n_wires:
            raise DeviceFailure(
                f"Устройство {self.device_id} вернуло {table.shots} запусков на {table.n_bits} битах "
                f"вместо {job.shots} на {job.circuit.n_wires} для задания {job.job_id}.",
                device_id=self.device_id,
                job_id=job.job_id,
            )
        return table


class LocalSimulatorDevice(Device):
    """Noisy statevector simulation; the sampling seed mixes job and noise seeds."""
    backend = "local"

    def __init__(self, device_id: str, noise: Optional[NoiseModel] = None) -> None:
        super().__init__(device_id)
        self.noise = noise or NoiseModel.ideal()

    def sampling_seed(self, job: Job) -> int:
        entropy = [int(job.seed), int(self.noise.seed or 0)]
        return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])

    def run(self, job: Job) -> CountsTable:
        logger.debug("local %s: job %s, %d shots", self.device_id, job.job_id, job.shots)
        table = sample(job.circuit, job.shots, noise=self.noise, seed=self.sampling_seed(job), device_id=self.device_id)
        return self._checked(job, table)

    def noisy_distribution(self, circuit: Circuit) -> OutcomeDistribution:
        """Exact distribution this device samples from."""
        return apply_noise(exact_distribution(circuit), self.noise)

    def describe(self) -> Dict[str, Any]:
        d = super().describe()
        d["noise"] = self.noise.to_dict()
        return d


class ReplayDevice(Device):
    """
    Returns stored tables; a missing table is a hard failure naming the job.

    ``failed`` maps job ids to the error a previous run audited for them;
    those jobs fail again with the same message and are audited, not fatal.
    """
    backend = "replay"

    def __init__(
        self,
        device_id: str,
        directory: str | Path,
        failed: Optional[Mapping[str, str]] = None,
    ) -> None:
        super().__init__(device_id)
        self.directory = Path(directory)
        self.failed = dict(failed or {})

    def run(self, job: Job) -> CountsTable:
        if job.job_id in self.failed:
            raise DeviceFailure(self.failed[job.job_id], device_id=self.device_id, job_id=job.job_id, audited=True)
        path = self.directory / f"{job.job_id}.json"
        if not path.exists():
            raise DeviceFailure(
                f"Нет сохранённых отсчётов для задания {job.job_id} устройства {self.device_id}.",
                device_id=self.device_id,
                job_id=job.job_id,
            )
        try:
            table = CountsTable.load(path)
        except (ValueError, KeyError) as exc:
            raise DeviceFailure(
                f"Файл {path} повреждён: {exc}", device_id=self.device_id, job_id=job.job_id
            ) from exc
        return self._checked(job, table)

    def describe(self) -> Dict[str, Any]:
        d = super().describe()
        d["directory"] = str(self.directory)
        return d


class ExternalDevice(Device):
    """
    Spawns ``command`` per job, writes one JSON request line to its stdin and
    reads a counts-table JSON line from its stdout. Retries up to ``attempts``
    times.
    """
    backend = "external"
    strict = False

    def __init__(
        self,
        device_id: str,
        command: Sequence[str],
        attempts: int = EXTERNAL_ATTEMPTS,
        timeout: float = EXTERNAL_TIMEOUT,
    ) -> None:
        super().__init__(device_id)
        if not command:
            raise ValidationError("Для внешнего устройства нужна команда.")
        self.command = [str(c) for c in command]
        self.attempts = max(1, int(attempts))
        self.timeout = timeout

    def _once(self, job: Job) -> CountsTable:
        request = json.dumps({"circuit": job.circuit.to_dict(), "shots": job.shots, "seed": job.seed, "job_id": job.job_id})
        proc = subprocess.run(
            self.command,
            input=request + "\n",
            capture_output=True,
            text=True,
            timeout=self.timeout,
            check=False,
        )
        if proc.returncode != 0:
            raise RuntimeError(f"exit code {proc.returncode}: {proc.stderr.strip()[:200]}")
        line = next((ln for ln in proc.stdout.splitlines() if ln.strip()), "")
        if not line:
            raise RuntimeError("empty response")
        data = json.loads(line)
        data.setdefault("device_id", self.device_id)
        data.setdefault("n_bits", job.circuit.n_wires)
        return self._checked(job, CountsTable.from_dict(data))

    def run(self, job: Job) -> CountsTable:
        last: Optional[BaseException] = None
        for attempt in range(1, self.attempts + 1):
            try:
                return self._once(job)
            except (OSError, subprocess.SubprocessError, RuntimeError, ValueError, DeviceFailure) as exc:
                last = exc
                logger.warning("external %s: job %s attempt %d/%d failed: %s",
                               self.device_id, job.job_id, attempt, self.attempts, exc)
        raise DeviceFailure(
            f"Внешнее устройство {self.device_id} не выполнило задание {job.job_id} за {self.attempts} попытки: {last}",
            device_id=self.device_id,
            job_id=job.job_id,
        )

    def describe(self) -> Dict[str, Any]:
        d = super().describe()
        d["command"] = list(self.command)
        return d


class VirtualDevice(Device):
    """Another id for a shared backend, so one device can run two flows."""

    def __init__(self, device_id: str, backend: Device) -> None:
        super().__init__(device_id)
        self.inner = backend
        self.backend = backend.backend
        self.strict = backend.strict

    def run(self, job: Job) -> CountsTable:
        table = self.inner.run(job)
        return CountsTable.from_dict({**table.to_dict(), "device_id": self.device_id})

    def noisy_distribution(self, circuit: Circuit) -> OutcomeDistribution:
        if not isinstance(self.inner, LocalSimulatorDevice):
            raise UnknownName("Точное распределение доступно только для локального симулятора.")
        return self.inner.noisy_distribution(circuit)

    def describe(self) -> Dict[str, Any]:
        d = self.inner.describe()
        d["id"] = self.device_id
        d["shares"] = self.inner.device_id
        return d


# -------------------- registry --------------------

def device_from_dict(data: Mapping[str, Any], base_dir: Optional[Path] = None) -> Device:
    """
    One registry entry.

    ``{"id": "sim", "backend": "local", "noise": {"preset": "ibmqx2"}}``,
    ``{"id": "lab", "backend": "replay", "directory": "counts/lab"}`` or
    ``{"id": "qpu", "backend": "external", "command": ["python", "bridge.py"]}``.
    """
    try:
        device_id = str(data["id"])
    except KeyError:
        raise ValidationError("У устройства в реестре нет поля 'id'.") from None
    backend = str(data.get("backend", "local"))
    if backend == "local":
        return LocalSimulatorDevice(device_id, NoiseModel.from_dict(data.get("noise", {})))
    if backend == "replay":
        directory = Path(data.get("directory", device_id))
        if base_dir is not None and not directory.is_absolute():
            directory = base_dir / directory
        return ReplayDevice(device_id, directory)
    if backend == "external":
        return ExternalDevice(
            device_id,
            data.get("command", []),
            attempts=int(data.get("attempts", EXTERNAL_ATTEMPTS)),
            timeout=float(data.get("timeout", EXTERNAL_TIMEOUT)),
        )
    raise UnknownName(f"Неизвестный тип устройства {backend!r}.")


def load_registry(path: str | Path) -> List[Device]:
    """Devices of a registry file ``{"devices": [...]}``, in file order."""
    p = Path(path)
    data = json.loads(p.read_text(encoding="utf-8"))
    entries = data.get("devices", data) if isinstance(data, dict) else data
    devices = [device_from_dict(e, base_dir=p.parent) for e in entries]
    ids = [d.device_id for d in devices]
    if len(set(ids)) != len(ids):
        raise ValidationError("Идентификаторы устройств в реестре повторяются.")
    return devices


def registry_flows(path: str | Path) -> Dict[str, str]:
    """Optional ``"flow"`` of every registry entry."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = data.get("devices", data) if isinstance(data, dict) else data
    return {str(e["id"]): str(e["flow"]) for e in entries if "flow" in e}
