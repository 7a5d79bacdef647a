"""Scenario files: the JSON schema behind the command-line front end.

A scenario bundles everything a run needs -- the noise coefficient, the
initial step data (inline table or a ``box(V0, a, b)`` preset), the time
grid, the continuation mode, ensemble size and master seed, and where to
write outputs.  Validation failures raise :class:`ScenarioError` whose
message starts with the dotted path of the offending key, so the CLI can
point at exactly what is wrong (and exit with status 2).
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass

import numpy as np

from .characteristics import ContinuationMode, SigmaSpec, StepInitialData

__all__ = [
    "ScenarioError",
    "Scenario",
    "DEFAULT_SCENARIO",
    "load_scenario",
    "parse_scenario",
    "scenario_hash",
]


class ScenarioError(ValueError):
    """A scenario document failed validation; message names the key."""


DEFAULT_SCENARIO: dict = {
    "sigma": {"slope": 1.0, "intercept": 0.0},
    "initial": "box(-1, 0, 1)",
    "grid": {"t_end": 3.0, "n_steps": 600},
    "mode": "dissipative",
    "ensemble": {"n_paths": 300, "master_seed": 7},
    "outputs": {"directory": "out", "formats": ["csv", "json"]},
}

_BOX_RE = re.compile(
    r"^\s*box\(\s*(?P<v0>[^,()]+?)\s*(?:,\s*(?P<a>[^,()]+?)\s*,\s*(?P<b>[^,()]+?)\s*)?\)\s*$"
)


@dataclass(frozen=True)
class Scenario:
    sigma: SigmaSpec
    initial: StepInitialData
    t_end: float
    n_steps: int
    mode: ContinuationMode
    n_paths: int
    master_seed: int
    out_dir: str
    formats: tuple[str, ...]

    def resolved(self) -> dict:
        """Plain-dict form with presets expanded, suitable for hashing."""
        return {
            "sigma": {"slope": self.sigma.slope, "intercept": self.sigma.intercept},
            "initial": {
                "breakpoints": self.initial.breakpoints.tolist(),
                "values": self.initial.values.tolist(),
            },
            "grid": {"t_end": self.t_end, "n_steps": self.n_steps},
            "mode": self.mode.value,
            "ensemble": {"n_paths": self.n_paths, "master_seed": self.master_seed},
            "outputs": {"directory": self.out_dir, "formats": list(self.formats)},
        }

    @property
    def hash(self) -> str:
        """Digest of the resolved physics and seed (not of output routing)."""
        doc = self.resolved()
        del doc["outputs"]
        return scenario_hash(doc)


def scenario_hash(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _number(doc: dict, key: str, path: str) -> float:
    if key not in doc:
        raise ScenarioError(f"{path}.{key}: required key is missing")
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{path}.{key}: expected a number, got {v!r}")
    return float(v)


def _integer(doc: dict, key: str, path: str) -> int:
    v = _number(doc, key, path)
    if v != int(v):
        raise ScenarioError(f"{path}.{key}: expected an integer, got {v!r}")
    return int(v)


def _section(doc: dict, key: str) -> dict:
    if key not in doc:
        raise ScenarioError(f"{key}: required section is missing")
    if not isinstance(doc[key], dict):
        raise ScenarioError(f"{key}: expected an object")
    return doc[key]


def _parse_initial(spec, path: str = "initial") -> StepInitialData:
    if isinstance(spec, str):
        m = _BOX_RE.match(spec)
        if not m:
            raise ScenarioError(
                f"{path}: unknown preset {spec!r} (expected \"box(V0)\" or \"box(V0, a, b)\")"
            )
        try:
            v0 = float(m.group("v0"))
            a = float(m.group("a")) if m.group("a") is not None else 0.0
            b = float(m.group("b")) if m.group("b") is not None else 1.0
        except ValueError as exc:
            raise ScenarioError(f"{path}: preset arguments must be numbers: {exc}") from exc
        try:
            return StepInitialData.box(v0, a, b)
        except ValueError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
    if isinstance(spec, dict):
        for key in ("breakpoints", "values"):
            if key not in spec:
                raise ScenarioError(f"{path}.{key}: required key is missing")
            if not isinstance(spec[key], list):
                raise ScenarioError(f"{path}.{key}: expected a list of numbers")
        try:
            return StepInitialData(
                np.asarray(spec["breakpoints"], dtype=float),
                np.asarray(spec["values"], dtype=float),
            )
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
    raise ScenarioError(f"{path}: expected a preset string or a step table object")


def parse_scenario(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario: expected a JSON object at the top level")
    known = {"sigma", "initial", "grid", "mode", "ensemble", "outputs"}
    for key in doc:
        if key not in known:
            raise ScenarioError(f"{key}: unknown top-level key")

    sig = _section(doc, "sigma")
    slope = _number(sig, "slope", "sigma")
    intercept = _number(sig, "intercept", "sigma")
    try:
        sigma = SigmaSpec(slope, intercept)
    except ValueError as exc:
        raise ScenarioError(f"sigma: {exc}") from exc

    initial = _parse_initial(doc.get("initial"))

    grid = _section(doc, "grid")
    t_end = _number(grid, "t_end", "grid")
    n_steps = _integer(grid, "n_steps", "grid")
    if not t_end > 0.0:
        raise ScenarioError(f"grid.t_end: must be positive, got {t_end}")
    if n_steps < 1:
        raise ScenarioError(f"grid.n_steps: must be at least 1, got {n_steps}")

    mode_raw = doc.get("mode")
    try:
        mode = ContinuationMode(mode_raw)
    except ValueError:
        raise ScenarioError(
            f"mode: expected \"conservative\" or \"dissipative\", got {mode_raw!r}"
        ) from None

    ens = _section(doc, "ensemble")
    n_paths = _integer(ens, "n_paths", "ensemble")
    master_seed = _integer(ens, "master_seed", "ensemble")
    if n_paths < 1:
        raise ScenarioError(f"ensemble.n_paths: must be at least 1, got {n_paths}")
    if master_seed < 0:
        raise ScenarioError(f"ensemble.master_seed: must be nonnegative, got {master_seed}")

    outs = _section(doc, "outputs")
    directory = outs.get("directory")
    if not isinstance(directory, str) or not directory:
        raise ScenarioError("outputs.directory: expected a nonempty string")
    formats = outs.get("formats", ["csv"])
    if not isinstance(formats, list) or not formats:
        raise ScenarioError("outputs.formats: expected a nonempty list")
    for f in formats:
        if f not in ("csv", "json"):
            raise ScenarioError(f"outputs.formats: unknown format {f!r}")

    return Scenario(
        sigma=sigma,
        initial=initial,
        t_end=t_end,
        n_steps=n_steps,
        mode=mode,
        n_paths=n_paths,
        master_seed=master_seed,
        out_dir=directory,
        formats=tuple(formats),
    )


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file is not valid JSON: {exc}") from exc
    return parse_scenario(doc)
