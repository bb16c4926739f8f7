"""Experiment configuration files.

Configs are YAML (JSON is accepted too, being a YAML subset)::

    schema_version: "1"
    task:
      p: 200
      n0: 100
      n1: 50
      w0_norm_sq: 1.0
      rho: 0.9
      w1_norm_sq: 1.0
      sigma0: 0.5
      sigma1: 0.5
      # optional: explicit diagonal covariances, one eigenvalue per coordinate
      # sigma0_spectrum: [...]
      # sigma1_spectrum: [...]
    penalties:        # either tau0/tau1 or lambda0/lambda1, never both
      tau0: 0.5
      tau1: 0.5
    mc:
      replicates: 500
      seed: 1
    sweep:            # zero, one or two axes
      - axis: sigma0
        values: [0.1, 0.5, 1.0]

Penalties are held internally as ``tau_i = lambda_i / n_i``.
"""

from __future__ import annotations

import copy
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from l2sp.task import TaskPair, diag_covariance, make_pair

SCHEMA_VERSION = "1"
SWEEP_AXES = ("rho", "sigma0", "tau0", "gamma0", "n1", "sigma1", "tau1")
TASK_KEYS = ("p", "n0", "n1", "w0_norm_sq", "rho", "w1_norm_sq", "sigma0", "sigma1")
INT_KEYS = ("p", "n0", "n1")
OPTIONAL_TASK_KEYS = ("sigma0_spectrum", "sigma1_spectrum", "frame_seed")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _num(value, where, integer=False, lo=None, strict=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if integer and (not float(value).is_integer()):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite, got {value!r}")
    if lo is not None and (value <= lo if strict else value < lo):
        raise ConfigError(f"{where}: must be {'>' if strict else '>='} {lo}, got {value!r}")
    return int(value) if integer else float(value)


@dataclass
class SweepAxis:
    axis: str
    values: list

    def to_dict(self):
        return {"axis": self.axis, "values": list(self.values)}


@dataclass
class ExperimentConfig:
    schema_version: str
    task: dict
    penalties: dict
    replicates: int
    seed: int
    sweep: list = field(default_factory=list)

    @property
    def convention(self):
        return "tau" if "tau0" in self.penalties else "lambda"

    @property
    def isotropic(self):
        return all(
            self.task.get(k) is None or all(v == 1 for v in self.task[k])
            for k in ("sigma0_spectrum", "sigma1_spectrum")
        )

    def base_params(self):
        """Flat parameter dict with canonical ``tau0``/``tau1``."""
        params = {k: self.task[k] for k in TASK_KEYS}
        if self.convention == "tau":
            params["tau0"] = self.penalties["tau0"]
            params["tau1"] = self.penalties["tau1"]
        else:
            params["tau0"] = self.penalties["lambda0"] / self.task["n0"]
            params["tau1"] = self.penalties["lambda1"] / self.task["n1"]
        params["gamma0"] = params["p"] / params["n0"]
        return params

    def grid(self):
        """Yield ``(grid_values, params)`` for every sweep point, row-major."""
        base = self.base_params()
        axes = self.sweep
        if not axes:
            yield (), dict(base)
            return
        for combo in itertools.product(*[a.values for a in axes]):
            params = dict(base)
            for ax, v in zip(axes, combo):
                apply_axis(params, ax.axis, v)
            yield combo, params

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "task": copy.deepcopy(self.task),
            "penalties": dict(self.penalties),
            "mc": {"replicates": self.replicates, "seed": self.seed},
            "sweep": [a.to_dict() for a in self.sweep],
        }

    def dumps(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def apply_axis(params, axis, value):
    """Set one sweep coordinate, keeping derived quantities consistent."""
    if axis == "gamma0":
        params["gamma0"] = float(value)
        params["n0"] = int(round(params["p"] / value))
    elif axis == "n1":
        params["n1"] = int(value)
    else:
        params[axis] = float(value)


def build_task(params, task_section=None):
    """:class:`TaskPair` for one parameter point."""
    task_section = task_section or {}
    spectra = {}
    for i in (0, 1):
        eigs = task_section.get(f"sigma{i}_spectrum")
        if eigs is not None:
            spectra[f"Sigma{i}"] = diag_covariance(eigs)
    w0n = math.sqrt(params["w0_norm_sq"])
    w1n = math.sqrt(params["w1_norm_sq"])
    return make_pair(params["p"], params["n0"], params["n1"], w0n, params["rho"], w1n,
                     params["sigma0"], params["sigma1"], seed=task_section.get("frame_seed", 0),
                     **spectra)


def parse_config(data):
    """Validate a config mapping into an :class:`ExperimentConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a mapping")
    unknown = set(data) - {"schema_version", "task", "penalties", "mc", "sweep"}
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")
    version = data.get("schema_version")
    if str(version) != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION!r}, got {version!r}")

    task_in = data.get("task")
    if not isinstance(task_in, dict):
        raise ConfigError("task: missing or not a mapping")
    extra = set(task_in) - set(TASK_KEYS) - set(OPTIONAL_TASK_KEYS)
    if extra:
        raise ConfigError(f"task: unknown keys {sorted(extra)}")
    task = {}
    for k in TASK_KEYS:
        if k not in task_in:
            raise ConfigError(f"task.{k}: missing")
        integer = k in INT_KEYS
        lo = None if k == "rho" else (1 if integer else 0)
        task[k] = _num(task_in[k], f"task.{k}", integer=integer, lo=lo)
    for i in (0, 1):
        key = f"sigma{i}_spectrum"
        eigs = task_in.get(key)
        if eigs is None:
            continue
        if not isinstance(eigs, list) or len(eigs) != task["p"]:
            raise ConfigError(f"task.{key}: expected a list of {task['p']} eigenvalues")
        task[key] = [_num(v, f"task.{key}[{j}]", lo=0) for j, v in enumerate(eigs)]
    if "frame_seed" in task_in:
        task["frame_seed"] = _num(task_in["frame_seed"], "task.frame_seed", integer=True, lo=0)

    pen_in = data.get("penalties")
    if not isinstance(pen_in, dict):
        raise ConfigError("penalties: missing or not a mapping")
    has_tau = {"tau0", "tau1"} & set(pen_in)
    has_lam = {"lambda0", "lambda1"} & set(pen_in)
    if has_tau and has_lam:
        raise ConfigError("penalties: use either tau0/tau1 or lambda0/lambda1, not both")
    names = ("tau0", "tau1") if has_tau or not has_lam else ("lambda0", "lambda1")
    extra = set(pen_in) - set(names)
    if extra:
        raise ConfigError(f"penalties: unknown keys {sorted(extra)}")
    penalties = {}
    for k in names:
        if k not in pen_in:
            raise ConfigError(f"penalties.{k}: missing")
        penalties[k] = _num(pen_in[k], f"penalties.{k}", lo=0)

    mc = data.get("mc") or {}
    if not isinstance(mc, dict):
        raise ConfigError("mc: must be a mapping")
    replicates = _num(mc.get("replicates", 200), "mc.replicates", integer=True, lo=2)
    seed = _num(mc.get("seed", 0), "mc.seed", integer=True, lo=0)
    if seed >= 2**64:
        raise ConfigError("mc.seed: must fit in 64 bits")

    sweep_in = data.get("sweep") or []
    if not isinstance(sweep_in, list) or len(sweep_in) > 2:
        raise ConfigError("sweep: expected a list of at most two axes")
    sweep = []
    for i, ax in enumerate(sweep_in):
        where = f"sweep[{i}]"
        if not isinstance(ax, dict) or set(ax) != {"axis", "values"}:
            raise ConfigError(f"{where}: expected keys 'axis' and 'values'")
        if ax["axis"] not in SWEEP_AXES:
            raise ConfigError(f"{where}.axis: {ax['axis']!r} not in {SWEEP_AXES}")
        vals = ax["values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"{where}.values: must be a non-empty list")
        integer = ax["axis"] == "n1"
        lo = 0 if ax["axis"] not in ("rho",) else None
        strict = ax["axis"] == "gamma0"
        vals = [_num(v, f"{where}.values[{j}]", integer=integer, lo=lo, strict=strict)
                for j, v in enumerate(vals)]
        sweep.append(SweepAxis(ax["axis"], vals))
    if len({a.axis for a in sweep}) != len(sweep):
        raise ConfigError("sweep: axes must be distinct")

    return ExperimentConfig(str(version), task, penalties, replicates, seed, sweep)


def _mark_message(exc):
    mark = getattr(exc, "problem_mark", None)
    where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark is not None else ""
    return f"{where}{getattr(exc, 'problem', None) or exc}"


def loads(text):
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config syntax error at {_mark_message(exc)}") from exc
    return parse_config(data)


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from exc
    return loads(text)


def canonical_json_dict(cfg):
    """Config as plain data for hashing."""
    d = cfg.to_dict()
    return json_safe(d)


def json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


__all__ = ["ConfigError", "ExperimentConfig", "SweepAxis", "TaskPair", "apply_axis", "build_task",
           "load", "loads", "parse_config", "SCHEMA_VERSION", "SWEEP_AXES"]
