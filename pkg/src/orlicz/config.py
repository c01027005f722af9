"""JSON configuration: domains, kernels, integrands and function data."""
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, OrliczError
from .fields import PAIR_VARS, Expression, coord_kwargs
from .grid import GridFunction, PairFunction, build_grid, build_kernel
from .phi import SamplingConfig, build_phi, calibrate

DEFAULT_DOMAIN = {"lo": [0.0], "hi": [1.0], "cells": [64]}
DEFAULT_KERNEL = {"kind": "constant", "c": 1.0}


def load_json(path):
    """Read a JSON config; malformed JSON is a :class:`ConfigError`, IO errors propagate."""
    with open(path) as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def domain_dim(spec):
    boxes = spec.get("boxes", [spec]) if isinstance(spec, dict) else spec
    try:
        lo = boxes[0]["lo"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ConfigError(f"malformed domain spec: {spec!r}") from exc
    return len(lo) if isinstance(lo, (list, tuple)) else 1


def sampling_from(obj, seed=0):
    obj = dict(obj or {})
    if "eps" in obj:
        obj["eps"] = tuple(float(e) for e in obj["eps"])
    obj.setdefault("seed", seed)
    try:
        return SamplingConfig(**obj)
    except TypeError as exc:
        raise ConfigError(f"bad sampling spec: {exc}") from exc


@dataclass
class Setup:
    """A discretised problem: grid, kernel and integrand."""

    grid: object
    kernel: object
    phi: object
    sampling: SamplingConfig
    seed: int = 0
    raw: dict = field(default_factory=dict)


def load_setup(obj, seed=0, need_phi=True):
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    seed = int(obj.get("seed", seed))
    dspec = obj.get("domain", DEFAULT_DOMAIN)
    kernel = build_kernel(obj.get("kernel", DEFAULT_KERNEL), domain_dim(dspec))
    grid = build_grid(dspec, kernel)
    sampling = sampling_from(obj.get("sampling"), seed)
    phi = None
    if need_phi or "phi" in obj:
        if "phi" not in obj:
            raise ConfigError("config needs a 'phi' expression")
        phi = build_phi(obj["phi"], box=grid.bounding_box, sampling=sampling)
        if obj.get("calibrate", True):
            phi = calibrate(phi, sampling)
    return Setup(grid, kernel, phi, sampling, seed, obj)


def grid_function(grid, spec):
    """A grid function from an expression string, ``{"expr"}``, ``{"csv"}`` or a value list."""
    if isinstance(spec, GridFunction):
        return spec
    if isinstance(spec, (int, float)):
        return GridFunction(grid, np.full(grid.size, float(spec)))
    if isinstance(spec, str):
        return grid.evaluate(spec)
    if isinstance(spec, list):
        return GridFunction(grid, spec)
    if isinstance(spec, dict):
        if "expr" in spec:
            return grid.evaluate(str(spec["expr"]))
        if "csv" in spec:
            return GridFunction.from_csv(grid, spec["csv"])
    raise ConfigError(f"cannot build a grid function from {spec!r}")


def pair_function(grid, spec):
    """A pair function from an expression in ``x0, x1, y0, y1`` (or a constant)."""
    if isinstance(spec, PairFunction):
        return spec
    if isinstance(spec, (int, float)):
        return PairFunction(grid, float(spec))
    text = spec.get("expr") if isinstance(spec, dict) else spec
    if not isinstance(text, str):
        raise ConfigError(f"cannot build a pair function from {spec!r}")
    expr = Expression.from_text(text, PAIR_VARS)

    def f(x, y):
        return expr(**coord_kwargs(x, y, expr.variables))

    return PairFunction(grid, f)


def require(obj, key):
    if key not in obj:
        raise ConfigError(f"config needs '{key}'")
    return obj[key]


CONFIG_ERRORS = (OrliczError, KeyError, TypeError, ValueError)
