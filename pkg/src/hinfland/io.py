"""JSON documents for plants, controllers and certified triples.

Matrices are row-major nested lists of numbers. Infinite values (the peak
frequency at infinity) are written as the string ``"inf"``.
"""
import json
import math

import numpy as np

from .errors import DimensionError
from .lifting import CertifiedTriple
from .lti import Controller, Plant

__all__ = [
    "PLANT_FIELDS",
    "CONTROLLER_FIELDS",
    "plant_from_dict",
    "plant_to_dict",
    "controller_from_dict",
    "controller_to_dict",
    "triple_from_dict",
    "load_json",
    "load_plant",
    "load_controller",
    "dumps",
]

PLANT_FIELDS = ("A", "B1", "B2", "C1", "D11", "D12", "C2", "D21")
CONTROLLER_FIELDS = ("AK", "BK", "CK", "DK")


def _matrix(doc, name):
    if name not in doc:
        raise DimensionError(f"missing field {name!r}", block=name)
    a = np.array(doc[name], dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be a nested 2-d array", block=name)
    return a


def plant_from_dict(doc):
    return Plant(*(_matrix(doc, f) for f in PLANT_FIELDS))


def plant_to_dict(plant):
    return {f: getattr(plant, f).tolist() for f in PLANT_FIELDS}


def controller_from_dict(doc, plant=None):
    DK, CK, BK, AK = (_matrix(doc, f) for f in ("DK", "CK", "BK", "AK"))
    k = Controller.from_blocks(DK, CK, BK, AK)
    if plant is not None and (k.nu, k.ny, k.order) != (plant.nu, plant.ny, plant.nx):
        raise DimensionError(
            f"controller (nu={k.nu}, ny={k.ny}, order={k.order}) does not fit plant "
            f"(nu={plant.nu}, ny={plant.ny}, nx={plant.nx})", block="K")
    return k


def controller_to_dict(k):
    return {"AK": k.AK.tolist(), "BK": k.BK.tolist(), "CK": k.CK.tolist(), "DK": k.DK.tolist()}


def triple_from_dict(doc, plant=None):
    return CertifiedTriple(controller_from_dict(doc, plant), _matrix(doc, "P"), float(doc["gamma"]))


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_plant(path):
    return plant_from_dict(load_json(path))


def load_controller(path, plant=None):
    return controller_from_dict(load_json(path), plant)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return None
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj, indent=2):
    """JSON text with numpy values converted and infinities spelled out."""
    return json.dumps(_clean(obj), indent=indent)
