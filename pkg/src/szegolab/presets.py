"""Named scenarios and the configuration schema.

A scenario is a plain mapping (usually read from YAML)::

    name: cp1-s1-12
    model: {factors: [1], measure: contact}
    action: {group: torus, weights: [[1], [2]], shift: [0]}
    nu: [1]
    k_grid: [64, 128, 256, 512, 1024]
    dims_k_grid: [0, 1, ..., 50]          # optional, defaults to k_grid
    seeds: [[1, 1]]                        # or "auto"
    n_auto_seeds: 4
    profile: {w: [[0.5, 0.2]], v: [[-0.3, 0.1]]}   # horizontal (re, im) pairs
    conventions: {haar: probability, phi_scale: 1.0}
    outputs: out/cp1-s1-12

For SU(2) the action is ``{group: su2, blocks: [[2]]}`` (one list of
irreducible block dimensions per factor).  Unknown keys are rejected.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from . import lie_groups as lg
from .model_geometry import QuantizedModel, LinearAction, su2_action, torus_action, random_point, normalize_point

__all__ = ["ScenarioConfig", "ConfigError", "PRESETS", "preset", "AUTO_SEED", "parse_config"]

#: Seed of the generator behind ``seeds: auto``.
AUTO_SEED = 20240917

_TOP_KEYS = {"name", "model", "action", "nu", "k_grid", "dims_k_grid", "seeds", "n_auto_seeds",
             "profile", "conventions", "outputs", "require_free"}
_MODEL_KEYS = {"factors", "measure", "scale"}
_ACTION_KEYS = {"group", "weights", "shift", "blocks"}
_CONV_KEYS = {"haar", "phi_scale"}
_PROFILE_KEYS = {"w", "v"}
HAAR_CHOICES = ("probability", "phi")


class ConfigError(ValueError):
    """Invalid scenario configuration."""


def _reject_unknown(section: str, data: dict, allowed: set):
    if not isinstance(data, dict):
        raise ConfigError(f"{section} must be a mapping")
    extra = set(data) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(map(str, extra)))}")


def _complex_vector(rows, name):
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list of [re, im] pairs") from exc
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ConfigError(f"{name} must be a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


@dataclass
class ScenarioConfig:
    name: str
    model: dict
    action: dict
    nu: list
    k_grid: list
    dims_k_grid: list = None
    seeds: object = "auto"
    n_auto_seeds: int = 4
    profile: dict = None
    conventions: dict = field(default_factory=lambda: {"haar": "probability", "phi_scale": 1.0})
    outputs: str = None
    require_free: bool = True

    # builders ----------------------------------------------------------
    def build_model(self) -> QuantizedModel:
        return QuantizedModel(tuple(self.model["factors"]), self.model.get("measure", "contact"))

    def build_action(self) -> LinearAction:
        m = self.build_model()
        scale = float(self.conventions.get("phi_scale", 1.0))
        if self.action["group"] == "torus":
            return torus_action(m, self.action["weights"], self.action.get("shift"), inner_product_scale=scale)
        return su2_action(m, self.action.get("blocks"), inner_product_scale=scale)

    def build_weight(self, action: LinearAction) -> lg.WeightVector:
        return lg.weight(action.group, self.nu)

    def seed_points(self, model: QuantizedModel) -> list:
        if self.seeds == "auto":
            rng = np.random.default_rng(AUTO_SEED)
            return [random_point(model, rng) for _ in range(self.n_auto_seeds)]
        return [normalize_point(model, np.asarray(s, dtype=complex)) for s in self.seeds]

    def profile_vectors(self):
        if not self.profile:
            return None
        return _complex_vector(self.profile["w"], "profile.w"), _complex_vector(self.profile["v"], "profile.v")

    @property
    def haar(self) -> str:
        return self.conventions.get("haar", "probability")

    def resolved(self) -> dict:
        out = {
            "name": self.name,
            "model": dict(self.model),
            "action": dict(self.action),
            "nu": list(self.nu),
            "k_grid": list(self.k_grid),
            "dims_k_grid": list(self.dims_k_grid if self.dims_k_grid is not None else self.k_grid),
            "seeds": self.seeds if self.seeds == "auto" else [list(map(_jsonable, s)) for s in self.seeds],
            "n_auto_seeds": self.n_auto_seeds,
            "profile": self.profile,
            "conventions": {"haar": self.haar, "phi_scale": float(self.conventions.get("phi_scale", 1.0))},
            "outputs": self.outputs,
            "require_free": self.require_free,
            "auto_seed_value": AUTO_SEED,
        }
        return out


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _as_seed(s):
    """Seeds may be lists of numbers or of ``[re, im]`` pairs."""
    out = []
    for c in s:
        if isinstance(c, (list, tuple)):
            if len(c) != 2:
                raise ConfigError("complex seed coordinates must be [re, im] pairs")
            out.append(complex(float(c[0]), float(c[1])))
        else:
            out.append(complex(c))
    return out


def parse_config(data: dict) -> ScenarioConfig:
    """Validate a mapping and return a :class:`ScenarioConfig`."""
    _reject_unknown("config", data, _TOP_KEYS)
    for key in ("model", "action", "nu", "k_grid"):
        if key not in data:
            raise ConfigError(f"missing required key {key!r}")
    _reject_unknown("model", data["model"], _MODEL_KEYS)
    _reject_unknown("action", data["action"], _ACTION_KEYS)
    conv = data.get("conventions") or {}
    _reject_unknown("conventions", conv, _CONV_KEYS)
    conv = {"haar": conv.get("haar", "probability"), "phi_scale": conv.get("phi_scale", 1.0)}
    if conv["haar"] == "prob":
        conv["haar"] = "probability"
    if conv["haar"] not in HAAR_CHOICES:
        raise ConfigError(f"conventions.haar must be one of {HAAR_CHOICES}")
    if not float(conv["phi_scale"]) > 0:
        raise ConfigError("conventions.phi_scale must be positive")
    if data["model"].get("scale", 1.0) != 1.0:
        raise ConfigError("model.scale other than 1 is not supported (the curvature identity fixes it)")
    if data["action"].get("group") not in ("torus", "su2"):
        raise ConfigError("action.group must be 'torus' or 'su2'")
    if data.get("profile") is not None:
        _reject_unknown("profile", data["profile"], _PROFILE_KEYS)
    try:
        k_grid = [int(k) for k in data["k_grid"]]
        dims = None if data.get("dims_k_grid") is None else [int(k) for k in data["dims_k_grid"]]
        nu = [int(c) for c in np.atleast_1d(data["nu"])]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed integer list: {exc}") from exc
    if not k_grid or min(k_grid) < 1:
        raise ConfigError("k_grid must be a nonempty list of positive levels")
    seeds = data.get("seeds", "auto")
    if seeds != "auto":
        if not isinstance(seeds, (list, tuple)) or not seeds:
            raise ConfigError("seeds must be 'auto' or a nonempty list of points")
        seeds = [_as_seed(s) for s in seeds]
    return ScenarioConfig(
        name=str(data.get("name", "custom")),
        model=dict(data["model"]),
        action=dict(data["action"]),
        nu=nu,
        k_grid=k_grid,
        dims_k_grid=dims,
        seeds=seeds,
        n_auto_seeds=int(data.get("n_auto_seeds", 4)),
        profile=data.get("profile"),
        conventions=conv,
        outputs=data.get("outputs"),
        require_free=bool(data.get("require_free", True)),
    )


_SWEEP = [64, 128, 256, 512, 1024]

PRESETS = {
    "cp1-s1-12": {
        "name": "cp1-s1-12",
        "model": {"factors": [1]},
        "action": {"group": "torus", "weights": [[1], [2]], "shift": [0]},
        "nu": [1],
        "k_grid": _SWEEP,
        "dims_k_grid": list(range(0, 51)),
        "seeds": [[1, 1]],
        "profile": {"w": [[0.5, 0.3]], "v": [[-0.2, 0.4]]},
    },
    "cp2-t2": {
        "name": "cp2-t2",
        "model": {"factors": [2]},
        "action": {"group": "torus", "weights": [[1, 0], [0, 1], [1, 1]], "shift": [0, 0]},
        "nu": [1, 1],
        "k_grid": _SWEEP,
        "dims_k_grid": list(range(0, 51)),
        "seeds": [[1, 1, 1]],
        "profile": {"w": [[0.5, 0.3]], "v": [[-0.2, 0.4]]},
    },
    "cp1-su2": {
        "name": "cp1-su2",
        "model": {"factors": [1]},
        "action": {"group": "su2", "blocks": [[2]]},
        "nu": [1],
        "k_grid": _SWEEP,
        "dims_k_grid": list(range(0, 51)),
        "seeds": [[1, [0, 0.4]]],
        "profile": {"w": [[0.5, 0.3]], "v": [[-0.2, 0.4]]},
    },
    "cp1-plain": {
        "name": "cp1-plain",
        "model": {"factors": [1]},
        "action": {"group": "torus", "weights": [[0], [0]], "shift": [1]},
        "nu": [1],
        "k_grid": _SWEEP,
        "dims_k_grid": list(range(0, 51)),
        "seeds": [[1, 0.3]],
        "profile": {"w": [[0.5, 0.3]], "v": [[-0.2, 0.4]]},
    },
}


def preset(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return parse_config(copy.deepcopy(PRESETS[name]))
