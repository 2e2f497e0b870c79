"""Scenario documents: schema validation, defaults, hashing and model assembly."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .covariance import (ClutterField, ClutterPatch, CorrelationLaw, CovarianceModel,
                         InterferenceSource, draw_snapshots, interference_covariance,
                         sample_covariance, toeplitz_covariance)
from .optim import AlgoConfig
from .scene import ArrayGeometry, PulseTrain, Target, target_steering

_LAW = {
    "type": "object",
    "additionalProperties": False,
    "required": ["law"],
    "properties": {
        "law": {"enum": ["exponential", "geometric", "custom", "delta"]},
        "param": {"type": "number"},
        "values": {"type": "array", "items": {"type": "number"}},
    },
}

_SCATTERERS = {
    "num_scatterers": {"type": "integer", "minimum": 1},
    "law": {"enum": ["exponential", "geometric", "custom", "delta"]},
    "param": {"type": "number"},
    "values": {"type": "array", "items": {"type": "number"}},
    "power": {"type": "number", "exclusiveMinimum": 0},
    "azimuth_spread": {"type": "number", "minimum": 0},
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["array", "pulses", "target", "noise"],
    "properties": {
        "name": {"type": "string"},
        "array": {
            "type": "object", "additionalProperties": False, "required": ["M"],
            "properties": {
                "M": {"type": "integer", "minimum": 1},
                "d_over_lambda": {"type": "number", "exclusiveMinimum": 0},
                "f_o": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "pulses": {
            "type": "object", "additionalProperties": False, "required": ["L", "N"],
            "properties": {
                "L": {"type": "integer", "minimum": 1},
                "N": {"type": "integer", "minimum": 1},
                "T_p": {"type": "number", "exclusiveMinimum": 0},
                "B": {"type": "number", "exclusiveMinimum": 0},
                "T": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "target": {
            "type": "object", "additionalProperties": False,
            "required": ["theta", "phi", "normalized_doppler"],
            "properties": {
                "theta": {"type": "number", "minimum": -np.pi / 2, "maximum": np.pi / 2},
                "phi": {"type": "number", "minimum": 0, "maximum": np.pi / 2},
                "normalized_doppler": {"type": "number"},
                "rho_t": {"type": "number"},
            },
        },
        "noise": {
            "type": "object", "additionalProperties": False, "required": ["law"],
            "properties": {**_LAW["properties"],
                           "power": {"type": "number", "exclusiveMinimum": 0}},
        },
        "interferers": {
            "type": "array",
            "items": {
                "type": "object", "additionalProperties": False, "required": ["theta", "phi"],
                "properties": {
                    "theta": {"type": "number"}, "phi": {"type": "number"},
                    **_LAW["properties"],
                    "power": {"type": "number", "minimum": 0},
                },
            },
        },
        "clutter": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "doppler_slope": {"type": "number"},
                "patches": {
                    "type": "array",
                    "items": {
                        "type": "object", "additionalProperties": False,
                        "required": ["theta", "phi"],
                        "properties": {
                            "theta": {"type": "number"}, "phi": {"type": "number"},
                            "normalized_doppler": {"type": "number"},
                            **_SCATTERERS,
                        },
                    },
                },
                "ring": {
                    "type": "object", "additionalProperties": False,
                    "required": ["start", "stop", "step", "elevation"],
                    "properties": {
                        "start": {"type": "number"}, "stop": {"type": "number"},
                        "step": {"type": "number", "exclusiveMinimum": 0},
                        "elevation": {"type": "number"},
                        **_SCATTERERS,
                    },
                },
            },
        },
        "training": {
            "type": "object", "additionalProperties": False, "required": ["snapshots"],
            "properties": {
                "snapshots": {"type": "integer", "minimum": 1},
                "loading": {"type": "number", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "algo": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "kappa": {"type": "number", "exclusiveMinimum": 0},
                "P_o": {"type": "number", "exclusiveMinimum": 0},
                "rho": {"type": "number", "exclusiveMinimum": 0},
                "alpha": {"type": "number", "minimum": 0},
                "beta": {"type": "number", "minimum": 0},
                "prox_mode": {"enum": ["fixed", "lipschitz"]},
                "prox_scale": {"type": "number", "minimum": 0},
                "tol_obj": {"type": "number", "exclusiveMinimum": 0},
                "tol_disp": {"type": "number", "exclusiveMinimum": 0},
                "tol_constraint": {"type": "number", "exclusiveMinimum": 0},
                "tol_root": {"type": "number", "exclusiveMinimum": 0},
                "tol_kkt": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 0},
                "loading": {"type": "number", "minimum": 0},
                "stop_on_power_violation": {"type": "boolean"},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
    },
}

DEFAULTS = {
    "array": {"d_over_lambda": 0.5, "f_o": 1e9},
    "pulses": {"T_p": 1e-3, "B": 50e6},
    "target": {"rho_t": 1.0},
    "noise": {"param": 0.0, "power": 1.0},
    "clutter": {"doppler_slope": 1.0},
    "algo": {"kappa": 1.0, "P_o": 10.0, "rho": 1.0, "alpha": 0.0, "beta": 0.0,
             "prox_mode": "fixed", "prox_scale": 1.0, "tol_obj": 1e-8, "tol_disp": 1e-6,
             "tol_constraint": 1e-8, "tol_root": 1e-12, "tol_kkt": 1e-10, "max_iter": 200,
             "loading": 0.0, "stop_on_power_violation": False, "seed": 0},
}

SCATTERER_DEFAULTS = {"num_scatterers": 1, "law": "delta", "param": 0.0, "power": 1.0,
                      "azimuth_spread": 0.0}
LAW_DEFAULTS = {"param": 0.0, "power": 1.0}
DESK_SCALE = {"M": 3, "L": 8, "N": 4}

_ALGO_FIELDS = {"kappa": "kappa", "P_o": "power", "rho": "modulus", "alpha": "alpha",
                "beta": "beta", "prox_mode": "prox_mode", "prox_scale": "prox_scale",
                "tol_obj": "tol_obj", "tol_disp": "tol_disp",
                "tol_constraint": "tol_constraint", "tol_root": "tol_root",
                "tol_kkt": "tol_kkt", "max_iter": "max_iter", "loading": "loading",
                "stop_on_power_violation": "stop_on_power_violation", "seed": "seed"}


class ScenarioError(ValueError):
    """Invalid scenario document; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class TrainingSpec:
    snapshots: int
    loading: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class RadarScenario:
    geometry: ArrayGeometry
    pulses: PulseTrain
    target: Target
    noise_law: CorrelationLaw
    noise_power: float
    interferers: tuple
    clutter: tuple
    training: TrainingSpec | None = None
    document: dict = field(default_factory=dict, compare=False)
    digest: str = ""

    @property
    def dim(self) -> int:
        return self.geometry.num_elements * self.pulses.num_pulses * self.pulses.num_samples

    @property
    def normalized_doppler(self) -> float:
        return self.target.doppler * self.pulses.pri


def _law(spec) -> CorrelationLaw:
    kind = spec.get("law", "delta")
    if kind == "delta":
        return CorrelationLaw.delta()
    if kind == "custom":
        return CorrelationLaw("custom", values=tuple(spec.get("values", ())))
    return CorrelationLaw(kind, float(spec.get("param", 0.0)))


def _merge(defaults, doc):
    out = copy.deepcopy(defaults)
    out.update(doc)
    return out


def apply_defaults(doc: dict) -> dict:
    doc = copy.deepcopy(doc)
    for key, val in DEFAULTS.items():
        doc[key] = _merge(val, doc.get(key, {}))
    doc["interferers"] = [_merge(LAW_DEFAULTS, i) for i in doc.get("interferers", [])]
    clutter = doc["clutter"]
    clutter["patches"] = [_merge(SCATTERER_DEFAULTS, p) for p in clutter.get("patches", [])]
    if "ring" in clutter:
        clutter["ring"] = _merge(SCATTERER_DEFAULTS, clutter["ring"])
    if "training" in doc:
        doc["training"] = _merge({"loading": 0.0, "seed": 0}, doc["training"])
    doc.setdefault("name", "scenario")
    return doc


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def scenario_hash(doc: dict) -> str:
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()


def validate_document(doc: dict) -> None:
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path)
        if err.validator == "required":
            missing = [k for k in err.validator_value if k not in err.instance]
            path = "/".join([path] + missing[:1]) if path else missing[0]
        raise ScenarioError(err.message, path or "<root>")


def scatterer_offsets(num: int, spread: float) -> np.ndarray:
    """Symmetric azimuth offsets spanning ``[−spread, spread]``."""
    if num == 1 or spread == 0.0:
        return np.zeros(num)
    return np.linspace(-spread, spread, num)


def ridge_doppler(theta, phi, d_over_lambda: float, slope: float):
    """Normalized clutter Doppler on the stationary-ground ridge."""
    return slope * d_over_lambda * np.sin(theta) * np.sin(phi)


def _patch(theta, phi, spec, d_over_lambda, slope, doppler=None) -> ClutterPatch:
    P = int(spec["num_scatterers"])
    corr = float(spec["power"]) * toeplitz_covariance(_law(spec), P)
    offs = scatterer_offsets(P, float(spec["azimuth_spread"]))
    centre = ridge_doppler(theta, phi, d_over_lambda, slope) if doppler is None else doppler
    if np.any(offs):
        az = theta + offs
        dops = centre + (ridge_doppler(az, phi, d_over_lambda, slope)
                         - ridge_doppler(theta, phi, d_over_lambda, slope))
        return ClutterPatch(theta, phi, centre, corr, az, dops)
    return ClutterPatch(theta, phi, centre, corr)


def ring_azimuths(start: float, stop: float, step: float) -> np.ndarray:
    """Uniform grid ``start, start+step, ...`` up to ``stop`` inclusive (half-step slack)."""
    count = int(np.floor((stop - start) / step + 0.5)) + 1
    if count < 1:
        raise ScenarioError("empty clutter ring", "clutter/ring")
    return start + step * np.arange(count)


def clutter_patches(doc: dict) -> list[ClutterPatch]:
    clutter = doc["clutter"]
    dl = doc["array"]["d_over_lambda"]
    slope = clutter["doppler_slope"]
    out = [_patch(p["theta"], p["phi"], p, dl, slope, p.get("normalized_doppler"))
           for p in clutter["patches"]]
    if "ring" in clutter:
        ring = clutter["ring"]
        for th in ring_azimuths(ring["start"], ring["stop"], ring["step"]):
            out.append(_patch(th, ring["elevation"], ring, dl, slope))
    return out


def desk_scale(doc: dict) -> dict:
    doc = copy.deepcopy(doc)
    doc["array"]["M"] = DESK_SCALE["M"]
    doc["pulses"]["L"] = DESK_SCALE["L"]
    doc["pulses"]["N"] = DESK_SCALE["N"]
    return doc


def load_document(source) -> dict:
    if isinstance(source, dict):
        return copy.deepcopy(source)
    path = Path(source)
    if not path.exists():
        raise FileNotFoundError(f"scenario file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def bundled_scenario(name: str) -> Path:
    """Path to a scenario shipped with the package (``baseline``, ``ring``, ``rank_deficient``)."""
    ref = resources.files("wastap") / "data" / f"{name}.json"
    return Path(str(ref))


def parse_scenario(source, desk: bool = False) -> tuple[RadarScenario, AlgoConfig]:
    """Validate a scenario document (path or dict) and build its in-memory form.

    The digest covers the input document after defaults, before any desk
    scaling, so it can be recomputed from the file alone.
    """
    raw = load_document(source)
    validate_document(raw)
    doc = apply_defaults(raw)
    digest = scenario_hash(doc)
    if desk:
        doc = desk_scale(doc)
    try:
        geom = ArrayGeometry(doc["array"]["M"],
                             doc["array"]["d_over_lambda"] * 2.99792458e8 / doc["array"]["f_o"],
                             doc["array"]["f_o"])
        pl = doc["pulses"]
        width = pl.get("T", pl["N"] / pl["B"])
        pulses = PulseTrain(pl["L"], pl["T_p"], width, pl["B"], pl["N"])
        tg = doc["target"]
        target = Target(tg["theta"], tg["phi"], tg["normalized_doppler"] / pl["T_p"], tg["rho_t"])
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    interferers = tuple(InterferenceSource(i["theta"], i["phi"], _law(i), float(i["power"]))
                        for i in doc["interferers"])
    patches = tuple(clutter_patches(doc))
    training = TrainingSpec(**doc["training"]) if "training" in doc else None
    scen = RadarScenario(geom, pulses, target, _law(doc["noise"]), float(doc["noise"]["power"]),
                         interferers, patches, training, doc, digest)
    algo = AlgoConfig(**{_ALGO_FIELDS[k]: v for k, v in doc["algo"].items()})
    return scen, algo


def build_model(scen: RadarScenario) -> CovarianceModel:
    """Assemble the covariance model (noise, interference, clutter field, replication)."""
    geom, pulses = scen.geometry, scen.pulses
    steer = target_steering(geom, pulses, scen.target)
    noise = scen.noise_power * toeplitz_covariance(scen.noise_law, scen.dim)
    interference = interference_covariance(scen.interferers, geom, pulses.num_pulses,
                                           pulses.num_samples)
    field_ = ClutterField(scen.clutter, geom, pulses.num_pulses, pulses.num_samples)
    return CovarianceModel(noise.astype(complex), interference, field_, steer.replication,
                           steer.spatial, steer.temporal)


def training_models(scen: RadarScenario, model: CovarianceModel) -> tuple[CovarianceModel, CovarianceModel]:
    """Models whose noise-plus-interference part is a ``K``-snapshot sample estimate.

    Snapshots are drawn from the exact ``R_i + R_n``.  Returns the estimate
    with the configured diagonal loading and the unloaded (rank ``≤ K``) one.
    """
    if scen.training is None:
        raise ScenarioError("scenario has no training section", "training")
    rng = np.random.default_rng(scen.training.seed)
    snaps = draw_snapshots(model.interference_noise, scen.training.snapshots, rng)
    raw = sample_covariance(snaps)
    loaded = raw + scen.training.loading * np.eye(raw.shape[0])
    return model.with_interference_noise(loaded), model.with_interference_noise(raw)
