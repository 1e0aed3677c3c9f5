"""
Run configuration: JSON schema with defaults, validation and provenance hash.

Every key has a default; unknown keys at any depth are rejected with their
dotted path. The effective (fully defaulted) dict is what gets echoed to the
output directory and hashed into every CSV header.
"""

import copy
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from src.core import log_handling as lh
from src.core import file_handling as fh
from src.core.errors import ConfigValidationError, ValidationError
from src.physics.hyperfine import FE57_CONSTANTS, GEOMETRY_PRESETS, GeometryConfig, NuclearSpecies
from src.physics.liouvillian import CavityParams, DriveConfig, Toggles
from src.physics.response import AnalyzerLine, DetectionConfig

LOG_FILE = lh.log_path("config.log")
LOG_TZ = "UTC"
LOGGER = lh.LogHandling(LOG_FILE, LOG_TZ)

DEFAULT_CONFIG = {
    "DEBUG_MODE": False,
    "species": dict(FE57_CONSTANTS),
    "geometry": {
        "preset": "half_faraday",
        "b_hat": None,
        "b_magnitude": 33.3,
        "in_polarization": {"sigma": [1.0, 0.0], "pi": [0.0, 0.0]},
        "misalignment": None,
    },
    "cavity": {
        "gamma_s": 27.0,
        "delta_ls": 1.0,
        "r_c": [0.0, 0.0],
        "r_c_matrix": None,
        "amplitude_scale": None,
        "coupled_polarizations": ["sigma", "pi"],
    },
    "drive": {"rabi": 1e-3},
    "detection": {
        "mode": "direct_monochromator",
        "extinction": 1e-10,
        "analyzer_line": None,
        "time_gate": None,
        "analyzer_points": 401,
    },
    "grid": {"min": -80.0, "max": 80.0, "points": 4000},
    "time_grid": {"half_width": 512.0, "points": 65536, "tail_correction": True},
    "toggles": {"sgc_dissipative": True, "sgc_hamiltonian": True, "sr": True},
    "layer_stack": {
        "top_pd": 5.0,
        "carbon": 40.0,
        "buffer_fe": 0.6,
        "resonant_fe": 2.5,
        "bottom_pd": 20.0,
        "substrate": "Si",
        "optical_constants": None,
    },
    "oracle": {
        "angle_mrad": None,
        "angle_min": 1.5,
        "angle_max": 4.0,
        "angle_points": 2001,
        "fit_half_width": 50.0,
        "fit_points": 2001,
    },
    "outputs": {"plots": True, "plot_format": "svg", "workers": None, "prominence_fraction": 0.05},
}

# templates for keys whose default is null but whose value is an object
OPTIONAL_SECTIONS = {
    "geometry.misalignment": {"axis": "sigma", "angle_deg": 0.0},
    "detection.analyzer_line": {"width": 1.0, "depth": 1e-3},
}


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _merge(defaults, raw, path=""):
    if not isinstance(raw, dict):
        raise ConfigValidationError(path or "<root>", f"expected an object, got {type(raw).__name__}")
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        key = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigValidationError(key, "unknown key")

    merged = {}
    for key, default in defaults.items():
        key_path = f"{path}.{key}" if path else key
        if key not in raw:
            merged[key] = copy.deepcopy(default)
            continue
        value = raw[key]
        if key_path in OPTIONAL_SECTIONS:
            merged[key] = None if value is None else _merge(OPTIONAL_SECTIONS[key_path], value, key_path)
        elif isinstance(default, dict):
            merged[key] = _merge(default, value, key_path)
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigValidationError(key_path, f"expected true/false, got {value!r}")
            merged[key] = value
        elif _is_number(default):
            if not _is_number(value):
                raise ConfigValidationError(key_path, f"expected a number, got {value!r}")
            merged[key] = int(value) if isinstance(default, int) else float(value)
        elif isinstance(default, str):
            if not isinstance(value, str):
                raise ConfigValidationError(key_path, f"expected a string, got {value!r}")
            merged[key] = value
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _complex(value, key_path):
    if not (isinstance(value, (list, tuple)) and len(value) == 2 and all(_is_number(v) for v in value)):
        raise ConfigValidationError(key_path, f"expected [re, im], got {value!r}")
    return complex(float(value[0]), float(value[1]))


def _positive(value, key_path, allow_zero=False):
    if value is None or not _is_number(value) or value < 0 or (value == 0 and not allow_zero):
        raise ConfigValidationError(key_path, f"must be {'>=' if allow_zero else '>'} 0, got {value!r}")
    return value


@dataclass(frozen=True, eq=False)
class RunConfig:
    effective: dict
    debug_mode: bool
    species: NuclearSpecies
    geometry: GeometryConfig
    cavity: CavityParams
    drive: DriveConfig
    detection: DetectionConfig
    grid: np.ndarray
    time_grid: np.ndarray
    tail_correction: bool
    toggles: Toggles
    layer_stack: dict
    oracle: dict
    outputs: dict

    def to_dict(self):
        return copy.deepcopy(self.effective)

    def config_hash(self):
        return config_hash(self.effective)


def config_hash(effective):
    canonical = json.dumps(effective, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _build_geometry(section, key="geometry"):
    pol_section = section["in_polarization"]
    if not isinstance(pol_section, dict) or set(pol_section) != {"sigma", "pi"}:
        raise ConfigValidationError(f"{key}.in_polarization", "expected an object with sigma and pi entries")
    pol = np.array([_complex(pol_section["sigma"], f"{key}.in_polarization.sigma"),
                    _complex(pol_section["pi"], f"{key}.in_polarization.pi")])
    if abs(np.linalg.norm(pol) - 1.0) > 1e-9:
        raise ConfigValidationError(f"{key}.in_polarization", f"must have unit norm, got {np.linalg.norm(pol):.6g}")
    pol = pol / np.linalg.norm(pol)

    misalignment = None
    if section["misalignment"] is not None:
        misalignment = (section["misalignment"]["axis"], section["misalignment"]["angle_deg"])

    b_magnitude = _positive(section["b_magnitude"], f"{key}.b_magnitude", allow_zero=True)
    try:
        if section["b_hat"] is not None:
            b_hat = section["b_hat"]
            if not (isinstance(b_hat, list) and len(b_hat) == 3 and all(_is_number(v) for v in b_hat)):
                raise ConfigValidationError(f"{key}.b_hat", "expected [k0, sigma, pi] components")
            return GeometryConfig.from_components(*b_hat, b_magnitude=b_magnitude, in_polarization=pol,
                                                  misalignment=misalignment)
        if section["preset"] not in GEOMETRY_PRESETS:
            raise ConfigValidationError(f"{key}.preset", f"expected one of {sorted(GEOMETRY_PRESETS)}")
        return GeometryConfig.from_preset(section["preset"], b_magnitude=b_magnitude, in_polarization=pol,
                                          misalignment=misalignment)
    except ConfigValidationError:
        raise
    except ValidationError as e:
        raise ConfigValidationError(key, str(e))


def _build_cavity(section):
    if section["r_c_matrix"] is not None:
        rows = section["r_c_matrix"]
        if not (isinstance(rows, list) and len(rows) == 2 and all(isinstance(r, list) and len(r) == 2 for r in rows)):
            raise ConfigValidationError("cavity.r_c_matrix", "expected [[r_ss, r_sp], [r_ps, r_pp]] of [re, im]")
        r_c = np.array([[_complex(v, "cavity.r_c_matrix") for v in row] for row in rows])
    else:
        r_c = _complex(section["r_c"], "cavity.r_c")
    coupled = section["coupled_polarizations"]
    if not isinstance(coupled, list) or not coupled or any(p not in ("sigma", "pi") for p in coupled):
        raise ConfigValidationError("cavity.coupled_polarizations", "expected a non-empty list of 'sigma'/'pi'")
    amplitude = section["amplitude_scale"]
    if amplitude is not None:
        _positive(amplitude, "cavity.amplitude_scale")
    try:
        return CavityParams(gamma_s=_positive(section["gamma_s"], "cavity.gamma_s", allow_zero=True),
                            delta_ls=float(section["delta_ls"]), r_c=r_c,
                            amplitude_scale=None if amplitude is None else float(amplitude),
                            coupled_polarizations=tuple(coupled))
    except ValidationError as e:
        if isinstance(e, ConfigValidationError):
            raise
        raise ConfigValidationError("cavity", str(e))


def _build_detection(section):
    analyzer = None
    if section["analyzer_line"] is not None:
        analyzer = AnalyzerLine(width=_positive(section["analyzer_line"]["width"], "detection.analyzer_line.width"),
                                depth=_positive(section["analyzer_line"]["depth"], "detection.analyzer_line.depth",
                                                allow_zero=True))
    gate = section["time_gate"]
    if gate is not None:
        if not (isinstance(gate, list) and len(gate) == 2 and all(_is_number(v) for v in gate)):
            raise ConfigValidationError("detection.time_gate", "expected [t1, t2] in units of 1/gamma")
        gate = tuple(gate)
    _positive(section["analyzer_points"], "detection.analyzer_points")
    try:
        return DetectionConfig(mode=section["mode"], extinction=float(section["extinction"]),
                               analyzer_line=analyzer, time_gate=gate)
    except ValidationError as e:
        raise ConfigValidationError("detection", str(e))


def _build_grid(section):
    if section["points"] < 2 or not section["max"] > section["min"]:
        raise ConfigValidationError("grid", "need max > min and at least 2 points")
    return np.linspace(section["min"], section["max"], section["points"])


def _build_time_grid(section):
    half_width = _positive(section["half_width"], "time_grid.half_width")
    points = section["points"]
    if points < 16:
        raise ConfigValidationError("time_grid.points", f"need at least 16 points, got {points}")
    # half-open window keeps the spacing exactly 2*half_width/points
    return -half_width + (2.0 * half_width / points) * np.arange(points)


def build_config(raw):
    """Validate a raw (possibly partial) config dict and build the typed RunConfig"""
    effective = _merge(DEFAULT_CONFIG, raw or {})
    if effective["geometry"]["misalignment"] is not None and effective["geometry"]["misalignment"]["angle_deg"] == 0.0:
        effective["geometry"]["misalignment"] = None

    try:
        species = NuclearSpecies.fe57(**effective["species"])
    except (ValidationError, TypeError) as e:
        raise ConfigValidationError("species", str(e))
    geometry = _build_geometry(effective["geometry"])
    drive = DriveConfig(rabi=float(_positive(effective["drive"]["rabi"], "drive.rabi")),
                        polarization=geometry.in_polarization)

    if effective["outputs"]["plot_format"] not in ("svg", "pdf", "png"):
        raise ConfigValidationError("outputs.plot_format", "expected svg, pdf or png")
    workers = effective["outputs"]["workers"]
    if workers is not None and (not isinstance(workers, int) or workers < 1):
        raise ConfigValidationError("outputs.workers", f"expected a positive integer or null, got {workers!r}")
    oracle = effective["oracle"]
    if not oracle["angle_max"] > oracle["angle_min"] > 0:
        raise ConfigValidationError("oracle", "need angle_max > angle_min > 0")
    if oracle["angle_mrad"] is not None:
        _positive(oracle["angle_mrad"], "oracle.angle_mrad")

    return RunConfig(
        effective=effective,
        debug_mode=effective["DEBUG_MODE"],
        species=species,
        geometry=geometry,
        cavity=_build_cavity(effective["cavity"]),
        drive=drive,
        detection=_build_detection(effective["detection"]),
        grid=_build_grid(effective["grid"]),
        time_grid=_build_time_grid(effective["time_grid"]),
        tail_correction=effective["time_grid"]["tail_correction"],
        toggles=Toggles(**effective["toggles"]),
        layer_stack=effective["layer_stack"],
        oracle=oracle,
        outputs=effective["outputs"],
    )


def parse_config(source=None):
    """
    Parse a run config from a file path, JSON text or dict

    Args:
        source: Path to a JSON file, a JSON string, a dict, or None/"" for all defaults

    Returns:
        RunConfig with every default filled in
    """
    if source is None or (isinstance(source, str) and not source.strip()):
        raw = {}
    else:
        raw = load_raw(source)
    config = build_config(raw)
    LOGGER.writeDebugLog(f"Parsed config {config.config_hash()[:12]}")
    return config


def parse_grid(text):
    """'min:max:n' to a grid section"""
    try:
        low, high, points = text.split(":")
        return {"min": float(low), "max": float(high), "points": int(points)}
    except (ValueError, AttributeError):
        raise ConfigValidationError("grid", f"expected min:max:n, got {text!r}")


def apply_overrides(raw, preset=None, sgc=None, grid=None):
    """CLI overrides applied to the raw dict before validation, so they show up in the echoed config"""
    raw = copy.deepcopy(raw or {})
    if preset is not None:
        geometry = raw.setdefault("geometry", {})
        if not isinstance(geometry, dict):
            raise ConfigValidationError("geometry", "expected an object")
        geometry["preset"] = preset
        geometry["b_hat"] = None
    if sgc is not None:
        if sgc not in ("on", "off"):
            raise ConfigValidationError("toggles", f"--sgc expects on|off, got {sgc!r}")
        toggles = raw.setdefault("toggles", {})
        toggles["sgc_dissipative"] = toggles["sgc_hamiltonian"] = (sgc == "on")
    if grid is not None:
        raw["grid"] = parse_grid(grid)
    return raw


def load_raw(source):
    """Raw dict from a path, JSON text or None (used before overrides are applied)"""
    if source is None:
        return {}
    if isinstance(source, dict):
        return copy.deepcopy(source)
    if not source.lstrip().startswith("{"):
        if not os.path.exists(source):
            raise ConfigValidationError("", f"config file not found: {source}")
        raw = fh.FileHandling(source).read_json()
        if raw is None:
            raise ConfigValidationError("", f"config file is not valid JSON: {source}")
        return raw
    try:
        return json.loads(source)
    except json.JSONDecodeError as e:
        raise ConfigValidationError("", f"invalid JSON: {e}")
