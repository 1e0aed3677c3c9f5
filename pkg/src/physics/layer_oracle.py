"""
Scalar Parratt-recursion reflectivity of the grazing-incidence layer stack.

Independent of the quantum-optical model: the resonant layer carries a
single-line nuclear susceptibility, and fitting the effective single-transition
formula to r(Delta) at the guided-mode angle yields gamma_S, Delta_LS and r_c.
"""

import os
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal

from src.core import log_handling as lh
from src.core import file_handling as fh
from src.core.errors import ConvergenceError, ValidationError
from src.physics.liouvillian import CavityParams

LOG_FILE = lh.log_path("physics.log")
LOG_TZ = "UTC"
LOGGER = lh.LogHandling(LOG_FILE, LOG_TZ)

OPTICAL_CONSTANTS_FILE = os.path.join(lh.PROJECT_ROOT, "config", "optical_constants.json")
MODE_SEARCH_RANGE = (1.5, 4.0)


@dataclass(frozen=True)
class NuclearResonance:
    strength: float
    width: float = 1.0

    def __post_init__(self):
        if self.width <= 0:
            raise ValidationError(f"nuclear resonance width must be > 0, got {self.width}")
        if self.strength < 0:
            raise ValidationError(f"nuclear strength must be >= 0, got {self.strength}")


@dataclass(frozen=True)
class Layer:
    """thickness in nm (inf for the substrate); n = 1 - delta + i beta"""
    name: str
    thickness: float
    delta: float
    beta: float
    nuclear: NuclearResonance = None

    def __post_init__(self):
        if not self.thickness > 0:
            raise ValidationError(f"layer {self.name}: thickness must be > 0, got {self.thickness}")
        if self.beta < 0:
            raise ValidationError(f"layer {self.name}: beta must be >= 0, got {self.beta}")

    @property
    def semi_infinite(self):
        return np.isinf(self.thickness)

    def susceptibility(self, detuning):
        chi = np.asarray(-2.0 * self.delta + 2.0j * self.beta, dtype=complex)
        if self.nuclear is not None:
            chi = chi + nuclear_susceptibility(detuning, self.nuclear)
        return chi


@dataclass(frozen=True, eq=False)
class LayerStack:
    """Layers top to bottom below vacuum; the last one is the semi-infinite substrate"""
    layers: tuple
    wavelength_nm: float = 0.08603

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers or not layers[-1].semi_infinite:
            raise ValidationError("layer stack needs a semi-infinite bottom layer")
        if any(layer.semi_infinite for layer in layers[:-1]):
            raise ValidationError("only the bottom layer of a stack may be semi-infinite")
        if self.wavelength_nm <= 0:
            raise ValidationError(f"wavelength must be > 0, got {self.wavelength_nm}")

    @classmethod
    def vacuum(cls):
        return cls(layers=(Layer("vacuum", np.inf, 0.0, 0.0),))

    @property
    def k0(self):
        return 2.0 * np.pi / self.wavelength_nm

    @property
    def resonant_layers(self):
        return [layer for layer in self.layers if layer.nuclear is not None]

    def without_nuclear(self):
        return LayerStack(layers=tuple(Layer(l.name, l.thickness, l.delta, l.beta) for l in self.layers),
                          wavelength_nm=self.wavelength_nm)


@dataclass(frozen=True)
class CavityFit:
    gamma_s: float
    delta_ls: float
    r_c: complex
    amplitude_scale: float
    phase: float
    residual: float
    angle_mrad: float = None
    relative_l2: float = 0.0

    def cavity_params(self):
        """Effective-model parameters; the fitted phase of A has no place there and is dropped"""
        return CavityParams(gamma_s=self.gamma_s, delta_ls=self.delta_ls, r_c=self.r_c,
                            amplitude_scale=self.amplitude_scale, coupled_polarizations=("sigma",))

    def to_dict(self):
        return {
            "gamma_s": self.gamma_s,
            "delta_ls": self.delta_ls,
            "r_c": [float(np.real(self.r_c)), float(np.imag(self.r_c))],
            "amplitude_scale": self.amplitude_scale,
            "phase": self.phase,
            "relative_residual": self.residual,
            "relative_l2": self.relative_l2,
            "angle_mrad": self.angle_mrad,
        }


def load_optical_constants(path=OPTICAL_CONSTANTS_FILE):
    data = fh.FileHandling(path).read_json()
    if not data or "materials" not in data:
        raise ValidationError(f"cannot read optical constants from {path}")
    return data


def material_layer(material, thickness, constants=None, nuclear=None, name=None):
    constants = constants or load_optical_constants()
    try:
        entry = constants["materials"][material]
    except KeyError:
        raise ValidationError(f"material {material!r} missing from the optical constants table")
    return Layer(name or material, float(thickness), float(entry["delta"]), float(entry["beta"]), nuclear)


def fe57_cavity_stack(top_pd=5.0, carbon=40.0, buffer_fe=0.6, resonant_fe=2.5, bottom_pd=20.0,
                      substrate="Si", constants=None, resonant=True):
    """
    Pd / C / Fe / 57Fe / Fe / C / Pd on a substrate, the resonant layer centred
    in the carbon guiding layer (carbon is the total guiding-layer thickness)
    """
    constants = constants or load_optical_constants()
    half_carbon = 0.5 * (carbon - 2.0 * buffer_fe - resonant_fe)
    if half_carbon <= 0:
        raise ValidationError("carbon layer too thin to hold the resonant layer and its buffers")
    nuclear_entry = constants.get("nuclear", {}).get("57Fe", {"strength": 1.13e-4, "width": 1.0})
    nuclear = NuclearResonance(float(nuclear_entry["strength"]), float(nuclear_entry["width"])) if resonant else None
    layers = (
        material_layer("Pd", top_pd, constants),
        material_layer("C", half_carbon, constants),
        material_layer("Fe", buffer_fe, constants, name="56Fe"),
        material_layer("Fe", resonant_fe, constants, nuclear=nuclear, name="57Fe"),
        material_layer("Fe", buffer_fe, constants, name="56Fe"),
        material_layer("C", half_carbon, constants),
        material_layer("Pd", bottom_pd, constants),
        material_layer(substrate, np.inf, constants),
    )
    return LayerStack(layers=layers, wavelength_nm=float(constants.get("wavelength_nm", 0.08603)))


def nuclear_susceptibility(detuning, nuclear):
    """chi_N = -S/(Delta + i w/2); zero at infinite detuning"""
    detuning = np.asarray(detuning, dtype=float)
    finite = np.isfinite(detuning)
    safe = np.where(finite, detuning, 0.0)
    chi = -nuclear.strength / (safe + 0.5j * nuclear.width)
    return np.where(finite, chi, 0.0 + 0.0j)


def _kz(k0, sin2, chi):
    kz = k0 * np.sqrt(sin2 + chi + 0j)
    return np.where(kz.imag < 0, -kz, kz)


def parratt_reflectivity(stack, angle_mrad, detuning=np.inf):
    """
    Specular amplitude reflectivity by the Parratt recursion (no roughness)

    angle_mrad and detuning broadcast against each other; detuning=inf switches
    the nuclear resonance off.
    """
    theta = np.asarray(angle_mrad, dtype=float) * 1e-3
    if np.any(theta <= 0):
        raise ValidationError("grazing angle must be > 0")
    detuning = np.asarray(detuning, dtype=float)
    theta, detuning = np.broadcast_arrays(theta, detuning)
    sin2 = np.sin(theta) ** 2

    kz = [_kz(stack.k0, sin2, 0.0)] + [_kz(stack.k0, sin2, layer.susceptibility(detuning)) for layer in stack.layers]
    reflect = np.zeros(theta.shape, dtype=complex)
    for j in range(len(stack.layers) - 1, -1, -1):
        fresnel = (kz[j] - kz[j + 1]) / (kz[j] + kz[j + 1])
        below = stack.layers[j]
        phase = 0.0 if below.semi_infinite else np.exp(2j * kz[j + 1] * below.thickness)
        reflect = (fresnel + reflect * phase) / (1.0 + fresnel * reflect * phase)
    return reflect[()] if reflect.ndim == 0 else reflect


def angle_scan(stack, angles_mrad, detuning=np.inf):
    return parratt_reflectivity(stack, np.asarray(angles_mrad, dtype=float), detuning)


def detuning_scan(stack, angle_mrad, grid):
    return parratt_reflectivity(stack, angle_mrad, np.asarray(grid, dtype=float))


def find_mode_angle(stack, search_range=MODE_SEARCH_RANGE, points=2001, prominence_fraction=0.05):
    """Angle (mrad) of the first prominent reflectivity minimum of the off-resonant stack"""
    angles = np.linspace(search_range[0], search_range[1], points)
    intensity = np.abs(angle_scan(stack, angles)) ** 2
    minima, _ = signal.find_peaks(-intensity, prominence=prominence_fraction * float(np.max(intensity)))
    if minima.size == 0:
        raise ConvergenceError(f"no guided-mode minimum between {search_range[0]} and {search_range[1]} mrad")
    angle = float(angles[minima[0]])
    LOGGER.writeDebugLog(f"layer_oracle: first mode at {angle:.4f} mrad, |r|^2 = {intensity[minima[0]]:.4g}")
    return angle


def single_line_reflectivity(grid, gamma_s, delta_ls, r_c, amplitude, phase, gamma=1.0):
    """r_c + i A e^{i phi} / (Delta + Delta_LS + i (gamma + gamma_S)/2)"""
    grid = np.asarray(grid, dtype=float)
    return r_c + 1j * amplitude * np.exp(1j * phase) / (grid + delta_ls + 0.5j * (gamma + gamma_s))


def _initial_guess(grid, values):
    r_c = 0.5 * (values[0] + values[-1])
    scattered = np.abs(values - r_c) ** 2
    peak = int(np.argmax(scattered))
    above = grid[scattered >= 0.5 * scattered[peak]]
    width = max(float(above[-1] - above[0]), 1.0 + 1e-3) if above.size > 1 else 2.0
    peak_value = values[peak] - r_c
    amplitude = max(abs(peak_value) * width / 2.0, 1e-12)
    return np.array([max(width - 1.0, 1e-3), -float(grid[peak]), r_c.real, r_c.imag,
                     amplitude, float(np.angle(peak_value))])


def fit_cavity_params(grid, values, angle_mrad=None, initial=None, gamma=1.0, tol=1e-14):
    """
    Least-squares fit of the single-transition reflection formula to a complex
    r(Delta) scan; the residual is the RMS misfit relative to the peak of |r - r_c|,
    relative_l2 is ||model - r|| / ||r|| over the whole scan.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=complex)
    if grid.shape != values.shape or grid.size < 6:
        raise ValidationError("fit needs matching grid/value arrays with at least 6 points")
    start = _initial_guess(grid, values) if initial is None else np.asarray(initial, dtype=float)

    def residuals(x):
        model = single_line_reflectivity(grid, x[0], x[1], x[2] + 1j * x[3], x[4], x[5], gamma)
        diff = model - values
        return np.concatenate([diff.real, diff.imag])

    lower = [0.0, -np.inf, -np.inf, -np.inf, 0.0, -np.inf]
    result = optimize.least_squares(residuals, start, bounds=(lower, np.inf), method="trf",
                                    x_scale="jac", xtol=tol, ftol=tol, gtol=tol, max_nfev=20000)
    if not result.success:
        LOGGER.writeLog(f"layer_oracle: fit did not converge: {result.message} at {result.x}")
        raise ConvergenceError(f"cavity fit did not converge: {result.message}",
                               residual=float(np.linalg.norm(result.fun)), last_iterate=result.x)

    gamma_s, delta_ls, rc_re, rc_im, amplitude, phase = (float(v) for v in result.x)
    r_c = complex(rc_re, rc_im)
    peak = float(np.max(np.abs(values - r_c)))
    rms = float(np.sqrt(np.mean(result.fun[:grid.size] ** 2 + result.fun[grid.size:] ** 2)))
    norm = float(np.linalg.norm(values))
    misfit = float(np.linalg.norm(result.fun))
    fit = CavityFit(gamma_s=gamma_s, delta_ls=delta_ls, r_c=r_c, amplitude_scale=amplitude,
                    phase=float(np.angle(np.exp(1j * phase))), residual=rms / peak if peak > 0 else rms,
                    angle_mrad=angle_mrad, relative_l2=misfit / norm if norm > 0 else misfit)
    LOGGER.writeDebugLog(f"layer_oracle: fit gamma_s={gamma_s:.4f} delta_ls={delta_ls:.4f} "
                         f"residual={fit.residual:.3e} relative_l2={fit.relative_l2:.3e}")
    return fit


def fit_stack(stack, angle_mrad=None, half_width=50.0, points=2001):
    """Fit the effective parameters to the stack's r(Delta) at angle_mrad (default: the mode angle)"""
    if not stack.resonant_layers:
        raise ValidationError("stack has no resonant layer to fit")
    angle = find_mode_angle(stack.without_nuclear()) if angle_mrad is None else float(angle_mrad)
    grid = np.linspace(-half_width, half_width, points)
    return fit_cavity_params(grid, detuning_scan(stack, angle, grid), angle_mrad=angle)
