"""
Polarization-resolved reflectivity of the thin-film cavity.

r(Delta) = r_c + i A V^dagger M(Delta)^-1 V over (sigma, pi) output/input
polarizations, the two detection channels, dip/peak analysis, the time
response of the delayed photons and a single-line analyzer scan.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from src.core import log_handling as lh
from src.core import file_handling as fh
from src.core.errors import SolverError, ValidationError
from src.physics.hyperfine import build_level_scheme, reverse_field
from src.physics import liouvillian as lv
from src.tasks.sweep_tasks import run_sweep

LOG_FILE = lh.log_path("physics.log")
LOG_TZ = "UTC"
LOGGER = lh.LogHandling(LOG_FILE, LOG_TZ)

DETECTION_MODES = ("crossed_polarimeter", "direct_monochromator")
CHANNELS = ("I_crossed", "I_direct")
SPECTRUM_HEADER = ["delta_gamma", "re_r_ss", "im_r_ss", "re_r_ps", "im_r_ps",
                   "re_r_sp", "im_r_sp", "re_r_pp", "im_r_pp", "I_crossed", "I_direct"]
TIME_HEADER = ["t_gamma", "intensity"]
MEASUREMENT_HEADER = ["analyzer_detuning_gamma", "intensity", "signal"]

EDGE_TOLERANCE = 1e-4
TAIL_KAPPA = 8.0
UNIFORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ReflectionMatrix:
    """r[p_out, p_in] with index 0 = sigma, 1 = pi"""
    r: np.ndarray
    delta: float = 0.0

    def max_singular_value(self):
        return float(np.linalg.svd(self.r, compute_uv=False)[0])


@dataclass(frozen=True)
class AnalyzerLine:
    width: float = 1.0
    depth: float = 1e-3

    def __post_init__(self):
        if self.width <= 0:
            raise ValidationError(f"analyzer width must be > 0, got {self.width}")
        if self.depth < 0:
            raise ValidationError(f"analyzer effective thickness must be >= 0, got {self.depth}")


@dataclass(frozen=True)
class DetectionConfig:
    mode: str = "direct_monochromator"
    extinction: float = 1e-10
    analyzer_line: AnalyzerLine = None
    time_gate: tuple = None

    def __post_init__(self):
        if self.mode not in DETECTION_MODES:
            raise ValidationError(f"detection mode must be one of {DETECTION_MODES}, got {self.mode!r}")
        if not 0.0 <= self.extinction <= 1.0:
            raise ValidationError(f"extinction must lie in [0, 1], got {self.extinction}")
        if self.time_gate is not None:
            t1, t2 = (float(v) for v in self.time_gate)
            if not (t2 > t1 >= 0.0):
                raise ValidationError(f"time gate must satisfy t2 > t1 >= 0, got {self.time_gate}")
            object.__setattr__(self, "time_gate", (t1, t2))

    @property
    def channel(self):
        return "I_crossed" if self.mode == "crossed_polarimeter" else "I_direct"


@dataclass(frozen=True, eq=False)
class Spectrum:
    detunings: np.ndarray
    matrices: np.ndarray
    channels: dict
    in_polarization: np.ndarray
    baseline: dict
    r_c: np.ndarray = field(default_factory=lambda: np.zeros((2, 2), dtype=complex))
    label: str = ""

    def matrix(self, index):
        return ReflectionMatrix(r=self.matrices[index], delta=float(self.detunings[index]))

    def max_singular_value(self):
        return float(np.max(np.linalg.svd(self.matrices, compute_uv=False)))


@dataclass(frozen=True)
class SpectralFeature:
    """A dip or peak; depth is measured from the channel's r_c baseline"""
    position: float
    value: float
    depth: float
    width: float
    prominence: float


@dataclass(frozen=True, eq=False)
class TimeResponse:
    times: np.ndarray
    intensity: np.ndarray
    channel: str


@dataclass(frozen=True, eq=False)
class Measurement:
    analyzer_detunings: np.ndarray
    intensity: np.ndarray
    signal: np.ndarray
    reference: float


# --- reflection ------------------------------------------------------------------

def reflection_matrices(detunings, couplings, cavity, grid, toggles=lv.Toggles(), gamma=1.0):
    """Batched r(Delta) for every grid point, shape (N, 2, 2)"""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    couplings = np.asarray(couplings, dtype=complex) * cavity.polarization_mask()[None, :]
    g = lv.g_matrix_from_couplings(couplings, cavity)
    b = lv.effective_matrix(detunings, g, cavity, toggles, 0.0, gamma)
    n = b.shape[0]
    stack = grid[:, None, None] * np.eye(n)[None, :, :] + b[None, :, :]
    condition = np.linalg.cond(stack)
    worst = int(np.argmax(np.where(np.isfinite(condition), condition, np.inf)))
    if not np.all(np.isfinite(condition)) or condition[worst] > lv.MAX_CONDITION:
        LOGGER.writeLog(f"response: ill-conditioned system at delta={grid[worst]}")
        raise SolverError(f"singular linear system at delta={grid[worst]}",
                          condition_number=float(condition[worst]))
    solved = np.linalg.solve(stack, np.broadcast_to(couplings, (grid.size, n, 2)))
    return cavity.r_c[None, :, :] + 1j * cavity.amplitude_scale * couplings.conj().T[None, :, :] @ solved


def reflection_matrix(scheme, cavity, delta, toggles=lv.Toggles()):
    r = reflection_matrices(scheme.detunings(), scheme.coupling_matrix(), cavity, [delta], toggles)[0]
    return ReflectionMatrix(r=r, delta=float(delta))


def reflection_from_coherences(scheme, cavity, delta, toggles=lv.Toggles(), rabi=1e-3):
    """The output-field route: column p' of r from the coherences driven by e_p'"""
    couplings = scheme.coupling_matrix() * cavity.polarization_mask()[None, :]
    r = cavity.r_c.copy()
    for p_in in range(2):
        e_in = np.zeros(2, dtype=complex)
        e_in[p_in] = 1.0
        coherence = lv.linear_response_from_couplings(scheme.detunings(), scheme.coupling_matrix(), cavity,
                                                      e_in, delta, rabi=rabi, toggles=toggles)
        r[:, p_in] += -1j * cavity.amplitude_scale * (couplings.conj().T @ coherence.rho) / rabi
    return ReflectionMatrix(r=r, delta=float(delta))


def _orthogonal(polarization):
    return np.array([-np.conj(polarization[1]), np.conj(polarization[0])])


def channel_intensities(matrices, detection, in_polarization):
    """I_crossed and I_direct for a stack of reflection matrices"""
    in_polarization = np.asarray(in_polarization, dtype=complex)
    if abs(np.linalg.norm(in_polarization) - 1.0) > 1e-12:
        raise ValidationError("in_polarization must have unit norm")
    out = np.asarray(matrices) @ in_polarization
    rotated = np.abs(out @ _orthogonal(in_polarization).conj()) ** 2
    kept = np.abs(out @ in_polarization.conj()) ** 2
    return {"I_crossed": rotated + detection.extinction * kept, "I_direct": rotated + kept}


def channel_intensity(matrix, detection, in_polarization):
    r = matrix.r if isinstance(matrix, ReflectionMatrix) else np.asarray(matrix)
    return {name: float(value) for name, value in channel_intensities(r[None], detection, in_polarization).items()}


def validate_grid(grid, uniform=False):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("detuning grid must be a non-empty 1-D array")
    steps = np.diff(grid)
    if np.any(steps <= 0):
        raise ValidationError("detuning grid must be strictly increasing")
    if uniform and steps.size and np.max(np.abs(steps - steps[0])) > UNIFORM_TOL * max(1.0, abs(steps[0])):
        raise ValidationError("detuning grid must be uniformly spaced")
    return grid


def spectrum_sweep(scheme, cavity, detection, grid, toggles=lv.Toggles(), in_polarization=None,
                   workers=None, label=""):
    grid = validate_grid(grid)
    pol = scheme.geometry.in_polarization if in_polarization is None else np.asarray(in_polarization, dtype=complex)
    detunings, couplings = scheme.detunings(), scheme.coupling_matrix()

    matrices = run_sweep(lambda chunk: reflection_matrices(detunings, couplings, cavity, chunk, toggles),
                         grid, workers=workers)
    channels = channel_intensities(matrices, detection, pol)
    baseline = {k: float(v[0]) for k, v in channel_intensities(cavity.r_c[None], detection, pol).items()}
    LOGGER.writeDebugLog(f"response: swept {grid.size} points over [{grid[0]}, {grid[-1]}] ({label or 'spectrum'})")
    return Spectrum(detunings=grid, matrices=matrices, channels=channels, in_polarization=pol,
                    baseline=baseline, r_c=cavity.r_c.copy(), label=label)


# --- spectral features -----------------------------------------------------------

def _features(spectrum, channel, prominence_fraction, minima):
    if channel not in spectrum.channels:
        raise ValidationError(f"unknown channel {channel!r}, expected one of {sorted(spectrum.channels)}")
    intensity = np.asarray(spectrum.channels[channel])
    scale = float(np.max(intensity)) if intensity.size else 0.0
    if intensity.size < 3 or scale <= 0:
        return []
    target = -intensity if minima else intensity
    indices, properties = signal.find_peaks(target, prominence=prominence_fraction * scale)
    if indices.size == 0:
        return []
    widths = signal.peak_widths(target, indices, rel_height=0.5)[0]
    step = np.gradient(spectrum.detunings)[indices]
    baseline = spectrum.baseline.get(channel, 0.0)
    return [SpectralFeature(position=float(spectrum.detunings[i]), value=float(intensity[i]),
                            depth=float(intensity[i] - baseline), width=float(w * s),
                            prominence=float(p))
            for i, w, s, p in zip(indices, widths, step, properties["prominences"])]


def find_dips(spectrum, channel="I_direct", prominence_fraction=0.05):
    """Local minima with prominence >= prominence_fraction of the channel maximum"""
    return _features(spectrum, channel, prominence_fraction, minima=True)


def find_peaks(spectrum, channel="I_direct", prominence_fraction=0.05):
    return _features(spectrum, channel, prominence_fraction, minima=False)


def eigenpolarizations(matrix):
    """
    Jones eigenvectors of r (polarizations reflected without rotation)

    Returns:
        list of (eigenvalue, unit Jones vector) sorted by descending |eigenvalue|
    """
    r = matrix.r if isinstance(matrix, ReflectionMatrix) else np.asarray(matrix)
    values, vectors = np.linalg.eig(r)
    order = np.argsort(-np.abs(values))
    return [(complex(values[i]), vectors[:, i] / np.linalg.norm(vectors[:, i])) for i in order]


def reciprocity_defect(scheme, cavity, grid, toggles=lv.Toggles()):
    """max |r_{-B}(Delta) - r_B(Delta)^T| over the grid"""
    reversed_scheme = build_level_scheme(scheme.species, reverse_field(scheme.geometry))
    forward = reflection_matrices(scheme.detunings(), scheme.coupling_matrix(), cavity, grid, toggles)
    backward = reflection_matrices(reversed_scheme.detunings(), reversed_scheme.coupling_matrix(),
                                   cavity, grid, toggles)
    return float(np.max(np.abs(backward - np.swapaxes(forward, 1, 2))))


# --- time domain -----------------------------------------------------------------

def _tail_model(grid, values, kappa=TAIL_KAPPA):
    """C/(Delta - center + i kappa) through the two window edges (least squares in center)"""
    a, b = grid[0], grid[-1]
    f_a, f_b = values[0], values[-1]
    difference = f_b - f_a
    if abs(difference) < 1e-300:
        center = 0.5 * (a + b)
    else:
        center = float(np.real(np.conj(difference) * (f_b * (b + 1j * kappa) - f_a * (a + 1j * kappa)))
                       / abs(difference) ** 2)
    amplitude = 0.5 * (f_a * (a - center + 1j * kappa) + f_b * (b - center + 1j * kappa))
    return amplitude, center


def field_transform(grid, values, tail_correction=True, kappa=TAIL_KAPPA):
    """
    E(t) = integral dDelta/2pi f(Delta) exp(-i Delta t) on the FFT time axis

    Returns (times, fields) with times sorted ascending, negative times included.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=complex)
    n = grid.size
    step = grid[1] - grid[0]
    times = np.fft.fftfreq(n, d=step / (2.0 * np.pi))

    amplitude, center = (0.0, 0.0)
    if tail_correction:
        amplitude, center = _tail_model(grid, values, kappa)
        values = values - amplitude / (grid - center + 1j * kappa)

    fields = (step / (2.0 * np.pi)) * np.exp(-1j * grid[0] * times) * np.fft.fft(values)
    if tail_correction:
        tail = -1j * amplitude * np.exp(-1j * center * times - kappa * times)
        fields = fields + np.where(times > 0, tail, np.where(times == 0, 0.5 * tail, 0.0))

    order = np.argsort(times)
    return times[order], fields[order]


def _gate_mask(times, time_gate):
    if time_gate is None:
        return np.ones(times.size, dtype=bool)
    t1, t2 = time_gate
    return (times >= t1) & (times <= t2)


def _check_edges(spectrum, tolerance=EDGE_TOLERANCE):
    scattered = np.abs(spectrum.matrices - spectrum.r_c[None]).max(axis=(1, 2))
    edge = max(scattered[0], scattered[-1])
    if edge >= tolerance:
        LOGGER.writeLog(f"response: |r - r_c| = {edge:.2e} at the window edge exceeds {tolerance:.0e}; "
                        f"time response relies on the tail correction")
    return edge


def time_response(spectrum, detection, channel=None, tail_correction=True):
    """
    Delayed-photon intensity of one channel, |FFT of (r - r_c) e_in|^2 summed over
    the channel's polarization components, restricted to detection.time_gate.

    Without a gate every FFT time is returned (negative times included) so that
    the sum of I dt equals the integral of |r - r_c|^2 dDelta/2pi.
    """
    grid = validate_grid(spectrum.detunings, uniform=True)
    if grid.size < 2:
        raise ValidationError("time response needs at least two detuning points")
    channel = channel or detection.channel
    _check_edges(spectrum)

    intensity = None
    times = None
    for values, weight in _channel_components(spectrum, detection, channel):
        if weight == 0.0:
            continue
        times, fields = field_transform(grid, values, tail_correction=tail_correction)
        contribution = weight * np.abs(fields) ** 2
        intensity = contribution if intensity is None else intensity + contribution
    if times is None:
        times = np.sort(np.fft.fftfreq(grid.size, d=(grid[1] - grid[0]) / (2.0 * np.pi)))
        intensity = np.zeros(grid.size)

    mask = _gate_mask(times, detection.time_gate)
    return TimeResponse(times=times[mask], intensity=intensity[mask], channel=channel)


def _channel_components(spectrum, detection, channel):
    pol = spectrum.in_polarization
    scattered = (spectrum.matrices - spectrum.r_c[None]) @ pol
    rotated = scattered @ _orthogonal(pol).conj()
    kept = scattered @ pol.conj()
    if channel == "I_direct":
        return [(rotated, 1.0), (kept, 1.0)]
    if channel == "I_crossed":
        return [(rotated, 1.0), (kept, detection.extinction)]
    raise ValidationError(f"unknown channel {channel!r}, expected one of {CHANNELS}")


def analyzer_transmission(grid, delta_a, analyzer):
    """exp(-(b/2) (i w/2)/(omega - delta_a + i w/2)) for a single-line absorber"""
    half = 0.5 * analyzer.width
    return np.exp(-0.5 * analyzer.depth * (1j * half) / (np.asarray(grid) - delta_a + 1j * half))


def simulate_measurement(spectrum, detection, analyzer_detunings=None, channel=None, tail_correction=True):
    """
    Single-line analyzer scan: gated delayed intensity of (r - r_c) T_a for each
    analyzer detuning; the signal is the absorption dip I_ref - I(delta_a).
    """
    if detection.analyzer_line is None:
        raise ValidationError("simulate_measurement needs detection.analyzer_line")
    grid = validate_grid(spectrum.detunings, uniform=True)
    channel = channel or detection.channel
    analyzer = detection.analyzer_line
    if analyzer_detunings is None:
        analyzer_detunings = grid[::max(1, grid.size // 400)]
    analyzer_detunings = np.asarray(analyzer_detunings, dtype=float)
    components = [(v, w) for v, w in _channel_components(spectrum, detection, channel) if w != 0.0]

    def gated_intensity(transmission):
        total = 0.0
        for values, weight in components:
            times, fields = field_transform(grid, values * transmission, tail_correction=tail_correction)
            mask = _gate_mask(times, detection.time_gate)
            dt = 2.0 * np.pi / (grid.size * (grid[1] - grid[0]))
            total += weight * float(np.sum(np.abs(fields[mask]) ** 2) * dt)
        return total

    reference = gated_intensity(np.ones(grid.size))
    intensity = np.array([gated_intensity(analyzer_transmission(grid, d, analyzer)) for d in analyzer_detunings])
    LOGGER.writeDebugLog(f"response: analyzer scan over {analyzer_detunings.size} positions, gate={detection.time_gate}")
    return Measurement(analyzer_detunings=analyzer_detunings, intensity=intensity,
                       signal=reference - intensity, reference=reference)


# --- serialization ---------------------------------------------------------------

def spectrum_rows(spectrum):
    for delta, r, crossed, direct in zip(spectrum.detunings, spectrum.matrices,
                                         spectrum.channels["I_crossed"], spectrum.channels["I_direct"]):
        yield [float(delta),
               float(r[0, 0].real), float(r[0, 0].imag), float(r[1, 0].real), float(r[1, 0].imag),
               float(r[0, 1].real), float(r[0, 1].imag), float(r[1, 1].real), float(r[1, 1].imag),
               float(crossed), float(direct)]


def write_spectrum_csv(spectrum, path, comments=None):
    return fh.FileHandling(path).write_csv(spectrum_rows(spectrum), SPECTRUM_HEADER, comments)


def write_time_response_csv(response, path, comments=None):
    rows = ([float(t), float(i)] for t, i in zip(response.times, response.intensity))
    return fh.FileHandling(path).write_csv(rows, TIME_HEADER, comments)


def write_measurement_csv(measurement, path, comments=None):
    rows = ([float(d), float(i), float(s)] for d, i, s in
            zip(measurement.analyzer_detunings, measurement.intensity, measurement.signal))
    return fh.FileHandling(path).write_csv(rows, MEASUREMENT_HEADER, comments)
