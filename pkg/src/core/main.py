#!/usr/bin/env python3
"""
SGC cavity simulator - Main Module
Computes level schemes, reflectivity spectra, time responses, analyzer scans and
layer-stack oracles for 57Fe in a thin-film x-ray cavity, writing CSV/JSON/plots
"""

import os
import sys
import platform
import argparse

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), '..', '..'))

import src
from src.core import log_handling as lh
from src.core import file_handling as fh
from src.core import config_handling as ch
from src.core import plot_handling as ph
from src.core.errors import ValidationError, exit_code_for
from src.physics.hyperfine import GEOMETRY_PRESETS, build_level_scheme
from src.physics import liouvillian as lv
from src.physics import response as rs
from src.physics import layer_oracle as lo

LOG_FILE = lh.log_path("main.log")
LOG_TZ = "UTC"
LOGGER = lh.LogHandling(LOG_FILE, LOG_TZ)

COMMANDS = ("levels", "spectrum", "time", "measure", "oracle", "fit")
LEVELS_HEADER = ["transition", "m_g", "m_e", "q", "cg", "detuning_gamma", "abs_c_sigma", "abs_c_pi",
                 "ground_population"]
ANGLE_SCAN_HEADER = ["angle_mrad", "re_r", "im_r", "reflectivity"]
ORACLE_SPECTRUM_HEADER = ["delta_gamma", "re_r", "im_r", "reflectivity"]


def library_versions():
    import scipy
    import sympy
    import matplotlib
    return {
        "sgc_cavity": getattr(src, "__version__", "unknown"),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "sympy": sympy.__version__,
        "matplotlib": matplotlib.__version__,
    }


def feature_dicts(features):
    return [{"position": f.position, "value": f.value, "depth": f.depth, "width": f.width,
             "prominence": f.prominence} for f in features]


def channel_features(spectrum, channel, prominence):
    return {"dips": feature_dicts(rs.find_dips(spectrum, channel, prominence)),
            "peaks": feature_dicts(rs.find_peaks(spectrum, channel, prominence))}


class SGCSimulator:
    def __init__(self, config, out_dir):
        """
        Initialize a run

        Args:
            config: Validated RunConfig
            out_dir: Directory receiving every artifact of this run
        """
        self.config = config
        self.out_dir = out_dir
        self.config_hash = config.config_hash()
        self.comments = {"config_hash": self.config_hash}
        os.makedirs(out_dir, exist_ok=True)
        if config.debug_mode:
            for logger in (LOGGER, ch.LOGGER, ph.LOGGER, lv.LOGGER, rs.LOGGER, lo.LOGGER):
                logger.setDebugMode(True)


    def path(self, name):
        return os.path.join(self.out_dir, name)


    def saved(self, written):
        if not written:
            raise OSError(f"could not write an output file in {self.out_dir}, see file_handling.log")
        return written


    def scheme(self):
        return build_level_scheme(self.config.species, self.config.geometry)


    def summary_base(self, command):
        cfg = self.config
        return {
            "command": command,
            "config_hash": self.config_hash,
            "parameters": {
                "preset": cfg.geometry.preset,
                "b_magnitude": cfg.geometry.b_magnitude,
                "gamma_s": cfg.cavity.gamma_s,
                "delta_ls": cfg.cavity.delta_ls,
                "amplitude_scale": cfg.cavity.amplitude_scale,
                "detection_mode": cfg.detection.mode,
                "toggles": {"sgc_dissipative": cfg.toggles.sgc_dissipative,
                            "sgc_hamiltonian": cfg.toggles.sgc_hamiltonian, "sr": cfg.toggles.sr},
            },
            "versions": library_versions(),
            "dips": [],
            "peaks": [],
        }


    def sweep(self, grid, toggles=None, label=""):
        cfg = self.config
        return rs.spectrum_sweep(self.scheme(), cfg.cavity, cfg.detection, grid,
                                 toggles=cfg.toggles if toggles is None else toggles,
                                 workers=cfg.outputs["workers"], label=label)


    def run_levels(self):
        scheme = self.scheme()
        rows = [[row[key] for key in LEVELS_HEADER] for row in scheme.describe()]
        self.saved(fh.FileHandling(self.path("levels.csv")).write_csv(rows, LEVELS_HEADER, self.comments))
        summary = self.summary_base("levels")
        summary["transitions"] = scheme.describe()
        positions, widths = lv.decay_eigenvalues(scheme.detunings(), lv.g_matrix(scheme, self.config.cavity),
                                                 self.config.cavity, self.config.toggles)
        summary["collective_modes"] = [{"position": float(p), "width": float(w)} for p, w in zip(positions, widths)]
        return summary


    def run_spectrum(self):
        cfg = self.config
        channel = cfg.detection.channel
        prominence = cfg.outputs["prominence_fraction"]
        spectrum = self.sweep(cfg.grid, label="SGC on" if cfg.toggles.sgc_dissipative else "SGC off")
        self.saved(rs.write_spectrum_csv(spectrum, self.path("spectrum.csv"), self.comments))

        summary = self.summary_base("spectrum")
        summary["channel"] = channel
        summary.update(channel_features(spectrum, channel, prominence))
        # the SGC contrast at half-Faraday shows in the crossed channel
        summary["crossed"] = channel_features(spectrum, "I_crossed", prominence)
        summary["max_singular_value"] = spectrum.max_singular_value()

        curves = [ph.spectrum_series(spectrum, channel, label=spectrum.label)]
        if cfg.toggles.sr and (cfg.toggles.sgc_dissipative or cfg.toggles.sgc_hamiltonian):
            reference = self.sweep(cfg.grid, toggles=lv.Toggles.sgc_off(), label="SGC off")
            self.saved(rs.write_spectrum_csv(reference, self.path("spectrum_sgc_off.csv"), self.comments))
            summary["sgc_off"] = channel_features(reference, channel, prominence)
            summary["sgc_off"]["crossed"] = channel_features(reference, "I_crossed", prominence)
            curves.append(ph.spectrum_series(reference, channel, label="SGC off", style="dashed"))

        if cfg.outputs["plots"]:
            ph.emit_plot(curves, self.path(f"spectrum.{cfg.outputs['plot_format']}"),
                         title=f"{cfg.geometry.preset} ({channel})")
        return summary


    def time_spectrum(self):
        return self.sweep(self.config.time_grid, label="time grid")


    def run_time(self):
        cfg = self.config
        response = rs.time_response(self.time_spectrum(), cfg.detection, tail_correction=cfg.tail_correction)
        keep = response.times >= 0
        response = rs.TimeResponse(times=response.times[keep], intensity=response.intensity[keep],
                                   channel=response.channel)
        self.saved(rs.write_time_response_csv(response, self.path("time_response.csv"), self.comments))
        if cfg.outputs["plots"] and response.times.size:
            ph.emit_plot(ph.time_series(response, label=response.channel),
                         self.path(f"time_response.{cfg.outputs['plot_format']}"),
                         xlabel=r"Time ($1/\gamma$)", log_y=True)
        summary = self.summary_base("time")
        summary["channel"] = response.channel
        summary["prompt_intensity"] = float(response.intensity[0]) if response.intensity.size else 0.0
        summary["points"] = int(response.times.size)
        return summary


    def run_measure(self):
        cfg = self.config
        if cfg.detection.analyzer_line is None:
            raise ValidationError("detection.analyzer_line must be set for the measure command")
        positions = np.linspace(cfg.grid[0], cfg.grid[-1], cfg.effective["detection"]["analyzer_points"])
        measurement = rs.simulate_measurement(self.time_spectrum(), cfg.detection, analyzer_detunings=positions,
                                              tail_correction=cfg.tail_correction)
        self.saved(rs.write_measurement_csv(measurement, self.path("measurement.csv"), self.comments))
        if cfg.outputs["plots"]:
            ph.emit_plot(ph.PlotSeries(x=measurement.analyzer_detunings, y=measurement.signal, label="signal"),
                         self.path(f"measurement.{cfg.outputs['plot_format']}"),
                         xlabel=r"Analyzer detuning ($\gamma$)", ylabel="Absorbed delayed intensity")
        summary = self.summary_base("measure")
        summary["reference_intensity"] = measurement.reference
        best = int(np.argmax(measurement.signal))
        summary["max_signal"] = {"position": float(positions[best]), "value": float(measurement.signal[best])}
        return summary


    def stack(self):
        settings = dict(self.config.layer_stack)
        constants_path = settings.pop("optical_constants")
        constants = lo.load_optical_constants(constants_path) if constants_path else None
        return lo.fe57_cavity_stack(constants=constants, **settings)


    def oracle_angle(self, stack):
        oracle = self.config.oracle
        if oracle["angle_mrad"] is not None:
            return float(oracle["angle_mrad"])
        return lo.find_mode_angle(stack.without_nuclear(), (oracle["angle_min"], oracle["angle_max"]))


    def run_oracle(self):
        oracle = self.config.oracle
        stack = self.stack()
        angles = np.linspace(oracle["angle_min"], oracle["angle_max"], oracle["angle_points"])
        r_angle = lo.angle_scan(stack, angles)
        rows = ([float(a), float(r.real), float(r.imag), float(abs(r) ** 2)] for a, r in zip(angles, r_angle))
        angle_csv = fh.FileHandling(self.path("oracle_angle_scan.csv"))
        self.saved(angle_csv.write_csv(rows, ANGLE_SCAN_HEADER, self.comments))

        angle = self.oracle_angle(stack)
        r_delta = lo.detuning_scan(stack, angle, self.config.grid)
        rows = ([float(d), float(r.real), float(r.imag), float(abs(r) ** 2)]
                for d, r in zip(self.config.grid, r_delta))
        spectrum_csv = fh.FileHandling(self.path("oracle_spectrum.csv"))
        self.saved(spectrum_csv.write_csv(rows, ORACLE_SPECTRUM_HEADER, dict(self.comments, angle_mrad=repr(angle))))
        if self.config.outputs["plots"]:
            ph.emit_plot(ph.PlotSeries(x=angles, y=np.abs(r_angle) ** 2, label="off resonance"),
                         self.path(f"oracle_angle_scan.{self.config.outputs['plot_format']}"),
                         xlabel="Grazing angle (mrad)", ylabel="Reflectivity", log_y=True)
        summary = self.summary_base("oracle")
        summary["mode_angle_mrad"] = angle
        summary["max_abs_r"] = float(max(np.max(np.abs(r_angle)), np.max(np.abs(r_delta))))
        return summary


    def run_fit(self):
        oracle = self.config.oracle
        stack = self.stack()
        angle = self.oracle_angle(stack)
        grid = np.linspace(-oracle["fit_half_width"], oracle["fit_half_width"], oracle["fit_points"])
        fit = lo.fit_cavity_params(grid, lo.detuning_scan(stack, angle, grid), angle_mrad=angle)
        fit_json = fh.FileHandling(self.path("fit.json"))
        self.saved(fit_json.write_json(dict(fit.to_dict(), config_hash=self.config_hash)))
        summary = self.summary_base("fit")
        summary["fit"] = fit.to_dict()
        return summary


    def run(self, command):
        if command not in COMMANDS:
            raise ValidationError(f"unknown command {command!r}, expected one of {COMMANDS}")
        LOGGER.writeLog(f"Running {command} ({self.config.geometry.preset}) into {self.out_dir}")
        self.saved(fh.FileHandling(self.path("effective_config.json")).write_json(self.config.to_dict()))
        summary = getattr(self, f"run_{command}")()
        self.saved(fh.FileHandling(self.path("summary.json")).write_json(summary))
        LOGGER.writeLog(f"Finished {command}: {len(summary['dips'])} dips, {len(summary['peaks'])} peaks")
        return summary


def run(config, command, out_dir="output"):
    """Execute one command for a validated config; returns the summary dict"""
    return SGCSimulator(config, out_dir).run(command)


def build_parser():
    parser = argparse.ArgumentParser(description='SGC cavity simulator for 57Fe thin-film x-ray cavities')
    parser.add_argument('command', choices=COMMANDS, help='What to compute')
    parser.add_argument('--config', default=None, help='Run config (JSON file); defaults apply when omitted')
    parser.add_argument('--out', default='output', help='Output directory')
    parser.add_argument('--preset', choices=sorted(GEOMETRY_PRESETS) + ['all'], default=None,
                        help='Geometry preset; "all" writes one sub-directory per preset')
    parser.add_argument('--sgc', choices=['on', 'off'], default=None, help='Switch both SGC contributions')
    parser.add_argument('--grid', default=None, help='Detuning grid min:max:n in units of gamma')
    parser.add_argument('--no-plots', action='store_true', help='Skip plot files')
    return parser


def bind_grid_value(argv):
    """Rewrite `--grid <v>` as `--grid=<v>`; argparse reads `-80:80:801` as an option otherwise"""
    args = list(argv)
    bound = []
    i = 0
    while i < len(args):
        if args[i] == '--grid' and i + 1 < len(args):
            bound.append(f"--grid={args[i + 1]}")
            i += 2
            continue
        bound.append(args[i])
        i += 1
    return bound


def main(argv=None):
    """Main function; returns the process exit code"""
    args = build_parser().parse_args(bind_grid_value(sys.argv[1:] if argv is None else argv))

    LOGGER.writeLog(f"Starting {args.command} with config: {args.config or '<defaults>'}")

    try:
        raw = ch.load_raw(args.config)
        if args.no_plots:
            raw.setdefault("outputs", {})["plots"] = False
        presets = sorted(GEOMETRY_PRESETS) if args.preset == 'all' else [args.preset]
        for preset in presets:
            config = ch.build_config(ch.apply_overrides(raw, preset=preset, sgc=args.sgc, grid=args.grid))
            out_dir = os.path.join(args.out, preset) if args.preset == 'all' else args.out
            summary = run(config, args.command, out_dir)
            print(f"✅ {args.command} ({config.geometry.preset}): {len(summary['peaks'])} peaks, "
                  f"{len(summary['dips'])} dips -> {out_dir}")
            if "crossed" in summary:
                crossed = summary["crossed"]
                print(f"   I_crossed: {len(crossed['peaks'])} peaks, {len(crossed['dips'])} dips")
                if "sgc_off" in summary:
                    off = summary["sgc_off"]["crossed"]
                    print(f"   I_crossed (SGC off): {len(off['peaks'])} peaks, {len(off['dips'])} dips")
        return 0
    except Exception as e:
        code = exit_code_for(e)
        LOGGER.writeLog(f"{args.command} failed with exit code {code}: {type(e).__name__}: {e}")
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
