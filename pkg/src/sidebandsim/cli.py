"""Command-line interface.

    sidebandsim <command> [--config PATH] [--out DIR] [--seed N] [flags]

Commands: spectrum, cool, tin, synth, dualhomodyne, fit, calibrate,
thermometry.  Without --config the bundled defaults are used (14 MHz
cooling cavity, 49.4 MHz probe cavity, 1.167 MHz defect mode).  Handled
failures print a machine-readable JSON error record on stderr and exit
nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .config import ConfigError, load_config, paper_default_config
from .pipeline import COMMANDS, PipelineError, run_pipeline


def _pair(text):
    lo, hi = text.split(":")
    return float(lo), float(hi)


def build_parser():
    parser = argparse.ArgumentParser(prog="sidebandsim",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file (defaults bundled)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--format", choices=["csv", "json"], default="csv",
                       help="preferred tabular format (reports are always JSON)")

    common(sub.add_parser("spectrum", help="analytic probe/cooling output spectra"))
    common(sub.add_parser("cool", help="backaction report and displacement PSD"))

    p = sub.add_parser("tin", help="intermodulation-noise spectra and detuning sweep")
    common(p)
    p.add_argument("--sdd-level", type=float,
                   help="flat frequency-noise PSD level (rad^2/s^2 per rad/s)")
    p.add_argument("--sdd-band-hz", type=float, default=7.0e6,
                   help="frequency-noise band limit (Hz)")
    p.add_argument("--sdd-csv", help="frequency-noise PSD CSV (freq_hz, psd_per_hz)")
    p.add_argument("--two-delta-over-kappa", type=float, nargs="+",
                   help="detunings to sweep, as |2 Delta| / kappa")

    p = sub.add_parser("synth", help="synthesize the two photocurrent records")
    common(p)
    p.add_argument("--gain-ratio", type=float, default=1.0,
                   help="inject a detector gain mismatch")
    p.add_argument("--delay-samples", type=float, default=0.0,
                   help="inject an inter-detector delay")
    p.add_argument("--calibration-topology", action="store_true",
                   help="both chains at direct detection (for cross-calibration)")

    p = sub.add_parser("dualhomodyne", help="reconstruct the heterodyne-equivalent PSD")
    common(p)
    p.add_argument("--streams", nargs=2, metavar=("SIDE1", "SIDE2"),
                   help="time-series sidecar JSONs from synth")
    p.add_argument("--calibration-json", help="detector calibration to apply to stream 2")
    p.add_argument("--psd1", help="auto-PSD CSV of detector 1")
    p.add_argument("--psd2", help="auto-PSD CSV of detector 2")
    p.add_argument("--cross", help="cross-PSD CSV (freq_hz, re, im)")

    p = sub.add_parser("fit", help="Lorentzian line fit of a spectrum CSV")
    common(p)
    p.add_argument("--input", required=True, help="spectrum CSV (freq_hz, value)")
    p.add_argument("--window", type=_pair, help="fit window lo:hi in Hz")
    p.add_argument("--mask", type=_pair, action="append", default=[],
                   help="excluded interval lo:hi in Hz (repeatable)")
    p.add_argument("--n-segments", type=int, help="Welch segment count for weighting")

    p = sub.add_parser("calibrate", help="asymmetry curve or detector cross-calibration")
    common(p)
    p.add_argument("--pairs", help="CSV of (freq_hz, ratio[, sigma]) mode asymmetries")
    p.add_argument("--streams", nargs=2, metavar=("SIDE1", "SIDE2"),
                   help="time-series sidecars for detector cross-calibration")
    p.add_argument("--tone-band", type=_pair, action="append", default=[],
                   help="coherent tone band lo:hi in Hz (repeatable)")
    p.add_argument("--nperseg", type=int, default=2 ** 14)

    p = sub.add_parser("thermometry", help="sideband ratio and phonon occupancy")
    common(p)
    p.add_argument("--reconstructed", help="reconstructed PSD CSV")
    p.add_argument("--psd1", help="auto-PSD CSV of detector 1")
    p.add_argument("--psd2", help="auto-PSD CSV of detector 2")
    p.add_argument("--cross", help="cross-PSD CSV")
    p.add_argument("--mask", type=_pair, action="append", default=[],
                   help="excluded interval lo:hi in Hz (repeatable)")
    p.add_argument("--add-synth-asymmetry", action="store_true",
                   help="add the quantum asymmetry term absent from classical synthesis")
    return parser


def _options_from_args(args):
    opts = {}
    mapping = {
        "sdd_level": "sdd_level", "sdd_band_hz": "sdd_band_hz", "sdd_csv": "sdd_csv",
        "two_delta_over_kappa": "two_delta_over_kappa",
        "gain_ratio": "gain_ratio", "delay_samples": "delay_samples",
        "calibration_topology": "calibration_topology",
        "streams": "streams", "calibration_json": "calibration_json",
        "psd1": "psd1", "psd2": "psd2", "cross": "cross",
        "input": "input", "window": "window", "n_segments": "n_segments",
        "pairs": "pairs", "nperseg": "nperseg",
        "reconstructed": "reconstructed",
        "add_synth_asymmetry": "add_synth_asymmetry",
    }
    for attr, key in mapping.items():
        val = getattr(args, attr, None)
        if val not in (None, False):
            opts[key] = val
    if getattr(args, "mask", None):
        opts["masks"] = args.mask
    if getattr(args, "tone_band", None):
        opts["tone_bands"] = args.tone_band
    if getattr(args, "seed", None) is not None:
        opts["seed"] = args.seed
    return opts


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else paper_default_config()
        if args.seed is not None:
            cfg = dataclasses.replace(
                cfg, synthesis=dataclasses.replace(cfg.synthesis, seed=args.seed))
        manifest = run_pipeline(cfg, args.command, args.out, _options_from_args(args))
    except (ConfigError, FileNotFoundError) as exc:
        json.dump({"error": {"type": "config", "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except PipelineError as exc:
        json.dump(exc.record, sys.stderr)
        sys.stderr.write("\n")
        return 1
    print(json.dumps({"manifest": manifest.as_dict()}, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
