"""
Command-line surface for capture analysis

Every subcommand writes one data file (extrema adds its segment and seed
exports) and returns an exit code: 0 ok, 1 unexpected error, 2 no
attractor, 3 numerical or input failure, 4 verification failure.
"""
import argparse
import copy
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from loguru import logger

from src.analysis.capture_set import CaptureSetBuilder, capture_time_summary
from src.analysis.extrema_engine import ExtremaEngine
from src.maps.unimodal_map import MapFamily
from src.orbits.orbit_finder import CaptureIntervalSet, OrbitFinder
from src.utils.errors import CaptureAnalysisError, NoAttractorError, VerificationError
from src.utils.file_manager import FORMATS, FileManager
from src.verification.oracle import CaptureOracle

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_NO_ATTRACTOR = 2
EXIT_NUMERIC = 3
EXIT_VERIFICATION = 4


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per pipeline stage"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="YAML configuration file")
    source = common.add_mutually_exclusive_group()
    source.add_argument("--map", default=None, help="JSON map specification file")
    source.add_argument("--family", choices=("logistic", "tent", "custom"), default=None)
    common.add_argument("--r", type=float, default=None, help="Map parameter")
    common.add_argument("--format", choices=FORMATS, default=None)
    common.add_argument("--out", default=None, help="Output file (default: output directory)")
    common.add_argument("--p-max", type=int, default=None)
    common.add_argument("--tol-root", type=float, default=None)
    common.add_argument("--tol-orbit", type=float, default=None)
    common.add_argument("--tol-measure", type=float, default=None)
    common.add_argument("--interval-mode", choices=("figure", "text"), default=None)
    common.add_argument("--no-refine", action="store_true", help="Chord crossings only (approximate W_R)")
    common.add_argument("--no-log-file", action="store_true")
    common.add_argument("--log-level", default=None)

    parser = argparse.ArgumentParser(
        prog="main.py",
        description="Capture intervals and capture probabilities of stable orbits of unimodal maps",
    )
    parser.add_argument("--version", action="store_true", help="Print version and exit")
    subparsers = parser.add_subparsers(dest="command")

    subparsers.add_parser("orbit", parents=[common], help="Stable orbit and capture intervals")

    supercycle = subparsers.add_parser("supercycle", parents=[common], help="Supercycle parameter")
    supercycle.add_argument("--p", type=int, required=True)
    supercycle.add_argument("--bracket", type=float, nargs=2, required=True, metavar=("R_LO", "R_HI"))

    extrema = subparsers.add_parser("extrema", parents=[common], help="Extrema table and chord segments of f^q")
    extrema.add_argument("--q", type=int, required=True)
    extrema.add_argument("--seeds", action="store_true", help="Also export chord seeds against refined roots")

    capture = subparsers.add_parser("capture", parents=[common], help="Capture set W_R at one q")
    capture.add_argument("--q", type=int, required=True)

    prob = subparsers.add_parser("prob", parents=[common], help="Capture probability table")
    prob.add_argument("--q", type=int, default=0, help="First q")
    prob.add_argument("--q-max", type=int, default=None, help="Last q (default: --q)")
    prob.add_argument("--verify", action="store_true", help="Monte Carlo cross-check per row")
    prob.add_argument("--seed", type=lambda s: int(s, 0), default=None)
    prob.add_argument("--samples", type=int, default=None)

    verify = subparsers.add_parser("verify", parents=[common], help="Monte Carlo and grid oracles at one q")
    verify.add_argument("--q", type=int, required=True)
    verify.add_argument("--seed", type=lambda s: int(s, 0), default=None)
    verify.add_argument("--samples", type=int, default=None)
    verify.add_argument("--resolution", type=int, default=None)

    bifurcation = subparsers.add_parser("bifurcation", parents=[common], help="Attractor samples over r")
    bifurcation.add_argument("--r-min", type=float, default=None)
    bifurcation.add_argument("--r-max", type=float, default=None)
    bifurcation.add_argument("--r-steps", type=int, default=None)

    return parser


def build_run_config(config: Dict[str, Any], args: argparse.Namespace) -> Dict[str, Any]:
    """
    Configuration for one run: the loaded config with command-line overrides

    Raises:
        ValueError: on non-positive tolerances or a q beyond extrema.max_q
    """
    run = copy.deepcopy(config)

    def override(section: str, key: str, value: Any):
        if value is not None:
            run.setdefault(section, {})[key] = value

    override("map", "family", getattr(args, "family", None))
    override("map", "r", getattr(args, "r", None))
    override("orbit", "p_max", getattr(args, "p_max", None))
    override("orbit", "tol_orbit", getattr(args, "tol_orbit", None))
    override("orbit", "interval_mode", getattr(args, "interval_mode", None))
    override("extrema", "tol_root", getattr(args, "tol_root", None))
    override("capture", "tol_measure", getattr(args, "tol_measure", None))
    override("oracle", "rng_seed", getattr(args, "seed", None))
    override("oracle", "n_samples", getattr(args, "samples", None))
    override("oracle", "grid_resolution", getattr(args, "resolution", None))
    override("bifurcation", "r_min", getattr(args, "r_min", None))
    override("bifurcation", "r_max", getattr(args, "r_max", None))
    override("bifurcation", "r_steps", getattr(args, "r_steps", None))
    override("output", "format", getattr(args, "format", None))
    if getattr(args, "no_refine", False):
        run.setdefault("capture", {})["refine_crossings"] = False

    tolerances = {
        "tol_root": run.get("extrema", {}).get("tol_root", 1e-12),
        "tol_orbit": run.get("orbit", {}).get("tol_orbit", 1e-11),
        "tol_measure": run.get("capture", {}).get("tol_measure", 1e-12),
    }
    for name, value in tolerances.items():
        if not value > 0.0:
            raise ValueError(f"{name} must be positive, got {value}")

    max_q = run.get("extrema", {}).get("max_q", 20)
    for name in ("q", "q_max"):
        q = getattr(args, name, None)
        if q is not None and not 0 <= q <= max_q:
            raise ValueError(f"--{name.replace('_', '-')} must lie in [0, {max_q}], got {q}")
    return run


class CaptureCLI:
    """Wires the analysis components behind the subcommands"""

    def __init__(self, config: Dict[str, Any]):
        """
        Initialize command-line interface

        Args:
            config: Run configuration (loaded config plus flag overrides)
        """
        self.config = config
        self.extrema_engine = ExtremaEngine(config)
        self.orbit_finder = OrbitFinder(config, self.extrema_engine)
        self.capture_builder = CaptureSetBuilder(config, self.extrema_engine)
        self.oracle = CaptureOracle(config)
        self.file_manager = FileManager(config)
        self.format = self.file_manager.format

        logger.info("Capture CLI initialized")

    # ------------------------------------------------------------------
    # Shared steps

    def load_map(self, args: argparse.Namespace, validate: bool = True) -> MapFamily:
        """Map from --map, or from the map section with --family / --r applied"""
        map_config = self.config.get("map", {})
        check_points = map_config.get("check_points", 10_000)
        if getattr(args, "map", None):
            spec = self.file_manager.load_json(args.map)
            if getattr(args, "r", None) is not None:
                spec["r"] = args.r
            logger.info(f"Map specification loaded from {args.map}")
        else:
            spec = dict(map_config)
        return MapFamily.from_spec(spec, check_points=check_points, validate=validate)

    def resolve_captures(self, map_family: MapFamily) -> CaptureIntervalSet:
        captures = self.orbit_finder.resolve(map_family)
        if captures is None:
            raise NoAttractorError(f"No stable periodic orbit attracts C at r={map_family.r}")
        return captures

    def _path(self, args: argparse.Namespace, default_name: str) -> Path:
        return self.file_manager.resolve_path(default_name, getattr(args, "out", None))

    # ------------------------------------------------------------------
    # Subcommands

    def cmd_orbit(self, args: argparse.Namespace) -> int:
        map_family = self.load_map(args)
        captures = self.resolve_captures(map_family)
        orbit = captures.orbit
        rows = [
            {
                "i": i,
                "S": orbit.points[i],
                "U": orbit.saddles[i],
                "U_prime": orbit.companions[i],
                "lo": lo,
                "hi": hi,
            }
            for i, (lo, hi) in enumerate(captures.intervals)
        ]
        path = self._path(args, f"orbit.{self.format}")
        self.file_manager.save(captures.to_report(map_family), rows, path)
        return EXIT_OK

    def cmd_supercycle(self, args: argparse.Namespace) -> int:
        template = self.load_map(args, validate=False)
        r = self.orbit_finder.find_supercycle_parameter(template, args.p, tuple(args.bracket))
        at_r = template.with_parameter(r)
        residual = abs(at_r.iterate_unchecked(at_r.critical, args.p) - at_r.critical)
        result = {"family": template.family_id.value, "p": args.p, "r": r, "residual": residual}
        path = self._path(args, f"supercycle.{self.format}")
        self.file_manager.save(result, [result], path)
        return EXIT_OK

    def cmd_extrema(self, args: argparse.Namespace) -> int:
        map_family = self.load_map(args)
        table = self.extrema_engine.build_table(map_family, args.q)
        model = self.extrema_engine.build_segment_model(table, map_family)
        extrema_rows = table.to_rows()
        segment_rows = self.extrema_engine.segment_rows(map_family, model)

        extrema_path = self._path(args, f"extrema_q{args.q}.{self.format}")
        if getattr(args, "out", None):
            segments_path = self.file_manager.sibling(extrema_path, "segments")
            seeds_path = self.file_manager.sibling(extrema_path, "seeds")
        else:
            segments_path = self.file_manager.resolve_path(f"segments_q{args.q}.{self.format}")
            seeds_path = self.file_manager.resolve_path(f"seeds_q{args.q}.{self.format}")

        header = {"family": map_family.family_id.value, "r": map_family.r, "q": args.q}
        self.file_manager.save(
            {**header, "new_roots": table.new_roots, "extrema": extrema_rows},
            extrema_rows,
            extrema_path,
            header=["q", "x", "y", "kind", "depth"],
        )
        self.file_manager.save(
            {**header, "segments": segment_rows},
            segment_rows,
            segments_path,
            header=["x_L", "y_L", "x_R", "y_R", "slope", "intercept", "error_bound", "abscissa_error_bound"],
        )

        if args.seeds:
            seed_rows = [
                {
                    "segment": record.segment_index,
                    "seed": record.seed,
                    "root": record.root,
                    "error": record.error(map_family.length),
                }
                for record in self.extrema_engine.seed_records(map_family, args.q)
            ]
            self.file_manager.save(
                {**header, "seeds": seed_rows},
                seed_rows,
                seeds_path,
                header=["segment", "seed", "root", "error"],
            )
        return EXIT_OK

    def cmd_capture(self, args: argparse.Namespace) -> int:
        map_family = self.load_map(args)
        captures = self.resolve_captures(map_family)
        capture_set = self.capture_builder.assemble_W_R(map_family, args.q, captures)
        previous = None
        if args.q >= 1:
            previous = self.capture_builder.probability(
                self.capture_builder.assemble_W_R(map_family, args.q - 1, captures)
            )
        report = self.capture_builder.probability(capture_set, previous=previous)

        rows = [piece.to_dict() for piece in capture_set.subintervals]
        path = self._path(args, f"capture_q{args.q}.{self.format}")
        self.file_manager.save(capture_set.to_dict(report), rows, path, header=["lo", "hi", "i", "j", "case"])
        return EXIT_OK

    def cmd_prob(self, args: argparse.Namespace) -> int:
        q_max = args.q if args.q_max is None else args.q_max
        if q_max < args.q:
            raise ValueError(f"--q-max {q_max} is below --q {args.q}")

        map_family = self.load_map(args)
        captures = self.resolve_captures(map_family)
        reports = self.capture_builder.probability_series(map_family, captures, range(args.q, q_max + 1))

        failed: List[int] = []
        if args.verify:
            checked = []
            for report in reports:
                estimate, halfwidth = self.oracle.mc_capture_probability(
                    map_family, report.q, captures.intervals, self.oracle.mc_config(report.q)
                )
                report = report.with_monte_carlo(estimate, halfwidth)
                if not report.mc_agrees:
                    failed.append(report.q)
                checked.append(report)
            reports = checked

        rows = [report.to_row() for report in reports]
        payload = {
            "family": map_family.family_id.value,
            "r": map_family.r,
            "p": captures.orbit.p,
            "rows": rows,
            "capture_time": capture_time_summary(reports),
        }
        path = self._path(args, f"probability.{self.format}")
        self.file_manager.save(payload, rows, path, header=["q", "P_q", "P_exact_q", "mc_estimate", "mc_halfwidth"])

        if failed:
            raise VerificationError(f"Monte Carlo disagrees with P_q at q={failed}")
        return EXIT_OK

    def cmd_verify(self, args: argparse.Namespace) -> int:
        map_family = self.load_map(args)
        captures = self.resolve_captures(map_family)
        capture_set = self.capture_builder.assemble_W_R(map_family, args.q, captures)
        report = self.oracle.verify(map_family, captures, capture_set)

        row = report.to_dict()
        path = self._path(args, f"verification_q{args.q}.{self.format}")
        self.file_manager.save(row, [row], path, header=list(row))
        if not report.passed:
            raise VerificationError(f"Verification failed at q={args.q}")
        return EXIT_OK

    def cmd_bifurcation(self, args: argparse.Namespace) -> int:
        template = self.load_map(args, validate=False)
        bifurcation_config = self.config.get("bifurcation", {})
        r_values = np.linspace(
            bifurcation_config.get("r_min", 2.8),
            bifurcation_config.get("r_max", 4.0),
            bifurcation_config.get("r_steps", 600),
        )
        samples = self.orbit_finder.attractor_samples(template, r_values)

        columns = [f"x{k}" for k in range(samples.shape[1])]
        rows = [{"r": float(r), **dict(zip(columns, (float(x) for x in row)))} for r, row in zip(r_values, samples)]
        payload = {"family": template.family_id.value, "r": r_values.tolist(), "samples": samples.tolist()}
        path = self._path(args, f"bifurcation.{self.format}")
        self.file_manager.save(payload, rows, path, header=["r"] + columns)
        return EXIT_OK

    def dispatch(self, args: argparse.Namespace) -> int:
        handler: Callable[[argparse.Namespace], int] = getattr(self, f"cmd_{args.command}")
        logger.info(f"Running '{args.command}'")
        return handler(args)


def run_command(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    """
    Run one subcommand and translate failures into exit codes

    Args:
        args: Parsed arguments
        config: Loaded configuration (flags are applied here)

    Returns:
        Process exit code
    """
    try:
        run_config = build_run_config(config, args)
        return CaptureCLI(run_config).dispatch(args)
    except NoAttractorError as e:
        logger.error(f"No attractor: {e}")
        return EXIT_NO_ATTRACTOR
    except VerificationError as e:
        logger.error(f"Verification failed: {e}")
        return EXIT_VERIFICATION
    except (CaptureAnalysisError, ValueError) as e:
        logger.error(f"'{args.command}' failed: {e}")
        return EXIT_NUMERIC
    except Exception as e:
        logger.exception(f"Unexpected error in '{args.command}': {e}")
        return EXIT_UNEXPECTED


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)
