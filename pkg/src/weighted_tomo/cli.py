"""Command-line entry point: ``weighted-tomo {toy-pinv,wedge,reconstruct,rank-report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io, linalg, metrics, phantoms
from .experiments import ExperimentConfig, run_toy_pinv, run_wedge, wedge_geometry
from .geometry import ImageGrid, Sinogram, toy_geometry
from .projector import BlockSystem, forward_project
from .solvers import (ROW_ORDERS, SolverConfig, solve_bpf, solve_kaczmarz, solve_kaczmarz_tv,
                      solve_split_pinv)
from .weights import WeightField, constant_weights, densify_W, ramp_weights, wwt_rank

log = logging.getLogger("weighted_tomo")

RECON_METHODS = ("direct-pinv", "split-pinv", "product-pinv", "bpf", "kaczmarz", "kaczmarz-tv")

# config-file keys (same as flag dests) and their parsers
_KEYS = {
    "smin": float, "smax": float, "relaxation": float, "iterations": int,
    "tv_weight": float, "tv_epsilon": float, "row_order": str, "seed": int,
    "scale": float, "size": int, "angles": int, "angular_range": float,
    "out": str, "png": lambda s: s.lower() in ("1", "true", "yes", "on"),
}


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="flat key = value file; flags override it")
    p.add_argument("--out", help="output directory")
    p.add_argument("--smin", type=float, help="ramp minimum sensitivity (default 0.25)")
    p.add_argument("--smax", type=float, help="ramp maximum sensitivity (default 1.0)")
    p.add_argument("--relaxation", type=float, help="Kaczmarz relaxation (default 0.5)")
    p.add_argument("--iterations", type=int, help="full sweeps (default 100)")
    p.add_argument("--tv-weight", dest="tv_weight", type=float, help="TV weight (default 0.01)")
    p.add_argument("--tv-epsilon", dest="tv_epsilon", type=float)
    p.add_argument("--row-order", dest="row_order", choices=ROW_ORDERS)
    p.add_argument("--seed", type=int, help="recorded in metadata; sweeps are deterministic")
    p.add_argument("--png", action="store_const", const=True, help="also write PNG images")
    p.add_argument("--export-weights", dest="export_weights", action="store_true",
                   help="write one PGM per angle with the weight field")
    p.add_argument("-v", "--verbose", action="store_true")


def _geometry_flags(p: argparse.ArgumentParser):
    p.add_argument("--scale", type=float, help="shrink grid and angle count (0.25: 64x64/90)")
    p.add_argument("--size", type=int, help="grid size n (n x n)")
    p.add_argument("--angles", type=int, help="number of projection angles")
    p.add_argument("--angular-range", dest="angular_range", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weighted-tomo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy-pinv", help="4x4 pseudoinverse comparison")
    _common(p)

    p = sub.add_parser("wedge", help="two-wedge reconstruction comparison")
    _common(p)
    _geometry_flags(p)

    p = sub.add_parser("reconstruct", help="reconstruct a phantom or a raw sinogram")
    _common(p)
    _geometry_flags(p)
    p.add_argument("--phantom", default="two-wedge",
                   help="triangle4, two-wedge, uniform or a raw float32 image file")
    p.add_argument("--sinogram", type=Path, help="raw float32 sinogram (angle-major rows)")
    p.add_argument("--weights", type=Path, help="raw float32 weight field (Omega x V)")
    p.add_argument("--constant-weight", dest="constant_weight", type=float)
    p.add_argument("--method", choices=RECON_METHODS, default="kaczmarz")

    p = sub.add_parser("rank-report", help="numerical rank of W W^T")
    _common(p)
    _geometry_flags(p)
    p.add_argument("--weights", type=Path, help="raw float32 weight field (Omega x V)")
    p.add_argument("--tolerance", type=float)
    return parser


def _settings(args) -> dict:
    """Config-file values overridden by explicitly given flags."""
    merged = {}
    if getattr(args, "config", None):
        for key, value in io.read_config(args.config).items():
            if key not in _KEYS:
                raise SystemExit(f"unknown config key {key!r}")
            merged[key] = _KEYS[key](value)
    for key in _KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _solver(s: dict) -> SolverConfig:
    kw = {k: s[k] for k in ("relaxation", "iterations", "tv_weight", "tv_epsilon", "row_order")
          if k in s}
    if "seed" in s:
        kw["rng_seed"] = s["seed"]
    return SolverConfig(**kw)


def _experiment(args, name: str, default_out: str) -> ExperimentConfig:
    s = _settings(args)
    return ExperimentConfig(
        experiment=name, size=s.get("size"), num_angles=s.get("angles"),
        angular_range=s.get("angular_range", np.pi), scale=s.get("scale", 1.0),
        s_min=s.get("smin", 0.25), s_max=s.get("smax", 1.0), solver=_solver(s),
        out=Path(s.get("out", default_out)), png=bool(s.get("png", False)),
        export_weights=args.export_weights,
    )


def _load_weights(path, geometry) -> WeightField:
    arr = io.read_raw(path)
    return WeightField(geometry, arr.reshape(geometry.num_angles, geometry.num_voxels))


def _scan_geometry(s: dict, toy: bool):
    if toy:
        return toy_geometry()
    cfg = ExperimentConfig(size=s.get("size"), num_angles=s.get("angles"),
                           scale=s.get("scale", 1.0),
                           angular_range=s.get("angular_range", np.pi))
    return wedge_geometry(cfg.grid_size(), cfg.angle_count(), cfg.angular_range)


def cmd_reconstruct(args) -> dict:
    s = _settings(args)
    out = Path(s.get("out", "out/reconstruct"))
    out.mkdir(parents=True, exist_ok=True)
    kind = args.phantom
    raw_phantom = None
    if kind not in ("triangle4", "two-wedge", "uniform"):
        raw_phantom = io.read_raw(kind)
        s.setdefault("size", raw_phantom.shape[1])
        kind = "custom-file"
    geometry = _scan_geometry(s, toy=kind == "triangle4")
    if raw_phantom is not None and raw_phantom.shape != geometry.shape:
        raise SystemExit(f"phantom shape {raw_phantom.shape} does not match grid {geometry.shape}")
    system = BlockSystem.build(geometry)
    if args.weights:
        weights = _load_weights(args.weights, geometry)
    elif args.constant_weight is not None:
        weights = constant_weights(geometry, args.constant_weight)
    else:
        weights = ramp_weights(geometry, s.get("smin", 0.25), s.get("smax", 1.0))

    gt = {"triangle4": lambda: phantoms.make_triangle4(geometry),
          "two-wedge": lambda: phantoms.make_two_wedge(geometry.num_voxels_x, geometry=geometry),
          "uniform": lambda: phantoms.make_uniform(geometry),
          "custom-file": lambda: ImageGrid(geometry, raw_phantom)}[kind]()
    if args.sinogram:
        p = Sinogram(geometry, io.read_raw(args.sinogram).ravel())
    else:
        p = forward_project(system, weights, gt)

    solver = _solver(s)
    method = args.method
    if method == "direct-pinv":
        image = linalg.reconstruct_direct_pinv(system, weights, p).image
    elif method == "split-pinv":
        image = solve_split_pinv(system, weights, p)
    elif method == "product-pinv":
        image = linalg.reconstruct_product_formula_pinv(system, weights, p).image
    elif method == "bpf":
        image = solve_bpf(system, p)
    else:
        solve = solve_kaczmarz if method == "kaczmarz" else solve_kaczmarz_tv
        trace = solve(system, weights, p, solver, gt)
        image = trace.image
        trace.to_csv(out / "trace.csv")

    record = {"method": method, "phantom": kind, "grid": list(geometry.shape),
              "angles": geometry.num_angles, "rays": geometry.total_rows,
              "rmse": metrics.rmse(image, gt), "l2_distance": metrics.l2_distance(image, gt)}
    if min(geometry.shape) >= metrics.SSIM_WINDOW:
        record["ssim"] = metrics.ssim(image, gt)
    io.export_image(image, 0.0, 1.0, out / "recon", bool(s.get("png", False)))
    io.write_raw(out / "recon.raw", image.as_array())
    io.write_json(out / "metrics.json", record)
    io.write_json(out / "metadata.json", {"settings": s, "solver": solver.to_dict(),
                                          "geometry": geometry.to_dict()})
    if args.export_weights:
        hi = float(weights.values.max())
        for j in range(geometry.num_angles):
            io.export_image(weights.angle_image(j), 0.0, hi, out / f"weights_angle_{j:03d}")
    return record


def cmd_rank_report(args) -> dict:
    s = _settings(args)
    geometry = _scan_geometry(s, toy=not {"size", "angles", "scale"} & s.keys())
    if args.weights:
        weights = _load_weights(args.weights, geometry)
    else:
        weights = ramp_weights(geometry, s.get("smin", 0.25), s.get("smax", 1.0))
    record = {
        "num_voxels": geometry.num_voxels,
        "num_angles": geometry.num_angles,
        "wwt_shape": [geometry.num_voxels * geometry.num_angles] * 2,
        "rank_WWt": wwt_rank(weights, args.tolerance),
        "rank_W": linalg.numerical_rank(densify_W(weights)),
    }
    if "out" in s:
        out = Path(s["out"])
        out.mkdir(parents=True, exist_ok=True)
        io.write_json(out / "rank.json", record)
    return record


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "toy-pinv":
        record = run_toy_pinv(_experiment(args, "toy-pinv", "out/toy-pinv"))
        summary = {k: v["l2_distance_to_ground_truth"] for k, v in record["methods"].items()}
        summary["rank_WWt"] = record["rank_WWt"]
    elif args.command == "wedge":
        record = run_wedge(_experiment(args, "wedge", "out/wedge"))
        summary = {k: {"rmse": v["rmse"], "ssim": v["ssim"]} for k, v in record["methods"].items()}
    elif args.command == "reconstruct":
        summary = cmd_reconstruct(args)
    else:
        summary = cmd_rank_report(args)
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
