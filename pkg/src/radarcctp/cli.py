"""Command-line front end.

Exit codes: 0 success, 1 check/invariant failure, 2 usage or validation error.
Every command writes ``<prefix>manifest.json`` next to its outputs (bench and
ve-check only with ``--out``).  ``CCTP_THREADS`` caps sweep parallelism
(0 = auto).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from . import bench as bench_mod
from . import metrics, plots, synth, tensor, ve
from .cfar import CaCfarConfig
from .errors import DivisibilityError, FormatError, RadarError
from .pipeline import CctpConfig, config_label, run_cctp

GRID_HELP = """\
sweep grid, EBNF:
  grid  = item { ";" item }
  item  = key "=" value { "," value }
  key   = "k1" | "k2" | "dr" | "da" | "step1" | "stages"
        | "train" | "guard" | "pairing" | "recover"
Each K1 gives a K1-Nan-Nan row, then per K2 a K1-K2-Nan row and one
K1-K2-(dr,da) row per (dr, da).  step1 is ca or top; stages restricts rows
to any of 1,2,3.  Example: "k1=2.5,5,10;k2=2.5,5,10,15;step1=ca,top"
"""


class CheckFailed(Exception):
    """Raised inside a command to request exit code 1."""


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def _file_digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _write_text(path, text: str) -> None:
    tensor._atomic_write(path, text.encode("utf-8"))


class Manifest:
    def __init__(self, argv, config: dict, seeds=()):
        self.data = {"tool": "radarcctp", "version": _version(), "command": list(argv),
                     "config": config, "config_digest": _digest(config), "seeds": list(seeds),
                     "inputs": [], "outputs": [], "timings_s": {}}
        self._t = time.perf_counter()

    def stage(self, name):
        now = time.perf_counter()
        self.data["timings_s"][name] = round(now - self._t, 6)
        self._t = now

    def input(self, path):
        self.data["inputs"].append({"path": os.fspath(path), "sha256": _file_digest(path)})

    def output(self, path):
        self.data["outputs"].append({"path": os.fspath(path), "sha256": _file_digest(path)})

    def write(self, path):
        _write_text(path, json.dumps(self.data, indent=2, sort_keys=True) + "\n")


def _ensure_parent(prefix: str) -> None:
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)


def _cfg_dict(cfg: CctpConfig) -> dict:
    return {"label": config_label(cfg), "k1_percent": cfg.k1_percent,
            "k2_percent": cfg.k2_percent, "d_r": cfg.d_r, "d_a": cfg.d_a,
            "train_cells": cfg.ca.train_cells, "guard_cells": cfg.ca.guard_cells,
            "step1_mode": cfg.step1_mode, "recover_from": cfg.recover_from,
            "pairing": cfg.pairing}


# -- commands ----------------------------------------------------------------

def cmd_synth(args, argv) -> int:
    if args.spec:
        spec = synth.load_scene_spec(args.spec)
    else:
        spec = synth.demo_scene_spec(n_targets=args.demo_targets, seed=args.seed or 2023)
    if args.seed is not None:
        spec = synth.SceneSpec(spec.grid, spec.noise_mean_power, spec.targets,
                               spec.clutter_patches, args.seed)
    man = Manifest(argv, {"scene_spec": synth.format_scene_spec(spec)}, [spec.seed])
    if args.spec:
        man.input(args.spec)
    scene = synth.generate_scene(spec)
    man.stage("generate")
    _ensure_parent(args.out_prefix)
    for path in scene.save(args.out_prefix):
        man.output(path)
    if args.write_spec:
        path = f"{args.out_prefix}scene.spec"
        _write_text(path, synth.format_scene_spec(spec))
        man.output(path)
    man.stage("write")
    man.write(f"{args.out_prefix}manifest.json")
    print(f"scene {spec.grid.shape}: {len(spec.targets)} targets, "
          f"{scene.valid_mask.count()} valid cells")
    return 0


def _config_from_args(args) -> CctpConfig:
    ca = CaCfarConfig(args.train, args.guard)
    if args.k2 is None:
        return CctpConfig(args.k1, None, None, None, ca=ca, step1_mode=args.step1)
    dr, da = (None, None) if args.no_step3 else (args.dr, args.da)
    return CctpConfig(args.k1, args.k2, dr, da, ca=ca, step1_mode=args.step1,
                      recover_from=args.recover_from, pairing=args.pairing)


def cmd_preprocess(args, argv) -> int:
    cfg = _config_from_args(args)
    man = Manifest(argv, _cfg_dict(cfg))
    raw = tensor.load(args.input)
    man.input(args.input)
    out = run_cctp(raw, cfg)
    man.stage("cctp")
    p = args.out_prefix
    _ensure_parent(p)
    tensor.save(out.step1, f"{p}m1.rtf")
    tensor.save_mask(out.indicator, f"{p}indicator.rtm")
    _write_text(f"{p}jr.txt", "".join(f"{j}\n" for j in out.preserved_ranges))
    _write_text(f"{p}ja.txt", "".join(f"{j}\n" for j in out.preserved_azimuths))
    for name in ("m1.rtf", "indicator.rtm", "jr.txt", "ja.txt"):
        man.output(p + name)
    man.stage("write")
    ok = out.nesting_ok()
    man.data["nesting_ok"] = bool(ok)
    man.write(f"{p}manifest.json")
    print(f"{config_label(cfg)}: m1 {out.step1.count_nonzero()} cells, "
          f"indicator {out.indicator.count()} cells")
    if args.verify and not ok:
        raise CheckFailed("nesting chain violated: nonzero(m2) <= nonzero(m3) <= nonzero(m1)")
    return 0


def cmd_sweep(args, argv) -> int:
    if args.preset == "ablation":
        configs = metrics.ablation_configs(CaCfarConfig(args.train, args.guard))
    else:
        configs = metrics.parse_grid(args.grid)
    raw, valid = synth.load_scene(args.scene_prefix)
    bins = metrics.RangeBins.uniform(args.roi_start, args.roi_end, args.bin_width)
    man = Manifest(argv, {"configs": [_cfg_dict(c) for c in configs], "bins": list(bins.edges)})
    man.input(f"{args.scene_prefix}scene.rtf")
    man.input(f"{args.scene_prefix}valid.rtm")
    rows = metrics.sweep_report(raw, valid, configs, bins)
    man.stage("sweep")
    p = args.out_prefix
    _ensure_parent(p)
    _write_text(f"{p}sweep.csv", metrics.sweep_csv(rows))
    _write_text(f"{p}prvm.svg", plots.sweep_svg(rows, "prvm", "PRVM per range bin"))
    _write_text(f"{p}rrim.svg", plots.sweep_svg(rows, "rrim", "RRIM per range bin"))
    for name in ("sweep.csv", "prvm.svg", "rrim.svg"):
        man.output(p + name)
    warned = [r.label for r in rows if r.cost_warning]
    for label in warned:
        print(f"warning: {label}: K1 > {metrics.COST_WARN_K1:g} makes the primary input large "
              f"and downstream cost high", file=sys.stderr)
    bad = [r.label for r in rows if not r.nesting_ok]
    man.data["cost_warnings"] = warned
    man.data["nesting_violations"] = bad
    man.stage("write")
    man.write(f"{p}manifest.json")
    for r in rows:
        o = r.report.overall
        print(f"{r.label:>18}  PRVM {metrics._fmt(o.prvm)}  RRIM {metrics._fmt(o.rrim)}")
    if bad:
        raise CheckFailed(f"nesting chain violated for {', '.join(bad)}")
    return 0


def cmd_eval(args, argv) -> int:
    valid = tensor.load_mask(args.valid)
    with open(args.filtered, "rb") as fh:
        head = fh.read(4)
    if head == tensor.MASK_MAGIC:
        filtered = tensor.load_mask(args.filtered, expect_grid=valid.grid)
    else:
        filtered = tensor.load(args.filtered, expect_grid=valid.grid).nonzero_mask()
    bins = metrics.RangeBins.uniform(args.roi_start, args.roi_end, args.bin_width)
    report = metrics.prvm_rrim(filtered, valid, bins)
    text = metrics.write_csv([(args.label, report)])
    if args.out:
        _ensure_parent(args.out)
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _parse_dims(text: str) -> tuple[int, int, int]:
    try:
        dims = tuple(int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid dims must look like 128x96x32, got {text!r}")
    if len(dims) != 3 or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"grid dims must be three positive ints, got {text!r}")
    return dims


def cmd_bench(args, argv) -> int:
    grid = tensor.default_grid()
    if args.grid_dims:
        n_r, n_a, n_e = args.grid_dims
        grid = tensor.PolarGrid(n_r, n_a, n_e, range_start_m=0.5 * 72 / n_r,
                                range_step_m=72 / n_r)
    stats = bench_mod.run_bench(grid, args.repeat, args.seed)
    text = bench_mod.bench_csv(stats, grid)
    if args.out:
        _ensure_parent(args.out)
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    ratio = next(s for s in stats if s.metric == "comparison_ratio").min
    print(f"comparison ratio global/per-range: {ratio:.2f} (N_e = {grid.n_elevation})",
          file=sys.stderr)
    return 0


def cmd_ve_check(args, argv) -> int:
    if args.heads < 1 or args.cn % args.heads:
        raise DivisibilityError(f"--cn {args.cn} is not divisible by --heads {args.heads}")
    p = ve.VerticalEncoderParams.init(args.cn, args.heads, seed=args.seed)
    fm = ve.DenseFeatureMap.random(args.cn, args.z, args.y, args.x, seed=args.seed + 1)
    lines, failed = [], False

    def check(name, ok, detail):
        nonlocal failed
        failed |= not ok
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")

    res = ve.grad_check(p, fm, args.eps)
    check("gradient", res.max_rel_error <= args.tol, f"max_rel_error={res.max_rel_error:.3e} "
          f"(tol {args.tol:g})")
    compressed, scores = ve.ve_step1_attend(fm, p)
    dev = float(np.max(np.abs(scores.sum(axis=1) - 1.0)))
    check("softmax", dev <= 1e-12, f"max |sum - 1| = {dev:.3e}")
    s_n = args.stride
    if args.cn % (s_n * s_n) == 0:
        bev = ve.ve_step2_reshape(compressed, s_n)
        ok = np.array_equal(ve.space_to_channel(bev, s_n), compressed)
        check("reshape", ok, f"{compressed.shape} -> {bev.shape} round trip")
    same = ve.DenseFeatureMap(np.repeat(fm.values[:, :1], args.z, axis=1))
    c_same, s_same = ve.ve_step1_attend(same, p)
    c_one, _ = ve.ve_step1_attend(ve.DenseFeatureMap(fm.values[:, :1]), p)
    dev_u = max(float(np.max(np.abs(s_same - 1.0 / args.z))), float(np.max(np.abs(c_same - c_one))))
    check("uniform-attention", dev_u <= 1e-12, f"max deviation {dev_u:.3e}")
    if args.z == 1:
        direct = np.einsum("cyx,cd,de->eyx", fm.values[:, 0], p.w_v, p.w_o)
        dev1 = float(np.max(np.abs(compressed - direct)))
        check("single-token", dev1 <= 1e-12, f"max deviation {dev1:.3e}")
    print("\n".join(lines))
    if args.scores_csv:
        _write_text(args.scores_csv, ve.scores_csv(scores))
    if args.out:
        man = Manifest(argv, {"cn": args.cn, "z": args.z, "heads": args.heads, "y": args.y,
                              "x": args.x, "eps": args.eps}, [args.seed])
        man.data["results"] = lines
        man.write(args.out)
    if failed:
        raise CheckFailed("ve-check failed")
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="radarcctp", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic scene")
    s.add_argument("spec", nargs="?", help="scene spec file; omit for the demo scene")
    s.add_argument("out_prefix")
    s.add_argument("--demo-targets", type=int, default=10)
    s.add_argument("--seed", type=int, default=None, help="override the scene seed")
    s.add_argument("--write-spec", action="store_true", help="also write <prefix>scene.spec")
    s.set_defaults(func=cmd_synth)

    def stage_args(p):
        p.add_argument("--train", type=int, default=16, help="CA-CFAR training cells per side")
        p.add_argument("--guard", type=int, default=2, help="CA-CFAR guard cells per side")

    s = sub.add_parser("preprocess", help="run CCTP on an RTF1 tensor")
    s.add_argument("input")
    s.add_argument("out_prefix")
    s.add_argument("--k1", type=float, default=5.0)
    s.add_argument("--k2", type=float, default=None, help="omit for step-1 only")
    s.add_argument("--dr", type=int, default=2)
    s.add_argument("--da", type=int, default=1)
    s.add_argument("--no-step3", action="store_true")
    s.add_argument("--step1", choices=("ca", "top"), default="ca")
    s.add_argument("--pairing", choices=("pairwise", "separable"), default="pairwise")
    s.add_argument("--recover-from", choices=("m1", "raw"), default="m1")
    s.add_argument("--verify", action="store_true", help="exit 1 if the nesting chain fails")
    stage_args(s)
    s.set_defaults(func=cmd_preprocess)

    def bin_args(p):
        p.add_argument("--roi-start", type=float, default=0.0)
        p.add_argument("--roi-end", type=float, default=72.0)
        p.add_argument("--bin-width", type=float, default=8.0)

    s = sub.add_parser("sweep", help="PRVM/RRIM over a hyperparameter grid",
                       epilog=GRID_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("scene_prefix")
    s.add_argument("out_prefix")
    s.add_argument("--grid", default=metrics.DEFAULT_GRID)
    s.add_argument("--preset", choices=("ablation",), default=None,
                   help="use the 13 ablation-table rows instead of --grid")
    stage_args(s)
    bin_args(s)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("eval", help="PRVM/RRIM of one filtered tensor or mask")
    s.add_argument("filtered", help="RTF1 tensor (nonzero = kept) or RTM1 mask")
    s.add_argument("valid", help="RTM1 ground-truth mask")
    s.add_argument("--label", default="filtered")
    s.add_argument("--out", default=None)
    bin_args(s)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench", help="comparison counts and timings")
    s.add_argument("--grid", dest="grid_dims", type=_parse_dims, default=None,
                   help="N_rxN_axN_e, default 128x96x32")
    s.add_argument("--repeat", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("ve-check", help="vertical-encoding gradient and invariant checks")
    s.add_argument("--cn", type=int, default=64)
    s.add_argument("--z", type=int, default=8)
    s.add_argument("--heads", type=int, default=ve.DEFAULT_HEADS)
    s.add_argument("--y", type=int, default=2)
    s.add_argument("--x", type=int, default=2)
    s.add_argument("--stride", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--eps", type=float, default=1e-5)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--scores-csv", default=None)
    s.add_argument("--out", default=None, help="manifest path")
    s.set_defaults(func=cmd_ve_check)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    except (RadarError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
