"""Command-line interface.

Exit status is 0 on success, 1 on domain errors (for example an unstable
controller or an infeasible certificate level) and 2 on usage errors.
The log level comes from ``HINFLAND_LOG`` (error, warn, info or debug).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import io as hio
from .certificate import EIG_FLOOR, certify, certify_floor, check_certificate
from .errors import HinflandError
from .lifting import certified_triple, congruence_residuals, phi, psi
from .lti import assemble_closed_loop
from .norm import hinf_norm
from .scan import ScanConfig, emit_csv, emit_svg_heatmap, fit_degenerate_line, read_csv, run_scan, slices
from .search import search, stationarity_measure
from .synthesis import min_gamma
from .systems import example_plant

log = logging.getLogger("hinfland")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}


class UsageError(Exception):
    pass


def _setup_logging():
    name = os.environ.get("HINFLAND_LOG", "warn").strip().lower()
    level = LOG_LEVELS.get(name)
    logging.basicConfig(level=level or logging.WARNING, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    if level is None:
        log.warning("unknown HINFLAND_LOG value %r; using warn", name)


def _emit(text, out):
    if out:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _plant(args):
    return hio.load_plant(args.plant) if args.plant else example_plant()


def _pair(args):
    plant = _plant(args)
    if not args.controller:
        raise UsageError("--controller is required")
    return plant, hio.load_controller(args.controller, plant)


def _parse_grid(text):
    axes = {}
    for part in text.split(","):
        bits = part.strip().split(":")
        if len(bits) != 4:
            raise UsageError(f"bad grid axis {part!r}; expected name:lo:hi:n")
        name, lo, hi, n = bits
        key = name.strip().lower()
        if key not in ("ak", "bk", "dk"):
            raise UsageError(f"unknown grid axis {name!r}; use aK, bK, dK")
        try:
            axes[key] = ((float(lo), float(hi)), int(n))
        except ValueError as exc:
            raise UsageError(f"bad grid axis {part!r}: {exc}") from exc
    missing = {"ak", "bk", "dk"} - set(axes)
    if missing:
        raise UsageError(f"grid is missing axes {sorted(missing)}")
    return axes


# -- subcommands -------------------------------------------------------------

def cmd_norm(args):
    plant, k = _pair(args)
    res = hinf_norm(assemble_closed_loop(plant, k), args.rel_tol)
    _emit(hio.dumps(res.as_dict()), args.out)


def cmd_certify(args):
    plant, k = _pair(args)
    cl = assemble_closed_loop(plant, k)
    if args.gamma is None:
        gamma = hinf_norm(cl, args.eps).gamma
        ok, cert = certify_floor(cl, None, gamma / (1.0 - args.eps), args.eig_floor)
    else:
        cert = certify(cl, None, args.gamma)
    if not cert:
        cause = getattr(cert, "cause", "no certificate")
        raise HinflandError(f"infeasible: {cause}")
    _emit(hio.dumps(cert.as_dict()), args.out)


def _triple(args, plant, k):
    if args.gamma is None:
        return certified_triple(plant, k, rel_tol=args.eps)
    return certified_triple(plant, k, gamma=args.gamma)


def cmd_lift(args):
    plant, k = _pair(args)
    t = _triple(args, plant, k)
    _emit(hio.dumps({"triple": t.as_dict(), "lifted": phi(t, plant).as_dict()}), args.out)


def cmd_roundtrip(args):
    plant, k = _pair(args)
    t = _triple(args, plant, k)
    lp = phi(t, plant)
    back = psi(lp.Xi, lp.Z, plant)
    scale = 1.0 + max(np.linalg.norm(t.k.K, 2), np.linalg.norm(t.P, 2))
    rep = {
        "gamma": t.gamma,
        "controller_error": float(np.abs(back.k.K - t.k.K).max()),
        "P_error": float(np.abs(back.P - t.P).max()),
        "scale": scale,
        "congruence": congruence_residuals(t, plant),
        "certificate_ok": bool(check_certificate(plant, back.k, back.P, back.gamma)),
    }
    _emit(hio.dumps(rep), args.out)


def cmd_descend(args):
    plant, k = _pair(args)
    trace = search(plant, k, budget=args.budget, seed=args.seed)
    lines = ["iter,J,measure,step"]
    lines += [f"{i},{j:.12g},{m:.12g},{s:.12g}" for i, j, m, s in trace.rows()]
    _emit("\n".join(lines), args.out)
    log.info("search %s after %d accepted steps", trace.status, len(trace.iterates) - 1)


def cmd_synthesize(args):
    plant = _plant(args)
    res = min_gamma(plant, args.rel_tol)
    _emit(hio.dumps(res.as_dict()), args.out)


def cmd_stationarity(args):
    plant, k = _pair(args)
    radii = (1e-2, 1e-3, 1e-4)
    rows = []
    for r in radii:
        st = stationarity_measure(plant, k, r, seed=args.seed)
        rows.append({"radius": r, "measure": st.measure, "gradients": st.n_gradients})
    _emit(hio.dumps({"ladder": rows}), args.out)


SCAN_CONFIG_KEYS = ("a_range", "b_range", "d_range", "counts", "ck", "eps", "eig_floor", "workers")


def _scan_config(args):
    kw = {}
    if args.config:
        doc = hio.load_json(args.config)
        unknown = set(doc) - set(SCAN_CONFIG_KEYS)
        if unknown:
            raise UsageError(f"{args.config}: unknown config keys {sorted(unknown)}")
        kw.update({key: tuple(v) if isinstance(v, list) else v for key, v in doc.items()})
    # flags given on the command line override the file; the file overrides flag defaults
    given = {a.split("=")[0] for a in args.argv if a.startswith("--")}
    for key in ("ck", "eps", "eig_floor", "workers"):
        if "--" + key.replace("_", "-") in given or key not in kw:
            kw[key] = getattr(args, key)
    if "--grid" in given or "counts" not in kw:
        g = _parse_grid(args.grid)
        kw.update(a_range=g["ak"][0], b_range=g["bk"][0], d_range=g["dk"][0],
                  counts=(g["ak"][1], g["bk"][1], g["dk"][1]))
    return kw


def cmd_scan(args):
    plant = _plant(args)
    kw = _scan_config(args)
    try:
        cfg = ScanConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    recs = list(run_scan(plant, cfg))
    emit_csv(recs, args.out or sys.stdout)
    if args.svg_dir:
        os.makedirs(args.svg_dir, exist_ok=True)
        for i, (d, sl) in enumerate(slices(recs).items()):
            emit_svg_heatmap(sl, "ln_abs_p12", os.path.join(args.svg_dir, f"slice_{i:03d}.svg"),
                             title=f"ln|P12|, D_K = {d:.6g}")


def cmd_fitline(args):
    recs = read_csv(args.csv)
    rows = []
    for d, sl in slices(recs).items():
        f = fit_degenerate_line(sl, args.quantile, args.ck)
        rows.append({"d_k": d, "theta": f.theta, "max_perp_dist": f.max_perp_dist,
                     "n_low": f.n_low, "status": f.status})
    _emit(hio.dumps({"low_quantile": args.quantile, "slices": rows}), args.out)


def cmd_example_plant(args):
    _emit(hio.dumps(hio.plant_to_dict(example_plant())), args.out)


# -- parser --------------------------------------------------------------------

def _positive(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="hinfland", formatter_class=fmt,
                                description="H-infinity policy optimization tools.")
    sub = p.add_subparsers(dest="command", metavar="command")

    def add(name, fn, help_, *flags):
        sp = sub.add_parser(name, help=help_, description=help_, formatter_class=fmt)
        sp.set_defaults(func=fn)
        for f in flags:
            f(sp)
        sp.add_argument("--out", default=None, help="output path (stdout if omitted)")
        return sp

    def plant(sp):
        sp.add_argument("--plant", default=None, help="plant JSON (built-in example plant if omitted)")

    def controller(sp):
        sp.add_argument("--controller", default=None, help="controller JSON with AK, BK, CK, DK")

    def rel_tol(default):
        def f(sp):
            sp.add_argument("--rel-tol", type=_positive, default=default, help="relative tolerance")
        return f

    def gamma(sp):
        sp.add_argument("--gamma", type=_positive, default=None,
                        help="certificate level (J(K)/(1-eps) if omitted)")

    def eps(sp):
        sp.add_argument("--eps", type=_positive, default=1e-9, help="relative slack on the level")

    def eig_floor(sp):
        sp.add_argument("--eig-floor", type=_positive, default=EIG_FLOOR,
                        help="lower bound on lambda_min(P)")

    def seed(sp):
        sp.add_argument("--seed", type=int, default=0, help="random seed")

    add("norm", cmd_norm, "H-infinity norm of the closed loop", plant, controller, rel_tol(1e-9))
    add("certify", cmd_certify, "bounded-real certificate", plant, controller, gamma, eps, eig_floor)
    add("lift", cmd_lift, "certified triple and its lifted point", plant, controller, gamma, eps)
    add("roundtrip", cmd_roundtrip, "lift and map back; report residuals", plant, controller,
        gamma, eps)

    def budget(sp):
        sp.add_argument("--budget", type=int, default=200, help="maximum search iterations")

    add("descend", cmd_descend, "gradient-sampling search; CSV trace", plant, controller, seed, budget)
    add("synthesize", cmd_synthesize, "reference optimum over the lifted set", plant, rel_tol(1e-5))
    add("stationarity", cmd_stationarity, "stationarity measure on the radius ladder", plant,
        controller, seed)

    def scan_flags(sp):
        sp.add_argument("--grid", default="aK:-2:2:41,bK:-4:4:41,dK:-1.5:1.5:13",
                        help="grid axes name:lo:hi:n")
        sp.add_argument("--ck", type=float, default=1.0, help="fixed C_K")
        sp.add_argument("--workers", type=int, default=1, help="worker processes")
        sp.add_argument("--svg-dir", default=None, help="write one ln|P12| heatmap per D_K slice")
        sp.add_argument("--config", default=None,
                        help="JSON scan config (keys: " + ", ".join(SCAN_CONFIG_KEYS) + "); flags override it")

    add("scan", cmd_scan, "grid scan of first-order controllers; CSV", plant, eps, eig_floor, scan_flags)

    def fit_flags(sp):
        sp.add_argument("csv", help="scan CSV")
        sp.add_argument("--quantile", type=float, default=0.02, help="low-value quantile per slice")
        sp.add_argument("--ck", type=float, default=1.0, help="C_K used in the scan")

    add("fitline", cmd_fitline, "fit the degenerate line per D_K slice", fit_flags)
    add("example-plant", cmd_example_plant, "write the built-in example plant")
    return p


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        print("hinfland: error: a command is required", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except UsageError as exc:
        print(f"hinfland: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"hinfland: error: {exc}", file=sys.stderr)
        return 2
    except (HinflandError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"hinfland: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
