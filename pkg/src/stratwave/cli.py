"""Command line interface.

    stratwave run CONFIG | --preset NAME [--full-scale] [--seed S] [--out DIR]
    stratwave modes CONFIG | --preset NAME [--out DIR] [--profiles K] [--depths N]
    stratwave field CONFIG | --preset NAME --plane y=18 [--span LO HI] [--out FILE]

Exit status: 0 success, 2 configuration error, 3 solver failure,
4 locator stopped at its evaluation budget (files written, flagged partial).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .forward import DivergenceError, KernelSizeError
from .green import green_pairs
from .modes import RootFindingWarning, find_modes
from .scenario import (ConfigError, PRESETS, build_basis, load_scenario_file, preset,
                       run_scenario, write_atomic)
from .waveguide import DomainError

log = logging.getLogger("stratwave")

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_PARTIAL = 4


def _scenario(args):
    if (args.config is None) == (args.preset is None):
        raise ConfigError("give exactly one of CONFIG or --preset")
    sc = preset(args.preset) if args.preset else load_scenario_file(args.config)
    if args.full_scale:
        sc = sc.full_scale()
    if args.seed is not None:
        sc = dataclasses.replace(sc, seed=args.seed)
    return sc


def cmd_run(args):
    sc = _scenario(args)
    try:
        sc.validate(locating=True)
    except DomainError as exc:
        raise ConfigError(str(exc), path=args.config) from None
    out = Path(args.out or f"runs/{sc.name}")
    res = run_scenario(sc, out, workers=args.workers)
    r = res.result
    print(f"{sc.name}: {len(r.vertices)} output vertices, best {r.best.tolist()}, "
          f"{r.total_solves} forward solves {r.evaluations_per_level}")
    for name, path in sorted(res.files.items()):
        print(f"  wrote {path}")
    if r.partial:
        print(f"partial result: {r.message}", file=sys.stderr)
        return EXIT_PARTIAL
    return 0


def modes_tables(sc, n_profiles=20, n_depths=201):
    """Mode table and sampled profiles as CSV text."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RootFindingWarning)
        basis = build_basis(sc)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "xi_re", "xi_im", "W_re", "W_im", "norm"])
    for i in range(len(basis)):
        x, wn = basis.xi[i], basis.W_n[i]
        w.writerow([i + 1, repr(float(x.real)), repr(float(x.imag)), repr(float(wn.real)),
                    repr(float(wn.imag)), repr(float(np.real(basis.norm[i])))])
    k = min(n_profiles, len(basis))
    z = np.linspace(0.0, sc.waveguide.h, n_depths)
    prof = basis.profiles(z, k).real
    pbuf = io.StringIO()
    pw = csv.writer(pbuf, lineterminator="\n")
    pw.writerow(["x3"] + [f"Phi_{i + 1}" for i in range(k)])
    for j, zz in enumerate(z):
        pw.writerow([repr(float(zz))] + [repr(float(v)) for v in prof[:, j]])
    return basis, buf.getvalue(), pbuf.getvalue()


def cmd_modes(args):
    sc = _scenario(args)
    basis, table, profiles = modes_tables(sc, args.profiles, args.depths)
    out = Path(args.out or f"runs/{sc.name}-modes")
    files = write_atomic(out, {"modes.csv": table, "profiles.csv": profiles})
    print(f"{len(basis)} modes ({basis.n_propagating} propagating, "
          f"{basis.n_evanescent} evanescent)")
    for path in files.values():
        print(f"  wrote {path}")
    return 0


def parse_plane(text):
    axis, sep, value = text.partition("=")
    axis = axis.strip().lower()
    if not sep or axis not in ("x", "y"):
        raise ConfigError(f"--plane expects 'x=VALUE' or 'y=VALUE', got {text!r}")
    try:
        return axis, float(value)
    except ValueError:
        raise ConfigError(f"bad plane coordinate {value!r}") from None


def field_slice(sc, plane, span=None, n_h=201, n_z=201):
    """``G(.; source)`` on a vertical plane as CSV text.

    Points closer to the source column than the basis radius use the
    mollified radius.
    """
    axis, value = parse_plane(plane) if isinstance(plane, str) else plane
    src = np.array(sc.source)
    free = 0 if axis == "y" else 1
    if span is None:
        span = (src[free] - 100.0, src[free] + 100.0)
    s = np.linspace(span[0], span[1], n_h)
    z = np.linspace(0.0, sc.waveguide.h, n_z)
    S, Z = np.meshgrid(s, z, indexing="ij")
    pts = np.empty(S.shape + (3,))
    pts[..., free] = S
    pts[..., 1 - free] = value
    pts[..., 2] = Z
    basis = find_modes(sc.waveguide, r_min=0.5 * sc.cell, tol_modes=sc.tol_modes)
    g = green_pairs(basis, pts, src, r_eff=basis.r_min)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "z", "re", "im", "abs"])
    for p, v in zip(pts.reshape(-1, 3), g.ravel()):
        w.writerow([repr(float(p[0])), repr(float(p[1])), repr(float(p[2])),
                    repr(float(v.real)), repr(float(v.imag)), repr(float(abs(v)))])
    return g, buf.getvalue()


def cmd_field(args):
    sc = _scenario(args)
    _, text = field_slice(sc, args.plane, args.span, args.nh, args.nz)
    out = Path(args.out or f"runs/{sc.name}-field/field.csv")
    write_atomic(out.parent, {out.name: text})
    print(f"  wrote {out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="stratwave", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", nargs="?", help="scenario file (INI)")
    common.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
    common.add_argument("--full-scale", "--paper-scale", dest="full_scale", action="store_true",
                        help="forward cell 1/15 and mode tolerance 1e-8 (slow)")
    common.add_argument("--seed", type=int, help="root seed (overrides the scenario)")
    common.add_argument("--out", help="output directory (file for 'field')")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="synthesize data and locate the source")
    r.add_argument("--workers", type=int, default=1, help="threads for indicator blocks")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("modes", parents=[common], help="export the mode table and profiles")
    m.add_argument("--profiles", type=int, default=20, help="number of sampled profiles")
    m.add_argument("--depths", type=int, default=201, help="depth samples")
    m.set_defaults(func=cmd_modes)

    f = sub.add_parser("field", parents=[common], help="point-source field on a vertical plane")
    f.add_argument("--plane", required=True, help="'y=VALUE' or 'x=VALUE'")
    f.add_argument("--span", type=float, nargs=2, metavar=("LO", "HI"),
                   help="horizontal extent along the plane")
    f.add_argument("--nh", type=int, default=201)
    f.add_argument("--nz", type=int, default=201)
    f.set_defaults(func=cmd_field)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, KernelSizeError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
