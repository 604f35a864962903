"""Command-line interface: ``discrete-ma <group> <command> ...``.

Exit codes: 0 success, 1 a check came out negative (not convex, equivalence
violated, experiment threshold missed), 2 invalid input or a library error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .envelope import contact_set, gamma_eval, gamma_extension_eval, lower_hull
from .errors import DiscreteMAError, EquivalenceViolation
from .experiments import HARMONIC, RUNNERS, ExperimentConfig, test_function
from .io import format_mafn, read_hull, read_mafn
from .laplace import barrier_constants, check_max_principle, solve_dirichlet
from .lattice import Ball, Box, build_domain, parse_domain
from .measure import DensitySpec, discrete_measure, measure_of_region
from .meshfn import delta_e, is_discrete_convex
from .subdiff import discrete_subdifferential, equivalence_check, hull_normal_cell


def _floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split(",")])


def _ints(text: str) -> np.ndarray:
    return np.array([int(t) for t in text.split(",")])


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- mafn --------------------------------------------------------------------


def cmd_mafn_lattice(a):
    _emit(build_domain(parse_domain(a.domain), a.h, a.stencil).dump(), a.out)
    return 0


def cmd_mafn_sample(a):
    spec = parse_domain(a.domain)
    dom = build_domain(spec, a.h, a.stencil)
    _emit(format_mafn(test_function(a.f, spec.dim).mesh(dom)), a.out)
    return 0


def cmd_mafn_check_convex(a):
    rep = is_discrete_convex(read_mafn(a.file))
    print(f"discrete_convex {str(rep.is_discrete_convex).lower()}")
    print(f"min_delta {rep.min_delta:.17g}")
    for i, e, v in rep.violations[: a.limit]:
        print(f"violation node={i} dir={','.join(map(str, e))} delta={v:.17g}")
    return 0 if rep.is_discrete_convex else 1


def cmd_mafn_delta(a):
    u = read_mafn(a.file)
    print(f"{delta_e(u, _floats(a.at), _ints(a.dir)):.17g}")
    return 0


# -- envelope ----------------------------------------------------------------


def cmd_envelope_build(a):
    _emit(lower_hull(read_mafn(a.file)).dump(), a.out)
    return 0


def cmd_envelope_eval(a):
    hull = read_hull(a.hull)
    x = _floats(a.at)
    val = gamma_extension_eval(hull, x) if a.extension else gamma_eval(hull, x)
    print(f"{val:.17g}")
    return 0


def cmd_envelope_contact(a):
    u = read_mafn(a.file)
    cs = contact_set(u, lower_hull(u))
    for i in cs.nodes:
        print(f"{i} " + " ".join(f"{c:.17g}" for c in u.dom.nodes[i]))
    return 0


# -- subdiff -----------------------------------------------------------------


def cmd_subdiff_cell(a):
    u = read_mafn(a.file)
    i = u.dom.interior_id(_floats(a.at))
    if a.method == "direct":
        cell = discrete_subdifferential(u, i)
    else:
        cell = hull_normal_cell(lower_hull(u), u, i)
    print(cell.dump(i))
    return 0


def cmd_subdiff_check_equiv(a):
    u = read_mafn(a.file)
    hull = lower_hull(u)
    worst, bad = 0.0, []
    for i in range(u.dom.n_interior):
        try:
            pair = equivalence_check(u, hull, i)
            worst = max(worst, pair.hausdorff)
        except EquivalenceViolation as exc:
            bad.append(exc.pair.node)
    print(f"nodes {u.dom.n_interior}")
    print(f"violations {len(bad)}")
    print(f"max_hausdorff {worst:.3e}")
    for i in bad[:20]:
        print(f"violation node={i}")
    return 0 if not bad else 1


# -- measure -----------------------------------------------------------------


def cmd_measure_weights(a):
    u = read_mafn(a.file)
    _emit(discrete_measure(u, R=DensitySpec.parse(a.density)).to_csv(), a.out)
    return 0


def cmd_measure_total(a):
    print(f"{discrete_measure(read_mafn(a.file)).total:.17g}")
    return 0


def cmd_measure_region(a):
    u = read_mafn(a.file)
    if a.box:
        c = _floats(a.box)
        k = len(c) // 2
        E = Box(tuple(c[:k]), tuple(c[k:]))
    elif a.ball:
        c = _floats(a.ball)
        E = Ball(tuple(c[:-1]), float(c[-1]))
    else:
        E = parse_domain(a.region)
    m = discrete_measure(u, R=DensitySpec.parse(a.density))
    print(f"{measure_of_region(m, E):.17g}")
    return 0


# -- laplace -----------------------------------------------------------------


def cmd_laplace_solve(a):
    if a.g not in HARMONIC:
        raise DiscreteMAError(f"unknown boundary function {a.g!r}; choose from {sorted(HARMONIC)}")
    dom = build_domain(parse_domain(a.domain), a.h, 1)
    w = solve_dirichlet(dom, HARMONIC[a.g])
    _emit(format_mafn(w), a.out)
    return 0 if check_max_principle(w) else 1


def cmd_laplace_barrier(a):
    bc = barrier_constants(a.mu, a.d, a.eta)
    print("name,value")
    for k, v in bc.as_rows():
        print(f"{k},{v:.17g}")
    return 0


# -- run ---------------------------------------------------------------------


def cmd_run(a):
    cfg = ExperimentConfig.load(a.config)
    if cfg.experiment != a.kind:
        raise DiscreteMAError(f"config is for {cfg.experiment!r}, not {a.kind!r}")
    if a.out:
        cfg.output = a.out
    if a.svg:
        cfg.svg = True
    res = RUNNERS[a.kind](cfg)
    sys.stdout.write(res.to_csv())
    for name, ok in res.checks.items():
        print(f"# {'PASS' if ok else 'FAIL'} {name}", file=sys.stderr)
    return 0 if res.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="discrete-ma", description=__doc__.splitlines()[0])
    groups = p.add_subparsers(dest="group", required=True)

    def grid_args(sp, stencil=True):
        sp.add_argument("--domain", required=True, help="box:x0,y0,x1,y1 | ball:cx,cy,r | polygon:file-or-coords")
        sp.add_argument("--h", type=float, required=True)
        if stencil:
            sp.add_argument("--stencil", type=int, default=1, help="direction radius")
        sp.add_argument("--out")

    g = groups.add_parser("mafn", help="lattices and mesh functions").add_subparsers(dest="cmd", required=True)
    sp = g.add_parser("lattice", help="dump the node set")
    grid_args(sp)
    sp.set_defaults(func=cmd_mafn_lattice)
    sp = g.add_parser("sample", help="sample a builtin function on the nodes")
    grid_args(sp)
    sp.add_argument("--f", default="quadratic")
    sp.set_defaults(func=cmd_mafn_sample)
    sp = g.add_parser("check-convex")
    sp.add_argument("file")
    sp.add_argument("--limit", type=int, default=20)
    sp.set_defaults(func=cmd_mafn_check_convex)
    sp = g.add_parser("delta")
    sp.add_argument("file")
    sp.add_argument("--at", required=True)
    sp.add_argument("--dir", required=True)
    sp.set_defaults(func=cmd_mafn_delta)

    g = groups.add_parser("envelope", help="lower convex envelope").add_subparsers(dest="cmd", required=True)
    sp = g.add_parser("build")
    sp.add_argument("file")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_envelope_build)
    sp = g.add_parser("eval")
    sp.add_argument("hull")
    sp.add_argument("--at", required=True)
    sp.add_argument("--extension", action="store_true", help="max over all pieces (defined everywhere)")
    sp.set_defaults(func=cmd_envelope_eval)
    sp = g.add_parser("contact")
    sp.add_argument("file")
    sp.set_defaults(func=cmd_envelope_contact)

    g = groups.add_parser("subdiff", help="discrete subdifferentials").add_subparsers(dest="cmd", required=True)
    sp = g.add_parser("cell")
    sp.add_argument("file")
    sp.add_argument("--at", required=True)
    sp.add_argument("--method", choices=("direct", "hull"), default="direct")
    sp.set_defaults(func=cmd_subdiff_cell)
    sp = g.add_parser("check-equiv")
    sp.add_argument("file")
    sp.set_defaults(func=cmd_subdiff_check_equiv)

    g = groups.add_parser("measure", help="discrete Monge-Ampere measures").add_subparsers(dest="cmd", required=True)
    sp = g.add_parser("weights")
    sp.add_argument("file")
    sp.add_argument("--density", default="unit", help="unit | rq:<c>")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_measure_weights)
    sp = g.add_parser("total")
    sp.add_argument("file")
    sp.set_defaults(func=cmd_measure_total)
    sp = g.add_parser("region")
    sp.add_argument("file")
    which = sp.add_mutually_exclusive_group(required=True)
    which.add_argument("--box", help="x0,y0,x1,y1")
    which.add_argument("--ball", help="cx,cy,r")
    which.add_argument("--region", help="box:..|ball:..|polygon:..")
    sp.add_argument("--density", default="unit")
    sp.set_defaults(func=cmd_measure_region)

    g = groups.add_parser("laplace", help="discrete Laplace Dirichlet problem").add_subparsers(dest="cmd", required=True)
    sp = g.add_parser("solve")
    grid_args(sp, stencil=False)
    sp.add_argument("--g", required=True, help=", ".join(sorted(HARMONIC)))
    sp.set_defaults(func=cmd_laplace_solve)
    sp = g.add_parser("barrier")
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--eta", type=float, default=1.0)
    sp.set_defaults(func=cmd_laplace_barrier)

    g = groups.add_parser("run", help="refinement experiments").add_subparsers(dest="kind", required=True)
    for kind in RUNNERS:
        sp = g.add_parser(kind)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", help="output base path (overrides the config)")
        sp.add_argument("--svg", action="store_true")
        sp.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DiscreteMAError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
