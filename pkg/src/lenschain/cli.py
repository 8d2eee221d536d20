"""Command-line frontend.

One subcommand per library operation, scriptable and deterministic:
human-readable report on stdout, machine CSV behind --out, optional
figures behind --plot.  Exit codes: 0 success, 2 usage error, 3 negative
verdict (failure report, virtual or non-rotational result), 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import cycles, pwamap, scan, shrink, symseq
from .cycles import SingularSystemError
from .scan import (
    ConfigError,
    ContinuationStalledError,
    EvalError,
    ParseError,
    ScanOptions,
    SeedNotAdmissibleError,
)
from .shrink import FailureReport, NoConvergenceError, SingularJacobianError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NEGATIVE = 3
EXIT_NUMERICAL = 4


def _load_map(args) -> tuple[pwamap.PwaMap, float]:
    text = Path(args.map).read_text()
    pwa, mu_file = pwamap.parse_map_config(text)
    mu = args.mu if args.mu is not None else mu_file
    if mu is None:
        raise ValueError("mu not given on the command line or in the map file")
    return pwa, mu


def _load_family(args) -> scan.FamilySpec:
    name = args.family
    if name in ("fig1",):
        spec = scan.builtin_family(name)
    else:
        spec = scan.parse_family(Path(name).read_text(), name=name)
    if getattr(args, "box", None):
        box = tuple(float(v) for v in args.box.split(","))
        if len(box) != 4:
            raise ValueError("--box needs four comma-separated values")
        spec = scan.FamilySpec(N=spec.N, a_l=spec.a_l, a_r=spec.a_r, b=spec.b,
                               mu=spec.mu, box=box, name=spec.name)
    return spec


def _pair(text: str) -> tuple[float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated values, got {text!r}")
    return parts[0], parts[1]


def _write(path: str | None, content: str) -> None:
    if path:
        Path(path).write_text(content)


def _seq_from_args(args) -> symseq.SymbolSequence:
    if args.seq:
        return symseq.SymbolSequence(args.seq)
    if None in (args.l, args.m, args.n):
        raise ValueError("give either --seq or all of --l, --m, --n")
    return symseq.rotational(args.l, args.m, args.n)


def _cmd_count(args) -> int:
    print(f"primitive({args.n}) = {symseq.count_primitive(args.n)}")
    print(f"rotational({args.n}) = {symseq.count_rotational(args.n)}")
    return EXIT_OK


def _cmd_rot(args) -> int:
    print(symseq.rotational(args.l, args.m, args.n))
    return EXIT_OK


def _cmd_params(args) -> int:
    params = symseq.rotational_params(args.word)
    if params is None:
        print("non-rotational")
        return EXIT_NEGATIVE
    print(f"l = {params.l}\nm = {params.m}\nn = {params.n}\nd = {params.d}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    pwa, mu = _load_map(args)
    seq = _seq_from_args(args)
    solution = cycles.solve_cycle(pwa, mu, seq, band=args.band,
                                  tol_sing=args.tol_sing)
    print(f"sequence       : {solution.sequence}")
    print(f"admissibility  : {solution.admissibility.kind.value}")
    if solution.admissibility.violating_indices:
        print(f"violations     : {solution.admissibility.violating_indices}")
    if solution.admissibility.boundary_indices:
        print(f"on manifold    : {solution.admissibility.boundary_indices}")
    print(f"det(I - M_S)   : {solution.det_IminusM:.12g}")
    print(f"det(P_S)       : {solution.det_P:.12g}")
    print(f"max multiplier : {solution.multipliers.max_modulus:.12g}")
    print(f"wrap residual  : {solution.wrap_residual:.3e}")
    for i in range(solution.n):
        coords = ", ".join(f"{v: .12g}" for v in solution.points[i])
        print(f"  x_{i} = ({coords})")
    _write(args.out, solution.to_csv())
    if solution.admissibility.kind is cycles.Admissibility.VIRTUAL:
        return EXIT_NEGATIVE
    return EXIT_OK


def _cmd_nature(args) -> int:
    pwa, mu = _load_map(args)
    seq = _seq_from_args(args)
    nature = cycles.solution_nature(pwa, mu, seq, tol_sing=args.tol_sing)
    print(f"cell          : {nature.cell.value}")
    print(f"det(I - M_S)  : {nature.det_IminusM:.12g}")
    print(f"det(P_S)      : {nature.det_P:.12g}")
    return EXIT_OK


def _cmd_classify(args) -> int:
    pwa, _ = _load_map(args)
    verdict = pwamap.classify_border_collision(pwa, tol_sing=args.tol_sing)
    print(verdict.value)
    return EXIT_OK


def _report_certificate(result) -> int:
    if isinstance(result, FailureReport):
        print(f"verdict  : FAILED ({result.clause})")
        print(f"residual : {result.residual:.6g}")
        if result.detail:
            print(f"detail   : {result.detail}")
        return EXIT_NEGATIVE
    print(f"verdict  : certificate ({result.kind.value})")
    p = result.params
    print(f"params   : l = {p.l}, m = {p.m}, n = {p.n}, d = {p.d}")
    print(f"p_0      : ({', '.join(f'{v:.12g}' for v in result.p_cycle.points[0])})")
    print("t values :", ", ".join(f"{v:.6g}" for v in result.t_values))
    for key, value in result.residuals.items():
        print(f"  {key} = {value:.6g}")
    return EXIT_OK


def _cmd_check_shrink(args) -> int:
    pwa, mu = _load_map(args)
    if args.terminating:
        result = shrink.check_terminating(pwa, mu, args.m, args.n,
                                          tol_sing=args.tol_sing, band=args.band)
    else:
        if args.l is None:
            raise ValueError("--l is required for non-terminating checks")
        result = shrink.check_nonterminating(pwa, mu, args.l, args.m, args.n,
                                             tol_sing=args.tol_sing,
                                             band=args.band)
    return _report_certificate(result)


def _cmd_polygon(args) -> int:
    pwa, mu = _load_map(args)
    if args.terminating:
        cert = shrink.check_terminating(pwa, mu, args.m, args.n,
                                        tol_sing=args.tol_sing, band=args.band)
    else:
        cert = shrink.check_nonterminating(pwa, mu, args.l, args.m, args.n,
                                           tol_sing=args.tol_sing, band=args.band)
    if isinstance(cert, FailureReport):
        return _report_certificate(cert)
    poly = shrink.polygon(pwa, cert, tau_grid_size=args.tau_grid, band=args.band)
    deviation = shrink.rigid_rotation_check(pwa, mu, poly, cert.params)
    print(f"vertices            : {poly.n}")
    print(f"planarity defect    : {poly.planarity_defect:.6g}")
    print(f"edge separation     : {poly.edge_min_separation:.6g}")
    print(f"rotation deviation  : {deviation:.3e}")
    worst_wrap = max(c.wrap_residual for c in poly.sampled_cycles)
    print(f"worst wrap residual : {worst_wrap:.3e}")
    if args.out:
        lines = ["vertex,orbit_index," +
                 ",".join(f"x{k + 1}" for k in range(poly.vertices.shape[1]))]
        for j in range(poly.n):
            coords = ",".join(f"{v:.17g}" for v in poly.vertices[j])
            lines.append(f"{j},{poly.vertex_orbit_indices[j]},{coords}")
        _write(args.out, "\n".join(lines) + "\n")
    if args.plot:
        from . import plots
        target = args.plot if isinstance(args.plot, str) else "polygon.png"
        plots.plot_polygon(poly, target, title=f"invariant {poly.n}-gon")
        print(f"figure -> {target}")
    return EXIT_OK


def _cmd_find_shrink(args) -> int:
    spec = _load_family(args)
    result = shrink.find_shrinking_point(spec.family(), args.l, args.m, args.n,
                                         _pair(args.guess),
                                         tol_sing=args.tol_sing, band=args.band)
    print(f"xi*        : ({result.xi[0]:.15g}, {result.xi[1]:.15g})")
    print(f"residuals  : {result.residuals[0]:.3e}, {result.residuals[1]:.3e}")
    print(f"iterations : {result.iterations}")
    return _report_certificate(result.certificate)


def _cmd_unfold(args) -> int:
    spec = _load_family(args)
    family = spec.family()
    xi = np.array(_pair(args.xi))
    unfolding = shrink.unfold(family, xi, args.l, args.m, args.n,
                              radius=args.radius, tol_sing=args.tol_sing,
                              band=args.band)
    print(f"chart      : {unfolding.chart}")
    print(f"k1..k4     : {unfolding.k1:.6g}, {unfolding.k2:.6g}, "
          f"{unfolding.k3:.6g}, {unfolding.k4:.6g}")
    print(f"k pattern  : {unfolding.k_pattern}")
    print(f"h slope    : {unfolding.h_slope:.6g}")
    print(f"g1 coeff   : {unfolding.g1_coeff:.6g} (linear {unfolding.g1_linear:.3e})")
    print(f"g2 coeff   : {unfolding.g2_coeff:.6g} (linear {unfolding.g2_linear:.3e})")
    for probe in unfolding.region_probes:
        verdicts = ", ".join(f"{k}: {v.kind.value}"
                             for k, v in probe.verdicts.items())
        print(f"{probe.region}  ({probe.eta: .2e}, {probe.nu: .2e})  {verdicts}")
    for note in unfolding.notes:
        print(f"note: {note}")
    if args.out:
        lines = ["curve,eta,nu,p1,p2"]
        for name, rows in unfolding.boundary_samples.items():
            for row in rows:
                lines.append(f"{name}," + ",".join(f"{v:.17g}" for v in row))
        _write(args.out, "\n".join(lines) + "\n")
    if args.plot:
        from . import plots
        target = args.plot if isinstance(args.plot, str) else "unfold.png"
        plots.plot_unfolding(unfolding, target)
        print(f"figure -> {target}")
    return EXIT_OK


def _cmd_scan(args) -> int:
    spec = _load_family(args)
    w, h = (int(v) for v in args.grid.lower().split("x"))
    options = ScanOptions(transient=args.transient, threads=args.threads,
                          band=args.band, seed=args.seed,
                          multi_start=args.multi_start)
    grid = scan.scan_tongues(spec, (w, h), args.nmax, options)
    labels, counts = np.unique(grid.label, return_counts=True)
    print(f"grid       : {w} x {h} cells over box {spec.box}")
    for lab, cnt in zip(labels, counts):
        print(f"  {lab:<18} {cnt}")
    periodic = grid.label == scan.LABEL_PERIODIC
    if periodic.any():
        combos = sorted({(grid.l[c], grid.m[c], grid.n[c])
                         for c in np.flatnonzero(periodic)})
        print("tongues    :", ", ".join(f"S[{l},{m},{n}]" for l, m, n in combos))
    _write(args.out, grid.to_csv())
    if args.plot:
        from . import plots
        target = args.plot if isinstance(args.plot, str) else "scan.png"
        plots.plot_grid(grid, target, title=spec.name or "tongue scan")
        print(f"figure -> {target}")
    return EXIT_OK


def _cmd_boundaries(args) -> int:
    spec = _load_family(args)
    opts = scan.ContinuationOptions(step=args.step, max_steps=args.max_steps)
    curves = scan.tongue_boundaries(spec.family(), args.l, args.m, args.n,
                                    _pair(args.seed_point), options=opts,
                                    tol_sing=args.tol_sing, band=args.band)
    for curve in curves.values():
        flag = " (hit singular set)" if curve.hit_singularity else ""
        print(f"index {curve.index}: {curve.points.shape[0]} points, "
              f"max |s| = {np.max(curve.s_residuals):.2e}{flag}")
    _write(args.out, scan.curves_to_csv(curves))
    if args.plot:
        from . import plots
        target = args.plot if isinstance(args.plot, str) else "boundaries.png"
        plots.plot_curves(curves, target)
        print(f"figure -> {target}")
    return EXIT_OK


def _add_common(parser, *, map_input=False, family_input=False, lmn=False,
                seq_ok=False):
    parser.add_argument("--tol-sing", dest="tol_sing", type=float, default=1e-9,
                        help="singularity predicate tolerance (default 1e-9)")
    parser.add_argument("--band", type=float, default=1e-8,
                        help="on-manifold band for admissibility (default 1e-8)")
    if map_input:
        parser.add_argument("--map", required=True, help="map config file")
        parser.add_argument("--mu", type=float, default=None,
                            help="overrides mu from the map file")
    if family_input:
        parser.add_argument("--family", required=True,
                            help="family file or built-in name (fig1)")
        parser.add_argument("--box", default=None,
                            help="override box: p1min,p1max,p2min,p2max")
    if lmn:
        parser.add_argument("--l", type=int, default=None)
        parser.add_argument("--m", type=int, required=not seq_ok, default=None)
        parser.add_argument("--n", type=int, required=not seq_ok, default=None)
    if seq_ok:
        parser.add_argument("--seq", default=None,
                            help="explicit word over {L,R}; overrides --l/--m/--n")
    parser.add_argument("--out", default=None, help="write machine CSV here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lenschain",
        description="periodic solutions, resonance tongues and shrinking "
                    "points of piecewise-affine continuous maps")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="necklace counts for length n")
    p.add_argument("n", type=int)
    p.set_defaults(func=_cmd_count)

    p = sub.add_parser("rot", help="build the rotational word for (l, m, n)")
    p.add_argument("l", type=int)
    p.add_argument("m", type=int)
    p.add_argument("n", type=int)
    p.set_defaults(func=_cmd_rot)

    p = sub.add_parser("params", help="recover (l, m, n, d) from a word")
    p.add_argument("word")
    p.set_defaults(func=_cmd_params)

    p = sub.add_parser("solve", help="solve the cycle with a prescribed word")
    _add_common(p, map_input=True, lmn=True, seq_ok=True)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("nature", help="classify the cycle solution system")
    _add_common(p, map_input=True, lmn=True, seq_ok=True)
    p.set_defaults(func=_cmd_nature)

    p = sub.add_parser("classify", help="border-collision parity classification")
    _add_common(p, map_input=True)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("check-shrink", help="certify a shrinking point")
    _add_common(p, map_input=True, lmn=True)
    p.add_argument("--terminating", action="store_true",
                   help="check the terminating kind (l = n-1 implied)")
    p.set_defaults(func=_cmd_check_shrink)

    p = sub.add_parser("polygon", help="invariant polygon at a certified point")
    _add_common(p, map_input=True, lmn=True)
    p.add_argument("--terminating", action="store_true")
    p.add_argument("--tau-grid", dest="tau_grid", type=int, default=64)
    p.add_argument("--plot", nargs="?", const="polygon.png", default=None,
                   help="render the polygon to this file")
    p.set_defaults(func=_cmd_polygon)

    p = sub.add_parser("find-shrink", help="Newton-refine a shrinking point")
    _add_common(p, family_input=True, lmn=True)
    p.add_argument("--guess", required=True, help="starting point p1,p2")
    p.set_defaults(func=_cmd_find_shrink)

    p = sub.add_parser("unfold", help="local unfolding at a certified point")
    _add_common(p, family_input=True, lmn=True)
    p.add_argument("--xi", required=True, help="certified point p1,p2")
    p.add_argument("--radius", type=float, default=1e-3)
    p.add_argument("--plot", nargs="?", const="unfold.png", default=None)
    p.set_defaults(func=_cmd_unfold)

    p = sub.add_parser("scan", help="attractor labels over a parameter grid")
    _add_common(p, family_input=True)
    p.add_argument("--grid", default="100x100", help="WxH cells (default 100x100)")
    p.add_argument("--nmax", type=int, default=30)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--transient", type=int, default=10_000)
    p.add_argument("--multi-start", dest="multi_start", action="store_true")
    p.add_argument("--plot", nargs="?", const="scan.png", default=None)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("boundaries", help="trace tongue boundary curves")
    _add_common(p, family_input=True, lmn=True)
    p.add_argument("--seed-point", dest="seed_point", required=True,
                   help="point inside the tongue: p1,p2")
    p.add_argument("--step", type=float, default=0.0)
    p.add_argument("--max-steps", dest="max_steps", type=int, default=400)
    p.add_argument("--plot", nargs="?", const="boundaries.png", default=None)
    p.set_defaults(func=_cmd_boundaries)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SeedNotAdmissibleError as exc:
        print(f"negative verdict: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE
    except (SingularSystemError, NoConvergenceError, SingularJacobianError,
            ContinuationStalledError, shrink.ChartError,
            shrink.DegenerateUnfoldingError, shrink.DegenerateCertificateError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ParseError, EvalError, ValueError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
