"""Figure rendering smoke tests: every plot writes a non-empty file."""

import numpy as np

from helpers import pentagon_map
from lenschain.plots import (
    plot_curves,
    plot_grid,
    plot_polygon,
    plot_unfolding,
    plot_width,
)
from lenschain.scan import (
    BoundaryCurve,
    FamilySpec,
    ScanOptions,
    builtin_family,
    scan_tongues,
    width_profile,
)
from lenschain.shrink import check_nonterminating, polygon


def test_grid_figure(tmp_path):
    base = builtin_family("fig1")
    spec = FamilySpec(N=base.N, a_l=base.a_l, a_r=base.a_r, b=base.b,
                      mu=base.mu, box=(0.27, 0.30, 0.70, 0.98), name="fig1")
    grid = scan_tongues(spec, (10, 8), 8, ScanOptions(transient=800))
    target = tmp_path / "grid.png"
    plot_grid(grid, str(target), title="scan")
    assert target.stat().st_size > 0


def test_curves_width_figures(tmp_path):
    xs = np.linspace(0.0, 1.0, 30)
    a = BoundaryCurve(0, np.column_stack([xs, xs * 0.1]), np.zeros_like(xs), False)
    b = BoundaryCurve(5, np.column_stack([xs, 0.2 - xs * 0.1]),
                      np.zeros_like(xs), True)
    target = tmp_path / "curves.png"
    plot_curves({0: a, 5: b}, str(target))
    assert target.stat().st_size > 0
    profile = width_profile(a, b, resample=30)
    target2 = tmp_path / "width.png"
    plot_width(profile, str(target2))
    assert target2.stat().st_size > 0


def test_polygon_figure(tmp_path):
    pwa = pentagon_map()
    cert = check_nonterminating(pwa, 1.0, 2, 2, 5)
    poly = polygon(pwa, cert, tau_grid_size=8)
    target = tmp_path / "poly.png"
    plot_polygon(poly, str(target), title="invariant pentagon")
    assert target.stat().st_size > 0


def test_unfolding_figure(tmp_path):
    from lenschain.shrink import find_shrinking_point, unfold
    family = builtin_family("fig1").family()
    located = find_shrinking_point(family, 3, 2, 7, (0.284, 0.757))
    unfolding = unfold(family, located.xi, 3, 2, 7, radius=1e-3, samples=9)
    target = tmp_path / "unfold.png"
    plot_unfolding(unfolding, str(target))
    assert target.stat().st_size > 0
