"""Command-line interface: ``repeatcap bound|table|curve|audit|sim``."""

import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from decimal import ROUND_DOWN, ROUND_HALF_EVEN, Decimal

import click
import numpy as np

from . import bounds, kktcheck, simchannel
from .dists import DistKind, normalize
from .tolerances import Tolerances

LOG2 = math.log(2.0)

POI_CAP_METHODS = ("PoiDigamma", "elementary", "PoiLog", "lerch")
DEL_CAP_METHODS = ("BinTrunc", "InvBin", "lerch", "elementary")


# -- shared options --

def tolerance_options(fn):
    for name, help_ in (("kkt-tol", "feasibility tolerance"),
                        ("q-tol", "maximizer tolerance in q"),
                        ("quad-abs", "absolute quadrature tolerance"),
                        ("tail-rel", "relative series tail tolerance")):
        fn = click.option(f"--{name}", type=float, default=None, help=help_)(fn)
    return fn


def units_option(fn):
    return click.option("--units", type=click.Choice(["bits", "nats"]), default="bits",
                        show_default=True)(fn)


def out_option(fn):
    return click.option("--out", default="-", show_default=True,
                        help="output path, '-' for standard output")(fn)


def _tol(kw):
    try:
        return Tolerances.from_env(tail_rel=kw.pop("tail_rel", None),
                                   quad_abs=kw.pop("quad_abs", None),
                                   q_tol=kw.pop("q_tol", None),
                                   kkt_tol=kw.pop("kkt_tol", None))
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc


def _scale(units):
    return 1.0 / LOG2 if units == "bits" else 1.0


def _check_open_unit(name, v):
    if v is None or not 0.0 < v < 1.0:
        raise click.BadParameter(f"{name} must lie in (0, 1)", param_hint=f"--{name}")


def parse_grid(spec):
    """'start:stop:step' (inclusive) -> list of floats without drift."""
    try:
        a, b, s = (Decimal(x) for x in spec.split(":"))
    except Exception as exc:
        raise click.BadParameter(f"grid must be start:stop:step, got {spec!r}") from exc
    if s <= 0 or b < a:
        raise click.BadParameter(f"empty or invalid grid {spec!r}")
    n = int((b - a) / s + Decimal("1e-9")) + 1
    return [float(a + i * s) for i in range(n)]


def fmt(v, places, rounding="half-even"):
    """Fixed-point text of ``v`` using its shortest repr as the decimal value."""
    mode = ROUND_HALF_EVEN if rounding == "half-even" else ROUND_DOWN
    q = Decimal(1).scaleb(-places)
    return str(Decimal(repr(float(v))).quantize(q, rounding=mode))


def _write_csv(out, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if out == "-":
        click.echo(text, nl=False)
        return
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        click.echo(f"error: cannot write {out}: {exc}", err=True)
        sys.exit(2)


def _g(v):
    return f"{v:.12g}"


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Capacity upper bounds for deletion and Poisson-repeat channels."""


# -- bound --

def resolve_method(channel, method, dist):
    """Map CLI method names to bounds methods."""
    if method == "explicit":
        if channel != "deletion":
            raise click.BadParameter("explicit bound exists for the deletion channel only",
                                     param_hint="--method")
        return "explicit"
    if method in ("lerch", "elementary"):
        return method
    if dist is not None:
        kind = DistKind.parse(dist)
        ok = DEL_CAP_METHODS[:2] if channel == "deletion" else ("PoiDigamma", "PoiLog")
        if kind.value not in ok:
            raise click.BadParameter(f"{kind.value} is not a {channel} output law",
                                     param_hint="--dist")
        if method == "trunc" and kind.value not in ("BinTrunc", "PoiDigamma"):
            raise click.BadParameter("--method trunc uses the truncated law",
                                     param_hint="--dist")
        return kind.value
    return "BinTrunc" if channel == "deletion" else "PoiDigamma"


@main.command("bound")
@click.option("--channel", type=click.Choice(["deletion", "poisson"]), required=True)
@click.option("--d", "d", type=float, required=True, help="deletion probability")
@click.option("--method", type=click.Choice(["trunc", "exact-dist", "lerch", "elementary",
                                             "explicit"]), default="trunc", show_default=True)
@click.option("--dist", default=None, help="override the law for exact-dist")
@units_option
@tolerance_options
def cmd_bound(channel, d, method, dist, units, **kw):
    """Single capacity upper bound at deletion probability d."""
    tol = _tol(kw)
    _check_open_unit("d", d)
    try:
        name = resolve_method(channel, method, dist)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--dist") from exc
    if name == "explicit":
        bits, cond = bounds.explicit_bound(d)
        v = bits if units == "bits" else bits * LOG2
        tag = "conditional" if cond else "unconditional"
        click.echo(f"{v:.6f} {units} ({tag})")
        return
    fn = bounds.deletion_bound if channel == "deletion" else bounds.poisson_repeat_bound
    r = fn(d, name, tol)
    sc = _scale(units)
    click.echo(f"{r.value_nats * sc:.6f} {units} q*={r.q_star:.6f} method={name} "
               f"slope={r.slope_nats * sc:.6f}")


# -- table --

def _poi_mean_row(q, tol):
    a = normalize(DistKind.POILOG, None, q, tol)
    b = normalize(DistKind.POIDIGAMMA, None, q, tol)
    return [a.ell, a.mu, b.ell, b.mu]


def _cap_row(which, d, tol):
    if which == "poi-cap":
        fn, methods = bounds.poisson_repeat_bound, POI_CAP_METHODS
    else:
        fn, methods = bounds.deletion_bound, DEL_CAP_METHODS
    out = []
    for m in methods:
        r = fn(d, m, tol)
        out += [r.slope_nats, r.q_star]
    return out


def _cell(args):
    which, x, tol = args
    if which == "poi-mean":
        return _poi_mean_row(x, tol)
    return _cap_row(which, x, tol)


def table_rows(which, grid, tol, units="bits", rounding="truncate", jobs=1):
    """Rows of the requested table as strings."""
    tasks = [(which, x, tol) for x in grid]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            cells = list(ex.map(_cell, tasks))
    else:
        cells = [_cell(t) for t in tasks]
    rows = []
    sc = _scale(units)
    for x, vals in zip(grid, cells):
        if which == "poi-mean":
            rows.append([fmt(x, 6)] + [fmt(v, 6, rounding) for v in vals])
        else:
            row = [fmt(x, 2)]
            for i, v in enumerate(vals):
                row.append(fmt(v * sc if i % 2 == 0 else v, 3, rounding))
            rows.append(row)
    return rows


TABLE_HEADERS = {
    "poi-mean": ["q", "ell1", "mu1", "ell2", "mu2"],
    "poi-cap": ["d", "c1", "q1", "c2", "q2", "c3", "q3", "c4", "q4"],
    "del-cap": ["d", "c1", "q1", "c2", "q2", "c3", "q3", "c4", "q4"],
}


@main.command("table")
@click.option("--which", type=click.Choice(sorted(TABLE_HEADERS)), required=True)
@click.option("--grid", default="0.01:0.99:0.01", show_default=True,
              help="start:stop:step over q (poi-mean) or d (cap tables)")
@click.option("--rounding", type=click.Choice(["truncate", "half-even"]), default="truncate",
              show_default=True, help="how printed digits are cut")
@click.option("--jobs", type=int, default=1, show_default=True)
@out_option
@units_option
@tolerance_options
def cmd_table(which, grid, rounding, jobs, out, units, **kw):
    """Reproduce the mean/cap tables as CSV."""
    tol = _tol(kw)
    xs = parse_grid(grid)
    if not all(0.0 < x < 1.0 for x in xs):
        raise click.BadParameter("grid points must lie in (0, 1)", param_hint="--grid")
    _write_csv(out, TABLE_HEADERS[which], table_rows(which, xs, tol, units, rounding, jobs))


# -- curve --

@main.command("curve")
@click.option("--what", type=click.Choice(["slope", "gap", "pmf", "estimates"]), required=True)
@click.option("--channel", type=click.Choice(["deletion", "poisson"]), default="deletion",
              show_default=True)
@click.option("--method", default=None,
              help="slope: BinTrunc|InvBin|lerch|elementary or PoiDigamma|PoiLog|lerch|elementary")
@click.option("--dist", default=None, help="output law for gap/pmf curves")
@click.option("--family", type=click.Choice(["poilog", "poidigamma", "invbin-lerch",
                                             "invbin-elementary"]), default=None)
@click.option("--p", "p", type=float, default=None, help="retention probability (deletion)")
@click.option("--d", "d", type=float, default=None,
              help="deletion probability (poisson); omit for the d -> 1 slope")
@click.option("--q", "q", type=float, default=0.5, show_default=True)
@click.option("--grid", default="0.01:0.99:0.01", show_default=True, help="q grid")
@click.option("--xmax", type=int, default=50, show_default=True)
@out_option
@units_option
@tolerance_options
def cmd_curve(what, channel, method, dist, family, p, d, q, grid, xmax, out, units, **kw):
    """Emit plot data as CSV."""
    tol = _tol(kw)
    sc = _scale(units)
    try:
        if what == "slope":
            header, rows = _slope_curve(channel, method, p, d, parse_grid(grid), tol, sc)
        elif what == "gap":
            header, rows = _gap_curve(channel, dist, p, d, q, xmax, tol)
        elif what == "pmf":
            header, rows = _pmf_curve(dist, p, q, xmax, tol)
        else:
            header, rows = _estimate_curve(family, p, parse_grid(grid))
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    _write_csv(out, header, rows)


def _slope_curve(channel, method, p, d, qs, tol, sc):
    if channel == "deletion":
        if p is None or not 0.0 <= p <= 1.0:
            raise ValueError("deletion slope needs --p in [0, 1]")
        f = bounds.deletion_slope_fn(method or "InvBin", p, tol)
    elif d is None:
        terms = bounds._poisson_terms(method or "PoiDigamma", tol, bounds.CONSTANTS)

        def f(x):
            num, mu = terms(x)
            return num / (mu + 1.0)
    else:
        if not 0.0 < d < 1.0:
            raise ValueError("--d must lie in (0, 1)")
        f = bounds.poisson_slope_fn(method or "PoiDigamma", d, tol)
    return ["q", "slope"], [[_g(x), _g(f(x) * sc)] for x in qs]


def _family_dist(dist, p, q, tol):
    kind = DistKind.parse(dist)
    return normalize(kind, p if kind.value in ("InvBin", "BinTrunc") else None, q, tol)


def _gap_curve(channel, dist, p, d, q, xmax, tol):
    if channel == "poisson":
        if d is None or not 0.0 < d < 1.0:
            raise ValueError("poisson gap needs --d in (0, 1)")
        rule = simchannel.RepetitionRule.poisson(-math.log(d))
        law = _family_dist(dist or "PoiDigamma", None, q, tol)
    else:
        if p is None or not 0.0 < p < 1.0:
            raise ValueError("deletion gap needs --p in (0, 1)")
        rule = simchannel.RepetitionRule.bernoulli(p)
        law = _family_dist(dist or "BinTrunc", p, q, tol)
    rows = []
    for x in range(xmax + 1):
        r = kktcheck.kkt_gap(rule, x, law, tol)
        pred = "" if r.predicted_gap is None else _g(r.predicted_gap)
        rows.append([x, _g(r.gap), pred])
    return ["x", "gap", "predicted_gap"], rows


def _pmf_curve(dist, p, q, ymax, tol):
    if dist is None:
        raise ValueError("pmf curve needs --dist")
    law = _family_dist(dist, p, q, tol)
    ys = np.arange(ymax + 1)
    return ["y", "pmf"], [[int(y), _g(v)] for y, v in zip(ys, law.pmf(ys))]


def _estimate_curve(family, p, qs):
    if family is None:
        raise ValueError("estimates curve needs --family")
    if family.startswith("invbin") and (p is None or not 0.0 <= p < 1.0):
        raise ValueError("invbin estimates need --p in [0, 1)")
    pick = {
        "poilog": lambda x: bounds.poilog_lerch_bracket(x),
        "poidigamma": lambda x: bounds.poidigamma_elementary_bracket(x),
        "invbin-lerch": lambda x: bounds.invbin_lerch_bracket(p, x),
        "invbin-elementary": lambda x: bounds.invbin_elementary_bracket(p, x),
    }[family]
    rows = []
    for x in qs:
        b = pick(x)
        rows.append([_g(x), _g(b.ell_lo), _g(b.ell_hi), _g(b.mu_lo), _g(b.mu_hi)])
    return ["q", "ell_lo", "ell_hi", "mu_lo", "mu_hi"], rows


# -- audit / sim --

@main.command("audit")
@click.option("--channel", type=click.Choice(["deletion", "poisson"]), required=True)
@click.option("--dist", required=True)
@click.option("--p", "p", type=float, default=None, help="retention probability (deletion)")
@click.option("--d", "d", type=float, default=None, help="deletion probability (poisson)")
@click.option("--q", "q", type=float, default=0.5, show_default=True)
@click.option("--xmax", type=int, default=300, show_default=True)
@click.option("--corrupt-q", type=float, default=None,
              help="multiply q by this factor after normalization (negative control)")
@tolerance_options
def cmd_audit(channel, dist, p, d, q, xmax, corrupt_q, **kw):
    """Dual-feasibility audit; exit code 1 on failure."""
    import dataclasses

    tol = _tol(kw)
    _check_open_unit("q", q)
    if xmax < 1:
        raise click.BadParameter("must be at least 1", param_hint="--xmax")
    try:
        if channel == "deletion":
            if p is None or not 0.0 < p <= 1.0:
                raise ValueError("deletion audit needs --p in (0, 1]")
            rule = simchannel.RepetitionRule.bernoulli(p)
        else:
            _check_open_unit("d", d)
            rule = simchannel.RepetitionRule.poisson(-math.log(d))
        law = _family_dist(dist, p, q, tol)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    nu = None
    if corrupt_q is not None:
        nu = (-math.log(law.q), -math.log(law.y0))
        law = dataclasses.replace(law, q=law.q * corrupt_q)
    rep = kktcheck.verify_dual_feasible(rule, law, xmax, tol, nu=nu)
    click.echo(rep.summary())
    sys.exit(0 if rep.passed else 1)


@main.command("sim")
@click.option("--rule", type=click.Choice(["bernoulli", "poisson"]), required=True)
@click.option("--param", type=float, required=True, help="p (bernoulli) or lambda (poisson)")
@click.option("--input", "bits", default="0001100001", show_default=True)
@click.option("--trials", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--k", type=int, default=simchannel.DEFAULT_K, show_default=True)
@click.option("--geo-p", type=float, default=None,
              help="override the geometric parameter of the pre-processor")
def cmd_sim(rule, param, bits, trials, seed, k, geo_p):
    """Equivalence test of the direct channel and the processing pipeline."""
    try:
        r = simchannel.RepetitionRule(rule, param)
        x = simchannel.parse_bits(bits)
        rep = simchannel.equivalence_test(r, x, trials, seed, k=k, geo_p=geo_p)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(rep.summary())
    sys.exit(0 if rep.passed else 1)


if __name__ == "__main__":
    main()
