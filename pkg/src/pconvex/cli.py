"""Command line front end: ``pconvex <group> <command> [options]``.

Every report is a JSON object ``{"config", "version", "seed", "result",
"ok"}``; curvature and margin tables can also be written as CSV.  Exit
status: 0 success, 1 an ``--assert`` check failed (or a numerical routine
gave up), 2 malformed input or usage error.
"""
import argparse
import csv
import io
import json
import sys

import numpy as np

from . import __version__
from .exceptions import PConvexError
from .spectra import PDegree, PlaneFrame, SymMatrix

# Documented defaults; every report echoes the effective values.
DEFAULTS = {
    "tol": 1e-8,
    "seed": 0,
    "samples": 1000,
    "riesz_defect_tol": 1e-9,
    "restriction_tol": 2e-4,
    "pattern_tol": 1e-6,
    "oracle_planes": 200,
    "oracle_t_step": 1e-3,
    "hull_res": 64,
    "corpus_size": 500,
}


class UsageError(Exception):
    pass


# -- input helpers ---------------------------------------------------------------

def _load_json(arg):
    """A JSON file path, or an inline JSON document."""
    text = arg.strip()
    if text.startswith(("{", "[")):
        return json.loads(text)
    with open(arg) as fh:
        return json.load(fh)


def load_matrix(arg):
    obj = _load_json(arg)
    try:
        return SymMatrix.from_upper(int(obj["n"]), obj["upper"])
    except (KeyError, TypeError) as exc:
        raise UsageError(f"matrix file needs 'n' and 'upper': {exc}") from exc


def _vector(text):
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise UsageError(f"bad vector {text!r}") from exc


def _floats(text):
    return [float(v) for v in text.split(",")]


def _degree(p, n):
    try:
        return PDegree(p, n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _box(text, n):
    lo, hi = _floats(text) if text else (-1.0, 1.0)
    return np.tile([lo, hi], (n, 1))


def _inset(box, frac):
    # shrink the box about its centre, keeping finite-difference stencils inside
    mid, half = box.mean(axis=1), 0.5 * (box[:, 1] - box[:, 0])
    return mid - frac * half, mid + frac * half


def _field(spec, n, box):
    from .fields import Polynomial, builtin_field, polynomial_field

    if spec.startswith("poly:"):
        return polynomial_field(Polynomial.from_json(_load_json(spec[5:])), box)
    return builtin_field(spec, n, box)


def _surface(spec):
    from .hypersurface import parse_surface

    return parse_surface(spec, poly_loader=_load_json)


def _verdict(v):
    return {"status": v.status, "margin": v.margin, "tol": v.tol, "note": v.note}


# -- commands ----------------------------------------------------------------------

def cmd_cone_check(a):
    from .pcone import BOUNDARY, INTERIOR, OUTSIDE, derivation_min_eig, grassmann_trace_min, is_p_positive

    A = load_matrix(a.matrix)
    deg = _degree(a.p, A.n)
    eig = is_p_positive(A, deg, a.tol)
    result = {"n": A.n, "p": deg.p, "eigen_sum": _verdict(eig)}
    consistent = True
    if deg.is_integer:
        d = derivation_min_eig(A, deg.bar_p)
        scale = A.scale()
        status = INTERIOR if d > a.tol * scale else OUTSIDE if d < -a.tol * scale else BOUNDARY
        result["derivation"] = {"status": status, "min_eig": d}
        consistent &= status == eig.status
        g = grassmann_trace_min(A, deg.bar_p, a.samples, a.seed)
        bound_ok = g >= eig.margin - 1e-10 * scale
        result["grassmann"] = {"min_trace": g, "samples": a.samples, "upper_bound_holds": bool(bound_ok)}
        consistent &= bound_ok
    else:
        result["derivation"] = None
        result["grassmann"] = None
    result["consensus"] = eig.status if consistent else "inconsistent"
    return result, consistent and eig.in_cone


def cmd_cone_derivation(a):
    from .pcone import derivation_min_eig, derivation_operator

    A = load_matrix(a.matrix)
    p = int(a.p)
    if p != a.p or not 1 <= p <= A.n:
        raise UsageError(f"derivation needs an integer 1 <= p <= {A.n}")
    D = derivation_operator(A, p)
    return {"n": A.n, "p": p, "index_map": [list(I) for I in D.index_map],
            "entries": D.entries.tolist(), "min_eig": derivation_min_eig(A, p)}, True


def cmd_cone_riesz_char(a):
    from .pcone import p_cone_member, riesz_characteristic

    _degree(a.q, a.n)
    value = riesz_characteristic(p_cone_member(a.q, a.tol), a.n, tol=1e-9)
    return {"n": a.n, "q": a.q, "characteristic": value}, abs(value - a.q) <= 1e-6


def cmd_riesz_verify(a):
    from .pcone import OUTSIDE, is_p_positive
    from .riesz import RieszKernel, p_harmonic_defect, riesz_hessian

    deg = _degree(a.p, a.n)
    k = RieszKernel(deg.p, a.n)
    rng = np.random.default_rng(a.seed)
    X = rng.standard_normal((a.samples, a.n))
    X *= rng.uniform(0.5, 4.0, (a.samples, 1)) / np.linalg.norm(X, axis=1, keepdims=True)
    H = [riesz_hessian(k, x) for x in X]
    defects = np.array([p_harmonic_defect(h, deg) for h in H])
    margins = [is_p_positive(h, deg, a.tol) for h in H]
    rows = [{"degree": deg.p, "max_abs_defect": float(np.max(np.abs(defects))),
             "min_margin": float(min(v.margin for v in margins)),
             "outside": int(sum(v.status == OUTSIDE for v in margins))}]
    ok = rows[0]["max_abs_defect"] <= DEFAULTS["riesz_defect_tol"] and rows[0]["outside"] == 0
    for q in a.q or []:
        dq = _degree(q, a.n)
        vq = [is_p_positive(h, dq, a.tol) for h in H]
        rows.append({"degree": dq.p, "min_margin": float(min(v.margin for v in vq)),
                     "outside": int(sum(v.status == OUTSIDE for v in vq)),
                     "expected_outside": dq.p < deg.p})
    return {"p": deg.p, "n": a.n, "samples": a.samples, "rows": rows}, ok


def cmd_field_analyze(a):
    from .fields import psh_report
    from .pcone import OUTSIDE

    box = _box(a.box, a.n)
    f = _field(a.field, a.n, box)
    deg = _degree(a.p, a.n)
    rng = np.random.default_rng(a.seed)
    lo, hi = _inset(box, 0.9)
    pts = rng.uniform(lo, hi, (a.samples, a.n))
    verdicts = psh_report(f, pts, deg)
    counts = {}
    for v in verdicts:
        counts[v.status] = counts.get(v.status, 0) + 1
    margins = [v.margin for v in verdicts if np.isfinite(v.margin)]
    return {"field": a.field, "p": deg.p, "samples": a.samples, "counts": counts,
            "min_margin": min(margins) if margins else None}, counts.get(OUTSIDE, 0) == 0


def cmd_field_restrict(a):
    from .fields import restriction_laplacian

    box = _box(a.box, a.n)
    f = _field(a.field, a.n, box)
    k = int(a.p)
    if k != a.p or not 1 <= k <= a.n:
        raise UsageError("restriction needs an integer plane dimension 1 <= p <= n")
    rng = np.random.default_rng(a.seed)
    lo, hi = _inset(box, 0.8)
    vals = []
    for _ in range(a.samples):
        base = rng.uniform(lo, hi)
        vals.append(restriction_laplacian(f, (base, PlaneFrame.random(a.n, k, rng))))
    vals = np.array(vals)
    tol = DEFAULTS["restriction_tol"]
    return {"field": a.field, "p": k, "planes": a.samples, "min_laplacian": float(vals.min()),
            "below_tol": int(np.sum(vals < -tol))}, bool(vals.min() >= -tol)


def _profile_json(prof):
    return {"point": prof.point.tolist(), "kappas": prof.kappas.tolist()}


def cmd_surface_analyze(a):
    from .hypersurface import is_boundary_p_convex, principal_curvatures

    s = _surface(a.surface)
    x = _vector(a.point)
    prof = principal_curvatures(s, x)
    degrees = a.p if a.p else list(range(1, s.n))
    verdicts = {f"{p:g}": _verdict(is_boundary_p_convex(s, x, p, a.tol)) for p in degrees}
    ok = all(v["status"] != "outside" for v in verdicts.values())
    result = dict(_profile_json(prof), surface=a.surface, verdicts=verdicts)
    if a.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(s.n)] + [f"kappa{i + 1}" for i in range(s.n - 1)]
                   + [f"p={k}" for k in verdicts])
        w.writerow([f"{v:.12g}" for v in x] + [f"{k:.12g}" for k in prof.kappas]
                   + [v["status"] for v in verdicts.values()])
        result["csv"] = buf.getvalue()
    return result, ok


def cmd_surface_parallel(a):
    from .hypersurface import parallel_curvatures, principal_curvatures

    s = _surface(a.surface)
    prof = principal_curvatures(s, _vector(a.point))
    moved = parallel_curvatures(prof, a.delta)
    return {"surface": a.surface, "delta": a.delta, "foot": _profile_json(prof),
            "parallel": _profile_json(moved)}, True


def cmd_surface_neglog(a):
    from .hypersurface import neg_log_dist_trace

    s = _surface(a.surface)
    x = _vector(a.point)
    k = int(a.p[0]) if a.p else 2
    rng = np.random.default_rng(a.seed)
    rows = []
    for _ in range(a.samples):
        V = PlaneFrame.random(s.n, k, rng)
        f, d = neg_log_dist_trace(s, x, V)
        rows.append({"plane": V.vectors.tolist(), "formula": f, "fd": d,
                     "rel_diff": abs(f - d) / max(1.0, abs(f))})
    worst = max(r["rel_diff"] for r in rows)
    return {"surface": a.surface, "point": x.tolist(), "p": k, "rows": rows,
            "max_rel_diff": worst}, worst <= 1e-4


def _ray_json(r):
    out = {"label": r.label, "spectrum": r.spectrum.tolist(), "margin": r.margin}
    if r.witness is not None:
        out["witness"] = {"B": r.witness[0].upper, "C": r.witness[1].upper}
    return out


def cmd_extreme_classify(a):
    from .extremal import classify_psd_ray, classify_ray, verify_witness

    A = load_matrix(a.matrix)
    deg = _degree(a.p, A.n)
    if deg.p == 1.0:
        r = classify_psd_ray(A, DEFAULTS["pattern_tol"], a.tol)
    elif deg.p >= A.n:
        raise UsageError("P_n is a half-space: it has no extreme rays")
    else:
        r = classify_ray(A, deg, DEFAULTS["pattern_tol"], a.tol)
    result = _ray_json(r)
    ok = r.label != "outside"
    if r.witness is not None:
        good, info = verify_witness(A, r.witness, deg.p)
        result["witness_check"] = dict(info, ok=bool(good))
        ok &= good
    return result, ok


def cmd_extreme_oracle(a):
    from .extremal import face_dimension_oracle

    A = load_matrix(a.matrix)
    p = int(a.p)
    if p != a.p:
        raise UsageError("the face oracle runs at integer p only")
    est = face_dimension_oracle(A, p, a.samples, DEFAULTS["oracle_t_step"], a.tol, a.seed)
    return {"dimension": est.dimension, "extreme": est.dimension == 1,
            "planes_used": est.planes_used, "nullity": est.nullity,
            "survivors": [B.upper for B in est.survivors]}, True


def _grid(a, n):
    from .hull import Grid

    if a.grid:
        return Grid.from_json(_load_json(a.grid))
    return Grid(np.tile([-1.0, 1.0], (n, 1)), (DEFAULTS["hull_res"],) * n)


def cmd_hull_compute(a):
    from .hull import compute_hull, default_dictionary, load_points

    K = load_points(_load_json(a.points))
    grid = _grid(a, K.shape[1])
    p = a.p[0] if a.p else 1.0
    d = default_dictionary(p, grid.box, a.pole_count, a.seed)
    res = compute_hull(K, grid, d)
    result = res.to_json()
    if a.format == "csv":
        result["csv"] = res.margins_csv()
    return result, True


def cmd_hull_nesting(a):
    from .hull import hull_nesting_check, load_points, nested_dictionaries

    K = load_points(_load_json(a.points))
    grid = _grid(a, K.shape[1])
    p_list = a.p or [1.0]
    rep, _ = hull_nesting_check(K, grid, p_list, nested_dictionaries(p_list, grid.box, a.pole_count, a.seed))
    return rep.to_json(), rep.ok


def cmd_corpus_run(a):
    from .extremal import classify_ray, face_dimension_oracle, labeled_corpus, verify_witness

    cases = labeled_corpus(a.size, a.seed)
    failures = []
    for k, (A, p, label, family) in enumerate(cases):
        r = classify_ray(A, p)
        est = face_dimension_oracle(A, p, seed=a.seed + k)
        good = r.label == label and (est.dimension == 1) == r.extreme
        if r.witness is not None:
            good &= verify_witness(A, r.witness, p)[0]
        if not good:
            failures.append({"case": k, "family": family, "n": A.n, "p": p, "expected": label,
                             "label": r.label, "oracle_dimension": est.dimension})
    rate = len(failures) / len(cases)
    return {"size": len(cases), "failures": failures, "failure_rate": rate}, rate < 0.01


# -- parser ------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="pconvex", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    groups = parser.add_subparsers(dest="group", required=True)

    def common(sp, p_type=float, p_multi=False):
        if p_multi:
            sp.add_argument("--p", type=lambda s: _floats(s), default=None,
                            help="degree(s), comma separated")
        else:
            sp.add_argument("--p", type=p_type, required=True)
        sp.add_argument("--tol", type=float, default=DEFAULTS["tol"])
        sp.add_argument("--seed", type=int, default=DEFAULTS["seed"])
        sp.add_argument("--samples", type=int, default=DEFAULTS["samples"])
        sp.add_argument("--out", default=None, help="write the report here instead of stdout")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--assert", dest="assert_", action="store_true",
                        help="exit 1 when the check fails")

    def add(group, name, func):
        sp = group.add_parser(name)
        sp.set_defaults(func=func, command=name)
        return sp

    cone = groups.add_parser("cone").add_subparsers(dest="command", required=True)
    sp = add(cone, "check", cmd_cone_check)
    sp.add_argument("--matrix", required=True)
    common(sp)
    sp = add(cone, "derivation", cmd_cone_derivation)
    sp.add_argument("--matrix", required=True)
    common(sp)
    sp = add(cone, "riesz-char", cmd_cone_riesz_char)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--q", type=float, required=True)
    common(sp, p_multi=True)

    riesz = groups.add_parser("riesz").add_subparsers(dest="command", required=True)
    sp = add(riesz, "verify", cmd_riesz_verify)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--q", type=_floats, default=None, help="extra degrees to test")
    common(sp)

    field = groups.add_parser("field").add_subparsers(dest="command", required=True)
    for name, func in (("analyze", cmd_field_analyze), ("restrict", cmd_field_restrict)):
        sp = add(field, name, func)
        sp.add_argument("--field", required=True)
        sp.add_argument("--n", type=int, required=True)
        sp.add_argument("--box", default=None, help="lo,hi applied to every axis")
        common(sp)

    surface = groups.add_parser("surface").add_subparsers(dest="command", required=True)
    sp = add(surface, "analyze", cmd_surface_analyze)
    sp.add_argument("--surface", required=True)
    sp.add_argument("--point", required=True)
    common(sp, p_multi=True)
    sp = add(surface, "parallel", cmd_surface_parallel)
    sp.add_argument("--surface", required=True)
    sp.add_argument("--point", required=True)
    sp.add_argument("--delta", type=float, required=True)
    common(sp, p_multi=True)
    sp = add(surface, "neglog", cmd_surface_neglog)
    sp.add_argument("--surface", required=True)
    sp.add_argument("--point", required=True)
    common(sp, p_multi=True)
    sp.set_defaults(samples=10)

    extreme = groups.add_parser("extreme").add_subparsers(dest="command", required=True)
    sp = add(extreme, "classify", cmd_extreme_classify)
    sp.add_argument("--matrix", required=True)
    common(sp)
    sp = add(extreme, "oracle", cmd_extreme_oracle)
    sp.add_argument("--matrix", required=True)
    common(sp)
    sp.set_defaults(samples=DEFAULTS["oracle_planes"])

    hull = groups.add_parser("hull").add_subparsers(dest="command", required=True)
    for name, func in (("compute", cmd_hull_compute), ("nesting", cmd_hull_nesting)):
        sp = add(hull, name, func)
        sp.add_argument("--points", required=True)
        sp.add_argument("--grid", default=None)
        sp.add_argument("--pole-count", type=int, default=None)
        common(sp, p_multi=True)

    corpus = groups.add_parser("corpus").add_subparsers(dest="command", required=True)
    sp = add(corpus, "run", cmd_corpus_run)
    sp.add_argument("--size", type=int, default=DEFAULTS["corpus_size"])
    common(sp, p_multi=True)
    return parser


def _config(args):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["assert"] = cfg.pop("assert_", False)
    return cfg


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        result, ok = args.func(args)
    except (UsageError, ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"pconvex: error: {exc}", file=sys.stderr)
        return 2
    except PConvexError as exc:
        print(f"pconvex: numerical failure: {exc}", file=sys.stderr)
        return 1
    report = {"config": _config(args), "version": __version__, "seed": args.seed,
              "defaults": DEFAULTS, "ok": bool(ok), "result": result}
    text = result.pop("csv") if args.format == "csv" and "csv" in result else \
        json.dumps(report, indent=2, sort_keys=True, default=float)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)
    return 1 if args.assert_ and not ok else 0


if __name__ == "__main__":
    sys.exit(main())
