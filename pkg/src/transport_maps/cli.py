"""Command-line driver: runs builtin scenarios and writes JSON axiom reports.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
3 numerical failure (singular matrix, integration failure, ...).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Optional

import numpy as np

from . import sphere
from .base import ParamDomain, SmoothMap, great_circle, identity_map, latitude_circle, polynomial_map
from .composite import (
    check_gauge_law,
    factorize,
    gauge_composite,
    reanchor_gauge,
    reconstruct,
    restricted_transports,
)
from .core import (
    AxiomReport,
    FactorFamily,
    FibreModel,
    Section,
    TransportedSection,
    _Worst,
    check_binary_consistency,
    check_gauge_invariance,
    check_groupoid,
    check_inverse,
    check_linearity,
    from_factor_maps,
)
from .density import (
    TensorDensity,
    density_derivative,
    density_derivative_via_tensor,
    tensor_derivation_expansion,
)
from .errors import DomainError, NumericError
from .generators import (
    SmoothMatrixField,
    random_composite_transport,
    random_factor_transport,
    random_hermitian_metric_field,
    well_conditioned,
)
from .io import dumps, grid_points, matrix_from_json, matrix_to_json
from .linear import (
    Frame,
    LinearTransportRep,
    check_frame_covariance,
    check_gamma_difference,
    check_gamma_sign,
    coordinate_frame,
    curvature,
    derive_section,
    gamma_from_H,
    rep_from_gamma,
    torsion,
    transport_from_gamma,
)
from .metric import HermitianMetric, metric_from_transport, roundtrip_error, transport_from_metric
from .morphisms import (
    BundleMorphism,
    binary_op_as_morphism,
    build_consistent_morphism,
    check_consistency,
    check_prop_5_2,
    conjugate_anchor,
    natural_transport,
)

BOX2 = ParamDomain(2, ((-1.0, 1.0), (-1.0, 1.0)))


@dataclass
class RunConfig:
    command: str
    scenario: str
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    output_path: Optional[str] = None
    grid: int = 5
    colatitude: float = np.pi / 3
    signature: tuple = (2, 0)
    input_path: Optional[str] = None


class Context:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.seed = cfg.seed
        self.rng = np.random.default_rng(cfg.seed)
        self.metadata = {}

    def tol(self, name, default):
        return float(self.cfg.tolerances.get(name, default))


def _merge(reports, name, tol):
    """Worst of several reports of the same check."""
    worst = max(reports, key=lambda r: r.max_residual)
    return AxiomReport(name, tol, worst.max_residual, worst.worst_witness,
                       bool(worst.max_residual <= tol), {"runs": len(reports)})


def _scalar_report(name, residual, tol, **details):
    return AxiomReport(name, tol, float(residual), {"l": None, "m": None, "n": None, "vector": None},
                       bool(residual <= tol), details)


# -- scenarios --------------------------------------------------------------


def sc_flat_groupoid(ctx):
    t, _ = random_factor_transport(ctx.rng, 3, True, BOX2)
    return [
        check_groupoid(t, 200, ctx.seed, ctx.tol("eq2.2+eq2.3", 1e-12)),
        check_inverse(t, 100, ctx.seed, ctx.tol("inverse", 1e-12)),
        check_linearity(t, 50, ctx.seed, ctx.tol("eq2.10", 1e-12)),
    ]


def sc_gauge_invariance(ctx):
    rng = ctx.rng
    tol = ctx.tol("eq2.5", 1e-12)
    runs = []
    for i in range(20):
        rank = 1 + i % 4
        cplx = bool(i % 2)
        fam = FactorFamily(identity_map(BOX2), SmoothMatrixField(rng, rank, 2, cplx), FibreModel(rank, "complex" if cplx else "real"))
        runs.append(check_gauge_invariance(fam, well_conditioned(rng, rank, cplx), 50, ctx.seed + i, tol))
    t = random_composite_transport(rng, 3)
    old, new = ("a", np.zeros(2)), ("c", np.array([0.4, -0.3]))
    f, g = factorize(t, old), factorize(t, new)
    law = check_gauge_law(f, g, *reanchor_gauge(t, old, new), 50, ctx.seed, ctx.tol("eq3.9-3.11", 1e-12))
    PG = {a: well_conditioned(rng, 3) for a in ("a", "b", "c")}
    PHf = SmoothMatrixField(rng, 3, 2)
    gauged = reconstruct(gauge_composite(f, lambda a: PG[a], PHf, well_conditioned(rng, 3)))
    w = _Worst()
    for p, q in zip(t.domain.sample(50, ctx.seed), t.domain.sample(50, ctx.seed + 1)):
        w.update(float(np.linalg.norm(gauged.matrix(p, q) - t.matrix(p, q))), l=p[1], m=q[1])
    return [_merge(runs, "eq2.5", tol), law, w.report("eq3.9-invariance", ctx.tol("eq3.9-invariance", 1e-12))]


def sc_composite_factorize(ctx):
    t = random_composite_transport(ctx.rng, 3)
    anchor = ("a", np.array([0.2, -0.1]))
    f = factorize(t, anchor)
    r = reconstruct(f)
    w = _Worst()
    for p, q in zip(t.domain.sample(100, ctx.seed), t.domain.sample(100, ctx.seed + 1)):
        w.update(float(np.linalg.norm(r.matrix(p, q) - t.matrix(p, q))), l=p[1], m=q[1])
    if ctx.cfg.command == "factorize":
        ctx.metadata["factors"] = f.to_table(ctx.cfg.grid)
    return [
        f.check_relations(50, ctx.seed, ctx.tol("eq3.8", 1e-12)),
        w.report("prop3.1", ctx.tol("prop3.1", 1e-12)),
        restricted_transports(f).check_commutation(100, ctx.seed, ctx.tol("eq3.1", 1e-12)),
    ]


def sc_sphere_holonomy(ctx):
    th = ctx.cfg.colatitude
    lc = sphere.levi_civita()
    H = transport_from_gamma(lc.along(latitude_circle(th)), [0.0], [2 * np.pi])
    angle, expected = sphere.holonomy_angle(H, th), sphere.expected_holonomy(th)
    diff = abs((angle - expected + np.pi) % (2 * np.pi) - np.pi)
    ctx.metadata.update(colatitude=th, angle=angle, expected=expected, holonomy=matrix_to_json(H))
    kappa = great_circle(0.7)
    exact = lc.along(kappa)
    rep = rep_from_gamma(kappa, exact)
    recovered = gamma_from_H(rep, h=1e-5, verify=False)
    w = _Worst()
    for l in kappa.domain.sample(ctx.cfg.grid, ctx.seed, margin=0.01):
        w.update(float(np.max(np.abs(recovered(l) - exact(l)))), l=l)
    return [
        _scalar_report("holonomy", diff, ctx.tol("holonomy", 1e-6)),
        w.report("christoffel", ctx.tol("christoffel", 1e-5)),
        check_gamma_sign(rep, recovered, ctx.cfg.grid, ctx.seed, 1e-5, ctx.tol("eq4.6", 1e-5)),
    ]


def _sphere_patch():
    dom = ParamDomain(2, ((0.6, 2.5), (-1.0, 1.0)))
    return SmoothMap(dom, sphere.CHART, lambda p: np.array(p, dtype=float), lambda p: np.eye(2), name="patch")


def _random_vector_field(rng, n=2):
    c = rng.uniform(-1, 1, size=(n, 3))

    def comp(x):
        return np.array([c[i, 0] * np.sin(x[0] + c[i, 1]) + c[i, 2] * np.cos(x[1]) * x[0] for i in range(n)])

    return Section(FibreModel(n), comp)


def sc_sphere_curvature(ctx):
    eta = _sphere_patch()
    gamma = sphere.levi_civita().along(eta)
    sigma = _random_vector_field(ctx.rng)
    w = _Worst()
    for p in grid_points(eta.domain, ctx.cfg.grid):
        R = curvature(gamma, eta, sigma, p[:1], p[1:], 0, 0)
        expected = np.einsum("ijkl,j,k,l->i", sphere.riemann(p), sigma(p), [1.0, 0.0], [0.0, 1.0])
        w.update(float(np.max(np.abs(R - expected))), l=p[:1], m=p[1:])
    flat_t, _ = random_factor_transport(ctx.rng, 2, False, BOX2)
    rep = LinearTransportRep.from_transport(flat_t)
    fg = gamma_from_H(rep, verify=False)
    s2 = _random_vector_field(ctx.rng)
    f = _Worst()
    for p in BOX2.sample(ctx.cfg.grid, ctx.seed, margin=0.05):
        f.update(float(np.max(np.abs(curvature(fg, flat_t.map, s2, p[:1], p[1:], 0, 0)))), l=p[:1], m=p[1:])
    return [w.report("eq4.10", ctx.tol("eq4.10", 1e-3)), f.report("flatness", ctx.tol("flatness", 1e-3))]


def torsion_test_map():
    terms = [[(1.2, (0, 0)), (0.3, (1, 0)), (0.2, (0, 2))], [(1.0, (0, 1)), (0.1, (1, 1))]]
    return polynomial_map(terms, BOX2, sphere.CHART)


def sc_sphere_torsion(ctx):
    eta = torsion_test_map()
    gamma = sphere.levi_civita().along(eta)
    w = _Worst()
    for p in eta.domain.sample(ctx.cfg.grid * ctx.cfg.grid, ctx.seed, margin=0.05):
        w.update(float(np.max(np.abs(torsion(gamma, eta, p[:1], p[1:], 0, 0)))), l=p[:1], m=p[1:])
    return [w.report("eq4.9", ctx.tol("eq4.9", 1e-4))]


def sc_transported_derivation(ctx):
    t, _ = random_factor_transport(ctx.rng, 3, False, BOX2)
    rep = LinearTransportRep.from_transport(t)
    gamma = gamma_from_H(rep, verify=False)
    anchor = np.array([0.1, -0.2])
    sec = TransportedSection(t, t.fibre.random_vector(ctx.rng), anchor)
    w = _Worst()
    for l in BOX2.sample(10 * ctx.cfg.grid, ctx.seed, margin=0.01):
        for a in range(2):
            w.update(float(np.linalg.norm(derive_section(rep, sec, l, a, gamma=gamma))), l=l)
    return [
        w.report("eq4.4", ctx.tol("eq4.4", 1e-5)),
        check_gamma_sign(rep, gamma, ctx.cfg.grid, ctx.seed, tol=ctx.tol("eq4.6", 1e-5)),
    ]


def sc_frame_covariance(ctx):
    rng = ctx.rng
    t1, _ = random_factor_transport(rng, 2, False, BOX2)
    t2, _ = random_factor_transport(rng, 2, False, BOX2)
    A = SmoothMatrixField(rng, 2, 2)
    r1, r2 = LinearTransportRep.from_transport(t1), LinearTransportRep.from_transport(t2)
    return [
        check_frame_covariance(r1, A, ctx.cfg.grid, ctx.seed, dA=A.derivative, tol=ctx.tol("eq4.8", 1e-5)),
        check_gamma_difference(r1, r2, A, ctx.cfg.grid, ctx.seed, tol=ctx.tol("eq4.8-difference", 1e-5)),
    ]


def rotation_transport(rng, domain=BOX2):
    """Flat transport by plane rotations: preserves the dot product."""
    c = rng.uniform(-1, 1, size=domain.k)

    def R(l):
        a = float(c @ np.asarray(l))
        return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])

    return from_factor_maps(FactorFamily(identity_map(domain), R, FibreModel(2)))


def sc_morphism_consistency(ctx):
    rng = ctx.rng
    t1, _ = random_factor_transport(rng, 2, False, BOX2)
    t2, _ = random_factor_transport(rng, 3, False, BOX2)
    C = rng.standard_normal((3, 2))
    l0, l1 = np.array([0.1, 0.2]), np.array([-0.5, 0.3])
    m = build_consistent_morphism(t1, t2, l0, C)
    m1 = build_consistent_morphism(t1, t2, l1, conjugate_anchor(t1, t2, l0, C, l1))
    w = _Worst()
    for l in BOX2.sample(50, ctx.seed):
        w.update(float(np.linalg.norm(m.fibre_map(t1.map, l) - m1.fibre_map(t1.map, l))), l=l)
    bad = BundleMorphism(lambda x: x, lambda x: np.outer([1.0, x[0], x[1]], [1.0, x[0] ** 2]))
    rot = rotation_transport(rng)
    dot = lambda x, u, v: float(u @ v)
    direct = check_binary_consistency(rot, dot, 50, ctx.seed, ctx.tol("eq2.9", 1e-12))
    via = binary_op_as_morphism(dot, rot, 50, ctx.seed, ctx.tol("eq2.9-via-5.1", 1e-12))
    same = direct.max_residual == via.max_residual and direct.worst_witness == via.worst_witness
    eq_tol = ctx.tol("eq5.11", 1e-9)
    good, wrong = check_prop_5_2(m, t1, t2, 50, ctx.seed, eq_tol), check_prop_5_2(bad, t1, t2, 50, ctx.seed, eq_tol)
    both = AxiomReport("eq5.11", eq_tol, max(good.max_residual, 0.0), good.worst_witness,
                       good.passed and wrong.passed,
                       {"consistent_pair": good.details, "inconsistent_pair": wrong.details})
    return [
        check_consistency(m, t1, t2, 50, ctx.seed, ctx.tol("eq5.1", 1e-12)),
        w.report("eq5.6", ctx.tol("eq5.6", 1e-12)),
        both,
        check_groupoid(natural_transport(t1, t2), 200, ctx.seed, ctx.tol("eq2.2+eq2.3", 1e-12)),
        direct,
        via,
        _scalar_report("two-paths", 0.0 if same else 1.0, 0.0),
    ]


def _metric_from_table(path):
    with open(path) as fh:
        data = json.load(fh)
    pts = np.asarray(data["points"], dtype=float)
    mats = [matrix_from_json(m) for m in data["G"]]

    def G(x):
        i = int(np.argmin(np.linalg.norm(pts - np.asarray(x), axis=1)))
        return mats[i]

    return HermitianMetric(G, tuple(data["signature"])), list(pts)


def sc_metric_roundtrip(ctx):
    sig = tuple(ctx.cfg.signature)
    dom = BOX2.as_chart("box")
    errs, herms, laws = [], [], []
    if ctx.cfg.input_path:
        g, pts = _metric_from_table(ctx.cfg.input_path)
        fields = [(g, pts)]
        sig = g.signature
    else:
        pts = list(grid_points(dom, ctx.cfg.grid))
        fields = [(HermitianMetric(random_hermitian_metric_field(ctx.rng, sum(sig), sig, 2), sig, dom), pts) for _ in range(10)]
    for g, p in fields:
        e, h = roundtrip_error(g, p)
        errs.append(e)
        herms.append(h)
    t = transport_from_metric(fields[-1][0], points=fields[-1][1])
    if t.domain is not None:
        law = check_groupoid(t.as_transport(), 100, ctx.seed, ctx.tol("eq6.6-6.9", 1e-12))
        law.check = "eq6.6-6.9"
        laws.append(law)
    out = metric_from_transport(t, fields[-1][1])
    ctx.metadata.update(
        signature=list(sig),
        table=[{"x": list(map(float, x)), "G_in": matrix_to_json(fields[-1][0](x)), "G_out": matrix_to_json(out(x))}
               for x in fields[-1][1]],
    )
    return [
        _scalar_report("thm6.1", max(errs), ctx.tol("thm6.1", 1e-9), fields=len(fields)),
        _scalar_report("hermiticity", max(herms), ctx.tol("hermiticity", 1e-10)),
    ] + laws


def sc_density_derivative(ctx):
    kappa = great_circle(0.7)
    rep = LinearTransportRep(kappa, None, gamma=sphere.levi_civita().along(kappa))
    c = ctx.rng.uniform(0.5, 1.5, size=2)
    dens = lambda x: 2.0 + c[0] * np.sin(x[0]) * np.cos(c[1] * x[1])
    grad = lambda x: np.array([c[0] * np.cos(x[0]) * np.cos(c[1] * x[1]), -c[0] * c[1] * np.sin(x[0]) * np.sin(c[1] * x[1])])
    d = TensorDensity((0, 0), 1.0, dens, coordinate_frame(2))
    scalar = _Worst()
    pts = kappa.domain.sample(10 * ctx.cfg.grid, ctx.seed, margin=0.02)
    for l in pts:
        x, xd = kappa.eval(l), kappa.jacobian(l)[:, 0]
        classical = grad(x) @ xd - dens(x) * (sphere.log_sqrt_det_gradient(x) @ xd)
        for sign in ("plus", "minus"):
            scalar.update(float(abs(density_derivative(d, rep, l, 0, sign) - classical)), l=l)
    E0 = Frame(lambda x: np.array([[1 + 0.1 * x[0], 0.2], [0.3 * np.sin(x[1]), 1.0]]), "E0")
    E1 = Frame(lambda x: np.array([[2.0, np.cos(x[0])], [0.1, 1 + x[0] ** 2]]), "E1")
    T = TensorDensity((1, 1), 0.7, lambda x: np.array([[x[0], x[1] ** 2], [np.sin(x[1]), 1.0]]), E0, E1)
    sides, expansion = _Worst(), _Worst()
    for l in pts:
        for sign in ("plus", "minus"):
            r = density_derivative(T, rep, l, 0, sign)
            sides.update(float(np.max(np.abs(r - density_derivative_via_tensor(T, rep, l, 0, sign)))), l=l)
        direct, expanded = tensor_derivation_expansion(T, rep, l, 0)
        expansion.update(float(np.max(np.abs(direct - expanded))), l=l)
    return [
        scalar.report("scalar-density", ctx.tol("scalar-density", 1e-5)),
        sides.report("eq6.13", ctx.tol("eq6.13", 1e-4)),
        expansion.report("eq6.12", ctx.tol("eq6.12", 1e-4)),
    ]


@dataclass(frozen=True)
class Scenario:
    name: str
    location: str
    run: Callable
    summary: str


SCENARIOS = {
    s.name: s
    for s in [
        Scenario("flat-groupoid", "Eqs 2.2-2.3", sc_flat_groupoid, "composition and identity laws of a factor-map transport"),
        Scenario("gauge-invariance", "Eq 2.5, Eqs 3.9-3.11", sc_gauge_invariance, "gauge freedom of factor maps"),
        Scenario("composite-factorize", "Prop 3.1", sc_composite_factorize, "factorize/reconstruct over A x M"),
        Scenario("sphere-holonomy", "Eq 4.6/4.10", sc_sphere_holonomy, "latitude holonomy and Christoffel recovery"),
        Scenario("sphere-curvature", "Eq 4.10", sc_sphere_curvature, "curvature operator vs Riemann tensor; flatness"),
        Scenario("sphere-torsion", "Eq 4.9", sc_sphere_torsion, "torsion of the Levi-Civita transport"),
        Scenario("transported-derivation", "Eq 4.4", sc_transported_derivation, "derivation of transported sections"),
        Scenario("frame-covariance", "Eq 4.8", sc_frame_covariance, "frame-change law of the components"),
        Scenario("morphism-consistency", "Prop 5.1", sc_morphism_consistency, "consistent morphisms and the natural transport"),
        Scenario("metric-roundtrip", "Thm 6.1", sc_metric_roundtrip, "metric <-> flat transport round trip"),
        Scenario("density-derivative", "Eq 6.13", sc_density_derivative, "plus/minus derivation of densities"),
    ]
}

COMMANDS = {
    "check": (list(SCENARIOS), "flat-groupoid"),
    "demo": (list(SCENARIOS), "sphere-holonomy"),
    "factorize": (["composite-factorize"], "composite-factorize"),
    "metric-roundtrip": (["metric-roundtrip"], "metric-roundtrip"),
    "derive": (["transported-derivation", "frame-covariance", "density-derivative"], "transported-derivation"),
    "curvature": (["sphere-curvature", "sphere-torsion"], "sphere-curvature"),
}


def list_scenarios() -> str:
    width = max(len(n) for n in SCENARIOS)
    return "\n".join(f"{s.name:<{width}}  → {s.location:<22} {s.summary}" for s in SCENARIOS.values())


def build_report(cfg: RunConfig):
    """Run the scenario; returns ``(reports, metadata)``."""
    ctx = Context(cfg)
    reports = SCENARIOS[cfg.scenario].run(ctx)
    meta = {"command": cfg.command, "grid": cfg.grid, "tolerances": dict(sorted(cfg.tolerances.items()))}
    meta.update(ctx.metadata)
    return reports, meta


def run(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    try:
        reports, meta = build_report(cfg)
    except (NumericError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        reports, meta, code = [], {"command": cfg.command, "error": f"{type(exc).__name__}: {exc}"}, 3
    except (DomainError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    else:
        code = 0 if all(r.passed for r in reports) else 1
    doc = {
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "checks": [r.to_dict() for r in reports],
        "metadata": meta,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    text = dumps(doc)
    if cfg.output_path:
        with open(cfg.output_path, "w") as fh:
            fh.write(text + "\n")
        for r in reports:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.check:<20} residual={r.max_residual:.3e}  tol={r.tolerance:.1e}", file=stream)
    else:
        print(text, file=stream)
    return code


def _parse_tol(items, parser):
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        try:
            if not sep or not name:
                raise ValueError
            out[name] = float(value)
        except ValueError:
            parser.error(f"--tol expects name=value, got {item!r}")
    return out


def _parse_signature(text, parser):
    try:
        p, q = (int(v) for v in text.split(","))
        if p < 0 or q < 0 or p + q < 1:
            raise ValueError
    except ValueError:
        parser.error(f"--signature expects p,q, got {text!r}")
    return (p, q)


def make_parser():
    parser = argparse.ArgumentParser(prog="transport-maps", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list-scenarios", help="print the builtin scenarios")
    for name, (choices, default) in COMMANDS.items():
        p = sub.add_parser(name, help=f"run a scenario ({', '.join(choices)})" if len(choices) < 5 else "run any scenario")
        p.add_argument("--scenario", choices=choices, default=default)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", action="append", metavar="NAME=VALUE", help="override the tolerance of one check")
        p.add_argument("--out", help="write the JSON report here (default: stdout)")
        p.add_argument("--grid", type=int, default=5, help="points per axis / sample scale")
        p.add_argument("--colatitude", type=float, default=np.pi / 3)
        p.add_argument("--signature", default="2,0", help="p,q for metric-roundtrip")
        if name == "metric-roundtrip":
            p.add_argument("--input", help="JSON table {signature, points, G} to round-trip")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.command == "list-scenarios":
        print(list_scenarios())
        return 0
    if args.seed < 0:
        parser.error("--seed must be non-negative")
    if args.grid < 2:
        parser.error("--grid must be at least 2")
    cfg = RunConfig(
        command=args.command,
        scenario=args.scenario,
        seed=args.seed,
        tolerances=_parse_tol(args.tol, parser),
        output_path=args.out,
        grid=args.grid,
        colatitude=args.colatitude,
        signature=_parse_signature(args.signature, parser),
        input_path=getattr(args, "input", None),
    )
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
