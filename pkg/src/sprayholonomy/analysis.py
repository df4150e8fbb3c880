"""Sampling orchestration, report assembly and emission."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import expr as ex
from .ad import DepthExceeded
from .config import SCHEMA_VERSION, AnalysisConfig, TransportTask
from .geometry import SprayModel, homogeneity_residual, isotropy_check
from .holonomy import DistributionReport, SaturationConfig, analyze_point
from .transport import (
    BaseCurve,
    TransportError,
    geodesic,
    horizontal_lift,
    measured_order,
    square_loop,
)
from .variational import (
    CombinationError,
    aggregate_candidate,
    check_positivity,
    candidate_point,
    classify,
    summarize_isotropy,
)

log = logging.getLogger(__name__)

RETRY_FACTOR = 10
_POINT_ERRORS = (ex.ExprError, DepthExceeded, np.linalg.LinAlgError, ZeroDivisionError, OverflowError)


class AnalysisError(RuntimeError):
    pass


@dataclass
class _PointOutcome:
    dist: object
    isotropy: object
    homogeneity: float
    records: list


@dataclass
class AnalysisReport:
    config: AnalysisConfig
    seed: int
    homogeneity: dict
    distribution: DistributionReport
    isotropy: list
    isotropy_summary: object
    candidates: list
    verdict: object
    transport: list
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return clean_json(_report_dict(self))


# ---------------------------------------------------------------- pipeline


def _evaluate_point(model, cands, p, sat_cfg, tol, mean_inputs=()) -> _PointOutcome:
    for inputs in mean_inputs:
        check_positivity(inputs, [p])
    dist = analyze_point(model, p, sat_cfg)
    iso = isotropy_check(model, p, tol["isotropy"])
    hom = float(np.max(np.abs(homogeneity_residual(model, p))))
    records = [candidate_point(model, E, p, dist.basis, tol) for E in cands]
    for r in records:
        if not (math.isfinite(r.homogeneity) and np.all(np.isfinite(r.el))):
            raise ex.ExprDomainError("candidate", "non-finite residual")
    return _PointOutcome(dist, iso, hom, records)


def _mean_inputs(cfg: AnalysisConfig, cands) -> list:
    by_name = {c.name: c for c in cands}
    return [
        [by_name[n] for n in spec.combine["of"]]
        for spec in cfg.candidates
        if spec.combine is not None and spec.combine["kind"] != "linear"
    ]


def _sample_outcomes(cfg: AnalysisConfig, model, cands, seed, sat_cfg, warnings):
    tol = cfg.tolerances
    means = _mean_inputs(cfg, cands)
    outcomes = []
    if cfg.points is not None:
        for raw in cfg.points:
            p = np.asarray(raw, dtype=float)
            if not model.domain.contains(p):
                warnings.append(f"skipped point {p.tolist()}: outside the domain")
                continue
            try:
                outcomes.append(_evaluate_point(model, cands, p, sat_cfg, tol, means))
            except _POINT_ERRORS as exc:
                warnings.append(f"skipped point {p.tolist()}: {exc}")
        requested = len(cfg.points)
    else:
        rng = np.random.default_rng(seed)
        requested = cfg.sample_count
        attempts = 0
        cap = RETRY_FACTOR * requested
        while len(outcomes) < requested and attempts < cap:
            attempts += 1
            try:
                p = model.domain.sample(rng)
            except RuntimeError as exc:
                raise AnalysisError(str(exc)) from None
            try:
                outcomes.append(_evaluate_point(model, cands, p, sat_cfg, tol, means))
            except _POINT_ERRORS as exc:
                warnings.append(f"resampled point {p.tolist()}: {exc}")
        if len(outcomes) < requested:
            warnings.append(
                f"retry cap of {cap} draws exhausted with {len(outcomes)} of {requested} samples"
            )
    if 2 * len(outcomes) < requested:
        raise AnalysisError(
            f"only {len(outcomes)} of {requested} sample points could be evaluated"
        )
    return outcomes


def run_analysis(
    cfg: AnalysisConfig,
    seed: Optional[int] = None,
    allow_semispray: Optional[bool] = None,
    run_transport: bool = True,
) -> AnalysisReport:
    """Run the full pipeline; deterministic given (config, seed)."""
    seed = cfg.seed if seed is None else int(seed)
    allow = cfg.allow_semispray if allow_semispray is None else allow_semispray
    model = cfg.build_model()
    cands = cfg.build_candidates()
    tol = cfg.tolerances
    sat_cfg = SaturationConfig(
        rank_tol=tol["rank"],
        max_bracket_depth=cfg.max_bracket_depth,
        max_ad_depth=cfg.max_ad_depth,
        membership_tol=tol["membership"],
    )
    warnings: list[str] = []
    try:
        outcomes = _sample_outcomes(cfg, model, cands, seed, sat_cfg, warnings)
    except CombinationError as exc:
        raise AnalysisError(f"positivity violation: {exc}") from None

    hom_max = max(o.homogeneity for o in outcomes)
    hom_ok = hom_max < tol["homogeneity"]
    if not hom_ok:
        msg = (
            f"spray coefficients are not 2-homogeneous in y (max residual {hom_max:.3e}); "
            "the analysis assumes a spray"
        )
        if not allow:
            raise AnalysisError(msg + "; set allow_semispray to proceed")
        warnings.append(msg)

    points = [o.dist for o in outcomes]
    ranks = [p.rank for p in points]
    generic = max(ranks)
    hist = {}
    for r in sorted(ranks):
        hist[r] = hist.get(r, 0) + 1
    distribution = DistributionReport(
        n=model.n,
        points=points,
        generic_rank=generic,
        generic_codim=2 * model.n - generic,
        histogram=hist,
        non_regular=len(hist) > 1,
        skipped=[],
    )
    if distribution.non_regular:
        warnings.append(f"sampled rank is not constant: {hist}")
    for p in points:
        for w in p.warnings:
            warnings.append(f"point {p.point.tolist()}: {w}")

    sample_pts = [p.point for p in points]
    reports = [
        aggregate_candidate(E, sample_pts, [o.records[k] for o in outcomes], tol)
        for k, E in enumerate(cands)
    ]
    iso = [o.isotropy for o in outcomes]
    iso_summary = summarize_isotropy(iso)
    roles = cfg.candidate_roles()
    verdict = classify(
        distribution,
        [r for r in reports if roles.get(r.name) != "control"],
        iso_summary,
        tol,
    )
    if verdict.diagnostics:
        warnings.extend(verdict.diagnostics)

    transport = []
    if run_transport:
        by_name = {c.name: c for c in cands}
        for task in cfg.transport:
            transport.append(run_transport_task(model, by_name, task))

    return AnalysisReport(
        config=cfg,
        seed=seed,
        homogeneity={"max_residual": hom_max, "tolerance": tol["homogeneity"], "passed": hom_ok},
        distribution=distribution,
        isotropy=iso,
        isotropy_summary=iso_summary,
        candidates=reports,
        verdict=verdict,
        transport=transport,
        warnings=warnings,
    )


# ---------------------------------------------------------------- transport tasks


def curve_from_spec(spec: dict, n: int) -> BaseCurve:
    kind = spec["kind"]
    if kind == "square":
        return square_loop(spec["corner"], float(spec["side"]), tuple(spec.get("axes", (0, 1))), n)
    if kind == "polyline":
        return BaseCurve.from_points(spec["points"])
    return BaseCurve.from_expressions(spec["exprs"])


def run_transport_task(model: SprayModel, candidates: dict, task: TransportTask, trace: bool = False) -> dict:
    out: dict = {"name": task.name, "kind": task.kind, "steps": task.steps, "v0": list(task.v0)}
    try:
        if task.kind == "loop":
            curve = curve_from_spec(task.loop, model.n)
            res = horizontal_lift(model, curve, task.v0, task.steps, trace=trace)
            x0, _ = curve.position(0.0)
            v0 = np.asarray(task.v0)
            out.update(
                base_point=x0.tolist(),
                final=res.final.tolist(),
                defect=float(np.linalg.norm(res.final - v0)),
                error_estimate=res.error_estimate,
                closed=curve.closed,
            )
            if curve.closed:
                out["drifts"] = {
                    name: abs(
                        candidates[name].value(np.concatenate([x0, res.final]))
                        - candidates[name].value(np.concatenate([x0, v0]))
                    )
                    for name in task.candidates
                }
            if trace:
                out["trace"] = res.trace
        elif task.kind == "geodesic":
            traj = geodesic(model, task.v0, task.T, task.steps)
            out.update(
                T=task.T,
                endpoint=traj.states[-1].tolist(),
                completed_steps=len(traj.t) - 1,
                truncated=traj.truncated,
                reason=traj.reason,
            )
            drifts = {}
            for name in task.candidates:
                vals = [candidates[name].value(s) for s in traj.states]
                drifts[name] = max(vals) - min(vals)
            out["energy_drifts"] = drifts
            if trace:
                out["trace"] = [[float(t)] + s.tolist() for t, s in zip(traj.t, traj.states)]
        else:
            conv = measured_order(model, task.v0, task.T, task.steps)
            out.update(T=task.T, error_coarse=conv.error_coarse, error_fine=conv.error_fine, order=conv.order)
    except (TransportError, ex.ExprError) as exc:
        out["error"] = str(exc)
    return out


# ---------------------------------------------------------------- serialization


def clean_json(obj):
    """JSON-safe copy: numpy to builtin, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean_json(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _candidate_dict(rep, role: str) -> dict:
    return {
        "name": rep.name,
        "role": role,
        "source": rep.source,
        "degree": rep.degree,
        "max_homogeneity": rep.max_homogeneity,
        "max_el": rep.max_el,
        "max_invariance": rep.max_invariance,
        "definiteness": rep.definiteness,
        "regular": rep.regular,
        "passes": rep.passes,
        "failures": rep.failures,
        "points": [
            {
                "homogeneity": r.homogeneity,
                "el": r.el,
                "invariance": r.invariance,
                "horizontal": r.horizontal,
                "hessian": r.hessian.g,
                "hessian_rel_min_singular": r.hessian.rel_min_singular,
                "definiteness": r.hessian.definiteness,
            }
            for r in rep.records
        ],
    }


def _report_dict(rep: AnalysisReport) -> dict:
    cfg = rep.config
    d = rep.distribution
    v = rep.verdict
    n = d.n
    obstructed = [f"y{i + 1}" for i in range(n) if all(p.vertical_flags[i] for p in d.points)]
    roles = cfg.candidate_roles()
    return {
        "version": SCHEMA_VERSION,
        "name": cfg.name,
        "config_hash": cfg.config_hash(),
        "sampling": {
            "generator": "PCG64",
            "seed": rep.seed,
            "requested": len(cfg.points) if cfg.points is not None else cfg.sample_count,
            "evaluated": len(d.points),
        },
        "homogeneity": rep.homogeneity,
        "distribution": {
            "generic_rank": d.generic_rank,
            "generic_codim": d.generic_codim,
            "rank_histogram": {str(k): c for k, c in d.histogram.items()},
            "non_regular": d.non_regular,
            "coordinate_vertical_obstruction": obstructed,
            "points": [
                {
                    "point": p.point,
                    "rank": p.rank,
                    "words": p.words,
                    "liouville_member": p.liouville_member,
                    "liouville_residual": p.liouville_residual,
                    "vertical_rank": p.vertical_rank,
                    "vertical_flags": p.vertical_flags,
                    "curvature_max": p.curvature_max,
                    "stabilized": p.stabilized,
                }
                for p in d.points
            ],
        },
        "isotropy": {
            "all_isotropic": rep.isotropy_summary.all_isotropic,
            "max_residual": rep.isotropy_summary.max_residual,
            "max_consistency": rep.isotropy_summary.max_consistency,
            "ricci_scalar_range": list(rep.isotropy_summary.rho_range),
            "points": [
                {
                    "decomposes": r.decomposes,
                    "rho": r.rho,
                    "alpha": r.alpha,
                    "residual": r.residual,
                    "ricci_scalar": r.ricci_scalar,
                }
                for r in rep.isotropy
            ],
        },
        "candidates": [_candidate_dict(c, roles.get(c.name, "candidate")) for c in rep.candidates],
        "verdict": {
            "vh2": v.vh2,
            "metrizability": v.metrizability,
            "rule": v.rule,
            "rule_label": v.rule_label,
            "statement": v.statement,
            "assumptions": v.assumptions,
            "evidence": v.evidence,
            "cross_check": v.cross_check,
            "diagnostics": v.diagnostics,
        },
        "transport": rep.transport,
        "warnings": rep.warnings,
    }


def _g(v) -> str:
    return "n/a" if v is None else f"{v:.3e}"


def render_text(d: dict) -> str:
    """Human-readable form, derived entirely from the JSON report."""
    lines = [f"spray-holonomy report: {d['name'] or '(unnamed)'}"]
    lines.append(f"config hash: {d['config_hash']}")
    s = d["sampling"]
    lines.append(f"samples: {s['evaluated']} of {s['requested']} (generator {s['generator']}, seed {s['seed']})")
    h = d["homogeneity"]
    lines.append(
        f"spray homogeneity: max residual {_g(h['max_residual'])} "
        f"(tolerance {h['tolerance']:g}) {'ok' if h['passed'] else 'FAILED'}"
    )
    lines.append("")
    v = d["verdict"]
    lines.append(f"verdict: vh(2) = {v['vh2']}, metrizability freedom = {v['metrizability']} (rule {v['rule_label']})")
    lines.append(f"  {v['statement']}")
    if v["cross_check"]:
        cc = v["cross_check"]
        lines.append(
            f"  cross-check {cc['rule']}: expected vh(2) = {cc['expected_vh2']}, "
            f"{'consistent' if cc['consistent'] else 'INCONSISTENT'}"
        )
    for diag in v["diagnostics"]:
        lines.append(f"  diagnostic: {diag}")
    dist = d["distribution"]
    obs = dist["coordinate_vertical_obstruction"]
    lines.append(f"coordinate-vertical obstruction: {', '.join(obs) if obs else 'none'}")
    lines.append("")
    lines.append("rank table")
    lines.append("  rank  points")
    for r, c in dist["rank_histogram"].items():
        lines.append(f"  {int(r):4d}  {c:6d}")
    lines.append(
        f"generic rank {dist['generic_rank']}, codimension {dist['generic_codim']}, "
        f"constant rank: {'no' if dist['non_regular'] else 'yes'}"
    )
    ev = v["evidence"]
    lines.append(
        f"Liouville field in distribution at all samples: {'yes' if ev['liouville_member_all'] else 'no'} "
        f"(max residual {_g(ev['max_liouville_residual'])})"
    )
    lines.append(f"max |R^i_jk|: {_g(ev['max_curvature'])}")
    iso = d["isotropy"]
    lo, hi = iso["ricci_scalar_range"]
    lines.append(
        f"isotropic at all samples: {'yes' if iso['all_isotropic'] else 'no'} "
        f"(max residual {_g(iso['max_residual'])}, Ricci scalar in [{_g(lo)}, {_g(hi)}])"
    )
    lines.append("")
    if d["candidates"]:
        lines.append("candidates")
        lines.append(f"  {'name':<12} {'role':<9} {'homog.':>10} {'EL':>10} {'invar.':>10}  hessian             result")
        for c in d["candidates"]:
            lines.append(
                f"  {c['name']:<12} {c['role']:<9} {_g(c['max_homogeneity']):>10} {_g(c['max_el']):>10} "
                f"{_g(c['max_invariance']):>10}  {c['definiteness']:<19} {'pass' if c['passes'] else 'fail'}"
            )
            for f in c["failures"]:
                lines.append(f"      {f}")
        lines.append("")
    if d["transport"]:
        lines.append("transport")
        for t in d["transport"]:
            lines.append("  " + transport_line(t))
        lines.append("")
    lines.append("assumptions")
    for a in v["assumptions"]:
        lines.append(f"  - {a}")
    if d["warnings"]:
        lines.append("warnings")
        for w in d["warnings"]:
            lines.append(f"  - {w}")
    return "\n".join(lines) + "\n"


def transport_line(t: dict) -> str:
    if "error" in t:
        return f"{t['name']} ({t['kind']}): error: {t['error']}"
    if t["kind"] == "loop":
        extra = ", ".join(f"drift {k} {_g(v)}" for k, v in t.get("drifts", {}).items())
        return (
            f"{t['name']} (loop, {t['steps']} steps): |tau(v) - v| = {_g(t['defect'])}, "
            f"error estimate {_g(t['error_estimate'])}" + (f", {extra}" if extra else "")
        )
    if t["kind"] == "geodesic":
        extra = ", ".join(f"drift {k} {_g(v)}" for k, v in t["energy_drifts"].items())
        trunc = f", truncated: {t['reason']}" if t["truncated"] else ""
        end = ", ".join(f"{v:.6g}" for v in t["endpoint"])
        return (
            f"{t['name']} (geodesic, {t['steps']} steps, T={t['T']:g}){trunc}: endpoint ({end})"
            + (f", {extra}" if extra else "")
        )
    return f"{t['name']} (convergence, {t['steps']} steps): measured order {t['order']:.3f}"


def emit(report, fmt: str = "json", path=None) -> str:
    """Serialize a report (or its dict) as json or text; write to ``path`` if given."""
    d = report.to_dict() if isinstance(report, AnalysisReport) else report
    if fmt == "json":
        text = json.dumps(d, sort_keys=True, indent=2, allow_nan=False) + "\n"
    elif fmt == "text":
        text = render_text(d)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
