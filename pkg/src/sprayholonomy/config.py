"""Analysis configuration: JSON ingestion, validation and defaults.

Schema version ``spray-holonomy/1``; see ``docs/schema.md``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from . import expr as ex
from .geometry import Ball, Domain, Interval, SprayModel
from .transport import BaseCurve
from .variational import (
    DEFAULT_TOLERANCES,
    LagrangianCandidate,
    Combiner,
    combine,
)

SCHEMA_VERSION = "spray-holonomy/1"
DEFAULT_SAMPLE_COUNT = 50
DEFAULT_MAX_AD_DEPTH = 8


class ConfigError(ValueError):
    pass


_TOP_KEYS = {
    "version", "name", "description", "n", "params", "spray", "domain",
    "candidates", "samples", "tolerances", "max_bracket_depth", "max_ad_depth",
    "allow_semispray", "transport", "expected",
}
_INTERVAL_KEYS = {"min", "max", "min_strict", "max_strict"}
_BALL_KEYS = {"center", "radius", "strict"}
_CANDIDATE_KEYS = {"name", "expr", "degree", "combine", "role"}
_COMBINE_KEYS = {"kind", "of", "coefficients", "p"}
_SAMPLE_KEYS = {"count", "seed", "points"}
_TASK_KEYS = {"name", "kind", "loop", "v0", "steps", "T", "candidates"}
_LOOP_KEYS = {"kind", "corner", "side", "axes", "points", "exprs"}
_EXPECTED_KEYS = {"vh2", "metrizability", "rule", "generic_rank", "transport"}


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(extra)}")


def _num(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number")
    return float(v)


@dataclass
class CandidateSpec:
    name: str
    expr: Optional[str] = None
    degree: float = 2.0
    combine: Optional[dict] = None
    role: str = "candidate"  # "candidate" or "control"


@dataclass
class TransportTask:
    name: str
    kind: str  # "loop", "geodesic" or "convergence"
    v0: list
    steps: int
    loop: Optional[dict] = None
    T: float = 1.0
    candidates: list = field(default_factory=list)


@dataclass
class AnalysisConfig:
    n: int
    spray: list
    domain: dict
    name: str = ""
    description: str = ""
    params: dict = field(default_factory=dict)
    candidates: list = field(default_factory=list)
    sample_count: int = DEFAULT_SAMPLE_COUNT
    seed: int = 0
    points: Optional[list] = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    max_bracket_depth: Optional[int] = None
    max_ad_depth: int = DEFAULT_MAX_AD_DEPTH
    allow_semispray: bool = False
    transport: list = field(default_factory=list)
    expected: Optional[dict] = None
    source_path: Optional[str] = None

    # -- derived objects

    def to_dict(self) -> dict:
        """Normalized form with defaults filled; the basis of the config hash."""
        d: dict[str, Any] = {
            "version": SCHEMA_VERSION,
            "name": self.name,
            "description": self.description,
            "n": self.n,
            "params": dict(sorted(self.params.items())),
            "spray": list(self.spray),
            "domain": self.domain,
            "candidates": [
                {k: v for k, v in vars(c).items() if v is not None} for c in self.candidates
            ],
            "samples": (
                {"points": self.points} if self.points is not None
                else {"count": self.sample_count, "seed": self.seed}
            ),
            "tolerances": dict(sorted(self.tolerances.items())),
            "max_bracket_depth": self.max_bracket_depth,
            "max_ad_depth": self.max_ad_depth,
            "allow_semispray": self.allow_semispray,
            "transport": [{k: v for k, v in vars(t).items() if v is not None} for t in self.transport],
        }
        if self.expected is not None:
            d["expected"] = self.expected
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def build_domain(self) -> Domain:
        return _domain_from_dict(self.domain, self.n)

    def build_model(self) -> SprayModel:
        G = tuple(ex.parse(s, self.n, self.params) for s in self.spray)
        return SprayModel(self.n, G, dict(self.params), self.build_domain(), self.name)

    def build_candidates(self) -> list[LagrangianCandidate]:
        built: dict[str, LagrangianCandidate] = {}
        order = []
        for spec in self.candidates:
            if spec.expr is not None:
                cand = LagrangianCandidate(
                    spec.name, ex.parse(spec.expr, self.n, self.params), spec.degree, dict(self.params)
                )
            else:
                comb = spec.combine
                inputs = [built[name] for name in comb["of"]]
                kind = comb["kind"]
                combiner = Combiner(
                    kind,
                    tuple(comb.get("coefficients", ())),
                    float(comb.get("p", 1.0)),
                )
                cand = combine(inputs, combiner, name=spec.name)
            built[spec.name] = cand
            order.append(cand)
        return order

    def candidate_roles(self) -> dict:
        return {c.name: c.role for c in self.candidates}


def _interval_from_dict(d: dict, where: str) -> Interval:
    _reject_unknown(d, _INTERVAL_KEYS, where)
    lo = _num(d.get("min", -math.inf), f"{where}.min") if "min" in d else -math.inf
    hi = _num(d.get("max", math.inf), f"{where}.max") if "max" in d else math.inf
    if not lo < hi:
        raise ConfigError(f"{where}: empty interval (min must be < max)")
    return Interval(lo, hi, bool(d.get("min_strict", False)), bool(d.get("max_strict", False)))


def _domain_from_dict(d: dict, n: int) -> Domain:
    xs = tuple(_interval_from_dict(iv, f"domain.x[{i}]") for i, iv in enumerate(d["x"]))
    ys = tuple(_interval_from_dict(iv, f"domain.y[{i}]") for i, iv in enumerate(d["y"]))
    ball = None
    if d.get("x_ball") is not None:
        b = d["x_ball"]
        ball = Ball(tuple(float(c) for c in b["center"]), float(b["radius"]), bool(b.get("strict", True)))
    return Domain(xs, ys, ball)


def _validate_loop(loop: dict, n: int, where: str) -> None:
    kind = loop["kind"]
    if kind == "square":
        corner = loop.get("corner")
        if not isinstance(corner, list) or len(corner) != n:
            raise ConfigError(f"{where}.corner must have {n} coordinates")
        [_num(v, f"{where}.corner") for v in corner]
        if _num(loop.get("side"), f"{where}.side") <= 0:
            raise ConfigError(f"{where}.side must be positive")
        axes = loop.get("axes", [0, 1])
        if (
            not isinstance(axes, list) or len(axes) != 2 or axes[0] == axes[1]
            or not all(isinstance(a, int) and 0 <= a < n for a in axes)
        ):
            raise ConfigError(f"{where}.axes must name two distinct coordinates in 0..{n - 1}")
    elif kind == "polyline":
        pts = loop.get("points")
        if not isinstance(pts, list) or len(pts) < 2:
            raise ConfigError(f"{where}.points must list at least two points")
        for j, p in enumerate(pts):
            if not isinstance(p, list) or len(p) != n:
                raise ConfigError(f"{where}.points[{j}] must have {n} coordinates")
            [_num(v, f"{where}.points[{j}]") for v in p]
    else:
        exprs = loop.get("exprs")
        if not isinstance(exprs, list) or len(exprs) != n:
            raise ConfigError(f"{where}.exprs must list {n} expressions in t")
        for j, e in enumerate(exprs):
            try:
                BaseCurve.from_expressions([str(e)] * n)
            except ex.ExprError as exc:
                raise ConfigError(f"{where}.exprs[{j}]: {exc}") from None


def _validate_domain(d, n: int) -> dict:
    _reject_unknown(d, {"x", "y", "x_ball"}, "domain")
    for key in ("x", "y"):
        if key not in d:
            raise ConfigError(f"domain.{key} is required")
        if not isinstance(d[key], list) or len(d[key]) != n:
            raise ConfigError(f"domain.{key} must list {n} intervals")
        for i, iv in enumerate(d[key]):
            _interval_from_dict(iv, f"domain.{key}[{i}]")
    if d.get("x_ball") is not None:
        b = d["x_ball"]
        _reject_unknown(b, _BALL_KEYS, "domain.x_ball")
        if "center" not in b or len(b["center"]) != n:
            raise ConfigError(f"domain.x_ball.center must have {n} coordinates")
        if _num(b.get("radius", 0), "domain.x_ball.radius") <= 0:
            raise ConfigError("domain.x_ball.radius must be positive")
    return d


def config_from_dict(raw: dict, source_path: Optional[str] = None) -> AnalysisConfig:
    _reject_unknown(raw, _TOP_KEYS, "config")
    version = raw.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"version: unsupported schema {version!r}, expected {SCHEMA_VERSION!r}")
    n = raw.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise ConfigError("n: n ≥ 2 required")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params: expected an object")
    params = {k: _num(v, f"params.{k}") for k, v in params.items()}
    spray = raw.get("spray")
    if not isinstance(spray, list) or len(spray) != n or not all(isinstance(s, str) for s in spray):
        raise ConfigError(f"spray: expected {n} expression strings")
    for i, s in enumerate(spray):
        try:
            ex.parse(s, n, params)
        except ex.ExprError as exc:
            raise ConfigError(f"spray[{i}]: {exc}") from None
    if "domain" not in raw:
        raise ConfigError("domain is required")
    domain = _validate_domain(raw["domain"], n)

    cands = []
    seen = set()
    for i, c in enumerate(raw.get("candidates", [])):
        where = f"candidates[{i}]"
        _reject_unknown(c, _CANDIDATE_KEYS, where)
        name = c.get("name")
        if not isinstance(name, str) or not name:
            raise ConfigError(f"{where}.name is required")
        if name in seen:
            raise ConfigError(f"{where}.name: duplicate candidate {name!r}")
        role = c.get("role", "candidate")
        if role not in ("candidate", "control"):
            raise ConfigError(f"{where}.role must be 'candidate' or 'control'")
        degree = _num(c.get("degree", 2), f"{where}.degree")
        has_expr = "expr" in c
        has_comb = "combine" in c
        if has_expr == has_comb:
            raise ConfigError(f"{where}: exactly one of 'expr' or 'combine' is required")
        if has_expr:
            try:
                ex.parse(c["expr"], n, params)
            except ex.ExprError as exc:
                raise ConfigError(f"{where}.expr: {exc}") from None
            cands.append(CandidateSpec(name, c["expr"], degree, None, role))
        else:
            comb = c["combine"]
            _reject_unknown(comb, _COMBINE_KEYS, f"{where}.combine")
            if comb.get("kind") not in ("linear", "geometric-mean", "power-mean"):
                raise ConfigError(f"{where}.combine.kind must be linear, geometric-mean or power-mean")
            of = comb.get("of")
            if not isinstance(of, list) or not of or any(o not in seen for o in of):
                raise ConfigError(f"{where}.combine.of must name earlier candidates")
            if comb["kind"] == "linear" and len(comb.get("coefficients", [])) != len(of):
                raise ConfigError(f"{where}.combine.coefficients: one per input required")
            if comb["kind"] == "power-mean" and _num(comb.get("p", 0), f"{where}.combine.p") == 0:
                raise ConfigError(f"{where}.combine.p must be nonzero")
            cands.append(CandidateSpec(name, None, degree, dict(comb), role))
        seen.add(name)

    samples = raw.get("samples", {})
    _reject_unknown(samples, _SAMPLE_KEYS, "samples")
    count = samples.get("count", DEFAULT_SAMPLE_COUNT)
    if not isinstance(count, int) or isinstance(count, bool) or count < 1:
        raise ConfigError("samples.count must be an integer ≥ 1")
    seed = samples.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ConfigError("samples.seed must be an unsigned 64-bit integer")
    points = samples.get("points")
    if points is not None:
        if not isinstance(points, list) or not points:
            raise ConfigError("samples.points must be a nonempty list")
        for j, p in enumerate(points):
            if not isinstance(p, list) or len(p) != 2 * n:
                raise ConfigError(f"samples.points[{j}] must have {2 * n} coordinates")
            [_num(v, f"samples.points[{j}]") for v in p]
    else:
        for key in ("x", "y"):
            for i, iv in enumerate(raw["domain"][key]):
                if "min" not in iv or "max" not in iv:
                    raise ConfigError(
                        f"domain.{key}[{i}]: random sampling needs finite bounds (or give samples.points)"
                    )

    tol = dict(DEFAULT_TOLERANCES)
    user_tol = raw.get("tolerances", {})
    _reject_unknown(user_tol, set(DEFAULT_TOLERANCES), "tolerances")
    for k, v in user_tol.items():
        if _num(v, f"tolerances.{k}") <= 0:
            raise ConfigError(f"tolerances.{k} must be positive")
        tol[k] = float(v)

    mbd = raw.get("max_bracket_depth")
    if mbd is not None and (not isinstance(mbd, int) or mbd < 0):
        raise ConfigError("max_bracket_depth must be a non-negative integer")
    mad = raw.get("max_ad_depth", DEFAULT_MAX_AD_DEPTH)
    if not isinstance(mad, int) or mad < 2:
        raise ConfigError("max_ad_depth must be an integer ≥ 2")

    tasks = []
    names = set()
    for i, t in enumerate(raw.get("transport", [])):
        where = f"transport[{i}]"
        _reject_unknown(t, _TASK_KEYS, where)
        name = t.get("name")
        if not isinstance(name, str) or not name or name in names:
            raise ConfigError(f"{where}.name must be a unique nonempty string")
        names.add(name)
        kind = t.get("kind")
        if kind not in ("loop", "geodesic", "convergence"):
            raise ConfigError(f"{where}.kind must be 'loop', 'geodesic' or 'convergence'")
        steps = t.get("steps", {"loop": 2000, "geodesic": 1000, "convergence": 20}[kind])
        if not isinstance(steps, int) or steps < 2:
            raise ConfigError(f"{where}.steps must be an integer ≥ 2")
        v0 = t.get("v0")
        want = n if kind == "loop" else 2 * n
        if not isinstance(v0, list) or len(v0) != want:
            raise ConfigError(f"{where}.v0 must have {want} components")
        for c in t.get("candidates", []):
            if c not in seen:
                raise ConfigError(f"{where}.candidates: unknown candidate {c!r}")
        loop = None
        if kind == "loop":
            loop = t.get("loop")
            if loop is None:
                raise ConfigError(f"{where}.loop is required for loop tasks")
            _reject_unknown(loop, _LOOP_KEYS, f"{where}.loop")
            if loop.get("kind") not in ("square", "polyline", "curve"):
                raise ConfigError(f"{where}.loop.kind must be square, polyline or curve")
            _validate_loop(loop, n, f"{where}.loop")
        tasks.append(
            TransportTask(name, kind, [float(v) for v in v0], steps, loop,
                          _num(t.get("T", 1.0), f"{where}.T"), list(t.get("candidates", [])))
        )

    expected = raw.get("expected")
    if expected is not None:
        _reject_unknown(expected, _EXPECTED_KEYS, "expected")

    return AnalysisConfig(
        n=n,
        spray=list(spray),
        domain=domain,
        name=str(raw.get("name", "")),
        description=str(raw.get("description", "")),
        params=params,
        candidates=cands,
        sample_count=count,
        seed=seed,
        points=points,
        tolerances=tol,
        max_bracket_depth=mbd,
        max_ad_depth=mad,
        allow_semispray=bool(raw.get("allow_semispray", False)),
        transport=tasks,
        expected=expected,
        source_path=source_path,
    )


def load_config(path) -> AnalysisConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return config_from_dict(raw, str(path))
