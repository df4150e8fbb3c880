"""The four builtin example configurations and their expected verdicts."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .config import AnalysisConfig, config_from_dict
from .geometry import SprayModel

EXAMPLE_IDS = (1, 2, 3, 4)


@dataclass
class BuiltinExample:
    id: int
    config: AnalysisConfig
    model: SprayModel
    candidates: list
    expected: dict

    def __iter__(self):
        # unpacks as (model, candidates, expected)
        return iter((self.model, self.candidates, self.expected))


def example_text(k: int) -> str:
    if k not in EXAMPLE_IDS:
        raise ValueError(f"no builtin example {k}; choose from {EXAMPLE_IDS}")
    return resources.files(__package__).joinpath("data", f"example{k}.json").read_text()


def example_config(k: int) -> AnalysisConfig:
    return config_from_dict(json.loads(example_text(k)), f"<builtin example{k}>")


def builtin_examples() -> list[BuiltinExample]:
    out = []
    for k in EXAMPLE_IDS:
        cfg = example_config(k)
        out.append(BuiltinExample(k, cfg, cfg.build_model(), cfg.build_candidates(), cfg.expected or {}))
    return out


def compare_expected(report: dict, expected: dict) -> list[str]:
    """Mismatches between a report dict and an ``expected`` block; empty when all agree."""
    bad = []
    v = report["verdict"]
    checks = [
        ("vh2", v["vh2"]),
        ("metrizability", v["metrizability"]),
        ("rule", v["rule_label"]),
        ("generic_rank", report["distribution"]["generic_rank"]),
    ]
    for key, got in checks:
        if key in expected and expected[key] != got:
            bad.append(f"{key}: expected {expected[key]!r}, got {got!r}")
    if v["diagnostics"]:
        bad.extend(f"diagnostic: {d}" for d in v["diagnostics"])
    tasks = {t["name"]: t for t in report.get("transport", [])}
    for name, want in (expected.get("transport") or {}).items():
        t = tasks.get(name)
        if t is None:
            bad.append(f"transport {name}: task missing from report")
            continue
        if "error" in t:
            bad.append(f"transport {name}: {t['error']}")
            continue
        drifts = t.get("drifts", t.get("energy_drifts", {}))
        if "defect_max" in want and not t["defect"] < want["defect_max"]:
            bad.append(f"transport {name}: defect {t['defect']:.3e} not below {want['defect_max']:g}")
        if "defect_min" in want and not t["defect"] > want["defect_min"]:
            bad.append(f"transport {name}: defect {t['defect']:.3e} not above {want['defect_min']:g}")
        for cand, lim in want.get("drift_max", {}).items():
            if not drifts.get(cand, float("inf")) < lim:
                bad.append(f"transport {name}: drift of {cand} {drifts.get(cand)} not below {lim:g}")
        for cand, lim in want.get("drift_min", {}).items():
            if not drifts.get(cand, 0.0) > lim:
                bad.append(f"transport {name}: drift of {cand} {drifts.get(cand)} not above {lim:g}")
        if "order_range" in want:
            lo, hi = want["order_range"]
            if not lo <= t["order"] <= hi:
                bad.append(f"transport {name}: measured order {t['order']:.3f} outside [{lo}, {hi}]")
    return bad
