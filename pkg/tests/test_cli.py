import json

import pytest

from sprayholonomy import cli
from sprayholonomy.analysis import AnalysisError, emit, run_analysis
from sprayholonomy.config import ConfigError, config_from_dict, load_config
from sprayholonomy.examples import compare_expected, example_config, example_text
from sprayholonomy.variational import DEFAULT_TOLERANCES


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def minimal(**over):
    cfg = {
        "n": 2,
        "spray": ["0", "0"],
        "domain": {"x": [{"min": -1, "max": 1}] * 2, "y": [{"min": -1, "max": 1}] * 2},
        "candidates": [{"name": "E", "expr": "0.5*(y1^2 + y2^2)"}],
        "samples": {"count": 6, "seed": 5},
    }
    cfg.update(over)
    return cfg


# ---------------------------------------------------------------- config


def test_load_builtin_example2(tmp_path):
    cfg = load_config(write(tmp_path, example_text(2)))
    assert cfg.n == 2
    x2 = cfg.build_domain().x[1]
    assert x2.lo > 0


def test_n_validation():
    with pytest.raises(ConfigError, match="n ≥ 2 required"):
        config_from_dict(minimal(n=0))


def test_default_tolerances():
    cfg = config_from_dict(minimal())
    t = cfg.tolerances
    assert (t["rank"], t["el"], t["invariance"], t["homogeneity"], t["hessian"]) == (1e-8, 1e-8, 1e-7, 1e-9, 1e-8)
    assert t == DEFAULT_TOLERANCES
    assert cfg.sample_count == 6 and cfg.max_ad_depth == 8 and cfg.max_bracket_depth is None


@pytest.mark.parametrize(
    "over, match",
    [
        ({"bogus": 1}, "unknown key"),
        ({"samples": {"count": 0}}, "samples.count"),
        ({"samples": {"seed": -1}}, "samples.seed"),
        ({"tolerances": {"el": -1}}, "tolerances.el"),
        ({"tolerances": {"typo": 1}}, "unknown key"),
        ({"spray": ["y1^2"]}, "spray"),
        ({"spray": ["y1^", "0"]}, r"spray\[0\]"),
        ({"domain": {"x": [{"min": 1, "max": -1}] * 2, "y": [{}] * 2}}, "empty interval"),
        ({"candidates": [{"name": "E"}]}, "exactly one of"),
        ({"candidates": [{"name": "E", "expr": "y3"}]}, "candidates"),
        ({"version": "other/2"}, "unsupported schema"),
        ({"domain": {"x": [{}, {}], "y": [{"min": -1, "max": 1}] * 2}}, "finite bounds"),
        ({"transport": [{"name": "t", "kind": "loop", "v0": [1, 0]}]}, "loop is required"),
        ({"transport": [{"name": "t", "kind": "loop", "v0": [1, 0], "loop": {"kind": "square", "side": 1}}]}, "corner"),
        ({"transport": [{"name": "t", "kind": "loop", "v0": [1, 0], "loop": {"kind": "polyline", "points": [[0, 0]]}}]}, "at least two"),
        ({"transport": [{"name": "t", "kind": "loop", "v0": [1, 0], "loop": {"kind": "curve", "exprs": ["t", "x1"]}}]}, r"exprs\[1\]"),
    ],
)
def test_validation_errors_name_the_field(over, match):
    with pytest.raises(ConfigError, match=match):
        config_from_dict(minimal(**over))


def test_parse_error_has_location(tmp_path):
    path = write(tmp_path, '{\n  "n": 2,\n  oops\n}')
    with pytest.raises(ConfigError, match=r"cfg.json:3:3"):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")


def test_config_hash_stable_and_sensitive():
    a = config_from_dict(minimal())
    b = config_from_dict(json.loads(json.dumps(minimal())))
    assert a.config_hash() == b.config_hash()
    c = config_from_dict(minimal(samples={"count": 7, "seed": 5}))
    assert c.config_hash() != a.config_hash()


# ---------------------------------------------------------------- pipeline


@pytest.mark.parametrize("k, vh2, rule", [(1, 0, "R1"), (3, 1, "R3+R4"), (4, 2, "R0")])
def test_run_analysis_examples(k, vh2, rule):
    rep = run_analysis(example_config(k), run_transport=False).to_dict()
    assert rep["verdict"]["vh2"] == vh2 and rep["verdict"]["rule_label"] == rule


def test_json_round_trip_and_determinism():
    cfg = example_config(3)
    a = emit(run_analysis(cfg), "json")
    b = emit(run_analysis(cfg), "json")
    assert a == b
    d = json.loads(a)
    assert json.loads(json.dumps(d)) == d
    assert d["version"] == "spray-holonomy/1"
    assert d["sampling"]["seed"] == cfg.seed


def test_seed_override_changes_samples():
    cfg = example_config(4)
    a = run_analysis(cfg, seed=11, run_transport=False).to_dict()
    b = run_analysis(cfg, seed=12, run_transport=False).to_dict()
    assert a["config_hash"] == b["config_hash"]
    assert a["distribution"]["points"][0]["point"] != b["distribution"]["points"][0]["point"]


def test_text_report_example2():
    text = emit(run_analysis(example_config(2)), "text")
    assert "coordinate-vertical obstruction: y1" in text.splitlines()
    assert "rank table" in text and "assumptions" in text and "verdict: vh(2) = 0" in text


def test_text_is_derived_from_json():
    rep = run_analysis(example_config(1), run_transport=False)
    d = json.loads(emit(rep, "json"))
    assert emit(d, "text") == emit(rep, "text")


def test_semispray_rejected_unless_allowed():
    cfg = config_from_dict(minimal(spray=["y1", "0"]))
    with pytest.raises(AnalysisError, match="2-homogeneous"):
        run_analysis(cfg)
    rep = run_analysis(cfg, allow_semispray=True).to_dict()
    assert any("homogeneous" in w for w in rep["warnings"])


def test_resampling_on_evaluation_errors():
    cfg = config_from_dict(minimal(spray=["sqrt(x1)*y1^2", "0"], candidates=[]))
    rep = run_analysis(cfg).to_dict()
    assert rep["sampling"]["evaluated"] == 6
    assert any("resampled" in w for w in rep["warnings"])
    assert all(p["point"][0] >= 0 for p in rep["distribution"]["points"])


def test_retry_cap_exhausted():
    dom = {"x": [{"min": -1, "max": -0.5}, {"min": -1, "max": 1}], "y": [{"min": -1, "max": 1}] * 2}
    cfg = config_from_dict(minimal(spray=["sqrt(x1)*y1^2", "0"], domain=dom, candidates=[]))
    with pytest.raises(AnalysisError, match="could be evaluated"):
        run_analysis(cfg)


def test_explicit_points_half_rule():
    pts = [[0.5, 0, 1, 0], [0.2, 0.1, 0, 1], [-0.5, 0, 1, 0]]
    cfg = config_from_dict(minimal(spray=["sqrt(x1)*y1^2", "0"], candidates=[], samples={"points": pts}))
    rep = run_analysis(cfg).to_dict()
    assert rep["sampling"]["evaluated"] == 2
    bad = config_from_dict(minimal(spray=["sqrt(x1)*y1^2", "0"], candidates=[], samples={"points": pts[2:]}))
    with pytest.raises(AnalysisError):
        run_analysis(bad)


def test_positivity_violation_is_a_hard_error():
    cands = [
        {"name": "A", "expr": "y1^2 - y2^2"},
        {"name": "B", "expr": "y1^2 + y2^2"},
        {"name": "G", "combine": {"kind": "geometric-mean", "of": ["A", "B"]}},
    ]
    with pytest.raises(AnalysisError, match="positivity"):
        run_analysis(config_from_dict(minimal(candidates=cands)))


def test_compare_expected_detects_mismatch():
    rep = run_analysis(example_config(1), run_transport=False).to_dict()
    assert compare_expected(rep, {"vh2": 0, "rule": "R1", "generic_rank": 4}) == []
    assert compare_expected(rep, {"vh2": 1}) != []


# ---------------------------------------------------------------- command line


def run_cli(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_analyze_json_and_text(tmp_path, capsys):
    path = write(tmp_path, example_text(2))
    code, out, _ = run_cli(["analyze", "--config", path], capsys)
    assert code == 0 and json.loads(out)["verdict"]["rule"] == "R2"
    code, out, _ = run_cli(["analyze", "--config", path, "--format", "text"], capsys)
    assert code == 0 and "coordinate-vertical obstruction: y1" in out
    dest = tmp_path / "r.json"
    code, out, _ = run_cli(["analyze", "--config", path, "--out", str(dest), "--seed", "9"], capsys)
    assert code == 0 and out == "" and json.loads(dest.read_text())["sampling"]["seed"] == 9


def test_cli_byte_identical_reports(tmp_path, capsys):
    path = write(tmp_path, example_text(4))
    outs = [tmp_path / "a.json", tmp_path / "b.json"]
    for o in outs:
        assert run_cli(["analyze", "--config", path, "--out", str(o)], capsys)[0] == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()


def test_cli_exit_codes(tmp_path, capsys):
    assert run_cli(["analyze", "--config", write(tmp_path, minimal(n=0))], capsys)[0] == 1
    assert run_cli(["analyze", "--config", str(tmp_path / "missing.json")], capsys)[0] == 1
    code, _, err = run_cli(
        ["analyze", "--config", write(tmp_path, example_text(2)), "--out", str(tmp_path / "no" / "x.json")], capsys
    )
    assert code != 0 and "I/O error" in err
    semi = write(tmp_path, minimal(spray=["y1", "0"]))
    assert run_cli(["analyze", "--config", semi], capsys)[0] == 2
    assert run_cli(["analyze", "--config", semi, "--allow-semispray"], capsys)[0] == 0
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == 1
    capsys.readouterr()


def test_cli_check_lagrangian(tmp_path, capsys):
    path = write(tmp_path, example_text(4))
    code, out, _ = run_cli(["check-lagrangian", "--config", path, "--candidate", "E_gm"], capsys)
    d = json.loads(out)
    assert code == 0 and d["candidate"]["passes"]
    code, out, _ = run_cli(["check-lagrangian", "--config", path, "--candidate", "E_a", "--format", "text"], capsys)
    assert out.startswith("candidate E_a: pass")
    assert run_cli(["check-lagrangian", "--config", path, "--candidate", "nope"], capsys)[0] == 1


def test_cli_transport(tmp_path, capsys):
    path = write(tmp_path, example_text(3))
    code, out, _ = run_cli(["transport", "--config", path, "--task", "loop"], capsys)
    d = json.loads(out)["result"]
    assert code == 0 and d["defect"] > 1e-3 and d["drifts"]["E_mu"] < 1e-6
    assert len(d["trace"]) == 2001 and len(d["trace"][0]) == 5
    code, out, _ = run_cli(["transport", "--config", path, "--task", "geodesic", "--no-trace"], capsys)
    assert code == 0 and "trace" not in json.loads(out)["result"]
    assert run_cli(["transport", "--config", path, "--task", "nope"], capsys)[0] == 1


def test_cli_examples_filter(capsys):
    code, out, _ = run_cli(["examples", "--filter", "2"], capsys)
    assert code == 0 and out.startswith("example 2: ok")


def test_cli_examples_mismatch(monkeypatch, capsys):
    real = cli.example_config

    def wrong(k):
        cfg = real(k)
        cfg.expected = dict(cfg.expected, vh2=5)
        return cfg

    monkeypatch.setattr(cli, "example_config", wrong)
    code, out, _ = run_cli(["examples", "--filter", "1"], capsys)
    assert code == 3 and "MISMATCH" in out
