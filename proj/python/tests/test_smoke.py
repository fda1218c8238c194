import numpy as np
import pytest

import lambdapack as lp


def test_builtins_listed():
    assert lp.builtin_names() == ["cholesky", "tsqr", "gemm"]
    info = lp.program_info(lp.builtin_source("cholesky"))
    assert info["lines"] == 3
    assert "N" in info["params"]


def test_validate_and_enumerate():
    src = lp.builtin_source("cholesky", {"N": 4})
    v = lp.validate(src)
    assert v["ok"] and v["nodes"] == 20
    nodes = lp.enumerate_nodes(src)
    assert len(nodes) == 20 and nodes[0] == "0:i=0"
    assert len(lp.enumerate_edges(src)) == 30


def test_syntax_error_raises():
    with pytest.raises(lp._lambdapack.Error):
        lp.validate("program p\nmatrix A[1]\nA[0] = \n")


def test_analyzer_matches_enumeration():
    src = lp.builtin_source("tsqr")
    an = lp.Analyzer(src, {"N": 8})
    edges = set(lp.enumerate_edges(src, {"N": 8}))
    implicit = {(n, c) for n in lp.enumerate_nodes(src, {"N": 8}) for c in an.children(n)}
    assert implicit == edges
    assert an.parents("1:i=4,level=1") == ["1:i=4,level=0", "1:i=6,level=0"]
    assert an.readers("R", [6, 1]) == ["1:i=4,level=1"]
    assert not an.is_node("1:i=6,level=1")


def test_node_round_trip():
    line, b = lp.parse_node("1:i=0,j=2")
    assert (line, b) == (1, {"i": 0, "j": 2})
    assert lp.format_node(line, b) == "1:i=0,j=2"


def test_desired_launches():
    assert lp.desired_launches(100, 40, 0, "1/2") == 10
    assert lp.desired_launches(100, 40, 10, "0.5") == 0
    with pytest.raises(lp._lambdapack.Error):
        lp.desired_launches(1, 0, 0, "0")


def test_run_cholesky_checks_out():
    r = lp.run("cholesky", block=8, grid=3, workers=2, period=0.02, lease=1.0)
    assert r["status"] == "ok", r["message"]
    assert r["check_error"] < 1e-10
    assert r["completed"] == r["nodes"] == 10
    out = r["output"]
    assert out.shape == (24, 24)
    assert np.allclose(np.triu(out, 1), 0)


def test_run_gemm_autoscaled():
    r = lp.run("gemm", block=8, grid=2, inner=16, sf="1", period=0.02, idle_timeout=0.5)
    assert r["status"] == "ok", r["message"]
    assert r["check_ok"]


def test_bad_config_raises():
    with pytest.raises(lp._lambdapack.Error):
        lp.run("lu")
    with pytest.raises(lp._lambdapack.Error):
        lp.run("cholesky", workers=2, sf="1/2")
