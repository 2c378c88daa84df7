"""CLI: config validation, report text, exit codes, JSON mirrors."""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from fixlab.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


# ---------------------------------------------------------------------------
# classify-space


def test_classify_space_standard(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "space": {"kind": "analytic", "expression": "abs(x - y)",
                  "lo": 0.0, "hi": 1.0, "grid": 33},
    })
    assert main(["classify-space", cfg]) == 0
    out = capsys.readouterr().out
    assert "classification: standard_metric" in out
    assert "(a02) triangular: holds" in out
    assert "(a04) sufficient: holds" in out
    assert "FAILS" not in out


def test_classify_space_tabulated_witness(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "space": {"kind": "tabulated", "matrix": [[0.2, 0.1], [0.1, 0.1]]},
    })
    assert main(["classify-space", cfg]) == 0
    out = capsys.readouterr().out
    assert "classification: weak_almost_partial_metric" in out
    assert "(a03) reflexive_triangular: FAILS" in out
    assert "witness (0, 1, 0)" in out


# ---------------------------------------------------------------------------
# classify-phi


def test_classify_phi_all_hold(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "phi": {"expression": "t / 2", "monotone": True},
        "options": {"seed": 0},
    })
    assert main(["classify-phi", cfg]) == 0
    out = capsys.readouterr().out
    assert "phi: t / 2" in out
    assert "(b05) normal: holds" in out
    assert "(b06) asymptotically normal: holds" in out
    assert "(b07) nearly right admissible: holds" in out


def test_classify_phi_identity_fails(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "phi": {"expression": "t"},
        "options": {"seed": 0},
    })
    assert main(["classify-phi", cfg]) == 1
    out = capsys.readouterr().out
    assert "(b05) normal: FAILS witness 1e-06" in out


def test_classify_phi_prints_declared_q(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "phi": {"expression": "t - (t - 1) ^ 2", "q": [1.0]},
        "options": {"seed": 0},
    })
    main(["classify-phi", cfg])
    assert "declared Q: [1.0]" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# check-contraction


def test_contraction_failure_exits_one(capsys):
    assert main(["check-contraction", str(CONFIGS / "demo_bad_phi.json")]) == 1
    out = capsys.readouterr().out
    assert "(c03) contraction at gauge M1: FAILS" in out
    assert "witness pair (0.0, 1.0)" in out
    assert "d(Tx,Ty)=0.5" in out


def test_contraction_holds(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "space": {"kind": "analytic", "expression": "max(x, y)",
                  "lo": 0.0, "hi": 1.0, "grid": 65},
        "map": {"kind": "analytic", "expression": "x / 2"},
        "phi": {"expression": "t / 2", "monotone": True},
    })
    assert main(["check-contraction", cfg]) == 0
    assert "(c03) contraction at gauge M1: holds" in capsys.readouterr().out
    assert main(["check-contraction", cfg, "--gauge", "M3"]) == 0
    assert "(c03) contraction at gauge M3: holds" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# harness


def test_harness_demo_partial_max(capsys):
    assert main(["harness", str(CONFIGS / "demo_partial_max.json")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("Theorem 3 confirmed, z=")
    assert ", d(z,z)=" in out.splitlines()[0]
    assert "space: partial_metric" in out
    assert "applicable: T3, T2, T1" in out
    assert "(d01) 0-complete: assumed" in out
    assert "(c03) contraction: verified-on-samples" in out
    assert "conclusion checks:" in out


def test_harness_gauge_override_changes_dispatch(capsys):
    assert main(["harness", str(CONFIGS / "demo_partial_max.json"),
                 "--gauge", "M1"]) == 0
    out = capsys.readouterr().out
    assert "applicable: T3, T5, T2, T4" in out


def test_harness_demo_sum(capsys):
    assert main(["harness", str(CONFIGS / "demo_sum_m1.json")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("Theorem 3 confirmed")
    assert "applicable: T3, T5, T2, T4" in out


def test_harness_text_is_deterministic(capsys):
    main(["harness", str(CONFIGS / "demo_partial_max.json")])
    first = capsys.readouterr().out
    main(["harness", str(CONFIGS / "demo_partial_max.json")])
    assert capsys.readouterr().out == first


def test_harness_no_theorem(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "space": {"kind": "tabulated",
                  "matrix": [[0.0, 3.0, 1.0], [3.0, 0.0, 1.0], [1.0, 1.0, 0.0]]},
        "map": {"kind": "tabulated", "indices": [0, 0, 0]},
        "phi": {"expression": "t / 2", "monotone": True},
        "options": {"seed": 0},
    })
    assert main(["harness", cfg]) == 1
    out = capsys.readouterr().out
    assert out.startswith("No theorem applies: not-applicable")
    assert "space: symmetric_only" in out


# ---------------------------------------------------------------------------
# iterate


def test_iterate_converging_orbit(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "space": {"kind": "tabulated", "matrix": [[0.0, 0.1], [0.1, 0.0]]},
        "map": {"kind": "tabulated", "indices": [1, 1]},
        "starts": [0, 1],
    })
    assert main(["iterate", cfg]) == 0
    out = capsys.readouterr().out
    assert "start 0:" in out
    assert "converged-0d=True" in out
    assert "FAILS" not in out


def test_iterate_stuck_orbit_exits_one(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "space": {"kind": "analytic", "expression": "abs(x - y)",
                  "lo": 0.0, "hi": 1.0, "grid": 17},
        "map": {"kind": "analytic", "expression": "x / 2"},
        "starts": [1.0],
        "options": {"max_iters": 5},
    })
    assert main(["iterate", cfg]) == 1
    assert "converged-0d=False" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# witness and lemma2


def test_witness_crafted_rows(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "sequence": {"points": [0.0, 1.2, 3.0, 2.9, 2.8, 3.9]},
        "options": {"eps": 1.0},
    })
    assert main(["witness", cfg]) == 0
    out = capsys.readouterr().out
    assert "prefix of 6 points; eps=1.0" in out
    assert "j_eps=5; rows complete through j=4" in out
    assert "more rows" not in out


def test_witness_truncates_long_reports(tmp_path, capsys):
    walk = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, 301))])
    cfg = write_config(tmp_path, {
        "sequence": {"points": list(walk)},
        "options": {"eps": 0.5, "j_max": 40},
    })
    assert main(["witness", cfg]) == 0
    out = capsys.readouterr().out
    assert "... 21 more rows in the JSON report" in out


def test_lemma2_subcommand(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "phi": {"expression": "t / 2", "monotone": True},
        "descent": {"s": 0.0, "points": list(2.0 ** -np.arange(41))},
    })
    assert main(["lemma2", cfg]) == 0
    out = capsys.readouterr().out
    assert "tail bound: holds" in out
    spike = 1.0 + 2.0**-23
    bad = write_config(tmp_path, {
        "phi": {"expression": f"if(t = {spike!r}, 0.99, t / 2)"},
        "descent": {
            "s": 1.0,
            "points": list(1.0 + 2.0 ** -np.arange(40)) + [spike, 1.0 + 2.0**-40],
        },
    }, name="bad.json")
    assert main(["lemma2", bad]) == 1
    assert "tail bound: FAILS" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# plumbing: JSON mirror, --config, exit code 2


def test_json_mirror_is_deterministic(tmp_path):
    out_a = tmp_path / "a.json"
    out_b = tmp_path / "b.json"
    cfg = str(CONFIGS / "demo_partial_max.json")
    assert main(["harness", cfg, "--json", str(out_a)]) == 0
    assert main(["harness", cfg, "--json", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()
    doc = json.loads(out_a.read_text())
    assert doc["task"] == "harness"
    assert doc["verdict"]["conclusion_status"] == "confirmed"
    keys = list(json.loads(out_a.read_text()))
    assert keys == sorted(keys)


def test_config_flag_matches_positional(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "space": {"kind": "tabulated", "matrix": [[0.2, 0.1], [0.1, 0.1]]},
    })
    main(["classify-space", cfg])
    positional = capsys.readouterr().out
    main(["classify-space", "--config", cfg])
    assert capsys.readouterr().out == positional


@pytest.mark.parametrize("doc, fragment", [
    ({"space": {"kind": "analytic", "expression": "abs(x - y)",
                "lo": 0.0, "hi": 1.0}, "bogus": 1}, "unknown keys ['bogus']"),
    ({}, "missing required keys ['space']"),
    ({"space": {"kind": "fancy"}}, "space.kind"),
    ({"task": "harness",
      "space": {"kind": "analytic", "expression": "abs(x - y)", "lo": 0.0,
                "hi": 1.0}}, "config names task 'harness'"),
])
def test_config_errors_exit_two(tmp_path, capsys, doc, fragment):
    cfg = write_config(tmp_path, doc)
    assert main(["classify-space", cfg]) == 2
    assert fragment in capsys.readouterr().err


def test_more_exit_two_cases(tmp_path, capsys):
    assert main(["classify-space", str(tmp_path / "missing.json")]) == 2
    assert "cannot read config" in capsys.readouterr().err

    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["classify-space", str(broken)]) == 2
    assert "not valid JSON" in capsys.readouterr().err

    assert main(["classify-space"]) == 2
    assert "no config path given" in capsys.readouterr().err

    bad_gauge = write_config(tmp_path, {
        "task": "harness",
        "space": {"kind": "analytic", "expression": "max(x, y)",
                  "lo": 0.0, "hi": 1.0},
        "map": {"kind": "analytic", "expression": "x / 2"},
        "phi": {"expression": "t / 2"},
        "gauge": "M9",
    }, name="gauge.json")
    assert main(["harness", bad_gauge]) == 2
    assert "gauge" in capsys.readouterr().err

    two_sources = write_config(tmp_path, {
        "sequence": {"points": [0.0, 1.0, 2.0, 3.0], "table": [[0.0]]},
    }, name="two.json")
    assert main(["witness", two_sources]) == 2
    assert "exactly one of" in capsys.readouterr().err

    bad_expr = write_config(tmp_path, {
        "space": {"kind": "analytic", "expression": "abs(x -",
                  "lo": 0.0, "hi": 1.0},
    }, name="expr.json")
    assert main(["classify-space", bad_expr]) == 2
    assert capsys.readouterr().err.startswith("error:")

    negative_tol = write_config(tmp_path, {
        "phi": {"expression": "t / 2"},
    }, name="tol.json")
    assert main(["classify-phi", negative_tol, "--tol", "-1"]) == 2
    assert "options.tol" in capsys.readouterr().err

    bad_options = write_config(tmp_path, {
        "phi": {"expression": "t / 2"},
        "options": {"tolerance": 1},
    }, name="opts.json")
    assert main(["classify-phi", bad_options]) == 2
    assert "unknown keys ['tolerance']" in capsys.readouterr().err


def test_unknown_task_raises_system_exit(tmp_path):
    with pytest.raises(SystemExit):
        main(["make-coffee", str(tmp_path / "x.json")])


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "fixlab.cli", "check-contraction",
         str(CONFIGS / "demo_bad_phi.json")],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 1
    assert "(c03) contraction at gauge M1: FAILS" in proc.stdout
