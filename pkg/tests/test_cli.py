import json

import numpy as np

from ccx.cli import main, run
from ccx.serialize import SCHEMA, dumps_canonical, load_problem, parse_matrix
from ccx.stinespring import StinespringTriple, verify_minimality
from conftest import FIXTURE_NAMES, fixture_path


def _run_capture(tmp_path, args, name="out.json"):
    out = tmp_path / name
    code = main(args + ["--out", str(out)])
    return code, out.read_bytes()


def test_fixtures_parse(tmp_path):
    for name in FIXTURE_NAMES:
        problem = load_problem(fixture_path(name))
        assert problem.hilbert_dim >= 1
        assert problem.maps


def test_validate_ok(tmp_path):
    code, raw = _run_capture(tmp_path, ["validate", fixture_path("z2_dephasing")])
    assert code == 0
    report = json.loads(raw)
    assert report["schema"] == SCHEMA
    assert report["result"]["action"]["valid"] is True
    assert report["result"]["maps"]["dephasing"] == {
        "cp": True,
        "unital": True,
        "invariant": True,
    }
    # non-invariance is reported, not failed: the identity is a twirl input
    assert report["result"]["maps"]["identity"]["invariant"] is False


def test_validate_transpose_fails_with_reason(tmp_path):
    code, raw = _run_capture(tmp_path, ["validate", fixture_path("transpose_invalid")])
    assert code == 2
    report = json.loads(raw)
    failures = report["result"]["action"]["failures"]
    assert any("multiplicativity failed" in f for f in failures)


def test_twirl_identity_matches_dephasing(tmp_path):
    code, raw = _run_capture(
        tmp_path, ["twirl", fixture_path("z2_dephasing"), "--map", "identity"]
    )
    assert code == 0
    report = json.loads(raw)
    twirled = parse_matrix(report["result"]["twirled"]["choi_blocks"][0], "choi")
    assert np.abs(twirled - np.diag([1.0, 0.0, 0.0, 1.0])).max() < 1e-10


def test_dilate_report_reverifies(tmp_path):
    code, raw = _run_capture(
        tmp_path, ["dilate", fixture_path("z2_dephasing"), "--map", "dephasing"]
    )
    assert code == 0
    report = json.loads(raw)
    res = report["result"]
    problem = load_problem(fixture_path("z2_dephasing"))
    triple = StinespringTriple(
        domain=problem.algebra,
        codomain_dim=problem.hilbert_dim,
        multiplicities=tuple(res["multiplicities"]),
        isometry=parse_matrix(res["isometry"], "isometry"),
        minimal=res["minimal"],
    )
    assert verify_minimality(triple)
    assert res["covariant_unitaries"] is not None
    assert max(res["covariance_defects"].values()) < 1e-9


def test_commutant_and_rn_commands(tmp_path):
    code, raw = _run_capture(
        tmp_path, ["commutant", fixture_path("z2_dephasing"), "--map", "dephasing"]
    )
    assert code == 0
    assert json.loads(raw)["result"]["dimension"] == 2

    code, raw = _run_capture(
        tmp_path,
        ["rn", "forward", fixture_path("z2_dephasing"), "--map", "dephasing", "--sweep-index", "1"],
    )
    assert code == 0
    res = json.loads(raw)["result"]
    assert res["compression_invertible"] is True
    assert res["flags"]["cp"] and res["flags"]["invariant"]

    code, raw = _run_capture(
        tmp_path,
        ["rn", "inverse", fixture_path("z2_dephasing"), "--map", "dephasing", "--psi", "dephasing"],
    )
    assert code == 0
    t = parse_matrix(json.loads(raw)["result"]["t_operator"], "t")
    assert np.abs(t - np.eye(4)).max() < 1e-8


def test_rn_forward_with_t_file(tmp_path):
    t_path = tmp_path / "t.json"
    t_path.write_text(json.dumps([[[0.5, 0.0] if i == j else [0.0, 0.0] for j in range(4)] for i in range(4)]))
    code, raw = _run_capture(
        tmp_path,
        [
            "rn",
            "forward",
            fixture_path("z2_dephasing"),
            "--map",
            "dephasing",
            "--t-file",
            str(t_path),
        ],
    )
    assert code == 0
    res = json.loads(raw)["result"]
    half = parse_matrix(res["image"]["choi_blocks"][0], "choi")
    assert np.abs(half - 0.5 * np.diag([1.0, 0.0, 0.0, 1.0])).max() < 1e-9


def test_split_command(tmp_path):
    code, raw = _run_capture(
        tmp_path,
        ["split", fixture_path("z2_dephasing"), "--map", "dephasing", "--sweep-index", "2"],
    )
    assert code == 0
    res = json.loads(raw)["result"]
    assert res["reconstruction_defect"] < 1e-8
    for flags in res["summand_flags"]:
        assert flags == {"cp": True, "unital": True, "invariant": True}


def test_equivalence_command(tmp_path):
    code, raw = _run_capture(
        tmp_path,
        [
            "equivalence",
            fixture_path("dephasing_trivial_group"),
            "--map1",
            "identity",
            "--map2",
            "dephasing",
        ],
    )
    assert code == 0
    res = json.loads(raw)["result"]
    assert res["equivalent"] is False


def test_extremality_reports(tmp_path):
    code, raw = _run_capture(
        tmp_path, ["extremality", fixture_path("z2_dephasing"), "--map", "dephasing"]
    )
    assert code == 0
    res = json.loads(raw)["result"]
    assert res["verdict"] == "extreme_certified"
    assert res["certificates"]["range_invariant"] is True

    code, raw = _run_capture(
        tmp_path,
        ["extremality", fixture_path("dephasing_trivial_group"), "--map", "dephasing"],
    )
    assert code == 0
    res = json.loads(raw)["result"]
    assert res["verdict"] == "not_extreme"
    assert res["witness"] is not None

    code, raw = _run_capture(
        tmp_path, ["extremality", fixture_path("automorphism"), "--map", "rotation"]
    )
    assert json.loads(raw)["result"]["certificates"]["multiplicative"] is True

    code, raw = _run_capture(
        tmp_path, ["extremality", fixture_path("pure_state_inflation"), "--map", "inflation"]
    )
    assert json.loads(raw)["result"]["certificates"]["pure_state_inflation"] is True


def test_km_commands(tmp_path):
    code, raw = _run_capture(tmp_path, ["km", "fixed", fixture_path("block_swap")])
    assert code == 0
    res = json.loads(raw)["result"]
    assert res["normal_form_block_dims"] == [1]
    assert res["multiplicities"] == [2]

    code, raw = _run_capture(
        tmp_path, ["km", "restrict", fixture_path("z2_dephasing"), "--map", "dephasing"]
    )
    assert code == 0
    assert json.loads(raw)["result"]["normal_form_block_dims"] == [1, 1]

    code, raw = _run_capture(
        tmp_path,
        ["km", "hull", fixture_path("z2_dephasing"), "--maps", "dephasing", "--trials", "4"],
    )
    assert code == 0
    assert json.loads(raw)["result"]["membership_rate"] == 1


def test_km_extend_round_trip(tmp_path):
    # restrict the pinching, re-enter it as a problem map on the fixed algebra,
    # extend, and compare with the original
    from ccx.fixed_points import fixed_point_algebra, restrict_to_fixed_algebra
    from ccx.serialize import encode_matrices

    problem = load_problem(fixture_path("z2_dephasing"))
    ctx = fixed_point_algebra(problem.action)
    restricted = restrict_to_fixed_algebra(problem.maps["dephasing"], ctx)
    with open(fixture_path("z2_dephasing"), encoding="utf-8") as fh:
        raw_file = json.load(fh)
    raw_file["maps"]["restricted"] = {
        "kind": "choi",
        "domain": {"block_dims": [1, 1]},
        "data": encode_matrices(restricted.choi_blocks),
    }
    fpath = tmp_path / "with_restricted.json"
    fpath.write_text(json.dumps(raw_file))
    code, raw = _run_capture(tmp_path, ["km", "extend", str(fpath), "--map", "restricted"])
    assert code == 0
    res = json.loads(raw)["result"]
    blocks = [parse_matrix(b, "b") for b in res["extended"]["choi_blocks"]]
    assert np.abs(blocks[0] - np.diag([1.0, 0.0, 0.0, 1.0])).max() < 1e-8
    assert res["flags"] == {"cp": True, "unital": True, "invariant": True}


def test_exit_codes_and_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, raw = _run_capture(tmp_path, ["validate", str(bad)], name="err1.json")
    assert code == 1
    assert json.loads(raw)["error"]["kind"] == "parse"

    # schema violations carry a field path
    bad2 = tmp_path / "bad2.json"
    bad2.write_text(json.dumps({"schema": SCHEMA, "algebra": {"block_dims": [0]}}))
    code, raw = _run_capture(tmp_path, ["validate", str(bad2)], name="err2.json")
    assert code == 1
    assert "block_dims" in json.loads(raw)["error"]["message"]

    # rn inverse against a non-dominated map is a validation failure (exit 2)
    code, raw = _run_capture(
        tmp_path,
        [
            "rn",
            "inverse",
            fixture_path("dephasing_trivial_group"),
            "--map",
            "dephasing",
            "--psi",
            "identity",
        ],
        name="err3.json",
    )
    assert code == 2

    # certification failures exit 3: tighten eq_tol beyond reach
    code, raw = _run_capture(
        tmp_path,
        [
            "rn",
            "inverse",
            fixture_path("z2_dephasing"),
            "--map",
            "dephasing",
            "--psi",
            "dephasing",
            "--tol",
            "1e-17",
        ],
        name="err4.json",
    )
    assert code == 3
    assert json.loads(raw)["error"]["kind"] == "ResidualTooLargeError"


def test_reports_are_byte_deterministic(tmp_path):
    jobs = {
        "z2_dephasing": ["extremality", "--map", "dephasing"],
        "dephasing_trivial_group": ["extremality", "--map", "dephasing"],
        "automorphism": ["extremality", "--map", "rotation"],
        "pure_state_inflation": ["extremality", "--map", "inflation"],
        "transpose_invalid": ["validate"],
        "block_swap": ["km", "fixed"],
    }
    for name, cmd in jobs.items():
        args = cmd[:1] + [fixture_path(name)] + cmd[1:]
        if cmd[0] == "km":
            args = ["km", cmd[1], fixture_path(name)] + cmd[2:]
        _, raw1 = _run_capture(tmp_path, args, name=f"{name}_1.json")
        _, raw2 = _run_capture(tmp_path, args, name=f"{name}_2.json")
        assert raw1 == raw2, name
        json.loads(raw1)  # must re-parse


def test_canonical_dump_round_trips():
    obj = {
        "b": [1.0, 0.1 + 0.2, 1e-17, True, None],
        "a": {"nested": [-0.0, 3, "text"]},
    }
    text = dumps_canonical(obj)
    assert json.loads(text) is not None
    assert dumps_canonical(json.loads(text)) == text


def test_run_returns_report_dict():
    report, code, out = run(["validate", fixture_path("z2_dephasing")])
    assert code == 0
    assert report["schema"] == SCHEMA
    assert out is None
