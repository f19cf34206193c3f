import json

import numpy as np
import pytest

from ldm import matrix as mx
from ldm.cli import (
    EXIT_FUEL, EXIT_OK, EXIT_PARSE, EXIT_STUCK, EXIT_TYPE, RunConfig, fmt_complex, fmt_num, main,
)
from conftest import fixture_path

PAIRS = [("coin_prob", "coin_mixed"), ("o1_prob", "o1_mixed"),
         ("o2_prob", "o2_mixed"), ("teleport_prob", "teleport_mixed")]


@pytest.fixture
def write(tmp_path):
    def _write(src, name="t.ldm"):
        p = tmp_path / name
        p.write_text(src)
        return str(p)
    return _write


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def density_of(capsys, path):
    code, out, _ = run(capsys, "run", path, "--output", "json")
    assert code == EXIT_OK
    d = json.loads(out)["density"]
    return np.array([[complex(*z) for z in row] for row in d["entries"]])


class TestTypecheck:
    def test_teleport(self, capsys):
        code, out, _ = run(capsys, "typecheck", fixture_path("teleport_prob"))
        assert code == EXIT_OK and out.strip() == "3"

    def test_function_type(self, capsys, write):
        code, out, _ = run(capsys, "typecheck", write(r"\x. U[CNOT] x"))
        assert code == EXIT_OK and out.strip() == "2 -o 2"

    def test_affine_violation_json(self, capsys, write):
        code, out, _ = run(capsys, "typecheck", write(r"\x. x >< x"), "--output", "json")
        assert code == EXIT_TYPE
        doc = json.loads(out)
        assert doc["code"] == "AffineViolation" and len(doc["uses"]) == 2

    def test_parse_error_position(self, capsys, write):
        code, _, err = run(capsys, "typecheck", write("U[X] (|0>"))
        assert code == EXIT_PARSE and ":1:" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "typecheck", str(tmp_path / "nope.ldm"))
        assert code == EXIT_PARSE

    def test_header_overrides_flag(self, capsys):
        code, out, _ = run(capsys, "typecheck", fixture_path("o1_mixed"), "--calculus", "prob",
                           "--output", "json")
        assert code == EXIT_OK and json.loads(out)["calculus"] == "mixed"

    def test_wrong_file_count(self, capsys):
        assert run(capsys, "equiv", fixture_path("o1_prob"))[0] == EXIT_PARSE


class TestRun:
    def test_coin_distribution(self, capsys):
        code, out, _ = run(capsys, "run", fixture_path("coin_prob"), "--output", "json")
        doc = json.loads(out)
        assert code == EXIT_OK
        probs = {d["term"]: d["prob"] for d in doc["distribution"]}
        assert probs["|0>"] == pytest.approx(5 / 8, abs=1e-9)
        assert probs["|1>"] == pytest.approx(3 / 8, abs=1e-9)

    def test_text_has_twelve_digits(self, capsys):
        _, out, _ = run(capsys, "run", fixture_path("coin_prob"))
        assert "0.625" in out and "0.375" in out and "distribution:" in out

    @pytest.mark.parametrize("prob, mixed", PAIRS)
    def test_paired_fixtures_agree(self, capsys, prob, mixed):
        a = density_of(capsys, fixture_path(prob))
        b = density_of(capsys, fixture_path(mixed))
        assert mx.approx_eq(a, b, 1e-7)

    def test_seeded_sample(self, capsys):
        outs = {run(capsys, "run", fixture_path("coin_prob"), "--seed", str(s))[1].strip()
                for s in range(30)}
        assert outs <= {"|0>", "|1>"} and len(outs) == 2
        a = run(capsys, "run", fixture_path("coin_prob"), "--seed", "7")[1]
        b = run(capsys, "run", fixture_path("coin_prob"), "--seed", "7")[1]
        assert a == b

    def test_fuel(self, capsys):
        assert run(capsys, "run", fixture_path("coin_prob"), "--fuel", "2")[0] == EXIT_FUEL
        assert run(capsys, "run", fixture_path("coin_mixed"), "--fuel", "2")[0] == EXIT_FUEL

    def test_bare_measurement_in_mixed(self, capsys, write):
        code, _, err = run(capsys, "run", write("#calculus: mixed\nmeas[1] |+>"))
        assert code == EXIT_STUCK and "MeasurementNotObservable" in err

    def test_stuck_function(self, capsys, write):
        assert run(capsys, "run", write(r"\x. U[H] x"))[0] == EXIT_STUCK

    def test_invalid_fuel(self, capsys):
        assert run(capsys, "run", fixture_path("o1_prob"), "--fuel", "0")[0] == EXIT_PARSE


class TestTrace:
    def test_text(self, capsys):
        code, out, _ = run(capsys, "trace", fixture_path("o2_prob"))
        assert code == EXIT_OK and "--3/4-->" in out

    def test_json(self, capsys):
        _, out, _ = run(capsys, "trace", fixture_path("o2_prob"), "--output", "json")
        doc = json.loads(out)
        assert doc["type"] == "1" and doc["children"][0]["prob"] == 1

    def test_dot(self, capsys):
        _, out, _ = run(capsys, "trace", fixture_path("o1_prob"), "--output", "dot")
        assert out.startswith("digraph") and out.count("->") == 6

    def test_mixed_log(self, capsys):
        _, out, _ = run(capsys, "trace", fixture_path("coin_mixed"), "--output", "json")
        recs = [json.loads(line) for line in out.splitlines()]
        assert recs[-1]["rule"] == "sum-density" and len(recs) == 10


class TestDenote:
    def test_merged(self, capsys):
        code, out, _ = run(capsys, "denote", fixture_path("coin_prob"), "--output", "json")
        doc = json.loads(out)
        assert code == EXIT_OK
        assert [t["p"] for t in doc["triplets"]] == pytest.approx([5 / 8, 3 / 8])

    def test_unmerged(self, capsys):
        _, out, _ = run(capsys, "denote", fixture_path("coin_prob"), "--no-merge")
        assert out.count(", eps, ") == 6

    def test_function(self, capsys, write):
        code, out, _ = run(capsys, "denote", write(r"\x. U[X] x"))
        assert code == EXIT_OK
        assert "(1, eps, \\x. U[X] x)" in out and "density: none" in out


class TestEquiv:
    def test_operator_sum(self, capsys):
        code, out, _ = run(capsys, "equiv", fixture_path("o1_prob"), fixture_path("o2_prob"))
        assert code == EXIT_OK and out.startswith("EQUIVALENT")

    def test_across_calculi(self, capsys):
        code, _, _ = run(capsys, "equiv", fixture_path("o1_prob"), fixture_path("o2_mixed"))
        assert code == EXIT_OK

    def test_distinct(self, capsys, write):
        code, out, _ = run(capsys, "equiv", write("|0>", "a.ldm"), write("|1>", "b.ldm"), "--output", "json")
        doc = json.loads(out)
        assert code == EXIT_TYPE and doc["verdict"] == "DISTINCT" and doc["max_deviation"] == 1

    def test_type_mismatch(self, capsys, write):
        code, _, _ = run(capsys, "equiv", fixture_path("teleport_prob"), write("|0>"))
        assert code == EXIT_TYPE

    def test_teleport_against_literal(self, capsys, write):
        lit = write(
            "rho[2]{ 1/4, 0, 0, 0 ; 0, 1/4, 0, 0 ; 0, 0, 1/4, 0 ; 0, 0, 0, 1/4 }"
            " >< rho[1]{ 3/4, sqrt(3)/4 ; sqrt(3)/4, 1/4 }")
        code, out, _ = run(capsys, "equiv", fixture_path("teleport_prob"), lit)
        assert code == EXIT_OK, out

    def test_tolerance_flag(self, capsys, write):
        a, b = write("|0>", "a.ldm"), write("rho[1]{ 0.9999, 0 ; 0, 0.0001 }", "b.ldm")
        assert run(capsys, "equiv", a, b)[0] == EXIT_TYPE
        assert run(capsys, "equiv", a, b, "--tol", "1e-3")[0] == EXIT_OK
        assert mx.get_tolerance() == mx.DEFAULT_TOLERANCE


def test_number_formatting():
    assert fmt_num(5 / 8) == "0.625"
    assert fmt_num(1 / 3) == "0.333333333333"
    assert fmt_complex(0.5j) == "0.5i"
    assert fmt_complex(1 - 2j) == "1-2i"


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(tolerance=0)
    with pytest.raises(ValueError):
        RunConfig(calculus="quantum")
