import json
from pathlib import Path

import pytest
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from ldm.cli import fmt_num, main
from ldm.parser import parse
from conftest import fixture_path, fixture_source

DOCS = Path(__file__).resolve().parent.parent / "docs"
SCHEMAS = {p.name: json.loads(p.read_text()) for p in (DOCS / "schemas").glob("*.json")}
REGISTRY = Registry().with_resources(
    (name, Resource.from_contents(doc)) for name, doc in SCHEMAS.items()
)


def validate(instance, name):
    Draft202012Validator(SCHEMAS[name], registry=REGISTRY).validate(instance)


def json_out(capsys, *argv):
    code = main([*argv, "--output", "json"])
    return code, capsys.readouterr().out


@pytest.fixture
def write(tmp_path):
    def _write(src):
        p = tmp_path / "t.ldm"
        p.write_text(src)
        return str(p)
    return _write


def test_schemas_are_valid():
    for doc in SCHEMAS.values():
        Draft202012Validator.check_schema(doc)


@pytest.mark.parametrize("name", ["coin_prob", "o1_mixed", "teleport_prob"])
def test_typecheck(capsys, name):
    _, out = json_out(capsys, "typecheck", fixture_path(name))
    validate(json.loads(out), "typecheck.schema.json")


@pytest.mark.parametrize("name", ["coin_prob", "coin_mixed", "teleport_mixed"])
def test_run(capsys, name):
    _, out = json_out(capsys, "run", fixture_path(name))
    validate(json.loads(out), "run.schema.json")


def test_run_seeded(capsys):
    _, out = json_out(capsys, "run", fixture_path("coin_prob"), "--seed", "1")
    validate(json.loads(out), "run.schema.json")


def test_run_stuck(capsys, write):
    _, out = json_out(capsys, "run", write("#calculus: mixed\nmeas[1] |+>"))
    validate(json.loads(out), "run.schema.json")


def test_trace(capsys):
    _, out = json_out(capsys, "trace", fixture_path("coin_prob"))
    validate(json.loads(out), "trace.schema.json")


def test_step_log(capsys):
    _, out = json_out(capsys, "trace", fixture_path("teleport_mixed"))
    for line in out.splitlines():
        validate(json.loads(line), "steplog.schema.json")


@pytest.mark.parametrize("src", [None, r"\x. U[X] x"])
def test_denote(capsys, write, src):
    path = fixture_path("coin_prob") if src is None else write(src)
    _, out = json_out(capsys, "denote", path)
    validate(json.loads(out), "denote.schema.json")


def test_equiv(capsys):
    _, out = json_out(capsys, "equiv", fixture_path("o1_prob"), fixture_path("o2_prob"))
    validate(json.loads(out), "equiv.schema.json")


@pytest.mark.parametrize("src", [r"\x. x >< x", "U[X] (|0>", "y", "letcase x = meas[2] |00> in { x ; x }"])
def test_errors(capsys, write, src):
    _, out = json_out(capsys, "typecheck", write(src))
    validate(json.loads(out), "error.schema.json")


def test_text_and_json_numerics_agree(capsys):
    path = fixture_path("o2_prob")
    main(["run", path])
    text = capsys.readouterr().out
    _, out = json_out(capsys, "run", path)
    for d in json.loads(out)["distribution"]:
        assert f"  {fmt_num(d['prob'])}  {d['term']}" in text


def test_fixtures_parse_under_documented_grammar():
    # every shipped fixture declares its calculus and parses
    for name in ["coin_prob", "coin_mixed", "o1_prob", "o2_prob",
                 "o1_mixed", "o2_mixed", "teleport_prob", "teleport_mixed"]:
        src = fixture_source(name)
        assert src.startswith("#calculus: ")
        parse(src)
