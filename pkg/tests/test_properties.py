import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldm.gen import TermGen
from ldm.parser import parse
from ldm.properties import Report, check_mixed, check_prob, substitution_gap
from ldm.typecheck import MeasResult, Qubits
from conftest import load_fixture

BASE = [Qubits(1), Qubits(2), MeasResult(1, 1), MeasResult(1, 2), MeasResult(2, 2)]


@pytest.mark.parametrize("name", ["coin_prob", "o1_prob", "o2_prob", "teleport_prob"])
def test_prob_fixtures_clean(name):
    rep = check_prob(load_fixture(name))
    assert rep.violations == {} and rep.steps > 0


@pytest.mark.parametrize("name", ["coin_mixed", "o1_mixed", "o2_mixed", "teleport_mixed"])
def test_mixed_fixtures_clean(name):
    rep = check_mixed(load_fixture(name))
    assert rep.violations == {} and rep.steps > 0


def test_checker_reports_untyped_input():
    assert check_prob(parse(r"\x. x >< x")).count("untyped-input") == 1
    assert check_mixed(parse("x", "mixed")).count("untyped-input") == 1


def test_checker_detects_progress_gap():
    # typed closed arrow terms with stuck bodies are outside the generated corpus
    assert check_prob(parse(r"\x. U[H] x")).count("progress") == 1
    assert check_mixed(parse(r"\x. U[H] x", "mixed")).count("progress") == 1


def test_measurement_types_exempt_from_mixed_progress():
    assert check_mixed(parse("meas[1] |+>", "mixed")).violations == {}


def test_report_merge():
    a, b = Report(terms=1, steps=2), Report(terms=2, steps=3)
    b.add("weight", parse("|0>"))
    a.merge(b)
    assert (a.terms, a.steps, a.count("weight")) == (3, 5, 1)


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32))
def test_prob_soundness(seed):
    rep = check_prob(TermGen(random.Random(seed)).closed())
    assert rep.violations == {}


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32))
def test_mixed_soundness(seed):
    rep = check_mixed(TermGen(random.Random(seed), "mixed").closed())
    assert rep.violations == {}


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(["prob", "mixed"]), st.sampled_from(BASE))
def test_semantic_substitution(seed, calculus, a):
    g = TermGen(random.Random(seed), calculus)
    t = g.open("x0", a)
    r = g.closed(a)
    assert substitution_gap(t, "x0", r) <= 1e-7
