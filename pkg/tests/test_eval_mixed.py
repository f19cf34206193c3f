import json
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldm import matrix as mx
from ldm.denotation import fsem
from ldm.eval_mixed import (
    MEASUREMENT_NOT_OBSERVABLE, NO_RULE, Stepped, Stuck, StuckTerm, Value, is_value,
    normalize_mixed, same_normal_form, step_log, step_mixed, steps,
)
from ldm.eval_prob import FuelExhausted, IllFormedRedex
from ldm.gen import TermGen, random_density
from ldm.parser import parse
from ldm.printer import print_term
from ldm.syntax import App, LetCase, Meas, Rho, Var
from ldm.typecheck import MeasResult, infer
from conftest import load_fixture


def m(src):
    return parse(src, "mixed")


def diag(*xs):
    return np.diag(xs).astype(complex)


class TestCoinExperiment:
    def test_normal_form(self):
        nf = normalize_mixed(load_fixture("coin_mixed"))
        assert isinstance(nf, Rho)
        assert mx.approx_eq(nf.rho.mat, diag(5 / 8, 3 / 8), 1e-9)

    def test_rules(self):
        rules = [r for r, _ in steps(load_fixture("coin_mixed"))]
        assert rules == [
            "letcase-meas", "sum-density", "letcase-meas", "letcase-meas", "sum-density",
            "sum-app", "beta", "beta", "sum-density",
        ]

    def test_milestones(self):
        # the intermediate terms shown in the worked trace, with measured
        # densities already folded into single matrices
        seen = [print_term(t) for _, t in steps(load_fixture("coin_mixed"))]
        lam1 = r"\x. letcase* w = meas[1] |+> in { w ; w }"
        d = "rho[1]{ 0.75, 0.0 ; 0.0, 0.25 }"
        half = r"\x. rho[1]{ 0.5, 0.0 ; 0.0, 0.5 }"
        assert seen[1].endswith(f") {d}")
        assert seen[2] == f"sum {{ 1/2: \\x. x ; 1/2: {lam1} }} {d}"
        assert seen[4] == f"sum {{ 1/2: \\x. x ; 1/2: {half} }} {d}"
        assert seen[5] == f"sum {{ 1/2: (\\x. x) {d} ; 1/2: ({half}) {d} }}"

    def test_log_format(self):
        lines = [json.loads(x) for x in step_log(load_fixture("coin_mixed"))]
        assert lines[0]["step"] == 0 and lines[0]["rule"] is None
        assert [x["step"] for x in lines] == list(range(10))
        assert lines[-1]["term"] == "rho[1]{ 0.625, 0.0 ; 0.0, 0.375 }"


class TestOperatorSum:
    def test_both_reach_same_density(self):
        a = normalize_mixed(load_fixture("o1_mixed"))
        b = normalize_mixed(load_fixture("o2_mixed"))
        for nf in (a, b):
            assert mx.approx_eq(nf.rho.mat, diag(3 / 4, 1 / 4), 1e-9)
        assert same_normal_form(load_fixture("o1_mixed"), load_fixture("o2_mixed"))


class TestTeleportation:
    def test_normal_form(self, rho):
        nf = normalize_mixed(load_fixture("teleport_mixed"))
        assert nf.rho.n == 3
        assert mx.approx_eq(nf.rho.mat, np.kron(np.eye(4) / 4, rho.mat), 1e-9)
        assert mx.approx_eq(mx.partial_trace_front(nf.rho, 2).mat, rho.mat, 1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32))
    def test_random_inputs(self, seed):
        r = random_density(1, random.Random(seed))
        nf = normalize_mixed(App(load_fixture("teleport_mixed").fun, Rho(r)))
        assert mx.approx_eq(mx.partial_trace_front(nf.rho, 2).mat, r.mat, 1e-7)


class TestStepResults:
    def test_value(self):
        assert step_mixed(m("|0>")) == Value()
        assert step_mixed(m(r"\x. x")) == Value()

    def test_bare_measurement_is_stuck(self):
        res = step_mixed(m("meas[1] |+>"))
        assert isinstance(res, Stuck) and res.reason == MEASUREMENT_NOT_OBSERVABLE
        assert print_term(res.subterm) == "meas[1] |+>"
        assert infer({}, m("meas[1] |+>"), "mixed") == MeasResult(1, 1)

    def test_raise_on_stuck(self):
        with pytest.raises(StuckTerm, match=MEASUREMENT_NOT_OBSERVABLE):
            normalize_mixed(m("meas[1] |+>"), raise_on_stuck=True)

    def test_open_body_is_stuck(self):
        res = step_mixed(m(r"\x. U[H] x"))
        assert isinstance(res, Stuck) and res.reason == NO_RULE

    def test_stepped(self):
        res = step_mixed(m(r"(\x. x) |0>"))
        assert isinstance(res, Stepped) and res.rule == "beta" and print_term(res.term) == "|0>"

    def test_argument_before_beta(self):
        res = step_mixed(m(r"(\x. x) (U[X] |0>)"))
        assert res.rule == "unitary" and print_term(res.term) == r"(\x. x) |1>"

    def test_letcase_meas_single_outcome(self):
        res = step_mixed(m("letcase* x = meas[1] |0> in { x ; U[X] x }"))
        assert res.rule == "letcase-meas" and print_term(res.term) == "|0>"


class TestSums:
    def test_value_grammar(self):
        assert is_value(m(r"sum { 1/2: \x. \y. x >< y ; 1/2: \x. \y. y >< x }"))
        assert step_mixed(m(r"sum { 1/2: \x. \y. x >< y ; 1/2: \x. \y. y >< x }")) == Value()
        assert is_value(m(r"sum { 1/2: \x. x ; 1/2: \x. U[X] x }")) is False
        assert not is_value(m(r"sum { 1: \x. x }"))
        assert not is_value(m(r"sum { 1/2: \x. x ; 1/2: \y. y }"))

    def test_canonical_merge(self):
        res = step_mixed(m(r"sum { 1/2: \x. x ; 1/2: \y. y }"))
        assert res.rule == "sum-collapse" and print_term(res.term) == r"\x. x"

    def test_flatten(self):
        res = step_mixed(m("sum { 1/2: |0> ; 1/2: sum { 1/2: |0> ; 1/2: |1> } }"))
        assert res.rule == "sum-canonical"

    def test_density_fold(self):
        res = step_mixed(m("sum { 1/4: |0> ; 3/4: |1> }"))
        assert res.rule == "sum-density"
        assert mx.approx_eq(res.term.rho.mat, diag(1 / 4, 3 / 4))

    def test_distribution_over_argument(self):
        res = step_mixed(m(r"sum { 1/2: \x. x ; 1/2: \x. U[X] x } |0>"))
        assert res.rule == "sum-app"

    def test_sum_scrutinee_extension(self):
        t = m(r"letcase* x = sum { 1/2: meas[1] |0> ; 1/2: meas[1] |1> } in { x ; U[X] x }")
        assert print_term(normalize_mixed(t)) == "|0>"
        res = step_mixed(t, sum_scrutinee=False)
        assert isinstance(res, Stuck)


class TestErrors:
    def test_fuel(self):
        with pytest.raises(FuelExhausted):
            normalize_mixed(load_fixture("coin_mixed"), fuel=3)

    def test_non_star_letcase(self):
        t = LetCase("x", Meas(1, Rho(mx.ket("0"))), (Var("x"), Var("x")), False)
        with pytest.raises(IllFormedRedex):
            step_mixed(t)

    def test_gate_arity(self):
        with pytest.raises(IllFormedRedex):
            step_mixed(m("U[CNOT] |0>"))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32))
def test_generated_terms_normalize_to_densities(seed):
    t = TermGen(random.Random(seed), "mixed").closed()
    nf = normalize_mixed(t)
    assert isinstance(nf, Rho)
    assert mx.approx_eq(nf.rho.mat, fsem(t).mat, 1e-7)
