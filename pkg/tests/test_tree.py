import json
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpmix.data import Paradigm, Task, category_labels
from gpmix.tree import (Component, LatentPath, ProcessProbs, TreeError, enumerate_paths,
                        event_probabilities, p_yes_no_regress, path_posterior,
                        symbolic_paths, tree_to_json)

PROBS = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def pp_from(vals):
    return ProcessProbs(*vals)


def random_pp(rng, paradigm=None):
    v = rng.uniform(0, 1, 8)
    if paradigm is not None and not paradigm.allows_regression:
        v[2] = v[7] = 0.0
    return pp_from(v)


class TestEnumeration:
    def test_deterministic_judgment_single_path(self):
        pp = ProcessProbs(1, 0, 0, 0.5, 0.5, 0.5, 0.5, 0)
        paths = [p for p in enumerate_paths(pp, Paradigm.BSPR, Task.JUDGMENT) if p.prob > 0]
        assert len(paths) == 1
        p = paths[0]
        assert p.prob == pytest.approx(1.0)
        assert (p.comp_crit, p.comp_spill) == (Component.C2, Component.C2)
        assert p.outcome_good == 1.0

    def test_inattentive_guessing(self):
        pp = ProcessProbs(0, 0.5, 0, 0.5, 0.5, 0.5, 0.5, 0)
        paths = [p for p in enumerate_paths(pp, Paradigm.ET, Task.QUESTION) if p.prob > 0]
        assert len(paths) == 1
        p = paths[0]
        assert (p.comp_crit, p.comp_spill) == (Component.C1, Component.C1)
        assert p.outcome_dist == (0.5, 0.5)

    @given(vals=st.tuples(*[PROBS] * 8))
    @settings(max_examples=200, deadline=None)
    def test_partition_property(self, vals):
        pp = pp_from(vals)
        for paradigm, task in [(Paradigm.ET, Task.QUESTION), (Paradigm.BSPR, Task.JUDGMENT),
                               (Paradigm.ET, Task.NONE)]:
            total = sum(p.prob for p in enumerate_paths(pp, paradigm, task))
            assert total == pytest.approx(1.0, abs=1e-12)

    @given(vals=st.tuples(*[PROBS] * 6))
    @settings(max_examples=100, deadline=None)
    def test_partition_nonregressive(self, vals):
        pp = ProcessProbs(vals[0], vals[1], 0.0, vals[2], vals[3], vals[4], vals[5], 0.0)
        for paradigm, task in [(Paradigm.SPR, Task.QUESTION), (Paradigm.SPR, Task.JUDGMENT),
                               (Paradigm.MAZE, Task.NONE)]:
            total = sum(p.prob for p in enumerate_paths(pp, paradigm, task))
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_montecarlo_branch_oracle(self):
        from gpmix.simulate import simulate_category_counts

        rng = np.random.default_rng(42)
        n = 10**5
        for paradigm, task in [(Paradigm.ET, Task.QUESTION), (Paradigm.BSPR, Task.JUDGMENT),
                               (Paradigm.SPR, Task.QUESTION)]:
            pp = random_pp(rng, paradigm)
            counts = simulate_category_counts(pp, paradigm, task, n, rng)
            ev = event_probabilities(pp, paradigm, task)
            for lab in ev.labels:
                se = max(math.sqrt(ev[lab] * (1 - ev[lab]) / n), 1e-12)
                assert abs(counts[lab] / n - ev[lab]) < 3 * se + 1e-9

    def test_invalid_probability_rejected(self):
        with pytest.raises(TreeError):
            enumerate_paths(ProcessProbs(1.2, 0, 0, 0, 0, 0, 0, 0),
                            Paradigm.SPR, Task.QUESTION)
        with pytest.raises(TreeError):
            enumerate_paths(ProcessProbs(0.5, 0.5, 0.3, 0.5, 0.5, 0.5, 0.5, 0.0),
                            Paradigm.SPR, Task.QUESTION)

    def test_regression_observed_is_base_or_overt(self):
        pp = ProcessProbs(0.9, 0.5, 0.4, 0.5, 0.5, 0.5, 0.3, 0.2)
        for p in enumerate_paths(pp, Paradigm.ET, Task.QUESTION):
            expected = bool(p.branches["base_regress"]) or bool(p.branches["overt"])
            assert p.regression_observed == expected


class TestEventProbabilities:
    def test_deterministic_good(self):
        pp = ProcessProbs(1, 0, 0, 0.5, 0.5, 0.5, 0, 0)
        ev = event_probabilities(pp, Paradigm.ET, Task.QUESTION)
        assert ev["good_noreg"] == pytest.approx(1.0)
        assert sum(ev.probs) == pytest.approx(1.0)

    def test_forced_bad_split_by_base_regression(self):
        pp = ProcessProbs(1, 1, 0, 0, 0.5, 0, 0.3, 0.2)
        ev = event_probabilities(pp, Paradigm.BSPR, Task.QUESTION)
        assert ev["bad_noreg"] == pytest.approx(0.8, abs=1e-12)
        assert ev["bad_reg"] == pytest.approx(0.2, abs=1e-12)

    def test_matches_exhaustive_sum(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            pp = random_pp(rng)
            paths = enumerate_paths(pp, Paradigm.BSPR, Task.JUDGMENT)
            ev = event_probabilities(pp, Paradigm.BSPR, Task.JUDGMENT)
            brute = {lab: 0.0 for lab in ev.labels}
            for p in paths:
                good, bad = p.outcome_dist
                reg = "reg" if p.regression_observed else "noreg"
                brute[f"good_{reg}"] += p.prob * good
                brute[f"bad_{reg}"] += p.prob * bad
            for lab in ev.labels:
                assert ev[lab] == pytest.approx(brute[lab], abs=1e-12)

    def test_spr_collapses_regression(self):
        pp = ProcessProbs(0.8, 0.6, 0, 0.4, 0.5, 0.3, 0.2, 0)
        ev = event_probabilities(pp, Paradigm.SPR, Task.QUESTION)
        assert ev.labels == ("good", "bad")
        assert sum(ev.probs) == pytest.approx(1.0)

    def test_maze_degenerate(self):
        pp = ProcessProbs(0.8, 0.6, 0, 0.4, 0.5, 0.3, 0.2, 0)
        ev = event_probabilities(pp, Paradigm.MAZE, Task.NONE)
        assert ev.labels == ("all",)
        assert ev["all"] == pytest.approx(1.0)

    def test_monotone_in_regression_probs(self):
        rng = np.random.default_rng(3)
        base = random_pp(rng)
        def p_reg(pp):
            ev = event_probabilities(pp, Paradigm.ET, Task.QUESTION)
            return ev["good_reg"] + ev["bad_reg"]
        import dataclasses
        for field, lo, hi in [("p_base_regress", 0.1, 0.6), ("p_overt", 0.1, 0.6)]:
            assert p_reg(dataclasses.replace(base, **{field: hi})) > \
                p_reg(dataclasses.replace(base, **{field: lo}))


class TestFormula:
    def test_forced_substitution(self):
        pp = ProcessProbs(1, 1, 0, 0, 0.5, 0, 0.3, 0.2)
        assert p_yes_no_regress(pp) == pytest.approx(0.8, abs=1e-12)

    def test_guessing_only(self):
        pp = ProcessProbs(0, 0.5, 0.2, 0.5, 0.5, 0.5, 0.5, 0)
        assert p_yes_no_regress(pp) == pytest.approx(0.5, abs=1e-12)

    def test_equals_enumeration_on_grid(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            pp = random_pp(rng)
            ev = event_probabilities(pp, Paradigm.ET, Task.QUESTION)
            assert abs(p_yes_no_regress(pp) - ev["bad_noreg"]) < 1e-12

    @given(vals=st.tuples(*[PROBS] * 8))
    @settings(max_examples=200, deadline=None)
    def test_equals_enumeration_property(self, vals):
        pp = pp_from(vals)
        ev = event_probabilities(pp, Paradigm.BSPR, Task.QUESTION)
        assert abs(p_yes_no_regress(pp) - ev["bad_noreg"]) < 1e-12


class TestJudgmentBlocking:
    def test_two_bad_noreg_path_families(self):
        pp = ProcessProbs(0.9, 0.5, 0.3, 0.4, 0.6, 0.5, 0.3, 0.1)
        paths = enumerate_paths(pp, Paradigm.ET, Task.JUDGMENT)
        families = set()
        for p in paths:
            if p.regression_observed or p.prob == 0:
                continue
            good, bad = p.outcome_dist
            if bad > 0:
                families.add((p.branches["attentive"], p.branches["gp"],
                              p.branches["success"]))
        assert families == {(False, None, None), (True, True, False)}

    def test_no_infer_branch_for_judgment(self):
        for sym in symbolic_paths(True, Task.JUDGMENT):
            assert sym.branches["infer"] is None


class TestPathPosterior:
    def test_deterministic_single_path(self):
        pp = ProcessProbs(1, 0, 0, 0.5, 0.5, 0.5, 0, 0)
        post = path_posterior(pp, Paradigm.ET, Task.QUESTION, "good_noreg")
        assert len(post) == 1
        assert post[0][1] == pytest.approx(1.0)

    def test_impossible_category_errors(self):
        pp = ProcessProbs(0.9, 0.5, 0.0, 0.4, 0.5, 0.5, 0.3, 0.0)
        with pytest.raises(TreeError, match="zero probability"):
            path_posterior(pp, Paradigm.ET, Task.QUESTION, "good_reg")

    def test_responsibilities_match_oracle(self):
        rng = np.random.default_rng(5)
        pp = random_pp(rng)
        paths = enumerate_paths(pp, Paradigm.BSPR, Task.QUESTION)
        for cat in category_labels(Paradigm.BSPR, Task.QUESTION):
            post = path_posterior(pp, Paradigm.BSPR, Task.QUESTION, cat)
            total = sum(r for _, r in post)
            assert total == pytest.approx(1.0, abs=1e-12)
            joint = []
            for p in paths:
                good, bad = p.outcome_dist
                match = (good if cat.startswith("good") else bad) * (
                    1.0 if p.regression_observed == cat.endswith("_reg") else 0.0)
                joint.append(p.prob * match)
            z = sum(joint)
            expected = [j / z for j in joint if j > 0]
            got = [r for _, r in post]
            assert got == pytest.approx(expected, abs=1e-12)


class TestRuntimeAndDump:
    def test_formula_equivalence_is_fast(self):
        rng = np.random.default_rng(0)
        pps = [random_pp(rng) for _ in range(1000)]
        t0 = time.perf_counter()
        for pp in pps:
            ev = event_probabilities(pp, Paradigm.ET, Task.QUESTION)
            assert abs(p_yes_no_regress(pp) - ev["bad_noreg"]) < 1e-12
        assert time.perf_counter() - t0 < 1.0

    def test_json_dump_structure(self):
        out = json.loads(tree_to_json(Paradigm.ET, Task.QUESTION))
        assert out["n_paths"] == len(symbolic_paths(True, Task.QUESTION))
        assert out["categories"] == ["good_noreg", "good_reg", "bad_noreg", "bad_reg"]
        assert all("probability" in p and "comp_crit" in p for p in out["paths"])

    def test_json_dump_numeric(self):
        pp = ProcessProbs(1, 0, 0, 0.5, 0.5, 0.5, 0, 0)
        out = json.loads(tree_to_json(Paradigm.ET, Task.QUESTION, pp))
        total = sum(p["numeric_probability"] for p in out["paths"])
        assert total == pytest.approx(1.0, abs=1e-12)
