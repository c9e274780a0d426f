import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from speakerprint.features import FeatureVector
from speakerprint.registry import (
    INCONCLUSIVE, MATCHED, NEW_DEVICE, EmptyRegistryError, Registry, lsh_build, lsh_query,
)
from speakerprint.simbench import simulate_features

SID = "comb:14000:21000:100@44100"


def unit(v, sid=SID):
    v = np.asarray(v, dtype=float)
    return FeatureVector(v / np.linalg.norm(v), sid)


E = np.eye(71)


def test_enroll_and_sizes():
    reg = Registry()
    reg.enroll(unit(np.ones(71)), "a")
    assert len(reg) == 1
    rng = np.random.default_rng(0)
    for _ in range(60):
        reg.enroll(unit(rng.uniform(size=71)), "b")
    assert len(reg.profiles["b"].enrolled) == 60
    assert reg.feature_count() == 61


def test_enroll_rejects_mismatch():
    reg = Registry()
    reg.enroll(unit(np.ones(71)), "a")
    with pytest.raises(ValueError):
        reg.enroll(unit(np.ones(70)), "a")
    with pytest.raises(ValueError):
        reg.enroll(unit(np.ones(71), "other"), "b")


def test_nearest_identical_and_orthonormal():
    reg = Registry()
    reg.enroll(unit(E[0]), "a")
    reg.enroll(unit(E[1]), "b")
    assert reg.nearest_bruteforce(unit(E[0])) == ("a", 1.0)
    d = reg.identify(unit(E[0]), 0.7)
    assert d.outcome == MATCHED and d.device_id == "a"
    assert d.runner_up_similarity == pytest.approx(1 - np.sqrt(2))
    assert reg.identify(unit(E[2]), 0.7).outcome == NEW_DEVICE


def test_tie_break_is_lexicographic():
    reg = Registry()
    reg.enroll(unit(E[0] + E[1]), "zeta")
    reg.enroll(unit(E[0] + E[1]), "alpha")
    assert reg.nearest_bruteforce(unit(E[0] + E[1]))[0] == "alpha"


def test_empty_registry():
    reg = Registry()
    with pytest.raises(EmptyRegistryError):
        reg.nearest_bruteforce(unit(E[0]))
    d = reg.identify(unit(E[0]), 0.7)
    assert d.outcome == NEW_DEVICE and d.best_similarity == -np.inf
    with pytest.raises(EmptyRegistryError):
        lsh_build(reg)


def test_identify_does_not_mutate():
    reg = Registry()
    reg.enroll(unit(E[0]), "a")
    reg.identify(unit(E[3]), 0.7)
    assert len(reg) == 1 and reg.feature_count() == 1


def test_alpha_range():
    reg = Registry()
    reg.enroll(unit(E[0]), "a")
    for bad in (1.0, -1.0, 2.0):
        with pytest.raises(ValueError):
            reg.identify(unit(E[0]), bad)


@pytest.fixture(scope="module")
def small_registry(fleet50):
    reg = Registry()
    queries = []
    for i, m in enumerate(fleet50[:10]):
        rows = simulate_features(m, 4, seed=i)
        reg.enroll(FeatureVector(rows[0], SID), m.device_label)
        queries += [(FeatureVector(r, SID), m.device_label) for r in rows[1:]]
    return reg, queries


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99), st.integers(0, 29))
def test_identify_monotone_in_alpha(small_registry, a1, a2, qi):
    reg, queries = small_registry
    lo, hi = sorted((a1, a2))
    q = queries[qi][0]
    if not reg.identify(q, lo).matched:
        assert not reg.identify(q, hi).matched


def test_multisample_rules(small_registry):
    reg, queries = small_registry
    q, label = queries[0]
    single = reg.identify(q, 0.7)
    multi = reg.identify_multisample([q], 0.7)
    assert (multi.outcome, multi.device_id, multi.best_similarity) == (
        single.outcome, single.device_id, single.best_similarity)
    both = reg.identify_multisample([q, queries[1][0]], 0.7)
    assert both.outcome == MATCHED and both.device_id == label and both.samples == 2
    stranger = unit(E[5])
    assert reg.identify_multisample([stranger, stranger], 0.7).outcome == NEW_DEVICE
    assert reg.identify_multisample([q, stranger], 0.7).outcome == INCONCLUSIVE
    other = queries[-1][0]
    assert reg.identify_multisample([q, other], 0.7).outcome == INCONCLUSIVE
    with pytest.raises(ValueError):
        reg.identify_multisample([], 0.7)


def test_multisample_identical_to_enrolled():
    reg = Registry()
    f = unit(np.arange(1, 72))
    reg.enroll(f, "a")
    assert reg.identify_multisample([f, f], 0.7).outcome == MATCHED


def test_persistence_round_trip(tmp_path, small_registry):
    src, queries = small_registry
    path = tmp_path / "reg.jsonl"
    reg = Registry(path)
    for pid, prof in src.profiles.items():
        for f in prof.enrolled:
            reg.enroll(f, pid)
    back = Registry.load(path)
    assert back.feature_count() == src.feature_count()
    for q, _ in queries + [(unit(E[4]), None)]:
        a, b = src.identify(q, 0.7), back.identify(q, 0.7)
        assert (a.outcome, a.device_id, a.best_similarity) == (b.outcome, b.device_id, b.best_similarity)


def test_load_missing_file_is_empty(tmp_path):
    reg = Registry.load(tmp_path / "none.jsonl")
    assert len(reg) == 0
    reg.enroll(unit(E[0]), "a")
    assert Registry.load(tmp_path / "none.jsonl").feature_count() == 1


def test_centroid_target():
    reg = Registry(match_target="centroid")
    reg.enroll(unit(E[0] + 0.1 * E[1]), "a")
    reg.enroll(unit(E[0] + 0.2 * E[2]), "a")
    reg.enroll(unit(E[3]), "b")
    matrix, ids = reg.vectors()
    assert list(ids) == ["a", "b"]
    assert reg.identify(unit(E[0]), 0.7).device_id == "a"


def test_lsh_single_profile():
    reg = Registry()
    f = unit(np.arange(1, 72))
    reg.enroll(f, "only")
    idx = lsh_build(reg, seed=3)
    d = lsh_query(idx, f, 0.7)
    assert (d.outcome, d.device_id) == (MATCHED, "only")


def test_lsh_zero_planes_is_bruteforce(small_registry):
    reg, queries = small_registry
    idx = lsh_build(reg, planes=0, tables=1)
    for q, _ in queries:
        a, b = idx.query(q, 0.7), reg.identify(q, 0.7)
        assert (a.outcome, a.device_id, a.best_similarity) == (b.outcome, b.device_id, b.best_similarity)
        assert len(idx.candidates(q)) == reg.feature_count()


def test_lsh_agreement_on_50_devices(fleet50):
    reg = Registry()
    queries = []
    for i, m in enumerate(fleet50):
        rows = simulate_features(m, 11, seed=100 + i)
        reg.enroll(FeatureVector(rows[0], SID), m.device_label)
        queries += [FeatureVector(r, SID) for r in rows[1:]]
    idx = lsh_build(reg, seed=11)
    agree = 0
    for q in queries:
        a, b = idx.query(q, 0.7), reg.identify(q, 0.7)
        agree += (a.outcome, a.device_id) == (b.outcome, b.device_id)
    assert len(queries) == 500
    assert agree / 500 >= 0.99
    # candidate sets are a strict subset on average
    mean_cands = np.mean([len(idx.candidates(q)) for q in queries[:50]])
    assert mean_cands < reg.feature_count()
