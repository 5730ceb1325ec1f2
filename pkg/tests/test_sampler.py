from __future__ import annotations

import numpy as np
import pytest

from pollsim.distribution import POOL_SCHEMA, JointTable
from pollsim.sampler import (
    RELAXATION_ORDER,
    SamplingError,
    VoterProfile,
    build_plan,
    draw,
    largest_remainder,
    read_samples,
    write_samples,
)
from pollsim.taxonomy import ATTRIBUTES, Taxonomy
from tests.test_corpus import _user


def _tagged_user(uid, cell):
    user = _user(uid, [f"thought {i} unique{uid}{i}" for i in range(3)])
    user.tags = dict(zip(ATTRIBUTES, cell))
    return user


def _joint(values=None, state="Alderton"):
    taxonomy = Taxonomy()
    if values is None:
        values = np.ones(taxonomy.shape)
    return JointTable(state=state, values=values)


def _pool_covering(cells, per_cell=3, prefix="p"):
    pool = []
    for i, cell in enumerate(cells):
        for j in range(per_cell):
            pool.append(_tagged_user(f"{prefix}{i:04d}x{j}", cell))
    return pool


class TestLargestRemainder:
    def test_uniform_four_cells_total_ten(self):
        assert largest_remainder([0.25] * 4, 10) == [3, 3, 2, 2]

    def test_exact_weights_unchanged(self):
        assert largest_remainder([2, 3, 5], 10) == [2, 3, 5]

    def test_total_preserved(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            w = rng.uniform(0, 1, size=rng.integers(2, 20))
            n = int(rng.integers(1, 500))
            quotas = largest_remainder(list(w), n)
            assert sum(quotas) == n
            assert all(q >= 0 for q in quotas)

    def test_each_quota_within_one_of_ideal(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            w = rng.uniform(0.01, 1, size=8)
            n = int(rng.integers(1, 200))
            quotas = largest_remainder(list(w), n)
            ideal = n * w / w.sum()
            assert np.all(np.abs(np.asarray(quotas) - ideal) < 1.0)

    def test_all_zero_weights_rejected(self):
        with pytest.raises(SamplingError):
            largest_remainder([0.0, 0.0], 5)


class TestBuildPlan:
    def test_population_fraction_arithmetic(self):
        plan = build_plan(_joint(), 10_000_000, 1e-4, seed=1)
        assert plan.total_sample_size == 1000

    def test_national_scale_fraction(self):
        plan = build_plan(_joint(), 330_000_000, 1e-3, seed=1)
        assert plan.total_sample_size == 330_000

    def test_minimum_one(self):
        plan = build_plan(_joint(), 100, 1e-6, seed=1)
        assert plan.total_sample_size == 1

    def test_quotas_sum_to_total(self):
        plan = build_plan(_joint(), 123_456, 1e-3, seed=1)
        assert sum(plan.quotas) == plan.total_sample_size == 123

    def test_bad_fraction(self):
        with pytest.raises(SamplingError):
            build_plan(_joint(), 1000, 0.0, seed=1)
        with pytest.raises(SamplingError):
            build_plan(_joint(), 1000, 1.5, seed=1)

    def test_degenerate_joint(self):
        taxonomy = Taxonomy()
        joint = JointTable(state="XX", values=np.zeros(taxonomy.shape))
        with pytest.raises(SamplingError):
            build_plan(joint, 1000, 1e-3, seed=1)

    def test_quota_marginals_track_joint_marginals(self):
        rng = np.random.default_rng(17)
        taxonomy = Taxonomy()
        for _ in range(10):
            values = rng.uniform(0.1, 2.0, size=taxonomy.shape)
            joint = JointTable(state="XX", values=values)
            plan = build_plan(joint, 250_000, 1e-3, seed=1)
            n = plan.total_sample_size
            quota_arr = np.asarray(plan.quotas, float).reshape(taxonomy.shape)
            n_cells = quota_arr.size
            probs = values / values.sum()
            for axis in range(len(ATTRIBUTES)):
                other = tuple(i for i in range(len(ATTRIBUTES)) if i != axis)
                sample_marginal = quota_arr.sum(axis=other)
                target = n * probs.sum(axis=other)
                assert np.all(np.abs(sample_marginal - target) < n_cells)


class TestDraw:
    def test_exact_cells_when_quota_fits(self):
        cells = list(POOL_SCHEMA.cells())[:4]
        pool = _pool_covering(cells, per_cell=3)
        quotas = [0] * len(list(POOL_SCHEMA.cells()))
        for i in range(4):
            quotas[i] = 2
        plan = build_plan(_joint(), 8, 1.0, seed=3)
        plan.quotas = quotas
        plan.total_sample_size = 8
        profiles = draw(plan, pool)
        assert len(profiles) == 8
        assert all(p.provenance["kind"] == "exact-cell" for p in profiles)

    def test_relaxation_on_empty_cell(self):
        taxonomy = Taxonomy()
        cells = list(POOL_SCHEMA.cells())
        target_cell = cells[0]
        # donors share everything except partisanship
        donor_cell = list(target_cell)
        donor_cell[ATTRIBUTES.index("partisanship")] = "Republican"
        assert target_cell[ATTRIBUTES.index("partisanship")] != "Republican"
        pool = [_tagged_user(f"d{i}", tuple(donor_cell)) for i in range(5)]
        values = np.zeros(taxonomy.shape)
        values[tuple(taxonomy.index(a, c) for a, c in zip(ATTRIBUTES, target_cell))] = 1.0
        joint = JointTable(state="Alderton", values=values)
        plan = build_plan(joint, 2, 1.0, seed=3)
        profiles = draw(plan, pool)
        assert len(profiles) == 2
        for p in profiles:
            assert p.provenance == {"kind": "relaxed", "dropped": ["partisanship"]}
            # persona keeps the target cell's tags, not the donor's
            assert p.tags == dict(zip(ATTRIBUTES, target_cell))

    def test_same_seed_same_multiset(self):
        cells = list(POOL_SCHEMA.cells())[:6]
        pool = _pool_covering(cells, per_cell=5)
        joint = _joint()
        plan_a = build_plan(joint, 20, 1.0, seed=9)
        plan_b = build_plan(joint, 20, 1.0, seed=9)
        ids_a = sorted(p.user_id for p in draw(plan_a, pool))
        ids_b = sorted(p.user_id for p in draw(plan_b, pool))
        assert ids_a == ids_b
        plan_c = build_plan(joint, 20, 1.0, seed=10)
        ids_c = sorted(p.user_id for p in draw(plan_c, pool))
        assert ids_c != ids_a

    def test_pool_order_does_not_matter(self):
        cells = list(POOL_SCHEMA.cells())[:6]
        pool = _pool_covering(cells, per_cell=5)
        plan = build_plan(_joint(), 20, 1.0, seed=9)
        ids_fwd = [p.user_id for p in draw(plan, pool)]
        ids_rev = [p.user_id for p in draw(plan, list(reversed(pool)))]
        assert ids_fwd == ids_rev

    def test_no_user_twice_per_state(self):
        cells = list(POOL_SCHEMA.cells())[:10]
        pool = _pool_covering(cells, per_cell=4)
        plan = build_plan(_joint(), 30, 1.0, seed=2)
        profiles = draw(plan, pool)
        ids = [p.user_id for p in profiles]
        assert len(ids) == len(set(ids))

    def test_relaxation_is_minimal(self):
        cells = list(POOL_SCHEMA.cells())
        # 2 users in the first cell, quota 3: exactly one draw must relax
        pool = _pool_covering(cells[:1], per_cell=2, prefix="a") + _pool_covering(
            cells[1:2], per_cell=5, prefix="b"
        )
        values = np.zeros(Taxonomy().shape)
        values.reshape(-1)[0] = 1.0
        joint = JointTable(state="Alderton", values=values)
        plan = build_plan(joint, 3, 1.0, seed=4)
        profiles = draw(plan, pool)
        kinds = sorted(p.provenance["kind"] for p in profiles)
        assert kinds == ["exact-cell", "exact-cell", "relaxed"]

    def test_exhausted_pool_raises_with_shortfall(self):
        pool = _pool_covering(list(POOL_SCHEMA.cells())[:1], per_cell=1)
        plan = build_plan(_joint(), 5, 1.0, seed=4)
        with pytest.raises(SamplingError, match="short"):
            draw(plan, pool)

    def test_untagged_users_only_match_full_relaxation(self):
        cells = list(POOL_SCHEMA.cells())
        untagged = _user("zzz", ["words here"])  # tags None
        pool = _pool_covering(cells[:1], per_cell=1, prefix="a") + [untagged]
        values = np.zeros(Taxonomy().shape)
        values.reshape(-1)[0] = 1.0
        joint = JointTable(state="Alderton", values=values)
        plan = build_plan(joint, 2, 1.0, seed=4)
        profiles = draw(plan, pool)
        by_id = {p.user_id: p for p in profiles}
        assert by_id["zzz"].provenance["dropped"] == list(RELAXATION_ORDER)


class TestProfileIO:
    def test_round_trip(self, tmp_path):
        cells = list(POOL_SCHEMA.cells())[:2]
        pool = _pool_covering(cells, per_cell=2)
        plan = build_plan(_joint(), 4, 1.0, seed=1)
        profiles = draw(plan, pool)
        write_samples(tmp_path, {"Alderton": profiles})
        loaded = read_samples(tmp_path)
        assert sorted(p.user_id for p in loaded["Alderton"]) == sorted(
            p.user_id for p in profiles
        )
        assert loaded["Alderton"][0].post_history[0].pub_time.tzinfo is not None

    def test_profile_requires_complete_tags(self):
        with pytest.raises(SamplingError, match="incomplete tags"):
            VoterProfile(
                user_id="x", state="S", tags={"gender": "Male"}, post_history=[]
            )
