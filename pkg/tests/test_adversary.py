import pytest

from kmobile.adversary import (
    gen_local_walk,
    gen_simple_counterexample,
    gen_thm3,
    gen_thm4,
    local_walk_requests,
)
from kmobile.core import InputError, ProblemParams, certificate_cost, distance, validate_trace


class TestThm3:
    def test_two_server_structure(self):
        inst = gen_thm3(2, 64, D=1.0, ms=1.0, z_choice=2)
        assert inst.choices["Z"] == [16.0]
        assert len(inst.trace) == 64 + 8
        assert inst.trace.requests[:64] == [(0.0,)] * 64
        assert inst.trace.requests[64:] == [(16.0,)] * 8
        assert validate_trace(inst.trace, inst.params) is None

    def test_target_candidates(self):
        zs = {gen_thm3(2, 64, z_choice=i).choices["Z"][0] for i in range(4)}
        assert zs == {-48.0, -16.0, 16.0, 48.0}

    def test_certificate_cost_within_bound(self):
        for i in range(4):
            inst = gen_thm3(2, 64, D=1.0, ms=1.0, z_choice=i)
            cc = certificate_cost(inst.trace, inst.params)
            assert cc <= inst.offline_cost_bound * (1 + 1e-6)
        # farthest choice costs exactly |Z| = 48
        inst = gen_thm3(2, 64, D=1.0, ms=1.0, z_choice=3)
        assert abs(certificate_cost(inst.trace, inst.params) - 48.0) < 1e-9

    def test_reported_online_lower_bound(self):
        inst = gen_thm3(2, 64, z_choice=0)
        assert abs(inst.online_cost_lower_bound - 64 * 64 / 264.0) < 1e-9

    def test_x_must_be_multiple_of_eight(self):
        with pytest.raises(InputError):
            gen_thm3(2, 63)
        with pytest.raises(InputError):
            gen_thm3(1, 64)

    def test_general_k_segments(self):
        inst = gen_thm3(3, 16, seed=5)
        zs = inst.choices["Z"]
        assert len(zs) == 2
        seg = 16.0
        for g, z in enumerate(zs):
            idx = z / seg - 0.5
            assert idx in (4 * g + 1, 4 * g + 2)
        # one request block per target, ordered by distance
        assert zs == sorted(zs)
        assert validate_trace(inst.trace, inst.params) is None
        cc = certificate_cost(inst.trace, inst.params)
        assert cc <= inst.offline_cost_bound * (1 + 1e-6)

    def test_z_choice_rejected_for_general_k(self):
        with pytest.raises(InputError):
            gen_thm3(3, 16, z_choice=0)

    def test_seeded_choice_is_deterministic(self):
        a = gen_thm3(2, 16, seed=5)
        b = gen_thm3(2, 16, seed=5)
        assert a.choices == b.choices
        assert a.trace.requests == b.trace.requests
        assert a.choices["Z"][0] in (-12.0, -4.0, 4.0, 12.0)


class TestThm4:
    def test_walk_phase_step_count(self):
        inst = gen_thm4(2, 64, ms=1.0, mc=8.0, z_choice=3)  # Z = 48
        walk = inst.trace.requests[64:64 + 6]
        assert walk == [(8.0,), (16.0,), (24.0,), (32.0,), (40.0,), (48.0,)]
        assert inst.trace.requests[70] == (48.0,)
        assert inst.choices["final_start"] == 71

    def test_trace_valid_under_own_locality(self):
        for mc in (1.0, 3.0, 8.0):
            inst = gen_thm4(2, 64, ms=1.0, mc=mc, z_choice=1)
            assert validate_trace(inst.trace, inst.params) is None

    def test_certificate_bound_value(self):
        inst = gen_thm4(2, 64, ms=1.0, mc=8.0, D=1.0, z_choice=0)
        assert inst.offline_cost_bound == 64.0 + 4096.0 / 16.0
        cc = certificate_cost(inst.trace, inst.params)
        assert cc <= inst.offline_cost_bound * (1 + 1e-6)

    def test_requires_mc_at_least_ms(self):
        with pytest.raises(InputError):
            gen_thm4(2, 64, ms=2.0, mc=1.0)

    def test_general_k(self):
        inst = gen_thm4(3, 16, ms=1.0, mc=4.0, seed=2)
        assert validate_trace(inst.trace, inst.params) is None
        cc = certificate_cost(inst.trace, inst.params)
        assert cc <= inst.offline_cost_bound * (1 + 1e-6)
        seg = 16.0
        for g, z in enumerate(inst.choices["Z"]):
            idx = z / seg - 0.5
            assert idx in (5 * g + 1, 5 * g + 3)


class TestSimpleCounterexample:
    def test_trace_shape(self):
        inst = gen_simple_counterexample(100, 10, ms=1.0)
        assert len(inst.trace) == 190
        assert inst.trace.requests[-1] == (90.0,)
        assert inst.trace.requests[99] == (100.0,)
        assert validate_trace(inst.trace, inst.params) is None

    def test_certificate_cost(self):
        inst = gen_simple_counterexample(100, 10, ms=1.0)
        assert abs(certificate_cost(inst.trace, inst.params) - 110.0) < 1e-9
        assert inst.offline_cost_bound == 110.0

    def test_lower_bound_formula(self):
        inst = gen_simple_counterexample(400, 20)
        assert inst.online_cost_lower_bound == 400 + (400 - 3 * 20) * 20 == 7200

    def test_parameter_validation(self):
        with pytest.raises(InputError):
            gen_simple_counterexample(100, 25)
        with pytest.raises(InputError):
            gen_simple_counterexample(100, 0)


class TestLocalWalk:
    def test_step_scale_zero_is_constant(self):
        reqs = local_walk_requests(10, 2, 1.0, 0.0, seed=3)
        assert all(r == reqs[0] for r in reqs)

    def test_output_always_valid(self):
        for dim in (1, 2, 3):
            params = ProblemParams(k=2, ms=1.0, mc=0.7, delta=0.0, D=1.0, dim=dim)
            inst = gen_local_walk(50, params, 1.0, seed=dim)
            assert validate_trace(inst.trace, inst.params) is None

    def test_seed_determinism_bytes(self, tmp_path):
        from kmobile.core import write_trace

        params = ProblemParams(k=1, ms=1.0, mc=1.0, delta=0.0, D=1.0, dim=2)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for path in (a, b):
            inst = gen_local_walk(40, params, 0.8, seed=123)
            write_trace(str(path), inst.trace, inst.params)
        assert a.read_bytes() == b.read_bytes()

    def test_different_seeds_differ(self):
        r1 = local_walk_requests(20, 1, 1.0, 1.0, seed=1)
        r2 = local_walk_requests(20, 1, 1.0, 1.0, seed=2)
        assert r1 != r2

    def test_step_scale_bounds(self):
        with pytest.raises(InputError):
            local_walk_requests(5, 1, 1.0, 1.5, seed=0)
