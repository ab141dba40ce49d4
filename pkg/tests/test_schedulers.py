import pytest
from hypothesis import given
from hypothesis import strategies as st

from driftsched import (
    IDLE,
    Action,
    Channel,
    DeadlineQueue,
    DpcState,
    LdfState,
    PowerLevels,
    UserSpec,
    candidate_actions,
    dpc_decide,
    dpc_objective,
    dpc_update,
    ldf_decide,
    ldf_update,
    urgency_cost,
)

LEVELS = PowerLevels(1.0, 2.0)


def two_user_case():
    """Deadline user with head ttl 3 (m=10) plus a throughput user, both Good."""
    specs = (
        UserSpec.deadline(1, arrival_prob=0.5, deadline_m=10, gamma=0.7, good_prob=0.4),
        UserSpec.throughput(2, delta=0.4, gamma=0.65, good_prob=0.4),
    )
    state = DpcState(X=(2.0, 0.0), Z={2: 1.0}, V=10.0)
    queues = {1: DeadlineQueue.from_ttls(1, [3])}
    channels = (Channel.GOOD, Channel.GOOD)
    return specs, state, queues, channels


class TestUrgencyCost:
    def test_served_is_free(self):
        assert urgency_cost(1, 10, served=True) == 0.0

    def test_empty_queue_is_free(self):
        assert urgency_cost(None, 10, served=False) == 0.0

    def test_expiring_head_costs_one(self):
        assert urgency_cost(1, 10, served=False) == 1.0

    def test_intermediate_values(self):
        assert urgency_cost(10, 10, served=False) == pytest.approx(0.1)
        assert urgency_cost(3, 10, served=False) == pytest.approx(0.8)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            urgency_cost(11, 10, served=False)
        with pytest.raises(ValueError):
            urgency_cost(0, 10, served=False)
        with pytest.raises(ValueError):
            urgency_cost(1, 0, served=False)

    @given(
        m=st.integers(min_value=1, max_value=100),
        ttl=st.integers(min_value=1, max_value=100),
    )
    def test_range_and_extremes(self, m, ttl):
        if ttl > m:
            return
        f = urgency_cost(ttl, m, served=False)
        assert 0.0 < f <= 1.0
        assert (f == 1.0) == (ttl == 1)


class TestDpcState:
    def test_rejects_negative_entries(self):
        with pytest.raises(ValueError):
            DpcState(X=(-1.0,), Z={}, V=1.0)
        with pytest.raises(ValueError):
            DpcState(X=(0.0,), Z={1: -0.5}, V=1.0)
        with pytest.raises(ValueError):
            DpcState(X=(0.0,), Z={}, V=0.0)

    def test_zeros(self, tradeoff_specs):
        state = DpcState.zeros(tradeoff_specs, 10.0)
        assert state.X == (0.0, 0.0) and state.Z == {2: 0.0}


class TestDpcObjective:
    def test_idle_value(self):
        specs, state, queues, channels = two_user_case()
        obj = dpc_objective(IDLE, state, queues, channels, specs, LEVELS)
        assert obj == pytest.approx(7.0, abs=1e-12)

    def test_serve_deadline_value(self):
        specs, state, queues, channels = two_user_case()
        obj = dpc_objective(Action.serve(1, 1.0), state, queues, channels, specs, LEVELS)
        assert obj == pytest.approx(1.0, abs=1e-12)

    def test_serve_throughput_value(self):
        specs, state, queues, channels = two_user_case()
        obj = dpc_objective(Action.serve(2, 1.0), state, queues, channels, specs, LEVELS)
        assert obj == pytest.approx(6.0, abs=1e-12)

    def test_rejects_power_channel_mismatch(self):
        specs, state, queues, _ = two_user_case()
        channels = (Channel.BAD, Channel.GOOD)
        with pytest.raises(ValueError, match="inconsistent"):
            dpc_objective(Action.serve(1, 1.0), state, queues, channels, specs, LEVELS)

    def test_rejects_unknown_user(self):
        specs, state, queues, channels = two_user_case()
        with pytest.raises(ValueError, match="unknown user"):
            dpc_objective(Action.serve(3, 1.0), state, queues, channels, specs, LEVELS)

    def test_rejects_serving_empty_queue(self):
        specs, state, _, channels = two_user_case()
        queues = {1: DeadlineQueue(1)}
        with pytest.raises(ValueError, match="empty"):
            dpc_objective(Action.serve(1, 1.0), state, queues, channels, specs, LEVELS)


class TestDpcDecide:
    def test_picks_minimum_objective(self):
        specs, state, queues, channels = two_user_case()
        assert dpc_decide(state, queues, channels, specs, LEVELS) == Action.serve(1, 1.0)

    def test_all_equal_objectives_pick_first_candidate(self):
        specs = (
            UserSpec.throughput(1, delta=0.3, gamma=1.0, good_prob=0.5),
            UserSpec.throughput(2, delta=0.3, gamma=1.0, good_prob=0.5),
        )
        state = DpcState.zeros(specs, 1.0)
        channels = (Channel.GOOD, Channel.GOOD)
        assert dpc_decide(state, {}, channels, specs, LEVELS) == Action.serve(1, 1.0)

    def test_huge_debt_dominates(self):
        specs = (UserSpec.throughput(1, delta=0.3, gamma=1.0, good_prob=0.5),)
        state = DpcState(X=(0.1,), Z={1: 1000.0}, V=1.0)
        assert dpc_decide(state, {}, (Channel.BAD,), specs, LEVELS) == Action.serve(1, 2.0)


class TestDpcUpdate:
    def test_power_queue_accumulates(self):
        specs = (UserSpec.throughput(1, delta=0.4, gamma=0.7, good_prob=0.5),)
        state = DpcState(X=(0.0,), Z={1: 0.0}, V=1.0)
        new = dpc_update(state, Action.serve(1, 2.0), specs)
        assert new.X == (2.0,)

    def test_power_queue_clamps_at_zero(self):
        specs = (UserSpec.throughput(1, delta=0.4, gamma=0.7, good_prob=0.5),)
        state = DpcState(X=(0.5,), Z={1: 0.0}, V=1.0)
        new = dpc_update(state, IDLE, specs)
        assert new.X == (0.0,)

    def test_throughput_queue_accrues_target(self):
        specs = (UserSpec.throughput(1, delta=0.4, gamma=0.7, good_prob=0.5),)
        state = DpcState(X=(0.0,), Z={1: 0.0}, V=1.0)
        new = dpc_update(state, IDLE, specs)
        assert new.Z == {1: 0.4}

    def test_nonnegativity_preserved(self):
        specs = (
            UserSpec.deadline(1, arrival_prob=0.5, deadline_m=5, gamma=2.0, good_prob=0.5),
            UserSpec.throughput(2, delta=1.0, gamma=0.1, good_prob=0.5),
        )
        state = DpcState(X=(0.3, 0.0), Z={2: 0.2}, V=5.0)
        new = dpc_update(state, Action.serve(2, 1.0), specs)
        assert all(x >= 0 for x in new.X) and all(z >= 0 for z in new.Z.values())


@st.composite
def dpc_scenarios(draw):
    n = draw(st.integers(min_value=1, max_value=4))
    specs = []
    queues = {}
    for uid in range(1, n + 1):
        gamma = draw(st.floats(min_value=0.0, max_value=2.0, allow_nan=False))
        if draw(st.booleans()):
            m = draw(st.integers(min_value=2, max_value=8))
            specs.append(
                UserSpec.deadline(uid, arrival_prob=0.5, deadline_m=m, gamma=gamma, good_prob=0.5)
            )
            ttls = draw(
                st.lists(st.integers(min_value=1, max_value=m), unique=True, max_size=m).map(sorted)
            )
            queues[uid] = DeadlineQueue.from_ttls(uid, ttls)
        else:
            delta = draw(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
            specs.append(UserSpec.throughput(uid, delta=delta, gamma=gamma, good_prob=0.5))
    specs = tuple(specs)
    x = tuple(
        draw(st.floats(min_value=0.0, max_value=50.0, allow_nan=False)) for _ in specs
    )
    z = {
        s.id: draw(st.floats(min_value=0.0, max_value=50.0, allow_nan=False))
        for s in specs
        if s.is_throughput
    }
    v = draw(st.floats(min_value=0.5, max_value=500.0, allow_nan=False))
    channels = tuple(
        draw(st.sampled_from((Channel.GOOD, Channel.BAD))) for _ in specs
    )
    return specs, DpcState(X=x, Z=z, V=v), queues, channels


class TestDpcProperties:
    @given(dpc_scenarios())
    def test_chosen_action_attains_minimum(self, scenario):
        specs, state, queues, channels = scenario
        chosen = dpc_decide(state, queues, channels, specs, LEVELS)
        chosen_obj = dpc_objective(chosen, state, queues, channels, specs, LEVELS)
        for action in candidate_actions(channels, LEVELS, queues):
            assert chosen_obj <= dpc_objective(
                action, state, queues, channels, specs, LEVELS
            )

    @given(dpc_scenarios(), st.sampled_from((0.25, 0.5, 2.0, 4.0, 8.0)))
    def test_scaling_state_and_v_keeps_decision(self, scenario, c):
        # power-of-two scales keep float products exact, so the argmin is
        # preserved including exact tie resolution
        specs, state, queues, channels = scenario
        scaled = DpcState(
            X=tuple(c * x for x in state.X),
            Z={k: c * z for k, z in state.Z.items()},
            V=c * state.V,
        )
        assert dpc_decide(state, queues, channels, specs, LEVELS) == dpc_decide(
            scaled, queues, channels, specs, LEVELS
        )

    @given(dpc_scenarios())
    def test_update_preserves_nonnegativity(self, scenario):
        specs, state, queues, channels = scenario
        action = dpc_decide(state, queues, channels, specs, LEVELS)
        new = dpc_update(state, action, specs)
        assert all(x >= 0.0 for x in new.X)
        assert all(z >= 0.0 for z in new.Z.values())


class TestLdf:
    def make_specs(self):
        return (
            UserSpec.deadline(1, arrival_prob=0.35, deadline_m=10, gamma=2.0, good_prob=0.9),
            UserSpec.throughput(2, delta=0.4, gamma=2.0, good_prob=0.9),
        )

    def test_initial_targets(self):
        state = LdfState.initial(self.make_specs())
        assert state.q == (0.35, 0.4) and state.y == (0.0, 0.0)

    def test_debt_accumulates_to_closed_form(self):
        specs = (UserSpec.throughput(1, delta=0.4, gamma=2.0, good_prob=0.9),)
        state = LdfState.initial(specs)
        served_slots = {2, 5, 8}
        for t in range(10):
            state = ldf_update(state, (1 if t in served_slots else 0,))
        assert state.t == 10
        assert state.y[0] == pytest.approx(10 * 0.4 - 3)

    def test_zero_target_never_served_stays_zero(self):
        specs = (UserSpec.throughput(1, delta=0.0, gamma=2.0, good_prob=0.9),)
        state = LdfState.initial(specs)
        for _ in range(20):
            state = ldf_update(state, (0,))
        assert state.y == (0.0,)

    def test_full_target_served_every_slot_stays_zero(self):
        specs = (UserSpec.throughput(1, delta=1.0, gamma=2.0, good_prob=0.9),)
        state = LdfState.initial(specs)
        for _ in range(20):
            state = ldf_update(state, (1,))
        assert state.y == (0.0,)

    def test_serves_largest_debt_at_channel_power(self):
        specs = self.make_specs()
        state = LdfState(y=(1.0, 0.3), q=(0.35, 0.4), t=10)
        queues = {1: DeadlineQueue.from_ttls(1, [4])}
        channels = (Channel.BAD, Channel.GOOD)
        assert ldf_decide(state, queues, channels, specs, LEVELS) == Action.serve(1, 2.0)

    def test_idles_when_no_positive_debt(self):
        specs = self.make_specs()
        state = LdfState(y=(-0.2, -0.5), q=(0.35, 0.4), t=10)
        queues = {1: DeadlineQueue.from_ttls(1, [4])}
        channels = (Channel.GOOD, Channel.GOOD)
        assert ldf_decide(state, queues, channels, specs, LEVELS) == IDLE

    def test_ties_resolve_to_lowest_id(self):
        specs = (
            UserSpec.throughput(1, delta=0.4, gamma=2.0, good_prob=0.9),
            UserSpec.throughput(2, delta=0.4, gamma=2.0, good_prob=0.9),
        )
        state = LdfState(y=(0.8, 0.8), q=(0.4, 0.4), t=2)
        channels = (Channel.GOOD, Channel.GOOD)
        assert ldf_decide(state, {}, channels, specs, LEVELS) == Action.serve(1, 1.0)

    def test_empty_deadline_queue_not_eligible(self):
        specs = self.make_specs()
        state = LdfState(y=(5.0, 0.1), q=(0.35, 0.4), t=10)
        queues = {1: DeadlineQueue(1)}
        channels = (Channel.GOOD, Channel.GOOD)
        assert ldf_decide(state, queues, channels, specs, LEVELS) == Action.serve(2, 1.0)

    @given(
        q=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        served=st.lists(st.booleans(), min_size=1, max_size=60),
    )
    def test_debt_identity(self, q, served):
        specs = (UserSpec.throughput(1, delta=q, gamma=2.0, good_prob=0.9),)
        state = LdfState.initial(specs)
        reference = 0.0
        for s in served:
            state = ldf_update(state, (int(s),))
            reference = reference + (q - int(s))
        # identical accumulation order makes this exact
        assert state.y[0] == reference
        assert state.y[0] == pytest.approx(len(served) * q - sum(served), abs=1e-9)
