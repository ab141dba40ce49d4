import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from driftsched import (
    IDLE,
    Action,
    Channel,
    DeadlineQueue,
    Packet,
    PowerLevels,
    UserSpec,
    advance_queue,
    candidate_actions,
    feasible_powers,
    sample_arrivals,
    sample_channels,
)
from driftsched.model import sample_arrival_paths, sample_channel_paths


def rng(seed):
    return np.random.default_rng(seed)


class TestPowerLevels:
    def test_required_power_per_channel(self):
        levels = PowerLevels(1.0, 2.0)
        assert levels.required(Channel.GOOD) == 1.0
        assert levels.required(Channel.BAD) == 2.0

    @pytest.mark.parametrize("low,high", [(2.0, 2.0), (3.0, 1.0), (0.0, 1.0), (-1.0, 1.0)])
    def test_rejects_bad_levels(self, low, high):
        with pytest.raises(ValueError):
            PowerLevels(low, high)


class TestUserSpec:
    def test_deadline_user_fields(self):
        u = UserSpec.deadline(1, arrival_prob=0.5, deadline_m=10, gamma=0.7, good_prob=0.4)
        assert u.is_deadline and not u.is_throughput

    def test_delta_forbidden_on_deadline_user(self):
        with pytest.raises(ValueError, match="delta"):
            UserSpec(
                id=1,
                role=__import__("driftsched").UserRole.DEADLINE,
                gamma=0.5,
                good_prob=0.5,
                arrival_prob=0.5,
                deadline_m=5,
                delta=0.3,
            )

    def test_arrival_fields_forbidden_on_throughput_user(self):
        with pytest.raises(ValueError, match="arrival_prob"):
            UserSpec(
                id=2,
                role=__import__("driftsched").UserRole.THROUGHPUT,
                gamma=0.5,
                good_prob=0.5,
                delta=0.3,
                arrival_prob=0.2,
            )

    def test_missing_delta_on_throughput_user(self):
        with pytest.raises(ValueError, match="delta"):
            UserSpec(
                id=2,
                role=__import__("driftsched").UserRole.THROUGHPUT,
                gamma=0.5,
                good_prob=0.5,
            )

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(arrival_prob=1.5, deadline_m=5),
            dict(arrival_prob=-0.1, deadline_m=5),
            dict(arrival_prob=0.5, deadline_m=0),
        ],
    )
    def test_range_checks(self, kwargs):
        with pytest.raises(ValueError):
            UserSpec.deadline(1, gamma=0.5, good_prob=0.5, **kwargs)

    def test_single_slot_deadline_warns(self):
        with pytest.warns(UserWarning, match="deadline_m=1"):
            UserSpec.deadline(1, arrival_prob=0.5, deadline_m=1, gamma=0.5, good_prob=0.5)


class TestQueueTypes:
    def test_packet_ttl_positive(self):
        with pytest.raises(ValueError):
            Packet(0)

    def test_ttls_must_strictly_increase(self):
        with pytest.raises(ValueError, match="strictly increase"):
            DeadlineQueue.from_ttls(1, [3, 3])
        with pytest.raises(ValueError, match="strictly increase"):
            DeadlineQueue.from_ttls(1, [5, 2])

    def test_head_ttl(self):
        assert DeadlineQueue(1).head_ttl is None
        assert DeadlineQueue.from_ttls(1, [2, 7]).head_ttl == 2

    def test_serve_action_needs_positive_power(self):
        with pytest.raises(ValueError):
            Action.serve(1, 0.0)
        assert IDLE.is_idle


class TestSampling:
    def test_degenerate_channel_probs(self, levels):
        always = (UserSpec.throughput(1, delta=0.1, gamma=1.0, good_prob=1.0),)
        never = (UserSpec.throughput(1, delta=0.1, gamma=1.0, good_prob=0.0),)
        for _ in range(50):
            assert sample_channels(always, rng(1)) == (Channel.GOOD,)
            assert sample_channels(never, rng(1)) == (Channel.BAD,)

    def test_degenerate_arrival_probs(self):
        sure = (UserSpec.deadline(1, arrival_prob=1.0, deadline_m=5, gamma=1.0, good_prob=0.5),)
        none = (UserSpec.deadline(1, arrival_prob=0.0, deadline_m=5, gamma=1.0, good_prob=0.5),)
        assert sample_arrivals(sure, rng(2)) == {1: True}
        assert sample_arrivals(none, rng(2)) == {1: False}

    def test_throughput_users_get_no_arrivals(self, tradeoff_specs):
        out = sample_arrivals(tradeoff_specs, rng(3))
        assert set(out) == {1}

    def test_channel_rate_matches_probability(self):
        # 10^6 draws, empirical Good fraction within +/- 0.002 of 0.4
        specs = (UserSpec.throughput(1, delta=0.1, gamma=1.0, good_prob=0.4),)
        good = sample_channel_paths(specs, 1_000_000, rng(4))
        assert abs(good.mean() - 0.4) < 0.002

    def test_arrival_rate_matches_probability(self):
        specs = (UserSpec.deadline(1, arrival_prob=0.35, deadline_m=10, gamma=1.0, good_prob=0.5),)
        arr = sample_arrival_paths(specs, 1_000_000, rng(5))
        assert abs(arr.mean() - 0.35) < 0.002

    def test_slotwise_and_path_sampling_agree(self, tradeoff_specs):
        path = sample_channel_paths(tradeoff_specs, 200, rng(6))
        slotwise_rng = rng(6)
        for t in range(200):
            row = sample_channels(tradeoff_specs, slotwise_rng)
            assert row == tuple(
                Channel.GOOD if g else Channel.BAD for g in path[t]
            )

    def test_identical_seeds_give_identical_paths(self, tradeoff_specs):
        a = sample_channel_paths(tradeoff_specs, 500, rng(7))
        b = sample_channel_paths(tradeoff_specs, 500, rng(7))
        assert (a == b).all()


class TestFeasiblePowers:
    def test_power_sets_per_channel(self, levels):
        out = feasible_powers((Channel.BAD, Channel.GOOD), levels)
        assert out == (frozenset({0.0, 2.0}), frozenset({0.0, 1.0}))


class TestCandidateActions:
    def test_order_and_powers(self, levels):
        actions = candidate_actions((Channel.GOOD, Channel.BAD), levels, {})
        assert actions == [Action.serve(1, 1.0), Action.serve(2, 2.0), IDLE]

    def test_empty_deadline_queue_excluded(self, levels):
        actions = candidate_actions((Channel.GOOD,), levels, {1: DeadlineQueue(1)})
        assert actions == [IDLE]

    def test_no_users(self, levels):
        assert candidate_actions((), levels, {}) == [IDLE]

    def test_nonempty_deadline_queue_included(self, levels):
        queues = {1: DeadlineQueue.from_ttls(1, [3])}
        actions = candidate_actions((Channel.BAD,), levels, queues)
        assert actions == [Action.serve(1, 2.0), IDLE]


class TestAdvanceQueue:
    def test_unserved_expiring_head_drops(self):
        q, drop = advance_queue(DeadlineQueue.from_ttls(1, [1]), False, False, 10)
        assert len(q) == 0 and drop == 1

    def test_served_head_does_not_drop(self):
        q, drop = advance_queue(DeadlineQueue.from_ttls(1, [1]), True, False, 10)
        assert len(q) == 0 and drop == 0

    def test_serve_decrement_and_arrival_ordering(self):
        q, drop = advance_queue(DeadlineQueue.from_ttls(1, [3, 7]), True, True, 10)
        assert [p.ttl for p in q.packets] == [6, 10] and drop == 0

    def test_serve_on_empty_is_an_error(self):
        with pytest.raises(ValueError, match="empty"):
            advance_queue(DeadlineQueue(1), True, False, 10)

    def test_arrival_lands_with_full_ttl(self):
        q, drop = advance_queue(DeadlineQueue(1), False, True, 4)
        assert [p.ttl for p in q.packets] == [4] and drop == 0


@st.composite
def queue_transitions(draw):
    m = draw(st.integers(min_value=1, max_value=12))
    ttls = draw(
        st.lists(st.integers(min_value=1, max_value=m), unique=True, max_size=m).map(sorted)
    )
    queue = DeadlineQueue.from_ttls(1, ttls)
    served = draw(st.booleans()) if ttls else False
    arrival = draw(st.booleans())
    return queue, served, arrival, m


class TestQueueProperties:
    @given(queue_transitions())
    def test_conservation_and_invariants(self, case):
        queue, served, arrival, m = case
        new_queue, drop = advance_queue(queue, served, arrival, m)
        assert drop in (0, 1)
        assert len(new_queue) == max(len(queue) - served, 0) + arrival - drop
        ttls = [p.ttl for p in new_queue.packets]
        assert all(1 <= t <= m for t in ttls)
        assert all(b > a for a, b in zip(ttls, ttls[1:]))

    @given(queue_transitions())
    def test_drop_exactly_when_head_expires_unserved(self, case):
        queue, served, arrival, m = case
        _, drop = advance_queue(queue, served, arrival, m)
        expect = int(not served and queue.head_ttl == 1)
        assert drop == expect
