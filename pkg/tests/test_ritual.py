import json
import socket

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from myoritual.ritual import (AVDirective, ClockError, CrossEntropyAgent,
                              DirectiveConfig, PatternBank, ProximityReport,
                              RitualEnv, RitualTarget, UdpMirror, default_bank,
                              direct, proximity, random_search_best, run_episode,
                              schedule)
from myoritual.ritual.scheduler import write_events


def _target(digits=None, seed=0):
    if digits is not None:
        return RitualTarget(np.asarray(digits, dtype=float))
    return RitualTarget.random(seed)


# ---------------------------------------------------------------------------
# environment
# ---------------------------------------------------------------------------

def test_reward_zero_at_target():
    t = _target([3] * 10)
    env = RitualEnv(t)
    assert env.reward(t.digits.copy()) == 0.0


def test_reward_minus_one_at_opposite_corner():
    env = RitualEnv(_target([0] * 10))
    assert env.reward(np.full(10, 9.0)) == pytest.approx(-1.0)


def test_reward_increases_toward_target():
    t = _target([5] * 10)
    env = RitualEnv(t)
    pos = np.zeros(10)
    last = env.reward(pos)
    for _ in range(4):
        pos, r = env.step(pos, np.full(10, 1.0))
        assert r > last
        last = r


def test_step_validates_action():
    env = RitualEnv(_target([5] * 10))
    with pytest.raises(ValueError):
        env.step(np.zeros(10), np.zeros(9))
    with pytest.raises(ValueError):
        env.step(np.zeros(10), np.full(10, 2.0))


def test_target_validation():
    with pytest.raises(ValueError):
        RitualTarget(np.full(10, 9.5))
    with pytest.raises(ValueError):
        RitualTarget(np.full(9, 1.0))


# ---------------------------------------------------------------------------
# episodes and learning
# ---------------------------------------------------------------------------

def test_zero_exploration_agent_repeats_trajectory():
    env = RitualEnv(_target(seed=5))
    agent = CrossEntropyAgent(steps_per_episode=20, sigma0=0.0, seed=1)
    t1, _ = run_episode(agent, env, 0)
    t2, _ = run_episode(agent, env, 1)
    assert all(np.array_equal(a[0], b[0]) for a, b in zip(t1, t2))


def test_best_distance_monotone_bookkeeping():
    env = RitualEnv(_target(seed=7))
    agent = CrossEntropyAgent(steps_per_episode=30, seed=2)
    best = np.inf
    series = []
    for ep in range(40):
        _, summary = run_episode(agent, env, ep)
        best = min(best, summary.best_distance)
        series.append(best)
    assert all(a >= b for a, b in zip(series, series[1:]))


def test_reference_agent_learns_and_beats_random_search():
    rng = np.random.default_rng(1042)
    target = RitualTarget(rng.integers(0, 10, size=10).astype(float))
    env = RitualEnv(target)
    agent = CrossEntropyAgent(steps_per_episode=50, seed=42)
    first_best = None
    best = np.inf
    for ep in range(200):
        _, summary = run_episode(agent, env, ep)
        if first_best is None:
            first_best = summary.best_distance
        best = min(best, summary.best_distance)
    assert best < first_best
    baseline = random_search_best(target, 200 * 50, seed=42)
    assert best <= baseline


def test_agent_propose_respects_max_step():
    agent = CrossEntropyAgent(steps_per_episode=10, sigma0=5.0, max_step=0.5,
                              seed=3)
    seq = agent.propose()
    assert np.all(np.abs(seq) <= 0.5)


def test_policy_params_exposed():
    agent = CrossEntropyAgent(steps_per_episode=10, seed=3)
    assert agent.policy_params.shape == (100,)


# ---------------------------------------------------------------------------
# proximity quantizer
# ---------------------------------------------------------------------------

def test_proximity_all_three_at_target():
    t = _target([4] * 10)
    rep = proximity(t.digits.copy(), t)
    assert np.all(rep.values == 3)


def test_proximity_all_one_far():
    rep = proximity(np.full(10, 9.0), _target([0] * 10))
    assert np.all(rep.values == 1)


def test_proximity_boundaries_belong_to_closer_class():
    t = _target([0] * 10)
    rep_hi = proximity(np.full(10, 0.5), t)
    assert np.all(rep_hi.values == 3)
    rep_lo = proximity(np.full(10, 2.0), t)
    assert np.all(rep_lo.values == 2)
    rep_over = proximity(np.full(10, 2.0 + 1e-9), t)
    assert np.all(rep_over.values == 1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=0.0, max_value=9.0), min_size=10,
                max_size=10),
       st.lists(st.integers(min_value=0, max_value=9), min_size=10,
                max_size=10))
def test_proximity_matches_bruteforce(position, digits):
    t = _target(digits)
    rep = proximity(np.asarray(position), t)
    for i in range(10):
        d = abs(position[i] - digits[i])
        expect = 3 if d <= 0.5 else (2 if d <= 2.0 else 1)
        assert rep.values[i] == expect


# ---------------------------------------------------------------------------
# directive mapping
# ---------------------------------------------------------------------------

def test_direct_boundary_values():
    cfg = DirectiveConfig(v_min=0.1, v_max=1.0, b_min=0.05, b_max=1.0)
    rep = ProximityReport(0.0, np.full(10, 3))
    d = direct(rep, cfg)
    assert np.allclose(d.volume, 0.1)
    assert np.allclose(d.brightness, 0.05)
    rep1 = ProximityReport(0.0, np.full(10, 1))
    d1 = direct(rep1, cfg)
    assert np.allclose(d1.volume, 1.0)
    assert np.allclose(d1.brightness, 1.0)


def test_direct_strictly_decreasing_in_proximity():
    cfg = DirectiveConfig()
    vols = {}
    for p in (1, 2, 3):
        vols[p] = direct(ProximityReport(0.0, np.full(10, p)), cfg).volume[0]
    assert vols[1] > vols[2] > vols[3]


def test_direct_mixed_report():
    rep = ProximityReport(0.0, np.array([3] * 5 + [1] * 5))
    d = direct(rep)
    assert np.all(d.volume[:5] < d.volume[5:])
    assert list(d.pattern_id) == list(range(10))


# ---------------------------------------------------------------------------
# pattern bank
# ---------------------------------------------------------------------------

def test_default_bank_valid():
    bank = default_bank()
    assert len(bank.patterns) == 10
    assert len(bank.lights) == 10
    assert bank.tempo == 120.0
    for p in bank.patterns:
        assert all(0 <= e.onset < p.loop_beats for e in p.events)


def test_bank_round_trip(tmp_path):
    bank = default_bank()
    path = tmp_path / "bank.json"
    bank.save(path)
    again = PatternBank.load(path)
    assert again.to_json() == bank.to_json()


def test_bank_rejects_malformed():
    with pytest.raises(ValueError, match="malformed"):
        PatternBank.from_json({"tempo": 120.0, "patterns": [{}], "lights": []})
    with pytest.raises(ValueError):
        PatternBank(patterns=[], lights=[], tempo=120.0)


# ---------------------------------------------------------------------------
# scheduler
# ---------------------------------------------------------------------------

def _uniform_directive(volume=0.5, brightness=0.4):
    return AVDirective(pattern_id=np.arange(10),
                       volume=np.full(10, volume),
                       brightness=np.full(10, brightness),
                       pulse_rate=np.ones(10))


def test_schedule_loops_repeat_exactly():
    bank = default_bank()  # 4-beat loops at 120 BPM -> 2 s per loop
    events = schedule([(0.0, _uniform_directive())], bank, duration=8.0)
    notes = [e for e in events if e["kind"] == "note" and e["pattern"] == 0]
    per_loop = len({round(e["t"], 6) for e in notes if e["t"] < 2.0})
    assert per_loop == len(bank.patterns[0].events)
    for e in notes:
        if e["t"] + 2.0 < 8.0 - 1e-9:
            partner = [o for o in notes
                       if abs(o["t"] - (e["t"] + 2.0)) < 1e-3
                       and o["pitch"] == e["pitch"]]
            assert partner, f"no repeat of event at {e['t']}"


def test_schedule_zero_volume_keeps_events():
    bank = default_bank()
    d = _uniform_directive(volume=0.0)
    events = schedule([(0.0, d)], bank, duration=4.0)
    notes = [e for e in events if e["kind"] == "note"]
    assert notes
    assert all(e["velocity"] == 0.0 for e in notes)


def test_schedule_deterministic_byte_identical(tmp_path):
    bank = default_bank()
    timeline = [(0.0, _uniform_directive(0.5)), (3.1, _uniform_directive(0.9))]
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_events(schedule(timeline, bank, 10.0), p1)
    write_events(schedule(timeline, bank, 10.0), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_schedule_directive_applies_next_beat():
    bank = default_bank()  # 0.5 s per beat
    timeline = [(0.0, _uniform_directive(0.2)), (0.6, _uniform_directive(0.9))]
    events = schedule(timeline, bank, duration=4.0)
    notes = [e for e in events if e["kind"] == "note" and e["pattern"] == 0]
    for e in notes:
        if e["t"] < 1.0 - 1e-9:  # change at t=0.6 lands on beat 2 (t=1.0)
            assert e["velocity"] == pytest.approx(0.2)
        else:
            assert e["velocity"] == pytest.approx(0.9)


def test_schedule_clock_regression_rejected():
    bank = default_bank()
    with pytest.raises(ClockError):
        schedule([(1.0, _uniform_directive()), (0.5, _uniform_directive())],
                 bank, 4.0)


def test_light_levels_scale_with_brightness():
    bank = default_bank()
    lo = schedule([(0.0, _uniform_directive(brightness=0.2))], bank, 4.0)
    hi = schedule([(0.0, _uniform_directive(brightness=0.8))], bank, 4.0)
    lo_l = [e["level"] for e in lo if e["kind"] == "light"]
    hi_l = [e["level"] for e in hi if e["kind"] == "light"]
    assert np.allclose(np.array(hi_l), 4.0 * np.array(lo_l))


def test_udp_mirror_sends_json_lines():
    recv = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    recv.bind(("127.0.0.1", 0))
    recv.settimeout(2.0)
    port = recv.getsockname()[1]
    mirror = UdpMirror("127.0.0.1", port)
    mirror.send({"t": 0.5, "pattern": 2, "level": 0.7})
    data, _ = recv.recvfrom(65536)
    obj = json.loads(data.decode().strip())
    assert obj == {"t": 0.5, "pattern": 2, "level": 0.7}
    mirror.close()
    recv.close()
