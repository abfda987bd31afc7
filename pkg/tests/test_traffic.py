"""The synthetic attack corpus: every attack trips exactly its own rule."""

import pytest

from netphase.capture import decode_packet
from netphase.rules import RuleEngine, default_rules
from netphase.traffic import ATTACKS, attack_capture, benign_capture, lorenz_capture


def _scan(records):
    return RuleEngine(default_rules()).run(decode_packet(r) for r in records)


@pytest.mark.parametrize("seed", [0, 1])
def test_benign_is_quiet(seed):
    recs = benign_capture(seed=seed)
    assert len(recs) >= 1200
    assert _scan(recs) == []


@pytest.mark.parametrize("name", sorted(ATTACKS))
def test_attack_trips_only_its_rule(name):
    alerts = _scan(attack_capture(name))
    assert [a.rule for a in alerts] == [name]


def test_every_default_rule_has_an_attack():
    assert {r.name for r in default_rules()} == set(ATTACKS)


def test_records_sorted():
    recs = attack_capture("syn-flood")
    ts = [r.timestamp for r in recs]
    assert ts == sorted(ts)


def test_lorenz_capture_quiet_and_rate():
    recs = lorenz_capture(duration=200.0)
    assert 0.5 * 30 * 200 < len(recs) < 1.5 * 30 * 200
    assert recs[-1].timestamp - recs[0].timestamp <= 200.0
    assert _scan(recs) == []
