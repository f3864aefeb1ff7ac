import random

import pytest
from hypothesis import given, settings, strategies as st
from oracles import WORKED_DEFS, naive_essentials

from msgflow.essential import (
    INSTANCE,
    EssentialFlow,
    EssentialSet,
    essential_flows,
    extract_essential,
    is_essential_flow,
    remove_emfs,
    strip_emfs,
)
from msgflow.model import Trace, TraceSet, parse_message_definitions, parse_traces

PAPER_FOUR = {(3, 4), (1, 5), (1, 2), (5, 6)}


def test_worked_trace_contains_named_pairs(worked_dict, worked_traces):
    ec = extract_essential(worked_traces, worked_dict)
    assert PAPER_FOUR <= ec.pairs
    # the rescan oracle agrees on the whole set
    assert ec.pairs == naive_essentials(worked_traces[0].events, worked_dict)


def test_instance_policy_on_worked_trace(worked_dict, worked_traces):
    ec = extract_essential(worked_traces, worked_dict, consume=INSTANCE)
    assert ec.pairs == naive_essentials(worked_traces[0].events, worked_dict, consume_all=False)
    assert {(3, 4), (1, 5), (5, 6)} <= ec.pairs


def test_single_pair(worked_dict):
    assert extract_essential(parse_traces("1 2", worked_dict), worked_dict).pairs == {(1, 2)}


def test_ambiguous_effect_yields_nothing(worked_dict):
    # both 1 and 3 send to the cache, which sends 5
    ec = extract_essential(parse_traces("1 3 5", worked_dict), worked_dict)
    assert not any(e == 5 for _, e in ec.pairs)


def test_unknown_policy(worked_dict, worked_traces):
    with pytest.raises(ValueError):
        extract_essential(worked_traces, worked_dict, consume="value")


def test_export_round_trip():
    es = EssentialSet(frozenset({(5, 6), (1, 2), (3, 4)}))
    text = es.export()
    assert text == "1 -> 2\n3 -> 4\n5 -> 6\n"
    assert EssentialSet.parse(text) == es


def test_essential_flows_and_predicate(worked_dict):
    es = EssentialSet(frozenset({(1, 2), (1, 5), (5, 6), (6, 2), (3, 4)}))
    flows = [f.sequence for f in essential_flows(es, worked_dict)]
    assert flows == [(1, 2), (1, 5, 6, 2), (3, 4)]
    assert is_essential_flow((1, 5, 6, 2), es, worked_dict)
    assert not is_essential_flow((1, 5, 6), es, worked_dict)
    assert not is_essential_flow((3, 5, 6, 4), es, worked_dict)


def test_remove_concatenated_flows():
    reduced, removed = remove_emfs(Trace((3, 4, 1, 2)), [EssentialFlow((3, 4)), EssentialFlow((1, 2))])
    assert len(reduced) == 0 and removed == 4


def test_remove_from_worked_trace(worked_traces):
    reduced, removed = remove_emfs(worked_traces[0], [(3, 4)])
    assert removed == 4
    assert reduced.events == (1, 1, 5, 6, 2, 5, 6, 2, 1, 2)


def test_non_contiguous_is_kept():
    reduced, removed = remove_emfs((1, 5, 2), [(1, 2)])
    assert reduced.events == (1, 5, 2) and removed == 0


def test_longest_first():
    rest, blocks = strip_emfs((1, 5, 6, 2), [(1, 2), (5, 6), (1, 5, 6, 2)])
    assert rest == [] and blocks == [(1, 5, 6, 2)]


def test_seam_is_rechecked():
    # cutting (5,6) joins 1 and 2, exposing (1,2)
    rest, blocks = strip_emfs((1, 5, 6, 2, 7), [(5, 6), (1, 2)])
    assert rest == [7] and blocks == [(5, 6), (1, 2)]


def test_random_traces_match_rescan_oracle():
    d = parse_message_definitions(WORKED_DEFS)
    rng = random.Random(7)
    for _ in range(300):
        events = tuple(rng.randint(1, 6) for _ in range(rng.randint(1, 16)))
        ts = TraceSet((events,))
        assert extract_essential(ts, d).pairs == naive_essentials(events, d)
        assert extract_essential(ts, d, consume=INSTANCE).pairs == naive_essentials(events, d, consume_all=False)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.lists(st.integers(1, 6), min_size=1, max_size=18), min_size=1, max_size=3))
def test_pairs_are_structurally_causal_and_order_free(raw):
    d = parse_message_definitions(WORKED_DEFS)
    ts = TraceSet(tuple(tuple(r) for r in raw))
    ec = extract_essential(ts, d)
    assert all(d.causal(c, e) for c, e in ec.pairs)
    assert extract_essential(TraceSet(tuple(reversed(ts.traces))), d) == ec


flow_st = st.lists(st.integers(1, 6), min_size=1, max_size=4).map(tuple)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(1, 6), max_size=30), st.lists(flow_st, max_size=4))
def test_removal_accounting_and_order(events, flows):
    reduced, removed = remove_emfs(tuple(events), flows)
    assert len(events) == len(reduced) + removed
    it = iter(events)
    assert all(any(x == y for y in it) for x in reduced.events)
    # nothing removable is left behind
    rest, _ = strip_emfs(reduced.events, flows)
    assert tuple(rest) == reduced.events
    for f in flows:
        n = len(f)
        assert all(tuple(reduced.events[i:i + n]) != f for i in range(len(reduced) - n + 1))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from([(1, 2), (1, 5, 6, 2), (3, 4)]), max_size=12))
def test_concatenated_flows_vanish(chunks):
    flows = [(1, 2), (1, 5, 6, 2), (3, 4)]
    events = tuple(m for c in chunks for m in c)
    reduced, removed = remove_emfs(events, flows)
    assert len(reduced) == 0 and removed == len(events)
