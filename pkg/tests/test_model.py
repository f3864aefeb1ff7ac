import pytest
from hypothesis import given, strategies as st

from msgflow.errors import (
    DuplicateMessageError,
    EmptyDictionaryError,
    ParseError,
    UndefinedMessageError,
)
from msgflow.model import (
    Kind,
    Message,
    MessageDictionary,
    causal,
    load_traces,
    parse_message_definitions,
    parse_traces,
)


def test_causal_follows_destination_to_source(worked_dict):
    assert causal(worked_dict[1], worked_dict[5])
    assert not causal(worked_dict[2], worked_dict[5])


def test_causal_self_loop_component():
    m = Message(1, "bus", "bus", "ping", Kind.REQUEST)
    assert causal(m, m)


def test_worked_definitions(worked_dict):
    assert len(worked_dict) == 6
    assert worked_dict.initial == {1, 3}
    assert worked_dict.terminal == {2, 4}
    assert worked_dict.render(5) == "cache:mem:rd:req"


def test_empty_definitions():
    with pytest.raises(EmptyDictionaryError):
        parse_message_definitions("")
    with pytest.raises(EmptyDictionaryError):
        parse_message_definitions("# only a comment\n\n")


def test_undeclared_initial_reports_line():
    with pytest.raises(UndefinedMessageError) as exc:
        parse_message_definitions("1 (a:b:c:req)\n2 (b:a:c:resp)\ninitial = {7}\n")
    assert exc.value.line == 3


def test_duplicate_id_and_quadruple():
    with pytest.raises(DuplicateMessageError):
        parse_message_definitions("1 (a:b:c:req)\n1 (b:a:c:resp)\n")
    with pytest.raises(DuplicateMessageError):
        parse_message_definitions("1 (a:b:c:req)\n2 (a:b:c:req)\n")


@pytest.mark.parametrize(
    "line",
    ["1 (a:b:c)", "x (a:b:c:req)", "1 (a:b:c:maybe)", "0 (a:b:c:req)", "1 (a-b:b:c:req)", "hello"],
)
def test_malformed_line_has_line_number(line):
    with pytest.raises(ParseError) as exc:
        parse_message_definitions("1 (p:q:r:req)\n" + line + "\n")
    assert exc.value.line == 2


def test_initial_and_terminal_must_be_disjoint():
    with pytest.raises(ParseError):
        parse_message_definitions("1 (a:b:c:req)\ninitial = {1}\nterminal = {1}\n")


def test_directive_variants_and_comments():
    d = parse_message_definitions(
        "1 (a:b:c:request)  # first\n2 (b:a:c:response)\nInitial messages = {1}\nterminal = { 2 }\n"
    )
    assert d.initial == {1} and d.terminal == {2}
    assert d[1].kind is Kind.REQUEST and d[2].kind is Kind.RESPONSE


def test_worked_trace_parses(worked_dict, worked_traces):
    assert len(worked_traces) == 1
    assert len(worked_traces[0]) == 14
    assert worked_traces[0].events[:4] == (3, 4, 1, 1)


def test_two_lines_in_file_order(worked_dict):
    ts = parse_traces("1 2\n\n# skip\n3 4\n", worked_dict)
    assert [t.events for t in ts] == [(1, 2), (3, 4)]


def test_unknown_trace_id_reports_line_and_column(worked_dict):
    with pytest.raises(UndefinedMessageError) as exc:
        parse_traces("1 2\n1 9\n", worked_dict)
    assert (exc.value.line, exc.value.column) == (2, 3)


def test_non_numeric_trace_token(worked_dict):
    with pytest.raises(ParseError):
        parse_traces("1 x", worked_dict)


def test_load_traces_concatenates_files(tmp_path, worked_dict):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_text("1 2\n")
    b.write_text("3 4\n1 2\n")
    assert len(load_traces([a, b], worked_dict)) == 3


token = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789_", min_size=1, max_size=6)


@st.composite
def dictionaries(draw):
    n = draw(st.integers(1, 12))
    ids = draw(st.lists(st.integers(1, 500), min_size=n, max_size=n, unique=True))
    quads = draw(
        st.lists(
            st.tuples(token, token, token, st.sampled_from(list(Kind))),
            min_size=n,
            max_size=n,
            unique_by=lambda q: (q[0], q[1], q[2], q[3].value),
        )
    )
    messages = {i: Message(i, *q) for i, q in zip(ids, quads)}
    roles = draw(st.lists(st.sampled_from(["i", "t", "-"]), min_size=n, max_size=n))
    initial = frozenset(i for i, r in zip(ids, roles) if r == "i")
    terminal = frozenset(i for i, r in zip(ids, roles) if r == "t")
    return MessageDictionary(messages, initial, terminal)


@given(dictionaries())
def test_dictionary_round_trip(d):
    again = parse_message_definitions(d.serialize())
    assert again.messages == d.messages
    assert all(again[i].kind is d[i].kind for i in d.ids())
    assert again.initial == d.initial and again.terminal == d.terminal


@given(dictionaries(), st.data())
def test_causal_uses_attributes_only(d, data):
    a = data.draw(st.sampled_from(d.ids()))
    b = data.draw(st.sampled_from(d.ids()))
    assert d.causal(a, b) == (d[a].dest == d[b].src)
