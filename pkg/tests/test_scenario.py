import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nemo_roam.scenario import (
    ParseError,
    ValidationError,
    canned_names,
    canned_text,
    load_canned,
    parse_scenario,
    serialize_scenario,
)

MINIMAL = """mode bs
seed 7
node CN kind=cn
node R kind=router
node HA kind=ha prefix=20010db8000a00000000000000000000/64
node AR kind=ar prefix=20010db8000b00000000000000000000/64
node MR kind=mr prefix=20010db8001000000000000000000000/64 ha=HA
node MNN kind=mnn mr=MR
link CN R delay=1
link R HA delay=1
link R AR delay=1
link AR MR delay=1
link MR MNN delay=1
at 0 attach MR AR
at 10 send CN MNN bytes=100
"""


def test_fig2_shape():
    spec = load_canned("fig2-basic")
    assert len(spec.nodes) == 6 and len(spec.links) == 5
    assert [n.name for n in spec.nodes] == ["CN", "R1", "HA", "AR", "MR", "MNN"]


def test_shipped_scenarios():
    assert canned_names() == ["fig2-basic", "fig3-nested", "fig4-case1", "fig5-handoff", "policy-deny"]
    with pytest.raises(KeyError):
        canned_text("nope")


def test_defaults():
    spec = parse_scenario(MINIMAL)
    assert spec.t_end_ms == 10_000 and spec.seed == 7
    (send,) = spec.sends
    assert (send.count, send.interval_ms) == (1, 0)


def test_empty_file():
    with pytest.raises(ParseError) as exc:
        parse_scenario("")
    assert exc.value.lineno == 0


def test_missing_seed():
    with pytest.raises(ParseError):
        parse_scenario("mode bs\n")


@pytest.mark.parametrize("bad,line", [
    ("mode xx", 1),
    ("seed -1", 2),
    ("seed 18446744073709551616", 2),
    ("node X kind=blimp", 3),
    ("node X kind=cn addr=zz", 3),
    ("link CN R", 3),
    ("link CN R delay=0", 3),
    ("at 5 teleport MR AR", 3),
    ("at 5 send CN MNN", 3),
    ("frobnicate", 3),
    ("node X kind=cn kind=cn", 3),
])
def test_parse_errors_carry_line(bad, line):
    base = ["mode bs", "seed 1"]
    if line == 3:
        text = "\n".join(base + [bad]) + "\n"
    else:
        lines = list(base)
        lines[line - 1] = bad
        text = "\n".join(lines) + "\n"
    with pytest.raises(ParseError) as exc:
        parse_scenario(text)
    assert exc.value.lineno == line


@pytest.mark.parametrize("old,new", [
    ("ha=HA", "ha=HAX"),
    ("mr=MR", "mr=CN"),
    ("node AR kind=ar prefix=20010db8000b00000000000000000000/64", "node AR kind=ar"),
    ("link MR MNN delay=1", "link MR GHOST delay=1"),
    ("at 0 attach MR AR", "at 0 attach MR R"),
    ("at 10 send CN MNN", "at 10 send CN R"),
    ("link AR MR delay=1", "link AR MR delay=1\nlink MR AR delay=1"),
    ("node CN kind=cn", "node CN kind=cn\nnode CN kind=cn"),
    ("node CN kind=cn", "node CN kind=cn visitors=deny"),
])
def test_validation_errors(old, new):
    with pytest.raises(ValidationError):
        parse_scenario(MINIMAL.replace(old, new))


def test_attach_without_link():
    text = MINIMAL.replace("link AR MR delay=1\n", "")
    with pytest.raises(ValidationError):
        parse_scenario(text)


def test_nested_route_optimisation_rejected():
    spec = load_canned("fig3-nested")
    with pytest.raises(ValidationError):
        spec.with_mode("ro")


@pytest.mark.parametrize("name", canned_names())
def test_shipped_round_trip(name):
    spec = load_canned(name)
    text = serialize_scenario(spec)
    assert parse_scenario(text) == spec
    assert serialize_scenario(parse_scenario(text)) == text


@st.composite
def scenario_texts(draw):
    n_cn = draw(st.integers(1, 3))
    n_ar = draw(st.integers(1, 3))
    lines = [f"mode {draw(st.sampled_from(['bs', 'ro']))}",
             f"seed {draw(st.integers(0, (1 << 64) - 1))}",
             f"tend {draw(st.integers(0, 50_000))}",
             "node R kind=router",
             "node HA kind=ha prefix=20010db8000a00000000000000000000/64"]
    for i in range(n_cn):
        lines.append(f"node CN{i} kind=cn")
    for i in range(n_ar):
        lines.append(f"node AR{i} kind=ar prefix=20010db800b{i}00000000000000000000/64")
    lines += ["node MR kind=mr prefix=20010db8001000000000000000000000/64 ha=HA",
              "node MNN kind=mnn mr=MR", "link R HA delay=%d" % draw(st.integers(1, 20)),
              "link MR MNN delay=1"]
    for i in range(n_cn):
        lines.append(f"link CN{i} R delay={draw(st.integers(1, 20))}")
    for i in range(n_ar):
        lines.append(f"link AR{i} R delay={draw(st.integers(1, 20))}")
        lines.append(f"link AR{i} MR delay={draw(st.integers(1, 20))}")
    for _ in range(draw(st.integers(0, 4))):
        t = draw(st.integers(0, 9000))
        if draw(st.booleans()):
            lines.append(f"at {t} attach MR AR{draw(st.integers(0, n_ar - 1))}")
        else:
            cn = f"CN{draw(st.integers(0, n_cn - 1))}"
            src, dst = (cn, "MNN") if draw(st.booleans()) else ("MNN", cn)
            lines.append(f"at {t} send {src} {dst} bytes={draw(st.integers(0, 2000))} "
                         f"count={draw(st.integers(1, 5))} interval={draw(st.integers(0, 100))}")
    return "\n".join(lines) + "\n"


@settings(max_examples=200)
@given(scenario_texts())
def test_serialize_is_canonical(text):
    spec = parse_scenario(text)
    once = serialize_scenario(spec)
    assert parse_scenario(once) == spec
    assert serialize_scenario(parse_scenario(once)) == once
