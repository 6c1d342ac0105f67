import json
import io

import pytest

from gfmnet import cli
from gfmnet.errors import DocumentError
from gfmnet.examples import EXAMPLES, example_path, example_text
from gfmnet.io import LoadRange, parse, serialize

MINIMAL = """\
# two buses
[nodes]
id=1 phases=3 role=exterior
id=2 phases=3
[branches]
from=1 to=2 kind=Line3 b=2
[converters]
node=1 law=PositiveSequenceDroop m_d=0.05 tau=0.05
"""


def _run(argv):
    buf = io.StringIO()
    code = cli.run_command(argv, out=buf)
    return code, buf.getvalue()


def _body(text):
    return json.loads(cli.comparable_section(text))


@pytest.mark.parametrize("name", EXAMPLES)
def test_shipped_documents_are_canonical(name):
    text = example_text(name)
    assert serialize(parse(text)) == text


def test_description_kept():
    assert parse(MINIMAL).description == ("two buses",)


def test_gains_pair_normalized():
    text = MINIMAL.replace("m_d=0.05 tau=0.05", "m_p=0.05 m_q=0.0025 tau=0.05")
    assert parse(text).converters[0].m_d == pytest.approx(0.05)


def test_unknown_key_strict_vs_lenient():
    text = MINIMAL.replace("id=2 phases=3", "id=2 phases=3 colour=red")
    with pytest.raises(DocumentError):
        parse(text)
    doc = parse(text, strict=False)
    assert doc.warnings


def test_syntax_error_position():
    text = MINIMAL.replace("kind=Line3", "kind=XX")
    with pytest.raises(DocumentError) as info:
        parse(text)
    assert info.value.line == 6
    assert info.value.column == MINIMAL.splitlines()[5].index("kind") + 1


def test_converter_on_interior_node_rejected():
    text = MINIMAL.replace("node=1 law", "node=2 law")
    with pytest.raises(DocumentError):
        parse(text)


def test_load_range_levels():
    assert LoadRange(0.0, 0.6, 0.15).levels() == (0.0, 0.15, 0.3, 0.45, 0.6)
    assert str(LoadRange(0.0, 0.6, 0.15)) == "0.0:0.6:0.15"


def test_cli_validate_and_certify():
    code, out = _run(["validate", str(example_path("radial_ygd"))])
    assert code == 0 and _body(out)["report"]["passed"]
    code, out = _run(["certify", str(example_path("two_radial"))])
    assert code == 0
    assert _body(out)["certificate"]["fired_condition"] == 3


def test_cli_verdict_exit_codes():
    assert _run(["validate", str(example_path("radial_reversed"))])[0] == 1
    code, out = _run(["certify", str(example_path("chain_ygd")), "--kbal", "0"])
    assert code == 1
    assert _body(out)["certificate"]["verdict"] == "unstable-structure"


def test_cli_input_errors(tmp_path):
    assert _run(["validate", str(tmp_path / "nope.net")])[0] == 2
    assert _run(["bogus"])[0] == 2
    bad = tmp_path / "bad.net"
    bad.write_text(MINIMAL.replace("b=2", "b=-2"))
    code, out = _run(["validate", str(bad)])
    assert code == 2 and "error" in json.loads(out)


def test_cli_matrix_and_simulate(tmp_path):
    path = str(example_path("radial_ygd"))
    code, out = _run(["matrix", path, "--out", str(tmp_path / "m")])
    assert code == 0
    assert sorted(p.name for p in (tmp_path / "m").iterdir()) == ["B.csv", "J.csv", "J_red.csv", "W.csv"]
    code, out = _run(["simulate", path, "--t-end", "0.2", "--dt", "0.01", "--out", str(tmp_path / "s")])
    assert code == 0
    body = _body(out)
    assert body["samples"] == 21
    assert (tmp_path / "s" / "trajectory.csv").exists()


def test_cli_sweep_writes_csv(tmp_path):
    path = str(example_path("feeder_single"))
    code, out = _run(["sweep", path, "--kbal", "0,30", "--load", "0.3", "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 3


def test_cli_bad_load_range():
    code, out = _run(["sweep", str(example_path("feeder_single")), "--load", "1:0:0.1"])
    assert code == 2
