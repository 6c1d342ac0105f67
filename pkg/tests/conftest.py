import dataclasses

import pytest

from gfmnet.examples import EXAMPLES, load_example
from gfmnet.network import assemble, kron_reduce
from gfmnet.stability import assemble_closed_loop

VALID_EXAMPLES = ("radial_ygd", "two_radial", "chain_ygd", "feeder_single", "feeder_multi")

_ACCEPTANCE = {}


def record_criterion(number, title, passed, detail=""):
    _ACCEPTANCE[number] = (title, passed, detail)
    print(f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}: {title} {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        line = f"{number:>2} {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def docs():
    return {name: load_example(name) for name in EXAMPLES}


def closed_loop(doc, specs=None, model=None, **kwargs):
    model = doc.model if model is None else model
    red = kron_reduce(assemble(model))
    return assemble_closed_loop(red, list(doc.converters if specs is None else specs), **kwargs)


def dd_variant(doc):
    """two_radial with the joining YgD replaced by a DD transformer."""
    branches = tuple(
        dataclasses.replace(br, kind="DD") if (br.from_node, br.to_node) == ("3", "4") else br
        for br in doc.model.branches
    )
    return dataclasses.replace(doc.model, branches=branches)
