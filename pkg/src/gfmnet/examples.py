"""Shipped example networks."""
from importlib import resources

EXAMPLES = ("radial_ygd", "radial_reversed", "loop_shift", "two_radial", "chain_ygd", "feeder_single", "feeder_multi")


def example_path(name):
    if name not in EXAMPLES:
        raise KeyError(f"unknown example {name!r}; available: {', '.join(EXAMPLES)}")
    return resources.files("gfmnet") / "data" / f"{name}.net"


def example_text(name):
    return example_path(name).read_text(encoding="utf-8")


def load_example(name, *, strict=True):
    from .io import parse

    return parse(example_text(name), strict=strict)
