"""Bundled network documents for the worked examples."""

from importlib import resources

from .network import DemandSpec, Network, load_network

NAMES = ("fig1", "ex2", "ex3", "ex4", "ex4_printed", "ex5")


def example_text(name: str) -> str:
    if name not in NAMES:
        raise KeyError(f"unknown example {name!r}; available: {', '.join(NAMES)}")
    return resources.files(__package__).joinpath("data", f"{name}.json").read_text()


def load_example(name: str) -> tuple[Network, DemandSpec]:
    return load_network(example_text(name))
