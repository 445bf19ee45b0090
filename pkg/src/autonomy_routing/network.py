"""Network data model, JSON ingestion and simple-path enumeration.

A network document looks like::

    {
      "nodes": ["A", "B", "C", "D"],
      "links": [{"id": 1, "from": "A", "to": "B",
                 "a": 1.0, "gamma": 1.0, "beta": 1.0, "m": 1.0, "M": 2.0}],
      "od_pairs": [{"origin": "A", "destination": "D", "r": 2.0, "alpha": 0.5}]
    }

An optional top-level ``"delay_form"`` (``"bpr"`` or ``"additive"``) selects
how ``a`` and ``gamma`` combine; a link may override it with its own
``"form"`` key. See :class:`LinkParams`.
"""

from __future__ import annotations

import json
import math
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import networkx as nx
import numpy as np

from .errors import NetworkInputError, PathOverflowError

DELAY_FORMS = ("bpr", "additive")
DEFAULT_MAX_PATHS = 64


@dataclass(frozen=True)
class LinkParams:
    """BPR parameters of one link.

    Both forms share the load variable ``x = f_r/m + f_a/M``:

    * ``"bpr"``:      e = a * (1 + gamma * x**beta)
    * ``"additive"``: e = a + gamma * x**beta

    so every link delay is ``a + scale * x**beta`` with ``scale`` given by
    :attr:`scale`. The additive form is needed for links with zero free-flow
    time that still congest.
    """

    a: float
    gamma: float
    beta: float
    m: float
    M: float
    form: str = "bpr"

    def __post_init__(self):
        for name in ("a", "gamma", "beta", "m", "M"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
                raise NetworkInputError(f"{name}: expected a finite number, got {value!r}")
        if self.a < 0:
            raise NetworkInputError(f"a: must be >= 0, got {self.a}")
        if self.gamma < 0:
            raise NetworkInputError(f"gamma: must be >= 0, got {self.gamma}")
        if self.beta <= 0:
            raise NetworkInputError(f"beta: must be > 0, got {self.beta}")
        if self.m <= 0:
            raise NetworkInputError(f"m: must be > 0, got {self.m}")
        if self.M <= 0:
            raise NetworkInputError(f"M: must be > 0, got {self.M}")
        if self.form not in DELAY_FORMS:
            raise NetworkInputError(f"form: must be one of {DELAY_FORMS}, got {self.form!r}")

    @property
    def mu(self) -> float:
        """Degree of capacity asymmetry m/M."""
        return self.m / self.M

    @property
    def scale(self) -> float:
        return self.a * self.gamma if self.form == "bpr" else self.gamma


@dataclass(frozen=True)
class Link:
    id: int
    tail: str
    head: str
    params: LinkParams


@dataclass(frozen=True)
class Network:
    """Directed multigraph with O/D pairs.

    Links are addressed by their position in ``links`` (0-based index);
    ``Link.id`` is the user-facing label.
    """

    nodes: tuple[str, ...]
    links: tuple[Link, ...]
    od_pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "od_pairs", tuple(tuple(od) for od in self.od_pairs))

        if len(set(self.nodes)) != len(self.nodes):
            raise NetworkInputError("nodes: duplicate node identifiers")
        known = set(self.nodes)
        ids = [link.id for link in self.links]
        if len(set(ids)) != len(ids):
            raise NetworkInputError("links: link ids must be unique")
        for i, link in enumerate(self.links):
            if isinstance(link.id, bool) or not isinstance(link.id, int) or link.id <= 0:
                raise NetworkInputError(f"links[{i}].id: must be a positive integer, got {link.id!r}")
            for end in (link.tail, link.head):
                if end not in known:
                    raise NetworkInputError(f"links[{i}]: unknown node {end!r}")
            if link.tail == link.head:
                raise NetworkInputError(f"links[{i}]: self-loop at node {link.tail!r}")
        if not self.od_pairs:
            raise NetworkInputError("od_pairs: at least one O/D pair is required")
        graph = self.to_graph()
        for w, (o, d) in enumerate(self.od_pairs):
            for end in (o, d):
                if end not in known:
                    raise NetworkInputError(f"od_pairs[{w}]: unknown node {end!r}")
            if o == d:
                raise NetworkInputError(f"od_pairs[{w}]: origin equals destination")
            if not nx.has_path(graph, o, d):
                raise NetworkInputError(f"od_pairs[{w}]: no path from {o!r} to {d!r}")

        mus = [link.params.mu for link in self.links]
        if any(mu > 1 for mu in mus):
            bad = [link.id for link in self.links if link.params.mu > 1]
            warnings.warn(f"links {bad} have m/M > 1 (autonomy lowers capacity)", stacklevel=3)

    def to_graph(self) -> nx.MultiDiGraph:
        graph = nx.MultiDiGraph()
        graph.add_nodes_from(self.nodes)
        for i, link in enumerate(self.links):
            graph.add_edge(link.tail, link.head, key=i)
        return graph

    @property
    def params(self) -> tuple[LinkParams, ...]:
        return tuple(link.params for link in self.links)

    @property
    def link_ids(self) -> tuple[int, ...]:
        return tuple(link.id for link in self.links)

    @property
    def max_beta(self) -> float:
        return max(link.params.beta for link in self.links)

    def mu_values(self) -> np.ndarray:
        return np.array([link.params.mu for link in self.links])

    def common_mu(self, rtol: float = 1e-9) -> float | None:
        """Shared m/M of all links, or None when they differ beyond ``rtol``."""
        mus = self.mu_values()
        ref = mus[0]
        if np.all(np.abs(mus - ref) <= rtol * np.maximum(np.abs(mus), abs(ref))):
            return float(ref)
        return None


@dataclass(frozen=True)
class DemandSpec:
    demands: tuple[float, ...]
    alphas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "demands", tuple(float(r) for r in self.demands))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if len(self.demands) != len(self.alphas):
            raise NetworkInputError("demand and alpha vectors differ in length")
        for w, (r, alpha) in enumerate(zip(self.demands, self.alphas)):
            if not math.isfinite(r) or r <= 0:
                raise NetworkInputError(f"od_pairs[{w}].r: must be > 0, got {r}")
            if not 0.0 <= alpha <= 1.0:
                raise NetworkInputError(f"od_pairs[{w}].alpha: must be in [0, 1], got {alpha}")

    def __len__(self):
        return len(self.demands)

    def with_alphas(self, alphas: Sequence[float]) -> DemandSpec:
        return DemandSpec(self.demands, tuple(alphas))

    def regular(self) -> np.ndarray:
        return np.array([(1 - a) * r for r, a in zip(self.demands, self.alphas)])

    def autonomous(self) -> np.ndarray:
        return np.array([a * r for r, a in zip(self.demands, self.alphas)])


@dataclass(frozen=True)
class PathSet:
    """Simple paths per O/D pair, each a tuple of link indices.

    Paths of one O/D pair are sorted lexicographically by link index; the
    flat order used by flow vectors concatenates the O/D pairs in order.
    """

    per_od: tuple[tuple[tuple[int, ...], ...], ...]
    n_links: int

    @cached_property
    def paths(self) -> tuple[tuple[int, ...], ...]:
        return tuple(p for group in self.per_od for p in group)

    @cached_property
    def od_of_path(self) -> np.ndarray:
        return np.array([w for w, group in enumerate(self.per_od) for _ in group], dtype=int)

    @cached_property
    def od_slices(self) -> tuple[slice, ...]:
        out, start = [], 0
        for group in self.per_od:
            out.append(slice(start, start + len(group)))
            start += len(group)
        return tuple(out)

    @cached_property
    def incidence(self) -> np.ndarray:
        """Link-by-path 0/1 matrix."""
        mat = np.zeros((self.n_links, len(self.paths)))
        for j, path in enumerate(self.paths):
            for l in path:
                mat[l, j] += 1.0
        mat.setflags(write=False)
        return mat

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    def __len__(self):
        return self.n_paths


def enumerate_paths(net: Network, max_paths: int = DEFAULT_MAX_PATHS) -> PathSet:
    """All simple paths of every O/D pair, in canonical order.

    Raises PathOverflowError if an O/D pair has more than ``max_paths``.
    """
    if max_paths < 1:
        raise ValueError("max_paths must be positive")
    graph = net.to_graph()
    per_od = []
    for w, (o, d) in enumerate(net.od_pairs):
        found = []
        for edges in nx.all_simple_edge_paths(graph, o, d):
            found.append(tuple(key for _, _, key in edges))
            if len(found) > max_paths:
                raise PathOverflowError(
                    f"O/D pair {w} ({o}->{d}) has more than {max_paths} simple paths"
                )
        per_od.append(tuple(sorted(set(found))))
    return PathSet(tuple(per_od), len(net.links))


def _number(obj, key, where):
    if key not in obj:
        raise NetworkInputError(f"{where}.{key}: missing")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise NetworkInputError(f"{where}.{key}: expected a number, got {value!r}")
    return float(value)


def network_from_dict(doc: Mapping) -> tuple[Network, DemandSpec]:
    if not isinstance(doc, Mapping):
        raise NetworkInputError("document: expected a JSON object")
    for key in ("nodes", "links", "od_pairs"):
        if key not in doc or not isinstance(doc[key], list):
            raise NetworkInputError(f"{key}: missing or not a list")
    default_form = doc.get("delay_form", "bpr")
    if default_form not in DELAY_FORMS:
        raise NetworkInputError(f"delay_form: must be one of {DELAY_FORMS}, got {default_form!r}")
    nodes = [str(n) for n in doc["nodes"]]

    links = []
    for i, item in enumerate(doc["links"]):
        where = f"links[{i}]"
        if not isinstance(item, Mapping):
            raise NetworkInputError(f"{where}: expected an object")
        for key in ("id", "from", "to"):
            if key not in item:
                raise NetworkInputError(f"{where}.{key}: missing")
        try:
            params = LinkParams(
                a=_number(item, "a", where),
                gamma=_number(item, "gamma", where),
                beta=_number(item, "beta", where),
                m=_number(item, "m", where),
                M=_number(item, "M", where),
                form=item.get("form", default_form),
            )
        except NetworkInputError as exc:
            if str(exc).startswith(where):
                raise
            raise NetworkInputError(f"{where}.{exc}") from None
        links.append(Link(item["id"], str(item["from"]), str(item["to"]), params))
    # canonical path order compares link indices, so index order follows id order
    links.sort(key=lambda link: link.id if isinstance(link.id, int) else 0)

    od_pairs, demands, alphas = [], [], []
    for w, item in enumerate(doc["od_pairs"]):
        where = f"od_pairs[{w}]"
        if not isinstance(item, Mapping):
            raise NetworkInputError(f"{where}: expected an object")
        for key in ("origin", "destination"):
            if key not in item:
                raise NetworkInputError(f"{where}.{key}: missing")
        od_pairs.append((str(item["origin"]), str(item["destination"])))
        demands.append(_number(item, "r", where))
        alphas.append(_number(item, "alpha", where))

    demand = DemandSpec(tuple(demands), tuple(alphas))
    net = Network(tuple(nodes), tuple(links), tuple(od_pairs))
    return net, demand


def load_network(document: str | bytes | Mapping) -> tuple[Network, DemandSpec]:
    """Parse and validate a network document (JSON text or decoded object)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise NetworkInputError(f"malformed JSON: {exc}") from None
    return network_from_dict(document)


def read_network(path: str | Path) -> tuple[Network, DemandSpec]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise NetworkInputError(f"cannot read {path}: {exc}") from None
    return load_network(text)


def network_to_dict(net: Network, demand: DemandSpec) -> dict:
    forms = {link.params.form for link in net.links}
    shared = forms.pop() if len(forms) == 1 else None
    links = []
    for link in net.links:
        p = link.params
        item = {"id": link.id, "from": link.tail, "to": link.head,
                "a": p.a, "gamma": p.gamma, "beta": p.beta, "m": p.m, "M": p.M}
        if shared is None:
            item["form"] = p.form
        links.append(item)
    doc = {"nodes": list(net.nodes), "links": links}
    if shared is not None and shared != "bpr":
        doc["delay_form"] = shared
    doc["od_pairs"] = [
        {"origin": o, "destination": d, "r": r, "alpha": a}
        for (o, d), r, a in zip(net.od_pairs, demand.demands, demand.alphas)
    ]
    return doc


def dump_network(net: Network, demand: DemandSpec) -> str:
    return json.dumps(network_to_dict(net, demand), indent=2)


def path_label(net: Network, path: Sequence[int]) -> str:
    """Node sequence of a path, e.g. ``"A-B-D"``."""
    if not path:
        return ""
    nodes = [net.links[path[0]].tail] + [net.links[l].head for l in path]
    return "-".join(nodes)
