"""Mixed-autonomy BPR delays, path delays and social delay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibleFlowError
from .network import DemandSpec, LinkParams, Network, PathSet

DELAY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class FlowVector:
    """Regular and autonomous flow on every path of a PathSet (flat order)."""

    regular: np.ndarray
    autonomous: np.ndarray

    def __post_init__(self):
        reg = np.array(self.regular, dtype=float)
        aut = np.array(self.autonomous, dtype=float)
        if reg.shape != aut.shape or reg.ndim != 1:
            raise ValueError("regular and autonomous flows must be 1-D and equally long")
        if np.any(reg < 0) or np.any(aut < 0):
            raise DomainError("path flows must be nonnegative")
        reg.setflags(write=False)
        aut.setflags(write=False)
        object.__setattr__(self, "regular", reg)
        object.__setattr__(self, "autonomous", aut)

    @classmethod
    def zeros(cls, n_paths: int) -> FlowVector:
        return cls(np.zeros(n_paths), np.zeros(n_paths))

    @property
    def total(self) -> np.ndarray:
        return self.regular + self.autonomous

    def __len__(self):
        return len(self.regular)

    def conservation_residuals(self, paths: PathSet, demand: DemandSpec) -> dict[str, float]:
        """Signed residual of each class-conservation constraint."""
        out = {}
        for w, sl in enumerate(paths.od_slices):
            r, alpha = demand.demands[w], demand.alphas[w]
            out[f"od {w} regular"] = float(self.regular[sl].sum() - (1 - alpha) * r)
            out[f"od {w} autonomous"] = float(self.autonomous[sl].sum() - alpha * r)
        return out

    def check_feasible(self, paths: PathSet, demand: DemandSpec, tol: float = 1e-9):
        if len(self) != paths.n_paths:
            raise ValueError(f"flow vector has {len(self)} entries, path set has {paths.n_paths}")
        residuals = self.conservation_residuals(paths, demand)
        worst = max(abs(v) for v in residuals.values())
        if worst > tol:
            raise InfeasibleFlowError(
                f"class conservation violated (max residual {worst:.3g})", residuals
            )


def link_flows(f: FlowVector, paths: PathSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-link (regular, autonomous, total) flows."""
    inc = paths.incidence
    reg = inc @ f.regular
    aut = inc @ f.autonomous
    return reg, aut, reg + aut


def link_delay(params: LinkParams, f_regular: float, f_autonomous: float) -> float:
    if f_regular < 0 or f_autonomous < 0:
        raise DomainError("link flows must be nonnegative")
    load = f_regular / params.m + f_autonomous / params.M
    return params.a + params.scale * load**params.beta


def link_capacity(params: LinkParams, alpha: float) -> float:
    """Effective capacity at autonomy ratio ``alpha`` of the link's flow."""
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"link autonomy ratio must be in [0, 1], got {alpha}")
    m, M = params.m, params.M
    return m * M / (alpha * m + (1 - alpha) * M)


class LinkArrays:
    """Column view of a network's link parameters for vectorised evaluation."""

    def __init__(self, net: Network):
        ps = net.params
        self.a = np.array([p.a for p in ps])
        self.scale = np.array([p.scale for p in ps])
        self.beta = np.array([p.beta for p in ps])
        self.m = np.array([p.m for p in ps])
        self.M = np.array([p.M for p in ps])

    def load(self, reg, aut):
        return reg / self.m + aut / self.M

    def delays(self, reg, aut):
        return self.a + self.scale * self.load(reg, aut) ** self.beta

    def reduced_delays(self, x):
        """Single-class delay a + scale*(x/m)**beta."""
        return self.a + self.scale * (x / self.m) ** self.beta

    def reduced_derivative(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.scale * self.beta / self.m * (x / self.m) ** (self.beta - 1)
        return np.where(self.scale == 0, 0.0, d)

    def beckmann(self, x):
        """Sum over links of the integral of the reduced delay from 0 to x."""
        return float(np.sum(self.a * x + self.scale * x ** (self.beta + 1) / ((self.beta + 1) * self.m**self.beta)))


def link_delays(net: Network, paths: PathSet, f: FlowVector) -> np.ndarray:
    reg, aut, _ = link_flows(f, paths)
    return LinkArrays(net).delays(reg, aut)


def path_delays(net: Network, paths: PathSet, f: FlowVector) -> np.ndarray:
    return paths.incidence.T @ link_delays(net, paths, f)


def path_delay(net: Network, paths: PathSet, f: FlowVector, p: int) -> float:
    """Delay of the path with flat index ``p``."""
    return float(path_delays(net, paths, f)[p])


def od_delays(net: Network, paths: PathSet, f: FlowVector) -> np.ndarray:
    """Minimum path delay of every O/D pair."""
    pd = path_delays(net, paths, f)
    return np.array([pd[sl].min() for sl in paths.od_slices])


def social_delay(net: Network, paths: PathSet, f: FlowVector) -> float:
    return float(f.total @ path_delays(net, paths, f))
