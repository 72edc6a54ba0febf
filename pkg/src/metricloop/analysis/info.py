"""Entropy and mutual information on finite distributions, in bits."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DegenerateEntropy

MASS_TOL = 1e-12


@dataclass(frozen=True)
class JointDistribution:
    """Joint table P(cause, observable); rows are causes, columns observables."""

    probabilities: np.ndarray
    causes: tuple[str, ...] = field(default=())
    observables: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 2:
            raise ValueError("joint table must be two-dimensional")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("joint probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"joint probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probabilities", p)
        if not self.causes:
            object.__setattr__(self, "causes", tuple(f"c{i}" for i in range(p.shape[0])))
        if not self.observables:
            object.__setattr__(self, "observables", tuple(f"o{j}" for j in range(p.shape[1])))

    @classmethod
    def from_channel(cls, prior: Sequence[float], channel: np.ndarray) -> JointDistribution:
        """Joint from a cause prior and row-stochastic channel P(obs | cause)."""
        prior_arr = np.asarray(prior, dtype=float)
        return cls(prior_arr[:, None] * np.asarray(channel, dtype=float))

    @property
    def cause_marginal(self) -> np.ndarray:
        return self.probabilities.sum(axis=1)

    @property
    def observable_marginal(self) -> np.ndarray:
        return self.probabilities.sum(axis=0)


def entropy(dist: Sequence[float] | np.ndarray) -> float:
    p = np.asarray(dist, dtype=float).ravel()
    if np.any(p < 0):
        raise ValueError("probabilities must be nonnegative")
    nz = p[p > 0]
    return float(max(0.0, -np.sum(nz * np.log2(nz))))


def mutual_information(joint: JointDistribution) -> float:
    p = joint.probabilities
    pc = joint.cause_marginal[:, None]
    po = joint.observable_marginal[None, :]
    mask = p > 0
    mi = np.sum(p[mask] * np.log2(p[mask] / (pc * po)[mask]))
    # clamp tiny negative round-off and the upper bound
    hc, ho = entropy(joint.cause_marginal), entropy(joint.observable_marginal)
    return float(min(max(mi, 0.0), min(hc, ho)))


def observability_gap(joint: JointDistribution) -> float:
    """1 - I(O;C)/H(C): 0 when observables pin down the cause, 1 when they say nothing."""
    hc = entropy(joint.cause_marginal)
    if hc <= 0:
        raise DegenerateEntropy("cause entropy is zero; the gap is undefined")
    gap = 1.0 - mutual_information(joint) / hc
    return float(min(max(gap, 0.0), 1.0))
