"""Reference triples used as controls in admissibility studies."""
from __future__ import annotations

import math

import numpy as np

from .admissibility import ControlObsTriple
from .core import OperatorBlock, dirichlet_laplacian
from .spaces import DiscreteSpace

__all__ = ["heat_point_observation", "heat_generator_observation"]


def _zero_control(A, p):
    U = DiscreteSpace.coordinates(1, p, name="C")
    return OperatorBlock(np.zeros((A.n, 1)), U, A.space, "0")


def heat_point_observation(n, p=1.0, length=math.pi) -> ControlObsTriple:
    """Dirichlet heat semigroup on ``L^p[0, length]`` observed at the midpoint.

    The point value is the linear interpolant between the two nodes closest
    to ``length / 2`` (the middle node when ``n`` is odd).
    """
    A = dirichlet_laplacian(n, length, p)
    x = A.space.grid
    mid = length / 2
    row = np.zeros(n)
    j = int(np.clip(np.searchsorted(x, mid) - 1, 0, n - 2))
    th = (mid - x[j]) / (x[j + 1] - x[j])
    row[j], row[j + 1] = 1 - th, th
    Y = DiscreteSpace.coordinates(1, p, name="C")
    C = OperatorBlock(row[None, :], A.space, Y, "delta_mid")
    return ControlObsTriple(A, _zero_control(A, p), C, name=f"heat-point(n={n})", B_bounded=True)


def heat_generator_observation(n, p=2.0, length=math.pi) -> ControlObsTriple:
    """Dirichlet heat semigroup observed through ``C = A`` (not admissible)."""
    A = dirichlet_laplacian(n, length, p)
    C = OperatorBlock(A.matrix.copy(), A.space, A.space, "A")
    return ControlObsTriple(A, _zero_control(A, p), C, name=f"heat-generator(n={n})", B_bounded=True)
