"""Products of Lorentz cones: block structure, determinants and margins.

A block of dimension ``n_i`` lives in ``R^{n_i + 1}``; its first entry is the
head ``x_{i0}`` and the remaining ``n_i`` entries form the tail ``xbar_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class ConeStructure:
    """Block dimensions ``(n_1, ..., n_r)`` of a product of Lorentz cones."""

    block_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.block_dims)
        if len(dims) == 0:
            raise ValueError("a cone needs at least one block")
        if any(d < 1 for d in dims):
            raise ValueError(f"block dimensions must be positive, got {dims}")
        object.__setattr__(self, "block_dims", dims)

    @property
    def r(self) -> int:
        """Number of blocks."""
        return len(self.block_dims)

    @property
    def n(self) -> int:
        """Sum of the block dimensions."""
        return sum(self.block_dims)

    @property
    def ambient_dim(self) -> int:
        """Length of a vector in the cone, ``sum(n_i + 1)``."""
        return self.n + self.r

    @cached_property
    def offsets(self) -> np.ndarray:
        """Start index of every block, plus the total length at the end."""
        return np.concatenate([[0], np.cumsum([d + 1 for d in self.block_dims])]).astype(int)

    @cached_property
    def slices(self) -> tuple[slice, ...]:
        o = self.offsets
        return tuple(slice(int(o[i]), int(o[i + 1])) for i in range(self.r))

    @cached_property
    def heads(self) -> np.ndarray:
        """Ambient indices of the block heads."""
        return self.offsets[:-1].copy()

    def block_index(self) -> np.ndarray:
        """Block number of every ambient coordinate."""
        return np.repeat(np.arange(self.r), [d + 1 for d in self.block_dims])

    def identity(self) -> np.ndarray:
        """The vector ``e`` with unit heads and zero tails."""
        e = np.zeros(self.ambient_dim)
        e[self.heads] = 1.0
        return e


@dataclass(frozen=True)
class ExtendedConeStructure:
    """``K x L_N x L_m``: the base cone followed by two appended blocks.

    The appended blocks hold ``(t, x')`` with ``x'`` of the base ambient
    dimension ``N`` and ``(tau, x'')`` with ``x''`` in ``R^m``.
    """

    base: ConeStructure
    m: int
    structure: ConeStructure = field(init=False)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be positive")
        dims = self.base.block_dims + (self.base.ambient_dim, int(self.m))
        object.__setattr__(self, "structure", ConeStructure(dims))

    @property
    def rr(self) -> int:
        """Block count of the extended cone, ``r + 2``."""
        return self.base.r + 2


@dataclass(frozen=True)
class BlockVec:
    """A real vector partitioned according to a cone structure."""

    cone: ConeStructure
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 1 or data.shape[0] != self.cone.ambient_dim:
            raise ValueError(
                f"expected a vector of length {self.cone.ambient_dim}, got shape {data.shape}"
            )
        object.__setattr__(self, "data", data)

    def block(self, i: int) -> np.ndarray:
        return self.data[self.cone.slices[i]]

    def blocks(self) -> list[np.ndarray]:
        return [self.data[s] for s in self.cone.slices]

    def __len__(self):
        return self.data.shape[0]


def block_det(xi: np.ndarray) -> float:
    """Return ``x_0^2 - |xbar|^2``, computed as a product of two factors."""
    xi = np.asarray(xi, dtype=float)
    nrm = np.linalg.norm(xi[1:])
    return float((xi[0] - nrm) * (xi[0] + nrm))


def interior_margin(xi: np.ndarray) -> float:
    """Return ``x_0 - |xbar|``; positive exactly on the interior."""
    xi = np.asarray(xi, dtype=float)
    return float(xi[0] - np.linalg.norm(xi[1:]))


def margins(x: BlockVec) -> np.ndarray:
    """Interior margins of all blocks."""
    return np.array([interior_margin(b) for b in x.blocks()])


def dets(x: BlockVec) -> np.ndarray:
    return np.array([block_det(b) for b in x.blocks()])


def in_cone(x: BlockVec, strict: bool = False) -> bool:
    m = margins(x)
    return bool(np.all(m > 0)) if strict else bool(np.all(m >= 0))
