"""Shared random generators for tests."""

import numpy as np

from socfeas.lorentz import BlockVec, ConeStructure


def random_interior_block(rng, n, slack=(0.05, 2.0)):
    x = rng.normal(size=n + 1)
    x[0] = np.linalg.norm(x[1:]) * (1.0 + rng.uniform(*slack)) + 1e-3
    return x


def random_interior(rng, cone: ConeStructure, slack=(0.05, 2.0)) -> BlockVec:
    return BlockVec(cone, np.concatenate([random_interior_block(rng, d, slack) for d in cone.block_dims]))


def random_cone(rng, max_blocks=4, max_dim=4) -> ConeStructure:
    r = int(rng.integers(1, max_blocks + 1))
    return ConeStructure(tuple(int(d) for d in rng.integers(1, max_dim + 1, size=r)))
