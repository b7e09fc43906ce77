"""Working-set selection strategies.

Cyclic sweeps, uniform random k-subsets, and the two semi-greedy rules
that alternate a random pair on odd iterations with a measure-driven
argmax/argmin pair on even iterations.
"""

from __future__ import annotations

import enum
import itertools
from math import comb

import numpy as np

from .errors import KMismatch, TooLarge
from .problems import CurvatureMatrix

# floor for the pairwise Lipschitz entries inside the S1 measure; real
# Gram matrices carry negative off-diagonals the formula cannot accept
LIPSCHITZ_FLOOR = 1e-12


class SelectionKind(enum.Enum):
    CYCLIC = "cyclic"
    UNIFORM_RANDOM = "uniform"
    SEMI_GREEDY_SIT = "semigreedy_sit"
    SEMI_GREEDY_NNSPCA = "semigreedy_nnspca"


class SelectionStrategy:
    """Stateful working-set generator; one instance per solver run."""

    def __init__(self, kind: SelectionKind, rng_seed: int = 0):
        self.kind = kind
        self.rng_seed = int(rng_seed)
        self.rng = np.random.Generator(np.random.Philox(self.rng_seed))
        self.cursor = 0

    def _random_pair(self, n: int, k: int) -> np.ndarray:
        return np.sort(self.rng.choice(n, size=k, replace=False))

    def next_working_set(
        self,
        t: int,
        x: np.ndarray,
        g: np.ndarray | None = None,
        L: CurvatureMatrix | None = None,
        k: int = 2,
    ) -> np.ndarray:
        n = len(x)
        if not 2 <= k <= n:
            raise ValueError(f"need 2 <= k <= {n}, got k = {k}")
        if self.kind is SelectionKind.CYCLIC:
            out = (self.cursor + np.arange(k)) % n
            self.cursor = (self.cursor + k) % n
            return out
        if self.kind is SelectionKind.UNIFORM_RANDOM:
            return self._random_pair(n, k)

        if k != 2:
            raise KMismatch("semi-greedy strategies are defined for k = 2 only")
        if t % 2 == 1:
            return self._random_pair(n, 2)
        if g is None:
            raise ValueError("semi-greedy selection needs the composite gradient g")

        if self.kind is SelectionKind.SEMI_GREEDY_SIT:
            if L is None:
                raise ValueError("semi-greedy SIT selection needs the curvature matrix")
            j = int(np.argmin(g))
            lcol = np.maximum(L.qbar[:, j], LIPSCHITZ_FLOOR)
            s1 = np.sqrt(lcol) * np.minimum((g - g[j]) / lcol, x)
            s1[j] = -np.inf
            i = int(np.argmax(s1))
            return np.array([i, j])

        # semi-greedy NNSPCA: z_r = |g_r x_r - <x, g> x_r^2|
        sv = float(x @ g)
        z = np.abs(g * x - sv * x * x)
        i = int(np.argmax(z))
        j = int(np.argmin(z))
        return np.array([i, j])


def next_working_set(strategy, t, x, g=None, L=None, k=2) -> np.ndarray:
    """Functional wrapper over SelectionStrategy.next_working_set."""
    return strategy.next_working_set(t, x, g=g, L=L, k=k)


def enumerate_working_sets(n: int, k: int) -> list:
    """All C(n, k) working sets in lexicographic order."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    if comb(n, k) > 10**6:
        raise TooLarge(f"C({n},{k}) exceeds the enumeration budget")
    if n > 20:
        raise ValueError(f"enumeration is sized for n <= 20, got n={n}")
    return [np.array(B, dtype=int) for B in itertools.combinations(range(n), k)]
