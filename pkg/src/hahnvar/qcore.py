"""Parameters, the jump map and truncated q,omega-lattices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DegenerateSeed

__all__ = [
    "QOmegaParams",
    "QLattice",
    "jump",
    "bracket",
    "build_lattice",
    "depth_for_tol",
    "resolvable_depth",
    "snap_tolerance",
]


@dataclass(frozen=True)
class QOmegaParams:
    """The pair ``(q, omega)`` with ``0 < q < 1`` and ``omega > 0``.

    ``omega0 = omega / (1 - q)`` is the fixed point of the jump map
    ``t -> q*t + omega``; it is computed once here and reused everywhere so
    that equality tests against it are consistent.
    """

    q: float
    omega: float
    omega0: float = field(init=False)

    def __post_init__(self):
        q = float(self.q)
        omega = float(self.omega)
        if not (0.0 < q < 1.0):
            raise ValueError(f"q must lie in (0, 1), got {q!r}")
        if not (omega > 0.0 and math.isfinite(omega)):
            raise ValueError(f"omega must be positive and finite, got {omega!r}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "omega0", omega / (1.0 - q))

    @property
    def snap_tol(self) -> float:
        return snap_tolerance(self)

    def is_fixed_point(self, t: float) -> bool:
        return abs(t - self.omega0) <= self.snap_tol

    def jump(self, t: float) -> float:
        return self.q * t + self.omega


def snap_tolerance(params: QOmegaParams) -> float:
    """Absolute tolerance under which a value is identified with omega0."""
    return 1e-14 * max(1.0, abs(params.omega0))


def jump(params: QOmegaParams, t: float) -> float:
    """``q*t + omega``."""
    return params.q * t + params.omega


def bracket(params: QOmegaParams, k: int) -> float:
    """``[k]_{q,omega} = omega (1 - q**k) / (1 - q)``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0:
        return 0.0
    return params.omega * -math.expm1(k * math.log(params.q)) / (1.0 - params.q)


def depth_for_tol(params: QOmegaParams, a: float, b: float, tol: float) -> int:
    """Smallest ``N`` with ``q**N * max(|a - omega0|, |b - omega0|) < tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    spread = max(abs(a - params.omega0), abs(b - params.omega0))
    if spread < tol:
        return 0
    n = math.ceil(math.log(tol / spread) / math.log(params.q))
    while params.q**n * spread >= tol:
        n += 1
    while n > 0 and params.q ** (n - 1) * spread < tol:
        n -= 1
    return n


def resolvable_depth(params: QOmegaParams, a: float, b: float, min_gap: float) -> int:
    """Largest ``N`` such that every jump ``|qt + w - t|`` on ``[a, b]`` up to depth ``N`` is ``>= min_gap``.

    Nested difference quotients lose about ``eps / gap`` per level, so checks
    of second-order identities on deep lattice points are limited by this gap
    rather than by the mathematics.
    """
    if min_gap <= 0:
        raise ValueError("min_gap must be positive")
    spreads = [abs(s - params.omega0) for s in (a, b) if not params.is_fixed_point(s)]
    if not spreads:
        raise DegenerateSeed("both seeds coincide with omega0")
    first = (1.0 - params.q) * min(spreads)
    if first < min_gap:
        return 0
    return int(math.floor(math.log(min_gap / first) / math.log(params.q)))


@dataclass(frozen=True)
class QLattice:
    """Truncated enumeration of ``[a, b]_{q,omega}``.

    ``branches[i]`` holds ``q**n * seeds[i] + [n]`` for ``n = 0..depth``, generated
    by the jump recurrence, with values within the snap tolerance of omega0
    replaced by omega0.  ``points`` is the sorted union with omega0.
    """

    params: QOmegaParams
    seeds: tuple
    depth: int
    branches: tuple
    points: tuple
    bracket_coeffs: tuple
    tail_gap: float
    index: dict = field(default_factory=dict, compare=False, repr=False)

    def __contains__(self, t) -> bool:
        return self.find(t) is not None

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def omega0(self) -> float:
        return self.params.omega0

    def find(self, t: float):
        """Return the stored lattice point equal to ``t`` (up to a few ulps), or None."""
        if self.params.is_fixed_point(t):
            return self.params.omega0
        if t in self.index:
            return t
        tol = 4.0 * math.ulp(max(1.0, abs(t)))
        for branch in self.branches:
            for p in branch:
                if abs(p - t) <= tol:
                    return p
        return None

    def locate(self, t: float):
        """``(branch index, depth index)`` of ``t``; ``None`` for omega0 or absent points."""
        p = self.find(t)
        if p is None or p == self.params.omega0:
            return None
        return self.index.get(p)

    def interior(self):
        """Points whose jump is also a stored point (omega0 included)."""
        out = []
        for branch in self.branches:
            for n in range(len(branch) - 1):
                out.append(branch[n])
        out.append(self.params.omega0)
        return sorted(set(out))

    def closed_form(self, seed_index: int, n: int) -> float:
        s = self.seeds[seed_index]
        return self.params.q**n * s + bracket(self.params, n)


def build_lattice(params: QOmegaParams, a: float, b: float, depth: int) -> QLattice:
    """Enumerate ``[a, b]_{q,omega}`` to depth ``depth`` from the seeds ``a`` and ``b``."""
    a = float(a)
    b = float(b)
    if not a < b:
        raise ValueError(f"need a < b, got a={a!r}, b={b!r}")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    w0 = params.omega0
    if params.is_fixed_point(a) and params.is_fixed_point(b):
        raise DegenerateSeed("both seeds coincide with omega0")

    branches = []
    gap = 0.0
    for s in (a, b):
        p = w0 if params.is_fixed_point(s) else s
        branch = [p]
        for _ in range(depth):
            p = w0 if p == w0 else params.q * p + params.omega
            if params.is_fixed_point(p):
                p = w0
            branch.append(p)
        branches.append(tuple(branch))
        gap = max(gap, abs(branch[-1] - w0))

    points = sorted(set(branches[0]) | set(branches[1]) | {w0})
    index = {}
    for i, branch in enumerate(branches):
        for n, p in enumerate(branch):
            if p != w0:
                index.setdefault(p, (i, n))
    coeffs = tuple(bracket(params, n) for n in range(depth + 1))
    return QLattice(
        params=params,
        seeds=(a, b),
        depth=depth,
        branches=tuple(branches),
        points=tuple(points),
        bracket_coeffs=coeffs,
        tail_gap=gap,
        index=index,
    )
