"""Smooth sublevel safe sets, boundary regions and drift bounds.

A safe set is ``S = {x : g(x) <= 0}`` for a smooth level function ``g``.
Built-in kinds are compact by construction and star-shaped about their
center, which is what the radial boundary sampler relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    ConfigError,
    DegenerateNormalError,
    DimensionError,
    DomainError,
    EmptyRegionError,
    InvalidFieldError,
)
from .streams import stream

BOUNDARY_BAND = 1e-9
GRADIENT_FLOOR = 1e-9
NORMAL_BAND = 1e-6
FD_STEP = 1e-6
SAMPLE_BUDGET = 1_000_000
DRIFT_SAFETY_FACTOR = 1.1

SAFE_SET_KINDS = ("ball", "ellipsoid", "p-norm-ball", "custom-smooth")


@dataclass(frozen=True, eq=False)
class SafeSet:
    """Safe set ``{g <= 0}``.

    ``params`` per kind: ``radius`` (ball), ``axes`` (ellipsoid),
    ``radius`` and even ``p`` (p-norm-ball). A custom set passes ``g`` and
    ``grad_g`` callables plus ``radius_bound`` (every point of S lies within
    that distance of ``center``) and is assumed star-shaped about ``center``;
    its compactness is a user declaration echoed in certificates.
    """

    kind: str
    center: np.ndarray
    params: dict = field(default_factory=dict)
    g_func: Callable | None = None
    grad_func: Callable | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        object.__setattr__(self, "center", c)
        p = self.params
        if self.kind == "ball":
            if not p.get("radius", 0) > 0:
                raise ConfigError("ball radius must be > 0")
        elif self.kind == "ellipsoid":
            axes = np.asarray(p.get("axes", []), dtype=float)
            if axes.shape != c.shape or np.any(axes <= 0):
                raise ConfigError("ellipsoid axes must be positive, one per dimension")
            object.__setattr__(self, "params", {**p, "axes": axes})
        elif self.kind == "p-norm-ball":
            pw = p.get("p")
            if not p.get("radius", 0) > 0:
                raise ConfigError("p-norm-ball radius must be > 0")
            if not isinstance(pw, int) or pw < 2 or pw % 2:
                raise ConfigError("p-norm-ball exponent must be an even integer >= 2")
        elif self.kind == "custom-smooth":
            if self.g_func is None or self.grad_func is None:
                raise ConfigError("custom-smooth safe set needs g and grad_g callables")
            if not p.get("radius_bound", 0) > 0:
                raise ConfigError("custom-smooth safe set needs radius_bound > 0")
            if self.level(c) >= 0:
                raise ConfigError("custom-smooth center must satisfy g(center) < 0")
        else:
            raise ConfigError(f"unknown safe set kind {self.kind!r}")

    # constructors -------------------------------------------------------

    @classmethod
    def ball(cls, center, radius: float) -> SafeSet:
        return cls("ball", center, {"radius": float(radius)})

    @classmethod
    def ellipsoid(cls, center, axes) -> SafeSet:
        return cls("ellipsoid", center, {"axes": axes})

    @classmethod
    def pnorm_ball(cls, center, radius: float, p: int) -> SafeSet:
        return cls("p-norm-ball", center, {"radius": float(radius), "p": int(p)})

    @classmethod
    def custom(cls, center, g, grad_g, radius_bound: float) -> SafeSet:
        return cls("custom-smooth", center, {"radius_bound": float(radius_bound)}, g, grad_g)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def compact_by_construction(self) -> bool:
        return self.kind != "custom-smooth"

    # level function ---------------------------------------------------

    def level(self, x) -> float:
        return float(self.level_many(np.asarray(x, dtype=float)[None, :])[0])

    def level_many(self, X: np.ndarray) -> np.ndarray:
        """g evaluated row-wise on an ``(k, n)`` array."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise DimensionError(f"expected points of dimension {self.dim}, got shape {X.shape}")
        d = X - self.center
        p = self.params
        if self.kind == "ball":
            return np.einsum("ij,ij->i", d, d) - p["radius"] ** 2
        if self.kind == "ellipsoid":
            q = d / p["axes"]
            return np.einsum("ij,ij->i", q, q) - 1.0
        if self.kind == "p-norm-ball":
            return np.sum((d / p["radius"]) ** p["p"], axis=1) - 1.0
        return np.array([float(self.g_func(row)) for row in X])

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionError(f"expected point of dimension {self.dim}, got shape {x.shape}")
        d = x - self.center
        p = self.params
        if self.kind == "ball":
            return 2.0 * d
        if self.kind == "ellipsoid":
            return 2.0 * d / p["axes"] ** 2
        if self.kind == "p-norm-ball":
            r, pw = p["radius"], p["p"]
            return pw * d ** (pw - 1) / r**pw
        return np.asarray(self.grad_func(x), dtype=float)

    def unit_gradient(self, x) -> np.ndarray | None:
        """Normalized gradient of g at any point; None where it vanishes."""
        grad = self.gradient(x)
        norm = float(np.linalg.norm(grad))
        if norm <= GRADIENT_FLOOR:
            return None
        return grad / norm

    # boundary geometry ------------------------------------------------

    def radial_boundary(self, directions: np.ndarray) -> np.ndarray:
        """Project rays from the center onto the boundary, one per row."""
        D = np.asarray(directions, dtype=float)
        p = self.params
        if self.kind == "ball":
            U = D / np.linalg.norm(D, axis=1)[:, None]
            return self.center + p["radius"] * U
        elif self.kind == "ellipsoid":
            scale = 1.0 / np.sqrt(np.sum((D / p["axes"]) ** 2, axis=1))
        elif self.kind == "p-norm-ball":
            pw = p["p"]
            scale = p["radius"] / np.sum(np.abs(D) ** pw, axis=1) ** (1.0 / pw)
        else:
            scale = np.array([self._custom_ray(d) for d in D])
        return self.center + scale[:, None] * D

    def _custom_ray(self, d: np.ndarray) -> float:
        d_hat = d / np.linalg.norm(d)
        s_max = 2.0 * self.params["radius_bound"]
        s = brentq(lambda s: self.g_func(self.center + s * d_hat), 0.0, s_max, xtol=1e-15, rtol=1e-15)
        return s / np.linalg.norm(d)

    def random_directions(self, rng: np.random.Generator, count: int) -> np.ndarray:
        D = rng.standard_normal((count, self.dim))
        # zero rows have probability zero but would break the projection
        bad = np.linalg.norm(D, axis=1) == 0
        D[bad] = 1.0
        return D

    def sample_interior(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Points of S by radial scaling of boundary points.

        Uniform for balls; for other kinds the density is radially skewed,
        which only matters as a sampling design choice.
        """
        B = self.radial_boundary(self.random_directions(rng, count))
        u = rng.random(count) ** (1.0 / self.dim)
        return self.center + u[:, None] * (B - self.center)


def level(s: SafeSet, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != s.dim:
        raise DimensionError(f"state length {x.shape} does not match safe set dimension {s.dim}")
    return s.level(x)


def contains(s: SafeSet, x) -> str:
    gx = level(s, x)
    if gx < -BOUNDARY_BAND:
        return "interior"
    if gx <= BOUNDARY_BAND:
        return "boundary"
    return "exterior"


def outward_normal(s: SafeSet, x) -> np.ndarray:
    gx = level(s, x)
    if abs(gx) > NORMAL_BAND:
        raise DomainError(f"outward normal requested off the boundary (g={gx:.3e})")
    n = s.unit_gradient(np.asarray(x, dtype=float))
    if n is None:
        raise DegenerateNormalError(f"gradient of g vanishes at {np.asarray(x).tolist()}")
    return n


@dataclass(frozen=True, eq=False)
class BoundaryRegion:
    """Predicate selecting the boundary region Gamma within the boundary.

    Kinds: ``full`` (all of the boundary), ``halfspace`` (points with
    ``<normal, x> > offset``) and ``custom`` (``predicate`` callable on a
    single point).
    """

    kind: str = "full"
    params: dict = field(default_factory=dict)
    predicate: Callable | None = None
    description: str = ""

    def __post_init__(self):
        if self.kind == "halfspace":
            if "normal" not in self.params or "offset" not in self.params:
                raise ConfigError("halfspace region needs normal and offset")
            object.__setattr__(
                self, "params", {**self.params, "normal": np.asarray(self.params["normal"], dtype=float)}
            )
        elif self.kind == "custom":
            if self.predicate is None:
                raise ConfigError("custom boundary region needs a predicate")
        elif self.kind != "full":
            raise ConfigError(f"unknown boundary region kind {self.kind!r}")
        if not self.description:
            object.__setattr__(self, "description", self._describe())

    def _describe(self) -> str:
        if self.kind == "full":
            return "entire boundary"
        if self.kind == "halfspace":
            return f"boundary points with <{self.params['normal'].tolist()}, x> > {self.params['offset']}"
        return "custom predicate"

    def mask(self, points: np.ndarray) -> np.ndarray:
        P = np.asarray(points, dtype=float)
        if self.kind == "full":
            return np.ones(P.shape[0], dtype=bool)
        if self.kind == "halfspace":
            return P @ self.params["normal"] > self.params["offset"]
        return np.array([bool(self.predicate(p)) for p in P], dtype=bool)

    def __call__(self, point) -> bool:
        return bool(self.mask(np.asarray(point, dtype=float)[None, :])[0])


def sample_boundary_region(
    s: SafeSet,
    gamma: BoundaryRegion,
    count: int,
    seed: int,
    budget: int = SAMPLE_BUDGET,
) -> np.ndarray:
    """Seeded rejection sampling of ``count`` boundary points inside Gamma.

    Returns an ``(count, n)`` array. Raises :class:`EmptyRegionError` when
    ``budget`` candidate draws do not produce enough accepted points.
    """
    if count < 1:
        raise ConfigError("boundary sample count must be >= 1")
    rng = stream(seed, "gamma") if not isinstance(seed, np.random.Generator) else seed
    accepted: list[np.ndarray] = []
    have = 0
    attempts = 0
    batch = max(4 * count, 1024)
    while have < count and attempts < budget:
        k = min(batch, budget - attempts)
        attempts += k
        P = s.radial_boundary(s.random_directions(rng, k))
        keep = (np.abs(s.level_many(P)) <= BOUNDARY_BAND) & gamma.mask(P)
        if keep.any():
            accepted.append(P[keep])
            have += int(keep.sum())
    if have < count:
        raise EmptyRegionError(
            f"found {have} of {count} boundary points in region ({gamma.description}) "
            f"after {attempts} draws"
        )
    return np.concatenate(accepted)[:count]


@dataclass(frozen=True)
class DriftBound:
    """Bound ``M_f`` on the drift norm over S."""

    value: float
    method: str
    sample_count: int = 0
    safety_factor: float = 1.0
    max_sampled: float | None = None

    @classmethod
    def declared(cls, value: float) -> DriftBound:
        if not value >= 0:
            raise ConfigError("declared drift bound must be >= 0")
        return cls(float(value), "declared")

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "sample_count": self.sample_count,
            "safety_factor": self.safety_factor,
            "max_sampled": self.max_sampled,
        }


def _drift_norms(f, points: np.ndarray, time_grid: Sequence[float]) -> np.ndarray:
    norms = np.empty((len(time_grid), points.shape[0]))
    for i, t in enumerate(time_grid):
        for j, x in enumerate(points):
            v = np.asarray(f(x, t), dtype=float)
            if not np.all(np.isfinite(v)):
                raise InvalidFieldError("drift", f"non-finite drift at x={x.tolist()}, t={t}")
            norms[i, j] = np.linalg.norm(v)
    return norms


def estimate_drift_bound(
    f,
    s: SafeSet,
    time_grid: Sequence[float],
    sample_count: int,
    seed: int,
    safety_factor: float = DRIFT_SAFETY_FACTOR,
) -> DriftBound:
    """Sampled drift bound: ``safety_factor`` times the largest sampled norm.

    ``f`` is any callable ``(x, t) -> vector``. Sampling cannot prove a
    supremum; :func:`audit_drift_bound` measures how often fresh samples
    exceed the result.
    """
    if sample_count < 1:
        raise ConfigError("drift-bound sample count must be >= 1")
    if len(time_grid) == 0:
        raise ConfigError("drift-bound time grid is empty")
    points = s.sample_interior(sample_count, stream(seed, "drift-bound"))
    peak = float(_drift_norms(f, points, time_grid).max())
    return DriftBound(safety_factor * peak, "sampled", sample_count, safety_factor, peak)


class DriftAudit(NamedTuple):
    violations: int
    evaluations: int
    worst_norm: float

    @property
    def fraction(self) -> float:
        return self.violations / self.evaluations


def audit_drift_bound(f, s: SafeSet, bound: DriftBound, time_grid, count: int, seed: int) -> DriftAudit:
    """Count fresh interior samples whose drift norm exceeds ``bound``."""
    points = s.sample_interior(count, stream(seed, "drift-audit"))
    norms = _drift_norms(f, points, time_grid)
    return DriftAudit(int((norms > bound.value).sum()), norms.size, float(norms.max()))
