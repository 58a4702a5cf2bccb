"""The three velocity channels: drift f, external control B u, endogenous G h."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, DomainError, InvalidFieldError

RANGE_TOL = 1e-10
H2_TOL = 1e-12
#: local slope above which the continuity probe flags a sample
H1_FLAG_SLOPE = 1e3

H_KINDS = (
    "radial-outward",
    "linear-gain",
    "saturating-gain",
    "target-seeking",
    "internal-drift",
    "custom",
)


def _matrix(a, name: str) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2 or 0 in m.shape:
        raise DimensionError(f"{name} must be a non-empty matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ConfigError(f"{name} has non-finite entries")
    return m


@dataclass(frozen=True, eq=False)
class Drift:
    """Autonomous drift f(x, t): ``zero``, ``linear`` (f = A x) or ``custom``."""

    kind: str
    n: int
    A: np.ndarray | None = None
    func: Callable | None = None

    def __post_init__(self):
        if self.kind == "linear":
            A = _matrix(self.A, "drift matrix A")
            if A.shape != (self.n, self.n):
                raise DimensionError(f"drift matrix must be {self.n}x{self.n}, got {A.shape}")
            object.__setattr__(self, "A", A)
        elif self.kind == "custom":
            if self.func is None:
                raise ConfigError("custom drift needs a callable")
        elif self.kind != "zero":
            raise ConfigError(f"unknown drift kind {self.kind!r}")

    @classmethod
    def zero(cls, n: int) -> Drift:
        return cls("zero", n)

    @classmethod
    def linear(cls, A) -> Drift:
        A = _matrix(A, "drift matrix A")
        return cls("linear", A.shape[0], A)

    @classmethod
    def custom(cls, n: int, func: Callable) -> Drift:
        return cls("custom", n, func=func)

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(self.n)
        if self.kind == "linear":
            return self.A @ x
        return np.asarray(self.func(x, t), dtype=float)


@dataclass(frozen=True, eq=False)
class ControlChannel:
    """External-control matrix B with a precomputed orthonormal range basis."""

    B: np.ndarray
    basis: np.ndarray = field(init=False)
    pinv: np.ndarray = field(init=False)

    def __post_init__(self):
        B = _matrix(self.B, "control matrix B")
        object.__setattr__(self, "B", B)
        U, sv, _ = np.linalg.svd(B, full_matrices=False)
        rank = int(np.sum(sv > RANGE_TOL * max(1.0, sv.max(initial=0.0))))
        object.__setattr__(self, "basis", U[:, :rank])
        object.__setattr__(self, "pinv", np.linalg.pinv(B))

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def project(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection of ``v`` onto range(B)."""
        Q = self.basis
        return Q @ (Q.T @ v)

    def reconstruction_residual(self) -> float:
        return float(np.abs(self.basis @ (self.basis.T @ self.B) - self.B).max())


@dataclass(frozen=True, eq=False)
class EndogenousChannel:
    """Endogenous channel G h(x, kappa).

    Built-in h families (``params`` in parentheses):

    - ``radial-outward`` (``center``): kappa (x - center)
    - ``linear-gain`` (``gain`` matrix K, default identity): kappa K x
    - ``saturating-gain`` (``scale``): scale tanh(kappa) x
    - ``target-seeking`` (``target``): kappa (target - x)
    - ``internal-drift`` (``rate``, ``n_env``): constant ``rate`` on the
      internal block, zero on the environment block

    All built-ins are jointly continuous and have non-decreasing norm in
    kappa. ``custom`` takes an arbitrary ``h_func(x, kappa)`` and carries
    no such guarantee.
    """

    G: np.ndarray
    h_kind: str
    params: dict = field(default_factory=dict)
    h_func: Callable | None = None

    def __post_init__(self):
        G = _matrix(self.G, "endogenous matrix G")
        object.__setattr__(self, "G", G)
        n, k = G.shape
        p = dict(self.params)
        kind = self.h_kind
        if kind not in H_KINDS:
            raise ConfigError(f"unknown endogenous h kind {kind!r}")
        if kind in ("radial-outward", "target-seeking", "saturating-gain", "internal-drift") and k != n:
            raise DimensionError(f"h kind {kind!r} needs square G ({n}x{n}), got {G.shape}")
        if kind == "radial-outward":
            p["center"] = np.asarray(p.get("center", np.zeros(n)), dtype=float)
            if p["center"].shape != (n,):
                raise DimensionError("radial-outward center has wrong length")
        elif kind == "linear-gain":
            K = _matrix(p["gain"], "gain matrix") if "gain" in p else np.eye(k, n)
            if K.shape != (k, n):
                raise DimensionError(f"gain matrix must be {k}x{n}, got {K.shape}")
            p["gain"] = K
        elif kind == "saturating-gain":
            p["scale"] = float(p.get("scale", 1.0))
            if p["scale"] < 0:
                raise ConfigError("saturating-gain scale must be >= 0")
        elif kind == "target-seeking":
            if "target" not in p:
                raise ConfigError("target-seeking h needs a target point")
            p["target"] = np.asarray(p["target"], dtype=float)
            if p["target"].shape != (n,):
                raise DimensionError("target-seeking target has wrong length")
        elif kind == "internal-drift":
            n_env = int(p.get("n_env", 0))
            rate = np.atleast_1d(np.asarray(p.get("rate", []), dtype=float))
            if rate.shape != (n - n_env,):
                raise DimensionError(f"internal-drift rate needs {n - n_env} entries, got {rate.shape[0]}")
            vec = np.zeros(n)
            vec[n_env:] = rate
            p.update(n_env=n_env, rate=rate, _vector=vec)
        elif self.h_func is None:
            raise ConfigError("custom h needs a callable h_func")
        object.__setattr__(self, "params", p)

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @property
    def k(self) -> int:
        return self.G.shape[1]

    @property
    def admissible_by_construction(self) -> bool:
        return self.h_kind != "custom"

    def h(self, x: np.ndarray, kappa: float) -> np.ndarray:
        p = self.params
        kind = self.h_kind
        if kind == "radial-outward":
            return kappa * (x - p["center"])
        if kind == "linear-gain":
            return kappa * (p["gain"] @ x)
        if kind == "saturating-gain":
            return p["scale"] * np.tanh(kappa) * x
        if kind == "target-seeking":
            return kappa * (p["target"] - x)
        if kind == "internal-drift":
            return p["_vector"].copy()
        return np.atleast_1d(np.asarray(self.h_func(x, kappa), dtype=float))

    def effect(self, x: np.ndarray, kappa: float) -> np.ndarray:
        return self.G @ self.h(x, kappa)


def endogenous_effect(c: EndogenousChannel, x, kappa: float) -> np.ndarray:
    if kappa < 0:
        raise DomainError(f"capability must be >= 0, got {kappa}")
    x = np.asarray(x, dtype=float)
    if x.shape != (c.n,):
        raise DimensionError(f"state has shape {x.shape}, channel expects ({c.n},)")
    return c.effect(x, kappa)


def total_velocity(f: Drift, B: ControlChannel, c: EndogenousChannel, x, t: float, u, kappa: float) -> np.ndarray:
    """Right-hand side f(x, t) + B u + G h(x, kappa)."""
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if not (x.shape == (f.n,) == (B.n,) == (c.n,)):
        raise DimensionError("state and channel dimensions disagree")
    if u.shape != (B.m,):
        raise DimensionError(f"control has shape {u.shape}, B expects ({B.m},)")
    if not np.all(np.isfinite(u)):
        raise InvalidFieldError("control")
    terms = (("drift", f(x, t)), ("control", B.B @ u), ("endogenous", endogenous_effect(c, x, kappa)))
    for name, v in terms:
        if not np.all(np.isfinite(v)):
            raise InvalidFieldError(name)
    return terms[0][1] + terms[1][1] + terms[2][1]


class H2Check(NamedTuple):
    ok: bool
    violation: tuple | None = None  # (x, kappa_i, kappa_next, norm_i, norm_next)


def check_h2_monotone(c: EndogenousChannel, x_samples, kappa_grid: Sequence[float]) -> H2Check:
    """Check that ||h(x, kappa)|| does not decrease along ``kappa_grid``."""
    grid = [float(k) for k in kappa_grid]
    if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("H2 kappa grid must be strictly increasing with >= 2 points")
    X = np.atleast_2d(np.asarray(x_samples, dtype=float))
    if X.shape[0] == 0:
        raise ConfigError("H2 check needs at least one state sample")
    for x in X:
        norms = [float(np.linalg.norm(c.h(x, k))) for k in grid]
        for i in range(len(grid) - 1):
            if norms[i + 1] < norms[i] - H2_TOL:
                return H2Check(False, (x.tolist(), grid[i], grid[i + 1], norms[i], norms[i + 1]))
    return H2Check(True)


class H1Probe(NamedTuple):
    max_variation: float
    delta: float
    location: tuple | None  # (x, kappa, direction index) of the largest jump
    flagged: bool


def probe_h1_continuity(c: EndogenousChannel, x_samples, kappa_samples, delta: float) -> H1Probe:
    """Largest change of h under a ``delta`` step along each (x, kappa) axis.

    A falsification probe only: a variation far above ``H1_FLAG_SLOPE *
    delta`` marks a likely discontinuity; a small value proves nothing.
    """
    if not delta > 0:
        raise ConfigError("probe radius must be > 0")
    X = np.atleast_2d(np.asarray(x_samples, dtype=float))
    worst, where = 0.0, None
    for x in X:
        for kappa in kappa_samples:
            kappa = float(kappa)
            base = c.h(x, kappa)
            for i in range(X.shape[1] + 1):
                if i < X.shape[1]:
                    xs = x.copy()
                    xs[i] += delta
                    moved = c.h(xs, kappa)
                else:
                    moved = c.h(x, kappa + delta)
                var = float(np.linalg.norm(moved - base))
                if var > worst:
                    worst, where = var, (x.tolist(), kappa, i)
    return H1Probe(worst, delta, where, worst > H1_FLAG_SLOPE * delta)
