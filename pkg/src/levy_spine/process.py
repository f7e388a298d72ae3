"""Process specifications and their Rogers functions.

A Rogers function here is the holomorphic extension of the characteristic
exponent ``f`` of a Lévy process, ``E exp(i xi X_t) = exp(-t f(xi))``, to the
right half-plane.  Three families are supported:

* hyperexponential mixtures (Gaussian part, drift, killing and finitely many
  exponential jump components), for which ``f`` is rational;
* strictly stable exponents ``k (exp(-i theta) xi)^alpha``, optionally with
  a linear drift term;
* user-supplied callables.

Drift convention
----------------
``ProcessSpec.drift`` is the coefficient ``b`` in

    f(xi) = a xi^2 - i b xi + c + (jump terms with compensators i xi/(1+rho)),

i.e. the jump compensators are folded into ``b``.  The velocity of the
sample path between jumps (what a simulator needs) is
``path_drift = b - sum_+ w/(rho (1+rho)) + sum_- w/(rho (1+rho))``.
:meth:`ProcessSpec.from_path_drift` builds a spec from the path velocity.

Boundary argument
-----------------
``boundary_arg(f, s)`` returns the angle ``phi(s)`` in ``[0, pi]`` of the
exponential representation: ``phi(s) = -lim Arg f(eps - i s)`` for ``s > 0``
and ``phi(s) = lim Arg f(eps + i|s|)`` for ``s < 0``.  A negative real limit
is reported as ``pi``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "ProcessSpecError",
    "DomainViolation",
    "NoConvergence",
    "ExpComponent",
    "Stable",
    "StableDrift",
    "CustomComplexFn",
    "ProcessSpec",
    "RogersFn",
    "MixtureRogers",
    "StableRogers",
    "CustomRogers",
    "RogersReport",
    "build_rogers",
    "eval_f",
    "boundary_arg",
    "phi_from_boundary",
    "check_rogers",
    "dual_spec",
    "sample_half_plane",
]


class ProcessSpecError(ValueError):
    """The specification violates an invariant (invalid-spec)."""


class DomainViolation(ValueError):
    pass


class NoConvergence(RuntimeError):
    pass


@dataclass(frozen=True)
class ExpComponent:
    """One exponential jump component: density ``w * exp(-rho * x)`` on one side."""

    side: Literal["positive", "negative"]
    w: float
    rho: float

    def __post_init__(self) -> None:
        if self.side not in ("positive", "negative"):
            raise ProcessSpecError(f"side must be 'positive' or 'negative', got {self.side!r}")
        if not (self.w > 0 and math.isfinite(self.w)):
            raise ProcessSpecError(f"jump weight must be positive, got {self.w}")
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise ProcessSpecError(f"jump rate must be positive, got {self.rho}")

    @property
    def intensity(self) -> float:
        """Total jump intensity ``w / rho`` of this component."""
        return self.w / self.rho


@dataclass(frozen=True)
class Stable:
    alpha: float
    k: float = 1.0
    theta: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 2:
            raise ProcessSpecError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not self.k > 0:
            raise ProcessSpecError(f"k must be positive, got {self.k}")
        bound = min(math.pi / 2, (2 - self.alpha) / self.alpha * math.pi / 2)
        if abs(self.theta) > bound + 1e-15:
            raise ProcessSpecError(f"|theta| = {abs(self.theta)} exceeds the admissible bound {bound}")


@dataclass(frozen=True)
class StableDrift(Stable):
    b: float = 0.0


@dataclass(frozen=True)
class CustomComplexFn:
    """An arbitrary Rogers function supplied as a vectorised callable."""

    fn: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    derivative: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class ProcessSpec:
    gaussian: float = 0.0
    drift: float = 0.0
    killing: float = 0.0
    jumps: tuple[ExpComponent, ...] = ()
    closed_form: Stable | CustomComplexFn | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "jumps", tuple(self.jumps))
        if self.closed_form is not None:
            if self.jumps or self.gaussian or self.drift or self.killing:
                raise ProcessSpecError("closed-form specs carry no mixture coefficients")
            return
        problems = []
        if not (self.gaussian >= 0 and math.isfinite(self.gaussian)):
            problems.append(f"gaussian must be >= 0, got {self.gaussian}")
        if not math.isfinite(self.drift):
            problems.append("drift must be finite")
        if not (self.killing >= 0 and math.isfinite(self.killing)):
            problems.append(f"killing must be >= 0, got {self.killing}")
        if self.gaussian == 0 and not self.jumps:
            problems.append("mixture spec is deterministic: need gaussian > 0 or at least one jump component")
        if problems:
            raise ProcessSpecError("; ".join(problems))

    @property
    def is_mixture(self) -> bool:
        return self.closed_form is None

    @property
    def path_drift(self) -> float:
        """Velocity of the path between jumps (Lévy--Khintchine drift)."""
        shift = sum(
            (1 if j.side == "positive" else -1) * j.w / (j.rho * (1 + j.rho)) for j in self.jumps
        )
        return self.drift - shift

    @classmethod
    def from_path_drift(
        cls, gaussian: float, path_drift: float, jumps: Sequence[ExpComponent] = (), killing: float = 0.0
    ) -> "ProcessSpec":
        shift = sum((1 if j.side == "positive" else -1) * j.w / (j.rho * (1 + j.rho)) for j in jumps)
        return cls(gaussian=gaussian, drift=path_drift + shift, killing=killing, jumps=tuple(jumps))


def dual_spec(spec: ProcessSpec) -> ProcessSpec:
    """Specification of ``-X``; its exponent is ``conj f(conj xi)``."""
    if spec.closed_form is None:
        flipped = tuple(
            ExpComponent("negative" if j.side == "positive" else "positive", j.w, j.rho) for j in spec.jumps
        )
        return ProcessSpec(spec.gaussian, -spec.drift, spec.killing, flipped)
    cf = spec.closed_form
    if isinstance(cf, StableDrift):
        return ProcessSpec(closed_form=StableDrift(cf.alpha, cf.k, -cf.theta, -cf.b))
    if isinstance(cf, Stable):
        return ProcessSpec(closed_form=Stable(cf.alpha, cf.k, -cf.theta))
    g = cf.fn
    return ProcessSpec(closed_form=CustomComplexFn(lambda xi: np.conj(g(np.conj(xi))), f"dual({cf.name})"))


def _phi_from_value(value: np.ndarray, positive_side: np.ndarray) -> np.ndarray:
    ang = np.angle(np.where(positive_side, np.conj(value), value))
    # A value on the negative real axis may come out as -pi through a signed zero.
    ang = np.where(ang < -np.pi / 2, ang + 2 * np.pi, ang)
    return np.clip(ang, 0.0, np.pi) + 0.0


def phi_from_boundary(value, s) -> np.ndarray:
    """Convert boundary values ``f(0+ - i s)`` into the angle ``phi(s)``."""
    value = np.asarray(value, dtype=complex)
    return _phi_from_value(value, np.asarray(s) > 0)


class RogersFn:
    """Base class.  Subclasses implement ``__call__`` (vectorised)."""

    descriptor: str = "rogers"
    #: True when boundary values on the imaginary axis are real, so that the
    #: boundary angle only takes the values 0 and pi.
    stepwise: bool = False
    killing: float = 0.0

    def __call__(self, xi):  # pragma: no cover - abstract
        raise NotImplementedError

    def derivative(self, xi):
        xi = np.asarray(xi, dtype=complex)
        h = 1e-6 * np.maximum(1.0, np.abs(xi))
        return (self(xi + h) - self(xi - h) - 1j * (self(xi + 1j * h) - self(xi - 1j * h))) / (4 * h)

    def boundary(self, s):
        """Limit of ``f(eps - i s)`` as ``eps -> 0+`` (vectorised over real ``s``)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty(s.shape, dtype=complex)
        for idx, sv in np.ndenumerate(s):
            out[idx] = _eps_limit(self, float(sv))
        return out

    def breakpoints(self) -> np.ndarray:
        """Signed values of ``s`` where the boundary angle may jump."""
        return np.empty(0)

    def reference_point(self) -> complex:
        return 1.0 + 0j

    def scale(self) -> float:
        return 1.0

    def tail_radius(self) -> float:
        """Radius beyond which the leading large-``|xi|`` behaviour has set in."""
        return 1.0

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.descriptor}>"


def _eps_limit(f: RogersFn, s: float, tol: float = 1e-9, max_halvings: int = 60) -> complex:
    eps0 = max(1.0, abs(s))
    prev_val = complex(f(np.array([eps0 - 1j * s]))[0])
    for j in range(1, max_halvings):
        val = complex(f(np.array([eps0 * 2.0**-j - 1j * s]))[0])
        if abs(cmath.phase(val) - cmath.phase(prev_val)) < tol and abs(val - prev_val) <= 1e-9 * max(1.0, abs(val)):
            return val
        prev_val = val
    raise NoConvergence(f"boundary value at s={s} did not settle")


class MixtureRogers(RogersFn):
    """Exact rational exponent of a hyperexponential mixture."""

    stepwise = True

    def __init__(self, spec: ProcessSpec):
        self.spec = spec
        self.a = float(spec.gaussian)
        self.b = float(spec.drift)
        self.killing = float(spec.killing)
        self.c = self.killing
        self.pos = [(j.w, j.rho) for j in spec.jumps if j.side == "positive"]
        self.neg = [(j.w, j.rho) for j in spec.jumps if j.side == "negative"]
        self.descriptor = (
            f"mixture(a={self.a:g}, b={self.b:g}, c={self.c:g}, "
            f"+{[(w, r) for w, r in self.pos]}, -{[(w, r) for w, r in self.neg]})"
        )
        self._num, self._den = self._boundary_polynomials()

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=complex)
        out = self.a * xi**2 - 1j * self.b * xi + self.c
        for w, rho in self.pos:
            out = out + (w / rho) * (xi / (xi + 1j * rho) + 1j * xi / (1 + rho))
        for w, rho in self.neg:
            out = out + (w / rho) * (xi / (xi - 1j * rho) - 1j * xi / (1 + rho))
        return out

    def derivative(self, xi):
        xi = np.asarray(xi, dtype=complex)
        out = 2 * self.a * xi - 1j * self.b + 0j
        for w, rho in self.pos:
            out = out + (w / rho) * (1j * rho / (xi + 1j * rho) ** 2 + 1j / (1 + rho))
        for w, rho in self.neg:
            out = out + (w / rho) * (-1j * rho / (xi - 1j * rho) ** 2 - 1j / (1 + rho))
        return out

    def _boundary_polynomials(self):
        """Real polynomials ``(N, D)`` in ``s`` with ``f(-i s) = N(s) / D(s)``."""
        d = self.spec.path_drift
        poles = [(rho, -1.0) for _, rho in self.pos] + [(-rho, 1.0) for _, rho in self.neg]
        den = np.array([1.0])
        for p, _ in poles:
            den = P.polymul(den, [-p, 1.0])
        num = P.polymul([self.c, -d, -self.a], den)
        terms = [(w / rho, rho) for w, rho in self.pos] + [(w / rho, -rho) for w, rho in self.neg]
        for k, (coef, p) in enumerate(terms):
            others = np.array([1.0])
            for j, (q, _) in enumerate(poles):
                if j != k:
                    others = P.polymul(others, [-q, 1.0])
            num = P.polyadd(num, coef * P.polymul([0.0, 1.0], others))
        return np.asarray(num, float), np.asarray(den, float)

    @property
    def boundary_polynomials(self) -> tuple[np.ndarray, np.ndarray]:
        return self._num, self._den

    def boundary(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (P.polyval(s, self._num) / P.polyval(s, self._den)).astype(complex)

    def breakpoints(self) -> np.ndarray:
        pts = [rho for _, rho in self.pos] + [-rho for _, rho in self.neg]
        pts += list(_real_roots(self._num))
        return np.unique(np.array([p for p in pts if p != 0.0], dtype=float))

    def scale(self) -> float:
        rates = [rho for _, rho in self.pos + self.neg]
        return float(np.median(rates)) if rates else 1.0

    def tail_radius(self) -> float:
        # With a > 0 the spine angle behaves like path_drift / (2 a r), and the
        # bounded jump part matters until a r^2 exceeds the total intensity.
        rates = [rho for _, rho in self.pos + self.neg]
        r = max([1.0] + rates)
        if self.a > 0:
            intensity = sum(w / rho for w, rho in self.pos + self.neg) + self.c
            r = max(r, abs(self.spec.path_drift) / self.a, math.sqrt(intensity / self.a))
        return float(r)


def _real_roots(coeffs: np.ndarray, rel_imag: float = 1e-9) -> np.ndarray:
    """Real roots of a polynomial given in increasing-degree order."""
    coeffs = np.trim_zeros(np.asarray(coeffs, float), "b")
    if coeffs.size <= 1:
        return np.empty(0)
    roots = P.polyroots(coeffs)
    real = roots[np.abs(roots.imag) <= rel_imag * np.maximum(1.0, np.abs(roots))].real
    # Polish with a few Newton steps; roots from the companion matrix can be
    # off by a relative 1e-12 or so, which matters when they become breakpoints.
    deriv = P.polyder(coeffs)
    for _ in range(3):
        dv = P.polyval(real, deriv)
        step = np.where(dv != 0, P.polyval(real, coeffs) / np.where(dv != 0, dv, 1.0), 0.0)
        real = real - step
    return np.sort(real)


class StableRogers(RogersFn):
    """``k (exp(-i theta) xi)^alpha``, plus ``-i b xi`` for the drift variant."""

    def __init__(self, law: Stable):
        self.law = law
        self.alpha, self.k, self.theta = float(law.alpha), float(law.k), float(law.theta)
        self.b = float(getattr(law, "b", 0.0))
        self.descriptor = f"stable(alpha={self.alpha:g}, k={self.k:g}, theta={self.theta:g}" + (
            f", b={self.b:g})" if self.b else ")"
        )

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=complex)
        return self.k * (np.exp(-1j * self.theta) * xi) ** self.alpha - 1j * self.b * xi

    def derivative(self, xi):
        xi = np.asarray(xi, dtype=complex)
        return self.alpha * self.k * np.exp(-1j * self.theta * self.alpha) * xi ** (self.alpha - 1) - 1j * self.b

    def boundary(self, s):
        s = np.asarray(s, dtype=float)
        ang = np.where(s > 0, -(self.theta + np.pi / 2), np.pi / 2 - self.theta)
        return self.k * np.abs(s) ** self.alpha * np.exp(1j * self.alpha * ang) - self.b * s + 0j


class CustomRogers(RogersFn):
    def __init__(self, custom: CustomComplexFn):
        self.custom = custom
        self.descriptor = custom.name

    def __call__(self, xi):
        return np.asarray(self.custom.fn(np.asarray(xi, dtype=complex)), dtype=complex)

    def derivative(self, xi):
        if self.custom.derivative is not None:
            return np.asarray(self.custom.derivative(np.asarray(xi, dtype=complex)), dtype=complex)
        return super().derivative(xi)


def build_rogers(spec: ProcessSpec) -> RogersFn:
    if spec.closed_form is None:
        return MixtureRogers(spec)
    if isinstance(spec.closed_form, Stable):
        return StableRogers(spec.closed_form)
    if isinstance(spec.closed_form, CustomComplexFn):
        return CustomRogers(spec.closed_form)
    raise ProcessSpecError(f"unsupported closed form {spec.closed_form!r}")


def eval_f(f: RogersFn, xi: complex) -> complex:
    xi = complex(xi)
    if not xi.real > 0:
        raise DomainViolation(f"Re xi must be positive, got {xi}")
    return complex(np.asarray(f(np.array([xi])))[0])


def boundary_arg(f: RogersFn, s: float) -> float:
    """Boundary angle ``phi(s)`` in ``[0, pi]`` of the exponential representation."""
    if s == 0:
        raise ValueError("boundary_arg is undefined at s = 0")
    value = complex(np.atleast_1d(f.boundary(np.array([float(s)])))[0])
    if not cmath.isfinite(value):
        # At a pole of a mixture the angle is undefined; take the midpoint of
        # the one-sided limits.
        h = 1e-9 * max(1.0, abs(s))
        left = boundary_arg(f, s - h)
        right = boundary_arg(f, s + h)
        return 0.5 * (left + right)
    if value == 0:
        raise NoConvergence(f"f vanishes on the boundary at s={s}")
    return float(_phi_from_value(np.array([value]), np.array([s > 0]))[0])


@dataclass
class RogersReport:
    min_re_ratio: float
    worst_point: complex
    violations: list[complex] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def sample_half_plane(n: int, seed: int = 0, r_min: float = 1e-3, r_max: float = 1e3) -> np.ndarray:
    """Log-uniform moduli and uniform angles in the open right half-plane."""
    rng = np.random.default_rng(seed)
    mod = np.exp(rng.uniform(np.log(r_min), np.log(r_max), n))
    ang = rng.uniform(-np.pi / 2 + 1e-6, np.pi / 2 - 1e-6, n)
    return mod * np.exp(1j * ang)


def check_rogers(f: RogersFn, grid) -> RogersReport:
    grid = np.asarray(grid, dtype=complex).ravel()
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    with np.errstate(all="ignore"):
        ratio = np.real(f(grid) / grid)
    ratio = np.where(np.isfinite(ratio), ratio, -np.inf)
    i = int(np.argmin(ratio))
    bad = grid[ratio < -1e-12]
    return RogersReport(float(ratio[i]), complex(grid[i]), list(bad))
