"""Smooth closed boundary curves stored as trigonometric polynomials.

A curve is ``x(t) = sum_n cx[n,0] cos(nt) + cx[n,1] sin(nt)`` (same for y),
``t in [0, 2pi)``.  Curves are positively oriented so the domain lies to the
left of the tangent and the outer normal is the tangent rotated by -90 deg.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import shapely
from scipy import integrate

TWO_PI = 2.0 * math.pi
BOTTOM_BULGE = 0.02


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    """Parameters of one of the supported domain families.

    ``family`` is ``"disk"`` (uses ``R``), ``"ellipse"`` (``a >= b``) or
    ``"corrugated_strip"`` (``L``, ``delta``, ``k``, ``N``).
    """

    family: str
    R: float = 1.0
    a: float = 2.0
    b: float = 1.0
    L: float = 6.0
    delta: float = 0.08
    k: int = 3
    N: int = 96
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.family == "disk":
            if not self.R > 0:
                raise GeometryError("disk radius must be positive")
        elif self.family == "ellipse":
            if not (self.a >= self.b > 0):
                raise GeometryError("ellipse needs a >= b > 0")
        elif self.family == "corrugated_strip":
            if not (self.L > 0 and self.delta > 0):
                raise GeometryError("corrugated_strip needs L > 0 and delta > 0")
            if int(self.k) != self.k or self.k < 1:
                raise GeometryError("corrugation count k must be an integer >= 1")
            if int(self.N) != self.N or self.N < 8:
                raise GeometryError("smoothing degree N must be an integer >= 8")
        else:
            raise GeometryError(f"unknown domain family {self.family!r}")

    @classmethod
    def disk(cls, R=1.0, center=(0.0, 0.0)):
        return cls("disk", R=R, center=tuple(center))

    @classmethod
    def ellipse(cls, a=2.0, b=1.0, center=(0.0, 0.0)):
        return cls("ellipse", a=a, b=b, center=tuple(center))

    @classmethod
    def corrugated_strip(cls, L=6.0, delta=0.08, k=3, N=96, center=(0.0, 0.0)):
        return cls("corrugated_strip", L=L, delta=delta, k=int(k), N=int(N), center=tuple(center))

    def label(self) -> str:
        if self.family == "disk":
            return f"disk(R={self.R:g})"
        if self.family == "ellipse":
            return f"ellipse(a={self.a:g},b={self.b:g})"
        return f"corrugated_strip(L={self.L:g},delta={self.delta:g},k={self.k},N={self.N})"


class CurveSample(NamedTuple):
    t: np.ndarray
    point: np.ndarray  # (..., 2)
    tangent: np.ndarray
    normal: np.ndarray
    kappa: np.ndarray
    speed: np.ndarray


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    cx: np.ndarray  # (degree+1, 2): cos and sin coefficients
    cy: np.ndarray
    spec: DomainSpec | None = field(default=None, compare=False)

    def __post_init__(self):
        cx = np.array(self.cx, dtype=float)
        cy = np.array(self.cy, dtype=float)
        if cx.shape != cy.shape or cx.ndim != 2 or cx.shape[1] != 2:
            raise GeometryError("coefficient arrays must both have shape (degree+1, 2)")
        cx.flags.writeable = False
        cy.flags.writeable = False
        object.__setattr__(self, "cx", cx)
        object.__setattr__(self, "cy", cy)

    @property
    def degree(self) -> int:
        return self.cx.shape[0] - 1

    def _eval(self, t, order):
        t = np.asarray(t, dtype=float)
        n = np.arange(self.degree + 1)
        nt = np.multiply.outer(t, n)
        c, s = np.cos(nt), np.sin(nt)
        # d^k/dt^k of cos(nt), sin(nt) cycles with period 4
        scale = n.astype(float) ** order
        if order % 4 == 0:
            bc, bs = c, s
        elif order % 4 == 1:
            bc, bs = -s, c
        elif order % 4 == 2:
            bc, bs = -c, -s
        else:
            bc, bs = s, -c
        x = (bc * scale) @ self.cx[:, 0] + (bs * scale) @ self.cx[:, 1]
        y = (bc * scale) @ self.cy[:, 0] + (bs * scale) @ self.cy[:, 1]
        return x, y

    def points(self, t) -> np.ndarray:
        x, y = self._eval(t, 0)
        return np.stack([x, y], axis=-1)

    def derivative(self, t, order=1) -> np.ndarray:
        x, y = self._eval(t, order)
        return np.stack([x, y], axis=-1)

    def dump(self, path) -> None:
        """Write coefficients as ``n cx_cos cx_sin cy_cos cy_sin`` rows."""
        rows = np.column_stack([np.arange(self.degree + 1), self.cx, self.cy])
        np.savetxt(path, rows, fmt=["%d"] + ["%.17g"] * 4,
                   header="harmonic cx_cos cx_sin cy_cos cy_sin")

    @classmethod
    def load(cls, path) -> "BoundaryCurve":
        rows = np.atleast_2d(np.loadtxt(path))
        order = np.argsort(rows[:, 0])
        rows = rows[order]
        return cls(rows[:, 1:3], rows[:, 3:5])


def sample(curve: BoundaryCurve, t) -> CurveSample:
    """Point, unit tangent, outer normal, curvature and speed at ``t``.

    Accepts a scalar or an array of parameters.
    """
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise GeometryError("curve parameter must be finite")
    p = curve.points(t)
    d1 = curve.derivative(t, 1)
    d2 = curve.derivative(t, 2)
    speed = np.hypot(d1[..., 0], d1[..., 1])
    if np.any(speed < 1e-12):
        raise GeometryError("degenerate parameterization: |gamma'(t)| < 1e-12")
    tangent = d1 / speed[..., None]
    normal = np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1)
    cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
    kappa = cross / speed**3
    return CurveSample(t, p, tangent, normal, kappa, speed)


def _signed_area_coeffs(cx, cy) -> float:
    # 1/2 int (x y' - y x') dt over a period, exact for trigonometric polynomials
    n = np.arange(cx.shape[0])
    return math.pi * float(np.sum(n * (cx[:, 0] * cy[:, 1] - cx[:, 1] * cy[:, 0])))


def _trig_fit(t, xy, degree, width=None):
    """Trigonometric projection of samples at uniform ``t``.

    With ``width`` the Fourier modes are damped by ``exp(-(n/width)^2)``
    (a Gaussian smoothing along the parameter) before truncation, which
    keeps curvature free of truncation ripples.
    """
    m = len(t)
    coef = np.fft.rfft(xy, axis=0) / m
    if width is not None:
        n = np.arange(coef.shape[0])
        coef = coef * np.exp(-(n / width) ** 2)[:, None]
    out = np.zeros((degree + 1, 2, 2))
    out[0, 0, :] = coef[0].real
    out[1:, 0, :] = 2.0 * coef[1:degree + 1].real
    out[1:, 1, :] = -2.0 * coef[1:degree + 1].imag
    return out[:, :, 0], out[:, :, 1]


def _corrugated_target(spec: DomainSpec, m: int):
    """Dense samples of the corrugated stadium, ccw, parameter-uniform.

    The bottom edge sags by ``BOTTOM_BULGE`` at ``x = 0``.

    The parameter runs proportionally to ``(1 + 2|kappa|) ds`` so that the
    curved caps get a larger share of the Fourier modes.
    """
    L, d, k = spec.L, spec.delta, spec.k

    def top(x):
        return 1.0 + d * np.cos(k * math.pi * x / L)

    yl, yr = top(-L), top(L)
    # pieces: bottom (left->right), right cap, top (right->left), left cap
    nb = 4000
    xb = np.linspace(-L, L, nb)
    # slight outward bulge keeps the bottom edge strictly convex
    bottom = np.column_stack([xb, -BOTTOM_BULGE * (1.0 - (xb / L) ** 2)])
    th = np.linspace(-math.pi / 2, math.pi / 2, nb)
    right = np.column_stack([L + 0.5 * yr * np.cos(th), 0.5 * yr + 0.5 * yr * np.sin(th)])
    topx = xb[::-1]
    topp = np.column_stack([topx, top(topx)])
    th2 = np.linspace(math.pi / 2, 1.5 * math.pi, nb)
    left = np.column_stack([-L + 0.5 * yl * np.cos(th2), 0.5 * yl + 0.5 * yl * np.sin(th2)])
    pts = np.vstack([bottom[:-1], right[:-1], topp[:-1], left[:-1]])

    seg = np.diff(np.vstack([pts, pts[:1]]), axis=0)
    ds = np.hypot(seg[:, 0], seg[:, 1])
    # discrete turning angle per vertex as a curvature proxy
    ang = np.arctan2(seg[:, 1], seg[:, 0])
    turn = np.abs(np.angle(np.exp(1j * (ang - np.roll(ang, 1)))))
    w = ds + 2.0 * turn
    s = np.concatenate([[0.0], np.cumsum(w)])
    closed = np.vstack([pts, pts[:1]])
    target = np.linspace(0.0, s[-1], m, endpoint=False)
    x = np.interp(target, s, closed[:, 0])
    y = np.interp(target, s, closed[:, 1])
    return np.column_stack([x, y])


def make_domain(spec: DomainSpec) -> BoundaryCurve:
    """Build the boundary curve for ``spec``.

    Disks and ellipses use their exact parameterization.  The corrugated
    strip is a degree-``N`` trigonometric projection of a stadium over
    ``[-L, L] x [0, 1]`` whose top edge is ``y = 1 + delta cos(k pi x / L)``.
    """
    cx0, cy0 = spec.center
    if spec.family in ("disk", "ellipse"):
        a, b = (spec.R, spec.R) if spec.family == "disk" else (spec.a, spec.b)
        cx = np.array([[cx0, 0.0], [a, 0.0]])
        cy = np.array([[cy0, 0.0], [0.0, b]])
        return BoundaryCurve(cx, cy, spec)

    m = 8192
    pts = _corrugated_target(spec, m)
    t = np.linspace(0.0, TWO_PI, m, endpoint=False)
    cx, cy = _trig_fit(t, pts, spec.N, width=spec.N / 4.0)
    cx[0, 0] += cx0
    cy[0, 0] += cy0
    curve = BoundaryCurve(cx, cy, spec)

    ts = np.linspace(0.0, TWO_PI, max(4096, 64 * spec.N), endpoint=False)
    if not is_simple(curve, ts):
        raise GeometryError("projected curve self-intersects; raise N or lower delta")
    smp = sample(curve, ts)
    if np.min(smp.kappa) >= 0:
        raise GeometryError("corrugated curve is convex; raise delta")
    c = np.array([cx0, cy0 + 0.5])
    support = np.einsum("ij,ij->i", smp.point - c, smp.normal)
    if np.min(support) <= 0:
        raise GeometryError("corrugated curve is not star-shaped about (0, 1/2); lower delta")
    return curve


def is_simple(curve: BoundaryCurve, ts=None) -> bool:
    if ts is None:
        ts = np.linspace(0.0, TWO_PI, max(2048, 64 * curve.degree), endpoint=False)
    ring = shapely.LinearRing(curve.points(ts))
    return bool(ring.is_simple) and _signed_area_coeffs(curve.cx, curve.cy) > 0


def convexity_report(curve: BoundaryCurve, nsamples: int = 2048):
    """Return ``(min kappa, t at the minimum, number of sign changes)``."""
    if nsamples < 256:
        raise ValueError("nsamples must be >= 256")
    ts = np.linspace(0.0, TWO_PI, nsamples, endpoint=False)
    kappa = sample(curve, ts).kappa
    i = int(np.argmin(kappa))
    sgn = np.sign(kappa)
    sgn = sgn[sgn != 0]
    changes = int(np.count_nonzero(sgn != np.roll(sgn, 1))) if sgn.size else 0
    return float(kappa[i]), float(ts[i]), changes


def geometric_measures(curve: BoundaryCurve):
    """Area and perimeter of the enclosed domain."""
    def area_density(t):
        p = curve.points(t)
        d = curve.derivative(t)
        return 0.5 * (p[0] * d[1] - p[1] * d[0])

    def speed(t):
        d = curve.derivative(t)
        return math.hypot(d[0], d[1])

    limit = 50 + 10 * curve.degree
    area = integrate.quad(area_density, 0.0, TWO_PI, epsrel=1e-12, epsabs=0.0, limit=limit)[0]
    perim = integrate.quad(speed, 0.0, TWO_PI, epsrel=1e-12, epsabs=0.0, limit=limit)[0]
    return area, perim


def total_turning(curve: BoundaryCurve) -> float:
    """Integral of kappa ds around the loop (2 pi for a simple ccw curve)."""
    def integrand(t):
        s = sample(curve, t)
        return float(s.kappa * s.speed)

    return integrate.quad(integrand, 0.0, TWO_PI, epsrel=1e-13, epsabs=1e-13,
                          limit=50 + 10 * curve.degree)[0]
