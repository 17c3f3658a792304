"""Logarithmic potential theory for radial external fields and planar droplets.

Covers the confining potential, equilibrium measures on centered disks,
capacity and harmonic measure of disk / exterior-Laurent-map droplets,
bounded harmonic extensions with their analytic/anti-analytic split, Neumann
jumps across the boundary, mollified logarithms, and boundary H^{1/2} norms.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numba
import numpy as np
from scipy.integrate import quad

__all__ = [
    "PotentialSpec",
    "Droplet",
    "EquilibriumMeasure",
    "TestFn",
    "MollifierParams",
    "HarmonicExtension",
    "HittingSample",
    "NoRootError",
    "NonTerminationError",
    "equilibrium_droplet",
    "eq_log_potential",
    "capacity",
    "capacity_energy_estimate",
    "harmonic_measure_density",
    "harmonic_measure_arclength_density",
    "brownian_hitting_estimate",
    "boundary_fourier",
    "harmonic_extension",
    "neumann_jump",
    "mollified_log",
    "mollifier_log_shift",
    "h_half_norm",
]


class NoRootError(RuntimeError):
    """The droplet normalization equation has no solution."""


class NonTerminationError(RuntimeError):
    """A random walker exhausted its step budget before hitting the droplet."""


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class PotentialSpec:
    """External confining potential V.

    kind "ginibre" is v(r) = r^2; "radial_even" is v(r) = sum_k a_k r^{2k}
    with coefficients (a_1, ..., a_K), leading a_K > 0; "custom" carries user
    evaluators for V, its Wirtinger derivative and its Laplacian.
    """

    kind: str
    coefficients: tuple = (1.0,)
    custom_value: object = None
    custom_grad: object = None
    custom_laplacian: object = None

    def __post_init__(self):
        if self.kind not in ("ginibre", "radial_even", "custom"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind in ("ginibre", "radial_even"):
            coeffs = tuple(float(a) for a in self.coefficients)
            if not coeffs or coeffs[-1] <= 0.0:
                # growth: leading coefficient sign decides v(r) >> 2 log r
                raise ValueError("radial potential needs a positive leading coefficient")
            object.__setattr__(self, "coefficients", coeffs)
        elif self.custom_value is None or self.custom_grad is None or self.custom_laplacian is None:
            raise ValueError("custom potential needs value, grad and laplacian callables")

    @classmethod
    def ginibre(cls) -> "PotentialSpec":
        return cls(kind="ginibre", coefficients=(1.0,))

    @classmethod
    def radial_even(cls, coefficients) -> "PotentialSpec":
        return cls(kind="radial_even", coefficients=tuple(coefficients))

    @classmethod
    def custom(cls, value, grad, laplacian) -> "PotentialSpec":
        return cls(kind="custom", custom_value=value, custom_grad=grad,
                   custom_laplacian=laplacian)

    @property
    def is_radial(self) -> bool:
        return self.kind in ("ginibre", "radial_even")

    # radial profile v(r) and friends; u denotes r^2
    def radial_value(self, r):
        u = np.asarray(r, dtype=float) ** 2
        out = np.zeros_like(u)
        for k in range(len(self.coefficients), 0, -1):
            out = out * u + self.coefficients[k - 1]
        return out * u

    def _dv_du(self, u):
        out = np.zeros_like(u)
        for k in range(len(self.coefficients), 0, -1):
            out = out * u + k * self.coefficients[k - 1]
        return out

    def radial_laplacian(self, r):
        """Laplacian of v(|z|) at |z| = r: 4 sum_k a_k k^2 r^{2k-2}."""
        u = np.asarray(r, dtype=float) ** 2
        out = np.zeros_like(u)
        for k in range(len(self.coefficients), 0, -1):
            out = out * u + k * k * self.coefficients[k - 1]
        return 4.0 * out

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "custom":
            return self.custom_value(z)
        return self.radial_value(np.abs(z))

    def wirtinger_grad(self, z):
        """dV/dz (complex Wirtinger derivative); for radial V this is
        conj(z) * dv/du evaluated at u = |z|^2."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "custom":
            return self.custom_grad(z)
        return np.conj(z) * self._dv_du(np.abs(z) ** 2)

    def laplacian(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "custom":
            return self.custom_laplacian(z)
        return self.radial_laplacian(np.abs(z))

    def log_density(self, r):
        """L = log(Delta V / 4) on the droplet, as a function of |z|."""
        lap = self.radial_laplacian(r)
        with np.errstate(divide="ignore"):
            return np.log(lap / 4.0)

    def to_json_dict(self) -> dict:
        if not self.is_radial:
            raise ValueError("custom potentials are not serializable")
        return {"kind": self.kind, "coefficients": list(self.coefficients)}

    @classmethod
    def from_json_dict(cls, d: dict) -> "PotentialSpec":
        return cls(kind=d["kind"], coefficients=tuple(d.get("coefficients", (1.0,))))


# ---------------------------------------------------------------------------
# droplets


@dataclass(frozen=True)
class Droplet:
    """Support of the equilibrium measure.

    Either a centered disk of given radius, or the image of {|w| > 1}^c under
    an exterior Laurent map psi(w) = c_1 w + c_0 + sum_m c_{-m} w^{-m} with
    c_1 > 0.  capacity_log stores log cap = log R or log c_1.
    """

    shape: str
    radius: float = 0.0
    laurent: tuple = ()
    capacity_log: float = 0.0

    def __post_init__(self):
        if self.shape == "disk":
            if self.radius <= 0.0:
                raise ValueError("disk radius must be positive")
        elif self.shape == "exterior_map":
            laurent = tuple(complex(c) for c in self.laurent)
            if not laurent or laurent[0].real <= 0.0 or abs(laurent[0].imag) > 0.0:
                raise ValueError("exterior map needs real c_1 > 0")
            object.__setattr__(self, "laurent", laurent)
        else:
            raise ValueError(f"unknown droplet shape {self.shape!r}")

    @classmethod
    def disk(cls, radius: float) -> "Droplet":
        return cls(shape="disk", radius=float(radius), capacity_log=float(np.log(radius)))

    @classmethod
    def exterior_map(cls, laurent) -> "Droplet":
        laurent = tuple(complex(c) for c in laurent)
        return cls(shape="exterior_map", laurent=laurent,
                   capacity_log=float(np.log(laurent[0].real)))

    # --- geometry -----------------------------------------------------------

    def psi(self, w):
        """Exterior map on |w| >= 1 (identity scaling for disks)."""
        w = np.asarray(w, dtype=complex)
        if self.shape == "disk":
            return self.radius * w
        c1, c0, *rest = self.laurent
        out = c1 * w + c0
        winv = 1.0 / w
        p = winv.copy()
        for c in rest:
            out = out + c * p
            p = p * winv
        return out

    def dpsi(self, w):
        w = np.asarray(w, dtype=complex)
        if self.shape == "disk":
            return np.full_like(w, self.radius)
        c1, _c0, *rest = self.laurent
        out = np.full_like(w, c1)
        winv = 1.0 / w
        p = winv * winv
        for m, c in enumerate(rest, start=1):
            out = out - m * c * p
            p = p * winv
        return out

    def boundary_point(self, theta):
        return self.psi(np.exp(1j * np.asarray(theta, dtype=float)))

    def boundary_speed(self, theta):
        """|d/dtheta psi(e^{i theta})| = |psi'(e^{i theta})|."""
        return np.abs(self.dpsi(np.exp(1j * np.asarray(theta, dtype=float))))

    def invert(self, z, tol: float = 1e-13, maxiter: int = 60):
        """Newton inversion of the exterior map (w with psi(w) = z, |w| >= 1)."""
        z = np.asarray(z, dtype=complex)
        if self.shape == "disk":
            return z / self.radius
        c1, c0 = self.laurent[0], self.laurent[1] if len(self.laurent) > 1 else 0.0
        w = (z - c0) / c1
        for _ in range(maxiter):
            dw = (self.psi(w) - z) / self.dpsi(w)
            w = w - dw
            if np.max(np.abs(dw)) < tol:
                break
        return w

    @property
    def circumradius(self) -> float:
        if self.shape == "disk":
            return self.radius
        return float(np.max(np.abs(self.boundary_point(np.linspace(0.0, 2.0 * np.pi, 720)))))

    @property
    def diameter(self) -> float:
        if self.shape == "disk":
            return 2.0 * self.radius
        pts = self.boundary_point(np.linspace(0.0, 2.0 * np.pi, 360, endpoint=False))
        return float(np.max(np.abs(pts[:, None] - pts[None, :])))

    def boundary_radius_table(self, m: int = 4096) -> np.ndarray:
        """Polar radius of the boundary on a uniform angle grid.

        Requires the droplet to be star-shaped about the origin; raises when
        the boundary's polar angle fails to be monotone.
        """
        if self.shape == "disk":
            return np.full(m, self.radius)
        theta = np.linspace(0.0, 2.0 * np.pi, 8 * m, endpoint=False)
        pts = self.boundary_point(theta)
        ang = np.mod(np.angle(pts), 2.0 * np.pi)
        rad = np.abs(pts)
        order = np.argsort(ang)
        ang, rad = ang[order], rad[order]
        if np.min(np.diff(ang)) <= 0.0 and np.sum(np.diff(ang) <= 0) > 1:
            raise ValueError("droplet boundary is not star-shaped about the origin")
        grid = (np.arange(m) + 0.5) * (2.0 * np.pi / m)
        return np.interp(grid, ang, rad, period=2.0 * np.pi)

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.shape == "disk":
            return np.abs(z) <= self.radius
        table = _radius_table_cached(self)
        m = table.size
        idx = np.mod((np.angle(z) / (2.0 * np.pi) + 0.5) * m - 0.5, m)
        lo = np.floor(idx).astype(int) % m
        hi = (lo + 1) % m
        frac = idx - np.floor(idx)
        rb = table[lo] * (1.0 - frac) + table[hi] * frac
        return np.abs(z) <= rb

    def nearest_boundary_parameter(self, z) -> np.ndarray:
        """Map-parameter angle of the boundary point closest to each z."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.shape == "disk":
            return np.mod(np.angle(z), 2.0 * np.pi)
        theta = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
        pts = self.boundary_point(theta)
        out = np.empty(z.size)
        chunk = 4096
        for s in range(0, z.size, chunk):
            d = np.abs(z[s:s + chunk, None] - pts[None, :])
            out[s:s + chunk] = theta[np.argmin(d, axis=1)]
        return out

    def to_json(self) -> str:
        d = {"shape": self.shape, "capacity_log": self.capacity_log}
        if self.shape == "disk":
            d["radius"] = self.radius
        else:
            d["coefficients"] = [[c.real, c.imag] for c in self.laurent]
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "Droplet":
        d = json.loads(text)
        if d["shape"] == "disk":
            return cls.disk(d["radius"])
        return cls.exterior_map([complex(re, im) for re, im in d["coefficients"]])


# boundary radius tables are pure functions of the Laurent data
_RADIUS_TABLE_CACHE: dict = {}


def _radius_table_cached(droplet: Droplet) -> np.ndarray:
    key = droplet.laurent
    if key not in _RADIUS_TABLE_CACHE:
        _RADIUS_TABLE_CACHE[key] = droplet.boundary_radius_table()
    return _RADIUS_TABLE_CACHE[key]


@dataclass(frozen=True)
class EquilibriumMeasure:
    """Radial equilibrium measure: density Delta v / (4 pi) on a centered disk."""

    droplet: Droplet
    potential: PotentialSpec

    def density(self, r):
        r = np.asarray(r, dtype=float)
        inside = r <= self.droplet.radius
        return np.where(inside, self.potential.radial_laplacian(r) / (4.0 * np.pi), 0.0)

    def total_mass(self) -> float:
        val, _ = quad(lambda r: self.density(r) * 2.0 * np.pi * r,
                      0.0, self.droplet.radius, epsabs=1e-12, epsrel=1e-12)
        return float(val)

    def to_json(self) -> str:
        return json.dumps({
            "droplet": json.loads(self.droplet.to_json()),
            "potential": self.potential.to_json_dict(),
        })


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class TestFn:
    """Smooth test functions with analytic gradient and Laplacian.

    Kinds: "zero"; "harmonic_re" (a * Re z^k); "gaussian_bump"
    (a * exp(-|z-c|^2 / 2 tau^2)); "bump", the compactly supported radial
    profile exp(-1/(1-s^2)) used throughout for mollifiers and mesoscopic
    observables.
    """

    kind: str
    center: complex = 0j
    scale: float = 1.0
    degree: int = 1
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero", "harmonic_re", "gaussian_bump", "bump"):
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if self.kind in ("gaussian_bump", "bump") and self.scale <= 0.0:
            raise ValueError("scale must be positive")
        if self.kind == "harmonic_re" and self.degree < 1:
            raise ValueError("degree must be >= 1")

    @classmethod
    def zero(cls) -> "TestFn":
        return cls(kind="zero")

    @classmethod
    def harmonic_re(cls, degree: int, amplitude: float = 1.0) -> "TestFn":
        return cls(kind="harmonic_re", degree=degree, amplitude=amplitude)

    @classmethod
    def gaussian_bump(cls, center, scale, amplitude: float = 1.0) -> "TestFn":
        return cls(kind="gaussian_bump", center=complex(center), scale=float(scale),
                   amplitude=amplitude)

    @classmethod
    def bump(cls, center, radius, amplitude: float = 1.0) -> "TestFn":
        return cls(kind="bump", center=complex(center), scale=float(radius),
                   amplitude=amplitude)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.amplitude == 0.0

    @property
    def is_radial_about_origin(self) -> bool:
        if self.is_zero:
            return True
        return self.kind in ("gaussian_bump", "bump") and self.center == 0j

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        a = self.amplitude
        if self.kind == "zero":
            return np.zeros(z.shape)
        if self.kind == "harmonic_re":
            return a * np.real(z ** self.degree)
        u = np.abs(z - self.center) ** 2 / self.scale ** 2
        if self.kind == "gaussian_bump":
            return a * np.exp(-0.5 * u)
        return a * _bump_profile(u)

    def wirtinger(self, z):
        """df/dz for the real-valued f (so grad f = 2 conj(df/dz))."""
        z = np.asarray(z, dtype=complex)
        a = self.amplitude
        if self.kind == "zero":
            return np.zeros(z.shape, dtype=complex)
        if self.kind == "harmonic_re":
            return 0.5 * a * self.degree * z ** (self.degree - 1)
        d = z - self.center
        u = np.abs(d) ** 2 / self.scale ** 2
        if self.kind == "gaussian_bump":
            return a * np.exp(-0.5 * u) * (-np.conj(d)) / (2.0 * self.scale ** 2)
        return a * _bump_profile_d1(u) * np.conj(d) / self.scale ** 2

    def grad_sq(self, z):
        """|grad f|^2 = 4 |df/dz|^2."""
        return 4.0 * np.abs(self.wirtinger(z)) ** 2

    def laplacian(self, z):
        z = np.asarray(z, dtype=complex)
        a = self.amplitude
        if self.kind in ("zero", "harmonic_re"):
            return np.zeros(z.shape)
        u = np.abs(z - self.center) ** 2 / self.scale ** 2
        if self.kind == "gaussian_bump":
            return a * np.exp(-0.5 * u) * (u - 2.0) / self.scale ** 2
        return a * (4.0 * u * _bump_profile_d2(u) + 4.0 * _bump_profile_d1(u)) / self.scale ** 2

    @property
    def support_radius(self) -> float:
        """Effective support scale (exact for bumps, 6 sigma for Gaussians)."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "harmonic_re":
            return np.inf
        if self.kind == "gaussian_bump":
            return 6.0 * self.scale
        return self.scale


def _bump_om(u):
    """(inside mask, clipped 1-u) shared by the bump profile derivatives."""
    u = np.asarray(u, dtype=float)
    inside = u < 1.0
    om = np.where(inside, 1.0 - u, 1.0)
    return inside, om


def _bump_profile(u):
    inside, om = _bump_om(u)
    return np.where(inside, np.exp(-1.0 / om), 0.0)


def _bump_profile_d1(u):
    """d/du of exp(-1/(1-u)) on u < 1, zero outside."""
    inside, om = _bump_om(u)
    return np.where(inside, -np.exp(-1.0 / om) / om ** 2, 0.0)


def _bump_profile_d2(u):
    inside, om = _bump_om(u)
    return np.where(inside, np.exp(-1.0 / om) * (1.0 / om ** 4 - 2.0 / om ** 3), 0.0)


# ---------------------------------------------------------------------------
# equilibrium droplet and the logarithmic potential of the measure


def equilibrium_droplet(potential: PotentialSpec):
    """Centered-disk droplet of a radial potential with (A1)/(A4) checks.

    The normalization int_0^R (Delta v / 4pi) 2 pi r dr = R v'(R)/2 = 1 is
    solved by bisection to 1e-12.
    """
    if not potential.is_radial:
        raise ValueError("equilibrium_droplet needs a radial potential")

    def mass(r):
        # R v'(R) / 2 with v' = 2 r dv/du
        u = r * r
        return r * (2.0 * r * potential._dv_du(np.asarray(u))) / 2.0

    hi = 1.0
    tries = 0
    while mass(hi) < 1.0:
        hi *= 2.0
        tries += 1
        if tries > 200:
            raise NoRootError("droplet normalization has no root (degenerate potential)")
    lo = 0.0
    while hi - lo > 1e-12 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mass(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    radius = 0.5 * (lo + hi)

    # non-degeneracy: Delta v > 0 on the droplet (the origin may be a zero of
    # the density for pure higher-degree terms; those points are rejected at
    # query time instead)
    r_check = np.linspace(radius * 1e-3, radius, 257)
    lap = potential.radial_laplacian(r_check)
    if np.any(lap <= 0.0):
        raise NoRootError("equilibrium density is not positive on the droplet")

    droplet = Droplet.disk(radius)
    measure = EquilibriumMeasure(droplet=droplet, potential=potential)
    total = measure.total_mass()
    if abs(total - 1.0) > 1e-8:
        raise NoRootError(f"equilibrium measure mass {total} != 1")
    return droplet, measure


def eq_log_potential(measure: EquilibriumMeasure, zeta: complex) -> float:
    """int log|zeta - z| dmu(z) via the 1D shell reduction.

    For rotationally symmetric measures the circular average of log|zeta - .|
    over the radius-r circle is log max(|zeta|, r), so the 2D integral
    collapses to a single radial quadrature.
    """
    s = abs(complex(zeta))
    R = measure.droplet.radius

    def integrand(r):
        return np.log(max(s, r)) * measure.density(r) * 2.0 * np.pi * r

    if s <= 0.0:
        pts = [0.0, R]
    else:
        pts = sorted({0.0, min(s, R), R})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, _ = quad(integrand, a, b, epsabs=1e-11, epsrel=1e-11, limit=200)
        total += val
    return float(total)


# ---------------------------------------------------------------------------
# capacity and harmonic measure


def capacity(droplet: Droplet) -> float:
    """log cap of the closed droplet: log R for disks, log c_1 for maps."""
    return float(droplet.capacity_log)


def capacity_energy_estimate(droplet: Droplet, points: int = 256) -> float:
    """Independent capacity estimate: minimize the logarithmic energy
    I(mu) = iint log 1/|z-w| dmu dmu over boundary measures.

    The boundary density (in the parametrizing angle) is discretized at
    `points` nodes; the log-singular part of the kernel is summed exactly in
    Fourier and the smooth remainder by trapezoid, so the scheme is
    spectrally accurate on analytic boundaries.  Returns log cap = -I_min.
    """
    m = int(points)
    theta = 2.0 * np.pi * np.arange(m) / m
    x = droplet.boundary_point(theta)
    speed = droplet.boundary_speed(theta)

    diff = np.abs(x[:, None] - x[None, :])
    dtheta = theta[:, None] - theta[None, :]
    sin_part = np.abs(2.0 * np.sin(0.5 * dtheta))
    g = np.zeros((m, m))
    off = ~np.eye(m, dtype=bool)
    g[off] = -np.log(diff[off] / sin_part[off])
    g[np.eye(m, dtype=bool)] = -np.log(speed)

    # exact Fourier sum of -log|2 sin(u/2)| = sum_{k>=1} cos(k u)/k, built as
    # a circulant from its first row
    ks = np.arange(1, m // 2)
    row = np.cos(np.outer(theta, ks)) @ (1.0 / ks)
    idx = (np.arange(m)[:, None] - np.arange(m)[None, :]) % m
    circ = row[idx]

    q = (2.0 * np.pi / m) ** 2 * (g + circ)
    # KKT system for min rho^T q rho subject to (2 pi / m) sum rho = 1
    kkt = np.zeros((m + 1, m + 1))
    kkt[:m, :m] = 2.0 * q
    kkt[:m, m] = 2.0 * np.pi / m
    kkt[m, :m] = 2.0 * np.pi / m
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    sol = np.linalg.solve(kkt, rhs)
    rho = sol[:m]
    if np.min(rho) < -1e-6 * max(1.0, np.max(np.abs(rho))):
        warnings.warn("energy-minimizing boundary density came out signed")
    energy = float(rho @ q @ rho)
    return -energy


def harmonic_measure_density(droplet: Droplet, theta) -> np.ndarray:
    """Density of the harmonic measure at infinity w.r.t. the parametrizing
    angle: the pushforward of the uniform measure under the exterior map is
    uniform, so this is 1/(2 pi) for both droplet shapes."""
    theta = np.asarray(theta, dtype=float)
    return np.full(theta.shape, 1.0 / (2.0 * np.pi))


def harmonic_measure_arclength_density(droplet: Droplet, theta) -> np.ndarray:
    """Same measure expressed against arclength: 1/(2 pi |psi'(e^{i theta})|)."""
    return harmonic_measure_density(droplet, theta) / droplet.boundary_speed(theta)


# ---------------------------------------------------------------------------
# Brownian hitting estimator

_WALKER_CHUNK = 4096


@numba.njit(cache=True)
def _walk_chunk(count, seed, start_radius, step, r_cap, rb_table, max_steps):
    """Gaussian-increment walkers in the shell around the droplet.

    Whenever a walker is outside the capture circle |z| = r_cap (which
    encloses the droplet) its re-entry point onto that circle is drawn from
    the exact exterior hitting kernel, so only the near-droplet part of the
    path is step-resolved.  Returns hit coordinates; a negative x marks a
    walker that exhausted max_steps, which the caller turns into an error.
    """
    np.random.seed(seed)
    m = rb_table.size
    hx = np.empty(count)
    hy = np.empty(count)
    failed = 0
    for w in range(count):
        ang = 2.0 * np.pi * np.random.random()
        x = start_radius * np.cos(ang)
        y = start_radius * np.sin(ang)
        steps = 0
        done = False
        while not done:
            rad2 = x * x + y * y
            if rad2 > r_cap * r_cap:
                # exact circle-to-circle re-entry: wrapped-Cauchy angle with
                # parameter r_cap/|z| about the current direction
                rho = np.sqrt(rad2)
                ratio = r_cap / rho
                u = 2.0 * np.arctan((1.0 - ratio) / (1.0 + ratio)
                                    * np.tan(np.pi * (np.random.random() - 0.5)))
                ang = np.arctan2(y, x) + u
                x = r_cap * np.cos(ang)
                y = r_cap * np.sin(ang)
            x += step * np.random.normal()
            y += step * np.random.normal()
            steps += 1
            if steps > max_steps:
                failed += 1
                hx[w] = -1e308
                hy[w] = 0.0
                done = True
                continue
            # star-shaped inside test via the polar radius table
            ang = np.arctan2(y, x)
            pos = (ang / (2.0 * np.pi) + 0.5) * m - 0.5
            pos = pos % m
            lo = int(np.floor(pos)) % m
            hi = (lo + 1) % m
            frac = pos - np.floor(pos)
            rb = rb_table[lo] * (1.0 - frac) + rb_table[hi] * frac
            if x * x + y * y <= rb * rb:
                hx[w] = x
                hy[w] = y
                done = True
    return hx, hy, failed


@dataclass(frozen=True)
class HittingSample:
    """Boundary-parameter hits of the walker ensemble."""

    parameters: np.ndarray
    walkers: int
    seed: int

    def histogram(self, bins: int = 256):
        return np.histogram(self.parameters, bins=bins, range=(0.0, 2.0 * np.pi))


def brownian_hitting_estimate(droplet: Droplet, walkers: int, start_radius: float,
                              step: float, seed: int,
                              max_steps: int = 100_000_000) -> HittingSample:
    """Empirical harmonic measure at infinity from Gaussian-increment walkers.

    Walkers start uniformly on |z| = start_radius and run until first entry
    into the closed droplet; the recurrence of the planar walk guarantees
    termination and the per-walker step cap turns a bad step size into an
    error instead of a hang.
    """
    diam = droplet.diameter
    if start_radius <= 3.0 * diam:
        raise ValueError("start_radius must exceed 3 droplet diameters")
    if step > 1e-2 * diam:
        raise ValueError("step must be at most 1e-2 droplet diameters")
    rb = droplet.boundary_radius_table(4096) if droplet.shape != "disk" \
        else np.full(4096, droplet.radius)
    r_cap = 1.1 * droplet.circumradius
    if r_cap >= start_radius:
        raise ValueError("start_radius inside the capture circle")

    hits = np.empty(walkers, dtype=complex)
    failed_total = 0
    pos = 0
    n_chunks = (walkers + _WALKER_CHUNK - 1) // _WALKER_CHUNK
    for c in range(n_chunks):
        count = min(_WALKER_CHUNK, walkers - pos)
        chunk_seed = int(np.random.SeedSequence((seed, c)).generate_state(1, np.uint32)[0])
        hx, hy, failed = _walk_chunk(count, chunk_seed, float(start_radius),
                                     float(step), float(r_cap), rb, max_steps)
        failed_total += failed
        hits[pos:pos + count] = hx + 1j * hy
        pos += count
    if failed_total:
        raise NonTerminationError(
            f"{failed_total} walkers hit the {max_steps}-step cap; reduce the step size")
    params = droplet.nearest_boundary_parameter(hits)
    return HittingSample(parameters=params, walkers=walkers, seed=seed)


# ---------------------------------------------------------------------------
# harmonic extensions


def boundary_fourier(f, droplet: Droplet, modes: int = 256):
    """Fourier data of f restricted to the droplet boundary, in the map
    parameter.  Returns (ks, coeffs) with ks = -modes+1 .. modes-1."""
    m = 2 * modes
    theta = 2.0 * np.pi * np.arange(m) / m
    values = f.value(droplet.boundary_point(theta)) if isinstance(f, TestFn) \
        else np.asarray(f(droplet.boundary_point(theta)))
    c = np.fft.fft(values) / m
    ks = np.arange(-(modes - 1), modes)
    coeffs = np.concatenate([c[m - (modes - 1):], c[:modes]])
    return ks, coeffs


@dataclass(frozen=True)
class HarmonicExtension:
    """Bounded harmonic extension of boundary data to the droplet exterior,
    with its analytic / anti-analytic split in the map coordinate."""

    droplet: Droplet
    ks: np.ndarray
    coeffs: np.ndarray

    def _w(self, z):
        w = self.droplet.invert(np.asarray(z, dtype=complex))
        if np.any(np.abs(w) < 1.0 - 1e-9):
            raise ValueError("harmonic extension only evaluates on the droplet exterior")
        return w

    def _coeff(self, k: int) -> complex:
        return self.coeffs[k + int(self.ks.max())]

    def plus(self, z):
        """sum_{k>=0} c_{-k} w^{-k}: the analytic half."""
        w = self._w(z)
        winv = 1.0 / w
        out = np.zeros_like(w)
        for k in range(int(self.ks.max()), 0, -1):
            out = (out + self._coeff(-k)) * winv
        return out + self._coeff(0)

    def minus(self, z):
        """sum_{k>=1} c_k conj(w)^{-k}: the anti-analytic half."""
        winv = 1.0 / np.conj(self._w(z))
        out = np.zeros_like(winv)
        for k in range(int(self.ks.max()), 0, -1):
            out = (out + self._coeff(k)) * winv
        return out

    def __call__(self, z):
        val = self.plus(z) + self.minus(z)
        return np.real(val) if self.is_real else val

    @property
    def is_real(self) -> bool:
        sym = self.coeffs[::-1].conj()
        return bool(np.allclose(sym, self.coeffs, atol=1e-12))

    @property
    def at_infinity(self):
        c0 = self.coeffs[self.ks == 0][0]
        return float(np.real(c0)) if self.is_real else complex(c0)

    def dirichlet_energy_exterior(self) -> float:
        """int_{S^c} |grad g^S|^2 dm = 2 pi sum |k| |c_k|^2 (conformally
        invariant, hence exact in the map parameter)."""
        return float(2.0 * np.pi * np.sum(np.abs(self.ks) * np.abs(self.coeffs) ** 2))


def harmonic_extension(droplet: Droplet, f, modes: int = 256) -> HarmonicExtension:
    """Bounded harmonic extension of f|_{boundary} to the droplet exterior.

    f may be a TestFn, a callable on boundary points, or precomputed Fourier
    data (ks, coeffs).  Warns when the retained modes visibly truncate."""
    if isinstance(f, tuple) and len(f) == 2:
        ks, coeffs = np.asarray(f[0]), np.asarray(f[1], dtype=complex)
    else:
        ks, coeffs = boundary_fourier(f, droplet, modes)
    top = np.abs(ks) >= (np.max(np.abs(ks)) + 1) // 2
    tail_energy = float(np.sum(np.abs(ks[top]) * np.abs(coeffs[top]) ** 2))
    if tail_energy > 1e-8:
        warnings.warn(f"boundary data barely resolved: top-octave energy {tail_energy:.2e}")
    return HarmonicExtension(droplet=droplet, ks=ks, coeffs=coeffs)


def neumann_jump(droplet: Droplet, g_inside, g_outside, theta,
                 rel_offset: float = 1e-6):
    """Neumann jump d/dn g|_inside - d/dn g^S|_outside on the boundary.

    One-sided finite differences at offset rel_offset * diameter with one
    Richardson step; boundary data here are analytic so the h -> h/2
    extrapolation leaves an O(h^2) error.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x = droplet.boundary_point(theta)
    tangent = droplet.dpsi(np.exp(1j * theta)) * 1j * np.exp(1j * theta)
    normal = -1j * tangent / np.abs(tangent)
    h = rel_offset * droplet.diameter

    def one_sided(g, sign):
        # derivative along +normal from inside (sign -1) or outside (sign +1)
        def diff(hh):
            if sign < 0:
                return (np.asarray(g(x)) - np.asarray(g(x - hh * normal))) / hh
            return (np.asarray(g(x + hh * normal)) - np.asarray(g(x))) / hh
        return 2.0 * diff(0.5 * h) - diff(h)

    inner = one_sided(g_inside, -1)
    outer = one_sided(g_outside, +1)
    out = np.real(inner - outer)
    return out if out.size > 1 else float(out[0])


# ---------------------------------------------------------------------------
# mollified logarithm


@dataclass(frozen=True)
class MollifierParams:
    """Scale of the fixed smooth radial bump exp(-1/(1-|x|^2))."""

    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")


@lru_cache(maxsize=1)
def _bump_radial_norm() -> float:
    val, _ = quad(lambda s: np.exp(-1.0 / (1.0 - s * s)) * s, 0.0, 1.0,
                  epsabs=1e-14, epsrel=1e-14)
    return float(val)


def _profile_exact(t: float) -> float:
    """P(t) = int_0^1 w(s) log max(t, s) ds for the unit-scale bump, where
    w is the normalized radial mass; log_eps(z) = log eps + P(|z|/eps)."""
    norm = _bump_radial_norm()

    def wmass(s):
        return np.exp(-1.0 / (1.0 - s * s)) * s / norm

    if t >= 1.0:
        return float(np.log(t))
    total = 0.0
    if t > 0.0:
        inner, _ = quad(wmass, 0.0, t, epsabs=1e-13, epsrel=1e-13)
        total += np.log(t) * inner
    outer, _ = quad(lambda s: wmass(s) * np.log(s), t, 1.0, epsabs=1e-13, epsrel=1e-13)
    return float(total + outer)


@lru_cache(maxsize=1)
def _profile_spline():
    from scipy.interpolate import CubicSpline
    t = np.linspace(0.0, 1.0, 1201)
    vals = np.array([_profile_exact(float(tt)) for tt in t])
    return CubicSpline(t, vals)


def mollifier_log_shift() -> float:
    """c_chi = log_eps(0) - log eps: the value of the mollified log at the
    singularity, in units of the scale."""
    return _profile_exact(0.0)


def mollified_log(params: MollifierParams, z):
    """log|.| convolved with the normalized bump at scale epsilon.

    Equals log|z| exactly for |z| >= epsilon (circular averages of log are
    log max(|z|, s), so the convolution only sees radii below |z|); inside,
    the same shell identity reduces the 2D convolution to a radial profile
    tabulated to ~1e-11.
    """
    z = np.asarray(z)
    r = np.abs(z).astype(float)
    eps = params.epsilon
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = np.empty_like(r)
    far = r >= eps
    with np.errstate(divide="ignore"):
        out[far] = np.log(r[far])
    near = ~far
    if np.any(near):
        out[near] = np.log(eps) + _profile_spline()(r[near] / eps)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# H^{1/2}


def h_half_norm(coeffs, ks=None) -> float:
    """Squared H^{1/2} seminorm sum_k |k| |c_k|^2 of boundary Fourier data."""
    coeffs = np.asarray(coeffs, dtype=complex)
    if ks is None:
        half = (coeffs.size - 1) // 2
        ks = np.arange(-half, coeffs.size - half)
    ks = np.asarray(ks)
    return float(np.sum(np.abs(ks) * np.abs(coeffs) ** 2))
