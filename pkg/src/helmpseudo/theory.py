"""A priori inclusion/exclusion regions for pseudospectra and GMRES iteration estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import FovPolygon, as_operator, polygon_distance


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class StabilityConstants:
    """Discrete stability constant |x| <= C_2S |A x| and its ingredients."""

    C_2S: float
    provenance: str
    C_S: float | None = None
    alpha: float | None = None
    alpha_W: float | None = None

    def __post_init__(self):
        if not self.C_2S > 0:
            raise ValueError("C_2S must be positive")

    @classmethod
    def oracle(cls, op) -> "StabilityConstants":
        """Sharp constant 1/sigma_min(A)."""
        s = as_operator(op).sigma_min(0.0)
        if s == 0.0:
            raise ValueError("operator is singular; no exclusion disc exists")
        return cls(1.0 / s, "oracle")

    @classmethod
    def from_norm_equivalence(cls, C_S: float, alpha: float, alpha_W: float) -> "StabilityConstants":
        return cls(C_S / (alpha_W * alpha), "norm-equivalence", C_S, alpha, alpha_W)


# ---------------------------------------------------------------------------
# regions


@dataclass
class Region:
    """Base class. ``kind`` is "exclusion" (certified subset of the complement
    of the pseudospectrum) or "inclusion" (superset of the pseudospectrum)."""

    kind: str = field(default="exclusion", init=False)
    provenance: str = field(default="a priori", kw_only=True)

    variant = "region"

    def contains(self, z) -> np.ndarray | bool:
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    @property
    def empty(self) -> bool:
        return False


@dataclass
class Disc(Region):
    center: complex = 0.0
    radius: float = 0.0
    variant = "disc"

    @property
    def empty(self) -> bool:
        return self.radius <= 0

    def contains(self, z):
        return np.abs(np.asarray(z) - self.center) < self.radius

    def sample(self, n: int, rng: np.random.Generator, shrink: float = 1.0) -> np.ndarray:
        """Uniform samples in the disc of radius shrink*radius."""
        r = shrink * self.radius * np.sqrt(rng.random(n))
        return self.center + r * np.exp(2j * np.pi * rng.random(n))

    def params(self):
        return {"center": complex(self.center), "radius": float(self.radius)}


@dataclass
class DilatedPolygon(Region):
    fov: FovPolygon = None
    eps: float = 0.0
    variant = "dilated-polygon"

    def __post_init__(self):
        self.kind = "inclusion"

    def contains(self, z):
        return self.fov.distance(z) <= self.eps

    def params(self):
        return {"eps": float(self.eps), "polygon": [complex(p) for p in self.fov.outer]}


@dataclass
class Strip(Region):
    im_min: float = 0.0
    im_max: float = 0.0
    modulus_cap: float = math.inf
    variant = "strip"

    def __post_init__(self):
        self.kind = "inclusion"

    def contains(self, z):
        z = np.asarray(z)
        return (z.imag >= self.im_min) & (z.imag <= self.im_max) & (np.abs(z) <= self.modulus_cap)

    def params(self):
        return {"im_min": self.im_min, "im_max": self.im_max, "modulus_cap": self.modulus_cap}


@dataclass
class Lemma41Region(Region):
    C: float = 1.0
    eps: float = 1.0
    variant = "lemma41"

    def contains(self, z):
        f = np.vectorize(lambda w: lemma41_complement(w, self.C, self.eps), otypes=[bool])
        out = f(np.asarray(z, dtype=complex))
        return out if out.ndim else bool(out)

    def params(self):
        return {"C": self.C, "eps": self.eps}


@dataclass
class AnnulusApprox(Region):
    """The disc B(center, radius) dilated by eps."""

    center: complex = 1.0
    radius: float = 0.0
    eps: float = 0.0
    variant = "annulus-approx"

    def __post_init__(self):
        self.kind = "inclusion"

    def contains(self, z):
        return np.abs(np.asarray(z) - self.center) <= self.radius + self.eps

    def params(self):
        return {"center": complex(self.center), "radius": self.radius, "eps": self.eps}


def exclusion_disc(c: StabilityConstants, eps: float) -> Disc:
    """B(0, 1/C_2S - eps), contained in the complement of the eps-pseudospectrum."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return Disc(0.0, 1.0 / c.C_2S - eps, provenance=c.provenance)


def inclusion_fov_dilation(fov: FovPolygon, eps: float) -> DilatedPolygon:
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return DilatedPolygon(fov, eps, provenance="fov")


def helmholtz_exclusion(kappa: float, h: float, d: int, C: float, eps: float,
                        provenance: str = "calibrated") -> Disc:
    """B(0, C kappa h^d - eps)."""
    if d != 2:
        raise ValueError("only d = 2 is supported")
    if min(kappa, h, C) <= 0 or eps < 0:
        raise ValueError("parameters must be positive")
    return Disc(0.0, C * kappa * h ** d - eps, provenance=provenance)


def helmholtz_strip(kappa: float, lam_max_boundary_mass: float, modulus_cap: float = math.inf,
                    eps: float = 0.0) -> Strip:
    """0 <= Im z <= kappa * lambda_max(Mb), dilated by eps."""
    return Strip(-eps, kappa * lam_max_boundary_mass + eps, modulus_cap + eps, provenance="fov")


def sl_exclusion(kappa: float, sigma: float, eps: float, C: float = 1.0,
                 provenance: str = "a priori") -> Disc:
    """B(0, C kappa/(kappa + sigma) - eps) for the shifted-Laplace preconditioned operator."""
    if kappa <= 0 or sigma < 0 or C <= 0 or eps < 0:
        raise ValueError("parameters must be positive")
    return Disc(0.0, C * kappa / (kappa + sigma) - eps, provenance=provenance)


def sl_eigenvalue_disc(eps: float) -> Disc:
    """B(1/2, 1/2) dilated by eps. The spectrum of the shifted-Laplace
    preconditioned operator lies in B(1/2, 1/2); small pseudospectra follow it."""
    d = Disc(0.5, 0.5 + eps, provenance="eigenvalue-disc")
    d.kind = "inclusion"
    return d


def lemma41_complement(z: complex, C: float, eps: float) -> bool:
    """True when z is certified to lie outside the eps-pseudospectrum of A B^{-1}.

    Requires |z - 1/2| > 1/2 and C (1/(|z|^2 - Re z) + 1/|1 - z|) < 1/eps.
    """
    if not (eps > 0 and C > 0):
        raise ValueError("C and eps must be positive")
    z = complex(z)
    if abs(z - 0.5) <= 0.5 or z == 1:
        return False
    q = abs(z) ** 2 - z.real
    if q <= 0:
        return False
    return C * (1.0 / q + 1.0 / abs(1 - z)) < 1.0 / eps


def lemma41_region(C: float, eps: float, provenance: str = "mass-equivalence") -> Lemma41Region:
    return Lemma41Region(C, eps, provenance=provenance)


def sl_annulus_approx(kappa: float, sigma: float, eps: float) -> AnnulusApprox:
    """B(1, 1 - kappa/(kappa + sigma)) dilated by eps."""
    return AnnulusApprox(1.0, 1.0 - kappa / (kappa + sigma), eps, provenance="heuristic")


# ---------------------------------------------------------------------------
# GMRES bounds and iteration counts


def gmres_circle_bound(center: complex, radius: float, multiplier: float, i: int) -> float:
    """multiplier * (radius/|center|)^i for a spectral inclusion in B(center, radius)."""
    if abs(center) <= radius:
        raise ValueError("circle contains the origin; the bound carries no information")
    return multiplier * (radius / abs(center)) ** i


def boundary_multiplier(boundary_length: float, eps: float) -> float:
    """|boundary| / (2 pi eps) from the contour-integral estimate."""
    return boundary_length / (2 * math.pi * eps)


def poisson_bound_epsilon(C1: float, h: float, d: int = 2) -> float:
    return 0.5 * C1 * h ** d


def refined_poisson_multiplier(C: float, h: float, d: int = 2) -> float:
    """Report-only multiplier C h^{-d}; sound only for eps below the eigenvalue separation."""
    return C * h ** (-d)


@dataclass(frozen=True)
class IterationEstimate:
    N: int
    tag: str
    inputs: dict
    raw: float


def iterations_estimate(tag: str, tol: float, **p) -> IterationEstimate:
    """Closed-form GMRES iteration predictions.

    poisson1: -(2 C2/C1) h^-2 (log tol - log(C2 h^-2 / (pi C1)))
    poisson2: -C h^-1 (log tol - log(C h^-d))
    sl:       -C kappa log tol + C kappa log kappa   (C = 4 by default)
    """
    if not 0 < tol <= 1:
        raise ValueError("tol must lie in (0, 1]")
    lt = math.log(tol)
    if tag == "poisson1":
        h, C1, C2 = p["h"], p.get("C1", 1.0), p.get("C2", 1.0)
        raw = -(2 * C2 / C1) * h ** -2 * (lt - math.log(C2 * h ** -2 / (math.pi * C1)))
    elif tag == "poisson2":
        h, C, d = p["h"], p.get("C", 1.0), p.get("d", 2)
        raw = -C * h ** -1 * (lt - math.log(C * h ** -d))
    elif tag == "sl":
        k, C = p["kappa"], p.get("C", 4.0)
        raw = -C * k * lt + C * k * math.log(k)
    else:
        raise ValueError(f"unknown estimate {tag!r}")
    return IterationEstimate(max(0, math.ceil(raw - 1e-9)), tag, dict(p, tol=tol), raw)


def calibrate_sl_constant(kappa: float, tol: float, iterations: int) -> float:
    """C such that the sl estimate equals the measured count at this kappa."""
    return iterations / (kappa * (math.log(kappa) - math.log(tol)))


def residual_to_energy(tol: float, f_norm: float, g_norm: float, h: float, C: float = 1.0) -> float:
    """C tol (|f|_0 + h^{-1/2} |g|_{0,boundary}); C defaults to an uncalibrated 1."""
    if tol <= 0 or h <= 0 or f_norm < 0 or g_norm < 0:
        raise ValueError("inputs must be positive")
    return C * tol * (f_norm + h ** -0.5 * g_norm)


def energy_norm(K, M, kappa: float, e: np.ndarray) -> float:
    """kappa-norm of the finite element function with coefficients e."""
    e = np.asarray(e)
    return math.sqrt(max(0.0, (np.vdot(e, K @ e) + kappa ** 2 * np.vdot(e, M @ e)).real))


# ---------------------------------------------------------------------------
# calibration helpers


def calibrate_constant(measured: float, unit_prediction: float) -> float:
    return measured / unit_prediction


def helmholtz_constant(sigma_min: float, kappa: float, h: float, d: int = 2) -> float:
    return sigma_min / (kappa * h ** d)


# ---------------------------------------------------------------------------
# closest approach of a level set to the origin


def bisect_closest_real(op, target: float, interval=(0.0, 1.0), n_scan: int = 64,
                        xtol: float = 1e-9, rtol: float = 1e-3) -> float:
    """Smallest x in ``interval`` with |(x I - C)^{-1}| = target.

    The interval is scanned from its left end until the resolvent norm first
    reaches ``target``; that bracket is then bisected.
    """
    sop = as_operator(op)

    def rn(x):
        s = sop.sigma_min(x)
        return math.inf if s == 0.0 else 1.0 / s

    lo, hi = (float(v) for v in interval)
    if rn(lo) >= target:
        raise BracketError(f"resolvent norm at {lo} already exceeds {target}")
    xs = np.linspace(lo, hi, n_scan + 1)
    prev = lo
    for x in xs[1:]:
        if rn(x) >= target:
            a, b = prev, float(x)
            break
        prev = float(x)
    else:
        raise BracketError(f"resolvent norm never reaches {target} on {interval}")
    while b - a > xtol:
        m = 0.5 * (a + b)
        if rn(m) >= target:
            b = m
        else:
            a = m
    x = 0.5 * (a + b)
    val = rn(x)
    if not abs(val - target) <= rtol * target:
        raise BracketError(f"bisection stalled at x={x}: norm {val} vs target {target}")
    return x


# ---------------------------------------------------------------------------
# export


def _fmt(v) -> str:
    if isinstance(v, complex):
        return f"{v.real!r}:{v.imag!r}"
    if isinstance(v, list):
        return "|".join(_fmt(x) for x in v)
    return repr(float(v))


def write_regions(regions: list, path: str | Path) -> None:
    lines = []
    for r in regions:
        parts = [r.variant, f"kind={r.kind}"]
        parts += [f"{k}={_fmt(v)}" for k, v in r.params().items()]
        parts.append(f"provenance={r.provenance}")
        lines.append(", ".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")


def read_regions(path: str | Path) -> list[dict]:
    out = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        variant, *fields = [s.strip() for s in line.split(", ")]
        rec = {"variant": variant}
        for f in fields:
            k, v = f.split("=", 1)
            if k in ("kind", "provenance"):
                rec[k] = v
            elif "|" in v or k == "polygon":
                rec[k] = [complex(float(a), float(b)) for a, b in (s.split(":") for s in v.split("|") if s)]
            elif ":" in v:
                a, b = v.split(":")
                rec[k] = complex(float(a), float(b))
            else:
                rec[k] = float(v)
        out.append(rec)
    return out
