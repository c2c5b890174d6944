"""Communication-energy objective over the CE count k, and its minimisation.

With ``n = N/k`` treated as a real number, the intra-CE term is
``sum_m n(n-1) p1_m A sqrt(n)`` and the inter-CE term is
``sum_{i != j} n^2 p2_ij A sqrt(k)``.  For uniform probabilities these collapse to

    E(k)/A = p1 (N^2.5 k^-1.5 - N^1.5 k^-0.5) + p2 N^2 (k^0.5 - k^-0.5)

Energies are in abstract units (the per-bit proportionality constants are 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

ProbSpec = Union[float, Sequence[float], np.ndarray, Callable[[int], object]]

GOLDEN = (math.sqrt(5) - 1) / 2
# rounded coefficients of the uniform second derivative at p1=0.25, p2=0.22
ROUNDED_COEFFS = {"n52_k72": 0.94, "n2_k32": 0.06, "n2_k52": 0.17, "n32_k52": 0.19}


class SizingError(RuntimeError):
    """The objective cannot be evaluated or minimised for the given parameters."""


@dataclass(frozen=True)
class ObjectiveParams:
    """Inputs to E(k).

    ``p1``/``p2`` are either scalars (uniform), explicit per-CE arrays (length k
    and k x k, valid only at that k), or callables ``k -> array`` so that
    probabilities can be re-estimated for each candidate CE count.
    """

    N: float
    A: float
    p1: ProbSpec
    p2: ProbSpec
    k_min: int = 4
    k_max: int = 100

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if self.A <= 0:
            raise ValueError("A must be positive")
        if not 1 <= self.k_min <= self.k_max:
            raise ValueError("need 1 <= k_min <= k_max")
        for name in ("p1", "p2"):
            p = getattr(self, name)
            if callable(p):
                continue
            arr = np.asarray(p, dtype=float)
            if (arr < 0).any() or (arr > 1).any():
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def uniform(self) -> bool:
        return np.ndim(self.p1) == 0 and np.ndim(self.p2) == 0 and not (callable(self.p1) or callable(self.p2))


@dataclass
class OptResult:
    k_star: int
    energy_at_k_star: float
    energy_curve: list[tuple[int, float, float, float]] = field(repr=False)
    convex_verified: bool
    k_continuous: float | None = None
    method: str = "golden-section"
    k_enumerated: int | None = None


def _resolve(p: ProbSpec, k: int):
    return p(k) if callable(p) else p


def energy_intra(k: float, params: ObjectiveParams) -> float:
    n = params.N / k
    p1 = _resolve(params.p1, k)
    if np.ndim(p1) == 0:
        s = k * float(p1)
    else:
        p1 = np.asarray(p1, dtype=float)
        if p1.shape != (int(k),):
            raise ValueError(f"p1 has shape {p1.shape}, expected ({int(k)},)")
        s = float(p1.sum())
    return s * n * (n - 1) * params.A * math.sqrt(n)


def energy_inter(k: float, params: ObjectiveParams) -> float:
    n = params.N / k
    p2 = _resolve(params.p2, k)
    if np.ndim(p2) == 0:
        s = k * (k - 1) * float(p2)
    else:
        p2 = np.asarray(p2, dtype=float)
        kk = int(k)
        if p2.shape != (kk, kk):
            raise ValueError(f"p2 has shape {p2.shape}, expected ({kk}, {kk})")
        s = float(p2.sum() - np.trace(p2))
    return s * n * n * params.A * math.sqrt(k)


def energy_total(k: float, params: ObjectiveParams) -> tuple[float, float, float]:
    intra = energy_intra(k, params)
    inter = energy_inter(k, params)
    return intra, inter, intra + inter


def second_derivative_rounded(k: float, N: float, A: float = 1.0) -> float:
    """Second derivative of E(k) with the published two-digit coefficients."""
    c = ROUNDED_COEFFS
    return (
        c["n52_k72"] * N**2.5 / k**3.5
        - c["n2_k32"] * N**2 / k**1.5
        - (c["n2_k52"] * N**2 + c["n32_k52"] * N**1.5) / k**2.5
    ) * A


def exact_coefficients(p1: float, p2: float) -> dict[str, float]:
    """Exact coefficients of d2E/dk2 for the uniform closed form."""
    return {
        "n52_k72": 15 * p1 / 4,
        "n2_k32": p2 / 4,
        "n2_k52": 3 * p2 / 4,
        "n32_k52": 3 * p1 / 4,
    }


def second_derivative(k: float, params: ObjectiveParams) -> float:
    if not params.uniform:
        raise ValueError("analytic second derivative needs uniform probabilities")
    c = exact_coefficients(float(params.p1), float(params.p2))
    N = params.N
    return (
        c["n52_k72"] * N**2.5 / k**3.5
        - c["n2_k32"] * N**2 / k**1.5
        - (c["n2_k52"] * N**2 + c["n32_k52"] * N**1.5) / k**2.5
    ) * params.A


def finite_difference_second(k: float, params: ObjectiveParams, h: float | None = None) -> float:
    if h is None:
        h = 1e-3 * k
    f = lambda x: energy_total(x, params)[2]
    return (f(k + h) - 2 * f(k) + f(k - h)) / (h * h)


def convexity_table(params: ObjectiveParams) -> list[dict]:
    """Per-integer-k diagnostics used by :func:`verify_convexity`."""
    rows = []
    for k in range(params.k_min, params.k_max + 1):
        analytic = second_derivative(k, params)
        fd = finite_difference_second(k, params)
        scale = max(abs(analytic), abs(fd))
        if scale > 1e-9:
            agree = math.copysign(1, fd) == math.copysign(1, analytic) and abs(fd - analytic) <= 1e-3 * abs(analytic)
        else:
            agree = True
        rows.append(
            {
                "k": k,
                "rounded": second_derivative_rounded(k, params.N, params.A),
                "analytic": analytic,
                "finite_difference": fd,
                "agree": agree,
            }
        )
    return rows


def verify_convexity(params: ObjectiveParams) -> bool:
    """True iff the rounded second derivative is positive on every integer k in
    range and finite differences of E agree with the analytic second derivative."""
    rows = convexity_table(params)
    return all(r["rounded"] > 0 for r in rows) and all(r["agree"] for r in rows)


def verify_unimodal(params: ObjectiveParams) -> bool:
    """E(k) on the integer grid decreases then increases (no interior local max)."""
    e = np.array([energy_total(k, params)[2] for k in range(params.k_min, params.k_max + 1)])
    d = np.sign(np.diff(e))
    d = d[d != 0]
    return not np.any((d[:-1] > 0) & (d[1:] < 0))


def enumerate_argmin(params: ObjectiveParams) -> tuple[int, list[tuple[int, float, float, float]]]:
    """Exhaustive integer search; ties go to the smallest k."""
    curve = []
    best_k, best_e = None, math.inf
    for k in range(params.k_min, params.k_max + 1):
        intra, inter, total = energy_total(k, params)
        if not math.isfinite(total):
            raise SizingError(f"non-finite objective at k={k}")
        curve.append((k, intra, inter, total))
        if total < best_e:
            best_k, best_e = k, total
    return best_k, curve


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-9, max_iter: int = 200) -> float:
    """Minimiser of a unimodal function on [lo, hi]."""
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
    x = (a + b) / 2
    # boundary minima
    candidates = [(f(lo), lo), (f(x), x), (f(hi), hi)]
    return min(candidates, key=lambda t: (t[0], t[1]))[1]


def minimize(params: ObjectiveParams) -> OptResult:
    """Optimal integer CE count on [k_min, k_max].

    Uniform probabilities: golden-section search on the continuous objective,
    then the better of floor/ceil. Non-uniform inputs use enumeration only.
    The enumeration curve is always computed; its argmin is kept alongside the
    search result so callers can cross-check the two.
    """
    k_enum, curve = enumerate_argmin(params)
    if not params.uniform:
        e = next(c[3] for c in curve if c[0] == k_enum)
        return OptResult(k_enum, e, curve, False, None, "enumeration", k_enum)

    f = lambda k: energy_total(k, params)[2]
    with np.errstate(all="raise"):
        try:
            kc = golden_section(f, float(params.k_min), float(params.k_max))
        except (OverflowError, FloatingPointError) as exc:
            raise SizingError(str(exc)) from exc
    cands = sorted({max(params.k_min, math.floor(kc)), min(params.k_max, math.ceil(kc))})
    k_star = min(cands, key=lambda k: (f(k), k))
    if not math.isfinite(f(k_star)):
        raise SizingError(f"non-finite objective at k={k_star}")
    return OptResult(k_star, f(k_star), curve, verify_convexity(params), kc, "golden-section", k_enum)
