r"""Modified Bessel functions of orders 0 and 1.

Natural and exponentially scaled forms of :math:`I_0, I_1, K_0, K_1` for real
non-negative arguments::

    i0e(x) = exp(-x) * I0(x)        k0e(x) = exp(x) * K0(x)
    i1e(x) = exp(-x) * I1(x)        k1e(x) = exp(x) * K1(x)

Evaluation strategy:

* I-family: ascending power series for ``x <= I_CROSSOVER``, Hankel
  asymptotic expansion above it. Every term of the series is positive, and the
  expansion's truncation error at the crossover is below ``exp(-2x)``.
* K-family: ascending series (with the logarithmic term) for
  ``x <= K_CROSSOVER``, Steed's continued fraction (Temme's CF2) up to
  ``K_ASYMPTOTIC``, Hankel expansion above that.

The array functions are vectorised with numpy. The scalar ``bessel_*``
functions return a :class:`BesselValue` carrying both the natural value and the
log of the scaled value, so callers can keep working in log space when the
natural value overflows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

EULER_GAMMA = 0.57721566490153286061
I_CROSSOVER = 20.0
K_CROSSOVER = 2.0
K_ASYMPTOTIC = 25.0

_EPS = 1e-17
_MAX_TERMS = 500


@dataclass(frozen=True)
class BesselValue:
    """A Bessel function value in natural and log-scaled form.

    ``log_scaled`` is ``log(exp(-x) * I(x))`` for the I-family and
    ``log(exp(x) * K(x))`` for the K-family.
    """

    x: float
    natural: float
    log_scaled: float
    kind: str

    @property
    def scaled(self) -> float:
        return math.exp(self.log_scaled)

    @property
    def log_natural(self) -> float:
        sign = 1.0 if self.kind == "I" else -1.0
        return self.log_scaled + sign * self.x


def _as_array(x, strict: bool, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name}: argument must be finite")
    if strict and np.any(arr <= 0.0):
        raise DomainError(f"{name}: argument must be > 0")
    if not strict and np.any(arr < 0.0):
        raise DomainError(f"{name}: argument must be >= 0")
    return arr


def _i_series(x: np.ndarray, order: int) -> np.ndarray:
    """Unscaled ascending series for I_order, x <= I_CROSSOVER."""
    q = 0.25 * x * x
    term = (0.5 * x) ** order / math.factorial(order)
    total = term.copy()
    for k in range(1, _MAX_TERMS):
        term = term * q / (k * (k + order))
        total += term
        if np.all(term <= _EPS * total):
            break
    return total


def _hankel_coeffs(order: int, n: int) -> list[float]:
    mu = 4.0 * order * order
    coeffs = [1.0]
    for k in range(1, n):
        coeffs.append(coeffs[-1] * (mu - (2 * k - 1) ** 2) / (k * 8.0))
    return coeffs


_HANKEL = {0: _hankel_coeffs(0, 80), 1: _hankel_coeffs(1, 80)}


def _hankel_sum(x: np.ndarray, order: int, alternating: bool) -> np.ndarray:
    total = np.ones_like(x)
    prev = np.ones_like(x)
    active = np.ones_like(x, dtype=bool)
    inv = 1.0 / x
    power = np.ones_like(x)
    for k, c in enumerate(_HANKEL[order][1:], start=1):
        power = power * inv
        term = ((-1) ** k if alternating else 1) * c * power
        # stop each lane at its smallest term: the expansion is asymptotic
        active &= np.abs(term) < np.abs(prev)
        total = np.where(active, total + term, total)
        prev = term
        if not np.any(active & (np.abs(term) > _EPS * np.abs(total))):
            break
    return total


def _i_asymptotic_scaled(x: np.ndarray, order: int) -> np.ndarray:
    """exp(-x) I_order(x) from the Hankel expansion, x > I_CROSSOVER."""
    return _hankel_sum(x, order, alternating=True) / np.sqrt(2.0 * math.pi * x)


def _k_asymptotic_scaled(x: np.ndarray, order: int) -> np.ndarray:
    """exp(x) K_order(x) from the Hankel expansion, x > K_ASYMPTOTIC."""
    return _hankel_sum(x, order, alternating=False) * np.sqrt(0.5 * math.pi / x)


def _k_series(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unscaled K0, K1 from the ascending series, 0 < x <= K_CROSSOVER."""
    q = 0.25 * x * x
    log_half = np.log(0.5 * x)
    i0 = _i_series(x, 0)
    i1 = _i_series(x, 1)
    # K0 = -(ln(x/2) + gamma) I0 + sum_k H_k q^k / (k!)^2
    # K1 = 1/x + ln(x/2) I1 - (x/4) sum_k [psi(k+1) + psi(k+2)] q^k / (k!(k+1)!)
    t0 = np.ones_like(x)
    t1 = np.ones_like(x)
    s0 = np.zeros_like(x)
    s1 = (1.0 - 2.0 * EULER_GAMMA) * t1  # psi(1) + psi(2) at k = 0
    harmonic = 0.0
    for k in range(1, _MAX_TERMS):
        harmonic += 1.0 / k
        t0 = t0 * q / (k * k)
        t1 = t1 * q / (k * (k + 1))
        s0 += harmonic * t0
        psi_sum = harmonic + (harmonic + 1.0 / (k + 1)) - 2.0 * EULER_GAMMA
        s1 += psi_sum * t1
        if np.all(t0 <= _EPS * np.abs(s0)) and np.all(t1 <= _EPS):
            break
    k0 = -(log_half + EULER_GAMMA) * i0 + s0
    k1 = 1.0 / x + log_half * i1 - 0.25 * x * s1
    return k0, k1


def _k_cf2_scaled(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """exp(x) K0, exp(x) K1 by Steed's continued fraction, x > K_CROSSOVER."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    for i in range(1, 10 * _MAX_TERMS):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels) < 1e-17 * np.abs(s)):
            break
    h = a1 * h
    k0e = np.sqrt(math.pi / (2.0 * x)) / s
    k1e = k0e * (x + 0.5 - h) / x
    return k0e, k1e


def i0e(x):
    """Exponentially scaled I0: exp(-x) I0(x)."""
    x = _as_array(x, strict=False, name="i0e")
    out = np.empty_like(x)
    small = x <= I_CROSSOVER
    out[small] = _i_series(x[small], 0) * np.exp(-x[small])
    out[~small] = _i_asymptotic_scaled(x[~small], 0)
    return out if out.ndim else float(out)


def i1e(x):
    """Exponentially scaled I1: exp(-x) I1(x)."""
    x = _as_array(x, strict=False, name="i1e")
    out = np.empty_like(x)
    small = x <= I_CROSSOVER
    out[small] = _i_series(x[small], 1) * np.exp(-x[small])
    out[~small] = _i_asymptotic_scaled(x[~small], 1)
    return out if out.ndim else float(out)


def _k_pair_scaled(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k0 = np.empty_like(x)
    k1 = np.empty_like(x)
    small = x <= K_CROSSOVER
    large = x > K_ASYMPTOTIC
    middle = ~small & ~large
    if np.any(small):
        a, b = _k_series(x[small])
        scale = np.exp(x[small])
        k0[small] = a * scale
        k1[small] = b * scale
    if np.any(middle):
        a, b = _k_cf2_scaled(x[middle])
        k0[middle] = a
        k1[middle] = b
    if np.any(large):
        k0[large] = _k_asymptotic_scaled(x[large], 0)
        k1[large] = _k_asymptotic_scaled(x[large], 1)
    return k0, k1


def k0e(x):
    """Exponentially scaled K0: exp(x) K0(x)."""
    x = _as_array(x, strict=True, name="k0e")
    out = _k_pair_scaled(np.atleast_1d(x))[0]
    return out if x.ndim else float(out[0])


def k1e(x):
    """Exponentially scaled K1: exp(x) K1(x)."""
    x = _as_array(x, strict=True, name="k1e")
    out = _k_pair_scaled(np.atleast_1d(x))[1]
    return out if x.ndim else float(out[0])


def bessel_scaled_all(u) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(i0e, i1e, k0e, k1e) at ``u`` in one pass; ``u`` must be > 0."""
    u = _as_array(u, strict=True, name="bessel_scaled_all")
    u1 = np.atleast_1d(u)
    k0, k1 = _k_pair_scaled(u1)
    return np.asarray(i0e(u1)), np.asarray(i1e(u1)), k0, k1


def i0(x):
    with np.errstate(over="ignore"):
        return i0e(x) * np.exp(x)


def i1(x):
    with np.errstate(over="ignore"):
        return i1e(x) * np.exp(x)


def k0(x):
    return k0e(x) * np.exp(-np.asarray(x, dtype=float))


def k1(x):
    return k1e(x) * np.exp(-np.asarray(x, dtype=float))


def _value(x: float, scaled: float, kind: str) -> BesselValue:
    log_scaled = math.log(scaled)
    sign = 1.0 if kind == "I" else -1.0
    exponent = log_scaled + sign * x
    natural = math.exp(exponent) if exponent < 709.78 else math.inf
    return BesselValue(x=float(x), natural=natural, log_scaled=log_scaled, kind=kind)


def _scalar(x, name: str, strict: bool) -> float:
    if not isinstance(x, (int, float, np.floating, np.integer)):
        raise DomainError(f"{name}: expected a real scalar, got {type(x).__name__}")
    return float(_as_array(x, strict=strict, name=name))


def bessel_i0(x: float) -> BesselValue:
    x = _scalar(x, "bessel_i0", strict=False)
    if x == 0.0:
        return BesselValue(x=0.0, natural=1.0, log_scaled=0.0, kind="I")
    return _value(x, i0e(x), "I")


def bessel_i1(x: float) -> BesselValue:
    x = _scalar(x, "bessel_i1", strict=False)
    if x == 0.0:
        return BesselValue(x=0.0, natural=0.0, log_scaled=-math.inf, kind="I")
    return _value(x, i1e(x), "I")


def bessel_k0(x: float) -> BesselValue:
    x = _scalar(x, "bessel_k0", strict=True)
    return _value(x, k0e(x), "K")


def bessel_k1(x: float) -> BesselValue:
    x = _scalar(x, "bessel_k1", strict=True)
    return _value(x, k1e(x), "K")
