"""Ordering policies and the normal safety factor.

A policy instance holds its own tuning (``alpha``, ``quantity``) and is bound to
lead times and service fractiles with :meth:`OrderingPolicy.bind`.  Bound
parameters may be scalars or length-K arrays, so ``compute_order`` broadcasts
over an (N, K) state in the batch engine and works on floats in the serial one.
"""

from __future__ import annotations

import copy
import math

import numpy as np


class PolicyError(ValueError):
    pass


# Acklam's rational approximation to the normal quantile (relative error < 1.15e-9).
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
        (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def safety_factor(fractile: float) -> float:
    """Inverse standard normal CDF, refined with one Halley step."""
    p = float(fractile)
    if not 0.0 < p < 1.0:
        raise PolicyError(f"fractile must lie in (0, 1), got {fractile}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        # odd symmetry keeps z(1-p) == -z(p) exactly
        return -safety_factor(1.0 - p)
    x = _acklam(p)
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


class OrderingPolicy:
    """Base class.  Subclasses implement :meth:`compute_order`."""

    #: Stateful policies receive the previous order as a fourth argument.
    stateful = False

    def __init__(self, lead_time=None, service_level=None):
        self.lead_time = None
        self.z_alpha = None
        if lead_time is not None:
            self._set(lead_time, 0.5 if service_level is None else service_level)

    def _set(self, lead_time, service_level):
        L = np.asarray(lead_time)
        if np.any(L < 1):
            raise PolicyError("lead_time must be >= 1")
        frac = np.asarray(service_level, dtype=float)
        z = np.vectorize(safety_factor, otypes=[float])(frac) if frac.ndim else safety_factor(float(frac))
        self.lead_time = L if L.ndim else int(L)
        self.z_alpha = z
        self._cover = np.sqrt(np.asarray(L, dtype=float) + 1.0) if L.ndim else math.sqrt(int(L) + 1.0)

    def bind(self, lead_time, service_level) -> "OrderingPolicy":
        """Copy of this policy bound to lead time(s) and critical fractile(s)."""
        bound = copy.copy(self)
        bound._set(lead_time, service_level)
        return bound

    def order_up_to_level(self, fm, fs):
        if self.lead_time is None:
            raise PolicyError(f"{type(self).__name__} is not bound to a lead time")
        return (self.lead_time + 1) * fm + self.z_alpha * fs * self._cover

    def compute_order(self, ip, fm, fs, previous_order=None):
        raise NotImplementedError

    def params(self) -> dict:
        return {}


class OrderUpTo(OrderingPolicy):
    def compute_order(self, ip, fm, fs, previous_order=None):
        return np.maximum(0.0, self.order_up_to_level(fm, fs) - ip)


class ProportionalOUT(OrderingPolicy):
    """alpha times the truncated OUT gap; alpha = 1 is plain OUT."""

    def __init__(self, alpha: float = 0.3, lead_time=None, service_level=None):
        if not 0.0 < alpha <= 1.0:
            raise PolicyError(f"alpha must lie in (0, 1], got {alpha}")
        super().__init__(lead_time, service_level)
        self.alpha = float(alpha)

    def compute_order(self, ip, fm, fs, previous_order=None):
        return self.alpha * np.maximum(0.0, self.order_up_to_level(fm, fs) - ip)

    def params(self):
        return {"alpha": self.alpha}


class SmoothingOUT(OrderingPolicy):
    """Exponentially smoothed OUT orders: beta * O_out + (1 - beta) * O_prev."""

    stateful = True

    def __init__(self, alpha: float = 0.3, lead_time=None, service_level=None):
        if not 0.0 < alpha <= 1.0:
            raise PolicyError(f"alpha must lie in (0, 1], got {alpha}")
        super().__init__(lead_time, service_level)
        self.alpha = float(alpha)

    def compute_order(self, ip, fm, fs, previous_order=0.0):
        out = np.maximum(0.0, self.order_up_to_level(fm, fs) - ip)
        return self.alpha * out + (1.0 - self.alpha) * previous_order

    def params(self):
        return {"alpha": self.alpha}


class ConstantOrder(OrderingPolicy):
    """Fixed quantity every period.  ``quantity=None`` means the demand prior mean."""

    stateful = True  # needs the prior mean, which the engine passes as previous_order

    def __init__(self, quantity: float | None = None, lead_time=None, service_level=None):
        if quantity is not None and quantity < 0:
            raise PolicyError("quantity must be nonnegative")
        super().__init__(lead_time, service_level)
        self.quantity = None if quantity is None else float(quantity)

    def compute_order(self, ip, fm, fs, previous_order=0.0):
        q = previous_order if self.quantity is None else self.quantity
        return np.zeros_like(np.asarray(ip, dtype=float)) + q

    def params(self):
        return {"quantity": self.quantity}


def out_level(lead_time: int, fractile: float, fm: float, fs: float) -> float:
    if fs < 0:
        raise PolicyError("forecast std must be nonnegative")
    return float(OrderUpTo(lead_time, fractile).order_up_to_level(fm, fs))


def out_order(lead_time, fractile, ip, fm, fs) -> float:
    return float(OrderUpTo(lead_time, fractile).compute_order(ip, fm, fs))


def pout_order(lead_time, fractile, alpha, ip, fm, fs) -> float:
    return float(ProportionalOUT(alpha, lead_time, fractile).compute_order(ip, fm, fs))


def smoothing_out_order(lead_time, fractile, beta, ip, fm, fs, previous_order=0.0) -> float:
    return float(SmoothingOUT(beta, lead_time, fractile).compute_order(ip, fm, fs, previous_order))


def constant_order(quantity: float) -> float:
    return float(ConstantOrder(quantity).compute_order(0.0, 0.0, 0.0))
