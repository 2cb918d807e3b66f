"""Cohesive traction-separation law with history-dependent elastic unloading.

The interface carries a surface energy density ``psi(w, xi)`` built from a
concave envelope ``psi_hat`` of the opening ``w >= 0``:

* on the loading branch ``|w| >= xi`` the density follows the envelope,
  ``psi(w, xi) = psi_hat(|w|)``;
* inside the elastic domain ``|w| < xi`` unloading is linear, with secant
  stiffness ``c_xi = psi_hat'(xi) / xi`` set by the maximum opening ``xi``
  reached so far:  ``psi(w, xi) = psi_hat(xi) - psi_hat'(xi) (xi^2 - w^2) / (2 xi)``.

Admissibility of the envelope is expressed by four hypotheses used throughout
the package (validation errors name them):

* (H1)  ``psi_hat`` concave, ``psi_hat(0) = 0``, ``psi_hat > 0`` for ``w > 0``,
        constant for ``w >= xi_c``, with a positive activation slope
        ``psi_hat'(0) > 0``;
* (H2)  ``psi_hat`` is C1 on ``[0, inf)`` and C2 on ``[0, xi_c]``; in
        particular ``beta = -min psi_hat'' > 0`` (an exactly linear envelope
        is rejected);
* (H3)  ``psi_hat'`` is concave on ``[0, xi_c]`` (only recorded, not
        required);
* (H4)  a domain-dependent coercivity condition,
        ``mu * c_hat - beta > 0`` with ``c_hat`` the discrete trace constant
        (checked by the mesh/assembly layer, see
        :func:`cohesim.mesh.estimate_trace_constant`).

The density is even and nondecreasing in ``|w|``, nondecreasing in ``xi``,
and ``w -> psi(w, xi) + (beta/2) w^2`` is convex for every ``xi``.  The only
point of non-differentiability is the origin ``(w, xi) = (0, 0)``, where only
directional derivatives exist; they are handled by
:meth:`CohesiveLaw.dpsi_dw_directional`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HypothesisError",
    "PrototypeEnvelope",
    "TabulatedEnvelope",
    "LawConstants",
    "CohesiveLaw",
    "law_constants",
]


class HypothesisError(ValueError):
    """An envelope violates one of the admissibility hypotheses (H1)-(H2)."""


def _as_array(x):
    a = np.asarray(x, dtype=float)
    return a, (a.ndim == 0)


class PrototypeEnvelope:
    """Parabolic softening envelope.

    ``psi_hat(w) = g_c (w/xi_c) (2 - w/xi_c)`` for ``w <= xi_c`` and ``g_c``
    beyond, so the toughness ``g_c`` is reached exactly at the critical
    opening ``xi_c``.  Closed forms:

    * activation threshold  ``psi_hat'(0) = 2 g_c / xi_c``
    * curvature             ``psi_hat'' = -2 g_c / xi_c^2`` (constant), hence
      ``beta = 2 g_c / xi_c^2``
    * dissipated density    ``psi_d(xi) = (g_c / xi_c) xi`` capped at ``g_c``.
    """

    kind = "prototype"

    def __init__(self, g_c: float, xi_c: float):
        if g_c <= 0.0 or xi_c <= 0.0:
            raise HypothesisError("(H1) violated: prototype requires g_c > 0 and xi_c > 0")
        self.g_c = float(g_c)
        self.xi_c = float(xi_c)

    @property
    def psi_at_cap(self) -> float:
        return self.g_c

    def value(self, w):
        w, scalar = _as_array(w)
        x = np.minimum(w, self.xi_c) / self.xi_c
        v = self.g_c * x * (2.0 - x)
        return float(v) if scalar else v

    def slope(self, w):
        w, scalar = _as_array(w)
        s = np.where(w <= self.xi_c, 2.0 * (self.g_c / self.xi_c) * (1.0 - w / self.xi_c), 0.0)
        return float(s) if scalar else s

    def curvature(self, w):
        w, scalar = _as_array(w)
        c = np.where(w <= self.xi_c, -2.0 * self.g_c / self.xi_c**2, 0.0)
        return float(c) if scalar else c

    def beta(self) -> float:
        return 2.0 * self.g_c / self.xi_c**2


class TabulatedEnvelope:
    """Envelope given by samples ``(w_i, psi_hat_i, psi_hat'_i)`` on ``[0, xi_c]``.

    Evaluation uses the cubic Hermite interpolant of the sampled values and
    slopes, so validation (concavity, positivity) operates on the function
    actually used by the simulator.  Beyond ``xi_c`` the envelope is constant
    with zero slope.  Optional second-derivative samples are accepted for
    reference but the interpolant's own (piecewise-linear) second derivative
    defines the curvature.
    """

    kind = "tabulated"

    def __init__(self, w, psi, dpsi, d2psi=None):
        from scipy.interpolate import CubicHermiteSpline

        w = np.asarray(w, dtype=float)
        psi = np.asarray(psi, dtype=float)
        dpsi = np.asarray(dpsi, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise HypothesisError("(H2) violated: tabulated envelope needs >= 2 samples")
        if not (psi.shape == w.shape and dpsi.shape == w.shape):
            raise HypothesisError("(H2) violated: sample arrays must share one shape")
        if np.any(np.diff(w) <= 0.0):
            raise HypothesisError("(H2) violated: sample openings must be strictly increasing")
        if w[0] != 0.0:
            raise HypothesisError("(H1) violated: samples must start at w = 0")
        self.grid = w
        self.xi_c = float(w[-1])
        self._spline = CubicHermiteSpline(w, psi, dpsi)
        self._d1 = self._spline.derivative(1)
        self._d2 = self._spline.derivative(2)
        self.d2psi_samples = None if d2psi is None else np.asarray(d2psi, dtype=float)

    @property
    def psi_at_cap(self) -> float:
        return float(self._spline(self.xi_c))

    def value(self, w):
        w, scalar = _as_array(w)
        v = self._spline(np.minimum(w, self.xi_c))
        return float(v) if scalar else v

    def slope(self, w):
        # Left-limit convention at the cap: slope(xi_c) is the interpolant
        # slope, zero strictly beyond, so branch agreement at |w| = xi holds.
        w, scalar = _as_array(w)
        s = np.where(w <= self.xi_c, self._d1(np.minimum(w, self.xi_c)), 0.0)
        return float(s) if scalar else s

    def curvature(self, w):
        w, scalar = _as_array(w)
        c = np.where(w <= self.xi_c, self._d2(np.minimum(w, self.xi_c)), 0.0)
        return float(c) if scalar else c

    def beta(self) -> float:
        return -_min_curvature(self)


def _golden_min(f, a: float, b: float, tol: float = 1e-10) -> float:
    """Golden-section search for the minimizer of ``f`` on ``[a, b]``."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def _min_curvature(env) -> float:
    """Minimum of ``psi_hat''`` over ``[0, xi_c]``.

    A coarse grid scan (plus spline knots when available) brackets the
    minimum, then golden-section search polishes it to 1e-10.
    """
    candidates = np.linspace(0.0, env.xi_c, 257)
    knots = getattr(env, "grid", None)
    if knots is not None:
        candidates = np.unique(np.concatenate([candidates, knots]))
    vals = env.curvature(candidates)
    i = int(np.argmin(vals))
    lo = candidates[max(i - 1, 0)]
    hi = candidates[min(i + 1, candidates.size - 1)]
    if hi > lo:
        x = _golden_min(lambda t: float(env.curvature(t)), float(lo), float(hi))
        return float(min(vals[i], env.curvature(x)))
    return float(vals[i])


@dataclass(frozen=True)
class LawConstants:
    """Derived constants of an admissible envelope.

    beta          -beta is the minimum of psi_hat'' on [0, xi_c]; beta > 0.
    psi_prime_0   activation threshold psi_hat'(0) (maximum traction).
    lambda_conv   convexity offset in the opening variable, set to -beta/2:
                  w -> psi(w, xi) - lambda_conv * w^2 is convex for all xi.
    h3_holds      True when psi_hat' is concave on [0, xi_c].
    """

    beta: float
    psi_prime_0: float
    lambda_conv: float
    h3_holds: bool


def validate_envelope(env, n_samples: int = 513) -> None:
    """Check (H1)/(H2) on a sample grid; raise :class:`HypothesisError` naming
    the violated hypothesis."""
    xi_c = env.xi_c
    if xi_c <= 0.0:
        raise HypothesisError("(H1) violated: critical opening xi_c must be positive")
    tol = 1e-10 * max(1.0, abs(env.psi_at_cap))
    if abs(env.value(0.0)) > tol:
        raise HypothesisError("(H1) violated: psi_hat(0) != 0")
    ws = np.linspace(0.0, xi_c, n_samples)
    vals = env.value(ws)
    if np.any(vals[1:] <= 0.0):
        raise HypothesisError("(H1) violated: psi_hat must be positive for w > 0")
    slopes = env.slope(ws)
    if np.any(slopes < -tol):
        raise HypothesisError("(H1) violated: psi_hat' must be nonnegative on [0, xi_c]")
    if np.any(np.diff(slopes) > tol):
        raise HypothesisError("(H1) violated: psi_hat not concave (psi_hat' increases)")
    if env.slope(0.0) <= 0.0:
        raise HypothesisError("(H1) violated: activation threshold psi_hat'(0) must be positive")
    for w_far in (1.5 * xi_c, 3.0 * xi_c):
        if abs(env.value(w_far) - env.psi_at_cap) > tol or env.slope(w_far) != 0.0:
            raise HypothesisError("(H1) violated: psi_hat must be constant beyond xi_c")
    if -_min_curvature(env) <= 0.0:
        raise HypothesisError(
            "(H2) violated: beta = -min psi_hat'' must be positive (linear envelope)"
        )


def law_constants(env) -> LawConstants:
    """Validate ``env`` and compute its derived constants."""
    validate_envelope(env)
    beta = env.beta() if hasattr(env, "beta") else -_min_curvature(env)
    psi_prime_0 = float(env.slope(0.0))
    # h3: discrete midpoint concavity of psi_hat' on [0, xi_c]
    ws = np.linspace(0.0, env.xi_c, 257)
    mid = env.slope(0.5 * (ws[:-1] + ws[1:]))
    chord = 0.5 * (env.slope(ws[:-1]) + env.slope(ws[1:]))
    h3 = bool(np.all(mid >= chord - 1e-10 * max(1.0, psi_prime_0)))
    return LawConstants(beta=float(beta), psi_prime_0=psi_prime_0,
                        lambda_conv=-0.5 * float(beta), h3_holds=h3)


class CohesiveLaw:
    """Evaluates the density ``psi`` and its derivatives for one envelope.

    Immutable after construction; every method accepts scalars or numpy
    arrays (broadcast together) and is safe for concurrent reads.
    """

    def __init__(self, envelope):
        validate_envelope(envelope)
        self.env = envelope
        self._constants = law_constants(envelope)

    # -- constants ---------------------------------------------------------

    @property
    def constants(self) -> LawConstants:
        return self._constants

    @property
    def beta(self) -> float:
        return self._constants.beta

    @property
    def psi_prime_0(self) -> float:
        return self._constants.psi_prime_0

    @property
    def xi_c(self) -> float:
        return self.env.xi_c

    # -- density and derivatives -------------------------------------------

    def psi(self, w, xi):
        """Density ``psi(w, xi)``; even in ``w``, nondecreasing in ``|w|`` and ``xi``."""
        w, sw = _as_array(w)
        xi, sx = _as_array(xi)
        if np.any(xi < 0.0):
            raise ValueError("history variable xi must be nonnegative")
        w, xi = np.broadcast_arrays(w, xi)
        aw = np.abs(w)
        loading = aw >= xi
        # guard: the unloading formula divides by xi; on the loading branch
        # the guarded value is discarded by np.where
        xi_safe = np.where(loading, 1.0, xi)
        unload = self.env.value(xi) - self.env.slope(xi) * (xi**2 - w**2) / (2.0 * xi_safe)
        out = np.where(loading, self.env.value(aw), unload)
        return float(out) if (sw and sx) else out

    def dpsi_dw(self, w, xi):
        """Partial derivative in the opening; undefined at the origin.

        Elastic branch ``|w| <= xi``: secant stiffness ``c_xi * w``; loading
        branch: ``psi_hat'(|w|) sign(w)``.  The branches agree on
        ``|w| = xi != 0``; at ``(0, 0)`` only directional derivatives exist
        and a ValueError points to :meth:`dpsi_dw_directional`.
        """
        w, sw = _as_array(w)
        xi, sx = _as_array(xi)
        if np.any(xi < 0.0):
            raise ValueError("history variable xi must be nonnegative")
        w, xi = np.broadcast_arrays(w, xi)
        if np.any((w == 0.0) & (xi == 0.0)):
            raise ValueError(
                "dpsi_dw is undefined at (w, xi) = (0, 0); "
                "use dpsi_dw_directional for the one-sided slopes"
            )
        aw = np.abs(w)
        elastic = aw <= xi  # tie |w| = xi resolved to the elastic branch (values agree)
        xi_safe = np.where(elastic, np.maximum(xi, 1e-300), 1.0)
        out = np.where(elastic,
                       (self.env.slope(xi) / xi_safe) * w,
                       self.env.slope(aw) * np.sign(w))
        return float(out) if (sw and sx) else out

    def dpsi_dw_directional(self, w, xi, phi):
        """Directional derivative of ``psi(., xi)`` at ``w`` in direction ``phi``.

        Positively 1-homogeneous in ``phi``; equals ``dpsi_dw * phi`` away
        from the origin and ``psi_hat'(0) |phi|`` at ``(0, 0)``; bounded by
        ``psi_hat'(0) |phi|`` everywhere.
        """
        w, sw = _as_array(w)
        xi, sx = _as_array(xi)
        phi, sp = _as_array(phi)
        w, xi, phi = np.broadcast_arrays(w, xi, phi)
        origin = (w == 0.0) & (xi == 0.0)
        w_safe = np.where(origin, 1.0, w)
        xi_safe = np.where(origin, 1.0, xi)
        aw = np.abs(w_safe)
        elastic = aw <= xi_safe
        xi_div = np.where(elastic, np.maximum(xi_safe, 1e-300), 1.0)
        smooth = np.where(elastic,
                          (self.env.slope(xi_safe) / xi_div) * w_safe,
                          self.env.slope(aw) * np.sign(w_safe)) * phi
        out = np.where(origin, self.env.slope(0.0) * np.abs(phi), smooth)
        return float(out) if (sw and sx and sp) else out

    def dpsi_dxi(self, w, xi):
        """One-sided derivative of ``psi`` in the history variable (always >= 0).

        Nonzero only strictly inside the elastic cone below the cap
        (``|w| < xi < xi_c``); at the origin it returns the directional slope
        ``psi_hat'(0) / 2`` per unit increment.  On ``|w| = xi > 0``, at
        ``xi = xi_c`` (right derivative) and beyond the cap it vanishes.
        """
        w, sw = _as_array(w)
        xi, sx = _as_array(xi)
        if np.any(xi < 0.0):
            raise ValueError("history variable xi must be nonnegative")
        w, xi = np.broadcast_arrays(w, xi)
        origin = (w == 0.0) & (xi == 0.0)
        aw = np.abs(w)
        inside = (aw < xi) & (xi < self.env.xi_c)
        xi_safe = np.where(inside, np.maximum(xi, 1e-300), 1.0)
        val = 0.5 * (self.env.slope(xi) - self.env.curvature(xi) * xi) \
            * (xi**2 - w**2) / xi_safe**2
        out = np.where(inside, val, 0.0)
        out = np.where(origin, 0.5 * self.env.slope(0.0), out)
        return float(out) if (sw and sx) else out

    def psi_d(self, xi):
        """Dissipated part ``psi_d(xi) = psi(0, xi)`` (nondecreasing)."""
        # evaluated through psi so the stored part cancels exactly at w = 0
        return self.psi(0.0, xi)

    def split(self, w, xi):
        """Stored/dissipated split ``psi = psi_s + psi_d`` with ``psi_d = psi(0, xi)``."""
        total = self.psi(w, xi)
        diss = self.psi_d(xi)
        return total - diss, diss

    def secant_stiffness(self, xi):
        """Unloading stiffness ``c_xi = psi_hat'(xi) / xi`` (requires ``xi > 0``)."""
        xi, sx = _as_array(xi)
        if np.any(xi <= 0.0):
            raise ValueError("secant stiffness requires xi > 0")
        out = self.env.slope(xi) / xi
        return float(out) if sx else out
