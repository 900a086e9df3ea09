"""Efficiency, dynamic-similarity scaling, rated-power extraction and
power-law fitting for torque/power data.

The similarity relations map a laboratory turbine to a scaled one through
geometry, time and density factors (lambda_l, lambda_t, lambda_rho):

    M -> lambda_rho * lambda_l^5 / lambda_t^2 * M
    P -> lambda_rho * lambda_l^5 / lambda_t^3 * P
    w -> w / lambda_t

With lambda_rho = 1 and lambda_t = lambda_l / lambda_v (the wind-speed scale)
these compose to P -> lambda_l^2 lambda_v^3 P and M -> lambda_l^3 lambda_v^2 M.
The viscosity-scaling relation lambda_l^2 / lambda_t = 1 over-determines the
system; it is reported as a diagnostic mismatch, never enforced, since the
viscous term is negligible at the Reynolds numbers of interest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteInput, SchemaError, TooFewSamples, ZeroWind
from .fileio import atomic_write_text

BETZ_LIMIT = 0.593


@dataclass(frozen=True)
class ScalingParams:
    """Similarity scale factors; lambda_v defaults to lambda_l / lambda_t."""

    lambda_l: float = 1.0
    lambda_t: float = 1.0
    lambda_rho: float = 1.0
    lambda_v: float | None = None

    def __post_init__(self):
        if not (self.lambda_l > 0 and self.lambda_t > 0 and self.lambda_rho > 0):
            raise ValueError("scale factors must be strictly positive")
        if self.lambda_v is None:
            object.__setattr__(self, "lambda_v", self.lambda_l / self.lambda_t)
        elif not self.lambda_v > 0:
            raise ValueError("lambda_v must be strictly positive")

    @property
    def viscosity_mismatch(self) -> float:
        """Factor by which the kinematic-viscosity relation lambda_l^2 /
        lambda_t = 1 is violated (1 means exact similarity)."""
        return self.lambda_l**2 / self.lambda_t


@dataclass(frozen=True)
class OperatingPoint:
    """One turbine state: torque [N m], rotor speed [rad/s], wind speed
    [m/s], air density [kg/m^3], swept area [m^2]."""

    torque: float
    angular_velocity: float
    wind_speed: float
    rho: float = 1.225
    area: float = 3.0

    def __post_init__(self):
        vals = (self.torque, self.angular_velocity, self.wind_speed, self.rho, self.area)
        if not all(math.isfinite(v) for v in vals):
            raise NonFiniteInput("operating point has non-finite components")
        if self.rho <= 0 or self.area <= 0:
            raise ValueError("rho and area must be positive")
        if self.wind_speed < 0 or self.angular_velocity < 0:
            raise ValueError("wind speed and rotor speed must be nonnegative")


@dataclass(frozen=True)
class EfficiencyResult:
    eta: float
    betz_exceeded: bool


def efficiency(op: OperatingPoint) -> EfficiencyResult:
    """Power efficiency eta = M w / (0.5 rho A V^3), flagged when it exceeds
    the Betz limit 0.593 (physically impossible input)."""
    if op.wind_speed == 0.0:
        raise ZeroWind("efficiency is undefined at zero wind speed")
    eta = (op.torque * op.angular_velocity) / (
        0.5 * op.rho * op.area * op.wind_speed**3
    )
    return EfficiencyResult(eta=eta, betz_exceeded=eta > BETZ_LIMIT)


def scale_torque_power(torque: float, angular_velocity: float, s: ScalingParams) -> tuple:
    """Similarity-scaled (torque, power); the scaled rotor speed is
    angular_velocity / lambda_t."""
    m_scale = s.lambda_rho * s.lambda_l**5 / s.lambda_t**2
    p_scale = s.lambda_rho * s.lambda_l**5 / s.lambda_t**3
    return (m_scale * torque, p_scale * torque * angular_velocity)


def similarity_from_speed(lambda_l: float, lambda_v: float) -> ScalingParams:
    """Resolve the similarity factors from geometry and wind-speed scales:
    lambda_rho = 1, lambda_t = lambda_l / lambda_v.  The returned params
    carry the viscosity mismatch lambda_l * lambda_v as a diagnostic."""
    if not (lambda_l > 0 and lambda_v > 0):
        raise ValueError("lambda_l and lambda_v must be strictly positive")
    return ScalingParams(
        lambda_l=lambda_l,
        lambda_t=lambda_l / lambda_v,
        lambda_rho=1.0,
        lambda_v=lambda_v,
    )


@dataclass(frozen=True)
class TorqueCurve:
    """Sampled mean torque vs rotor speed at fixed wind conditions."""

    omega: tuple
    torque: tuple
    wind_speed: float | None = None
    lambda_l: float | None = None

    def __post_init__(self):
        if len(self.omega) < 2:
            raise TooFewSamples("torque curve needs at least 2 samples")
        if len(self.omega) != len(self.torque):
            raise ValueError("omega and torque lengths differ")
        w = np.asarray(self.omega, dtype=float)
        m = np.asarray(self.torque, dtype=float)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(m))):
            raise NonFiniteInput("torque curve has non-finite samples")
        if not np.all(w > 0):
            raise ValueError("rotor speeds must be positive")
        if not np.all(np.diff(w) > 0):
            raise ValueError("rotor speeds must be strictly increasing")


@dataclass(frozen=True)
class RatedPower:
    power: float
    omega: float
    torque: float


def rated_power(curve: TorqueCurve) -> RatedPower:
    """Maximum of P(w) = w * M(w) along the piecewise-linear interpolant.

    Per segment P is a quadratic in w, so the maximum is found in closed
    form; geometrically this is where a constant-power hyperbola is tangent
    to the torque-speed curve.  Ties resolve to the lowest rotor speed.
    """
    w = np.asarray(curve.omega, dtype=float)
    m = np.asarray(curve.torque, dtype=float)
    best = None
    for i in range(len(w) - 1):
        w1, w2 = w[i], w[i + 1]
        m1, m2 = m[i], m[i + 1]
        b = (m2 - m1) / (w2 - w1)
        a = m1 - b * w1  # M(x) = a + b x on the segment
        candidates = [w1, w2]
        if b != 0.0:
            wc = -a / (2.0 * b)
            if w1 < wc < w2:
                candidates.append(wc)
        for wx in candidates:
            mx = a + b * wx
            p = wx * mx
            if best is None or p > best.power or (p == best.power and wx < best.omega):
                best = RatedPower(power=float(p), omega=float(wx), torque=float(mx))
    return best


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares fit of value = prefactor * lambda_l^a * lambda_v^b in
    log space.  ``dropped`` names coefficients removed because the data had
    no variation in that coordinate; ``negative_indices`` records samples
    whose sign was folded by an absolute value."""

    prefactor: float
    exponent_l: float
    exponent_v: float
    residual: float
    dropped: tuple = ()
    negative_indices: tuple = ()


def fit_power_law(points) -> PowerLawFit:
    """Ordinary least squares on log(value) = log(c) + a log(lambda_l)
    + b log(lambda_v).

    ``points`` is an iterable of (lambda_l, lambda_v, value) with value > 0.
    A coefficient whose column is constant across the data cannot be
    identified; it is dropped (set to 0) and flagged.
    """
    pts = [(float(a), float(b), float(v)) for a, b, v in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    ll = np.array([p[0] for p in pts])
    lv = np.array([p[1] for p in pts])
    val = np.array([p[2] for p in pts])
    if np.any(ll <= 0) or np.any(lv <= 0):
        raise ValueError("scale factors must be strictly positive")
    if np.any(val <= 0):
        raise ValueError("values must be strictly positive for a log-space fit")
    log_l, log_v, log_y = np.log(ll), np.log(lv), np.log(val)

    cols = [np.ones_like(log_y)]
    active = []
    dropped = []
    for name, col in (("exponent_l", log_l), ("exponent_v", log_v)):
        if np.ptp(col) == 0.0:
            dropped.append(name)
        else:
            active.append(name)
            cols.append(col)
    design = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(design, log_y, rcond=None)
    resid = design @ coef - log_y
    out = {"exponent_l": 0.0, "exponent_v": 0.0}
    for name, c in zip(active, coef[1:]):
        out[name] = float(c)
    return PowerLawFit(
        prefactor=float(np.exp(coef[0])),
        exponent_l=out["exponent_l"],
        exponent_v=out["exponent_v"],
        residual=float(np.sqrt(np.mean(resid**2))),
        dropped=tuple(dropped),
    )


def rated_torque_law(points) -> PowerLawFit:
    """Power-law fit for rated torque: identical mechanics applied to |M|,
    with the indices of negative-torque samples recorded."""
    pts = [(float(a), float(b), float(v)) for a, b, v in points]
    negative = tuple(i for i, p in enumerate(pts) if p[2] < 0)
    fit = fit_power_law([(a, b, abs(v)) for a, b, v in pts])
    return PowerLawFit(
        prefactor=fit.prefactor,
        exponent_l=fit.exponent_l,
        exponent_v=fit.exponent_v,
        residual=fit.residual,
        dropped=fit.dropped,
        negative_indices=negative,
    )


def write_torque_curve_csv(curve: TorqueCurve, path):
    lines = []
    if curve.wind_speed is not None:
        lines.append(f"# wind_speed={curve.wind_speed!r}")
    if curve.lambda_l is not None:
        lines.append(f"# lambda_l={curve.lambda_l!r}")
    lines.append("omega_rad_s,torque_Nm")
    for w, m in zip(curve.omega, curve.torque):
        lines.append(f"{w!r},{m!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_torque_curve_csv(path) -> TorqueCurve:
    meta = {}
    rows = []
    with open(path) as fh:
        lineno = 0
        header_seen = False
        for ln in fh:
            lineno += 1
            ln = ln.strip()
            if not ln:
                continue
            if ln.startswith("#"):
                body = ln[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    meta[k.strip()] = v.strip()
                continue
            if not header_seen:
                if [c.strip() for c in ln.split(",")] != ["omega_rad_s", "torque_Nm"]:
                    raise SchemaError(
                        "header must be omega_rad_s,torque_Nm", path=path, line=lineno
                    )
                header_seen = True
                continue
            cells = ln.split(",")
            if len(cells) != 2:
                raise SchemaError("expected 2 fields", path=path, line=lineno)
            try:
                rows.append((float(cells[0]), float(cells[1])))
            except ValueError:
                raise SchemaError("non-numeric value", path=path, line=lineno) from None
    if not header_seen:
        raise SchemaError("missing header omega_rad_s,torque_Nm", path=path, line=1)
    return TorqueCurve(
        omega=tuple(r[0] for r in rows),
        torque=tuple(r[1] for r in rows),
        wind_speed=float(meta["wind_speed"]) if "wind_speed" in meta else None,
        lambda_l=float(meta["lambda_l"]) if "lambda_l" in meta else None,
    )


def read_power_law_csv(path):
    """Read (lambda_l, lambda_v, value) triples from the fit-input schema."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or [c.strip() for c in lines[0].split(",")] != ["lambda_l", "lambda_v", "value"]:
        raise SchemaError("header must be lambda_l,lambda_v,value", path=path, line=1)
    pts = []
    for lineno, ln in enumerate(lines[1:], start=2):
        cells = ln.split(",")
        if len(cells) != 3:
            raise SchemaError("expected 3 fields", path=path, line=lineno)
        try:
            pts.append(tuple(float(c) for c in cells))
        except ValueError:
            raise SchemaError("non-numeric value", path=path, line=lineno) from None
    return pts
