"""Six-parameter turbine geometry: design vector, feasible region, sampling.

The design vector collects the blade curvature, deflector curvature, the
deflector standoff distance, the rotor-to-rotor gap, the deflector size and
the relative rotor phase angle.  All lengths are dimensionless multiples of
the rotor height scale; curvatures are reciprocal lengths on the same scale;
the phase angle is stored in degrees and converted to radians only inside
trigonometric evaluation.

The feasible region is a box with one coupled product bound on the deflector
(kappa_d * L_d) plus two closed-form collision clearances: the deflector
corners must clear both rotor circles, and the blades of the two rotors must
clear each other at the closest phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ExhaustedRejection, NonFiniteInput, SchemaError
from .fileio import atomic_write_text

# Fixed rotor geometry on the height-normalized scale: the rotor diameter is
# 0.44 and the blade half-chord is 0.19.  These enter the collision clearances
# only; they are not design variables.
ROTOR_DIAMETER = 0.44
BLADE_HALF_CHORD = 0.19

# Strict lower bound 0 < alpha implemented as a closed bound at this epsilon
# so samplers and optimizers work on a closed box.
ALPHA_MIN_DEG = 1e-9

POINT_FIELDS = ("kappa_r", "kappa_d", "L_dr", "L_rr", "L_d", "alpha_deg")

# >= 9 significant digits required by the on-disk schema; 12 round-trips
# cleanly through parse/format cycles.
_FLOAT_FMT = "%.12g"


def format_float(v: float) -> str:
    return _FLOAT_FMT % v


@dataclass(frozen=True)
class DesignPoint:
    """One candidate turbine geometry.

    Fields (in canonical CSV column order): blade mean curvature ``kappa_r``,
    deflector curvature ``kappa_d``, deflector-to-rotor-plane distance
    ``L_dr``, rotor-to-rotor distance ``L_rr``, deflector corner-to-corner
    size ``L_d``, and relative rotor phase ``alpha_deg`` in degrees.
    """

    kappa_r: float
    kappa_d: float
    L_dr: float
    L_rr: float
    L_d: float
    alpha_deg: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.kappa_r, self.kappa_d, self.L_dr, self.L_rr, self.L_d, self.alpha_deg],
            dtype=float,
        )

    @classmethod
    def from_array(cls, a) -> "DesignPoint":
        vals = [float(v) for v in a]
        if len(vals) != 6:
            raise ValueError(f"expected 6 components, got {len(vals)}")
        return cls(*vals)

    def replace(self, **kw) -> "DesignPoint":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kw)
        return DesignPoint(**d)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_array())))

    def row_key(self) -> tuple:
        """Identity of this point at stored (CSV) precision."""
        return tuple(format_float(v) for v in self.as_array())


@dataclass(frozen=True)
class DesignSpaceBounds:
    """Box intervals plus the coupled deflector bound 0.1 <= kappa_d*L_d < 1.

    ``kappa_d`` has no standalone interval; its admissible range at a given
    point is derived from ``L_d`` through the product bound.  ``alpha`` is
    handled as a closed interval [ALPHA_MIN_DEG, 45].
    """

    kappa_r: tuple = (1.0, 5.26)
    L_rr: tuple = (0.7, 1.5)
    L_d: tuple = (0.1, 1.3)
    L_dr: tuple = (0.2, 1.0)
    kappa_d_L_d: tuple = (0.1, 1.0)  # upper end exclusive
    alpha_deg: tuple = (ALPHA_MIN_DEG, 45.0)

    def __post_init__(self):
        for f in fields(self):
            lo, hi = getattr(self, f.name)
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise NonFiniteInput(f"bounds for {f.name} are not finite")
            if not lo < hi:
                raise ValueError(f"bounds for {f.name}: lower {lo} must be < upper {hi}")

    @classmethod
    def default(cls) -> "DesignSpaceBounds":
        return cls()

    @classmethod
    def extended(cls) -> "DesignSpaceBounds":
        """Evaluation preset covering the wider contour-study ranges of
        the rotor gap and deflector size."""
        return cls(L_rr=(0.36, 1.6), L_d=(0.15, 1.35))

    @classmethod
    def preset(cls, name: str) -> "DesignSpaceBounds":
        if name == "default":
            return cls.default()
        if name == "extended":
            return cls.extended()
        raise ValueError(f"unknown bounds preset {name!r}")

    def kappa_d_interval(self) -> tuple:
        """Widest kappa_d range compatible with the product bound over the
        whole L_d interval; used for standardization and search steps."""
        p_lo, p_hi = self.kappa_d_L_d
        return (p_lo / self.L_d[1], p_hi / self.L_d[0])

    def coordinate_intervals(self) -> tuple:
        """Per-coordinate intervals in canonical field order."""
        return (
            self.kappa_r,
            self.kappa_d_interval(),
            self.L_dr,
            self.L_rr,
            self.L_d,
            self.alpha_deg,
        )

    def standardize(self, x: DesignPoint) -> np.ndarray:
        """Affine map of each coordinate onto [0, 1] over its interval."""
        arr = x.as_array()
        lo = np.array([iv[0] for iv in self.coordinate_intervals()])
        hi = np.array([iv[1] for iv in self.coordinate_intervals()])
        return (arr - lo) / (hi - lo)


@dataclass(frozen=True)
class Violation:
    name: str
    slack: float


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple

    def names(self) -> tuple:
        return tuple(v.name for v in self.violations)


def check_feasible(x: DesignPoint, bounds: DesignSpaceBounds | None = None) -> FeasibilityReport:
    """Evaluate every box and collision constraint at ``x``.

    Each violated constraint appears once, with slack = (left side - threshold)
    in the constraint's natural orientation, so slack is negative (or zero for
    strict inequalities) exactly when the constraint fails.  Pure function of
    its inputs.
    """
    if bounds is None:
        bounds = DesignSpaceBounds.default()
    if not x.is_finite():
        raise NonFiniteInput("design point has non-finite components")

    viol = []

    def box(name, value, lo, hi):
        if value < lo:
            viol.append(Violation(f"{name}_lower", value - lo))
        elif value > hi:
            viol.append(Violation(f"{name}_upper", hi - value))

    box("kappa_r", x.kappa_r, *bounds.kappa_r)
    box("L_rr", x.L_rr, *bounds.L_rr)
    box("L_d", x.L_d, *bounds.L_d)
    box("L_dr", x.L_dr, *bounds.L_dr)

    product = x.kappa_d * x.L_d
    p_lo, p_hi = bounds.kappa_d_L_d
    if product < p_lo:
        viol.append(Violation("kappa_d_L_d_lower", product - p_lo))
    elif product >= p_hi:  # strict upper bound
        viol.append(Violation("kappa_d_L_d_upper", p_hi - product))

    a_lo, a_hi = bounds.alpha_deg
    if x.alpha_deg < a_lo:
        viol.append(Violation("alpha_lower", x.alpha_deg - a_lo))
    elif x.alpha_deg > a_hi:
        viol.append(Violation("alpha_upper", a_hi - x.alpha_deg))

    # Deflector corners must clear the rotor circles (strict inequality).
    clearance_sq = 0.25 * (x.L_rr - x.L_d) ** 2 + x.L_dr**2
    threshold_sq = ROTOR_DIAMETER**2
    if clearance_sq <= threshold_sq:
        viol.append(Violation("deflector_rotor_collision", clearance_sq - threshold_sq))

    # Blade tips of the counter-rotating rotors must clear each other.  The
    # radicand is nonnegative throughout the default box (1/5.26 > 0.19); for
    # out-of-box curvatures it is clamped at zero and flagged rather than
    # crashing.
    inv_kr = 1.0 / x.kappa_r
    radicand = inv_kr * inv_kr - BLADE_HALF_CHORD**2
    if radicand < 0.0:
        viol.append(Violation("curvature_geometry", radicand))
        radicand = 0.0
    blade_reach = inv_kr - math.sqrt(radicand)
    lhs = x.L_rr * math.cos(math.radians(45.0 - x.alpha_deg / 2.0)) - blade_reach
    if lhs <= ROTOR_DIAMETER:
        viol.append(Violation("rotor_rotor_collision", lhs - ROTOR_DIAMETER))

    return FeasibilityReport(feasible=not viol, violations=tuple(viol))


# Rejection guard: abort when a full window of draws yields no acceptance,
# i.e. the acceptance rate has fallen below 1/window.
_REJECTION_WINDOW = 10_000


def sample_feasible(bounds: DesignSpaceBounds, n: int, seed: int) -> list:
    """Draw ``n`` feasible points, uniformly over the box with rejection.

    kappa_d is drawn uniformly on its per-point interval derived from the
    sampled L_d, which realizes the coupled product bound by construction;
    the collision constraints are handled by rejection.  Deterministic for a
    fixed seed; the RNG is private to the call.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    p_lo, p_hi = bounds.kappa_d_L_d
    out = []
    draws_since_accept = 0
    while len(out) < n:
        if draws_since_accept >= _REJECTION_WINDOW:
            raise ExhaustedRejection(
                f"no feasible point in {_REJECTION_WINDOW} consecutive draws; "
                "bounds are likely malformed"
            )
        kappa_r = rng.uniform(*bounds.kappa_r)
        L_dr = rng.uniform(*bounds.L_dr)
        L_rr = rng.uniform(*bounds.L_rr)
        L_d = rng.uniform(*bounds.L_d)
        alpha = rng.uniform(*bounds.alpha_deg)
        kappa_d = rng.uniform(p_lo / L_d, p_hi / L_d)
        x = DesignPoint(kappa_r, kappa_d, L_dr, L_rr, L_d, alpha)
        if check_feasible(x, bounds).feasible:
            out.append(x)
            draws_since_accept = 0
        else:
            draws_since_accept += 1
    return out


def grid(
    axes: tuple,
    intervals: tuple,
    fixed: DesignPoint,
    resolution,
    bounds: DesignSpaceBounds | None = None,
) -> list:
    """Tensor grid over two named coordinates with the rest copied from
    ``fixed``.

    ``resolution`` is either a per-axis count (int, giving resolution**2
    points) or an explicit ``(n1, n2)`` pair.  Returns ``(point, report)``
    tuples in row-major order (first axis slow); infeasible nodes are kept
    and flagged so exports can mask them.
    """
    if bounds is None:
        bounds = DesignSpaceBounds.default()
    name1, name2 = axes
    for name in (name1, name2):
        if name not in POINT_FIELDS:
            raise ValueError(f"unknown design coordinate {name!r}")
    if isinstance(resolution, int):
        counts = (resolution, resolution)
    else:
        counts = (int(resolution[0]), int(resolution[1]))
    if counts[0] < 2 or counts[1] < 2:
        raise ValueError("resolution must be >= 2 per axis")
    if not fixed.is_finite():
        raise NonFiniteInput("fixed point has non-finite components")
    (lo1, hi1), (lo2, hi2) = intervals
    axis1 = np.linspace(lo1, hi1, counts[0])
    axis2 = np.linspace(lo2, hi2, counts[1])
    cells = []
    for v1 in axis1:
        for v2 in axis2:
            p = fixed.replace(**{name1: float(v1), name2: float(v2)})
            cells.append((p, check_feasible(p, bounds)))
    return cells


def write_points_csv(path, points, ct=None):
    """Write design points (optionally with a C_T column) in the canonical
    schema: header row, >= 9 significant digits per value."""
    header = list(POINT_FIELDS) + (["C_T"] if ct is not None else [])
    lines = [",".join(header)]
    for i, p in enumerate(points):
        row = [format_float(v) for v in p.as_array()]
        if ct is not None:
            row.append(format_float(ct[i]))
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_points_csv(path):
    """Read the canonical design-point CSV. Returns (points, ct_or_None).

    Raises SchemaError naming the first offending line or missing column.
    """
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise SchemaError("empty file", path=path, line=1)
    header = [c.strip() for c in lines[0].split(",")]
    expect = list(POINT_FIELDS)
    if header[: len(expect)] != expect:
        missing = [c for c in expect if c not in header]
        if missing:
            raise SchemaError(f"missing column {missing[0]!r}", path=path, line=1)
        raise SchemaError(
            f"column order must be {','.join(expect)}", path=path, line=1
        )
    has_ct = len(header) == 7 and header[6] == "C_T"
    if len(header) > len(expect) and not has_ct:
        raise SchemaError(f"unexpected column {header[6]!r}", path=path, line=1)
    points, cts = [], []
    for lineno, ln in enumerate(lines[1:], start=2):
        cells = ln.split(",")
        if len(cells) != len(header):
            raise SchemaError(
                f"expected {len(header)} fields, got {len(cells)}", path=path, line=lineno
            )
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            raise SchemaError("non-numeric value", path=path, line=lineno) from None
        points.append(DesignPoint(*vals[:6]))
        if has_ct:
            cts.append(vals[6])
    return points, (cts if has_ct else None)
