"""Constrained maximization of a surrogate's predicted torque coefficient.

The workhorse is a derivative-free multistart pattern search: feasible start
points come from the design-space sampler, each start runs a compass search
with per-coordinate steps that halve from 10% of the coordinate range down
to 1e-4 of it, and infeasible trial points are rejected outright, so every
reported optimum is feasible by construction.  A guarded exhaustive tensor
grid serves as the independent validation oracle for the search.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from . import design_space, gpr, nn, oracle
from .design_space import DesignPoint, DesignSpaceBounds, check_feasible
from .errors import ExhaustedRejection, GridTooLarge, NoFeasibleStart, ZeroBaseline

DEFAULT_BASELINE_CT = 0.2585

# Fixed number of multistarts: independent of the evaluation budget so that
# the search trajectory for budget b2 > b1 is a strict continuation of the
# b1 trajectory (budget monotonicity of the returned optimum).
_N_STARTS = 8
_STEP_START = 0.1
_STEP_STOP = 1e-4


class Surrogate(Protocol):
    """Anything exposing a deterministic predicted C_T at a design point."""

    def predict(self, x: DesignPoint) -> float: ...


class OracleSurrogate:
    """The synthetic torque function itself, wrapped as a surrogate."""

    def __init__(self, config: oracle.OracleConfig | None = None):
        self.config = config or oracle.OracleConfig()

    def predict(self, x: DesignPoint) -> float:
        return oracle.evaluate(x, self.config)


class GprSurrogate:
    """Posterior-mean predictor of a fitted GPR model."""

    def __init__(self, model: gpr.GprModel):
        self.model = model

    def predict(self, x: DesignPoint) -> float:
        return self.model.predict(x).mean


class MlpSurrogate:
    """Forward pass of a trained network."""

    def __init__(self, model: nn.MlpModel):
        self.model = model

    def predict(self, x: DesignPoint) -> float:
        return nn.forward(self.model, x)


class ConstantSurrogate:
    def __init__(self, value: float):
        self.value = float(value)

    def predict(self, x: DesignPoint) -> float:
        return self.value


@dataclass(frozen=True)
class OptResult:
    x_star: DesignPoint
    ct_star: float
    method: str  # "multistart-local" | "grid" | "random"
    evaluations: int
    improvement_vs_baseline: float


def improvement(ct_star: float, baseline_ct: float) -> float:
    """Signed relative gain (ct_star - baseline) / baseline."""
    if baseline_ct <= 0.0:
        raise ZeroBaseline("baseline C_T must be positive")
    return (ct_star - baseline_ct) / baseline_ct


def maximize(
    surrogate: Surrogate,
    bounds: DesignSpaceBounds | None = None,
    budget: int = 10000,
    seed: int = 0,
    baseline_ct: float = DEFAULT_BASELINE_CT,
) -> OptResult:
    """Multistart compass search over the feasible region.

    Deterministic per seed; consumes at most ``budget`` surrogate
    evaluations and returns the best feasible point evaluated anywhere in
    the run (ties keep the earlier find).
    """
    if bounds is None:
        bounds = DesignSpaceBounds.default()
    if budget < 100:
        raise ValueError("budget must be >= 100")
    try:
        starts = design_space.sample_feasible(bounds, _N_STARTS, seed)
    except ExhaustedRejection as exc:
        raise NoFeasibleStart(str(exc)) from exc

    intervals = bounds.coordinate_intervals()
    ranges = np.array([hi - lo for lo, hi in intervals])
    evals = 0
    best_x = None
    best_f = -np.inf

    def predict(p: DesignPoint) -> float:
        nonlocal evals, best_x, best_f
        f = surrogate.predict(p)
        evals += 1
        if f > best_f:
            best_x, best_f = p, f
        return f

    budget_left = lambda: evals < budget

    for start in starts:
        if not budget_left():
            break
        x = start
        fx = predict(x)
        scale = _STEP_START
        while scale >= _STEP_STOP and budget_left():
            best_cand = None
            best_cand_f = fx
            arr = x.as_array()
            for i in range(6):
                for direction in (+1.0, -1.0):
                    if not budget_left():
                        break
                    trial = arr.copy()
                    trial[i] += direction * scale * ranges[i]
                    cand = DesignPoint.from_array(trial)
                    if not check_feasible(cand, bounds).feasible:
                        continue
                    fc = predict(cand)
                    if fc > best_cand_f:
                        best_cand, best_cand_f = cand, fc
            if best_cand is not None:
                x, fx = best_cand, best_cand_f
            else:
                scale *= 0.5

    if best_x is None:
        raise NoFeasibleStart("budget exhausted before any feasible evaluation")
    return OptResult(
        x_star=best_x,
        ct_star=best_f,
        method="multistart-local",
        evaluations=evals,
        improvement_vs_baseline=improvement(best_f, baseline_ct),
    )


def brute_force(
    surrogate: Surrogate,
    bounds: DesignSpaceBounds | None = None,
    resolution: int = 5,
    baseline_ct: float = DEFAULT_BASELINE_CT,
) -> OptResult:
    """Exhaustive evaluation over the feasible subset of the 6-D tensor
    grid; the validation oracle for :func:`maximize`.

    Ties break by lexicographic grid index.  ``evaluations`` counts the
    feasible nodes actually evaluated.
    """
    if bounds is None:
        bounds = DesignSpaceBounds.default()
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if resolution**6 > 10**8:
        raise GridTooLarge(f"{resolution}^6 exceeds the 1e8 evaluation guard")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in bounds.coordinate_intervals()]
    best_x = None
    best_f = -np.inf
    evals = 0
    for kr in axes[0]:
        for kd in axes[1]:
            for ldr in axes[2]:
                for lrr in axes[3]:
                    for ld in axes[4]:
                        for a in axes[5]:
                            p = DesignPoint(kr, kd, ldr, lrr, ld, a)
                            if not check_feasible(p, bounds).feasible:
                                continue
                            f = surrogate.predict(p)
                            evals += 1
                            if f > best_f:
                                best_x, best_f = p, f
    if best_x is None:
        raise NoFeasibleStart("no feasible grid node at this resolution")
    return OptResult(
        x_star=best_x,
        ct_star=best_f,
        method="grid",
        evaluations=evals,
        improvement_vs_baseline=improvement(best_f, baseline_ct),
    )
