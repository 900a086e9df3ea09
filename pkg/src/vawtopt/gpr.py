"""Gaussian process regression surrogate with exact posterior conditioning.

The prior is a constant mean plus a scaled squared exponential kernel
K(x, x') = sigma^2 * exp(-|x - x'|^2 / (2 l^2)) evaluated on coordinates
standardized to [0, 1] per design-space interval (a single isotropic length
scale is only meaningful on normalized inputs).  Observation noise enters as
a white kernel sigma0^2 * delta, where delta fires on exact point equality;
following the source formulas, the cross- and test-covariances use the full
noisy kernel K_c, so predictions target the noisy observable.

Note on defaults: the reported length scale is l = -0.5; only l^2 enters the
kernel, so the sign is immaterial and the default here is 0.5 (flagged, not
silently corrected).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .design_space import DesignPoint, DesignSpaceBounds, format_float
from .errors import ConflictingDuplicates, NonFiniteInput, SingularKernel
from .fileio import atomic_write_text
from .oracle import Dataset

# Multiplicative escalation of the diagonal regularizer when the factorization
# of K + sigma0^2 I fails; sigma0 = 1e-3 usually makes all of this moot.
_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)

_MODEL_FMT = "%.17g"


@dataclass(frozen=True)
class KernelParams:
    sigma: float = 0.5
    length_scale: float = 0.5
    noise_sigma0: float = 1e-3
    mean_m0: float = 0.16

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if self.length_scale == 0:
            raise ValueError("length_scale must be nonzero")
        if self.noise_sigma0 < 0:
            raise ValueError("noise_sigma0 must be >= 0")

    @property
    def length_scale_sq(self) -> float:
        return self.length_scale**2


@dataclass(frozen=True)
class Prediction:
    mean: float
    variance: float


def kernel(
    x1: DesignPoint,
    x2: DesignPoint,
    params: KernelParams,
    bounds: DesignSpaceBounds | None = None,
) -> float:
    """Scaled squared exponential covariance between two design points,
    with the Euclidean distance taken in standardized 6-space."""
    if bounds is None:
        bounds = DesignSpaceBounds.default()
    if not (x1.is_finite() and x2.is_finite()):
        raise NonFiniteInput("kernel inputs must be finite")
    d2 = float(np.sum((bounds.standardize(x1) - bounds.standardize(x2)) ** 2))
    return params.sigma**2 * np.exp(-d2 / (2.0 * params.length_scale_sq))


class GprModel:
    """Immutable trained state: standardized inputs, Cholesky factor of the
    noisy kernel matrix, and the precomputed alpha = K_c^{-1} (y - m0).

    Safe to share across threads for prediction; ``variance_clamps`` is an
    approximate diagnostic counter of round-off clamps, not a contract.
    """

    def __init__(self, params, bounds, x_raw, x_std, y, factor, jitter):
        self.params = params
        self.bounds = bounds
        self.train_x_raw = x_raw
        self.train_x = x_std
        self.train_y = y
        self._factor = factor
        self.jitter = jitter
        self.alpha_vector = cho_solve(factor, y - params.mean_m0)
        self.variance_clamps = 0

    def __len__(self):
        return len(self.train_y)

    def factorization_residual(self) -> float:
        """Relative Frobenius mismatch between L L^T and K + sigma0^2 I."""
        L = np.tril(self._factor[0])
        kc = _kernel_matrix(self.train_x, self.params)
        return float(
            np.linalg.norm(L @ L.T - kc - self.jitter * np.eye(len(kc)))
            / np.linalg.norm(kc)
        )

    def _cross_covariance(self, z: np.ndarray) -> np.ndarray:
        d2 = np.sum((self.train_x - z) ** 2, axis=1)
        k = self.params.sigma**2 * np.exp(-d2 / (2.0 * self.params.length_scale_sq))
        # noise kernel contribution on exact coincidence with a training input
        exact = np.all(self.train_x == z, axis=1)
        if exact.any():
            k = k + self.params.noise_sigma0**2 * exact
        return k

    def predict(self, x_star: DesignPoint) -> Prediction:
        if not x_star.is_finite():
            raise NonFiniteInput("query point has non-finite components")
        z = self.bounds.standardize(x_star)
        k = self._cross_covariance(z)
        mean = float(k @ self.alpha_vector + self.params.mean_m0)
        kss = self.params.sigma**2 + self.params.noise_sigma0**2
        var = float(kss - k @ cho_solve(self._factor, k))
        if var < 0.0:
            self.variance_clamps += 1
            var = 0.0
        return Prediction(mean=mean, variance=var)

    def predict_mean(self, points: Iterable[DesignPoint]) -> np.ndarray:
        """Posterior means for a batch of query points."""
        return np.array([self.predict(p).mean for p in points])


def _kernel_matrix(x_std: np.ndarray, params: KernelParams) -> np.ndarray:
    d2 = np.sum((x_std[:, None, :] - x_std[None, :, :]) ** 2, axis=2)
    k = params.sigma**2 * np.exp(-d2 / (2.0 * params.length_scale_sq))
    return k + params.noise_sigma0**2 * np.eye(len(x_std))


def _as_rows(data) -> list:
    if isinstance(data, Dataset):
        return data.rows()
    return list(data)


def _prepare(data, bounds):
    """Standardize, deduplicate exact repeats, and reject conflicts."""
    rows = _as_rows(data)
    if not rows:
        raise ValueError("dataset must be non-empty")
    seen = {}
    x_raw, x_std, y = [], [], []
    for p, v in rows:
        z = bounds.standardize(p)
        key = z.tobytes()
        if key in seen:
            if seen[key] != v:
                raise ConflictingDuplicates(
                    f"duplicate input {p} with conflicting targets {seen[key]} and {v}"
                )
            continue
        seen[key] = v
        x_raw.append(p)
        x_std.append(z)
        y.append(float(v))
    return tuple(x_raw), np.array(x_std), np.array(y)


def _factorize(kc: np.ndarray):
    for jitter in _JITTERS:
        try:
            factor = cho_factor(kc + jitter * np.eye(len(kc)), lower=True)
            return factor, jitter
        except LinAlgError:
            continue
    raise SingularKernel(
        f"kernel matrix of size {len(kc)} not positive definite after jitter escalation"
    )


def fit(data, params: KernelParams | None = None, bounds: DesignSpaceBounds | None = None) -> GprModel:
    """Condition the prior on the observations.

    ``data`` is a Dataset or an iterable of (DesignPoint, ct) pairs.  Exact
    duplicate inputs with identical targets are deduplicated; with different
    targets they raise ConflictingDuplicates.
    """
    if params is None:
        params = KernelParams()
    if bounds is None:
        bounds = DesignSpaceBounds.default()
    x_raw, x_std, y = _prepare(data, bounds)
    kc = _kernel_matrix(x_std, params)
    factor, jitter = _factorize(kc)
    return GprModel(params, bounds, x_raw, x_std, y, factor, jitter)


def nlml(data, params: KernelParams | None = None, bounds: DesignSpaceBounds | None = None) -> float:
    """Negative log marginal likelihood
    0.5 (y-m0)^T K_c^{-1} (y-m0) + 0.5 log|K_c| + (n/2) log(2 pi)."""
    if params is None:
        params = KernelParams()
    if bounds is None:
        bounds = DesignSpaceBounds.default()
    _, x_std, y = _prepare(data, bounds)
    kc = _kernel_matrix(x_std, params)
    factor, _ = _factorize(kc)
    resid = y - params.mean_m0
    alpha = cho_solve(factor, resid)
    half_logdet = float(np.sum(np.log(np.diag(factor[0]))))
    return float(0.5 * resid @ alpha + half_logdet + 0.5 * len(y) * np.log(2.0 * np.pi))


def tune(
    data,
    sigma_grid,
    length_scale_grid,
    base: KernelParams | None = None,
    bounds: DesignSpaceBounds | None = None,
) -> KernelParams:
    """Exhaustive lattice search minimizing the NLML over (sigma, l).

    m0 and sigma0 stay fixed at ``base``.  Ties break toward the smallest
    (sigma, l^2) pair.
    """
    if base is None:
        base = KernelParams()
    lattice = sorted(
        ((float(s), float(l)) for s in sigma_grid for l in length_scale_grid),
        key=lambda t: (t[0], t[1] ** 2),
    )
    if not lattice:
        raise ValueError("lattice must be non-empty")
    best = None
    best_val = np.inf
    for s, l in lattice:
        params = KernelParams(
            sigma=s, length_scale=l, noise_sigma0=base.noise_sigma0, mean_m0=base.mean_m0
        )
        val = nlml(data, params, bounds)
        if val < best_val:
            best, best_val = params, val
    return best


def save_model(model: GprModel, path):
    """Persist as flat text: key=value header plus CSV blocks for the raw
    training inputs, targets, and alpha, at full float precision."""
    b = model.bounds
    lines = [
        "format=gpr-model-v1",
        f"sigma={_MODEL_FMT % model.params.sigma}",
        f"length_scale={_MODEL_FMT % model.params.length_scale}",
        f"noise_sigma0={_MODEL_FMT % model.params.noise_sigma0}",
        f"mean_m0={_MODEL_FMT % model.params.mean_m0}",
        f"n_train={len(model)}",
        "bounds_kappa_r=" + ",".join(_MODEL_FMT % v for v in b.kappa_r),
        "bounds_L_rr=" + ",".join(_MODEL_FMT % v for v in b.L_rr),
        "bounds_L_d=" + ",".join(_MODEL_FMT % v for v in b.L_d),
        "bounds_L_dr=" + ",".join(_MODEL_FMT % v for v in b.L_dr),
        "bounds_kappa_d_L_d=" + ",".join(_MODEL_FMT % v for v in b.kappa_d_L_d),
        "bounds_alpha_deg=" + ",".join(_MODEL_FMT % v for v in b.alpha_deg),
        "[X]",
    ]
    for p in model.train_x_raw:
        lines.append(",".join(_MODEL_FMT % v for v in p.as_array()))
    lines.append("[y]")
    for v in model.train_y:
        lines.append(_MODEL_FMT % v)
    lines.append("[alpha]")
    for v in model.alpha_vector:
        lines.append(_MODEL_FMT % v)
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_model(path) -> GprModel:
    """Reload a saved model; the factorization is rebuilt deterministically
    from the stored inputs, reproducing predictions bit-compatibly."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != "format=gpr-model-v1":
        raise ValueError(f"{path}: not a gpr-model-v1 file")
    kv = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("["):
        k, v = lines[i].split("=", 1)
        kv[k] = v
        i += 1

    def pair(key):
        a, b = kv[key].split(",")
        return (float(a), float(b))

    params = KernelParams(
        sigma=float(kv["sigma"]),
        length_scale=float(kv["length_scale"]),
        noise_sigma0=float(kv["noise_sigma0"]),
        mean_m0=float(kv["mean_m0"]),
    )
    bounds = DesignSpaceBounds(
        kappa_r=pair("bounds_kappa_r"),
        L_rr=pair("bounds_L_rr"),
        L_d=pair("bounds_L_d"),
        L_dr=pair("bounds_L_dr"),
        kappa_d_L_d=pair("bounds_kappa_d_L_d"),
        alpha_deg=pair("bounds_alpha_deg"),
    )
    n = int(kv["n_train"])
    blocks = {}
    current = None
    for ln in lines[i:]:
        if ln.startswith("["):
            current = ln.strip("[]")
            blocks[current] = []
        else:
            blocks[current].append(ln)
    points = tuple(
        DesignPoint(*[float(c) for c in row.split(",")]) for row in blocks["X"]
    )
    y = [float(v) for v in blocks["y"]]
    if len(points) != n or len(y) != n:
        raise ValueError(f"{path}: block lengths disagree with n_train={n}")
    return fit(list(zip(points, y)), params, bounds)
