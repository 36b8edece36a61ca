"""Reconstruction solvers for ``p = B W x``.

* :func:`solve_kaczmarz` -- row-action Kaczmarz sweeps on the weighted rows
  ``b_i W``;
* :func:`solve_kaczmarz_tv` -- the same sweeps, each followed by a
  backtracking gradient step on a smoothed total-variation penalty;
* :func:`solve_bpf` -- backprojection filtering ``(A^T A)^{-1} A^T p`` that
  ignores the weights;
* :func:`solve_split_pinv` -- the matrix-free ``W^+ B^+ p``.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numba
import numpy as np
import scipy.sparse.linalg as spla

from .geometry import ImageGrid
from .metrics import rmse
from .projector import BlockSystem, back_project_array, forward_project_array
from .weights import DEFAULT_DENSIFY_CAP, WeightField, wtw_inverse_diagonal

log = logging.getLogger(__name__)

ROW_ORDERS = ("sequential", "angle-interleaved")


class DegenerateRowError(ValueError):
    """A row whose weighted norm ``b_i W W^T b_i^T`` is zero."""


@dataclass(frozen=True)
class SolverConfig:
    relaxation: float = 0.5
    iterations: int = 100
    tv_weight: float = 0.01
    tv_epsilon: float = 1e-6
    tv_initial_step: float = 1.0
    tv_shrink: float = 0.5
    tv_decrease: float = 1e-4
    tv_max_backtracks: int = 30
    row_order: str = "sequential"
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.relaxation < 2:
            raise ValueError("relaxation must lie in (0, 2)")
        if int(self.iterations) < 1:
            raise ValueError("iterations must be at least 1")
        if self.tv_weight < 0:
            raise ValueError("tv_weight must be nonnegative")
        if self.tv_epsilon <= 0:
            raise ValueError("tv_epsilon must be positive")
        if self.tv_initial_step <= 0 or not 0 < self.tv_shrink < 1 or not 0 < self.tv_decrease < 1:
            raise ValueError("invalid TV line-search parameters")
        if self.row_order not in ROW_ORDERS:
            raise ValueError(f"row_order must be one of {ROW_ORDERS}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolveTrace:
    objective: list = field(default_factory=list)
    rmse: list = field(default_factory=list)
    image: ImageGrid | None = None
    skipped_rows: int = 0
    tv_steps: list = field(default_factory=list)

    def to_csv(self, path):
        """Write ``iteration,objective,rmse`` rows (rmse blank without ground truth)."""
        with open(path, "w", newline="\n") as fh:
            fh.write("iteration,objective,rmse\n")
            for k, obj in enumerate(self.objective):
                err = repr(self.rmse[k]) if self.rmse else ""
                fh.write(f"{k + 1},{obj!r},{err}\n")


def objective_array(system, weights, x, p) -> float:
    r = forward_project_array(system, weights, x) - np.asarray(p, dtype=float)
    return 0.5 * float(r @ r)


def objective(system: BlockSystem, weights: WeightField, x, p) -> float:
    """``0.5 * ||B W x - p||^2``."""
    x = getattr(x, "values", x)
    p = getattr(p, "values", p)
    return objective_array(system, weights, x, p)


def objective_gradient(system, weights, x, p) -> np.ndarray:
    x = np.asarray(getattr(x, "values", x), dtype=float)
    p = np.asarray(getattr(p, "values", p), dtype=float)
    return back_project_array(system, weights, forward_project_array(system, weights, x) - p)


def kaczmarz_step(x, indices, values, weights_row, p_i: float, relaxation: float = 1.0):
    """Project ``x`` toward the hyperplane ``b_i W x = p_i``.

    ``indices``/``values`` are the nonzeros of row ``b_i`` and
    ``weights_row`` the weights of that row's angle.  Returns a new array.
    """
    x = np.array(x, dtype=float, copy=True)
    c = np.asarray(values, dtype=float) * np.asarray(weights_row, dtype=float)[indices]
    den = float(c @ c)
    if den <= 0:
        raise DegenerateRowError("row has zero weighted norm")
    x[indices] += relaxation * (p_i - float(c @ x[indices])) / den * c
    return x


@numba.njit(cache=True)
def _sweep(indptr, indices, data, row_angle, w, p, x, relaxation, order):
    skipped = 0
    for r in order:
        j = row_angle[r]
        lo, hi = indptr[r], indptr[r + 1]
        dot = 0.0
        den = 0.0
        for k in range(lo, hi):
            c = data[k] * w[j, indices[k]]
            dot += c * x[indices[k]]
            den += c * c
        if den <= 0.0:
            skipped += 1
            continue
        scale = relaxation * (p[r] - dot) / den
        for k in range(lo, hi):
            i = indices[k]
            x[i] += scale * data[k] * w[j, i]
    return skipped


def _radical_inverse(n: int) -> float:
    out, f = 0.0, 0.5
    while n:
        if n & 1:
            out += f
        n >>= 1
        f *= 0.5
    return out


def row_order(system: BlockSystem, tag: str = "sequential") -> np.ndarray:
    """Row visiting order for one sweep.

    ``angle-interleaved`` visits whole views in base-2 radical-inverse order
    of their index, keeping consecutive views far apart.
    """
    offs = system.geometry.row_offsets
    if tag == "sequential":
        return np.arange(offs[-1], dtype=np.int64)
    if tag == "angle-interleaved":
        views = sorted(range(system.geometry.num_angles), key=lambda j: (_radical_inverse(j), j))
        return np.concatenate([np.arange(offs[j], offs[j + 1]) for j in views]).astype(np.int64)
    raise ValueError(f"unknown row order {tag!r}")


def _arrays(system, weights, p):
    a = system.stacked
    p = np.ascontiguousarray(getattr(p, "values", p), dtype=float)
    if p.size != system.geometry.total_rows:
        raise ValueError(f"sinogram has {p.size} values, expected {system.geometry.total_rows}")
    if weights.values.shape != (system.geometry.num_angles, system.geometry.num_voxels):
        raise ValueError("weight field does not match the system geometry")
    return (a.indptr.astype(np.int64), a.indices.astype(np.int64), a.data,
            system.row_angle.astype(np.int64), np.ascontiguousarray(weights.values), p)


def kaczmarz_sweep(system, weights, p, x, relaxation, order=None) -> int:
    """One in-place sweep over ``order`` (default: all rows). Returns skipped rows."""
    indptr, indices, data, angle, w, p = _arrays(system, weights, p)
    if order is None:
        order = np.arange(p.size, dtype=np.int64)
    return int(_sweep(indptr, indices, data, angle, w, p, x, float(relaxation),
                      np.asarray(order, dtype=np.int64)))


def _record(trace, system, weights, x, p, ground_truth):
    trace.objective.append(objective_array(system, weights, x, p))
    if ground_truth is not None:
        trace.rmse.append(rmse(x, ground_truth.values))


def _check_finite(x, it):
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite reconstruction after sweep {it}")


def tv_value(img: np.ndarray, eps: float) -> float:
    """Smoothed isotropic TV with forward differences and replicate boundary."""
    dx = np.diff(img, axis=1, append=img[:, -1:])
    dy = np.diff(img, axis=0, append=img[-1:, :])
    return float(np.sum(np.sqrt(dx * dx + dy * dy + eps * eps)))


def tv_gradient(img: np.ndarray, eps: float) -> np.ndarray:
    dx = np.diff(img, axis=1, append=img[:, -1:])
    dy = np.diff(img, axis=0, append=img[-1:, :])
    norm = np.sqrt(dx * dx + dy * dy + eps * eps)
    qx, qy = dx / norm, dy / norm
    g = -qx - qy
    g[:, 1:] += qx[:, :-1]
    g[1:, :] += qy[:-1, :]
    return g


def _tv_step(system, weights, x, p, config, step):
    """Backtracking step along ``-lambda * grad TV``; updates ``x`` in place.

    Returns the accepted step length (0 when no decrease was found).
    """
    shape = system.geometry.shape
    lam, eps = config.tv_weight, config.tv_epsilon
    img = x.reshape(shape)
    direction = -lam * tv_gradient(img, eps).ravel()
    residual = forward_project_array(system, weights, x) - p
    grad = back_project_array(system, weights, residual) + lam * tv_gradient(img, eps).ravel()
    slope = float(grad @ direction)
    if slope >= 0:
        return 0.0
    f0 = 0.5 * float(residual @ residual) + lam * tv_value(img, eps)
    for _ in range(config.tv_max_backtracks):
        trial = x + step * direction
        f = objective_array(system, weights, trial, p) + lam * tv_value(trial.reshape(shape), eps)
        if f <= f0 + config.tv_decrease * step * slope:
            x[:] = trial
            return step
        step *= config.tv_shrink
    return 0.0


def _solve(system, weights, p, config, ground_truth, with_tv):
    g = system.geometry
    indptr, indices, data, angle, w, parr = _arrays(system, weights, p)
    order = row_order(system, config.row_order)
    x = np.zeros(g.num_voxels)
    trace = SolveTrace()
    step = config.tv_initial_step
    for it in range(1, int(config.iterations) + 1):
        trace.skipped_rows += int(_sweep(indptr, indices, data, angle, w, parr, x,
                                         float(config.relaxation), order))
        if with_tv:
            accepted = _tv_step(system, weights, x, parr, config, step)
            trace.tv_steps.append(accepted)
            # next search starts one expansion above the last accepted step
            if accepted > 0:
                step = min(config.tv_initial_step, accepted / config.tv_shrink)
        _check_finite(x, it)
        _record(trace, system, weights, x, parr, ground_truth)
    if trace.skipped_rows:
        log.warning("skipped %d degenerate row updates", trace.skipped_rows)
    trace.image = ImageGrid(g, x)
    return trace


def solve_kaczmarz(system: BlockSystem, weights: WeightField, p, config: SolverConfig = SolverConfig(),
                   ground_truth: ImageGrid | None = None) -> SolveTrace:
    """Zero-initialized weighted Kaczmarz; one trace entry per full sweep."""
    return _solve(system, weights, p, config, ground_truth, with_tv=False)


def solve_kaczmarz_tv(system: BlockSystem, weights: WeightField, p, config: SolverConfig = SolverConfig(),
                      ground_truth: ImageGrid | None = None) -> SolveTrace:
    """Weighted Kaczmarz with a TV descent step after every sweep.

    The TV step follows ``-tv_weight * grad TV`` with an Armijo backtracking
    search on ``0.5 ||BWx - p||^2 + tv_weight * TV(x)``.  With ``tv_weight == 0``
    this is exactly :func:`solve_kaczmarz`.
    """
    return _solve(system, weights, p, config, ground_truth, with_tv=config.tv_weight > 0)


def _cg(op, rhs, rtol, maxiter, what):
    x, info = spla.cg(op, rhs, rtol=rtol, atol=0.0, maxiter=maxiter)
    if info > 0:
        log.warning("%s: conjugate gradient stopped after %d iterations without "
                    "reaching rtol=%g", what, info, rtol)
    return x


def solve_bpf(system: BlockSystem, p, cap: int = DEFAULT_DENSIFY_CAP, cg_rtol: float = 1e-8,
              cg_maxiter: int = 2000) -> ImageGrid:
    """Backprojection filtering ``(A^T A)^{-1} A^T p`` with the unweighted ``A``.

    Dense normal equations when ``A`` fits under ``cap``; matrix-free conjugate
    gradient otherwise.
    """
    g = system.geometry
    a = system.stacked
    p = np.asarray(getattr(p, "values", p), dtype=float)
    if p.size != g.total_rows:
        raise ValueError(f"sinogram has {p.size} values, expected {g.total_rows}")
    backprojection = a.T @ p
    if g.num_voxels <= cap and g.total_rows <= cap:
        ata = (a.T @ a).toarray()
        rank = np.linalg.matrix_rank(ata)
        if rank < g.num_voxels:
            raise np.linalg.LinAlgError(f"A^T A is singular: rank {rank} < {g.num_voxels}")
        x = np.linalg.solve(ata, backprojection)
    else:
        op = spla.LinearOperator((g.num_voxels, g.num_voxels), matvec=lambda v: a.T @ (a @ v),
                                 dtype=float)
        x = _cg(op, backprojection, cg_rtol, cg_maxiter, "BPF filter")
    return ImageGrid(g, x)


def solve_split_pinv(system: BlockSystem, weights: WeightField, p, cg_rtol: float = 1e-8,
                     cg_maxiter: int = 2000) -> ImageGrid:
    """Matrix-free ``W^+ B^+ p``.

    ``B^+`` acts per view as ``A_j^T (A_j A_j^T)^{-1}`` with the Gram system
    solved by conjugate gradient; ``W^+ = (W^T W)^{-1} W^T`` is diagonal
    scaling of the weighted sum over views.
    """
    g = system.geometry
    p = np.asarray(getattr(p, "values", p), dtype=float)
    if p.size != g.total_rows:
        raise ValueError(f"sinogram has {p.size} values, expected {g.total_rows}")
    offs = g.row_offsets
    acc = np.zeros(g.num_voxels)
    for b in system.blocks:
        j = b.angle_index
        gram = (b.matrix @ b.matrix.T).tocsr()
        y = _cg(gram, p[offs[j]:offs[j + 1]], cg_rtol, cg_maxiter, f"B+ view {j}")
        acc += weights.values[j] * (b.matrix.T @ y)
    return ImageGrid(g, wtw_inverse_diagonal(weights) * acc)
