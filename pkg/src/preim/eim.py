"""Empirical interpolation of the sampled nonlinearity.

The greedy loop selects magic points and unit-normalized basis fields so
that the interpolation system is unit lower triangular: coefficients follow
by forward substitution and the approximation matches the target exactly at
every selected point.
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .errors import DegenerateResidualError
from .fem import gamma_stack
from .linalg import forward_substitution
from .util import write_csv

#: residuals with sup norm at or below this cannot be normalized safely
RESIDUAL_FLOOR = 1e-14

#: relative slack allowed for residual values at already-selected points
NESTED_ZERO_RTOL = 1e-8


@dataclass
class EimSelection:
    """One appended term of the greedy: which field and where it peaked."""

    rank: int
    parameter: float
    time_index: int
    point: int
    residual_norm: float
    provenance: str = "hf"  # "hf" or "rb" field behind the basis function


@dataclass
class EimApprox:
    """Separated rank-M approximation of the nonlinearity.

    Attributes
    ----------
    points : ndarray (M,)
        Evaluation-grid indices of the magic points, in selection order.
    q_funcs : ndarray (n_grid, M)
        Basis fields; ``q_j`` peaks at 1 on its own point and vanishes at
        all earlier points.
    b_matrix : ndarray (M, M)
        Unit lower-triangular interpolation matrix ``B_ij = q_j(x_i)``.
    """

    points: np.ndarray
    q_funcs: np.ndarray
    b_matrix: np.ndarray
    selection_log: List[EimSelection] = field(default_factory=list)
    termination_residual: Optional[float] = None

    @classmethod
    def empty(cls, n_grid_points):
        return cls(
            points=np.zeros(0, dtype=np.int64),
            q_funcs=np.zeros((n_grid_points, 0)),
            b_matrix=np.zeros((0, 0)),
        )

    @property
    def rank(self):
        return self.points.size

    @property
    def n_grid_points(self):
        return self.q_funcs.shape[0]

    def truncated(self, rank):
        """Leading rank-``m`` sub-approximation (the greedy is nested)."""
        m = int(rank)
        if not 0 <= m <= self.rank:
            raise ValueError(f"rank {rank} outside [0, {self.rank}]")
        return EimApprox(
            points=self.points[:m],
            q_funcs=self.q_funcs[:, :m],
            b_matrix=self.b_matrix[:m, :m],
            selection_log=self.selection_log[:m],
        )


def eim_coefficients(eim, gamma_at_points):
    """Interpolation coefficients from values at the magic points."""
    gamma_at_points = np.asarray(gamma_at_points, dtype=float)
    if eim.rank == 0:
        raise ValueError("empty interpolation basis")
    if gamma_at_points.shape[0] != eim.rank:
        raise ValueError(
            f"expected {eim.rank} point values, got {gamma_at_points.shape}"
        )
    return forward_substitution(eim.b_matrix, gamma_at_points)


def eim_evaluate(eim, coefficients):
    """Evaluate ``sum_j phi_j q_j`` on the whole evaluation grid."""
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape[0] != eim.rank:
        raise ValueError("coefficient length does not match the rank")
    return eim.q_funcs @ coefficients


def interpolate_fields(eim, fields):
    """Interpolate a stack of grid fields (rows); rank 0 gives zeros."""
    fields = np.atleast_2d(np.asarray(fields, dtype=float))
    if eim.rank == 0:
        return np.zeros_like(fields)
    coeffs = forward_substitution(eim.b_matrix, fields[:, eim.points].T)
    return (eim.q_funcs @ coeffs).T


def residual_fields(eim, fields):
    """Fields minus their interpolation, same shape as the input stack."""
    fields = np.atleast_2d(np.asarray(fields, dtype=float))
    return fields - interpolate_fields(eim, fields)


def eim_append(eim, residual, log_entry=None):
    """Append one term from a residual field and return the extended EIM.

    The residual must vanish (in exact arithmetic) at the already selected
    points; the roundoff noise there is zeroed so the structural invariants
    hold exactly.
    """
    residual = np.asarray(residual, dtype=float).copy()
    if residual.shape != (eim.n_grid_points,):
        raise ValueError("residual does not match the evaluation grid")
    sup = np.abs(residual).max(initial=0.0)
    if sup <= RESIDUAL_FLOOR:
        raise DegenerateResidualError(
            f"residual sup norm {sup:.3e} is too small to normalize"
        )
    if eim.rank:
        at_old = np.abs(residual[eim.points]).max()
        if at_old > NESTED_ZERO_RTOL * sup:
            raise ValueError(
                "field is not a residual: it does not vanish at the "
                "already-selected points"
            )
        residual[eim.points] = 0.0
    point = int(np.argmax(np.abs(residual)))  # ties: smallest grid index
    if point in eim.points:
        raise DegenerateResidualError("argmax landed on an existing point")
    q_new = residual / residual[point]
    q_new[point] = 1.0

    m = eim.rank
    b_new = np.zeros((m + 1, m + 1))
    b_new[:m, :m] = eim.b_matrix
    if m:
        b_new[m, :m] = eim.q_funcs[point, :]
    b_new[m, m] = 1.0

    log = list(eim.selection_log)
    if log_entry is not None:
        log.append(replace(log_entry, rank=m + 1, point=point))
    return EimApprox(
        points=np.append(eim.points, point),
        q_funcs=np.column_stack([eim.q_funcs, q_new]),
        b_matrix=b_new,
        selection_log=log,
    )


def _argmax_scan_order(norms):
    """First index of the maximum when scanning rows then columns."""
    return np.unravel_index(int(np.argmax(norms)), norms.shape)


def standard_eim(trajectories, model, eps_eim):
    """Greedy construction of the EIM over precomputed HF trajectories.

    Scans all (parameter, time-node) pairs, repeatedly picking the field
    worst approximated in the sup norm and its peak point, until the
    selected residual drops to ``eps_eim``.

    Returns
    -------
    EimApprox
        With one selection-log entry per term and the final sub-threshold
        residual norm recorded in ``termination_residual``.
    """
    if eps_eim <= 0:
        raise ValueError("eps_eim must be positive")
    if not trajectories:
        raise ValueError("at least one trajectory is required")
    n_time = trajectories[0].fields.shape[0]
    stacks = [
        gamma_stack(model, traj.parameter, traj.fields)
        for traj in trajectories
    ]
    all_fields = np.concatenate(stacks, axis=0)  # (P*(K+1), n_grid)

    eim = EimApprox.empty(model.grid.n_points)
    while True:
        residuals = residual_fields(eim, all_fields)
        norms = np.abs(residuals).max(axis=1).reshape(len(trajectories), n_time)
        p_idx, k_idx = _argmax_scan_order(norms)
        best = norms[p_idx, k_idx]
        if best <= eps_eim or eim.rank == model.grid.n_points:
            eim.termination_residual = float(best)
            return eim
        entry = EimSelection(
            rank=0,
            parameter=trajectories[p_idx].parameter,
            time_index=int(k_idx),
            point=0,
            residual_norm=float(best),
        )
        eim = eim_append(eim, residuals[p_idx * n_time + k_idx], entry)


def seed_rank_one(trajectories, model):
    """Rank-1 approximation from the largest sampled nonlinearity field.

    Fallback used when the greedy terminates before appending anything (the
    threshold exceeds the whole signal): the reduced operators and archives
    require at least one term. A constant field stands in when the
    nonlinearity vanishes identically.
    """
    best_entry = None
    best_field = None
    best = -1.0
    for traj in trajectories:
        stack = gamma_stack(model, traj.parameter, traj.fields)
        norms = np.abs(stack).max(axis=1)
        k = int(np.argmax(norms))
        if norms[k] > best:
            best = float(norms[k])
            best_field = stack[k]
            best_entry = EimSelection(
                rank=0, parameter=traj.parameter, time_index=k, point=0,
                residual_norm=best,
            )
    if best <= RESIDUAL_FLOOR:
        best_field = np.ones(model.grid.n_points)
    eim = eim_append(EimApprox.empty(model.grid.n_points), best_field,
                     best_entry)
    eim.termination_residual = best
    return eim


def save_selection_csv(eim, path):
    """Selection log: rank, parameter, time node, point, residual norm."""
    rows = [
        (s.rank, float(s.parameter), s.time_index, s.point,
         float(s.residual_norm), s.provenance)
        for s in eim.selection_log
    ]
    write_csv(
        path, rows,
        header=["m", "mu", "k", "point", "residual_sup", "provenance"],
    )
