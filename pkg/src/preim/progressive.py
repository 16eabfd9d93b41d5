"""Progressive co-construction of the interpolation basis and reduced basis.

Instead of computing every high-fidelity trajectory of the training set up
front, the progressive offline stage keeps a growing set of parameters with
HF data and substitutes reduced-order trajectories everywhere else. Each
iteration greedily selects the worst-approximated (parameter, time-node)
pair; whenever that selection triggers a new HF solve, the pair is
re-selected over the HF data before extending the interpolation basis, and
the new trajectory enriches the reduced basis.

Variants: ``preim`` (full algorithm), ``preim-nr`` (skip the re-selection),
``user`` (greedy and basis fields from reduced trajectories only, the
unsteady SER strategy).
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .eim import (
    EimApprox,
    EimSelection,
    RESIDUAL_FLOOR,
    eim_append,
    eim_coefficients,
    eim_evaluate,
    residual_fields,
)
from .errors import NonTerminationError
from .fem import (
    Trajectory,
    assemble_nonlinear_vector,
    gamma_field,
    gamma_stack,
    hf_solve,
)
from .pod import (
    GramOperator,
    RBasis,
    progressive_basis_threshold,
    progressive_rb,
    update_rb,
)
from .rom import online_solve, reconstruct, reduce_operators
from .util import write_csv

VARIANTS = ("preim", "preim-nr", "user")


@dataclass
class PreimIterationLog:
    """One outer iteration: both selected pairs and the bookkeeping."""

    iteration: int
    parameter: float
    time_index: int
    parameter_reselected: float
    time_index_reselected: int
    new_hf: bool
    rank_increased: bool
    delta_eim: float
    basis_size: int
    n_hf_parameters: int


@dataclass
class UpdateEimResult:
    incr_rank: bool
    eim_out: EimApprox
    selected: Tuple[float, int]
    reselected: Tuple[float, int]
    new_parameter: Optional[float]
    new_trajectory: Optional[Trajectory]
    delta_eim: float
    r_tilde_norm: float
    r_bar_norm: float


@dataclass
class PreimState:
    """Mutable driver state; ``hf_store`` keys always equal ``p_hf``."""

    model: object
    p_train: np.ndarray
    gram: GramOperator
    eps_pod: float
    abs_pod_eps: float
    variant: str
    basis: object
    eim: EimApprox
    rom: object = None
    p_hf: List[float] = field(default_factory=list)
    hf_store: Dict[float, Trajectory] = field(default_factory=dict)
    deltas_eim: List[float] = field(default_factory=list)
    deltas_rb: List[float] = field(default_factory=list)
    log: List[PreimIterationLog] = field(default_factory=list)

    @property
    def p_hf_set(self):
        return set(self.p_hf)

    def register_hf(self, trajectory):
        mu = trajectory.parameter
        if mu not in self.hf_store:
            self.p_hf.append(mu)
            self.hf_store[mu] = trajectory

    def refresh_rom(self):
        self.rom = reduce_operators(self.basis, self.model, self.eim,
                                    gram=self.gram)


def surrogate_field(state, mu):
    """HF trajectory when available, reduced-order trajectory otherwise."""
    mu = float(mu)
    if mu in state.hf_store:
        return state.hf_store[mu]
    return reconstruct(state.basis, online_solve(state.rom, mu))


def _rb_trajectory(state, mu):
    return reconstruct(state.basis, online_solve(state.rom, float(mu)))


def _greedy_argmax(norms, hf_mask):
    """Argmax over the (parameter, time) grid, scan order; exact ties
    prefer a parameter without HF data (to trigger a new trajectory)."""
    best = norms.max()
    ties = np.argwhere(norms == best)
    for p_idx, k_idx in ties:
        if not hf_mask[p_idx]:
            return int(p_idx), int(k_idx), float(best)
    return int(ties[0][0]), int(ties[0][1]), float(best)


def init_preim(model, p_train, p_hf_init=None, eps_pod=1e-3, gram=None,
               variant="preim"):
    """Initialize the progressive state (Algorithm lines before the loop).

    Computes the HF trajectories of the initial parameter subset,
    compresses them into the reduced basis, and seeds the interpolation
    with the largest sampled nonlinearity field over that subset.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    p_train = np.asarray(p_train, dtype=float)
    if p_train.size == 0:
        raise ValueError("training set must not be empty")
    if p_hf_init is None:
        p_hf_init = [float(p_train[0])]
    p_hf_init = [float(mu) for mu in p_hf_init]
    if not p_hf_init:
        raise ValueError("initial HF parameter set must not be empty")
    train_set = set(p_train.tolist())
    if not set(p_hf_init) <= train_set:
        raise ValueError("initial HF parameters must belong to the training set")
    if gram is None:
        gram = GramOperator.from_model(model)

    trajectories = [hf_solve(model, mu) for mu in p_hf_init]
    basis = progressive_rb(trajectories, eps_pod, gram)
    if basis.size == 0:
        # identically zero trajectories: keep one normalized constant mode
        # so the reduced operators exist (all its coefficients stay zero)
        const = np.ones(model.n_nodes)
        const /= gram.norm(const)
        basis = RBasis(const[:, None], np.zeros(1), basis.trunc_sigma)
    abs_eps = progressive_basis_threshold(basis, eps_pod)

    stacks = [gamma_stack(model, t.parameter, t.fields) for t in trajectories]
    norms = np.stack([np.abs(s).max(axis=1) for s in stacks])
    p_idx, k_idx = np.unravel_index(int(np.argmax(norms)), norms.shape)
    first_residual = stacks[p_idx][k_idx]
    delta1 = float(norms[p_idx, k_idx])
    if delta1 <= RESIDUAL_FLOOR:
        # identically vanishing nonlinearity: seed with a constant field so
        # the rank-1 structure exists (its coefficients stay zero online)
        first_residual = np.ones(model.grid.n_points)
    entry = EimSelection(
        rank=0,
        parameter=trajectories[p_idx].parameter,
        time_index=int(k_idx),
        point=0,
        residual_norm=delta1,
        provenance="hf",
    )
    eim = eim_append(EimApprox.empty(model.grid.n_points),
                     first_residual, entry)

    state = PreimState(
        model=model,
        p_train=p_train,
        gram=gram,
        eps_pod=eps_pod,
        abs_pod_eps=abs_eps,
        variant=variant,
        basis=basis,
        eim=eim,
    )
    for traj in trajectories:
        state.register_hf(traj)
    state.refresh_rom()
    state.deltas_eim.append(delta1)
    state.log.append(PreimIterationLog(
        iteration=1,
        parameter=entry.parameter,
        time_index=entry.time_index,
        parameter_reselected=entry.parameter,
        time_index_reselected=entry.time_index,
        new_hf=True,
        rank_increased=True,
        delta_eim=delta1,
        basis_size=basis.size,
        n_hf_parameters=len(state.p_hf),
    ))
    return state


def update_eim(state, eps_eim, variant=None):
    """One greedy improvement attempt of the interpolation basis.

    Selects the worst (parameter, time-node) pair over surrogate fields,
    computes a new HF trajectory if the parameter has none, re-selects the
    pair over the HF data (``preim`` variant only), and appends a new point
    and basis field unless the final residual is already below ``eps_eim``.
    """
    variant = state.variant if variant is None else variant
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    model = state.model
    n_time = model.n_steps + 1
    hf_set = state.p_hf_set
    hf_mask = np.array([mu in hf_set for mu in state.p_train])

    stacks = []
    for mu in state.p_train:
        if variant == "user":
            traj = _rb_trajectory(state, mu)
        else:
            traj = surrogate_field(state, mu)
        stacks.append(gamma_stack(model, float(mu), traj.fields))
    all_fields = np.concatenate(stacks, axis=0)
    residuals = residual_fields(state.eim, all_fields)
    norms = np.abs(residuals).max(axis=1).reshape(state.p_train.size, n_time)

    p_idx, k_idx, _ = _greedy_argmax(norms, hf_mask)
    mu_m = float(state.p_train[p_idx])
    k_m = int(k_idx)
    r_tilde = residuals[p_idx * n_time + k_idx]
    r_tilde_norm = float(np.abs(r_tilde).max())

    new_parameter = None
    new_trajectory = None
    mu_bar, k_bar = mu_m, k_m
    hf_stack_cache = {}
    if mu_m not in hf_set:
        new_trajectory = hf_solve(model, mu_m)
        new_parameter = mu_m
        if variant == "preim":
            # re-selection over the enlarged HF set; rows for parameters
            # already in the set were HF-based in the greedy sweep above
            new_res = residual_fields(
                state.eim, gamma_stack(model, mu_m, new_trajectory.fields))
            hf_stack_cache[mu_m] = new_res
            best = -1.0
            for idx, mu in enumerate(state.p_train):
                mu = float(mu)
                if mu == mu_m:
                    row = np.abs(new_res).max(axis=1)
                elif mu in hf_set:
                    row = norms[idx]
                else:
                    continue
                k_best = int(np.argmax(row))
                if row[k_best] > best:
                    best = float(row[k_best])
                    mu_bar, k_bar = mu, k_best

    if variant == "user":
        r_bar = r_tilde
        provenance = "rb"
    else:
        if mu_bar in hf_stack_cache:
            r_bar = hf_stack_cache[mu_bar][k_bar]
        else:
            traj = new_trajectory if mu_bar == new_parameter \
                else state.hf_store[mu_bar]
            g = gamma_field(model, mu_bar, traj.fields[k_bar])
            r_bar = residual_fields(state.eim, g)[0]
        provenance = "hf"
    r_bar_norm = float(np.abs(r_bar).max())

    if r_bar_norm < eps_eim or r_bar_norm <= RESIDUAL_FLOOR:
        # discard the selection; the error indicator falls back to the
        # surrogate-based residual
        return UpdateEimResult(
            incr_rank=False,
            eim_out=state.eim,
            selected=(mu_m, k_m),
            reselected=(mu_bar, k_bar),
            new_parameter=new_parameter,
            new_trajectory=new_trajectory,
            delta_eim=r_tilde_norm,
            r_tilde_norm=r_tilde_norm,
            r_bar_norm=r_bar_norm,
        )
    entry = EimSelection(
        rank=0,
        parameter=mu_bar,
        time_index=k_bar,
        point=0,
        residual_norm=r_bar_norm,
        provenance=provenance,
    )
    return UpdateEimResult(
        incr_rank=True,
        eim_out=eim_append(state.eim, r_bar, entry),
        selected=(mu_m, k_m),
        reselected=(mu_bar, k_bar),
        new_parameter=new_parameter,
        new_trajectory=new_trajectory,
        delta_eim=r_bar_norm,
        r_tilde_norm=r_tilde_norm,
        r_bar_norm=r_bar_norm,
    )


def error_estimator(state, mu):
    """Residual-based surrogate error indicator (non-certified).

    Time-integrated Euclidean norm of the full-order residual of the
    reconstructed reduced trajectory, with the nonlinearity replaced by its
    interpolation; zero exactly when the reduced trajectory satisfies the
    discrete equations.
    """
    model = state.model
    mu = float(mu)
    fields = reconstruct(state.basis, online_solve(state.rom, mu)).fields
    eim = state.eim
    total = 0.0
    for k in range(1, model.n_steps + 1):
        dt = model.steps[k - 1]
        u_prev = fields[k - 1]
        g = gamma_field(model, mu, u_prev)
        g_eim = eim_evaluate(eim, eim_coefficients(eim, g[eim.points]))
        rho = dt * model.load_vector(k) + model.mass @ u_prev
        rho -= dt * assemble_nonlinear_vector(model, u_prev, g_eim)
        rho -= model.mass @ fields[k] + dt * (model.stiffness @ fields[k])
        total += dt * float(rho @ rho)
    return float(np.sqrt(total))


def _merge_rb(state, trajectory):
    """UPDATE_RB followed by a reduced-operator rebuild when needed."""
    if trajectory is None:
        return
    new_basis = update_rb(state.basis, trajectory.fields,
                          state.abs_pod_eps, state.gram)
    if new_basis is not state.basis:
        state.basis = new_basis
        state.refresh_rom()


def preim_offline(model, p_train, eps_pod, eps_eim, eps_rb=None,
                  variant="preim", rb_criterion=False, p_hf_init=None,
                  max_iterations=None, gram=None):
    """Full progressive offline stage.

    Parameters
    ----------
    model : HFModel
    p_train : array-like
        Ordered training parameters.
    eps_pod, eps_eim : float
        Basis truncation and interpolation thresholds.
    eps_rb : float, optional
        Reduced-basis error threshold; only used with ``rb_criterion``.
    variant : {"preim", "preim-nr", "user"}
    rb_criterion : bool
        Also require ``max_mu Delta(mu) <= eps_rb`` for termination. Off by
        default: the interpolation error dominates in the benchmark cases.
    p_hf_init : list, optional
        Initial parameters solved at high fidelity (default: first of
        ``p_train``).
    max_iterations : int, optional
        Safety cap; default ``10 * P * K``.

    Returns
    -------
    (ReducedModel, PreimState)
    """
    if eps_pod <= 0 or eps_eim <= 0:
        raise ValueError("thresholds must be positive")
    if rb_criterion and (eps_rb is None or eps_rb <= 0):
        raise ValueError("rb_criterion requires a positive eps_rb")
    state = init_preim(model, p_train, p_hf_init=p_hf_init, eps_pod=eps_pod,
                       gram=gram, variant=variant)
    if max_iterations is None:
        max_iterations = 10 * state.p_train.size * model.n_steps

    if rb_criterion:
        state.deltas_rb.append(max(
            error_estimator(state, mu) for mu in state.p_train))

    def _unconverged():
        if state.deltas_eim[-1] > eps_eim:
            return True
        return rb_criterion and state.deltas_rb[-1] > eps_rb

    m = 1
    while _unconverged():
        if m >= max_iterations:
            raise NonTerminationError(
                f"progressive loop exceeded {max_iterations} iterations "
                f"(delta_eim={state.deltas_eim[-1]:.3e}, "
                f"rank={state.eim.rank}, HF parameters={len(state.p_hf)})"
            )
        m += 1
        hf_before = len(state.p_hf)

        result = update_eim(state, eps_eim)
        if result.new_trajectory is not None:
            state.register_hf(result.new_trajectory)
        pending = result.new_trajectory

        while not result.incr_rank:
            _merge_rb(state, pending)
            pending = None
            if result.delta_eim <= eps_eim and not rb_criterion:
                break
            result = update_eim(state, eps_eim)
            if result.new_trajectory is not None:
                state.register_hf(result.new_trajectory)
            pending = result.new_trajectory
            if result.incr_rank:
                break
            if result.delta_eim <= eps_eim and not rb_criterion:
                break
            if pending is not None:
                continue  # a fresh HF trajectory already steers progress
            remaining = [float(mu) for mu in state.p_train
                         if float(mu) not in state.p_hf_set]
            if not remaining:
                break  # every parameter already has HF data
            scores = np.array([error_estimator(state, mu)
                               for mu in remaining])
            traj = hf_solve(model, remaining[int(np.argmax(scores))])
            state.register_hf(traj)
            pending = traj

        if result.incr_rank:
            state.eim = result.eim_out
        _merge_rb(state, pending)
        state.refresh_rom()

        state.deltas_eim.append(result.delta_eim)
        if rb_criterion:
            state.deltas_rb.append(max(
                error_estimator(state, mu) for mu in state.p_train))
        state.log.append(PreimIterationLog(
            iteration=m,
            parameter=result.selected[0],
            time_index=result.selected[1],
            parameter_reselected=result.reselected[0],
            time_index_reselected=result.reselected[1],
            new_hf=len(state.p_hf) > hf_before,
            rank_increased=result.incr_rank,
            delta_eim=result.delta_eim,
            basis_size=state.basis.size,
            n_hf_parameters=len(state.p_hf),
        ))

    return state.rom, state


def save_preim_log_csv(state, path):
    """Iteration log with both selected pairs, one row per iteration."""
    rows = [
        (row.iteration, row.parameter, row.time_index,
         row.parameter_reselected, row.time_index_reselected,
         int(row.new_hf), float(row.delta_eim), row.basis_size,
         row.n_hf_parameters)
        for row in state.log
    ]
    write_csv(path, rows, header=[
        "m", "mu", "k", "mu_bar", "k_bar", "new_hf", "delta_eim",
        "n_rb", "card_p_hf",
    ])
