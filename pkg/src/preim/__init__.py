"""Reduced-order modeling of nonlinear parabolic heat transfer.

High-fidelity P1 finite elements with semi-implicit time stepping, snapshot
POD, empirical interpolation of the nonlinearity, a mesh-independent online
stage, and progressive offline training that replaces most high-fidelity
solves with reduced-order surrogates.
"""

from .archive import load_archive, save_archive
from .bench import (
    CaseConfig,
    eim_sup_error,
    get_case,
    run_comparison,
    run_pipeline,
    spacetime_error,
    testcase_a,
    testcase_b,
)
from .eim import (
    EimApprox,
    eim_append,
    eim_coefficients,
    eim_evaluate,
    standard_eim,
)
from .errors import DegenerateResidualError, NonTerminationError, NumericalError
from .estimators import EmpiricalInterpolator, HeatTransferROM, SnapshotPOD
from .fem import (
    HFModel,
    Nonlinearity,
    Trajectory,
    assemble_load,
    assemble_mass,
    assemble_nonlinear_vector,
    assemble_stiffness,
    gamma_field,
    hf_solve,
)
from .linalg import forward_substitution, solve_spd, sym_eig
from .mesh import (
    EvalGrid,
    Mesh,
    element_gradients,
    eval_grid,
    generate_perforated_plate,
)
from .pod import GramOperator, RBasis, pod, progressive_rb, project, update_rb
from .progressive import (
    PreimState,
    error_estimator,
    init_preim,
    preim_offline,
    surrogate_field,
    update_eim,
)
from .rom import (
    ReducedModel,
    ReducedTrajectory,
    galerkin_solve,
    online_solve,
    reconstruct,
    reduce_operators,
)

__version__ = "0.1.0"
