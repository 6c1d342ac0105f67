"""Linearized models, stability certificates and simulation for unbalanced grid-forming networks."""

__version__ = "0.1.0"

from .branches import BranchKind, admittance_blocks, branch_pf_matrix, jacobian_blocks, verify_branch_properties
from .controllers import ControllerSpec, DroopLaw, control_matrices, normalize_gains, state_layout
from .errors import (
    DocumentError,
    GfmError,
    ModelError,
    NonConformingGains,
    NonUniformDroop,
    NotStable,
    RankDeficientInterior,
    ValidationFailed,
)
from .io import NetworkDocument, parse, serialize
from .network import assemble, kron_reduce, partition, recover_interior
from .simulate import (
    LoadStep,
    balanced_load,
    correlation_study,
    delta_ac_load,
    simulate,
    steady_state,
    sweep,
    unbalance_factors,
)
from .stability import assemble_closed_loop, certify, check_stability_conditions, h_power, nullspace
from .topology import BranchSpec, NetworkModel, NodeSpec, validate
from .examples import EXAMPLES, example_path, load_example
