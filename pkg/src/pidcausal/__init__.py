"""Partial information decomposition and PID-based causal structure discovery."""
from .probcore import (
    CIQuery,
    JointTable,
    ProbabilityError,
    Variable,
    conditional_mutual_information,
    entropy,
    mutual_information,
)
from .lattice import Antichain, AtomMap, RedundancyLattice, enumerate_lattice, moebius_atoms
from .pid import (
    PIDAtoms,
    SupervariableQuery,
    check_desideratum_monotonicity,
    pid_bivariate,
    pid_trivariate,
    synergy_pair,
    unique_info_vs_rest,
)
from .bayesnet import (
    BayesianNetwork,
    Cpt,
    Dag,
    check_collider_amplification,
    check_faithfulness,
    check_persistent_relevance,
    d_separated,
    joint_from_bn,
    random_bn,
)
from .hypergraph import (
    BayesianHypergraph,
    DirectedHyperedge,
    DirectedHypergraph,
    canonical_dag,
    check_hypergraph_collider_amplification,
    joint_from_bh,
)
from .discovery import (
    BudgetError,
    DiscoveredStructure,
    InconsistencyError,
    discover_bayesnet,
    discover_hypergraph,
    hyperedge_signature_check,
)

__version__ = "0.1.0"
