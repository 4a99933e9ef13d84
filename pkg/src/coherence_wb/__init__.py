"""Compositional resource theories of coherence on finite-dimensional quantum processes."""
from .linalg import DEFAULT_TOL, Tolerance
from .process import AtomicSystem, QuantumProcess, SystemLabel, TRIVIAL
from .decoherence import (DecoherenceFamily, DecoherenceMechanism, DecoherenceProcess, GroupRepresentation,
                          check_family_rule, closure_property_test, computational_dephasing, make_block_dephasing,
                          make_copy_mechanism, make_dephasing, make_reference_frame_mechanism, make_twirl,
                          validate_decoherence)
from .free_sets import (FreeSetSpec, free_set_closure_test, is_cdio, is_ctio, is_dio, is_mechanism_invariant,
                        is_mio, is_tio, membership, minimal_constraint_check)
from .convertibility import (ConversionQuery, FeasibilityResult, Resource, SolverConfig, build_preorder,
                             can_convert, evaluate_monotone, separation_search, verify_certificate)
from .envelope import DProcess, IdempotentLabel, KProcess, dp_dio_closure_test, is_dp_dio, is_k_process

__version__ = "0.1.0"
