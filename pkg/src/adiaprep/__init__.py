"""Adiabatic preparation of paired thermal and injective tensor states.

Build a commuting-model target as local filters applied to entangled
pairs, derive its frustration-free parent, walk the parent segment by
segment under a smooth schedule, and certify the walk numerically: gaps,
localized truncations, cluster-expansion certificates at high temperature,
and Metropolis generators mapped to stoquastic Hamiltonians.
"""
from .lattice import (Lattice, EdgeSet, build_chain, build_grid,
                      connected_edge_sets, disjoint_grouping, graph_distance,
                      set_distance)
from .linop import (GlobalOperator, LocalOperator, embed, embed_in_order,
                    apply_in_order, eig_hermitian, herm_exp, hermiticity_defect,
                    operator_norm, pseudo_inverse)
from .model import (ClassicalIsing, DensityMatrix, GeneratorMatrix, ModelSpec,
                    StateVector, classical_gibbs_probs, mc_hamiltonian,
                    metropolis_generator, product_pair_state, purify_classical,
                    state_overlap, system_hamiltonian, target_state,
                    trace_ancillas, trace_distance)
from .parent import (PathSpec, SpectralReport, GapRelaxationReport,
                     instantaneous_ground_state, localized_hamiltonian,
                     localized_terms, pair_projector, parent_hamiltonian,
                     parent_term, path_A, radius_from_scaling,
                     sequential_hamiltonian, sequential_terms,
                     segment_split_terms, spectral_report,
                     verify_gap_relaxation)
from .schedule import (Schedule, endpoint_flatness, gevrey_density, gevrey_f,
                       gevrey_schedule, linear_schedule, schedule_from_csv,
                       schedule_from_table)
from .evolve import (AdiabaticBound, EvolutionResult, ExpansionTerm,
                     LocalizationTable, SegmentDiagnostics, SweepRow,
                     SweepTable, adiabatic_error, adiabatic_expansion,
                     compare_localization, error_vs_runtime_sweep,
                     estimate_gevrey_constants, expansion_state, evolve_segment,
                     integrate, run_grouped, run_sequential, theorem1_bound)
from .cluster import (CertificationError, ClusterTerm, GapScanRow,
                      HighTempResult, TruncationCertificate, cluster_f,
                      cluster_term, exact_noncommuting_parent, growth_constant,
                      high_temp_prepare, mobius_check, mobius_hat,
                      truncated_parent, verify_noncommuting_gap)

__version__ = "0.1.0"
