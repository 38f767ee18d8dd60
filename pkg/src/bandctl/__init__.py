"""Open-loop control of diffusion on random graphs toward bandlimited states."""

from .gsp import (ADJACENCY, LAPLACIAN, BandSpec, Graph, ShiftOperator, SpectralBasis,
                  bandlimiting_filter, build_shift, eigendecompose, gft, graph_basis, igft,
                  spectral_norm, synthesize_bandlimited)
from .random_graph import (ConnectivityError, EdgeListError, generate_er, generate_geometric,
                           load_bundled, load_edge_list, rng_stream, sample_res, save_edge_list)
from .dynamics import (DiffusionModel, mean_evolution, mean_transition, selection_matrix,
                       simulate, transition_matrix)
from .mse import (MseCoefficients, StackedSystem, gamma_brute_force, gamma_exact,
                  mse_closed_form, mse_coefficients, mse_upper_bound, stack)
from .control import (ControlPlan, InbandSystem, InfeasibleError, biased_control,
                      deterministic_baseline, exhaustive_select, greedy_select_biased,
                      greedy_select_unbiased, inband_controllability_matrix, inband_system,
                      min_energy_control, necessary_nodes, random_select, sufficient_selection)

__version__ = "0.1.0"
