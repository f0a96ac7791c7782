"""kpl: a laboratory for pipelined conjugate gradient solvers.

Sparse SPD linear solvers (classic, pipelined, shifted-pipelined,
variable-shift, residual-replacement CG) with bit-reproducible kernels,
explicit-vs-recursive gap instrumentation, rounding-error propagation
analysis, and an a-posteriori shift selector.
"""

from .sparse import (SparseMatrix, axpy, dot, laplacian_2d, norm2, random_spd,
                     spmv)
from .mmio import MatrixMarketError, read_matrix_market, write_matrix_market
from .precond import (Preconditioner, PreconditionerBreakdown, identity,
                      make_ic0, make_jacobi)
from .solvers import (BreakdownError, DEFAULT_RR_THRESHOLD, IterationRecord,
                      SolveResult, SolverConfig, SolverState, UNIT_ROUNDOFF,
                      gap_vectors, measure_gaps, solve, solve_cg, solve_pcg,
                      solve_pcg_rr, solve_pcg_shifted, solve_pcg_var_shifted)
from .stability import (CoefficientHistory, LocalErrorBounds, ShiftSweep,
                        VectorNorms, amplification_factor, default_sigma_grid,
                        gap_epsilon_bounds, local_error_bounds,
                        local_error_bounds_variable, matrix_2norm,
                        modeled_gap_evolution, propagation_matrix,
                        propagation_matrix_variable, propagation_product,
                        select_shift)
from .harness import (BenchmarkDescriptor, BenchmarkRow, REFERENCE_BENCHMARKS,
                      RunConfig, build_preconditioner, build_rhs, emit_history,
                      fetch_matrix, load_history, load_matrix,
                      parse_sigma_grid, run_analyze_shift,
                      run_benchmark_suite, run_solve)

__version__ = "0.1.0"
