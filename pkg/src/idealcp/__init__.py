"""Complete positivity of sparse symmetric tensors via clique-sparse moment relaxations."""
from .cliques import CliqueSet, brute_force_cliques, maximal_cliques, necessary_condition
from .decompose import CpVerdict, DecomposeOptions, VerdictKind, decompose
from .errors import (DimensionTooLarge, DuplicateIndex, ExtractionFailed, IdealCPError,
                     InvalidDegree, InvalidIndex, LevelTooLow, NotNonnegative, ParseError,
                     ShapeError, UncoveredPositiveEntry)
from .extraction import check_flatness, extract_atoms, lift_sparse, numerical_rank
from .moments import (ConicProblem, MonomialBasis, Polynomial, Tms, assemble_dense,
                      assemble_sparse, monomial_basis, random_sos_objective)
from .sdp import SolveOptions, SolveResult, Status, solve, verify_certificate, verify_result
from .tensor import (Atom, Decomposition, SymmetricTensor, dominance_violations,
                     from_decomposition, l1_distance, outer_power, random_binary_sparse, random_cp)

__version__ = "0.1.0"
