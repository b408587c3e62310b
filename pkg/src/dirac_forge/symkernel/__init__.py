"""Exact symbolic kernel: atoms, canonical rational expressions, calculus, reduction."""

from .atoms import AssumptionSet, Atom, AtomKind, AtomTable, AtomTableError, Flags
from .calculus import (
    PhaseSpaceError,
    canonical_equal,
    d_dtau,
    d_dtau_n,
    differentiate,
    euler_operator,
    families,
    leibniz_expand,
    poisson,
)
from .exact import ExactnessResult, OutsideFragmentError, exact_total_derivative
from .expr import ONE, ZERO, Expr, ZeroDenominatorError
from .parser import ParseError, parse_expression
from .reduce import (
    AssumptionError,
    ReductionError,
    Relation,
    Surface,
    apply_relations,
    is_known_nonzero,
    linear_candidates,
    missing_assumption,
    normalize_constraint,
    reduce_mod,
    require_nonzero,
    solve_linear,
)
