"""Central numerical tolerances."""

FEASIBILITY = 1e-8
SYMMETRY = 1e-10
EIGEN = 1e-12
# weights at or below this are treated as absent from a portfolio
SUPPORT = 1e-10
# exhaustive support enumeration is allowed up to this many subsets
ENUMERATION_LIMIT = 2_000_000
