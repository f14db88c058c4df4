"""murmurlab: batch analysis of elliptic-curve murmurations and BSD invariants.

The package is organised around a single data flow: a canonical curve CSV is
ingested into a CurveTable (`curves`), Frobenius traces are computed for a
shared prime list into a TraceMatrix (`traces`), and the statistical layers
(`windows`, `stratify`, `confound`, `diagnostics`, `lfunctions`) operate on
those two immutable objects.  `cli` wires everything into reproducible runs.
"""

__version__ = "0.1.0"

from .curves import CurveRecord, CurveTable, parse_curve_table  # noqa: F401
from .traces import PrimeList, TraceMatrix, build_trace_matrix  # noqa: F401
