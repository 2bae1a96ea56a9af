"""Python bindings for the stafem operator-assembly library."""

from ._stafem import *  # noqa: F401,F403
from ._stafem import Assembler, csv_columns


def to_scipy(assembler: Assembler, eps: float = 0.0):
    """Finalized operator as a scipy.sparse.csr_matrix."""
    import scipy.sparse

    data, indices, indptr, n = assembler.finalize(eps)
    return scipy.sparse.csr_matrix((data, indices, indptr), shape=(n, n))


def frame_table(result):
    """Per-frame benchmark rows as a list of dicts keyed by csv_columns()."""
    import csv
    import io

    return list(csv.DictReader(io.StringIO(result.csv())))
