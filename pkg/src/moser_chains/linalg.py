"""Small dense linear algebra over exact fields (and floats).

Everything here works on lists of lists whose entries support +, -, *, /
and truthiness (rationals, GaussianRational, complex).  Exact entries use
first-nonzero pivoting so results are deterministic; numeric entries can ask
for partial (max-magnitude) pivoting.

Only what the package needs: reduced row echelon form, rank, a particular
solution with free variables pinned to zero, and a nullspace basis.
"""

from __future__ import annotations

from .errors import InternalInvariantError


def _magnitude(e):
    return abs(complex(e))


def rref(rows, pivoting="first"):
    """Reduced row echelon form; returns (new_rows, pivot_columns)."""
    rows = [list(r) for r in rows]
    m = len(rows)
    ncols = len(rows[0]) if m else 0
    pivot_cols = []
    r = 0
    for c in range(ncols):
        if r == m:
            break
        if pivoting == "partial":
            best = 0.0
            piv = None
            for i in range(r, m):
                mag = _magnitude(rows[i][c])
                if mag > best:
                    best, piv = mag, i
        else:
            piv = next((i for i in range(r, m) if rows[i][c]), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        pv = rows[r][c]
        rows[r] = [e / pv for e in rows[r]]
        for i in range(m):
            if i != r and rows[i][c]:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivot_cols.append(c)
        r += 1
    return rows, pivot_cols


def rank(rows):
    """Exact rank (first-nonzero pivoting; entries must be exact)."""
    if not rows:
        return 0
    _, pivot_cols = rref(rows)
    return len(pivot_cols)


def solve(rows, rhs, pivoting="first"):
    """One solution of A x = b with free variables set to zero.

    Returns the solution list, or None if the system is inconsistent.
    """
    if not rows:
        return []
    ncols = len(rows[0])
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    red, pivot_cols = rref(aug, pivoting)
    if ncols in pivot_cols:
        return None  # pivot in the augmented column: inconsistent
    zero = rows[0][0] - rows[0][0]
    x = [zero] * ncols
    row_idx = 0
    for c in pivot_cols:
        x[c] = red[row_idx][ncols]
        row_idx += 1
    return x


def nullspace(rows):
    """Basis of the kernel of A (exact entries)."""
    if not rows:
        return []
    ncols = len(rows[0])
    red, pivot_cols = rref(rows)
    free_cols = [c for c in range(ncols) if c not in pivot_cols]
    one = None
    for r in red:
        for e in r:
            if e:
                one = e / e
                break
        if one is not None:
            break
    if one is None:
        # an all-zero matrix never appears in this package's call sites, and
        # its entries alone cannot synthesize a unit for the basis vectors
        raise InternalInvariantError("nullspace of an all-zero matrix requested")
    zero = one - one
    basis = []
    for fc in free_cols:
        v = [zero] * ncols
        v[fc] = one
        for row_idx, pc in enumerate(pivot_cols):
            v[pc] = -red[row_idx][fc]
        basis.append(v)
    return basis
