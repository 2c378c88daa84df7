"""Pure-numpy kernel implementations (fallback backend).

Each function here has a numba twin in ``_kernels_nb`` with the same
signature and bit-identical semantics.  The expression interpreter is a
postfix stack machine over the opcode arrays produced by
``expr.compile_program``; the poisoning rules (division by zero -> NaN,
NaN propagates through max/min and comparison operands) are spelled out
explicitly so both backends agree.
"""

from __future__ import annotations

import numpy as np

from .expr import (
    OP_ABS,
    OP_ADD,
    OP_CONST,
    OP_DIV,
    OP_MAX,
    OP_MIN,
    OP_MUL,
    OP_NEG,
    OP_POW,
    OP_SEL_EQ,
    OP_SEL_LE,
    OP_SEL_LT,
    OP_SUB,
    OP_VAR,
)

# Orbit kernel status codes, shared with the numba twins.
ORBIT_STOPPED = 0
ORBIT_HIT_CAP = 1
ORBIT_EVAL_ERROR = 2


def eval_rows(code: np.ndarray, imm: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Run one program over ``X`` (k rows of variable bindings) at once."""
    k = X.shape[0]
    stack: list[np.ndarray] = []
    with np.errstate(all="ignore"):
        for i in range(code.size):
            op = code[i]
            if op == OP_CONST:
                stack.append(np.full(k, imm[i]))
            elif op == OP_VAR:
                stack.append(X[:, int(imm[i])].astype(np.float64, copy=True))
            elif op == OP_NEG:
                stack[-1] = -stack[-1]
            elif op == OP_ABS:
                stack[-1] = np.abs(stack[-1])
            elif op == OP_ADD:
                b = stack.pop()
                stack[-1] = stack[-1] + b
            elif op == OP_SUB:
                b = stack.pop()
                stack[-1] = stack[-1] - b
            elif op == OP_MUL:
                b = stack.pop()
                stack[-1] = stack[-1] * b
            elif op == OP_DIV:
                b = stack.pop()
                a = stack[-1]
                stack[-1] = np.where(b == 0.0, np.nan, np.divide(a, np.where(b == 0.0, 1.0, b)))
            elif op == OP_POW:
                b = stack.pop()
                stack[-1] = np.power(stack[-1], b)
            elif op == OP_MAX:
                b = stack.pop()
                stack[-1] = np.maximum(stack[-1], b)
            elif op == OP_MIN:
                b = stack.pop()
                stack[-1] = np.minimum(stack[-1], b)
            else:
                on_false = stack.pop()
                on_true = stack.pop()
                rhs = stack.pop()
                lhs = stack[-1]
                if op == OP_SEL_LT:
                    picked = np.where(lhs < rhs, on_true, on_false)
                elif op == OP_SEL_LE:
                    picked = np.where(lhs <= rhs, on_true, on_false)
                else:
                    picked = np.where(lhs == rhs, on_true, on_false)
                stack[-1] = np.where(np.isnan(lhs) | np.isnan(rhs), np.nan, picked)
    return stack[0]


def eval_scalar(code: np.ndarray, imm: np.ndarray, v0: float, v1: float) -> float:
    """Scalar interpreter for sequential loops (orbits); <= 2 variables."""
    stack: list[float] = []
    for i in range(code.size):
        op = code[i]
        if op == OP_CONST:
            stack.append(imm[i])
        elif op == OP_VAR:
            stack.append(v0 if imm[i] == 0.0 else v1)
        elif op == OP_NEG:
            stack[-1] = -stack[-1]
        elif op == OP_ABS:
            stack[-1] = abs(stack[-1])
        elif op == OP_ADD:
            b = stack.pop()
            stack[-1] = stack[-1] + b
        elif op == OP_SUB:
            b = stack.pop()
            stack[-1] = stack[-1] - b
        elif op == OP_MUL:
            b = stack.pop()
            stack[-1] = stack[-1] * b
        elif op == OP_DIV:
            b = stack.pop()
            stack[-1] = np.nan if b == 0.0 else stack[-1] / b
        elif op == OP_POW:
            b = stack.pop()
            with np.errstate(all="ignore"):
                stack[-1] = float(np.power(np.float64(stack[-1]), np.float64(b)))
        elif op == OP_MAX:
            b = stack.pop()
            a = stack[-1]
            stack[-1] = np.nan if (a != a or b != b) else (a if a > b else b)
        elif op == OP_MIN:
            b = stack.pop()
            a = stack[-1]
            stack[-1] = np.nan if (a != a or b != b) else (a if a < b else b)
        else:
            on_false = stack.pop()
            on_true = stack.pop()
            rhs = stack.pop()
            lhs = stack[-1]
            if lhs != lhs or rhs != rhs:
                stack[-1] = np.nan
            elif op == OP_SEL_LT:
                stack[-1] = on_true if lhs < rhs else on_false
            elif op == OP_SEL_LE:
                stack[-1] = on_true if lhs <= rhs else on_false
            else:
                stack[-1] = on_true if lhs == rhs else on_false
    return stack[0]


def scan_triangle(
    D: np.ndarray, delta: float, reflexive: bool
) -> tuple[int, int, int, float, int]:
    """Scan all (x, y, z) triples of a distance matrix for the triangle rule.

    Violation score is lhs - rhs where the axiom requires lhs <= rhs + delta;
    returns (i, j, k, best_score, violation_count) with the witness chosen by
    largest score, ties by lexicographic order, and (-1, -1, -1) when no
    entry scores above delta.
    """
    n = D.shape[0]
    diag = np.diagonal(D)
    best = -np.inf
    bi = bj = bk = -1
    count = 0
    for x in range(n):
        # slab[y, z] = D[x, z] - D[x, y] - D[y, z] (+ D[y, y] if reflexive)
        slab = D[x, :][None, :] - D[x, :][:, None] - D
        if reflexive:
            slab = slab + diag[:, None]
        count += int(np.count_nonzero(slab > delta))
        slab_best = float(slab.max()) if n else -np.inf
        if slab_best > best:
            flat = int(np.argmax(slab == slab_best))
            best = slab_best
            bi, bj, bk = x, flat // n, flat % n
    if best <= delta:
        return -1, -1, -1, best, count
    return bi, bj, bk, best, count


def _window_tight(
    coded: np.ndarray, immd: np.ndarray, pts: list[float], tol: float, window: int
) -> bool:
    lo = len(pts) - window
    for a in range(lo, len(pts)):
        for b in range(a + 1, len(pts)):
            dv = eval_scalar(coded, immd, pts[a], pts[b])
            if not (dv <= tol):
                return False
    return True


def orbit_analytic(
    codeT: np.ndarray,
    immT: np.ndarray,
    coded: np.ndarray,
    immd: np.ndarray,
    x0: float,
    max_iters: int,
    tol: float,
    window: int,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Picard orbit of an analytic self-map with early stop.

    Stops once the trailing window has settled: the last ``window`` step
    lengths all <= tol and the last ``window`` orbit points pairwise
    within tol (so a stopped orbit always reads as d-asymptotic).
    Returns (orbit, rho, status).
    """
    orbit = [float(x0)]
    rho: list[float] = []
    status = ORBIT_HIT_CAP
    for _ in range(max_iters):
        x = orbit[-1]
        nxt = eval_scalar(codeT, immT, x, 0.0)
        if not np.isfinite(nxt):
            status = ORBIT_EVAL_ERROR
            break
        step = eval_scalar(coded, immd, x, nxt)
        if not np.isfinite(step):
            status = ORBIT_EVAL_ERROR
            break
        orbit.append(nxt)
        rho.append(step)
        if step <= tol and len(orbit) >= window:
            lo = max(0, len(rho) - window)
            if all(r <= tol for r in rho[lo:]) and _window_tight(
                coded, immd, orbit, tol, window
            ):
                status = ORBIT_STOPPED
                break
    return np.asarray(orbit), np.asarray(rho), status


def orbit_table(
    tmap: np.ndarray,
    D: np.ndarray,
    i0: int,
    max_iters: int,
    tol: float,
    window: int,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Tabulated twin of :func:`orbit_analytic` (indices instead of points)."""
    orbit = [int(i0)]
    rho: list[float] = []
    status = ORBIT_HIT_CAP
    for _ in range(max_iters):
        i = orbit[-1]
        j = int(tmap[i])
        orbit.append(j)
        step = float(D[i, j])
        rho.append(step)
        if step <= tol and len(orbit) >= window:
            lo_r = max(0, len(rho) - window)
            ok = all(r <= tol for r in rho[lo_r:])
            lo = len(orbit) - window
            for a in range(lo, len(orbit)):
                if not ok:
                    break
                for b in range(a + 1, len(orbit)):
                    if not (D[orbit[a], orbit[b]] <= tol):
                        ok = False
                        break
            if ok:
                status = ORBIT_STOPPED
                break
    return np.asarray(orbit, dtype=np.int64), np.asarray(rho), status


def phi_orbit_chunk(
    code: np.ndarray, imm: np.ndarray, r0: float, u: np.ndarray, tol: float
) -> tuple[int, float, int]:
    """Advance r <- u[k] * phi(r) until r <= tol or the chunk is spent.

    Returns (steps_used, r_final, status) with status 0 when the orbit
    dropped to tol, 1 when the chunk ran out, 2 on a non-finite value.
    """
    r = float(r0)
    for k in range(u.size):
        if r <= tol:
            return k, r, 0
        r = u[k] * eval_scalar(code, imm, r, 0.0)
        if not np.isfinite(r):
            return k + 1, r, 2
    return u.size, r, 0 if r <= tol else 1


def lemma1_scan_points(
    coded: np.ndarray,
    immd: np.ndarray,
    pts: np.ndarray,
    eps: float,
    j_hi: int,
) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Minimal witness pairs (m(j), n(j)) for j = 0..j_hi over a point prefix.

    m(j) is the least m >= j having some n > m with d(x_m, x_n) >= eps and
    n(j) the least such n for m(j).  Rows stop at the first j whose search
    comes up empty.  Returns (m_arr, n_arr, rows, status); status 2 flags a
    non-finite distance.
    """
    last = pts.size - 1
    m_arr = np.full(j_hi + 1, -1, dtype=np.int64)
    n_arr = np.full(j_hi + 1, -1, dtype=np.int64)
    rows = 0
    chunk = 8192
    m_floor = 0
    X = np.empty((chunk, 2))
    for j in range(j_hi + 1):
        m = max(j, m_floor)
        hit_n = -1
        while m < last:
            base = pts[m]
            lo = m + 1
            while lo <= last:
                hi = min(last + 1, lo + chunk)
                block = X[: hi - lo]
                block[:, 0] = base
                block[:, 1] = pts[lo:hi]
                vals = eval_rows(coded, immd, block)
                if np.isnan(vals).any() or np.isinf(vals).any():
                    return m_arr, n_arr, rows, 2
                idx = np.nonzero(vals >= eps)[0]
                if idx.size:
                    hit_n = lo + int(idx[0])
                    break
                lo = hi
            if hit_n >= 0:
                break
            m += 1
        if hit_n < 0:
            break
        m_arr[j] = m
        n_arr[j] = hit_n
        m_floor = m
        rows = j + 1
    return m_arr, n_arr, rows, 0


def late_pair_max_points(
    coded: np.ndarray,
    immd: np.ndarray,
    pts: np.ndarray,
    start: int,
) -> tuple[float, int, int, int]:
    """Largest d(x_m, x_n) over pairs start <= m < n; ties to the lex-least."""
    last = pts.size - 1
    best = -np.inf
    bi = bj = -1
    status = 0
    for m in range(start, last):
        row = np.empty((last - m, 2))
        row[:, 0] = pts[m]
        row[:, 1] = pts[m + 1 :]
        vals = eval_rows(coded, immd, row)
        if np.isnan(vals).any() or np.isinf(vals).any():
            return best, bi, bj, 2
        row_best = float(vals.max())
        if row_best > best:
            best = row_best
            bi = m
            bj = m + 1 + int(np.argmax(vals == row_best))
    return best, bi, bj, status
