"""Numba-jitted kernel implementations (default backend).

Twins of ``_kernels_np`` with identical semantics.  Division by zero is
guarded explicitly (numba raises where numpy returns inf), float ``**``
follows the same C pow conventions as np.power, and max/min propagate
NaN by explicit comparison, so both backends agree bit for bit on
everything except the odd last-ulp pow case.
"""

from __future__ import annotations

import numpy as np
from numba import njit

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

ORBIT_STOPPED = 0
ORBIT_HIT_CAP = 1
ORBIT_EVAL_ERROR = 2


@njit(cache=True)
def _eval_scalar(code, imm, stack, v0, v1):
    sp = 0
    for i in range(code.size):
        op = code[i]
        if op == OP_CONST:
            stack[sp] = imm[i]
            sp += 1
        elif op == OP_VAR:
            stack[sp] = v0 if imm[i] == 0.0 else v1
            sp += 1
        elif op == OP_NEG:
            stack[sp - 1] = -stack[sp - 1]
        elif op == OP_ABS:
            stack[sp - 1] = abs(stack[sp - 1])
        elif op == OP_ADD:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] + stack[sp]
        elif op == OP_SUB:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] - stack[sp]
        elif op == OP_MUL:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] * stack[sp]
        elif op == OP_DIV:
            sp -= 1
            b = stack[sp]
            stack[sp - 1] = np.nan if b == 0.0 else stack[sp - 1] / b
        elif op == OP_POW:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] ** stack[sp]
        elif op == OP_MAX:
            sp -= 1
            a = stack[sp - 1]
            b = stack[sp]
            if a != a or b != b:
                stack[sp - 1] = np.nan
            elif a > b:
                stack[sp - 1] = a
            else:
                stack[sp - 1] = b
        elif op == OP_MIN:
            sp -= 1
            a = stack[sp - 1]
            b = stack[sp]
            if a != a or b != b:
                stack[sp - 1] = np.nan
            elif a < b:
                stack[sp - 1] = a
            else:
                stack[sp - 1] = b
        else:
            sp -= 3
            lhs = stack[sp - 1]
            rhs = stack[sp]
            on_true = stack[sp + 1]
            on_false = stack[sp + 2]
            if lhs != lhs or rhs != rhs:
                stack[sp - 1] = np.nan
            elif op == OP_SEL_LT:
                stack[sp - 1] = on_true if lhs < rhs else on_false
            elif op == OP_SEL_LE:
                stack[sp - 1] = on_true if lhs <= rhs else on_false
            else:
                stack[sp - 1] = on_true if lhs == rhs else on_false
    return stack[0]


@njit(cache=True)
def eval_rows(code, imm, X, out):
    stack = np.empty(code.size)
    nvars = X.shape[1]
    for r in range(X.shape[0]):
        v0 = X[r, 0]
        v1 = X[r, 1] if nvars > 1 else 0.0
        out[r] = _eval_scalar(code, imm, stack, v0, v1)
    return out


@njit(cache=True)
def scan_triangle(D, delta, reflexive):
    n = D.shape[0]
    best = -np.inf
    bi = -1
    bj = -1
    bk = -1
    count = 0
    for x in range(n):
        for y in range(n):
            for z in range(n):
                # Same association order as the numpy twin, last ulp included.
                score = D[x, z] - D[x, y] - D[y, z]
                if reflexive:
                    score = score + D[y, y]
                if score > delta:
                    count += 1
                if score > best:
                    best = score
                    bi = x
                    bj = y
                    bk = z
    if best <= delta:
        return -1, -1, -1, best, count
    return bi, bj, bk, best, count


@njit(cache=True)
def _window_tight_analytic(coded, immd, stack, orbit, n_pts, tol, window):
    lo = n_pts - window
    for a in range(lo, n_pts):
        for b in range(a + 1, n_pts):
            dv = _eval_scalar(coded, immd, stack, orbit[a], orbit[b])
            if not (dv <= tol):
                return False
    return True


@njit(cache=True)
def orbit_analytic(codeT, immT, coded, immd, x0, max_iters, tol, window):
    orbit = np.empty(max_iters + 1)
    rho = np.empty(max_iters)
    stackT = np.empty(codeT.size)
    stackd = np.empty(coded.size)
    orbit[0] = x0
    n_pts = 1
    status = ORBIT_HIT_CAP
    for _ in range(max_iters):
        x = orbit[n_pts - 1]
        nxt = _eval_scalar(codeT, immT, stackT, x, 0.0)
        if not np.isfinite(nxt):
            status = ORBIT_EVAL_ERROR
            break
        step = _eval_scalar(coded, immd, stackd, x, nxt)
        if not np.isfinite(step):
            status = ORBIT_EVAL_ERROR
            break
        orbit[n_pts] = nxt
        rho[n_pts - 1] = step
        n_pts += 1
        if step <= tol and n_pts >= window:
            lo_r = n_pts - 1 - window
            if lo_r < 0:
                lo_r = 0
            ok = True
            for k in range(lo_r, n_pts - 1):
                if not (rho[k] <= tol):
                    ok = False
                    break
            if ok and _window_tight_analytic(
                coded, immd, stackd, orbit, n_pts, tol, window
            ):
                status = ORBIT_STOPPED
                break
    return orbit, rho, n_pts, status


@njit(cache=True)
def orbit_table(tmap, D, i0, max_iters, tol, window):
    orbit = np.empty(max_iters + 1, dtype=np.int64)
    rho = np.empty(max_iters)
    orbit[0] = i0
    n_pts = 1
    status = ORBIT_HIT_CAP
    for _ in range(max_iters):
        i = orbit[n_pts - 1]
        j = tmap[i]
        step = D[i, j]
        orbit[n_pts] = j
        rho[n_pts - 1] = step
        n_pts += 1
        if step <= tol and n_pts >= window:
            lo_r = n_pts - 1 - window
            if lo_r < 0:
                lo_r = 0
            ok = True
            for k in range(lo_r, n_pts - 1):
                if not (rho[k] <= tol):
                    ok = False
                    break
            lo = n_pts - window
            for a in range(lo, n_pts):
                if not ok:
                    break
                for b in range(a + 1, n_pts):
                    if not (D[orbit[a], orbit[b]] <= tol):
                        ok = False
                        break
            if ok:
                status = ORBIT_STOPPED
                break
    return orbit, rho, n_pts, status


@njit(cache=True)
def phi_orbit_chunk(code, imm, r0, u, tol):
    stack = np.empty(code.size)
    r = r0
    for k in range(u.size):
        if r <= tol:
            return k, r, 0
        r = u[k] * _eval_scalar(code, imm, stack, r, 0.0)
        if not np.isfinite(r):
            return k + 1, r, 2
    return u.size, r, 0 if r <= tol else 1


@njit(cache=True)
def lemma1_scan_points(coded, immd, pts, eps, j_hi):
    last = pts.size - 1
    m_arr = np.full(j_hi + 1, -1, dtype=np.int64)
    n_arr = np.full(j_hi + 1, -1, dtype=np.int64)
    stack = np.empty(coded.size)
    rows = 0
    m_floor = 0
    for j in range(j_hi + 1):
        m = j if j > m_floor else m_floor
        hit_n = -1
        while m < last:
            base = pts[m]
            for n in range(m + 1, last + 1):
                dv = _eval_scalar(coded, immd, stack, base, pts[n])
                if not np.isfinite(dv):
                    return m_arr, n_arr, rows, 2
                if dv >= eps:
                    hit_n = n
                    break
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


@njit(cache=True)
def late_pair_max_points(coded, immd, pts, start):
    last = pts.size - 1
    stack = np.empty(coded.size)
    best = -np.inf
    bi = -1
    bj = -1
    for m in range(start, last):
        base = pts[m]
        for n in range(m + 1, last + 1):
            dv = _eval_scalar(coded, immd, stack, base, pts[n])
            if not np.isfinite(dv):
                return best, bi, bj, 2
            if dv > best:
                best = dv
                bi = m
                bj = n
    return best, bi, bj, 0


def warmup() -> None:
    """Compile every kernel once on tiny inputs (cached on disk after)."""
    code = np.array([OP_VAR, OP_VAR, OP_ADD], dtype=np.int64)
    imm = np.array([0.0, 1.0, 0.0])
    X = np.zeros((2, 2))
    eval_rows(code, imm, X, np.empty(2))
    D = np.zeros((2, 2))
    scan_triangle(D, 1e-12, True)
    scan_triangle(D, 1e-12, False)
    ident = np.array([OP_VAR], dtype=np.int64)
    ident_imm = np.array([0.0])
    orbit_analytic(ident, ident_imm, code, imm, 0.0, 4, 1e-9, 2)
    orbit_table(np.zeros(2, dtype=np.int64), D, 0, 4, 1e-9, 2)
    phi_orbit_chunk(ident, ident_imm, 1.0, np.ones(2), 2.0)
    lemma1_scan_points(code, imm, np.arange(3.0), 0.5, 1)
    late_pair_max_points(code, imm, np.arange(3.0), 0)
