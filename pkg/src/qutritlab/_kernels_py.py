"""Pure-Python kernels. Reference implementation and import-time fallback.

Parameter layout for a configuration in dimension ``d``::

    [state: 2d-2][v0: 2d-2][v1: 2d-4][v2: 2d-4][v3: 2d-4][v4: 2d-4]

A unit vector in ``C^m`` modulo global phase takes ``2m-2`` numbers:
``m-1`` hyperspherical angles for the moduli, then ``m-1`` phases for
components ``1..m-1``. ``v_{i+1}`` lives in the orthogonal complement of
``v_i`` (dimension ``d-1``). ``v4`` is finally projected off ``v0`` so the
evaluated configuration is always cyclically orthogonal; the raw overlap
``|<v4|v0>|^2`` is charged with a penalty weight.
"""
import math

import numpy as np

WRIGHT = 0
KCBS = 1
MAX_DIM = 8
# Objective reported for configurations where the closure repair degenerates.
INFEASIBLE = 1e6


def n_params(dim):
    return 2 * (2 * dim - 2) + 4 * (2 * dim - 4)


def unit_from_angles(theta, m):
    """Unit vector in C^m from ``2m-2`` parameters."""
    out = np.empty(m, dtype=complex)
    s = 1.0
    for k in range(m - 1):
        out[k] = s * math.cos(theta[k])
        s *= math.sin(theta[k])
    out[m - 1] = s
    for k in range(1, m):
        out[k] *= complex(math.cos(theta[m - 2 + k]), math.sin(theta[m - 2 + k]))
    return out


def complement_basis(v):
    """Orthonormal basis (rows) of the orthogonal complement of unit ``v``.

    Gram-Schmidt on the standard basis vectors, taken in order of increasing
    ``|v_k|``; the largest component's axis is dropped.
    """
    d = v.size
    order = np.argsort(np.abs(v), kind="stable")
    basis = [v]
    for k in order[: d - 1]:
        w = np.zeros(d, dtype=complex)
        w[k] = 1.0
        for b in basis:
            w = w - b * np.vdot(b, w)
        w = w / np.linalg.norm(w)
        basis.append(w)
    return np.array(basis[1:])


def decode(x, dim):
    """Parameters -> (state, raw v0..v4) without the closure repair."""
    x = np.asarray(x, dtype=float)
    m = 2 * dim - 2
    psi = unit_from_angles(x[:m], dim)
    vecs = [unit_from_angles(x[m: 2 * m], dim)]
    off = 2 * m
    k = 2 * dim - 4
    for _ in range(4):
        coeffs = unit_from_angles(x[off: off + k], dim - 1)
        vecs.append(coeffs @ complement_basis(vecs[-1]))
        off += k
    return psi, np.array(vecs)


def repair_closure(vecs):
    """Project v4 off v0 (keeping it orthogonal to v3).

    Returns ``(vectors, raw_overlap_sq)``; ``vectors`` is ``None`` when the
    projection degenerates.
    """
    v0, v3, v4 = vecs[0], vecs[3], vecs[4]
    raw = abs(np.vdot(v4, v0)) ** 2
    e = v0 - v3 * np.vdot(v3, v0)
    ne = np.linalg.norm(e)
    if ne < 1e-12:
        return vecs, raw
    e = e / ne
    w = v4 - e * np.vdot(e, v4)
    nw = np.linalg.norm(w)
    if nw < 1e-9:
        return None, raw
    out = vecs.copy()
    out[4] = w / nw
    return out, raw


def wright_sum(psi, vecs):
    return float(sum(abs(np.vdot(v, psi)) ** 2 for v in vecs))


def kcbs_sum(psi, vecs):
    """Sum of the five sequential correlations for ordered pairs (i, i+1)."""
    total = 0.0
    for i in range(5):
        a, b = vecs[i], vecs[(i + 1) % 5]
        amp = np.vdot(a, psi)
        p1 = abs(amp) ** 2
        ov = np.vdot(b, a)
        p_yy = p1 * abs(ov) ** 2
        p_yn = p1 - p_yy
        p_ny = abs(np.vdot(b, psi) - ov * amp) ** 2
        p_nn = 1.0 - p1 - p_ny
        total += p_yy + p_nn - p_yn - p_ny
    return total


def pentagon_objective(x, dim, target, penalty):
    """Value to minimise: ``-W`` or ``kappa``, plus ``penalty * |<v4|v0>|^2``."""
    psi, raw = decode(x, dim)
    vecs, ov2 = repair_closure(raw)
    if vecs is None:
        return INFEASIBLE
    value = -wright_sum(psi, vecs) if target == WRIGHT else kcbs_sum(psi, vecs)
    return value + penalty * ov2


def nelder_mead(fun, x0, step, max_evals, ftol=1e-14, xtol=1e-10):
    """Adaptive-coefficient Nelder-Mead with in-place restarts.

    Restarts the simplex around the incumbent whenever it collapses, until
    the budget is spent or a restart no longer improves the value.
    Returns ``(x_best, f_best, evaluations)``.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    alpha, gamma = 1.0, 1.0 + 2.0 / n
    rho, sigma = 0.75 - 1.0 / (2 * n), 1.0 - 1.0 / n
    evals = 0
    best_x, best_f = x0.copy(), fun(x0)
    evals += 1
    last_restart_f = math.inf
    while evals < max_evals:
        sim = np.empty((n + 1, n))
        fs = np.empty(n + 1)
        sim[0], fs[0] = best_x, best_f
        for i in range(n):
            sim[i + 1] = best_x
            sim[i + 1, i] += step
            fs[i + 1] = fun(sim[i + 1])
        evals += n
        while evals < max_evals:
            order = np.argsort(fs, kind="stable")
            sim, fs = sim[order], fs[order]
            if (fs[-1] - fs[0] <= ftol
                    and np.max(np.abs(sim[1:] - sim[0])) <= xtol):
                break
            c = sim[:-1].mean(axis=0)
            xr = c + alpha * (c - sim[-1])
            fr = fun(xr)
            evals += 1
            if fr < fs[0]:
                xe = c + gamma * (xr - c)
                fe = fun(xe)
                evals += 1
                if fe < fr:
                    sim[-1], fs[-1] = xe, fe
                else:
                    sim[-1], fs[-1] = xr, fr
            elif fr < fs[-2]:
                sim[-1], fs[-1] = xr, fr
            else:
                if fr < fs[-1]:
                    xc = c + rho * (xr - c)
                    fc = fun(xc)
                    evals += 1
                    accept = fc <= fr
                else:
                    xc = c + rho * (sim[-1] - c)
                    fc = fun(xc)
                    evals += 1
                    accept = fc < fs[-1]
                if accept:
                    sim[-1], fs[-1] = xc, fc
                else:
                    for i in range(1, n + 1):
                        sim[i] = sim[0] + sigma * (sim[i] - sim[0])
                        fs[i] = fun(sim[i])
                    evals += n
        i = int(np.argmin(fs))
        if fs[i] < best_f:
            best_x, best_f = sim[i].copy(), fs[i]
        if last_restart_f - best_f <= ftol:
            break
        last_restart_f = best_f
        step = max(step * 0.1, 1e-4)
    return best_x, float(best_f), evals


def minimize_pentagon(x0, dim, target, penalty, step, max_evals):
    """Nelder-Mead on :func:`pentagon_objective`."""
    def fun(x):
        return pentagon_objective(x, dim, target, penalty)
    return nelder_mead(fun, x0, step, max_evals)


def batch_joint(states, firsts, seconds):
    """Ideal sequential joint probabilities for many (state, first, second) triples.

    All inputs have shape ``(N, d)`` and hold unit vectors. Returns an
    ``(N, 4)`` array ordered ``yy, yn, ny, nn``.
    """
    states = np.asarray(states, dtype=complex)
    a = np.asarray(firsts, dtype=complex)
    b = np.asarray(seconds, dtype=complex)
    amp = np.einsum("ij,ij->i", a.conj(), states)
    p1 = np.abs(amp) ** 2
    ov = np.einsum("ij,ij->i", b.conj(), a)
    p_yy = p1 * np.abs(ov) ** 2
    p_ny = np.abs(np.einsum("ij,ij->i", b.conj(), states) - ov * amp) ** 2
    return np.stack([p_yy, p1 - p_yy, p_ny, 1.0 - p1 - p_ny], axis=1)
