# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Same signatures and arithmetic as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, fabs, INFINITY

cnp.import_array()

cdef enum:
    MAXD = 8
    MAXP = 80

WRIGHT = 0
KCBS = 1
MAX_DIM = MAXD
INFEASIBLE = 1e6
cdef double C_INFEASIBLE = 1e6

cdef extern from "complex.h" nogil:
    double cabs(double complex)
    double complex conj(double complex)


def n_params(int dim):
    return 2 * (2 * dim - 2) + 4 * (2 * dim - 4)


cdef inline double complex vdot(const double complex* a, const double complex* b, int d) noexcept nogil:
    cdef double complex acc = 0
    cdef int k
    for k in range(d):
        acc = acc + conj(a[k]) * b[k]
    return acc


cdef inline double abs2(double complex z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef void unit_from_angles(const double* th, int m, double complex* out) noexcept nogil:
    cdef double s = 1.0
    cdef int k
    for k in range(m - 1):
        out[k] = s * cos(th[k])
        s = s * sin(th[k])
    out[m - 1] = s
    for k in range(1, m):
        out[k] = out[k] * (cos(th[m - 2 + k]) + 1j * sin(th[m - 2 + k]))


cdef void complement_basis(const double complex* v, int d, double complex* basis) noexcept nogil:
    # basis is (d-1) x MAXD, row-major
    cdef int order[MAXD]
    cdef double mags[MAXD]
    cdef int i, j, k, key, row
    cdef double mk, nrm
    cdef double complex w[MAXD]
    cdef double complex proj
    for i in range(d):
        order[i] = i
        mags[i] = cabs(v[i])
    # stable insertion sort by modulus
    for i in range(1, d):
        key = order[i]
        mk = mags[key]
        j = i - 1
        while j >= 0 and mags[order[j]] > mk:
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = key
    for row in range(d - 1):
        for k in range(d):
            w[k] = 0
        w[order[row]] = 1.0
        proj = vdot(v, w, d)
        for k in range(d):
            w[k] = w[k] - v[k] * proj
        for i in range(row):
            proj = vdot(&basis[i * MAXD], w, d)
            for k in range(d):
                w[k] = w[k] - basis[i * MAXD + k] * proj
        nrm = 0
        for k in range(d):
            nrm += abs2(w[k])
        nrm = sqrt(nrm)
        for k in range(d):
            basis[row * MAXD + k] = w[k] / nrm


cdef void decode_c(const double* x, int d, double complex* psi, double complex* vecs) noexcept nogil:
    # vecs is 5 x MAXD row-major
    cdef int m = 2 * d - 2
    cdef int kk = 2 * d - 4
    cdef int off, i, j, k
    cdef double complex coeffs[MAXD]
    cdef double complex basis[MAXD * MAXD]
    unit_from_angles(x, d, psi)
    unit_from_angles(&x[m], d, &vecs[0])
    off = 2 * m
    for i in range(1, 5):
        unit_from_angles(&x[off], d - 1, coeffs)
        complement_basis(&vecs[(i - 1) * MAXD], d, basis)
        for k in range(d):
            vecs[i * MAXD + k] = 0
        for j in range(d - 1):
            for k in range(d):
                vecs[i * MAXD + k] = vecs[i * MAXD + k] + coeffs[j] * basis[j * MAXD + k]
        off += kk


cdef int repair_c(double complex* vecs, int d, double* raw) noexcept nogil:
    # returns 0 when the projection degenerates
    cdef double complex* v0 = &vecs[0]
    cdef double complex* v3 = &vecs[3 * MAXD]
    cdef double complex* v4 = &vecs[4 * MAXD]
    cdef double complex e[MAXD]
    cdef double complex w[MAXD]
    cdef double complex c
    cdef double ne = 0, nw = 0
    cdef int k
    raw[0] = abs2(vdot(v4, v0, d))
    c = vdot(v3, v0, d)
    for k in range(d):
        e[k] = v0[k] - v3[k] * c
        ne += abs2(e[k])
    ne = sqrt(ne)
    if ne < 1e-12:
        return 1
    for k in range(d):
        e[k] = e[k] / ne
    c = vdot(e, v4, d)
    for k in range(d):
        w[k] = v4[k] - e[k] * c
        nw += abs2(w[k])
    nw = sqrt(nw)
    if nw < 1e-9:
        return 0
    for k in range(d):
        v4[k] = w[k] / nw
    return 1


cdef double wright_c(const double complex* psi, const double complex* vecs, int d) noexcept nogil:
    cdef double total = 0
    cdef int i
    for i in range(5):
        total += abs2(vdot(&vecs[i * MAXD], psi, d))
    return total


cdef double kcbs_c(const double complex* psi, const double complex* vecs, int d) noexcept nogil:
    cdef double total = 0
    cdef int i
    cdef double complex amp, ov
    cdef double p1, p_yy, p_yn, p_ny, p_nn
    cdef const double complex* a
    cdef const double complex* b
    for i in range(5):
        a = &vecs[i * MAXD]
        b = &vecs[((i + 1) % 5) * MAXD]
        amp = vdot(a, psi, d)
        p1 = abs2(amp)
        ov = vdot(b, a, d)
        p_yy = p1 * abs2(ov)
        p_yn = p1 - p_yy
        p_ny = abs2(vdot(b, psi, d) - ov * amp)
        p_nn = 1.0 - p1 - p_ny
        total += p_yy + p_nn - p_yn - p_ny
    return total


cdef double objective_c(const double* x, int d, int target, double penalty) noexcept nogil:
    cdef double complex psi[MAXD]
    cdef double complex vecs[5 * MAXD]
    cdef double raw
    cdef double value
    decode_c(x, d, psi, vecs)
    if repair_c(vecs, d, &raw) == 0:
        return C_INFEASIBLE
    if target == 0:
        value = -wright_c(psi, vecs, d)
    else:
        value = kcbs_c(psi, vecs, d)
    return value + penalty * raw


def _check_dim(int dim):
    if dim < 3 or dim > MAXD:
        raise ValueError(f"dimension must be between 3 and {MAXD}")


def pentagon_objective(x, int dim, int target, double penalty):
    _check_dim(dim)
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    if xv.shape[0] != n_params(dim):
        raise ValueError("parameter vector has the wrong length")
    return objective_c(&xv[0], dim, target, penalty)


cdef void sort_simplex(double* sim, double* fs, int n) noexcept nogil:
    # stable insertion sort of rows by value
    cdef int i, j, k
    cdef double key
    cdef double row[MAXP]
    for i in range(1, n + 1):
        key = fs[i]
        for k in range(n):
            row[k] = sim[i * n + k]
        j = i - 1
        while j >= 0 and fs[j] > key:
            fs[j + 1] = fs[j]
            for k in range(n):
                sim[(j + 1) * n + k] = sim[j * n + k]
            j -= 1
        fs[j + 1] = key
        for k in range(n):
            sim[(j + 1) * n + k] = row[k]


def minimize_pentagon(x0, int dim, int target, double penalty, double step,
                      long max_evals, double ftol=1e-14, double xtol=1e-10):
    """Nelder-Mead on the pentagon objective, entirely in compiled code."""
    _check_dim(dim)
    cdef int n = n_params(dim)
    cdef double[::1] xin = np.ascontiguousarray(x0, dtype=np.float64)
    if xin.shape[0] != n:
        raise ValueError("parameter vector has the wrong length")
    cdef double[:, ::1] simv = np.empty((n + 1, n))
    cdef double[::1] fsv = np.empty(n + 1)
    cdef double[::1] best = np.array(xin, copy=True)
    cdef double[::1] c = np.empty(n)
    cdef double[::1] xr = np.empty(n)
    cdef double[::1] xe = np.empty(n)
    cdef double[::1] xc = np.empty(n)
    cdef double* sim = &simv[0, 0]
    cdef double* fs = &fsv[0]
    cdef double alpha = 1.0, gamma = 1.0 + 2.0 / n
    cdef double rho = 0.75 - 1.0 / (2 * n), sigma = 1.0 - 1.0 / n
    cdef long evals = 0
    cdef double best_f, last_restart_f = INFINITY
    cdef double fr, fe, fc, spread
    cdef int i, k, accept, ib
    with nogil:
        best_f = objective_c(&best[0], dim, target, penalty)
        evals += 1
        while evals < max_evals:
            for k in range(n):
                sim[k] = best[k]
            fs[0] = best_f
            for i in range(n):
                for k in range(n):
                    sim[(i + 1) * n + k] = best[k]
                sim[(i + 1) * n + i] += step
                fs[i + 1] = objective_c(&sim[(i + 1) * n], dim, target, penalty)
            evals += n
            while evals < max_evals:
                sort_simplex(sim, fs, n)
                if fs[n] - fs[0] <= ftol:
                    spread = 0
                    for i in range(1, n + 1):
                        for k in range(n):
                            if fabs(sim[i * n + k] - sim[k]) > spread:
                                spread = fabs(sim[i * n + k] - sim[k])
                    if spread <= xtol:
                        break
                for k in range(n):
                    c[k] = 0
                    for i in range(n):
                        c[k] += sim[i * n + k]
                    c[k] /= n
                for k in range(n):
                    xr[k] = c[k] + alpha * (c[k] - sim[n * n + k])
                fr = objective_c(&xr[0], dim, target, penalty)
                evals += 1
                if fr < fs[0]:
                    for k in range(n):
                        xe[k] = c[k] + gamma * (xr[k] - c[k])
                    fe = objective_c(&xe[0], dim, target, penalty)
                    evals += 1
                    if fe < fr:
                        for k in range(n):
                            sim[n * n + k] = xe[k]
                        fs[n] = fe
                    else:
                        for k in range(n):
                            sim[n * n + k] = xr[k]
                        fs[n] = fr
                elif fr < fs[n - 1]:
                    for k in range(n):
                        sim[n * n + k] = xr[k]
                    fs[n] = fr
                else:
                    if fr < fs[n]:
                        for k in range(n):
                            xc[k] = c[k] + rho * (xr[k] - c[k])
                        fc = objective_c(&xc[0], dim, target, penalty)
                        evals += 1
                        accept = fc <= fr
                    else:
                        for k in range(n):
                            xc[k] = c[k] + rho * (sim[n * n + k] - c[k])
                        fc = objective_c(&xc[0], dim, target, penalty)
                        evals += 1
                        accept = fc < fs[n]
                    if accept:
                        for k in range(n):
                            sim[n * n + k] = xc[k]
                        fs[n] = fc
                    else:
                        for i in range(1, n + 1):
                            for k in range(n):
                                sim[i * n + k] = sim[k] + sigma * (sim[i * n + k] - sim[k])
                            fs[i] = objective_c(&sim[i * n], dim, target, penalty)
                        evals += n
            ib = 0
            for i in range(1, n + 1):
                if fs[i] < fs[ib]:
                    ib = i
            if fs[ib] < best_f:
                best_f = fs[ib]
                for k in range(n):
                    best[k] = sim[ib * n + k]
            if last_restart_f - best_f <= ftol:
                break
            last_restart_f = best_f
            step = step * 0.1
            if step < 1e-4:
                step = 1e-4
    return np.asarray(best), float(best_f), int(evals)


def batch_joint(states, firsts, seconds):
    """Ideal sequential joint probabilities, rows ordered yy, yn, ny, nn."""
    cdef double complex[:, ::1] s = np.ascontiguousarray(states, dtype=np.complex128)
    cdef double complex[:, ::1] a = np.ascontiguousarray(firsts, dtype=np.complex128)
    cdef double complex[:, ::1] b = np.ascontiguousarray(seconds, dtype=np.complex128)
    cdef Py_ssize_t N = s.shape[0]
    cdef int d = s.shape[1]
    if a.shape[0] != N or b.shape[0] != N or a.shape[1] != d or b.shape[1] != d:
        raise ValueError("states, firsts and seconds must share shape (N, d)")
    out_arr = np.empty((N, 4))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i
    cdef double complex amp, ov
    cdef double p1, p_yy, p_ny
    with nogil:
        for i in range(N):
            amp = vdot(&a[i, 0], &s[i, 0], d)
            p1 = abs2(amp)
            ov = vdot(&b[i, 0], &a[i, 0], d)
            p_yy = p1 * abs2(ov)
            p_ny = abs2(vdot(&b[i, 0], &s[i, 0], d) - ov * amp)
            out[i, 0] = p_yy
            out[i, 1] = p1 - p_yy
            out[i, 2] = p_ny
            out[i, 3] = 1.0 - p1 - p_ny
    return out_arr
