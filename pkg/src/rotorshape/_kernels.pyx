# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: initializedcheck=False, language_level=3
"""Compiled Strang-splitting kernels.

One step advances psi by
    psi <- H . (V P V^T) . H . psi
with H = diag(halfphase) the exact free-rotor half-step phases,
V/vals the eigenbasis of the (tridiagonal) cos-theta coupling and
P = diag(exp(i * mu_dt * E_k * vals)) the exact coupling phase for the
field value of step k.

Complex state blocks are handled as float64 views with interleaved
re/im pairs: the eigenvector matrix is real, so the hot matmuls run in
pure real arithmetic (SIMD-friendly) and the diagonal phases are 2x2
rotations.  All loops run without the GIL.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()

ctypedef double complex cplx

# steps between column renormalizations: the reapplied unit phases carry
# a fixed ~ulp magnitude bias that otherwise accumulates secularly
DEF RENORM_EVERY = 256


cdef inline void _renormalize(double[:, ::1] psi, Py_ssize_t d,
                              Py_ssize_t n2) noexcept nogil:
    cdef Py_ssize_t i, c
    cdef double s
    for c in range(0, n2, 2):
        s = 0.0
        for i in range(d):
            s += psi[i, c] * psi[i, c] + psi[i, c + 1] * psi[i, c + 1]
        if s > 0.0:
            s = 1.0 / s ** 0.5
            for i in range(d):
                psi[i, c] *= s
                psi[i, c + 1] *= s


cdef inline void _rotate_rows(double[:, ::1] a, const double[::1] ph,
                              Py_ssize_t d, Py_ssize_t n2) noexcept nogil:
    # a[i, 2c:2c+2] <- (re*pr - im*pi, re*pi + im*pr) with per-row phase
    cdef Py_ssize_t i, c
    cdef double pr, pi, re, im
    for i in range(d):
        pr = ph[2 * i]
        pi = ph[2 * i + 1]
        for c in range(0, n2, 2):
            re = a[i, c]
            im = a[i, c + 1]
            a[i, c] = re * pr - im * pi
            a[i, c + 1] = re * pi + im * pr


cdef inline void _step(double[:, ::1] psi, double[:, ::1] w,
                       const double[::1] hp, double[::1] cph,
                       const double[:, ::1] vecs, const double[::1] vals,
                       double theta) noexcept nogil:
    # psi/w are (d, 2n) float views of complex blocks; cph is 2d scratch
    cdef Py_ssize_t d = psi.shape[0]
    cdef Py_ssize_t n2 = psi.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double v
    _rotate_rows(psi, hp, d, n2)
    for i in range(d):
        for c in range(n2):
            w[i, c] = 0.0
    # w = V^T psi
    for j in range(d):
        for i in range(d):
            v = vecs[j, i]
            for c in range(n2):
                w[i, c] += v * psi[j, c]
    for i in range(d):
        cph[2 * i] = cos(theta * vals[i])
        cph[2 * i + 1] = sin(theta * vals[i])
    _rotate_rows(w, cph, d, n2)
    # psi = V w
    for j in range(d):
        for c in range(n2):
            psi[j, c] = 0.0
    for j in range(d):
        for i in range(d):
            v = vecs[j, i]
            for c in range(n2):
                psi[j, c] += v * w[i, c]
    _rotate_rows(psi, hp, d, n2)


def strang_evolve(cplx[:, ::1] psi, const cplx[::1] halfphase,
                  const double[:, ::1] vecs, const double[::1] vals,
                  const double[::1] efield, double mu_dt):
    """Advance every column of psi through len(efield) steps, in place."""
    cdef Py_ssize_t nsteps = efield.shape[0]
    cdef Py_ssize_t k
    psi_r_arr = np.asarray(psi).view(np.float64)
    hp_arr = np.asarray(halfphase).view(np.float64)
    w_arr = np.empty_like(psi_r_arr)
    cph_arr = np.empty(2 * psi.shape[0])
    cdef double[:, ::1] psi_r = psi_r_arr
    cdef double[:, ::1] w = w_arr
    cdef const double[::1] hp = hp_arr
    cdef double[::1] cph = cph_arr
    cdef Py_ssize_t d = psi.shape[0]
    cdef Py_ssize_t n2 = 2 * psi.shape[1]
    with nogil:
        for k in range(nsteps):
            _step(psi_r, w, hp, cph, vecs, vals, mu_dt * efield[k])
            if (k + 1) % RENORM_EVERY == 0:
                _renormalize(psi_r, d, n2)


def strang_evolve_expect(cplx[:, ::1] psi, const cplx[::1] halfphase,
                         const double[:, ::1] vecs, const double[::1] vals,
                         const double[::1] efield, double mu_dt,
                         const double[::1] alpha, double[:, ::1] expect):
    """Like strang_evolve, also storing <cos theta> per step and column.

    alpha holds the d-1 off-diagonal coupling elements; expect must be
    (len(efield), n).
    """
    cdef Py_ssize_t nsteps = efield.shape[0]
    cdef Py_ssize_t d = psi.shape[0]
    cdef Py_ssize_t n = psi.shape[1]
    cdef Py_ssize_t k, j, c
    cdef double acc
    psi_r_arr = np.asarray(psi).view(np.float64)
    hp_arr = np.asarray(halfphase).view(np.float64)
    w_arr = np.empty_like(psi_r_arr)
    cph_arr = np.empty(2 * d)
    cdef double[:, ::1] psi_r = psi_r_arr
    cdef double[:, ::1] w = w_arr
    cdef const double[::1] hp = hp_arr
    cdef double[::1] cph = cph_arr
    with nogil:
        for k in range(nsteps):
            _step(psi_r, w, hp, cph, vecs, vals, mu_dt * efield[k])
            if (k + 1) % RENORM_EVERY == 0:
                _renormalize(psi_r, d, 2 * n)
            for c in range(n):
                acc = 0.0
                for j in range(d - 1):
                    acc += alpha[j] * (
                        psi_r[j, 2 * c] * psi_r[j + 1, 2 * c]
                        + psi_r[j, 2 * c + 1] * psi_r[j + 1, 2 * c + 1])
                expect[k, c] = 2.0 * acc


def strang_evolve_record(cplx[::1] psi, const cplx[::1] halfphase,
                         const double[:, ::1] vecs, const double[::1] vals,
                         const double[::1] efield, double mu_dt,
                         cplx[:, ::1] traj):
    """Single-vector evolution recording the state after every step.

    traj must be (len(efield)+1, d); traj[0] receives the initial state.
    """
    cdef Py_ssize_t nsteps = efield.shape[0]
    cdef Py_ssize_t d = psi.shape[0]
    cdef Py_ssize_t k, i
    col_arr = np.ascontiguousarray(np.asarray(psi)[:, None])
    psi_r_arr = col_arr.view(np.float64)
    hp_arr = np.asarray(halfphase).view(np.float64)
    w_arr = np.empty_like(psi_r_arr)
    cph_arr = np.empty(2 * d)
    cdef cplx[:, ::1] col = col_arr
    cdef double[:, ::1] psi_r = psi_r_arr
    cdef double[:, ::1] w = w_arr
    cdef const double[::1] hp = hp_arr
    cdef double[::1] cph = cph_arr
    with nogil:
        for i in range(d):
            traj[0, i] = col[i, 0]
        for k in range(nsteps):
            _step(psi_r, w, hp, cph, vecs, vals, mu_dt * efield[k])
            for i in range(d):
                traj[k + 1, i] = col[i, 0]
        for i in range(d):
            psi[i] = col[i, 0]


def grape_backward(const cplx[:, ::1] traj, cplx[::1] chi,
                   const cplx[::1] halfphase,
                   const double[:, ::1] vecs, const double[::1] vals,
                   const double[::1] efield, double mu_dt,
                   double[::1] grad):
    """Adjoint sweep for F0 = Re<chi_T|psi_N>.

    traj is the forward record (n_steps+1, d); chi enters as the target
    state and leaves as the costate at t=0.  grad[k] receives
    dF0/dE_k for the recorded step sequence.
    """
    cdef Py_ssize_t nsteps = efield.shape[0]
    cdef Py_ssize_t d = chi.shape[0]
    cdef Py_ssize_t k, i, j
    cdef double theta, cs, sn, g
    cdef cplx za, zb, ph
    a_arr = np.empty(d, dtype=np.complex128)
    b_arr = np.empty(d, dtype=np.complex128)
    u_arr = np.empty(d, dtype=np.complex128)
    cdef cplx[::1] a = a_arr
    cdef cplx[::1] b = b_arr
    cdef cplx[::1] u = u_arr
    with nogil:
        for k in range(nsteps - 1, -1, -1):
            theta = mu_dt * efield[k]
            # a = V^T (conj(H) chi),  b = V^T (H psi_k)
            for i in range(d):
                u[i] = halfphase[i].conjugate() * chi[i]
            for i in range(d):
                za = 0
                zb = 0
                for j in range(d):
                    za = za + vecs[j, i] * u[j]
                    zb = zb + vecs[j, i] * (halfphase[j] * traj[k, j])
                a[i] = za
                b[i] = zb
            g = 0.0
            for i in range(d):
                cs = cos(theta * vals[i])
                sn = sin(theta * vals[i])
                ph = cs + 1j * sn
                za = a[i].conjugate() * (ph * b[i])
                g += vals[i] * za.imag
                # pull the costate back through this step's coupling phase
                a[i] = ph.conjugate() * a[i]
            grad[k] = -mu_dt * g
            for j in range(d):
                za = 0
                for i in range(d):
                    za = za + vecs[j, i] * a[i]
                chi[j] = halfphase[j].conjugate() * za
