"""NumPy fallback for the compiled Strang kernels.

Same call signatures and in-place semantics as ``_kernels``; used when the
extension is unavailable or when ``ROTORSHAPE_BACKEND=python`` forces it.
"""

import numpy as np

# matches the compiled kernel: cure the secular ~ulp/step norm bias of
# the reapplied unit phases
RENORM_EVERY = 256


def _renormalize(psi):
    norms = np.linalg.norm(psi, axis=0)
    psi /= np.where(norms > 0, norms, 1.0)


def strang_evolve(psi, halfphase, vecs, vals, efield, mu_dt):
    hp = np.asarray(halfphase)[:, None]
    vt = np.ascontiguousarray(np.asarray(vecs).T)
    vals = np.asarray(vals)
    for k, e in enumerate(efield):
        psi *= hp
        w = vt @ psi
        w *= np.exp(1j * (mu_dt * e) * vals)[:, None]
        psi[:] = vt.T @ w
        psi *= hp
        if (k + 1) % RENORM_EVERY == 0:
            _renormalize(psi)


def strang_evolve_expect(psi, halfphase, vecs, vals, efield, mu_dt,
                         alpha, expect):
    hp = np.asarray(halfphase)[:, None]
    vt = np.ascontiguousarray(np.asarray(vecs).T)
    vals = np.asarray(vals)
    alpha = np.asarray(alpha)[:, None]
    for k, e in enumerate(efield):
        psi *= hp
        w = vt @ psi
        w *= np.exp(1j * (mu_dt * e) * vals)[:, None]
        psi[:] = vt.T @ w
        psi *= hp
        if (k + 1) % RENORM_EVERY == 0:
            _renormalize(psi)
        expect[k] = 2.0 * np.sum(
            alpha * (psi[:-1] * psi[1:].conj()).real, axis=0)


def strang_evolve_record(psi, halfphase, vecs, vals, efield, mu_dt, traj):
    col = psi[:, None].copy()
    traj[0] = psi
    hp = np.asarray(halfphase)[:, None]
    vt = np.ascontiguousarray(np.asarray(vecs).T)
    vals = np.asarray(vals)
    for k, e in enumerate(efield):
        col *= hp
        w = vt @ col
        w *= np.exp(1j * (mu_dt * e) * vals)[:, None]
        col[:] = vt.T @ w
        col *= hp
        traj[k + 1] = col[:, 0]
    psi[:] = col[:, 0]


def grape_backward(traj, chi, halfphase, vecs, vals, efield, mu_dt, grad):
    hp = np.asarray(halfphase)
    vt = np.ascontiguousarray(np.asarray(vecs).T)
    vals = np.asarray(vals)
    for k in range(len(efield) - 1, -1, -1):
        theta = mu_dt * efield[k]
        a = vt @ (hp.conj() * chi)
        b = vt @ (hp * traj[k])
        ph = np.exp(1j * theta * vals)
        grad[k] = -mu_dt * np.sum(vals * (a.conj() * ph * b).imag)
        a *= ph.conj()
        chi[:] = hp.conj() * (vt.T @ a)
