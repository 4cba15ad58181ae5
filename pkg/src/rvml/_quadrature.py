"""Compiled loops for kernel-weighted momentum integrals.

Every routine sums over source nodes in a fixed order per target, so the
result does not depend on how targets are split across threads.
"""

import os

# prefer layers that do not probe the system TBB
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")

import numpy as np  # noqa: E402
from numba import njit, prange  # noqa: E402

_BLOCK = 256
_TGROUP = 8
# up to this many weight fields, one fused pass per field beats blocked products
_FUSED_LIMIT = 4

# packed storage of a symmetric 3x3 matrix: 11, 22, 33, 12, 13, 23
_PACK = np.array([[0, 3, 4], [3, 1, 5], [4, 5, 2]], dtype=np.int64)


@njit(parallel=True, fastmath=True, error_model="numpy", cache=True)
def _phi_sweep(targets, nodes, scal_t, vec_t, out_m, out_v):
    # targets padded to a multiple of _TGROUP, nodes to a multiple of _BLOCK
    nt = targets.shape[0]
    nq = nodes.shape[0]
    ks = scal_t.shape[1]
    kv = vec_t.shape[2]
    q1a = nodes[:, 0].copy()
    q2a = nodes[:, 1].copy()
    q3a = nodes[:, 2].copy()
    q0a = np.sqrt(1.0 + q1a * q1a + q2a * q2a + q3a * q3a)
    for g in prange(nt // _TGROUP):
        a0 = g * _TGROUP
        buf = np.empty((6, _TGROUP, _BLOCK))
        accm = np.zeros((6, _TGROUP, ks))
        accv = np.zeros((3, _TGROUP, kv))
        for b0 in range(0, nq, _BLOCK):
            for ia in range(_TGROUP):
                p1 = targets[a0 + ia, 0]
                p2 = targets[a0 + ia, 1]
                p3 = targets[a0 + ia, 2]
                p0 = np.sqrt(1.0 + p1 * p1 + p2 * p2 + p3 * p3)
                for t in range(_BLOCK):
                    b = b0 + t
                    q1 = q1a[b]
                    q2 = q2a[b]
                    q3 = q3a[b]
                    q0 = q0a[b]
                    d1 = p1 - q1
                    d2 = p2 - q2
                    d3 = p3 - q3
                    c1 = p2 * q3 - p3 * q2
                    c2 = p3 * q1 - p1 * q3
                    c3 = p1 * q2 - p2 * q1
                    num = d1 * d1 + d2 * d2 + d3 * d3 + c1 * c1 + c2 * c2 + c3 * c3
                    # coincident node: omitted from the sum
                    sing = d1 == 0.0 and d2 == 0.0 and d3 == 0.0
                    num = 1.0 if sing else num
                    pqm1 = num / (p0 * q0 + 1.0 + p1 * q1 + p2 * q2 + p3 * q3)
                    pq = pqm1 + 1.0
                    d = pqm1 * (pq + 1.0)
                    lam = pq * pq / (d * np.sqrt(d) * p0 * q0)
                    lam = 0.0 if sing else lam
                    buf[0, ia, t] = lam * (d - d1 * d1 + 2.0 * pqm1 * p1 * q1)
                    buf[1, ia, t] = lam * (d - d2 * d2 + 2.0 * pqm1 * p2 * q2)
                    buf[2, ia, t] = lam * (d - d3 * d3 + 2.0 * pqm1 * p3 * q3)
                    buf[3, ia, t] = lam * (-d1 * d2 + pqm1 * (p1 * q2 + q1 * p2))
                    buf[4, ia, t] = lam * (-d1 * d3 + pqm1 * (p1 * q3 + q1 * p3))
                    buf[5, ia, t] = lam * (-d2 * d3 + pqm1 * (p2 * q3 + q2 * p3))
            if ks > 0:
                sb = scal_t[b0:b0 + _BLOCK]
                for c in range(6):
                    accm[c] += np.dot(buf[c], sb)
            if kv > 0:
                for j in range(3):
                    vb = vec_t[j, b0:b0 + _BLOCK]
                    accv[0] += np.dot(buf[_PACK[0, j]], vb)
                    accv[1] += np.dot(buf[_PACK[1, j]], vb)
                    accv[2] += np.dot(buf[_PACK[2, j]], vb)
        for ia in range(_TGROUP):
            for c in range(6):
                for s in range(ks):
                    out_m[a0 + ia, s, c] = accm[c, ia, s]
            for i in range(3):
                for s in range(kv):
                    out_v[a0 + ia, s, i] = accv[i, ia, s]


@njit(parallel=True, fastmath=True, error_model="numpy", cache=True)
def _phi_sweep_single(targets, nodes, sw, vw, out_m, out_v):
    # one scalar and one vector weight; accumulators stay in registers
    nt = targets.shape[0]
    nq = nodes.shape[0]
    q1a = nodes[:, 0].copy()
    q2a = nodes[:, 1].copy()
    q3a = nodes[:, 2].copy()
    q0a = np.sqrt(1.0 + q1a * q1a + q2a * q2a + q3a * q3a)
    w1a = vw[0].copy()
    w2a = vw[1].copy()
    w3a = vw[2].copy()
    for a in prange(nt):
        p1 = targets[a, 0]
        p2 = targets[a, 1]
        p3 = targets[a, 2]
        p0 = np.sqrt(1.0 + p1 * p1 + p2 * p2 + p3 * p3)
        m11 = 0.0
        m22 = 0.0
        m33 = 0.0
        m12 = 0.0
        m13 = 0.0
        m23 = 0.0
        o1 = 0.0
        o2 = 0.0
        o3 = 0.0
        for b in range(nq):
            q1 = q1a[b]
            q2 = q2a[b]
            q3 = q3a[b]
            q0 = q0a[b]
            d1 = p1 - q1
            d2 = p2 - q2
            d3 = p3 - q3
            c1 = p2 * q3 - p3 * q2
            c2 = p3 * q1 - p1 * q3
            c3 = p1 * q2 - p2 * q1
            num = d1 * d1 + d2 * d2 + d3 * d3 + c1 * c1 + c2 * c2 + c3 * c3
            sing = d1 == 0.0 and d2 == 0.0 and d3 == 0.0
            num = 1.0 if sing else num
            pqm1 = num / (p0 * q0 + 1.0 + p1 * q1 + p2 * q2 + p3 * q3)
            pq = pqm1 + 1.0
            d = pqm1 * (pq + 1.0)
            lam = pq * pq / (d * np.sqrt(d) * p0 * q0)
            lam = 0.0 if sing else lam
            s11 = lam * (d - d1 * d1 + 2.0 * pqm1 * p1 * q1)
            s22 = lam * (d - d2 * d2 + 2.0 * pqm1 * p2 * q2)
            s33 = lam * (d - d3 * d3 + 2.0 * pqm1 * p3 * q3)
            s12 = lam * (-d1 * d2 + pqm1 * (p1 * q2 + q1 * p2))
            s13 = lam * (-d1 * d3 + pqm1 * (p1 * q3 + q1 * p3))
            s23 = lam * (-d2 * d3 + pqm1 * (p2 * q3 + q2 * p3))
            u = sw[b]
            w1 = w1a[b]
            w2 = w2a[b]
            w3 = w3a[b]
            m11 += s11 * u
            m22 += s22 * u
            m33 += s33 * u
            m12 += s12 * u
            m13 += s13 * u
            m23 += s23 * u
            o1 += s11 * w1 + s12 * w2 + s13 * w3
            o2 += s12 * w1 + s22 * w2 + s23 * w3
            o3 += s13 * w1 + s23 * w2 + s33 * w3
        out_m[a, 0] = m11
        out_m[a, 1] = m22
        out_m[a, 2] = m33
        out_m[a, 3] = m12
        out_m[a, 4] = m13
        out_m[a, 5] = m23
        out_v[a, 0] = o1
        out_v[a, 1] = o2
        out_v[a, 2] = o3


@njit(parallel=True, fastmath=True, error_model="numpy", cache=True)
def _scalar_sweep(targets, nodes, scal, out):
    # kernel (P.Q) / (p0 q0 sqrt((P.Q)^2 - 1)), coincident node omitted
    nt = targets.shape[0]
    nq = nodes.shape[0]
    ks = scal.shape[0]
    q1a = nodes[:, 0].copy()
    q2a = nodes[:, 1].copy()
    q3a = nodes[:, 2].copy()
    q0a = np.sqrt(1.0 + q1a * q1a + q2a * q2a + q3a * q3a)
    for a in prange(nt):
        p1 = targets[a, 0]
        p2 = targets[a, 1]
        p3 = targets[a, 2]
        p0 = np.sqrt(1.0 + p1 * p1 + p2 * p2 + p3 * p3)
        buf = np.empty(_BLOCK)
        acc_s = np.zeros(ks)
        for b0 in range(0, nq, _BLOCK):
            nb = min(_BLOCK, nq - b0)
            for t in range(nb):
                b = b0 + t
                q1 = q1a[b]
                q2 = q2a[b]
                q3 = q3a[b]
                q0 = q0a[b]
                d1 = p1 - q1
                d2 = p2 - q2
                d3 = p3 - q3
                c1 = p2 * q3 - p3 * q2
                c2 = p3 * q1 - p1 * q3
                c3 = p1 * q2 - p2 * q1
                num = d1 * d1 + d2 * d2 + d3 * d3 + c1 * c1 + c2 * c2 + c3 * c3
                sing = d1 == 0.0 and d2 == 0.0 and d3 == 0.0
                num = 1.0 if sing else num
                pqm1 = num / (p0 * q0 + 1.0 + p1 * q1 + p2 * q2 + p3 * q3)
                pq = pqm1 + 1.0
                val = pq / (p0 * q0 * np.sqrt(pqm1 * (pq + 1.0)))
                buf[t] = 0.0 if sing else val
            for s in range(ks):
                acc = 0.0
                for t in range(nb):
                    acc += buf[t] * scal[s, b0 + t]
                acc_s[s] += acc
        for s in range(ks):
            out[a, s] = acc_s[s]


def unpack_symmetric(packed):
    """Expand trailing packed (..., 6) symmetric storage to (..., 3, 3)."""
    return packed[..., _PACK]


def _pad_rows(arr, multiple, fill):
    extra = (-arr.shape[0]) % multiple
    if extra == 0:
        return arr
    pad = np.full((extra,) + arr.shape[1:], fill, dtype=arr.dtype)
    return np.concatenate([arr, pad])


def _phi_moments_fused(targets, nodes, scalar, vector):
    nt = targets.shape[0]
    nq = nodes.shape[0]
    ks = scalar.shape[0]
    kv = vector.shape[0]
    targets = np.ascontiguousarray(targets)
    nodes = np.ascontiguousarray(nodes)
    mat = np.zeros((nt, ks, 6))
    vec = np.zeros((nt, kv, 3))
    out_m = np.empty((nt, 6))
    out_v = np.empty((nt, 3))
    for s in range(max(ks, kv)):
        sw = np.ascontiguousarray(scalar[s]) if s < ks else np.zeros(nq)
        vw = np.ascontiguousarray(vector[s]) if s < kv else np.zeros((3, nq))
        _phi_sweep_single(targets, nodes, sw, vw, out_m, out_v)
        if s < ks:
            mat[:, s] = out_m
        if s < kv:
            vec[:, s] = out_v
    return unpack_symmetric(mat), vec


def phi_moments(targets, nodes, scalar=None, vector=None):
    """Kernel-weighted sums over source nodes.

    Parameters
    ----------
    targets : (nt, 3) array
    nodes : (nq, 3) array
    scalar : (ks, nq) array or None
        Scalar weights, already multiplied by quadrature weights.
    vector : (kv, 3, nq) array or None
        Vector weights, already multiplied by quadrature weights.

    Returns
    -------
    mat : (nt, ks, 3, 3) array
        sum_q Phi(p, q) scalar[s, q].
    vec : (nt, kv, 3) array
        sum_q Phi(p, q) @ vector[s, :, q].
    """
    targets = np.asarray(targets, dtype=np.float64).reshape(-1, 3)
    nodes = np.asarray(nodes, dtype=np.float64).reshape(-1, 3)
    nt = targets.shape[0]
    nq = nodes.shape[0]
    scalar = np.zeros((0, nq)) if scalar is None else np.asarray(scalar, dtype=np.float64)
    vector = np.zeros((0, 3, nq)) if vector is None else np.asarray(vector, dtype=np.float64)
    ks = scalar.shape[0]
    kv = vector.shape[0]
    if ks + kv <= _FUSED_LIMIT:
        return _phi_moments_fused(targets, nodes, scalar, vector)
    # padding nodes sit far away and carry zero weight
    nodes_p = np.ascontiguousarray(_pad_rows(nodes, _BLOCK, 1.0e3))
    targets_p = np.ascontiguousarray(_pad_rows(targets, _TGROUP, 0.0))
    scal_t = np.ascontiguousarray(_pad_rows(scalar.T, _BLOCK, 0.0))
    vec_t = np.ascontiguousarray(
        _pad_rows(vector.transpose(2, 1, 0), _BLOCK, 0.0).transpose(1, 0, 2))
    out_m = np.zeros((targets_p.shape[0], ks, 6))
    out_v = np.zeros((targets_p.shape[0], kv, 3))
    _phi_sweep(targets_p, nodes_p, scal_t, vec_t, out_m, out_v)
    return unpack_symmetric(out_m[:nt]), out_v[:nt]


def scalar_moments(targets, nodes, scalar):
    """Sums of the scalar kernel (P.Q)/(p0 q0 ((P.Q)^2-1)^{1/2}) against weights."""
    targets = np.ascontiguousarray(targets, dtype=np.float64).reshape(-1, 3)
    nodes = np.ascontiguousarray(nodes, dtype=np.float64)
    scalar = np.ascontiguousarray(scalar, dtype=np.float64)
    out = np.zeros((targets.shape[0], scalar.shape[0]))
    _scalar_sweep(targets, nodes, scalar, out)
    return out
