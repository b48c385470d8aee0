"""Hot kernels: numba-jitted implementations with pure-numpy fallbacks.

Set GKDVLAB_DISABLE_NUMBA=1 to force the numpy path (same results, slower).
The only loop-bound kernel in the lab is the brute-force (q, r, s) region scan;
the FFT-dominated evolution pipeline gains nothing from jitting and stays numpy.
"""

from __future__ import annotations

import os

import numpy as np

ENV_FLAG = "GKDVLAB_DISABLE_NUMBA"


def numba_enabled() -> bool:
    if os.environ.get(ENV_FLAG, "0") == "1":
        return False
    try:
        import numba  # noqa: F401
    except ImportError:  # pragma: no cover
        return False
    return True


USE_NUMBA = numba_enabled()


def _scan_numpy(qs, rs, ss, c, rst_tol, expand_tol):
    """Vectorized fallback: loop over q, sweep the (r, s) plane."""
    points = 0
    min_expand = np.inf
    viol_ray = 0
    viol_disc = 0
    R, S = np.meshgrid(rs, ss, indexing="ij")
    for q in qs:
        det = 1.0 - q * q - R * R - S * S + 2.0 * q * R * S
        valid = det >= -rst_tol
        if not valid.any():
            continue
        alpha = 1.5 * (1.0 - q * q)
        beta = 2.0 * S - c * q * R
        gamma = 0.5 * (1.0 - R * R)
        neg = beta < 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            x_star = -beta / (2.0 * alpha)
            vertex = alpha * x_star * x_star + beta * x_star + gamma
        if alpha > 0.0:
            fmin = np.where(neg, vertex, gamma)
        else:
            fmin = np.where(neg, -np.inf, gamma)
        fv = fmin[valid]
        points += int(valid.sum())
        min_expand = min(min_expand, float(fv.min()))
        viol_ray += int((fv < -expand_tol).sum())
        disc = neg & (beta * beta > 4.0 * alpha * (gamma + expand_tol)) if alpha > 0.0 else neg
        viol_disc += int(disc[valid].sum())
    return points, float(min_expand), viol_ray, viol_disc


if USE_NUMBA:
    import numba

    @numba.njit(cache=True, parallel=True)
    def _scan_numba(qs, rs, ss, c, rst_tol, expand_tol):  # pragma: no cover - jitted
        nq = qs.shape[0]
        points = 0
        viol_ray = 0
        viol_disc = 0
        min_expand = np.inf
        for iq in numba.prange(nq):
            q = qs[iq]
            alpha = 1.5 * (1.0 - q * q)
            local_min = np.inf
            local_points = 0
            local_ray = 0
            local_disc = 0
            for ir in range(rs.shape[0]):
                r = rs[ir]
                gamma = 0.5 * (1.0 - r * r)
                cqr = c * q * r
                for isx in range(ss.shape[0]):
                    s = ss[isx]
                    det = 1.0 - q * q - r * r - s * s + 2.0 * q * r * s
                    if det < -rst_tol:
                        continue
                    local_points += 1
                    beta = 2.0 * s - cqr
                    if beta >= 0.0:
                        fmin = gamma
                    elif alpha > 0.0:
                        x_star = -beta / (2.0 * alpha)
                        fmin = alpha * x_star * x_star + beta * x_star + gamma
                    else:
                        fmin = -np.inf
                    if fmin < local_min:
                        local_min = fmin
                    if fmin < -expand_tol:
                        local_ray += 1
                    if beta < 0.0:
                        if alpha > 0.0:
                            if beta * beta > 4.0 * alpha * (gamma + expand_tol):
                                local_disc += 1
                        else:
                            local_disc += 1
            points += local_points
            viol_ray += local_ray
            viol_disc += local_disc
            min_expand = min(min_expand, local_min)
        return points, min_expand, viol_ray, viol_disc


def scan_kernel(qs, rs, ss, c, rst_tol, expand_tol, force_numpy: bool = False):
    """Dispatch the region scan: (points_tested, min_expand, ray/disc violation counts)."""
    args = (
        np.ascontiguousarray(qs, dtype=np.float64),
        np.ascontiguousarray(rs, dtype=np.float64),
        np.ascontiguousarray(ss, dtype=np.float64),
        float(c),
        float(rst_tol),
        float(expand_tol),
    )
    if USE_NUMBA and not force_numpy:
        return _scan_numba(*args)
    return _scan_numpy(*args)


def collect_violations(qs, rs, ss, c, rst_tol, expand_tol):
    """Slow vectorized pass listing violating (q, r, s, expand) rows."""
    rows = []
    R, S = np.meshgrid(rs, ss, indexing="ij")
    for q in qs:
        det = 1.0 - q * q - R * R - S * S + 2.0 * q * R * S
        valid = det >= -rst_tol
        alpha = 1.5 * (1.0 - q * q)
        beta = 2.0 * S - c * q * R
        gamma = 0.5 * (1.0 - R * R)
        neg = beta < 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            x_star = -beta / (2.0 * alpha)
            vertex = alpha * x_star * x_star + beta * x_star + gamma
        fmin = np.where(neg, vertex if alpha > 0 else -np.inf, gamma)
        bad = valid & (fmin < -expand_tol)
        if bad.any():
            ii, jj = np.nonzero(bad)
            for i, j in zip(ii, jj):
                rows.append((q, R[i, j], S[i, j], fmin[i, j]))
    return np.asarray(rows, dtype=np.float64).reshape(-1, 4)
