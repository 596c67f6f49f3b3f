"""Accelerated inner loops for direct kernel summation.

numba is optional: when it is importable (and HRCM_NO_NUMBA is unset) the
built-in kernels use compiled loops, otherwise everything falls back to
blocked numpy.  Both paths skip marked self pairs and report any other
zero-separation pair so callers can raise a domain error.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import CoincidentPointsError

# kind codes for built-in kernels inside compiled loops
KIND_SCREENED = 0
KIND_LOG2D = 1
KIND_HELMHOLTZ = 2

NO_SELF = -(1 << 40)  # self_offset sentinel: no pair is ever skipped

FALLBACK_CHUNK_ENTRIES = 4_000_000  # row-chunk cap for numpy block temporaries


def _numba_enabled() -> bool:
    if os.environ.get("HRCM_NO_NUMBA", "") not in ("", "0"):
        return False
    try:
        import warnings

        with warnings.catch_warnings():
            # the TBB version probe warns on mismatched runtimes; the
            # workqueue/omp fallback layers are fine for our loops
            warnings.simplefilter("ignore")
            import numba  # noqa: F401
    except ImportError:
        return False
    return True


HAVE_NUMBA = _numba_enabled()

if HAVE_NUMBA:
    import math
    import cmath
    import warnings

    from numba import njit, prange
    from numba.core.errors import NumbaWarning

    # the TBB layer probe warns once at first parallel call; the omp or
    # workqueue fallback layers are equivalent for these loops
    warnings.filterwarnings("ignore", category=NumbaWarning, message=".*TBB.*")

    @njit(parallel=True, cache=True)
    def _matvec_real(tp, sp, w, kind, p1, self_offset):
        m = tp.shape[0]
        n = sp.shape[0]
        out = np.zeros(m)
        bad = 0
        for i in prange(m):
            acc = 0.0
            xi = tp[i, 0]
            yi = tp[i, 1]
            for j in range(n):
                if j == i + self_offset:
                    continue
                dx = xi - sp[j, 0]
                dy = yi - sp[j, 1]
                r2 = dx * dx + dy * dy
                if r2 == 0.0:
                    bad += 1
                    continue
                r = math.sqrt(r2)
                if kind == KIND_SCREENED:
                    acc += math.exp(-p1 * r) / r * w[j]
                else:  # log image kernel
                    yp = yi + sp[j, 1]
                    ri2 = dx * dx + yp * yp
                    if ri2 == 0.0:
                        bad += 1
                        continue
                    acc += 0.5 * (math.log(ri2) - math.log(r2)) * w[j]
            out[i] = acc
        return out, bad

    @njit(parallel=True, cache=True)
    def _matvec_cplx(tp, sp, w, k, self_offset):
        m = tp.shape[0]
        n = sp.shape[0]
        out = np.zeros(m, dtype=np.complex128)
        bad = 0
        for i in prange(m):
            acc = 0.0 + 0.0j
            xi = tp[i, 0]
            yi = tp[i, 1]
            for j in range(n):
                if j == i + self_offset:
                    continue
                dx = xi - sp[j, 0]
                dy = yi - sp[j, 1]
                r2 = dx * dx + dy * dy
                if r2 == 0.0:
                    bad += 1
                    continue
                r = math.sqrt(r2)
                acc += cmath.exp(-1j * k * r) / r * w[j]
            out[i] = acc
        return out, bad

    @njit(parallel=True, cache=True)
    def _blocks_real(tp, sp, w, kind, p1, same_set,
                     group_ptr, blk_tlo, blk_thi, blk_slo, blk_shi, out):
        bad = 0
        for g in prange(group_ptr.shape[0] - 1):
            for b in range(group_ptr[g], group_ptr[g + 1]):
                tlo = blk_tlo[b]
                thi = blk_thi[b]
                slo = blk_slo[b]
                shi = blk_shi[b]
                for i in range(tlo, thi):
                    xi = tp[i, 0]
                    yi = tp[i, 1]
                    acc = 0.0
                    for j in range(slo, shi):
                        if same_set and j == i:
                            continue
                        dx = xi - sp[j, 0]
                        dy = yi - sp[j, 1]
                        r2 = dx * dx + dy * dy
                        if r2 == 0.0:
                            bad += 1
                            continue
                        if kind == KIND_SCREENED:
                            r = math.sqrt(r2)
                            acc += math.exp(-p1 * r) / r * w[j]
                        else:
                            yp = yi + sp[j, 1]
                            ri2 = dx * dx + yp * yp
                            if ri2 == 0.0:
                                bad += 1
                                continue
                            acc += 0.5 * (math.log(ri2) - math.log(r2)) * w[j]
                    out[i] += acc
        return bad

    @njit(parallel=True, cache=True)
    def _blocks_cplx(tp, sp, w, k, same_set,
                     group_ptr, blk_tlo, blk_thi, blk_slo, blk_shi, out):
        bad = 0
        for g in prange(group_ptr.shape[0] - 1):
            for b in range(group_ptr[g], group_ptr[g + 1]):
                tlo = blk_tlo[b]
                thi = blk_thi[b]
                slo = blk_slo[b]
                shi = blk_shi[b]
                for i in range(tlo, thi):
                    xi = tp[i, 0]
                    yi = tp[i, 1]
                    acc = 0.0 + 0.0j
                    for j in range(slo, shi):
                        if same_set and j == i:
                            continue
                        dx = xi - sp[j, 0]
                        dy = yi - sp[j, 1]
                        r2 = dx * dx + dy * dy
                        if r2 == 0.0:
                            bad += 1
                            continue
                        r = math.sqrt(r2)
                        acc += cmath.exp(-1j * k * r) / r * w[j]
                    out[i] += acc
        return bad


def fast_kind(kernel):
    """Compiled-loop kind code for a built-in kernel, or None."""
    from .kernels import Helmholtz, Log2D, ScreenedCoulomb

    if not HAVE_NUMBA:
        return None
    if isinstance(kernel, ScreenedCoulomb):
        return KIND_SCREENED, kernel.gamma
    if isinstance(kernel, Log2D):
        return KIND_LOG2D, 0.0
    if isinstance(kernel, Helmholtz):
        return KIND_HELMHOLTZ, kernel.k
    return None


def matvec(kernel, targets, sources, w, self_pairs: bool, chunk: int = 512):
    """out_i = sum_j K(t_i, s_j) w_j, skipping j == i when self_pairs."""
    fk = fast_kind(kernel)
    if fk is not None and np.iscomplexobj(w) and not kernel.is_complex:
        fk = None  # complex weights with a real kernel take the numpy path
    if fk is not None:
        kind, p1 = fk
        off = 0 if self_pairs else NO_SELF
        if kind == KIND_HELMHOLTZ:
            out, bad = _matvec_cplx(targets, sources, np.asarray(w, dtype=np.complex128), p1, off)
        else:
            out, bad = _matvec_real(targets, sources, np.asarray(w, dtype=np.float64), kind, p1, off)
        if bad:
            raise CoincidentPointsError(
                "singular kernel evaluated at coincident points"
            )
        return out

    m = targets.shape[0]
    out = np.zeros(m, dtype=np.result_type(kernel.dtype, np.asarray(w).dtype))
    for i0 in range(0, m, chunk):
        i1 = min(i0 + chunk, m)
        diag = i0 if self_pairs else None
        blk = kernel.matrix(targets[i0:i1], sources, diag_offset=diag)
        out[i0:i1] = blk @ w
    return out


def block_list_apply(kernel, tp, sp, w, same_set, group_ptr,
                     blk_tlo, blk_thi, blk_slo, blk_shi, out):
    """Accumulate many dense sub-blocks into ``out`` (tree-ordered arrays).

    Blocks are grouped by target node (group g owns blocks
    group_ptr[g]:group_ptr[g+1]); groups have disjoint target ranges so
    the compiled path can run groups in parallel without write conflicts.
    """
    fk = fast_kind(kernel)
    if fk is not None and np.iscomplexobj(w) and not kernel.is_complex:
        fk = None
    if fk is not None:
        kind, p1 = fk
        if kind == KIND_HELMHOLTZ:
            bad = _blocks_cplx(tp, sp, np.asarray(w, dtype=np.complex128), p1,
                               same_set, group_ptr, blk_tlo, blk_thi, blk_slo, blk_shi, out)
        else:
            bad = _blocks_real(tp, sp, np.asarray(w, dtype=np.float64), kind, p1,
                               same_set, group_ptr, blk_tlo, blk_thi, blk_slo, blk_shi, out)
        if bad:
            raise CoincidentPointsError(
                "singular kernel evaluated at coincident points"
            )
        return

    max_entries = FALLBACK_CHUNK_ENTRIES
    for b in range(blk_tlo.shape[0]):
        tlo, thi = int(blk_tlo[b]), int(blk_thi[b])
        slo, shi = int(blk_slo[b]), int(blk_shi[b])
        ns = shi - slo
        step = max(1, max_entries // max(ns, 1))
        for i0 in range(tlo, thi, step):
            i1 = min(i0 + step, thi)
            diag = i0 - slo if same_set else None
            blk = kernel.matrix(tp[i0:i1], sp[slo:shi], diag_offset=diag)
            out[i0:i1] += blk @ w[slo:shi]
