"""Compiled kernels for tree growth and traversal.

All kernels are nopython, nogil, and cached, and draw from an explicit
xoshiro256++ state seeded per tree, so forests are bit-reproducible for
a given seed at any thread count.  Trees live in flat parallel arrays:
``feature`` is -1 at leaves, children are row indices, and
``tree_offsets`` marks each tree's root.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64

_GOLDEN = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, nogil=True, inline="always")
def _rotl(x, k):
    return U64((x << U64(k)) | (x >> U64(64 - k)))


@njit(cache=True, nogil=True)
def _seed_state(seed, state):
    # splitmix64 expansion of one 64-bit seed into the xoshiro state
    s = U64(seed)
    for i in range(4):
        s = U64(s + _GOLDEN)
        z = s
        z = U64((z ^ (z >> U64(30))) * _MIX1)
        z = U64((z ^ (z >> U64(27))) * _MIX2)
        state[i] = U64(z ^ (z >> U64(31)))


@njit(cache=True, nogil=True, inline="always")
def _next_u64(state):
    result = U64(_rotl(U64(state[0] + state[3]), 23) + state[0])
    t = U64(state[1] << U64(17))
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], 45)
    return result


@njit(cache=True, nogil=True, inline="always")
def _rand_below(state, n):
    # bias ~ n / 2**64: negligible for the n used here
    return np.int64(_next_u64(state) % U64(n))


@njit(cache=True, nogil=True, inline="always")
def _rand_unit(state):
    return np.float64(_next_u64(state) >> U64(11)) * _INV53


@njit(cache=True, nogil=True)
def _bootstrap(state, n, counts):
    for c in range(n):
        counts[c] = 0
    for _ in range(n):
        counts[_rand_below(state, n)] += 1


@njit(cache=True, nogil=True)
def _grow_tree(
    x, y, k, counts, idx, m, mtry, mns, child_rule, state,
    feature, threshold, left, right, weight, gain, leafp, base,
    stack_id, stack_lo, stack_hi, vals, part_buf, feat_perm, clsw, clsl,
):
    # Grows one tree over idx[0:m] (distinct in-bag cases, multiplicity in
    # counts).  Returns the next free node row.  Split gain positivity is
    # decided in exact integer arithmetic; candidates are ranked by the
    # weighted sum of squared class counts, ties broken uniformly.
    p = x.shape[1]
    nxt = base + 1
    stack_id[0] = base
    stack_lo[0] = 0
    stack_hi[0] = m
    sp = 1
    while sp > 0:
        sp -= 1
        nid = stack_id[sp]
        lo = stack_lo[sp]
        hi = stack_hi[sp]

        for c in range(k):
            clsw[c] = 0
        w_total = np.int64(0)
        for j in range(lo, hi):
            case = idx[j]
            clsw[y[case]] += counts[case]
            w_total += counts[case]
        weight[nid] = w_total

        can_split = hi - lo >= 2
        if child_rule:
            if w_total < 2 * mns:
                can_split = False
        else:
            if w_total <= mns:
                can_split = False
        ap = np.int64(0)
        n_present = 0
        for c in range(k):
            ap += clsw[c] * clsw[c]
            if clsw[c] > 0:
                n_present += 1
        if n_present <= 1:
            can_split = False

        best_feat = -1
        best_thr = 0.0
        best_score = -1.0
        if can_split:
            for i in range(p):
                feat_perm[i] = i
            n_cand = mtry if mtry < p else p
            ties = 0
            for fi in range(n_cand):
                r = fi + _rand_below(state, p - fi)
                tmp = feat_perm[fi]
                feat_perm[fi] = feat_perm[r]
                feat_perm[r] = tmp
                f = feat_perm[fi]

                ln = hi - lo
                for j in range(ln):
                    vals[j] = x[idx[lo + j], f]
                order = np.argsort(vals[:ln])

                for c in range(k):
                    clsl[c] = 0
                w_left = np.int64(0)
                for jj in range(ln - 1):
                    case = idx[lo + order[jj]]
                    clsl[y[case]] += counts[case]
                    w_left += counts[case]
                    v_lo = vals[order[jj]]
                    v_hi = vals[order[jj + 1]]
                    if v_lo == v_hi:
                        continue
                    w_right = w_total - w_left
                    if child_rule and (w_left < mns or w_right < mns):
                        continue
                    al = np.int64(0)
                    ar = np.int64(0)
                    for c in range(k):
                        cl = clsl[c]
                        cr = clsw[c] - cl
                        al += cl * cl
                        ar += cr * cr
                    # positive Gini decrease iff al/wL + ar/wR > ap/W, exactly
                    gain_num = al * w_right * w_total + ar * w_left * w_total - ap * w_left * w_right
                    if gain_num <= 0:
                        continue
                    score = np.float64(al) / w_left + np.float64(ar) / w_right
                    if score > best_score:
                        best_score = score
                        ties = 1
                        best_feat = f
                        best_thr = 0.5 * (v_lo + v_hi)
                    elif score == best_score:
                        ties += 1
                        if _rand_unit(state) * ties < 1.0:
                            best_feat = f
                            best_thr = 0.5 * (v_lo + v_hi)

        if best_feat < 0:
            feature[nid] = -1
            threshold[nid] = 0.0
            left[nid] = -1
            right[nid] = -1
            gain[nid] = 0.0
            for c in range(k):
                leafp[nid, c] = clsw[c] / w_total
            continue

        nl = 0
        for j in range(lo, hi):
            if x[idx[j], best_feat] <= best_thr:
                part_buf[nl] = idx[j]
                nl += 1
        nr = nl
        for j in range(lo, hi):
            if x[idx[j], best_feat] > best_thr:
                part_buf[nr] = idx[j]
                nr += 1
        for j in range(hi - lo):
            idx[lo + j] = part_buf[j]

        feature[nid] = best_feat
        threshold[nid] = best_thr
        # per-case impurity decrease: (best_score - sum(w_c^2)/W) / W
        gain[nid] = (best_score - np.float64(ap) / np.float64(w_total)) / np.float64(w_total)
        for c in range(k):
            leafp[nid, c] = 0.0
        lid = nxt
        rid = nxt + 1
        nxt += 2
        left[nid] = lid
        right[nid] = rid
        stack_id[sp] = lid
        stack_lo[sp] = lo
        stack_hi[sp] = lo + nl
        sp += 1
        stack_id[sp] = rid
        stack_lo[sp] = lo + nl
        stack_hi[sp] = hi
        sp += 1
    return nxt


@njit(cache=True, nogil=True)
def grow_forest(
    x, y, k, seeds, mtry, mns, child_rule, do_bootstrap,
    feature, threshold, left, right, weight, gain, leafp, tree_offsets, inbag,
):
    n = x.shape[0]
    p = x.shape[1]
    n_tree = len(seeds)
    state = np.empty(4, dtype=np.uint64)
    idx = np.empty(n, dtype=np.int64)
    vals = np.empty(n, dtype=np.float64)
    part_buf = np.empty(n, dtype=np.int64)
    stack_id = np.empty(2 * n + 2, dtype=np.int64)
    stack_lo = np.empty(2 * n + 2, dtype=np.int64)
    stack_hi = np.empty(2 * n + 2, dtype=np.int64)
    feat_perm = np.empty(p, dtype=np.int64)
    clsw = np.empty(k, dtype=np.int64)
    clsl = np.empty(k, dtype=np.int64)
    total = 0
    tree_offsets[0] = 0
    for t in range(n_tree):
        _seed_state(seeds[t], state)
        if do_bootstrap:
            _bootstrap(state, n, inbag[t])
        m = 0
        for c in range(n):
            if inbag[t, c] > 0:
                idx[m] = c
                m += 1
        total = _grow_tree(
            x, y, k, inbag[t], idx, m, mtry, mns, child_rule, state,
            feature, threshold, left, right, weight, gain, leafp, total,
            stack_id, stack_lo, stack_hi, vals, part_buf, feat_perm, clsw, clsl,
        )
        tree_offsets[t + 1] = total
    return total


@njit(cache=True, nogil=True)
def predict_forest(feature, threshold, left, right, leafp, tree_offsets, x, majority, out):
    n_tree = len(tree_offsets) - 1
    n = x.shape[0]
    k = leafp.shape[1]
    for t in range(n_tree):
        root = tree_offsets[t]
        for i in range(n):
            node = root
            while feature[node] >= 0:
                if x[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            if majority:
                mx = leafp[node, 0]
                for c in range(1, k):
                    if leafp[node, c] > mx:
                        mx = leafp[node, c]
                n_top = 0
                for c in range(k):
                    if leafp[node, c] == mx:
                        n_top += 1
                share = 1.0 / n_top
                for c in range(k):
                    if leafp[node, c] == mx:
                        out[i, c] += share
            else:
                for c in range(k):
                    out[i, c] += leafp[node, c]
    inv = 1.0 / n_tree
    for i in range(n):
        for c in range(k):
            out[i, c] *= inv


@njit(cache=True, nogil=True)
def predict_oob(feature, threshold, left, right, leafp, tree_offsets, inbag, x, majority, out, n_oob):
    n_tree = len(tree_offsets) - 1
    n = x.shape[0]
    k = leafp.shape[1]
    for t in range(n_tree):
        root = tree_offsets[t]
        for i in range(n):
            if inbag[t, i] > 0:
                continue
            n_oob[i] += 1
            node = root
            while feature[node] >= 0:
                if x[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            if majority:
                mx = leafp[node, 0]
                for c in range(1, k):
                    if leafp[node, c] > mx:
                        mx = leafp[node, c]
                n_top = 0
                for c in range(k):
                    if leafp[node, c] == mx:
                        n_top += 1
                share = 1.0 / n_top
                for c in range(k):
                    if leafp[node, c] == mx:
                        out[i, c] += share
            else:
                for c in range(k):
                    out[i, c] += leafp[node, c]
    for i in range(n):
        if n_oob[i] > 0:
            for c in range(k):
                out[i, c] /= n_oob[i]
        else:
            for c in range(k):
                out[i, c] = np.nan
