"""Numba-jitted twins of the kernels in ``numpy_impl``.

Same signatures, same visit orders, same tie-breaks: outputs must be
bit-identical to the fallback.  Keep these as flat loops over int64 arrays;
no reflected lists, no dicts.
"""

import numpy as np
from numba import njit

_HUGE = np.int64(2**62)


@njit(cache=True)
def greedy_colour_csr(indptr, indices, n_points, least_loaded):
    n = len(indptr) - 1
    colours = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return colours
    writer_count = np.zeros(n_points, dtype=np.int64)
    for j in range(len(indices)):
        writer_count[indices[j]] += 1
    offsets = np.zeros(n_points + 1, dtype=np.int64)
    for p in range(n_points):
        offsets[p + 1] = offsets[p] + writer_count[p]
    point_colours = np.full(offsets[n_points], -1, dtype=np.int64)
    fill = np.zeros(n_points, dtype=np.int64)

    forbidden = np.full(n + 1, -1, dtype=np.int64)
    counts = np.zeros(n + 1, dtype=np.int64)
    num_colours = 0
    for i in range(n):
        for j in range(indptr[i], indptr[i + 1]):
            p = indices[j]
            base = offsets[p]
            for k in range(fill[p]):
                forbidden[point_colours[base + k]] = i
        best = -1
        if least_loaded:
            best_count = _HUGE
            for c in range(num_colours):
                if forbidden[c] != i and counts[c] < best_count:
                    best = c
                    best_count = counts[c]
        else:
            for c in range(num_colours):
                if forbidden[c] != i:
                    best = c
                    break
        if best < 0:
            best = num_colours
            num_colours += 1
        colours[i] = best
        counts[best] += 1
        for j in range(indptr[i], indptr[i + 1]):
            p = indices[j]
            point_colours[offsets[p] + fill[p]] = best
            fill[p] += 1
    return colours


@njit(cache=True)
def greedy_colour_adj(indptr, indices, order, least_loaded):
    n = len(indptr) - 1
    colours = np.full(n, -1, dtype=np.int64)
    forbidden = np.full(n + 1, -1, dtype=np.int64)
    counts = np.zeros(n + 1, dtype=np.int64)
    num_colours = 0
    for step in range(len(order)):
        u = order[step]
        for j in range(indptr[u], indptr[u + 1]):
            c = colours[indices[j]]
            if c >= 0:
                forbidden[c] = u
        best = -1
        if least_loaded:
            best_count = _HUGE
            for c in range(num_colours):
                if forbidden[c] != u and counts[c] < best_count:
                    best = c
                    best_count = counts[c]
        else:
            for c in range(num_colours):
                if forbidden[c] != u:
                    best = c
                    break
        if best < 0:
            best = num_colours
            num_colours += 1
        colours[u] = best
        counts[best] += 1
    return colours


@njit(cache=True)
def smallest_last_order(indptr, indices):
    n = len(indptr) - 1
    key = np.empty(n, dtype=np.int64)
    for u in range(n):
        key[u] = (indptr[u + 1] - indptr[u]) * (n + 1) + u
    removed_key = _HUGE
    order = np.empty(n, dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        u = np.argmin(key)
        order[pos] = u
        key[u] = removed_key
        for j in range(indptr[u], indptr[u + 1]):
            v = indices[j]
            if key[v] != removed_key:
                key[v] -= n + 1
    return order


@njit(cache=True)
def bfs_levels(indptr, indices, start):
    n = len(indptr) - 1
    levels = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    levels[start] = 0
    queue[0] = start
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        for j in range(indptr[u], indptr[u + 1]):
            v = indices[j]
            if levels[v] < 0:
                levels[v] = levels[u] + 1
                queue[tail] = v
                tail += 1
    return levels, queue, tail


@njit(cache=True)
def heavy_edge_matching(indptr, indices, weights, node_weights, visit_order, max_cluster_weight):
    n = len(indptr) - 1
    match = np.full(n, -1, dtype=np.int64)
    for step in range(len(visit_order)):
        u = visit_order[step]
        if match[u] >= 0:
            continue
        best = u
        best_w = np.int64(-1)
        for j in range(indptr[u], indptr[u + 1]):
            v = indices[j]
            if match[v] >= 0 or v == u:
                continue
            if node_weights[u] + node_weights[v] > max_cluster_weight:
                continue
            w = weights[j]
            if w > best_w or (w == best_w and v < best):
                best = v
                best_w = w
        match[u] = best
        if best != u:
            match[best] = u
    return match


@njit(cache=True)
def refine_boundary_pass(indptr, indices, weights, assignment, block_weights, node_weights, cap, use_edge_weights):
    n = len(indptr) - 1
    num_blocks = len(block_weights)
    conn = np.zeros(num_blocks, dtype=np.int64)
    touched = np.empty(num_blocks, dtype=np.int64)
    moves = 0
    for u in range(n):
        own = assignment[u]
        n_touched = 0
        for j in range(indptr[u], indptr[u + 1]):
            b = assignment[indices[j]]
            if conn[b] == 0:
                touched[n_touched] = b
                n_touched += 1
            conn[b] += weights[j] if use_edge_weights else 1
        best = own
        best_gain = np.int64(0)
        for k in range(n_touched):
            b = touched[k]
            if b == own:
                continue
            gain = conn[b] - conn[own]
            if gain > best_gain or (gain == best_gain and best != own and b < best):
                if block_weights[b] + node_weights[u] <= cap and block_weights[own] - node_weights[u] > 0:
                    best = b
                    best_gain = gain
        if best != own:
            assignment[u] = best
            block_weights[own] -= node_weights[u]
            block_weights[best] += node_weights[u]
            moves += 1
        for k in range(n_touched):
            conn[touched[k]] = 0
    return moves


@njit(cache=True)
def cut_weight(indptr, indices, weights, assignment, use_edge_weights):
    n = len(indptr) - 1
    total = np.int64(0)
    for u in range(n):
        for j in range(indptr[u], indptr[u + 1]):
            v = indices[j]
            if u < v and assignment[u] != assignment[v]:
                total += weights[j] if use_edge_weights else 1
    return int(total)


@njit(cache=True)
def pairs_from_segments(seg_indptr, seg_values):
    n_seg = len(seg_indptr) - 1
    total = 0
    for s in range(n_seg):
        k = seg_indptr[s + 1] - seg_indptr[s]
        total += k * (k - 1) // 2
    us = np.empty(total, dtype=np.int64)
    vs = np.empty(total, dtype=np.int64)
    out = 0
    for s in range(n_seg):
        lo, hi = seg_indptr[s], seg_indptr[s + 1]
        for a in range(lo, hi):
            va = seg_values[a]
            for b in range(a + 1, hi):
                vb = seg_values[b]
                if va < vb:
                    us[out] = va
                    vs[out] = vb
                else:
                    us[out] = vb
                    vs[out] = va
                out += 1
    return us, vs
