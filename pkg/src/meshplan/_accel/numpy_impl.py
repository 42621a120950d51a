"""Pure numpy/Python implementations of the hot kernels.

These are the reference semantics: the numba twins in ``numba_impl`` must
match them bit for bit.  Sequential-dependency loops (colouring, matching)
are plain Python over numpy arrays; everything that vectorises cleanly is
vectorised.
"""

import numpy as np


def greedy_colour_csr(indptr, indices, n_points, least_loaded):
    """Greedy-colour items against shared written points.

    Item ``i`` writes the points ``indices[indptr[i]:indptr[i+1]]`` (unique
    per item).  Items are processed in index order; two items conflict when
    they share a point.  Returns the per-item colour array.
    """
    n = len(indptr) - 1
    colours = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return colours
    # per-point list of colours already given to its writers
    writer_count = np.bincount(indices, minlength=n_points) if len(indices) else np.zeros(n_points, dtype=np.int64)
    offsets = np.zeros(n_points + 1, dtype=np.int64)
    np.cumsum(writer_count, out=offsets[1:])
    point_colours = np.full(int(offsets[-1]), -1, dtype=np.int64)
    fill = np.zeros(n_points, dtype=np.int64)

    forbidden = np.full(n + 1, -1, dtype=np.int64)  # stamp = current item
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
            best_count = np.iinfo(np.int64).max
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


def greedy_colour_adj(indptr, indices, order, least_loaded):
    """Greedy-colour a conflict graph, visiting nodes in ``order``."""
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
            best_count = np.iinfo(np.int64).max
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


def smallest_last_order(indptr, indices):
    """Smallest-last elimination order of a conflict graph.

    Repeatedly removes the node of minimum remaining degree (ties by lowest
    index) and places it last; the returned array is the colouring order,
    i.e. the removal sequence reversed.
    """
    n = len(indptr) - 1
    degree = np.diff(indptr).astype(np.int64)
    # key = remaining degree with index tie-break; removed nodes -> +inf key
    key = degree * np.int64(n + 1) + np.arange(n, dtype=np.int64)
    removed_key = np.iinfo(np.int64).max
    order = np.empty(n, dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        u = int(np.argmin(key))
        order[pos] = u
        key[u] = removed_key
        for j in range(indptr[u], indptr[u + 1]):
            v = indices[j]
            if key[v] != removed_key:
                key[v] -= n + 1
    return order


def bfs_levels(indptr, indices, start):
    """Breadth-first levels from ``start``; unreached nodes get level -1.

    Returns ``(levels, visit_order, n_visited)`` where ``visit_order`` holds
    the first ``n_visited`` entries in traversal order.
    """
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


def heavy_edge_matching(indptr, indices, weights, node_weights, visit_order, max_cluster_weight):
    """Greedy heavy-edge matching for coarsening.

    Visits nodes in ``visit_order``; an unmatched node pairs with its
    unmatched neighbour of maximal edge weight (ties by lowest index) whose
    combined node weight stays within ``max_cluster_weight``.  Returns the
    match array (``match[u] == u`` for unmatched nodes).
    """
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


def refine_boundary_pass(indptr, indices, weights, assignment, block_weights, node_weights, cap, use_edge_weights):
    """One boundary-refinement sweep; moves are applied in place.

    A node moves to the neighbouring block with the largest connectivity gain
    when the gain is strictly positive, the target stays within ``cap`` and
    the source block does not empty.  Returns the number of moves; the cut
    weight never increases.
    """
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


def cut_weight(indptr, indices, weights, assignment, use_edge_weights):
    """Total weight of edges whose endpoints lie in different blocks."""
    n = len(indptr) - 1
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    cross = assignment[rows] != assignment[indices]
    upper = rows < indices  # count each undirected edge once
    mask = cross & upper
    if use_edge_weights:
        return int(weights[mask].sum())
    return int(mask.sum())


def pairs_from_segments(seg_indptr, seg_values):
    """All unordered pairs within each segment of a CSR-style layout.

    ``seg_values[seg_indptr[s]:seg_indptr[s+1]]`` lists the members of
    segment ``s`` (assumed unique within the segment).  Returns two arrays
    ``(us, vs)`` with ``us < vs`` elementwise.  Pair order is unspecified
    (this backend batches segments by length to stay vectorised); callers
    must aggregate order-independently.
    """
    lengths = np.diff(seg_indptr)
    us_parts = []
    vs_parts = []
    for k in np.unique(lengths):
        if k < 2:
            continue
        starts = seg_indptr[:-1][lengths == k]
        block = seg_values[starts[:, None] + np.arange(k)]
        ia, ib = np.triu_indices(int(k), k=1)
        a = block[:, ia].ravel()
        b = block[:, ib].ravel()
        us_parts.append(np.minimum(a, b))
        vs_parts.append(np.maximum(a, b))
    if not us_parts:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy()
    return (
        np.concatenate(us_parts).astype(np.int64, copy=False),
        np.concatenate(vs_parts).astype(np.int64, copy=False),
    )
