"""Exact 1-nearest-neighbor search over conditioning vectors.

Given a reference set of (x, z) pairs and a batch of query z vectors, each
query receives the x value attached to the closest reference z under the
Euclidean norm.  Repeating this against freshly resampled reference sets
yields pseudo-draws that approximate the conditional law of x given z.

Two interchangeable backends: a kd-tree for low-dimensional z and a
vectorized linear scan that wins once the tree stops pruning.  Both return
identical results, including on distance ties, where the lowest reference
row index is chosen.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset

__all__ = ["NnIndex", "build_index", "sample_1nn"]

# Beyond this many z columns the tree visits nearly every leaf, so the flat
# scan is both simpler and faster.
KDTREE_MAX_DIM = 15
_LEAF_SIZE = 16
_SCAN_CHUNK = 256

# Tree nodes are plain tuples:
#   leaf:     (None, sorted_row_indices)
#   internal: (axis, split_value, left, right)
# where every point in left has coordinate <= split_value on axis and every
# point in right has coordinate >= split_value.


def _build_tree(points: np.ndarray, indices: np.ndarray, depth: int):
    if indices.shape[0] <= _LEAF_SIZE:
        return (None, np.sort(indices))
    axis = depth % points.shape[1]
    values = points[indices, axis]
    mid = indices.shape[0] // 2
    order = np.argpartition(values, mid)
    split_value = float(values[order[mid]])
    left = indices[order[:mid]]
    right = indices[order[mid:]]
    return (
        axis,
        split_value,
        _build_tree(points, left, depth + 1),
        _build_tree(points, right, depth + 1),
    )


def _scan_leaf(points, bucket, queries, q_idx, best_d2, best_idx, visits):
    """Score one leaf bucket against a batch of queries and keep the best.

    The bucket is sorted ascending and np.argmin returns the first minimum,
    so within the bucket ties already resolve to the lowest row index; the
    cross-bucket update below applies the same rule.
    """
    diff = queries[q_idx][:, None, :] - points[bucket][None, :, :]
    d2 = np.einsum("qbd,qbd->qb", diff, diff)
    col = np.argmin(d2, axis=1)
    cand_d2 = d2[np.arange(q_idx.shape[0]), col]
    cand_idx = bucket[col]
    cur_d2 = best_d2[q_idx]
    cur_idx = best_idx[q_idx]
    better = (cand_d2 < cur_d2) | ((cand_d2 == cur_d2) & (cand_idx < cur_idx))
    upd = q_idx[better]
    best_d2[upd] = cand_d2[better]
    best_idx[upd] = cand_idx[better]
    if visits is not None:
        visits[q_idx] += bucket.shape[0]


def _descend(node, points, queries, q_idx, best_d2, best_idx, visits):
    """Depth-first refinement for a batch of queries sharing this subtree.

    Near children are finished before far children are considered, so the
    pruning bound is already tight when the splitting plane is tested.  The
    far side is visited on plane_distance**2 <= best_d2 (not <) so exact
    boundary ties can never be pruned away.
    """
    if node[0] is None:
        _scan_leaf(points, node[1], queries, q_idx, best_d2, best_idx, visits)
        return
    axis, split_value, left, right = node
    diff = queries[q_idx, axis] - split_value
    goes_left = diff < 0.0
    near_left = q_idx[goes_left]
    near_right = q_idx[~goes_left]
    if near_left.shape[0]:
        _descend(left, points, queries, near_left, best_d2, best_idx, visits)
    if near_right.shape[0]:
        _descend(right, points, queries, near_right, best_d2, best_idx, visits)
    plane_d2 = diff * diff
    cross_right = near_left[plane_d2[goes_left] <= best_d2[near_left]]
    if cross_right.shape[0]:
        _descend(right, points, queries, cross_right, best_d2, best_idx, visits)
    cross_left = near_right[plane_d2[~goes_left] <= best_d2[near_right]]
    if cross_left.shape[0]:
        _descend(left, points, queries, cross_left, best_d2, best_idx, visits)


def _linear_scan(points, queries, visits):
    n_q = queries.shape[0]
    best_idx = np.empty(n_q, dtype=np.intp)
    best_d2 = np.empty(n_q, dtype=np.float64)
    for start in range(0, n_q, _SCAN_CHUNK):
        stop = min(start + _SCAN_CHUNK, n_q)
        diff = queries[start:stop, None, :] - points[None, :, :]
        d2 = np.einsum("qbd,qbd->qb", diff, diff)
        col = np.argmin(d2, axis=1)
        best_idx[start:stop] = col
        best_d2[start:stop] = d2[np.arange(stop - start), col]
    if visits is not None:
        visits += points.shape[0]
    return best_idx, best_d2


@dataclass
class NnIndex:
    """Search structure over reference z vectors with attached x payload."""

    points: np.ndarray
    payload: np.ndarray
    method: str
    _tree: tuple | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def query(self, queries) -> tuple[np.ndarray, np.ndarray]:
        """Indices of and distances to the nearest reference row per query."""
        idx, dist, _ = self._query_impl(queries, count_visits=False)
        return idx, dist

    def query_with_stats(self, queries):
        """Like query(), also returning reference rows scanned per query."""
        return self._query_impl(queries, count_visits=True)

    def _query_impl(self, queries, count_visits):
        q = np.ascontiguousarray(queries, dtype=np.float64)
        if q.ndim == 1:
            q = q[None, :]
        if q.ndim != 2 or q.shape[1] != self.dim:
            raise ValueError(
                f"queries must have {self.dim} columns, got shape {q.shape}"
            )
        visits = np.zeros(q.shape[0], dtype=np.int64) if count_visits else None
        if self.method == "kdtree":
            best_d2 = np.full(q.shape[0], np.inf)
            best_idx = np.full(q.shape[0], -1, dtype=np.intp)
            _descend(self._tree, self.points, q, np.arange(q.shape[0]),
                     best_d2, best_idx, visits)
        else:
            best_idx, best_d2 = _linear_scan(self.points, q, visits)
        return best_idx, np.sqrt(best_d2), visits


def build_index(reference: Dataset) -> NnIndex:
    """Build a 1-NN index over reference.z carrying reference.x as payload."""
    if reference.n < 1:
        raise ValueError("reference set must be nonempty")
    points = reference.z
    method = "kdtree" if reference.d_z <= KDTREE_MAX_DIM else "brute"
    tree = None
    if method == "kdtree":
        tree = _build_tree(points, np.arange(reference.n, dtype=np.intp), 0)
    return NnIndex(points=points, payload=reference.x, method=method, _tree=tree)


def sample_1nn(index: NnIndex, queries: Dataset) -> np.ndarray:
    """x value of the nearest reference z for each query row.

    Output length equals queries.n and every value is an element of the
    reference x column.
    """
    if queries.d_z != index.dim:
        raise ValueError(
            f"query z has {queries.d_z} columns, index was built on {index.dim}"
        )
    idx, _ = index.query(queries.z)
    return index.payload[idx]
