"""Uniform-grid spatial hash for nearest-neighbor lookups.

Points are hashed into cubic cells keyed by integer coordinates. A query
with search radius at most the cell size only needs its own cell plus the
26 surrounding ones; larger radii widen the shell accordingly. Queries are
grouped by their containing cell so each distinct cell gathers its
candidate block once.
"""

from __future__ import annotations

import math
from typing import Dict, Tuple

import numpy as np


class UniformGridIndex:
    def __init__(self, points: np.ndarray, cell_size: float):
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.points = np.asarray(points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError("points must be (N, 3)")
        self.cell_size = float(cell_size)
        self._cells: Dict[Tuple[int, int, int], np.ndarray] = {}
        keys = np.floor(self.points / self.cell_size).astype(np.int64)
        order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
        sorted_keys = keys[order]
        boundaries = np.nonzero(np.any(np.diff(sorted_keys, axis=0) != 0, axis=1))[0] + 1
        start = 0
        for end in list(boundaries) + [len(order)]:
            if end > start:
                key = tuple(int(v) for v in sorted_keys[start])
                self._cells[key] = order[start:end]
            start = end

    def __len__(self) -> int:
        return len(self.points)

    def nearest_within(self, queries: np.ndarray, radius: float):
        """Index and distance of the nearest stored point per query.

        Queries with no stored point within `radius` get index -1 and
        distance inf.
        """
        queries = np.asarray(queries, dtype=np.float64)
        if queries.ndim != 2 or queries.shape[1] != 3:
            raise ValueError("queries must be (N, 3)")
        n = len(queries)
        out_idx = np.full(n, -1, dtype=np.int64)
        out_dist = np.full(n, np.inf)
        if n == 0 or len(self.points) == 0:
            return out_idx, out_dist

        shell = max(1, int(math.ceil(radius / self.cell_size)))
        offsets = np.array(
            [
                (dx, dy, dz)
                for dx in range(-shell, shell + 1)
                for dy in range(-shell, shell + 1)
                for dz in range(-shell, shell + 1)
            ],
            dtype=np.int64,
        )

        qkeys = np.floor(queries / self.cell_size).astype(np.int64)
        unique_keys, inverse = np.unique(qkeys, axis=0, return_inverse=True)
        for u, key in enumerate(unique_keys):
            members = np.nonzero(inverse == u)[0]
            candidate_blocks = []
            for off in key + offsets:
                block = self._cells.get((int(off[0]), int(off[1]), int(off[2])))
                if block is not None:
                    candidate_blocks.append(block)
            if not candidate_blocks:
                continue
            cand = np.concatenate(candidate_blocks)
            diffs = queries[members][:, None, :] - self.points[cand][None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diffs, diffs)
            best = np.argmin(d2, axis=1)
            best_d = np.sqrt(d2[np.arange(len(members)), best])
            ok = best_d <= radius
            out_idx[members[ok]] = cand[best[ok]]
            out_dist[members[ok]] = best_d[ok]
        return out_idx, out_dist
