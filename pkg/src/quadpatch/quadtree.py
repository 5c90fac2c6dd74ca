"""Edge-density quadtree: construction, Morton ordering, partition checks.

The input edge map is padded bottom/right with zero edges to the next
power-of-two square (side ``grid_size``). A node splits into NW/NE/SW/SE
quadrants while its edge-pixel count exceeds the split value and its depth
is below the effective depth limit; leaves never shrink past 2x2.
Trees are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .raster import EdgeMap

__all__ = [
    "Region",
    "QuadNode",
    "Quadtree",
    "SummedAreaTable",
    "integral_image",
    "effective_depth_limit",
    "build_quadtree",
    "morton_encode",
    "ordered_leaves",
    "verify_partition",
    "PartitionReport",
    "CheckResult",
    "tree_to_dict",
]


@dataclass(frozen=True)
class Region:
    """Square region: top-left corner (x right, y down) and side length."""

    x: int
    y: int
    size: int


@dataclass(eq=False)
class QuadNode:
    region: Region
    depth: int
    edge_count: int
    # None for leaves, else exactly (NW, NE, SW, SE)
    children: tuple["QuadNode", "QuadNode", "QuadNode", "QuadNode"] | None = None

    @property
    def is_leaf(self) -> bool:
        return self.children is None


@dataclass(eq=False)
class Quadtree:
    root: QuadNode
    grid_size: int  # padded power-of-two square side
    original_size: tuple[int, int]  # (width, height) before padding
    split_value: int
    depth_limit: int  # as requested; see effective_depth_limit

    @property
    def effective_depth_limit(self) -> int:
        return effective_depth_limit(self.grid_size, self.depth_limit)

    @property
    def min_leaf_size(self) -> int:
        """Smallest leaf side the depth limit allows on this grid."""
        return self.grid_size >> self.effective_depth_limit

    def leaves(self) -> list[QuadNode]:
        return ordered_leaves(self)

    def leaf_count(self) -> int:
        return len(ordered_leaves(self))

    def morton_of(self, node: QuadNode) -> int:
        """Morton code of a node's top-left cell at min-leaf granularity."""
        s = self.min_leaf_size
        return morton_encode(node.region.x // s, node.region.y // s)


@dataclass(eq=False)
class SummedAreaTable:
    """table[y, x] = number of edge pixels in the rectangle [0, x) x [0, y)."""

    table: np.ndarray  # (h + 1, w + 1) int64

    def region_count(self, x: int, y: int, size: int) -> int:
        """Edge pixels inside [x, x+size) x [y, y+size); outside counts as 0."""
        h, w = self.table.shape[0] - 1, self.table.shape[1] - 1
        x0, y0 = min(x, w), min(y, h)
        x1, y1 = min(x + size, w), min(y + size, h)
        t = self.table
        return int(t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0])


def integral_image(edges: EdgeMap) -> SummedAreaTable:
    table = np.zeros((edges.height + 1, edges.width + 1), dtype=np.int64)
    table[1:, 1:] = np.cumsum(np.cumsum(edges.bits, axis=0, dtype=np.int64), axis=1)
    return SummedAreaTable(table)


def _next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


def effective_depth_limit(grid_size: int, depth_limit: int) -> int:
    """Depth limit clamped so the smallest leaf is 2x2 (never below 0)."""
    floor_depth = max(0, grid_size.bit_length() - 2)  # log2(grid) - 1
    return min(depth_limit, floor_depth)


def build_quadtree(edges: EdgeMap, split_value: int, depth_limit: int) -> Quadtree:
    """Recursively subdivide while a region holds more than ``split_value``
    edge pixels and its depth is below the effective limit."""
    if split_value < 0:
        raise ConfigError(f"split value must be >= 0, got {split_value}")
    if depth_limit < 0:
        raise ConfigError(f"depth limit must be >= 0, got {depth_limit}")
    grid = _next_pow2(max(edges.width, edges.height))
    max_depth = effective_depth_limit(grid, depth_limit)
    sat = integral_image(edges)

    def build(x: int, y: int, size: int, depth: int) -> QuadNode:
        count = sat.region_count(x, y, size)
        node = QuadNode(Region(x, y, size), depth, count)
        if count > split_value and depth < max_depth:
            half = size // 2
            node.children = (
                build(x, y, half, depth + 1),
                build(x + half, y, half, depth + 1),
                build(x, y + half, half, depth + 1),
                build(x + half, y + half, half, depth + 1),
            )
        return node

    root = build(0, 0, grid, 0)
    return Quadtree(
        root=root,
        grid_size=grid,
        original_size=(edges.width, edges.height),
        split_value=split_value,
        depth_limit=depth_limit,
    )


def _part1by1(n: int) -> int:
    """Spread the low 32 bits of n so bit i lands at position 2i."""
    n &= 0xFFFFFFFF
    n = (n | (n << 16)) & 0x0000FFFF0000FFFF
    n = (n | (n << 8)) & 0x00FF00FF00FF00FF
    n = (n | (n << 4)) & 0x0F0F0F0F0F0F0F0F
    n = (n | (n << 2)) & 0x3333333333333333
    n = (n | (n << 1)) & 0x5555555555555555
    return n


def morton_encode(cx: int, cy: int) -> int:
    """Interleave cell coordinates, cy taking the more significant bit of
    each pair: per level NW(0) < NE(1) < SW(2) < SE(3)."""
    return _part1by1(cx) | (_part1by1(cy) << 1)


def ordered_leaves(tree: Quadtree) -> list[QuadNode]:
    """Leaves in depth-first (NW, NE, SW, SE) order, which equals ascending
    Morton order of their top-left cells."""
    out: list[QuadNode] = []
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            out.append(node)
        else:
            stack.extend(reversed(node.children))
    return out


@dataclass
class CheckResult:
    passed: bool
    detail: str = ""


@dataclass
class PartitionReport:
    tiling: CheckResult
    criterion: CheckResult
    morton_order: CheckResult

    @property
    def ok(self) -> bool:
        return self.tiling.passed and self.criterion.passed and self.morton_order.passed

    def summary(self) -> str:
        lines = []
        for name in ("tiling", "criterion", "morton_order"):
            check: CheckResult = getattr(self, name)
            status = "pass" if check.passed else f"FAIL ({check.detail})"
            lines.append(f"{name}: {status}")
        return "\n".join(lines)


def _walk(node: QuadNode):
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        if not n.is_leaf:
            stack.extend(reversed(n.children))


def _check_tiling(tree: Quadtree, leaves: list[QuadNode]) -> CheckResult:
    grid = tree.grid_size
    coverage = np.zeros((grid, grid), dtype=np.int32)
    for leaf in leaves:
        r = leaf.region
        if r.x < 0 or r.y < 0 or r.x + r.size > grid or r.y + r.size > grid:
            return CheckResult(False, f"leaf {r} extends outside the {grid} grid")
        coverage[r.y : r.y + r.size, r.x : r.x + r.size] += 1
    if (coverage == 1).all():
        return CheckResult(True)
    bad = np.argwhere(coverage != 1)[0]
    y, x = int(bad[0]), int(bad[1])
    if coverage[y, x] == 0:
        return CheckResult(False, f"cell ({x}, {y}) not covered by any leaf")
    owners = [
        leaf.region
        for leaf in leaves
        if leaf.region.x <= x < leaf.region.x + leaf.region.size
        and leaf.region.y <= y < leaf.region.y + leaf.region.size
    ]
    return CheckResult(False, f"cell ({x}, {y}) covered by {len(owners)} leaves: {owners}")


def _check_criterion(tree: Quadtree) -> CheckResult:
    v = tree.split_value
    max_depth = tree.effective_depth_limit
    for node in _walk(tree.root):
        if node.is_leaf:
            if node.edge_count > v and node.depth != max_depth:
                return CheckResult(
                    False,
                    f"leaf {node.region} has edge_count {node.edge_count} > {v} "
                    f"at depth {node.depth} != limit {max_depth}",
                )
        elif node.edge_count <= v:
            return CheckResult(
                False,
                f"internal node {node.region} has edge_count {node.edge_count} <= {v}",
            )
    return CheckResult(True)


def _check_morton(tree: Quadtree, leaves: list[QuadNode]) -> CheckResult:
    codes = [tree.morton_of(leaf) for leaf in leaves]
    for i in range(len(codes) - 1):
        if codes[i] >= codes[i + 1]:
            return CheckResult(
                False,
                f"leaf {i} (code {codes[i]}) not below leaf {i + 1} (code {codes[i + 1]})",
            )
    return CheckResult(True)


def verify_partition(tree: Quadtree) -> PartitionReport:
    """Check that leaves tile the grid exactly, the split criterion holds at
    every node, and the DFS leaf order is strictly Morton-increasing."""
    leaves = ordered_leaves(tree)
    return PartitionReport(
        tiling=_check_tiling(tree, leaves),
        criterion=_check_criterion(tree),
        morton_order=_check_morton(tree, leaves),
    )


def _node_to_dict(node: QuadNode) -> dict:
    out: dict = {
        "x": node.region.x,
        "y": node.region.y,
        "size": node.region.size,
        "depth": node.depth,
        "edge_count": node.edge_count,
    }
    if not node.is_leaf:
        out["children"] = [_node_to_dict(c) for c in node.children]
    return out


def tree_to_dict(tree: Quadtree) -> dict:
    """JSON-serializable nested representation (debugging, golden tests)."""
    return {
        "grid_size": tree.grid_size,
        "original_size": list(tree.original_size),
        "split_value": tree.split_value,
        "depth_limit": tree.depth_limit,
        "effective_depth_limit": tree.effective_depth_limit,
        "root": _node_to_dict(tree.root),
    }
