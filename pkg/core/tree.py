"""
Decision-tree model: node table, routing, predictions, JSON and DOT export.
"""
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from config.settings import FORMAT_VERSION
from core.errors import FormatVersionError
from utils.files import atomic_write_text


@dataclass(frozen=True)
class Node:
    """A tree node; leaves have test None and no children."""
    id: int
    depth: int
    mass: int                           # training multiplicity reaching the node
    n_objects: int                      # training objects reaching the node
    class_masses: tuple[int, ...]
    test: int | None = None
    children: dict[int, int] = field(default_factory=dict)  # outcome -> node id

    @property
    def is_leaf(self) -> bool:
        return self.test is None

    @property
    def label(self) -> int:
        """Majority class by mass, ties to the smallest class index."""
        return int(np.argmax(self.class_masses))

    def distribution(self) -> np.ndarray:
        masses = np.asarray(self.class_masses, dtype=float)
        total = masses.sum()
        return masses / total if total > 0 else np.full(len(masses), 1.0 / len(masses))

    def as_leaf(self) -> "Node":
        return replace(self, test=None, children={})


@dataclass
class TreeModel:
    """Induced decision tree over an instance's tests."""
    nodes: dict[int, Node]
    root: int
    classes: tuple[str, ...]
    test_names: tuple[str, ...]
    total: int                          # multiplicity denominator of the training data
    meta: dict[str, Any] = field(default_factory=dict, compare=False)  # in-memory run info, not saved

    # ----------------------------------------------------------------------
    # Structure
    # ----------------------------------------------------------------------

    @property
    def size(self) -> int:
        return len(self.nodes)

    def leaves(self) -> list[Node]:
        return [n for n in self.nodes.values() if n.is_leaf]

    def internal(self) -> list[Node]:
        return [n for n in self.nodes.values() if not n.is_leaf]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves())

    @property
    def height(self) -> int:
        return max(n.depth for n in self.nodes.values())

    def descendants(self, node_id: int) -> list[int]:
        """Ids of the subtree rooted at node_id, the node included."""
        out = []
        stack = [node_id]
        while stack:
            current = stack.pop()
            out.append(current)
            stack.extend(self.nodes[current].children.values())
        return out

    def subtree_leaves(self, node_id: int) -> list[Node]:
        return [self.nodes[i] for i in self.descendants(node_id) if self.nodes[i].is_leaf]

    def collapse(self, node_ids) -> "TreeModel":
        """Copy of the tree with the given nodes turned into leaves."""
        nodes = dict(self.nodes)
        for node_id in node_ids:
            if node_id not in nodes:
                continue
            for child in self.descendants(node_id)[1:]:
                nodes.pop(child, None)
            nodes[node_id] = nodes[node_id].as_leaf()
        return TreeModel(nodes, self.root, self.classes, self.test_names, self.total, dict(self.meta))

    def test_sequence(self) -> list[tuple[int, int | None]]:
        """(node id, test) pairs in id order."""
        return [(i, self.nodes[i].test) for i in sorted(self.nodes)]

    # ----------------------------------------------------------------------
    # Routing
    # ----------------------------------------------------------------------

    def _fallback_child(self, node: Node) -> int:
        # majority-mass child, ties to the smallest outcome
        value = max(sorted(node.children), key=lambda v: self.nodes[node.children[v]].mass)
        return node.children[value]

    def assign(self, matrix: np.ndarray, costs: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, int]:
        """
        Route rows to leaves.

        Args:
            matrix: Outcome rows (n x m)
            costs: Test costs; unit costs when None

        Returns:
            (leaf id per row, accumulated path cost per row, unroutable count)
        """
        matrix = np.asarray(matrix)
        n = matrix.shape[0]
        leaf = np.empty(n, dtype=np.int64)
        path_cost = np.zeros(n, dtype=float)
        unroutable = 0
        stack = [(self.root, np.arange(n))]
        while stack:
            node_id, rows = stack.pop()
            node = self.nodes[node_id]
            if node.is_leaf or rows.size == 0:
                leaf[rows] = node_id
                continue
            path_cost[rows] += 1.0 if costs is None else float(costs[node.test])
            outcomes = matrix[rows, node.test]
            routed = np.zeros(rows.size, dtype=bool)
            for value, child in node.children.items():
                hit = outcomes == value
                routed |= hit
                stack.append((child, rows[hit]))
            if not routed.all():
                unroutable += int((~routed).sum())
                stack.append((self._fallback_child(node), rows[~routed]))
        return leaf, path_cost, unroutable

    def predict_proba(self, matrix: np.ndarray) -> np.ndarray:
        """Leaf class distribution for every row."""
        leaf, _, _ = self.assign(matrix)
        table = {i: n.distribution() for i, n in self.nodes.items() if n.is_leaf}
        if len(leaf) == 0:
            return np.zeros((0, len(self.classes)))
        return np.stack([table[i] for i in leaf])

    # ----------------------------------------------------------------------
    # Serialization
    # ----------------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "root": self.root,
            "classes": list(self.classes),
            "test_names": list(self.test_names),
            "total": self.total,
            "nodes": [
                {
                    "id": n.id,
                    "depth": n.depth,
                    "mass": n.mass,
                    "n_objects": n.n_objects,
                    "class_masses": list(n.class_masses),
                    "test": n.test,
                    "children": {str(v): c for v, c in sorted(n.children.items())},
                }
                for n in sorted(self.nodes.values(), key=lambda n: n.id)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TreeModel":
        if data.get("format_version") != FORMAT_VERSION:
            raise FormatVersionError(f"model format_version {data.get('format_version')} != {FORMAT_VERSION}")
        nodes = {
            int(n["id"]): Node(
                id=int(n["id"]),
                depth=int(n["depth"]),
                mass=int(n["mass"]),
                n_objects=int(n["n_objects"]),
                class_masses=tuple(int(c) for c in n["class_masses"]),
                test=None if n["test"] is None else int(n["test"]),
                children={int(v): int(c) for v, c in n["children"].items()},
            )
            for n in data["nodes"]
        }
        return cls(
            nodes=nodes,
            root=int(data["root"]),
            classes=tuple(data["classes"]),
            test_names=tuple(data["test_names"]),
            total=int(data["total"]),
        )

    def save(self, path: Path | str) -> None:
        atomic_write_text(Path(path), json.dumps(self.to_dict(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path: Path | str) -> "TreeModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dot(self) -> str:
        """
        Graphviz rendering: internal nodes show "test (count)", leaves show
        "class (count)"; edges carry the outcome value.
        """
        lines = ["digraph tree {", '  node [shape=box, fontname="Helvetica"];']
        for node in sorted(self.nodes.values(), key=lambda n: n.id):
            if node.is_leaf:
                text = f"{self.classes[node.label]} ({node.mass})"
                lines.append(f'  n{node.id} [label="{_escape(text)}", style=rounded];')
            else:
                text = f"{self.test_names[node.test]} ({node.mass})"
                lines.append(f'  n{node.id} [label="{_escape(text)}"];')
        for node in sorted(self.nodes.values(), key=lambda n: n.id):
            for value, child in sorted(node.children.items()):
                lines.append(f'  n{node.id} -> n{child} [label="{value}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')
