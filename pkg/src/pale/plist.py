"""Participant list: a max pairing heap indexed by node id.

Entries are ordered by ``(rank, tie, id)`` descending.  ``tie`` is only
set on leader entries (rank infinity) and breaks symmetry between leaders
that meet after a region merge.

Costs: peek O(1), insert O(1), rank-raising update O(1), rank-lowering
update and delete-best O(log n) amortized, keyed lookup O(1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Hashable, Iterator, Optional


@dataclass(frozen=True)
class PLEntry:
    id: Hashable
    rank: float
    round: int
    time: float
    tie: Optional[tuple] = None

    @property
    def key(self) -> tuple:
        return entry_key(self.rank, self.tie, self.id)


def entry_key(rank: float, tie: Optional[tuple], node_id: Any) -> tuple:
    return (rank, tie if tie is not None else (), node_id)


class _Node:
    __slots__ = ("entry", "key", "child", "sibling", "prev")

    def __init__(self, entry: PLEntry):
        self.entry = entry
        self.key = entry.key
        self.child: Optional[_Node] = None
        self.sibling: Optional[_Node] = None
        # parent when this node is the leftmost child, else left sibling
        self.prev: Optional[_Node] = None


def _meld(a: Optional[_Node], b: Optional[_Node]) -> Optional[_Node]:
    if a is None:
        return b
    if b is None:
        return a
    if b.key > a.key:
        a, b = b, a
    # b becomes leftmost child of a
    b.prev = a
    b.sibling = a.child
    if a.child is not None:
        a.child.prev = b
    a.child = b
    a.sibling = None
    a.prev = None
    return a


def _merge_pairs(first: Optional[_Node]) -> Optional[_Node]:
    if first is None:
        return None
    pairs = []
    node = first
    while node is not None:
        a = node
        b = a.sibling
        node = b.sibling if b is not None else None
        a.sibling = a.prev = None
        if b is not None:
            b.sibling = b.prev = None
        pairs.append(_meld(a, b))
    root = pairs.pop()
    while pairs:
        root = _meld(pairs.pop(), root)
    return root


class ParticipantList:
    """Rank-ordered registry holding at most one entry per node id."""

    def __init__(self, entries=()):
        self._root: Optional[_Node] = None
        self._index: dict[Hashable, _Node] = {}
        for e in entries:
            self.insert_or_update(e)

    def __len__(self) -> int:
        return len(self._index)

    def __bool__(self) -> bool:
        return bool(self._index)

    def __contains__(self, node_id) -> bool:
        return node_id in self._index

    def __iter__(self) -> Iterator[PLEntry]:
        """Entries in descending ``(rank, tie, id)`` order."""
        return iter(sorted((n.entry for n in self._index.values()),
                           key=lambda e: e.key, reverse=True))

    def __repr__(self) -> str:
        return f"ParticipantList({list(self)!r})"

    def peek_best(self) -> PLEntry:
        if self._root is None:
            raise IndexError("peek_best on empty participant list")
        return self._root.entry

    def get(self, node_id) -> Optional[PLEntry]:
        node = self._index.get(node_id)
        return node.entry if node is not None else None

    def insert_or_update(self, entry: PLEntry) -> "ParticipantList":
        node = self._index.get(entry.id)
        if node is None:
            node = _Node(entry)
            self._index[entry.id] = node
            self._root = _meld(self._root, node)
            return self
        new_key = entry.key
        if new_key >= node.key:
            node.entry, node.key = entry, new_key
            if node is not self._root:
                self._cut(node)
                self._root = _meld(self._root, node)
        else:
            self._detach(node)
            node.entry, node.key = entry, new_key
            self._root = _meld(self._root, node)
        return self

    def delete_best(self) -> "ParticipantList":
        root = self._root
        if root is None:
            raise IndexError("delete_best on empty participant list")
        del self._index[root.entry.id]
        self._root = _merge_pairs(root.child)
        root.child = None
        return self

    def remove(self, node_id) -> None:
        node = self._index.pop(node_id)
        self._detach(node)

    def _cut(self, node: _Node) -> None:
        # unlink node (with its subtree) from its parent's child list
        prev = node.prev
        if prev.child is node:
            prev.child = node.sibling
        else:
            prev.sibling = node.sibling
        if node.sibling is not None:
            node.sibling.prev = prev
        node.prev = node.sibling = None

    def _detach(self, node: _Node) -> None:
        # remove node alone; its children are re-melded into the heap
        if node is self._root:
            self._root = _merge_pairs(node.child)
        else:
            self._cut(node)
            self._root = _meld(self._root, _merge_pairs(node.child))
        node.child = None
