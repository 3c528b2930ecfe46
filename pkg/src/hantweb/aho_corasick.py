"""Single-pass multi-pattern substring matching (Aho-Corasick).

Built once per phrase set, then each document costs O(len(text) + matches)
regardless of how many phrases are loaded. Characters are matched as
codepoints, so CJK phrases need no tokenization.
"""
from __future__ import annotations

from collections import deque
from typing import Iterable, Iterator


class _Node:
    __slots__ = ("children", "fail", "outputs")

    def __init__(self) -> None:
        self.children: dict[str, _Node] = {}
        self.fail: _Node | None = None
        self.outputs: list[str] = []


class PhraseMatcher:
    """Aho-Corasick automaton over a fixed set of phrases.

    Empty phrases are ignored; an empty phrase set matches nothing.
    """

    def __init__(self, phrases: Iterable[str]):
        self._root = _Node()
        self._size = 0
        for phrase in phrases:
            if phrase:
                self._add(phrase)
        self._build_failure_links()

    def __len__(self) -> int:
        return self._size

    def _add(self, phrase: str) -> None:
        node = self._root
        for ch in phrase:
            node = node.children.setdefault(ch, _Node())
        if phrase not in node.outputs:
            node.outputs.append(phrase)
            self._size += 1

    def _build_failure_links(self) -> None:
        root = self._root
        root.fail = root
        queue: deque[_Node] = deque()
        for child in root.children.values():
            child.fail = root
            queue.append(child)
        while queue:
            node = queue.popleft()
            for ch, child in node.children.items():
                fail = node.fail
                while fail is not root and ch not in fail.children:
                    fail = fail.fail
                child.fail = fail.children.get(ch, root)
                child.outputs.extend(child.fail.outputs)
                queue.append(child)

    def _step(self, node: _Node, ch: str) -> _Node:
        root = self._root
        while node is not root and ch not in node.children:
            node = node.fail
        return node.children.get(ch, root)

    def contains_any(self, text: str) -> bool:
        """True iff any phrase occurs in ``text``. Stops at the first hit."""
        node = self._root
        if not node.children:
            return False
        for ch in text:
            node = self._step(node, ch)
            if node.outputs:
                return True
        return False

    def iter_matches(self, text: str) -> Iterator[tuple[int, str]]:
        """Yield (start_index, phrase) for every occurrence, in scan order."""
        node = self._root
        if not node.children:
            return
        for i, ch in enumerate(text):
            node = self._step(node, ch)
            for phrase in node.outputs:
                yield i + 1 - len(phrase), phrase
