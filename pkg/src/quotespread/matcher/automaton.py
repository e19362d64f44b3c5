"""Aho-Corasick automaton over token sequences.

Patterns and haystacks are sequences of tokens, not characters, so a match
is always aligned to token boundaries: the pattern ``("america", "first")``
matches inside ``("say", "america", "first", "!")`` but never inside
``("americana", "first")``.

After the trie and failure links are built, each state keeps a compact
transition table: the union of the goto edges along its failure chain,
excluding the root. Any token missing from that table falls through to the
root's goto edges. Scanning is then one or two dict lookups per token with
no failure-link walking at search time.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable, Sequence


class TokenAutomaton:
    """Multi-pattern contiguous-subsequence matcher.

    >>> ac = TokenAutomaton([("america", "first"), ("first",)])
    >>> sorted(ac.search(["we", "say", "america", "first"]))
    [0, 1]
    """

    def __init__(self, patterns: Iterable[Sequence[str]]) -> None:
        children: list[dict[str, int]] = [{}]
        own: list[list[int]] = [[]]
        n = 0
        for index, pattern in enumerate(patterns):
            if not pattern:
                raise ValueError(f"pattern {index} is empty")
            state = 0
            for token in pattern:
                nxt = children[state].get(token)
                if nxt is None:
                    nxt = len(children)
                    children[state][token] = nxt
                    children.append({})
                    own.append([])
                state = nxt
            own[state].append(index)
            n += 1
        self.pattern_count = n
        self._build(children, own)

    def _build(self, children: list[dict[str, int]], own: list[list[int]]) -> None:
        size = len(children)
        fail = [0] * size
        delta: list[dict[str, int]] = [{} for _ in range(size)]
        outputs: list[tuple[int, ...]] = [()] * size

        root = children[0]
        queue: deque[int] = deque()
        for child in root.values():
            delta[child] = children[child]
            outputs[child] = tuple(own[child])
            queue.append(child)

        # BFS guarantees fail[s] is finalized before s's children are visited.
        while queue:
            state = queue.popleft()
            for token, child in children[state].items():
                f = delta[fail[state]].get(token)
                if f is None:
                    f = root.get(token, 0)
                fail[child] = f
                if f == 0:
                    delta[child] = children[child]
                else:
                    merged = dict(delta[f])
                    merged.update(children[child])
                    delta[child] = merged
                outputs[child] = tuple(own[child]) + outputs[f]
                queue.append(child)

        self._root = root
        self._delta = delta
        self._outputs = outputs
        self._fail = fail
        self.state_count = size

    def search(self, tokens: Iterable[str]) -> set[int]:
        """Return the indices of every pattern occurring in ``tokens``."""
        root_get = self._root.get
        delta = self._delta
        outputs = self._outputs
        hits: set[int] = set()
        state = 0
        for token in tokens:
            nxt = delta[state].get(token)
            if nxt is None:
                nxt = root_get(token, 0)
            state = nxt
            out = outputs[state]
            if out:
                hits.update(out)
        return hits
