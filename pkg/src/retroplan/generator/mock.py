"""Deterministic in-process generators for tests and offline runs."""

from __future__ import annotations

import threading
from collections import deque
from typing import Iterable, Sequence, Union

from retroplan.generator.base import GenerationResponse, GeneratorExhausted, TokenUsage
from retroplan.generator.parsing import NoRouteError, parse_route_blocks
from retroplan.routes import Pathway

ScriptItem = Union[GenerationResponse, Sequence[Pathway], str, BaseException]


class ScriptedGenerator:
    """Replays a fixed queue of responses, one per call, ignoring the query.

    Items may be ready responses, pathway lists, raw model text (parsed on
    use) or exceptions (raised on use). Once the queue is empty, calls return
    an empty response, or raise :class:`GeneratorExhausted` when ``strict``.
    """

    def __init__(self, script: Iterable[ScriptItem] = (), strict: bool = False):
        self._queue: deque = deque(script)
        self._lock = threading.Lock()
        self.strict = strict
        self.calls: list[str] = []

    def generate(self, molecule, examples=(), cfg=None, seed=None) -> GenerationResponse:
        with self._lock:
            self.calls.append(molecule)
            if not self._queue:
                if self.strict:
                    raise GeneratorExhausted("script exhausted")
                return GenerationResponse()
            item = self._queue.popleft()
        if isinstance(item, BaseException):
            raise item
        if isinstance(item, GenerationResponse):
            return item
        if isinstance(item, str):
            return response_from_text(item)
        return GenerationResponse(tuple(item))


class RuleGenerator:
    """Answers by looking the queried molecule up in a ``{molecule: [pathways]}`` table."""

    def __init__(self, table: dict[str, Sequence[Pathway]]):
        self.table = {k: tuple(v) for k, v in table.items()}
        self._lock = threading.Lock()
        self.calls: list[str] = []

    def generate(self, molecule, examples=(), cfg=None, seed=None) -> GenerationResponse:
        with self._lock:
            self.calls.append(molecule)
        return GenerationResponse(self.table.get(molecule, ()))


def response_from_text(text: str, usage: TokenUsage = TokenUsage()) -> GenerationResponse:
    try:
        pathways, diags = parse_route_blocks(text)
    except NoRouteError as exc:
        return GenerationResponse((), usage, text, (str(exc),))
    return GenerationResponse(tuple(pathways), usage, text, tuple(diags))
