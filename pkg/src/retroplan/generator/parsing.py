"""Tolerant parsing of ``<ROUTE>`` blocks from free-form model output.

Each block is tried as a Python literal, then as JSON, then line by line.
A malformed step discards only its own block.
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass

from retroplan.routes import Pathway, ReactionStep

ROUTE_RE = re.compile(r"<ROUTE>(.*?)</ROUTE>", re.IGNORECASE | re.DOTALL)
_CHUNK_RE = re.compile(r"\{(.*?)\}", re.DOTALL)
_FIELD_RE = re.compile(r"""^\s*["']?([A-Za-z ]+?)["']?\s*:\s*(.*?)\s*,?\s*$""")

_BRACKET_ATOM_RE = re.compile(
    r"\[\d*(?:[A-Z][a-z]?|[bcnops]|se|as)@{0,2}(?:H\d*)?(?:[+-]+\d*)?(?::\d+)?\]")

MAX_BLOCK_CHARS = 200_000


class NoRouteError(ValueError):
    """The text contains no ``<ROUTE>`` block at all."""


@dataclass(frozen=True)
class RawStep:
    molecule_set: tuple[str, ...]
    rational: str
    product: str
    reaction: str | None
    reactants: tuple[str, ...]
    updated_molecule_set: tuple[str, ...]


def _norm_key(key) -> str:
    return re.sub(r"[^a-z]", "", str(key).lower())


_KEYS = {
    "moleculeset": "molecule_set",
    "rational": "rational",
    "rationale": "rational",
    "product": "product",
    "products": "product",
    "reaction": "reaction",
    "reactants": "reactants",
    "updatedmoleculeset": "updated_molecule_set",
}


def _split_list_text(text: str) -> list[str]:
    """Molecules from a string such as ``"['A', 'B']"``, ``"[A, B]"``, ``"A.B"``."""
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        text = text[1:-1].strip()
    if not text:
        return []
    if text.startswith("[") and text.endswith("]"):
        try:
            val = ast.literal_eval(text)
        except (ValueError, SyntaxError, TypeError, MemoryError, RecursionError):
            val = None
        if isinstance(val, (list, tuple)):
            return molecules(val)
        # an unquoted list such as [A, B] or [CCO], but not a lone atom like [NH4+]
        if not _BRACKET_ATOM_RE.fullmatch(text):
            inner = text[1:-1]
            return [m for chunk in inner.split(",") for m in chunk.strip(" '\"").split(".") if m]
    parts = []
    for chunk in text.split(","):
        chunk = chunk.strip(" '\"")
        parts.extend(p for p in chunk.split(".") if p)
    return parts


def molecules(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        return _split_list_text(value)
    if isinstance(value, (list, tuple)):
        out = []
        for v in value:
            out.extend(molecules(v))
        return out
    raise ValueError(f"cannot read molecules from {type(value).__name__}")


def _text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (list, tuple)):
        return " ".join(_text(v) for v in value)
    return str(value).strip()


def raw_step(d: dict) -> RawStep:
    fields = {}
    for k, v in d.items():
        name = _KEYS.get(_norm_key(k))
        if name:
            fields[name] = v
    products = molecules(fields.get("product"))
    reactants = molecules(fields.get("reactants"))
    if not products:
        raise ValueError("step has no product")
    if not reactants:
        raise ValueError("step has no reactants")
    reaction = _text(fields.get("reaction")) or None
    return RawStep(
        tuple(molecules(fields.get("molecule_set"))),
        _text(fields.get("rational")),
        products[0],
        reaction,
        tuple(reactants),
        tuple(molecules(fields.get("updated_molecule_set"))),
    )


def _literal_steps(body: str) -> list | None:
    for loader in (ast.literal_eval, json.loads):
        try:
            val = loader(body)
        except (ValueError, SyntaxError, TypeError, MemoryError, RecursionError):
            continue
        if isinstance(val, dict):
            val = [val]
        if isinstance(val, (list, tuple)):
            return list(val)
    return None


def _strip_comment(line: str) -> str:
    # '#' is also the SMILES triple bond, so only cut after the last quote
    last_quote = max(line.rfind("'"), line.rfind('"'))
    cut = line.find("#", last_quote + 1)
    return line if cut < 0 else line[:cut]


def _line_steps(body: str) -> list[dict]:
    steps = []
    for chunk in _CHUNK_RE.findall(body):
        d = {}
        for line in chunk.splitlines():
            m = _FIELD_RE.match(_strip_comment(line))
            if m:
                d[m.group(1)] = m.group(2)
        if d:
            steps.append(d)
    return steps


def parse_block(body: str) -> Pathway:
    """Parse the inside of one ROUTE block.

    Raises:
        ValueError: when the block or any of its steps is unusable.
    """
    if len(body) > MAX_BLOCK_CHARS:
        raise ValueError("block too large")
    items = _literal_steps(body.strip())
    if items is None:
        items = _line_steps(body)
    if not items:
        raise ValueError("block holds no steps")
    steps = []
    for i, item in enumerate(items, start=1):
        if not isinstance(item, dict):
            raise ValueError(f"step {i} is not a dictionary")
        try:
            rs = raw_step(item)
        except ValueError as exc:
            raise ValueError(f"step {i}: {exc}") from None
        steps.append(ReactionStep(rs.product, rs.reactants, rs.reaction))
    return Pathway(tuple(steps))


def parse_route_blocks(text: str) -> tuple[list[Pathway], list[str]]:
    """All parseable blocks plus one diagnostic per discarded block.

    Raises:
        NoRouteError: when ``text`` has no ROUTE block.
    """
    if not isinstance(text, str):
        raise NoRouteError("response is not text")
    bodies = ROUTE_RE.findall(text)
    if not bodies:
        raise NoRouteError("no <ROUTE> block in response")
    pathways: list[Pathway] = []
    diagnostics: list[str] = []
    for i, body in enumerate(bodies, start=1):
        try:
            p = parse_block(body)
        except Exception as exc:  # noqa: BLE001 - arbitrary model text must never escape
            diagnostics.append(f"route block {i}: {exc}")
            continue
        pathways.append(Pathway(p.steps, provenance=f"block {i}"))
    return pathways, diagnostics


def parse_route_response(text: str) -> list[Pathway]:
    """Pathways from every well-formed ROUTE block; see :func:`parse_route_blocks`."""
    return parse_route_blocks(text)[0]
