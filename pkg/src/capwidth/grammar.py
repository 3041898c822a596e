"""Tiny text grammar for describing bodies on the command line.

Supported forms:

    ball(n)                    cube(n)
    ellipsoid(a1, a2, ...)     polydisk(r1, r2, ...)
    ballproduct(rho=[...], I=[[...], ...], J=[[...], ...])
    sum(expr, expr, ...)       linimg([[...], ...], expr)

Numbers are plain decimals; index lists in ballproduct are 1-based.
Syntax errors point at the offending token and its position.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bodies import (
    BallProductSpec,
    SupportBody,
    ball,
    ball_spec,
    ball_product_body,
    cube_spec,
    ellipsoid,
    linear_image,
    minkowski_sum,
    polydisk_spec,
)


class GrammarError(ValueError):
    """Body-string syntax error; the message names the token and position."""


@dataclass(frozen=True)
class ParsedBody:
    body: SupportBody
    spec: Optional[BallProductSpec]  # set when the body is a ball product


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>[-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<sym>[()\[\],=]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    out = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            stripped = text[i:].lstrip()
            if not stripped:
                break
            raise GrammarError(f"unexpected character {stripped[0]!r} at position {i}")
        if m.group("num") is not None:
            out.append(_Token("num", m.group("num"), m.start("num")))
        elif m.group("name") is not None:
            out.append(_Token("name", m.group("name"), m.start("name")))
        else:
            out.append(_Token("sym", m.group("sym"), m.start("sym")))
        i = m.end()
    out.append(_Token("end", "<end>", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self, kind: str, text: Optional[str] = None) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise GrammarError(f"expected {want!r} at position {tok.pos}, got {tok.text!r}")
        self.i += 1
        return tok

    def at_sym(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "sym" and tok.text == text

    # -- values ------------------------------------------------------------

    def number(self) -> float:
        tok = self.take("num")
        return float(tok.text)

    def integer(self, what: str) -> int:
        tok = self.take("num")
        val = float(tok.text)
        if val != int(val):
            raise GrammarError(f"{what} must be an integer, got {tok.text!r} at position {tok.pos}")
        return int(val)

    def number_list(self) -> list[float]:
        self.take("sym", "[")
        vals = []
        if not self.at_sym("]"):
            vals.append(self.number())
            while self.at_sym(","):
                self.take("sym", ",")
                vals.append(self.number())
        self.take("sym", "]")
        return vals

    def index_list_list(self, what: str) -> list[list[int]]:
        self.take("sym", "[")
        parts = []
        if not self.at_sym("]"):
            parts.append(self.index_list(what))
            while self.at_sym(","):
                self.take("sym", ",")
                parts.append(self.index_list(what))
        self.take("sym", "]")
        return parts

    def index_list(self, what: str) -> list[int]:
        self.take("sym", "[")
        vals = []
        if not self.at_sym("]"):
            vals.append(self.integer(what))
            while self.at_sym(","):
                self.take("sym", ",")
                vals.append(self.integer(what))
        self.take("sym", "]")
        return vals

    def matrix(self) -> np.ndarray:
        tok = self.peek()
        self.take("sym", "[")
        data = []
        if not self.at_sym("]"):
            data.append(self.number_list())
            while self.at_sym(","):
                self.take("sym", ",")
                data.append(self.number_list())
        self.take("sym", "]")
        try:
            return np.asarray(data, dtype=float)
        except ValueError:
            raise GrammarError(f"ragged matrix rows near position {tok.pos}") from None

    # -- expressions ---------------------------------------------------------

    def expression(self) -> ParsedBody:
        tok = self.take("name")
        name = tok.text
        self.take("sym", "(")
        if name == "ball":
            n = self.integer("ball dimension parameter")
            self.take("sym", ")")
            return ParsedBody(body=ball(n), spec=ball_spec(n))
        if name == "cube":
            n = self.integer("cube dimension parameter")
            self.take("sym", ")")
            spec = cube_spec(n)
            return ParsedBody(body=ball_product_body(spec, label=f"cube{2 * n}"), spec=spec)
        if name == "ellipsoid":
            axes = [self.number()]
            while self.at_sym(","):
                self.take("sym", ",")
                axes.append(self.number())
            self.take("sym", ")")
            return ParsedBody(body=ellipsoid(axes), spec=None)
        if name == "polydisk":
            radii = [self.number()]
            while self.at_sym(","):
                self.take("sym", ",")
                radii.append(self.number())
            self.take("sym", ")")
            spec = polydisk_spec(radii)
            return ParsedBody(body=ball_product_body(spec), spec=spec)
        if name == "ballproduct":
            kwargs = {}
            while not self.at_sym(")"):
                key = self.take("name")
                if key.text not in ("rho", "I", "J"):
                    raise GrammarError(
                        f"unknown ballproduct argument {key.text!r} at position {key.pos}"
                    )
                self.take("sym", "=")
                if key.text == "rho":
                    kwargs["rho"] = self.number_list()
                else:
                    kwargs[key.text] = self.index_list_list(f"{key.text} index")
                if self.at_sym(","):
                    self.take("sym", ",")
            self.take("sym", ")")
            missing = [k for k in ("rho", "I", "J") if k not in kwargs]
            if missing:
                raise GrammarError(f"ballproduct is missing argument(s) {missing} at position {tok.pos}")
            indices = [i for part in kwargs["I"] + kwargs["J"] for i in part]
            if not indices:
                raise GrammarError(f"ballproduct has empty I and J at position {tok.pos}")
            n = max(indices)
            spec = BallProductSpec(n=n, radii=kwargs["rho"], I=kwargs["I"], J=kwargs["J"])
            return ParsedBody(body=ball_product_body(spec), spec=spec)
        if name == "sum":
            parts = [self.expression()]
            while self.at_sym(","):
                self.take("sym", ",")
                parts.append(self.expression())
            self.take("sym", ")")
            body = parts[0].body
            for part in parts[1:]:
                body = minkowski_sum(body, part.body)
            return ParsedBody(body=body, spec=None)
        if name == "linimg":
            A = self.matrix()
            self.take("sym", ",")
            inner = self.expression()
            self.take("sym", ")")
            return ParsedBody(body=linear_image(inner.body, A), spec=None)
        raise GrammarError(f"unknown body constructor {name!r} at position {tok.pos}")


def parse_body(text: str) -> ParsedBody:
    """Parse a body description string; raises GrammarError on bad syntax."""
    parser = _Parser(text)
    result = parser.expression()
    tail = parser.peek()
    if tail.kind != "end":
        raise GrammarError(f"trailing input {tail.text!r} at position {tail.pos}")
    return result
