"""Solidity source cleaning and three-layer code tree extraction.

The tree has a single root holding the merged, cleaned document, one node
per contract-like declaration, and one leaf per function-like member.
Extraction is scanner based: strings and comments are recognised first,
then keywords are matched only at the right brace depth.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .errors import MalformedSourceError

CONTRACT_KINDS = ("contract", "interface", "library", "abstract-contract")
LEAF_KINDS = ("function", "event", "modifier", "constructor")
GLOBAL_CONTRACT = "<global>"

_IDENT_CHARS = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_$")
_STRIPPED_STATEMENTS = ("pragma", "import")
# Function-like members declared without the `function` keyword.
_IMPLICIT_FUNCTIONS = ("receive", "fallback")


@dataclass(frozen=True)
class SourceDocument:
    files: tuple[tuple[str, str], ...]
    address: str = ""

    def __post_init__(self):
        if not self.files:
            raise ValueError("a source document needs at least one file")
        object.__setattr__(self, "files", tuple((str(n), str(t)) for n, t in self.files))

    @classmethod
    def from_text(cls, text: str, filename: str = "<source>", address: str = "") -> "SourceDocument":
        return cls(files=((filename, text),), address=address)


@dataclass(frozen=True)
class FunctionLeaf:
    kind: str
    signature: str
    body: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "signature": self.signature, "body": self.body}


@dataclass(frozen=True)
class ContractNode:
    kind: str
    name: str
    leaves: tuple[FunctionLeaf, ...] = ()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "name": self.name, "leaves": [leaf.to_dict() for leaf in self.leaves]}


@dataclass(frozen=True)
class CodeTree:
    root: str
    contracts: tuple[ContractNode, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {"root": self.root, "contracts": [c.to_dict() for c in self.contracts]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "CodeTree":
        try:
            contracts = []
            for c in data["contracts"]:
                if c["kind"] not in CONTRACT_KINDS:
                    raise ValueError(f"unknown contract kind {c['kind']!r}")
                leaves = []
                for leaf in c["leaves"]:
                    if leaf["kind"] not in LEAF_KINDS:
                        raise ValueError(f"unknown leaf kind {leaf['kind']!r}")
                    leaves.append(FunctionLeaf(leaf["kind"], leaf["signature"], leaf["body"]))
                contracts.append(ContractNode(c["kind"], c["name"], tuple(leaves)))
            return cls(root=data["root"], contracts=tuple(contracts))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"invalid code tree document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "CodeTree":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# cleaning


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def _string_end(text: str, start: int) -> int:
    """Index just past the string literal opening at ``start``.

    Solidity strings cannot hold raw newlines, so an unterminated literal
    ends at the line break.
    """
    quote = text[start]
    i = start + 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\\":
            i += 2
            continue
        if ch == quote:
            return i + 1
        if ch == "\n":
            return i
        i += 1
    return n


def _statement_end(text: str, start: int, filename: str) -> int:
    """Index just past the ``;`` ending the statement that begins at ``start``."""
    i = start
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in "\"'":
            i = _string_end(text, i)
            continue
        if text.startswith("//", i):
            nl = text.find("\n", i)
            i = n if nl < 0 else nl
            continue
        if text.startswith("/*", i):
            close = text.find("*/", i + 2)
            if close < 0:
                raise MalformedSourceError("unterminated block comment", filename, _byte_offset(text, i))
            i = close + 2
            continue
        if ch == ";":
            return i + 1
        i += 1
    raise MalformedSourceError(
        f"unterminated {text[start:start + 6].strip()} statement", filename, _byte_offset(text, start)
    )


def strip_file(text: str, filename: str = "<source>") -> str:
    """Drop comments and pragma/import statements from one file."""
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in "\"'":
            j = _string_end(text, i)
            out.append(text[i:j])
            i = j
        elif text.startswith("//", i):
            nl = text.find("\n", i)
            i = n if nl < 0 else nl
        elif text.startswith("/*", i):
            close = text.find("*/", i + 2)
            if close < 0:
                raise MalformedSourceError("unterminated block comment", filename, _byte_offset(text, i))
            newlines = text.count("\n", i, close)
            # keep line structure; a space stops neighbouring tokens from fusing
            out.append("\n" * newlines if newlines else " ")
            i = close + 2
        elif ch in _IDENT_CHARS:
            j = i
            while j < n and text[j] in _IDENT_CHARS:
                j += 1
            word = text[i:j]
            starts_word = i == 0 or text[i - 1] not in _IDENT_CHARS
            if starts_word and word in _STRIPPED_STATEMENTS:
                i = _statement_end(text, i, filename)
                if out and not out[-1][-1:].isspace() and i < n and not text[i].isspace():
                    out.append(" ")
            else:
                out.append(word)
                i = j
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _collapse_blank_lines(text: str) -> str:
    lines = text.split("\n")
    out: list[str] = []
    run: list[str] = []
    for line in lines:
        if line.strip() == "":
            run.append(line)
            continue
        if run:
            out.extend([""] if len(run) > 2 else run)
            run = []
        out.append(line)
    if run:
        out.extend([""] if len(run) > 2 else run)
    return "\n".join(out)


def clean_source(doc: SourceDocument) -> str:
    """Merge the document's files in order and strip non-intent noise.

    Raises :class:`MalformedSourceError` for an unterminated block comment,
    naming the file and the byte offset inside it.
    """
    parts = [strip_file(text, name) for name, text in doc.files]
    return _collapse_blank_lines("\n".join(parts)).strip()


# --------------------------------------------------------------------------
# tree construction

_LEX = re.compile(
    r"""
    (?P<str>"(?:\\.|[^"\\\n])*(?:"|(?=\n)|$) | '(?:\\.|[^'\\\n])*(?:'|(?=\n)|$))
  | (?P<com>//[^\n]* | /\*.*?(?:\*/|\Z))
  | (?P<word>[A-Za-z_$][A-Za-z0-9_$]* | [0-9][A-Za-z0-9_.]*)
  | (?P<punct>[{}();])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # "word" or "punct"
    value: str
    start: int
    end: int


def _lex(text: str) -> list[_Tok]:
    toks = []
    for m in _LEX.finditer(text):
        group = m.lastgroup
        if group in ("word", "punct"):
            toks.append(_Tok(group, m.group(), m.start(), m.end()))
    return toks


def _match_braces(text: str, toks: Sequence[_Tok]) -> dict[int, int]:
    stack: list[int] = []
    match: dict[int, int] = {}
    for idx, tok in enumerate(toks):
        if tok.value == "{":
            stack.append(idx)
        elif tok.value == "}":
            if not stack:
                raise MalformedSourceError("unbalanced closing brace", offset=_byte_offset(text, tok.start))
            match[stack.pop()] = idx
    if stack:
        raise MalformedSourceError("unclosed brace", offset=_byte_offset(text, toks[stack[-1]].start))
    return match


def _is_word(toks: Sequence[_Tok], idx: int, value: str | None = None) -> bool:
    return idx < len(toks) and toks[idx].kind == "word" and (value is None or toks[idx].value == value)


def _leaf_kind(toks: Sequence[_Tok], idx: int) -> str | None:
    tok = toks[idx]
    if tok.kind != "word":
        return None
    if tok.value in LEAF_KINDS:
        return tok.value
    if tok.value in _IMPLICIT_FUNCTIONS and idx + 1 < len(toks) and toks[idx + 1].value == "(":
        return "function"
    return None


def _read_leaf(text: str, toks: Sequence[_Tok], match: dict[int, int], idx: int, stop: int):
    """Capture the leaf starting at token ``idx``; returns (leaf, next index)."""
    kind = _leaf_kind(toks, idx)
    start = toks[idx].start
    j = idx + 1
    while j < stop:
        value = toks[j].value
        if value == "{":
            close = match[j]
            signature = " ".join(text[start:toks[j].start].split())
            return FunctionLeaf(kind, signature, text[start:toks[close].end]), close + 1
        if value == ";":
            signature = " ".join(text[start:toks[j].start].split())
            return FunctionLeaf(kind, signature, text[start:toks[j].end]), j + 1
        if value == "}":
            break
        j += 1
    # header ran into the end of the enclosing body: keep what is there
    end = toks[j - 1].end
    return FunctionLeaf(kind, " ".join(text[start:end].split()), text[start:end]), j


def _contract_header(toks: Sequence[_Tok], idx: int) -> tuple[str, int] | None:
    """Return (kind, index of name token) if a contract declaration starts at ``idx``."""
    tok = toks[idx]
    if tok.kind != "word":
        return None
    if tok.value in ("contract", "interface", "library"):
        return tok.value, idx + 1
    if tok.value == "abstract" and _is_word(toks, idx + 1, "contract"):
        return "abstract-contract", idx + 2
    return None


def build_code_tree(cleaned: str) -> CodeTree:
    """Extract contract nodes and function-like leaves from cleaned source."""
    toks = _lex(cleaned)
    match = _match_braces(cleaned, toks)
    contracts: list[ContractNode] = []
    global_leaves: list[FunctionLeaf] | None = None
    global_pos = 0
    i = 0
    n = len(toks)
    while i < n:
        tok = toks[i]
        header = _contract_header(toks, i)
        if header is not None:
            kind, name_idx = header
            name = toks[name_idx].value if _is_word(toks, name_idx) else ""
            j = name_idx
            while j < n and toks[j].value not in ("{", ";"):
                j += 1
            if j >= n or toks[j].value == ";":
                i = j + 1
                continue
            close = match[j]
            leaves = []
            k = j + 1
            while k < close:
                if toks[k].value == "{":
                    k = match[k] + 1
                elif _leaf_kind(toks, k):
                    leaf, k = _read_leaf(cleaned, toks, match, k, close)
                    leaves.append(leaf)
                else:
                    k += 1
            contracts.append(ContractNode(kind, name, tuple(leaves)))
            i = close + 1
        elif tok.value == "{":
            i = match[i] + 1
        elif _leaf_kind(toks, i):
            if global_leaves is None:
                global_leaves = []
                global_pos = len(contracts)
            leaf, i = _read_leaf(cleaned, toks, match, i, n)
            global_leaves.append(leaf)
        else:
            i += 1
    if global_leaves is not None:
        contracts.insert(global_pos, ContractNode("contract", GLOBAL_CONTRACT, tuple(global_leaves)))
    return CodeTree(root=cleaned, contracts=tuple(contracts))


def extract_tree(doc: SourceDocument) -> CodeTree:
    return build_code_tree(clean_source(doc))


def list_functions(tree: CodeTree) -> list[FunctionLeaf]:
    return [leaf for contract in tree.contracts for leaf in contract.leaves]


def normalize_leaf(leaf: FunctionLeaf) -> str:
    """Whitespace-insensitive identity key for a leaf."""
    return " ".join(leaf.body.split())


def iter_keys(trees: Iterable[CodeTree]) -> Iterator[set[str]]:
    for tree in trees:
        yield {normalize_leaf(leaf) for leaf in list_functions(tree)}
