"""Identifier keyword, identifier API, permission and category-mapping datasets.

A bundle is a directory of pipe-separated text files (``keywords.psv``,
``apis.psv``, ``permissions.psv``, ``mapping.psv``) plus a ``VERSION`` file.
Each file starts with a header line; ``#`` starts a comment line.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

from dsaudit.dexscan import MalformedSignature, MethodRef, ref_to_signature, signature_to_ref
from dsaudit.taxonomy import (
    ADMISSIBLE_PAIRS,
    DataCategory,
    IdentifierTag,
    PrivacyLabel,
    RiskRank,
    SafetyCategory,
    TaxonomyError,
)

KEYWORDS_FILE = "keywords.psv"
APIS_FILE = "apis.psv"
PERMISSIONS_FILE = "permissions.psv"
MAPPING_FILE = "mapping.psv"
VERSION_FILE = "VERSION"

HEADERS = {
    KEYWORDS_FILE: ("keyword", "rank", "category", "identifier", "priority", "context_overrides"),
    APIS_FILE: ("signature", "rank", "category", "identifier"),
    PERMISSIONS_FILE: ("permission", "safety_category"),
    MAPPING_FILE: ("rank", "category", "identifier_glob", "safety_category_or_none"),
}

DEFAULT_STOPLIST = frozenset({"txt", "edt", "et", "input", "field"})
MAX_KEYWORD_WORDS = 2


def seed_dir() -> Path:
    return Path(str(resources.files("dsaudit") / "data" / "seed"))


class DatasetError(Exception):
    pass


class MissingFile(DatasetError):
    def __init__(self, path: Path):
        super().__init__(f"missing dataset file: {path}")
        self.path = path


class MalformedRow(DatasetError):
    def __init__(self, file: str, line_no: int, reason: str):
        super().__init__(f"{file}:{line_no}: {reason}")
        self.file = file
        self.line_no = line_no
        self.reason = reason


class DuplicateKeyword(MalformedRow):
    def __init__(self, file: str, line_no: int, keyword: str, first_line: int):
        super().__init__(file, line_no, f"duplicate keyword {keyword!r} (first defined on line {first_line})")
        self.keyword = keyword
        self.first_line = first_line


class DuplicateSignature(MalformedRow):
    def __init__(self, file: str, line_no: int, signature: str, first_line: int):
        super().__init__(file, line_no, f"duplicate signature {signature!r} (first defined on line {first_line})")
        self.signature = signature
        self.first_line = first_line


class IncompleteMapping(DatasetError):
    def __init__(self, missing: list[tuple[RiskRank, DataCategory]]):
        listed = ", ".join(f"{int(r)}|{c.value}" for r, c in missing)
        super().__init__(f"{MAPPING_FILE}: no default ('*') row for {listed}")
        self.missing = missing


# --- tokenization --------------------------------------------------------

_CAMEL_1 = re.compile(r"([a-z0-9])([A-Z])")
_CAMEL_2 = re.compile(r"([A-Z]+)([A-Z][a-z])")
_SPLIT = re.compile(r"[^0-9a-zA-Z]+")
_DIGIT_EDGE = re.compile(r"(?<=[a-zA-Z])(?=[0-9])|(?<=[0-9])(?=[a-zA-Z])")


def tokenize(text: str | None, stoplist: Iterable[str] = DEFAULT_STOPLIST) -> list[str]:
    """Split identifiers and free text into lowercase tokens.

    camelCase, snake_case, kebab-case and letter/digit boundaries all split;
    widget prefixes in ``stoplist`` are dropped.
    """
    if not text:
        return []
    s = _CAMEL_2.sub(r"\1 \2", _CAMEL_1.sub(r"\1 \2", text))
    s = _DIGIT_EDGE.sub(" ", s)
    stop = frozenset(stoplist)
    return [t for t in (p.lower() for p in _SPLIT.split(s)) if t and t not in stop]


def normalize_keyword(text: str) -> str:
    return " ".join(t.lower() for t in _SPLIT.split(text) if t)


# --- records -------------------------------------------------------------

@dataclass(frozen=True)
class ContextOverride:
    kind: str  # "domain" or "token"
    value: str
    label: PrivacyLabel
    identifier: IdentifierTag

    def render(self) -> str:
        return (f"{self.kind}:{self.value}=>{int(self.label.rank)}/"
                f"{self.label.category.value}/{self.identifier.name}")


@dataclass(frozen=True)
class AppContext:
    """Domain tag of the app plus tokens co-occurring in the same field."""

    domain: str = "unknown"
    tokens: frozenset[str] = frozenset()

    def with_tokens(self, tokens: Iterable[str]) -> AppContext:
        return AppContext(self.domain, self.tokens | frozenset(tokens))


@dataclass(frozen=True)
class KeywordEntry:
    keyword: str
    label: PrivacyLabel
    identifier: IdentifierTag
    priority: int = 0
    context_overrides: tuple[ContextOverride, ...] = ()

    def sort_key(self) -> tuple:
        return (-self.priority, int(self.label.rank), -len(self.keyword), self.keyword)

    def resolve(self, context: AppContext, field_tokens: Iterable[str] = ()) -> KeywordEntry:
        """Apply the first override whose trigger is present; domain triggers are checked first."""
        if not self.context_overrides:
            return self
        present = context.tokens | frozenset(field_tokens)
        for kind in ("domain", "token"):
            for ov in self.context_overrides:
                if ov.kind != kind:
                    continue
                if (kind == "domain" and ov.value == context.domain) or (kind == "token" and ov.value in present):
                    return replace(self, label=ov.label, identifier=ov.identifier)
        return self


@dataclass(frozen=True)
class ApiEntry:
    signature: str
    label: PrivacyLabel
    identifier: IdentifierTag
    ref: MethodRef = field(compare=False, repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        ref = signature_to_ref(self.signature) if self.ref is None else self.ref
        object.__setattr__(self, "ref", ref)
        object.__setattr__(self, "signature", ref_to_signature(ref))


_PERMISSION_RE = re.compile(r"^(?:[A-Za-z_][A-Za-z0-9_]*\.)+permission\.[A-Za-z_][A-Za-z0-9_.]*$")


@dataclass(frozen=True)
class PermissionRule:
    permission: str
    implied_category: SafetyCategory

    def __post_init__(self) -> None:
        if not _PERMISSION_RE.match(self.permission):
            raise ValueError(f"not a permission name: {self.permission!r}")


@dataclass(frozen=True)
class MappingRow:
    rank: RiskRank
    category: DataCategory
    identifier_glob: str
    safety_category: SafetyCategory | None


@dataclass(frozen=True)
class CategoryMapping:
    rows: tuple[MappingRow, ...]

    def __post_init__(self) -> None:
        index: dict[tuple[RiskRank, DataCategory], list[MappingRow]] = defaultdict(list)
        for row in self.rows:
            index[(row.rank, row.category)].append(row)
        object.__setattr__(self, "_index", {k: tuple(v) for k, v in index.items()})

    def rows_for(self, label: PrivacyLabel) -> tuple[MappingRow, ...]:
        return self._index.get((label.rank, label.category), ())  # type: ignore[attr-defined]

    def missing_pairs(self) -> list[tuple[RiskRank, DataCategory]]:
        return sorted(
            (pair for pair in ADMISSIBLE_PAIRS
             if not any(r.identifier_glob == "*" for r in self._index.get(pair, ()))),  # type: ignore[attr-defined]
            key=lambda p: (int(p[0]), p[1].value),
        )


@dataclass(frozen=True)
class DatasetBundle:
    keywords: tuple[KeywordEntry, ...]
    apis: tuple[ApiEntry, ...]
    permissions: tuple[PermissionRule, ...]
    mapping: CategoryMapping
    version: str
    stoplist: frozenset[str] = DEFAULT_STOPLIST

    def __post_init__(self) -> None:
        by_kw: dict[str, list[KeywordEntry]] = defaultdict(list)
        for e in self.keywords:
            by_kw[e.keyword].append(e)
        object.__setattr__(self, "_by_keyword", dict(by_kw))
        object.__setattr__(self, "_by_ref", {a.ref: a for a in self.apis})
        object.__setattr__(self, "_by_permission", {p.permission: p for p in self.permissions})

    def match_keyword(self, tokens: list[str], context: AppContext = AppContext()) -> list[tuple[KeywordEntry, str]]:
        """Entries whose keyword equals a token or a contiguous bigram, overrides applied.

        Results are ordered by the tie-break order (priority desc, rank asc,
        keyword length desc, keyword); each entry appears once.
        """
        candidates = list(tokens) + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
        hits: dict[str, tuple[KeywordEntry, str]] = {}
        for cand in candidates:
            for entry in self._by_keyword.get(cand, ()):  # type: ignore[attr-defined]
                if entry.keyword not in hits:
                    hits[entry.keyword] = (entry.resolve(context, tokens), cand)
        return sorted(hits.values(), key=lambda h: h[0].sort_key())

    def lookup_api(self, ref: MethodRef) -> ApiEntry | None:
        return self._by_ref.get(ref)  # type: ignore[attr-defined]

    def permission_rule(self, permission: str) -> PermissionRule | None:
        return self._by_permission.get(permission)  # type: ignore[attr-defined]

    def counts(self) -> dict[str, int]:
        return {
            KEYWORDS_FILE: len(self.keywords),
            APIS_FILE: len(self.apis),
            PERMISSIONS_FILE: len(self.permissions),
            MAPPING_FILE: len(self.mapping.rows),
        }


# --- parsing -------------------------------------------------------------

def _rows(path: Path, errors: list[DatasetError]) -> Iterator[tuple[int, list[str]]]:
    name = path.name
    expected = HEADERS[name]
    header_seen = False
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = [c.strip() for c in line.split("|")]
        if not header_seen:
            header_seen = True
            if tuple(c.lower() for c in cols) != expected:
                errors.append(MalformedRow(name, line_no, f"header must be {'|'.join(expected)}"))
                return
            continue
        if len(cols) != len(expected):
            errors.append(MalformedRow(name, line_no, f"expected {len(expected)} columns, got {len(cols)}"))
            continue
        yield line_no, cols
    if not header_seen:
        errors.append(MalformedRow(name, 0, "missing header line"))


def _label(rank: str, category: str) -> PrivacyLabel:
    try:
        r = RiskRank(int(rank))
    except ValueError:
        raise TaxonomyError(f"bad rank {rank!r}") from None
    try:
        c = DataCategory(category)
    except ValueError:
        raise TaxonomyError(f"unknown category {category!r}") from None
    return PrivacyLabel(r, c)


def _safety(name: str) -> SafetyCategory:
    try:
        return SafetyCategory(name)
    except ValueError:
        raise ValueError(f"unknown safety category {name!r}") from None


def parse_overrides(text: str) -> tuple[ContextOverride, ...]:
    """``domain:messaging=>4/message/Message;token:image=>4/ui/Text field``."""
    out = []
    seen = set()
    for part in (p.strip() for p in text.split(";")):
        if not part:
            continue
        trigger, arrow, target = part.partition("=>")
        kind, colon, value = trigger.strip().partition(":")
        if not arrow or not colon or kind not in ("domain", "token") or not value.strip():
            raise ValueError(f"bad context override {part!r}")
        bits = target.split("/", 2)
        if len(bits) != 3:
            raise ValueError(f"bad override target {target!r}")
        value = value.strip().lower()
        if (kind, value) in seen:
            raise ValueError(f"duplicate context {kind}:{value}")
        seen.add((kind, value))
        out.append(ContextOverride(kind, value, _label(bits[0].strip(), bits[1].strip()), IdentifierTag(bits[2])))
    return tuple(out)


def _load_keywords(path: Path, errors: list[DatasetError]) -> list[KeywordEntry]:
    out: list[KeywordEntry] = []
    first: dict[str, int] = {}
    for line_no, (kw, rank, cat, ident, prio, overrides) in _rows(path, errors):
        try:
            keyword = normalize_keyword(kw)
            if not keyword:
                raise ValueError("empty keyword")
            if len(keyword.split()) > MAX_KEYWORD_WORDS:
                raise ValueError(f"keyword {keyword!r} has more than {MAX_KEYWORD_WORDS} words")
            priority = int(prio or 0)
            if priority < 0:
                raise ValueError("priority must be >= 0")
            entry = KeywordEntry(keyword, _label(rank, cat), IdentifierTag(ident), priority,
                                 parse_overrides(overrides))
        except (ValueError, TaxonomyError) as exc:
            errors.append(MalformedRow(path.name, line_no, str(exc)))
            continue
        if keyword in first:
            errors.append(DuplicateKeyword(path.name, line_no, keyword, first[keyword]))
            continue
        first[keyword] = line_no
        out.append(entry)
    return out


def _load_apis(path: Path, errors: list[DatasetError]) -> list[ApiEntry]:
    out: list[ApiEntry] = []
    first: dict[MethodRef, int] = {}
    for line_no, (sig, rank, cat, ident) in _rows(path, errors):
        try:
            entry = ApiEntry(sig, _label(rank, cat), IdentifierTag(ident))
        except (ValueError, TaxonomyError, MalformedSignature) as exc:
            errors.append(MalformedRow(path.name, line_no, str(exc)))
            continue
        if entry.ref in first:
            errors.append(DuplicateSignature(path.name, line_no, sig, first[entry.ref]))
            continue
        first[entry.ref] = line_no
        out.append(entry)
    return out


def _load_permissions(path: Path, errors: list[DatasetError]) -> list[PermissionRule]:
    out: list[PermissionRule] = []
    first: dict[str, int] = {}
    for line_no, (perm, cat) in _rows(path, errors):
        try:
            rule = PermissionRule(perm, _safety(cat))
        except ValueError as exc:
            errors.append(MalformedRow(path.name, line_no, str(exc)))
            continue
        if perm in first:
            errors.append(MalformedRow(path.name, line_no, f"duplicate permission {perm!r} (line {first[perm]})"))
            continue
        first[perm] = line_no
        out.append(rule)
    return out


def _load_mapping(path: Path, errors: list[DatasetError]) -> CategoryMapping:
    rows: list[MappingRow] = []
    first: dict[tuple, int] = {}
    for line_no, (rank, cat, glob, target) in _rows(path, errors):
        try:
            label = _label(rank, cat)
            if not glob:
                raise ValueError("empty identifier glob")
            safety = None if target.lower() == "none" else _safety(target)
        except (ValueError, TaxonomyError) as exc:
            errors.append(MalformedRow(path.name, line_no, str(exc)))
            continue
        key = (label.rank, label.category, glob.lower())
        if key in first:
            errors.append(MalformedRow(path.name, line_no, f"duplicate mapping row (line {first[key]})"))
            continue
        first[key] = line_no
        rows.append(MappingRow(label.rank, label.category, glob, safety))
    return CategoryMapping(tuple(rows))


def check_bundle(root: str | Path) -> tuple[DatasetBundle | None, list[DatasetError]]:
    """Load and validate every file, collecting all problems instead of stopping at the first."""
    root = Path(root)
    errors: list[DatasetError] = []
    for name in (*HEADERS, VERSION_FILE):
        if not (root / name).is_file():
            errors.append(MissingFile(root / name))
    if errors:
        return None, errors
    keywords = _load_keywords(root / KEYWORDS_FILE, errors)
    apis = _load_apis(root / APIS_FILE, errors)
    permissions = _load_permissions(root / PERMISSIONS_FILE, errors)
    mapping = _load_mapping(root / MAPPING_FILE, errors)
    missing = mapping.missing_pairs()
    if missing:
        errors.append(IncompleteMapping(missing))
    version = (root / VERSION_FILE).read_text(encoding="utf-8").strip()
    if errors:
        return None, errors
    bundle = DatasetBundle(
        keywords=tuple(sorted(keywords, key=lambda e: e.keyword)),
        apis=tuple(sorted(apis, key=lambda a: a.ref)),
        permissions=tuple(sorted(permissions, key=lambda p: p.permission)),
        mapping=mapping,
        version=version,
    )
    return bundle, []


def load_bundle(root: str | Path | None = None) -> DatasetBundle:
    bundle, errors = check_bundle(seed_dir() if root is None else root)
    if errors:
        raise errors[0]
    assert bundle is not None
    return bundle


def write_bundle(bundle: DatasetBundle, root: str | Path) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)

    def dump(name: str, rows: Iterable[Iterable[object]]) -> None:
        lines = ["|".join(HEADERS[name])]
        lines += ["|".join(str(c) for c in row) for row in rows]
        (root / name).write_text("\n".join(lines) + "\n", encoding="utf-8")

    dump(KEYWORDS_FILE, (
        (e.keyword, int(e.label.rank), e.label.category.value, e.identifier.name, e.priority,
         ";".join(o.render() for o in e.context_overrides))
        for e in bundle.keywords))
    dump(APIS_FILE, (
        (ref_to_signature(a.ref), int(a.label.rank), a.label.category.value, a.identifier.name)
        for a in bundle.apis))
    dump(PERMISSIONS_FILE, ((p.permission, p.implied_category.value) for p in bundle.permissions))
    dump(MAPPING_FILE, (
        (int(r.rank), r.category.value, r.identifier_glob,
         "none" if r.safety_category is None else r.safety_category.value)
        for r in bundle.mapping.rows))
    (root / VERSION_FILE).write_text(bundle.version + "\n", encoding="utf-8")
