"""Data-safety declarations, evidence aggregation, and declaration-vs-evidence comparison."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Union

from dsaudit.apianalysis import ApiSourceRecord
from dsaudit.datasets import CategoryMapping
from dsaudit.manifestanalysis import PermissionEvidence
from dsaudit.taxonomy import (
    IdentifierTag,
    PrivacyLabel,
    Purpose,
    SafetyCategory,
    format_label,
    safety_category_for,
)
from dsaudit.uianalysis import LabeledField

SCHEMA_VERSION = 1
OVER_REPORTING_PURPOSES = 6


class MalformedDeclaration(ValueError):
    pass


# --- declaration --------------------------------------------------------------

@dataclass(frozen=True)
class DeclaredType:
    data_type: str
    purposes: frozenset[Purpose]

    def __post_init__(self) -> None:
        if not self.data_type.strip():
            raise MalformedDeclaration("empty data type name")
        if not self.purposes:
            raise MalformedDeclaration(f"data type {self.data_type!r} has no purposes")


@dataclass(frozen=True)
class SecurityPractices:
    encrypted_in_transit: bool = False
    deletion_requestable: bool = False


@dataclass(frozen=True)
class SafetyDeclaration:
    collected: Mapping[SafetyCategory, tuple[DeclaredType, ...]] = field(default_factory=dict)
    shared: Mapping[SafetyCategory, tuple[DeclaredType, ...]] = field(default_factory=dict)
    security: SecurityPractices = SecurityPractices()
    claims_no_collection: bool = False
    claims_no_sharing: bool = False

    def __post_init__(self) -> None:
        # empty category lists carry no declaration
        object.__setattr__(self, "collected", {c: tuple(v) for c, v in self.collected.items() if v})
        object.__setattr__(self, "shared", {c: tuple(v) for c, v in self.shared.items() if v})
        if self.claims_no_collection and self.collected:
            raise MalformedDeclaration("claims_no_collection is set but collected data is listed")
        if self.claims_no_sharing and self.shared:
            raise MalformedDeclaration("claims_no_sharing is set but shared data is listed")

    @property
    def collected_types(self) -> list[DeclaredType]:
        return [t for types in self.collected.values() for t in types]

    def declares(self, category: SafetyCategory) -> bool:
        return category in self.collected


def _purpose(raw: Any, where: str) -> Purpose:
    if not isinstance(raw, str):
        raise MalformedDeclaration(f"{where}: purpose must be a string, got {raw!r}")
    try:
        return Purpose(raw.strip().lower())
    except ValueError:
        raise MalformedDeclaration(f"{where}: unknown purpose {raw!r}") from None


def _section(raw: Any, key: str) -> dict[SafetyCategory, tuple[DeclaredType, ...]]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise MalformedDeclaration(f"{key}: expected an object of category -> list")
    out: dict[SafetyCategory, tuple[DeclaredType, ...]] = {}
    for cat_name, items in raw.items():
        try:
            cat = SafetyCategory(cat_name)
        except ValueError:
            raise MalformedDeclaration(f"{key}: unknown category {cat_name!r}") from None
        if not isinstance(items, list):
            raise MalformedDeclaration(f"{key}.{cat_name}: expected a list of data types")
        types = []
        for i, item in enumerate(items):
            where = f"{key}.{cat_name}[{i}]"
            if not isinstance(item, dict) or not isinstance(item.get("type"), str):
                raise MalformedDeclaration(f"{where}: expected {{\"type\": ..., \"purposes\": [...]}}")
            purposes = item.get("purposes")
            if not isinstance(purposes, list):
                raise MalformedDeclaration(f"{where}: purposes must be a list")
            types.append(DeclaredType(item["type"], frozenset(_purpose(p, where) for p in purposes)))
        out[cat] = tuple(types)
    return out


def _flag(obj: dict, key: str, where: str = "") -> bool:
    v = obj.get(key, False)
    if not isinstance(v, bool):
        raise MalformedDeclaration(f"{where}{key}: expected true/false, got {v!r}")
    return v


def declaration_from_dict(obj: Any) -> SafetyDeclaration:
    if not isinstance(obj, dict):
        raise MalformedDeclaration("declaration must be a JSON object")
    if "schema_version" not in obj:
        raise MalformedDeclaration("missing schema_version")
    if obj["schema_version"] != SCHEMA_VERSION:
        raise MalformedDeclaration(f"unsupported schema_version {obj['schema_version']!r}")
    sec = obj.get("security", {})
    if not isinstance(sec, dict):
        raise MalformedDeclaration("security: expected an object")
    return SafetyDeclaration(
        collected=_section(obj.get("collected"), "collected"),
        shared=_section(obj.get("shared"), "shared"),
        security=SecurityPractices(
            _flag(sec, "encrypted_in_transit", "security."),
            _flag(sec, "deletion_requestable", "security."),
        ),
        claims_no_collection=_flag(obj, "claims_no_collection"),
        claims_no_sharing=_flag(obj, "claims_no_sharing"),
    )


def declaration_to_dict(decl: SafetyDeclaration) -> dict:
    def section(sec: Mapping[SafetyCategory, tuple[DeclaredType, ...]]) -> dict:
        return {
            c.value: [{"type": t.data_type, "purposes": sorted(p.value for p in t.purposes)} for t in sec[c]]
            for c in sorted(sec, key=lambda c: c.value)
        }

    return {
        "schema_version": SCHEMA_VERSION,
        "collected": section(decl.collected),
        "shared": section(decl.shared),
        "security": {
            "encrypted_in_transit": decl.security.encrypted_in_transit,
            "deletion_requestable": decl.security.deletion_requestable,
        },
        "claims_no_collection": decl.claims_no_collection,
        "claims_no_sharing": decl.claims_no_sharing,
    }


def load_declaration(path: str | Path) -> SafetyDeclaration:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedDeclaration(f"{path}: {exc.strerror or exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDeclaration(f"{path}: line {exc.lineno}: {exc.msg}") from None
    try:
        return declaration_from_dict(obj)
    except MalformedDeclaration as exc:
        raise MalformedDeclaration(f"{path}: {exc}") from None


# --- evidence -----------------------------------------------------------------

class EvidenceKind(Enum):
    UI = "ui"
    API = "api"
    PERMISSION = "permission"


Source = Union[LabeledField, ApiSourceRecord, PermissionEvidence]


@dataclass(frozen=True)
class EvidenceItem:
    kind: EvidenceKind
    source: Source
    category: SafetyCategory | None

    @property
    def label(self) -> PrivacyLabel | None:
        return None if self.kind is EvidenceKind.PERMISSION else self.source.label  # type: ignore[union-attr]

    @property
    def identifier(self) -> IdentifierTag | None:
        return None if self.kind is EvidenceKind.PERMISSION else self.source.identifier  # type: ignore[union-attr]

    @property
    def rank(self) -> int | None:
        label = self.label
        return None if label is None else int(label.rank)

    def describe(self) -> str:
        src = self.source
        if isinstance(src, PermissionEvidence):
            return f"permission {src.permission}"
        text = format_label(src.label, src.identifier)
        if isinstance(src, ApiSourceRecord):
            return f"api {src.ref}: {text}"
        where = src.record.field_id or src.record.hint or src.record.label_text or src.record.widget
        return f"ui {src.record.layout_path}:{where}: {text}"


@dataclass
class CollectionEvidence:
    per_category: dict[SafetyCategory, list[EvidenceItem]] = field(default_factory=dict)
    unmappable: list[EvidenceItem] = field(default_factory=list)

    def categories(self) -> set[SafetyCategory]:
        return {c for c, items in self.per_category.items() if items}

    def add(self, item: EvidenceItem) -> None:
        if item.category is None:
            self.unmappable.append(item)
        else:
            self.per_category.setdefault(item.category, []).append(item)

    def __len__(self) -> int:
        return sum(len(v) for v in self.per_category.values()) + len(self.unmappable)


def aggregate_evidence(
    fields: Iterable[LabeledField],
    apis: Iterable[ApiSourceRecord],
    perms: Iterable[PermissionEvidence],
    mapping: CategoryMapping,
) -> CollectionEvidence:
    ev = CollectionEvidence()
    for f in fields:
        ev.add(EvidenceItem(EvidenceKind.UI, f, safety_category_for(f.label, f.identifier, mapping)))
    for a in apis:
        ev.add(EvidenceItem(EvidenceKind.API, a, safety_category_for(a.label, a.identifier, mapping)))
    for p in perms:
        ev.add(EvidenceItem(EvidenceKind.PERMISSION, p, p.implied_category))
    return ev


# --- comparison -----------------------------------------------------------------

class Status(Enum):
    COLLECTED_AND_REPORTED = "collected_and_reported"
    COLLECTED_NOT_REPORTED = "collected_not_reported"
    REPORTED_NOT_COLLECTED = "reported_not_collected"
    ABSENT = "absent"

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]


_SYMBOLS = {
    Status.COLLECTED_AND_REPORTED: "⊛",
    Status.COLLECTED_NOT_REPORTED: "★",
    Status.REPORTED_NOT_COLLECTED: "○",
    Status.ABSENT: "",
}


def status_for(has_evidence: bool, declared: bool) -> Status:
    if has_evidence:
        return Status.COLLECTED_AND_REPORTED if declared else Status.COLLECTED_NOT_REPORTED
    return Status.REPORTED_NOT_COLLECTED if declared else Status.ABSENT


class Verdict(Enum):
    OVER_REPORTING = "OverReporting"
    UNDER_REPORTING = "UnderReporting"
    INCONSISTENT_REPORTING = "InconsistentReporting"


SHARED_WITHOUT_COLLECTED = "SharedWithoutCollected"
SECURITY_CLAIMS_WITHOUT_DATA = "SecurityClaimsWithoutData"
NO_DELETION_WITH_DATA = "NoDeletionWithData"
INFORMATIONAL_FLAGS = frozenset({NO_DELETION_WITH_DATA})


@dataclass(frozen=True)
class CategoryStatus:
    category: SafetyCategory
    status: Status
    evidence_kinds: frozenset[EvidenceKind] = frozenset()
    ranks: tuple[int, ...] = ()
    evidence_count: int = 0


@dataclass(frozen=True)
class ComparisonReport:
    statuses: tuple[CategoryStatus, ...]
    verdicts: frozenset[Verdict]
    inconsistencies: tuple[str, ...] = ()
    unmappable_note: tuple[str, ...] = ()

    def status_of(self, category: SafetyCategory) -> Status:
        for s in self.statuses:
            if s.category is category:
                return s.status
        raise KeyError(category)

    def counts(self) -> dict[Status, int]:
        out = {s: 0 for s in Status}
        for cs in self.statuses:
            out[cs.status] += 1
        return out

    @property
    def has_discrepancy(self) -> bool:
        return bool(self.verdicts) or any(s.status is Status.COLLECTED_NOT_REPORTED for s in self.statuses)


def consistency_checks(decl: SafetyDeclaration) -> list[str]:
    """Internal contradictions of a declaration, independent of any evidence."""
    flags = []
    if any(decl.claims_no_collection or c not in decl.collected for c in decl.shared):
        flags.append(SHARED_WITHOUT_COLLECTED)
    if decl.claims_no_collection and decl.claims_no_sharing and decl.security.encrypted_in_transit:
        flags.append(SECURITY_CLAIMS_WITHOUT_DATA)
    if decl.collected and not decl.security.deletion_requestable:
        flags.append(NO_DELETION_WITH_DATA)
    return flags


def declaration_verdict(decl: SafetyDeclaration) -> frozenset[Verdict]:
    """Over/under-reporting judged from the declaration alone.

    Over: every category declared, or strictly more than half of the declared
    data types carry six or more purposes. Under: no collection claimed, or a
    single data type declared. Both at once, or a contradiction found by
    consistency_checks, adds InconsistentReporting.
    """
    types = decl.collected_types
    verdicts: set[Verdict] = set()
    heavy = sum(1 for t in types if len(t.purposes) >= OVER_REPORTING_PURPOSES)
    if len(decl.collected) == len(SafetyCategory) or (types and 2 * heavy > len(types)):
        verdicts.add(Verdict.OVER_REPORTING)
    if decl.claims_no_collection or len(types) == 1:
        verdicts.add(Verdict.UNDER_REPORTING)
    if len(verdicts) == 2 or set(consistency_checks(decl)) - INFORMATIONAL_FLAGS:
        verdicts.add(Verdict.INCONSISTENT_REPORTING)
    return frozenset(verdicts)


def compare(decl: SafetyDeclaration, ev: CollectionEvidence) -> ComparisonReport:
    statuses = []
    for cat in SafetyCategory:
        items = ev.per_category.get(cat, [])
        statuses.append(CategoryStatus(
            category=cat,
            status=status_for(bool(items), decl.declares(cat)),
            evidence_kinds=frozenset(i.kind for i in items),
            ranks=tuple(sorted({i.rank for i in items if i.rank is not None})),
            evidence_count=len(items),
        ))
    notes = sorted({f"{i.describe()} has no data-safety category"
                    for i in ev.unmappable if i.kind is not EvidenceKind.PERMISSION})
    n_perms = sum(1 for i in ev.unmappable if i.kind is EvidenceKind.PERMISSION)
    if n_perms:
        notes.append(f"{n_perms} declared permission(s) imply no data-safety category")
    return ComparisonReport(
        statuses=tuple(statuses),
        verdicts=declaration_verdict(decl),
        inconsistencies=tuple(consistency_checks(decl)),
        unmappable_note=tuple(notes),
    )
