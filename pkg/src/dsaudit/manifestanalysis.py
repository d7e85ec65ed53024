"""Declared permissions and the data-safety categories they imply."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from dsaudit.axml import Str, XmlDocument, resolve_string
from dsaudit.datasets import PermissionRule
from dsaudit.taxonomy import SafetyCategory

PERMISSION_TAGS = ("uses-permission", "uses-permission-sdk-23")


class NotAManifest(ValueError):
    pass


@dataclass(frozen=True)
class PermissionEvidence:
    permission: str
    implied_category: SafetyCategory | None = None


def extract_permissions(doc: XmlDocument) -> list[str]:
    """android:name of each permission request directly under <manifest>, first occurrence kept."""
    if doc.root.name != "manifest":
        raise NotAManifest(f"root element is <{doc.root.name}>, expected <manifest>")
    out: list[str] = []
    seen: set[str] = set()
    for el in doc.root.children:
        if el.name not in PERMISSION_TAGS:
            continue
        value = el.get("name")
        name = value.value if isinstance(value, Str) else resolve_string(value)
        if name and name not in seen:
            seen.add(name)
            out.append(name)
    return out


def map_permissions(perms: Iterable[str], rules: Iterable[PermissionRule]) -> list[PermissionEvidence]:
    """Exact-string lookup; unknown permissions are kept with no implied category."""
    index = {r.permission: r.implied_category for r in rules}
    out: list[PermissionEvidence] = []
    seen: set[str] = set()
    for p in perms:
        if p in seen:
            continue
        seen.add(p)
        out.append(PermissionEvidence(p, index.get(p)))
    return out
