"""Match method references in DEX payloads against the API source list."""

from __future__ import annotations

from dataclasses import dataclass, field

from dsaudit.container import AppPackage
from dsaudit.datasets import DatasetBundle
from dsaudit.dexscan import DexError, MethodRef, method_refs, parse_dex
from dsaudit.taxonomy import IdentifierTag, PrivacyLabel


class NoAnalyzableCode(Exception):
    """Every DEX payload in the package failed to parse."""


@dataclass(frozen=True)
class ApiSourceRecord:
    ref: MethodRef
    label: PrivacyLabel
    identifier: IdentifierTag
    dex_index: int


@dataclass
class ApiResult:
    sources: list[ApiSourceRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def match_api_sources(pkg: AppPackage, bundle: DatasetBundle, *, verify_checksum: bool = True) -> ApiResult:
    """One record per distinct referenced source method, attributed to the first DEX that mentions it.

    A payload that fails to parse yields a warning; if all of them fail the
    package has no analyzable code.
    """
    result = ApiResult()
    seen: set[MethodRef] = set()
    parsed = 0
    for idx, (name, blob) in enumerate(pkg.dex_files):
        try:
            dex = parse_dex(blob, verify_checksum=verify_checksum)
        except DexError as exc:
            result.warnings.append(f"{name}: {exc}")
            continue
        parsed += 1
        result.warnings.extend(f"{name}: {w}" for w in dex.warnings)
        for ref in method_refs(dex):
            if ref in seen:
                continue
            entry = bundle.lookup_api(ref)
            if entry is not None:
                seen.add(ref)
                result.sources.append(ApiSourceRecord(ref, entry.label, entry.identifier, idx))
    if pkg.dex_files and parsed == 0:
        raise NoAnalyzableCode(f"{pkg.path}: no DEX payload could be parsed")
    return result
