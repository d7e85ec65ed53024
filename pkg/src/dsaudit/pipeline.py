"""Run the three analyses on one package and fan their results into collection evidence."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from dsaudit.apianalysis import ApiResult, match_api_sources
from dsaudit.axml import parse_any_xml
from dsaudit.container import AppPackage, open_package
from dsaudit.datasets import AppContext, DatasetBundle
from dsaudit.manifestanalysis import PermissionEvidence, extract_permissions, map_permissions
from dsaudit.safetycompare import CollectionEvidence, aggregate_evidence
from dsaudit.uianalysis import UiResult, analyze_layouts


@dataclass
class AnalysisResult:
    package: AppPackage
    ui: UiResult
    api: ApiResult
    permissions: list[PermissionEvidence]
    evidence: CollectionEvidence
    dataset_version: str
    domain: str = "unknown"
    warnings: list[str] = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.package.name


def analyze_package(pkg: AppPackage, bundle: DatasetBundle, context: AppContext = AppContext()) -> AnalysisResult:
    """Full static pass over an opened package.

    Container, manifest and all-DEX failures propagate; per-layout and
    per-DEX problems end up in ``warnings``.
    """
    perms = map_permissions(extract_permissions(parse_any_xml(pkg.manifest)), bundle.permissions)
    ui = analyze_layouts(pkg, bundle, context)
    api = match_api_sources(pkg, bundle)
    evidence = aggregate_evidence(ui.fields, api.sources, perms, bundle.mapping)
    return AnalysisResult(
        package=pkg,
        ui=ui,
        api=api,
        permissions=perms,
        evidence=evidence,
        dataset_version=bundle.version,
        domain=context.domain,
        warnings=ui.warnings + api.warnings,
    )


def analyze_path(path: str | Path, bundle: DatasetBundle, context: AppContext = AppContext()) -> AnalysisResult:
    return analyze_package(open_package(path), bundle, context)
