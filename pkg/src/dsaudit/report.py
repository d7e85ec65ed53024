"""Render analysis and comparison results as tables, JSON, CSV and matrix figures."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

from dsaudit.pipeline import AnalysisResult
from dsaudit.safetycompare import ComparisonReport, Status
from dsaudit.taxonomy import AUDITED_CATEGORIES, SafetyCategory, format_label

LEGEND = "★ collected, not reported   ○ reported, not collected   ⊛ collected and reported"

# audited columns first, then the categories static evidence rarely reaches
CATEGORY_ORDER: tuple[SafetyCategory, ...] = AUDITED_CATEGORIES + tuple(
    c for c in SafetyCategory if c not in AUDITED_CATEGORIES
)


def _safety(item_category: SafetyCategory | None) -> str | None:
    return None if item_category is None else item_category.value


def _item_category(result: AnalysisResult) -> dict[int, SafetyCategory | None]:
    out: dict[int, SafetyCategory | None] = {}
    for items in result.evidence.per_category.values():
        for it in items:
            out[id(it.source)] = it.category
    for it in result.evidence.unmappable:
        out[id(it.source)] = None
    return out


# --- dict form -------------------------------------------------------------------

def analysis_to_dict(result: AnalysisResult) -> dict[str, Any]:
    cats = _item_category(result)
    ui = []
    for f in result.ui.fields:
        r = f.record
        ui.append({
            "layout": r.layout_path,
            "widget": r.widget,
            "field_id": r.field_id,
            "input_type": None if r.input_type_flags is None else f"{r.input_type_flags:#x}",
            "hint": r.hint,
            "label_text": r.label_text,
            "rank": int(f.label.rank),
            "category": f.label.category.value,
            "identifier": f.identifier.name,
            "label": format_label(f.label, f.identifier),
            "decided_by": f.decided_by.value,
            "matched_token": f.matched_token,
            "safety_category": _safety(cats.get(id(f))),
        })
    api = [{
        "signature": str(a.ref),
        "dex_index": a.dex_index,
        "rank": int(a.label.rank),
        "category": a.label.category.value,
        "identifier": a.identifier.name,
        "label": format_label(a.label, a.identifier),
        "safety_category": _safety(cats.get(id(a))),
    } for a in sorted(result.api.sources, key=lambda a: str(a.ref))]
    perms = [{"permission": p.permission, "implied_category": _safety(p.implied_category)}
             for p in result.permissions]
    categories = []
    for cat in CATEGORY_ORDER:
        items = result.evidence.per_category.get(cat)
        if items:
            categories.append({
                "category": cat.value,
                "evidence_count": len(items),
                "kinds": sorted({i.kind.value for i in items}),
                "ranks": sorted({i.rank for i in items if i.rank is not None}),
            })
    return {
        "app": result.name,
        "dataset_version": result.dataset_version,
        "domain": result.domain,
        "ui_sources": ui,
        "unlabeled_fields": len(result.ui.unlabeled),
        "api_sources": api,
        "permissions": perms,
        "categories": categories,
        "unmappable": sorted(i.describe() for i in result.evidence.unmappable if i.label is not None),
        "warnings": list(result.warnings),
    }


def comparison_to_dict(report: ComparisonReport) -> dict[str, Any]:
    counts = report.counts()
    return {
        "statuses": [{
            "category": s.category.value,
            "status": s.status.value,
            "symbol": s.status.symbol,
            "evidence_kinds": sorted(k.value for k in s.evidence_kinds),
            "ranks": list(s.ranks),
        } for s in sorted(report.statuses, key=lambda s: CATEGORY_ORDER.index(s.category))],
        "counts": {
            "collected_not_reported": counts[Status.COLLECTED_NOT_REPORTED],
            "reported_not_collected": counts[Status.REPORTED_NOT_COLLECTED],
            "collected_and_reported": counts[Status.COLLECTED_AND_REPORTED],
        },
        "verdicts": sorted(v.value for v in report.verdicts),
        "inconsistencies": list(report.inconsistencies),
        "notes": list(report.unmappable_note),
        "discrepancy": report.has_discrepancy,
    }


def to_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# --- tables ------------------------------------------------------------------------

def _grid(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    rows = [["" if c is None else str(c) for c in r] for r in rows]
    widths = [max([len(h)] + [len(r[i]) for r in rows]) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines)


def render_analysis_table(result: AnalysisResult) -> str:
    d = analysis_to_dict(result)
    out = [f"{d['app']}  (datasets {d['dataset_version']}, domain {d['domain']})", ""]
    out.append(f"UI sources ({len(d['ui_sources'])}, {d['unlabeled_fields']} unlabeled field(s))")
    if d["ui_sources"]:
        out.append(_grid(
            ["layout", "field", "label", "decided by", "category"],
            [(u["layout"], u["field_id"] or u["hint"] or u["label_text"] or u["widget"], u["label"],
              u["decided_by"], u["safety_category"] or "-") for u in d["ui_sources"]],
        ))
    out += ["", f"API sources ({len(d['api_sources'])})"]
    if d["api_sources"]:
        out.append(_grid(["method", "label", "category"],
                         [(a["signature"], a["label"], a["safety_category"] or "-") for a in d["api_sources"]]))
    out += ["", f"Permissions ({len(d['permissions'])})"]
    if d["permissions"]:
        out.append(_grid(["permission", "implies"],
                         [(p["permission"], p["implied_category"] or "-") for p in d["permissions"]]))
    out += ["", "Collected categories"]
    if d["categories"]:
        out.append(_grid(["category", "evidence", "kinds", "ranks"],
                         [(SafetyCategory(c["category"]).display, c["evidence_count"], ",".join(c["kinds"]),
                           ",".join(map(str, c["ranks"])) or "-") for c in d["categories"]]))
    else:
        out.append("(none)")
    for note in d["unmappable"]:
        out.append(f"note: {note} has no data-safety category")
    for w in d["warnings"]:
        out.append(f"warning: {w}")
    return "\n".join(out) + "\n"


def render_comparison_table(app: str, report: ComparisonReport) -> str:
    d = comparison_to_dict(report)
    out = [app, ""]
    out.append(_grid(
        ["category", "status", "evidence", "ranks"],
        [(SafetyCategory(s["category"]).display, s["symbol"] or ".", ",".join(s["evidence_kinds"]) or "-",
          ",".join(map(str, s["ranks"])) or "-") for s in d["statuses"]],
    ))
    out += ["", LEGEND]
    c = d["counts"]
    out.append(f"★ {c['collected_not_reported']}   ○ {c['reported_not_collected']}   ⊛ {c['collected_and_reported']}")
    out.append("verdicts: " + (", ".join(d["verdicts"]) or "none"))
    if d["inconsistencies"]:
        out.append("inconsistencies: " + ", ".join(d["inconsistencies"]))
    for note in d["notes"]:
        out.append(f"note: {note}")
    return "\n".join(out) + "\n"


# --- csv -----------------------------------------------------------------------------

def _csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if c is None else c for c in r])
    return buf.getvalue()


def render_analysis_csv(result: AnalysisResult) -> str:
    d = analysis_to_dict(result)
    rows = [("ui", u["layout"] + ":" + (u["field_id"] or u["hint"] or u["label_text"] or u["widget"]),
             u["rank"], u["category"], u["identifier"], u["safety_category"]) for u in d["ui_sources"]]
    rows += [("api", a["signature"], a["rank"], a["category"], a["identifier"], a["safety_category"])
             for a in d["api_sources"]]
    rows += [("permission", p["permission"], None, None, None, p["implied_category"]) for p in d["permissions"]]
    return _csv(["kind", "source", "rank", "category", "identifier", "safety_category"], rows)


def render_comparison_csv(app: str, report: ComparisonReport) -> str:
    d = comparison_to_dict(report)
    return _csv(["app", "category", "status", "symbol", "evidence_kinds", "ranks"],
                [(app, s["category"], s["status"], s["symbol"], ";".join(s["evidence_kinds"]),
                  ";".join(map(str, s["ranks"]))) for s in d["statuses"]])


BATCH_HEADER = ("app", "result", "collected_not_reported", "reported_not_collected",
                "collected_and_reported", "categories", "verdicts", "detail")


def batch_row_values(row: dict[str, Any]) -> list[Any]:
    return [row.get(k) for k in BATCH_HEADER]


def render_batch_table(rows: Sequence[dict[str, Any]]) -> str:
    header = ["app", "result", "★", "○", "⊛", "categories", "verdicts", "detail"]
    vals = [["-" if v is None else v for v in batch_row_values(r)] for r in rows]
    return _grid(header, vals) + "\n"


def render_batch_csv(rows: Sequence[dict[str, Any]]) -> str:
    return _csv(BATCH_HEADER, [batch_row_values(r) for r in rows])


# --- figure --------------------------------------------------------------------------

_COLORS = {
    Status.COLLECTED_NOT_REPORTED: "#e07b39",
    Status.REPORTED_NOT_COLLECTED: "#7aa6c2",
    Status.COLLECTED_AND_REPORTED: "#6ab187",
    Status.ABSENT: "#ffffff",
}


def render_matrix_figure(rows: Sequence[tuple[str, dict[SafetyCategory, Status]]], path: str | Path) -> Path:
    """App x category matrix with the status symbols, written to ``path`` (format from suffix)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.patches import Patch

    extra = [c for c in CATEGORY_ORDER if c not in AUDITED_CATEGORIES
             and any(st.get(c, Status.ABSENT) is not Status.ABSENT for _, st in rows)]
    cols = list(AUDITED_CATEGORIES) + extra
    n_rows = max(len(rows), 1)
    fig, ax = plt.subplots(figsize=(1.0 + 0.9 * len(cols), 1.6 + 0.45 * n_rows))
    for y, (_, statuses) in enumerate(rows):
        for x, cat in enumerate(cols):
            st = statuses.get(cat, Status.ABSENT)
            ax.add_patch(plt.Rectangle((x, y), 1, 1, facecolor=_COLORS[st], edgecolor="#999999", linewidth=0.5))
            if st.symbol:
                ax.text(x + 0.5, y + 0.5, st.symbol, ha="center", va="center", fontsize=11)
    ax.set_xlim(0, len(cols))
    ax.set_ylim(n_rows, 0)
    ax.set_xticks([x + 0.5 for x in range(len(cols))])
    ax.set_xticklabels([c.display for c in cols], rotation=45, ha="right", fontsize=8)
    ax.set_yticks([y + 0.5 for y in range(len(rows))])
    ax.set_yticklabels([name for name, _ in rows], fontsize=8)
    ax.tick_params(length=0)
    for spine in ax.spines.values():
        spine.set_visible(False)
    ax.legend(handles=[Patch(facecolor=_COLORS[s], edgecolor="#999999", label=f"{s.symbol} {s.value.replace('_', ' ')}")
                       for s in (Status.COLLECTED_NOT_REPORTED, Status.REPORTED_NOT_COLLECTED,
                                 Status.COLLECTED_AND_REPORTED)],
              loc="lower center", bbox_to_anchor=(0.5, 1.02), ncol=3, fontsize=7, frameon=False)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out
