"""Input-field extraction from layouts and keyword-based field labeling."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from dsaudit.axml import (
    AxmlError,
    HexFlags,
    Int,
    ResourceTable,
    XmlDocument,
    XmlElement,
    parse_any_xml,
    parse_resource_table,
    resolve_string,
    resource_name,
)
from dsaudit.container import AppPackage
from dsaudit.datasets import AppContext, DatasetBundle, KeywordEntry, tokenize
from dsaudit.taxonomy import DataCategory, IdentifierTag, PrivacyLabel, RiskRank

TYPE_MASK_CLASS = 0x0000000F
TYPE_MASK_VARIATION = 0x00000FF0
TYPE_CLASS_TEXT = 0x1
TYPE_CLASS_NUMBER = 0x2
TYPE_CLASS_PHONE = 0x3

_TEXT_PASSWORD_VARIATIONS = frozenset({0x80, 0x90, 0xE0})
_NUMBER_PASSWORD_VARIATION = 0x10
_TEXT_EMAIL_VARIATIONS = frozenset({0x20, 0xD0})

PASSWORD_LABEL = (PrivacyLabel(RiskRank.ACCESS, DataCategory.AUTHENTICATION), IdentifierTag("Password"))
EMAIL_LABEL = (PrivacyLabel(RiskRank.DIRECT, DataCategory.PERSONAL_INFORMATION), IdentifierTag("Email address"))
PHONE_LABEL = (PrivacyLabel(RiskRank.DIRECT, DataCategory.PERSONAL_INFORMATION), IdentifierTag("Phone number"))


def is_password(flags: int) -> bool:
    cls, var = flags & TYPE_MASK_CLASS, flags & TYPE_MASK_VARIATION
    return ((cls == TYPE_CLASS_TEXT and var in _TEXT_PASSWORD_VARIATIONS)
            or (cls == TYPE_CLASS_NUMBER and var == _NUMBER_PASSWORD_VARIATION))


def is_email(flags: int) -> bool:
    return flags & TYPE_MASK_CLASS == TYPE_CLASS_TEXT and flags & TYPE_MASK_VARIATION in _TEXT_EMAIL_VARIATIONS


def is_phone(flags: int) -> bool:
    return flags & TYPE_MASK_CLASS == TYPE_CLASS_PHONE


class DecidedBy(Enum):
    INPUT_TYPE = "input_type"
    FIELD_ID = "field_id"
    HINT = "hint"
    LABEL_TEXT = "label_text"


@dataclass(frozen=True)
class InputFieldRecord:
    layout_path: str
    widget: str
    field_id: str | None = None
    input_type_flags: int | None = None
    hint: str | None = None
    label_text: str | None = None

    def is_empty(self) -> bool:
        return self.field_id is None and self.hint is None and self.label_text is None and self.input_type_flags is None

    def all_tokens(self, bundle: DatasetBundle) -> list[str]:
        return [t for text in (self.field_id, self.hint, self.label_text)
                for t in tokenize(text, bundle.stoplist)]


@dataclass(frozen=True)
class LabeledField:
    record: InputFieldRecord
    label: PrivacyLabel
    identifier: IdentifierTag
    decided_by: DecidedBy
    matched_token: str | None = None


def _local(name: str) -> str:
    return name.rsplit(".", 1)[-1]


def _is_input_widget(el: XmlElement) -> bool:
    return _local(el.name).endswith("EditText") or el.get("inputType") is not None


def _is_text_view(el: XmlElement) -> bool:
    return _local(el.name).endswith("TextView") and not _is_input_widget(el)


def _flags(el: XmlElement) -> int | None:
    v = el.get("inputType")
    if isinstance(v, (HexFlags, Int)):
        return v.value & 0xFFFFFFFF
    return None


def _same_ref(a: object, b: object, table: ResourceTable | None) -> bool:
    if a is None or b is None:
        return False
    if a == b:
        return True
    na, nb = resource_name(a, table), resource_name(b, table)  # type: ignore[arg-type]
    return na is not None and na == nb


def extract_input_fields(doc: XmlDocument, table: ResourceTable | None, layout_path: str) -> list[InputFieldRecord]:
    """Input fields of one layout in document order, with hint and label text resolved.

    Label text comes from a sibling TextView whose labelFor names the field,
    else from the TextView immediately before the field.
    """
    out: list[InputFieldRecord] = []

    def visit(parent: XmlElement) -> None:
        kids = parent.children
        for i, el in enumerate(kids):
            if _is_input_widget(el):
                id_value = el.get("id")
                id_name = resource_name(id_value, table)
                label = None
                for sib in kids:
                    if sib is not el and _is_text_view(sib) and _same_ref(sib.get("labelFor"), id_value, table):
                        label = resolve_string(sib.get("text"), table)
                        break
                if label is None and i > 0 and _is_text_view(kids[i - 1]):
                    label = resolve_string(kids[i - 1].get("text"), table)
                rec = InputFieldRecord(
                    layout_path=layout_path,
                    widget=el.name,
                    field_id=id_name.rsplit("/", 1)[-1] if id_name else None,
                    input_type_flags=_flags(el),
                    hint=resolve_string(el.get("hint"), table),
                    label_text=label or None,
                )
                if not rec.is_empty():
                    out.append(rec)
            visit(el)

    root = XmlElement("#document", children=[doc.root])
    visit(root)
    return out


def _best(matches: list[tuple[KeywordEntry, str]]) -> tuple[KeywordEntry, str] | None:
    return matches[0] if matches else None


def label_field(record: InputFieldRecord, bundle: DatasetBundle,
                context: AppContext = AppContext()) -> LabeledField | None:
    """Label one field; None when nothing in the record matches.

    Precedence: password/email/phone input types, then the field id, then the
    hint, then the label text.
    """
    ctx = context.with_tokens(record.all_tokens(bundle))
    stages = (
        (DecidedBy.FIELD_ID, record.field_id),
        (DecidedBy.HINT, record.hint),
        (DecidedBy.LABEL_TEXT, record.label_text),
    )
    flags = record.input_type_flags
    if flags is not None and is_password(flags):
        label, ident = PASSWORD_LABEL
        for _, text in stages:
            for entry, tok in bundle.match_keyword(tokenize(text, bundle.stoplist), ctx):
                if entry.label.category is DataCategory.PAYMENT_AUTHENTICATION:
                    return LabeledField(record, entry.label, ident, DecidedBy.INPUT_TYPE, tok)
        return LabeledField(record, label, ident, DecidedBy.INPUT_TYPE)
    if flags is not None and (is_email(flags) or is_phone(flags)):
        label, ident = EMAIL_LABEL if is_email(flags) else PHONE_LABEL
        return LabeledField(record, label, ident, DecidedBy.INPUT_TYPE)
    for stage, text in stages:
        hit = _best(bundle.match_keyword(tokenize(text, bundle.stoplist), ctx))
        if hit is not None:
            entry, tok = hit
            return LabeledField(record, entry.label, entry.identifier, stage, tok)
    return None


@dataclass
class UiResult:
    fields: list[LabeledField] = field(default_factory=list)
    unlabeled: list[InputFieldRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def load_resource_table(pkg: AppPackage, warnings: list[str]) -> ResourceTable | None:
    if pkg.resource_table is None:
        return None
    try:
        return parse_resource_table(pkg.resource_table)
    except AxmlError as exc:
        warnings.append(f"resources.arsc: {exc}")
        return None


def analyze_layouts(pkg: AppPackage, bundle: DatasetBundle, context: AppContext = AppContext(),
                    table: ResourceTable | None = None) -> UiResult:
    result = UiResult()
    if table is None:
        table = load_resource_table(pkg, result.warnings)
    for path, blob in pkg.layouts:
        try:
            doc = parse_any_xml(blob)
        except AxmlError as exc:
            result.warnings.append(f"{path}: {exc}")
            continue
        for rec in extract_input_fields(doc, table, path):
            labeled = label_field(rec, bundle, context)
            if labeled is None:
                result.unlabeled.append(rec)
            else:
                result.fields.append(labeled)
    return result
