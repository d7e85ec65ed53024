from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from apps import AppSpec, FieldSpec, build_apk, instagram_like
from builders import ANDROID_NS
from corpus import score
from dsaudit.axml import parse_plain_xml
from dsaudit.container import open_package
from dsaudit.datasets import AppContext, load_bundle
from dsaudit.taxonomy import DataCategory, RiskRank
from dsaudit.uianalysis import (
    DecidedBy,
    InputFieldRecord,
    analyze_layouts,
    extract_input_fields,
    label_field,
)

NS = f'xmlns:android="{ANDROID_NS}"'


def _fields(body: str):
    return extract_input_fields(parse_plain_xml(f"<LinearLayout {NS}>{body}</LinearLayout>"), None, "l.xml")


def test_extract_card_screen():
    recs = _fields('<EditText android:id="@+id/card_number" android:hint="Name on card"/>')
    assert recs == [InputFieldRecord("l.xml", "EditText", field_id="card_number", hint="Name on card")]


def test_no_inputs():
    assert _fields('<TextView android:text="Hello"/><Button android:text="OK"/>') == []


def test_label_for_beats_preceding_sibling():
    recs = _fields('<TextView android:text="Card holder"/>'
                   '<EditText android:id="@+id/exp"/>'
                   '<TextView android:labelFor="@id/exp" android:text="Expiration date"/>')
    assert recs[0].label_text == "Expiration date"


def test_preceding_sibling_label_and_widget_scope():
    recs = _fields('<TextView android:text="IBAN"/><EditText/>'
                   '<Spinner android:id="@+id/month"/>'
                   '<AutoCompleteTextView android:id="@+id/city"/>'
                   '<AutoCompleteTextView android:id="@+id/town" android:inputType="text"/>'
                   '<foo.bar.MyEditText android:id="@+id/custom"/>')
    assert [(r.widget, r.field_id, r.label_text) for r in recs] == [
        ("EditText", None, "IBAN"),
        ("AutoCompleteTextView", "town", None),
        ("foo.bar.MyEditText", "custom", None),
    ]


def test_empty_edit_text_dropped():
    assert _fields("<EditText/>") == []


def _rec(**kw) -> InputFieldRecord:
    return InputFieldRecord("l.xml", "EditText", **kw)


@pytest.mark.parametrize("kw, rank, category, ident, stage", [
    (dict(field_id="user_secret", input_type_flags=0x81), 3, "authentication", "Password", DecidedBy.INPUT_TYPE),
    (dict(field_id="txt_name"), 2, "personal_information", "Name", DecidedBy.FIELD_ID),
    (dict(field_id="image_height"), 4, "ui", "Text field", DecidedBy.FIELD_ID),
    (dict(field_id="x", input_type_flags=0x21), 1, "personal_information", "Email address", DecidedBy.INPUT_TYPE),
    (dict(field_id="x", input_type_flags=0x3), 1, "personal_information", "Phone number", DecidedBy.INPUT_TYPE),
    (dict(field_id="pin_field", input_type_flags=0x12), 3, "payment_authentication", "Password", DecidedBy.INPUT_TYPE),
    (dict(field_id="edit3", hint="IBAN"), 1, "financial_information", "Account", DecidedBy.HINT),
    (dict(field_id="edit3", hint="Amount", label_text="Tax ID"), 1, "financial_information", "Unique ID",
     DecidedBy.LABEL_TEXT),
    (dict(hint="hint_card_number"), 1, "financial_information", "Card number", DecidedBy.HINT),
])
def test_label_field(bundle, kw, rank, category, ident, stage):
    lf = label_field(_rec(**kw), bundle)
    assert (int(lf.label.rank), lf.label.category.value, lf.identifier.name, lf.decided_by) == \
        (rank, category, ident, stage)


def test_unlabeled(bundle):
    assert label_field(_rec(field_id="quantity", hint="How many?"), bundle) is None


def test_id_wins_over_hint(bundle):
    lf = label_field(_rec(field_id="iban", hint="Your name"), bundle)
    assert lf.decided_by is DecidedBy.FIELD_ID and lf.identifier.name == "Account"


def test_domain_context(bundle):
    rec = _rec(field_id="height")
    assert label_field(rec, bundle).label.category is DataCategory.HEALTH_AND_FITNESS_DATA
    assert label_field(rec, bundle, AppContext("ecommerce")).label.category is DataCategory.UI


PASSWORD_FLAGS = [0x81, 0x91, 0xE1, 0x12, 0x81 | 0x80000, 0x12 | 0x1000]
_words = st.sampled_from(["iban", "email", "name", "card", "number", "height", "image", "phone", "foo", "cvv",
                          "body", "message", "city", "tan", "x"])
_text = st.lists(_words, max_size=3).map(lambda ws: "_".join(ws) or None)


@settings(max_examples=1000, deadline=None)
@given(st.sampled_from(PASSWORD_FLAGS), _text, _text, _text, st.sampled_from(["unknown", "messaging", "ecommerce"]))
def test_password_precedence_is_sound(flags, fid, hint, label, domain):
    lf = label_field(_rec(field_id=fid, hint=hint, label_text=label, input_type_flags=flags),
                     _BUNDLE, AppContext(domain))
    assert lf.label.rank is RiskRank.ACCESS and lf.identifier.name == "Password"
    assert lf.decided_by is DecidedBy.INPUT_TYPE


@settings(max_examples=1000, deadline=None)
@given(_text, _text, _text)
def test_stage_attribution(fid, hint, label):
    rec = _rec(field_id=fid, hint=hint, label_text=label)
    lf = label_field(rec, _BUNDLE)
    assert lf == label_field(rec, _BUNDLE)  # pure
    if lf is None:
        return
    if lf.decided_by is DecidedBy.HINT:
        assert label_field(_rec(field_id=fid), _BUNDLE) is None
    if lf.decided_by is DecidedBy.LABEL_TEXT:
        assert label_field(_rec(field_id=fid, hint=hint), _BUNDLE) is None


_BUNDLE = load_bundle()


def test_analyze_layouts_composition(tmp_path, bundle):
    spec = AppSpec("com.example.c", layouts={
        "a": [FieldSpec("iban"), FieldSpec("quantity")],
        "b": [FieldSpec("first_name"), FieldSpec(hint="Email", label="Your e-mail")],
    })
    res = analyze_layouts(open_package(build_apk(spec, tmp_path / "c.apk")), bundle)
    assert [f.record.layout_path for f in res.fields] == ["res/layout/a.xml", "res/layout/b.xml", "res/layout/b.xml"]
    assert len(res.unlabeled) == 1 and res.warnings == []
    # the hint arrived as a string resource and was resolved through the table
    assert res.fields[2].record.hint == "Email" and res.fields[2].record.label_text == "Your e-mail"


def test_corrupt_layout_is_a_warning(tmp_path, bundle):
    import zipfile

    apk = build_apk(AppSpec("com.example.d", layouts={"good": [FieldSpec("iban")]}), tmp_path / "d.apk")
    with zipfile.ZipFile(apk, "a") as zf:
        zf.writestr("res/layout/bad.xml", b"\x03\x00\x08\x00\xff\xff\xff\xff junk")
    res = analyze_layouts(open_package(apk), bundle)
    assert len(res.fields) == 1 and len(res.warnings) == 1 and "bad.xml" in res.warnings[0]


def test_instagram_card_fields(tmp_path, bundle):
    res = analyze_layouts(open_package(build_apk(instagram_like(), tmp_path / "i.apk")), bundle)
    got = {f.record.field_id: (int(f.label.rank), f.label.category.value) for f in res.fields}
    assert got == {"card_number": (1, "financial_information"), "cvv": (3, "payment_authentication")}


def test_corpus_precision_recall(bundle):
    s = score(bundle)
    assert s.fields >= 50
    assert s.mismatches == []
    assert s.precision == 1.0 and s.recall == 1.0
