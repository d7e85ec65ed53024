from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from apps import INSTAGRAM_UNREPORTED, SIGNAL_CATEGORIES, build_apk, instagram_like, signal_like, write_declaration
from dsaudit.apianalysis import ApiSourceRecord
from dsaudit.datasets import load_bundle
from dsaudit.manifestanalysis import PermissionEvidence
from dsaudit.pipeline import analyze_path
from dsaudit.safetycompare import (
    NO_DELETION_WITH_DATA,
    SECURITY_CLAIMS_WITHOUT_DATA,
    SHARED_WITHOUT_COLLECTED,
    CollectionEvidence,
    DeclaredType,
    EvidenceItem,
    EvidenceKind,
    MalformedDeclaration,
    SafetyDeclaration,
    SecurityPractices,
    Status,
    Verdict,
    aggregate_evidence,
    compare,
    consistency_checks,
    declaration_from_dict,
    declaration_to_dict,
    declaration_verdict,
    load_declaration,
    status_for,
)
from dsaudit.taxonomy import AUDITED_CATEGORIES, Purpose, SafetyCategory
from dsaudit.uianalysis import DecidedBy, InputFieldRecord, LabeledField

_BUNDLE = load_bundle()
C = SafetyCategory
P = Purpose


def _t(name: str, *purposes: Purpose) -> DeclaredType:
    return DeclaredType(name, frozenset(purposes or (P.APP_FUNCTIONALITY,)))


def _decl(collected=None, **kw) -> SafetyDeclaration:
    return SafetyDeclaration(collected={c: tuple(v) for c, v in (collected or {}).items()}, **kw)


# --- declaration loading ---------------------------------------------------------

def test_roundtrip(tmp_path):
    p = write_declaration(tmp_path / "d.json", {"location": [("Approximate location", ["analytics"])]},
                          shared={"location": [("Approximate location", ["advertising"])]}, deletion=False)
    d = load_declaration(p)
    assert d.declares(C.LOCATION) and not d.declares(C.AUDIO)
    assert d.security == SecurityPractices(True, False)
    assert declaration_from_dict(declaration_to_dict(d)) == d


@pytest.mark.parametrize("obj, needle", [
    ([], "JSON object"),
    ({}, "schema_version"),
    ({"schema_version": 2}, "schema_version"),
    ({"schema_version": 1, "collected": {"bogus": []}}, "unknown category"),
    ({"schema_version": 1, "collected": {"location": [{"type": "x", "purposes": []}]}}, "no purposes"),
    ({"schema_version": 1, "collected": {"location": [{"type": "x", "purposes": ["spying"]}]}}, "unknown purpose"),
    ({"schema_version": 1, "collected": {"location": [{"type": " ", "purposes": ["analytics"]}]}}, "empty"),
    ({"schema_version": 1, "collected": {"location": {"type": "x"}}}, "list"),
    ({"schema_version": 1, "claims_no_collection": "yes"}, "true/false"),
    ({"schema_version": 1, "claims_no_collection": True,
      "collected": {"location": [{"type": "x", "purposes": ["analytics"]}]}}, "claims_no_collection"),
    ({"schema_version": 1, "claims_no_sharing": True,
      "shared": {"location": [{"type": "x", "purposes": ["analytics"]}]}}, "claims_no_sharing"),
])
def test_malformed(obj, needle):
    with pytest.raises(MalformedDeclaration, match=needle):
        declaration_from_dict(obj)


def test_malformed_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(MalformedDeclaration, match="line 1"):
        load_declaration(bad)
    with pytest.raises(MalformedDeclaration):
        load_declaration(tmp_path / "missing.json")


def test_empty_lists_carry_no_declaration():
    d = declaration_from_dict({"schema_version": 1, "collected": {"location": []}, "claims_no_collection": True})
    assert d.collected == {}


# --- verdicts ------------------------------------------------------------------------

def test_all_categories_over():
    assert declaration_verdict(_decl({c: [_t(c.display)] for c in C})) == {Verdict.OVER_REPORTING}


def test_single_type_under():
    assert declaration_verdict(_decl({C.PERSONAL_INFO: [_t("Phone number")]})) == {Verdict.UNDER_REPORTING}


def test_plain_declaration_no_verdict():
    cats = [C.LOCATION, C.PERSONAL_INFO, C.AUDIO, C.CONTACTS, C.FINANCIAL_INFO]
    d = _decl({c: [_t(c.display, P.APP_FUNCTIONALITY, P.ANALYTICS, P.ADVERTISING)] for c in cats},
              security=SecurityPractices(True, True))
    assert declaration_verdict(d) == frozenset()
    assert consistency_checks(d) == []


def test_most_types_with_many_purposes():
    six = tuple(list(P)[:6])
    d = _decl({C.LOCATION: [_t("a", *six), _t("b", *six)], C.AUDIO: [_t("c")]})
    assert declaration_verdict(d) == {Verdict.OVER_REPORTING}
    # exactly half is not "most"
    d = _decl({C.LOCATION: [_t("a", *six), _t("b")]})
    assert declaration_verdict(d) == frozenset()


def test_no_collection_claim_under():
    assert declaration_verdict(_decl(claims_no_collection=True)) == {Verdict.UNDER_REPORTING}


def test_western_union_shared_not_collected():
    d = SafetyDeclaration(shared={C.LOCATION: (_t("Approximate location"),)}, claims_no_collection=True)
    assert consistency_checks(d) == [SHARED_WITHOUT_COLLECTED]
    assert Verdict.INCONSISTENT_REPORTING in declaration_verdict(d)


def test_skymap_security_without_data():
    d = SafetyDeclaration(security=SecurityPractices(encrypted_in_transit=True),
                          claims_no_collection=True, claims_no_sharing=True)
    assert consistency_checks(d) == [SECURITY_CLAIMS_WITHOUT_DATA]


def test_no_deletion_is_informational():
    d = _decl({C.LOCATION: [_t("a")], C.AUDIO: [_t("b")]}, security=SecurityPractices(True, False))
    assert consistency_checks(d) == [NO_DELETION_WITH_DATA]
    assert declaration_verdict(d) == frozenset()


def test_over_and_under_is_inconsistent():
    d = _decl({C.LOCATION: [_t("a", *P)]})
    assert declaration_verdict(d) == {Verdict.OVER_REPORTING, Verdict.UNDER_REPORTING,
                                      Verdict.INCONSISTENT_REPORTING}


# --- status and compare ------------------------------------------------------------

def test_truth_table():
    assert [status_for(e, d) for e in (True, False) for d in (True, False)] == [
        Status.COLLECTED_AND_REPORTED, Status.COLLECTED_NOT_REPORTED,
        Status.REPORTED_NOT_COLLECTED, Status.ABSENT]
    assert [s.symbol for s in Status] == ["⊛", "★", "○", ""]


def test_empty_everything():
    rep = compare(SafetyDeclaration(), CollectionEvidence())
    assert {s.status for s in rep.statuses} == {Status.ABSENT}
    assert not rep.has_discrepancy


def test_aggregate_empty(bundle):
    ev = aggregate_evidence([], [], [], bundle.mapping)
    assert ev.per_category == {} and ev.unmappable == []


def test_signal_like(tmp_path, bundle):
    apk = build_apk(signal_like(), tmp_path / "signal.apk")
    res = analyze_path(apk, bundle)
    assert {c.value for c in res.evidence.categories()} == set(SIGNAL_CATEGORIES)
    sim = [i for i in res.evidence.unmappable if i.kind is EvidenceKind.API]
    assert [i.identifier.name for i in sim] == ["SIM card"]
    decl = load_declaration(write_declaration(tmp_path / "d.json",
                                              {"personal_info": [("Phone number", ["account_management"])]}))
    rep = compare(decl, res.evidence)
    counts = rep.counts()
    assert counts[Status.COLLECTED_AND_REPORTED] == 1 and counts[Status.COLLECTED_NOT_REPORTED] == 7
    assert rep.status_of(C.PERSONAL_INFO) is Status.COLLECTED_AND_REPORTED
    assert rep.verdicts == {Verdict.UNDER_REPORTING}
    assert any("SIM card" in n for n in rep.unmappable_note)
    assert any(n.endswith("declared permission(s) imply no data-safety category") for n in rep.unmappable_note)


def test_instagram_like(tmp_path, bundle):
    from apps import all_categories_declaration

    res = analyze_path(build_apk(instagram_like(), tmp_path / "ig.apk"), bundle)
    rep = compare(load_declaration(all_categories_declaration(tmp_path / "d.json")), res.evidence)
    reported_only = {s.category.value for s in rep.statuses if s.status is Status.REPORTED_NOT_COLLECTED}
    assert reported_only == set(INSTAGRAM_UNREPORTED)
    assert rep.status_of(C.FINANCIAL_INFO) is Status.COLLECTED_AND_REPORTED
    assert Verdict.OVER_REPORTING in rep.verdicts
    assert all(rep.status_of(c) is not Status.COLLECTED_NOT_REPORTED for c in C)


def test_signal_aggregate_example(bundle):
    loc = _BUNDLE.match_keyword(["country"])[0][0]
    field = LabeledField(InputFieldRecord("l.xml", "EditText", field_id="country"), loc.label, loc.identifier,
                         DecidedBy.FIELD_ID, "country")
    apis = [_api("getLatitude"), _api("getMacAddress")]
    ev = aggregate_evidence([field], apis, [PermissionEvidence("android.permission.RECORD_AUDIO", C.AUDIO)],
                            bundle.mapping)
    assert ev.categories() == {C.LOCATION, C.DEVICE_OR_OTHER_IDS, C.AUDIO}
    assert all(i.category is cat for cat, items in ev.per_category.items() for i in items)


def _api(name: str, idx: int = 0) -> ApiSourceRecord:
    entry = next(a for a in _BUNDLE.apis if a.ref.name == name)
    return ApiSourceRecord(entry.ref, entry.label, entry.identifier, idx)


# --- properties --------------------------------------------------------------------

_kw_entries = [e for e in _BUNDLE.keywords]


def _field(i: int) -> LabeledField:
    e = _kw_entries[i]
    return LabeledField(InputFieldRecord("l.xml", "EditText", field_id=e.keyword.replace(" ", "_")),
                        e.label, e.identifier, DecidedBy.FIELD_ID, e.keyword)


_fields = st.lists(st.integers(0, len(_kw_entries) - 1).map(_field), max_size=8)
_apis = st.lists(st.sampled_from(_BUNDLE.apis).map(
    lambda a: ApiSourceRecord(a.ref, a.label, a.identifier, 0)), max_size=8)
_perms = st.lists(st.one_of(
    st.sampled_from(_BUNDLE.permissions).map(lambda r: PermissionEvidence(r.permission, r.implied_category)),
    st.sampled_from(["android.permission.INTERNET", "android.permission.WAKE_LOCK"]).map(PermissionEvidence),
), max_size=8)
_purposes = st.frozensets(st.sampled_from(list(P)), min_size=1)
_types = st.lists(st.builds(DeclaredType, st.sampled_from(["a", "b", "c"]), _purposes), min_size=1, max_size=3)
_declarations = st.builds(
    SafetyDeclaration,
    collected=st.dictionaries(st.sampled_from(list(C)), _types, max_size=14),
    shared=st.dictionaries(st.sampled_from(list(C)), _types, max_size=3),
    security=st.builds(SecurityPractices, st.booleans(), st.booleans()),
)


def _evidence(fields, apis, perms) -> CollectionEvidence:
    return aggregate_evidence(fields, apis, perms, _BUNDLE.mapping)


@settings(max_examples=1000, deadline=None)
@given(_declarations, _fields, _apis, _perms)
def test_exhaustive_statuses(decl, fields, apis, perms):
    ev = _evidence(fields, apis, perms)
    rep = compare(decl, ev)
    assert [s.category for s in rep.statuses] == list(C)
    for s in rep.statuses:
        assert s.status is status_for(bool(ev.per_category.get(s.category)), s.category in decl.collected)
    assert sum(rep.counts().values()) == len(C)


_MOVES = {
    Status.ABSENT: {Status.ABSENT, Status.COLLECTED_NOT_REPORTED},
    Status.REPORTED_NOT_COLLECTED: {Status.REPORTED_NOT_COLLECTED, Status.COLLECTED_AND_REPORTED},
    Status.COLLECTED_NOT_REPORTED: {Status.COLLECTED_NOT_REPORTED},
    Status.COLLECTED_AND_REPORTED: {Status.COLLECTED_AND_REPORTED},
}


@settings(max_examples=1000, deadline=None)
@given(_declarations, _fields, _apis, _perms, _fields, _apis, _perms)
def test_compare_monotone(decl, f1, a1, p1, f2, a2, p2):
    before = compare(decl, _evidence(f1, a1, p1))
    after = compare(decl, _evidence(f1 + f2, a1 + a2, p1 + p2))
    for b, a in zip(before.statuses, after.statuses):
        assert a.status in _MOVES[b.status]


@settings(max_examples=1000, deadline=None)
@given(_declarations, _fields, _apis, _perms, _fields, _apis, _perms)
def test_verdict_ignores_evidence(decl, f1, a1, p1, f2, a2, p2):
    r1 = compare(decl, _evidence(f1, a1, p1))
    r2 = compare(decl, _evidence(f2, a2, p2))
    assert r1.verdicts == r2.verdicts == declaration_verdict(decl)
    assert r1.inconsistencies == r2.inconsistencies


@settings(max_examples=1000, deadline=None)
@given(_fields, _apis, _perms)
def test_unmappable_conservation(fields, apis, perms):
    ev = _evidence(fields, apis, perms)
    routed = sum(len(v) for v in ev.per_category.values())
    assert len(fields) + len(apis) + len(perms) == routed + len(ev.unmappable) == len(ev)
    assert all(i.category is None for i in ev.unmappable)
    assert all(i.category is cat for cat, items in ev.per_category.items() for i in items)


@settings(max_examples=1000, deadline=None)
@given(_declarations)
def test_declaration_json_roundtrip(decl):
    assert declaration_from_dict(json.loads(json.dumps(declaration_to_dict(decl)))) == decl


def test_audited_subset():
    assert set(AUDITED_CATEGORIES) <= set(C) and len(AUDITED_CATEGORIES) == 10
