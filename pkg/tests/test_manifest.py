from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from apps import signal_like
from builders import El, S, android, encode_axml, manifest_el, plain_xml
from dsaudit.axml import parse_any_xml, parse_binary_xml
from dsaudit.datasets import PermissionRule, load_bundle
from dsaudit.manifestanalysis import NotAManifest, PermissionEvidence, extract_permissions, map_permissions
from dsaudit.taxonomy import SafetyCategory

AUDIO = "android.permission.RECORD_AUDIO"
CONTACTS = "android.permission.READ_CONTACTS"


@pytest.mark.parametrize("encode", [encode_axml, lambda el: plain_xml(el).encode()])
def test_two_permissions(encode):
    doc = parse_any_xml(encode(manifest_el("com.x", [AUDIO, CONTACTS])))
    assert extract_permissions(doc) == [AUDIO, CONTACTS]


def test_signal_has_seventy():
    spec = signal_like()
    doc = parse_binary_xml(encode_axml(manifest_el(spec.package, spec.permissions)))
    assert len(extract_permissions(doc)) == 70


def test_sdk23_and_dedup():
    doc = parse_binary_xml(encode_axml(manifest_el("com.x", [AUDIO, AUDIO, CONTACTS], sdk23=[AUDIO, "a.B"])))
    assert extract_permissions(doc) == [AUDIO, CONTACTS, "a.B"]


def test_nested_permission_ignored():
    root = El("manifest", [(None, "package", S("com.x"))], [
        El("application", [], [El("uses-permission", [android("name", S(AUDIO))])]),
        El("permission", [android("name", S("com.x.OWN"))]),
    ])
    assert extract_permissions(parse_binary_xml(encode_axml(root))) == []


def test_not_a_manifest():
    with pytest.raises(NotAManifest):
        extract_permissions(parse_binary_xml(encode_axml(El("LinearLayout", []))))


def test_map_examples(bundle):
    got = map_permissions([AUDIO, "android.permission.INTERNET", CONTACTS], bundle.permissions)
    assert got == [PermissionEvidence(AUDIO, SafetyCategory.AUDIO),
                   PermissionEvidence("android.permission.INTERNET", None),
                   PermissionEvidence(CONTACTS, SafetyCategory.CONTACTS)]
    assert map_permissions([], bundle.permissions) == []


def test_map_is_exact_match(bundle):
    assert map_permissions(["android.permission.record_audio", "RECORD_AUDIO"], bundle.permissions) == [
        PermissionEvidence("android.permission.record_audio"), PermissionEvidence("RECORD_AUDIO")]


_BUNDLE = load_bundle()
_perm = st.sampled_from([r.permission for r in _BUNDLE.permissions] + ["android.permission.INTERNET", "x.Y"])


@settings(max_examples=1000, deadline=None)
@given(st.lists(_perm, max_size=20))
def test_map_oracle(perms):
    rules = {r.permission: r.implied_category for r in _BUNDLE.permissions}
    got = map_permissions(perms, _BUNDLE.permissions)
    assert [e.permission for e in got] == list(dict.fromkeys(perms))
    assert all(e.implied_category == rules.get(e.permission) for e in got)


@settings(max_examples=1000, deadline=None)
@given(st.lists(_perm, max_size=20), st.lists(_perm, max_size=5))
def test_extract_roundtrip(perms, sdk23):
    doc = parse_binary_xml(encode_axml(manifest_el("com.x", perms, sdk23)))
    assert extract_permissions(doc) == list(dict.fromkeys(perms + sdk23))


def test_rule_type():
    rule = PermissionRule("com.x.permission.B", SafetyCategory.LOCATION)
    assert map_permissions(["com.x.permission.B"], [rule])[0].implied_category is SafetyCategory.LOCATION
