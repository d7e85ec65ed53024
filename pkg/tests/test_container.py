from __future__ import annotations

import io
import zipfile

import pytest

from apps import AppSpec, FieldSpec, build_apk, build_decoded_dir
from builders import encode_axml, encode_dex, manifest_el, write_apk
from dsaudit.container import (
    CorruptZipEntry,
    EntryKind,
    MissingManifest,
    NotAnApk,
    SourceKind,
    classify_entry,
    open_package,
)

MANIFEST = encode_axml(manifest_el("com.example", ["android.permission.CAMERA"]))
DEX = encode_dex([("La/B;", "f", "()V")])


@pytest.mark.parametrize("path, kind", [
    ("AndroidManifest.xml", EntryKind.MANIFEST),
    ("resources.arsc", EntryKind.RESOURCE_TABLE),
    ("classes.dex", EntryKind.DEX),
    ("classes12.dex", EntryKind.DEX),
    ("res/layout/main.xml", EntryKind.LAYOUT),
    ("res/layout-land-v21/main.xml", EntryKind.LAYOUT),
    ("res/layout/main.png", EntryKind.OTHER),
    ("res/values/strings.xml", EntryKind.OTHER),
    ("assets/classes.dex", EntryKind.OTHER),
    ("lib/AndroidManifest.xml", EntryKind.OTHER),
])
def test_classify_entry(path, kind):
    assert classify_entry(path) is kind


def test_open_binary_apk(tmp_path):
    spec = AppSpec("com.example.a", ["android.permission.CAMERA"],
                   {"main": [FieldSpec("email")], "other": [FieldSpec("pin")]},
                   apis=["android.location.Location: double getLatitude()"],
                   second_dex_apis=["android.location.Location: double getLongitude()"])
    pkg = open_package(build_apk(spec, tmp_path / "a.apk"))
    assert pkg.source_kind is SourceKind.BINARY_APK
    assert pkg.name == "a.apk"
    assert [p for p, _ in pkg.layouts] == ["res/layout/main.xml", "res/layout/other.xml"]
    assert [n for n, _ in pkg.dex_files] == ["classes.dex", "classes2.dex"]
    assert pkg.resource_table is not None


def test_open_decoded_directory(tmp_path):
    spec = AppSpec("com.example.b", [], {"main": [FieldSpec("email")]})
    pkg = open_package(build_decoded_dir(spec, tmp_path / "b"))
    assert pkg.source_kind is SourceKind.DECODED_DIR
    assert pkg.manifest.lstrip().startswith(b"<?xml")
    assert [p for p, _ in pkg.layouts] == ["res/layout/main.xml"]


def test_dex_order_is_numeric(tmp_path):
    p = write_apk(tmp_path / "x.apk", manifest=MANIFEST, dex=[DEX] * 11)
    assert [n for n, _ in open_package(p).dex_files][:3] == ["classes.dex", "classes2.dex", "classes3.dex"]
    assert open_package(p).dex_files[-1][0] == "classes11.dex"


def test_not_a_zip(tmp_path):
    p = tmp_path / "x.apk"
    p.write_bytes(b"hello")
    with pytest.raises(NotAnApk):
        open_package(p)
    with pytest.raises(NotAnApk):
        open_package(tmp_path / "missing.apk")


def test_missing_manifest(tmp_path):
    p = tmp_path / "x.apk"
    with zipfile.ZipFile(p, "w") as zf:
        zf.writestr("classes.dex", DEX)
    with pytest.raises(MissingManifest):
        open_package(p)


def test_binary_apk_needs_dex(tmp_path):
    with pytest.raises(NotAnApk):
        open_package(write_apk(tmp_path / "x.apk", manifest=MANIFEST))


@pytest.mark.parametrize("name", ["../evil.xml", "/abs/AndroidManifest.xml", "res/../../x", "C:evil"])
def test_zip_slip_rejected(tmp_path, name):
    p = write_apk(tmp_path / "x.apk", manifest=MANIFEST, dex=[DEX], extra={name: b"x"})
    with pytest.raises(CorruptZipEntry):
        open_package(p)


def test_corrupt_entry(tmp_path):
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("AndroidManifest.xml", MANIFEST * 20)
        zf.writestr("classes.dex", DEX)
    data = bytearray(buf.getvalue())
    # flip bytes inside the compressed manifest payload
    start = data.index(b"AndroidManifest.xml") + len("AndroidManifest.xml")
    for i in range(start + 10, start + 40):
        data[i] ^= 0x5A
    p = tmp_path / "x.apk"
    p.write_bytes(bytes(data))
    with pytest.raises(CorruptZipEntry) as exc:
        open_package(p)
    assert exc.value.name == "AndroidManifest.xml"


def test_symlink_escape_in_directory(tmp_path):
    root = tmp_path / "pkg"
    (root / "res" / "layout").mkdir(parents=True)
    (root / "AndroidManifest.xml").write_bytes(MANIFEST)
    outside = tmp_path / "secret.xml"
    outside.write_text("<x/>")
    (root / "res" / "layout" / "leak.xml").symlink_to(outside)
    with pytest.raises(CorruptZipEntry):
        open_package(root)
