"""Open an APK (ZIP) or an apktool-decoded directory and sort its entries."""

from __future__ import annotations

import re
import zipfile
import zlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path, PurePosixPath


class ContainerError(Exception):
    pass


class NotAnApk(ContainerError):
    pass


class MissingManifest(ContainerError):
    pass


class CorruptZipEntry(ContainerError):
    def __init__(self, name: str, reason: str = "unreadable entry"):
        super().__init__(f"{name}: {reason}")
        self.name = name


class SourceKind(Enum):
    BINARY_APK = "binary_apk"
    DECODED_DIR = "decoded_dir"


class EntryKind(Enum):
    MANIFEST = "manifest"
    LAYOUT = "layout"
    RESOURCE_TABLE = "resource_table"
    DEX = "dex"
    OTHER = "other"


MANIFEST_NAME = "AndroidManifest.xml"
_DEX_RE = re.compile(r"^classes(\d*)\.dex$")


def classify_entry(path: str) -> EntryKind:
    """Classify a package-relative, '/'-separated path. Pure function of the path."""
    if path == MANIFEST_NAME:
        return EntryKind.MANIFEST
    if path == "resources.arsc":
        return EntryKind.RESOURCE_TABLE
    if _DEX_RE.match(path):
        return EntryKind.DEX
    parts = path.split("/")
    if (len(parts) >= 3 and parts[0] == "res" and path.endswith(".xml")
            and any(p == "layout" or p.startswith("layout-") for p in parts[1:-1])):
        return EntryKind.LAYOUT
    return EntryKind.OTHER


def _dex_order(name: str) -> int:
    m = _DEX_RE.match(name)
    assert m is not None
    # classes.dex is the first payload; classes2.dex the second, and so on
    return int(m.group(1) or 1)


def _check_name(name: str) -> None:
    p = PurePosixPath(name.replace("\\", "/"))
    if p.is_absolute() or ".." in p.parts or re.match(r"^[A-Za-z]:", name):
        raise CorruptZipEntry(name, "entry escapes the package root")


@dataclass(frozen=True)
class AppPackage:
    path: str
    source_kind: SourceKind
    manifest: bytes
    layouts: tuple[tuple[str, bytes], ...]
    resource_table: bytes | None
    dex_files: tuple[tuple[str, bytes], ...]

    @property
    def name(self) -> str:
        return Path(self.path).name


def _assemble(path: str, kind: SourceKind, entries: dict[str, bytes]) -> AppPackage:
    manifest = entries.get(MANIFEST_NAME)
    if manifest is None:
        raise MissingManifest(f"{path}: no {MANIFEST_NAME}")
    layouts = sorted((n, b) for n, b in entries.items() if classify_entry(n) is EntryKind.LAYOUT)
    dex = sorted(((n, b) for n, b in entries.items() if classify_entry(n) is EntryKind.DEX),
                 key=lambda nb: _dex_order(nb[0]))
    if kind is SourceKind.BINARY_APK and not dex:
        raise NotAnApk(f"{path}: no classes*.dex payload")
    return AppPackage(path, kind, manifest, tuple(layouts), entries.get("resources.arsc"), tuple(dex))


def _wanted(name: str) -> bool:
    return classify_entry(name) is not EntryKind.OTHER


def _open_zip(path: Path) -> AppPackage:
    try:
        zf = zipfile.ZipFile(path)
    except (zipfile.BadZipFile, OSError) as exc:
        raise NotAnApk(f"{path}: not a ZIP archive ({exc})") from None
    entries: dict[str, bytes] = {}
    with zf:
        for info in zf.infolist():
            _check_name(info.filename)
            if info.is_dir() or not _wanted(info.filename):
                continue
            try:
                entries[info.filename] = zf.read(info)
            except (zipfile.BadZipFile, zlib.error, NotImplementedError, EOFError, OSError) as exc:
                raise CorruptZipEntry(info.filename, str(exc)) from None
    return _assemble(str(path), SourceKind.BINARY_APK, entries)


def _open_dir(path: Path) -> AppPackage:
    root = path.resolve()
    entries: dict[str, bytes] = {}
    for f in sorted(root.rglob("*")):
        if not f.is_file():
            continue
        real = f.resolve()
        if root not in real.parents:
            raise CorruptZipEntry(str(f.relative_to(root)), "entry escapes the package root")
        rel = f.relative_to(root).as_posix()
        if _wanted(rel):
            entries[rel] = real.read_bytes()
    return _assemble(str(path), SourceKind.DECODED_DIR, entries)


def open_package(path: str | Path) -> AppPackage:
    p = Path(path)
    if p.is_dir():
        return _open_dir(p)
    if not p.is_file():
        raise NotAnApk(f"{p}: no such file")
    return _open_zip(p)
