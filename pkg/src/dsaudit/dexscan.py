"""DEX id-table parsing and method-reference enumeration.

Only the string, type, proto and method id tables are decoded; instruction
streams are never touched. Every method in ``method_ids`` is treated as a
referenced method, so evidence reported from here means "referenced", not
"reachable".
"""

from __future__ import annotations

import re
import struct
import zlib
from dataclasses import dataclass, field

HEADER_SIZE = 0x70
SUPPORTED_VERSIONS = frozenset({"035", "037", "038", "039", "040", "041"})
ENDIAN_CONSTANT = 0x12345678

_HEADER = struct.Struct("<8sI20sIIIIII" + "II" * 7)


class DexError(ValueError):
    pass


class BadMagic(DexError):
    pass


class UnsupportedVersion(DexError):
    pass


class TruncatedFile(DexError):
    pass


class IndexOutOfBounds(DexError):
    def __init__(self, table: str, idx: int):
        super().__init__(f"{table} index {idx} out of bounds")
        self.table = table
        self.idx = idx


class MalformedSignature(ValueError):
    pass


# --- descriptors -------------------------------------------------------------

_PRIMITIVES = {
    "void": "V",
    "boolean": "Z",
    "byte": "B",
    "short": "S",
    "char": "C",
    "int": "I",
    "long": "J",
    "float": "F",
    "double": "D",
}
_PRIMITIVE_NAMES = {v: k for k, v in _PRIMITIVES.items()}

_FIELD_DESC = r"\[*(?:[ZBSCIJFD]|L[^;\[()]+;)"
_FIELD_DESC_RE = re.compile(_FIELD_DESC)
_CLASS_DESC_RE = re.compile(r"L[^;\[()]+;")
_PROTO_RE = re.compile(rf"\(((?:{_FIELD_DESC})*)\)(V|{_FIELD_DESC})")


@dataclass(frozen=True, order=True)
class MethodRef:
    class_descriptor: str
    name: str
    proto: str

    def __post_init__(self) -> None:
        if not (_CLASS_DESC_RE.fullmatch(self.class_descriptor)
                or (self.class_descriptor.startswith("[")
                    and _FIELD_DESC_RE.fullmatch(self.class_descriptor))):
            raise ValueError(f"bad class descriptor {self.class_descriptor!r}")
        if not self.name:
            raise ValueError("empty method name")
        if not _PROTO_RE.fullmatch(self.proto):
            raise ValueError(f"bad prototype {self.proto!r}")

    def __str__(self) -> str:
        return f"{self.class_descriptor}->{self.name}{self.proto}"


def type_to_descriptor(java_type: str) -> str:
    t = java_type.strip()
    if t.endswith("..."):
        t = t[:-3] + "[]"
    dims = 0
    while t.endswith("[]"):
        dims += 1
        t = t[:-2].rstrip()
    if not t or any(c in t for c in " ,()<>;/"):
        raise MalformedSignature(f"bad type {java_type!r}")
    base = _PRIMITIVES.get(t) or "L" + t.replace(".", "/") + ";"
    if base == "V" and dims:
        raise MalformedSignature("void array")
    return "[" * dims + base


def descriptor_to_type(desc: str) -> str:
    dims = len(desc) - len(desc.lstrip("["))
    base = desc[dims:]
    if base in _PRIMITIVE_NAMES:
        name = _PRIMITIVE_NAMES[base]
    elif base.startswith("L") and base.endswith(";"):
        name = base[1:-1].replace("/", ".")
    else:
        raise ValueError(f"bad descriptor {desc!r}")
    return name + "[]" * dims


def _strip_generics(text: str) -> str:
    out = []
    depth = 0
    for ch in text:
        if ch == "<":
            depth += 1
        elif ch == ">":
            if depth == 0:
                raise MalformedSignature(f"unbalanced '>' in {text!r}")
            depth -= 1
        elif depth == 0:
            out.append(ch)
    if depth:
        raise MalformedSignature(f"unbalanced '<' in {text!r}")
    return "".join(out)


_SIG_RE = re.compile(r"^\s*([^:\s]+)\s*:\s*(\S+)\s+([^\s(]+)\s*\(([^()]*)\)\s*$")


def signature_to_ref(signature: str) -> MethodRef:
    """Convert ``"pkg.Cls: ret name(p1,p2)"`` (optionally ``<...>``-wrapped) to a MethodRef."""
    sig = signature.strip()
    if sig.startswith("<") and sig.endswith(">") and ":" in sig:
        sig = sig[1:-1]
    m = _SIG_RE.match(_strip_generics(sig))
    if not m:
        raise MalformedSignature(f"not a method signature: {signature!r}")
    cls, ret, name, params = m.groups()
    param_list = [p for p in (s.strip() for s in params.split(",")) if p]
    if params.strip() and len(param_list) != len(params.split(",")):
        raise MalformedSignature(f"empty parameter in {signature!r}")
    cls_desc = type_to_descriptor(cls)
    if not cls_desc.startswith("L"):
        raise MalformedSignature(f"declaring class must be a reference type: {cls!r}")
    proto = "(" + "".join(type_to_descriptor(p) for p in param_list) + ")" + type_to_descriptor(ret)
    return MethodRef(cls_desc, name, proto)


def ref_to_signature(ref: MethodRef) -> str:
    m = _PROTO_RE.fullmatch(ref.proto)
    assert m is not None
    params = [descriptor_to_type(d.group(0)) for d in _FIELD_DESC_RE.finditer(m.group(1))]
    return f"{descriptor_to_type(ref.class_descriptor)}: {descriptor_to_type(m.group(2))} {ref.name}({','.join(params)})"


# --- MUTF-8 ------------------------------------------------------------------

def decode_mutf8(data: bytes) -> tuple[str, bool]:
    """Decode modified UTF-8; returns (text, had_errors). Bad sequences become U+FFFD."""
    if b"\xc0" not in data and b"\xed" not in data:
        try:
            return data.decode("utf-8"), False
        except UnicodeDecodeError:
            pass
    units: list[int] = []
    bad = False
    i, n = 0, len(data)
    while i < n:
        b = data[i]
        if b < 0x80:
            units.append(b)
            i += 1
        elif b & 0xE0 == 0xC0 and i + 1 < n and data[i + 1] & 0xC0 == 0x80:
            units.append(((b & 0x1F) << 6) | (data[i + 1] & 0x3F))
            i += 2
        elif (b & 0xF0 == 0xE0 and i + 2 < n
              and data[i + 1] & 0xC0 == 0x80 and data[i + 2] & 0xC0 == 0x80):
            units.append(((b & 0x0F) << 12) | ((data[i + 1] & 0x3F) << 6) | (data[i + 2] & 0x3F))
            i += 3
        else:
            units.append(0xFFFD)
            bad = True
            i += 1
    out: list[str] = []
    j = 0
    while j < len(units):
        u = units[j]
        if 0xD800 <= u < 0xDC00 and j + 1 < len(units) and 0xDC00 <= units[j + 1] < 0xE000:
            out.append(chr(0x10000 + ((u - 0xD800) << 10) + (units[j + 1] - 0xDC00)))
            j += 2
            continue
        if 0xD800 <= u < 0xE000:
            out.append("�")
            bad = True
        else:
            out.append(chr(u))
        j += 1
    return "".join(out), bad


def _uleb128(buf: bytes, off: int) -> tuple[int, int]:
    result = 0
    for shift in range(0, 35, 7):
        if off >= len(buf):
            raise TruncatedFile("uleb128 runs past end of file")
        b = buf[off]
        off += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, off
    raise DexError("uleb128 longer than 5 bytes")


# --- DEX ---------------------------------------------------------------------

@dataclass(frozen=True)
class DexFile:
    version: str
    string_ids: tuple[str, ...]
    type_ids: tuple[str, ...]
    proto_ids: tuple[tuple[str, tuple[str, ...]], ...]
    method_ids: tuple[tuple[int, int, int], ...]
    checksum: int
    checksum_ok: bool | None = None
    warnings: tuple[str, ...] = field(default=(), compare=False)


def _table(buf: bytes, name: str, size: int, off: int, item: int) -> None:
    if size and (off < HEADER_SIZE or off + size * item > len(buf)):
        raise TruncatedFile(f"{name} table [{off:#x}, +{size}x{item}] outside file of {len(buf)} bytes")


def _u32s(buf: bytes, n: int, off: int) -> tuple[int, ...]:
    # an empty table may carry any offset
    return struct.unpack_from(f"<{n}I", buf, off) if n else ()


def parse_dex(data: bytes, *, verify_checksum: bool = True) -> DexFile:
    buf = bytes(data)
    if len(buf) < 8 or buf[:4] != b"dex\n" or buf[7] != 0:
        if len(buf) < 8 and b"dex\n".startswith(buf[:4]):
            raise TruncatedFile(f"file is {len(buf)} bytes, header needs {HEADER_SIZE}")
        raise BadMagic(f"bad DEX magic {buf[:8]!r}")
    version = buf[4:7].decode("ascii", "replace")
    if version not in SUPPORTED_VERSIONS:
        raise UnsupportedVersion(f"DEX version {version!r} not supported")
    if len(buf) < HEADER_SIZE:
        raise TruncatedFile(f"file is {len(buf)} bytes, header needs {HEADER_SIZE}")
    h = _HEADER.unpack_from(buf, 0)
    checksum, file_size, header_size, endian = h[1], h[3], h[4], h[5]
    if endian != ENDIAN_CONSTANT:
        raise DexError(f"unsupported endian tag {endian:#x}")
    if file_size > len(buf):
        raise TruncatedFile(f"header declares {file_size} bytes, got {len(buf)}")
    if header_size < HEADER_SIZE:
        raise DexError(f"header_size {header_size:#x} too small")
    buf = buf[:file_size]
    (str_n, str_off, type_n, type_off, proto_n, proto_off,
     _field_n, _field_off, meth_n, meth_off) = h[9:19]

    _table(buf, "string_ids", str_n, str_off, 4)
    _table(buf, "type_ids", type_n, type_off, 4)
    _table(buf, "proto_ids", proto_n, proto_off, 12)
    _table(buf, "method_ids", meth_n, meth_off, 8)

    warnings: list[str] = []
    checksum_ok: bool | None = None
    if verify_checksum:
        checksum_ok = zlib.adler32(buf[12:]) == checksum
        if not checksum_ok:
            warnings.append("checksum mismatch")

    strings: list[str] = []
    bad_strings = 0
    for off in _u32s(buf, str_n, str_off):
        if off >= len(buf):
            raise TruncatedFile(f"string_data at {off:#x} outside file")
        _, start = _uleb128(buf, off)
        end = buf.find(b"\x00", start)
        if end < 0:
            raise TruncatedFile(f"unterminated string at {off:#x}")
        text, bad = decode_mutf8(buf[start:end])
        bad_strings += bad
        strings.append(text)
    if bad_strings:
        warnings.append(f"{bad_strings} string(s) with invalid MUTF-8 replaced")

    def string_at(idx: int) -> str:
        if idx >= str_n:
            raise IndexOutOfBounds("string_ids", idx)
        return strings[idx]

    types = tuple(string_at(i) for i in _u32s(buf, type_n, type_off))

    def type_at(idx: int) -> str:
        if idx >= type_n:
            raise IndexOutOfBounds("type_ids", idx)
        return types[idx]

    protos = []
    for k in range(proto_n):
        _shorty, ret_idx, params_off = struct.unpack_from("<III", buf, proto_off + 12 * k)
        params: tuple[str, ...] = ()
        if params_off:
            if params_off + 4 > len(buf):
                raise TruncatedFile(f"type_list at {params_off:#x} outside file")
            (count,) = struct.unpack_from("<I", buf, params_off)
            if params_off + 4 + 2 * count > len(buf):
                raise TruncatedFile(f"type_list at {params_off:#x} runs past end of file")
            params = tuple(type_at(i) for i in struct.unpack_from(f"<{count}H", buf, params_off + 4)) if count else ()
        protos.append((type_at(ret_idx), params))

    methods = []
    for k in range(meth_n):
        cls_idx, proto_idx, name_idx = struct.unpack_from("<HHI", buf, meth_off + 8 * k)
        if cls_idx >= type_n:
            raise IndexOutOfBounds("type_ids", cls_idx)
        if proto_idx >= proto_n:
            raise IndexOutOfBounds("proto_ids", proto_idx)
        if name_idx >= str_n:
            raise IndexOutOfBounds("string_ids", name_idx)
        methods.append((cls_idx, proto_idx, name_idx))

    return DexFile(
        version=version,
        string_ids=tuple(strings),
        type_ids=types,
        proto_ids=tuple(protos),
        method_ids=tuple(methods),
        checksum=checksum,
        checksum_ok=checksum_ok,
        warnings=tuple(warnings),
    )


def method_refs(dex: DexFile) -> list[MethodRef]:
    """One ref per method_ids entry, in table order, duplicates dropped.

    Entries whose descriptors are not well formed (possible in damaged files)
    are skipped.
    """
    seen: set[MethodRef] = set()
    out: list[MethodRef] = []
    for cls_idx, proto_idx, name_idx in dex.method_ids:
        ret, params = dex.proto_ids[proto_idx]
        try:
            ref = MethodRef(dex.type_ids[cls_idx], dex.string_ids[name_idx],
                            "(" + "".join(params) + ")" + ret)
        except ValueError:
            continue
        if ref not in seen:
            seen.add(ref)
            out.append(ref)
    return out
