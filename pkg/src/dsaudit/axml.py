"""Android binary XML, resource table and plain-text XML into one document model.

Binary chunks are little-endian ``ResChunk_header`` structures (type u16,
header size u16, total size u32). Every chunk read is bounds-checked against
its parent, and chunk iteration always advances, so damaged input ends in a
:class:`AxmlError` rather than a crash or a loop.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from typing import Iterator, Union
from xml.parsers import expat

ANDROID_NS = "http://schemas.android.com/apk/res/android"

RES_STRING_POOL_TYPE = 0x0001
RES_TABLE_TYPE = 0x0002
RES_XML_TYPE = 0x0003
RES_XML_START_NAMESPACE_TYPE = 0x0100
RES_XML_END_NAMESPACE_TYPE = 0x0101
RES_XML_START_ELEMENT_TYPE = 0x0102
RES_XML_END_ELEMENT_TYPE = 0x0103
RES_XML_CDATA_TYPE = 0x0104
RES_XML_RESOURCE_MAP_TYPE = 0x0180
RES_TABLE_PACKAGE_TYPE = 0x0200
RES_TABLE_TYPE_TYPE = 0x0201
RES_TABLE_TYPE_SPEC_TYPE = 0x0202

UTF8_FLAG = 1 << 8
NO_INDEX = 0xFFFFFFFF

# Res_value data types
TYPE_NULL = 0x00
TYPE_REFERENCE = 0x01
TYPE_ATTRIBUTE = 0x02
TYPE_STRING = 0x03
TYPE_DYNAMIC_REFERENCE = 0x07
TYPE_INT_DEC = 0x10
TYPE_INT_HEX = 0x11
TYPE_INT_BOOLEAN = 0x12
TYPE_FIRST_COLOR_INT = 0x1C
TYPE_LAST_COLOR_INT = 0x1F

# Framework attribute ids, used when a compiled attribute name was stripped.
ANDROID_ATTR_IDS = {
    0x01010003: "name",
    0x010100D0: "id",
    0x0101014F: "text",
    0x01010150: "hint",
    0x01010220: "inputType",
    0x010103C6: "labelFor",
}

INPUT_TYPES = {
    "none": 0x00000000,
    "text": 0x00000001,
    "textCapCharacters": 0x00001001,
    "textCapWords": 0x00002001,
    "textCapSentences": 0x00004001,
    "textAutoCorrect": 0x00008001,
    "textAutoComplete": 0x00010001,
    "textMultiLine": 0x00020001,
    "textImeMultiLine": 0x00040001,
    "textNoSuggestions": 0x00080001,
    "textEnableTextConversionSuggestions": 0x00100001,
    "textUri": 0x00000011,
    "textEmailAddress": 0x00000021,
    "textEmailSubject": 0x00000031,
    "textShortMessage": 0x00000041,
    "textLongMessage": 0x00000051,
    "textPersonName": 0x00000061,
    "textPostalAddress": 0x00000071,
    "textPassword": 0x00000081,
    "textVisiblePassword": 0x00000091,
    "textWebEditText": 0x000000A1,
    "textFilter": 0x000000B1,
    "textPhonetic": 0x000000C1,
    "textWebEmailAddress": 0x000000D1,
    "textWebPassword": 0x000000E1,
    "number": 0x00000002,
    "numberSigned": 0x00001002,
    "numberDecimal": 0x00002002,
    "numberPassword": 0x00000012,
    "phone": 0x00000003,
    "datetime": 0x00000004,
    "date": 0x00000014,
    "time": 0x00000024,
}


class AxmlError(ValueError):
    pass


class BadMagic(AxmlError):
    pass


class TruncatedChunk(AxmlError):
    def __init__(self, offset: int, reason: str = "chunk runs past its container"):
        super().__init__(f"offset {offset:#x}: {reason}")
        self.offset = offset


class StringIndexOutOfRange(AxmlError):
    pass


class UnbalancedElements(AxmlError):
    pass


class MalformedXml(AxmlError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


# --- document model -------------------------------------------------------

@dataclass(frozen=True)
class Str:
    value: str


@dataclass(frozen=True)
class Int:
    value: int


@dataclass(frozen=True)
class Bool:
    value: bool


@dataclass(frozen=True)
class ResRef:
    """Resource reference: by numeric id (binary) or by ``type/name`` (plain text)."""

    resource_id: int | None = None
    name: str | None = None


@dataclass(frozen=True)
class HexFlags:
    value: int


AttrValue = Union[Str, Int, Bool, ResRef, HexFlags]


@dataclass(frozen=True)
class XmlAttribute:
    namespace_uri: str | None
    name: str
    value: AttrValue


@dataclass
class XmlElement:
    name: str
    attributes: list[XmlAttribute] = field(default_factory=list)
    children: list[XmlElement] = field(default_factory=list)
    text_content: str | None = None

    def get(self, name: str, namespace_uri: str | None = ANDROID_NS) -> AttrValue | None:
        for a in self.attributes:
            if a.name == name and a.namespace_uri == namespace_uri:
                return a.value
        return None

    def iter(self) -> Iterator[XmlElement]:
        yield self
        for c in self.children:
            yield from c.iter()


@dataclass
class XmlDocument:
    root: XmlElement

    def iter(self) -> Iterator[XmlElement]:
        return self.root.iter()


# --- string pool ----------------------------------------------------------

@dataclass(frozen=True)
class StringPool:
    strings: tuple[str, ...]
    utf8: bool
    lossy: bool = False

    def get(self, idx: int) -> str:
        if idx < 0 or idx >= len(self.strings):
            raise StringIndexOutOfRange(f"string index {idx} out of range ({len(self.strings)} strings)")
        return self.strings[idx]

    def opt(self, idx: int) -> str | None:
        return None if idx == NO_INDEX else self.get(idx)


def _header(buf: bytes, off: int, end: int) -> tuple[int, int, int]:
    if off + 8 > end:
        raise TruncatedChunk(off, "chunk header runs past its container")
    ctype, hsize, size = struct.unpack_from("<HHI", buf, off)
    if hsize < 8 or size < hsize or off + size > end:
        raise TruncatedChunk(off, f"bad chunk sizes (header {hsize}, total {size})")
    return ctype, hsize, size


def _children(buf: bytes, start: int, end: int) -> Iterator[tuple[int, int, int, int]]:
    off = start
    while off < end:
        ctype, hsize, size = _header(buf, off, end)
        yield off, ctype, hsize, size
        off += size  # size >= 8, so this always advances


def _utf8_len(buf: bytes, off: int, end: int) -> tuple[int, int]:
    if off >= end:
        raise TruncatedChunk(off, "string length past pool end")
    n = buf[off]
    if n & 0x80:
        if off + 1 >= end:
            raise TruncatedChunk(off, "string length past pool end")
        return ((n & 0x7F) << 8) | buf[off + 1], off + 2
    return n, off + 1


def _utf16_len(buf: bytes, off: int, end: int) -> tuple[int, int]:
    if off + 2 > end:
        raise TruncatedChunk(off, "string length past pool end")
    (n,) = struct.unpack_from("<H", buf, off)
    if n & 0x8000:
        if off + 4 > end:
            raise TruncatedChunk(off, "string length past pool end")
        (lo,) = struct.unpack_from("<H", buf, off + 2)
        return ((n & 0x7FFF) << 16) | lo, off + 4
    return n, off + 2


def parse_string_pool(buf: bytes, off: int, hsize: int, size: int) -> StringPool:
    end = off + size
    if hsize < 28:
        raise TruncatedChunk(off, "string pool header too small")
    count, _styles, flags, strings_start, _styles_start = struct.unpack_from("<IIIII", buf, off + 8)
    table = off + hsize
    if count > (size - hsize) // 4:
        raise TruncatedChunk(off, f"string pool claims {count} strings")
    offsets = struct.unpack_from(f"<{count}I", buf, table)
    base = off + strings_start
    if count and not (table + 4 * count <= base <= end):
        raise TruncatedChunk(off, "string data offset outside pool")
    utf8 = bool(flags & UTF8_FLAG)
    out: list[str] = []
    lossy = False
    for rel in offsets:
        p = base + rel
        if p >= end:
            raise TruncatedChunk(p, "string offset outside pool")
        if utf8:
            _, p = _utf8_len(buf, p, end)  # UTF-16 length, unused
            n, p = _utf8_len(buf, p, end)
            if p + n > end:
                raise TruncatedChunk(p, "string runs past pool end")
            raw = buf[p:p + n]
            try:
                s = raw.decode("utf-8")
            except UnicodeDecodeError:
                s = raw.decode("utf-8", "replace")
                lossy = True
        else:
            n, p = _utf16_len(buf, p, end)
            if p + 2 * n > end:
                raise TruncatedChunk(p, "string runs past pool end")
            raw = buf[p:p + 2 * n]
            try:
                s = raw.decode("utf-16-le")
            except UnicodeDecodeError:
                s = raw.decode("utf-16-le", "replace")
                lossy = True
        out.append(s)
    return StringPool(tuple(out), utf8, lossy)


def _value(data_type: int, data: int, pool: StringPool) -> AttrValue:
    if data_type == TYPE_STRING:
        return Str(pool.get(data))
    if data_type in (TYPE_REFERENCE, TYPE_DYNAMIC_REFERENCE, TYPE_ATTRIBUTE):
        return ResRef(resource_id=data)
    if data_type == TYPE_INT_BOOLEAN:
        return Bool(data != 0)
    if data_type == TYPE_INT_HEX or TYPE_FIRST_COLOR_INT <= data_type <= TYPE_LAST_COLOR_INT:
        return HexFlags(data)
    if data_type == TYPE_INT_DEC:
        return Int(struct.unpack("<i", struct.pack("<I", data))[0])
    # floats, dimensions, fractions, null: keep the raw word
    return Int(data)


# --- binary XML -----------------------------------------------------------

def parse_binary_xml(data: bytes) -> XmlDocument:
    buf = bytes(data)
    if len(buf) < 8 or struct.unpack_from("<H", buf, 0)[0] != RES_XML_TYPE:
        raise BadMagic(f"not a binary XML document (starts {buf[:4].hex() or 'empty'})")
    _, hsize, size = _header(buf, 0, len(buf))
    pool: StringPool | None = None
    res_map: tuple[int, ...] = ()
    stack: list[XmlElement] = []
    root: XmlElement | None = None

    for off, ctype, chsize, csize in _children(buf, hsize, size):
        if ctype == RES_STRING_POOL_TYPE:
            pool = parse_string_pool(buf, off, chsize, csize)
        elif ctype == RES_XML_RESOURCE_MAP_TYPE:
            n = (csize - chsize) // 4
            res_map = struct.unpack_from(f"<{n}I", buf, off + chsize)
        elif ctype == RES_XML_START_ELEMENT_TYPE:
            if pool is None:
                raise AxmlError("element before string pool")
            el = _start_element(buf, off, chsize, csize, pool, res_map)
            if stack:
                stack[-1].children.append(el)
            elif root is None:
                root = el
            else:
                raise UnbalancedElements("more than one root element")
            stack.append(el)
        elif ctype == RES_XML_END_ELEMENT_TYPE:
            if pool is None or chsize + 8 > csize:
                raise TruncatedChunk(off, "end element too small")
            _ns, name_idx = struct.unpack_from("<II", buf, off + chsize)
            if not stack:
                raise UnbalancedElements(f"offset {off:#x}: end tag with no open element")
            name = pool.get(name_idx)
            if name != stack[-1].name:
                raise UnbalancedElements(f"offset {off:#x}: </{name}> closes <{stack[-1].name}>")
            stack.pop()
        elif ctype == RES_XML_CDATA_TYPE:
            if pool is None or chsize + 4 > csize:
                raise TruncatedChunk(off, "cdata chunk too small")
            (idx,) = struct.unpack_from("<I", buf, off + chsize)
            text = pool.opt(idx)
            if stack and text and text.strip():
                cur = stack[-1]
                cur.text_content = (cur.text_content or "") + text.strip()
        # namespaces and unknown chunk types are skipped by size

    if stack:
        raise UnbalancedElements(f"<{stack[-1].name}> never closed")
    if root is None:
        raise AxmlError("document has no root element")
    return XmlDocument(root)


def _start_element(buf: bytes, off: int, hsize: int, size: int,
                   pool: StringPool, res_map: tuple[int, ...]) -> XmlElement:
    body = off + hsize
    if body + 20 > off + size:
        raise TruncatedChunk(off, "start element too small")
    _ns, name_idx, attr_start, attr_size, attr_count = struct.unpack_from("<IIHHH", buf, body)
    if attr_size < 20:
        raise TruncatedChunk(off, f"attribute size {attr_size} too small")
    first = body + attr_start
    if first + attr_count * attr_size > off + size:
        raise TruncatedChunk(off, "attributes run past element chunk")
    el = XmlElement(pool.get(name_idx))
    seen: set[tuple[str | None, str]] = set()
    for k in range(attr_count):
        a = first + k * attr_size
        ns_idx, aname_idx, raw_idx, _vsize, _res0, dtype, data = struct.unpack_from("<IIIHBBI", buf, a)
        name = pool.get(aname_idx)
        if not name and aname_idx < len(res_map):
            name = ANDROID_ATTR_IDS.get(res_map[aname_idx], f"attr_{res_map[aname_idx]:08x}")
        ns = pool.opt(ns_idx)
        if (ns, name) in seen:
            continue
        seen.add((ns, name))
        if dtype == TYPE_NULL and raw_idx != NO_INDEX:
            value: AttrValue = Str(pool.get(raw_idx))
        else:
            value = _value(dtype, data, pool)
        if isinstance(value, Str) and ns == ANDROID_NS and name == "inputType":
            # same reading as the text form, so both encodings label alike
            value = symbolic_input_type(value.value) or value
        el.attributes.append(XmlAttribute(ns, name, value))
    return el


# --- resource table -------------------------------------------------------

@dataclass(frozen=True)
class ResourceEntry:
    name: str  # "type/key"
    value: str | None  # default-configuration string, if the entry is a string


@dataclass(frozen=True)
class ResourceTable:
    entries: dict[int, ResourceEntry]

    def lookup(self, resource_id: int) -> ResourceEntry | None:
        return self.entries.get(resource_id)

    def id_for_name(self, name: str) -> int | None:
        for rid, e in self.entries.items():
            if e.name == name:
                return rid
        return None


def _is_default_config(buf: bytes, off: int, end: int) -> bool:
    if off + 4 > end:
        raise TruncatedChunk(off, "config runs past type chunk")
    (csize,) = struct.unpack_from("<I", buf, off)
    if csize < 4 or off + csize > end:
        raise TruncatedChunk(off, f"bad config size {csize}")
    return not any(buf[off + 4:off + csize])


def parse_resource_table(data: bytes) -> ResourceTable:
    buf = bytes(data)
    if len(buf) < 8 or struct.unpack_from("<H", buf, 0)[0] != RES_TABLE_TYPE:
        raise BadMagic(f"not a resource table (starts {buf[:4].hex() or 'empty'})")
    _, hsize, size = _header(buf, 0, len(buf))
    values: StringPool | None = None
    entries: dict[int, ResourceEntry] = {}
    for off, ctype, chsize, csize in _children(buf, hsize, size):
        if ctype == RES_STRING_POOL_TYPE and values is None:
            values = parse_string_pool(buf, off, chsize, csize)
        elif ctype == RES_TABLE_PACKAGE_TYPE:
            _parse_package(buf, off, chsize, csize, values or StringPool((), True), entries)
    return ResourceTable(entries)


def _parse_package(buf: bytes, off: int, hsize: int, size: int,
                   values: StringPool, entries: dict[int, ResourceEntry]) -> None:
    end = off + size
    if hsize < 8 + 4 + 256 + 16:
        raise TruncatedChunk(off, "package header too small")
    (pkg_id,) = struct.unpack_from("<I", buf, off + 8)
    type_strings_off, _last_type, key_strings_off = struct.unpack_from("<III", buf, off + 8 + 4 + 256)
    types: StringPool | None = None
    keys: StringPool | None = None
    for coff, ctype, chsize, csize in _children(buf, off + hsize, end):
        if ctype == RES_STRING_POOL_TYPE:
            rel = coff - off
            if rel == type_strings_off or (types is None and rel != key_strings_off):
                types = parse_string_pool(buf, coff, chsize, csize)
            else:
                keys = parse_string_pool(buf, coff, chsize, csize)
        elif ctype == RES_TABLE_TYPE_TYPE:
            if types is None or keys is None:
                raise AxmlError("type chunk before type/key string pools")
            _parse_type(buf, coff, chsize, csize, pkg_id, types, keys, values, entries)


def _parse_type(buf: bytes, off: int, hsize: int, size: int, pkg_id: int,
                types: StringPool, keys: StringPool, values: StringPool,
                entries: dict[int, ResourceEntry]) -> None:
    end = off + size
    if hsize < 20 + 4:
        raise TruncatedChunk(off, "type header too small")
    type_id, flags, _reserved, count, entries_start = struct.unpack_from("<BBHII", buf, off + 8)
    if type_id == 0:
        raise AxmlError(f"offset {off:#x}: type id 0")
    type_name = types.get(type_id - 1)
    default = _is_default_config(buf, off + 20, end)
    sparse = bool(flags & 0x01)
    offset16 = bool(flags & 0x02)
    item = 4 if (sparse or not offset16) else 2
    table = off + hsize
    if table + count * item > end:
        raise TruncatedChunk(off, f"type chunk claims {count} entries")
    base = off + entries_start
    for k in range(count):
        if sparse:
            idx, rel16 = struct.unpack_from("<HH", buf, table + 4 * k)
            rel = rel16 * 4
        elif offset16:
            (rel16,) = struct.unpack_from("<H", buf, table + 2 * k)
            if rel16 == 0xFFFF:
                continue
            idx, rel = k, rel16 * 4
        else:
            (rel,) = struct.unpack_from("<I", buf, table + 4 * k)
            if rel == NO_INDEX:
                continue
            idx = k
        e = base + rel
        if e + 8 > end:
            raise TruncatedChunk(e, "entry runs past type chunk")
        esize, eflags, key_idx = struct.unpack_from("<HHI", buf, e)
        rid = (pkg_id << 24) | (type_id << 16) | idx
        name = f"{type_name}/{keys.get(key_idx)}"
        value = None
        if default and not eflags & 0x0001:
            if e + esize + 8 > end:
                raise TruncatedChunk(e, "value runs past type chunk")
            _vs, _r0, dtype, data = struct.unpack_from("<HBBI", buf, e + esize)
            if dtype == TYPE_STRING:
                value = values.get(data)
        prev = entries.get(rid)
        if prev is None or (value is not None and prev.value is None):
            entries[rid] = ResourceEntry(name, value)


# --- plain XML ------------------------------------------------------------

_REF_RE = re.compile(r"^@\+?(?:[A-Za-z_][\w.]*:)?([A-Za-z_][\w]*)/([\w.$]+)$")
_HEX_RE = re.compile(r"^0[xX][0-9a-fA-F]{1,8}$")


class _Reject(Exception):
    pass


def symbolic_input_type(raw: str) -> HexFlags | None:
    """"textPassword|textNoSuggestions" -> flags; None unless every part is a known name."""
    parts = [p.strip() for p in raw.split("|")]
    if not parts or not all(p in INPUT_TYPES for p in parts):
        return None
    flags = 0
    for p in parts:
        flags |= INPUT_TYPES[p]
    return HexFlags(flags)


def _plain_value(ns: str | None, name: str, raw: str) -> AttrValue:
    m = _REF_RE.match(raw)
    if m:
        return ResRef(name=f"{m.group(1)}/{m.group(2)}")
    if _HEX_RE.match(raw):
        return HexFlags(int(raw, 16))
    if ns == ANDROID_NS and name == "inputType":
        flags = symbolic_input_type(raw)
        if flags is not None:
            return flags
    return Str(raw)


def _split_name(qname: str) -> tuple[str | None, str]:
    if " " in qname:
        ns, local = qname.split(" ", 1)
        return ns, local
    return None, qname


def parse_plain_xml(text: str | bytes) -> XmlDocument:
    """Parse decoded (apktool-style) XML. DTDs and entity declarations are rejected."""
    parser = expat.ParserCreate(namespace_separator=" ")
    parser.ordered_attributes = True
    stack: list[XmlElement] = []
    texts: list[list[str]] = []
    holder: list[XmlElement] = []

    def reject(*_args: object) -> None:
        raise _Reject("DTDs and entity declarations are not allowed")

    def start(qname: str, attrs: list[str]) -> None:
        _, local = _split_name(qname)
        el = XmlElement(local)
        seen = set()
        for i in range(0, len(attrs), 2):
            ns, aname = _split_name(attrs[i])
            if (ns, aname) in seen:
                continue
            seen.add((ns, aname))
            el.attributes.append(XmlAttribute(ns, aname, _plain_value(ns, aname, attrs[i + 1])))
        if stack:
            stack[-1].children.append(el)
        else:
            holder.append(el)
        stack.append(el)
        texts.append([])

    def end(_qname: str) -> None:
        el = stack.pop()
        t = "".join(texts.pop()).strip()
        el.text_content = t or None

    def chars(data: str) -> None:
        if texts:
            texts[-1].append(data)

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    parser.StartDoctypeDeclHandler = reject
    parser.EntityDeclHandler = reject
    parser.ExternalEntityRefHandler = reject
    try:
        parser.Parse(text.encode("utf-8") if isinstance(text, str) else text, True)
    except expat.ExpatError as exc:
        raise MalformedXml(exc.lineno, expat.errors.messages[exc.code]) from None
    except _Reject as exc:
        raise MalformedXml(parser.CurrentLineNumber, str(exc)) from None
    if not holder:
        raise MalformedXml(parser.CurrentLineNumber, "no root element")
    return XmlDocument(holder[0])


def parse_any_xml(data: bytes) -> XmlDocument:
    """Binary XML when the buffer starts with the binary chunk type, plain text otherwise."""
    if len(data) >= 2 and struct.unpack_from("<H", data, 0)[0] == RES_XML_TYPE:
        return parse_binary_xml(data)
    return parse_plain_xml(data)


# --- resolution -----------------------------------------------------------

def resource_name(value: AttrValue | None, table: ResourceTable | None) -> str | None:
    """``type/name`` of a reference, when known."""
    if not isinstance(value, ResRef):
        return None
    if value.name is not None:
        return value.name
    if table is not None and value.resource_id is not None:
        entry = table.lookup(value.resource_id)
        if entry is not None:
            return entry.name
    return None


def resolve_string(value: AttrValue | None, table: ResourceTable | None = None) -> str | None:
    """Str -> itself; ResRef -> string resource value or, failing that, the name's last segment."""
    if isinstance(value, Str):
        return value.value
    if not isinstance(value, ResRef):
        return None
    if table is not None:
        rid = value.resource_id
        if rid is None and value.name is not None:
            rid = table.id_for_name(value.name)
        if rid is not None:
            entry = table.lookup(rid)
            if entry is not None and entry.value is not None:
                return entry.value
    name = resource_name(value, table)
    return name.rsplit("/", 1)[-1] if name else None


def canonical_value(value: AttrValue, table: ResourceTable | None = None) -> str:
    """Representation-independent text of a value, used to compare binary and plain parses."""
    if isinstance(value, Str):
        return value.value
    if isinstance(value, Bool):
        return "true" if value.value else "false"
    if isinstance(value, Int):
        return str(value.value)
    if isinstance(value, HexFlags):
        return f"0x{value.value:08x}"
    name = resource_name(value, table)
    if name is not None:
        return f"@{name}"
    return f"@0x{value.resource_id:08x}"


def canonical_tree(doc: XmlDocument, table: ResourceTable | None = None) -> tuple:
    def walk(el: XmlElement) -> tuple:
        attrs = tuple(sorted((a.namespace_uri or "", a.name, canonical_value(a.value, table))
                             for a in el.attributes))
        return (el.name, attrs, el.text_content, tuple(walk(c) for c in el.children))
    return walk(doc.root)
