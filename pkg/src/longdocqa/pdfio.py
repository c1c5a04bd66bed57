"""Minimal PDF reading and page rasterization.

No PDF library is installable in the target environment, so this module
implements the narrow subset the pipeline needs: page count from the
document catalog, per-page media boxes, and a best-effort raster of each
page's text content. It understands classic cross-reference tables,
cross-reference streams, object streams, FlateDecode (with PNG
predictors) and the text-positioning operators emitted by mainstream
generators using the standard fonts. Content it cannot interpret
degrades to a blank page raster; structural damage raises
MalformedDocument.
"""
from __future__ import annotations

import base64
import io
import re
import zlib
from dataclasses import dataclass

from PIL import Image, ImageDraw, ImageFont

from .errors import EmptyDocument, MalformedDocument

_WHITESPACE = b"\x00\t\n\x0c\r "
_DELIMITERS = b"()<>[]{}/%"


@dataclass(frozen=True)
class Ref:
    num: int
    gen: int


class Name(str):
    """PDF name object; distinguishes /Foo from the string (Foo)."""


@dataclass
class StreamObject:
    attrs: dict
    raw: bytes


@dataclass
class TextRun:
    x: float          # points, origin bottom-left
    y: float
    size: float       # font size in points
    text: str


class _Lexer:
    """Tokenizer over the raw file (or a decoded content stream)."""

    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def skip_ws(self) -> None:
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = self.data[self.pos]
            if c in _WHITESPACE:
                self.pos += 1
            elif c == 0x25:  # '%' comment to end of line
                nl = data.find(b"\n", self.pos)
                self.pos = n if nl < 0 else nl + 1
            else:
                return

    def peek(self, k: int = 1) -> bytes:
        return self.data[self.pos:self.pos + k]

    def read_token(self) -> bytes:
        """A regular token (operator or keyword)."""
        self.skip_ws()
        start = self.pos
        data, n = self.data, len(self.data)
        while self.pos < n and data[self.pos] not in _WHITESPACE \
                and data[self.pos] not in _DELIMITERS:
            self.pos += 1
        return data[start:self.pos]

    def parse_object(self):
        self.skip_ws()
        if self.pos >= len(self.data):
            raise MalformedDocument("unexpected end of data")
        c = self.data[self.pos:self.pos + 1]
        if c == b"<":
            if self.peek(2) == b"<<":
                return self._parse_dict()
            return self._parse_hex_string()
        if c == b"(":
            return self._parse_literal_string()
        if c == b"[":
            return self._parse_array()
        if c == b"/":
            return self._parse_name()
        if c.isdigit() or c in (b"+", b"-", b"."):
            return self._parse_number_or_ref()
        word = self.read_token()
        if word == b"true":
            return True
        if word == b"false":
            return False
        if word == b"null":
            return None
        raise MalformedDocument(f"unexpected token {word[:20]!r}")

    def _parse_dict(self) -> dict:
        self.pos += 2
        result = {}
        while True:
            self.skip_ws()
            if self.peek(2) == b">>":
                self.pos += 2
                return result
            key = self.parse_object()
            if not isinstance(key, Name):
                raise MalformedDocument("dictionary key is not a name")
            result[str(key)] = self.parse_object()

    def _parse_array(self) -> list:
        self.pos += 1
        result = []
        while True:
            self.skip_ws()
            if self.peek() == b"]":
                self.pos += 1
                return result
            result.append(self.parse_object())

    def _parse_name(self) -> Name:
        self.pos += 1
        start = self.pos
        data, n = self.data, len(self.data)
        while self.pos < n and data[self.pos] not in _WHITESPACE \
                and data[self.pos] not in _DELIMITERS:
            self.pos += 1
        raw = data[start:self.pos]
        # #xx escapes inside names
        if b"#" in raw:
            raw = re.sub(rb"#([0-9A-Fa-f]{2})",
                         lambda m: bytes([int(m.group(1), 16)]), raw)
        return Name(raw.decode("latin-1"))

    def _parse_literal_string(self) -> bytes:
        self.pos += 1
        out = bytearray()
        depth = 1
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = data[self.pos]
            if c == 0x5C:  # backslash escape
                self.pos += 1
                if self.pos >= n:
                    break
                e = data[self.pos]
                esc = {0x6E: 10, 0x72: 13, 0x74: 9, 0x62: 8, 0x66: 12,
                       0x28: 40, 0x29: 41, 0x5C: 92}
                if e in esc:
                    out.append(esc[e])
                    self.pos += 1
                elif 0x30 <= e <= 0x37:  # octal \ddd
                    oct_digits = bytearray()
                    while len(oct_digits) < 3 and self.pos < n \
                            and 0x30 <= data[self.pos] <= 0x37:
                        oct_digits.append(data[self.pos])
                        self.pos += 1
                    out.append(int(oct_digits, 8) & 0xFF)
                elif e in (10, 13):  # line continuation
                    self.pos += 1
                    if e == 13 and self.pos < n and data[self.pos] == 10:
                        self.pos += 1
                else:
                    out.append(e)
                    self.pos += 1
                continue
            if c == 0x28:
                depth += 1
            elif c == 0x29:
                depth -= 1
                if depth == 0:
                    self.pos += 1
                    return bytes(out)
            out.append(c)
            self.pos += 1
        raise MalformedDocument("unterminated string")

    def _parse_hex_string(self) -> bytes:
        self.pos += 1
        end = self.data.find(b">", self.pos)
        if end < 0:
            raise MalformedDocument("unterminated hex string")
        hex_digits = re.sub(rb"[^0-9A-Fa-f]", b"", self.data[self.pos:end])
        if len(hex_digits) % 2:
            hex_digits += b"0"
        self.pos = end + 1
        return bytes.fromhex(hex_digits.decode("ascii"))

    def _parse_number_or_ref(self):
        start = self.pos
        num = self._read_number()
        if isinstance(num, int):
            save = self.pos
            self.skip_ws()
            second = self.peek(16)
            m = re.match(rb"(\d+)\s+R(?![\w])", second)
            if m:
                self.pos += m.end()
                return Ref(num, int(m.group(1)))
            self.pos = save
        del start
        return num

    def _read_number(self):
        self.skip_ws()
        m = re.match(rb"[+-]?(?:\d+\.\d*|\.\d+|\d+)",
                     self.data[self.pos:self.pos + 64])
        if not m:
            raise MalformedDocument("expected number")
        self.pos += m.end()
        token = m.group(0)
        return float(token) if b"." in token else int(token)


def _png_unpredict(data: bytes, columns: int) -> bytes:
    """Undo PNG Up/Sub/Average/Paeth predictors (single byte-per-pixel)."""
    row_len = columns + 1
    out = bytearray()
    prev = bytearray(columns)
    for r in range(0, len(data) - row_len + 1, row_len):
        ftype = data[r]
        row = bytearray(data[r + 1:r + row_len])
        if ftype == 1:   # Sub
            for i in range(1, columns):
                row[i] = (row[i] + row[i - 1]) & 0xFF
        elif ftype == 2:  # Up
            for i in range(columns):
                row[i] = (row[i] + prev[i]) & 0xFF
        elif ftype == 3:  # Average
            for i in range(columns):
                left = row[i - 1] if i else 0
                row[i] = (row[i] + ((left + prev[i]) >> 1)) & 0xFF
        elif ftype == 4:  # Paeth
            for i in range(columns):
                a = row[i - 1] if i else 0
                b, c = prev[i], (prev[i - 1] if i else 0)
                p = a + b - c
                pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                pred = a if pa <= pb and pa <= pc else (b if pb <= pc else c)
                row[i] = (row[i] + pred) & 0xFF
        out.extend(row)
        prev = row
    return bytes(out)


class PdfReader:
    """Random-access reader over one PDF file."""

    def __init__(self, path_or_bytes):
        if isinstance(path_or_bytes, (bytes, bytearray)):
            self.data = bytes(path_or_bytes)
        else:
            with open(path_or_bytes, "rb") as fh:
                self.data = fh.read()
        if not self.data.lstrip().startswith(b"%PDF"):
            raise MalformedDocument("missing %PDF header")
        self._objects: dict[int, object] = {}
        self._offsets: dict[int, tuple] = {}
        self._trailer: dict = {}
        self._load_xref()
        if "Encrypt" in self._trailer:
            raise MalformedDocument("encrypted documents are not supported")
        self._pages = self._collect_pages()
        if not self._pages:
            raise EmptyDocument("document has zero pages")

    # -- cross-reference loading ------------------------------------------

    def _load_xref(self) -> None:
        try:
            self._load_xref_chain()
        except MalformedDocument:
            self._offsets.clear()
        if not self._offsets or "Root" not in self._trailer:
            self._fallback_scan()
        if "Root" not in self._trailer:
            raise MalformedDocument("no document catalog")

    def _load_xref_chain(self) -> None:
        tail = self.data[-2048:]
        idx = tail.rfind(b"startxref")
        if idx < 0:
            raise MalformedDocument("startxref not found")
        lex = _Lexer(tail, idx + len(b"startxref"))
        offset = lex._read_number()
        seen = set()
        while isinstance(offset, int) and 0 <= offset < len(self.data) \
                and offset not in seen:
            seen.add(offset)
            offset = self._load_xref_section(offset)

    def _load_xref_section(self, offset: int):
        lex = _Lexer(self.data, offset)
        lex.skip_ws()
        if lex.peek(4) == b"xref":
            lex.pos += 4
            while True:
                lex.skip_ws()
                if lex.peek(7) == b"trailer":
                    lex.pos += 7
                    trailer = lex.parse_object()
                    break
                start = lex._read_number()
                count = lex._read_number()
                lex.skip_ws()
                for i in range(count):
                    entry = self.data[lex.pos:lex.pos + 20]
                    lex.pos += 20
                    m = re.match(rb"(\d{10}) (\d{5}) ([nf])", entry)
                    if not m:
                        raise MalformedDocument("corrupt xref entry")
                    if m.group(3) == b"n" and (start + i) not in self._offsets:
                        self._offsets[start + i] = ("classic", int(m.group(1)))
        else:
            trailer = self._load_xref_stream(offset)
        for key, value in trailer.items():
            self._trailer.setdefault(key, value)
        prev = trailer.get("Prev")
        return prev if isinstance(prev, int) else None

    def _load_xref_stream(self, offset: int) -> dict:
        obj = self._parse_object_at(offset)
        if not isinstance(obj, StreamObject) or obj.attrs.get("Type") != "XRef":
            raise MalformedDocument("expected cross-reference stream")
        data = self._decode_stream(obj)
        if data is None:
            raise MalformedDocument("undecodable cross-reference stream")
        w = [int(x) for x in obj.attrs["W"]]
        size = int(obj.attrs["Size"])
        index = obj.attrs.get("Index", [0, size])
        entry_len = sum(w)
        pos = 0

        def field(raw, k):
            s = sum(w[:k])
            chunk = raw[s:s + w[k]]
            return int.from_bytes(chunk, "big") if chunk else (1 if k == 0 else 0)

        for i in range(0, len(index), 2):
            start, count = int(index[i]), int(index[i + 1])
            for objnum in range(start, start + count):
                raw = data[pos:pos + entry_len]
                pos += entry_len
                if len(raw) < entry_len:
                    break
                etype = field(raw, 0)
                if objnum in self._offsets:
                    continue
                if etype == 1:
                    self._offsets[objnum] = ("classic", field(raw, 1))
                elif etype == 2:
                    self._offsets[objnum] = ("instream", field(raw, 1), field(raw, 2))
        return dict(obj.attrs)

    def _fallback_scan(self) -> None:
        """Rebuild the object map by scanning for `N G obj` markers."""
        for m in re.finditer(rb"(?<![\d])(\d+)\s+(\d+)\s+obj\b", self.data):
            self._offsets[int(m.group(1))] = ("classic", m.start())
        for m in re.finditer(rb"trailer", self.data):
            try:
                trailer = _Lexer(self.data, m.end()).parse_object()
            except MalformedDocument:
                continue
            if isinstance(trailer, dict):
                for key, value in trailer.items():
                    self._trailer[key] = value
        if "Root" not in self._trailer:
            # xref-stream documents have no `trailer`; look for a catalog
            for num in self._offsets:
                try:
                    obj = self._get(Ref(num, 0))
                except MalformedDocument:
                    continue
                attrs = obj.attrs if isinstance(obj, StreamObject) else obj
                if isinstance(attrs, dict) and attrs.get("Type") == "Catalog":
                    self._trailer["Root"] = Ref(num, 0)
                    break

    # -- object access -----------------------------------------------------

    def _parse_object_at(self, offset: int):
        lex = _Lexer(self.data, offset)
        lex.skip_ws()
        m = re.match(rb"(\d+)\s+(\d+)\s+obj", self.data[lex.pos:lex.pos + 64])
        if not m:
            raise MalformedDocument(f"no object at offset {offset}")
        lex.pos += m.end()
        obj = lex.parse_object()
        lex.skip_ws()
        if lex.peek(6) == b"stream":
            lex.pos += 6
            if self.data[lex.pos:lex.pos + 2] == b"\r\n":
                lex.pos += 2
            elif self.data[lex.pos:lex.pos + 1] == b"\n":
                lex.pos += 1
            length = self._resolve(obj.get("Length"))
            if not isinstance(length, int):
                end = self.data.find(b"endstream", lex.pos)
                length = max(0, end - lex.pos)
            raw = self.data[lex.pos:lex.pos + length]
            return StreamObject(obj, raw)
        return obj

    def _get(self, ref: Ref):
        if ref.num in self._objects:
            return self._objects[ref.num]
        entry = self._offsets.get(ref.num)
        if entry is None:
            return None
        if entry[0] == "classic":
            obj = self._parse_object_at(entry[1])
        else:
            obj = self._load_from_object_stream(entry[1], entry[2])
        self._objects[ref.num] = obj
        return obj

    def _load_from_object_stream(self, stream_num: int, idx: int):
        container = self._get(Ref(stream_num, 0))
        if not isinstance(container, StreamObject):
            raise MalformedDocument("object stream missing")
        data = self._decode_stream(container)
        if data is None:
            raise MalformedDocument("undecodable object stream")
        n = int(self._resolve(container.attrs.get("N", 0)))
        first = int(self._resolve(container.attrs.get("First", 0)))
        header = _Lexer(data, 0)
        pairs = [(header._read_number(), header._read_number()) for _ in range(n)]
        if idx >= len(pairs):
            raise MalformedDocument("object index outside object stream")
        return _Lexer(data, first + pairs[idx][1]).parse_object()

    def _resolve(self, obj):
        seen = 0
        while isinstance(obj, Ref) and seen < 32:
            obj = self._get(obj)
            seen += 1
        return obj

    def _decode_stream(self, stream: StreamObject) -> bytes | None:
        data = stream.raw
        filters = self._resolve(stream.attrs.get("Filter"))
        if filters is None:
            return data
        if not isinstance(filters, list):
            filters = [filters]
        parms = self._resolve(stream.attrs.get("DecodeParms"))
        if not isinstance(parms, list):
            parms = [parms]
        for i, filt in enumerate(filters):
            parm = self._resolve(parms[i]) if i < len(parms) else None
            if filt == "FlateDecode":
                try:
                    data = zlib.decompress(data)
                except zlib.error:
                    return None
                if isinstance(parm, dict):
                    predictor = int(self._resolve(parm.get("Predictor", 1)))
                    if predictor >= 10:
                        columns = int(self._resolve(parm.get("Columns", 1)))
                        data = _png_unpredict(data, columns)
                    elif predictor != 1:
                        return None
            elif filt == "ASCII85Decode":
                body = data.split(b"~>")[0].strip()
                if body.startswith(b"<~"):
                    body = body[2:]
                try:
                    data = base64.a85decode(re.sub(rb"\s", b"", body), adobe=False)
                except ValueError:
                    return None
            elif filt == "ASCIIHexDecode":
                hex_digits = re.sub(rb"[^0-9A-Fa-f]", b"", data.split(b">")[0])
                if len(hex_digits) % 2:
                    hex_digits += b"0"
                data = bytes.fromhex(hex_digits.decode("ascii"))
            else:
                return None
        return data

    # -- page tree ----------------------------------------------------------

    def _collect_pages(self) -> list[dict]:
        root = self._resolve(self._trailer.get("Root"))
        if not isinstance(root, dict):
            raise MalformedDocument("document catalog unreadable")
        pages_ref = root.get("Pages")
        pages = []
        inheritable = ("MediaBox", "Rotate", "Resources")
        stack = [(pages_ref, {})]
        visited = set()
        while stack:
            node_ref, inherited = stack.pop()
            if isinstance(node_ref, Ref):
                if node_ref.num in visited:
                    continue
                visited.add(node_ref.num)
            node = self._resolve(node_ref)
            if not isinstance(node, dict):
                continue
            attrs = dict(inherited)
            for key in inheritable:
                if key in node:
                    attrs[key] = node[key]
            ntype = node.get("Type")
            if ntype == "Page" or ("Kids" not in node and ntype != "Pages"):
                page = dict(node)
                for key in inheritable:
                    page.setdefault(key, attrs.get(key))
                pages.append(page)
            else:
                kids = self._resolve(node.get("Kids")) or []
                for kid in reversed(kids):
                    stack.append((kid, attrs))
        return pages

    @property
    def page_count(self) -> int:
        return len(self._pages)

    def page_size(self, index0: int) -> tuple[float, float]:
        """(width, height) in points, rotation applied."""
        page = self._pages[index0]
        box = self._resolve(page.get("MediaBox")) or [0, 0, 612, 792]
        box = [float(self._resolve(v)) for v in box]
        width, height = abs(box[2] - box[0]), abs(box[3] - box[1])
        rotate = int(self._resolve(page.get("Rotate")) or 0) % 360
        if rotate in (90, 270):
            width, height = height, width
        return width, height

    def page_text_runs(self, index0: int) -> list[TextRun]:
        """Best-effort extraction of positioned text; [] when unreadable."""
        page = self._pages[index0]
        contents = self._resolve(page.get("Contents"))
        streams = contents if isinstance(contents, list) else [contents]
        decoded = []
        for item in streams:
            item = self._resolve(item)
            if isinstance(item, StreamObject):
                data = self._decode_stream(item)
                if data:
                    decoded.append(data)
        if not decoded:
            return []
        try:
            return _extract_text_runs(b"\n".join(decoded))
        except Exception:
            return []


def _extract_text_runs(content: bytes) -> list[TextRun]:
    lex = _Lexer(content)
    runs: list[TextRun] = []
    stack: list = []
    x = y = 0.0
    size = 12.0
    leading = 0.0
    n = len(content)

    def emit(raw: bytes):
        nonlocal x
        text = raw.decode("latin-1", "replace")
        printable = "".join(ch if ch.isprintable() else " " for ch in text)
        if printable.strip():
            runs.append(TextRun(x, y, size, printable))
        x += 0.5 * size * len(text)  # crude advance

    while lex.pos < n:
        lex.skip_ws()
        if lex.pos >= n:
            break
        c = content[lex.pos:lex.pos + 1]
        if c == b"(" or c == b"[" or c == b"<" or c == b"/" or c.isdigit() \
                or c in (b"+", b"-", b"."):
            try:
                stack.append(lex.parse_object())
            except MalformedDocument:
                lex.pos += 1
            continue
        op = lex.read_token()
        if not op:
            lex.pos += 1
            continue
        try:
            if op == b"BT":
                x = y = 0.0
            elif op == b"Tf" and stack:
                size = float(stack[-1])
            elif op == b"Td" and len(stack) >= 2:
                x += float(stack[-2]); y += float(stack[-1])
            elif op == b"TD" and len(stack) >= 2:
                leading = -float(stack[-1])
                x += float(stack[-2]); y += float(stack[-1])
            elif op == b"Tm" and len(stack) >= 6:
                x, y = float(stack[-2]), float(stack[-1])
            elif op == b"TL" and stack:
                leading = float(stack[-1])
            elif op == b"T*":
                y -= leading
            elif op == b"Tj" and stack and isinstance(stack[-1], bytes):
                emit(stack[-1])
            elif op in (b"'", b'"') and stack and isinstance(stack[-1], bytes):
                y -= leading
                emit(stack[-1])
            elif op == b"TJ" and stack and isinstance(stack[-1], list):
                parts = [p for p in stack[-1] if isinstance(p, bytes)]
                if parts:
                    emit(b"".join(parts))
        except (TypeError, ValueError):
            pass
        stack.clear()
    return runs


# ---------------------------------------------------------------------------
# Rasterization
# ---------------------------------------------------------------------------

_FONT_CACHE: dict[int, ImageFont.ImageFont] = {}


def _font(size_px: int):
    if size_px not in _FONT_CACHE:
        try:
            _FONT_CACHE[size_px] = ImageFont.load_default(size=size_px)
        except TypeError:
            _FONT_CACHE[size_px] = ImageFont.load_default()
    return _FONT_CACHE[size_px]


def pixel_dimensions(width_pt: float, height_pt: float, dpi: int) -> tuple[int, int]:
    return max(1, round(width_pt / 72.0 * dpi)), max(1, round(height_pt / 72.0 * dpi))


def render_page_png(reader: PdfReader, index0: int, dpi: int) -> tuple[bytes, int, int]:
    """Render one page to PNG bytes at exactly size-in-points x dpi pixels."""
    width_pt, height_pt = reader.page_size(index0)
    width_px, height_px = pixel_dimensions(width_pt, height_pt, dpi)
    scale = dpi / 72.0
    img = Image.new("RGB", (width_px, height_px), "white")
    draw = ImageDraw.Draw(img)
    margin = max(1, round(0.04 * min(width_px, height_px)))
    draw.rectangle([margin, margin, width_px - margin, height_px - margin],
                   outline=(210, 210, 210))
    for run in reader.page_text_runs(index0):
        size_px = max(6, round(run.size * scale))
        px = round(run.x * scale)
        py = height_px - round(run.y * scale) - size_px
        safe = "".join(ch if ord(ch) < 0x250 else "?" for ch in run.text)
        draw.text((px, py), safe, fill=(20, 20, 20), font=_font(size_px))
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False)
    return buf.getvalue(), width_px, height_px
