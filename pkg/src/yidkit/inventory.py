"""Yiddish script <-> ASCII notation codec.

The character inventory is a versioned TSV shipped with the package.  Each
entry maps one Unicode cluster (a letter, optionally with its combining
diacritic) to a unique, prefix-free ASCII form, so text can round-trip
between the two notations without loss.  The ASCII side is what the rest of
the toolkit operates on: one- and two-character codes built from plain ASCII,
with whitespace passing through verbatim.
"""

from __future__ import annotations

import hashlib
import unicodedata
from dataclasses import dataclass
from importlib import resources

# ScriptText values are plain str in the ASCII notation; the alias marks
# intent in signatures.
ScriptText = str

CLASSES = ("base-letter", "final-form", "diacritic-composed", "punctuation", "digit", "other")


class InventoryError(ValueError):
    """Malformed inventory data; raised at load time."""


class UnknownCharacter(ValueError):
    """Unicode input contains a cluster outside the inventory."""

    def __init__(self, char: str, offset: int):
        self.char = char
        self.offset = offset
        super().__init__(f"unknown character {char!r} (U+{ord(char[0]):04X}) at offset {offset}")


class DecodeError(ValueError):
    """ASCII input is not valid notation."""

    def __init__(self, offset: int, detail: str = ""):
        self.offset = offset
        super().__init__(f"undecodable notation at offset {offset}" + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class InventoryEntry:
    cluster: str        # NFC Unicode cluster
    ascii_form: str
    name: str
    cls: str
    reduction_l1: str   # letter_name of the level-1 target
    reduction_l2: str


# Folding applied by normalize_unicode in addition to NFC.  All targets are
# fixed points of the fold, keeping the function idempotent.
_FOLDS = str.maketrans({
    " ": " ",   # no-break space
    "—": "-",   # em dash
    "־": "-",   # Hebrew maqaf
    "׳": "'",   # Hebrew geresh
    "״": '"',   # Hebrew gershayim
    "‘": "'",
    "’": "'",
    "“": '"',
    "”": '"',
})


def normalize_unicode(text: str) -> str:
    """Canonical-composition normalization plus minor character folding.

    Idempotent: combining sequences are left in NFC form and every folded
    character maps to an unfoldable ASCII target.
    """
    return unicodedata.normalize("NFC", text).translate(_FOLDS)


def _parse_hex_cluster(field: str) -> str:
    try:
        return "".join(chr(int(part, 16)) for part in field.split("+"))
    except ValueError as exc:
        raise InventoryError(f"bad codepoint field {field!r}") from exc


class CharInventory:
    """Validated, bidirectional character mapping."""

    def __init__(self, entries: list[InventoryEntry], checksum: str | None = None):
        self.entries = list(entries)
        self._validate()
        self.by_ascii = {e.ascii_form: e for e in self.entries}
        self.by_cluster = {e.cluster: e for e in self.entries}
        self.by_name = {e.name: e for e in self.entries}
        # encoder index: first codepoint -> clusters sorted longest first
        self._enc: dict[str, list[str]] = {}
        for e in self.entries:
            self._enc.setdefault(e.cluster[0], []).append(e.cluster)
        for lst in self._enc.values():
            lst.sort(key=len, reverse=True)
        self._leads = {e.ascii_form[0] for e in self.entries if len(e.ascii_form) > 1}
        self._singles = {e.ascii_form for e in self.entries if len(e.ascii_form) == 1}
        # final form letter <-> non-final counterpart, via the name convention
        self.final_of = {}
        self.base_of_final = {}
        for e in self.entries:
            if e.cls == "final-form":
                base = self.by_name[e.name.removeprefix("final-")]
                self.final_of[base.ascii_form] = e.ascii_form
                self.base_of_final[e.ascii_form] = base.ascii_form
        self.checksum = checksum if checksum is not None else self._content_checksum()

    # -- construction ---------------------------------------------------

    @classmethod
    def from_file(cls, path) -> "CharInventory":
        with open(path, "rb") as fh:
            data = fh.read()
        return cls._from_bytes(data)

    @classmethod
    def load_default(cls) -> "CharInventory":
        data = resources.files("yidkit.data").joinpath("inventory.tsv").read_bytes()
        return cls._from_bytes(data)

    @classmethod
    def _from_bytes(cls, data: bytes) -> "CharInventory":
        entries = []
        for lineno, raw in enumerate(data.decode("utf-8").splitlines(), start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 6:
                raise InventoryError(f"line {lineno}: expected 6 fields, got {len(fields)}")
            hexes, ascii_form, name, cls_, red1, red2 = fields
            if cls_ not in CLASSES:
                raise InventoryError(f"line {lineno}: unknown class {cls_!r}")
            entries.append(InventoryEntry(_parse_hex_cluster(hexes), ascii_form, name, cls_, red1, red2))
        return cls(entries, checksum=hashlib.sha256(data).hexdigest())

    def _content_checksum(self) -> str:
        blob = "\n".join(
            "\t".join(("+".join(f"{ord(c):04X}" for c in e.cluster), e.ascii_form, e.name, e.cls, e.reduction_l1, e.reduction_l2))
            for e in self.entries
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def _validate(self) -> None:
        if not self.entries:
            raise InventoryError("empty inventory")
        forms = [e.ascii_form for e in self.entries]
        if len(set(forms)) != len(forms):
            dupes = sorted({f for f in forms if forms.count(f) > 1})
            raise InventoryError(f"duplicate ascii forms: {dupes}")
        clusters = [e.cluster for e in self.entries]
        if len(set(clusters)) != len(clusters):
            raise InventoryError("duplicate unicode clusters")
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise InventoryError("duplicate letter names")
        for f in forms:
            if not f or not f.isascii() or any(ch.isspace() for ch in f):
                raise InventoryError(f"bad ascii form {f!r}")
        # prefix-freeness makes decoding unambiguous; abort if violated
        formset = set(forms)
        for f in forms:
            for k in range(1, len(f)):
                if f[:k] in formset:
                    raise InventoryError(f"ascii form {f!r} has prefix {f[:k]!r} also in inventory")
        by_name = {e.name: e for e in self.entries}
        finals = [e for e in self.entries if e.cls == "final-form"]
        if len(finals) != 5:
            raise InventoryError(f"expected 5 final-form entries, got {len(finals)}")
        for e in finals:
            counterpart = e.name.removeprefix("final-")
            if counterpart == e.name or counterpart not in by_name:
                raise InventoryError(f"final form {e.name!r} lacks a non-final counterpart")
        for e in self.entries:
            if unicodedata.normalize("NFC", e.cluster) != e.cluster:
                raise InventoryError(f"cluster for {e.name} is not NFC-stable")
            for red in (e.reduction_l1, e.reduction_l2):
                if red not in by_name:
                    raise InventoryError(f"{e.name}: reduction target {red!r} not in inventory")
        for e in self.entries:
            r1 = by_name[e.reduction_l1]
            r2 = by_name[e.reduction_l2]
            if by_name[r1.reduction_l1] is not r1 or by_name[r2.reduction_l2] is not r2:
                raise InventoryError(f"{e.name}: reduction targets are not fixed points")
            # level 2 after level 1 must equal level 2 directly
            if by_name[r1.reduction_l2] is not r2:
                raise InventoryError(f"{e.name}: level-2 reduction not reachable through level 1")

    # -- codec ----------------------------------------------------------

    def encode(self, text: str) -> ScriptText:
        """Unicode (already normalized) -> ASCII notation.  Whitespace passes through."""
        out = []
        i, n = 0, len(text)
        while i < n:
            ch = text[i]
            if ch.isspace():
                out.append(ch)
                i += 1
                continue
            matched = None
            for cluster in self._enc.get(ch, ()):
                if text.startswith(cluster, i):
                    matched = cluster
                    break
            if matched is None:
                raise UnknownCharacter(ch, i)
            out.append(self.by_cluster[matched].ascii_form)
            i += len(matched)
        return "".join(out)

    def decode(self, text: ScriptText) -> str:
        """ASCII notation -> Unicode.  Exact inverse of encode on its image."""
        return "".join(sym if ws else self.by_ascii[sym].cluster
                       for _, sym, ws in self.iter_symbols(text))

    def iter_symbols(self, text: ScriptText):
        """Yield (offset, symbol, is_whitespace) over ASCII notation."""
        i, n = 0, len(text)
        while i < n:
            ch = text[i]
            if ch.isspace():
                yield i, ch, True
                i += 1
                continue
            if ch in self._leads:
                pair = text[i:i + 2]
                if len(pair) < 2 or pair not in self.by_ascii:
                    raise DecodeError(i, f"incomplete or unknown code {pair!r}")
                yield i, pair, False
                i += 2
            elif ch in self._singles:
                yield i, ch, False
                i += 1
            else:
                raise DecodeError(i, f"unknown code {ch!r}")

    def symbols(self, text: ScriptText) -> list[str]:
        """Non-whitespace symbols of ASCII notation, in order."""
        return [sym for _, sym, ws in self.iter_symbols(text) if not ws]

    def is_decodable(self, text: ScriptText) -> bool:
        try:
            for _ in self.iter_symbols(text):
                pass
        except DecodeError:
            return False
        return True

    # -- derived operations ----------------------------------------------

    def reduce(self, text: ScriptText, level: int) -> ScriptText:
        """Map each symbol to its diacritic-reduction target at the given level."""
        if level not in (1, 2):
            raise ValueError(f"reduction level must be 1 or 2, got {level}")
        out = []
        for _, sym, ws in self.iter_symbols(text):
            if ws:
                out.append(sym)
            else:
                e = self.by_ascii[sym]
                target = e.reduction_l1 if level == 1 else e.reduction_l2
                out.append(self.by_name[target].ascii_form)
        return "".join(out)

    def find_medial_final_forms(self, token: ScriptText) -> list[tuple[int, str]]:
        """Positions of final-form letters not at token end or before a hyphen.

        Returns (character offset into the ASCII token, letter_name) pairs.
        """
        syms = list(self.iter_symbols(token))
        bad = []
        for idx, (off, sym, ws) in enumerate(syms):
            if ws or self.by_ascii[sym].cls != "final-form":
                continue
            nxt = syms[idx + 1][1] if idx + 1 < len(syms) else None
            if nxt is not None and nxt != "-":
                bad.append((off, self.by_ascii[sym].name))
        return bad

    def apply_final_forms(self, token: ScriptText) -> ScriptText:
        """Rewrite the five convertible letters to final form at token end and before hyphens."""
        syms = self.symbols(token)
        for idx, sym in enumerate(syms):
            at_end = idx == len(syms) - 1
            before_hyphen = idx + 1 < len(syms) and syms[idx + 1] == "-"
            if (at_end or before_hyphen) and sym in self.final_of:
                syms[idx] = self.final_of[sym]
        return "".join(syms)

    def letter_classes(self, text: ScriptText) -> dict[str, int]:
        """Symbol counts per inventory class (whitespace excluded)."""
        counts: dict[str, int] = {}
        for _, sym, ws in self.iter_symbols(text):
            if not ws:
                cls = self.by_ascii[sym].cls
                counts[cls] = counts.get(cls, 0) + 1
        return counts
