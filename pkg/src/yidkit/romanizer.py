"""Romanized Yiddish -> script conversion.

Words of Germanic stock convert by phonetic rules; words of Hebrew/Aramaic
origin need a lexicon because their spelling is not recoverable from
pronunciation.  Conversion tries, in order: the hardcoded table, the
(word, pos) override table, the lexicon (with per-entry hyphen strategy),
hyphen decomposition, and finally the phonetic rules.  Every result carries
the route that produced it so conversions stay auditable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

from .align import AlignmentReport, smith_waterman
from .inventory import CharInventory, ScriptText

ROUTES = ("hardcoded", "override", "lexicon", "components", "phonetic")
HYPHEN_STRATEGIES = ("whole-word", "strip-hyphen", "split-components")

# Punctuation that may cling to a treebank token (speaker labels like
# "rokhl:", sentence-final "bukh.").  Stripped, converted, reattached.
_EDGE_PUNCT = set('.,?!:;"()')


class RomanizerError(ValueError):
    pass


class EmptyInput(RomanizerError):
    def __init__(self):
        super().__init__("empty romanized input")


class RuleGap(RomanizerError):
    def __init__(self, word: str, position: int):
        self.word = word
        self.position = position
        super().__init__(f"no phonetic rule matches {word!r} at position {position}")


@dataclass(frozen=True)
class Rule:
    pattern: str
    output: ScriptText
    position: str  # initial | final | any


@dataclass
class ConversionResult:
    script: ScriptText
    route: str
    warnings: list[str] = field(default_factory=list)


class PhoneticRuleSet:
    """Ordered longest-match-first rules; at most one rule fires per position."""

    def __init__(self, rules: list[Rule]):
        self.rules = list(rules)
        seen = set()
        for r in self.rules:
            if r.position not in ("initial", "final", "any"):
                raise RomanizerError(f"rule {r.pattern!r}: bad position {r.position!r}")
            if not r.pattern:
                raise RomanizerError("empty rule pattern")
            key = (r.pattern, r.position)
            if key in seen:
                raise RomanizerError(f"duplicate rule for {key}")
            seen.add(key)
        self._by_pattern: dict[str, list[Rule]] = {}
        for r in self.rules:
            self._by_pattern.setdefault(r.pattern, []).append(r)
        self._lengths = sorted({len(r.pattern) for r in self.rules}, reverse=True)

    @classmethod
    def from_file(cls, path) -> "PhoneticRuleSet":
        with open(path, "r", encoding="utf-8") as fh:
            return cls._parse(fh.read())

    @classmethod
    def load_default(cls) -> "PhoneticRuleSet":
        return cls._parse(resources.files("yidkit.data").joinpath("phonetic_rules.tsv").read_text("utf-8"))

    @classmethod
    def _parse(cls, text: str) -> "PhoneticRuleSet":
        rules = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise RomanizerError(f"rules line {lineno}: expected 3 fields")
            rules.append(Rule(*fields))
        return cls(rules)

    def convert(self, word: str) -> ScriptText:
        """Apply rules left to right.  Positions restart after ' and -."""
        out = []
        i, n = 0, len(word)
        while i < n:
            at_initial = i == 0 or word[i - 1] in "'-"
            chosen = None
            for length in self._lengths:
                seg = word[i:i + length]
                if len(seg) < length or seg not in self._by_pattern:
                    continue
                at_final = i + length == n or word[i + length] in "'-"
                applicable = [r for r in self._by_pattern[seg]
                              if r.position == "any"
                              or (r.position == "initial" and at_initial)
                              or (r.position == "final" and at_final)]
                if applicable:
                    # position-specific rules outrank "any" at the same length
                    applicable.sort(key=lambda r: r.position == "any")
                    chosen = applicable[0]
                    break
            if chosen is None:
                raise RuleGap(word, i)
            out.append(chosen.output)
            i += len(chosen.pattern)
        return "".join(out)


@dataclass(frozen=True)
class LexiconEntry:
    romanized: str
    script: ScriptText
    strategy: str


class LoshnKoydeshLexicon:
    """Lexicon plus override/hardcoded side tables."""

    def __init__(self, entries: list[LexiconEntry],
                 overrides: dict[tuple[str, str | None], str] | None = None,
                 hardcoded: dict[tuple[str, str | None], ScriptText] | None = None,
                 inventory: CharInventory | None = None):
        self.entries = {e.romanized: e for e in entries}
        if len(self.entries) != len(entries):
            raise RomanizerError("duplicate lexicon keys")
        self.overrides = dict(overrides or {})
        self.hardcoded = dict(hardcoded or {})
        for e in entries:
            if e.strategy not in HYPHEN_STRATEGIES:
                raise RomanizerError(f"{e.romanized}: bad hyphen strategy {e.strategy!r}")
        if inventory is not None:
            self.validate(inventory)

    def validate(self, inventory: CharInventory) -> None:
        """Entries must decode and respect final-form placement."""
        scripts = [(f"lexicon:{e.romanized}", e.script) for e in self.entries.values()]
        scripts += [(f"hardcoded:{k}", v) for k, v in self.hardcoded.items()]
        scripts += [(f"override:{k}", v.removeprefix("script:"))
                    for k, v in self.overrides.items() if v != "phonetic"]
        for origin, script in scripts:
            inventory.symbols(script)
            if inventory.find_medial_final_forms(script):
                raise RomanizerError(f"{origin}: medial final form in {script!r}")
            if inventory.apply_final_forms(script) != script:
                raise RomanizerError(f"{origin}: missing final form in {script!r}")

    @classmethod
    def load_default(cls, inventory: CharInventory | None = None) -> "LoshnKoydeshLexicon":
        data = resources.files("yidkit.data")
        return cls(
            cls.parse_entries(data.joinpath("lexicon.tsv").read_text("utf-8")),
            cls.parse_overrides(data.joinpath("overrides.tsv").read_text("utf-8")),
            cls.parse_hardcoded(data.joinpath("hardcoded.tsv").read_text("utf-8")),
            inventory=inventory,
        )

    @staticmethod
    def _rows(text: str, n_fields: int, what: str):
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != n_fields:
                raise RomanizerError(f"{what} line {lineno}: expected {n_fields} fields")
            yield fields

    @classmethod
    def parse_entries(cls, text: str) -> list[LexiconEntry]:
        return [LexiconEntry(*f) for f in cls._rows(text, 3, "lexicon")]

    @classmethod
    def parse_overrides(cls, text: str) -> dict[tuple[str, str | None], str]:
        out = {}
        for word, pos, action in cls._rows(text, 3, "overrides"):
            if action != "phonetic" and not action.startswith("script:"):
                raise RomanizerError(f"override {word}/{pos}: bad action {action!r}")
            out[(word, pos or None)] = action
        return out

    @classmethod
    def parse_hardcoded(cls, text: str) -> dict[tuple[str, str | None], ScriptText]:
        return {(word, pos or None): script for word, pos, script in cls._rows(text, 3, "hardcoded")}


class RespellTable:
    """Tag-conditional respellings applied before conversion."""

    def __init__(self, rows: dict[tuple[str, str], str] | None = None):
        self.rows = dict(rows or {})

    @classmethod
    def load_default(cls) -> "RespellTable":
        text = resources.files("yidkit.data").joinpath("respell.tsv").read_text("utf-8")
        rows = {}
        for pos, src, dst in LoshnKoydeshLexicon._rows(text, 3, "respell"):
            rows[(pos, src)] = dst
        return cls(rows)

    def apply(self, word: str, pos: str | None) -> str:
        if pos is None:
            return word
        return self.rows.get((pos, word), word)


class Detransliterator:
    """Full conversion pipeline over one word at a time."""

    def __init__(self, inventory: CharInventory | None = None,
                 rules: PhoneticRuleSet | None = None,
                 lexicon: LoshnKoydeshLexicon | None = None,
                 respell_table: RespellTable | None = None):
        self.inventory = inventory or CharInventory.load_default()
        self.rules = rules or PhoneticRuleSet.load_default()
        self.lexicon = lexicon or LoshnKoydeshLexicon.load_default(self.inventory)
        self.respell_table = respell_table or RespellTable.load_default()

    def respell(self, word: str, pos: str | None = None) -> str:
        return self.respell_table.apply(word, pos)

    def detransliterate(self, word: str, pos: str | None = None) -> ConversionResult:
        if not word:
            raise EmptyInput()
        hard = self.lexicon.hardcoded.get((word, pos))
        if hard is not None:
            return ConversionResult(hard, "hardcoded")
        action = self.lexicon.overrides.get((word, pos))
        if action is not None:
            if action == "phonetic":
                return ConversionResult(self._phonetic(word), "override")
            return ConversionResult(action.removeprefix("script:"), "override")
        entry = self.lexicon.entries.get(word)
        if entry is not None and ("-" not in word or entry.strategy == "whole-word"):
            return ConversionResult(entry.script, "lexicon")
        if "-" in word:
            stripped = self.lexicon.entries.get(word.replace("-", ""))
            if stripped is not None and stripped.strategy == "strip-hyphen":
                return ConversionResult(stripped.script, "lexicon")
        lead, core, trail = self._split_edge_punct(word)
        if core and (lead or trail):
            inner = self.detransliterate(core, pos)
            return ConversionResult(lead + inner.script + trail, inner.route, inner.warnings)
        if "-" in word and word.strip("-"):
            scripts, warnings = [], []
            for part in word.split("-"):
                if part:
                    r = self.detransliterate(part, pos)
                    scripts.append(r.script)
                    warnings.extend(r.warnings)
                else:
                    scripts.append("")
            return ConversionResult("-".join(scripts), "components", warnings)
        return ConversionResult(self._phonetic(word), "phonetic")

    def _phonetic(self, word: str) -> ScriptText:
        return self.inventory.apply_final_forms(self.rules.convert(word))

    @staticmethod
    def _split_edge_punct(word: str) -> tuple[str, str, str]:
        start, end = 0, len(word)
        while start < end and word[start] in _EDGE_PUNCT:
            start += 1
        while end > start and word[end - 1] in _EDGE_PUNCT:
            end -= 1
        return word[:start], word[start:end], word[end:]

    # -- verification ------------------------------------------------------

    def verify_against_source(self, converted: list[ScriptText], source: list[ScriptText],
                              match: float = 2.0, mismatch: float = -1.0, gap: float = -1.0,
                              soft_threshold: float = 0.5) -> AlignmentReport:
        """Locally align converted tokens against OCR source tokens."""
        return smith_waterman(converted, source, match=match, mismatch=mismatch,
                              gap=gap, soft_threshold=soft_threshold)

    def existence_check(self, tokens: list[ScriptText], freq) -> list[tuple[ScriptText, list[ScriptText]]]:
        """Tokens unattested in the frequency table at every reduction level."""
        missing = []
        for tok in tokens:
            forms = [tok, self.inventory.reduce(tok, 1), self.inventory.reduce(tok, 2)]
            if all(freq[f] == 0 for f in forms):
                missing.append((tok, forms))
        return missing
