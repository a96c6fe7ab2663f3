"""Named-entity recognition: provider protocol, ensembling, location filtering.

The pipeline does not depend on one specific NER system. Anything exposing
``name`` and ``spans(text, language)`` can act as a provider; the ensemble is
the union of all providers' spans with exact duplicates removed. Spans that
merely overlap are both kept, since two systems disagreeing on boundaries is
signal, not noise, for the downstream ranker.
"""

from __future__ import annotations

import dataclasses
import re
from typing import Any, Iterable, Protocol, Sequence

from .corpus import ParsedMention

# Entity classes that count as location mentions across the supported tagsets.
LOCATION_LABELS = frozenset({"loc", "location", "geopolitical area", "gpe"})


def normalize_label(label: str) -> str:
    return label.strip().casefold()


def is_location_label(label: str) -> bool:
    return normalize_label(label) in LOCATION_LABELS


@dataclasses.dataclass(frozen=True)
class NerSpan:
    """One entity occurrence found by one provider."""

    surface: str
    start: int
    end: int
    label: str
    provider: str

    def validate(self, text: str) -> None:
        if self.end <= self.start or self.start < 0 or self.end > len(text):
            raise ValueError(f"span ({self.start}, {self.end}) out of bounds")
        if text[self.start : self.end] != self.surface:
            raise ValueError(f"span surface {self.surface!r} does not match text")

    @staticmethod
    def from_json(d: dict[str, Any]) -> "NerSpan":
        return NerSpan(
            surface=d["surface"],
            start=d["start"],
            end=d["end"],
            label=d["label"],
            provider=d["provider"],
        )

    def to_json(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


class NerProvider(Protocol):
    name: str

    def spans(self, text: str, language: str) -> list[NerSpan]: ...


class GazetteerNer:
    """Dictionary-based provider for tests and demos.

    Finds every whole-word occurrence of each gazetteer name, so its output is
    a pure function of (gazetteer, text). Longer names do not suppress shorter
    ones; deduplication is the ensemble's job.
    """

    def __init__(self, entries: dict[str, str], name: str = "gazetteer"):
        self.name = name
        self._patterns = [
            (re.compile(r"(?<!\w)" + re.escape(entry) + r"(?!\w)"), label)
            for entry, label in sorted(entries.items())
        ]

    def spans(self, text: str, language: str) -> list[NerSpan]:
        found = []
        for pattern, label in self._patterns:
            for match in pattern.finditer(text):
                found.append(
                    NerSpan(
                        surface=match.group(0),
                        start=match.start(),
                        end=match.end(),
                        label=label,
                        provider=self.name,
                    )
                )
        return sorted(found, key=_span_order)


class SpacyNer:
    """Adapter over a loaded spaCy pipeline (optional dependency)."""

    def __init__(self, model: str = "en_core_web_sm", name: str = "spacy"):
        try:
            import spacy
        except ImportError as exc:
            raise ImportError(
                "spaCy is not installed; install it or use another provider"
            ) from exc
        self.name = name
        self._nlp = spacy.load(model)

    def spans(self, text: str, language: str) -> list[NerSpan]:
        return [
            NerSpan(
                surface=ent.text,
                start=ent.start_char,
                end=ent.end_char,
                label=ent.label_,
                provider=self.name,
            )
            for ent in self._nlp(text).ents
        ]


def ensemble_spans(
    text: str, language: str, providers: Sequence[NerProvider]
) -> list[NerSpan]:
    """Union of all providers' spans, deduplicated and sorted by offset.

    Two spans are duplicates when (start, end, normalized label) coincide; the
    first provider's span is kept. Overlapping but non-identical spans all
    survive.
    """
    seen: set[tuple[int, int, str]] = set()
    merged: list[NerSpan] = []
    for provider in providers:
        for span in provider.spans(text, language):
            span.validate(text)
            key = (span.start, span.end, normalize_label(span.label))
            if key in seen:
                continue
            seen.add(key)
            merged.append(span)
    return sorted(merged, key=_span_order)


def location_spans(
    text: str, language: str, providers: Sequence[NerProvider]
) -> list[NerSpan]:
    """Ensemble spans restricted to location entity classes."""
    return [
        span
        for span in ensemble_spans(text, language, providers)
        if is_location_label(span.label)
    ]


def spans_to_mentions(spans: Iterable[NerSpan]) -> list[ParsedMention]:
    """Convert spans to corpus mentions (ids unknown at recognition time)."""
    return [
        ParsedMention(surface=span.surface, start=span.start, end=span.end)
        for span in spans
    ]


def _span_order(span: NerSpan) -> tuple[int, int, str]:
    return (span.start, span.end, normalize_label(span.label))
